//! Randomized surveys over coefficient space.
//!
//! Each sample draws a coefficient vector from a seeded distribution,
//! classifies it against the four potential-class conditions (Morse,
//! unique extrema, and the two Cartan estimates), and aggregates verdicts.
//! The per-sample seed is one splitmix64 step of `master_seed XOR
//! sample_index`, so the whole survey is a pure function of its
//! configuration, samples can run in any order on any number of threads,
//! and the output CSV is byte-identical across reruns.
//!
//! Verdicts are tri-state throughout. Cartan sweeps at desk-scale K can be
//! budget-limited, and an unresolved estimate must not masquerade as a
//! pass: classification reports `inconclusive` in that case. Optional
//! spectrum checks are recorded alongside the class verdict but never
//! enter it.
//!
//! Line slices classify the segment (1-t)·c_start + t·c_end on a uniform
//! t-grid for the Morse and extrema conditions only, then bracket each
//! failing run by bisection. Failure sets of positive codimension show up
//! as isolated failing grid points whose measured fraction shrinks like
//! 1/steps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cartan::{cartan_sweep, ConditionKind, Sampler, SweepGrids, Verdict};
use crate::error::{Error, Result};
use crate::morse::{
    extrema_report_from_points, find_critical_points, morse_report_from_points, MorseOptions,
};
use crate::potential::{CoefficientVector, PotentialShape, TorusPoint, TrigPolynomial};
use crate::rng::{derive_seed, Stream};
use crate::spectrum::{approximate_spectrum, default_gap_resolution, OperatorConfig, PhaseMode};

/// Coefficient sampling distribution.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    Gaussian { sigma: f64 },
    UniformBall { radius: f64 },
}

/// Deterministic coefficient sample for (shape, distribution, seed).
pub fn sample_coefficients(
    shape: PotentialShape,
    distribution: &Distribution,
    seed: u64,
) -> CoefficientVector {
    let mut stream = Stream::new(seed);
    let n = shape.dim();
    let values = match distribution {
        Distribution::Gaussian { sigma } => {
            (0..n).map(|_| sigma * stream.normal()).collect::<Vec<f64>>()
        }
        Distribution::UniformBall { radius } => {
            // normal direction scaled by R·u^(1/N) is uniform in the ball
            let raw: Vec<f64> = (0..n).map(|_| stream.normal()).collect();
            let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                vec![0.0; n]
            } else {
                let r = radius * stream.uniform().powf(1.0 / n as f64);
                raw.iter().map(|v| v * r / norm).collect()
            }
        }
    };
    CoefficientVector::new(shape, values).expect("sampled values are finite")
}

/// Cartan sweep configuration used during classification.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CartanOptions {
    pub k_list: Vec<f64>,
    pub grids: SweepGrids,
    pub samples: u64,
}

impl Default for CartanOptions {
    fn default() -> Self {
        // desk-scale defaults: resolvable K range, light grids
        CartanOptions {
            k_list: vec![2.0, 3.0, 4.0, 5.0, 6.0],
            grids: SweepGrids {
                h_count: 16,
                eta_count: 8,
                h0_count: 8,
                ..SweepGrids::default()
            },
            samples: 100_000,
        }
    }
}

/// Optional spectrum check recorded alongside classification.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumCheckOptions {
    pub lambda: f64,
    pub omega: Vec<f64>,
    pub l: usize,
    pub phases: usize,
    /// None picks the default finite-size resolution.
    pub resolution: Option<f64>,
}

/// Options for one classification run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifyOptions {
    pub morse: MorseOptions,
    /// None skips conditions (iii)/(iv); the class verdict is then at best
    /// inconclusive.
    pub cartan: Option<CartanOptions>,
    pub spectrum: Option<SpectrumCheckOptions>,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            morse: MorseOptions::default(),
            cartan: Some(CartanOptions::default()),
            spectrum: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MorseSummary {
    pub verdict: Verdict,
    pub is_morse: bool,
    pub n_critical: usize,
    pub min_abs_hessian_det: Option<f64>,
    pub euler_sum: i64,
    pub search_exhaustive: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtremaSummary {
    pub verdict: Verdict,
    pub unique_min: bool,
    pub unique_max: bool,
    pub min_separation: f64,
    pub max_separation: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSummary {
    pub verdict: Verdict,
    pub pass_rows: usize,
    pub fail_rows: usize,
    pub inconclusive_rows: usize,
    pub alpha: Option<f64>,
    /// True when the condition is vacuous (condition 3 at d = 1 has no
    /// coordinate pairs).
    pub vacuous: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub is_interval: bool,
    pub gap_count: usize,
    pub l: usize,
    pub phases: usize,
    pub resolution: f64,
}

/// Classification of one potential against the four class conditions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GReport {
    pub d: usize,
    pub n: u32,
    pub dim: usize,
    /// Caller-supplied provenance, e.g. a coefficient file hash.
    pub coefficient_ref: Option<String>,
    pub morse: Option<MorseSummary>,
    pub extrema: Option<ExtremaSummary>,
    pub cartan3: Option<SweepSummary>,
    pub cartan4: Option<SweepSummary>,
    pub spectrum: Option<SpectrumSummary>,
    pub in_class_g: Verdict,
    pub error: Option<String>,
}

fn sweep_summary(table: &crate::cartan::DecayTable) -> SweepSummary {
    SweepSummary {
        verdict: table.verdict(),
        pass_rows: table.rows.iter().filter(|r| r.verdict == Verdict::Pass).count(),
        fail_rows: table.rows.iter().filter(|r| r.verdict == Verdict::Fail).count(),
        inconclusive_rows: table
            .rows
            .iter()
            .filter(|r| r.verdict == Verdict::Inconclusive)
            .count(),
        alpha: table.alpha,
        vacuous: false,
    }
}

/// Runs every configured condition on one coefficient vector. Total: all
/// failures, including a constant potential, land in the report rather
/// than an error.
pub fn classify_potential(
    coefficients: &CoefficientVector,
    opts: &ClassifyOptions,
    seed: u64,
) -> GReport {
    let shape = *coefficients.shape();
    let v = TrigPolynomial::new(coefficients.clone());
    let mut report = GReport {
        d: shape.d(),
        n: shape.degree(),
        dim: shape.dim(),
        coefficient_ref: None,
        morse: None,
        extrema: None,
        cartan3: None,
        cartan4: None,
        spectrum: None,
        in_class_g: Verdict::Inconclusive,
        error: None,
    };

    // conditions (i) and (ii) from one critical-point search
    match find_critical_points(&v, &opts.morse) {
        Err(e) => {
            report.error = Some(e.to_string());
            report.in_class_g = Verdict::Fail;
            return report;
        }
        Ok(points) => {
            let morse = morse_report_from_points(&v, &opts.morse, points.clone());
            let morse_verdict = if !morse.is_morse {
                Verdict::Fail
            } else if morse.search_exhaustive {
                Verdict::Pass
            } else {
                Verdict::Inconclusive
            };
            report.morse = Some(MorseSummary {
                verdict: morse_verdict,
                is_morse: morse.is_morse,
                n_critical: morse.critical_points.len(),
                min_abs_hessian_det: morse.min_abs_hessian_det,
                euler_sum: morse.euler_sum,
                search_exhaustive: morse.search_exhaustive,
            });
            match extrema_report_from_points(&v, &opts.morse, &points) {
                Ok(extrema) => {
                    let verdict = if extrema.unique_min && extrema.unique_max {
                        Verdict::Pass
                    } else {
                        Verdict::Fail
                    };
                    report.extrema = Some(ExtremaSummary {
                        verdict,
                        unique_min: extrema.unique_min,
                        unique_max: extrema.unique_max,
                        min_separation: extrema.min_separation,
                        max_separation: extrema.max_separation,
                    });
                }
                Err(e) => {
                    report.error = Some(e.to_string());
                }
            }
        }
    }

    // conditions (iii) and (iv)
    if let Some(cartan) = &opts.cartan {
        if shape.d() == 1 {
            // no coordinate pairs to test: vacuously true
            report.cartan3 = Some(SweepSummary {
                verdict: Verdict::Pass,
                pass_rows: 0,
                fail_rows: 0,
                inconclusive_rows: 0,
                alpha: None,
                vacuous: true,
            });
        } else {
            match cartan_sweep(
                &v,
                ConditionKind::Condition3,
                &cartan.k_list,
                &cartan.grids,
                &Sampler {
                    samples: cartan.samples,
                    seed: derive_seed(seed, 3),
                },
            ) {
                Ok(table) => report.cartan3 = Some(sweep_summary(&table)),
                Err(e) => report.error = Some(e.to_string()),
            }
        }
        match cartan_sweep(
            &v,
            ConditionKind::Condition4,
            &cartan.k_list,
            &cartan.grids,
            &Sampler {
                samples: cartan.samples,
                seed: derive_seed(seed, 4),
            },
        ) {
            Ok(table) => report.cartan4 = Some(sweep_summary(&table)),
            Err(e) => report.error = Some(e.to_string()),
        }
    }

    // optional spectrum check; recorded, never part of the class verdict
    if let Some(s) = &opts.spectrum {
        let outcome = OperatorConfig::new(
            v.clone(),
            s.omega.clone(),
            s.lambda,
            TorusPoint::origin(shape.d()),
        )
        .and_then(|cfg| {
            let union =
                approximate_spectrum(&cfg, s.l, s.phases, derive_seed(seed, 5), PhaseMode::Random)?;
            let width = union.eigenvalues.last().unwrap_or(&0.0)
                - union.eigenvalues.first().unwrap_or(&0.0);
            let resolution = s
                .resolution
                .unwrap_or_else(|| default_gap_resolution(width, s.l, 1e-6));
            union.with_gaps(resolution)
        });
        match outcome {
            Ok(est) => {
                report.spectrum = Some(SpectrumSummary {
                    is_interval: est.is_interval,
                    gap_count: est.gaps.len(),
                    l: est.l,
                    phases: est.phases,
                    resolution: est.resolution,
                });
            }
            Err(e) => report.error = Some(e.to_string()),
        }
    }

    report.in_class_g = combine_verdicts(&report, opts.cartan.is_some());
    report
}

fn combine_verdicts(report: &GReport, cartan_enabled: bool) -> Verdict {
    let verdicts = [
        report.morse.as_ref().map(|m| m.verdict),
        report.extrema.as_ref().map(|e| e.verdict),
        report.cartan3.as_ref().map(|c| c.verdict),
        report.cartan4.as_ref().map(|c| c.verdict),
    ];
    if verdicts.iter().flatten().any(|&v| v == Verdict::Fail) {
        return Verdict::Fail;
    }
    let all_pass = verdicts.iter().all(|v| *v == Some(Verdict::Pass));
    if cartan_enabled && all_pass {
        Verdict::Pass
    } else {
        Verdict::Inconclusive
    }
}

/// Survey configuration; serializable as the canonical JSON config format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurveyConfig {
    pub d: usize,
    pub n: u32,
    pub distribution: Distribution,
    pub sample_count: u64,
    pub master_seed: u64,
    #[serde(default)]
    pub classify: ClassifyOptions,
}

/// One classified sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurveyRow {
    pub sample_id: u64,
    pub seed: u64,
    pub report: GReport,
}

/// Order-independent aggregate counts.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SurveyAggregate {
    pub total: u64,
    pub pass: u64,
    pub fail: u64,
    pub inconclusive: u64,
    pub errors: u64,
    pub morse_failures: u64,
    pub extrema_failures: u64,
    pub cartan3_failures: u64,
    pub cartan4_failures: u64,
    pub fraction_pass: f64,
    pub fraction_fail: f64,
}

/// Survey result: per-sample rows in sample order plus aggregates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurveyOutcome {
    pub rows: Vec<SurveyRow>,
    pub aggregate: SurveyAggregate,
}

const SURVEY_CSV_HEADER: &str = "sample_id,seed,is_morse,n_critical,min_abs_hess_det,unique_min,unique_max,extrema_gap,cartan3_verdict,cartan4_verdict,in_class_G,error";

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl SurveyOutcome {
    /// Deterministic CSV: a pure function of (config, master_seed).
    pub fn to_csv(&self) -> String {
        let mut out = String::from(SURVEY_CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            let r = &row.report;
            let morse = r.morse.as_ref();
            let extrema = r.extrema.as_ref();
            let verdict_of = |s: &Option<SweepSummary>| {
                s.as_ref().map_or("skipped".to_string(), |x| x.verdict.as_str().to_string())
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                row.sample_id,
                row.seed,
                morse.map_or(String::new(), |m| m.is_morse.to_string()),
                morse.map_or(String::new(), |m| m.n_critical.to_string()),
                morse.map_or(String::new(), |m| m
                    .min_abs_hessian_det
                    .map_or(String::new(), |v| v.to_string())),
                extrema.map_or(String::new(), |e| e.unique_min.to_string()),
                extrema.map_or(String::new(), |e| e.unique_max.to_string()),
                extrema.map_or(String::new(), |e| e
                    .min_separation
                    .min(e.max_separation)
                    .to_string()),
                verdict_of(&r.cartan3),
                verdict_of(&r.cartan4),
                r.in_class_g.as_str(),
                csv_field(r.error.as_deref().unwrap_or("")),
            ));
        }
        out
    }
}

/// Runs the survey. Individual sample errors are recorded per row and
/// never abort the run.
pub fn run_survey(config: &SurveyConfig) -> Result<SurveyOutcome> {
    if config.sample_count < 1 {
        return Err(Error::InvalidConfig("sample_count must be >= 1".into()));
    }
    let shape = PotentialShape::new(config.d, config.n)?;
    match &config.distribution {
        Distribution::Gaussian { sigma } if *sigma <= 0.0 => {
            return Err(Error::InvalidConfig("sigma must be positive".into()))
        }
        Distribution::UniformBall { radius } if *radius <= 0.0 => {
            return Err(Error::InvalidConfig("radius must be positive".into()))
        }
        _ => {}
    }

    let rows: Vec<SurveyRow> = (0..config.sample_count)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(config.master_seed, i);
            let coefficients = sample_coefficients(shape, &config.distribution, seed);
            let report = classify_potential(&coefficients, &config.classify, derive_seed(seed, 1));
            SurveyRow {
                sample_id: i,
                seed,
                report,
            }
        })
        .collect();

    let mut agg = SurveyAggregate {
        total: config.sample_count,
        ..SurveyAggregate::default()
    };
    for row in &rows {
        match row.report.in_class_g {
            Verdict::Pass => agg.pass += 1,
            Verdict::Fail => agg.fail += 1,
            Verdict::Inconclusive => agg.inconclusive += 1,
        }
        if row.report.error.is_some() {
            agg.errors += 1;
        }
        if row.report.morse.as_ref().map_or(true, |m| m.verdict == Verdict::Fail) {
            agg.morse_failures += 1;
        }
        if row
            .report
            .extrema
            .as_ref()
            .map_or(true, |e| e.verdict == Verdict::Fail)
        {
            agg.extrema_failures += 1;
        }
        if row.report.cartan3.as_ref().is_some_and(|c| c.verdict == Verdict::Fail) {
            agg.cartan3_failures += 1;
        }
        if row.report.cartan4.as_ref().is_some_and(|c| c.verdict == Verdict::Fail) {
            agg.cartan4_failures += 1;
        }
    }
    agg.fraction_pass = agg.pass as f64 / agg.total as f64;
    agg.fraction_fail = agg.fail as f64 / agg.total as f64;

    Ok(SurveyOutcome {
        rows,
        aggregate: agg,
    })
}

/// Pass/fail for conditions (i)-(ii) only, as used by line slices.
pub fn passes_morse_and_extrema(c: &CoefficientVector, opts: &MorseOptions) -> bool {
    let v = TrigPolynomial::new(c.clone());
    match find_critical_points(&v, opts) {
        Err(_) => false,
        Ok(points) => {
            if points.len() < 2 || points.iter().any(|p| p.is_degenerate()) {
                return false;
            }
            let gap_tol = opts.resolved_extremum_gap_tol(&v);
            let n = points.len();
            points[1].value - points[0].value > gap_tol
                && points[n - 1].value - points[n - 2].value > gap_tol
        }
    }
}

/// Line-slice outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SliceReport {
    pub steps: usize,
    /// Grid parameters t = k/steps that failed (i) or (ii).
    pub failing_parameters: Vec<f64>,
    /// One bracket per maximal failing run, boundaries located to 1e-6.
    pub refined: Vec<(f64, f64)>,
    /// Failing grid points over the steps+1 grid.
    pub failing_fraction: f64,
}

const SLICE_BRACKET_WIDTH: f64 = 1e-6;

/// Classifies c(t) = (1-t)·c_start + t·c_end for conditions (i)-(ii) at
/// t = k/steps, then brackets each failing run by pass/fail bisection.
pub fn line_slice(
    c_start: &CoefficientVector,
    c_end: &CoefficientVector,
    steps: usize,
    opts: &MorseOptions,
) -> Result<SliceReport> {
    if steps < 10 {
        return Err(Error::InvalidConfig(format!(
            "steps must be >= 10, got {steps}"
        )));
    }
    if c_start.shape() != c_end.shape() {
        return Err(Error::InvalidShape(
            "slice endpoints have different shapes".into(),
        ));
    }

    let classify = |t: f64| -> bool {
        let c = c_start.lerp(c_end, t).expect("shapes match");
        passes_morse_and_extrema(&c, opts)
    };

    let ts: Vec<f64> = (0..=steps).map(|k| k as f64 / steps as f64).collect();
    let pass: Vec<bool> = ts.par_iter().map(|&t| classify(t)).collect();

    let failing_parameters: Vec<f64> = ts
        .iter()
        .zip(&pass)
        .filter(|(_, &p)| !p)
        .map(|(&t, _)| t)
        .collect();

    // bisect a pass/fail transition down to the bracket width
    let refine = |mut t_pass: f64, mut t_fail: f64| -> f64 {
        while (t_fail - t_pass).abs() > SLICE_BRACKET_WIDTH {
            let mid = 0.5 * (t_pass + t_fail);
            if classify(mid) {
                t_pass = mid;
            } else {
                t_fail = mid;
            }
        }
        t_pass
    };

    let mut refined = Vec::new();
    let mut k = 0;
    while k <= steps {
        if !pass[k] {
            let run_start = k;
            while k + 1 <= steps && !pass[k + 1] {
                k += 1;
            }
            let left = if run_start == 0 {
                0.0
            } else {
                refine(ts[run_start - 1], ts[run_start])
            };
            let right = if k == steps {
                1.0
            } else {
                refine(ts[k + 1], ts[k])
            };
            refined.push((left, right));
        }
        k += 1;
    }

    Ok(SliceReport {
        steps,
        failing_fraction: failing_parameters.len() as f64 / (steps + 1) as f64,
        failing_parameters,
        refined,
    })
}
