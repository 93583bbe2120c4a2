//! Sublevel-measure estimates for the two Cartan-type conditions.
//!
//! Both conditions bound the torus measure of a set of the form
//!
//! ```text
//!   { x ∈ T^d : min(|F(x)|, |G(x)|) < exp(-K) }        by   exp(-K^c₁),
//! ```
//!
//! where for the pair condition (condition 3) F = V(x+h) - V(x) and G is the
//! 2×2 gradient determinant g_{V,h,i,j}, and for the gradient condition
//! (condition 4) F = V(x) - η and G = ⟨∇V(x), h₀⟩.
//!
//! Measures are estimated by seeded uniform Monte Carlo with exact
//! Clopper–Pearson upper confidence bounds. exp(-K) shrinks much faster
//! than any affordable sample budget, so every estimate carries a
//! `budget_limited` flag (threshold below ~10 expected hits at the sample
//! size) and the per-K verdict is tri-state: a zero-hit budget-limited
//! query whose confidence bound does not clear exp(-K^c₁) is reported as
//! inconclusive, never as a pass or a fail.
//!
//! Sweeps evaluate the conditions over deterministic grids of h (condition
//! 3) or (η, h₀) (condition 4) for each K in an ascending list, and fit a
//! decay exponent α from log(measure) ≈ log C - αK over the usable rows.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::morse::{find_critical_points, MorseOptions};
use crate::potential::{TorusPoint, TrigPolynomial};
use crate::rng::{derive_seed, Stream};
use crate::stats::{clopper_pearson_upper, linear_fit};

/// Which of the two Cartan conditions a query or sweep evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConditionKind {
    Condition3,
    Condition4,
}

impl ConditionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ConditionKind::Condition3 => "condition3",
            ConditionKind::Condition4 => "condition4",
        }
    }
}

/// Tri-state outcome used by condition checks, sweeps, and classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// Pair quantifier for condition 3: the paper leaves open whether the
/// estimate must hold per pair or for the minimum over pairs; the minimum
/// (largest sublevel set) is the default and the report names the mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairSelection {
    MinOverAllPairs,
    Pair(usize, usize),
}

/// One instance of condition 3 or 4.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum CartanQuery {
    Condition3 {
        h: TorusPoint,
        pairs: PairSelection,
        big_k: f64,
        c1: f64,
    },
    Condition4 {
        eta: f64,
        h0: Vec<f64>,
        big_k: f64,
        c1: f64,
    },
}

impl CartanQuery {
    pub fn kind(&self) -> ConditionKind {
        match self {
            CartanQuery::Condition3 { .. } => ConditionKind::Condition3,
            CartanQuery::Condition4 { .. } => ConditionKind::Condition4,
        }
    }

    pub fn big_k(&self) -> f64 {
        match self {
            CartanQuery::Condition3 { big_k, .. } | CartanQuery::Condition4 { big_k, .. } => {
                *big_k
            }
        }
    }

    pub fn c1(&self) -> f64 {
        match self {
            CartanQuery::Condition3 { c1, .. } | CartanQuery::Condition4 { c1, .. } => *c1,
        }
    }

    /// ε = exp(-K).
    pub fn threshold(&self) -> f64 {
        (-self.big_k()).exp()
    }

    /// The decay target exp(-K^c₁).
    pub fn bound(&self) -> f64 {
        (-self.big_k().powf(self.c1())).exp()
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        let invalid = |msg: String| Err(Error::InvalidQuery(msg));
        if self.big_k() < 1.0 || !self.big_k().is_finite() {
            return invalid(format!("K must be >= 1, got {}", self.big_k()));
        }
        if !(0.0 < self.c1() && self.c1() < 1.0) {
            return invalid(format!("c1 must lie in (0,1), got {}", self.c1()));
        }
        match self {
            CartanQuery::Condition3 { h, pairs, .. } => {
                if d < 2 {
                    return invalid("condition 3 needs d >= 2 (the determinant takes two coordinates)".into());
                }
                if h.dim() != d {
                    return invalid(format!("shift h has dimension {}, potential has {d}", h.dim()));
                }
                if h.quotient_norm() < self.threshold() {
                    return invalid(format!(
                        "shift norm {} is below exp(-K) = {}",
                        h.quotient_norm(),
                        self.threshold()
                    ));
                }
                if let PairSelection::Pair(i, j) = pairs {
                    if !(i < j && *j < d) {
                        return invalid(format!("pair ({i},{j}) needs 0 <= i < j < d = {d}"));
                    }
                }
            }
            CartanQuery::Condition4 { h0, eta, .. } => {
                if h0.len() != d {
                    return invalid(format!("h0 has dimension {}, potential has {d}", h0.len()));
                }
                let norm = h0.iter().map(|v| v * v).sum::<f64>().sqrt();
                if (norm - 1.0).abs() > 1e-12 {
                    return invalid(format!("h0 must be a unit vector, norm is {norm}"));
                }
                if !eta.is_finite() {
                    return invalid("eta must be finite".into());
                }
            }
        }
        Ok(())
    }
}

/// Seeded uniform sampler configuration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Sampler {
    pub samples: u64,
    pub seed: u64,
}

/// Minimum sample count accepted by the estimator.
pub const MIN_SAMPLES: u64 = 10_000;

/// A Monte-Carlo estimate of the sublevel-set measure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SublevelMeasureEstimate {
    /// hits / samples, a fraction of torus measure.
    pub estimate: f64,
    /// One-sided 99% Clopper–Pearson upper bound.
    pub upper_conf: f64,
    pub samples: u64,
    pub hits: u64,
    /// ε = exp(-K).
    pub threshold: f64,
    /// True when ε-scale features are below Monte-Carlo resolution
    /// (ε < 10/samples).
    pub budget_limited: bool,
}

/// The 2×2 determinant of condition 3:
/// ∂ᵢV(x)·∂ⱼV(x+h) - ∂ⱼV(x)·∂ᵢV(x+h).
pub fn g_det(
    v: &TrigPolynomial,
    h: &TorusPoint,
    i: usize,
    j: usize,
    x: &TorusPoint,
) -> f64 {
    let d = v.shape().d();
    debug_assert!(i != j && i < d && j < d);
    let mut gx = vec![0.0; d];
    let mut gxh = vec![0.0; d];
    v.value_and_gradient(x, &mut gx);
    v.value_and_gradient(&x.add(h), &mut gxh);
    gx[i] * gxh[j] - gx[j] * gxh[i]
}

/// Per-sample hit test, shared by the Monte-Carlo estimator and the
/// quadrature oracle. Scratch buffers avoid per-sample allocation.
struct HitTest<'a> {
    v: &'a TrigPolynomial,
    query: &'a CartanQuery,
    d: usize,
    eps: f64,
}

struct Scratch {
    shifted: Vec<f64>,
    grad_x: Vec<f64>,
    grad_xh: Vec<f64>,
}

impl Scratch {
    fn new(d: usize) -> Self {
        Scratch {
            shifted: vec![0.0; d],
            grad_x: vec![0.0; d],
            grad_xh: vec![0.0; d],
        }
    }
}

impl<'a> HitTest<'a> {
    fn new(v: &'a TrigPolynomial, query: &'a CartanQuery) -> Self {
        HitTest {
            v,
            query,
            d: v.shape().d(),
            eps: query.threshold(),
        }
    }

    fn is_hit(&self, x: &[f64], s: &mut Scratch) -> bool {
        match self.query {
            CartanQuery::Condition3 { h, pairs, .. } => {
                for k in 0..self.d {
                    s.shifted[k] = x[k] + h.coords()[k];
                }
                let vx = self.v.value_and_gradient_at(x, &mut s.grad_x);
                let vxh = self.v.value_and_gradient_at(&s.shifted, &mut s.grad_xh);
                let term1 = (vxh - vx).abs();
                if term1 < self.eps {
                    return true;
                }
                let term2 = match pairs {
                    PairSelection::Pair(i, j) => {
                        (s.grad_x[*i] * s.grad_xh[*j] - s.grad_x[*j] * s.grad_xh[*i]).abs()
                    }
                    PairSelection::MinOverAllPairs => {
                        let mut min = f64::INFINITY;
                        for i in 0..self.d {
                            for j in (i + 1)..self.d {
                                let g = (s.grad_x[i] * s.grad_xh[j]
                                    - s.grad_x[j] * s.grad_xh[i])
                                    .abs();
                                min = min.min(g);
                            }
                        }
                        min
                    }
                };
                term2 < self.eps
            }
            CartanQuery::Condition4 { eta, h0, .. } => {
                let vx = self.v.value_and_gradient_at(x, &mut s.grad_x);
                if (vx - eta).abs() < self.eps {
                    return true;
                }
                let proj: f64 = s.grad_x.iter().zip(h0).map(|(g, h)| g * h).sum();
                proj.abs() < self.eps
            }
        }
    }
}

/// Samples handled per independent sub-stream; fixed so hit counts are an
/// order-insensitive sum regardless of thread count.
const BLOCK: u64 = 1 << 14;

/// Monte-Carlo estimate of mes{ x : min(|F|, |G|) < exp(-K) }.
pub fn estimate_sublevel_measure(
    query: &CartanQuery,
    v: &TrigPolynomial,
    sampler: &Sampler,
) -> Result<SublevelMeasureEstimate> {
    if sampler.samples < MIN_SAMPLES {
        return Err(Error::InsufficientSamples {
            got: sampler.samples,
            min: MIN_SAMPLES,
        });
    }
    query.validate(v.shape().d())?;

    let d = v.shape().d();
    let test = HitTest::new(v, query);
    let blocks = sampler.samples.div_ceil(BLOCK);
    let hits: u64 = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut stream = Stream::derived(sampler.seed, b);
            let mut x = vec![0.0; d];
            let mut scratch = Scratch::new(d);
            let in_block = BLOCK.min(sampler.samples - b * BLOCK);
            let mut count = 0u64;
            for _ in 0..in_block {
                stream.fill_uniform(&mut x);
                if test.is_hit(&x, &mut scratch) {
                    count += 1;
                }
            }
            count
        })
        .sum();

    let eps = query.threshold();
    Ok(SublevelMeasureEstimate {
        estimate: hits as f64 / sampler.samples as f64,
        upper_conf: clopper_pearson_upper(hits, sampler.samples, 0.01),
        samples: sampler.samples,
        hits,
        threshold: eps,
        budget_limited: eps < 10.0 / sampler.samples as f64,
    })
}

/// Deterministic tensor-grid quadrature of the same measure, for d ≤ 2.
/// Midpoint rule with approximately `grid_points` nodes in total.
pub fn measure_by_quadrature(
    query: &CartanQuery,
    v: &TrigPolynomial,
    grid_points: u64,
) -> Result<f64> {
    let d = v.shape().d();
    if d > 2 {
        return Err(Error::InvalidQuery(
            "quadrature oracle supports d <= 2 only".into(),
        ));
    }
    query.validate(d)?;
    let per_axis = (grid_points as f64).powf(1.0 / d as f64).floor() as u64;
    let test = HitTest::new(v, query);
    let hits: u64 = (0..per_axis)
        .into_par_iter()
        .map(|i| {
            let mut scratch = Scratch::new(d);
            let mut count = 0u64;
            match d {
                1 => {
                    let x = [(i as f64 + 0.5) / per_axis as f64];
                    if test.is_hit(&x, &mut scratch) {
                        count = 1;
                    }
                }
                _ => {
                    let xi = (i as f64 + 0.5) / per_axis as f64;
                    for j in 0..per_axis {
                        let x = [xi, (j as f64 + 0.5) / per_axis as f64];
                        if test.is_hit(&x, &mut scratch) {
                            count += 1;
                        }
                    }
                }
            }
            count
        })
        .sum();
    let total = per_axis.pow(d as u32);
    Ok(hits as f64 / total as f64)
}

/// Outcome of one condition check against the decay target.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub verdict: Verdict,
    pub estimate: SublevelMeasureEstimate,
    /// exp(-K^c₁).
    pub bound: f64,
}

/// Checks one query: pass when the 99% upper confidence bound clears
/// exp(-K^c₁); a zero-hit budget-limited query that does not clear it is
/// inconclusive rather than a fail.
pub fn check_condition(
    query: &CartanQuery,
    v: &TrigPolynomial,
    sampler: &Sampler,
) -> Result<ConditionCheck> {
    let estimate = estimate_sublevel_measure(query, v, sampler)?;
    let bound = query.bound();
    let verdict = if estimate.upper_conf <= bound {
        Verdict::Pass
    } else if estimate.budget_limited && estimate.hits == 0 {
        Verdict::Inconclusive
    } else {
        Verdict::Fail
    };
    Ok(ConditionCheck {
        verdict,
        estimate,
        bound,
    })
}

/// Grid sizes for sweep schedules.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepGrids {
    /// Shifts h per K (condition 3), distributed as an offset torus grid.
    pub h_count: usize,
    /// η values over the numerical range of V (condition 4).
    pub eta_count: usize,
    /// Unit directions h₀ (condition 4).
    pub h0_count: usize,
    pub pair_mode: PairSelection,
    pub c1: f64,
}

impl Default for SweepGrids {
    fn default() -> Self {
        SweepGrids {
            h_count: 64,
            eta_count: 32,
            h0_count: 32,
            pair_mode: PairSelection::MinOverAllPairs,
            c1: 0.3,
        }
    }
}

/// One row of a decay sweep: the worst query at a given K.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayRow {
    pub big_k: f64,
    pub worst_estimate: f64,
    pub worst_upper_conf: f64,
    pub bound: f64,
    pub verdict: Verdict,
    pub budget_limited: bool,
    pub queries: usize,
}

/// Sweep outcome over an ascending K list.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayTable {
    pub kind: ConditionKind,
    pub rows: Vec<DecayRow>,
    /// Fitted decay exponent from log(worst measure) ≈ log C - αK. Only
    /// non-budget-limited rows with estimates strictly inside (0, 1) carry
    /// decay information; None when fewer than two such rows exist.
    pub alpha: Option<f64>,
    pub c1: f64,
    pub h_count: usize,
    pub eta_count: usize,
    pub h0_count: usize,
    pub samples: u64,
    pub seed: u64,
}

impl DecayTable {
    pub fn verdict(&self) -> Verdict {
        if self.rows.iter().any(|r| r.verdict == Verdict::Fail) {
            Verdict::Fail
        } else if self.rows.iter().any(|r| r.verdict == Verdict::Inconclusive) {
            Verdict::Inconclusive
        } else {
            Verdict::Pass
        }
    }

    /// CSV export: one row per K.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "K,kind,worst_estimate,worst_upper_conf,bound,pass,budget_limited,h_count,eta_count,h0_count,seed\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                r.big_k,
                self.kind.as_str(),
                r.worst_estimate,
                r.worst_upper_conf,
                r.bound,
                r.verdict.as_str(),
                r.budget_limited,
                self.h_count,
                self.eta_count,
                self.h0_count,
                self.seed
            ));
        }
        out
    }
}

/// Offset torus grid for shifts h: per-axis count is the d-th root of
/// `h_count`, nodes at (k+1/2)/g so h = 0 never appears.
fn shift_grid(d: usize, h_count: usize) -> Vec<TorusPoint> {
    let per_axis = (h_count as f64).powf(1.0 / d as f64).round().max(1.0) as usize;
    let mut out = Vec::new();
    let mut idx = vec![0usize; d];
    loop {
        out.push(TorusPoint::new(
            idx.iter()
                .map(|&k| (k as f64 + 0.5) / per_axis as f64)
                .collect(),
        ));
        let mut axis = d;
        loop {
            if axis == 0 {
                return out;
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < per_axis {
                break;
            }
            idx[axis] = 0;
        }
    }
}

/// Deterministic unit-direction grid: the two poles for d=1, uniform
/// angles for d=2, a Fibonacci sphere for d=3, and a fixed-seed normal
/// cloud beyond that.
fn direction_grid(d: usize, count: usize) -> Vec<Vec<f64>> {
    match d {
        1 => vec![vec![1.0]],
        2 => (0..count)
            .map(|k| {
                let theta = std::f64::consts::TAU * k as f64 / count as f64;
                vec![theta.cos(), theta.sin()]
            })
            .collect(),
        3 => {
            let golden = (1.0 + 5.0f64.sqrt()) / 2.0;
            (0..count)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let phi = std::f64::consts::TAU * k as f64 / golden;
                    vec![r * phi.cos(), r * phi.sin(), z]
                })
                .collect()
        }
        _ => {
            let mut stream = Stream::new(0x9d1_f0e1);
            (0..count)
                .map(|_| {
                    let raw: Vec<f64> = (0..d).map(|_| stream.normal()).collect();
                    let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
                    raw.iter().map(|v| v / norm.max(1e-300)).collect()
                })
                .collect()
        }
    }
}

/// Numerical range of V from its critical values; a constant potential
/// degenerates to a single η.
fn eta_grid(v: &TrigPolynomial, count: usize) -> Result<Vec<f64>> {
    if v.is_constant() {
        return Ok(vec![v.value(&TorusPoint::origin(v.shape().d()))]);
    }
    let points = find_critical_points(v, &MorseOptions::default())?;
    let vmin = points.first().map(|p| p.value).unwrap_or(0.0);
    let vmax = points.last().map(|p| p.value).unwrap_or(0.0);
    if count <= 1 || vmax <= vmin {
        return Ok(vec![0.5 * (vmin + vmax)]);
    }
    Ok((0..count)
        .map(|k| vmin + (vmax - vmin) * k as f64 / (count - 1) as f64)
        .collect())
}

/// Evaluates the chosen condition over its grid for every K in the list and
/// fits the decay exponent. K values must be ascending.
pub fn cartan_sweep(
    v: &TrigPolynomial,
    kind: ConditionKind,
    k_list: &[f64],
    grids: &SweepGrids,
    sampler: &Sampler,
) -> Result<DecayTable> {
    if k_list.is_empty() {
        return Err(Error::InvalidConfig("empty K list".into()));
    }
    if k_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig("K list must be strictly ascending".into()));
    }
    let d = v.shape().d();
    if kind == ConditionKind::Condition3 && d < 2 {
        return Err(Error::InvalidQuery(
            "condition 3 needs d >= 2 (the determinant takes two coordinates)".into(),
        ));
    }

    // grids are shared across K (the h grid is re-filtered per K)
    let shifts = if kind == ConditionKind::Condition3 {
        shift_grid(d, grids.h_count)
    } else {
        Vec::new()
    };
    let (etas, dirs) = if kind == ConditionKind::Condition4 {
        (eta_grid(v, grids.eta_count)?, direction_grid(d, grids.h0_count))
    } else {
        (Vec::new(), Vec::new())
    };

    let mut rows = Vec::with_capacity(k_list.len());
    for (ki, &big_k) in k_list.iter().enumerate() {
        let eps = (-big_k).exp();
        let queries: Vec<CartanQuery> = match kind {
            ConditionKind::Condition3 => shifts
                .iter()
                .filter(|h| h.quotient_norm() >= eps)
                .map(|h| CartanQuery::Condition3 {
                    h: h.clone(),
                    pairs: grids.pair_mode,
                    big_k,
                    c1: grids.c1,
                })
                .collect(),
            ConditionKind::Condition4 => etas
                .iter()
                .flat_map(|&eta| {
                    dirs.iter().map(move |h0| CartanQuery::Condition4 {
                        eta,
                        h0: h0.clone(),
                        big_k,
                        c1: grids.c1,
                    })
                })
                .collect(),
        };
        if queries.is_empty() {
            return Err(Error::InvalidQuery(format!(
                "no admissible grid queries at K = {big_k}"
            )));
        }

        let mut worst_estimate = 0.0f64;
        let mut worst_upper = 0.0f64;
        let mut verdict = Verdict::Pass;
        let mut budget_limited = false;
        for (qi, q) in queries.iter().enumerate() {
            let qseed = derive_seed(sampler.seed, ((ki as u64) << 32) | qi as u64);
            let check = check_condition(
                q,
                v,
                &Sampler {
                    samples: sampler.samples,
                    seed: qseed,
                },
            )?;
            worst_estimate = worst_estimate.max(check.estimate.estimate);
            worst_upper = worst_upper.max(check.estimate.upper_conf);
            budget_limited = check.estimate.budget_limited;
            verdict = match (verdict, check.verdict) {
                (Verdict::Fail, _) | (_, Verdict::Fail) => Verdict::Fail,
                (Verdict::Inconclusive, _) | (_, Verdict::Inconclusive) => Verdict::Inconclusive,
                _ => Verdict::Pass,
            };
        }
        rows.push(DecayRow {
            big_k,
            worst_estimate,
            worst_upper_conf: worst_upper,
            bound: (-big_k.powf(grids.c1)).exp(),
            verdict,
            budget_limited,
            queries: queries.len(),
        });
    }

    let usable: Vec<&DecayRow> = rows
        .iter()
        .filter(|r| !r.budget_limited && r.worst_estimate > 0.0 && r.worst_estimate < 1.0)
        .collect();
    let alpha = if usable.len() >= 2 {
        let ks: Vec<f64> = usable.iter().map(|r| r.big_k).collect();
        let logs: Vec<f64> = usable.iter().map(|r| r.worst_estimate.ln()).collect();
        linear_fit(&ks, &logs).map(|(slope, _)| -slope)
    } else {
        None
    };

    Ok(DecayTable {
        kind,
        rows,
        alpha,
        c1: grids.c1,
        h_count: grids.h_count,
        eta_count: grids.eta_count,
        h0_count: grids.h0_count,
        samples: sampler.samples,
        seed: sampler.seed,
    })
}
