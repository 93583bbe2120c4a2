//! Critical points of V on T^d, and certification of the Morse and
//! unique-extrema conditions.
//!
//! The gradient of a degree-n trigonometric polynomial is itself a
//! trigonometric polynomial, so seeding a damped Newton iteration from a
//! uniform grid of at least 4n+1 points per axis empirically captures every
//! basin. Certification is tolerance-based and fails closed: a critical
//! point whose Hessian determinant falls below the (scale-aware) degeneracy
//! tolerance makes the whole potential non-Morse rather than being dropped,
//! and extrema values that tie within tolerance are reported as non-unique.
//!
//! Two cheap completeness audits come from classical Morse theory on the
//! torus: Σ (-1)^{index} over critical points must equal the Euler
//! characteristic χ(T^d) = 0, and a Morse function on T^d has at least 2^d
//! critical points. A report that violates either carries
//! `search_exhaustive = false`, never a silent pass.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{JetOrder, TorusPoint, TrigPolynomial};

const TAU: f64 = std::f64::consts::TAU;

/// Options for the Newton critical-point search. `None` tolerances are
/// resolved against the potential's coefficient scale at call time.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct MorseOptions {
    /// Seeds per axis; default max(8, 4n+1).
    pub grid_per_axis: Option<usize>,
    /// Acceptance threshold on the final gradient norm; default
    /// 1e-10 · max(1, 2πn‖c‖₁).
    pub newton_tol: Option<f64>,
    pub max_iters: usize,
    /// Quotient-metric radius identifying duplicate converged points.
    pub dedup_radius: f64,
    /// |det Hess| at or below this is degenerate; default 1e-8 (4π²)^d ‖c‖₁.
    pub degeneracy_tol: Option<f64>,
    /// Critical-value ties within this are non-unique; default 1e-8 ‖c‖₁.
    pub extremum_gap_tol: Option<f64>,
}

impl Default for MorseOptions {
    fn default() -> Self {
        MorseOptions {
            grid_per_axis: None,
            newton_tol: None,
            max_iters: 60,
            dedup_radius: 1e-6,
            degeneracy_tol: None,
            extremum_gap_tol: None,
        }
    }
}

impl MorseOptions {
    pub fn resolved_grid(&self, degree: u32) -> usize {
        self.grid_per_axis.unwrap_or((4 * degree as usize + 1).max(8))
    }

    pub fn resolved_newton_tol(&self, v: &TrigPolynomial) -> f64 {
        self.newton_tol.unwrap_or_else(|| {
            let scale = TAU * v.shape().degree() as f64 * v.coefficients().l1_norm();
            1e-10 * scale.max(1.0)
        })
    }

    pub fn resolved_degeneracy_tol(&self, v: &TrigPolynomial) -> f64 {
        self.degeneracy_tol.unwrap_or_else(|| {
            let per_axis = TAU * TAU; // 4π²
            1e-8 * per_axis.powi(v.shape().d() as i32) * v.coefficients().l1_norm()
        })
    }

    pub fn resolved_extremum_gap_tol(&self, v: &TrigPolynomial) -> f64 {
        self.extremum_gap_tol
            .unwrap_or_else(|| 1e-8 * v.coefficients().l1_norm())
    }
}

/// A converged zero of ∇V. `morse_index` is None when |det Hess| fell at or
/// below the degeneracy tolerance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub location: TorusPoint,
    pub value: f64,
    pub hessian_det: f64,
    pub morse_index: Option<usize>,
    pub residual: f64,
    pub seeds_converged: usize,
}

impl CriticalPoint {
    pub fn is_degenerate(&self) -> bool {
        self.morse_index.is_none()
    }
}

/// Morse certification for one potential.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MorseReport {
    pub critical_points: Vec<CriticalPoint>,
    pub is_morse: bool,
    pub min_abs_hessian_det: Option<f64>,
    /// Σ (-1)^{morse_index} over non-degenerate points; 0 on T^d when the
    /// search caught everything.
    pub euler_sum: i64,
    pub search_exhaustive: bool,
    /// Tolerances the verdict was issued under.
    pub degeneracy_tol: f64,
    pub newton_tol: f64,
}

/// Unique-global-extrema certification.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtremaReport {
    pub global_min: CriticalPoint,
    pub global_max: CriticalPoint,
    /// Gap between the two smallest critical values.
    pub min_separation: f64,
    /// Gap between the two largest critical values.
    pub max_separation: f64,
    pub unique_min: bool,
    pub unique_max: bool,
    pub extremum_gap_tol: f64,
}

struct NewtonOutcome {
    location: Vec<f64>,
    residual: f64,
}

/// Damped Newton on ∇V = 0 from one seed. Halves the step while the
/// gradient norm fails to decrease; gives up on singular Hessians.
fn newton_from_seed(
    v: &TrigPolynomial,
    seed: &[f64],
    tol: f64,
    max_iters: usize,
) -> Option<NewtonOutcome> {
    let d = v.shape().d();
    let mut x = seed.to_vec();
    let mut jet = v.jet(&TorusPoint::new(x.clone()), JetOrder::Hessian);
    let mut gnorm = norm(&jet.gradient);
    for _ in 0..max_iters {
        if gnorm <= tol {
            return Some(NewtonOutcome {
                location: x,
                residual: gnorm,
            });
        }
        let hess = DMatrix::from_row_slice(d, d, &jet.hessian);
        let grad = DVector::from_column_slice(&jet.gradient);
        let delta = hess.lu().solve(&grad.scale(-1.0))?;
        // backtracking: halve until the gradient norm actually drops
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let candidate: Vec<f64> =
                x.iter().zip(delta.iter()).map(|(xi, di)| xi + t * di).collect();
            let cjet = v.jet(&TorusPoint::new(candidate.clone()), JetOrder::Hessian);
            let cnorm = norm(&cjet.gradient);
            if cnorm < gnorm {
                accepted = Some((candidate, cjet, cnorm));
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some((candidate, cjet, cnorm)) => {
                x = candidate;
                jet = cjet;
                gnorm = cnorm;
            }
            None => break, // stalled
        }
    }
    if gnorm <= tol {
        Some(NewtonOutcome {
            location: x,
            residual: gnorm,
        })
    } else {
        None
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// All critical points of V found from the seed grid, deduplicated modulo
/// the torus and sorted by (value, location).
pub fn find_critical_points(
    v: &TrigPolynomial,
    opts: &MorseOptions,
) -> Result<Vec<CriticalPoint>> {
    if v.is_constant() {
        return Err(Error::ConstantPotential(
            "every point is critical; Morse analysis does not apply".into(),
        ));
    }
    let d = v.shape().d();
    let grid = opts.resolved_grid(v.shape().degree());
    let tol = opts.resolved_newton_tol(v);
    let degeneracy_tol = opts.resolved_degeneracy_tol(v);

    let seeds: Vec<Vec<f64>> = grid_seeds(d, grid);
    let outcomes: Vec<NewtonOutcome> = seeds
        .par_iter()
        .filter_map(|s| newton_from_seed(v, s, tol, opts.max_iters))
        .collect();

    // deduplicate modulo the torus; keep the best residual representative
    let mut clusters: Vec<(TorusPoint, f64, usize)> = Vec::new();
    for o in outcomes {
        let p = TorusPoint::new(o.location);
        match clusters
            .iter_mut()
            .find(|(rep, _, _)| rep.quotient_distance(&p) < opts.dedup_radius)
        {
            Some((rep, res, count)) => {
                *count += 1;
                if o.residual < *res {
                    *rep = p;
                    *res = o.residual;
                }
            }
            None => clusters.push((p, o.residual, 1)),
        }
    }

    let mut points: Vec<CriticalPoint> = clusters
        .into_iter()
        .map(|(location, residual, seeds_converged)| {
            let jet = v.jet(&location, JetOrder::Hessian);
            let hess = DMatrix::from_row_slice(d, d, &jet.hessian);
            let det = hess.determinant();
            let morse_index = if det.abs() > degeneracy_tol {
                let eigs = hess.symmetric_eigen().eigenvalues;
                Some(eigs.iter().filter(|&&e| e < 0.0).count())
            } else {
                None
            };
            CriticalPoint {
                location,
                value: jet.value,
                hessian_det: det,
                morse_index,
                residual,
                seeds_converged,
            }
        })
        .collect();

    points.sort_by(|a, b| {
        a.value
            .total_cmp(&b.value)
            .then_with(|| cmp_coords(a.location.coords(), b.location.coords()))
    });
    Ok(points)
}

fn cmp_coords(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        let c = x.total_cmp(y);
        if c != std::cmp::Ordering::Equal {
            return c;
        }
    }
    std::cmp::Ordering::Equal
}

fn grid_seeds(d: usize, grid: usize) -> Vec<Vec<f64>> {
    let mut seeds = Vec::with_capacity(grid.pow(d as u32));
    let mut idx = vec![0usize; d];
    loop {
        seeds.push(idx.iter().map(|&k| k as f64 / grid as f64).collect());
        let mut axis = d;
        loop {
            if axis == 0 {
                return seeds;
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < grid {
                break;
            }
            idx[axis] = 0;
        }
    }
}

/// Builds the Morse report from an already-computed critical point list
/// (sorted, as produced by [`find_critical_points`]).
pub fn morse_report_from_points(
    v: &TrigPolynomial,
    opts: &MorseOptions,
    points: Vec<CriticalPoint>,
) -> MorseReport {
    let degenerate = points.iter().any(CriticalPoint::is_degenerate);
    let completed = !points.is_empty();
    let euler_sum: i64 = points
        .iter()
        .filter_map(|p| p.morse_index)
        .map(|i| if i % 2 == 0 { 1 } else { -1 })
        .sum();
    let min_abs = points
        .iter()
        .map(|p| p.hessian_det.abs())
        .min_by(f64::total_cmp);
    let is_morse = completed && !degenerate;
    let search_exhaustive =
        is_morse && euler_sum == 0 && points.len() >= (1usize << v.shape().d());
    MorseReport {
        critical_points: points,
        is_morse,
        min_abs_hessian_det: min_abs,
        euler_sum,
        search_exhaustive,
        degeneracy_tol: opts.resolved_degeneracy_tol(v),
        newton_tol: opts.resolved_newton_tol(v),
    }
}

/// Certifies the Morse condition: every found critical point must have
/// |det Hess| above the degeneracy tolerance.
pub fn verify_morse(v: &TrigPolynomial, opts: &MorseOptions) -> Result<MorseReport> {
    let points = find_critical_points(v, opts)?;
    Ok(morse_report_from_points(v, opts, points))
}

/// Extrema report from an already-computed critical point list.
pub fn extrema_report_from_points(
    v: &TrigPolynomial,
    opts: &MorseOptions,
    points: &[CriticalPoint],
) -> Result<ExtremaReport> {
    if points.len() < 2 {
        return Err(Error::TooFewCriticalPoints {
            found: points.len(),
        });
    }
    let gap_tol = opts.resolved_extremum_gap_tol(v);
    let n = points.len();
    let min_separation = points[1].value - points[0].value;
    let max_separation = points[n - 1].value - points[n - 2].value;
    Ok(ExtremaReport {
        global_min: points[0].clone(),
        global_max: points[n - 1].clone(),
        min_separation,
        max_separation,
        unique_min: min_separation > gap_tol,
        unique_max: max_separation > gap_tol,
        extremum_gap_tol: gap_tol,
    })
}

/// Certifies unique global extrema by the gaps between extreme critical
/// values; ties within tolerance are conservatively non-unique.
pub fn verify_unique_extrema(v: &TrigPolynomial, opts: &MorseOptions) -> Result<ExtremaReport> {
    let points = find_critical_points(v, opts)?;
    extrema_report_from_points(v, opts, &points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{BasisLabel, MultiIndex, PotentialShape};

    fn cos_cos() -> TrigPolynomial {
        // V = cos(2πx₁) + cos(2πx₂)
        let shape = PotentialShape::new(2, 1).unwrap();
        TrigPolynomial::from_labels(
            shape,
            &[
                (BasisLabel::Cos(MultiIndex::new(vec![0, 1])), 1.0),
                (BasisLabel::Cos(MultiIndex::new(vec![1, 0])), 1.0),
            ],
        )
        .unwrap()
    }

    fn d1(coefs: &[(i64, f64, f64)], n: u32) -> TrigPolynomial {
        let shape = PotentialShape::new(1, n).unwrap();
        let mut labels = Vec::new();
        for &(m, a, b) in coefs {
            labels.push((BasisLabel::Cos(MultiIndex::new(vec![m])), a));
            labels.push((BasisLabel::Sin(MultiIndex::new(vec![m])), b));
        }
        TrigPolynomial::from_labels(shape, &labels).unwrap()
    }

    #[test]
    fn cos_cos_critical_points() {
        let v = cos_cos();
        let pts = find_critical_points(&v, &MorseOptions::default()).unwrap();
        assert_eq!(pts.len(), 4);
        // sorted by value: -2, 0, 0, 2
        let values: Vec<f64> = pts.iter().map(|p| p.value).collect();
        for (got, want) in values.iter().zip([-2.0, 0.0, 0.0, 2.0]) {
            assert!((got - want).abs() < 1e-9, "values {values:?}");
        }
        let indices: Vec<usize> = pts.iter().map(|p| p.morse_index.unwrap()).collect();
        assert_eq!(indices, vec![0, 1, 1, 2]);
        // the minimum sits at (1/2, 1/2)
        for c in pts[0].location.coords() {
            assert!((c - 0.5).abs() < 1e-8);
        }
    }

    #[test]
    fn cos_two_points() {
        let v = d1(&[(1, 1.0, 0.0)], 1); // cos(2πx)
        let pts = find_critical_points(&v, &MorseOptions::default()).unwrap();
        assert_eq!(pts.len(), 2);
        assert!((pts[0].value + 1.0).abs() < 1e-12); // min at 1/2
        assert!((pts[1].value - 1.0).abs() < 1e-12); // max at 0
        assert!((pts[0].location.coords()[0] - 0.5).abs() < 1e-9);
        assert!(pts[1].location.coords()[0].abs().min(1.0 - pts[1].location.coords()[0].abs()) < 1e-9);
    }

    #[test]
    fn degenerate_double_well_is_not_morse() {
        // V = 2cos(2πx) - cos(4πx)/2 has V'(0) = V''(0) = 0
        let v = d1(&[(1, 2.0, 0.0), (2, -0.5, 0.0)], 2);
        let report = verify_morse(&v, &MorseOptions::default()).unwrap();
        assert!(!report.is_morse);
        let degenerate: Vec<&CriticalPoint> = report
            .critical_points
            .iter()
            .filter(|p| p.is_degenerate())
            .collect();
        assert_eq!(degenerate.len(), 1);
        let x = degenerate[0].location.coords()[0];
        assert!(x.min(1.0 - x) < 1e-5, "degenerate point near 0, got {x}");
    }

    #[test]
    fn cos_4pi_is_morse_with_four_points() {
        let v = d1(&[(2, 1.0, 0.0)], 2); // cos(4πx)
        let report = verify_morse(&v, &MorseOptions::default()).unwrap();
        assert!(report.is_morse);
        assert_eq!(report.critical_points.len(), 4);
        assert_eq!(report.euler_sum, 0);
        assert!(report.search_exhaustive);
    }

    #[test]
    fn cos_cos_morse_report() {
        let report = verify_morse(&cos_cos(), &MorseOptions::default()).unwrap();
        assert!(report.is_morse);
        assert_eq!(report.euler_sum, 0);
        assert_eq!(report.critical_points.len(), 4);
        assert!(report.search_exhaustive);
    }

    #[test]
    fn cos_cos_unique_extrema() {
        let report = verify_unique_extrema(&cos_cos(), &MorseOptions::default()).unwrap();
        assert!(report.unique_min && report.unique_max);
        assert!((report.min_separation - 2.0).abs() < 1e-9);
        assert!((report.max_separation - 2.0).abs() < 1e-9);
    }

    #[test]
    fn cos_4pi_has_tied_extrema() {
        let v = d1(&[(2, 1.0, 0.0)], 2);
        let report = verify_unique_extrema(&v, &MorseOptions::default()).unwrap();
        assert!(!report.unique_max);
        assert!(!report.unique_min);
    }

    #[test]
    fn cos_unique_extrema() {
        let v = d1(&[(1, 1.0, 0.0)], 1);
        let report = verify_unique_extrema(&v, &MorseOptions::default()).unwrap();
        assert!(report.unique_min && report.unique_max);
    }

    #[test]
    fn constant_potential_is_an_error() {
        let shape = PotentialShape::new(1, 1).unwrap();
        let v = TrigPolynomial::from_labels(shape, &[(BasisLabel::Constant, 3.0)]).unwrap();
        assert!(matches!(
            find_critical_points(&v, &MorseOptions::default()),
            Err(Error::ConstantPotential(_))
        ));
    }
}
