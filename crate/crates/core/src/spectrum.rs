//! Finite-volume spectra of the quasiperiodic operator
//! H(x)ψ(n) = -ψ(n+1) - ψ(n-1) + λV(x + nω)ψ(n).
//!
//! Dirichlet truncation to {0..L-1} yields a symmetric tridiagonal matrix
//! with diagonal λV(x₀ + nω) and off-diagonal -1. All L eigenvalues come
//! from Sturm-sequence bisection: the LDLᵀ pivot recurrence at a shift λ
//! counts eigenvalues below the shift, and per-index bisection inside the
//! Gershgorin interval refines each eigenvalue independently, which makes
//! the solver bit-reproducible for a fixed bracketing order. Bisection
//! rounds batch the Sturm counts across all still-active eigenvalue
//! indices so one pass over the matrix serves every shift.
//!
//! The infinite-volume spectrum is approximated by the sorted union of
//! truncation eigenvalues over several phases x₀, and spectral gaps are
//! maximal spacings above a resolution threshold strictly inside the
//! union's hull.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{MultiIndex, TorusPoint, TrigPolynomial};
use crate::rng::Stream;

/// Operator data: potential, frequency vector, coupling, and base phase.
#[derive(Debug, Clone)]
pub struct OperatorConfig {
    pub potential: TrigPolynomial,
    pub omega: Vec<f64>,
    pub lambda: f64,
    pub x0: TorusPoint,
}

impl OperatorConfig {
    /// Validates dimensions, ω ∈ (0,1)^d, and λ ≥ 0 (λ = 0 is the free
    /// Laplacian reference case). Diophantine certification of ω is a
    /// separate, explicit step; see [`diophantine_check`].
    pub fn new(
        potential: TrigPolynomial,
        omega: Vec<f64>,
        lambda: f64,
        x0: TorusPoint,
    ) -> Result<Self> {
        let d = potential.shape().d();
        if omega.len() != d {
            return Err(Error::InvalidConfig(format!(
                "omega has dimension {}, potential has {d}",
                omega.len()
            )));
        }
        if omega.iter().any(|w| !(0.0 < *w && *w < 1.0)) {
            return Err(Error::InvalidConfig(
                "every omega component must lie in (0,1)".into(),
            ));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "coupling lambda must be finite and >= 0, got {lambda}"
            )));
        }
        if x0.dim() != d {
            return Err(Error::InvalidConfig(format!(
                "phase x0 has dimension {}, potential has {d}",
                x0.dim()
            )));
        }
        Ok(OperatorConfig {
            potential,
            omega,
            lambda,
            x0,
        })
    }

    pub fn with_phase(&self, x0: TorusPoint) -> OperatorConfig {
        OperatorConfig {
            potential: self.potential.clone(),
            omega: self.omega.clone(),
            lambda: self.lambda,
            x0,
        }
    }
}

/// Outcome of the finite Diophantine scan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiophantineReport {
    pub pass: bool,
    /// The m minimizing ‖m·ω‖·|m|^τ / c, with its distance to the integers.
    pub worst_m: MultiIndex,
    pub worst_value: f64,
    /// The lower bound c/|m|^τ the worst m had to clear.
    pub required_at_worst: f64,
    pub c: f64,
    pub tau: f64,
    pub m_max: u64,
}

/// Distance of t to the nearest integer.
fn torus_dist(t: f64) -> f64 {
    (t - t.round()).abs()
}

/// Checks ‖m·ω‖ ≥ c/|m|^τ for all 0 < |m|₁ ≤ m_max. Scanning the ±m
/// representatives suffices since ‖·‖ is even. Failure is a data outcome,
/// not an error.
pub fn diophantine_check(omega: &[f64], c: f64, tau: f64, m_max: u64) -> DiophantineReport {
    assert!(m_max >= 1, "m_max must be >= 1");
    let d = omega.len();
    let bound = m_max as i64;
    let mut worst: Option<(MultiIndex, f64, f64, f64)> = None; // (m, dist, required, quality)
    let mut pass = true;

    let mut current = vec![-bound; d];
    loop {
        let m = MultiIndex::new(current.clone());
        let norm = m.l1_norm();
        if norm > 0 && norm <= m_max && m.is_representative() {
            let dot: f64 = m
                .entries()
                .iter()
                .zip(omega)
                .map(|(&mi, &wi)| mi as f64 * wi)
                .sum();
            let dist = torus_dist(dot);
            let required = c / (norm as f64).powf(tau);
            if dist < required {
                pass = false;
            }
            let quality = dist / required;
            if worst.as_ref().map_or(true, |w| quality < w.3) {
                worst = Some((m, dist, required, quality));
            }
        }
        let mut axis = d;
        loop {
            if axis == 0 {
                let (worst_m, worst_value, required_at_worst, _) =
                    worst.expect("at least one m scanned");
                return DiophantineReport {
                    pass,
                    worst_m,
                    worst_value,
                    required_at_worst,
                    c,
                    tau,
                    m_max,
                };
            }
            axis -= 1;
            if current[axis] < bound {
                current[axis] += 1;
                break;
            }
            current[axis] = -bound;
        }
    }
}

/// Symmetric tridiagonal matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tridiagonal {
    diag: Vec<f64>,
    offdiag: Vec<f64>,
}

impl Tridiagonal {
    pub fn new(diag: Vec<f64>, offdiag: Vec<f64>) -> Result<Self> {
        if diag.len() < 2 {
            return Err(Error::TruncationTooSmall { l: diag.len() });
        }
        if offdiag.len() != diag.len() - 1 {
            return Err(Error::InvalidConfig(format!(
                "off-diagonal length {} does not match size {}",
                offdiag.len(),
                diag.len()
            )));
        }
        Ok(Tridiagonal { diag, offdiag })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn offdiag(&self) -> &[f64] {
        &self.offdiag
    }

    pub fn trace(&self) -> f64 {
        self.diag.iter().sum()
    }

    /// The leading (L-1)×(L-1) principal submatrix.
    pub fn principal_submatrix(&self) -> Result<Tridiagonal> {
        Tridiagonal::new(
            self.diag[..self.diag.len() - 1].to_vec(),
            self.offdiag[..self.offdiag.len() - 1].to_vec(),
        )
    }
}

/// Dirichlet truncation of size L: diag[n] = λ·V(x₀ + nω), off-diagonal -1.
pub fn build_truncation(cfg: &OperatorConfig, l: usize) -> Result<Tridiagonal> {
    if l < 2 {
        return Err(Error::TruncationTooSmall { l });
    }
    let d = cfg.potential.shape().d();
    let mut coords = vec![0.0; d];
    let diag: Vec<f64> = (0..l)
        .map(|n| {
            for (c, (x, w)) in coords
                .iter_mut()
                .zip(cfg.x0.coords().iter().zip(&cfg.omega))
            {
                *c = x + n as f64 * w;
            }
            cfg.lambda * cfg.potential.value_at(&coords)
        })
        .collect();
    Tridiagonal::new(diag, vec![-1.0; l - 1])
}

/// Sturm pivot threshold guarding against division by a vanishing pivot.
const PIVOT_FLOOR: f64 = 1e-300;

/// One batched Sturm pass: for each shift in `shifts`, counts eigenvalues
/// strictly below it. `e2` holds the squared off-diagonals.
fn sturm_counts(diag: &[f64], e2: &[f64], shifts: &[f64], counts: &mut [usize], q: &mut [f64]) {
    let m = shifts.len();
    for k in 0..m {
        let p = diag[0] - shifts[k];
        q[k] = p;
        counts[k] = (p < 0.0) as usize;
    }
    for i in 1..diag.len() {
        let di = diag[i];
        let ei = e2[i - 1];
        for k in 0..m {
            let mut piv = q[k];
            // guard: keep the pivot's sign but bound it away from zero
            if piv.abs() < PIVOT_FLOOR {
                piv = if piv >= 0.0 { PIVOT_FLOOR } else { -PIVOT_FLOOR };
            }
            let next = (di - shifts[k]) - ei / piv;
            counts[k] += (next < 0.0) as usize;
            q[k] = next;
        }
    }
}

/// All eigenvalues, ascending, via Sturm bisection inside the Gershgorin
/// interval. Each eigenvalue is resolved to 1e-11·(‖diag‖∞ + 2‖off‖∞),
/// comfortably inside the 1e-10·(‖diag‖∞ + 2) contract for unit hopping.
pub fn eigenvalues_tridiagonal(t: &Tridiagonal) -> Vec<f64> {
    let n = t.len();
    let diag = t.diag();
    let off = t.offdiag();
    if n == 1 {
        return vec![diag[0]];
    }
    let e2: Vec<f64> = off.iter().map(|e| e * e).collect();

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let left = if i > 0 { off[i - 1].abs() } else { 0.0 };
        let right = if i < n - 1 { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - left - right);
        hi = hi.max(diag[i] + left + right);
    }
    let dmax = diag.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let emax = off.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let scale = dmax + 2.0 * emax;
    let tol = 1e-11 * scale.max(f64::MIN_POSITIVE);
    lo -= tol;
    hi += tol;

    let mut a = vec![lo; n];
    let mut b = vec![hi; n];
    let mut active: Vec<usize> = (0..n).collect();
    let mut shifts = vec![0.0; n];
    let mut counts = vec![0usize; n];
    let mut q = vec![0.0; n];

    while !active.is_empty() {
        let m = active.len();
        for (slot, &k) in active.iter().enumerate() {
            shifts[slot] = 0.5 * (a[k] + b[k]);
        }
        sturm_counts(diag, &e2, &shifts[..m], &mut counts[..m], &mut q[..m]);
        let mut next = Vec::with_capacity(m);
        for (slot, &k) in active.iter().enumerate() {
            let mid = shifts[slot];
            if counts[slot] <= k {
                a[k] = mid;
            } else {
                b[k] = mid;
            }
            let width = b[k] - a[k];
            let ulp_floor = 2.0 * f64::EPSILON * a[k].abs().max(b[k].abs());
            if width > tol.max(ulp_floor) {
                next.push(k);
            }
        }
        active = next;
    }

    let mut eigs: Vec<f64> = (0..n).map(|k| 0.5 * (a[k] + b[k])).collect();
    eigs.sort_by(f64::total_cmp);
    eigs
}

/// How base phases are chosen for the union.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseMode {
    /// Independent uniform phases from the seeded stream (default;
    /// decorrelates Dirichlet boundary effects).
    Random,
    /// Consecutive length-L segments of the single orbit starting at x₀.
    Orbit,
}

/// Eigenvalue union over phases, before gap detection.
#[derive(Debug, Clone)]
pub struct PhaseUnion {
    /// Sorted union of all eigenvalues.
    pub eigenvalues: Vec<f64>,
    /// Per-phase sorted eigenvalue lists, in phase order.
    pub per_phase: Vec<Vec<f64>>,
    pub l: usize,
    pub phases: usize,
}

/// Union of truncation spectra over `num_phases` base points.
pub fn approximate_spectrum(
    cfg: &OperatorConfig,
    l: usize,
    num_phases: usize,
    seed: u64,
    mode: PhaseMode,
) -> Result<PhaseUnion> {
    if num_phases < 1 {
        return Err(Error::InvalidConfig("need at least one phase".into()));
    }
    let d = cfg.potential.shape().d();
    let phase_points: Vec<TorusPoint> = match mode {
        PhaseMode::Random => {
            let mut stream = Stream::new(seed);
            (0..num_phases).map(|_| stream.torus_point(d)).collect()
        }
        PhaseMode::Orbit => (0..num_phases)
            .map(|k| {
                let shift: Vec<f64> = cfg
                    .omega
                    .iter()
                    .map(|w| (k * l) as f64 * w)
                    .collect();
                cfg.x0.add(&TorusPoint::new(shift))
            })
            .collect(),
    };

    let per_phase: Vec<Vec<f64>> = phase_points
        .par_iter()
        .map(|x0| {
            let t = build_truncation(&cfg.with_phase(x0.clone()), l)?;
            Ok(eigenvalues_tridiagonal(&t))
        })
        .collect::<Result<_>>()?;

    let mut eigenvalues: Vec<f64> = per_phase.iter().flatten().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    Ok(PhaseUnion {
        eigenvalues,
        per_phase,
        l,
        phases: num_phases,
    })
}

/// A maximal eigenvalue-free interval wider than the resolution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Gap {
    pub left: f64,
    pub right: f64,
    pub width: f64,
}

/// Gap detection outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GapReport {
    pub gaps: Vec<Gap>,
    pub is_interval: bool,
    pub resolution: f64,
}

/// Finds every maximal spacing above `resolution` strictly inside the hull
/// of the sorted eigenvalue list.
pub fn detect_gaps(eigenvalues: &[f64], resolution: f64) -> Result<GapReport> {
    if eigenvalues.len() < 2 {
        return Err(Error::TooFewEigenvalues {
            got: eigenvalues.len(),
        });
    }
    if !(resolution > 0.0) {
        return Err(Error::InvalidConfig("resolution must be positive".into()));
    }
    let gaps: Vec<Gap> = eigenvalues
        .windows(2)
        .filter(|w| w[1] - w[0] > resolution)
        .map(|w| Gap {
            left: w[0],
            right: w[1],
            width: w[1] - w[0],
        })
        .collect();
    Ok(GapReport {
        is_interval: gaps.is_empty(),
        gaps,
        resolution,
    })
}

/// Default gap resolution: finite-size level spacing scales like
/// (spectral width)/L in the bulk, so ten spacings separate genuine gaps
/// from discretization; a user floor keeps it meaningful for tiny widths.
pub fn default_gap_resolution(spectral_width: f64, l: usize, floor: f64) -> f64 {
    (10.0 * spectral_width / l as f64).max(floor)
}

/// Sorted union with detected gaps and the interval verdict.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumEstimate {
    pub eigenvalues: Vec<f64>,
    pub l: usize,
    pub phases: usize,
    pub gaps: Vec<Gap>,
    pub is_interval: bool,
    pub resolution: f64,
}

impl PhaseUnion {
    pub fn with_gaps(&self, resolution: f64) -> Result<SpectrumEstimate> {
        let report = detect_gaps(&self.eigenvalues, resolution)?;
        Ok(SpectrumEstimate {
            eigenvalues: self.eigenvalues.clone(),
            l: self.l,
            phases: self.phases,
            gaps: report.gaps,
            is_interval: report.is_interval,
            resolution,
        })
    }

    /// CSV export: phase_index, eigenvalue_index, eigenvalue.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("phase_index,eigenvalue_index,eigenvalue\n");
        for (p, eigs) in self.per_phase.iter().enumerate() {
            for (i, e) in eigs.iter().enumerate() {
                out.push_str(&format!("{p},{i},{e}\n"));
            }
        }
        out
    }
}
