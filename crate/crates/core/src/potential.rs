//! Real trigonometric polynomials on the d-torus.
//!
//! A potential is parametrized by a point c ∈ R^N, where N is the number of
//! integer frequency vectors m ∈ Z^d with ℓ1 norm |m| ≤ n. Because the
//! complex exponentials pair up as ±m, the same N real dimensions are
//! realized here by the basis
//!
//! ```text
//!   { 1 } ∪ { cos(2π m·x), sin(2π m·x) : m a representative, 0 < |m| ≤ n }
//! ```
//!
//! where a representative has positive first nonzero entry. The canonical
//! ordering of this basis (constant first, then representatives sorted by
//! (|m|, entries) with cosine before sine) fixes the bijection between R^N
//! and evaluable potentials, and is what coefficient files are written in.
//!
//! Jets are exact: differentiating the basis pulls down factors of 2π m_j,
//! so gradients and Hessians carry no discretization error.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TAU: f64 = std::f64::consts::TAU;

/// Integer frequency vector m ∈ Z^d.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiIndex {
    entries: Vec<i64>,
}

impl MultiIndex {
    pub fn new(entries: Vec<i64>) -> Self {
        MultiIndex { entries }
    }

    pub fn entries(&self) -> &[i64] {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    /// ℓ1 norm |m| = Σ_j |m_j|.
    pub fn l1_norm(&self) -> u64 {
        self.entries.iter().map(|e| e.unsigned_abs()).sum()
    }

    /// True when the first nonzero entry is positive (the ± pair representative).
    pub fn is_representative(&self) -> bool {
        match self.entries.iter().find(|&&e| e != 0) {
            Some(&e) => e > 0,
            None => false,
        }
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, e) in self.entries.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

/// One element of the canonical real basis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasisLabel {
    Constant,
    Cos(MultiIndex),
    Sin(MultiIndex),
}

impl BasisLabel {
    pub fn frequency(&self) -> Option<&MultiIndex> {
        match self {
            BasisLabel::Constant => None,
            BasisLabel::Cos(m) | BasisLabel::Sin(m) => Some(m),
        }
    }
}

/// Exact binomial coefficient, or None on overflow.
fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 1..=k {
        acc = acc.checked_mul((n - k + i) as u128)?;
        acc /= i as u128; // exact at every step
    }
    Some(acc)
}

/// Number of m ∈ Z^d with |m| ≤ n, by the closed form
/// N = Σ_{k=0}^n a_{d,k}, a_{d,k} = Σ_{l=1}^{min(d,k)} C(d,l) 2^l C(k-1,l-1),
/// a_{d,0} = 1. Overflow is an error, never a silent wrap.
pub fn dimension_count(d: usize, n: u32) -> Result<usize> {
    if d == 0 {
        return Err(Error::InvalidShape("torus dimension d must be >= 1".into()));
    }
    let overflow = || Error::DimensionOverflow { d, n };
    let mut total: u128 = 1; // a_{d,0}
    for k in 1..=n as u64 {
        let mut a_dk: u128 = 0;
        for l in 1..=(d as u64).min(k) {
            let term = binomial(d as u64, l)
                .and_then(|c| c.checked_mul(1u128.checked_shl(l as u32)?))
                .and_then(|c| c.checked_mul(binomial(k - 1, l - 1)?))
                .ok_or_else(overflow)?;
            a_dk = a_dk.checked_add(term).ok_or_else(overflow)?;
        }
        total = total.checked_add(a_dk).ok_or_else(overflow)?;
    }
    usize::try_from(total).map_err(|_| overflow())
}

/// Shape of the coefficient space: torus dimension d, degree bound n, and
/// the real dimension N of the space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PotentialShape {
    d: usize,
    n: u32,
    dim: usize,
}

impl PotentialShape {
    pub fn new(d: usize, n: u32) -> Result<Self> {
        let dim = dimension_count(d, n)?;
        Ok(PotentialShape { d, n, dim })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn degree(&self) -> u32 {
        self.n
    }

    /// Real dimension N of the coefficient space.
    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// All representatives m (first nonzero entry positive) with 1 ≤ |m| ≤ n,
/// sorted by (|m|, entries).
fn representatives(d: usize, n: u32) -> Vec<MultiIndex> {
    let bound = n as i64;
    let mut out = Vec::new();
    let mut current = vec![-bound; d];
    loop {
        let m = MultiIndex::new(current.clone());
        if m.l1_norm() <= n as u64 && m.is_representative() {
            out.push(m);
        }
        // odometer over the box [-n, n]^d
        let mut axis = d;
        loop {
            if axis == 0 {
                out.sort_by(|a, b| {
                    (a.l1_norm(), a.entries()).cmp(&(b.l1_norm(), b.entries()))
                });
                return out;
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

/// The canonical basis table for a shape: constant, then cos/sin pairs per
/// representative in (|m|, entries) order. Stable across runs and platforms.
pub fn index_table(shape: &PotentialShape) -> Vec<BasisLabel> {
    let mut table = Vec::with_capacity(shape.dim());
    table.push(BasisLabel::Constant);
    for m in representatives(shape.d(), shape.degree()) {
        table.push(BasisLabel::Cos(m.clone()));
        table.push(BasisLabel::Sin(m));
    }
    debug_assert_eq!(table.len(), shape.dim());
    table
}

/// A point c ∈ R^N in the canonical basis ordering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientVector {
    shape: PotentialShape,
    values: Vec<f64>,
}

impl CoefficientVector {
    pub fn new(shape: PotentialShape, values: Vec<f64>) -> Result<Self> {
        if values.len() != shape.dim() {
            return Err(Error::CoefficientLength {
                got: values.len(),
                expected: shape.dim(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteCoefficient { index });
        }
        Ok(CoefficientVector { shape, values })
    }

    pub fn zeros(shape: PotentialShape) -> Self {
        CoefficientVector {
            shape,
            values: vec![0.0; shape.dim()],
        }
    }

    pub fn shape(&self) -> &PotentialShape {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    pub fn euclidean_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// ℓ1 norm of the non-constant part; zero means V is constant.
    pub fn nonconstant_l1(&self) -> f64 {
        self.values[1..].iter().map(|v| v.abs()).sum()
    }

    /// (1-t)·self + t·other, for line-slice experiments.
    pub fn lerp(&self, other: &CoefficientVector, t: f64) -> Result<CoefficientVector> {
        if self.shape != other.shape {
            return Err(Error::InvalidShape(
                "lerp endpoints have different shapes".into(),
            ));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (1.0 - t) * a + t * b)
            .collect();
        CoefficientVector::new(self.shape, values)
    }
}

/// A point of T^d, stored reduced to [0,1)^d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    coords: Vec<f64>,
}

fn wrap_unit(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

impl TorusPoint {
    /// Wraps arbitrary real coordinates into [0,1)^d.
    pub fn new(coords: Vec<f64>) -> Self {
        TorusPoint {
            coords: coords.into_iter().map(wrap_unit).collect(),
        }
    }

    pub fn origin(d: usize) -> Self {
        TorusPoint {
            coords: vec![0.0; d],
        }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Componentwise sum on the torus.
    pub fn add(&self, other: &TorusPoint) -> TorusPoint {
        TorusPoint::new(
            self.coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    /// Quotient-metric distance: Euclidean norm of per-coordinate circle
    /// distances min(|Δ|, 1-|Δ|).
    pub fn quotient_distance(&self, other: &TorusPoint) -> f64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| {
                let d = (a - b).abs();
                let d = d.min(1.0 - d);
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Quotient-metric norm (distance to 0).
    pub fn quotient_norm(&self) -> f64 {
        self.quotient_distance(&TorusPoint::origin(self.dim()))
    }
}

/// Requested derivative order for [`TrigPolynomial::jet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JetOrder {
    Value,
    Gradient,
    Hessian,
}

/// Value and exact derivatives of V at a point. `gradient` is empty unless
/// order ≥ 1; `hessian` (row-major d×d, symmetric) is empty unless order = 2.
#[derive(Debug, Clone)]
pub struct Jet {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Vec<f64>,
}

/// One cos/sin pair of the potential, compiled for evaluation.
#[derive(Debug, Clone)]
struct Term {
    freq: Vec<f64>, // m as f64
    cos_coef: f64,
    sin_coef: f64,
}

/// An evaluable potential V(·; c) on T^d.
#[derive(Debug, Clone)]
pub struct TrigPolynomial {
    shape: PotentialShape,
    basis: Vec<BasisLabel>,
    coefficients: CoefficientVector,
    constant: f64,
    terms: Vec<Term>,
}

impl TrigPolynomial {
    pub fn new(coefficients: CoefficientVector) -> Self {
        let shape = *coefficients.shape();
        let basis = index_table(&shape);
        let constant = coefficients.values()[0];
        let mut terms = Vec::with_capacity((shape.dim() - 1) / 2);
        let mut i = 1;
        while i < basis.len() {
            let m = match &basis[i] {
                BasisLabel::Cos(m) => m,
                _ => unreachable!("table alternates cos/sin after the constant"),
            };
            terms.push(Term {
                freq: m.entries().iter().map(|&e| e as f64).collect(),
                cos_coef: coefficients.values()[i],
                sin_coef: coefficients.values()[i + 1],
            });
            i += 2;
        }
        TrigPolynomial {
            shape,
            basis,
            coefficients,
            constant,
            terms,
        }
    }

    /// Builds the potential whose only nonzero coefficients are the given
    /// (label, value) pairs; labels not in the table are an error.
    pub fn from_labels(
        shape: PotentialShape,
        entries: &[(BasisLabel, f64)],
    ) -> Result<TrigPolynomial> {
        let table = index_table(&shape);
        let mut values = vec![0.0; shape.dim()];
        for (label, v) in entries {
            let pos = table
                .iter()
                .position(|l| l == label)
                .ok_or_else(|| Error::InvalidShape(format!("label {label:?} not in table")))?;
            values[pos] = *v;
        }
        Ok(TrigPolynomial::new(CoefficientVector::new(shape, values)?))
    }

    pub fn shape(&self) -> &PotentialShape {
        &self.shape
    }

    pub fn basis(&self) -> &[BasisLabel] {
        &self.basis
    }

    pub fn coefficients(&self) -> &CoefficientVector {
        &self.coefficients
    }

    pub fn is_constant(&self) -> bool {
        self.coefficients.nonconstant_l1() == 0.0
    }

    pub fn value(&self, x: &TorusPoint) -> f64 {
        self.value_at(x.coords())
    }

    /// Value at raw coordinates (the basis is periodic, so no wrapping is
    /// needed). Allocation-free; the hot path for spectra and sampling.
    pub fn value_at(&self, coords: &[f64]) -> f64 {
        let mut v = self.constant;
        for t in &self.terms {
            let theta = TAU * dot(&t.freq, coords);
            let (s, c) = theta.sin_cos();
            v += t.cos_coef * c + t.sin_coef * s;
        }
        v
    }

    /// Value and gradient without allocation; `grad` must have length d.
    pub fn value_and_gradient(&self, x: &TorusPoint, grad: &mut [f64]) -> f64 {
        self.value_and_gradient_at(x.coords(), grad)
    }

    /// Raw-coordinate variant of [`Self::value_and_gradient`].
    pub fn value_and_gradient_at(&self, coords: &[f64], grad: &mut [f64]) -> f64 {
        debug_assert_eq!(grad.len(), self.shape.d());
        grad.fill(0.0);
        let mut v = self.constant;
        for t in &self.terms {
            let theta = TAU * dot(&t.freq, coords);
            let (s, c) = theta.sin_cos();
            v += t.cos_coef * c + t.sin_coef * s;
            let radial = TAU * (-t.cos_coef * s + t.sin_coef * c);
            for (g, &mj) in grad.iter_mut().zip(&t.freq) {
                *g += radial * mj;
            }
        }
        v
    }

    /// Exact jet up to the requested order.
    pub fn jet(&self, x: &TorusPoint, order: JetOrder) -> Jet {
        let d = self.shape.d();
        match order {
            JetOrder::Value => Jet {
                value: self.value(x),
                gradient: Vec::new(),
                hessian: Vec::new(),
            },
            JetOrder::Gradient => {
                let mut gradient = vec![0.0; d];
                let value = self.value_and_gradient(x, &mut gradient);
                Jet {
                    value,
                    gradient,
                    hessian: Vec::new(),
                }
            }
            JetOrder::Hessian => {
                let mut gradient = vec![0.0; d];
                let mut hessian = vec![0.0; d * d];
                let mut value = self.constant;
                for t in &self.terms {
                    let theta = TAU * dot(&t.freq, x.coords());
                    let (s, c) = theta.sin_cos();
                    value += t.cos_coef * c + t.sin_coef * s;
                    let radial = TAU * (-t.cos_coef * s + t.sin_coef * c);
                    let curv = -TAU * TAU * (t.cos_coef * c + t.sin_coef * s);
                    for i in 0..d {
                        gradient[i] += radial * t.freq[i];
                        for j in 0..d {
                            hessian[i * d + j] += curv * t.freq[i] * t.freq[j];
                        }
                    }
                }
                Jet {
                    value,
                    gradient,
                    hessian,
                }
            }
        }
    }

    /// Directional derivative of the gradient: the i-th partial at x.
    pub fn partial(&self, x: &TorusPoint, i: usize) -> f64 {
        let mut v = 0.0;
        for t in &self.terms {
            let theta = TAU * dot(&t.freq, x.coords());
            let (s, c) = theta.sin_cos();
            v += TAU * t.freq[i] * (-t.cos_coef * s + t.sin_coef * c);
        }
        v
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

// --- coefficient file format -------------------------------------------------
//
// {"d": 2, "n": 2, "coefficients": [c_0, ...]} with values in index_table
// order, written at 17 significant digits so round trips are exact.

#[derive(Serialize, Deserialize)]
struct CoefficientFile {
    d: usize,
    n: u32,
    coefficients: Vec<f64>,
}

/// Serializes a coefficient vector to the JSON file format.
pub fn coefficient_file_string(cv: &CoefficientVector) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{{\"d\": {}, \"n\": {}, \"coefficients\": [",
        cv.shape().d(),
        cv.shape().degree()
    ));
    for (i, v) in cv.values().iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(&format!("{v:.16e}"));
    }
    out.push_str("]}\n");
    out
}

pub fn write_coefficient_file(path: &std::path::Path, cv: &CoefficientVector) -> Result<()> {
    std::fs::write(path, coefficient_file_string(cv))?;
    Ok(())
}

pub fn coefficients_from_json(text: &str) -> Result<CoefficientVector> {
    let raw: CoefficientFile = serde_json::from_str(text)?;
    let shape = PotentialShape::new(raw.d, raw.n)?;
    CoefficientVector::new(shape, raw.coefficients)
}

pub fn read_coefficient_file(path: &std::path::Path) -> Result<CoefficientVector> {
    let text = std::fs::read_to_string(path)?;
    coefficients_from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimension_count_examples() {
        assert_eq!(dimension_count(1, 1).unwrap(), 3);
        assert_eq!(dimension_count(2, 2).unwrap(), 13);
        assert_eq!(dimension_count(3, 0).unwrap(), 1);
    }

    #[test]
    fn dimension_count_rejects_d_zero() {
        assert!(dimension_count(0, 1).is_err());
    }

    #[test]
    fn index_table_d1_n1() {
        let shape = PotentialShape::new(1, 1).unwrap();
        let table = index_table(&shape);
        assert_eq!(
            table,
            vec![
                BasisLabel::Constant,
                BasisLabel::Cos(MultiIndex::new(vec![1])),
                BasisLabel::Sin(MultiIndex::new(vec![1])),
            ]
        );
    }

    #[test]
    fn index_table_d2_n1() {
        let shape = PotentialShape::new(2, 1).unwrap();
        let table = index_table(&shape);
        assert_eq!(
            table,
            vec![
                BasisLabel::Constant,
                BasisLabel::Cos(MultiIndex::new(vec![0, 1])),
                BasisLabel::Sin(MultiIndex::new(vec![0, 1])),
                BasisLabel::Cos(MultiIndex::new(vec![1, 0])),
                BasisLabel::Sin(MultiIndex::new(vec![1, 0])),
            ]
        );
    }

    #[test]
    fn index_table_length_matches_dimension() {
        let shape = PotentialShape::new(2, 2).unwrap();
        assert_eq!(index_table(&shape).len(), 13);
    }

    #[test]
    fn constant_jet() {
        let shape = PotentialShape::new(2, 1).unwrap();
        let mut values = vec![0.0; shape.dim()];
        values[0] = 2.0;
        let v = TrigPolynomial::new(CoefficientVector::new(shape, values).unwrap());
        let jet = v.jet(&TorusPoint::new(vec![0.3, 0.7]), JetOrder::Hessian);
        assert_eq!(jet.value, 2.0);
        assert!(jet.gradient.iter().all(|&g| g == 0.0));
        assert!(jet.hessian.iter().all(|&h| h == 0.0));
    }

    #[test]
    fn cosine_jet_at_zero() {
        // V = cos(2πx), d=1: V(0)=1, V'(0)=0, V''(0)=-4π²
        let shape = PotentialShape::new(1, 1).unwrap();
        let v = TrigPolynomial::from_labels(
            shape,
            &[(BasisLabel::Cos(MultiIndex::new(vec![1])), 1.0)],
        )
        .unwrap();
        let jet = v.jet(&TorusPoint::origin(1), JetOrder::Hessian);
        assert!((jet.value - 1.0).abs() < 1e-15);
        assert!(jet.gradient[0].abs() < 1e-15);
        assert!((jet.hessian[0] + 4.0 * std::f64::consts::PI.powi(2)).abs() < 1e-12);
    }

    #[test]
    fn periodicity_is_exact() {
        let shape = PotentialShape::new(2, 2).unwrap();
        let mut stream = crate::rng::Stream::new(7);
        let values: Vec<f64> = (0..shape.dim()).map(|_| stream.normal()).collect();
        let v = TrigPolynomial::new(CoefficientVector::new(shape, values).unwrap());
        let x = TorusPoint::new(vec![0.37, 0.81]);
        let shifted = TorusPoint::new(vec![0.37 + 1.0, 0.81]);
        // x+1 wraps back up to one rounding step of x
        assert!((v.value(&x) - v.value(&shifted)).abs() <= 1e-12);
    }

    #[test]
    fn coefficient_file_round_trip() {
        let shape = PotentialShape::new(2, 1).unwrap();
        let values = vec![0.1, -2.5e-7, 3.0, 0.333333333333333314, 1e-300];
        let cv = CoefficientVector::new(shape, values.clone()).unwrap();
        let text = coefficient_file_string(&cv);
        let back = coefficients_from_json(&text).unwrap();
        assert_eq!(back.values(), values.as_slice());
    }

    #[test]
    fn malformed_file_is_an_error() {
        assert!(coefficients_from_json("{\"d\": 1, \"n\": 1, \"coefficients\": [1.0").is_err());
        // wrong length
        assert!(coefficients_from_json("{\"d\": 1, \"n\": 1, \"coefficients\": [1.0]}").is_err());
    }

    #[test]
    fn wrap_stays_in_unit_interval() {
        for &x in &[-3.7, -1e-17, 0.0, 0.999999999, 5.25, 1.0] {
            let w = wrap_unit(x);
            assert!((0.0..1.0).contains(&w), "wrap({x}) = {w}");
        }
    }
}
