//! Property tests for the critical-point search: translation equivariance,
//! scaling covariance, grid monotonicity, and the Morse-theoretic audits on
//! seeded random samples.

use qslab_core::morse::{find_critical_points, verify_morse, MorseOptions};
use qslab_core::potential::{CoefficientVector, PotentialShape, TorusPoint, TrigPolynomial};
use qslab_core::rng::Stream;
use qslab_core::survey::{sample_coefficients, Distribution};

fn random_potential(shape: PotentialShape, seed: u64) -> TrigPolynomial {
    TrigPolynomial::new(sample_coefficients(
        shape,
        &Distribution::Gaussian { sigma: 1.0 },
        seed,
    ))
}

/// Shifts V by t: cos/sin pairs rotate by the angle 2π m·t.
fn shifted_potential(v: &TrigPolynomial, t: &[f64]) -> TrigPolynomial {
    let shape = *v.shape();
    let table = qslab_core::potential::index_table(&shape);
    let old = v.coefficients().values();
    let mut new = old.to_vec();
    let mut i = 1;
    while i < table.len() {
        let m = table[i].frequency().unwrap();
        let theta: f64 = std::f64::consts::TAU
            * m.entries()
                .iter()
                .zip(t)
                .map(|(&mi, ti)| mi as f64 * ti)
                .sum::<f64>();
        let (s, c) = theta.sin_cos();
        let (a, b) = (old[i], old[i + 1]);
        new[i] = a * c + b * s;
        new[i + 1] = -a * s + b * c;
        i += 2;
    }
    TrigPolynomial::new(CoefficientVector::new(shape, new).unwrap())
}

#[test]
fn shift_identity_sanity() {
    let shape = PotentialShape::new(2, 2).unwrap();
    let v = random_potential(shape, 3);
    let t = [0.3, 0.67];
    let w = shifted_potential(&v, &t);
    let mut stream = Stream::new(8);
    for _ in 0..20 {
        let x = stream.torus_point(2);
        let moved = TorusPoint::new(vec![x.coords()[0] + t[0], x.coords()[1] + t[1]]);
        assert!((w.value(&x) - v.value(&moved)).abs() < 1e-12);
    }
}

#[test]
fn critical_values_are_translation_equivariant() {
    let shape = PotentialShape::new(2, 2).unwrap();
    let opts = MorseOptions::default();
    for seed in 0..10 {
        let v = random_potential(shape, seed);
        let t = [0.23, 0.71];
        let w = shifted_potential(&v, &t);
        let pv = find_critical_points(&v, &opts).unwrap();
        let pw = find_critical_points(&w, &opts).unwrap();
        assert_eq!(pv.len(), pw.len(), "seed {seed}");
        // critical values agree as sorted multisets
        for (a, b) in pv.iter().zip(&pw) {
            assert!((a.value - b.value).abs() < 1e-8, "seed {seed}");
        }
        // locations shift by -t modulo 1
        for (a, b) in pv.iter().zip(&pw) {
            let moved = TorusPoint::new(
                a.location
                    .coords()
                    .iter()
                    .zip(&t)
                    .map(|(x, ti)| x - ti)
                    .collect(),
            );
            assert!(moved.quotient_distance(&b.location) < 1e-6, "seed {seed}");
        }
    }
}

#[test]
fn scaling_preserves_locations_and_scales_dets() {
    let shape = PotentialShape::new(2, 2).unwrap();
    let opts = MorseOptions::default();
    let alpha = 3.5;
    for seed in 20..28 {
        let v = random_potential(shape, seed);
        let scaled_values: Vec<f64> =
            v.coefficients().values().iter().map(|c| alpha * c).collect();
        let w = TrigPolynomial::new(CoefficientVector::new(shape, scaled_values).unwrap());
        let pv = find_critical_points(&v, &opts).unwrap();
        let pw = find_critical_points(&w, &opts).unwrap();
        assert_eq!(pv.len(), pw.len(), "seed {seed}");
        for (a, b) in pv.iter().zip(&pw) {
            assert!(a.location.quotient_distance(&b.location) < 1e-6);
            // det Hess scales by alpha^d
            let expected = a.hessian_det * alpha.powi(2);
            assert!(
                (b.hessian_det - expected).abs() <= 1e-6 * expected.abs().max(1.0),
                "seed {seed}: {} vs {expected}",
                b.hessian_det
            );
        }
    }
}

#[test]
fn doubling_the_grid_never_loses_points() {
    let shape = PotentialShape::new(2, 2).unwrap();
    for seed in 40..50 {
        let v = random_potential(shape, seed);
        let base = MorseOptions::default();
        let coarse = find_critical_points(&v, &base).unwrap();
        let fine = find_critical_points(
            &v,
            &MorseOptions {
                grid_per_axis: Some(2 * base.resolved_grid(shape.degree())),
                ..base.clone()
            },
        )
        .unwrap();
        assert!(
            fine.len() >= coarse.len(),
            "seed {seed}: {} -> {}",
            coarse.len(),
            fine.len()
        );
    }
}

#[test]
fn euler_audit_on_seeded_gaussians() {
    // Morse-certified samples must have Euler sum 0 and at least 2^d points
    let shape = PotentialShape::new(2, 2).unwrap();
    let opts = MorseOptions::default();
    let mut certified = 0;
    for seed in 100..200 {
        let v = random_potential(shape, seed);
        let report = verify_morse(&v, &opts).unwrap();
        if report.is_morse && report.search_exhaustive {
            certified += 1;
            assert_eq!(report.euler_sum, 0);
            assert!(report.critical_points.len() >= 4);
        }
        assert!(report.is_morse, "random gaussian flagged non-Morse at seed {seed}");
    }
    assert!(certified >= 95, "only {certified}/100 certified");
}
