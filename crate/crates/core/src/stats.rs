//! Exact binomial confidence bounds for Monte-Carlo hit counts.

use statrs::function::beta::beta_reg;

/// Inverse of the regularized incomplete beta function I_x(a, b), by
/// bisection to full double precision. The generic distribution inverses
/// quantize too coarsely for million-sample confidence bounds.
fn beta_inv(a: f64, b: f64, p: f64) -> f64 {
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    for _ in 0..120 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if beta_reg(a, b, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// One-sided Clopper–Pearson upper bound at confidence 1-alpha: the largest
/// success probability consistent with observing `hits` in `samples`.
pub fn clopper_pearson_upper(hits: u64, samples: u64, alpha: f64) -> f64 {
    assert!(samples > 0 && hits <= samples);
    if hits == samples {
        return 1.0;
    }
    if hits == 0 {
        // P(X = 0 | p) = (1-p)^n = alpha
        return 1.0 - alpha.powf(1.0 / samples as f64);
    }
    beta_inv((hits + 1) as f64, (samples - hits) as f64, 1.0 - alpha)
}

/// One-sided Clopper–Pearson lower bound at confidence 1-alpha.
pub fn clopper_pearson_lower(hits: u64, samples: u64, alpha: f64) -> f64 {
    assert!(samples > 0 && hits <= samples);
    if hits == 0 {
        return 0.0;
    }
    if hits == samples {
        return alpha.powf(1.0 / samples as f64);
    }
    beta_inv(hits as f64, (samples - hits + 1) as f64, alpha)
}

/// Two-sided Clopper–Pearson interval at total miscoverage alpha
/// (alpha/2 per tail).
pub fn clopper_pearson_interval(hits: u64, samples: u64, alpha: f64) -> (f64, f64) {
    (
        clopper_pearson_lower(hits, samples, alpha / 2.0),
        clopper_pearson_upper(hits, samples, alpha / 2.0),
    )
}

/// Ordinary least squares slope and intercept of y against x.
/// Returns None with fewer than two points or degenerate x.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}
