//! Log-space helpers shared by the filter, the estimators and the models.

use std::f64::consts::PI;

/// `ln Σ exp(xᵢ)`, stable for large magnitudes. Empty input gives `-inf`.
pub fn log_sum_exp<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let values: Vec<f64> = values.into_iter().collect();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return max;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// `ln(exp(a) + exp(b))`.
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Log-density of an isotropic Gaussian with standard deviation `sigma`.
///
/// `sigma == 0` is a point mass (`0` at the mean, `-inf` elsewhere) and an
/// infinite `sigma` is treated as an uninformative density (`0` everywhere).
pub fn isotropic_normal_logpdf(x: &[f64], mean: &[f64], sigma: f64) -> f64 {
    if sigma.is_infinite() {
        return 0.0;
    }
    if sigma == 0.0 {
        return if x == mean { 0.0 } else { f64::NEG_INFINITY };
    }
    let sq: f64 = x.iter().zip(mean).map(|(a, b)| (a - b) * (a - b)).sum();
    let k = x.len() as f64;
    -0.5 * sq / (sigma * sigma) - k * sigma.ln() - 0.5 * k * (2.0 * PI).ln()
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_matches_direct_sum() {
        let xs = [0.1, -2.0, 3.5];
        let direct: f64 = xs.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(xs) - direct).abs() < 1e-12);
        assert_eq!(log_sum_exp([]), f64::NEG_INFINITY);
        assert!((log_sum_exp([1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-9);
    }

    #[test]
    fn log_add_handles_neg_infinity() {
        assert_eq!(log_add(f64::NEG_INFINITY, 2.0), 2.0);
        assert!((log_add(0.0, 0.0) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn normal_logpdf_at_mode() {
        let v = isotropic_normal_logpdf(&[1.0, 2.0], &[1.0, 2.0], 0.5);
        let expected = -(2.0 * PI * 0.25).ln();
        assert!((v - expected).abs() < 1e-12);
    }
}
