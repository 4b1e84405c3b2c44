//! Prediction-quality metrics: pointwise errors, the Gaussian
//! log-predictive scoring rule, and prediction-interval coverage.

use palm::error::{PalmError, Result};

/// Root mean squared prediction error.
pub fn rmse(y: &[f64], mu: &[f64]) -> f64 {
    assert_eq!(y.len(), mu.len(), "rmse needs paired values");
    assert!(!y.is_empty(), "rmse needs at least one pair");
    let ss: f64 = y.iter().zip(mu).map(|(a, b)| (a - b) * (a - b)).sum();
    (ss / y.len() as f64).sqrt()
}

/// Mean absolute prediction error.
pub fn mae(y: &[f64], mu: &[f64]) -> f64 {
    assert_eq!(y.len(), mu.len(), "mae needs paired values");
    assert!(!y.is_empty(), "mae needs at least one pair");
    let s: f64 = y.iter().zip(mu).map(|(a, b)| (a - b).abs()).sum();
    s / y.len() as f64
}

/// Gaussian log-predictive score, higher is better:
/// `mean_i [ -(y_i - mu_i)^2 / sigma2_i - ln sigma2_i ]`.
pub fn score(y: &[f64], mu: &[f64], sigma2: &[f64]) -> Result<f64> {
    assert_eq!(y.len(), mu.len(), "score needs paired values");
    assert_eq!(y.len(), sigma2.len(), "score needs one variance per pair");
    assert!(!y.is_empty(), "score needs at least one pair");
    let mut total = 0.0;
    for ((&yi, &mi), &s2) in y.iter().zip(mu).zip(sigma2) {
        if !(s2 > 0.0) {
            return Err(PalmError::InvalidArgument(format!(
                "score needs positive variances, got {s2}"
            )));
        }
        total += -(yi - mi) * (yi - mi) / s2 - s2.ln();
    }
    Ok(total / y.len() as f64)
}

/// Standard-normal quantile function by the Acklam rational approximation
/// (relative error below 1.2e-9 across (0, 1)).
pub fn inverse_normal_cdf(p: f64) -> f64 {
    assert!(
        p > 0.0 && p < 1.0,
        "quantile probability must lie strictly inside (0,1), got {p}"
    );
    const A: [f64; 6] = [
        -3.969683028665376e1,
        2.209460984245205e2,
        -2.759285104469687e2,
        1.383577518672690e2,
        -3.066479806614716e1,
        2.506628277459239e0,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e1,
        1.615858368580409e2,
        -1.556989798598866e2,
        6.680131188771972e1,
        -1.328068155288572e1,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-3,
        -3.223964580411365e-1,
        -2.400758277161838e0,
        -2.549732539343734e0,
        4.374664141464968e0,
        2.938163982698783e0,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-3,
        3.224671290700398e-1,
        2.445134137142996e0,
        3.754408661907416e0,
    ];
    const P_LOW: f64 = 0.02425;

    let tail = |q: f64| -> f64 {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    if p < P_LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    }
}

/// Fraction of observations inside the central `level` prediction interval
/// `mu_i +/- z * sigma_i`, with `z` the standard-normal quantile at
/// `(1 + level) / 2`.
pub fn coverage(y: &[f64], mu: &[f64], sigma2: &[f64], level: f64) -> Result<f64> {
    assert_eq!(y.len(), mu.len(), "coverage needs paired values");
    assert_eq!(y.len(), sigma2.len(), "coverage needs one variance per pair");
    assert!(!y.is_empty(), "coverage needs at least one pair");
    if !(level > 0.0 && level < 1.0) {
        return Err(PalmError::InvalidArgument(format!(
            "coverage level must lie strictly inside (0,1), got {level}"
        )));
    }
    let z = inverse_normal_cdf((1.0 + level) / 2.0);
    let mut inside = 0usize;
    for ((&yi, &mi), &s2) in y.iter().zip(mu).zip(sigma2) {
        if !(s2 >= 0.0) {
            return Err(PalmError::InvalidArgument(format!(
                "coverage needs nonnegative variances, got {s2}"
            )));
        }
        if (yi - mi).abs() <= z * s2.sqrt() {
            inside += 1;
        }
    }
    Ok(inside as f64 / y.len() as f64)
}

/// Default prediction-interval level for [`MetricReport`].
pub const COVERAGE_LEVEL: f64 = 0.90;

/// One benchmark row: accuracy, calibration, and wall-clock cost of a
/// fitted predictor on a held-out test set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricReport {
    pub rmse: f64,
    pub mae: f64,
    pub score: f64,
    pub coverage_90: f64,
    /// Seconds spent fitting the model.
    pub wall_time_fit: f64,
    /// Seconds spent predicting the whole test set.
    pub wall_time_predict: f64,
}

impl MetricReport {
    pub fn compute(
        y: &[f64],
        mu: &[f64],
        sigma2: &[f64],
        wall_time_fit: f64,
        wall_time_predict: f64,
    ) -> Result<Self> {
        Ok(Self {
            rmse: rmse(y, mu),
            mae: mae(y, mu),
            score: score(y, mu, sigma2)?,
            coverage_90: coverage(y, mu, sigma2, COVERAGE_LEVEL)?,
            wall_time_fit,
            wall_time_predict,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn pointwise_errors_match_hand_computation() {
        let y = [3.0, 4.0];
        let mu = [0.0, 0.0];
        assert_abs_diff_eq!(rmse(&y, &mu), 12.5f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(rmse(&y, &mu), 3.5355339059327378, epsilon = 1e-15);
        assert_eq!(mae(&y, &mu), 3.5);
        assert_eq!(rmse(&y, &y), 0.0);
        assert_eq!(mae(&y, &y), 0.0);
    }

    #[test]
    fn rmse_dominates_mae() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let normal = Normal::new(0.0, 2.0).unwrap();
        for _ in 0..50 {
            let y: Vec<f64> = (0..20).map(|_| normal.sample(&mut rng)).collect();
            let mu: Vec<f64> = (0..20).map(|_| normal.sample(&mut rng)).collect();
            assert!(rmse(&y, &mu) >= mae(&y, &mu));
        }
    }

    #[test]
    fn score_matches_hand_computation() {
        let y = [1.0, 2.0, -0.5];
        assert_eq!(score(&y, &y, &[1.0, 1.0, 1.0]).unwrap(), 0.0);
        let e = std::f64::consts::E;
        assert_abs_diff_eq!(score(&y, &y, &[e, e, e]).unwrap(), -1.0, epsilon = 1e-15);
        assert_eq!(score(&[1.0], &[0.0], &[1.0]).unwrap(), -1.0);
        assert!(score(&y, &y, &[1.0, 0.0, 1.0]).is_err());
        assert!(score(&y, &y, &[1.0, -2.0, 1.0]).is_err());
    }

    #[test]
    fn quantiles_match_reference_values() {
        assert_abs_diff_eq!(
            inverse_normal_cdf(0.95),
            1.644853626951472714,
            epsilon = 1e-8
        );
        assert_abs_diff_eq!(
            inverse_normal_cdf(0.975),
            1.959963984540054235,
            epsilon = 1e-8
        );
        assert_abs_diff_eq!(
            inverse_normal_cdf(0.90),
            1.281551565544600466,
            epsilon = 1e-8
        );
        assert_abs_diff_eq!(
            inverse_normal_cdf(0.995),
            2.575829303548900760,
            epsilon = 1e-8
        );
        assert_eq!(inverse_normal_cdf(0.5), 0.0);
    }

    #[test]
    fn quantiles_are_antisymmetric_and_monotone() {
        for p in [0.001, 0.01, 0.1, 0.3, 0.45, 0.6, 0.9, 0.99] {
            assert_abs_diff_eq!(
                inverse_normal_cdf(p),
                -inverse_normal_cdf(1.0 - p),
                epsilon = 1e-12
            );
        }
        let mut last = f64::NEG_INFINITY;
        for i in 1..200 {
            let z = inverse_normal_cdf(i as f64 / 200.0);
            assert!(z > last);
            last = z;
        }
    }

    #[test]
    fn coverage_counts_interval_hits() {
        let y = [1.0, 2.0, 3.0];
        assert_eq!(coverage(&y, &y, &[1.0, 1.0, 1.0], 0.9).unwrap(), 1.0);
        assert_eq!(coverage(&y, &y, &[1.0, 1.0, 1.0], 0.001).unwrap(), 1.0);
        let mu = [0.0, 1.0, 2.0];
        assert_eq!(coverage(&y, &mu, &[1.0, 1.0, 1.0], 1e-6).unwrap(), 0.0);
        // standardized errors 2, 1, and 0.1 straddle the 90% band at 1.645
        let s2 = [0.25, 1.0, 100.0];
        assert_eq!(coverage(&y, &mu, &s2, 0.9).unwrap(), 2.0 / 3.0);
        assert!(coverage(&y, &mu, &[1.0, -1.0, 1.0], 0.9).is_err());
        assert!(coverage(&y, &mu, &s2, 0.0).is_err());
        assert!(coverage(&y, &mu, &s2, 1.0).is_err());
    }

    #[test]
    fn coverage_is_consistent_for_gaussian_errors() {
        let n = 20_000;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let y: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
        let mu = vec![0.0; n];
        let s2 = vec![1.0; n];
        let c = coverage(&y, &mu, &s2, 0.90).unwrap();
        assert!((c - 0.90).abs() < 0.01, "coverage = {c}");
    }

    #[test]
    fn report_assembles_all_fields() {
        let y = [1.0, 2.0, 3.0, 0.0];
        let mu = [1.1, 1.8, 3.0, -0.4];
        let s2 = [0.04, 0.09, 0.01, 0.25];
        let r = MetricReport::compute(&y, &mu, &s2, 1.5, 0.25).unwrap();
        assert_eq!(r.rmse, rmse(&y, &mu));
        assert_eq!(r.mae, mae(&y, &mu));
        assert_eq!(r.score, score(&y, &mu, &s2).unwrap());
        assert_eq!(r.coverage_90, coverage(&y, &mu, &s2, 0.90).unwrap());
        assert_eq!(r.wall_time_fit, 1.5);
        assert_eq!(r.wall_time_predict, 0.25);
        assert!(r.rmse >= 0.0);
        assert!((0.0..=1.0).contains(&r.coverage_90));
        assert!(MetricReport::compute(&y, &mu, &[0.0; 4], 0.0, 0.0).is_err());
    }
}
