//! Separable squared-exponential correlation with an additive nugget.
//!
//! The correlation between inputs `x` and `x'` is
//! `exp(-sum_l (x_l - x'_l)^2 / theta_l)` plus `eta` on the diagonal of a
//! correlation matrix. Amplitude is carried separately (see
//! [`crate::gp::profile_tau2`]), so these functions deal in correlations,
//! not covariances.

use ndarray::{Array2, ArrayView2};

use crate::error::{PalmError, Result};
use crate::scalar::Scalar;

/// Nugget floor used for deterministic responses on unit-coded inputs.
pub const JITTER: f64 = 1e-8;

/// Per-dimension squared-exponential lengthscales, validated strictly
/// positive and finite on construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Lengthscales<T> {
    theta: Vec<T>,
}

impl<T: Scalar> Lengthscales<T> {
    pub fn new(theta: Vec<T>) -> Result<Self> {
        if theta.is_empty() {
            return Err(PalmError::InvalidArgument(
                "lengthscales need at least one dimension".into(),
            ));
        }
        for (index, &t) in theta.iter().enumerate() {
            if !(t > T::zero()) || !t.is_finite() {
                return Err(PalmError::BadLengthscale { index });
            }
        }
        Ok(Self { theta })
    }

    /// One shared lengthscale replicated across `d` dimensions.
    pub fn isotropic(theta: T, d: usize) -> Result<Self> {
        Self::new(vec![theta; d.max(1)])
    }

    pub fn dims(&self) -> usize {
        self.theta.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.theta
    }

    /// Componentwise minimum with another set of lengthscales.
    pub fn clamp_to(&self, cap: &Lengthscales<T>) -> Result<Self> {
        if cap.dims() != self.dims() {
            return Err(PalmError::DimensionMismatch {
                context: "lengthscale clamp",
                expected: self.dims(),
                found: cap.dims(),
            });
        }
        Self::new(
            self.theta
                .iter()
                .zip(cap.as_slice())
                .map(|(&a, &b)| a.min(b))
                .collect(),
        )
    }
}

/// Diagonal nugget, tagged with whether it is an estimated noise level or
/// a numerical jitter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Nugget<T> {
    eta: T,
    jitter_only: bool,
}

impl<T: Scalar> Nugget<T> {
    /// The numerical-jitter floor used with deterministic responses.
    pub fn jitter() -> Self {
        Self {
            eta: T::of(JITTER),
            jitter_only: true,
        }
    }

    /// An estimated noise-to-amplitude ratio; must be nonnegative.
    pub fn noise(eta: T) -> Result<Self> {
        if !(eta >= T::zero()) || !eta.is_finite() {
            return Err(PalmError::BadNugget);
        }
        Ok(Self {
            eta,
            jitter_only: false,
        })
    }

    /// A noise estimate floored at the jitter level; estimates at or below
    /// the floor degrade to a plain jitter.
    pub fn floored(eta: T) -> Result<Self> {
        if !eta.is_finite() {
            return Err(PalmError::BadNugget);
        }
        if eta <= T::of(JITTER) {
            Ok(Self::jitter())
        } else {
            Self::noise(eta)
        }
    }

    pub fn value(&self) -> T {
        self.eta
    }

    pub fn is_jitter(&self) -> bool {
        self.jitter_only
    }
}

#[inline]
pub(crate) fn sq_exp_unchecked<T: Scalar>(a: &[T], b: &[T], theta: &[T]) -> T {
    let mut s = T::zero();
    for ((&x, &y), &t) in a.iter().zip(b).zip(theta) {
        let d = x - y;
        s = s + d * d / t;
    }
    (-s).exp()
}

/// Correlation between two points.
pub fn sq_exp_corr<T: Scalar>(x1: &[T], x2: &[T], theta: &Lengthscales<T>) -> Result<T> {
    if x1.len() != theta.dims() || x2.len() != theta.dims() {
        return Err(PalmError::DimensionMismatch {
            context: "kernel input",
            expected: theta.dims(),
            found: if x1.len() != theta.dims() {
                x1.len()
            } else {
                x2.len()
            },
        });
    }
    Ok(sq_exp_unchecked(x1, x2, theta.as_slice()))
}

fn row<'a, T>(x: &'a ArrayView2<T>, i: usize) -> &'a [T] {
    x.row(i).to_slice().expect("standard-layout row")
}

/// Dense correlation matrix of a design, `1 + eta` on the diagonal.
pub fn corr_matrix<T: Scalar>(
    x: ArrayView2<T>,
    theta: &Lengthscales<T>,
    nugget: Nugget<T>,
) -> Result<Array2<T>> {
    if x.ncols() != theta.dims() {
        return Err(PalmError::DimensionMismatch {
            context: "design columns",
            expected: theta.dims(),
            found: x.ncols(),
        });
    }
    let n = x.nrows();
    let th = theta.as_slice();
    let mut k = Array2::zeros((n, n));
    for i in 0..n {
        k[[i, i]] = T::one() + nugget.value();
        let xi = row(&x, i);
        for j in 0..i {
            let c = sq_exp_unchecked(xi, row(&x, j), th);
            k[[i, j]] = c;
            k[[j, i]] = c;
        }
    }
    Ok(k)
}

/// Correlations between every design row and one query point (no nugget).
pub fn cross_corr_vec<T: Scalar>(
    x: ArrayView2<T>,
    query: &[T],
    theta: &Lengthscales<T>,
) -> Result<Vec<T>> {
    if x.ncols() != theta.dims() || query.len() != theta.dims() {
        return Err(PalmError::DimensionMismatch {
            context: "query columns",
            expected: theta.dims(),
            found: query.len(),
        });
    }
    let th = theta.as_slice();
    Ok((0..x.nrows())
        .map(|i| sq_exp_unchecked(row(&x, i), query, th))
        .collect())
}

/// True when the design contains two identical rows, the usual culprit
/// when a zero-nugget correlation matrix fails to factor.
pub fn has_duplicate_rows<T: Scalar>(x: ArrayView2<T>) -> bool {
    let n = x.nrows();
    for i in 0..n {
        let xi = row(&x, i);
        for j in 0..i {
            if xi == row(&x, j) {
                return true;
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn zero_distance_is_one() {
        let th = Lengthscales::new(vec![0.7, 2.0]).unwrap();
        let c = sq_exp_corr(&[0.3, -1.0], &[0.3, -1.0], &th).unwrap();
        assert_eq!(c, 1.0);
    }

    #[test]
    fn unit_separation_values() {
        // independently computed: exp(-1), exp(-2)
        let th1 = Lengthscales::isotropic(1.0, 1).unwrap();
        let c1 = sq_exp_corr(&[0.0], &[1.0], &th1).unwrap();
        assert_abs_diff_eq!(c1, 0.36787944117144233, epsilon = 1e-16);
        let th2 = Lengthscales::isotropic(1.0, 2).unwrap();
        let c2 = sq_exp_corr(&[0.0, 0.0], &[1.0, 1.0], &th2).unwrap();
        assert_abs_diff_eq!(c2, 0.13533528323661271, epsilon = 1e-16);
    }

    #[test]
    fn anisotropy_scales_per_dimension() {
        let th = Lengthscales::new(vec![0.5, 8.0]).unwrap();
        let c = sq_exp_corr(&[0.0, 0.0], &[0.5, 1.0], &th).unwrap();
        assert_abs_diff_eq!(c, (-(0.25 / 0.5 + 1.0 / 8.0) as f64).exp(), epsilon = 1e-16);
    }

    #[test]
    fn bad_inputs_rejected() {
        assert!(Lengthscales::new(vec![1.0, 0.0]).is_err());
        assert!(Lengthscales::new(vec![-1.0]).is_err());
        assert!(Lengthscales::<f64>::new(vec![]).is_err());
        let th = Lengthscales::isotropic(1.0, 2).unwrap();
        assert!(sq_exp_corr(&[0.0], &[0.0, 0.0], &th).is_err());
        assert!(Nugget::noise(-0.1).is_err());
        assert!(Nugget::noise(f64::NAN).is_err());
    }

    #[test]
    fn nugget_flooring() {
        let n = Nugget::floored(0.0).unwrap();
        assert!(n.is_jitter());
        assert_eq!(n.value(), JITTER);
        let n = Nugget::floored(0.01).unwrap();
        assert!(!n.is_jitter());
        assert_eq!(n.value(), 0.01);
    }

    #[test]
    fn corr_matrix_small_cases() {
        let th = Lengthscales::isotropic(1.0, 1).unwrap();
        let x1 = array![[0.0]];
        let k1 = corr_matrix(x1.view(), &th, Nugget::noise(0.25).unwrap()).unwrap();
        assert_eq!(k1[[0, 0]], 1.25);

        let x2 = array![[0.0], [1.0]];
        let k2 = corr_matrix(x2.view(), &th, Nugget::noise(0.0).unwrap()).unwrap();
        assert_eq!(k2[[0, 0]], 1.0);
        assert_eq!(k2[[1, 1]], 1.0);
        assert_abs_diff_eq!(k2[[0, 1]], 0.36787944117144233, epsilon = 1e-16);
        assert_eq!(k2[[0, 1]], k2[[1, 0]]);
    }

    #[test]
    fn identical_rows_need_nugget_to_factor() {
        use crate::linalg::CholeskyFactor;
        let th = Lengthscales::isotropic(1.0, 1).unwrap();
        let x = array![[0.5], [0.5]];
        assert!(has_duplicate_rows(x.view()));
        let k0 = corr_matrix(x.view(), &th, Nugget::noise(0.0).unwrap()).unwrap();
        assert!(CholeskyFactor::factor(&k0).is_err());
        let k = corr_matrix(x.view(), &th, Nugget::noise(1e-6).unwrap()).unwrap();
        assert!(CholeskyFactor::factor(&k).is_ok());
    }

    #[test]
    fn cross_corr_values() {
        let th = Lengthscales::isotropic(1.0, 1).unwrap();
        let x = array![[0.0], [1.0]];
        let k = cross_corr_vec(x.view(), &[0.5], &th).unwrap();
        // exp(-0.25) on both sides, computed independently
        assert_abs_diff_eq!(k[0], 0.7788007830714049, epsilon = 1e-16);
        assert_abs_diff_eq!(k[1], 0.7788007830714049, epsilon = 1e-16);
        let very_far = cross_corr_vec(x.view(), &[1e4], &th).unwrap();
        assert!(very_far[0] >= 0.0 && very_far[0] < 1e-300);
        let at_row = cross_corr_vec(x.view(), &[1.0], &th).unwrap();
        assert_eq!(at_row[1], 1.0);
    }

    proptest! {
        #[test]
        fn symmetry_bounds_and_scaling(
            a in proptest::collection::vec(-10.0f64..10.0, 3),
            b in proptest::collection::vec(-10.0f64..10.0, 3),
            th in proptest::collection::vec(0.05f64..20.0, 3),
            scale in 0.1f64..10.0,
        ) {
            let theta = Lengthscales::new(th.clone()).unwrap();
            let c1 = sq_exp_corr(&a, &b, &theta).unwrap();
            let c2 = sq_exp_corr(&b, &a, &theta).unwrap();
            prop_assert_eq!(c1, c2);
            prop_assert!(c1 >= 0.0 && c1 <= 1.0);

            // multiplying theta by s^2 is the same as dividing distances by s
            let scaled_theta =
                Lengthscales::new(th.iter().map(|t| t * scale * scale).collect()).unwrap();
            let shrunk_a: Vec<f64> = a.iter().map(|v| v / scale).collect();
            let shrunk_b: Vec<f64> = b.iter().map(|v| v / scale).collect();
            let c3 = sq_exp_corr(&a, &b, &scaled_theta).unwrap();
            let c4 = sq_exp_corr(&shrunk_a, &shrunk_b, &theta).unwrap();
            prop_assert!((c3 - c4).abs() <= 1e-12 * (1.0 + c3.abs()));
        }

        #[test]
        fn monotone_in_distance_along_a_ray(
            t in 0.1f64..5.0,
            step in 0.01f64..1.0,
        ) {
            let theta = Lengthscales::isotropic(t, 1).unwrap();
            let near = sq_exp_corr(&[0.0], &[step], &theta).unwrap();
            let far = sq_exp_corr(&[0.0], &[2.0 * step], &theta).unwrap();
            prop_assert!(far < near);
        }
    }
}
