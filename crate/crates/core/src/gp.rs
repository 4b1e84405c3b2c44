//! Zero-mean Gaussian-process regression on coded inputs.
//!
//! The model is `Y ~ N(0, tau2 * (C + eta I))` with the separable
//! squared-exponential correlation `C` from [`crate::kernel`]. The
//! amplitude `tau2` has a closed-form profile estimate, lengthscales are
//! fit by maximizing the concentrated log likelihood in log space, and the
//! Cholesky factorization is the only linear algebra anywhere.

use ndarray::{Array1, Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{PalmError, Result};
use crate::kernel::{self, corr_matrix, cross_corr_vec, Lengthscales, Nugget};
use crate::linalg::{dot, CholeskyFactor};
use crate::scalar::Scalar;

/// Floor for the profiled amplitude, guarding all-zero responses.
pub const TAU2_FLOOR: f64 = 1e-12;
/// Smallest admissible lengthscale on coded inputs.
pub const THETA_MIN: f64 = 1e-3;
/// Widest lengthscale admitted when fitting cap subsets.
pub const THETA_WIDE_MAX: f64 = 100.0;
/// Iteration cap for the likelihood ascent.
pub const MLE_MAX_ITERS: usize = 100;
/// Gradient norm below which the ascent is declared converged.
pub const MLE_GRAD_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentPrediction<T> {
    pub mean: T,
    pub variance: T,
}

/// A fitted GP: design, responses, hyperparameters and the factorization
/// plus `alpha = K^{-1} y` needed for prediction.
#[derive(Clone, Debug)]
pub struct GpFit<T> {
    pub(crate) design: Array2<T>,
    pub(crate) y: Array1<T>,
    pub(crate) theta: Lengthscales<T>,
    pub(crate) tau2: T,
    pub(crate) nugget: Nugget<T>,
    pub(crate) chol: CholeskyFactor<T>,
    pub(crate) alpha: Vec<T>,
}

fn factor_corr<T: Scalar>(
    x: ArrayView2<T>,
    theta: &Lengthscales<T>,
    nugget: Nugget<T>,
) -> Result<CholeskyFactor<T>> {
    let k = corr_matrix(x, theta, nugget)?;
    CholeskyFactor::factor(&k).map_err(|e| match e {
        PalmError::Factorization { size, pivot, .. } => PalmError::Factorization {
            size,
            pivot,
            hint: if nugget.value() <= T::zero() && kernel::has_duplicate_rows(x) {
                "; the design has duplicate rows and no nugget"
            } else {
                "; consider a larger nugget"
            },
        },
        other => other,
    })
}

/// Fits a GP with fixed hyperparameters.
pub fn fit_gp<T: Scalar>(
    design: Array2<T>,
    y: Array1<T>,
    theta: Lengthscales<T>,
    tau2: T,
    nugget: Nugget<T>,
) -> Result<GpFit<T>> {
    let n = design.nrows();
    if n == 0 {
        return Err(PalmError::InsufficientData {
            needed: 1,
            found: 0,
        });
    }
    if y.len() != n {
        return Err(PalmError::DimensionMismatch {
            context: "gp responses",
            expected: n,
            found: y.len(),
        });
    }
    if !(tau2 > T::zero()) || !tau2.is_finite() {
        return Err(PalmError::InvalidArgument(format!(
            "amplitude tau2 must be positive and finite, got {tau2}"
        )));
    }
    if y.iter().any(|v| !v.is_finite()) || design.iter().any(|v| !v.is_finite()) {
        return Err(PalmError::NonFinite("gp fit inputs"));
    }
    let chol = factor_corr(design.view(), &theta, nugget)?;
    let alpha = chol.solve(y.as_slice().expect("standard layout"));
    Ok(GpFit {
        design,
        y,
        theta,
        tau2,
        nugget,
        chol,
        alpha,
    })
}

impl<T: Scalar> GpFit<T> {
    pub fn n(&self) -> usize {
        self.design.nrows()
    }

    pub fn dims(&self) -> usize {
        self.design.ncols()
    }

    pub fn theta(&self) -> &Lengthscales<T> {
        &self.theta
    }

    pub fn tau2(&self) -> T {
        self.tau2
    }

    pub fn nugget(&self) -> Nugget<T> {
        self.nugget
    }

    pub fn design(&self) -> ArrayView2<'_, T> {
        self.design.view()
    }

    pub fn responses(&self) -> &Array1<T> {
        &self.y
    }

    /// Predictive mean and variance at one (coded) input.
    pub fn predict(&self, x: &[T]) -> Result<MomentPrediction<T>> {
        let k = cross_corr_vec(self.design.view(), x, &self.theta)?;
        let mean = dot(&k, &self.alpha);
        let pk = self.chol.quad_form_inv(&k);
        let variance = (self.tau2 * (T::one() + self.nugget.value() - pk)).max(T::zero());
        Ok(MomentPrediction { mean, variance })
    }

    /// Predictive mean only, skipping the O(n^2) variance solve.
    pub fn predict_mean(&self, x: &[T]) -> Result<T> {
        let k = cross_corr_vec(self.design.view(), x, &self.theta)?;
        Ok(dot(&k, &self.alpha))
    }

    /// The quadratic form `k(x)^T K^{-1} k(x)`, a unitless measure of how
    /// much of the process at `x` the design explains.
    pub fn predictive_kernel(&self, x: &[T]) -> Result<T> {
        let k = cross_corr_vec(self.design.view(), x, &self.theta)?;
        Ok(self.chol.quad_form_inv(&k).max(T::zero()))
    }

    /// Replaces amplitude and nugget, refactorizing once.
    pub fn refresh(&mut self, tau2: T, nugget: Nugget<T>) -> Result<()> {
        if !(tau2 > T::zero()) || !tau2.is_finite() {
            return Err(PalmError::InvalidArgument(format!(
                "amplitude tau2 must be positive and finite, got {tau2}"
            )));
        }
        let chol = factor_corr(self.design.view(), &self.theta, nugget)?;
        let alpha = chol.solve(self.y.as_slice().expect("standard layout"));
        self.tau2 = tau2;
        self.nugget = nugget;
        self.chol = chol;
        self.alpha = alpha;
        Ok(())
    }

    pub(crate) fn chol(&self) -> &CholeskyFactor<T> {
        &self.chol
    }

    pub(crate) fn alpha(&self) -> &[T] {
        &self.alpha
    }
}

/// Profiled amplitude `max(y^T K^{-1} y / n, floor)`.
pub fn profile_tau2<T: Scalar>(
    x: ArrayView2<T>,
    y: &[T],
    theta: &Lengthscales<T>,
    nugget: Nugget<T>,
) -> Result<T> {
    if y.len() != x.nrows() {
        return Err(PalmError::DimensionMismatch {
            context: "profile responses",
            expected: x.nrows(),
            found: y.len(),
        });
    }
    let chol = factor_corr(x, theta, nugget)?;
    let alpha = chol.solve(y);
    let yky = dot(y, &alpha);
    Ok((yky / T::of_usize(y.len())).max(T::of(TAU2_FLOOR)))
}

/// Concentrated (profiled-amplitude) log likelihood.
pub fn log_likelihood<T: Scalar>(
    x: ArrayView2<T>,
    y: &[T],
    theta: &Lengthscales<T>,
    nugget: Nugget<T>,
) -> Result<T> {
    let (ll, _) = likelihood_parts(x, y, theta, nugget, false)?;
    Ok(ll)
}

/// Concentrated log likelihood and its gradient with respect to each
/// lengthscale component (in lengthscale units, not log units).
pub fn log_likelihood_grad<T: Scalar>(
    x: ArrayView2<T>,
    y: &[T],
    theta: &Lengthscales<T>,
    nugget: Nugget<T>,
) -> Result<(T, Vec<T>)> {
    let (ll, grads) = likelihood_parts(x, y, theta, nugget, true)?;
    let g = grads.expect("gradient requested");
    Ok((ll, g.theta))
}

struct LikelihoodGrads<T> {
    theta: Vec<T>,
    eta: T,
}

fn likelihood_parts<T: Scalar>(
    x: ArrayView2<T>,
    y: &[T],
    theta: &Lengthscales<T>,
    nugget: Nugget<T>,
    want_grad: bool,
) -> Result<(T, Option<LikelihoodGrads<T>>)> {
    let n = x.nrows();
    if y.len() != n {
        return Err(PalmError::DimensionMismatch {
            context: "likelihood responses",
            expected: n,
            found: y.len(),
        });
    }
    if n == 0 {
        return Err(PalmError::InsufficientData {
            needed: 1,
            found: 0,
        });
    }
    let chol = factor_corr(x, theta, nugget)?;
    let alpha = chol.solve(y);
    let yky = dot(y, &alpha);
    let nn = T::of_usize(n);
    let tau2 = (yky / nn).max(T::of(TAU2_FLOOR));
    let half = T::of(0.5);
    let ll = -half * nn * T::of(std::f64::consts::TAU).ln() - half * nn * tau2.ln()
        - half * chol.log_det()
        - yky / (T::of(2.0) * tau2);
    if !ll.is_finite() {
        return Err(PalmError::NonFinite("log likelihood"));
    }
    if !want_grad {
        return Ok((ll, None));
    }

    let kinv = chol.inverse();
    let th = theta.as_slice();
    let d = th.len();
    let mut g_theta = vec![T::zero(); d];
    // dK/dtheta_l has entries K_ij * dsq_l(i,j) / theta_l^2 off the
    // diagonal and zero on it; both gradient terms share the weight
    // (alpha_i alpha_j / tau2 - Kinv_ij).
    for i in 0..n {
        let xi = x.row(i);
        let xi = xi.to_slice().expect("standard layout");
        for j in 0..i {
            let xj = x.row(j);
            let xj = xj.to_slice().expect("standard layout");
            let c = kernel::sq_exp_unchecked(xi, xj, th);
            let w = (alpha[i] * alpha[j] / tau2 - kinv[[i, j]]) * c;
            for l in 0..d {
                let dl = xi[l] - xj[l];
                g_theta[l] = g_theta[l] + w * dl * dl / (th[l] * th[l]);
            }
        }
    }
    let mut tr = T::zero();
    for i in 0..n {
        tr = tr + kinv[[i, i]];
    }
    let g_eta = half * (dot(&alpha, &alpha) / tau2 - tr);
    Ok((
        ll,
        Some(LikelihoodGrads {
            theta: g_theta,
            eta: g_eta,
        }),
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LengthscaleMode {
    /// One shared lengthscale across all input dimensions.
    Isotropic,
    /// A separate lengthscale per input dimension.
    Separable,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NuggetMode<T> {
    /// Nugget held at the given value.
    Fixed(Nugget<T>),
    /// Nugget estimated jointly with the lengthscales, floored at jitter.
    Estimated,
}

#[derive(Clone, Debug)]
pub struct MleConfig<T> {
    pub mode: LengthscaleMode,
    pub nugget: NuggetMode<T>,
    pub theta_min: T,
    pub theta_max: Lengthscales<T>,
    pub max_iters: usize,
    pub grad_tol: T,
}

impl<T: Scalar> MleConfig<T> {
    pub fn new(mode: LengthscaleMode, nugget: NuggetMode<T>, theta_max: Lengthscales<T>) -> Self {
        Self {
            mode,
            nugget,
            theta_min: T::of(THETA_MIN),
            theta_max,
            max_iters: MLE_MAX_ITERS,
            grad_tol: T::of(MLE_GRAD_TOL),
        }
    }
}

#[derive(Clone, Debug)]
pub struct MleFit<T> {
    pub theta: Lengthscales<T>,
    pub nugget: Nugget<T>,
    pub loglik: T,
    /// False when the iteration cap was hit before the gradient tolerance;
    /// the best iterate is still returned.
    pub converged: bool,
    pub iters: usize,
}

/// Start value for a lengthscale search: the lower decile of pairwise
/// squared distances over a strided row subsample.
pub fn theta_start<T: Scalar>(x: ArrayView2<T>) -> T {
    let n = x.nrows();
    let stride = n.div_ceil(256).max(1);
    let rows: Vec<usize> = (0..n).step_by(stride).collect();
    let mut dists = Vec::with_capacity(rows.len() * (rows.len() - 1) / 2);
    for (a, &i) in rows.iter().enumerate() {
        for &j in rows.iter().take(a) {
            let mut s = T::zero();
            for l in 0..x.ncols() {
                let d = x[[i, l]] - x[[j, l]];
                s = s + d * d;
            }
            if s > T::zero() {
                dists.push(s);
            }
        }
    }
    if dists.is_empty() {
        return T::of(0.1);
    }
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    dists[dists.len() / 10]
}

/// Maximum-likelihood lengthscales (and optionally nugget) by projected
/// quasi-Newton ascent of the concentrated log likelihood in log space,
/// seeded from a coarse lengthscale grid.
pub fn mle_lengthscale<T: Scalar>(
    x: ArrayView2<T>,
    y: &[T],
    cfg: &MleConfig<T>,
) -> Result<MleFit<T>> {
    let d = x.ncols();
    if cfg.theta_max.dims() != d {
        return Err(PalmError::DimensionMismatch {
            context: "theta_max",
            expected: d,
            found: cfg.theta_max.dims(),
        });
    }
    if x.nrows() < 2 {
        return Err(PalmError::InsufficientData {
            needed: 2,
            found: x.nrows(),
        });
    }
    let m = match cfg.mode {
        LengthscaleMode::Isotropic => 1,
        LengthscaleMode::Separable => d,
    };
    let cap: Vec<T> = match cfg.mode {
        LengthscaleMode::Isotropic => {
            let mut c = cfg.theta_max.as_slice()[0];
            for &v in cfg.theta_max.as_slice() {
                c = c.max(v);
            }
            vec![c]
        }
        LengthscaleMode::Separable => cfg.theta_max.as_slice().to_vec(),
    };

    let eta_lo = T::of(kernel::JITTER).ln();
    let eta_hi = T::of(1e3).ln();
    let estimated = matches!(cfg.nugget, NuggetMode::Estimated);
    let fixed_nugget = match cfg.nugget {
        NuggetMode::Fixed(nug) => nug,
        NuggetMode::Estimated => Nugget::noise(T::of(1e-2))?,
    };

    let theta_of = |z: &[T]| -> Result<Lengthscales<T>> {
        let vals: Vec<T> = match cfg.mode {
            LengthscaleMode::Isotropic => vec![z[0].exp(); d],
            LengthscaleMode::Separable => z[..d].iter().map(|v| v.exp()).collect(),
        };
        Lengthscales::new(vals)
    };
    let nugget_of = |z: &[T]| -> Result<Nugget<T>> {
        if estimated {
            Nugget::floored(z[m].exp())
        } else {
            Ok(fixed_nugget)
        }
    };

    let mut objective = |z: &[T]| -> Option<(T, Vec<T>)> {
        let theta = theta_of(z).ok()?;
        let nug = nugget_of(z).ok()?;
        let (ll, grads) = likelihood_parts(x, y, &theta, nug, true).ok()?;
        let grads = grads.expect("gradient requested");
        let mut g = Vec::with_capacity(z.len());
        match cfg.mode {
            LengthscaleMode::Isotropic => {
                let th = theta.as_slice()[0];
                let total = grads.theta.iter().fold(T::zero(), |a, &v| a + v);
                g.push(total * th);
            }
            LengthscaleMode::Separable => {
                for (l, &gt) in grads.theta.iter().enumerate() {
                    g.push(gt * theta.as_slice()[l]);
                }
            }
        }
        if estimated {
            g.push(grads.eta * nug.value());
        }
        Some((ll, g))
    };

    // coarse log-spaced lengthscale grid plus the decile start
    let lo_z = cfg.theta_min.ln();
    let mut starts: Vec<Vec<T>> = Vec::new();
    let grid = 8;
    let max_cap = cap.iter().fold(cap[0], |a, &b| a.max(b));
    for gidx in 0..grid {
        let t = T::of_usize(gidx) / T::of_usize(grid - 1);
        let z = lo_z + t * (max_cap.ln() - lo_z);
        let mut s = vec![z; m];
        for (l, v) in s.iter_mut().enumerate() {
            *v = (*v).min(cap[l].ln());
        }
        if estimated {
            s.push(T::of(1e-2).ln());
        }
        starts.push(s);
    }
    let decile = theta_start(x).max(cfg.theta_min).min(max_cap);
    let mut s = vec![decile.ln(); m];
    for (l, v) in s.iter_mut().enumerate() {
        *v = (*v).min(cap[l].ln());
    }
    if estimated {
        s.push(T::of(1e-2).ln());
    }
    starts.push(s);

    let mut best_start: Option<(Vec<T>, T)> = None;
    for s in &starts {
        if let Some((v, _)) = objective(s) {
            if best_start.as_ref().map_or(true, |(_, bv)| v > *bv) {
                best_start = Some((s.clone(), v));
            }
        }
    }
    let (z0, _) = best_start.ok_or_else(|| {
        PalmError::InvalidArgument("likelihood unevaluable at every start".into())
    })?;

    let mut lo = vec![lo_z; m];
    let mut hi: Vec<T> = cap.iter().map(|c| c.ln()).collect();
    if estimated {
        lo.push(eta_lo);
        hi.push(eta_hi);
    }
    let outcome = crate::optim::maximize_projected_ascent(
        &mut objective,
        &z0,
        &lo,
        &hi,
        cfg.max_iters,
        cfg.grad_tol,
    )
    .ok_or_else(|| PalmError::InvalidArgument("likelihood ascent failed to start".into()))?;

    Ok(MleFit {
        theta: theta_of(&outcome.x)?,
        nugget: nugget_of(&outcome.x)?,
        loglik: outcome.value,
        converged: outcome.converged,
        iters: outcome.iters,
    })
}

/// Upper lengthscale bound: the componentwise maximum of MLE lengthscales
/// over random data subsets, discouraging degenerate flat local fits.
pub fn lengthscale_cap<T: Scalar>(
    x: ArrayView2<T>,
    y: &[T],
    mode: LengthscaleMode,
    nugget: NuggetMode<T>,
    num_subsets: usize,
    subset_size: usize,
    seed: u64,
) -> Result<Lengthscales<T>> {
    let n = x.nrows();
    let d = x.ncols();
    if num_subsets == 0 || subset_size < 2 {
        return Err(PalmError::InvalidArgument(
            "need at least one subset of size >= 2".into(),
        ));
    }
    let take = subset_size.min(n);
    let rounds = if take == n { 1 } else { num_subsets };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let wide = Lengthscales::isotropic(T::of(THETA_WIDE_MAX), d)?;
    let mut cap: Option<Vec<T>> = None;
    for _ in 0..rounds {
        let idx: Vec<usize> = if take == n {
            (0..n).collect()
        } else {
            rand::seq::index::sample(&mut rng, n, take).into_vec()
        };
        let mut xs = Array2::zeros((take, d));
        let mut ys = Vec::with_capacity(take);
        for (r, &i) in idx.iter().enumerate() {
            for c in 0..d {
                xs[[r, c]] = x[[i, c]];
            }
            ys.push(y[i]);
        }
        let fit = mle_lengthscale(xs.view(), &ys, &MleConfig::new(mode, nugget, wide.clone()))?;
        match cap.as_mut() {
            None => cap = Some(fit.theta.as_slice().to_vec()),
            Some(c) => {
                for (l, v) in c.iter_mut().enumerate() {
                    *v = (*v).max(fit.theta.as_slice()[l]);
                }
            }
        }
    }
    Lengthscales::new(cap.expect("at least one subset"))
}

/// Draws one sample path of the prior at the given design (used by tests
/// and synthetic benchmarks).
pub fn sample_prior<T: Scalar>(
    x: ArrayView2<T>,
    theta: &Lengthscales<T>,
    nugget: Nugget<T>,
    tau2: T,
    seed: u64,
) -> Result<Vec<T>> {
    use rand::Rng;
    let chol = factor_corr(x, theta, nugget)?;
    let n = x.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z: Vec<f64> = (0..n)
        .map(|_| {
            // Box-Muller on open-interval uniforms
            let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
            let u2: f64 = rng.gen_range(0.0..1.0);
            (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        })
        .collect();
    let sd = tau2.sqrt();
    let mut out = vec![T::zero(); n];
    for i in 0..n {
        let row = chol.row(i);
        let mut s = T::zero();
        for (k, &l) in row.iter().enumerate() {
            s = s + l * T::of(z[k]);
        }
        out[i] = sd * s;
    }
    Ok(out)
}
