//! Aggregation of local experts into one continuous global predictor.
//!
//! Expert predictions are combined with powered inverse-variance weights
//! `w_k = phi_k^p / sum phi^p`, `phi_k = 1/sigma_k^2`. A stationary
//! between-expert correlation estimate `rho` calibrates a shared amplitude
//! so that the aggregate predictive variance reverts to the empirical
//! response variance far from all data, and a pooled nugget unifies the
//! experts' noise level.

use ndarray::{Array1, Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{Coding, TrainingSet};
use crate::error::{PalmError, Result};
use crate::gp::{
    fit_gp, lengthscale_cap, mle_lengthscale, profile_tau2, GpFit, MleConfig, NuggetMode,
};
use crate::kernel::{Lengthscales, Nugget, JITTER};
use crate::lagp::{build_local_expert, LocalConfig, LocalExpert};
use crate::linalg::dot;
use crate::scalar::Scalar;

/// Subsets drawn when estimating the lengthscale cap.
pub const CAP_SUBSETS: usize = 5;
/// Size cap for each lengthscale-cap subset.
pub const CAP_SUBSET_SIZE: usize = 200;
/// Widest lengthscale allowed for the global stage of a two-stage fit.
const GLOBAL_THETA_MAX: f64 = 100.0;
/// Floor for the empirical response variance of constant responses.
const S2_FLOOR: f64 = 1e-12;

/// How per-expert in-sample errors pool into one nugget estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MseNorm {
    /// Unweighted mean of per-expert mean squared errors.
    ExpertMean,
    /// Design-size-weighted mean (total squared error over total points).
    SizeWeighted,
}

/// How the between-expert correlation matrix is maintained when a model
/// grows by one expert.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RhoUpdate {
    /// Recompute every pair from the experts' current fits (default;
    /// self-consistent at each growth step).
    Full,
    /// Keep the existing block and add one row for the new expert —
    /// cheaper, at the cost of rows estimated under different
    /// calibration states.
    IncrementalRow,
}

/// How a two-stage model combines variances.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarianceRule {
    /// Report the residual-stage variance alone.
    ResidualOnly,
    /// Add the global stage's predictive variance.
    Additive,
}

/// Settings for fitting an aggregated model.
#[derive(Clone, Debug)]
pub struct PalmConfig<T> {
    /// Per-expert design selection and fitting settings.
    pub local: LocalConfig,
    /// Weight power; `None` selects `log_d K` (base 2 when d = 1).
    pub power: Option<T>,
    /// Pooling rule for the unified nugget.
    pub mse_norm: MseNorm,
    /// Growth-stage nugget, and the fixed expert nugget unless
    /// `local.estimate_nugget` is set.
    pub nugget: Nugget<T>,
    /// Seed for the lengthscale-cap subsets and the global-stage sub-sample.
    pub seed: u64,
    /// Variance combination for two-stage models.
    pub global_variance: VarianceRule,
    /// Correlation-matrix maintenance when growing by one expert.
    pub rho_update: RhoUpdate,
}

impl<T: Scalar> Default for PalmConfig<T> {
    fn default() -> Self {
        Self {
            local: LocalConfig::default(),
            power: None,
            mse_norm: MseNorm::ExpertMean,
            nugget: Nugget::jitter(),
            seed: 7,
            global_variance: VarianceRule::ResidualOnly,
            rho_update: RhoUpdate::Full,
        }
    }
}

/// An aggregated model: K calibrated local experts plus the stationary
/// between-expert correlation matrix.
#[derive(Clone, Debug)]
pub struct PalmModel<T> {
    pub(crate) experts: Vec<LocalExpert<T>>,
    pub(crate) rho: Array2<T>,
    pub(crate) tau2: T,
    pub(crate) eta: Nugget<T>,
    pub(crate) power_p: T,
    pub(crate) s2: T,
    pub(crate) coding: Coding<T>,
    pub(crate) theta_max: Lengthscales<T>,
}

/// One aggregated prediction.
#[derive(Clone, Debug)]
pub struct PalmPrediction<T> {
    pub mean: T,
    pub variance: T,
    /// Per-expert mixture weights (nonnegative, sum to 1).
    pub weights: Vec<T>,
}

impl<T: Scalar> PalmModel<T> {
    pub fn experts(&self) -> &[LocalExpert<T>] {
        &self.experts
    }

    pub fn k(&self) -> usize {
        self.experts.len()
    }

    pub fn rho(&self) -> ArrayView2<'_, T> {
        self.rho.view()
    }

    /// Shared calibrated amplitude.
    pub fn tau2(&self) -> T {
        self.tau2
    }

    /// Pooled nugget applied to every expert.
    pub fn eta(&self) -> Nugget<T> {
        self.eta
    }

    pub fn power_p(&self) -> T {
        self.power_p
    }

    /// Empirical response variance (the far-field variance target divided
    /// by `1 + eta`).
    pub fn s2(&self) -> T {
        self.s2
    }

    pub fn coding(&self) -> &Coding<T> {
        &self.coding
    }

    pub fn theta_max(&self) -> &Lengthscales<T> {
        &self.theta_max
    }

    pub fn predict(&self, x: &[T]) -> Result<PalmPrediction<T>> {
        palm_predict(self, x)
    }
}

/// Powered precision weights `w_k = phi_k^p / sum phi^p`, `phi_k =
/// 1/sigma2_k`, evaluated in log space with max subtraction; exactly
/// uniform when all variances are equal.
pub fn weights<T: Scalar>(sigma2s: &[T], p: T) -> Result<Vec<T>> {
    if sigma2s.is_empty() {
        return Err(PalmError::InvalidArgument(
            "weights need at least one variance".into(),
        ));
    }
    if !(p >= T::zero()) || !p.is_finite() {
        return Err(PalmError::InvalidArgument(format!(
            "weight power must be nonnegative and finite, got {p}"
        )));
    }
    for &s in sigma2s {
        if !(s > T::zero()) || !s.is_finite() {
            return Err(PalmError::InvalidArgument(format!(
                "weights need strictly positive variances, got {s}"
            )));
        }
    }
    let k = sigma2s.len();
    let first = sigma2s[0];
    if sigma2s.iter().all(|&s| s == first) {
        return Ok(vec![T::one() / T::of_usize(k); k]);
    }
    if p == T::one() {
        // Plain precision weights, computed directly so that the p = 1 case
        // is bit-for-bit the unpowered baseline rather than a log-space
        // round trip of it.
        let phi: Vec<T> = sigma2s.iter().map(|&s| T::one() / s).collect();
        let total = phi.iter().fold(T::zero(), |a, &b| a + b);
        return Ok(phi.into_iter().map(|v| v / total).collect());
    }
    // log phi_k^p = -p ln sigma2_k
    let logs: Vec<T> = sigma2s.iter().map(|&s| -p * s.ln()).collect();
    let m = logs.iter().cloned().fold(logs[0], T::max);
    let un: Vec<T> = logs.iter().map(|&l| (l - m).exp()).collect();
    let total = un.iter().fold(T::zero(), |a, &b| a + b);
    Ok(un.into_iter().map(|v| v / total).collect())
}

/// Default weight power `log_d K`, read in base 2 when `d = 1`.
pub fn default_power<T: Scalar>(d: usize, k: usize) -> Result<T> {
    if d == 0 || k == 0 {
        return Err(PalmError::InvalidArgument(
            "power policy needs d >= 1 and K >= 1".into(),
        ));
    }
    let base = if d == 1 { 2 } else { d };
    Ok(T::of_usize(k).ln() / T::of_usize(base).ln())
}

/// The expert's predictive kernel `k(x)^T K^{-1} k(x)` at a natural-units
/// input: near 1 where the design explains the process, decaying to 0 away
/// from it.
pub fn predictive_kernel<T: Scalar>(e: &LocalExpert<T>, x: &[T]) -> Result<T> {
    let coded = e.coding().encode(x)?;
    e.fit().predictive_kernel(&coded)
}

/// Stationary correlation estimate between two experts: the largest
/// predictive-kernel value either expert attains on the other's design,
/// clamped to [0, 1]. Symmetric by construction.
pub fn estimate_rho<T: Scalar>(ek: &LocalExpert<T>, ej: &LocalExpert<T>) -> Result<T> {
    if ek.fit().dims() != ej.fit().dims() {
        return Err(PalmError::DimensionMismatch {
            context: "expert pair correlation",
            expected: ek.fit().dims(),
            found: ej.fit().dims(),
        });
    }
    let mut best = T::zero();
    for (a, b) in [(ek, ej), (ej, ek)] {
        let design = b.fit().design();
        for i in 0..design.nrows() {
            let row: Vec<T> = design.row(i).to_vec();
            let pk = a.fit().predictive_kernel(&row)?;
            best = best.max(pk);
        }
    }
    Ok(best.min(T::one()))
}

/// Empirical response variance around the mean, floored for constant
/// responses.
pub fn empirical_s2<T: Scalar>(y: &[T]) -> Result<T> {
    let n = y.len();
    if n < 2 {
        return Err(PalmError::InsufficientData { needed: 2, found: n });
    }
    let mean = y.iter().fold(T::zero(), |a, &b| a + b) / T::of_usize(n);
    let ss = y
        .iter()
        .fold(T::zero(), |a, &b| a + (b - mean) * (b - mean));
    Ok((ss / T::of_usize(n - 1)).max(T::of(S2_FLOOR)))
}

/// Shared amplitude pinned so the far-field aggregate variance matches the
/// empirical response variance: `tau2 = s2 K^2 / sum rho`.
pub fn calibrate_tau2<T: Scalar>(s2: T, rho: ArrayView2<'_, T>) -> Result<T> {
    let k = rho.nrows();
    if k == 0 || rho.ncols() != k {
        return Err(PalmError::DimensionMismatch {
            context: "correlation matrix",
            expected: k,
            found: rho.ncols(),
        });
    }
    let total = rho.iter().fold(T::zero(), |a, &b| a + b);
    if !(total > T::zero()) {
        return Err(PalmError::InvalidArgument(format!(
            "correlation sum must be positive, got {total}"
        )));
    }
    let kt = T::of_usize(k);
    Ok(s2 * kt * kt / total)
}

fn pooled_mse<T: Scalar>(parts: &[(T, usize)], norm: MseNorm) -> T {
    match norm {
        MseNorm::ExpertMean => {
            let sum = parts.iter().fold(T::zero(), |a, &(m, _)| a + m);
            sum / T::of_usize(parts.len())
        }
        MseNorm::SizeWeighted => {
            let (sum, total) = parts.iter().fold((T::zero(), 0usize), |(s, t), &(m, n)| {
                (s + m * T::of_usize(n), t + n)
            });
            sum / T::of_usize(total)
        }
    }
}

/// Unified nugget from the experts' in-sample errors: `eta = mse / tau2`,
/// floored at jitter when the experts interpolate.
pub fn pooled_nugget<T: Scalar>(
    experts: &[LocalExpert<T>],
    tau2: T,
    norm: MseNorm,
) -> Result<Nugget<T>> {
    if experts.is_empty() {
        return Err(PalmError::InvalidArgument(
            "nugget pooling needs at least one expert".into(),
        ));
    }
    if !(tau2 > T::zero()) || !tau2.is_finite() {
        return Err(PalmError::InvalidArgument(format!(
            "amplitude tau2 must be positive and finite, got {tau2}"
        )));
    }
    let parts: Vec<(T, usize)> = experts.iter().map(|e| (e.mse_k(), e.fit().n())).collect();
    let eta = pooled_mse(&parts, norm) / tau2;
    if eta <= T::of(JITTER) {
        Ok(Nugget::jitter())
    } else {
        Nugget::noise(eta)
    }
}

/// Combines per-expert moments under given weights: `mean = sum w mu`,
/// `variance = (w*s)^T rho (w*s)` with `s` the per-expert standard
/// deviations. Every variance term is nonnegative, so the result is too.
pub(crate) fn combine<T: Scalar>(
    means: &[T],
    sigma2s: &[T],
    w: &[T],
    rho: ArrayView2<'_, T>,
) -> (T, T) {
    let k = means.len();
    let mean = dot(w, means);
    let ws: Vec<T> = w
        .iter()
        .zip(sigma2s)
        .map(|(&wi, &s2)| wi * s2.sqrt())
        .collect();
    let mut variance = T::zero();
    for i in 0..k {
        for j in 0..k {
            variance = variance + ws[i] * rho[[i, j]] * ws[j];
        }
    }
    (mean, variance)
}

/// Aggregated prediction at a natural-units input.
pub fn palm_predict<T: Scalar>(m: &PalmModel<T>, x: &[T]) -> Result<PalmPrediction<T>> {
    let coded = m.coding.encode(x)?;
    let k = m.experts.len();
    let mut means = Vec::with_capacity(k);
    let mut sigma2s = Vec::with_capacity(k);
    for e in &m.experts {
        let p = e.fit().predict(&coded)?;
        means.push(p.mean);
        sigma2s.push(p.variance);
    }
    let w = weights(&sigma2s, m.power_p)?;
    let (mean, variance) = combine(&means, &sigma2s, &w, m.rho.view());
    Ok(PalmPrediction {
        mean,
        variance,
        weights: w,
    })
}

fn rho_matrix<T: Scalar>(experts: &[LocalExpert<T>]) -> Result<Array2<T>> {
    let k = experts.len();
    let pairs: Vec<(usize, usize)> = (0..k)
        .flat_map(|i| ((i + 1)..k).map(move |j| (i, j)))
        .collect();
    let values: Vec<T> = pairs
        .par_iter()
        .map(|&(i, j)| estimate_rho(&experts[i], &experts[j]))
        .collect::<Result<_>>()?;
    let mut rho = Array2::from_elem((k, k), T::one());
    for (&(i, j), &v) in pairs.iter().zip(&values) {
        rho[[i, j]] = v;
        rho[[j, i]] = v;
    }
    Ok(rho)
}

/// Recomputes the shared amplitude and pooled nugget from the model's
/// current experts and correlation matrix, then refreshes every expert's
/// factorization with them.
pub(crate) fn recalibrate_model<T: Scalar>(m: &mut PalmModel<T>, norm: MseNorm) -> Result<()> {
    m.tau2 = calibrate_tau2(m.s2, m.rho.view())?;
    m.eta = pooled_nugget(&m.experts, m.tau2, norm)?;
    for e in &mut m.experts {
        e.recalibrate(m.tau2, m.eta)?;
    }
    Ok(())
}

/// Nugget handling implied by a configuration: a fixed jitter unless the
/// local experts are asked to estimate their own noise level.
pub fn expert_nugget_mode<T: Scalar>(cfg: &PalmConfig<T>) -> NuggetMode<T> {
    if cfg.local.estimate_nugget {
        NuggetMode::Estimated
    } else {
        NuggetMode::Fixed(cfg.nugget)
    }
}

/// Fits the aggregated model: builds the experts in parallel, estimates
/// all pairwise correlations, calibrates the shared amplitude and pooled
/// nugget, and refreshes the experts once with the calibrated values.
pub fn fit_palm<T: Scalar>(
    data: &TrainingSet<T>,
    centers: ArrayView2<'_, T>,
    cfg: &PalmConfig<T>,
) -> Result<PalmModel<T>> {
    let k = centers.nrows();
    if k == 0 {
        return Err(PalmError::InvalidArgument(
            "at least one center is required".into(),
        ));
    }
    if centers.ncols() != data.dims() {
        return Err(PalmError::DimensionMismatch {
            context: "centers",
            expected: data.dims(),
            found: centers.ncols(),
        });
    }
    let y_slice = data.y().as_slice().expect("standard layout");
    let theta_max = lengthscale_cap(
        data.coded(),
        y_slice,
        cfg.local.lengthscales,
        expert_nugget_mode(cfg),
        CAP_SUBSETS,
        CAP_SUBSET_SIZE.min(data.n()),
        cfg.seed,
    )?;
    let center_rows: Vec<Vec<T>> = (0..k).map(|i| centers.row(i).to_vec()).collect();
    let experts: Vec<LocalExpert<T>> = center_rows
        .par_iter()
        .map(|c| build_local_expert(data, c, &cfg.local, &theta_max, T::one(), cfg.nugget))
        .collect::<Result<_>>()?;
    let rho = rho_matrix(&experts)?;
    let s2 = empirical_s2(y_slice)?;
    let power_p = resolve_power(cfg, data.dims(), k)?;
    let mut model = PalmModel {
        experts,
        rho,
        tau2: T::one(),
        eta: cfg.nugget,
        power_p,
        s2,
        coding: data.coding().clone(),
        theta_max,
    };
    recalibrate_model(&mut model, cfg.mse_norm)?;
    Ok(model)
}

fn resolve_power<T: Scalar>(cfg: &PalmConfig<T>, d: usize, k: usize) -> Result<T> {
    match cfg.power {
        Some(p) => {
            if !(p >= T::zero()) || !p.is_finite() {
                return Err(PalmError::InvalidArgument(format!(
                    "weight power must be nonnegative and finite, got {p}"
                )));
            }
            Ok(p)
        }
        None => default_power(d, k),
    }
}

/// Grows a fitted model by one expert at `center` (natural units): the new
/// expert is built against the same corpus, the correlation matrix is
/// brought up to date (fully recomputed by default, or extended by one row
/// under [`RhoUpdate::IncrementalRow`]), and the amplitude, pooled nugget
/// and default power are recalibrated across all experts.
pub fn add_center<T: Scalar>(
    m: &mut PalmModel<T>,
    data: &TrainingSet<T>,
    center: &[T],
    cfg: &PalmConfig<T>,
) -> Result<()> {
    if data.coding().bounds() != m.coding.bounds() {
        return Err(PalmError::InvalidArgument(
            "training set coding differs from the model's".into(),
        ));
    }
    let expert = build_local_expert(data, center, &cfg.local, &m.theta_max, T::one(), cfg.nugget)?;
    let k_old = m.experts.len();
    match cfg.rho_update {
        RhoUpdate::Full => {
            m.experts.push(expert);
            m.rho = rho_matrix(&m.experts)?;
        }
        RhoUpdate::IncrementalRow => {
            let row: Vec<T> = m
                .experts
                .par_iter()
                .map(|e| estimate_rho(&expert, e))
                .collect::<Result<_>>()?;
            let mut rho = Array2::from_elem((k_old + 1, k_old + 1), T::one());
            for i in 0..k_old {
                for j in 0..k_old {
                    rho[[i, j]] = m.rho[[i, j]];
                }
            }
            for (j, &v) in row.iter().enumerate() {
                rho[[k_old, j]] = v;
                rho[[j, k_old]] = v;
            }
            m.experts.push(expert);
            m.rho = rho;
        }
    }
    m.power_p = resolve_power(cfg, data.dims(), k_old + 1)?;
    recalibrate_model(m, cfg.mse_norm)
}

/// A two-stage model: a global subset GP for broad structure plus an
/// aggregated local model fitted to its residuals.
#[derive(Clone, Debug)]
pub struct GlobalPlusPalm<T> {
    pub(crate) global: GpFit<T>,
    pub(crate) global_indices: Vec<usize>,
    pub(crate) palm: PalmModel<T>,
    pub(crate) variance_rule: VarianceRule,
}

impl<T: Scalar> GlobalPlusPalm<T> {
    pub fn global(&self) -> &GpFit<T> {
        &self.global
    }

    /// Corpus rows the global stage was fitted to.
    pub fn global_indices(&self) -> &[usize] {
        &self.global_indices
    }

    pub fn palm(&self) -> &PalmModel<T> {
        &self.palm
    }

    pub fn variance_rule(&self) -> VarianceRule {
        self.variance_rule
    }

    /// Two-stage prediction: global mean plus residual-stage mean, with
    /// variance per the configured rule.
    pub fn predict(&self, x: &[T]) -> Result<PalmPrediction<T>> {
        let coded = self.palm.coding.encode(x)?;
        let residual = palm_predict(&self.palm, x)?;
        let mean = self.global.predict_mean(&coded)? + residual.mean;
        let variance = match self.variance_rule {
            VarianceRule::ResidualOnly => residual.variance,
            VarianceRule::Additive => {
                residual.variance + self.global.predict(&coded)?.variance
            }
        };
        Ok(PalmPrediction {
            mean,
            variance,
            weights: residual.weights,
        })
    }
}

/// Fits the two-stage model: a GP on a uniform `m_global`-point sub-sample,
/// then the aggregated local model on the residuals `y - mu_global(x)`.
pub fn fit_global_plus_palm<T: Scalar>(
    data: &TrainingSet<T>,
    centers: ArrayView2<'_, T>,
    m_global: usize,
    cfg: &PalmConfig<T>,
) -> Result<GlobalPlusPalm<T>> {
    let n = data.n();
    if m_global < 2 || m_global > n {
        return Err(PalmError::InsufficientData {
            needed: m_global.max(2),
            found: n.min(m_global),
        });
    }
    let global_indices = {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
        let mut idx = if m_global == n {
            (0..n).collect::<Vec<_>>()
        } else {
            rand::seq::index::sample(&mut rng, n, m_global).into_vec()
        };
        idx.sort_unstable();
        idx
    };
    let gx = Array2::from_shape_fn((m_global, data.dims()), |(r, c)| {
        data.coded()[[global_indices[r], c]]
    });
    let gy: Vec<T> = global_indices.iter().map(|&i| data.y()[i]).collect();
    let wide = Lengthscales::isotropic(T::of(GLOBAL_THETA_MAX), data.dims())?;
    let mle = mle_lengthscale(
        gx.view(),
        &gy,
        &MleConfig::new(cfg.local.lengthscales, expert_nugget_mode(cfg), wide),
    )?;
    let tau2 = profile_tau2(gx.view(), &gy, &mle.theta, mle.nugget)?;
    let global = fit_gp(gx, Array1::from_vec(gy), mle.theta, tau2, mle.nugget)?;

    let residuals: Vec<T> = (0..n)
        .into_par_iter()
        .map(|i| {
            global
                .predict_mean(data.coded_row(i))
                .map(|mu| data.y()[i] - mu)
        })
        .collect::<Result<_>>()?;
    let residual_data = data.with_responses(Array1::from_vec(residuals))?;
    let palm = fit_palm(&residual_data, centers, cfg)?;
    Ok(GlobalPlusPalm {
        global,
        global_indices,
        palm,
        variance_rule: cfg.global_variance,
    })
}
