//! Local experts: nearest-neighbor seeded designs grown greedily by
//! ALC variance reduction at a chosen center, then fitted by maximum
//! likelihood.
//!
//! Each expert keeps only `n` row indices into the shared training set plus
//! an `n x n` factorization, so memory for `K` experts grows with `K * n^2`,
//! never with the square of the corpus size.

use ndarray::{Array1, Array2, ArrayView2};

use crate::data::{Coding, TrainingSet};
use crate::error::{PalmError, Result};
use crate::gp::{
    fit_gp, mle_lengthscale, profile_tau2, theta_start, GpFit, LengthscaleMode, MleConfig,
    MomentPrediction, NuggetMode,
};
use crate::kernel::{sq_exp_corr, Lengthscales, Nugget};
use crate::linalg::{dot, CholeskyFactor};
use crate::scalar::Scalar;

/// Default local design size.
pub const LOCAL_N: usize = 50;
/// Default nearest-neighbor seed size.
pub const LOCAL_N0: usize = 6;
/// Default cap on the greedy candidate pool.
pub const LOCAL_N_CAND: usize = 1000;

/// Outcome of an ALC variance-reduction query.
#[derive(Clone, Copy, Debug)]
pub struct AlcOutcome<T> {
    /// Predicted drop in predictive variance at the reference point.
    pub reduction: T,
    /// True when the candidate's conditional variance is numerically zero
    /// (it duplicates a design point under a zero nugget), in which case
    /// `reduction` is 0.
    pub degenerate: bool,
}

/// Indices of the `m` rows of `x` closest to `query` in Euclidean distance,
/// nearest first; ties broken toward the lower index.
pub fn nearest_neighbors<T: Scalar>(
    x: ArrayView2<'_, T>,
    query: &[T],
    m: usize,
) -> Result<Vec<usize>> {
    if query.len() != x.ncols() {
        return Err(PalmError::DimensionMismatch {
            context: "nearest neighbor query",
            expected: x.ncols(),
            found: query.len(),
        });
    }
    if m > x.nrows() {
        return Err(PalmError::InsufficientData {
            needed: m,
            found: x.nrows(),
        });
    }
    if query.iter().any(|v| !v.is_finite()) {
        return Err(PalmError::NonFinite("nearest neighbor query"));
    }
    let mut order: Vec<(T, usize)> = (0..x.nrows())
        .map(|i| {
            let row = x.row(i);
            let mut s = T::zero();
            for (l, &q) in query.iter().enumerate() {
                let d = row[l] - q;
                s = s + d * d;
            }
            (s, i)
        })
        .collect();
    order.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    Ok(order.into_iter().take(m).map(|(_, i)| i).collect())
}

/// Relative floor below which a candidate's conditional variance counts as
/// numerically zero.
fn degenerate_floor<T: Scalar>(one_plus_eta: T) -> T {
    one_plus_eta * T::epsilon() * T::of(64.0)
}

/// Drop in predictive variance at `reference` if `candidate` were added to
/// the fitted design, computed from the existing factorization in O(n^2)
/// without refactorizing.
///
/// With `u_c = L^{-1} k_c` and `u_r = L^{-1} k_r`, the candidate's
/// conditional variance is `v = (1 + eta) - |u_c|^2` and the reduction is
/// `tau^2 (u_r . u_c - k(c, r))^2 / v`.
pub fn alc_reduction<T: Scalar>(
    fit: &GpFit<T>,
    candidate: &[T],
    reference: &[T],
) -> Result<AlcOutcome<T>> {
    let d = fit.dims();
    for (name, v) in [("alc candidate", candidate), ("alc reference", reference)] {
        if v.len() != d {
            return Err(PalmError::DimensionMismatch {
                context: name,
                expected: d,
                found: v.len(),
            });
        }
    }
    let k_c = crate::kernel::cross_corr_vec(fit.design(), candidate, fit.theta())?;
    let k_r = crate::kernel::cross_corr_vec(fit.design(), reference, fit.theta())?;
    let u_c = fit.chol().forward_solve(&k_c);
    let u_r = fit.chol().forward_solve(&k_r);
    let one_plus_eta = T::one() + fit.nugget().value();
    let v = one_plus_eta - dot(&u_c, &u_c);
    if !(v > degenerate_floor(one_plus_eta)) {
        return Ok(AlcOutcome {
            reduction: T::zero(),
            degenerate: true,
        });
    }
    let k_cr = sq_exp_corr(candidate, reference, fit.theta())?;
    let num = dot(&u_r, &u_c) - k_cr;
    Ok(AlcOutcome {
        reduction: fit.tau2() * num * num / v,
        degenerate: false,
    })
}

/// Settings for local design selection and expert fitting.
#[derive(Clone, Debug)]
pub struct LocalConfig {
    /// Final local design size.
    pub n: usize,
    /// Nearest-neighbor seed size (must be below `n`).
    pub n0: usize,
    /// Cap on the greedy candidate pool (nearest neighbors of the center).
    pub n_cand: usize,
    /// Lengthscale structure for the expert's likelihood fit.
    pub lengthscales: LengthscaleMode,
    /// Estimate the nugget jointly with the lengthscales instead of holding
    /// it at the supplied value.
    pub estimate_nugget: bool,
}

impl Default for LocalConfig {
    fn default() -> Self {
        Self {
            n: LOCAL_N,
            n0: LOCAL_N0,
            n_cand: LOCAL_N_CAND,
            lengthscales: LengthscaleMode::Isotropic,
            estimate_nugget: false,
        }
    }
}

impl LocalConfig {
    fn validate(&self, n_total: usize) -> Result<()> {
        if self.n0 == 0 || self.n0 >= self.n {
            return Err(PalmError::InvalidArgument(format!(
                "seed size n0 = {} must be in 1..n = {}",
                self.n0, self.n
            )));
        }
        if n_total < self.n {
            return Err(PalmError::InsufficientData {
                needed: self.n,
                found: n_total,
            });
        }
        Ok(())
    }
}

/// One local expert: a subset design centered on a query-space point, with
/// its fitted GP and in-sample mean squared error.
#[derive(Clone, Debug)]
pub struct LocalExpert<T> {
    pub(crate) center: Vec<T>,
    pub(crate) coding: Coding<T>,
    pub(crate) design_indices: Vec<usize>,
    pub(crate) fit: GpFit<T>,
    pub(crate) mse_k: T,
}

impl<T: Scalar> LocalExpert<T> {
    /// Center in query-space (natural) units.
    pub fn center(&self) -> &[T] {
        &self.center
    }

    /// Row indices of the local design within the global training set.
    pub fn design_indices(&self) -> &[usize] {
        &self.design_indices
    }

    pub fn fit(&self) -> &GpFit<T> {
        &self.fit
    }

    /// In-sample mean squared error of the smoothed fit, in response units.
    pub fn mse_k(&self) -> T {
        self.mse_k
    }

    pub fn coding(&self) -> &Coding<T> {
        &self.coding
    }

    /// Overwrites the expert's amplitude and nugget and refreshes its
    /// factorization (used once after aggregation-level calibration).
    pub(crate) fn recalibrate(&mut self, tau2: T, nugget: Nugget<T>) -> Result<()> {
        self.fit.refresh(tau2, nugget)
    }
}

/// Predictive mean and variance of one expert at a natural-units input.
pub fn expert_predict<T: Scalar>(e: &LocalExpert<T>, x: &[T]) -> Result<MomentPrediction<T>> {
    let coded = e.coding.encode(x)?;
    e.fit.predict(&coded)
}

/// Greedy local design for a coded center: the `n0` nearest neighbors, then
/// one point at a time maximizing the ALC variance reduction at the center
/// over the pool of the `n_cand` nearest neighbors not yet chosen.
///
/// The whole sweep shares one growing factorization; every pool candidate
/// carries its forward-solved correlation prefix, so each growth step costs
/// O(pool * design) rather than a refactorization per candidate.
pub fn select_local_design<T: Scalar>(
    data: &TrainingSet<T>,
    center_coded: &[T],
    growth_theta: &Lengthscales<T>,
    nugget: Nugget<T>,
    tau2: T,
    cfg: &LocalConfig,
) -> Result<Vec<usize>> {
    let n_total = data.n();
    cfg.validate(n_total)?;
    if !(tau2 > T::zero()) || !tau2.is_finite() {
        return Err(PalmError::InvalidArgument(format!(
            "amplitude tau2 must be positive and finite, got {tau2}"
        )));
    }
    let pool_size = cfg.n_cand.max(cfg.n).min(n_total);
    let pool = nearest_neighbors(data.coded(), center_coded, pool_size)?;
    if n_total == cfg.n {
        return Ok(pool);
    }

    let eta = nugget.value();
    let one_plus_eta = T::one() + eta;
    let v_floor = degenerate_floor(one_plus_eta);
    let corr = |i: usize, j: usize| -> T {
        sq_exp_corr(data.coded_row(i), data.coded_row(j), growth_theta)
            .expect("rows share the corpus dimension")
    };
    let corr_to_center = |i: usize| -> T {
        sq_exp_corr(data.coded_row(i), center_coded, growth_theta)
            .expect("center matches the corpus dimension")
    };

    let mut selected: Vec<usize> = pool[..cfg.n0].to_vec();
    let mut chol = CholeskyFactor::empty(cfg.n);
    for (j, &idx) in selected.iter().enumerate() {
        let col: Vec<T> = selected[..j].iter().map(|&p| corr(p, idx)).collect();
        chol.extend(&col, one_plus_eta)?;
    }

    // Forward-solved prefix for the center's correlation vector.
    let mut u_ref = {
        let k_r: Vec<T> = selected.iter().map(|&p| corr_to_center(p)).collect();
        chol.forward_solve(&k_r)
    };

    struct Candidate<T> {
        index: usize,
        /// Forward-solved prefix of this candidate's correlation vector.
        u: Vec<T>,
        /// Running |u|^2.
        sumsq: T,
        /// Running u_ref . u.
        s_ref: T,
        /// Correlation with the center (constant).
        k_ref: T,
        alive: bool,
    }

    let mut cands: Vec<Candidate<T>> = pool[cfg.n0..]
        .iter()
        .map(|&idx| {
            let k_c: Vec<T> = selected.iter().map(|&p| corr(p, idx)).collect();
            let u = chol.forward_solve(&k_c);
            Candidate {
                index: idx,
                sumsq: dot(&u, &u),
                s_ref: dot(&u_ref, &u),
                k_ref: corr_to_center(idx),
                u,
                alive: true,
            }
        })
        .collect();

    while selected.len() < cfg.n {
        let mut best: Option<(T, usize)> = None;
        for (pos, c) in cands.iter().enumerate() {
            if !c.alive {
                continue;
            }
            let v = one_plus_eta - c.sumsq;
            if !(v > v_floor) {
                continue;
            }
            let num = c.s_ref - c.k_ref;
            let reduction = tau2 * num * num / v;
            if best.map_or(true, |(b, _)| reduction > b) {
                best = Some((reduction, pos));
            }
        }
        // All remaining candidates degenerate: fall back to the nearest
        // unchosen point so the design still reaches its contracted size.
        let pos = match best {
            Some((_, pos)) => pos,
            None => match cands.iter().position(|c| c.alive) {
                Some(pos) => pos,
                None => {
                    return Err(PalmError::InsufficientData {
                        needed: cfg.n,
                        found: selected.len(),
                    })
                }
            },
        };

        let chosen = &mut cands[pos];
        if chol
            .extend_presolved(&chosen.u, chosen.sumsq, one_plus_eta)
            .is_err()
        {
            // Numerically dependent on the current design; never selectable.
            chosen.alive = false;
            continue;
        }
        chosen.alive = false;
        let new_idx = chosen.index;
        selected.push(new_idx);

        let j = chol.n() - 1;
        let lrow = chol.row(j).to_vec();
        let pivot = lrow[j];
        let u_ref_new = (corr_to_center(new_idx) - dot(&lrow[..j], &u_ref)) / pivot;
        u_ref.push(u_ref_new);
        for c in cands.iter_mut().filter(|c| c.alive) {
            let k_new = corr(c.index, new_idx);
            let u_new = (k_new - dot(&lrow[..j], &c.u)) / pivot;
            c.u.push(u_new);
            c.sumsq = c.sumsq + u_new * u_new;
            c.s_ref = c.s_ref + u_ref_new * u_new;
        }
    }
    Ok(selected)
}

/// Builds one local expert: greedy design selection at `center` (natural
/// units), then a maximum-likelihood fit of the lengthscales (and optionally
/// the nugget) on the final design with the amplitude profiled out.
///
/// `tau2` and `eta` drive the growth stage; the fitted expert carries its
/// own profile amplitude, to be overwritten by aggregation-level
/// calibration.
pub fn build_local_expert<T: Scalar>(
    data: &TrainingSet<T>,
    center: &[T],
    cfg: &LocalConfig,
    theta_max: &Lengthscales<T>,
    tau2: T,
    eta: Nugget<T>,
) -> Result<LocalExpert<T>> {
    let coding = data.coding().clone();
    let center_coded = coding.encode(center)?;

    let pool_size = cfg.n_cand.max(cfg.n).min(data.n());
    let growth_theta = {
        cfg.validate(data.n())?;
        let pool = nearest_neighbors(data.coded(), &center_coded, pool_size)?;
        let rows = gather_rows(data.coded(), &pool);
        Lengthscales::isotropic(theta_start(rows.view()), data.dims())?
    };
    let design_indices =
        select_local_design(data, &center_coded, &growth_theta, eta, tau2, cfg)?;

    let design = gather_rows(data.coded(), &design_indices);
    let y: Array1<T> = design_indices.iter().map(|&i| data.y()[i]).collect();
    let nugget_mode = if cfg.estimate_nugget {
        NuggetMode::Estimated
    } else {
        NuggetMode::Fixed(eta)
    };
    let mle = mle_lengthscale(
        design.view(),
        y.as_slice().expect("standard layout"),
        &MleConfig::new(cfg.lengthscales, nugget_mode, theta_max.clone()),
    )?;
    let tau2_hat = profile_tau2(design.view(), y.as_slice().unwrap(), &mle.theta, mle.nugget)?;
    let fit = fit_gp(design, y, mle.theta, tau2_hat, mle.nugget)?;

    // Smoothed in-sample predictions satisfy y - mu_hat = eta * alpha with
    // alpha = K^{-1} y, since the no-nugget correlation rows are K - eta I.
    let eta_fit = fit.nugget().value();
    let n_t = T::of_usize(fit.n());
    let mse_k = fit
        .alpha()
        .iter()
        .fold(T::zero(), |acc, &a| acc + (eta_fit * a) * (eta_fit * a))
        / n_t;

    Ok(LocalExpert {
        center: center.to_vec(),
        coding,
        design_indices,
        fit,
        mse_k,
    })
}

pub(crate) fn gather_rows<T: Scalar>(x: ArrayView2<'_, T>, indices: &[usize]) -> Array2<T> {
    Array2::from_shape_fn((indices.len(), x.ncols()), |(i, j)| x[[indices[i], j]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_point_line_fit(eta: Nugget<f64>) -> GpFit<f64> {
        fit_gp(
            array![[0.0], [1.0]],
            array![1.0, -1.0],
            Lengthscales::isotropic(1.0, 1).unwrap(),
            1.0,
            eta,
        )
        .unwrap()
    }

    #[test]
    fn nearest_neighbors_orders_by_distance() {
        let x = array![[0.0], [1.0], [2.0]];
        assert_eq!(nearest_neighbors(x.view(), &[0.9], 2).unwrap(), vec![1, 0]);
        // a training row queries itself first
        assert_eq!(
            nearest_neighbors(x.view(), &[2.0], 3).unwrap(),
            vec![2, 1, 0]
        );
        // equidistant pair: lower index first
        assert_eq!(nearest_neighbors(x.view(), &[0.5], 2).unwrap(), vec![0, 1]);
        assert!(matches!(
            nearest_neighbors(x.view(), &[0.0], 4),
            Err(PalmError::InsufficientData { needed: 4, found: 3 })
        ));
        assert!(nearest_neighbors(x.view(), &[f64::NAN], 1).is_err());
    }

    #[test]
    fn alc_reduction_matches_frozen_values() {
        let fit = two_point_line_fit(Nugget::noise(0.0).unwrap());
        let out = alc_reduction(&fit, &[0.6], &[0.5]).unwrap();
        assert!(!out.degenerate);
        assert_abs_diff_eq!(out.reduction, 0.11237366582360768, epsilon = 1e-12);

        let before = fit.predict(&[0.5]).unwrap().variance;
        assert_abs_diff_eq!(before, 0.11318111602992609, epsilon = 1e-12);

        let grown = fit_gp(
            array![[0.0], [1.0], [0.6]],
            array![1.0, -1.0, 0.0],
            Lengthscales::isotropic(1.0, 1).unwrap(),
            1.0,
            Nugget::noise(0.0).unwrap(),
        )
        .unwrap();
        let after = grown.predict(&[0.5]).unwrap().variance;
        assert_abs_diff_eq!(after, 0.0008074502063184075, epsilon = 1e-12);
        assert_abs_diff_eq!(before - after, out.reduction, epsilon = 1e-10);
    }

    #[test]
    fn alc_duplicate_candidate_without_nugget_is_degenerate() {
        let fit = two_point_line_fit(Nugget::noise(0.0).unwrap());
        let out = alc_reduction(&fit, &[1.0], &[0.5]).unwrap();
        assert!(out.degenerate);
        assert_eq!(out.reduction, 0.0);
    }

    #[test]
    fn alc_adding_the_reference_collapses_its_variance() {
        let fit = two_point_line_fit(Nugget::jitter());
        let before = fit.predict(&[0.5]).unwrap().variance;
        let out = alc_reduction(&fit, &[0.5], &[0.5]).unwrap();
        assert!(!out.degenerate);
        assert!(out.reduction > 0.99 * before);
        assert!(out.reduction <= before * (1.0 + 1e-9));
    }

    #[test]
    fn alc_uncorrelated_candidate_reduces_nothing() {
        let fit = two_point_line_fit(Nugget::jitter());
        let out = alc_reduction(&fit, &[40.0], &[0.5]).unwrap();
        assert!(!out.degenerate);
        assert!(out.reduction.abs() < 1e-12);
    }

    #[test]
    fn alc_matches_brute_force_refit_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let theta = Lengthscales::isotropic(0.7, 2).unwrap();
        let eta = Nugget::noise(0.05).unwrap();
        for _ in 0..50 {
            let design = Array2::from_shape_fn((10, 2), |_| rng.gen::<f64>());
            let y = Array1::from_shape_fn(10, |_| rng.gen::<f64>() * 2.0 - 1.0);
            let cand = [rng.gen::<f64>(), rng.gen::<f64>()];
            let reference = [rng.gen::<f64>(), rng.gen::<f64>()];
            let fit = fit_gp(design.clone(), y.clone(), theta.clone(), 2.3, eta).unwrap();
            let fast = alc_reduction(&fit, &cand, &reference).unwrap();
            assert!(!fast.degenerate);

            let mut grown = Array2::zeros((11, 2));
            grown.slice_mut(ndarray::s![..10, ..]).assign(&design);
            grown[[10, 0]] = cand[0];
            grown[[10, 1]] = cand[1];
            let mut y2 = y.to_vec();
            y2.push(0.0);
            let refit = fit_gp(
                grown,
                Array1::from_vec(y2),
                theta.clone(),
                2.3,
                eta,
            )
            .unwrap();
            let brute = fit.predict(&reference).unwrap().variance
                - refit.predict(&reference).unwrap().variance;
            assert_abs_diff_eq!(fast.reduction, brute, epsilon = 1e-8);
        }
    }

    fn random_corpus_2d(n: usize, seed: u64) -> TrainingSet<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, 2), |_| rng.gen::<f64>());
        let y = Array1::from_shape_fn(n, |i| (6.0 * x[[i, 0]]).sin() + x[[i, 1]]);
        TrainingSet::new(x, y).unwrap()
    }

    #[test]
    fn greedy_sweep_equals_stepwise_alc_argmax() {
        let data = random_corpus_2d(80, 7);
        let cfg = LocalConfig {
            n: 12,
            n0: 3,
            n_cand: 30,
            ..LocalConfig::default()
        };
        let center = data.coding().encode(&[0.4, 0.6]).unwrap();
        let theta = Lengthscales::isotropic(0.05, 2).unwrap();
        let eta = Nugget::jitter();

        let fast = select_local_design(&data, &center, &theta, eta, 1.0, &cfg).unwrap();

        // Naive path: refit from scratch each step and call the public
        // single-candidate reduction.
        let pool = nearest_neighbors(data.coded(), &center, 30).unwrap();
        let mut sel = pool[..3].to_vec();
        while sel.len() < 12 {
            let design = gather_rows(data.coded(), &sel);
            let y: Array1<f64> = sel.iter().map(|&i| data.y()[i]).collect();
            let fit = fit_gp(design, y, theta.clone(), 1.0, eta).unwrap();
            let mut best: Option<(f64, usize)> = None;
            for &idx in pool.iter().skip(3) {
                if sel.contains(&idx) {
                    continue;
                }
                let out = alc_reduction(&fit, data.coded_row(idx), &center).unwrap();
                if out.degenerate {
                    continue;
                }
                if best.map_or(true, |(b, _)| out.reduction > b) {
                    best = Some((out.reduction, idx));
                }
            }
            sel.push(best.unwrap().1);
        }
        assert_eq!(fast, sel);

        // construction properties: distinct, drawn from the pool, seeded by
        // the nearest neighbors
        let mut uniq = fast.clone();
        uniq.sort_unstable();
        uniq.dedup();
        assert_eq!(uniq.len(), fast.len());
        assert!(fast.iter().all(|i| pool.contains(i)));
        assert_eq!(&fast[..3], &pool[..3]);
    }

    #[test]
    fn corpus_of_exactly_n_is_used_whole() {
        let data = random_corpus_2d(15, 3);
        let cfg = LocalConfig {
            n: 15,
            n0: 6,
            n_cand: 1000,
            ..LocalConfig::default()
        };
        let center = [0.5, 0.5];
        let theta = Lengthscales::isotropic(0.1, 2).unwrap();
        let sel = select_local_design(&data, &center, &theta, Nugget::jitter(), 1.0, &cfg)
            .unwrap();
        let expected = nearest_neighbors(data.coded(), &center, 15).unwrap();
        assert_eq!(sel, expected);
    }

    #[test]
    fn corpus_smaller_than_n_is_rejected() {
        let data = random_corpus_2d(10, 3);
        let cfg = LocalConfig::default();
        let err = select_local_design(
            &data,
            &[0.5, 0.5],
            &Lengthscales::isotropic(0.1, 2).unwrap(),
            Nugget::jitter(),
            1.0,
            &cfg,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            PalmError::InsufficientData {
                needed: 50,
                found: 10
            }
        ));
    }

    #[test]
    fn sweep_survives_duplicate_corpus_rows_under_jitter() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut x = Array2::from_shape_fn((40, 1), |_| rng.gen::<f64>());
        for i in 20..40 {
            x[[i, 0]] = x[[i - 20, 0]];
        }
        let y = Array1::from_shape_fn(40, |i| x[[i, 0]].sin());
        let data = TrainingSet::new(x, y).unwrap();
        let cfg = LocalConfig {
            n: 30,
            n0: 4,
            n_cand: 40,
            ..LocalConfig::default()
        };
        let sel = select_local_design(
            &data,
            &[0.5],
            &Lengthscales::isotropic(0.1, 1).unwrap(),
            Nugget::jitter(),
            1.0,
            &cfg,
        )
        .unwrap();
        assert_eq!(sel.len(), 30);
    }

    fn sine_corpus() -> TrainingSet<f64> {
        let n = 100;
        let x = Array2::from_shape_fn((n, 1), |(i, _)| 20.0 * i as f64 / (n - 1) as f64);
        let y = Array1::from_shape_fn(n, |i| x[[i, 0]].sin());
        TrainingSet::new(x, y).unwrap()
    }

    fn sine_expert() -> LocalExpert<f64> {
        build_local_expert(
            &sine_corpus(),
            &[5.0],
            &LocalConfig::default(),
            &Lengthscales::isotropic(100.0, 1).unwrap(),
            1.0,
            Nugget::jitter(),
        )
        .unwrap()
    }

    #[test]
    fn sine_expert_is_accurate_near_its_center_and_degrades_away() {
        let e = sine_expert();
        assert_eq!(e.design_indices().len(), 50);
        assert_eq!(e.center(), &[5.0]);
        let mut worst_inside = 0.0f64;
        let mut x = 3.0;
        while x <= 7.0 {
            let p = expert_predict(&e, &[x]).unwrap();
            worst_inside = worst_inside.max((p.mean - x.sin()).abs());
            x += 0.05;
        }
        assert!(worst_inside < 0.02, "max error in (3,7): {worst_inside}");
        let mut worst_outside = 0.0f64;
        for q in [14.0, 15.0, 16.0, 17.0, 18.0] {
            let p = expert_predict(&e, &[q]).unwrap();
            worst_outside = worst_outside.max((p.mean - q.sin()).abs());
        }
        assert!(
            worst_outside > 10.0 * worst_inside.max(1e-3),
            "no degradation away from the design: outside {worst_outside}, inside {worst_inside}"
        );
    }

    #[test]
    fn expert_far_field_variance_reverts_to_prior_amplitude() {
        let e = sine_expert();
        let p = expert_predict(&e, &[1000.0]).unwrap();
        let prior = e.fit().tau2() * (1.0 + e.fit().nugget().value());
        assert_abs_diff_eq!(p.variance, prior, epsilon = 1e-9 * prior);
        assert_abs_diff_eq!(p.mean, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn expert_predict_delegates_bit_for_bit() {
        let e = sine_expert();
        let x = [4.321];
        let via_expert = expert_predict(&e, &x).unwrap();
        let coded = e.coding().encode(&x).unwrap();
        let direct = e.fit().predict(&coded).unwrap();
        assert_eq!(via_expert.mean, direct.mean);
        assert_eq!(via_expert.variance, direct.variance);
    }

    #[test]
    fn expert_variance_at_center_is_lowest_nearby() {
        let e = sine_expert();
        let at_center = expert_predict(&e, &[5.0]).unwrap().variance;
        for dx in [-0.9, -0.45, 0.45, 0.9] {
            let v = expert_predict(&e, &[5.0 + dx]).unwrap().variance;
            assert!(v >= at_center * 0.5, "variance scan dx={dx}");
        }
        let far = expert_predict(&e, &[12.0]).unwrap().variance;
        assert!(far > at_center * 10.0);
    }

    #[test]
    fn greedy_growth_never_increases_variance_at_the_center() {
        let data = sine_corpus();
        let cfg = LocalConfig {
            n: 20,
            n0: 3,
            n_cand: 100,
            ..LocalConfig::default()
        };
        let center = data.coding().encode(&[5.0]).unwrap();
        let theta = Lengthscales::isotropic(0.01, 1).unwrap();
        let sel =
            select_local_design(&data, &center, &theta, Nugget::jitter(), 1.0, &cfg).unwrap();
        let mut last = f64::INFINITY;
        for j in cfg.n0..=sel.len() {
            let design = gather_rows(data.coded(), &sel[..j]);
            let y: Array1<f64> = sel[..j].iter().map(|&i| data.y()[i]).collect();
            let fit = fit_gp(design, y, theta.clone(), 1.0, Nugget::jitter()).unwrap();
            let v = fit.predict(&center).unwrap().variance;
            assert!(v <= last + 1e-10, "step {j}: {v} > {last}");
            last = v;
        }
    }

    #[test]
    fn mse_matches_explicit_smoothed_residuals() {
        let n = 120;
        let x = Array2::from_shape_fn((n, 1), |(i, _)| 20.0 * i as f64 / (n - 1) as f64);
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let y = Array1::from_shape_fn(n, |i| x[[i, 0]].sin() + 0.3 * (rng.gen::<f64>() - 0.5));
        let data = TrainingSet::new(x, y).unwrap();
        let cfg = LocalConfig {
            estimate_nugget: true,
            ..LocalConfig::default()
        };
        let e = build_local_expert(
            &data,
            &[10.0],
            &cfg,
            &Lengthscales::isotropic(100.0, 1).unwrap(),
            1.0,
            Nugget::jitter(),
        )
        .unwrap();
        assert!(e.mse_k() > 1e-6, "nugget estimation should leave residuals");

        let fit = e.fit();
        let mut explicit = 0.0;
        for i in 0..fit.n() {
            let row: Vec<f64> = fit.design().row(i).to_vec();
            let k = crate::kernel::cross_corr_vec(fit.design(), &row, fit.theta()).unwrap();
            let smoothed = dot(&k, fit.alpha());
            let r = fit.responses()[i] - smoothed;
            explicit += r * r;
        }
        explicit /= fit.n() as f64;
        assert_abs_diff_eq!(e.mse_k(), explicit, epsilon = 1e-10 * explicit.max(1e-12));
    }
}
