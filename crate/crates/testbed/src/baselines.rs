//! Reference comparator predictors: exhaustive transductive local GPs (one
//! local model per test point), a disjoint rectangular-partition GP, and a
//! naive precision-weighted average of random-subset GPs.

use ndarray::{Array1, ArrayView2, Axis};
use palm::data::TrainingSet;
use palm::error::{PalmError, Result};
use palm::gp::{
    fit_gp, lengthscale_cap, mle_lengthscale, profile_tau2, GpFit, LengthscaleMode, MleConfig,
    NuggetMode, THETA_WIDE_MAX,
};
use palm::kernel::Lengthscales;
use palm::lagp::{build_local_expert, expert_predict};
use palm::palm::{expert_nugget_mode, weights, PalmConfig, CAP_SUBSETS, CAP_SUBSET_SIZE};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Pointwise predictive means and variances over a test set.
#[derive(Clone, Debug)]
pub struct Predictions {
    pub mean: Array1<f64>,
    pub variance: Array1<f64>,
}

/// Runs any pointwise `(mean, variance)` predictor over the rows of
/// `x_test` in parallel, preserving row order.
pub fn predict_rows<F>(x_test: ArrayView2<f64>, f: F) -> Result<Predictions>
where
    F: Fn(&[f64]) -> Result<(f64, f64)> + Sync,
{
    let rows: Vec<Vec<f64>> = x_test.rows().into_iter().map(|r| r.to_vec()).collect();
    let pairs: Vec<(f64, f64)> = rows.par_iter().map(|r| f(r)).collect::<Result<_>>()?;
    Ok(Predictions {
        mean: pairs.iter().map(|p| p.0).collect(),
        variance: pairs.iter().map(|p| p.1).collect(),
    })
}

fn check_test_dims(data: &TrainingSet<f64>, x_test: ArrayView2<f64>) -> Result<()> {
    if x_test.ncols() != data.dims() {
        return Err(PalmError::DimensionMismatch {
            context: "test inputs",
            expected: data.dims(),
            found: x_test.ncols(),
        });
    }
    Ok(())
}

/// Transductive local GP: one local expert built from scratch at every
/// test location, each with its own profiled amplitude. The strongest
/// (and by far the slowest) pointwise comparator.
pub fn baseline_transductive_lagp(
    data: &TrainingSet<f64>,
    x_test: ArrayView2<f64>,
    cfg: &PalmConfig<f64>,
) -> Result<Predictions> {
    check_test_dims(data, x_test)?;
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
    predict_rows(x_test, |x| {
        let e = build_local_expert(data, x, &cfg.local, &theta_max, 1.0, cfg.nugget)?;
        let p = expert_predict(&e, x)?;
        Ok((p.mean, p.variance))
    })
}

/// Largest per-cell (and per-subset) design the partition and
/// model-average baselines will fit a dense GP to.
pub const PARTITION_CELL_CAP: usize = 300;

/// Deterministic even-stride subsample: all of `0..n` when it fits the
/// cap, otherwise `cap` indices spread evenly across the range.
pub fn strided_indices(n: usize, cap: usize) -> Vec<usize> {
    assert!(cap > 0, "subsample cap must be positive");
    if n <= cap {
        (0..n).collect()
    } else {
        (0..cap).map(|t| t * n / cap).collect()
    }
}

fn fit_plain_gp(data: &TrainingSet<f64>, indices: &[usize]) -> Result<GpFit<f64>> {
    let x = data.coded().select(Axis(0), indices);
    let y: Array1<f64> = indices.iter().map(|&i| data.y()[i]).collect();
    let theta_max = Lengthscales::isotropic(THETA_WIDE_MAX, data.dims())?;
    let cfg = MleConfig::new(LengthscaleMode::Isotropic, NuggetMode::Estimated, theta_max);
    let mle = mle_lengthscale(x.view(), y.as_slice().expect("standard layout"), &cfg)?;
    let tau2 = profile_tau2(
        x.view(),
        y.as_slice().expect("standard layout"),
        &mle.theta,
        mle.nugget,
    )?;
    fit_gp(x, y, mle.theta, tau2, mle.nugget)
}

/// Disjoint rectangular partition of the coded unit cube into
/// `cells_per_dim^d = grid_k` cells, an independent GP per occupied cell
/// (even-stride subsampled above [`PARTITION_CELL_CAP`] points), and
/// indicator-weight prediction: each test point is answered solely by the
/// GP of the cell containing it, falling back to the nearest occupied
/// cell. Discontinuous across cell boundaries by construction.
pub fn baseline_partition_gp(
    data: &TrainingSet<f64>,
    grid_k: usize,
    x_test: ArrayView2<f64>,
) -> Result<Predictions> {
    check_test_dims(data, x_test)?;
    let d = data.dims();
    if grid_k == 0 {
        return Err(PalmError::InvalidArgument(
            "a partition needs at least one cell".into(),
        ));
    }
    let cpd = (grid_k as f64).powf(1.0 / d as f64).round() as usize;
    if cpd == 0 || cpd.pow(d as u32) != grid_k {
        return Err(PalmError::InvalidArgument(format!(
            "partition size {grid_k} is not a perfect {d}-th power"
        )));
    }

    let cell_of = |coded: &[f64]| -> usize {
        coded.iter().fold(0usize, |acc, &c| {
            let digit = ((c * cpd as f64).floor() as isize).clamp(0, cpd as isize - 1) as usize;
            acc * cpd + digit
        })
    };

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); grid_k];
    for i in 0..data.n() {
        let row = data.coded_row(i);
        members[cell_of(row)].push(i);
    }

    let fits: Vec<Option<GpFit<f64>>> = members
        .par_iter()
        .map(|idx| {
            if idx.len() < 2 {
                return Ok(None);
            }
            let strides = strided_indices(idx.len(), PARTITION_CELL_CAP);
            let sel: Vec<usize> = strides.iter().map(|&t| idx[t]).collect();
            fit_plain_gp(data, &sel).map(Some)
        })
        .collect::<Result<_>>()?;
    let occupied: Vec<usize> = (0..grid_k).filter(|&c| fits[c].is_some()).collect();
    if occupied.is_empty() {
        return Err(PalmError::InsufficientData {
            needed: 2,
            found: members.iter().map(Vec::len).max().unwrap_or(0),
        });
    }

    // coded midpoint of a cell, for nearest-occupied fallback
    let cell_center = |cell: usize| -> Vec<f64> {
        let mut digits = vec![0usize; d];
        let mut rem = cell;
        for j in (0..d).rev() {
            digits[j] = rem % cpd;
            rem /= cpd;
        }
        digits
            .iter()
            .map(|&g| (g as f64 + 0.5) / cpd as f64)
            .collect()
    };

    predict_rows(x_test, |x| {
        let coded = data.coding().encode(x)?;
        let mut cell = cell_of(&coded);
        if fits[cell].is_none() {
            cell = *occupied
                .iter()
                .min_by(|&&a, &&b| {
                    let da = dist2(&cell_center(a), &coded);
                    let db = dist2(&cell_center(b), &coded);
                    da.partial_cmp(&db).expect("finite distances")
                })
                .expect("at least one occupied cell");
        }
        let fit = fits[cell].as_ref().expect("occupied cell");
        let p = fit.predict(&coded)?;
        Ok((p.mean, p.variance))
    })
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Naive divide-and-conquer: `k` GPs on disjoint random subsets of
/// `subset_size` points each, combined pointwise with plain (power 1)
/// precision weights and no between-model correlation, so the aggregate
/// variance is `sum_k w_k^2 sigma_k^2`.
pub fn baseline_model_average(
    data: &TrainingSet<f64>,
    k: usize,
    subset_size: usize,
    x_test: ArrayView2<f64>,
    seed: u64,
) -> Result<Predictions> {
    check_test_dims(data, x_test)?;
    if k == 0 || subset_size < 2 {
        return Err(PalmError::InvalidArgument(
            "model averaging needs k >= 1 subsets of at least 2 points".into(),
        ));
    }
    let need = k
        .checked_mul(subset_size)
        .ok_or_else(|| PalmError::InvalidArgument("subset plan overflows".into()))?;
    if need > data.n() {
        return Err(PalmError::InsufficientData {
            needed: need,
            found: data.n(),
        });
    }
    let mut order: Vec<usize> = (0..data.n()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let fits: Vec<GpFit<f64>> = (0..k)
        .into_par_iter()
        .map(|c| {
            let mut idx = order[c * subset_size..(c + 1) * subset_size].to_vec();
            idx.sort_unstable();
            fit_plain_gp(data, &idx)
        })
        .collect::<Result<_>>()?;

    predict_rows(x_test, |x| {
        let coded = data.coding().encode(x)?;
        let mut mus = Vec::with_capacity(k);
        let mut vars = Vec::with_capacity(k);
        for fit in &fits {
            let p = fit.predict(&coded)?;
            mus.push(p.mean);
            vars.push(p.variance);
        }
        let w = weights(&vars, 1.0)?;
        let mean: f64 = w.iter().zip(&mus).map(|(wi, mi)| wi * mi).sum();
        let variance: f64 = w.iter().zip(&vars).map(|(wi, vi)| wi * wi * vi).sum();
        Ok((mean, variance))
    })
}
