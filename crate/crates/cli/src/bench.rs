//! Benchmark scenarios: each fits the aggregate model and selected
//! baselines on identical data and emits three artifacts into the output
//! directory:
//!
//! - `metrics.csv` — `scenario,method,mode,k,n_train,n_test,seed,rmse,mae,score,coverage_90`;
//!   fully deterministic under a fixed seed (no wall times).
//! - `timings.csv` — `scenario,method,mode,k,phase,seconds` with 3-decimal
//!   wall-clock seconds; phases are `fit` and `predict`, or `total` for
//!   baselines whose single entry point does both.
//! - `slice.csv` — `x,truth,<method>_mean,<method>_variance,...` along a
//!   fixed 1d cut through the domain, for plotting prediction continuity.
//!
//! A scenario pins its surface, noise level and nugget handling; grid
//! sizes, expert counts and seeds are taken from the run configuration.

use std::path::Path;
use std::time::Duration;

use ndarray::{Array1, Array2};

use palm::centers::sequential_palm_with;
use palm::data::TrainingSet;
use palm::{PalmError, Result};
use palm_testbed::{
    add_noise, baseline_model_average, baseline_partition_gp, baseline_transductive_lagp,
    evaluate_surface, grid_design, offset_grid, MetricReport, Predictions,
};

use crate::artifacts::{atomic_write, secs3};
use crate::config::{CenterMode, RunConfig};
use crate::run::{fit_model, timed_predictions};

/// The run configuration a scenario starts from; user config and flags are
/// merged on top, then [`pin_identity`] re-asserts what defines the
/// scenario.
pub fn scenario_defaults(name: &str) -> Result<RunConfig> {
    let mut rc = RunConfig::default();
    match name {
        "herbie-noisy" | "herbie-det" => {
            rc.train_ppd = 50;
            rc.test_ppd = 51;
            rc.k = 25;
        }
        "glee-seq" => {
            rc.train_ppd = 60;
            rc.test_ppd = 60;
            rc.k = 15;
            rc.k_init = 5;
        }
        "michalewicz-3d" => {
            rc.train_ppd = 15;
            rc.test_ppd = 15;
            rc.k = 40;
            rc.k_init = 5;
        }
        _ => return Err(unknown_scenario(name)),
    }
    pin_identity(&mut rc, name)?;
    Ok(rc)
}

fn unknown_scenario(name: &str) -> PalmError {
    PalmError::InvalidArgument(format!(
        "unknown scenario {name:?}; available: herbie-noisy, herbie-det, glee-seq, michalewicz-3d"
    ))
}

/// Forces the fields that define a scenario's identity, so a config file
/// can resize a scenario but not silently turn it into a different one.
fn pin_identity(rc: &mut RunConfig, name: &str) -> Result<()> {
    match name {
        "herbie-noisy" => {
            rc.function = "herbie".into();
            rc.dims = 2;
            rc.noise_sd = 0.05;
            rc.estimate_nugget = true;
        }
        "herbie-det" => {
            rc.function = "herbie".into();
            rc.dims = 2;
            rc.noise_sd = 0.0;
            rc.estimate_nugget = false;
        }
        "glee-seq" => {
            rc.function = "glee".into();
            rc.dims = 2;
            rc.noise_sd = 0.01;
            rc.estimate_nugget = true;
        }
        "michalewicz-3d" => {
            rc.function = "michalewicz".into();
            rc.dims = 3;
            rc.noise_sd = 0.05;
            rc.estimate_nugget = true;
        }
        _ => return Err(unknown_scenario(name)),
    }
    rc.two_stage = false;
    Ok(())
}

/// Accumulates the three artifact files for one scenario run.
struct Emit {
    scenario: &'static str,
    seed: u64,
    n_train: usize,
    n_test: usize,
    metrics: String,
    timings: String,
}

impl Emit {
    fn new(scenario: &'static str, rc: &RunConfig, n_train: usize, n_test: usize) -> Self {
        Self {
            scenario,
            seed: rc.seed,
            n_train,
            n_test,
            metrics: "scenario,method,mode,k,n_train,n_test,seed,rmse,mae,score,coverage_90\n"
                .into(),
            timings: "scenario,method,mode,k,phase,seconds\n".into(),
        }
    }

    fn metric(&mut self, method: &str, mode: &str, k: usize, r: &MetricReport) {
        self.metrics.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            self.scenario,
            method,
            mode,
            k,
            self.n_train,
            self.n_test,
            self.seed,
            r.rmse,
            r.mae,
            r.score,
            r.coverage_90,
        ));
    }

    fn timing(&mut self, method: &str, mode: &str, k: usize, phase: &str, d: Duration) {
        self.timings.push_str(&format!(
            "{},{},{},{},{},{}\n",
            self.scenario,
            method,
            mode,
            k,
            phase,
            secs3(d)
        ));
    }

    fn write(&self, out: &Path) -> Result<()> {
        atomic_write(&out.join("metrics.csv"), self.metrics.as_bytes())?;
        atomic_write(&out.join("timings.csv"), self.timings.as_bytes())?;
        Ok(())
    }
}

/// Renders and writes `slice.csv` from per-method slice predictions.
fn write_slice(
    out: &Path,
    xs: &[f64],
    truth: &[f64],
    columns: &[(String, Predictions)],
) -> Result<()> {
    let mut s = String::from("x,truth");
    for (name, _) in columns {
        let token = name.replace('-', "_");
        s.push_str(&format!(",{token}_mean,{token}_variance"));
    }
    s.push('\n');
    for i in 0..xs.len() {
        s.push_str(&format!("{},{}", xs[i], truth[i]));
        for (_, p) in columns {
            s.push_str(&format!(",{},{}", p.mean[i], p.variance[i]));
        }
        s.push('\n');
    }
    atomic_write(&out.join("slice.csv"), s.as_bytes())
}

/// Training and test data for a scenario: noisy responses on the inclusive
/// training grid, noise-free truth on the offset test grid.
fn scenario_data(rc: &RunConfig) -> Result<(TrainingSet<f64>, Array2<f64>, Array1<f64>)> {
    let surface = rc.surface()?;
    let bounds = surface.bounds();
    let x_train = grid_design(rc.train_ppd, &bounds)?;
    let y_true = evaluate_surface(&surface, x_train.view())?;
    let y_train = add_noise(y_true.view(), rc.noise_sd, rc.seed)?;
    let data = TrainingSet::new(x_train, y_train)?;

    let x_test = offset_grid(rc.test_ppd, &bounds)?;
    let y_test = evaluate_surface(&surface, x_test.view())?;
    Ok((data, x_test, y_test))
}

/// Points along a 1d cut: dimension `dim` sweeps its domain over
/// `points` steps while every other coordinate stays at `anchor`.
fn slice_points(
    bounds: &[(f64, f64)],
    dim: usize,
    anchor: &[f64],
    points: usize,
) -> (Vec<f64>, Array2<f64>) {
    let (lo, hi) = bounds[dim];
    let xs: Vec<f64> = (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect();
    let mut m = Array2::zeros((points, bounds.len()));
    for (i, &x) in xs.iter().enumerate() {
        for j in 0..bounds.len() {
            m[[i, j]] = if j == dim { x } else { anchor[j] };
        }
    }
    (xs, m)
}

const SLICE_POINTS: usize = 201;

/// Largest `c` with `c^d <= k`, as the per-dimension resolution of the
/// partition baseline's grid.
fn partition_cells_per_dim(k: usize, d: usize) -> usize {
    let mut c = 1usize;
    while (c + 1).pow(d as u32) <= k {
        c += 1;
    }
    c
}

fn palm_preds(
    m: &palm::PalmModel64,
    x: &Array2<f64>,
) -> Result<(Predictions, Duration)> {
    timed_predictions(x, |row| m.predict(row).map(|p| (p.mean, p.variance)))
}

/// Shared body of the two Herbie scenarios; they differ only in pinned
/// noise/nugget identity and the baseline set.
fn herbie(rc: &RunConfig, scenario: &'static str) -> Result<()> {
    let (data, x_test, y_test) = scenario_data(rc)?;
    let mut emit = Emit::new(scenario, rc, data.n(), x_test.nrows());
    let cfg = rc.palm_config()?;
    let y = y_test.as_slice().expect("contiguous");

    // aggregate model, space-filling centers
    let t0 = std::time::Instant::now();
    let mut rc_sf = rc.clone();
    rc_sf.center_mode = CenterMode::Spacefill;
    let fitted = fit_model(&data, &rc_sf)?;
    let fit_time = t0.elapsed();
    let model = fitted.palm_stage();
    let (preds, predict_time) = palm_preds(model, &x_test)?;
    let r = MetricReport::compute(
        y,
        &preds.mean.to_vec(),
        &preds.variance.to_vec(),
        fit_time.as_secs_f64(),
        predict_time.as_secs_f64(),
    )?;
    emit.metric("palm", "spacefill", rc.k, &r);
    emit.timing("palm", "spacefill", rc.k, "fit", fit_time);
    emit.timing("palm", "spacefill", rc.k, "predict", predict_time);

    // transductive baseline: per-point experts, all cost at predict time
    baseline_transductive_lagp(&data, x_test.slice(ndarray::s![0..1, ..]), &cfg)?;
    let t0 = std::time::Instant::now();
    let lagp = baseline_transductive_lagp(&data, x_test.view(), &cfg)?;
    let lagp_time = t0.elapsed();
    let r = MetricReport::compute(
        y,
        &lagp.mean.to_vec(),
        &lagp.variance.to_vec(),
        0.0,
        lagp_time.as_secs_f64(),
    )?;
    emit.metric("lagp-transductive", "-", rc.k, &r);
    emit.timing("lagp-transductive", "-", rc.k, "predict", lagp_time);

    // third method differs: averaging smooths the noisy case; a disjoint
    // partition shows its seams on the deterministic case
    let third = if scenario == "herbie-noisy" {
        let t0 = std::time::Instant::now();
        let avg = baseline_model_average(&data, rc.k, rc.n, x_test.view(), rc.seed)?;
        let avg_time = t0.elapsed();
        let r = MetricReport::compute(
            y,
            &avg.mean.to_vec(),
            &avg.variance.to_vec(),
            0.0,
            avg_time.as_secs_f64(),
        )?;
        emit.metric("model-average", "-", rc.k, &r);
        emit.timing("model-average", "-", rc.k, "total", avg_time);
        ("model-average".to_string(), avg)
    } else {
        let cells = partition_cells_per_dim(rc.k, data.dims());
        let grid_k = cells.pow(data.dims() as u32);
        let t0 = std::time::Instant::now();
        let part = baseline_partition_gp(&data, grid_k, x_test.view())?;
        let part_time = t0.elapsed();
        let r = MetricReport::compute(
            y,
            &part.mean.to_vec(),
            &part.variance.to_vec(),
            0.0,
            part_time.as_secs_f64(),
        )?;
        emit.metric("partition-gp", "-", grid_k, &r);
        emit.timing("partition-gp", "-", grid_k, "total", part_time);
        ("partition-gp".to_string(), part)
    };

    // slice along x1 at the classic x2 cut
    let surface = rc.surface()?;
    let bounds = surface.bounds();
    let mut anchor = vec![0.0; data.dims()];
    anchor[1] = -0.104;
    let (xs, x_slice) = slice_points(&bounds, 0, &anchor, SLICE_POINTS);
    let truth = evaluate_surface(&surface, x_slice.view())?;
    let palm_slice = palm_preds(model, &x_slice)?.0;
    let lagp_slice = baseline_transductive_lagp(&data, x_slice.view(), &cfg)?;
    let third_slice = if third.0 == "model-average" {
        baseline_model_average(&data, rc.k, rc.n, x_slice.view(), rc.seed)?
    } else {
        let cells = partition_cells_per_dim(rc.k, data.dims());
        baseline_partition_gp(&data, cells.pow(data.dims() as u32), x_slice.view())?
    };
    write_slice(
        &rc.out,
        &xs,
        truth.as_slice().expect("contiguous"),
        &[
            ("palm".to_string(), palm_slice),
            ("lagp-transductive".to_string(), lagp_slice),
            (third.0, third_slice),
        ],
    )?;
    emit.write(&rc.out)
}

/// Expert-count ladder from `k_init` to `k` in steps of 5, always ending
/// exactly at `k`.
fn k_ladder(k_init: usize, k: usize) -> Vec<usize> {
    let mut ks: Vec<usize> = (k_init..=k).step_by(5).collect();
    if ks.last() != Some(&k) {
        ks.push(k);
    }
    ks
}

/// Score-vs-K comparison of space-filling and sequential center selection.
fn glee_seq(rc: &RunConfig) -> Result<()> {
    let (data, x_test, y_test) = scenario_data(rc)?;
    let mut emit = Emit::new("glee-seq", rc, data.n(), x_test.nrows());
    let cfg = rc.palm_config()?;
    let y = y_test.as_slice().expect("contiguous");

    for &k in &k_ladder(rc.k_init, rc.k) {
        // space-filling model of size k
        let mut rc_k = rc.clone();
        rc_k.k = k;
        rc_k.center_mode = CenterMode::Spacefill;
        let t0 = std::time::Instant::now();
        let sf = fit_model(&data, &rc_k)?;
        let sf_time = t0.elapsed();
        let (preds, sf_pred) = palm_preds(sf.palm_stage(), &x_test)?;
        let r = MetricReport::compute(
            y,
            &preds.mean.to_vec(),
            &preds.variance.to_vec(),
            sf_time.as_secs_f64(),
            sf_pred.as_secs_f64(),
        )?;
        emit.metric("palm", "spacefill", k, &r);
        emit.timing("palm", "spacefill", k, "fit", sf_time);
        emit.timing("palm", "spacefill", k, "predict", sf_pred);

        // sequential model grown from the same-seed k_init design
        let t0 = std::time::Instant::now();
        let (seq, _) = sequential_palm_with(&data, rc.k_init, k, &cfg, rc.m_s)?;
        let seq_time = t0.elapsed();
        let (preds, seq_pred) = palm_preds(&seq, &x_test)?;
        let r = MetricReport::compute(
            y,
            &preds.mean.to_vec(),
            &preds.variance.to_vec(),
            seq_time.as_secs_f64(),
            seq_pred.as_secs_f64(),
        )?;
        emit.metric("palm", "sequential", k, &r);
        emit.timing("palm", "sequential", k, "fit", seq_time);
        emit.timing("palm", "sequential", k, "predict", seq_pred);

        if k == rc.k {
            let surface = rc.surface()?;
            let bounds = surface.bounds();
            let anchor = vec![0.0; 2];
            let (xs, x_slice) = slice_points(&bounds, 0, &anchor, SLICE_POINTS);
            let truth = evaluate_surface(&surface, x_slice.view())?;
            let cols = vec![
                (
                    "palm-spacefill".to_string(),
                    palm_preds(sf.palm_stage(), &x_slice)?.0,
                ),
                (
                    "palm-sequential".to_string(),
                    palm_preds(&seq, &x_slice)?.0,
                ),
            ];
            write_slice(&rc.out, &xs, truth.as_slice().expect("contiguous"), &cols)?;
        }
    }
    emit.write(&rc.out)
}

/// Space-filling vs sequential selection on the 3d Michalewicz surface at
/// two expert budgets (half and full).
fn michalewicz_3d(rc: &RunConfig) -> Result<()> {
    let (data, x_test, y_test) = scenario_data(rc)?;
    let mut emit = Emit::new("michalewicz-3d", rc, data.n(), x_test.nrows());
    let cfg = rc.palm_config()?;
    let y = y_test.as_slice().expect("contiguous");

    let half = (rc.k / 2).max(rc.k_init);
    let ks = if half == rc.k {
        vec![rc.k]
    } else {
        vec![half, rc.k]
    };
    let mut slice_cols: Vec<(String, Predictions)> = Vec::new();
    for &k in &ks {
        for mode in [CenterMode::Spacefill, CenterMode::Sequential] {
            let mode_name = match mode {
                CenterMode::Spacefill => "spacefill",
                CenterMode::Sequential => "sequential",
            };
            let t0 = std::time::Instant::now();
            let model = match mode {
                CenterMode::Spacefill => {
                    let mut rc_k = rc.clone();
                    rc_k.k = k;
                    rc_k.center_mode = CenterMode::Spacefill;
                    fit_model(&data, &rc_k)?.palm_stage().clone()
                }
                CenterMode::Sequential => {
                    sequential_palm_with(&data, rc.k_init, k, &cfg, rc.m_s)?.0
                }
            };
            let fit_time = t0.elapsed();
            let (preds, predict_time) = palm_preds(&model, &x_test)?;
            let r = MetricReport::compute(
                y,
                &preds.mean.to_vec(),
                &preds.variance.to_vec(),
                fit_time.as_secs_f64(),
                predict_time.as_secs_f64(),
            )?;
            emit.metric("palm", mode_name, k, &r);
            emit.timing("palm", mode_name, k, "fit", fit_time);
            emit.timing("palm", mode_name, k, "predict", predict_time);

            if k == rc.k {
                let surface = rc.surface()?;
                let bounds = surface.bounds();
                // anchored where the surface is most active
                let anchor = vec![0.0, 1.57, 1.28];
                let (xs, x_slice) = slice_points(&bounds, 0, &anchor, SLICE_POINTS);
                let truth = evaluate_surface(&surface, x_slice.view())?;
                slice_cols.push((
                    format!("palm-{mode_name}"),
                    palm_preds(&model, &x_slice)?.0,
                ));
                if slice_cols.len() == 2 {
                    write_slice(
                        &rc.out,
                        &xs,
                        truth.as_slice().expect("contiguous"),
                        &slice_cols,
                    )?;
                }
            }
        }
    }
    emit.write(&rc.out)
}

/// Runs one named scenario; the run configuration must already have the
/// scenario's identity pinned (see [`scenario_defaults`]).
pub fn cmd_bench(rc: &RunConfig, scenario: &str) -> Result<()> {
    let mut rc = rc.clone();
    pin_identity(&mut rc, scenario)?;
    rc.validate()?;
    match scenario {
        "herbie-noisy" => herbie(&rc, "herbie-noisy"),
        "herbie-det" => herbie(&rc, "herbie-det"),
        "glee-seq" => glee_seq(&rc),
        "michalewicz-3d" => michalewicz_3d(&rc),
        _ => Err(unknown_scenario(scenario)),
    }
}
