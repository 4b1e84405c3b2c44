//! The gen / fit / predict commands: dataset generation, model fitting
//! with persistence, and batch prediction from saved models.

use std::path::Path;
use std::time::{Duration, Instant};

use ndarray::Array2;

use palm::centers::{maximin_centers, sequential_palm_with, CenterSet};
use palm::data::TrainingSet;
use palm::palm::{fit_global_plus_palm, fit_palm};
use palm::persist::{model_from_json, palm_to_json, two_stage_to_json, AnyModel};
use palm::{PalmError, PalmModel64, Result};
use palm_testbed::{
    add_noise, evaluate_surface, grid_design, offset_grid, predict_rows, read_dataset_csv,
    read_inputs_csv, write_dataset_csv,
};

use crate::artifacts::{atomic_write, secs3};
use crate::config::{CenterMode, RunConfig};

/// Decodes a coded center set into natural units against `data`'s coding.
fn decode_centers(data: &TrainingSet<f64>, centers: &CenterSet<f64>) -> Result<Array2<f64>> {
    let coded = centers.matrix();
    let mut nat = Array2::zeros(coded.dim());
    for (i, row) in coded.rows().into_iter().enumerate() {
        let dec = data.coding().decode(row.as_slice().expect("contiguous row"))?;
        for (j, v) in dec.into_iter().enumerate() {
            nat[[i, j]] = v;
        }
    }
    Ok(nat)
}

/// A fitted model of either flavor, with its center-selection history.
pub enum Fitted {
    Palm(PalmModel64, CenterSet<f64>),
    TwoStage(palm::GlobalPlusPalm64, CenterSet<f64>),
}

impl Fitted {
    /// The aggregation stage (the whole model, or the residual stage of a
    /// two-stage fit).
    pub fn palm_stage(&self) -> &PalmModel64 {
        match self {
            Fitted::Palm(m, _) => m,
            Fitted::TwoStage(m, _) => m.palm(),
        }
    }

    /// Center-selection history: how each expert's location was chosen.
    pub fn centers(&self) -> &CenterSet<f64> {
        match self {
            Fitted::Palm(_, c) => c,
            Fitted::TwoStage(_, c) => c,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        match self {
            Fitted::Palm(m, _) => palm_to_json(m),
            Fitted::TwoStage(m, _) => two_stage_to_json(m),
        }
    }
}

/// Fits the model a run configuration describes against `data`.
pub fn fit_model(data: &TrainingSet<f64>, rc: &RunConfig) -> Result<Fitted> {
    let cfg = rc.palm_config()?;
    match rc.center_mode {
        CenterMode::Spacefill => {
            let centers = maximin_centers::<f64>(rc.k, data.dims(), true, cfg.seed)?;
            let natural = decode_centers(data, &centers)?;
            if rc.two_stage {
                let m = fit_global_plus_palm(data, natural.view(), rc.m_global, &cfg)?;
                Ok(Fitted::TwoStage(m, centers))
            } else {
                let m = fit_palm(data, natural.view(), &cfg)?;
                Ok(Fitted::Palm(m, centers))
            }
        }
        CenterMode::Sequential => {
            if rc.two_stage {
                return Err(PalmError::InvalidArgument(
                    "sequential center selection is not available for two-stage fits".into(),
                ));
            }
            let (m, centers) = sequential_palm_with(data, rc.k_init, rc.k, &cfg, rc.m_s)?;
            Ok(Fitted::Palm(m, centers))
        }
    }
}

/// [`write_dataset_csv`] against a temporary path, renamed into place on
/// success so interrupted runs leave no partial dataset.
fn atomic_dataset(
    path: &Path,
    x: ndarray::ArrayView2<f64>,
    y: ndarray::ArrayView1<f64>,
) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
    }
    let tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or(Path::new(".")))?;
    write_dataset_csv(tmp.path(), x, y)?;
    tmp.persist(path).map_err(|e| PalmError::Io(e.error))?;
    Ok(())
}

/// `gen`: writes `train.csv` (noisy responses) and `test.csv` (noise-free
/// responses on the offset grid) into the output directory.
pub fn cmd_gen(rc: &RunConfig) -> Result<()> {
    let surface = rc.surface()?;
    let bounds = surface.bounds();

    let x_train = grid_design(rc.train_ppd, &bounds)?;
    let y_true = evaluate_surface(&surface, x_train.view())?;
    let y_train = add_noise(y_true.view(), rc.noise_sd, rc.seed)?;

    let x_test = offset_grid(rc.test_ppd, &bounds)?;
    let y_test = evaluate_surface(&surface, x_test.view())?;

    let train_path = rc.out.join("train.csv");
    let test_path = rc.out.join("test.csv");
    atomic_dataset(&train_path, x_train.view(), y_train.view())?;
    atomic_dataset(&test_path, x_test.view(), y_test.view())?;
    println!(
        "wrote {} ({} rows) and {} ({} rows)",
        train_path.display(),
        x_train.nrows(),
        test_path.display(),
        x_test.nrows()
    );
    Ok(())
}

/// `fit`: fits the configured model to a training CSV, then writes
/// `model.json` and a one-row `fit.csv` of fit metadata.
pub fn cmd_fit(rc: &RunConfig, train: &Path) -> Result<()> {
    let (x, y) = read_dataset_csv(train)?;
    let data = TrainingSet::new(x, y)?;

    let t0 = Instant::now();
    let fitted = fit_model(&data, rc)?;
    let fit_time = t0.elapsed();

    let model_path = rc.out.join("model.json");
    atomic_write(&model_path, fitted.to_json()?.as_bytes())?;

    let stage = fitted.palm_stage();
    let fit_csv = format!(
        "k,n,tau2,eta,p,fit_seconds\n{},{},{},{},{},{}\n",
        stage.k(),
        data.n(),
        stage.tau2(),
        stage.eta().value(),
        stage.power_p(),
        secs3(fit_time),
    );
    atomic_write(&rc.out.join("fit.csv"), fit_csv.as_bytes())?;
    let sequential_adds = fitted
        .centers()
        .modes()
        .iter()
        .filter(|m| matches!(m, palm::centers::SelectionMode::Sequential))
        .count();
    println!(
        "fitted {} experts ({} space-filling, {} sequential) on {} rows in {} s -> {}",
        stage.k(),
        stage.k() - sequential_adds,
        sequential_adds,
        data.n(),
        secs3(fit_time),
        model_path.display()
    );
    Ok(())
}

/// Predicts every row of `x` with warm-up excluded from the timing: the
/// first row is evaluated once before the clock starts.
pub fn timed_predictions<F>(x: &Array2<f64>, f: F) -> Result<(palm_testbed::Predictions, Duration)>
where
    F: Fn(&[f64]) -> Result<(f64, f64)> + Sync,
{
    if x.nrows() > 0 {
        f(x.row(0).as_slice().expect("contiguous row"))?;
    }
    let t0 = Instant::now();
    let preds = predict_rows(x.view(), f)?;
    Ok((preds, t0.elapsed()))
}

/// `predict`: loads a saved model against its training corpus and writes
/// `predictions.csv` (`x1..xd,mean,variance`, input row order preserved).
pub fn cmd_predict(rc: &RunConfig, model: &Path, train: &Path, inputs: &Path) -> Result<()> {
    let (x, y) = read_dataset_csv(train)?;
    let data = TrainingSet::new(x, y)?;
    let json = std::fs::read_to_string(model)?;
    let loaded = model_from_json::<f64>(&json, &data)?;

    let x_new = read_inputs_csv(inputs)?;
    if x_new.ncols() != data.dims() {
        return Err(PalmError::DimensionMismatch {
            context: "prediction inputs",
            expected: data.dims(),
            found: x_new.ncols(),
        });
    }
    let (preds, wall) = timed_predictions(&x_new, |row| {
        let p = match &loaded {
            AnyModel::Palm(m) => m.predict(row)?,
            AnyModel::GlobalPlusPalm(m) => m.predict(row)?,
        };
        Ok((p.mean, p.variance))
    })?;

    let mut out = String::new();
    for j in 0..data.dims() {
        out.push_str(&format!("x{},", j + 1));
    }
    out.push_str("mean,variance\n");
    for i in 0..x_new.nrows() {
        for j in 0..data.dims() {
            out.push_str(&format!("{},", x_new[[i, j]]));
        }
        out.push_str(&format!("{},{}\n", preds.mean[i], preds.variance[i]));
    }
    let path = rc.out.join("predictions.csv");
    atomic_write(&path, out.as_bytes())?;
    println!(
        "predicted {} rows in {} s -> {}",
        x_new.nrows(),
        secs3(wall),
        path.display()
    );
    Ok(())
}
