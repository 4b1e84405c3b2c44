//! Save and load fitted models as small, versioned JSON documents.
//!
//! A model file records the coding map, the shared hyperparameters
//! (τ², η, p), each expert's center, lengthscales, and design indices, and
//! the inter-expert correlation matrix — everything needed to rebuild the
//! factorizations, and nothing the training corpus already contains.
//! Loading therefore requires the same corpus the model was fitted to;
//! files stay small and portable because they carry indices, not data.
//!
//! Numbers are written in shortest round-trip decimal form, so a
//! save/load cycle reproduces bit-identical predictions.

use ndarray::{Array1, Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Coding, TrainingSet};
use crate::error::{PalmError, Result};
use crate::gp::fit_gp;
use crate::kernel::{Lengthscales, Nugget};
use crate::lagp::{gather_rows, LocalExpert};
use crate::palm::{GlobalPlusPalm, PalmModel, PalmPrediction, VarianceRule};
use crate::scalar::Scalar;

/// Identifier written into every model file.
pub const FORMAT: &str = "palm-model";
/// File format version this build writes and reads.
pub const VERSION: u32 = 1;

const KIND_PALM: &str = "palm";
const KIND_TWO_STAGE: &str = "global-plus-palm";

/// Either flavor of fitted model, as read back from a file.
pub enum AnyModel<T> {
    Palm(PalmModel<T>),
    GlobalPlusPalm(GlobalPlusPalm<T>),
}

impl<T: Scalar> std::fmt::Debug for AnyModel<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "AnyModel({})", self.kind())
    }
}

impl<T: Scalar> AnyModel<T> {
    /// Predicts at a point in natural units, whichever flavor this is.
    pub fn predict(&self, x: &[T]) -> Result<PalmPrediction<T>> {
        match self {
            AnyModel::Palm(m) => m.predict(x),
            AnyModel::GlobalPlusPalm(m) => m.predict(x),
        }
    }

    /// Short kind label, matching the `kind` field of the file format.
    pub fn kind(&self) -> &'static str {
        match self {
            AnyModel::Palm(_) => KIND_PALM,
            AnyModel::GlobalPlusPalm(_) => KIND_TWO_STAGE,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    kind: String,
    /// Per-dimension (lo, hi) natural-unit bounds of the coding map.
    coding: Vec<(f64, f64)>,
    palm: PalmDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    global: Option<GlobalDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    variance_rule: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct PalmDoc {
    power: f64,
    tau2: f64,
    eta: f64,
    eta_is_jitter: bool,
    s2: f64,
    theta_max: Vec<f64>,
    rho: Vec<Vec<f64>>,
    experts: Vec<ExpertDoc>,
}

#[derive(Serialize, Deserialize)]
struct ExpertDoc {
    center: Vec<f64>,
    design_indices: Vec<usize>,
    theta: Vec<f64>,
    mse: f64,
}

#[derive(Serialize, Deserialize)]
struct GlobalDoc {
    indices: Vec<usize>,
    theta: Vec<f64>,
    tau2: f64,
    eta: f64,
    eta_is_jitter: bool,
}

fn f64s<T: Scalar>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.as_f64()).collect()
}

fn scalars<T: Scalar>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| T::of(x)).collect()
}

fn nugget_doc<T: Scalar>(n: Nugget<T>) -> (f64, bool) {
    (n.value().as_f64(), n.is_jitter())
}

fn nugget_from_doc<T: Scalar>(value: f64, is_jitter: bool) -> Result<Nugget<T>> {
    if is_jitter {
        Ok(Nugget::jitter())
    } else {
        Nugget::noise(T::of(value))
    }
}

fn palm_doc<T: Scalar>(m: &PalmModel<T>) -> PalmDoc {
    let (eta, eta_is_jitter) = nugget_doc(m.eta());
    PalmDoc {
        power: m.power_p().as_f64(),
        tau2: m.tau2().as_f64(),
        eta,
        eta_is_jitter,
        s2: m.s2().as_f64(),
        theta_max: f64s(m.theta_max().as_slice()),
        rho: m
            .rho()
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|v| v.as_f64()).collect())
            .collect(),
        experts: m
            .experts()
            .iter()
            .map(|e| ExpertDoc {
                center: f64s(e.center()),
                design_indices: e.design_indices().to_vec(),
                theta: f64s(e.fit().theta().as_slice()),
                mse: e.mse_k().as_f64(),
            })
            .collect(),
    }
}

fn coding_doc<T: Scalar>(c: &Coding<T>) -> Vec<(f64, f64)> {
    c.bounds()
        .iter()
        .map(|&(lo, hi)| (lo.as_f64(), hi.as_f64()))
        .collect()
}

/// Serializes a fitted aggregate model to the versioned JSON format.
pub fn palm_to_json<T: Scalar>(m: &PalmModel<T>) -> Result<String> {
    let file = ModelFile {
        format: FORMAT.to_string(),
        version: VERSION,
        kind: KIND_PALM.to_string(),
        coding: coding_doc(m.coding()),
        palm: palm_doc(m),
        global: None,
        variance_rule: None,
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

/// Serializes a fitted two-stage (global trend + local residual) model.
pub fn two_stage_to_json<T: Scalar>(m: &GlobalPlusPalm<T>) -> Result<String> {
    let (eta, eta_is_jitter) = nugget_doc(m.global().nugget());
    let file = ModelFile {
        format: FORMAT.to_string(),
        version: VERSION,
        kind: KIND_TWO_STAGE.to_string(),
        coding: coding_doc(m.palm().coding()),
        palm: palm_doc(m.palm()),
        global: Some(GlobalDoc {
            indices: m.global_indices().to_vec(),
            theta: f64s(m.global().theta().as_slice()),
            tau2: m.global().tau2().as_f64(),
            eta,
            eta_is_jitter,
        }),
        variance_rule: Some(
            match m.variance_rule() {
                VarianceRule::ResidualOnly => "residual-only",
                VarianceRule::Additive => "additive",
            }
            .to_string(),
        ),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

fn check_indices(indices: &[usize], n: usize, what: &str) -> Result<()> {
    if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
        return Err(PalmError::ModelFormat(format!(
            "{what} index {bad} out of range for a corpus of {n} rows"
        )));
    }
    Ok(())
}

/// Rebuilds experts and factorizations from a document against the
/// (coded design, responses) pair the model was fitted to.
fn revive_palm<T: Scalar>(
    doc: &PalmDoc,
    coding: &Coding<T>,
    coded: ArrayView2<'_, T>,
    y: &Array1<T>,
) -> Result<PalmModel<T>> {
    let k = doc.experts.len();
    if k == 0 {
        return Err(PalmError::ModelFormat("model has no experts".into()));
    }
    if doc.rho.len() != k || doc.rho.iter().any(|r| r.len() != k) {
        return Err(PalmError::ModelFormat(format!(
            "correlation matrix is not {k}x{k}"
        )));
    }
    let d = coding.dims();
    let tau2 = T::of(doc.tau2);
    let eta = nugget_from_doc(doc.eta, doc.eta_is_jitter)?;
    let experts = doc
        .experts
        .iter()
        .map(|e| {
            if e.center.len() != d || e.theta.len() != d {
                return Err(PalmError::DimensionMismatch {
                    context: "persisted expert",
                    expected: d,
                    found: e.center.len(),
                });
            }
            check_indices(&e.design_indices, coded.nrows(), "expert design")?;
            let design = gather_rows(coded, &e.design_indices);
            let responses =
                Array1::from_iter(e.design_indices.iter().map(|&i| y[i]));
            let fit = fit_gp(
                design,
                responses,
                Lengthscales::new(scalars(&e.theta))?,
                tau2,
                eta,
            )?;
            Ok(LocalExpert {
                center: scalars(&e.center),
                coding: coding.clone(),
                design_indices: e.design_indices.clone(),
                fit,
                mse_k: T::of(e.mse),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let rho = Array2::from_shape_fn((k, k), |(i, j)| T::of(doc.rho[i][j]));
    Ok(PalmModel {
        experts,
        rho,
        tau2,
        eta,
        power_p: T::of(doc.power),
        s2: T::of(doc.s2),
        coding: coding.clone(),
        theta_max: Lengthscales::new(scalars(&doc.theta_max))?,
    })
}

/// Reads a model file and rebuilds the fitted model against `data`, the
/// training corpus it was fitted to (natural units; the file's own coding
/// map is applied, so the corpus coding does not need to match).
pub fn model_from_json<T: Scalar>(json: &str, data: &TrainingSet<T>) -> Result<AnyModel<T>> {
    let file: ModelFile = serde_json::from_str(json)?;
    if file.format != FORMAT {
        return Err(PalmError::ModelFormat(format!(
            "not a {FORMAT} file (format = {:?})",
            file.format
        )));
    }
    if file.version != VERSION {
        return Err(PalmError::UnsupportedVersion {
            found: file.version,
            supported: VERSION,
        });
    }
    if file.coding.len() != data.dims() {
        return Err(PalmError::DimensionMismatch {
            context: "persisted coding map",
            expected: data.dims(),
            found: file.coding.len(),
        });
    }
    let coding = Coding::new(
        file.coding
            .iter()
            .map(|&(lo, hi)| (T::of(lo), T::of(hi)))
            .collect(),
    )?;
    let coded = coding.encode_matrix(data.natural())?;

    match file.kind.as_str() {
        KIND_PALM => {
            let palm = revive_palm(&file.palm, &coding, coded.view(), data.y())?;
            Ok(AnyModel::Palm(palm))
        }
        KIND_TWO_STAGE => {
            let doc = file.global.as_ref().ok_or_else(|| {
                PalmError::ModelFormat("two-stage file is missing its global stage".into())
            })?;
            check_indices(&doc.indices, data.n(), "global design")?;
            let design = gather_rows(coded.view(), &doc.indices);
            let responses = Array1::from_iter(doc.indices.iter().map(|&i| data.y()[i]));
            let global = fit_gp(
                design,
                responses,
                Lengthscales::new(scalars(&doc.theta))?,
                T::of(doc.tau2),
                nugget_from_doc(doc.eta, doc.eta_is_jitter)?,
            )?;
            let residuals: Vec<T> = (0..data.n())
                .into_par_iter()
                .map(|i| {
                    global
                        .predict_mean(coded.row(i).as_slice().expect("contiguous row"))
                        .map(|mu| data.y()[i] - mu)
                })
                .collect::<Result<_>>()?;
            let residuals = Array1::from_vec(residuals);
            let palm = revive_palm(&file.palm, &coding, coded.view(), &residuals)?;
            let variance_rule = match file.variance_rule.as_deref() {
                Some("residual-only") | None => VarianceRule::ResidualOnly,
                Some("additive") => VarianceRule::Additive,
                Some(other) => {
                    return Err(PalmError::ModelFormat(format!(
                        "unknown variance rule {other:?}"
                    )))
                }
            };
            Ok(AnyModel::GlobalPlusPalm(GlobalPlusPalm {
                global,
                global_indices: doc.indices.clone(),
                palm,
                variance_rule,
            }))
        }
        other => Err(PalmError::ModelFormat(format!(
            "unknown model kind {other:?}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::palm::{fit_global_plus_palm, fit_palm, PalmConfig};
    use ndarray::array;

    fn corpus() -> TrainingSet<f64> {
        let n = 120;
        let x = Array2::from_shape_fn((n, 2), |(i, j)| {
            let t = i as f64 / (n - 1) as f64;
            if j == 0 {
                6.0 * t
            } else {
                (7919.0 * t).fract() * 4.0 - 2.0
            }
        });
        let y = Array1::from_shape_fn(n, |i| (x[[i, 0]]).sin() + 0.3 * x[[i, 1]]);
        TrainingSet::new(x, y).unwrap()
    }

    fn small_cfg() -> PalmConfig<f64> {
        let mut cfg = PalmConfig::default();
        cfg.local.n = 30;
        cfg.local.n_cand = 120;
        cfg
    }

    #[test]
    fn palm_round_trip_is_bit_exact() {
        let data = corpus();
        let centers = array![[1.0, 0.0], [3.0, 0.5], [5.0, -0.5]];
        let model = fit_palm(&data, centers.view(), &small_cfg()).unwrap();
        let json = palm_to_json(&model).unwrap();
        let loaded = match model_from_json(&json, &data).unwrap() {
            AnyModel::Palm(m) => m,
            _ => panic!("expected a plain model"),
        };
        assert_eq!(loaded.k(), model.k());
        assert_eq!(loaded.tau2(), model.tau2());
        assert_eq!(loaded.eta().value(), model.eta().value());
        assert_eq!(loaded.power_p(), model.power_p());
        assert_eq!(loaded.rho(), model.rho());
        for q in [[0.7, -1.0], [3.3, 1.2], [5.9, 0.0], [40.0, 0.0]] {
            let a = model.predict(&q).unwrap();
            let b = loaded.predict(&q).unwrap();
            assert_eq!(a.mean, b.mean);
            assert_eq!(a.variance, b.variance);
            assert_eq!(a.weights, b.weights);
        }
    }

    #[test]
    fn two_stage_round_trip_is_bit_exact() {
        let data = corpus();
        let centers = array![[1.5, 0.0], [4.5, 0.0]];
        let model = fit_global_plus_palm(&data, centers.view(), 60, &small_cfg()).unwrap();
        let json = two_stage_to_json(&model).unwrap();
        let loaded = match model_from_json(&json, &data).unwrap() {
            AnyModel::GlobalPlusPalm(m) => m,
            _ => panic!("expected a two-stage model"),
        };
        assert_eq!(loaded.global_indices(), model.global_indices());
        for q in [[0.7, -1.0], [3.3, 1.2], [5.9, 0.0]] {
            let a = model.predict(&q).unwrap();
            let b = loaded.predict(&q).unwrap();
            assert_eq!(a.mean, b.mean);
            assert_eq!(a.variance, b.variance);
        }
    }

    #[test]
    fn loading_keeps_the_saved_coding_even_if_the_corpus_coding_differs() {
        let data = corpus();
        let centers = array![[1.0, 0.0], [5.0, 0.0]];
        let model = fit_palm(&data, centers.view(), &small_cfg()).unwrap();
        let json = palm_to_json(&model).unwrap();
        // identical natural data, deliberately different coding map
        let recoded = TrainingSet::with_coding(
            data.natural().to_owned(),
            data.y().clone(),
            Coding::new(vec![(-10.0, 10.0), (-10.0, 10.0)]).unwrap(),
        )
        .unwrap();
        let loaded = model_from_json(&json, &recoded).unwrap();
        let q = [2.2, 0.4];
        assert_eq!(
            loaded.predict(&q).unwrap().mean,
            model.predict(&q).unwrap().mean
        );
    }

    #[test]
    fn rejects_foreign_and_future_files() {
        let data = corpus();
        let err = model_from_json::<f64>(r#"{"format":"other","version":1,"kind":"palm","coding":[],"palm":{"power":0,"tau2":1,"eta":1e-8,"eta_is_jitter":true,"s2":1,"theta_max":[],"rho":[],"experts":[]}}"#, &data)
            .unwrap_err();
        assert!(matches!(err, PalmError::ModelFormat(_)), "{err}");

        let model = fit_palm(&data, array![[3.0, 0.0]].view(), &small_cfg()).unwrap();
        let mut json = palm_to_json(&model).unwrap();
        json = json.replace("\"version\": 1", "\"version\": 2");
        let err = model_from_json(&json, &data).unwrap_err();
        assert!(
            matches!(err, PalmError::UnsupportedVersion { found: 2, supported: 1 }),
            "{err}"
        );

        let json = palm_to_json(&model).unwrap();
        let json = json.replace("\"kind\": \"palm\"", "\"kind\": \"mystery\"");
        let err = model_from_json(&json, &data).unwrap_err();
        assert!(matches!(err, PalmError::ModelFormat(_)), "{err}");
    }

    #[test]
    fn rejects_out_of_range_design_indices() {
        let data = corpus();
        let model = fit_palm(&data, array![[3.0, 0.0]].view(), &small_cfg()).unwrap();
        let json = palm_to_json(&model).unwrap();
        let smaller = TrainingSet::new(
            data.natural().slice(ndarray::s![..40, ..]).to_owned(),
            data.y().slice(ndarray::s![..40]).to_owned(),
        )
        .unwrap();
        let err = model_from_json(&json, &smaller).unwrap_err();
        assert!(matches!(err, PalmError::ModelFormat(_)), "{err}");
    }

    #[test]
    fn saved_files_are_self_describing_and_deterministic() {
        let data = corpus();
        let model = fit_palm(&data, array![[3.0, 0.0]].view(), &small_cfg()).unwrap();
        let json = palm_to_json(&model).unwrap();
        assert!(json.contains("\"format\": \"palm-model\""));
        assert!(json.contains("\"version\": 1"));
        assert!(json.contains("\"kind\": \"palm\""));
        assert_eq!(json, palm_to_json(&model).unwrap());
    }
}
