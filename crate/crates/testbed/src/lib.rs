//! Benchmark harness for the PALM crate: synthetic response surfaces,
//! deterministic training/test designs, prediction-quality metrics, CSV
//! dataset I/O, and the reference baselines PALM is compared against
//! (transductive local GPs, a partitioned GP, and naive model averaging).
//!
//! Everything here is concrete `f64`; the harness exists to exercise the
//! generic core, not to be generic itself.

pub mod baselines;
pub mod design;
pub mod io;
pub mod metrics;
pub mod surfaces;

pub use baselines::{
    baseline_model_average, baseline_partition_gp, baseline_transductive_lagp, predict_rows,
    Predictions,
};
pub use design::{add_noise, evaluate_surface, grid_design, offset_grid};
pub use io::{read_dataset_csv, read_inputs_csv, write_dataset_csv};
pub use metrics::{coverage, inverse_normal_cdf, mae, rmse, score, MetricReport};
pub use surfaces::Surface;
