//! Precision-aggregated local models (PALM): global Gaussian-process
//! prediction assembled from many small local GP experts.
//!
//! Each expert is a fixed-size GP built around a center by greedy
//! variance-reduction design search; experts are combined with powered
//! inverse-variance weights, and a between-expert correlation estimate
//! calibrates the aggregate so predictive variance reverts to the
//! empirical response variance far from the data. Centers are placed
//! space-fillingly or sequentially where aggregate residuals are large.
//!
//! The numeric core is generic over the floating-point scalar (see
//! [`scalar::Scalar`]); the `*64` aliases below fix `f64`, the type the
//! command-line tools use.

pub mod centers;
pub mod data;
pub mod error;
pub mod gp;
pub mod kernel;
pub mod lagp;
pub mod linalg;
pub mod optim;
pub mod palm;
pub mod persist;
pub mod scalar;

pub use error::{PalmError, Result};
pub use scalar::Scalar;

pub type Lengthscales64 = kernel::Lengthscales<f64>;
pub type Nugget64 = kernel::Nugget<f64>;
pub type Coding64 = data::Coding<f64>;
pub type TrainingSet64 = data::TrainingSet<f64>;
pub type GpFit64 = gp::GpFit<f64>;
pub type MomentPrediction64 = gp::MomentPrediction<f64>;
pub type LocalExpert64 = lagp::LocalExpert<f64>;
pub type PalmModel64 = palm::PalmModel<f64>;
pub type PalmPrediction64 = palm::PalmPrediction<f64>;
pub type GlobalPlusPalm64 = palm::GlobalPlusPalm<f64>;
pub type CenterSet64 = centers::CenterSet<f64>;
