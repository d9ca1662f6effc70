//! Boundary behaviour of sandwiched resolvents `F (H - z)^{-1} F*` for rigged
//! self-adjoint operators, and a point classifier built on top of it.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assignment;
pub mod boundary;
pub mod classify;
pub mod config;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod model;
pub mod plot;
pub mod resolvent;
pub mod resonance;
pub mod serial;
pub mod sphere;
pub mod subspace;

pub use boundary::{BoundaryPath, IndexValue, LimitVerdict};
pub use classify::{classify_point, PointVerdict, Status};
pub use config::ExperimentConfig;
pub use error::{Result, SpectralError};
pub use experiment::run_experiment;
pub use model::{make_model, ModelDescription, RiggedModel};
pub use sphere::ExtPoint;
