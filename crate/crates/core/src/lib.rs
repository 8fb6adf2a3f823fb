//! Zero-shot sequential generation of parametric engineering designs.
//!
//! Designs are produced one parameter at a time by an in-context regressor
//! that is refitted at every step on the reference set: performances plus the
//! parameters generated so far predict the next parameter. The same machinery
//! completes partially known designs (inpainting).
//!
//! Modules:
//! - [`data`]: schemas, CSV loading, airfoil resampling, splitting, normalization
//! - [`regressor`]: kernel / k-NN / remote in-context regressors
//! - [`generator`]: the sequential generation loop, ordering and noise
//! - [`metrics`]: MAPE, MAE, R², PRD curves and MMD
//! - [`bridge`]: HTTP client (and loopback stub) for the remote regressor
//! - [`experiments`]: config-driven studies, CSV results and SVG plots

pub mod bridge;
pub mod data;
pub mod experiments;
pub mod generator;
pub mod metrics;
pub mod regressor;
