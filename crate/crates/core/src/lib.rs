//! Fault detection with second-order component analysis (SCA).
//!
//! SCA encodes every sample through its second-order expansion
//! `[1, x, x⊗x]` with a one-layer encoder `σ(Wᵀ𝔛)` and reconstructs it with
//! a decoder `W̃` constrained to orthonormal columns. The pair `(W, W̃)` is
//! fitted by geometric conjugate gradient on `St(N, p) × E(N, p)`, and the
//! resulting features are monitored with a T² statistic whose control limit
//! comes from a Gaussian kernel density estimate.
//!
//! PCA, kernel PCA, and plain and second-order autoencoders are provided as
//! baselines sharing the same monitoring machinery.

pub mod activation;
pub mod baselines;
pub mod bench;
pub mod data;
pub mod error;
pub mod linalg;
pub mod manifold;
pub mod model;
pub mod monitor;
pub mod optimizer;
pub mod process;
pub mod sca;

pub use activation::{Activation, Activations};
pub use data::{
    apply_scaler, expand_second_order, fit_scaler, load_csv, CsvLayout, DataMatrix, Delimiter,
    ExpandedMatrix, SampleAxis, Scaler,
};
pub use error::{Result, ScaError};
pub use manifold::{ProductPoint, StiefelPoint, TangentPair};
pub use model::{FittedModel, Method};
pub use monitor::{control_limit, kde_pdf, score, DetectionReport, LimitRule, T2Monitor};
pub use optimizer::{cg_optimize, CgConfig, CgTrace, ReconstructionCost, StopReason};
pub use sca::{train, ScaModel, ScaOptions};
