//! Unsupervised identification of actions in two-arm ring-transfer execution
//! traces: changepoint segmentation driven by kinematics and filtered by
//! scene fluents, mixed kinematic/Boolean segment features, k-NN retrieval,
//! evaluation metrics, and a synthetic trace generator.

pub mod config;
pub mod error;
pub mod eval;
pub mod features;
pub mod fluent;
pub mod io;
pub mod knn;
pub mod segment;
pub mod synth;
pub mod trace;

pub use config::{KChoice, MatchingMode, PipelineConfig};
pub use error::{Error, Result};
