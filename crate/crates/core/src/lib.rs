//! Sparse training with dynamic pruning and error feedback.
//!
//! The crate bundles a small dense MLP with analytic gradients, pruning
//! criteria and schedules, a family of training strategies built on one
//! step engine, a convex test bench for the convergence rates of the
//! error-feedback iteration, and mask-dynamics instrumentation.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod convex;
pub mod data;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod pruning;
pub mod train;

pub use error::{Error, Result};

pub use checkpoint::Checkpoint;
pub use config::{ExperimentConfig, LabConfig};
pub use data::{make_blobs, make_spirals, DataSplit, Dataset};
pub use metrics::{MaskHistory, StepRecord};
pub use nn::{LayerSpec, Mlp, ParamLayout};
pub use pruning::{Mask, PruneScope, SparsitySchedule};
pub use train::{run_training, Strategy, TrainConfig, TrainOutcome, Trainer};
