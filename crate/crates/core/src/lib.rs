//! Instance-wise feature selection for explaining black-box classifiers.
//!
//! An explainer network scores the features of each sample (given the
//! model's output on it). Training pits two approximators against each
//! other: one predicts the model output from the selected features, the
//! other from the unselected ones. The explainer is rewarded when the first
//! succeeds and the second fails, which discourages masks that carry the
//! label in their shape instead of in the features they keep.
//!
//! The modules follow the pipeline:
//!
//! * [`net`]: small differentiable networks and optimizers
//! * [`sampler`]: Gumbel top-k relaxation and hard top-k
//! * [`explainer`]: the score network and prior fusion
//! * [`approximators`]: imputation and losses
//! * [`trainer`]: the alternating training loop and checkpoints
//! * [`metrics`]: fidelity, sensitivity, sanity, timing, and oracles
//! * [`baselines`]: gradient attributions and ablations
//! * [`data`]: synthetic generators, IDX ingestion, given-model training

pub mod approximators;
pub mod baselines;
pub mod data;
pub mod error;
pub mod explainer;
pub mod io;
pub mod metrics;
pub mod model;
pub mod net;
pub mod rng;
pub mod sampler;
pub mod trainer;
pub mod types;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/overview.md")]
    struct Overview;
    #[doc = include_str!("../../../book/src/selection.md")]
    struct Selection;
    #[doc = include_str!("../../../book/src/training.md")]
    struct Training;
    #[doc = include_str!("../../../book/src/evaluation.md")]
    struct Evaluation;
    #[doc = include_str!("../../../book/src/cli.md")]
    struct Cli;
}
