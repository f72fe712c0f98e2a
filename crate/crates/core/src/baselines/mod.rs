//! Reference explainers and ablations of the full method.

mod ablation;
mod gradient;

pub use ablation::{run_ablation, AblationVariant};
pub use gradient::*;
