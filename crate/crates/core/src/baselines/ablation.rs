use crate::error::{Error, Result};
use crate::explainer::PriorMethod;
use crate::metrics::{evaluate, EvalOptions, MetricsReport};
use crate::model::BlackBoxModel;
use crate::trainer::{train, TrainConfig, TrainOutcome};
use crate::types::SampleSet;

/// The full method and the three single-component removals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AblationVariant {
    Full,
    /// The explainer does not see the model output.
    WithoutOutput,
    /// No unselected-feature approximator (`lambda_u = 0`).
    WithoutAil,
    /// No prior warm start.
    WithoutPrior,
}

impl AblationVariant {
    pub const ALL: [AblationVariant; 4] = [
        AblationVariant::Full,
        AblationVariant::WithoutOutput,
        AblationVariant::WithoutAil,
        AblationVariant::WithoutPrior,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            AblationVariant::Full => "full",
            AblationVariant::WithoutOutput => "wo-output",
            AblationVariant::WithoutAil => "wo-ail",
            AblationVariant::WithoutPrior => "wo-prior",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::config(format!("unknown ablation variant {s:?}")))
    }

    /// `base` with exactly this variant's component switched off.
    pub fn apply(&self, base: &TrainConfig) -> TrainConfig {
        let mut c = base.clone();
        match self {
            AblationVariant::Full => {}
            AblationVariant::WithoutOutput => c.use_output_feedback = false,
            AblationVariant::WithoutAil => c.lambda_u = 0.0,
            AblationVariant::WithoutPrior => {
                c.prior_method = PriorMethod::None;
                c.lambda_e = 0.0;
            }
        }
        c
    }
}

/// Trains the variant on `train` and evaluates it on `eval` with the shared
/// harness. Every variant uses the same seeds.
pub fn run_ablation(
    variant: AblationVariant,
    train_set: &SampleSet,
    eval: &SampleSet,
    model: &dyn BlackBoxModel,
    base: &TrainConfig,
    opts: &EvalOptions,
) -> Result<(MetricsReport, TrainOutcome)> {
    let config = variant.apply(base);
    let outcome = train(train_set, Some(model), &config)?;
    let report = evaluate(&outcome.trainer.explainer, model, train_set, eval, opts)?;
    Ok((report, outcome))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainer::TrainConfig;

    fn diff(a: &TrainConfig, b: &TrainConfig) -> Vec<String> {
        let (ta, tb) = (a.to_canonical_text(), b.to_canonical_text());
        ta.lines()
            .zip(tb.lines())
            .filter(|(x, y)| x != y)
            .map(|(x, _)| x.split('=').next().unwrap().to_string())
            .collect()
    }

    #[test]
    fn variants_change_exactly_their_field() {
        let base = TrainConfig {
            prior_method: PriorMethod::GradientTimesInput,
            lambda_e: 1e-3,
            ..TrainConfig::default()
        };
        assert!(diff(&base, &AblationVariant::Full.apply(&base)).is_empty());
        assert_eq!(
            diff(&base, &AblationVariant::WithoutOutput.apply(&base)),
            ["use_output_feedback"]
        );
        assert_eq!(diff(&base, &AblationVariant::WithoutAil.apply(&base)), ["lambda_u"]);
        assert_eq!(
            diff(&base, &AblationVariant::WithoutPrior.apply(&base)),
            ["lambda_e", "prior_method"]
        );
        for v in AblationVariant::ALL {
            assert_eq!(AblationVariant::from_name(v.name()).unwrap(), v);
        }
    }
}
