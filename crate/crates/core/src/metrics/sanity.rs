//! Randomization tests: explanations of a trained explainer should change
//! when the model or its training labels are scrambled.

use ndarray::ArrayView2;
use rand::seq::{index::sample, SliceRandom};

use super::fidelity::hard_masks;
use crate::data::{train_given_model, Dataset, GivenModelSpec};
use crate::error::{Error, Result};
use crate::explainer::FeatureScorer;
use crate::model::BlackBoxModel;
use crate::rng::Rng;
use crate::trainer::{train, TrainConfig};
use crate::types::{SampleSet, SelectionSet};

/// Whether model randomization reuses the trained explainer or retrains one
/// against the randomized model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SanityMode {
    #[default]
    Reuse,
    Retrain,
}

impl SanityMode {
    pub fn name(&self) -> &'static str {
        match self {
            SanityMode::Reuse => "reuse",
            SanityMode::Retrain => "retrain",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        match s {
            "reuse" => Ok(SanityMode::Reuse),
            "retrain" => Ok(SanityMode::Retrain),
            other => Err(Error::config(format!("unknown sanity mode {other:?}"))),
        }
    }
}

/// `100 * mean cosine` between paired binary masks.
pub fn mask_cosine(a: &[SelectionSet], b: &[SelectionSet]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape("mask sets", a.len(), b.len()));
    }
    if a.is_empty() {
        return Ok(100.0);
    }
    let total: f64 = a
        .iter()
        .zip(b)
        .map(|(s, t)| {
            let common = s.indices().iter().filter(|&&j| t.contains(j)).count() as f64;
            common / ((s.k() * t.k()) as f64).sqrt()
        })
        .sum();
    Ok(100.0 * total / a.len() as f64)
}

/// Cosine between `n` pairs of independent uniform `k`-of-`d` masks.
pub fn random_mask_cosine(d: usize, k: usize, n: usize, rng: &mut Rng) -> Result<f64> {
    let draw = |rng: &mut Rng| -> Result<Vec<SelectionSet>> {
        (0..n)
            .map(|_| SelectionSet::new(sample(rng, d, k).into_vec(), d))
            .collect()
    };
    let a = draw(rng)?;
    let b = draw(rng)?;
    mask_cosine(&a, &b)
}

/// Re-draws the model's parameters, feeds its outputs to the same trained
/// explainer, and compares masks with the original ones.
pub fn sanity_model_randomization(
    scorer: &dyn FeatureScorer,
    model: &dyn BlackBoxModel,
    samples: &SampleSet,
    k: usize,
    rng: &mut Rng,
) -> Result<f64> {
    let original = hard_masks(scorer, samples, k)?;
    let random = model.randomized(rng)?;
    let y = random.evaluate_batch(samples.features())?;
    let scrambled = SampleSet::new(samples.ids.clone(), samples.x.clone(), y)?;
    mask_cosine(&original, &hard_masks(scorer, &scrambled, k)?)
}

/// Re-draws the model's parameters, retrains an explainer from scratch
/// against the randomized model's outputs on `train`, and compares its masks
/// on `eval` with `original`.
pub fn sanity_model_retrain(
    model: &dyn BlackBoxModel,
    train_x: ArrayView2<'_, f64>,
    eval: &SampleSet,
    config: &TrainConfig,
    original: &[SelectionSet],
    rng: &mut Rng,
) -> Result<f64> {
    let random = model.randomized(rng)?;
    let ids: Vec<String> = (0..train_x.nrows()).map(|i| i.to_string()).collect();
    let y = random.evaluate_batch(train_x)?;
    let samples = SampleSet::new(ids, train_x.to_owned(), y)?;
    let outcome = train(&samples, Some(random.as_ref()), config)?;
    let y_eval = random.evaluate_batch(eval.features())?;
    let scrambled = SampleSet::new(eval.ids.clone(), eval.x.clone(), y_eval)?;
    let masks = hard_masks(&outcome.trainer.explainer, &scrambled, config.k)?;
    mask_cosine(original, &masks)
}

/// Retrains the model on permuted labels and the explainer from scratch
/// against it, then compares masks on `eval` with `original`.
pub fn sanity_data_randomization(
    train_set: &Dataset,
    eval: &Dataset,
    given: &GivenModelSpec,
    config: &TrainConfig,
    original: &[SelectionSet],
    rng: &mut Rng,
) -> Result<f64> {
    let mut permuted = train_set.clone();
    permuted.labels.shuffle(rng);
    let (model, _) = train_given_model(&permuted, eval, given)?;
    let samples = permuted.annotate(&model)?;
    let outcome = train(&samples, Some(&model), config)?;
    let eval_samples = eval.annotate(&model)?;
    let masks = hard_masks(&outcome.trainer.explainer, &eval_samples, config.k)?;
    mask_cosine(original, &masks)
}
