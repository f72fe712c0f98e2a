use std::time::Instant;

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng as _;

use crate::approximators::{fit_cross_entropy, selection_matrix, ApproximatorPair, FitOptions};
use crate::error::{Error, Result};
use crate::explainer::FeatureScorer;
use crate::model::BlackBoxModel;
use crate::net::Net;
use crate::rng::Rng;
use crate::sampler::{hard_topk_batch, topk_indices};
use crate::types::{argmax, SampleSet, SelectionSet};

/// Hard top-`k` selections of `scorer` on every sample.
pub fn hard_masks(scorer: &dyn FeatureScorer, samples: &SampleSet, k: usize) -> Result<Vec<SelectionSet>> {
    let z = scorer.score_batch(samples.features(), samples.outputs())?;
    hard_topk_batch(z.view(), k)
}

/// `x` with unselected (or, with `keep_selected = false`, selected)
/// features set to zero.
pub fn impute_hard(x: ArrayView2<'_, f64>, sets: &[SelectionSet], keep_selected: bool) -> Array2<f64> {
    let mask = selection_matrix(sets, x.ncols());
    if keep_selected {
        &x * &mask
    } else {
        &x * &mask.mapv(|m| 1.0 - m)
    }
}

fn agreement(pred: ArrayView2<'_, f64>, reference: &[usize]) -> f64 {
    if reference.is_empty() {
        return 0.0;
    }
    let hits = pred
        .rows()
        .into_iter()
        .zip(reference)
        .filter(|(row, &c)| argmax(row.view()) == c)
        .count();
    100.0 * hits as f64 / reference.len() as f64
}

/// Percentage of samples where the model's class on the imputed input
/// equals its class on the full input (FS-M, or FU-M for the complement).
pub fn fidelity_model(
    model: &dyn BlackBoxModel,
    samples: &SampleSet,
    sets: &[SelectionSet],
    keep_selected: bool,
) -> Result<f64> {
    if sets.len() != samples.len() {
        return Err(Error::shape("selections", samples.len(), sets.len()));
    }
    let xt = impute_hard(samples.features(), sets, keep_selected);
    let pred = model.evaluate_batch(xt.view())?;
    Ok(agreement(pred.view(), &samples.predicted_classes()))
}

/// Trains a fresh approximator for `budget.epochs` epochs on imputed
/// training inputs against cached outputs, then reports its agreement with
/// the model on the evaluation set (FS-A, or FU-A for the complement).
#[allow(clippy::too_many_arguments)]
pub fn fidelity_approx(
    train: &SampleSet,
    train_sets: &[SelectionSet],
    eval: &SampleSet,
    eval_sets: &[SelectionSet],
    keep_selected: bool,
    hidden: &[usize],
    budget: FitOptions,
    rng: &mut Rng,
) -> Result<f64> {
    let arch = ApproximatorPair::architecture(train.n_features(), train.n_classes(), hidden);
    let mut net = Net::new(&arch, rng)?;
    let xt = impute_hard(train.features(), train_sets, keep_selected);
    fit_cross_entropy(&mut net, xt.view(), train.outputs(), budget, rng)?;
    let xe = impute_hard(eval.features(), eval_sets, keep_selected);
    let pred = net.predict(&[xe.view()])?;
    Ok(agreement(pred.view(), &eval.predicted_classes()))
}

/// Mean over samples of the worst relative change of the score vector under
/// `n_perturb` uniform perturbations with `|delta_j| <= radius[j]`, times 100.
pub fn sensitivity(
    scorer: &dyn FeatureScorer,
    model: &dyn BlackBoxModel,
    samples: &SampleSet,
    radius: &[f64],
    n_perturb: usize,
    rng: &mut Rng,
) -> Result<f64> {
    let d = samples.n_features();
    if radius.len() != d {
        return Err(Error::shape("sensitivity radius", d, radius.len()));
    }
    if n_perturb == 0 {
        return Err(Error::config("sensitivity needs at least one perturbation"));
    }
    if samples.is_empty() {
        return Ok(0.0);
    }
    let base = scorer.score_batch(samples.features(), samples.outputs())?;
    let mut total = 0.0;
    for i in 0..samples.len() {
        let x = samples.x.row(i);
        let mut xp = Array2::zeros((n_perturb, d));
        for mut row in xp.rows_mut() {
            for j in 0..d {
                let r = radius[j];
                row[j] = x[j] + if r > 0.0 { rng.random_range(-r..=r) } else { 0.0 };
            }
        }
        let yp = model.evaluate_batch(xp.view())?;
        let zp = scorer.score_batch(xp.view(), yp.view())?;
        let z0 = base.row(i);
        let norm = z0.dot(&z0).sqrt();
        let worst = zp
            .rows()
            .into_iter()
            .map(|z| {
                let diff: Array1<f64> = &z - &z0;
                diff.dot(&diff).sqrt() / norm
            })
            .fold(0.0, f64::max);
        total += worst;
    }
    Ok(100.0 * total / samples.len() as f64)
}

/// Mean seconds per single-sample explanation (model call, scoring, and
/// top-k), over at least `min_samples` calls after one warm-up call.
pub fn time_per_sample(
    scorer: &dyn FeatureScorer,
    model: &dyn BlackBoxModel,
    samples: &SampleSet,
    k: usize,
    min_samples: usize,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::config("timing needs at least one sample"));
    }
    let explain = |i: usize| -> Result<SelectionSet> {
        let x = samples.x.slice(ndarray::s![i..i + 1, ..]);
        let y = model.evaluate_batch(x)?;
        let z = scorer.score_batch(x, y.view())?;
        topk_indices(z.row(0).as_slice().expect("row-major scores"), k)
    };
    explain(0)?;
    let n = min_samples.max(1);
    let start = Instant::now();
    for t in 0..n {
        std::hint::black_box(explain(t % samples.len())?);
    }
    Ok((start.elapsed().as_secs_f64() / n as f64).max(f64::MIN_POSITIVE))
}
