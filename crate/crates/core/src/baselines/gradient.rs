//! Gradient-based attributions: absolute gradient ("Grad") and absolute
//! gradient times input ("GI"), each normalized by its sum.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::explainer::{FeatureScorer, PriorMethod};
use crate::model::{finite_difference_gradient, BlackBoxModel};
use crate::types::{argmax, ScoreVector};

/// Finite-difference step as a fraction of each feature's range.
pub const FD_RELATIVE_STEP: f64 = 1e-4;

fn normalize_rows(mut w: Array2<f64>) -> Array2<f64> {
    let d = w.ncols();
    for mut row in w.rows_mut() {
        let total: f64 = row.sum();
        if total > 0.0 && total.is_finite() {
            row /= total;
        } else {
            log::warn!("attribution vanished for a sample; falling back to uniform scores");
            row.fill(1.0 / d as f64);
        }
    }
    w
}

/// Row-wise `∂ M(x)[class] / ∂ x`, exact when the model supports it and
/// central finite differences with steps `FD_RELATIVE_STEP * ranges`
/// otherwise.
pub fn class_gradients(
    model: &dyn BlackBoxModel,
    x: ArrayView2<'_, f64>,
    classes: &[usize],
    ranges: Option<&[f64]>,
) -> Result<Array2<f64>> {
    if classes.len() != x.nrows() {
        return Err(Error::shape("class indices", x.nrows(), classes.len()));
    }
    if let Some(g) = model.class_gradient_batch(x, classes) {
        return g;
    }
    let d = x.ncols();
    let steps: Vec<f64> = match ranges {
        Some(r) => r
            .iter()
            .map(|&v| FD_RELATIVE_STEP * if v > 0.0 { v } else { 1.0 })
            .collect(),
        None => vec![FD_RELATIVE_STEP; d],
    };
    let mut out = Array2::zeros(x.dim());
    for (i, row) in x.rows().into_iter().enumerate() {
        let g = finite_difference_gradient(model, &row.to_vec(), classes[i], &steps)?;
        out.row_mut(i).assign(&ndarray::Array1::from(g));
    }
    Ok(out)
}

/// Attribution scores for a batch, using the predicted class of each row
/// (`argmax y`).
pub fn attribution_batch(
    model: &dyn BlackBoxModel,
    method: PriorMethod,
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    ranges: Option<&[f64]>,
) -> Result<Array2<f64>> {
    let classes: Vec<usize> = y.rows().into_iter().map(argmax).collect();
    let g = class_gradients(model, x, &classes, ranges)?;
    let raw = match method {
        PriorMethod::Grad => g.mapv(f64::abs),
        PriorMethod::GradientTimesInput => (&g * &x).mapv(f64::abs),
        PriorMethod::None => return Err(Error::config("no attribution method selected")),
    };
    Ok(normalize_rows(raw))
}

fn single(model: &dyn BlackBoxModel, method: PriorMethod, x: &[f64], class: Option<usize>) -> Result<ScoreVector> {
    let xs = ArrayView2::from_shape((1, x.len()), x)
        .map_err(|_| Error::shape("attribution input", model.input_dim(), x.len()))?;
    let class = match class {
        Some(c) => c,
        None => argmax(model.evaluate_batch(xs)?.row(0)),
    };
    let g = class_gradients(model, xs, &[class], None)?;
    let raw = match method {
        PriorMethod::Grad => g.mapv(f64::abs),
        _ => (&g * &xs).mapv(f64::abs),
    };
    ScoreVector::new(normalize_rows(raw).row(0).to_vec())
}

/// Absolute gradient of the chosen class (default: predicted class),
/// normalized to sum to one.
pub fn grad_scores(model: &dyn BlackBoxModel, x: &[f64], class: Option<usize>) -> Result<ScoreVector> {
    single(model, PriorMethod::Grad, x, class)
}

/// Absolute gradient times input, normalized to sum to one.
pub fn gradient_times_input_scores(model: &dyn BlackBoxModel, x: &[f64], class: Option<usize>) -> Result<ScoreVector> {
    single(model, PriorMethod::GradientTimesInput, x, class)
}

/// A gradient attribution method wrapped as a [`FeatureScorer`].
pub struct GradientScorer<'a> {
    pub model: &'a dyn BlackBoxModel,
    pub method: PriorMethod,
    pub ranges: Option<Vec<f64>>,
}

impl FeatureScorer for GradientScorer<'_> {
    fn n_features(&self) -> usize {
        self.model.input_dim()
    }

    fn score_batch(&self, x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        attribution_batch(self.model, self.method, x, y, self.ranges.as_deref())
    }
}
