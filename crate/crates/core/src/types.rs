//! Domain types shared across the crate.

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// Tolerance for a vector to count as a point on the probability simplex.
pub const SIMPLEX_TOL: f64 = 1e-6;

/// Returns `true` when every entry is non-negative and the entries sum to one
/// within [`SIMPLEX_TOL`].
pub fn is_simplex(v: &[f64]) -> bool {
    !v.is_empty() && v.iter().all(|&p| p >= 0.0 && p.is_finite()) && (v.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOL
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(v: ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    for (j, &p) in v.iter().enumerate() {
        if p > v[best] {
            best = j;
        }
    }
    best
}

/// One instance to explain: features, the model's output on them, and
/// (for evaluation only) the ground-truth label.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub true_label: Option<usize>,
}

impl Sample {
    pub fn new(id: impl Into<String>, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.is_empty() || y.is_empty() {
            return Err(Error::shape(
                "sample",
                "non-empty x and y",
                format!("{}/{}", x.len(), y.len()),
            ));
        }
        Ok(Self {
            id: id.into(),
            x,
            y,
            true_label: None,
        })
    }

    pub fn with_true_label(mut self, label: usize) -> Self {
        self.true_label = Some(label);
        self
    }

    /// For classifiers `y` must be a distribution over classes.
    pub fn validate_classification(&self) -> Result<()> {
        if !is_simplex(&self.y) {
            return Err(Error::config(format!(
                "sample {}: model output is not a distribution",
                self.id
            )));
        }
        if let Some(t) = self.true_label {
            if t >= self.y.len() {
                return Err(Error::config(format!("sample {}: label {t} out of range", self.id)));
            }
        }
        Ok(())
    }
}

/// A batch of samples with cached model outputs, stored row-major so the
/// networks can consume it without copying.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub ids: Vec<String>,
    pub x: Array2<f64>,
    pub y: Array2<f64>,
    /// Ground truth, read only by evaluation code.
    pub true_labels: Option<Vec<usize>>,
}

impl SampleSet {
    pub fn new(ids: Vec<String>, x: Array2<f64>, y: Array2<f64>) -> Result<Self> {
        if ids.len() != x.nrows() || x.nrows() != y.nrows() {
            return Err(Error::shape(
                "sample set",
                format!("{} rows", ids.len()),
                format!("x {} rows, y {} rows", x.nrows(), y.nrows()),
            ));
        }
        if x.ncols() == 0 || y.ncols() == 0 {
            return Err(Error::shape(
                "sample set",
                "d > 0 and c > 0",
                format!("d={} c={}", x.ncols(), y.ncols()),
            ));
        }
        Ok(Self {
            ids,
            x,
            y,
            true_labels: None,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.y.ncols()
    }

    pub fn sample(&self, i: usize) -> Sample {
        Sample {
            id: self.ids[i].clone(),
            x: self.x.row(i).to_vec(),
            y: self.y.row(i).to_vec(),
            true_label: self.true_labels.as_ref().map(|t| t[i]),
        }
    }

    /// Class index predicted by the model for each sample.
    pub fn predicted_classes(&self) -> Vec<usize> {
        self.y.rows().into_iter().map(argmax).collect()
    }

    /// Rows `indices` in the given order.
    pub fn select(&self, indices: &[usize]) -> SampleSet {
        SampleSet {
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
            x: self.x.select(ndarray::Axis(0), indices),
            y: self.y.select(ndarray::Axis(0), indices),
            true_labels: self
                .true_labels
                .as_ref()
                .map(|t| indices.iter().map(|&i| t[i]).collect()),
        }
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.x.view()
    }

    pub fn outputs(&self) -> ArrayView2<'_, f64> {
        self.y.view()
    }
}

/// Per-feature importance distribution produced by an explainer.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector(Vec<f64>);

impl ScoreVector {
    pub fn new(z: Vec<f64>) -> Result<Self> {
        if !is_simplex(&z) {
            return Err(Error::config("score vector must lie on the simplex"));
        }
        Ok(Self(z))
    }

    /// Normalizes non-negative weights by their sum. An all-zero input maps
    /// to the uniform distribution.
    pub fn from_weights(w: &[f64]) -> Result<Self> {
        if w.is_empty() || w.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::config("score weights must be finite and non-negative"));
        }
        let total: f64 = w.iter().sum();
        if total <= 0.0 {
            let d = w.len();
            return Ok(Self(vec![1.0 / d as f64; d]));
        }
        Ok(Self(w.iter().map(|v| v / total).collect()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Differentiable, approximately k-hot mask.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedMask {
    pub v: Vec<f64>,
    pub k: usize,
    pub tau: f64,
}

/// `k` hard-selected feature indices out of `d`, kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SelectionSet {
    indices: Vec<usize>,
    d: usize,
}

impl SelectionSet {
    pub fn new(mut indices: Vec<usize>, d: usize) -> Result<Self> {
        indices.sort_unstable();
        let k = indices.len();
        if k == 0 || k > d {
            return Err(Error::config(format!("selection size {k} must be in [1, {d}]")));
        }
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::config("selection indices must be distinct"));
        }
        if indices[k - 1] >= d {
            return Err(Error::config(format!(
                "selection index {} out of range for d={d}",
                indices[k - 1]
            )));
        }
        Ok(Self { indices, d })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn k(&self) -> usize {
        self.indices.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn contains(&self, j: usize) -> bool {
        self.indices.binary_search(&j).is_ok()
    }

    pub fn complement(&self) -> Vec<usize> {
        (0..self.d).filter(|&j| !self.contains(j)).collect()
    }

    /// Binary indicator vector of length `d`.
    pub fn to_mask(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.d];
        for &j in &self.indices {
            m[j] = 1.0;
        }
        m
    }
}
