//! Datasets with ground-truth labels: synthetic generators with planted
//! feature subsets, IDX image ingestion, and training of the model to be
//! explained.

mod given;
mod idx;
mod synthetic;

use std::fmt::Write as _;
use std::hash::Hasher;
use std::path::Path;

use ndarray::{Array2, Axis};

pub use given::{accuracy, train_given_model, GivenModelSpec};
pub use idx::{load_idx_images, mnist_pair, IdxImages, IdxLabels, IMAGE_MAGIC, LABEL_MAGIC};
pub use synthetic::{generate_synthetic, SyntheticKind, SyntheticSpec};

use crate::error::{Error, Result};
use crate::model::BlackBoxModel;
use crate::types::{SampleSet, SelectionSet};

/// Feature matrix with true class labels. Labels stay here; the explainer
/// only ever sees a [`SampleSet`] built by [`Dataset::annotate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub ids: Vec<String>,
    pub x: Array2<f64>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
    /// Planted subset for synthetic data.
    pub true_subset: Option<SelectionSet>,
}

/// Train, validation, and test parts of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

fn id_hash(id: &str) -> u64 {
    let mut h = fnv::FnvHasher::default();
    h.write(id.as_bytes());
    h.finish()
}

impl Dataset {
    pub fn new(ids: Vec<String>, x: Array2<f64>, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if ids.len() != x.nrows() || labels.len() != x.nrows() {
            return Err(Error::shape(
                "dataset",
                format!("{} rows", x.nrows()),
                format!("{} ids, {} labels", ids.len(), labels.len()),
            ));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::config(format!(
                "label {bad} out of range for {n_classes} classes"
            )));
        }
        Ok(Self {
            ids,
            x,
            labels,
            n_classes,
            true_subset: None,
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

    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
            x: self.x.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            n_classes: self.n_classes,
            true_subset: self.true_subset.clone(),
        }
    }

    /// First `n` rows.
    pub fn head(&self, n: usize) -> Dataset {
        self.select(&(0..n.min(self.len())).collect::<Vec<_>>())
    }

    fn partition(&self, parts: u64, assign: impl Fn(u64) -> usize, n_out: usize) -> Vec<Dataset> {
        let mut buckets = vec![Vec::new(); n_out];
        for (i, id) in self.ids.iter().enumerate() {
            buckets[assign(id_hash(id) % parts)].push(i);
        }
        buckets.iter().map(|b| self.select(b)).collect()
    }

    /// 50/25/25 train/validation/test by a hash of each sample id, so a
    /// sample lands in the same split regardless of row order.
    pub fn split(&self) -> Splits {
        let mut parts = self
            .partition(
                4,
                |h| match h {
                    0 | 1 => 0,
                    2 => 1,
                    _ => 2,
                },
                3,
            )
            .into_iter();
        Splits {
            train: parts.next().unwrap(),
            val: parts.next().unwrap(),
            test: parts.next().unwrap(),
        }
    }

    /// Halves by id hash; used to carve a validation set out of a held-out
    /// test set. Returns `(validation, test)`.
    pub fn halve(&self) -> (Dataset, Dataset) {
        let mut parts = self.partition(2, |h| h as usize, 2).into_iter();
        (parts.next().unwrap(), parts.next().unwrap())
    }

    /// `max - min` of each feature, with 1 for constant features.
    pub fn feature_ranges(&self) -> Vec<f64> {
        self.x
            .columns()
            .into_iter()
            .map(|col| {
                let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                if hi > lo {
                    hi - lo
                } else {
                    1.0
                }
            })
            .collect()
    }

    /// Labels as one-hot rows.
    pub fn one_hot(&self) -> Array2<f64> {
        let mut t = Array2::zeros((self.len(), self.n_classes));
        for (i, &l) in self.labels.iter().enumerate() {
            t[[i, l]] = 1.0;
        }
        t
    }

    /// Runs the model once over every sample and caches its outputs.
    pub fn annotate(&self, model: &dyn BlackBoxModel) -> Result<SampleSet> {
        if model.input_dim() != self.n_features() {
            return Err(Error::shape("model input", model.input_dim(), self.n_features()));
        }
        let mut y = Array2::zeros((self.len(), model.output_dim()));
        for start in (0..self.len()).step_by(1024) {
            let end = (start + 1024).min(self.len());
            let out = model.evaluate_batch(self.x.slice(ndarray::s![start..end, ..]))?;
            y.slice_mut(ndarray::s![start..end, ..]).assign(&out);
        }
        let mut set = SampleSet::new(self.ids.clone(), self.x.clone(), y)?;
        set.true_labels = Some(self.labels.clone());
        Ok(set)
    }

    /// Line-delimited text: an optional `#true_subset=i;j;...` header, then
    /// `id,x_1,...,x_d,label` per sample. Floats use the shortest form that
    /// parses back to the same bits.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        if let Some(t) = &self.true_subset {
            let idx: Vec<String> = t.indices().iter().map(|i| i.to_string()).collect();
            let _ = writeln!(s, "#true_subset={}", idx.join(";"));
        }
        let _ = writeln!(s, "#n_classes={}", self.n_classes);
        for (i, id) in self.ids.iter().enumerate() {
            s.push_str(id);
            for v in self.x.row(i) {
                let _ = write!(s, ",{v:?}");
            }
            let _ = writeln!(s, ",{}", self.labels[i]);
        }
        s
    }

    pub fn from_csv(text: &str, path: &Path) -> Result<Dataset> {
        let parse_err = |offset: usize, reason: String| Error::Parse {
            path: path.to_path_buf(),
            offset: offset as u64,
            reason,
        };
        let mut subset = None;
        let mut n_classes = None;
        let (mut ids, mut values, mut labels) = (Vec::new(), Vec::new(), Vec::new());
        let mut d = None;
        let mut offset = 0;
        for line in text.split_inclusive('\n') {
            let start = offset;
            offset += line.len();
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("#true_subset=") {
                let idx = rest
                    .split(';')
                    .filter(|t| !t.is_empty())
                    .map(|t| t.parse::<usize>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| parse_err(start, format!("bad true_subset: {e}")))?;
                subset = Some(idx);
                continue;
            }
            if let Some(rest) = line.strip_prefix("#n_classes=") {
                n_classes = Some(
                    rest.parse::<usize>()
                        .map_err(|e| parse_err(start, format!("bad n_classes: {e}")))?,
                );
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() < 3 {
                return Err(parse_err(start, "expected id, features, and label".into()));
            }
            let width = fields.len() - 2;
            match d {
                None => d = Some(width),
                Some(w) if w != width => {
                    return Err(parse_err(start, format!("row has {width} features, expected {w}")));
                }
                _ => {}
            }
            ids.push(fields[0].to_string());
            for f in &fields[1..=width] {
                values.push(
                    f.parse::<f64>()
                        .map_err(|e| parse_err(start, format!("bad feature {f:?}: {e}")))?,
                );
            }
            let label = fields[width + 1];
            labels.push(
                label
                    .parse::<usize>()
                    .map_err(|e| parse_err(start, format!("bad label {label:?}: {e}")))?,
            );
        }
        let d = d.ok_or_else(|| parse_err(0, "no samples".into()))?;
        let n_classes = n_classes.unwrap_or_else(|| labels.iter().max().map_or(1, |m| m + 1));
        let x = Array2::from_shape_vec((ids.len(), d), values).expect("rows checked");
        let mut ds = Dataset::new(ids, x, labels, n_classes)?;
        ds.true_subset = subset.map(|s| SelectionSet::new(s, d)).transpose()?;
        Ok(ds)
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, self.to_csv().as_bytes())
    }

    pub fn load_csv(path: &Path) -> Result<Dataset> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text, path)
    }
}
