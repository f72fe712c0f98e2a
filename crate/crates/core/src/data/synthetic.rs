use ndarray::Array2;
use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};
use crate::types::SelectionSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticKind {
    /// Gaussian features, label drawn from a logistic model on the planted
    /// subset.
    SparseLogit,
    /// Binary features, label is the parity of the planted subset.
    Xor,
    /// Two disjoint informative groups: the first half of the planted subset
    /// is shifted for class 0, the second half for class 1.
    ShortcutBait,
}

impl SyntheticKind {
    pub fn name(&self) -> &'static str {
        match self {
            SyntheticKind::SparseLogit => "sparse-logit",
            SyntheticKind::Xor => "xor",
            SyntheticKind::ShortcutBait => "shortcut-bait",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        match s {
            "sparse-logit" => Ok(SyntheticKind::SparseLogit),
            "xor" => Ok(SyntheticKind::Xor),
            "shortcut-bait" => Ok(SyntheticKind::ShortcutBait),
            other => Err(Error::config(format!("unknown synthetic kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub d: usize,
    pub true_subset: Vec<usize>,
    pub n: usize,
    /// Sparse-logit: std of logit noise. Xor: label flip probability.
    /// Shortcut-bait: std of extra noise added to every feature.
    pub noise_std: f64,
    pub seed: u64,
}

/// Magnitude range of the planted logistic weights; wide enough that the
/// Bayes accuracy with four planted features is above 0.9.
pub const LOGIT_WEIGHT_RANGE: (f64, f64) = (3.0, 5.0);
/// Class-conditional mean shift of the shortcut-bait groups.
pub const BAIT_SHIFT: f64 = 2.5;

impl SyntheticSpec {
    pub fn sparse_logit(d: usize, n_true: usize, n: usize, seed: u64) -> Self {
        Self {
            kind: SyntheticKind::SparseLogit,
            d,
            true_subset: (0..n_true).collect(),
            n,
            noise_std: 0.1,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("synthetic n must be at least 1"));
        }
        SelectionSet::new(self.true_subset.clone(), self.d)?;
        if self.kind == SyntheticKind::ShortcutBait && self.true_subset.len() < 2 {
            return Err(Error::config("shortcut-bait needs at least two planted features"));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::config("noise_std must be non-negative"));
        }
        Ok(())
    }

    /// Planted logistic weights (sparse-logit only), indexed like
    /// `true_subset`.
    pub fn logit_weights(&self) -> Vec<f64> {
        let mut rng = stream(self.seed, Stream::Init);
        let (lo, hi) = LOGIT_WEIGHT_RANGE;
        self.true_subset
            .iter()
            .map(|_| {
                let mag = rng.random_range(lo..hi);
                if rng.random_bool(0.5) {
                    mag
                } else {
                    -mag
                }
            })
            .collect()
    }

    /// `(group A, group B)` of the shortcut-bait construction.
    pub fn bait_groups(&self) -> (Vec<usize>, Vec<usize>) {
        let mut s = self.true_subset.clone();
        s.sort_unstable();
        let b = s.split_off(s.len() / 2);
        (s, b)
    }
}

/// Pure function of the spec: the same spec gives the same bytes.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = stream(spec.seed, Stream::Data);
    let (n, d) = (spec.n, spec.d);
    let mut x = Array2::<f64>::zeros((n, d));
    let mut labels = Vec::with_capacity(n);
    match spec.kind {
        SyntheticKind::SparseLogit => {
            let w = spec.logit_weights();
            let noise = Normal::new(0.0, spec.noise_std).map_err(|e| Error::config(e.to_string()))?;
            for i in 0..n {
                for j in 0..d {
                    x[[i, j]] = StandardNormal.sample(&mut rng);
                }
                let logit: f64 = spec
                    .true_subset
                    .iter()
                    .zip(&w)
                    .map(|(&j, &wj)| wj * x[[i, j]])
                    .sum::<f64>()
                    + noise.sample(&mut rng);
                let p = 1.0 / (1.0 + (-logit).exp());
                labels.push(usize::from(rng.random_bool(p)));
            }
        }
        SyntheticKind::Xor => {
            let flip = spec.noise_std.min(0.5);
            for i in 0..n {
                for j in 0..d {
                    x[[i, j]] = f64::from(u8::from(rng.random_bool(0.5)));
                }
                let parity = spec.true_subset.iter().filter(|&&j| x[[i, j]] > 0.5).count() % 2;
                labels.push(parity ^ usize::from(rng.random_bool(flip)));
            }
        }
        SyntheticKind::ShortcutBait => {
            let (a, b) = spec.bait_groups();
            let noise = Normal::new(0.0, spec.noise_std).map_err(|e| Error::config(e.to_string()))?;
            for i in 0..n {
                let label = usize::from(rng.random_bool(0.5));
                for j in 0..d {
                    x[[i, j]] = StandardNormal.sample(&mut rng);
                    x[[i, j]] += noise.sample(&mut rng);
                }
                for &j in if label == 0 { &a } else { &b } {
                    x[[i, j]] += BAIT_SHIFT;
                }
                labels.push(label);
            }
        }
    }
    let ids = (0..n)
        .map(|i| format!("{}-{}-{i}", spec.kind.name(), spec.seed))
        .collect();
    let mut ds = Dataset::new(ids, x, labels, 2)?;
    ds.true_subset = Some(SelectionSet::new(spec.true_subset.clone(), d)?);
    Ok(ds)
}
