//! Approximators over selected and unselected features, zero imputation,
//! and the losses that train them.

use ndarray::{Array1, Array2, ArrayView2, Zip};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::net::{Architecture, Net, Optimizer, OptimizerKind};
use crate::rng::Rng;
use crate::types::{RelaxedMask, SelectionSet};

/// Predictions are clamped below at this value before taking logs.
pub const PRED_EPS: f64 = 1e-12;

/// Per-feature keep weights, either relaxed (`v`) or hard (a selection).
pub trait MaskWeights {
    fn dim(&self) -> usize;
    fn weight(&self, j: usize) -> f64;
}

impl MaskWeights for RelaxedMask {
    fn dim(&self) -> usize {
        self.v.len()
    }

    fn weight(&self, j: usize) -> f64 {
        self.v[j]
    }
}

impl MaskWeights for SelectionSet {
    fn dim(&self) -> usize {
        self.d()
    }

    fn weight(&self, j: usize) -> f64 {
        if self.contains(j) {
            1.0
        } else {
            0.0
        }
    }
}

impl MaskWeights for [f64] {
    fn dim(&self) -> usize {
        self.len()
    }

    fn weight(&self, j: usize) -> f64 {
        self[j]
    }
}

fn check_mask<M: MaskWeights + ?Sized>(x: &[f64], mask: &M) -> Result<()> {
    if x.len() != mask.dim() {
        return Err(Error::shape("mask", x.len(), mask.dim()));
    }
    Ok(())
}

/// `x` with unselected features set to zero (`x ⊙ v` for relaxed masks).
pub fn impute_selected<M: MaskWeights + ?Sized>(x: &[f64], mask: &M) -> Result<Vec<f64>> {
    check_mask(x, mask)?;
    Ok(x.iter().enumerate().map(|(j, &v)| v * mask.weight(j)).collect())
}

/// `x` with selected features set to zero (`x ⊙ (1 - v)` for relaxed masks).
pub fn impute_unselected<M: MaskWeights + ?Sized>(x: &[f64], mask: &M) -> Result<Vec<f64>> {
    check_mask(x, mask)?;
    Ok(x.iter().enumerate().map(|(j, &v)| v * (1.0 - mask.weight(j))).collect())
}

/// Batched imputation with a 0/1 or relaxed mask matrix; returns
/// `(x ⊙ v, x ⊙ (1 - v))`.
pub fn impute_batch(x: ArrayView2<'_, f64>, v: ArrayView2<'_, f64>) -> (Array2<f64>, Array2<f64>) {
    let selected = &x * &v;
    let unselected = &x - &selected;
    (selected, unselected)
}

/// Stacks hard selections into a 0/1 mask matrix.
pub fn selection_matrix(sets: &[SelectionSet], d: usize) -> Array2<f64> {
    let mut m = Array2::zeros((sets.len(), d));
    for (i, s) in sets.iter().enumerate() {
        for &j in s.indices() {
            m[[i, j]] = 1.0;
        }
    }
    m
}

/// `-Σ t_j ln p_j` with `p` clamped at [`PRED_EPS`].
pub fn cross_entropy(target: &[f64], pred: &[f64]) -> f64 {
    target
        .iter()
        .zip(pred)
        .map(|(&t, &p)| if t == 0.0 { 0.0 } else { -t * p.max(PRED_EPS).ln() })
        .sum()
}

/// Mean cross-entropy over a batch and its gradient with respect to `pred`.
pub fn cross_entropy_batch(target: ArrayView2<'_, f64>, pred: ArrayView2<'_, f64>) -> (f64, Array2<f64>) {
    let n = target.nrows().max(1) as f64;
    let mut grad = Array2::zeros(pred.dim());
    let mut total = 0.0;
    Zip::from(&mut grad).and(target).and(pred).for_each(|g, &t, &p| {
        if t != 0.0 {
            total -= t * p.max(PRED_EPS).ln();
            if p >= PRED_EPS {
                *g = -t / (p * n);
            }
        }
    });
    (total / n, grad)
}

/// Target used by the explainer's unselected-feature cross-entropy: `1 - y`,
/// renormalized over `c - 1` classes when `c > 2`.
pub fn relativistic_flip(y: &[f64]) -> Vec<f64> {
    let c = y.len();
    if c < 2 {
        return y.to_vec();
    }
    let scale = 1.0 / (c - 1) as f64;
    y.iter().map(|&p| (1.0 - p) * scale).collect()
}

pub fn relativistic_flip_batch(y: ArrayView2<'_, f64>) -> Array2<f64> {
    let c = y.ncols();
    if c < 2 {
        return y.to_owned();
    }
    let scale = 1.0 / (c - 1) as f64;
    y.mapv(|p| (1.0 - p) * scale)
}

/// `n` directions drawn uniformly on the unit sphere in `R^c`, one per row.
pub fn random_directions(c: usize, n: usize, rng: &mut Rng) -> Array2<f64> {
    let mut dirs = Array2::<f64>::zeros((n, c));
    for mut row in dirs.rows_mut() {
        loop {
            for v in row.iter_mut() {
                *v = StandardNormal.sample(rng);
            }
            let norm = row.dot(&row).sqrt();
            if norm > 1e-12 {
                row /= norm;
                break;
            }
        }
    }
    dirs
}

fn sorted_order(v: &Array1<f64>) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
    idx
}

/// Sliced squared 2-Wasserstein distance between two equal-size point sets
/// along fixed `directions`, with its gradient with respect to `b`.
pub fn sliced_wasserstein_with_grad(
    a: ArrayView2<'_, f64>,
    b: ArrayView2<'_, f64>,
    directions: ArrayView2<'_, f64>,
) -> Result<(f64, Array2<f64>)> {
    if a.dim() != b.dim() {
        return Err(Error::shape(
            "sliced wasserstein batches",
            format!("{:?}", a.dim()),
            format!("{:?}", b.dim()),
        ));
    }
    if a.nrows() == 0 || directions.nrows() == 0 {
        return Err(Error::config(
            "sliced wasserstein needs at least one point and one projection",
        ));
    }
    if directions.ncols() != a.ncols() {
        return Err(Error::shape("projection directions", a.ncols(), directions.ncols()));
    }
    let n = a.nrows();
    let n_proj = directions.nrows();
    let pa = a.dot(&directions.t());
    let pb = b.dot(&directions.t());
    let mut total = 0.0;
    let mut grad = Array2::zeros(b.dim());
    for (l, theta) in directions.rows().into_iter().enumerate() {
        let ca = pa.column(l).to_owned();
        let cb = pb.column(l).to_owned();
        let oa = sorted_order(&ca);
        let ob = sorted_order(&cb);
        let mut sum = 0.0;
        for r in 0..n {
            let diff = cb[ob[r]] - ca[oa[r]];
            sum += diff * diff;
            let coef = 2.0 * diff / (n * n_proj) as f64;
            grad.row_mut(ob[r]).scaled_add(coef, &theta);
        }
        total += sum / n as f64;
    }
    Ok((total / n_proj as f64, grad))
}

/// Mean over `n_proj` random unit directions of the squared 1-D
/// 2-Wasserstein distance between the projected batches.
pub fn sliced_wasserstein(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>, n_proj: usize, rng: &mut Rng) -> Result<f64> {
    if n_proj == 0 {
        return Err(Error::config("sliced wasserstein needs at least one projection"));
    }
    let dirs = random_directions(a.ncols(), n_proj, rng);
    Ok(sliced_wasserstein_with_grad(a, b, dirs.view())?.0)
}

/// Loss for the unselected-feature approximator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossU {
    CrossEntropy,
    SlicedWasserstein,
}

impl LossU {
    pub fn name(&self) -> &'static str {
        match self {
            LossU::CrossEntropy => "cross-entropy",
            LossU::SlicedWasserstein => "sliced-wasserstein",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        match s {
            "cross-entropy" => Ok(LossU::CrossEntropy),
            "sliced-wasserstein" => Ok(LossU::SlicedWasserstein),
            other => Err(Error::config(format!("unknown loss {other:?}"))),
        }
    }
}

/// The two approximators; same architecture, independent parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproximatorPair {
    pub selected: Net,
    pub unselected: Net,
}

impl ApproximatorPair {
    pub fn architecture(d: usize, c: usize, hidden: &[usize]) -> Architecture {
        Architecture::mlp(d, hidden, c, true)
    }

    pub fn new(d: usize, c: usize, hidden: &[usize], rng: &mut Rng) -> Result<Self> {
        let arch = Self::architecture(d, c, hidden);
        Ok(Self {
            selected: Net::new(&arch, rng)?,
            unselected: Net::new(&arch, rng)?,
        })
    }
}

/// Selected and unselected losses of a batch under masks `v` (one row per
/// sample). `rng` supplies projection directions for the Wasserstein loss.
pub fn batch_losses(
    pair: &ApproximatorPair,
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    v: ArrayView2<'_, f64>,
    loss_u: LossU,
    n_proj: usize,
    rng: &mut Rng,
) -> Result<(f64, f64)> {
    let (xs, xu) = impute_batch(x, v);
    let ps = pair.selected.predict(&[xs.view()])?;
    let pu = pair.unselected.predict(&[xu.view()])?;
    let ls = cross_entropy_batch(y, ps.view()).0;
    let lu = match loss_u {
        LossU::CrossEntropy => cross_entropy_batch(y, pu.view()).0,
        LossU::SlicedWasserstein => sliced_wasserstein(y, pu.view(), n_proj, rng)?,
    };
    Ok((ls, lu))
}

/// Plain supervised training of a softmax network on soft targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 64,
            learning_rate: 1e-3,
        }
    }
}

/// Minimizes mean cross-entropy between `net(x)` and `targets` with Adam,
/// shuffling rows each epoch. Returns the loss of the last epoch.
pub fn fit_cross_entropy(
    net: &mut Net,
    x: ArrayView2<'_, f64>,
    targets: ArrayView2<'_, f64>,
    opts: FitOptions,
    rng: &mut Rng,
) -> Result<f64> {
    if x.nrows() != targets.nrows() {
        return Err(Error::shape("fit targets", x.nrows(), targets.nrows()));
    }
    let kind = OptimizerKind::Adam {
        beta1: 0.9,
        beta2: 0.999,
    };
    let mut opt = Optimizer::new(kind, opts.learning_rate, 0.0, net.n_params());
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    let mut last = f64::NAN;
    for _ in 0..opts.epochs {
        order.shuffle(rng);
        let (mut total, mut batches) = (0.0, 0);
        for chunk in order.chunks(opts.batch_size.max(1)) {
            let xb = x.select(ndarray::Axis(0), chunk);
            let tb = targets.select(ndarray::Axis(0), chunk);
            let (loss, grad) = crate::net::net_gradient(net, &[xb.view()], |p| cross_entropy_batch(tb.view(), p))?;
            opt.step(net.params_mut(), &grad);
            total += loss;
            batches += 1;
        }
        last = total / batches.max(1) as f64;
    }
    Ok(last)
}
