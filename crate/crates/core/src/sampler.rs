//! Subset sampling.
//!
//! Training uses a differentiable relaxation of "draw `k` features without
//! replacement in proportion to `z`": `k` independent Gumbel-perturbed
//! softmax races over `log z`, combined by taking the coordinate-wise maximum
//! across races. Inference uses a plain deterministic top-k.

use ndarray::{Array2, ArrayView1, ArrayView2, ArrayViewMut1, Axis};
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::types::{RelaxedMask, ScoreVector, SelectionSet};

/// Uniform draws are clamped to `(U_EPS, 1 - U_EPS)` before the double log.
pub const U_EPS: f64 = 1e-12;
/// Scores are clamped below at `Z_EPS` before taking logs.
pub const Z_EPS: f64 = 1e-20;

/// Gumbel noise for one sample: `d` rows (features) by `k` columns (races).
#[derive(Debug, Clone, PartialEq)]
pub struct GumbelNoise {
    pub xi: Array2<f64>,
    pub source_seed: u64,
}

impl GumbelNoise {
    /// All-zero noise: every race becomes `softmax(log z / tau)`.
    pub fn zeros(d: usize, k: usize) -> Self {
        Self {
            xi: Array2::zeros((d, k)),
            source_seed: 0,
        }
    }

    /// Noise from explicit uniforms, `xi = -ln(-ln u)`.
    pub fn from_uniform(u: &Array2<f64>) -> Self {
        Self {
            xi: u.mapv(gumbel_from_uniform),
            source_seed: 0,
        }
    }

    pub fn d(&self) -> usize {
        self.xi.nrows()
    }

    pub fn k(&self) -> usize {
        self.xi.ncols()
    }
}

/// Standard Gumbel variate from a uniform on (0, 1), clamped away from the
/// endpoints.
pub fn gumbel_from_uniform(u: f64) -> f64 {
    let u = u.clamp(U_EPS, 1.0 - U_EPS);
    -(-u.ln()).ln()
}

pub fn sample_gumbel_noise(d: usize, k: usize, rng: &mut Rng) -> Result<GumbelNoise> {
    if d == 0 || k == 0 {
        return Err(Error::config(format!(
            "gumbel noise needs d >= 1 and k >= 1, got d={d} k={k}"
        )));
    }
    let source_seed = u64::from_le_bytes(rng.get_seed()[..8].try_into().unwrap());
    let xi = Array2::from_shape_simple_fn((d, k), || gumbel_from_uniform(rng.random::<f64>()));
    Ok(GumbelNoise { xi, source_seed })
}

fn check_topk(d: usize, k: usize) -> Result<()> {
    if k == 0 || k > d {
        return Err(Error::config(format!("k must be in [1, d={d}], got {k}")));
    }
    Ok(())
}

/// Forward state of one relaxed top-k draw, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct RelaxedTopK {
    /// The relaxed mask `v`.
    pub v: Vec<f64>,
    /// Softmax output of each race, `k` rows by `d` columns.
    races: Array2<f64>,
    /// Race achieving the maximum for each feature.
    winner: Vec<usize>,
    /// Clamped scores used in the forward pass.
    z: Vec<f64>,
    tau: f64,
}

impl RelaxedTopK {
    /// Runs the `k` races on scores `z` (clamped at [`Z_EPS`]).
    pub fn forward(z: ArrayView1<'_, f64>, k: usize, tau: f64, noise: &GumbelNoise) -> Result<Self> {
        let d = z.len();
        check_topk(d, k)?;
        if !(tau > 0.0) {
            return Err(Error::config(format!("tau must be positive, got {tau}")));
        }
        if noise.d() != d || noise.k() < k {
            return Err(Error::shape(
                "gumbel noise",
                format!("{d}x{k}"),
                format!("{}x{}", noise.d(), noise.k()),
            ));
        }
        let zc: Vec<f64> = z.iter().map(|&p| p.max(Z_EPS)).collect();
        let logz: Vec<f64> = zc.iter().map(|p| p.ln()).collect();
        let mut races = Array2::<f64>::zeros((k, d));
        for (l, mut row) in races.rows_mut().into_iter().enumerate() {
            for j in 0..d {
                row[j] = (logz[j] + noise.xi[[j, l]]) / tau;
            }
            softmax_in_place(&mut row);
        }
        let mut v = vec![0.0; d];
        let mut winner = vec![0; d];
        for j in 0..d {
            let mut best = 0;
            for l in 1..k {
                if races[[l, j]] > races[[best, j]] {
                    best = l;
                }
            }
            winner[j] = best;
            v[j] = races[[best, j]];
        }
        Ok(Self {
            v,
            races,
            winner,
            z: zc,
            tau,
        })
    }

    pub fn mask(&self) -> RelaxedMask {
        RelaxedMask {
            v: self.v.clone(),
            k: self.races.nrows(),
            tau: self.tau,
        }
    }

    /// Maps `dL/dv` to `dL/dz`. The max routes each coordinate's gradient to
    /// its winning race; coordinates clamped at [`Z_EPS`] get zero.
    pub fn backward(&self, grad_v: ArrayView1<'_, f64>) -> Vec<f64> {
        let (k, d) = self.races.dim();
        let mut grad_logz = vec![0.0; d];
        for l in 0..k {
            let row = self.races.row(l);
            let mut dot = 0.0;
            for j in 0..d {
                if self.winner[j] == l {
                    dot += grad_v[j] * row[j];
                }
            }
            for j in 0..d {
                let ga = if self.winner[j] == l { grad_v[j] } else { 0.0 };
                grad_logz[j] += row[j] * (ga - dot) / self.tau;
            }
        }
        grad_logz
            .iter()
            .zip(&self.z)
            .map(|(&g, &z)| if z <= Z_EPS { 0.0 } else { g / z })
            .collect()
    }
}

fn softmax_in_place(row: &mut ArrayViewMut1<'_, f64>) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    row.mapv_inplace(|v| (v - max).exp());
    let total = row.sum();
    *row /= total;
}

/// Differentiable approximately-k-hot sample from the scores `z`.
pub fn relaxed_topk(z: &ScoreVector, k: usize, tau: f64, noise: &GumbelNoise) -> Result<RelaxedMask> {
    let z = ArrayView1::from(z.as_slice());
    Ok(RelaxedTopK::forward(z, k, tau, noise)?.mask())
}

/// Indices of the `k` largest scores, ties to the lower index.
pub fn hard_topk(z: &ScoreVector, k: usize) -> Result<SelectionSet> {
    topk_indices(z.as_slice(), k)
}

/// [`hard_topk`] on a raw slice (which need not be normalized).
pub fn topk_indices(z: &[f64], k: usize) -> Result<SelectionSet> {
    let d = z.len();
    check_topk(d, k)?;
    let mut order: Vec<usize> = (0..d).collect();
    // Stable sort keeps lower indices first among equal scores.
    order.sort_by(|&a, &b| z[b].partial_cmp(&z[a]).unwrap_or(std::cmp::Ordering::Equal));
    order.truncate(k);
    SelectionSet::new(order, d)
}

/// Row-wise [`topk_indices`] on a batch of scores.
pub fn hard_topk_batch(z: ArrayView2<'_, f64>, k: usize) -> Result<Vec<SelectionSet>> {
    z.axis_iter(Axis(0)).map(|row| topk_indices(&row.to_vec(), k)).collect()
}
