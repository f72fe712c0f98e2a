//! The explainer network and its prior-knowledge warm start.
//!
//! The explainer maps a sample's features and the model's output on it to a
//! distribution over features. A prior score vector from a cheap attribution
//! method can be fused in with a naive-Bayes product whose prior exponent
//! decays with the epoch counter `m`:
//!
//! ```text
//! fused_j ∝ (z_j^m · r_j)^(1 / (m + 1))
//! ```
//!
//! At `m = 0` the fused scores equal the prior; as `m` grows they approach `z`.

use ndarray::{Array2, ArrayView2, Zip};

use crate::error::{Error, Result};
use crate::net::{Architecture, Net, Trace};
use crate::rng::Rng;
use crate::sampler::Z_EPS;
use crate::types::{is_simplex, ScoreVector};

/// How the model output `y` enters the explainer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeedbackFusion {
    /// `y` is ignored.
    None,
    /// `y` is concatenated to `x` as is.
    ConcatRaw,
    /// `y` passes through a small relu MLP before concatenation.
    ConcatEmbedded,
}

impl FeedbackFusion {
    pub fn name(&self) -> &'static str {
        match self {
            FeedbackFusion::None => "none",
            FeedbackFusion::ConcatRaw => "concat-raw",
            FeedbackFusion::ConcatEmbedded => "concat-embedded",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(FeedbackFusion::None),
            "concat-raw" => Ok(FeedbackFusion::ConcatRaw),
            "concat-embedded" => Ok(FeedbackFusion::ConcatEmbedded),
            other => Err(Error::config(format!("unknown feedback fusion {other:?}"))),
        }
    }
}

/// Width and depth of the output-embedding MLP.
pub const EMBED_WIDTH: usize = 100;
pub const EMBED_LAYERS: usize = 3;

/// Anything that assigns per-feature scores to a batch of `(x, y)` pairs.
/// Learned explainers and gradient baselines share the evaluation harness
/// through this trait.
pub trait FeatureScorer {
    fn n_features(&self) -> usize;

    /// One row of scores per sample; each row is a distribution over features.
    fn score_batch(&self, x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Result<Array2<f64>>;
}

/// Score network `E(x, y)` ending in a softmax over the `d` features.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplainerNet {
    pub net: Net,
    pub fusion: FeedbackFusion,
    d: usize,
    c: usize,
}

impl ExplainerNet {
    pub fn architecture(d: usize, c: usize, hidden: &[usize], fusion: FeedbackFusion) -> Architecture {
        let mut a = Architecture::new();
        let x = a.input(0, d);
        let y = a.input(1, c);
        let mut h = match fusion {
            FeedbackFusion::None => x,
            FeedbackFusion::ConcatRaw => a.concat(&[x, y]),
            FeedbackFusion::ConcatEmbedded => {
                let mut e = y;
                for _ in 0..EMBED_LAYERS {
                    e = a.dense(e, EMBED_WIDTH);
                    e = a.relu(e);
                }
                a.concat(&[x, e])
            }
        };
        for &w in hidden {
            h = a.dense(h, w);
            h = a.relu(h);
        }
        let logits = a.dense(h, d);
        a.softmax(logits);
        a
    }

    pub fn new(d: usize, c: usize, hidden: &[usize], fusion: FeedbackFusion, rng: &mut Rng) -> Result<Self> {
        let net = Net::new(&Self::architecture(d, c, hidden, fusion), rng)?;
        Ok(Self { net, fusion, d, c })
    }

    /// Wraps an existing network built by [`ExplainerNet::architecture`].
    pub fn from_net(net: Net, fusion: FeedbackFusion) -> Result<Self> {
        let widths = net.input_widths().to_vec();
        if widths.len() != 2 || net.output_width() != widths[0] {
            return Err(Error::shape(
                "explainer",
                "inputs (d, c) and output d",
                format!("{widths:?}"),
            ));
        }
        Ok(Self {
            d: widths[0],
            c: widths[1],
            net,
            fusion,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn c(&self) -> usize {
        self.c
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Result<Trace> {
        self.net.forward(&[x, y])
    }

    pub fn score(&self, x: &[f64], y: &[f64]) -> Result<ScoreVector> {
        let xs = ArrayView2::from_shape((1, x.len()), x).map_err(|_| Error::shape("explainer x", self.d, x.len()))?;
        let ys = ArrayView2::from_shape((1, y.len()), y).map_err(|_| Error::shape("explainer y", self.c, y.len()))?;
        let z = self.net.predict(&[xs, ys])?;
        ScoreVector::new(z.row(0).to_vec())
    }
}

impl FeatureScorer for ExplainerNet {
    fn n_features(&self) -> usize {
        self.d
    }

    fn score_batch(&self, x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.net.predict(&[x, y])
    }
}

/// Which cheap attribution method supplies the prior.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorMethod {
    None,
    Grad,
    GradientTimesInput,
}

impl PriorMethod {
    pub fn name(&self) -> &'static str {
        match self {
            PriorMethod::None => "none",
            PriorMethod::Grad => "grad",
            PriorMethod::GradientTimesInput => "gradient-times-input",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(PriorMethod::None),
            "grad" => Ok(PriorMethod::Grad),
            "gradient-times-input" => Ok(PriorMethod::GradientTimesInput),
            other => Err(Error::config(format!("unknown prior method {other:?}"))),
        }
    }
}

/// Prior importance scores for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorScores {
    pub r: Vec<f64>,
    pub source: PriorMethod,
}

impl PriorScores {
    pub fn new(r: Vec<f64>, source: PriorMethod) -> Result<Self> {
        if !is_simplex(&r) {
            return Err(Error::config("prior scores must lie on the simplex"));
        }
        Ok(Self { r, source })
    }
}

fn fuse_row(z: &[f64], r: &[f64], m: u64, out: &mut [f64]) {
    if m == 0 {
        out.copy_from_slice(r);
        return;
    }
    let mf = m as f64;
    let mut max = f64::NEG_INFINITY;
    for j in 0..z.len() {
        let lw = (mf * z[j].max(Z_EPS).ln() + r[j].max(Z_EPS).ln()) / (mf + 1.0);
        out[j] = lw;
        max = max.max(lw);
    }
    let mut total = 0.0;
    for o in out.iter_mut() {
        *o = (*o - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

/// Fuses explainer scores with prior scores at epoch `m`.
pub fn fuse_prior(z: &ScoreVector, r: &PriorScores, m: u64) -> Result<ScoreVector> {
    if z.len() != r.r.len() {
        return Err(Error::shape("fuse_prior", z.len(), r.r.len()));
    }
    let mut out = vec![0.0; z.len()];
    fuse_row(z.as_slice(), &r.r, m, &mut out);
    ScoreVector::new(out)
}

/// Row-wise [`fuse_prior`] on a batch.
pub fn fuse_prior_batch(z: ArrayView2<'_, f64>, r: ArrayView2<'_, f64>, m: u64) -> Result<Array2<f64>> {
    if z.dim() != r.dim() {
        return Err(Error::shape(
            "fuse_prior",
            format!("{:?}", z.dim()),
            format!("{:?}", r.dim()),
        ));
    }
    let mut out = Array2::zeros(z.dim());
    Zip::from(out.rows_mut())
        .and(z.rows())
        .and(r.rows())
        .for_each(|mut o, z, r| {
            let mut buf = vec![0.0; z.len()];
            fuse_row(&z.to_vec(), &r.to_vec(), m, &mut buf);
            o.assign(&ndarray::ArrayView1::from(&buf[..]));
        });
    Ok(out)
}

/// Maps `dL/d(fused)` to `dL/dz` for a batch fused at epoch `m`.
pub fn fuse_prior_backward(
    z: ArrayView2<'_, f64>,
    fused: ArrayView2<'_, f64>,
    grad_fused: ArrayView2<'_, f64>,
    m: u64,
) -> Array2<f64> {
    let scale = m as f64 / (m as f64 + 1.0);
    let mut out = Array2::zeros(z.dim());
    Zip::from(out.rows_mut())
        .and(z.rows())
        .and(fused.rows())
        .and(grad_fused.rows())
        .for_each(|mut o, z, f, g| {
            let dot = f.dot(&g);
            for j in 0..z.len() {
                o[j] = if z[j] <= Z_EPS {
                    0.0
                } else {
                    scale * f[j] * (g[j] - dot) / z[j]
                };
            }
        });
    out
}

/// Mean absolute error between fused and raw scores, scaled by `1 / (m + 1)`
/// and averaged over the batch.
pub fn prior_constraint_loss(fused: ArrayView2<'_, f64>, z: ArrayView2<'_, f64>, m: u64) -> f64 {
    let (n, d) = z.dim();
    if n == 0 {
        return 0.0;
    }
    let total: f64 = Zip::from(fused).and(z).fold(0.0, |acc, &a, &b| acc + (a - b).abs());
    total / (n * d) as f64 / (m as f64 + 1.0)
}

/// Gradient of [`prior_constraint_loss`] with respect to `z`, holding the
/// fused target fixed.
pub fn prior_constraint_grad(fused: ArrayView2<'_, f64>, z: ArrayView2<'_, f64>, m: u64) -> Array2<f64> {
    let (n, d) = z.dim();
    let scale = 1.0 / ((n * d) as f64 * (m as f64 + 1.0));
    let mut g = Array2::zeros(z.dim());
    Zip::from(&mut g).and(fused).and(z).for_each(|g, &a, &b| {
        *g = if b > a {
            scale
        } else if b < a {
            -scale
        } else {
            0.0
        };
    });
    g
}
