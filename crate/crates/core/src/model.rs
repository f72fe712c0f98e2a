//! The model being explained.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::net::{Architecture, Net};
use crate::rng::Rng;

/// A deterministic map from features to outputs. Explainers only ever see
/// it through this trait.
pub trait BlackBoxModel {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;

    fn evaluate_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>>;

    fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        let view = ArrayView2::from_shape((1, x.len()), x)
            .map_err(|_| Error::shape("model input", self.input_dim(), x.len()))?;
        Ok(self.evaluate_batch(view)?.row(0).to_vec())
    }

    /// Exact `∂ output[class] / ∂ x` for each row, if the model can supply it.
    /// Opaque models return `None` and callers fall back to finite differences.
    fn class_gradient_batch(&self, _x: ArrayView2<'_, f64>, _classes: &[usize]) -> Option<Result<Array2<f64>>> {
        None
    }

    /// A copy with every parameter re-drawn from its initializer.
    fn randomized(&self, _rng: &mut Rng) -> Result<Box<dyn BlackBoxModel>> {
        Err(Error::config("this model does not expose parameters to randomize"))
    }
}

/// Multilayer perceptron classifier with a softmax head.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub hidden: Vec<usize>,
    pub net: Net,
}

const MODEL_MAGIC: &[u8; 8] = b"MEEDMODL";
const MODEL_VERSION: u32 = 1;

impl MlpModel {
    pub fn new(d: usize, hidden: &[usize], c: usize, rng: &mut Rng) -> Result<Self> {
        Ok(Self {
            hidden: hidden.to_vec(),
            net: Net::new(&Architecture::mlp(d, hidden, c, true), rng)?,
        })
    }

    /// Builds the model from explicit parameters.
    pub fn from_params(d: usize, hidden: &[usize], c: usize, params: Array1<f64>) -> Result<Self> {
        let mut net = Net::zeroed(&Architecture::mlp(d, hidden, c, true))?;
        net.set_params(params)?;
        Ok(Self {
            hidden: hidden.to_vec(),
            net,
        })
    }

    /// Binary layout: magic, version, d, c, hidden count, widths, parameter
    /// count, parameters; integers u64 and floats f64, all little-endian.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MODEL_MAGIC);
        buf.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        for v in [self.input_dim(), self.output_dim(), self.hidden.len()] {
            buf.extend_from_slice(&(v as u64).to_le_bytes());
        }
        for &h in &self.hidden {
            buf.extend_from_slice(&(h as u64).to_le_bytes());
        }
        buf.extend_from_slice(&(self.net.n_params() as u64).to_le_bytes());
        for &p in self.net.params() {
            buf.extend_from_slice(&p.to_le_bytes());
        }
        crate::io::write_atomic(path, &buf)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let mut r = crate::io::Reader::new(&bytes, path);
        r.magic(MODEL_MAGIC)?;
        let version = r.u32()?;
        if version != MODEL_VERSION {
            return Err(Error::Version {
                found: version,
                expected: MODEL_VERSION,
            });
        }
        let d = r.u64()? as usize;
        let c = r.u64()? as usize;
        let nh = r.u64()? as usize;
        let hidden = (0..nh)
            .map(|_| r.u64().map(|v| v as usize))
            .collect::<Result<Vec<_>>>()?;
        let params = r.f64_vec()?;
        r.finish()?;
        Self::from_params(d, &hidden, c, Array1::from(params))
    }
}

impl BlackBoxModel for MlpModel {
    fn input_dim(&self) -> usize {
        self.net.input_widths()[0]
    }

    fn output_dim(&self) -> usize {
        self.net.output_width()
    }

    fn evaluate_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.net.predict(&[x])
    }

    fn class_gradient_batch(&self, x: ArrayView2<'_, f64>, classes: &[usize]) -> Option<Result<Array2<f64>>> {
        Some((|| {
            let trace = self.net.forward(&[x])?;
            let mut g = Array2::zeros((x.nrows(), self.output_dim()));
            for (i, &c) in classes.iter().enumerate() {
                g[[i, c]] = 1.0;
            }
            let grads = self.net.backward(&trace, g.view())?;
            Ok(grads.inputs.into_iter().next().expect("one input"))
        })())
    }

    fn randomized(&self, rng: &mut Rng) -> Result<Box<dyn BlackBoxModel>> {
        Ok(Box::new(MlpModel {
            hidden: self.hidden.clone(),
            net: Net::new(&self.net.architecture(), rng)?,
        }))
    }
}

/// Wraps an arbitrary closure as an opaque model.
pub struct FnModel<F> {
    pub d: usize,
    pub c: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> Vec<f64>> BlackBoxModel for FnModel<F> {
    fn input_dim(&self) -> usize {
        self.d
    }

    fn output_dim(&self) -> usize {
        self.c
    }

    fn evaluate_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.d {
            return Err(Error::shape("model input", self.d, x.ncols()));
        }
        let mut out = Array2::zeros((x.nrows(), self.c));
        for (i, row) in x.rows().into_iter().enumerate() {
            let y = (self.f)(&row.to_vec());
            if y.len() != self.c {
                return Err(Error::shape("model output", self.c, y.len()));
            }
            out.row_mut(i).assign(&Array1::from(y));
        }
        Ok(out)
    }
}

/// Central finite-difference gradient of `output[class]` at `x`, with
/// per-feature step sizes.
pub fn finite_difference_gradient(
    model: &dyn BlackBoxModel,
    x: &[f64],
    class: usize,
    steps: &[f64],
) -> Result<Vec<f64>> {
    let d = x.len();
    let mut probes = Array2::zeros((2 * d, d));
    for j in 0..d {
        probes.row_mut(2 * j).assign(&ndarray::ArrayView1::from(x));
        probes.row_mut(2 * j + 1).assign(&ndarray::ArrayView1::from(x));
        probes[[2 * j, j]] += steps[j];
        probes[[2 * j + 1, j]] -= steps[j];
    }
    let out = model.evaluate_batch(probes.view())?;
    Ok((0..d)
        .map(|j| (out[[2 * j, class]] - out[[2 * j + 1, class]]) / (2.0 * steps[j]))
        .collect())
}
