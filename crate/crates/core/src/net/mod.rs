//! A minimal differentiable network: a directed acyclic list of layers over
//! batched row-major inputs, with hand-written reverse-mode gradients.
//!
//! The layer vocabulary is deliberately small (dense, relu, softmax,
//! concatenate, elementwise product, flatten). Every layer refers to earlier
//! layers by index, so an architecture is just a `Vec<Layer>` and the last
//! layer is the output.

mod optim;

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView2, ArrayViewMut2, Axis, Zip};
use rand::Rng as _;

pub use optim::{Optimizer, OptimizerKind};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Reference to an earlier layer's output.
pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    /// Input record component `index` of the given width.
    Input {
        index: usize,
        width: usize,
    },
    Dense {
        src: NodeId,
        width: usize,
    },
    Relu {
        src: NodeId,
    },
    Softmax {
        src: NodeId,
    },
    Concat {
        srcs: Vec<NodeId>,
    },
    Product {
        lhs: NodeId,
        rhs: NodeId,
    },
    Flatten {
        src: NodeId,
    },
}

impl Layer {
    fn name(&self) -> &'static str {
        match self {
            Layer::Input { .. } => "input",
            Layer::Dense { .. } => "dense",
            Layer::Relu { .. } => "relu",
            Layer::Softmax { .. } => "softmax",
            Layer::Concat { .. } => "concatenate",
            Layer::Product { .. } => "elementwise-product",
            Layer::Flatten { .. } => "flatten",
        }
    }
}

/// Builder for a layer list. Each method appends one layer and returns its id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Architecture {
    layers: Vec<Layer>,
}

impl Architecture {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    fn push(&mut self, layer: Layer) -> NodeId {
        self.layers.push(layer);
        self.layers.len() - 1
    }

    pub fn input(&mut self, index: usize, width: usize) -> NodeId {
        self.push(Layer::Input { index, width })
    }

    pub fn dense(&mut self, src: NodeId, width: usize) -> NodeId {
        self.push(Layer::Dense { src, width })
    }

    pub fn relu(&mut self, src: NodeId) -> NodeId {
        self.push(Layer::Relu { src })
    }

    pub fn softmax(&mut self, src: NodeId) -> NodeId {
        self.push(Layer::Softmax { src })
    }

    pub fn concat(&mut self, srcs: &[NodeId]) -> NodeId {
        self.push(Layer::Concat { srcs: srcs.to_vec() })
    }

    pub fn product(&mut self, lhs: NodeId, rhs: NodeId) -> NodeId {
        self.push(Layer::Product { lhs, rhs })
    }

    pub fn flatten(&mut self, src: NodeId) -> NodeId {
        self.push(Layer::Flatten { src })
    }

    /// `dense(h) -> relu` for each hidden width, then `dense(out)`, then an
    /// optional softmax head.
    pub fn mlp(inputs: usize, hidden: &[usize], outputs: usize, softmax: bool) -> Self {
        let mut a = Self::new();
        let mut h = a.input(0, inputs);
        for &w in hidden {
            h = a.dense(h, w);
            h = a.relu(h);
        }
        h = a.dense(h, outputs);
        if softmax {
            a.softmax(h);
        }
        a
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Node {
    layer: Layer,
    width: usize,
    /// Offset of this layer's weights in the flat parameter vector (dense only).
    offset: usize,
    fan_in: usize,
}

/// Network with a flat trainable parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Net {
    nodes: Vec<Node>,
    input_widths: Vec<usize>,
    params: Array1<f64>,
}

/// Activations of every layer from one forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    values: Vec<Array2<f64>>,
}

impl Trace {
    pub fn output(&self) -> ArrayView2<'_, f64> {
        self.values.last().expect("non-empty net").view()
    }

    pub fn into_output(mut self) -> Array2<f64> {
        self.values.pop().expect("non-empty net")
    }
}

/// Gradients from one backward pass.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub params: Array1<f64>,
    /// One entry per input record component.
    pub inputs: Vec<Array2<f64>>,
}

impl Net {
    /// Resolves widths and parameter offsets, then draws Glorot-uniform
    /// weights from `rng`. Biases start at zero.
    pub fn new(arch: &Architecture, rng: &mut Rng) -> Result<Self> {
        let mut net = Self::zeroed(arch)?;
        for node in &net.nodes {
            if let Layer::Dense { width, .. } = node.layer {
                let limit = (6.0 / (node.fan_in + width) as f64).sqrt();
                let n = node.fan_in * width;
                for p in net.params.slice_mut(s![node.offset..node.offset + n]).iter_mut() {
                    *p = rng.random_range(-limit..=limit);
                }
            }
        }
        Ok(net)
    }

    /// Same layout as [`Net::new`] with every parameter zero.
    pub fn zeroed(arch: &Architecture) -> Result<Self> {
        let layers = arch.layers();
        if layers.is_empty() {
            return Err(Error::config("architecture has no layers"));
        }
        let mut nodes: Vec<Node> = Vec::with_capacity(layers.len());
        let mut input_widths: Vec<Option<usize>> = Vec::new();
        let mut offset = 0;
        for (id, layer) in layers.iter().enumerate() {
            let width_of = |src: NodeId| -> Result<usize> {
                nodes
                    .get(src)
                    .map(|n| n.width)
                    .filter(|_| src < id)
                    .ok_or_else(|| Error::shape(format!("{}#{id}", layer.name()), "earlier layer", src))
            };
            let (width, fan_in, n_params) = match layer {
                Layer::Input { index, width } => {
                    if input_widths.len() <= *index {
                        input_widths.resize(index + 1, None);
                    }
                    if let Some(w) = input_widths[*index] {
                        if w != *width {
                            return Err(Error::shape(format!("input#{id}"), w, width));
                        }
                    }
                    input_widths[*index] = Some(*width);
                    (*width, 0, 0)
                }
                Layer::Dense { src, width } => {
                    let fan_in = width_of(*src)?;
                    (*width, fan_in, fan_in * width + width)
                }
                Layer::Relu { src } | Layer::Softmax { src } | Layer::Flatten { src } => (width_of(*src)?, 0, 0),
                Layer::Concat { srcs } => {
                    let mut total = 0;
                    for &s in srcs {
                        total += width_of(s)?;
                    }
                    (total, 0, 0)
                }
                Layer::Product { lhs, rhs } => {
                    let (a, b) = (width_of(*lhs)?, width_of(*rhs)?);
                    if a != b {
                        return Err(Error::shape(format!("elementwise-product#{id}"), a, b));
                    }
                    (a, 0, 0)
                }
            };
            if width == 0 {
                return Err(Error::shape(format!("{}#{id}", layer.name()), "width > 0", 0));
            }
            nodes.push(Node {
                layer: layer.clone(),
                width,
                offset,
                fan_in,
            });
            offset += n_params;
        }
        let input_widths = input_widths
            .into_iter()
            .enumerate()
            .map(|(i, w)| w.ok_or_else(|| Error::config(format!("input record component {i} never declared"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            nodes,
            input_widths,
            params: Array1::zeros(offset),
        })
    }

    pub fn params(&self) -> &Array1<f64> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Array1<f64> {
        &mut self.params
    }

    pub fn set_params(&mut self, params: Array1<f64>) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::shape("parameters", self.params.len(), params.len()));
        }
        self.params = params;
        Ok(())
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn input_widths(&self) -> &[usize] {
        &self.input_widths
    }

    pub fn output_width(&self) -> usize {
        self.nodes.last().map(|n| n.width).unwrap_or(0)
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            layers: self.nodes.iter().map(|n| n.layer.clone()).collect(),
        }
    }

    fn dense_weights(&self, node: &Node) -> (ArrayView2<'_, f64>, ndarray::ArrayView1<'_, f64>) {
        let n = node.fan_in * node.width;
        let w = self
            .params
            .slice(s![node.offset..node.offset + n])
            .into_shape_with_order((node.fan_in, node.width))
            .expect("contiguous weights");
        let b = self.params.slice(s![node.offset + n..node.offset + n + node.width]);
        (w, b)
    }

    /// Runs every layer on a batch. `inputs[i]` has one row per sample and
    /// `input_widths()[i]` columns.
    pub fn forward(&self, inputs: &[ArrayView2<'_, f64>]) -> Result<Trace> {
        if inputs.len() != self.input_widths.len() {
            return Err(Error::shape("input record", self.input_widths.len(), inputs.len()));
        }
        let batch = inputs.first().map(|a| a.nrows()).unwrap_or(0);
        let mut values: Vec<Array2<f64>> = Vec::with_capacity(self.nodes.len());
        for (id, node) in self.nodes.iter().enumerate() {
            let out = match &node.layer {
                Layer::Input { index, width } => {
                    let a = &inputs[*index];
                    if a.ncols() != *width || a.nrows() != batch {
                        return Err(Error::shape(
                            format!("input#{id}"),
                            format!("{batch}x{width}"),
                            format!("{}x{}", a.nrows(), a.ncols()),
                        ));
                    }
                    a.to_owned()
                }
                Layer::Dense { src, .. } => {
                    let (w, b) = self.dense_weights(node);
                    let mut out = values[*src].dot(&w);
                    out += &b;
                    out
                }
                Layer::Relu { src } => values[*src].mapv(|v| v.max(0.0)),
                Layer::Softmax { src } => {
                    let mut out = values[*src].clone();
                    softmax_rows(&mut out.view_mut());
                    out
                }
                Layer::Flatten { src } => values[*src].clone(),
                Layer::Concat { srcs } => {
                    let views: Vec<_> = srcs.iter().map(|&s| values[s].view()).collect();
                    ndarray::concatenate(Axis(1), &views).expect("equal batch sizes")
                }
                Layer::Product { lhs, rhs } => &values[*lhs] * &values[*rhs],
            };
            if !out.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite {
                    op: format!("{}#{id} (forward)", node.layer.name()),
                });
            }
            values.push(out);
        }
        Ok(Trace { values })
    }

    /// Convenience forward returning only the output.
    pub fn predict(&self, inputs: &[ArrayView2<'_, f64>]) -> Result<Array2<f64>> {
        Ok(self.forward(inputs)?.into_output())
    }

    /// Reverse pass: given `dL/d(output)`, returns `dL/d(params)` and
    /// `dL/d(inputs)`.
    pub fn backward(&self, trace: &Trace, grad_output: ArrayView2<'_, f64>) -> Result<Gradients> {
        let last = self.nodes.len() - 1;
        let out_shape = trace.values[last].dim();
        if grad_output.dim() != out_shape {
            return Err(Error::shape(
                "output gradient",
                format!("{}x{}", out_shape.0, out_shape.1),
                format!("{}x{}", grad_output.nrows(), grad_output.ncols()),
            ));
        }
        let batch = out_shape.0;
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; self.nodes.len()];
        grads[last] = Some(grad_output.to_owned());
        let mut pgrad = Array1::<f64>::zeros(self.params.len());
        let mut input_grads: Vec<Array2<f64>> = self.input_widths.iter().map(|&w| Array2::zeros((batch, w))).collect();

        fn accumulate(slot: &mut Option<Array2<f64>>, g: Array2<f64>) {
            match slot {
                Some(acc) => *acc += &g,
                None => *slot = Some(g),
            }
        }

        for id in (0..self.nodes.len()).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            if !g.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite {
                    op: format!("{}#{id} (backward)", node.layer.name()),
                });
            }
            match &node.layer {
                Layer::Input { index, .. } => input_grads[*index] += &g,
                Layer::Dense { src, .. } => {
                    let (w, _) = self.dense_weights(node);
                    let n = node.fan_in * node.width;
                    {
                        let mut gw: ArrayViewMut2<'_, f64> = pgrad
                            .slice_mut(s![node.offset..node.offset + n])
                            .into_shape_with_order((node.fan_in, node.width))
                            .expect("contiguous weights");
                        general_mat_mul(1.0, &trace.values[*src].t(), &g, 1.0, &mut gw);
                    }
                    let mut gb = pgrad.slice_mut(s![node.offset + n..node.offset + n + node.width]);
                    gb += &g.sum_axis(Axis(0));
                    accumulate(&mut grads[*src], g.dot(&w.t()));
                }
                Layer::Relu { src } => {
                    let mut gi = g;
                    Zip::from(&mut gi).and(&trace.values[id]).for_each(|gv, &o| {
                        if o <= 0.0 {
                            *gv = 0.0;
                        }
                    });
                    accumulate(&mut grads[*src], gi);
                }
                Layer::Softmax { src } => {
                    let gi = softmax_backward(trace.values[id].view(), g.view());
                    accumulate(&mut grads[*src], gi);
                }
                Layer::Flatten { src } => accumulate(&mut grads[*src], g),
                Layer::Concat { srcs } => {
                    let mut col = 0;
                    for &s in srcs {
                        let w = self.nodes[s].width;
                        accumulate(&mut grads[s], g.slice(s![.., col..col + w]).to_owned());
                        col += w;
                    }
                }
                Layer::Product { lhs, rhs } => {
                    let gl = &g * &trace.values[*rhs];
                    let gr = &g * &trace.values[*lhs];
                    accumulate(&mut grads[*lhs], gl);
                    accumulate(&mut grads[*rhs], gr);
                }
            }
        }
        Ok(Gradients {
            params: pgrad,
            inputs: input_grads,
        })
    }
}

/// Gradient of a scalar loss of the network output with respect to the
/// parameters. `loss` returns the value and `dL/d(output)`.
pub fn net_gradient<F>(net: &Net, inputs: &[ArrayView2<'_, f64>], loss: F) -> Result<(f64, Array1<f64>)>
where
    F: FnOnce(ArrayView2<'_, f64>) -> (f64, Array2<f64>),
{
    let trace = net.forward(inputs)?;
    let (value, g) = loss(trace.output());
    if !value.is_finite() {
        return Err(Error::NonFinite { op: "loss".into() });
    }
    let grads = net.backward(&trace, g.view())?;
    Ok((value, grads.params))
}

/// Numerically stable in-place softmax over each row.
pub fn softmax_rows(a: &mut ArrayViewMut2<'_, f64>) {
    for mut row in a.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let total = row.sum();
        row /= total;
    }
}

/// Vector-Jacobian product of a row-wise softmax with outputs `s`.
pub fn softmax_backward(s: ArrayView2<'_, f64>, g: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = Array2::zeros(s.dim());
    Zip::from(out.rows_mut())
        .and(s.rows())
        .and(g.rows())
        .for_each(|mut o, s, g| {
            let dot = s.dot(&g);
            Zip::from(&mut o)
                .and(&s)
                .and(&g)
                .for_each(|o, &s, &g| *o = s * (g - dot));
        });
    out
}
