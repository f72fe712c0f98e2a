//! Alternating training of the explainer against the two approximators.
//!
//! Each minibatch runs one approximator step (explainer frozen) and then one
//! explainer step (approximators frozen). The epoch counter `m` drives the
//! decay of the prior's influence and increments after every full pass.

mod checkpoint;
mod config;

use std::fmt;
use std::time::Instant;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;

pub use checkpoint::{Checkpoint, OptimizerState, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{TrainConfig, LAMBDA_GRID};

use crate::approximators::{
    cross_entropy_batch, impute_batch, random_directions, relativistic_flip_batch, sliced_wasserstein_with_grad,
    ApproximatorPair, LossU,
};
use crate::baselines::attribution_batch;
use crate::error::{Error, Result};
use crate::explainer::{
    fuse_prior_backward, fuse_prior_batch, prior_constraint_grad, prior_constraint_loss, ExplainerNet, PriorMethod,
};
use crate::model::BlackBoxModel;
use crate::net::{Net, Optimizer};
use crate::rng::{stream, Rng, Stream};
use crate::sampler::{sample_gumbel_noise, GumbelNoise, RelaxedTopK};
use crate::types::SampleSet;

/// Features, cached model outputs, and (optionally) cached prior scores.
/// True labels are deliberately absent.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub x: Array2<f64>,
    pub y: Array2<f64>,
    pub prior: Option<Array2<f64>>,
}

impl TrainingSet {
    /// Computes prior scores once per sample when the config asks for them.
    pub fn new(samples: &SampleSet, model: Option<&dyn BlackBoxModel>, method: PriorMethod) -> Result<Self> {
        let prior = match (method, model) {
            (PriorMethod::None, _) => None,
            (_, Some(m)) => Some(attribution_batch(
                m,
                method,
                samples.features(),
                samples.outputs(),
                None,
            )?),
            (_, None) => return Err(Error::config("prior scores need the model")),
        };
        Ok(Self {
            x: samples.x.clone(),
            y: samples.y.clone(),
            prior,
        })
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }
}

/// Pre-update losses of one step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepLosses {
    pub loss_s: f64,
    pub loss_u: f64,
    pub loss_e: f64,
    /// The quantity the step minimized.
    pub objective: f64,
}

/// Per-epoch means. `loss_s` and `loss_u` come from the approximator steps,
/// `loss_e` and `objective` from the explainer steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: u64,
    pub loss_s: f64,
    pub loss_u: f64,
    pub loss_e: f64,
    pub explainer_objective: f64,
    pub seconds: f64,
}

impl fmt::Display for EpochLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "epoch={} L_s={:.6} L_u={:.6} L_e={:.6} seconds={:.3}",
            self.epoch, self.loss_s, self.loss_u, self.loss_e, self.seconds
        )
    }
}

/// Randomness consumed by one step: a Gumbel draw per sample and, for the
/// Wasserstein loss, the projection directions.
#[derive(Debug, Clone)]
pub struct StepNoise {
    pub gumbel: Vec<GumbelNoise>,
    pub directions: Option<Array2<f64>>,
}

/// Explainer, approximators, their optimizers, and the loop's RNG.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub config: TrainConfig,
    pub explainer: ExplainerNet,
    pub pair: ApproximatorPair,
    opt_explainer: Optimizer,
    opt_selected: Optimizer,
    opt_unselected: Optimizer,
    epoch: u64,
    batches: u64,
    rng: Rng,
}

fn check(value: f64, batch: u64, loss: &'static str) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::Divergence {
            batch: batch as usize,
            loss,
        })
    }
}

impl Trainer {
    /// Fresh parameters drawn from the `init` stream of `config.seed`.
    pub fn new(config: TrainConfig, d: usize, c: usize) -> Result<Self> {
        config.validate(d)?;
        let mut init = stream(config.seed, Stream::Init);
        let explainer = ExplainerNet::new(d, c, &config.explainer_hidden, config.fusion(), &mut init)?;
        let pair = ApproximatorPair::new(d, c, &config.approximator_hidden, &mut init)?;
        let opt = |net: &Net| Optimizer::new(config.optimizer, config.learning_rate, config.decay, net.n_params());
        Ok(Self {
            opt_explainer: opt(&explainer.net),
            opt_selected: opt(&pair.selected),
            opt_unselected: opt(&pair.unselected),
            explainer,
            pair,
            epoch: 0,
            batches: 0,
            rng: stream(config.seed, Stream::Gumbel),
            config,
        })
    }

    /// Number of completed epochs, the `m` of prior fusion.
    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn batches(&self) -> u64 {
        self.batches
    }

    fn fused(&self, z: ArrayView2<'_, f64>, prior: Option<ArrayView2<'_, f64>>) -> Result<Array2<f64>> {
        match prior {
            Some(r) => fuse_prior_batch(z, r, self.epoch),
            None => Ok(z.to_owned()),
        }
    }

    /// Fresh Gumbel noise for `n` rows, plus projection directions when the
    /// Wasserstein loss is in use.
    pub fn draw_noise(&mut self, n: usize, d: usize, c: usize) -> Result<StepNoise> {
        let gumbel = (0..n)
            .map(|_| sample_gumbel_noise(d, self.config.k, &mut self.rng))
            .collect::<Result<Vec<_>>>()?;
        let directions = match self.config.loss_u {
            LossU::SlicedWasserstein => Some(random_directions(c, self.config.n_projections, &mut self.rng)),
            LossU::CrossEntropy => None,
        };
        Ok(StepNoise { gumbel, directions })
    }

    fn relaxed_masks(&self, z: ArrayView2<'_, f64>, noise: &StepNoise) -> Result<(Array2<f64>, Vec<RelaxedTopK>)> {
        if noise.gumbel.len() != z.nrows() {
            return Err(Error::shape("gumbel noise rows", z.nrows(), noise.gumbel.len()));
        }
        let mut v = Array2::zeros(z.dim());
        let mut draws = Vec::with_capacity(z.nrows());
        for (i, (row, xi)) in z.rows().into_iter().zip(&noise.gumbel).enumerate() {
            let draw = RelaxedTopK::forward(row, self.config.k, self.config.tau, xi)?;
            v.row_mut(i).assign(&ndarray::ArrayView1::from(&draw.v[..]));
            draws.push(draw);
        }
        Ok((v, draws))
    }

    /// Masks the frozen explainer would draw under `noise`.
    pub fn masks(
        &self,
        x: ArrayView2<'_, f64>,
        y: ArrayView2<'_, f64>,
        prior: Option<ArrayView2<'_, f64>>,
        noise: &StepNoise,
    ) -> Result<Array2<f64>> {
        let z = self.explainer.net.predict(&[x, y])?;
        let zf = self.fused(z.view(), prior)?;
        Ok(self.relaxed_masks(zf.view(), noise)?.0)
    }

    /// Approximator objective `L_s + lambda_u * L_u` under masks `v`, with
    /// gradients for `A_s` and `A_u` (the latter `None` when `lambda_u = 0`).
    pub fn approximator_gradients(
        &self,
        x: ArrayView2<'_, f64>,
        y: ArrayView2<'_, f64>,
        v: ArrayView2<'_, f64>,
        directions: Option<ArrayView2<'_, f64>>,
    ) -> Result<(StepLosses, Array1<f64>, Option<Array1<f64>>)> {
        let batch = self.batches;
        let (xs, xu) = impute_batch(x, v);
        let ts = self.pair.selected.forward(&[xs.view()])?;
        let tu = self.pair.unselected.forward(&[xu.view()])?;
        let (ls, g_ps) = cross_entropy_batch(y, ts.output());
        let (lu, g_pu) = match (self.config.loss_u, directions) {
            (LossU::CrossEntropy, _) => cross_entropy_batch(y, tu.output()),
            (LossU::SlicedWasserstein, Some(dirs)) => sliced_wasserstein_with_grad(y, tu.output(), dirs)?,
            (LossU::SlicedWasserstein, None) => return Err(Error::config("sliced Wasserstein loss needs directions")),
        };
        check(ls, batch, "L_s")?;
        check(lu, batch, "L_u")?;
        let gs = self.pair.selected.backward(&ts, g_ps.view())?.params;
        let lambda = self.config.lambda_u;
        let gu = if lambda > 0.0 {
            Some(self.pair.unselected.backward(&tu, (g_pu * lambda).view())?.params)
        } else {
            None
        };
        let losses = StepLosses {
            loss_s: ls,
            loss_u: lu,
            loss_e: 0.0,
            objective: ls + lambda * lu,
        };
        Ok((losses, gs, gu))
    }

    /// Approximator update under given masks `v`; explainer untouched.
    pub fn approximator_step_with_masks(
        &mut self,
        x: ArrayView2<'_, f64>,
        y: ArrayView2<'_, f64>,
        v: ArrayView2<'_, f64>,
    ) -> Result<StepLosses> {
        let directions = match self.config.loss_u {
            LossU::SlicedWasserstein => Some(random_directions(y.ncols(), self.config.n_projections, &mut self.rng)),
            LossU::CrossEntropy => None,
        };
        let (losses, gs, gu) = self.approximator_gradients(x, y, v, directions.as_ref().map(|d| d.view()))?;
        self.opt_selected.step(self.pair.selected.params_mut(), &gs);
        if let Some(gu) = gu {
            self.opt_unselected.step(self.pair.unselected.params_mut(), &gu);
        }
        Ok(losses)
    }

    /// Minimizes `L_s + lambda_u * L_u` over both approximators with masks
    /// drawn from the frozen explainer.
    pub fn approximator_step(
        &mut self,
        x: ArrayView2<'_, f64>,
        y: ArrayView2<'_, f64>,
        prior: Option<ArrayView2<'_, f64>>,
    ) -> Result<StepLosses> {
        let noise = self.draw_noise(x.nrows(), x.ncols(), y.ncols())?;
        let v = self.masks(x, y, prior, &noise)?;
        self.approximator_step_with_masks(x, y, v.view())
    }

    /// Explainer objective `L_s + lambda_u * L~_u + lambda_e * L_e` under
    /// fixed noise, and its gradient with respect to the explainer
    /// parameters. `L~_u` is the cross-entropy against the flipped target,
    /// or the negated Wasserstein loss.
    pub fn explainer_gradient(
        &self,
        x: ArrayView2<'_, f64>,
        y: ArrayView2<'_, f64>,
        prior: Option<ArrayView2<'_, f64>>,
        noise: &StepNoise,
    ) -> Result<(StepLosses, Array1<f64>)> {
        let batch = self.batches;
        let m = self.epoch;
        let te = self.explainer.forward(x, y)?;
        let z = te.output();
        let zf = self.fused(z, prior)?;
        let (v, draws) = self.relaxed_masks(zf.view(), noise)?;
        let (xs, xu) = impute_batch(x, v.view());

        let ts = self.pair.selected.forward(&[xs.view()])?;
        let (ls, g_ps) = cross_entropy_batch(y, ts.output());
        check(ls, batch, "L_s")?;
        let mut g_xs = self.pair.selected.backward(&ts, g_ps.view())?.inputs.swap_remove(0);

        let lambda_u = self.config.lambda_u;
        let mut lu = 0.0;
        if lambda_u > 0.0 {
            let tu = self.pair.unselected.forward(&[xu.view()])?;
            let (value, g_pu) = match (self.config.loss_u, &noise.directions) {
                (LossU::CrossEntropy, _) => cross_entropy_batch(relativistic_flip_batch(y).view(), tu.output()),
                (LossU::SlicedWasserstein, Some(dirs)) => {
                    let (sw, g) = sliced_wasserstein_with_grad(y, tu.output(), dirs.view())?;
                    (-sw, -g)
                }
                (LossU::SlicedWasserstein, None) => {
                    return Err(Error::config("sliced Wasserstein loss needs directions"))
                }
            };
            check(value, batch, "L_u")?;
            lu = value;
            let g_xu = self
                .pair
                .unselected
                .backward(&tu, (g_pu * lambda_u).view())?
                .inputs
                .swap_remove(0);
            // x_s = x * v and x_u = x - x * v, so dL/dv = x * (g_xs - g_xu).
            g_xs -= &g_xu;
        }
        let g_v = &g_xs * &x;

        let mut g_zf = Array2::zeros(zf.dim());
        for (i, draw) in draws.iter().enumerate() {
            g_zf.row_mut(i).assign(&Array1::from(draw.backward(g_v.row(i))));
        }

        let (le, g_z) = match prior {
            Some(_) => {
                let le = prior_constraint_loss(zf.view(), z, m);
                check(le, batch, "L_e")?;
                let lambda_e = self.config.lambda_e;
                // L_e depends on z directly and through the fused scores.
                let q = prior_constraint_grad(zf.view(), z, m);
                g_zf.scaled_add(-lambda_e, &q);
                let mut g = fuse_prior_backward(z, zf.view(), g_zf.view(), m);
                g.scaled_add(lambda_e, &q);
                (le, g)
            }
            None => (0.0, g_zf),
        };

        let grads = self.explainer.net.backward(&te, g_z.view())?;
        let losses = StepLosses {
            loss_s: ls,
            loss_u: lu,
            loss_e: le,
            objective: ls + lambda_u * lu + self.config.lambda_e * le,
        };
        Ok((losses, grads.params))
    }

    /// One explainer update with fresh masks; approximators untouched.
    pub fn explainer_step(
        &mut self,
        x: ArrayView2<'_, f64>,
        y: ArrayView2<'_, f64>,
        prior: Option<ArrayView2<'_, f64>>,
    ) -> Result<StepLosses> {
        let noise = self.draw_noise(x.nrows(), x.ncols(), y.ncols())?;
        let (losses, grad) = self.explainer_gradient(x, y, prior, &noise)?;
        self.opt_explainer.step(self.explainer.net.params_mut(), &grad);
        Ok(losses)
    }

    /// One pass over `data` in a fresh random order, then `m += 1`.
    pub fn run_epoch(&mut self, data: &TrainingSet) -> Result<EpochLog> {
        let start = Instant::now();
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut self.rng);
        let mut sums = [0.0; 4];
        let mut n = 0usize;
        for chunk in order.chunks(self.config.batch_size) {
            let xb = data.x.select(Axis(0), chunk);
            let yb = data.y.select(Axis(0), chunk);
            let rb = data.prior.as_ref().map(|r| r.select(Axis(0), chunk));
            let a = self.approximator_step(xb.view(), yb.view(), rb.as_ref().map(|r| r.view()))?;
            let e = self.explainer_step(xb.view(), yb.view(), rb.as_ref().map(|r| r.view()))?;
            self.batches += 1;
            for (s, v) in sums.iter_mut().zip([a.loss_s, a.loss_u, e.loss_e, e.objective]) {
                *s += v;
            }
            n += 1;
        }
        let n = n.max(1) as f64;
        let log = EpochLog {
            epoch: self.epoch,
            loss_s: sums[0] / n,
            loss_u: sums[1] / n,
            loss_e: sums[2] / n,
            explainer_objective: sums[3] / n,
            seconds: start.elapsed().as_secs_f64(),
        };
        self.epoch += 1;
        log::info!("{log}");
        Ok(log)
    }

    /// Trains until `config.epochs` epochs have completed in total, calling
    /// `on_epoch` after each. If an epoch diverges, the trainer is rolled
    /// back to the end of the last good epoch before the error is returned.
    pub fn fit<F>(&mut self, data: &TrainingSet, mut on_epoch: F) -> Result<Vec<EpochLog>>
    where
        F: FnMut(&Trainer, &EpochLog) -> Result<()>,
    {
        if data.is_empty() {
            return Err(Error::config("training set is empty"));
        }
        if data.x.ncols() != self.explainer.d() || data.y.ncols() != self.explainer.c() {
            return Err(Error::shape(
                "training set",
                format!("d={} c={}", self.explainer.d(), self.explainer.c()),
                format!("d={} c={}", data.x.ncols(), data.y.ncols()),
            ));
        }
        let mut logs = Vec::new();
        while (self.epoch as usize) < self.config.epochs {
            let snapshot = self.clone();
            match self.run_epoch(data) {
                Ok(log) => {
                    on_epoch(self, &log)?;
                    logs.push(log);
                }
                Err(e) => {
                    log::error!("training aborted: {e}; keeping epoch {} state", snapshot.epoch);
                    *self = snapshot;
                    return Err(e);
                }
            }
        }
        Ok(logs)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        let state = |o: &Optimizer| OptimizerState {
            steps: o.steps(),
            slots: o.slots().to_vec(),
        };
        Checkpoint {
            format_version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            d: self.explainer.d(),
            c: self.explainer.c(),
            explainer_params: self.explainer.net.params().clone(),
            selected_params: self.pair.selected.params().clone(),
            unselected_params: self.pair.unselected.params().clone(),
            epoch: self.epoch,
            batches: self.batches,
            rng_state: crate::rng::save_state(&self.rng),
            optimizers: [
                state(&self.opt_explainer),
                state(&self.opt_selected),
                state(&self.opt_unselected),
            ],
        }
    }

    /// Rebuilds the exact training state stored in `ckpt`.
    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let mut t = Trainer::new(ckpt.config.clone(), ckpt.d, ckpt.c)?;
        t.explainer.net.set_params(ckpt.explainer_params.clone())?;
        t.pair.selected.set_params(ckpt.selected_params.clone())?;
        t.pair.unselected.set_params(ckpt.unselected_params.clone())?;
        for (opt, s) in [&mut t.opt_explainer, &mut t.opt_selected, &mut t.opt_unselected]
            .into_iter()
            .zip(&ckpt.optimizers)
        {
            opt.restore(s.steps, s.slots.clone())?;
        }
        t.epoch = ckpt.epoch;
        t.batches = ckpt.batches;
        t.rng = crate::rng::load_state(&ckpt.rng_state)?;
        Ok(t)
    }
}

/// Result of a complete training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub trainer: Trainer,
    pub logs: Vec<EpochLog>,
    pub checkpoint: Checkpoint,
}

/// Builds a trainer for `samples` and runs `config.epochs` epochs. `model`
/// is only consulted for prior scores.
pub fn train(samples: &SampleSet, model: Option<&dyn BlackBoxModel>, config: &TrainConfig) -> Result<TrainOutcome> {
    let data = TrainingSet::new(samples, model, config.prior_method)?;
    let mut trainer = Trainer::new(config.clone(), samples.n_features(), samples.n_classes())?;
    let logs = trainer.fit(&data, |_, _| Ok(()))?;
    let checkpoint = trainer.checkpoint();
    Ok(TrainOutcome {
        trainer,
        logs,
        checkpoint,
    })
}
