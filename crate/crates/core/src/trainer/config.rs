use std::fmt::Write as _;

use crate::approximators::LossU;
use crate::error::{Error, Result};
use crate::explainer::{FeedbackFusion, PriorMethod};
use crate::net::OptimizerKind;

/// Hyperparameters of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Number of features to select.
    pub k: usize,
    /// Temperature of the relaxed top-k sampler.
    pub tau: f64,
    /// Weight on the unselected-feature loss.
    pub lambda_u: f64,
    /// Weight on the prior constraint loss.
    pub lambda_e: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub decay: f64,
    pub seed: u64,
    pub loss_u: LossU,
    pub use_output_feedback: bool,
    /// Fusion used when `use_output_feedback` is set.
    pub feedback_fusion: FeedbackFusion,
    pub prior_method: PriorMethod,
    /// Random directions per sliced-Wasserstein evaluation.
    pub n_projections: usize,
    pub explainer_hidden: Vec<usize>,
    pub approximator_hidden: Vec<usize>,
}

/// Weights searched for `lambda_u` and `lambda_e`.
pub const LAMBDA_GRID: [f64; 5] = [0.0, 1e-3, 1e-2, 1e-1, 1.0];

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            k: 4,
            tau: 0.5,
            lambda_u: 1.0,
            lambda_e: 0.0,
            epochs: 10,
            batch_size: 64,
            optimizer: OptimizerKind::Adam {
                beta1: 0.9,
                beta2: 0.999,
            },
            learning_rate: 1e-3,
            decay: 0.0,
            seed: 0,
            loss_u: LossU::CrossEntropy,
            use_output_feedback: true,
            feedback_fusion: FeedbackFusion::ConcatEmbedded,
            prior_method: PriorMethod::None,
            n_projections: 128,
            explainer_hidden: vec![64, 64],
            approximator_hidden: vec![64],
        }
    }
}

fn list(v: &[usize]) -> String {
    v.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(",")
}

fn parse_list(s: &str) -> Result<Vec<usize>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|w| {
            w.trim()
                .parse()
                .map_err(|_| Error::config(format!("bad width list {s:?}")))
        })
        .collect()
}

impl TrainConfig {
    /// Fusion actually used by the explainer.
    pub fn fusion(&self) -> FeedbackFusion {
        if self.use_output_feedback {
            self.feedback_fusion
        } else {
            FeedbackFusion::None
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if self.k == 0 || self.k > d {
            return Err(Error::config(format!("k={} must be in [1, {d}]", self.k)));
        }
        if !(self.tau > 0.0) {
            return Err(Error::config(format!("tau={} must be positive", self.tau)));
        }
        for (name, v) in [("lambda_u", self.lambda_u), ("lambda_e", self.lambda_e)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name}={v} must be finite and non-negative")));
            }
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be positive"));
        }
        if !(self.learning_rate > 0.0) || !(self.decay >= 0.0) {
            return Err(Error::config("learning_rate must be positive and decay non-negative"));
        }
        if self.n_projections == 0 {
            return Err(Error::config("n_projections must be positive"));
        }
        if self.use_output_feedback && self.feedback_fusion == FeedbackFusion::None {
            return Err(Error::config("use_output_feedback is set but feedback_fusion is none"));
        }
        Ok(())
    }

    /// One `key=value` per line, fixed key order, floats in shortest
    /// round-trip form. This text is embedded in checkpoints.
    pub fn to_canonical_text(&self) -> String {
        let (beta1, beta2, rho) = match self.optimizer {
            OptimizerKind::Adam { beta1, beta2 } => (beta1, beta2, 0.0),
            OptimizerKind::RmsProp { rho } | OptimizerKind::Adadelta { rho } => (0.0, 0.0, rho),
            OptimizerKind::Sgd => (0.0, 0.0, 0.0),
        };
        let mut s = String::new();
        let _ = writeln!(s, "k={}", self.k);
        let _ = writeln!(s, "tau={:?}", self.tau);
        let _ = writeln!(s, "lambda_u={:?}", self.lambda_u);
        let _ = writeln!(s, "lambda_e={:?}", self.lambda_e);
        let _ = writeln!(s, "epochs={}", self.epochs);
        let _ = writeln!(s, "batch_size={}", self.batch_size);
        let _ = writeln!(s, "optimizer={}", self.optimizer.name());
        let _ = writeln!(s, "beta1={beta1:?}");
        let _ = writeln!(s, "beta2={beta2:?}");
        let _ = writeln!(s, "rho={rho:?}");
        let _ = writeln!(s, "learning_rate={:?}", self.learning_rate);
        let _ = writeln!(s, "decay={:?}", self.decay);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "loss_u={}", self.loss_u.name());
        let _ = writeln!(s, "use_output_feedback={}", self.use_output_feedback);
        let _ = writeln!(s, "feedback_fusion={}", self.feedback_fusion.name());
        let _ = writeln!(s, "prior_method={}", self.prior_method.name());
        let _ = writeln!(s, "n_projections={}", self.n_projections);
        let _ = writeln!(s, "explainer_hidden={}", list(&self.explainer_hidden));
        let _ = writeln!(s, "approximator_hidden={}", list(&self.approximator_hidden));
        s
    }

    pub fn from_canonical_text(text: &str) -> Result<Self> {
        let mut c = TrainConfig::default();
        let (mut beta1, mut beta2, mut rho, mut opt) = (0.9, 0.999, 0.9, String::from("adam"));
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("malformed config line {line:?}")))?;
            let bad = || Error::config(format!("bad value for {key}: {value:?}"));
            let f = |v: &str| v.parse::<f64>().map_err(|_| bad());
            let u = |v: &str| v.parse::<usize>().map_err(|_| bad());
            match key {
                "k" => c.k = u(value)?,
                "tau" => c.tau = f(value)?,
                "lambda_u" => c.lambda_u = f(value)?,
                "lambda_e" => c.lambda_e = f(value)?,
                "epochs" => c.epochs = u(value)?,
                "batch_size" => c.batch_size = u(value)?,
                "optimizer" => opt = value.to_string(),
                "beta1" => beta1 = f(value)?,
                "beta2" => beta2 = f(value)?,
                "rho" => rho = f(value)?,
                "learning_rate" => c.learning_rate = f(value)?,
                "decay" => c.decay = f(value)?,
                "seed" => c.seed = value.parse().map_err(|_| bad())?,
                "loss_u" => c.loss_u = LossU::from_name(value)?,
                "use_output_feedback" => c.use_output_feedback = value.parse().map_err(|_| bad())?,
                "feedback_fusion" => c.feedback_fusion = FeedbackFusion::from_name(value)?,
                "prior_method" => c.prior_method = PriorMethod::from_name(value)?,
                "n_projections" => c.n_projections = u(value)?,
                "explainer_hidden" => c.explainer_hidden = parse_list(value)?,
                "approximator_hidden" => c.approximator_hidden = parse_list(value)?,
                other => return Err(Error::config(format!("unknown config key {other:?}"))),
            }
        }
        c.optimizer = match OptimizerKind::from_name(&opt)? {
            OptimizerKind::Adam { .. } => OptimizerKind::Adam { beta1, beta2 },
            OptimizerKind::RmsProp { .. } => OptimizerKind::RmsProp { rho },
            OptimizerKind::Adadelta { .. } => OptimizerKind::Adadelta { rho },
            OptimizerKind::Sgd => OptimizerKind::Sgd,
        };
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_text_round_trips() {
        let c = TrainConfig {
            k: 7,
            tau: 0.1 + 0.2,
            lambda_u: 1e-3,
            optimizer: OptimizerKind::RmsProp { rho: 0.85 },
            loss_u: LossU::SlicedWasserstein,
            prior_method: PriorMethod::GradientTimesInput,
            explainer_hidden: vec![],
            seed: u64::MAX,
            ..TrainConfig::default()
        };
        let back = TrainConfig::from_canonical_text(&c.to_canonical_text()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_canonical_text(), c.to_canonical_text());
    }

    #[test]
    fn validation_catches_bad_values() {
        let ok = TrainConfig::default();
        assert!(ok.validate(10).is_ok());
        assert!(TrainConfig { k: 11, ..ok.clone() }.validate(10).is_err());
        assert!(TrainConfig { tau: 0.0, ..ok.clone() }.validate(10).is_err());
        assert!(TrainConfig {
            lambda_u: -1.0,
            ..ok.clone()
        }
        .validate(10)
        .is_err());
        assert!(TrainConfig { batch_size: 0, ..ok }.validate(10).is_err());
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(TrainConfig::from_canonical_text("warp=9\n").is_err());
    }
}
