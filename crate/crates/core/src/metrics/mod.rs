//! Evaluation: fidelity against the model and against retrained
//! approximators, sensitivity, randomization sanity checks, timing, and the
//! enumeration oracles used by the theory checks.

mod fidelity;
mod oracle;
mod sanity;

use std::fmt;
use std::str::FromStr;

pub use fidelity::{fidelity_approx, fidelity_model, hard_masks, impute_hard, sensitivity, time_per_sample};
pub use oracle::{
    brute_force_best_subset, discretize_quantiles, mi_estimate, subset_objective, LAPLACE_ALPHA, MAX_ENUM_FEATURES,
};
pub use sanity::{
    mask_cosine, random_mask_cosine, sanity_data_randomization, sanity_model_randomization, sanity_model_retrain,
    SanityMode,
};

use crate::approximators::FitOptions;
use crate::error::{Error, Result};
use crate::explainer::FeatureScorer;
use crate::model::BlackBoxModel;
use crate::rng::{stream, substream, Stream};
use crate::types::SampleSet;

/// One evaluation run. Percentages lie in `[0, 100]`; sanity scores are
/// `None` when the test was not run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub fs_m: f64,
    pub fu_m: f64,
    pub fs_a: f64,
    pub fu_a: f64,
    pub sen: f64,
    pub sanity_model: Option<f64>,
    pub sanity_data: Option<f64>,
    /// Seconds per sample.
    pub tps: f64,
    pub k: usize,
    pub n_eval: usize,
}

pub const REPORT_KEYS: [&str; 10] = [
    "FS-M",
    "FU-M",
    "FS-A",
    "FU-A",
    "SEN",
    "SANITY-MODEL",
    "SANITY-DATA",
    "TPS",
    "K",
    "N-EVAL",
];

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| format!("{v:.2}"))
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "FS-M={}", pct(Some(self.fs_m)))?;
        writeln!(f, "FU-M={}", pct(Some(self.fu_m)))?;
        writeln!(f, "FS-A={}", pct(Some(self.fs_a)))?;
        writeln!(f, "FU-A={}", pct(Some(self.fu_a)))?;
        writeln!(f, "SEN={}", pct(Some(self.sen)))?;
        writeln!(f, "SANITY-MODEL={}", pct(self.sanity_model))?;
        writeln!(f, "SANITY-DATA={}", pct(self.sanity_data))?;
        writeln!(f, "TPS={:.6e}", self.tps)?;
        writeln!(f, "K={}", self.k)?;
        writeln!(f, "N-EVAL={}", self.n_eval)
    }
}

impl FromStr for MetricsReport {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut values = std::collections::HashMap::new();
        for line in s.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("malformed report line {line:?}")))?;
            if !REPORT_KEYS.contains(&k) {
                return Err(Error::config(format!("unknown report key {k:?}")));
            }
            values.insert(k, v.trim());
        }
        let get = |k: &str| {
            values
                .get(k)
                .copied()
                .ok_or_else(|| Error::config(format!("report lacks {k}")))
        };
        let num = |k: &str| -> Result<f64> { get(k)?.parse().map_err(|_| Error::config(format!("bad value for {k}"))) };
        let opt = |k: &str| -> Result<Option<f64>> {
            match get(k)? {
                "NA" => Ok(None),
                v => v
                    .parse()
                    .map(Some)
                    .map_err(|_| Error::config(format!("bad value for {k}"))),
            }
        };
        let int =
            |k: &str| -> Result<usize> { get(k)?.parse().map_err(|_| Error::config(format!("bad value for {k}"))) };
        Ok(Self {
            fs_m: num("FS-M")?,
            fu_m: num("FU-M")?,
            fs_a: num("FS-A")?,
            fu_a: num("FU-A")?,
            sen: num("SEN")?,
            sanity_model: opt("SANITY-MODEL")?,
            sanity_data: opt("SANITY-DATA")?,
            tps: num("TPS")?,
            k: int("K")?,
            n_eval: int("N-EVAL")?,
        })
    }
}

/// Knobs of [`evaluate`].
#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub k: usize,
    /// Hidden widths of the retrained approximators.
    pub approximator_hidden: Vec<usize>,
    /// Budget for retraining the FS-A/FU-A approximators.
    pub retrain: FitOptions,
    /// Perturbation radius as a fraction of each feature's range.
    pub sen_radius: f64,
    pub n_perturb: usize,
    /// Samples used for SEN (the first ones of the evaluation set).
    pub sen_samples: usize,
    pub timing_samples: usize,
    pub sanity_model: bool,
    pub seed: u64,
}

impl EvalOptions {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            approximator_hidden: vec![64],
            retrain: FitOptions::default(),
            sen_radius: 0.05,
            n_perturb: 32,
            sen_samples: 100,
            timing_samples: 100,
            sanity_model: true,
            seed,
        }
    }
}

/// Runs the full protocol for one explainer. `train` supplies the inputs
/// for retraining approximators; `eval` is where every metric is measured.
/// The data-randomization test is left to the caller.
pub fn evaluate(
    scorer: &dyn FeatureScorer,
    model: &dyn BlackBoxModel,
    train: &SampleSet,
    eval: &SampleSet,
    opts: &EvalOptions,
) -> Result<MetricsReport> {
    let k = opts.k;
    let train_sets = hard_masks(scorer, train, k)?;
    let eval_sets = hard_masks(scorer, eval, k)?;
    let fs_m = fidelity_model(model, eval, &eval_sets, true)?;
    let fu_m = fidelity_model(model, eval, &eval_sets, false)?;
    let hidden = &opts.approximator_hidden;
    let fs_a = fidelity_approx(
        train,
        &train_sets,
        eval,
        &eval_sets,
        true,
        hidden,
        opts.retrain,
        &mut substream(opts.seed, Stream::Eval, 1),
    )?;
    let fu_a = fidelity_approx(
        train,
        &train_sets,
        eval,
        &eval_sets,
        false,
        hidden,
        opts.retrain,
        &mut substream(opts.seed, Stream::Eval, 2),
    )?;
    let ranges: Vec<f64> = eval
        .x
        .columns()
        .into_iter()
        .map(|c| {
            let hi = c.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = c.iter().cloned().fold(f64::INFINITY, f64::min);
            if hi > lo {
                hi - lo
            } else {
                1.0
            }
        })
        .collect();
    let radius: Vec<f64> = ranges.iter().map(|r| r * opts.sen_radius).collect();
    let sen_set = eval.select(&(0..opts.sen_samples.min(eval.len())).collect::<Vec<_>>());
    let sen = sensitivity(
        scorer,
        model,
        &sen_set,
        &radius,
        opts.n_perturb,
        &mut stream(opts.seed, Stream::Perturb),
    )?;
    let sanity_model = if opts.sanity_model {
        match sanity_model_randomization(scorer, model, eval, k, &mut substream(opts.seed, Stream::Model, 99)) {
            Ok(v) => Some(v),
            Err(Error::Config(msg)) => {
                log::warn!("model randomization skipped: {msg}");
                None
            }
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    let tps = time_per_sample(scorer, model, eval, k, opts.timing_samples)?;
    Ok(MetricsReport {
        fs_m,
        fu_m,
        fs_a,
        fu_a,
        sen,
        sanity_model,
        sanity_data: None,
        tps,
        k,
        n_eval: eval.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_round_trips_with_two_decimals() {
        let r = MetricsReport {
            fs_m: 99.0,
            fu_m: 51.256,
            fs_a: 100.0,
            fu_a: 0.0,
            sen: 2.71234,
            sanity_model: Some(12.5),
            sanity_data: None,
            tps: 2e-3,
            k: 4,
            n_eval: 250,
        };
        let text = r.to_string();
        assert!(text.contains("FU-M=51.26\n"));
        assert!(text.contains("SANITY-DATA=NA\n"));
        for key in REPORT_KEYS {
            assert_eq!(text.lines().filter(|l| l.starts_with(&format!("{key}="))).count(), 1);
        }
        let back: MetricsReport = text.parse().unwrap();
        assert_eq!(back.to_string(), text);
        assert_eq!(back.sanity_data, None);
    }
}
