use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};

use meed::baselines::{run_ablation, AblationVariant};
use meed::data::{generate_synthetic, mnist_pair, train_given_model, Dataset, GivenModelSpec, Splits};
use meed::explainer::FeatureScorer;
use meed::io::write_atomic;
use meed::metrics::{
    evaluate, hard_masks, sanity_data_randomization, sanity_model_randomization, sanity_model_retrain, EvalOptions,
    MetricsReport, SanityMode,
};
use meed::model::{BlackBoxModel, MlpModel};
use meed::rng::{substream, Stream};
use meed::sampler::topk_indices;
use meed::trainer::{Checkpoint, Trainer, TrainingSet};
use meed::types::SampleSet;

use crate::config::{DataSource, RunConfig};
use crate::CliError;

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const LOG_FILE: &str = "train.log";
pub const REPORT_FILE: &str = "report.txt";
pub const SANITY_FILE: &str = "sanity.txt";
pub const EXPLAIN_FILE: &str = "explanations.txt";
pub const DATA_FILE: &str = "data.csv";

/// Command-line overrides shared by the subcommands.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub checkpoint: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub k: Option<usize>,
    pub seed: Option<u64>,
    pub data: Option<PathBuf>,
    pub model: Option<PathBuf>,
}

fn load_config(path: &Path, o: &Overrides) -> Result<RunConfig, CliError> {
    let mut c = RunConfig::load(path)?;
    if let Some(seed) = o.seed {
        c.seed = seed;
        c.train.seed = seed;
        if let DataSource::Synthetic(spec) = &mut c.data {
            spec.seed = seed;
        }
    }
    if let Some(k) = o.k {
        c.train.k = k;
    }
    if let Some(out) = &o.out {
        c.out = out.clone();
    }
    if let Some(data) = &o.data {
        c.data = DataSource::Csv(data.clone());
    }
    if let Some(model) = &o.model {
        c.model.path = Some(model.clone());
    }
    c.validate_paths()?;
    fs::create_dir_all(&c.out)
        .map_err(|e| CliError::config(format!("output directory {} not writable: {e}", c.out.display())))?;
    Ok(c)
}

fn splits(c: &RunConfig) -> Result<Splits, CliError> {
    Ok(match &c.data {
        DataSource::Synthetic(spec) => generate_synthetic(spec)?.split(),
        DataSource::Csv(path) => Dataset::load_csv(path)?.split(),
        DataSource::Mnist { dir, pair } => mnist_pair(dir, *pair)?,
    })
}

/// Loads the given model, or trains it on the train split and saves it.
fn given_model(c: &RunConfig, s: &Splits) -> Result<MlpModel, CliError> {
    let path = c.model_path();
    if path.exists() {
        let model = MlpModel::load(&path)?;
        if model.input_dim() != s.train.n_features() {
            let what = format!("model {}", path.display());
            return Err(meed::Error::shape(what, s.train.n_features(), model.input_dim()).into());
        }
        return Ok(model);
    }
    let spec = GivenModelSpec {
        hidden: c.model.hidden.clone(),
        epochs: c.model.epochs,
        batch_size: c.model.batch_size,
        learning_rate: c.model.learning_rate,
        seed: c.seed,
    };
    let (model, acc) = train_given_model(&s.train, &s.test, &spec)?;
    eprintln!("given model test accuracy {:.2}%", 100.0 * acc);
    model.save(&path)?;
    Ok(model)
}

fn eval_set(c: &RunConfig, s: &Splits, model: &MlpModel) -> Result<SampleSet, CliError> {
    let test = if c.eval.n_eval == 0 {
        s.test.clone()
    } else {
        s.test.head(c.eval.n_eval)
    };
    Ok(test.annotate(model)?)
}

fn eval_options(c: &RunConfig) -> EvalOptions {
    let mut o = EvalOptions::new(c.train.k, c.seed);
    o.retrain.epochs = c.eval.retrain_epochs;
    o.sen_radius = c.eval.sen_radius;
    o.n_perturb = c.eval.n_perturb;
    o.sen_samples = c.eval.sen_samples;
    o.timing_samples = c.eval.timing_samples;
    o.approximator_hidden = c.train.approximator_hidden.clone();
    o
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    Ok(write_atomic(path, text.as_bytes())?)
}

fn check_dims(ckpt: &Checkpoint, d: usize, c: usize, what: &str) -> Result<(), CliError> {
    if ckpt.d != d || ckpt.c != c {
        let expected = format!("d={} c={}", ckpt.d, ckpt.c);
        return Err(meed::Error::shape(what, expected, format!("d={d} c={c}")).into());
    }
    Ok(())
}

pub fn train(config: &Path, o: &Overrides) -> Result<(), CliError> {
    let c = load_config(config, o)?;
    let s = splits(&c)?;
    let model = given_model(&c, &s)?;
    let samples = s.train.annotate(&model)?;
    let data = TrainingSet::new(&samples, Some(&model), c.train.prior_method)?;
    let ckpt_path = c.out.join(CHECKPOINT_FILE);
    let log_path = c.out.join(LOG_FILE);

    let mut trainer = match &o.checkpoint {
        Some(path) => {
            let ckpt = Checkpoint::load(path)?;
            check_dims(&ckpt, samples.n_features(), samples.n_classes(), "resumed checkpoint")?;
            let mut t = Trainer::from_checkpoint(&ckpt)?;
            t.config.epochs = c.train.epochs;
            t
        }
        None => {
            fs::write(&log_path, "").map_err(|e| meed::Error::Io {
                path: log_path.clone(),
                source: e,
            })?;
            Trainer::new(c.train.clone(), samples.n_features(), samples.n_classes())?
        }
    };
    trainer.checkpoint().save(&ckpt_path)?;

    let result = trainer.fit(&data, |t, log| {
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&log_path)
            .map_err(|e| meed::Error::Io {
                path: log_path.clone(),
                source: e,
            })?;
        writeln!(f, "{log}").map_err(|e| meed::Error::Io {
            path: log_path.clone(),
            source: e,
        })?;
        t.checkpoint().save(&ckpt_path)
    });
    match result {
        Ok(_) => Ok(()),
        Err(e) => {
            trainer.checkpoint().save(&ckpt_path)?;
            Err(e.into())
        }
    }
}

/// Model next to the checkpoint when none is given explicitly.
fn default_model_path(checkpoint: &Path) -> PathBuf {
    checkpoint.parent().unwrap_or(Path::new(".")).join("model.bin")
}

pub fn explain(config: Option<&Path>, o: &Overrides) -> Result<(), CliError> {
    let cfg = config.map(|p| load_config(p, o)).transpose()?;
    let ckpt_path = o
        .checkpoint
        .clone()
        .or_else(|| cfg.as_ref().map(|c| c.out.join(CHECKPOINT_FILE)))
        .ok_or_else(|| CliError::config("explain needs --checkpoint or --config"))?;
    let ckpt = Checkpoint::load(&ckpt_path)?;
    let trainer = Trainer::from_checkpoint(&ckpt)?;
    let model_path = o
        .model
        .clone()
        .or_else(|| cfg.as_ref().map(RunConfig::model_path))
        .unwrap_or_else(|| default_model_path(&ckpt_path));
    let model = MlpModel::load(&model_path)?;
    let dataset = match (&o.data, &cfg) {
        (Some(path), _) => Dataset::load_csv(path)?,
        (None, Some(c)) => splits(c)?.test,
        (None, None) => return Err(CliError::config("explain needs --data or --config")),
    };
    check_dims(&ckpt, dataset.n_features(), model.output_dim(), "data vs checkpoint")?;
    if model.input_dim() != ckpt.d {
        return Err(meed::Error::shape("model vs checkpoint", ckpt.d, model.input_dim()).into());
    }
    let k = o.k.unwrap_or(ckpt.config.k);
    if k == 0 || k > ckpt.d {
        return Err(CliError::config(format!("k must be in [1, {}], got {k}", ckpt.d)));
    }
    let samples = dataset.annotate(&model)?;
    let z = trainer.explainer.score_batch(samples.features(), samples.outputs())?;
    let mut text = String::new();
    for (id, row) in samples.ids.iter().zip(z.rows()) {
        let row = row.to_vec();
        let sel = topk_indices(&row, k)?;
        let idx: Vec<String> = sel.indices().iter().map(|j| j.to_string()).collect();
        let scores: Vec<String> = sel.indices().iter().map(|&j| format!("{:.4}", row[j])).collect();
        text.push_str(&format!(
            "id={id} selected={} scores={}\n",
            idx.join(";"),
            scores.join(";")
        ));
    }
    let out = o
        .out
        .clone()
        .or_else(|| cfg.as_ref().map(|c| c.out.clone()))
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out).map_err(|e| CliError::config(format!("output directory {}: {e}", out.display())))?;
    write_text(&out.join(EXPLAIN_FILE), &text)
}

struct Trained {
    config: RunConfig,
    splits: Splits,
    model: MlpModel,
    trainer: Trainer,
    train: SampleSet,
    eval: SampleSet,
}

fn load_trained(config: &Path, o: &Overrides) -> Result<Trained, CliError> {
    let c = load_config(config, o)?;
    let s = splits(&c)?;
    let model = given_model(&c, &s)?;
    let ckpt_path = o.checkpoint.clone().unwrap_or_else(|| c.out.join(CHECKPOINT_FILE));
    let ckpt = Checkpoint::load(&ckpt_path)?;
    check_dims(&ckpt, s.train.n_features(), model.output_dim(), "data vs checkpoint")?;
    let trainer = Trainer::from_checkpoint(&ckpt)?;
    let train = s.train.annotate(&model)?;
    let eval = eval_set(&c, &s, &model)?;
    Ok(Trained {
        config: c,
        splits: s,
        model,
        trainer,
        train,
        eval,
    })
}

pub fn evaluate_cmd(config: &Path, o: &Overrides) -> Result<(), CliError> {
    let t = load_trained(config, o)?;
    let report = evaluate(
        &t.trainer.explainer,
        &t.model,
        &t.train,
        &t.eval,
        &eval_options(&t.config),
    )?;
    write_text(&t.config.out.join(REPORT_FILE), &report.to_string())
}

pub fn sanity(config: &Path, o: &Overrides) -> Result<(), CliError> {
    let t = load_trained(config, o)?;
    let c = &t.config;
    let mut opts = eval_options(c);
    opts.sanity_model = false;
    let mut report = evaluate(&t.trainer.explainer, &t.model, &t.train, &t.eval, &opts)?;
    let original = hard_masks(&t.trainer.explainer, &t.eval, c.train.k)?;
    let rng = |tag| substream(c.seed, Stream::Model, tag);
    report.sanity_model = Some(match c.eval.sanity_mode {
        SanityMode::Reuse => {
            sanity_model_randomization(&t.trainer.explainer, &t.model, &t.eval, c.train.k, &mut rng(1))?
        }
        SanityMode::Retrain => {
            sanity_model_retrain(&t.model, t.train.features(), &t.eval, &c.train, &original, &mut rng(1))?
        }
    });
    let given = GivenModelSpec {
        hidden: c.model.hidden.clone(),
        epochs: c.model.epochs,
        batch_size: c.model.batch_size,
        learning_rate: c.model.learning_rate,
        seed: c.seed,
    };
    let eval_ds = if c.eval.n_eval == 0 {
        t.splits.test.clone()
    } else {
        t.splits.test.head(c.eval.n_eval)
    };
    report.sanity_data = Some(sanity_data_randomization(
        &t.splits.train,
        &eval_ds,
        &given,
        &c.train,
        &original,
        &mut rng(2),
    )?);
    write_text(&c.out.join(SANITY_FILE), &report.to_string())
}

pub fn ablation_file(variant: AblationVariant) -> String {
    format!("ablation-{}.txt", variant.name())
}

pub fn ablate(config: &Path, o: &Overrides) -> Result<(), CliError> {
    let c = load_config(config, o)?;
    let s = splits(&c)?;
    let model = given_model(&c, &s)?;
    let train = s.train.annotate(&model)?;
    let eval = eval_set(&c, &s, &model)?;
    let mut opts = eval_options(&c);
    opts.sanity_model = false;
    for variant in AblationVariant::ALL {
        let (report, _): (MetricsReport, _) = run_ablation(variant, &train, &eval, &model, &c.train, &opts)?;
        write_text(&c.out.join(ablation_file(variant)), &report.to_string())?;
    }
    Ok(())
}

pub fn synth(config: &Path, o: &Overrides) -> Result<(), CliError> {
    let c = load_config(config, o)?;
    let DataSource::Synthetic(spec) = &c.data else {
        return Err(CliError::config(
            "key data.kind must name a synthetic generator for synth",
        ));
    };
    generate_synthetic(spec)?.save_csv(&c.out.join(DATA_FILE))?;
    Ok(())
}
