//! Run configuration: flat `key = value` lines grouped under `[section]`
//! headers. `#` starts a comment. Relative paths resolve against the
//! directory holding the config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use meed::data::{SyntheticKind, SyntheticSpec};
use meed::metrics::SanityMode;
use meed::trainer::TrainConfig;

use crate::CliError;

const SECTIONS: [&str; 5] = ["", "data", "model", "train", "eval"];

/// Where the samples come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synthetic(SyntheticSpec),
    Csv(PathBuf),
    /// Directory with the four MNIST IDX files and the two digits to keep.
    Mnist {
        dir: PathBuf,
        pair: (u8, u8),
    },
}

/// The given black-box model: loaded from `path` if it exists, otherwise
/// trained with these settings and saved there. Without a `path` the model
/// lives in the output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub path: Option<PathBuf>,
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSpec {
    /// Evaluation samples taken from the head of the test split; 0 means all.
    pub n_eval: usize,
    pub retrain_epochs: usize,
    pub sen_radius: f64,
    pub n_perturb: usize,
    pub sen_samples: usize,
    pub timing_samples: usize,
    pub sanity_mode: SanityMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub data: DataSource,
    pub model: ModelSpec,
    pub train: TrainConfig,
    pub eval: EvalSpec,
}

type Table = BTreeMap<String, BTreeMap<String, String>>;

fn parse_sections(text: &str, path: &Path) -> Result<Table, CliError> {
    let mut table: Table = BTreeMap::new();
    let mut section = String::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let at = || format!("{}:{}", path.display(), n + 1);
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| CliError::config(format!("{}: malformed section header {line:?}", at())))?;
            if !SECTIONS.contains(&name) {
                return Err(CliError::config(format!("{}: unknown section [{name}]", at())));
            }
            section = name.to_string();
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("{}: expected key = value, got {line:?}", at())))?;
        let key = key.trim().to_string();
        let entries = table.entry(section.clone()).or_default();
        if entries.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(CliError::config(format!(
                "{}: duplicate key {}",
                at(),
                qualified(&section, &key)
            )));
        }
    }
    Ok(table)
}

fn qualified(section: &str, key: &str) -> String {
    if section.is_empty() {
        key.to_string()
    } else {
        format!("{section}.{key}")
    }
}

/// Removes and parses keys of one section, naming the offending key on error.
struct Section {
    name: &'static str,
    entries: BTreeMap<String, String>,
}

impl Section {
    fn take<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>, CliError> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::config(format!("invalid value {v:?} for key {}", qualified(self.name, key)))),
        }
    }

    fn take_list(&mut self, key: &str) -> Result<Option<Vec<usize>>, CliError> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some(v) => parse_list(&v)
                .map(Some)
                .ok_or_else(|| CliError::config(format!("invalid list {v:?} for key {}", qualified(self.name, key)))),
        }
    }

    fn finish(self) -> Result<(), CliError> {
        match self.entries.keys().next() {
            Some(k) => Err(CliError::config(format!("unknown key {}", qualified(self.name, k)))),
            None => Ok(()),
        }
    }
}

fn parse_list(v: &str) -> Option<Vec<usize>> {
    if v.trim().is_empty() {
        return Some(Vec::new());
    }
    v.split(',').map(|p| p.trim().parse().ok()).collect()
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, path, base)
    }

    pub fn parse(text: &str, path: &Path, base: &Path) -> Result<Self, CliError> {
        let mut table = parse_sections(text, path)?;
        let mut section = |name: &'static str| Section {
            name,
            entries: table.remove(name).unwrap_or_default(),
        };
        let resolve = |p: String| {
            let p = PathBuf::from(p);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };

        let mut top = section("");
        let seed = top.take("seed")?.unwrap_or(0);
        let out = resolve(top.take("out")?.unwrap_or_else(|| "out".to_string()));
        top.finish()?;

        let mut d = section("data");
        let kind: String = d.take("kind")?.unwrap_or_else(|| "sparse-logit".to_string());
        let data = match kind.as_str() {
            "csv" => {
                let p: String = d
                    .take("path")?
                    .ok_or_else(|| CliError::config("missing key data.path"))?;
                DataSource::Csv(resolve(p))
            }
            "mnist" => {
                let p: String = d
                    .take("path")?
                    .ok_or_else(|| CliError::config("missing key data.path"))?;
                let pair = d.take_list("pair")?.unwrap_or_else(|| vec![3, 8]);
                let [a, b] = pair[..] else {
                    return Err(CliError::config("key data.pair needs exactly two digits"));
                };
                if a > 9 || b > 9 || a == b {
                    return Err(CliError::config("key data.pair needs two distinct digits 0-9"));
                }
                DataSource::Mnist {
                    dir: resolve(p),
                    pair: (a as u8, b as u8),
                }
            }
            name => {
                let kind = SyntheticKind::from_name(name)
                    .map_err(|_| CliError::config(format!("invalid value {name:?} for key data.kind")))?;
                let dim = d.take("d")?.unwrap_or(20);
                let true_subset = match (d.take_list("true_subset")?, d.take::<usize>("n_true")?) {
                    (Some(s), _) => s,
                    (None, Some(n)) => (0..n).collect(),
                    (None, None) => (0..4).collect(),
                };
                let spec = SyntheticSpec {
                    kind,
                    d: dim,
                    true_subset,
                    n: d.take("n")?.unwrap_or(5000),
                    noise_std: d.take("noise_std")?.unwrap_or(0.1),
                    seed: d.take("seed")?.unwrap_or(seed),
                };
                spec.validate().map_err(|e| CliError::config(format!("[data]: {e}")))?;
                DataSource::Synthetic(spec)
            }
        };
        d.finish()?;

        let mut m = section("model");
        let model = ModelSpec {
            path: m.take::<String>("path")?.map(resolve),
            hidden: m.take_list("hidden")?.unwrap_or_else(|| vec![32]),
            epochs: m.take("epochs")?.unwrap_or(20),
            batch_size: m.take("batch_size")?.unwrap_or(64),
            learning_rate: m.take("learning_rate")?.unwrap_or(1e-3),
        };
        m.finish()?;

        let t = section("train");
        let mut lines: String = t.entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
        if !t.entries.contains_key("seed") {
            lines.push_str(&format!("seed={seed}\n"));
        }
        let train = TrainConfig::from_canonical_text(&lines).map_err(|e| CliError::config(format!("[train]: {e}")))?;

        let mut e = section("eval");
        let eval = EvalSpec {
            n_eval: e.take("n_eval")?.unwrap_or(0),
            retrain_epochs: e.take("retrain_epochs")?.unwrap_or(20),
            sen_radius: e.take("sen_radius")?.unwrap_or(0.05),
            n_perturb: e.take("n_perturb")?.unwrap_or(32),
            sen_samples: e.take("sen_samples")?.unwrap_or(100),
            timing_samples: e.take("timing_samples")?.unwrap_or(100),
            sanity_mode: match e.take::<String>("sanity_mode")? {
                None => SanityMode::default(),
                Some(v) => SanityMode::from_name(&v)
                    .map_err(|_| CliError::config(format!("invalid value {v:?} for key eval.sanity_mode")))?,
            },
        };
        e.finish()?;

        Ok(RunConfig {
            seed,
            out,
            data,
            model,
            train,
            eval,
        })
    }

    pub fn model_path(&self) -> PathBuf {
        self.model.path.clone().unwrap_or_else(|| self.out.join("model.bin"))
    }

    /// Checks that referenced inputs exist.
    pub fn validate_paths(&self) -> Result<(), CliError> {
        let must_exist = |p: &Path, key: &str| {
            if p.exists() {
                Ok(())
            } else {
                Err(CliError::config(format!("key {key}: {} does not exist", p.display())))
            }
        };
        match &self.data {
            DataSource::Csv(p) => must_exist(p, "data.path"),
            DataSource::Mnist { dir, .. } => must_exist(dir, "data.path"),
            DataSource::Synthetic(_) => Ok(()),
        }
    }
}
