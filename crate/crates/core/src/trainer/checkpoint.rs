use std::path::Path;

use ndarray::Array1;

use super::TrainConfig;
use crate::error::{Error, Result};
use crate::io::{put_section, Reader};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"MEEDCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Step count and accumulators of one optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub steps: u64,
    pub slots: Vec<Array1<f64>>,
}

/// Everything needed to continue training exactly where it stopped.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config: TrainConfig,
    pub d: usize,
    pub c: usize,
    pub explainer_params: Array1<f64>,
    pub selected_params: Array1<f64>,
    pub unselected_params: Array1<f64>,
    /// Completed epochs.
    pub epoch: u64,
    pub batches: u64,
    pub rng_state: Vec<u8>,
    /// Explainer, selected approximator, unselected approximator.
    pub optimizers: [OptimizerState; 3],
}

fn floats(v: &Array1<f64>) -> Vec<u8> {
    v.iter().flat_map(|f| f.to_le_bytes()).collect()
}

fn parse_floats(bytes: &[u8], path: &Path, what: &str) -> Result<Array1<f64>> {
    if !bytes.len().is_multiple_of(8) {
        return Err(Error::Corrupt {
            path: path.to_path_buf(),
            reason: format!("{what} section length {} is not a multiple of 8", bytes.len()),
        });
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

fn parse_u64(bytes: &[u8], path: &Path, what: &str) -> Result<u64> {
    let arr: [u8; 8] = bytes.try_into().map_err(|_| Error::Corrupt {
        path: path.to_path_buf(),
        reason: format!("{what} section must be 8 bytes"),
    })?;
    Ok(u64::from_le_bytes(arr))
}

impl Checkpoint {
    /// Magic, little-endian `u32` version, then `u64`-length-prefixed
    /// sections: config text (with `d` and `c` lines first), the three
    /// parameter vectors as raw `f64`s, epoch, batch count, RNG state, and
    /// the three optimizer states.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(CHECKPOINT_MAGIC);
        buf.extend_from_slice(&self.format_version.to_le_bytes());
        let text = format!("d={}\nc={}\n{}", self.d, self.c, self.config.to_canonical_text());
        put_section(&mut buf, text.as_bytes());
        for p in [&self.explainer_params, &self.selected_params, &self.unselected_params] {
            put_section(&mut buf, &floats(p));
        }
        put_section(&mut buf, &self.epoch.to_le_bytes());
        put_section(&mut buf, &self.batches.to_le_bytes());
        put_section(&mut buf, &self.rng_state);
        for opt in &self.optimizers {
            put_section(&mut buf, &opt.steps.to_le_bytes());
            put_section(&mut buf, &(opt.slots.len() as u64).to_le_bytes());
            for s in &opt.slots {
                put_section(&mut buf, &floats(s));
            }
        }
        buf
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = Reader::new(bytes, path);
        r.magic(CHECKPOINT_MAGIC)?;
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Version {
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let text = std::str::from_utf8(r.section()?).map_err(|e| Error::Corrupt {
            path: path.to_path_buf(),
            reason: format!("config section is not UTF-8: {e}"),
        })?;
        let (mut d, mut c) = (None, None);
        let mut rest = String::new();
        for line in text.lines() {
            if let Some(v) = line.strip_prefix("d=") {
                d = v.parse::<usize>().ok();
            } else if let Some(v) = line.strip_prefix("c=") {
                c = v.parse::<usize>().ok();
            } else {
                rest.push_str(line);
                rest.push('\n');
            }
        }
        let (d, c) = d.zip(c).ok_or_else(|| Error::Corrupt {
            path: path.to_path_buf(),
            reason: "config section lacks d and c".into(),
        })?;
        let config = TrainConfig::from_canonical_text(&rest)?;
        let explainer_params = parse_floats(r.section()?, path, "explainer")?;
        let selected_params = parse_floats(r.section()?, path, "selected approximator")?;
        let unselected_params = parse_floats(r.section()?, path, "unselected approximator")?;
        let epoch = parse_u64(r.section()?, path, "epoch")?;
        let batches = parse_u64(r.section()?, path, "batch count")?;
        let rng_state = r.section()?.to_vec();
        let mut opts = Vec::with_capacity(3);
        for _ in 0..3 {
            let steps = parse_u64(r.section()?, path, "optimizer steps")?;
            let n = parse_u64(r.section()?, path, "optimizer slot count")?;
            if n > 2 {
                return Err(Error::Corrupt {
                    path: path.to_path_buf(),
                    reason: format!("optimizer has {n} slots"),
                });
            }
            let slots = (0..n)
                .map(|_| parse_floats(r.section()?, path, "optimizer slot"))
                .collect::<Result<Vec<_>>>()?;
            opts.push(OptimizerState { steps, slots });
        }
        r.finish()?;
        let optimizers: [OptimizerState; 3] = opts.try_into().expect("three optimizers");
        Ok(Self {
            format_version: version,
            config,
            d,
            c,
            explainer_params,
            selected_params,
            unselected_params,
            epoch,
            batches,
            rng_state,
            optimizers,
        })
    }

    /// Atomic write: a crash mid-save leaves the previous file intact.
    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}
