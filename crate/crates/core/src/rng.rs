//! Seeded random streams.
//!
//! Every random draw in a run descends from one 64-bit seed. Named
//! substreams (`data`, `init`, `gumbel`, `perturb`, ...) are ChaCha streams
//! keyed by the seed, so adding draws to one substream never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type Rng = ChaCha8Rng;

/// Substream identifiers. The numeric values are part of the reproducibility
/// contract and must not change.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Data = 1,
    Init = 2,
    Gumbel = 3,
    Perturb = 4,
    Model = 5,
    Eval = 6,
}

/// Opens substream `stream` of `seed`.
pub fn stream(seed: u64, stream: Stream) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Opens substream `stream`, further split by an integer tag (a worker or
/// sample index).
pub fn substream(seed: u64, stream: Stream, tag: u64) -> Rng {
    let mixed = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
    let mut rng = ChaCha8Rng::seed_from_u64(mixed);
    rng.set_stream(stream as u64);
    rng
}

const STATE_LEN: usize = 32 + 8 + 16;

/// Serializes the exact position of a generator.
pub fn save_state(rng: &Rng) -> Vec<u8> {
    let mut out = Vec::with_capacity(STATE_LEN);
    out.extend_from_slice(&rng.get_seed());
    out.extend_from_slice(&rng.get_stream().to_le_bytes());
    out.extend_from_slice(&rng.get_word_pos().to_le_bytes());
    out
}

pub fn load_state(bytes: &[u8]) -> Result<Rng> {
    if bytes.len() != STATE_LEN {
        return Err(Error::config(format!(
            "rng state must be {STATE_LEN} bytes, got {}",
            bytes.len()
        )));
    }
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&bytes[..32]);
    let stream = u64::from_le_bytes(bytes[32..40].try_into().unwrap());
    let pos = u128::from_le_bytes(bytes[40..56].try_into().unwrap());
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(stream);
    rng.set_word_pos(pos);
    Ok(rng)
}
