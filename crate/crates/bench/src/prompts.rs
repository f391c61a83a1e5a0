use std::path::Path;

use anyhow::{bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dyndepth_core::lm::tokenize_bytes;
use dyndepth_core::TokenId;

use crate::config::ExperimentConfig;

const SYNTHETIC_SALT: u64 = 0x5eed_0f97_0200;

/// Reads one prompt per non-empty line, mapping each byte to `byte mod V`.
pub fn read_corpus(path: &Path, vocab_size: usize) -> Result<Vec<Vec<TokenId>>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read corpus {}", path.display()))?;
    let prompts: Vec<Vec<TokenId>> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| tokenize_bytes(l, vocab_size))
        .collect();
    if prompts.is_empty() {
        bail!("corpus {} contains no prompts", path.display());
    }
    Ok(prompts)
}

/// `count` uniformly random prompts of `len` tokens, seeded.
pub fn synthetic_prompts(
    count: usize,
    len: usize,
    vocab_size: usize,
    seed: u64,
) -> Vec<Vec<TokenId>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ SYNTHETIC_SALT);
    (0..count)
        .map(|_| {
            (0..len)
                .map(|_| TokenId(rng.gen_range(0..vocab_size as u32)))
                .collect()
        })
        .collect()
}

pub fn load_prompts(config: &ExperimentConfig) -> Result<Vec<Vec<TokenId>>> {
    match &config.corpus {
        Some(path) => read_corpus(path, config.vocab_size),
        None => Ok(synthetic_prompts(
            config.synthetic,
            config.prompt_len,
            config.vocab_size,
            config.seed,
        )),
    }
}
