use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{context_window, LanguageModel, LogProbVec, TokenId};

const NOISE_SALT: u64 = 0x6a09_e667_f3bc_c908;
const SHARPNESS_SALT: u64 = 0xbb67_ae85_84ca_a73b;
const CLASS_SALT: u64 = 0x3c6e_f372_fe94_f82b;

/// Share of the vocabulary in the predictable class.
const PREDICTABLE_FRACTION: f64 = 0.7;
/// Logit scale range after a predictable token and after any other token.
const SHARP_SCALE: (f64, f64) = (5.0, 12.0);
const DIFFUSE_SCALE: (f64, f64) = (0.5, 2.0);
/// Logit bonus predictable tokens receive after a predictable token, which
/// makes confident stretches persist along a path.
const PREDICTABLE_BONUS: f64 = 4.0;

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform in the open interval (0, 1).
fn unit_open(h: u64) -> f64 {
    ((h >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// A model whose logits are a seeded hash of the recent context.
///
/// Logit of token `t` after window `c` is `s(c) * -ln(u(c, t))`, where `u` is
/// a uniform hash of (seed, window, token) and `s(c)` a hashed per-context
/// scale. A seeded hash also splits the vocabulary into a predictable class
/// and the rest: after a predictable token the scale is large and predictable
/// tokens get a bonus, so confident runs tend to continue; after any other
/// token the distribution is diffuse. A nonzero `noise` adds
/// `noise * z(c, t)` with `z` a unit-variance hashed perturbation, which is
/// how a draft is derived from a target.
#[derive(Debug, Clone, PartialEq)]
pub struct HashedLogitModel {
    vocab_size: usize,
    context_order: usize,
    seed: u64,
    noise: f64,
}

impl HashedLogitModel {
    pub fn new(vocab_size: usize, context_order: usize, seed: u64) -> Self {
        HashedLogitModel {
            vocab_size,
            context_order,
            seed,
            noise: 0.0,
        }
    }

    pub fn with_noise(mut self, noise: f64) -> Self {
        self.noise = noise;
        self
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    pub fn context_order(&self) -> usize {
        self.context_order
    }

    fn context_hash(&self, context: &[TokenId]) -> u64 {
        context_window(context, self.context_order)
            .fold(mix(self.seed), |h, t| mix(h ^ u64::from(t.0)))
    }

    fn predictable(&self, token: u64) -> bool {
        unit_open(mix(mix(self.seed ^ CLASS_SALT) ^ token)) < PREDICTABLE_FRACTION
    }

    pub fn logits(&self, context: &[TokenId]) -> Vec<f64> {
        let h = self.context_hash(context);
        let after_predictable = context
            .last()
            .is_some_and(|t| self.predictable(u64::from(t.0)));
        let (lo, hi) = if after_predictable {
            SHARP_SCALE
        } else {
            DIFFUSE_SCALE
        };
        let sharpness = lo + (hi - lo) * unit_open(mix(h ^ SHARPNESS_SALT));
        let noise_base = mix(h ^ NOISE_SALT);
        (0..self.vocab_size as u64)
            .map(|t| {
                let mut logit = sharpness * -unit_open(mix(h.wrapping_add(t))).ln();
                if after_predictable && self.predictable(t) {
                    logit += PREDICTABLE_BONUS;
                }
                if self.noise > 0.0 {
                    let a = unit_open(mix(noise_base.wrapping_add(2 * t)));
                    let b = unit_open(mix(noise_base.wrapping_add(2 * t + 1)));
                    // triangular on (-1, 1) scaled to unit variance
                    logit += self.noise * (a + b - 1.0) * 6f64.sqrt();
                }
                logit
            })
            .collect()
    }

    /// Samples a token stream from the model at temperature 1, starting from
    /// an empty context.
    pub fn sample_corpus(&self, len: usize, seed: u64) -> Vec<TokenId> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out: Vec<TokenId> = Vec::with_capacity(len);
        for _ in 0..len {
            let start = out.len().saturating_sub(self.context_order);
            let lp = self.score_valid(&out[start..]);
            let mut r: f64 = rng.gen();
            let mut pick = self.vocab_size - 1;
            for (i, &l) in lp.as_slice().iter().enumerate() {
                r -= l.exp();
                if r < 0.0 {
                    pick = i;
                    break;
                }
            }
            out.push(TokenId(pick as u32));
        }
        out
    }
}

impl LanguageModel for HashedLogitModel {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn score_valid(&self, context: &[TokenId]) -> LogProbVec {
        LogProbVec::from_logits(self.logits(context))
    }
}
