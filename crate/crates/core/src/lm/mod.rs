//! Language-model abstraction and the deterministic toy models used as
//! target and draft.

mod hashed;
mod ngram;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::DraftTree;

pub use hashed::HashedLogitModel;
pub use ngram::NgramModel;

/// A token in a model's vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenId(pub u32);

impl TokenId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u32> for TokenId {
    fn from(v: u32) -> Self {
        TokenId(v)
    }
}

/// Maps text onto the toy vocabulary one byte at a time (`byte mod V`).
pub fn tokenize_bytes(text: &str, vocab_size: usize) -> Vec<TokenId> {
    text.bytes()
        .map(|b| TokenId((b as usize % vocab_size) as u32))
        .collect()
}

/// Natural-log probabilities over the whole vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LogProbVec(Vec<f64>);

impl LogProbVec {
    /// Log-softmax of raw logits.
    pub fn from_logits(mut logits: Vec<f64>) -> Self {
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = logits.iter().map(|&l| (l - max).exp()).sum();
        let norm = max + sum.ln();
        for l in &mut logits {
            *l -= norm;
        }
        LogProbVec(logits)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, token: TokenId) -> f64 {
        self.0[token.index()]
    }

    /// Highest-scoring token; ties go to the lowest id.
    pub fn argmax(&self) -> TokenId {
        let mut best = 0;
        for (i, &v) in self.0.iter().enumerate().skip(1) {
            if v > self.0[best] {
                best = i;
            }
        }
        TokenId(best as u32)
    }

    /// The `k` most likely tokens, most likely first, ties by lowest id.
    pub fn top_k(&self, k: usize) -> Vec<(TokenId, f64)> {
        let mut ranked: Vec<(TokenId, f64)> = self
            .0
            .iter()
            .enumerate()
            .map(|(i, &v)| (TokenId(i as u32), v))
            .collect();
        let by_rank =
            |a: &(TokenId, f64), b: &(TokenId, f64)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
        if k < ranked.len() {
            if k > 0 {
                ranked.select_nth_unstable_by(k - 1, by_rank);
            }
            ranked.truncate(k);
        }
        ranked.sort_unstable_by(by_rank);
        ranked
    }

    pub fn log_sum_exp(&self) -> f64 {
        let max = self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return max;
        }
        max + self.0.iter().map(|&l| (l - max).exp()).sum::<f64>().ln()
    }
}

/// A next-token model over a fixed vocabulary.
///
/// Implementations must be pure: the same context always yields the same
/// distribution.
pub trait LanguageModel: Send + Sync {
    fn vocab_size(&self) -> usize;

    /// Scores a context whose tokens are already known to be in range.
    fn score_valid(&self, context: &[TokenId]) -> LogProbVec;

    fn check_tokens(&self, tokens: &[TokenId]) -> Result<()> {
        let vocab_size = self.vocab_size();
        match tokens.iter().find(|t| t.index() >= vocab_size) {
            Some(t) => Err(Error::TokenOutOfVocab {
                token: t.0,
                vocab_size,
            }),
            None => Ok(()),
        }
    }

    fn next_logprobs(&self, context: &[TokenId]) -> Result<LogProbVec> {
        self.check_tokens(context)?;
        Ok(self.score_valid(context))
    }

    /// Argmax of [`next_logprobs`](Self::next_logprobs), lowest id on ties.
    fn greedy_next(&self, context: &[TokenId]) -> Result<TokenId> {
        Ok(self.next_logprobs(context)?.argmax())
    }

    /// Next-token distributions after the root paths of the given nodes.
    ///
    /// Entry `i` is exactly `next_logprobs(root_context ++ path_to_root(nodes[i]))`.
    fn score_nodes(&self, tree: &DraftTree, nodes: &[usize]) -> Result<Vec<LogProbVec>> {
        tree.validate()?;
        self.check_tokens(tree.root_context())?;
        let vocab_size = self.vocab_size();
        if let Some(n) = tree.nodes().iter().find(|n| n.token.index() >= vocab_size) {
            return Err(Error::TokenOutOfVocab {
                token: n.token.0,
                vocab_size,
            });
        }
        let base = tree.root_context().len();
        let mut context = tree.root_context().to_vec();
        nodes
            .iter()
            .map(|&idx| {
                context.truncate(base);
                context.extend(tree.path_to_root(idx)?);
                Ok(self.score_valid(&context))
            })
            .collect()
    }

    /// Scores every node of the tree in one pass, the analogue of feeding the
    /// whole tree to the model under a tree attention mask.
    fn tree_logprobs(&self, tree: &DraftTree) -> Result<Vec<LogProbVec>> {
        let all: Vec<usize> = (0..tree.len()).collect();
        self.score_nodes(tree, &all)
    }
}

/// The last `order` tokens of `context`, left-padded with token 0.
pub(crate) fn context_window(
    context: &[TokenId],
    order: usize,
) -> impl Iterator<Item = TokenId> + '_ {
    let pad = order.saturating_sub(context.len());
    let start = context.len().saturating_sub(order);
    std::iter::repeat_n(TokenId(0), pad).chain(context[start..].iter().copied())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    HashedLogit,
    Ngram,
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hashed-logit" | "hashed" => Ok(ModelKind::HashedLogit),
            "ngram" => Ok(ModelKind::Ngram),
            other => Err(Error::Config(format!("unknown model kind `{other}`"))),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::HashedLogit => "hashed-logit",
            ModelKind::Ngram => "ngram",
        })
    }
}

/// Everything needed to rebuild a target/draft pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub vocab_size: usize,
    pub kind: ModelKind,
    pub context_order: usize,
    pub seed: u64,
    /// Logit perturbation for the hashed draft; any nonzero value selects the
    /// order-reduced draft for n-gram pairs.
    pub draft_noise: f64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            vocab_size: 64,
            kind: ModelKind::HashedLogit,
            context_order: 3,
            seed: 0,
            draft_noise: 0.5,
        }
    }
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.vocab_size < 2 {
            return Err(Error::Config(format!(
                "vocab_size must be >= 2, got {}",
                self.vocab_size
            )));
        }
        if self.vocab_size > u32::MAX as usize {
            return Err(Error::Config("vocab_size does not fit a token id".into()));
        }
        if self.context_order < 1 {
            return Err(Error::Config("context_order must be >= 1".into()));
        }
        if !(self.draft_noise >= 0.0 && self.draft_noise.is_finite()) {
            return Err(Error::Config(format!(
                "draft_noise must be finite and >= 0, got {}",
                self.draft_noise
            )));
        }
        Ok(())
    }
}

/// Either toy model, so target and draft can share one concrete type.
#[derive(Debug, Clone)]
pub enum ToyModel {
    Hashed(HashedLogitModel),
    Ngram(NgramModel),
}

impl LanguageModel for ToyModel {
    fn vocab_size(&self) -> usize {
        match self {
            ToyModel::Hashed(m) => m.vocab_size(),
            ToyModel::Ngram(m) => m.vocab_size(),
        }
    }

    fn score_valid(&self, context: &[TokenId]) -> LogProbVec {
        match self {
            ToyModel::Hashed(m) => m.score_valid(context),
            ToyModel::Ngram(m) => m.score_valid(context),
        }
    }
}

/// Length of the seeded corpus an n-gram pair is trained on.
pub const NGRAM_TRAINING_TOKENS: usize = 50_000;

/// Builds a `(target, draft)` pair from a spec.
///
/// The hashed draft adds seeded noise of magnitude `draft_noise` to the
/// target's logits. The n-gram target is trained on a corpus sampled from the
/// hashed model with the same seed; its draft drops one order of context.
/// With `draft_noise == 0` the draft is the target.
pub fn make_toy_pair(spec: &ModelSpec) -> Result<(ToyModel, ToyModel)> {
    spec.validate()?;
    match spec.kind {
        ModelKind::HashedLogit => {
            let target = HashedLogitModel::new(spec.vocab_size, spec.context_order, spec.seed);
            let draft = target.clone().with_noise(spec.draft_noise);
            Ok((ToyModel::Hashed(target), ToyModel::Hashed(draft)))
        }
        ModelKind::Ngram => {
            let source = HashedLogitModel::new(spec.vocab_size, spec.context_order, spec.seed);
            let corpus = source.sample_corpus(NGRAM_TRAINING_TOKENS, spec.seed);
            let target = NgramModel::train(spec.vocab_size, spec.context_order, &corpus)?;
            let draft = if spec.draft_noise == 0.0 {
                target.clone()
            } else {
                NgramModel::train(spec.vocab_size, spec.context_order - 1, &corpus)?
            };
            Ok((ToyModel::Ngram(target), ToyModel::Ngram(draft)))
        }
    }
}
