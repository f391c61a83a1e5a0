use std::collections::HashMap;

use super::{context_window, LanguageModel, LogProbVec, TokenId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
struct Row {
    counts: Vec<u32>,
    total: u64,
}

/// Add-one smoothed n-gram model conditioned on the last `order` tokens.
///
/// `order == 0` is a unigram model. Contexts shorter than `order` are padded
/// on the left with token 0, both in training and at inference.
#[derive(Debug, Clone, PartialEq)]
pub struct NgramModel {
    vocab_size: usize,
    order: usize,
    rows: HashMap<Vec<TokenId>, Row>,
}

impl NgramModel {
    pub fn train(vocab_size: usize, order: usize, corpus: &[TokenId]) -> Result<Self> {
        if vocab_size < 2 {
            return Err(Error::Config(format!(
                "vocab_size must be >= 2, got {vocab_size}"
            )));
        }
        if let Some(t) = corpus.iter().find(|t| t.index() >= vocab_size) {
            return Err(Error::TokenOutOfVocab {
                token: t.0,
                vocab_size,
            });
        }
        let mut rows: HashMap<Vec<TokenId>, Row> = HashMap::new();
        for (i, &next) in corpus.iter().enumerate() {
            let key: Vec<TokenId> = context_window(&corpus[..i], order).collect();
            let row = rows.entry(key).or_insert_with(|| Row {
                counts: vec![0; vocab_size],
                total: 0,
            });
            row.counts[next.index()] += 1;
            row.total += 1;
        }
        Ok(NgramModel {
            vocab_size,
            order,
            rows,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of distinct contexts observed in training.
    pub fn contexts_seen(&self) -> usize {
        self.rows.len()
    }
}

impl LanguageModel for NgramModel {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn score_valid(&self, context: &[TokenId]) -> LogProbVec {
        let key: Vec<TokenId> = context_window(context, self.order).collect();
        let logits = match self.rows.get(&key) {
            Some(row) => row
                .counts
                .iter()
                .map(|&c| (f64::from(c) + 1.0).ln())
                .collect(),
            None => vec![0.0; self.vocab_size],
        };
        LogProbVec::from_logits(logits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abab(len: usize) -> Vec<TokenId> {
        (0..len).map(|i| TokenId((i % 2) as u32)).collect()
    }

    #[test]
    fn bigram_on_alternating_corpus() {
        // "abab...ab", a = 0, b = 1. After "a": count(b) = 50, and the first
        // token is counted after the padding token 0 = "a", so count(a) = 1.
        let m = NgramModel::train(2, 1, &abab(100)).unwrap();
        let lp = m.next_logprobs(&[TokenId(0)]).unwrap();
        assert!((lp.get(TokenId(1)) - (51f64 / 53.0).ln()).abs() < 1e-12);
        assert!((lp.get(TokenId(0)) - (2f64 / 53.0).ln()).abs() < 1e-12);
        assert_eq!(m.greedy_next(&[TokenId(0)]).unwrap(), TokenId(1));
        assert_eq!(m.greedy_next(&[TokenId(1)]).unwrap(), TokenId(0));
    }

    #[test]
    fn unseen_context_is_uniform() {
        let m = NgramModel::train(4, 2, &abab(10)).unwrap();
        let lp = m.next_logprobs(&[TokenId(3), TokenId(3)]).unwrap();
        for &v in lp.as_slice() {
            assert!((v - 0.25f64.ln()).abs() < 1e-12);
        }
        assert_eq!(lp.argmax(), TokenId(0));
    }

    #[test]
    fn unigram_counts_whole_corpus() {
        let corpus = [0, 0, 0, 1, 2].map(TokenId);
        let m = NgramModel::train(3, 0, &corpus).unwrap();
        let lp = m.next_logprobs(&[TokenId(2)]).unwrap();
        assert!((lp.get(TokenId(0)) - (4f64 / 8.0).ln()).abs() < 1e-12);
        assert_eq!(m.contexts_seen(), 1);
    }

    #[test]
    fn rejects_bad_corpus() {
        assert!(NgramModel::train(2, 1, &[TokenId(2)]).is_err());
        assert!(NgramModel::train(1, 1, &[]).is_err());
    }
}
