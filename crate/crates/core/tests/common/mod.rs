#![allow(dead_code)]

use std::collections::HashSet;

use dyndepth_core::{
    make_toy_pair, DraftTree, ModelKind, ModelSpec, NgramModel, TokenId, ToyModel,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn pair(
    kind: ModelKind,
    vocab_size: usize,
    context_order: usize,
    seed: u64,
    draft_noise: f64,
) -> (ToyModel, ToyModel) {
    make_toy_pair(&ModelSpec {
        vocab_size,
        kind,
        context_order,
        seed,
        draft_noise,
    })
    .unwrap()
}

/// An n-gram model trained on a tiny corpus: most rows are unseen or share
/// counts, so exact score ties are common.
pub fn tie_heavy_model(vocab_size: usize, seed: u64) -> NgramModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let corpus: Vec<TokenId> = (0..vocab_size * 3)
        .map(|_| TokenId(rng.gen_range(0..vocab_size as u32)))
        .collect();
    NgramModel::train(vocab_size, 1, &corpus).unwrap()
}

pub fn random_context<R: Rng>(rng: &mut R, vocab_size: usize, max_len: usize) -> Vec<TokenId> {
    let len = rng.gen_range(0..=max_len);
    (0..len)
        .map(|_| TokenId(rng.gen_range(0..vocab_size as u32)))
        .collect()
}

/// A random well-formed tree whose siblings carry distinct tokens.
pub fn random_tree<R: Rng>(rng: &mut R, vocab_size: usize, max_nodes: usize) -> DraftTree {
    let mut tree = DraftTree::new(random_context(rng, vocab_size, 6));
    let mut used: Vec<HashSet<u32>> = vec![HashSet::new()];
    let n = rng.gen_range(0..=max_nodes);
    for _ in 0..n {
        let parent_slot = rng.gen_range(0..used.len());
        let mut free: Vec<u32> = (0..vocab_size as u32)
            .filter(|t| !used[parent_slot].contains(t))
            .collect();
        if free.is_empty() {
            continue;
        }
        free.shuffle(rng);
        let token = free[0];
        used[parent_slot].insert(token);
        let parent = parent_slot.checked_sub(1);
        tree.add_child(parent, TokenId(token), -rng.gen_range(0.0..3.0))
            .unwrap();
        used.push(HashSet::new());
    }
    tree
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for k in i..=j {
                r[idx[k]] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}
