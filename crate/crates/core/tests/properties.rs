//! Property tests over the drafting strategies, verification and decode loops.

mod common;

use common::{pair, random_tree};
use dyndepth_core::{
    decode_speculative, decode_vanilla, draft_ddd, draft_eagle2, draft_static, heuristic,
    verify_greedy, DddConfig, DraftTree, LanguageModel, LogProbVec, ModelKind, StaticTreeTemplate,
    Strategy, TokenId,
};
use proptest::prelude::*;
use proptest::strategy::Strategy as _;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn kind_strategy() -> BoxedStrategy<ModelKind> {
    prop_oneof![Just(ModelKind::HashedLogit), Just(ModelKind::Ngram)].boxed()
}

fn context(vocab: usize) -> BoxedStrategy<Vec<TokenId>> {
    prop::collection::vec((0..vocab as u32).prop_map(TokenId), 0..6).boxed()
}

/// Same ordering as the wrapped model, different confidence.
struct Tempered<M>(M, f64);

impl<M: LanguageModel> LanguageModel for Tempered<M> {
    fn vocab_size(&self) -> usize {
        self.0.vocab_size()
    }

    fn score_valid(&self, context: &[TokenId]) -> LogProbVec {
        let base = self.0.score_valid(context);
        LogProbVec::from_logits(base.as_slice().iter().map(|l| l * self.1).collect())
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn heuristic_is_bounded_by_max_and_log_len(
        xs in prop::collection::vec(-50.0f64..0.0, 1..30)
    ) {
        let h = heuristic(&xs).unwrap();
        let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(h >= max - 1e-12);
        prop_assert!(h <= max + (xs.len() as f64).ln() + 1e-12);
        prop_assert!(h <= (xs.len() as f64).ln() + 1e-12);
    }

    #[test]
    fn ddd_without_checks_is_eagle2(
        kind in kind_strategy(), seed in 0u64..1000, ctx in context(32),
        n in 1usize..9, w in 1usize..8
    ) {
        let (_, draft) = pair(kind, 32, 2, seed, 1.0);
        let config = DddConfig { max_steps: n, beam_width: w, check_steps: Default::default(), threshold: 0.0 };
        let ddd = draft_ddd(&ctx, &draft, &config).unwrap();
        let e2 = draft_eagle2(&ctx, &draft, w, n).unwrap();
        prop_assert_eq!(ddd, e2);
    }

    #[test]
    fn eagle2_trees_grow_by_prefix(
        kind in kind_strategy(), seed in 0u64..1000, ctx in context(32),
        d in 1usize..8, w in 1usize..8
    ) {
        let (_, draft) = pair(kind, 32, 2, seed, 1.0);
        let short = draft_eagle2(&ctx, &draft, w, d).unwrap().tree;
        let long = draft_eagle2(&ctx, &draft, w, d + 1).unwrap().tree;
        prop_assert_eq!(short.nodes(), &long.nodes()[..short.len()]);
    }

    #[test]
    fn ddd_stops_only_at_failed_checkpoints(
        kind in kind_strategy(), seed in 0u64..1000, ctx in context(32),
        n in 2usize..12, w in 1usize..11, threshold in -3.0f64..0.1,
        checks in prop::collection::btree_set(1usize..11, 0..5)
    ) {
        let (_, draft) = pair(kind, 32, 2, seed, 1.5);
        let check_steps = checks.into_iter().filter(|&s| s < n).collect();
        let config = DddConfig { max_steps: n, beam_width: w, check_steps, threshold };
        let out = draft_ddd(&ctx, &draft, &config).unwrap();
        let reached: Vec<usize> = config.check_steps.iter().copied().filter(|&s| s <= out.steps_executed).collect();
        let recorded: Vec<usize> = out.heuristic_checks.iter().map(|c| c.step).collect();
        if out.steps_executed < n {
            prop_assert!(config.check_steps.contains(&out.steps_executed));
            let last = out.heuristic_checks.last().unwrap();
            prop_assert_eq!(last.step, out.steps_executed);
            prop_assert!(last.value < threshold && !last.continued);
            prop_assert_eq!(recorded, reached);
        } else {
            let all: Vec<usize> = config.check_steps.iter().copied().collect();
            prop_assert_eq!(recorded, all);
        }
        for c in &out.heuristic_checks[..out.heuristic_checks.len().saturating_sub(1)] {
            prop_assert!(c.value >= threshold && c.continued);
        }
        for c in &out.heuristic_checks {
            prop_assert!(c.value <= 1e-9);
        }
        prop_assert_eq!(out.tree.depth(), out.steps_executed);
    }

    #[test]
    fn static_shape_ignores_confidence(
        seed in 0u64..1000, ctx in context(24),
        template in prop::collection::vec(1usize..4, 1..5), temperature in 0.2f64..5.0
    ) {
        let (_, draft) = pair(ModelKind::HashedLogit, 24, 2, seed, 0.7);
        let template = StaticTreeTemplate::new(template);
        let a = draft_static(&ctx, &draft, &template).unwrap().tree;
        let b = draft_static(&ctx, &Tempered(draft, temperature), &template).unwrap().tree;
        let shape = |t: &DraftTree| t.nodes().iter().map(|n| (n.parent, n.token, n.depth)).collect::<Vec<_>>();
        prop_assert_eq!(shape(&a), shape(&b));
        prop_assert_eq!(a.len(), template.node_count());
    }

    #[test]
    fn acceptance_is_monotone_in_tree_prefixes(seed in 0u64..10_000, cut in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (target, _) = pair(ModelKind::HashedLogit, 6, 1, seed, 0.0);
        let full = random_tree(&mut rng, 6, 50);
        let keep = (full.len() as f64 * cut) as usize;
        let prefix = DraftTree::from_parts(full.root_context().to_vec(), full.nodes()[..keep].to_vec()).unwrap();
        let a = verify_greedy(&target, &prefix).unwrap();
        let b = verify_greedy(&target, &full).unwrap();
        prop_assert!(b.accepted.len() >= a.accepted.len());
        prop_assert_eq!(&b.accepted[..a.accepted.len()], &a.accepted[..]);
    }

    #[test]
    fn speculative_output_equals_vanilla(
        kind in kind_strategy(), seed in 0u64..1000, prompt in context(32),
        noise in 0.0f64..3.0, num_tokens in 0usize..40, which in 0usize..3
    ) {
        let (target, draft) = pair(kind, 32, 2, seed, noise);
        let strategy = match which {
            0 => Strategy::Static(StaticTreeTemplate::default()),
            1 => Strategy::Eagle2 { width: 10, depth: 6, strict: false },
            _ => Strategy::Ddd(DddConfig::default()),
        };
        let (spec, metrics) = decode_speculative(&target, &draft, &strategy, &prompt, num_tokens).unwrap();
        let (vanilla, _) = decode_vanilla(&target, &prompt, num_tokens).unwrap();
        prop_assert_eq!(spec, vanilla);
        prop_assert!(metrics.tokens_generated >= num_tokens as u64);
        prop_assert!(metrics.tokens_generated >= metrics.target_calls);
        prop_assert_eq!(metrics.depth_histogram.values().sum::<u64>(), metrics.target_calls);
        prop_assert_eq!(metrics.accepted_length_histogram.values().sum::<u64>(), metrics.target_calls);
        let emitted: u64 = metrics.accepted_length_histogram.iter().map(|(&k, &c)| (k as u64 + 1) * c).sum();
        prop_assert_eq!(emitted, metrics.tokens_generated);
    }
}

#[test]
fn perfect_draft_accepts_full_depth() {
    let (target, draft) = pair(ModelKind::HashedLogit, 64, 3, 21, 0.0);
    // a width-1 beam is the draft's greedy chain, which is the target's
    let chain = Strategy::Eagle2 {
        width: 1,
        depth: 6,
        strict: false,
    };
    let (_, m) = decode_speculative(&target, &draft, &chain, &[TokenId(3)], 70).unwrap();
    assert_eq!(
        m.accepted_length_histogram
            .keys()
            .copied()
            .collect::<Vec<_>>(),
        vec![6]
    );
    assert_eq!(m.tokens_per_target_call(), 7.0);

    // wider beams rank by cumulative logprob and can prune the greedy path
    // after a diffuse step, so full acceptance is typical but not guaranteed
    let beam = Strategy::Eagle2 {
        width: 10,
        depth: 6,
        strict: false,
    };
    let (_, m) = decode_speculative(&target, &draft, &beam, &[TokenId(3)], 400).unwrap();
    assert!(m.tokens_per_target_call() > 6.0);
}

#[test]
fn ddd_stopping_at_first_step_emits_at_most_two_tokens() {
    let (target, draft) = pair(ModelKind::HashedLogit, 64, 3, 22, 2.0);
    let config = DddConfig {
        threshold: 1.0,
        check_steps: [1].into(),
        ..DddConfig::default()
    };
    let (_, m) =
        decode_speculative(&target, &draft, &Strategy::Ddd(config), &[TokenId(5)], 100).unwrap();
    assert_eq!(
        m.depth_histogram.keys().copied().collect::<Vec<_>>(),
        vec![1]
    );
    assert!(m.accepted_length_histogram.keys().all(|&k| k <= 1));
    let tpc = m.tokens_per_target_call();
    assert!((1.0..=2.0).contains(&tpc));
}

#[test]
fn depth_histogram_keys() {
    let (target, draft) = pair(ModelKind::HashedLogit, 64, 3, 23, 2.0);
    let config = DddConfig::default();
    let (_, m) =
        decode_speculative(&target, &draft, &Strategy::Ddd(config), &[TokenId(5)], 300).unwrap();
    assert!(m.depth_histogram.keys().all(|k| [5, 7, 9, 11].contains(k)));
    let e2 = Strategy::Eagle2 {
        width: 10,
        depth: 6,
        strict: false,
    };
    let (_, m) = decode_speculative(&target, &draft, &e2, &[TokenId(5)], 300).unwrap();
    assert_eq!(
        m.depth_histogram.keys().copied().collect::<Vec<_>>(),
        vec![6]
    );
    assert!(m.tokens_per_target_call() > 1.0);
}

#[test]
fn deeper_eagle2_never_accepts_less_on_a_fixed_context() {
    let (target, draft) = pair(ModelKind::HashedLogit, 64, 3, 24, 2.5);
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for _ in 0..50 {
        let ctx = common::random_context(&mut rng, 64, 6);
        let mut prev = 0;
        for depth in 1..=11 {
            let tree = draft_eagle2(&ctx, &draft, 10, depth).unwrap().tree;
            let accepted = verify_greedy(&target, &tree).unwrap().accepted.len();
            assert!(accepted >= prev);
            prev = accepted;
        }
    }
}
