//! Vanilla and speculative decode loops, per-run accounting, and the cost
//! model that turns call counts into a modeled speedup.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::drafting::{draft_ddd, draft_eagle2, draft_static, DddConfig, DraftOutcome};
use crate::error::{Error, Result};
use crate::lm::{LanguageModel, TokenId};
use crate::tree::StaticTreeTemplate;
use crate::verify::verify_greedy;

/// How each speculative cycle drafts its tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Static(StaticTreeTemplate),
    /// Fixed-depth beam drafting. `strict` charges a synchronization between
    /// every pair of consecutive draft rounds in the cost model.
    Eagle2 {
        width: usize,
        depth: usize,
        strict: bool,
    },
    Ddd(DddConfig),
}

impl Strategy {
    pub fn draft<M: LanguageModel + ?Sized>(
        &self,
        context: &[TokenId],
        draft: &M,
    ) -> Result<DraftOutcome> {
        match self {
            Strategy::Static(template) => draft_static(context, draft, template),
            Strategy::Eagle2 { width, depth, .. } => draft_eagle2(context, draft, *width, *depth),
            Strategy::Ddd(config) => draft_ddd(context, draft, config),
        }
    }

    /// Synchronization points a cycle incurs under the cost model.
    fn sync_breaks(&self, outcome: &DraftOutcome) -> u64 {
        match self {
            Strategy::Eagle2 { strict: true, .. } => {
                outcome.steps_executed.saturating_sub(1) as u64
            }
            _ => outcome.heuristic_checks.len() as u64,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DecodeMetrics {
    pub target_calls: u64,
    /// One per draft scoring round.
    pub draft_calls: u64,
    pub heuristic_checks: u64,
    /// Points where drafting had to synchronize: one per heuristic check, or
    /// one per round boundary for strict fixed-depth drafting.
    pub sync_breaks: u64,
    pub tokens_generated: u64,
    /// Draft rounds per cycle -> cycles.
    pub depth_histogram: BTreeMap<usize, u64>,
    /// Accepted draft tokens per cycle -> cycles.
    pub accepted_length_histogram: BTreeMap<usize, u64>,
    /// Seconds; informational only.
    pub wall_time: f64,
}

impl DecodeMetrics {
    pub fn tokens_per_target_call(&self) -> f64 {
        if self.target_calls == 0 {
            return 0.0;
        }
        self.tokens_generated as f64 / self.target_calls as f64
    }

    fn histogram_mean(h: &BTreeMap<usize, u64>) -> f64 {
        let n: u64 = h.values().sum();
        if n == 0 {
            return 0.0;
        }
        h.iter().map(|(&k, &c)| k as f64 * c as f64).sum::<f64>() / n as f64
    }

    /// Mean draft rounds per cycle.
    pub fn mean_depth(&self) -> f64 {
        Self::histogram_mean(&self.depth_histogram)
    }

    pub fn mean_accepted(&self) -> f64 {
        Self::histogram_mean(&self.accepted_length_histogram)
    }

    /// Conditional acceptance rate at each tree level `1..=levels`: the share
    /// of cycles accepting at least `d` tokens among those accepting at
    /// least `d - 1`. Levels never reached report `NaN`.
    pub fn level_acceptance(&self, levels: usize) -> Vec<f64> {
        let reaching = |d: usize| -> u64 {
            self.accepted_length_histogram
                .range(d..)
                .map(|(_, &c)| c)
                .sum()
        };
        (1..=levels)
            .map(|d| {
                let base = reaching(d - 1);
                if base == 0 {
                    f64::NAN
                } else {
                    reaching(d) as f64 / base as f64
                }
            })
            .collect()
    }

    pub fn merge(&mut self, other: &DecodeMetrics) {
        self.target_calls += other.target_calls;
        self.draft_calls += other.draft_calls;
        self.heuristic_checks += other.heuristic_checks;
        self.sync_breaks += other.sync_breaks;
        self.tokens_generated += other.tokens_generated;
        for (&k, &v) in &other.depth_histogram {
            *self.depth_histogram.entry(k).or_default() += v;
        }
        for (&k, &v) in &other.accepted_length_histogram {
            *self.accepted_length_histogram.entry(k).or_default() += v;
        }
        self.wall_time += other.wall_time;
    }
}

/// Relative costs of the operations a speculative cycle performs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub c_target: f64,
    pub c_draft: f64,
    /// Cost of forcing pending draft work to complete before a data-dependent
    /// branch.
    pub c_sync: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            c_target: 1.0,
            c_draft: 0.05,
            c_sync: 0.02,
        }
    }
}

impl CostModel {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("c_target", self.c_target),
            ("c_draft", self.c_draft),
            ("c_sync", self.c_sync),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn cost(&self, metrics: &DecodeMetrics) -> f64 {
        metrics.target_calls as f64 * self.c_target
            + metrics.draft_calls as f64 * self.c_draft
            + metrics.sync_breaks as f64 * self.c_sync
    }
}

/// Cost of producing `baseline_tokens` with one target call each, divided by
/// the modeled cost of the speculative run.
pub fn modeled_speedup(
    metrics: &DecodeMetrics,
    cost: &CostModel,
    baseline_tokens: u64,
) -> Result<f64> {
    cost.validate()?;
    let denom = cost.cost(metrics);
    if denom <= 0.0 {
        return Err(Error::Config("modeled cost of the run is zero".into()));
    }
    Ok(baseline_tokens as f64 * cost.c_target / denom)
}

/// Plain greedy decoding: one target call per token.
pub fn decode_vanilla<M: LanguageModel + ?Sized>(
    target: &M,
    prompt: &[TokenId],
    num_tokens: usize,
) -> Result<(Vec<TokenId>, DecodeMetrics)> {
    let start = Instant::now();
    let mut context = prompt.to_vec();
    for _ in 0..num_tokens {
        let next = target.greedy_next(&context)?;
        context.push(next);
    }
    let metrics = DecodeMetrics {
        target_calls: num_tokens as u64,
        tokens_generated: num_tokens as u64,
        wall_time: start.elapsed().as_secs_f64(),
        ..DecodeMetrics::default()
    };
    Ok((context.split_off(prompt.len()), metrics))
}

/// Draft, verify, commit; repeated until `num_tokens` tokens exist. The last
/// cycle may overshoot, in which case the output is truncated (the metrics
/// still count every emitted token).
pub fn decode_speculative<T, D>(
    target: &T,
    draft: &D,
    strategy: &Strategy,
    prompt: &[TokenId],
    num_tokens: usize,
) -> Result<(Vec<TokenId>, DecodeMetrics)>
where
    T: LanguageModel + ?Sized,
    D: LanguageModel + ?Sized,
{
    if target.vocab_size() != draft.vocab_size() {
        return Err(Error::Config(format!(
            "target vocabulary {} differs from draft vocabulary {}",
            target.vocab_size(),
            draft.vocab_size()
        )));
    }
    target.check_tokens(prompt)?;
    let start = Instant::now();
    let mut metrics = DecodeMetrics::default();
    let mut context = prompt.to_vec();
    while context.len() - prompt.len() < num_tokens {
        let outcome = strategy.draft(&context, draft)?;
        let result = verify_greedy(target, &outcome.tree)?;

        metrics.target_calls += 1;
        metrics.draft_calls += outcome.steps_executed as u64;
        metrics.heuristic_checks += outcome.heuristic_checks.len() as u64;
        metrics.sync_breaks += strategy.sync_breaks(&outcome);
        metrics.tokens_generated += result.tokens_emitted() as u64;
        *metrics
            .depth_histogram
            .entry(outcome.steps_executed)
            .or_default() += 1;
        *metrics
            .accepted_length_histogram
            .entry(result.accepted.len())
            .or_default() += 1;

        context.extend(result.emitted());
    }
    context.truncate(prompt.len() + num_tokens);
    metrics.wall_time = start.elapsed().as_secs_f64();
    Ok((context.split_off(prompt.len()), metrics))
}
