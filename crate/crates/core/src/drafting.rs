//! Draft-tree construction: a static template tree, a fixed-depth beam tree,
//! and a beam tree whose depth is cut short when the beam's total
//! probability falls below a threshold.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lm::{LanguageModel, LogProbVec, TokenId};
use crate::tree::{DraftTree, StaticTreeTemplate};

/// Upper bound on static template depth.
pub const MAX_STATIC_DEPTH: usize = 64;
/// Upper bound on the node count a static template may request.
pub const MAX_STATIC_NODES: usize = 1 << 16;

/// Log of the summed probabilities of the beam sequences.
///
/// Uses max subtraction; `-inf` entries contribute nothing, and a list made
/// only of `-inf` gives `-inf`.
pub fn heuristic(logprobsums: &[f64]) -> Result<f64> {
    if logprobsums.is_empty() {
        return Err(Error::Input(
            "heuristic needs at least one logprobsum".into(),
        ));
    }
    if logprobsums.iter().any(|v| v.is_nan()) {
        return Err(Error::Input("heuristic input contains NaN".into()));
    }
    let max = logprobsums
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Ok(max);
    }
    let sum: f64 = logprobsums
        .iter()
        .filter(|v| **v != f64::NEG_INFINITY)
        .map(|&v| (v - max).exp())
        .sum();
    Ok(max + sum.ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamMember {
    pub node: usize,
    pub logprobsum: f64,
}

/// Frontier of a beam search over the draft tree.
///
/// Members are ordered by logprobsum, highest first, ties by lowest node index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Beam {
    members: Vec<BeamMember>,
}

impl Beam {
    /// Builds a beam over existing tree nodes, taking each logprobsum from the
    /// node's cumulative logprob.
    pub fn from_nodes(tree: &DraftTree, nodes: &[usize]) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Input("a beam needs at least one member".into()));
        }
        let mut members = nodes
            .iter()
            .map(|&node| {
                Ok(BeamMember {
                    node,
                    logprobsum: tree.node(node)?.cum_logprob,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        members.sort_by(|a, b| {
            b.logprobsum
                .total_cmp(&a.logprobsum)
                .then(a.node.cmp(&b.node))
        });
        Ok(Beam { members })
    }

    pub fn members(&self) -> &[BeamMember] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn logprobsums(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.logprobsum).collect()
    }

    pub fn nodes(&self) -> Vec<usize> {
        self.members.iter().map(|m| m.node).collect()
    }
}

/// Beam-drafting parameters: at most `max_steps` draft scoring rounds with
/// beam width `beam_width`; before the rounds listed in `check_steps` the
/// beam heuristic is evaluated and drafting stops if it is below `threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DddConfig {
    pub max_steps: usize,
    pub beam_width: usize,
    pub check_steps: BTreeSet<usize>,
    pub threshold: f64,
}

impl Default for DddConfig {
    fn default() -> Self {
        DddConfig {
            max_steps: 11,
            beam_width: 10,
            check_steps: [5, 7, 9].into_iter().collect(),
            threshold: -0.3,
        }
    }
}

impl DddConfig {
    /// Checks the heuristic before every step after the first.
    pub fn check_every_step(max_steps: usize, beam_width: usize, threshold: f64) -> Self {
        DddConfig {
            max_steps,
            beam_width,
            check_steps: (1..max_steps).collect(),
            threshold,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_steps < 1 {
            return Err(Error::Config("max_steps must be >= 1".into()));
        }
        if self.beam_width < 1 {
            return Err(Error::Config("beam_width must be >= 1".into()));
        }
        if let Some(&s) = self
            .check_steps
            .iter()
            .find(|&&s| s < 1 || s >= self.max_steps)
        {
            return Err(Error::Config(format!(
                "check step {s} outside 1..={}",
                self.max_steps - 1
            )));
        }
        if self.threshold.is_nan() {
            return Err(Error::Config("threshold must not be NaN".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeuristicCheck {
    pub step: usize,
    pub value: f64,
    pub continued: bool,
}

/// A drafted tree plus a record of how drafting went.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DraftOutcome {
    pub tree: DraftTree,
    /// Draft-model scoring rounds performed.
    pub steps_executed: usize,
    pub heuristic_checks: Vec<HeuristicCheck>,
}

fn check_width(width: usize) -> Result<()> {
    if width < 1 {
        return Err(Error::Config("beam width must be >= 1".into()));
    }
    Ok(())
}

/// Scores the root context and hangs its top-`width` tokens off the root.
pub fn seed_beam<M: LanguageModel + ?Sized>(
    tree: &mut DraftTree,
    draft: &M,
    width: usize,
) -> Result<Beam> {
    check_width(width)?;
    let scores = draft.next_logprobs(tree.root_context())?;
    let mut nodes = Vec::with_capacity(width);
    for (token, lp) in scores.top_k(width) {
        nodes.push(tree.add_child(None, token, lp)?);
    }
    Beam::from_nodes(tree, &nodes)
}

struct Candidate {
    parent: usize,
    token: TokenId,
    logprob: f64,
    logprobsum: f64,
}

fn candidate_order(a: &Candidate, b: &Candidate) -> std::cmp::Ordering {
    b.logprobsum
        .total_cmp(&a.logprobsum)
        .then(a.token.cmp(&b.token))
        .then(a.parent.cmp(&b.parent))
}

/// One beam step: scores every member with the draft model, ranks all
/// (member, token) extensions by logprobsum and appends the best `width`.
///
/// Ties rank the lower token id first, then the lower parent index. Selected
/// nodes are appended in rank order.
pub fn expand_beam<M: LanguageModel + ?Sized>(
    tree: &mut DraftTree,
    beam: &Beam,
    draft: &M,
    width: usize,
) -> Result<Beam> {
    check_width(width)?;
    if beam.is_empty() {
        return Err(Error::Input("cannot expand an empty beam".into()));
    }
    let parents = beam.nodes();
    let scores: Vec<LogProbVec> = draft.score_nodes(tree, &parents)?;
    let mut candidates: Vec<Candidate> = Vec::with_capacity(parents.len() * draft.vocab_size());
    for (member, lps) in beam.members().iter().zip(&scores) {
        for (t, &lp) in lps.as_slice().iter().enumerate() {
            candidates.push(Candidate {
                parent: member.node,
                token: TokenId(t as u32),
                logprob: lp,
                logprobsum: member.logprobsum + lp,
            });
        }
    }
    if candidates.len() > width {
        candidates.select_nth_unstable_by(width - 1, candidate_order);
        candidates.truncate(width);
    }
    candidates.sort_unstable_by(candidate_order);
    let mut nodes = Vec::with_capacity(candidates.len());
    for c in candidates {
        nodes.push(tree.add_child(Some(c.parent), c.token, c.logprob)?);
    }
    Beam::from_nodes(tree, &nodes)
}

/// Fixed-depth beam drafting: seed from the root, then `depth - 1` beam
/// expansions. Every round adds up to `width` nodes.
pub fn draft_eagle2<M: LanguageModel + ?Sized>(
    root_context: &[TokenId],
    draft: &M,
    width: usize,
    depth: usize,
) -> Result<DraftOutcome> {
    check_width(width)?;
    if depth < 1 {
        return Err(Error::Config("depth must be >= 1".into()));
    }
    let mut tree = DraftTree::new(root_context.to_vec());
    let mut beam = seed_beam(&mut tree, draft, width)?;
    for _ in 1..depth {
        beam = expand_beam(&mut tree, &beam, draft, width)?;
    }
    Ok(DraftOutcome {
        tree,
        steps_executed: depth,
        heuristic_checks: Vec::new(),
    })
}

/// Beam drafting with a dynamic depth.
///
/// Round 0 seeds the beam from the root. Loop iteration `step` (1..n) first
/// evaluates the heuristic if `step` is a check step and stops when it is
/// below the threshold; otherwise it performs one more beam expansion. A
/// stop at `step` therefore leaves exactly `step` scoring rounds done.
pub fn draft_ddd<M: LanguageModel + ?Sized>(
    root_context: &[TokenId],
    draft: &M,
    config: &DddConfig,
) -> Result<DraftOutcome> {
    config.validate()?;
    let mut tree = DraftTree::new(root_context.to_vec());
    let mut beam = seed_beam(&mut tree, draft, config.beam_width)?;
    let mut checks = Vec::new();
    let mut steps_executed = config.max_steps;
    for step in 1..config.max_steps {
        if config.check_steps.contains(&step) {
            let value = heuristic(&beam.logprobsums())?;
            let continued = value >= config.threshold;
            checks.push(HeuristicCheck {
                step,
                value,
                continued,
            });
            if !continued {
                steps_executed = step;
                break;
            }
        }
        beam = expand_beam(&mut tree, &beam, draft, config.beam_width)?;
    }
    Ok(DraftOutcome {
        tree,
        steps_executed,
        heuristic_checks: checks,
    })
}

/// Static-shape drafting: each node at depth `d` expands its top
/// `children_per_depth[d]` draft tokens. The shape never depends on the
/// model's scores, only on which tokens rank highest.
pub fn draft_static<M: LanguageModel + ?Sized>(
    root_context: &[TokenId],
    draft: &M,
    template: &StaticTreeTemplate,
) -> Result<DraftOutcome> {
    template.validate()?;
    if template.depth() > MAX_STATIC_DEPTH {
        return Err(Error::Config(format!(
            "static template depth {} exceeds the limit of {MAX_STATIC_DEPTH}",
            template.depth()
        )));
    }
    if template.node_count() > MAX_STATIC_NODES {
        return Err(Error::Config(format!(
            "static template requests {} nodes, limit is {MAX_STATIC_NODES}",
            template.node_count()
        )));
    }
    let mut tree = DraftTree::new(root_context.to_vec());
    let root_scores = draft.next_logprobs(root_context)?;
    let mut frontier = Vec::new();
    for (token, lp) in root_scores.top_k(template.children_per_depth[0]) {
        frontier.push(tree.add_child(None, token, lp)?);
    }
    for &k in &template.children_per_depth[1..] {
        let scores = draft.score_nodes(&tree, &frontier)?;
        let mut next = Vec::with_capacity(frontier.len() * k);
        for (&parent, lps) in frontier.iter().zip(&scores) {
            for (token, lp) in lps.top_k(k) {
                next.push(tree.add_child(Some(parent), token, lp)?);
            }
        }
        frontier = next;
    }
    Ok(DraftOutcome {
        tree,
        steps_executed: template.depth(),
        heuristic_checks: Vec::new(),
    })
}
