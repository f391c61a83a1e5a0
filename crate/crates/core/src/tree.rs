//! Append-only token trees drafted each cycle and verified by the target.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lm::TokenId;

/// Parent reference used when building a tree: the committed context or an
/// existing node.
pub type NodeRef = Option<usize>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DraftNode {
    pub token: TokenId,
    /// `None` means the node hangs off the root context.
    pub parent: Option<usize>,
    pub depth: usize,
    /// Draft log-probability of `token` given its root path.
    pub logprob: f64,
    /// Sum of `logprob` along the root path (the sequence's logprobsum).
    pub cum_logprob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DraftTree {
    root_context: Vec<TokenId>,
    nodes: Vec<DraftNode>,
}

impl DraftTree {
    pub fn new(root_context: Vec<TokenId>) -> Self {
        DraftTree {
            root_context,
            nodes: Vec::new(),
        }
    }

    /// Rebuilds a tree from a node list, checking every structural invariant.
    pub fn from_parts(root_context: Vec<TokenId>, nodes: Vec<DraftNode>) -> Result<Self> {
        let tree = DraftTree {
            root_context,
            nodes,
        };
        tree.validate()?;
        Ok(tree)
    }

    pub fn root_context(&self) -> &[TokenId] {
        &self.root_context
    }

    pub fn nodes(&self) -> &[DraftNode] {
        &self.nodes
    }

    pub fn node(&self, idx: usize) -> Result<&DraftNode> {
        self.nodes.get(idx).ok_or_else(|| {
            Error::Structure(format!(
                "node {idx} does not exist ({} nodes)",
                self.nodes.len()
            ))
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Deepest node depth, 0 for an empty tree.
    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    pub fn add_child(&mut self, parent: NodeRef, token: TokenId, logprob: f64) -> Result<usize> {
        if logprob.is_nan() || logprob > 0.0 {
            return Err(Error::Input(format!("logprob must be <= 0, got {logprob}")));
        }
        let (depth, base) = match parent {
            None => (1, 0.0),
            Some(p) => {
                let parent = self.nodes.get(p).ok_or_else(|| {
                    Error::Structure(format!("dangling parent {p} ({} nodes)", self.nodes.len()))
                })?;
                (parent.depth + 1, parent.cum_logprob)
            }
        };
        self.nodes.push(DraftNode {
            token,
            parent,
            depth,
            logprob,
            cum_logprob: base + logprob,
        });
        Ok(self.nodes.len() - 1)
    }

    /// Tokens from the depth-1 ancestor down to `idx`, inclusive.
    pub fn path_to_root(&self, idx: usize) -> Result<Vec<TokenId>> {
        let mut path = Vec::with_capacity(self.node(idx)?.depth);
        let mut cur = Some(idx);
        while let Some(i) = cur {
            let node = self.node(i)?;
            path.push(node.token);
            cur = node.parent;
        }
        path.reverse();
        Ok(path)
    }

    /// Children of each node, with index `0` holding the root's children and
    /// index `i + 1` those of node `i`. Children appear in insertion order.
    pub fn child_lists(&self) -> Vec<Vec<usize>> {
        let mut children = vec![Vec::new(); self.nodes.len() + 1];
        for (i, n) in self.nodes.iter().enumerate() {
            children[n.parent.map_or(0, |p| p + 1)].push(i);
        }
        children
    }

    pub fn validate(&self) -> Result<()> {
        for (i, n) in self.nodes.iter().enumerate() {
            let (depth, base) = match n.parent {
                None => (1, 0.0),
                Some(p) if p < i => (self.nodes[p].depth + 1, self.nodes[p].cum_logprob),
                Some(p) => {
                    return Err(Error::Structure(format!(
                        "node {i} has parent {p}, which does not precede it"
                    )))
                }
            };
            if n.depth != depth {
                return Err(Error::Structure(format!(
                    "node {i} has depth {}, expected {depth}",
                    n.depth
                )));
            }
            if n.logprob.is_nan() || n.logprob > 0.0 {
                return Err(Error::Structure(format!(
                    "node {i} has logprob {}",
                    n.logprob
                )));
            }
            let drift = (n.cum_logprob - (base + n.logprob)).abs();
            if drift.is_nan() || drift > 1e-12 {
                return Err(Error::Structure(format!(
                    "node {i} has inconsistent cum_logprob"
                )));
            }
        }
        Ok(())
    }

    /// Human-readable indented dump, one node per line.
    pub fn to_text(&self) -> String {
        let children = self.child_lists();
        let mut out = format!(
            "root context: {} tokens, {} nodes\n",
            self.root_context.len(),
            self.nodes.len()
        );
        let mut stack: Vec<usize> = children[0].iter().rev().copied().collect();
        while let Some(i) = stack.pop() {
            let n = &self.nodes[i];
            let _ = writeln!(
                out,
                "{:indent$}[{i}] token={} logprob={:.4} cum={:.4}",
                "",
                n.token,
                n.logprob,
                n.cum_logprob,
                indent = 2 * n.depth
            );
            stack.extend(children[i + 1].iter().rev());
        }
        out
    }
}

/// Shape of a static draft tree: entry `d` is how many top-ranked children
/// each node at depth `d` (the root being depth 0) expands.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StaticTreeTemplate {
    pub children_per_depth: Vec<usize>,
}

impl Default for StaticTreeTemplate {
    fn default() -> Self {
        StaticTreeTemplate {
            children_per_depth: vec![4, 2, 2, 1, 1, 1],
        }
    }
}

impl StaticTreeTemplate {
    pub fn new(children_per_depth: Vec<usize>) -> Self {
        StaticTreeTemplate { children_per_depth }
    }

    pub fn depth(&self) -> usize {
        self.children_per_depth.len()
    }

    /// Node count when no level is limited by the vocabulary.
    pub fn node_count(&self) -> usize {
        let mut width = 1usize;
        let mut total = 0usize;
        for &k in &self.children_per_depth {
            width = width.saturating_mul(k);
            total = total.saturating_add(width);
        }
        total
    }

    pub fn validate(&self) -> Result<()> {
        if self.children_per_depth.is_empty() {
            return Err(Error::Config(
                "static template must have at least one level".into(),
            ));
        }
        if self.children_per_depth.contains(&0) {
            return Err(Error::Config("static template entries must be >= 1".into()));
        }
        Ok(())
    }
}
