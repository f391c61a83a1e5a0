//! Temperature-0 verification of a draft tree against the target model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lm::{LanguageModel, TokenId};
use crate::tree::DraftTree;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyResult {
    /// Accepted nodes, depth 1 first, each the child of the previous one.
    pub accepted: Vec<usize>,
    pub accepted_tokens: Vec<TokenId>,
    /// The target's greedy token after the accepted path.
    pub bonus: TokenId,
}

impl VerifyResult {
    pub fn tokens_emitted(&self) -> usize {
        self.accepted.len() + 1
    }

    /// Accepted tokens followed by the bonus token.
    pub fn emitted(&self) -> impl Iterator<Item = TokenId> + '_ {
        self.accepted_tokens
            .iter()
            .copied()
            .chain(std::iter::once(self.bonus))
    }
}

/// Accepts the longest root path whose every token equals the target's
/// greedy choice, and appends the target's next greedy token.
///
/// The target scores the root context and every tree node once, regardless
/// of which path ends up accepted; the accepted path is then resolved by
/// walking down from the root.
pub fn verify_greedy<M: LanguageModel + ?Sized>(
    target: &M,
    tree: &DraftTree,
) -> Result<VerifyResult> {
    let root_choice = target.next_logprobs(tree.root_context())?.argmax();
    let node_choice: Vec<TokenId> = target
        .tree_logprobs(tree)?
        .iter()
        .map(|lp| lp.argmax())
        .collect();
    let children = tree.child_lists();

    let mut accepted = Vec::new();
    let mut accepted_tokens = Vec::new();
    let mut want = root_choice;
    let mut siblings = &children[0];
    loop {
        let mut matches = siblings.iter().filter(|&&c| tree.nodes()[c].token == want);
        let Some(&hit) = matches.next() else { break };
        if let Some(&dup) = matches.next() {
            return Err(Error::Structure(format!(
                "nodes {hit} and {dup} are siblings with the same token {want}"
            )));
        }
        accepted.push(hit);
        accepted_tokens.push(want);
        want = node_choice[hit];
        siblings = &children[hit + 1];
    }
    Ok(VerifyResult {
        accepted,
        accepted_tokens,
        bonus: want,
    })
}
