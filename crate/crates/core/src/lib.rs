//! Lossless tree-based speculative decoding.
//!
//! A draft model proposes a tree of candidate continuations; the target model
//! scores the whole tree at once and keeps the longest root path matching its
//! own greedy choices, plus one bonus token. Three drafting strategies are
//! provided:
//!
//! * a static tree whose shape is fixed by a [`StaticTreeTemplate`],
//! * a fixed-depth beam tree ([`draft_eagle2`]),
//! * a beam tree whose depth is chosen at run time by thresholding the
//!   log of the total beam probability ([`draft_ddd`]).
//!
//! Models are deterministic toys (see [`lm`]) so that every run is exactly
//! reproducible and speculative output can be compared token-for-token with
//! vanilla greedy decoding.

pub mod drafting;
pub mod engine;
pub mod error;
pub mod lm;
pub mod tree;
pub mod verify;

pub use drafting::{
    draft_ddd, draft_eagle2, draft_static, expand_beam, heuristic, seed_beam, Beam, BeamMember,
    DddConfig, DraftOutcome, HeuristicCheck,
};
pub use engine::{
    decode_speculative, decode_vanilla, modeled_speedup, CostModel, DecodeMetrics, Strategy,
};
pub use error::{Error, Result};
pub use lm::{
    make_toy_pair, HashedLogitModel, LanguageModel, LogProbVec, ModelKind, ModelSpec, NgramModel,
    TokenId, ToyModel,
};
pub use tree::{DraftNode, DraftTree, NodeRef, StaticTreeTemplate};
pub use verify::{verify_greedy, VerifyResult};
