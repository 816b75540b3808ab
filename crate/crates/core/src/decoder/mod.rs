//! Maximum-probability constrained decoding of one block.
//!
//! Finds the token sequence (mask `⊥` allowed) with the highest product of
//! per-position probabilities among those with at least one unmasked
//! substitution that is a valid prefix of the regular language. The search is
//! a Viterbi-style recurrence over automaton states:
//!
//! ```text
//! score(0, q)   = 0 if q = start else -inf
//! score(i, q)   = max_{q'} score(i-1, q') + ln Cost_i(q', q)
//! Cost_i(q', q) = max { v_i[t] : q ∈ δ(q', t) }     (0 if no such t)
//! ```
//!
//! followed by an argmax over live end states and a parent walk. Runtime is
//! `O(d · (|Q|² + |Q|·|V|))` in the worst case; cost tables only touch edges
//! that exist.

mod cost;
mod dp;

use thiserror::Error;

pub use cost::{build_cost_tables, CostTables, EdgeCost};
pub use dp::{dp_forward, reconstruct_path, DpTable, Parent};

use crate::block::ProbabilityBlock;
use crate::token_automaton::TokenAutomaton;
use crate::{StateId, TokenId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("probability rows have length {found}, automaton vocabulary has {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("start state {0} is out of range")]
    InvalidState(StateId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    /// Optimal sequence; may contain the mask id.
    pub tokens: Vec<TokenId>,
    /// `tokens` with each `⊥` replaced by the real token realizing the same
    /// edge; replays through `delta_t` to `end_state`.
    pub realized: Vec<TokenId>,
    pub end_state: StateId,
    pub log_prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DecodeOutcome {
    Optimal(Decoded),
    /// No sequence with positive probability ends in a live state.
    NoValidPrefix { witness_state: StateId },
}

impl DecodeOutcome {
    pub fn optimal(&self) -> Option<&Decoded> {
        match self {
            DecodeOutcome::Optimal(d) => Some(d),
            DecodeOutcome::NoValidPrefix { .. } => None,
        }
    }

    pub fn log_prob(&self) -> Option<f64> {
        self.optimal().map(|d| d.log_prob)
    }
}

/// Decodes `block` starting from automaton state `start`.
pub fn decode_block(
    ta: &TokenAutomaton,
    block: &ProbabilityBlock,
    start: StateId,
) -> Result<DecodeOutcome, DecodeError> {
    if start as usize >= ta.num_states() {
        return Err(DecodeError::InvalidState(start));
    }
    let tables = build_cost_tables(ta, block)?;
    let table = dp_forward(&tables, start);
    Ok(reconstruct_path(&table, ta.live(), start))
}
