use rayon::prelude::*;

use super::DecodeError;
use crate::block::ProbabilityBlock;
use crate::token_automaton::TokenAutomaton;
use crate::{StateId, TokenId};

/// Best single-token move along one `(source, target)` edge at one position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeCost {
    pub target: StateId,
    /// Highest probability of any token (the mask included) realizing the edge.
    pub cost: f64,
    /// Token achieving `cost`, smallest id on ties.
    pub token: TokenId,
    /// Best real token on the edge; differs from `token` when `⊥` wins.
    pub realizing: TokenId,
}

/// Sparse per-position transition costs, keyed by the automaton's edges.
/// Pairs of states with no connecting token have cost 0 and are not stored.
#[derive(Debug, Clone)]
pub struct CostTables {
    num_states: usize,
    offsets: Vec<u32>,
    positions: Vec<Vec<EdgeCost>>,
}

impl CostTables {
    pub fn num_states(&self) -> usize {
        self.num_states
    }

    /// Block length.
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Edges out of `from` at 0-based position `i`, ordered by target.
    pub fn edges(&self, i: usize, from: StateId) -> &[EdgeCost] {
        let (lo, hi) = (
            self.offsets[from as usize] as usize,
            self.offsets[from as usize + 1] as usize,
        );
        &self.positions[i][lo..hi]
    }

    /// `Cost_i(from, to)` and its argmax token; `(0, None)` when unconnected.
    pub fn cost(&self, i: usize, from: StateId, to: StateId) -> (f64, Option<TokenId>) {
        self.edges(i, from)
            .iter()
            .find(|e| e.target == to)
            .map_or((0.0, None), |e| (e.cost, Some(e.token)))
    }
}

/// For each position and each edge `(q', q)`: the max over tokens `t` with
/// `q ∈ δ(q', t)` of `v_i[t]`, ⊥ included. Positions are built in parallel.
pub fn build_cost_tables(
    ta: &TokenAutomaton,
    block: &ProbabilityBlock,
) -> Result<CostTables, DecodeError> {
    if block.vocab_size() != ta.vocab_size() {
        return Err(DecodeError::DimensionMismatch {
            expected: ta.vocab_size(),
            found: block.vocab_size(),
        });
    }
    let groups = ta.all_groups();
    let classes = ta.token_classes();
    let mask = ta.mask_id();
    let positions = (0..block.len())
        .into_par_iter()
        .map(|i| {
            let row = block.row(i);
            // best (probability, token) per class; ascending scan keeps the
            // smallest id among equal probabilities
            let mut best = vec![(-1.0f64, TokenId::MAX); ta.num_token_classes()];
            for (t, (&p, &c)) in row.iter().zip(classes).enumerate() {
                if let Some(b) = best.get_mut(c as usize) {
                    if p > b.0 {
                        *b = (p, t as TokenId);
                    }
                }
            }
            let mask_p = row[mask as usize];
            groups
                .iter()
                .map(|g| {
                    let (mut best_p, mut best_t) = (-1.0f64, TokenId::MAX);
                    for &c in ta.group_classes(g) {
                        let (p, t) = best[c as usize];
                        if p > best_p || (p == best_p && t < best_t) {
                            (best_p, best_t) = (p, t);
                        }
                    }
                    let (cost, token) = if mask_p > best_p || (mask_p == best_p && mask < best_t) {
                        (mask_p, mask)
                    } else {
                        (best_p, best_t)
                    };
                    EdgeCost {
                        target: g.target,
                        cost,
                        token,
                        realizing: best_t,
                    }
                })
                .collect()
        })
        .collect();
    Ok(CostTables {
        num_states: ta.num_states(),
        offsets: ta.group_offsets().to_vec(),
        positions,
    })
}
