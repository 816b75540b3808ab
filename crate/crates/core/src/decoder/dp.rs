use super::cost::CostTables;
use super::{DecodeOutcome, Decoded};
use crate::{StateId, StateSet, TokenId};

/// Last move on the best path into a state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Parent {
    pub prev: StateId,
    pub token: TokenId,
    pub realizing: TokenId,
}

/// `score(i, q)`: best log-probability of reaching `q` after `i` tokens,
/// `-inf` when unreachable. Row 0 is the initialization.
#[derive(Debug, Clone)]
pub struct DpTable {
    num_states: usize,
    d: usize,
    scores: Vec<f64>,
    parents: Vec<Option<Parent>>,
}

impl DpTable {
    pub fn len(&self) -> usize {
        self.d
    }

    pub fn is_empty(&self) -> bool {
        self.d == 0
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn score(&self, i: usize, q: StateId) -> f64 {
        self.scores[i * self.num_states + q as usize]
    }

    pub fn parent(&self, i: usize, q: StateId) -> Option<Parent> {
        self.parents[i * self.num_states + q as usize]
    }

    pub fn scores_at(&self, i: usize) -> &[f64] {
        &self.scores[i * self.num_states..(i + 1) * self.num_states]
    }
}

/// Forward recurrence in log space. Ties go to the smaller previous state,
/// then to the smaller token (already resolved inside each edge's cost).
pub fn dp_forward(tables: &CostTables, start: StateId) -> DpTable {
    let n = tables.num_states();
    let d = tables.len();
    let mut scores = vec![f64::NEG_INFINITY; (d + 1) * n];
    let mut parents = vec![None; (d + 1) * n];
    scores[start as usize] = 0.0;

    for i in 1..=d {
        let (done, rest) = scores.split_at_mut(i * n);
        let prev_row = &done[(i - 1) * n..];
        let cur_row = &mut rest[..n];
        let cur_parents = &mut parents[i * n..(i + 1) * n];
        for (from, &base) in prev_row.iter().enumerate() {
            if base == f64::NEG_INFINITY {
                continue;
            }
            for edge in tables.edges(i - 1, from as StateId) {
                if edge.cost <= 0.0 {
                    continue;
                }
                let cand = base + edge.cost.ln();
                let slot = edge.target as usize;
                if cand > cur_row[slot] {
                    cur_row[slot] = cand;
                    cur_parents[slot] = Some(Parent {
                        prev: from as StateId,
                        token: edge.token,
                        realizing: edge.realizing,
                    });
                }
            }
        }
    }
    DpTable {
        num_states: n,
        d,
        scores,
        parents,
    }
}

/// Picks the best live end state (smaller id on ties) and walks parents back.
pub fn reconstruct_path(table: &DpTable, live: &StateSet, start: StateId) -> DecodeOutcome {
    let d = table.d;
    let mut best: Option<(StateId, f64)> = None;
    for q in live.iter() {
        let s = table.score(d, q);
        if best.map_or(true, |(_, b)| s > b) {
            best = Some((q, s));
        }
    }
    let (end_state, log_prob) = match best {
        Some((q, s)) if s > f64::NEG_INFINITY => (q, s),
        Some((q, _)) => return DecodeOutcome::NoValidPrefix { witness_state: q },
        None => return DecodeOutcome::NoValidPrefix { witness_state: start },
    };

    let mut tokens = Vec::with_capacity(d);
    let mut realized = Vec::with_capacity(d);
    let mut cur = end_state;
    for i in (1..=d).rev() {
        let p = table
            .parent(i, cur)
            .expect("finite score always has a parent");
        tokens.push(p.token);
        realized.push(p.realizing);
        cur = p.prev;
    }
    debug_assert_eq!(cur, start);
    tokens.reverse();
    realized.reverse();
    DecodeOutcome::Optimal(Decoded {
        tokens,
        realized,
        end_state,
        log_prob,
    })
}
