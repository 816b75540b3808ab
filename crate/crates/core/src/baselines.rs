//! Reference decoders: unconstrained argmax, a greedy position-by-position
//! constrained decoder, and exhaustive enumeration.

use rayon::prelude::*;
use thiserror::Error;

use crate::block::ProbabilityBlock;
use crate::decoder::DecodeError;
use crate::token_automaton::TokenAutomaton;
use crate::{StateId, StateSet, TokenId};

/// Largest search space the brute-force oracle accepts.
pub const ORACLE_LIMIT: u64 = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BaselineError {
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error("order is not a permutation of 0..{0}")]
    InvalidOrder(usize),
    #[error("search space {0} exceeds the oracle limit of {ORACLE_LIMIT}")]
    TooLarge(u128),
}

fn check_dims(ta: &TokenAutomaton, block: &ProbabilityBlock, start: StateId) -> Result<(), DecodeError> {
    if block.vocab_size() != ta.vocab_size() {
        return Err(DecodeError::DimensionMismatch {
            expected: ta.vocab_size(),
            found: block.vocab_size(),
        });
    }
    if start as usize >= ta.num_states() {
        return Err(DecodeError::InvalidState(start));
    }
    Ok(())
}

fn argmax(row: &[f64]) -> TokenId {
    let mut best = 0;
    for (t, &p) in row.iter().enumerate() {
        if p > row[best] {
            best = t;
        }
    }
    best as TokenId
}

/// Position-wise argmax, smaller id on ties.
pub fn unconstrained_decode(block: &ProbabilityBlock) -> Vec<TokenId> {
    block.rows().map(argmax).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum GreedyOutcome {
    Committed {
        tokens: Vec<TokenId>,
        log_prob: f64,
        /// Some committed token had probability 0: the constraint overrode
        /// the distribution entirely at that position.
        zero_probability: bool,
    },
    /// No token at `position` keeps a live completion reachable.
    Failed {
        position: usize,
        partial: Vec<Option<TokenId>>,
    },
}

impl GreedyOutcome {
    pub fn tokens(&self) -> Option<&[TokenId]> {
        match self {
            GreedyOutcome::Committed { tokens, .. } => Some(tokens),
            GreedyOutcome::Failed { .. } => None,
        }
    }
}

/// Commits positions in `order`, each to its most probable token that still
/// admits a path to a live state when every uncommitted position is `⊥`.
pub fn greedy_constrained_decode(
    ta: &TokenAutomaton,
    block: &ProbabilityBlock,
    start: StateId,
    order: &[usize],
) -> Result<GreedyOutcome, BaselineError> {
    check_dims(ta, block, start)?;
    let d = block.len();
    let mut seen = vec![false; d];
    if order.len() != d || order.iter().any(|&i| i >= d || std::mem::replace(&mut seen[i], true)) {
        return Err(BaselineError::InvalidOrder(d));
    }

    let n = ta.num_states();
    let mask = ta.mask_id();
    let mut committed: Vec<Option<TokenId>> = vec![None; d];
    let step = |set: &StateSet, t: TokenId| {
        let mut out = StateSet::new(n);
        for q in set.iter() {
            for &r in ta.combined_transition(q, t).expect("ids checked") {
                out.insert(r);
            }
        }
        out
    };

    for &pos in order {
        let mut forward = StateSet::from_states(n, [start]);
        for c in &committed[..pos] {
            forward = step(&forward, c.unwrap_or(mask));
        }
        // backward[j]: states at boundary j that can still end live at d
        let mut backward = ta.live().clone();
        for j in (pos + 1..d).rev() {
            let t = committed[j].unwrap_or(mask);
            let mut prev = StateSet::new(n);
            for q in 0..n as StateId {
                if ta
                    .combined_transition(q, t)
                    .expect("ids checked")
                    .iter()
                    .any(|&r| backward.contains(r))
                {
                    prev.insert(q);
                }
            }
            backward = prev;
        }

        let mut valid = vec![false; ta.vocab_size()];
        for q in forward.iter() {
            for (t, r) in ta.token_edges(q) {
                if backward.contains(r) {
                    valid[t as usize] = true;
                }
            }
            if ta.mask_closure(q).iter().any(|&r| backward.contains(r)) {
                valid[mask as usize] = true;
            }
        }
        let row = block.row(pos);
        let mut choice: Option<TokenId> = None;
        for (t, _) in valid.iter().enumerate().filter(|(_, &v)| v) {
            if choice.map_or(true, |c| row[t] > row[c as usize]) {
                choice = Some(t as TokenId);
            }
        }
        match choice {
            Some(t) => committed[pos] = Some(t),
            None => {
                return Ok(GreedyOutcome::Failed {
                    position: pos,
                    partial: committed,
                })
            }
        }
    }

    let tokens: Vec<TokenId> = committed.into_iter().map(|c| c.expect("all committed")).collect();
    let zero_probability = tokens
        .iter()
        .enumerate()
        .any(|(i, &t)| block.prob(i, t) == 0.0);
    Ok(GreedyOutcome::Committed {
        log_prob: block.sequence_log_prob(&tokens),
        tokens,
        zero_probability,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// Highest-probability valid sequence, lexicographically smallest on ties.
    pub best: Option<(Vec<TokenId>, f64)>,
    pub enumerated: u64,
}

/// Enumerates every sequence in `V^d` (mask included), keeping those with
/// positive probability whose set-replay from `start` meets a live state.
/// Nothing is pruned: every sequence is replayed to the end.
pub fn brute_force_oracle(
    ta: &TokenAutomaton,
    block: &ProbabilityBlock,
    start: StateId,
) -> Result<OracleResult, BaselineError> {
    check_dims(ta, block, start)?;
    let v = block.vocab_size() as u128;
    let d = block.len() as u32;
    let space = v.checked_pow(d).unwrap_or(u128::MAX);
    if space > ORACLE_LIMIT as u128 {
        return Err(BaselineError::TooLarge(space));
    }

    let table = SetTable::new(ta);
    let w = table.words;
    let mut root = vec![0u64; w];
    root[start as usize / 64] |= 1 << (start % 64);
    if d == 0 {
        let best = table.meets_live(&root).then(|| (Vec::new(), 1.0));
        return Ok(OracleResult { best, enumerated: 1 });
    }

    let results: Vec<(Option<(Vec<TokenId>, f64)>, u64)> = (0..block.vocab_size() as TokenId)
        .into_par_iter()
        .map(|first| {
            let mut search = Enumeration {
                table: &table,
                block,
                prefix: vec![first],
                sets: vec![0u64; (block.len() + 1) * w],
                best: None,
                count: 0,
            };
            let (head, tail) = search.sets.split_at_mut(w);
            head.copy_from_slice(&root);
            table.advance(head, first, &mut tail[..w]);
            search.walk(block.prob(0, first));
            (search.best, search.count)
        })
        .collect();

    let mut best: Option<(Vec<TokenId>, f64)> = None;
    let mut enumerated = 0;
    for (cand, count) in results {
        enumerated += count;
        if let Some((seq, p)) = cand {
            if best.as_ref().map_or(true, |(_, b)| p > *b) {
                best = Some((seq, p));
            }
        }
    }
    Ok(OracleResult { best, enumerated })
}

/// Combined transitions as bit rows: `succ[(t * n + q) * words ..]`.
struct SetTable {
    n: usize,
    words: usize,
    succ: Vec<u64>,
    live: Vec<u64>,
}

impl SetTable {
    fn new(ta: &TokenAutomaton) -> Self {
        let n = ta.num_states();
        let words = n.div_ceil(64).max(1);
        let mut succ = vec![0u64; ta.vocab_size() * n * words];
        for t in 0..ta.vocab_size() as TokenId {
            for q in 0..n as StateId {
                let base = (t as usize * n + q as usize) * words;
                for &r in ta.combined_transition(q, t).expect("ids in range") {
                    succ[base + r as usize / 64] |= 1 << (r % 64);
                }
            }
        }
        let mut live = vec![0u64; words];
        for q in ta.live().iter() {
            live[q as usize / 64] |= 1 << (q % 64);
        }
        Self { n, words, succ, live }
    }

    fn advance(&self, from: &[u64], t: TokenId, to: &mut [u64]) {
        to.fill(0);
        for (wi, &word) in from.iter().enumerate() {
            let mut bits = word;
            while bits != 0 {
                let q = wi * 64 + bits.trailing_zeros() as usize;
                bits &= bits - 1;
                let base = (t as usize * self.n + q) * self.words;
                for (o, s) in to.iter_mut().zip(&self.succ[base..base + self.words]) {
                    *o |= s;
                }
            }
        }
    }

    fn meets_live(&self, set: &[u64]) -> bool {
        set.iter().zip(&self.live).any(|(a, b)| a & b != 0)
    }
}

struct Enumeration<'a> {
    table: &'a SetTable,
    block: &'a ProbabilityBlock,
    prefix: Vec<TokenId>,
    // sets[i * words ..]: states after the first i tokens of `prefix`
    sets: Vec<u64>,
    best: Option<(Vec<TokenId>, f64)>,
    count: u64,
}

impl Enumeration<'_> {
    fn walk(&mut self, prob: f64) {
        let i = self.prefix.len();
        let w = self.table.words;
        if i == self.block.len() {
            self.count += 1;
            if prob > 0.0
                && self.table.meets_live(&self.sets[i * w..(i + 1) * w])
                && self.best.as_ref().map_or(true, |(_, b)| prob > *b)
            {
                self.best = Some((self.prefix.clone(), prob));
            }
            return;
        }
        for t in 0..self.block.vocab_size() as TokenId {
            let (done, rest) = self.sets.split_at_mut((i + 1) * w);
            self.table.advance(&done[i * w..], t, &mut rest[..w]);
            self.prefix.push(t);
            self.walk(prob * self.block.prob(i, t));
            self.prefix.pop();
        }
    }
}
