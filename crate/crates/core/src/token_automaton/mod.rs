//! Token-level lifting of a character DFA.
//!
//! `delta_t(q, t)` runs the character DFA over the characters of token `t`
//! from `q`. Moves into the dead sink are not stored. The mask token `⊥`
//! behaves nondeterministically: `delta_mask(q)` is the set of every state
//! reachable from `q` with one real token. Liveness is recomputed over token
//! edges, since a character-level live state can be unreachable for a given
//! vocabulary.

mod serialize;

use std::collections::HashMap;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use thiserror::Error;

use crate::regex_automaton::{reverse_reachable, CharDfa, LiveSet};
use crate::vocab::{TokenVocabulary, VocabHash};
use crate::{StateId, StateSet, TokenId};

pub use serialize::FORMAT_VERSION;

#[derive(Debug, Error)]
pub enum AutomatonError {
    #[error("malformed automaton data: {0}")]
    Format(String),
    #[error("automaton format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("automaton was built for vocabulary {found}, not {expected}")]
    VocabularyMismatch { expected: VocabHash, found: VocabHash },
    #[error("token id {0} is out of range")]
    InvalidToken(TokenId),
    #[error("state id {0} is out of range")]
    InvalidState(StateId),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Outgoing edges of one state that share a target, with their tokens in
/// ascending id order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeGroup {
    pub target: StateId,
    start: u32,
    end: u32,
    class_start: u32,
    class_end: u32,
}

/// Marks tokens without any edge in [`TokenAutomaton::token_class`].
const NO_CLASS: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct TokenAutomaton {
    num_states: usize,
    start: StateId,
    accepting: StateSet,
    live: StateSet,
    vocab_size: usize,
    mask_id: TokenId,
    vocab_hash: VocabHash,
    // CSR rows of delta_t, tokens ascending within a row.
    row_ptr: Vec<u32>,
    edge_tokens: Vec<TokenId>,
    edge_targets: Vec<StateId>,
    mask_targets: Vec<Vec<StateId>>,
    // Same edges regrouped by (source, target) for cost-table construction.
    group_ptr: Vec<u32>,
    groups: Vec<EdgeGroup>,
    grouped_tokens: Vec<TokenId>,
    // Tokens with identical moves from every state share a class.
    token_class: Vec<u32>,
    num_classes: usize,
    grouped_classes: Vec<u32>,
    build_time: Option<Duration>,
}

impl PartialEq for TokenAutomaton {
    fn eq(&self, other: &Self) -> bool {
        self.num_states == other.num_states
            && self.start == other.start
            && self.accepting == other.accepting
            && self.vocab_size == other.vocab_size
            && self.mask_id == other.mask_id
            && self.vocab_hash == other.vocab_hash
            && self.row_ptr == other.row_ptr
            && self.edge_tokens == other.edge_tokens
            && self.edge_targets == other.edge_targets
            && self.mask_targets == other.mask_targets
    }
}

/// Size and timing summary of a built automaton.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct AutomatonStats {
    pub states: usize,
    pub reachable_states: usize,
    pub live_states: usize,
    pub accepting_states: usize,
    pub token_edges: usize,
    pub token_classes: usize,
    pub mask_edges: usize,
    pub vocab_size: usize,
    pub build_seconds: Option<f64>,
}

/// Lifts `dfa` to `vocab`. Special and mask ids contribute no real edges.
pub fn build_token_dfa(dfa: &CharDfa, live: &LiveSet, vocab: &TokenVocabulary) -> TokenAutomaton {
    let started = Instant::now();
    let classes = dfa.classes();

    let ids: Vec<TokenId> = vocab.decodable_ids().collect();
    let mut offsets = Vec::with_capacity(ids.len() + 1);
    let mut class_seq: Vec<u32> = Vec::new();
    offsets.push(0usize);
    for &id in &ids {
        let text = vocab.token(id).expect("decodable id");
        class_seq.extend(text.chars().map(|c| classes.class_of(c) as u32));
        offsets.push(class_seq.len());
    }

    let n = dfa.num_states();
    let rows: Vec<Vec<(TokenId, StateId)>> = (0..n as StateId)
        .into_par_iter()
        .map(|q| {
            if !live.contains(q) {
                return Vec::new();
            }
            let mut row = Vec::new();
            'tokens: for (k, &id) in ids.iter().enumerate() {
                let mut s = q;
                for &c in &class_seq[offsets[k]..offsets[k + 1]] {
                    s = dfa.step_class(s, c as usize);
                    if !live.contains(s) {
                        continue 'tokens;
                    }
                }
                row.push((id, s));
            }
            row
        })
        .collect();

    let mut ta = TokenAutomaton::from_rows(
        n,
        dfa.start(),
        dfa.accepting().clone(),
        vocab.len(),
        vocab.mask_id(),
        vocab.hash(),
        rows,
    );
    ta.build_time = Some(started.elapsed());
    log::info!(
        "token automaton: {} states, {} token edges, built in {:.3}s",
        n,
        ta.edge_tokens.len(),
        started.elapsed().as_secs_f64()
    );
    ta
}

impl TokenAutomaton {
    fn from_rows(
        num_states: usize,
        start: StateId,
        accepting: StateSet,
        vocab_size: usize,
        mask_id: TokenId,
        vocab_hash: VocabHash,
        rows: Vec<Vec<(TokenId, StateId)>>,
    ) -> Self {
        let mut row_ptr = Vec::with_capacity(num_states + 1);
        let total: usize = rows.iter().map(Vec::len).sum();
        let mut edge_tokens = Vec::with_capacity(total);
        let mut edge_targets = Vec::with_capacity(total);
        row_ptr.push(0);
        for row in &rows {
            for &(t, s) in row {
                edge_tokens.push(t);
                edge_targets.push(s);
            }
            row_ptr.push(edge_tokens.len() as u32);
        }
        let mask_targets = derive_mask_targets(num_states, &row_ptr, &edge_targets);
        Self::assemble(
            num_states,
            start,
            accepting,
            vocab_size,
            mask_id,
            vocab_hash,
            row_ptr,
            edge_tokens,
            edge_targets,
            mask_targets,
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        num_states: usize,
        start: StateId,
        accepting: StateSet,
        vocab_size: usize,
        mask_id: TokenId,
        vocab_hash: VocabHash,
        row_ptr: Vec<u32>,
        edge_tokens: Vec<TokenId>,
        edge_targets: Vec<StateId>,
        mask_targets: Vec<Vec<StateId>>,
    ) -> Self {
        let mut preds: Vec<Vec<StateId>> = vec![Vec::new(); num_states];
        for (q, targets) in mask_targets.iter().enumerate() {
            for &t in targets {
                preds[t as usize].push(q as StateId);
            }
        }
        let live = reverse_reachable(num_states, accepting.iter(), |q| &preds[q as usize]);

        let (token_class, num_classes) = token_classes(vocab_size, &row_ptr, &edge_tokens, &edge_targets);

        let mut group_ptr = Vec::with_capacity(num_states + 1);
        let mut groups = Vec::new();
        let mut grouped_tokens = Vec::with_capacity(edge_tokens.len());
        let mut grouped_classes = Vec::new();
        group_ptr.push(0);
        let mut order: Vec<usize> = Vec::new();
        for q in 0..num_states {
            let (lo, hi) = (row_ptr[q] as usize, row_ptr[q + 1] as usize);
            order.clear();
            order.extend(lo..hi);
            // stable: tokens stay ascending inside each target group
            order.sort_by_key(|&e| edge_targets[e]);
            let mut i = 0;
            while i < order.len() {
                let target = edge_targets[order[i]];
                let start = grouped_tokens.len() as u32;
                let class_start = grouped_classes.len() as u32;
                while i < order.len() && edge_targets[order[i]] == target {
                    let t = edge_tokens[order[i]];
                    grouped_tokens.push(t);
                    grouped_classes.push(token_class[t as usize]);
                    i += 1;
                }
                grouped_classes[class_start as usize..].sort_unstable();
                let mut w = class_start as usize;
                for r in class_start as usize..grouped_classes.len() {
                    if r == class_start as usize || grouped_classes[r] != grouped_classes[w - 1] {
                        grouped_classes[w] = grouped_classes[r];
                        w += 1;
                    }
                }
                grouped_classes.truncate(w);
                groups.push(EdgeGroup {
                    target,
                    start,
                    end: grouped_tokens.len() as u32,
                    class_start,
                    class_end: w as u32,
                });
            }
            group_ptr.push(groups.len() as u32);
        }

        Self {
            num_states,
            start,
            accepting,
            live,
            vocab_size,
            mask_id,
            vocab_hash,
            row_ptr,
            edge_tokens,
            edge_targets,
            mask_targets,
            group_ptr,
            groups,
            grouped_tokens,
            token_class,
            num_classes,
            grouped_classes,
            build_time: None,
        }
    }

    /// Builds an automaton from explicit token edges `(source, token, target)`,
    /// for synthetic workloads that do not come from a regex.
    pub fn from_transitions(
        num_states: usize,
        start: StateId,
        accepting: impl IntoIterator<Item = StateId>,
        vocab: &TokenVocabulary,
        mut edges: Vec<(StateId, TokenId, StateId)>,
    ) -> Result<Self, AutomatonError> {
        if start as usize >= num_states {
            return Err(AutomatonError::InvalidState(start));
        }
        let accepting: Vec<StateId> = accepting.into_iter().collect();
        if let Some(&q) = accepting.iter().find(|&&q| q as usize >= num_states) {
            return Err(AutomatonError::InvalidState(q));
        }
        edges.sort_unstable();
        for w in edges.windows(2) {
            if w[0].0 == w[1].0 && w[0].1 == w[1].1 {
                return Err(AutomatonError::Format(format!(
                    "duplicate edge for state {} token {}",
                    w[0].0, w[0].1
                )));
            }
        }
        let mut rows = vec![Vec::new(); num_states];
        for (q, t, s) in edges {
            if q as usize >= num_states {
                return Err(AutomatonError::InvalidState(q));
            }
            if s as usize >= num_states {
                return Err(AutomatonError::InvalidState(s));
            }
            if t as usize >= vocab.len() || t == vocab.mask_id() || vocab.is_special(t) {
                return Err(AutomatonError::InvalidToken(t));
            }
            rows[q as usize].push((t, s));
        }
        Ok(Self::from_rows(
            num_states,
            start,
            StateSet::from_states(num_states, accepting),
            vocab.len(),
            vocab.mask_id(),
            vocab.hash(),
            rows,
        ))
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn start(&self) -> StateId {
        self.start
    }

    pub fn mask_id(&self) -> TokenId {
        self.mask_id
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn vocab_hash(&self) -> VocabHash {
        self.vocab_hash
    }

    pub fn is_accepting(&self, q: StateId) -> bool {
        self.accepting.contains(q)
    }

    pub fn accepting(&self) -> &StateSet {
        &self.accepting
    }

    pub fn is_live(&self, q: StateId) -> bool {
        self.live.contains(q)
    }

    pub fn live(&self) -> &StateSet {
        &self.live
    }

    pub fn build_time(&self) -> Option<Duration> {
        self.build_time
    }

    pub fn num_token_edges(&self) -> usize {
        self.edge_tokens.len()
    }

    fn check_state(&self, q: StateId) -> Result<(), AutomatonError> {
        if (q as usize) < self.num_states {
            Ok(())
        } else {
            Err(AutomatonError::InvalidState(q))
        }
    }

    fn row(&self, q: StateId) -> std::ops::Range<usize> {
        self.row_ptr[q as usize] as usize..self.row_ptr[q as usize + 1] as usize
    }

    /// Real-token edges out of `q` as `(token, target)`, tokens ascending.
    pub fn token_edges(&self, q: StateId) -> impl Iterator<Item = (TokenId, StateId)> + '_ {
        let row = self.row(q);
        self.edge_tokens[row.clone()]
            .iter()
            .copied()
            .zip(self.edge_targets[row].iter().copied())
    }

    /// `delta_t(q, t)`; `None` when `t` leads into the dead sink or is the
    /// mask or a special id.
    pub fn delta_t(&self, q: StateId, t: TokenId) -> Option<StateId> {
        let row = self.row(q);
        self.edge_tokens[row.clone()]
            .binary_search(&t)
            .ok()
            .map(|i| self.edge_targets[row.start + i])
    }

    /// `delta_mask(q)`: targets of every real-token edge out of `q`, ascending.
    pub fn mask_closure(&self, q: StateId) -> &[StateId] {
        &self.mask_targets[q as usize]
    }

    /// Combined transition over the full vocabulary including `⊥`.
    pub fn combined_transition(&self, q: StateId, t: TokenId) -> Result<&[StateId], AutomatonError> {
        self.check_state(q)?;
        if t as usize >= self.vocab_size {
            return Err(AutomatonError::InvalidToken(t));
        }
        if t == self.mask_id {
            return Ok(&self.mask_targets[q as usize]);
        }
        let row = self.row(q);
        Ok(match self.edge_tokens[row.clone()].binary_search(&t) {
            Ok(i) => std::slice::from_ref(&self.edge_targets[row.start + i]),
            Err(_) => &[],
        })
    }

    /// Edge groups out of `q`, ordered by target.
    pub fn edge_groups(&self, q: StateId) -> &[EdgeGroup] {
        &self.groups[self.group_ptr[q as usize] as usize..self.group_ptr[q as usize + 1] as usize]
    }

    pub fn group_tokens(&self, group: &EdgeGroup) -> &[TokenId] {
        &self.grouped_tokens[group.start as usize..group.end as usize]
    }

    /// Offsets into the flattened group list, one entry per state plus one.
    /// Class of `t`, shared by every token with the same moves from every
    /// state; `None` for tokens with no move at all.
    pub fn token_class(&self, t: TokenId) -> Option<u32> {
        self.token_class.get(t as usize).copied().filter(|&c| c != NO_CLASS)
    }

    pub fn num_token_classes(&self) -> usize {
        self.num_classes
    }

    /// Distinct token classes on `group`, ascending.
    pub fn group_classes(&self, group: &EdgeGroup) -> &[u32] {
        &self.grouped_classes[group.class_start as usize..group.class_end as usize]
    }

    pub(crate) fn token_classes(&self) -> &[u32] {
        &self.token_class
    }

    pub(crate) fn group_offsets(&self) -> &[u32] {
        &self.group_ptr
    }

    pub(crate) fn all_groups(&self) -> &[EdgeGroup] {
        &self.groups
    }

    /// Replays real tokens from `q`; `None` once a move is undefined.
    pub fn replay(&self, q: StateId, tokens: &[TokenId]) -> Option<StateId> {
        tokens.iter().try_fold(q, |s, &t| self.delta_t(s, t))
    }

    /// Replays a possibly masked sequence with set semantics.
    pub fn replay_set(&self, q: StateId, tokens: &[TokenId]) -> Result<StateSet, AutomatonError> {
        self.check_state(q)?;
        let mut cur = StateSet::from_states(self.num_states, [q]);
        let mut next = StateSet::new(self.num_states);
        for &t in tokens {
            next.clear();
            for s in cur.iter() {
                for &r in self.combined_transition(s, t)? {
                    next.insert(r);
                }
            }
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    pub fn reachable_states(&self) -> StateSet {
        let mut seen = StateSet::from_states(self.num_states, [self.start]);
        let mut stack = vec![self.start];
        while let Some(q) = stack.pop() {
            for &t in self.mask_closure(q) {
                if seen.insert(t) {
                    stack.push(t);
                }
            }
        }
        seen
    }

    pub fn stats(&self) -> AutomatonStats {
        AutomatonStats {
            states: self.num_states,
            reachable_states: self.reachable_states().len(),
            live_states: self.live.len(),
            accepting_states: self.accepting.len(),
            token_edges: self.edge_tokens.len(),
            token_classes: self.num_classes,
            mask_edges: self.mask_targets.iter().map(Vec::len).sum(),
            vocab_size: self.vocab_size,
            build_seconds: self.build_time.map(|d| d.as_secs_f64()),
        }
    }
}

/// Partitions tokens by their full move vector. Classes are numbered by
/// their smallest token; tokens with no move get [`NO_CLASS`].
fn token_classes(
    vocab_size: usize,
    row_ptr: &[u32],
    edge_tokens: &[TokenId],
    edge_targets: &[StateId],
) -> (Vec<u32>, usize) {
    let mut moves: Vec<Vec<(StateId, StateId)>> = vec![Vec::new(); vocab_size];
    for q in 0..row_ptr.len() - 1 {
        for e in row_ptr[q] as usize..row_ptr[q + 1] as usize {
            moves[edge_tokens[e] as usize].push((q as StateId, edge_targets[e]));
        }
    }
    let mut ids: HashMap<&[(StateId, StateId)], u32> = HashMap::new();
    let mut class = vec![NO_CLASS; vocab_size];
    for (t, m) in moves.iter().enumerate() {
        if !m.is_empty() {
            let next = ids.len() as u32;
            class[t] = *ids.entry(m.as_slice()).or_insert(next);
        }
    }
    (class, ids.len())
}

fn derive_mask_targets(num_states: usize, row_ptr: &[u32], edge_targets: &[StateId]) -> Vec<Vec<StateId>> {
    let mut seen = StateSet::new(num_states);
    (0..num_states)
        .map(|q| {
            seen.clear();
            for &t in &edge_targets[row_ptr[q] as usize..row_ptr[q + 1] as usize] {
                seen.insert(t);
            }
            seen.iter().collect()
        })
        .collect()
}
