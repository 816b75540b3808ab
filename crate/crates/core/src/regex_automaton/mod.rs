//! Regex compilation to minimized character-level DFAs.
//!
//! Patterns use full-match semantics: a string is in the language only if
//! the whole string matches, as if the pattern were wrapped in `^(?:...)$`.
//! Parsing is delegated to `regex-syntax`; determinization, minimization and
//! the class partition are done here so the resulting state numbering is
//! canonical.

mod classes;
mod determinize;
mod nfa;

use std::collections::VecDeque;

use regex_syntax::ast::ErrorKind;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use classes::CharClasses;

use crate::{StateId, StateSet};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RegexError {
    #[error("regex syntax error: {0}")]
    Syntax(String),
    #[error("unsupported regex feature: {0}")]
    UnsupportedFeature(String),
}

/// Complete, minimized DFA over character classes with an explicit dead sink.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharDfa {
    num_states: usize,
    start: StateId,
    dead: StateId,
    accepting: StateSet,
    classes: CharClasses,
    trans: Vec<StateId>,
}

/// States from which some accepting state is reachable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LiveSet(StateSet);

impl LiveSet {
    pub fn contains(&self, q: StateId) -> bool {
        self.0.contains(q)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = StateId> + '_ {
        self.0.iter()
    }

    pub fn as_set(&self) -> &StateSet {
        &self.0
    }
}

/// Compiles `pattern` into a minimized DFA recognizing exactly its language.
pub fn compile_regex(pattern: &str) -> Result<CharDfa, RegexError> {
    let hir = regex_syntax::ParserBuilder::new()
        .build()
        .parse(pattern)
        .map_err(|err| match &err {
            regex_syntax::Error::Parse(e)
                if matches!(
                    e.kind(),
                    ErrorKind::UnsupportedBackreference | ErrorKind::UnsupportedLookAround
                ) =>
            {
                RegexError::UnsupportedFeature(e.kind().to_string())
            }
            _ => RegexError::Syntax(err.to_string()),
        })?;

    let mut ranges = Vec::new();
    nfa::collect_ranges(&hir, &mut ranges)?;
    let classes = CharClasses::from_ranges(&ranges);
    let nfa = nfa::NfaBuilder::new(&classes).build(&hir)?;
    let raw = determinize::determinize(&nfa, classes.len());
    let min = determinize::minimize(&raw);
    log::debug!(
        "compiled pattern: {} nfa states, {} subset states, {} minimal states, {} classes",
        nfa.states.len(),
        raw.accepting.len(),
        min.accepting.len(),
        classes.len()
    );

    let num_states = min.accepting.len();
    Ok(CharDfa {
        num_states,
        start: min.start as StateId,
        dead: min.dead as StateId,
        accepting: StateSet::from_states(
            num_states,
            (0..num_states)
                .filter(|&s| min.accepting[s])
                .map(|s| s as StateId),
        ),
        classes,
        trans: min.trans.into_iter().map(|t| t as StateId).collect(),
    })
}

/// Reverse breadth-first search from the accepting states.
pub fn compute_live_states(dfa: &CharDfa) -> LiveSet {
    let n = dfa.num_states;
    let k = dfa.classes.len();
    let mut preds: Vec<Vec<StateId>> = vec![Vec::new(); n];
    for s in 0..n {
        for &t in &dfa.trans[s * k..(s + 1) * k] {
            preds[t as usize].push(s as StateId);
        }
    }
    LiveSet(reverse_reachable(n, dfa.accepting.iter(), |q| &preds[q as usize]))
}

pub(crate) fn reverse_reachable<'a>(
    n: usize,
    targets: impl Iterator<Item = StateId>,
    preds: impl Fn(StateId) -> &'a [StateId],
) -> StateSet {
    let mut live = StateSet::new(n);
    let mut queue: VecDeque<StateId> = VecDeque::new();
    for q in targets {
        if live.insert(q) {
            queue.push_back(q);
        }
    }
    while let Some(q) = queue.pop_front() {
        for &p in preds(q) {
            if live.insert(p) {
                queue.push_back(p);
            }
        }
    }
    live
}

/// Runs the DFA over `w` from `q`.
pub fn extended_transition(dfa: &CharDfa, w: &str, q: StateId) -> StateId {
    w.chars().fold(q, |s, c| dfa.step(s, c))
}

impl CharDfa {
    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn start(&self) -> StateId {
        self.start
    }

    pub fn dead(&self) -> StateId {
        self.dead
    }

    pub fn is_accepting(&self, q: StateId) -> bool {
        self.accepting.contains(q)
    }

    pub fn accepting(&self) -> &StateSet {
        &self.accepting
    }

    pub fn classes(&self) -> &CharClasses {
        &self.classes
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn step(&self, q: StateId, c: char) -> StateId {
        self.step_class(q, self.classes.class_of(c))
    }

    pub fn step_class(&self, q: StateId, class: usize) -> StateId {
        self.trans[q as usize * self.classes.len() + class]
    }

    /// Full-match membership test.
    pub fn accepts(&self, w: &str) -> bool {
        self.is_accepting(extended_transition(self, w, self.start))
    }

    pub fn to_export(&self) -> DfaExport {
        let k = self.classes.len();
        DfaExport {
            states: self.num_states,
            start: self.start,
            accepting: self.accepting.iter().collect(),
            classes: self.classes.ranges().iter().map(|&(l, h)| [l, h]).collect(),
            trans: (0..self.num_states)
                .map(|s| self.trans[s * k..(s + 1) * k].to_vec())
                .collect(),
        }
    }

    /// Rebuilds a DFA from its debug export. The highest-numbered state with
    /// only self-loops and no acceptance is taken as the dead sink.
    pub fn from_export(export: &DfaExport) -> Result<Self, RegexError> {
        let bad = |msg: &str| RegexError::Syntax(format!("invalid DFA export: {msg}"));
        let n = export.states;
        let k = export.classes.len() + 1;
        if n == 0 || export.start as usize >= n || export.trans.len() != n {
            return Err(bad("state count"));
        }
        let mut trans = Vec::with_capacity(n * k);
        for row in &export.trans {
            if row.len() != k || row.iter().any(|&t| t as usize >= n) {
                return Err(bad("transition row"));
            }
            trans.extend_from_slice(row);
        }
        if export.accepting.iter().any(|&q| q as usize >= n) {
            return Err(bad("accepting state"));
        }
        let accepting = StateSet::from_states(n, export.accepting.iter().copied());
        let dead = (0..n as StateId)
            .rev()
            .find(|&q| {
                !accepting.contains(q)
                    && trans[q as usize * k..(q as usize + 1) * k]
                        .iter()
                        .all(|&t| t == q)
            })
            .ok_or_else(|| bad("no dead sink"))?;
        Ok(Self {
            num_states: n,
            start: export.start,
            dead,
            accepting,
            classes: CharClasses::from_raw(
                export.classes.iter().map(|&[l, h]| (l, h)).collect(),
            ),
            trans,
        })
    }
}

/// JSON shape of a DFA dump: class `i < classes.len()` covers the listed
/// interval and the final column of `trans` is the catch-all class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DfaExport {
    pub states: usize,
    pub start: StateId,
    pub accepting: Vec<StateId>,
    pub classes: Vec<[u32; 2]>,
    pub trans: Vec<Vec<StateId>>,
}
