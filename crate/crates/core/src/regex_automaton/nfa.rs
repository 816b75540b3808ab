//! Thompson construction from the parsed pattern.

use regex_syntax::hir::{Class, Hir, HirKind};

use super::classes::CharClasses;
use super::RegexError;

#[derive(Debug, Default, Clone)]
pub(crate) struct NfaState {
    pub eps: Vec<usize>,
    /// `(first_class, last_class, target)`
    pub edges: Vec<(usize, usize, usize)>,
}

#[derive(Debug)]
pub(crate) struct Nfa {
    pub states: Vec<NfaState>,
    pub start: usize,
    pub accept: usize,
}

/// Collects every character range the pattern can consume, rejecting
/// constructs outside the full-match dialect.
pub(crate) fn collect_ranges(hir: &Hir, out: &mut Vec<(u32, u32)>) -> Result<(), RegexError> {
    match hir.kind() {
        HirKind::Empty => {}
        HirKind::Literal(lit) => {
            let text = std::str::from_utf8(&lit.0).map_err(|_| {
                RegexError::UnsupportedFeature("non-UTF-8 byte literal".to_string())
            })?;
            out.extend(text.chars().map(|c| (c as u32, c as u32)));
        }
        HirKind::Class(class) => out.extend(class_ranges(class)?),
        HirKind::Look(look) => {
            return Err(RegexError::UnsupportedFeature(format!(
                "assertion {look:?} (patterns are implicitly anchored)"
            )))
        }
        HirKind::Repetition(rep) => collect_ranges(&rep.sub, out)?,
        HirKind::Capture(cap) => collect_ranges(&cap.sub, out)?,
        HirKind::Concat(subs) | HirKind::Alternation(subs) => {
            for sub in subs {
                collect_ranges(sub, out)?;
            }
        }
    }
    Ok(())
}

fn class_ranges(class: &Class) -> Result<Vec<(u32, u32)>, RegexError> {
    match class {
        Class::Unicode(cls) => Ok(cls
            .ranges()
            .iter()
            .map(|r| (r.start() as u32, r.end() as u32))
            .collect()),
        Class::Bytes(cls) => cls
            .ranges()
            .iter()
            .map(|r| {
                if r.end() <= 0x7F {
                    Ok((r.start() as u32, r.end() as u32))
                } else {
                    Err(RegexError::UnsupportedFeature(
                        "non-ASCII byte class".to_string(),
                    ))
                }
            })
            .collect(),
    }
}

pub(crate) struct NfaBuilder<'a> {
    classes: &'a CharClasses,
    states: Vec<NfaState>,
}

impl<'a> NfaBuilder<'a> {
    pub fn new(classes: &'a CharClasses) -> Self {
        Self {
            classes,
            states: Vec::new(),
        }
    }

    pub fn build(mut self, hir: &Hir) -> Result<Nfa, RegexError> {
        let start = self.add();
        let accept = self.compile(hir, start)?;
        Ok(Nfa {
            states: self.states,
            start,
            accept,
        })
    }

    fn add(&mut self) -> usize {
        self.states.push(NfaState::default());
        self.states.len() - 1
    }

    fn eps(&mut self, from: usize, to: usize) {
        self.states[from].eps.push(to);
    }

    fn range_edge(&mut self, from: usize, lo: u32, hi: u32, to: usize) {
        let (first, last) = self.classes.span(lo, hi);
        self.states[from].edges.push((first, last, to));
    }

    /// Adds `hir` starting at `entry`; returns the state reached once it has
    /// fully matched.
    fn compile(&mut self, hir: &Hir, entry: usize) -> Result<usize, RegexError> {
        match hir.kind() {
            HirKind::Empty => Ok(entry),
            HirKind::Literal(lit) => {
                let text = std::str::from_utf8(&lit.0).map_err(|_| {
                    RegexError::UnsupportedFeature("non-UTF-8 byte literal".to_string())
                })?;
                let mut cur = entry;
                for c in text.chars() {
                    let next = self.add();
                    self.range_edge(cur, c as u32, c as u32, next);
                    cur = next;
                }
                Ok(cur)
            }
            HirKind::Class(class) => {
                let next = self.add();
                for (lo, hi) in class_ranges(class)? {
                    self.range_edge(entry, lo, hi, next);
                }
                Ok(next)
            }
            HirKind::Look(look) => Err(RegexError::UnsupportedFeature(format!(
                "assertion {look:?} (patterns are implicitly anchored)"
            ))),
            HirKind::Capture(cap) => self.compile(&cap.sub, entry),
            HirKind::Concat(subs) => {
                let mut cur = entry;
                for sub in subs {
                    cur = self.compile(sub, cur)?;
                }
                Ok(cur)
            }
            HirKind::Alternation(subs) => {
                let exit = self.add();
                for sub in subs {
                    let branch = self.add();
                    self.eps(entry, branch);
                    let end = self.compile(sub, branch)?;
                    self.eps(end, exit);
                }
                Ok(exit)
            }
            HirKind::Repetition(rep) => {
                let mut cur = entry;
                for _ in 0..rep.min {
                    let next = self.add();
                    self.eps(cur, next);
                    cur = self.compile(&rep.sub, next)?;
                }
                match rep.max {
                    None => {
                        let hub = self.add();
                        self.eps(cur, hub);
                        let body = self.add();
                        self.eps(hub, body);
                        let end = self.compile(&rep.sub, body)?;
                        self.eps(end, hub);
                        Ok(hub)
                    }
                    Some(max) => {
                        let exit = self.add();
                        for _ in rep.min..max {
                            self.eps(cur, exit);
                            let next = self.add();
                            self.eps(cur, next);
                            cur = self.compile(&rep.sub, next)?;
                        }
                        self.eps(cur, exit);
                        Ok(exit)
                    }
                }
            }
        }
    }
}
