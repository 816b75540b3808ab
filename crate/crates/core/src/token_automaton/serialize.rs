//! `DGTA` binary format, all integers little-endian:
//!
//! ```text
//! magic "DGTA" | u32 version | vocab_hash [8] | u32 |Q| | u32 q0
//! accepting bitset, ceil(|Q|/8) bytes, bit q%8 of byte q/8
//! u32 nnz | u32 row_ptr[|Q|+1] | (u32 token, u32 target)[nnz]
//! per state: u32 count | u32 target[count]          (delta_mask)
//! ```
//!
//! The JSON form lists the same data as explicit `[source, token, target]`
//! edges; the mask adjacency is rederived on load.

use serde::{Deserialize, Serialize};

use super::{derive_mask_targets, AutomatonError, TokenAutomaton};
use crate::vocab::{TokenVocabulary, VocabHash};
use crate::{StateId, StateSet, TokenId};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"DGTA";

impl TokenAutomaton {
    pub fn serialize(&self) -> Vec<u8> {
        let n = self.num_states;
        let mut out = Vec::with_capacity(32 + n * 8 + self.edge_tokens.len() * 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.vocab_hash.0);
        out.extend_from_slice(&(n as u32).to_le_bytes());
        out.extend_from_slice(&self.start.to_le_bytes());
        let mut bits = vec![0u8; n.div_ceil(8)];
        for q in self.accepting.iter() {
            bits[q as usize / 8] |= 1 << (q % 8);
        }
        out.extend_from_slice(&bits);
        out.extend_from_slice(&(self.edge_tokens.len() as u32).to_le_bytes());
        for &p in &self.row_ptr {
            out.extend_from_slice(&p.to_le_bytes());
        }
        for (&t, &s) in self.edge_tokens.iter().zip(&self.edge_targets) {
            out.extend_from_slice(&t.to_le_bytes());
            out.extend_from_slice(&s.to_le_bytes());
        }
        for targets in &self.mask_targets {
            out.extend_from_slice(&(targets.len() as u32).to_le_bytes());
            for &s in targets {
                out.extend_from_slice(&s.to_le_bytes());
            }
        }
        out
    }

    /// Parses a `DGTA` stream and checks it against `vocab`.
    pub fn deserialize(bytes: &[u8], vocab: &TokenVocabulary) -> Result<Self, AutomatonError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(AutomatonError::Format("bad magic".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(AutomatonError::VersionMismatch {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let mut hash = [0u8; 8];
        hash.copy_from_slice(r.take(8)?);
        let found = VocabHash(hash);
        let expected = vocab.hash();
        if found != expected {
            return Err(AutomatonError::VocabularyMismatch { expected, found });
        }

        let n = r.u32()? as usize;
        if n == 0 {
            return Err(AutomatonError::Format("zero states".into()));
        }
        let start = r.u32()?;
        if start as usize >= n {
            return Err(AutomatonError::Format("start state out of range".into()));
        }
        let bits = r.take(n.div_ceil(8))?;
        let accepting = StateSet::from_states(
            n,
            (0..n as StateId).filter(|&q| bits[q as usize / 8] & (1 << (q % 8)) != 0),
        );

        let nnz = r.u32()? as usize;
        let row_ptr = (0..=n).map(|_| r.u32()).collect::<Result<Vec<_>, _>>()?;
        if row_ptr[0] != 0
            || row_ptr[n] as usize != nnz
            || row_ptr.windows(2).any(|w| w[0] > w[1])
        {
            return Err(AutomatonError::Format("inconsistent row pointers".into()));
        }
        let mut edge_tokens = Vec::with_capacity(nnz);
        let mut edge_targets = Vec::with_capacity(nnz);
        for _ in 0..nnz {
            let t: TokenId = r.u32()?;
            let s: StateId = r.u32()?;
            if t as usize >= vocab.len() || t == vocab.mask_id() || vocab.is_special(t) {
                return Err(AutomatonError::Format(format!("edge token {t} out of range")));
            }
            if s as usize >= n {
                return Err(AutomatonError::Format(format!("edge target {s} out of range")));
            }
            edge_tokens.push(t);
            edge_targets.push(s);
        }
        for q in 0..n {
            let row = &edge_tokens[row_ptr[q] as usize..row_ptr[q + 1] as usize];
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(AutomatonError::Format(format!("row {q} not sorted")));
            }
        }
        let mut mask_targets = Vec::with_capacity(n);
        for _ in 0..n {
            let count = r.u32()? as usize;
            if count > n {
                return Err(AutomatonError::Format("mask adjacency too long".into()));
            }
            mask_targets.push((0..count).map(|_| r.u32()).collect::<Result<Vec<_>, _>>()?);
        }
        if r.pos != bytes.len() {
            return Err(AutomatonError::Format("trailing bytes".into()));
        }
        if mask_targets != derive_mask_targets(n, &row_ptr, &edge_targets) {
            return Err(AutomatonError::Format(
                "mask adjacency disagrees with token edges".into(),
            ));
        }

        Ok(Self::assemble(
            n,
            start,
            accepting,
            vocab.len(),
            vocab.mask_id(),
            found,
            row_ptr,
            edge_tokens,
            edge_targets,
            mask_targets,
        ))
    }

    pub fn write_to(&self, path: impl AsRef<std::path::Path>) -> Result<(), AutomatonError> {
        std::fs::write(path, self.serialize())?;
        Ok(())
    }

    pub fn read_from(
        path: impl AsRef<std::path::Path>,
        vocab: &TokenVocabulary,
    ) -> Result<Self, AutomatonError> {
        Self::from_bytes(&std::fs::read(path)?, vocab)
    }
}

#[derive(Serialize, Deserialize)]
struct AutomatonJson {
    version: u32,
    vocab_hash: String,
    states: usize,
    start: StateId,
    accepting: Vec<StateId>,
    edges: Vec<(StateId, TokenId, StateId)>,
}

impl TokenAutomaton {
    pub fn to_json(&self) -> String {
        let edges = (0..self.num_states as StateId)
            .flat_map(|q| self.token_edges(q).map(move |(t, r)| (q, t, r)))
            .collect();
        serde_json::to_string(&AutomatonJson {
            version: FORMAT_VERSION,
            vocab_hash: self.vocab_hash.to_string(),
            states: self.num_states,
            start: self.start,
            accepting: self.accepting.iter().collect(),
            edges,
        })
        .expect("automaton serializes")
    }

    pub fn from_json(text: &str, vocab: &TokenVocabulary) -> Result<Self, AutomatonError> {
        let parsed: AutomatonJson =
            serde_json::from_str(text).map_err(|e| AutomatonError::Format(e.to_string()))?;
        if parsed.version != FORMAT_VERSION {
            return Err(AutomatonError::VersionMismatch {
                found: parsed.version,
                expected: FORMAT_VERSION,
            });
        }
        let expected = vocab.hash();
        if parsed.vocab_hash != expected.to_string() {
            let found = parse_hash(&parsed.vocab_hash)
                .ok_or_else(|| AutomatonError::Format("bad vocab_hash".into()))?;
            return Err(AutomatonError::VocabularyMismatch { expected, found });
        }
        if parsed.states == 0 {
            return Err(AutomatonError::Format("zero states".into()));
        }
        Self::from_transitions(parsed.states, parsed.start, parsed.accepting, vocab, parsed.edges)
    }

    /// Reads either format, told apart by the magic bytes.
    pub fn from_bytes(bytes: &[u8], vocab: &TokenVocabulary) -> Result<Self, AutomatonError> {
        if bytes.starts_with(MAGIC) {
            Self::deserialize(bytes, vocab)
        } else {
            let text = std::str::from_utf8(bytes).map_err(|e| AutomatonError::Format(e.to_string()))?;
            Self::from_json(text, vocab)
        }
    }
}

fn parse_hash(hex: &str) -> Option<VocabHash> {
    if hex.len() != 16 || !hex.is_ascii() {
        return None;
    }
    let mut out = [0u8; 8];
    for (i, b) in out.iter_mut().enumerate() {
        *b = u8::from_str_radix(&hex[2 * i..2 * i + 2], 16).ok()?;
    }
    Some(VocabHash(out))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8], AutomatonError> {
        let end = self
            .pos
            .checked_add(len)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| AutomatonError::Format("unexpected end of data".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, AutomatonError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}
