//! Token vocabularies and their JSON file format.

use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::TokenId;

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("vocabulary has no regular tokens")]
    Empty,
    #[error("token {0} is the empty string")]
    EmptyToken(usize),
    #[error("mask string {0:?} occurs more than once in the token list")]
    DuplicateMask(String),
    #[error("special token {0:?} is not in the token list")]
    UnknownSpecial(String),
    #[error("the mask token cannot also be a special token")]
    MaskIsSpecial,
    #[error("malformed vocabulary file: {0}")]
    Format(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// 8-byte fingerprint binding an automaton to the vocabulary it was built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VocabHash(pub [u8; 8]);

impl fmt::Display for VocabHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

/// Ordered token strings with one reserved mask id (`⊥`).
///
/// Token strings need not be unique: byte-level tokenizers decoded to text can
/// map several ids onto the same string. Special ids (padding, chat markers)
/// never take part in constrained decoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenVocabulary {
    tokens: Vec<String>,
    mask_id: TokenId,
    special: Vec<bool>,
}

#[derive(Debug, Serialize, Deserialize)]
struct VocabFile {
    tokens: Vec<String>,
    mask: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    special: Vec<String>,
}

impl TokenVocabulary {
    /// Uses the position of `mask` in `tokens` as the mask id, appending it
    /// when absent.
    pub fn new(tokens: Vec<String>, mask: &str) -> Result<Self, VocabError> {
        Self::with_special(tokens, mask, &[] as &[&str])
    }

    pub fn with_special<S: AsRef<str>>(
        mut tokens: Vec<String>,
        mask: &str,
        special: &[S],
    ) -> Result<Self, VocabError> {
        if let Some(i) = tokens.iter().position(|t| t.is_empty()) {
            return Err(VocabError::EmptyToken(i));
        }
        if mask.is_empty() {
            return Err(VocabError::EmptyToken(tokens.len()));
        }
        let mut hits = tokens.iter().enumerate().filter(|(_, t)| *t == mask);
        let mask_id = match (hits.next(), hits.next()) {
            (_, Some(_)) => return Err(VocabError::DuplicateMask(mask.to_string())),
            (Some((i, _)), None) => i,
            (None, None) => {
                tokens.push(mask.to_string());
                tokens.len() - 1
            }
        };
        if tokens.len() < 2 {
            return Err(VocabError::Empty);
        }
        let mut flags = vec![false; tokens.len()];
        for name in special {
            let name = name.as_ref();
            if name == mask {
                return Err(VocabError::MaskIsSpecial);
            }
            let mut found = false;
            for (flag, tok) in flags.iter_mut().zip(&tokens) {
                if tok == name {
                    *flag = true;
                    found = true;
                }
            }
            if !found {
                return Err(VocabError::UnknownSpecial(name.to_string()));
            }
        }
        Ok(Self {
            tokens,
            mask_id: mask_id as TokenId,
            special: flags,
        })
    }

    /// Reads `{"tokens": [...], "mask": "...", "special": [...]}`.
    pub fn from_json_reader(reader: impl Read) -> Result<Self, VocabError> {
        let file: VocabFile = serde_json::from_reader(std::io::BufReader::new(reader))?;
        Self::with_special(file.tokens, &file.mask, &file.special)
    }

    pub fn from_json_str(text: &str) -> Result<Self, VocabError> {
        let file: VocabFile = serde_json::from_str(text)?;
        Self::with_special(file.tokens, &file.mask, &file.special)
    }

    pub fn to_json(&self) -> String {
        let file = VocabFile {
            tokens: self.tokens.clone(),
            mask: self.tokens[self.mask_id as usize].clone(),
            special: self
                .special_ids()
                .map(|id| self.tokens[id as usize].clone())
                .collect(),
        };
        serde_json::to_string(&file).expect("vocabulary serializes")
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn mask_id(&self) -> TokenId {
        self.mask_id
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn is_special(&self, id: TokenId) -> bool {
        self.special.get(id as usize).copied().unwrap_or(false)
    }

    pub fn special_ids(&self) -> impl Iterator<Item = TokenId> + '_ {
        self.special
            .iter()
            .enumerate()
            .filter(|(_, &s)| s)
            .map(|(i, _)| i as TokenId)
    }

    /// Ids that may appear as real (unmasked) tokens in a decoded block.
    pub fn decodable_ids(&self) -> impl Iterator<Item = TokenId> + '_ {
        (0..self.tokens.len() as TokenId).filter(|&id| id != self.mask_id && !self.is_special(id))
    }

    pub fn hash(&self) -> VocabHash {
        let mut h = Sha256::new();
        h.update(b"dingo-vocab-v1");
        h.update((self.tokens.len() as u64).to_le_bytes());
        for tok in &self.tokens {
            h.update((tok.len() as u64).to_le_bytes());
            h.update(tok.as_bytes());
        }
        h.update(self.mask_id.to_le_bytes());
        for id in self.special_ids() {
            h.update(id.to_le_bytes());
        }
        let digest = h.finalize();
        let mut out = [0u8; 8];
        out.copy_from_slice(&digest[..8]);
        VocabHash(out)
    }

    /// Concatenates token strings, rendering the mask id as `placeholder`.
    pub fn render(&self, ids: &[TokenId], placeholder: &str) -> String {
        ids.iter()
            .map(|&id| {
                if id == self.mask_id {
                    placeholder
                } else {
                    self.token(id).unwrap_or("")
                }
            })
            .collect()
    }
}
