//! Per-position token probability vectors for one block.
//!
//! File formats:
//! - JSON `{"d": N, "vocab_size": M, "rows": [[...], ...]}`
//! - binary: magic `DGPB`, u32 version, u32 d, u32 vocab_size, then `d * M`
//!   float32 values row-major, all little-endian.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::TokenId;

pub const ROW_SUM_TOLERANCE: f64 = 1e-4;
const MAGIC: &[u8; 4] = b"DGPB";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum BlockError {
    #[error("row length {found} does not match vocabulary size {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid probability {value} at position {position}, token {token}")]
    InvalidEntry {
        position: usize,
        token: usize,
        value: f64,
    },
    #[error("row {position} sums to {sum}, not 1")]
    NotNormalized { position: usize, sum: f64 },
    #[error("{rows} rows cannot be split into {blocks} equal blocks")]
    UnevenSplit { rows: usize, blocks: usize },
    #[error("malformed probability data: {0}")]
    Format(String),
    #[error("probability format version {0} is not supported")]
    VersionMismatch(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `d` rows of `vocab_size` non-negative weights.
///
/// Construction only checks shape and that entries are finite and
/// non-negative; [`ProbabilityBlock::validate_distribution`] checks that every
/// row is a probability vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityBlock {
    vocab_size: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct BlockJson {
    d: usize,
    vocab_size: usize,
    rows: Vec<Vec<f64>>,
}

impl ProbabilityBlock {
    pub fn new(vocab_size: usize, rows: Vec<Vec<f64>>) -> Result<Self, BlockError> {
        let mut data = Vec::with_capacity(rows.len() * vocab_size);
        for row in rows {
            if row.len() != vocab_size {
                return Err(BlockError::DimensionMismatch {
                    expected: vocab_size,
                    found: row.len(),
                });
            }
            data.extend(row);
        }
        Self::from_flat(vocab_size, data)
    }

    pub fn from_flat(vocab_size: usize, data: Vec<f64>) -> Result<Self, BlockError> {
        if vocab_size == 0 || data.len() % vocab_size != 0 {
            return Err(BlockError::DimensionMismatch {
                expected: vocab_size,
                found: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(BlockError::InvalidEntry {
                position: i / vocab_size,
                token: i % vocab_size,
                value: data[i],
            });
        }
        Ok(Self { vocab_size, data })
    }

    /// `d` positions that are all one-hot on `mask_id`.
    pub fn all_masked(d: usize, vocab_size: usize, mask_id: TokenId) -> Self {
        let mut data = vec![0.0; d * vocab_size];
        for i in 0..d {
            data[i * vocab_size + mask_id as usize] = 1.0;
        }
        Self { vocab_size, data }
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.vocab_size
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.vocab_size..(i + 1) * self.vocab_size]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.vocab_size)
    }

    pub fn prob(&self, i: usize, t: TokenId) -> f64 {
        self.data[i * self.vocab_size + t as usize]
    }

    pub fn set_one_hot(&mut self, i: usize, t: TokenId) {
        let row = &mut self.data[i * self.vocab_size..(i + 1) * self.vocab_size];
        row.fill(0.0);
        row[t as usize] = 1.0;
    }

    pub fn is_one_hot(&self, i: usize, t: TokenId) -> bool {
        self.row(i)
            .iter()
            .enumerate()
            .all(|(j, &p)| if j == t as usize { p == 1.0 } else { p == 0.0 })
    }

    /// A row is masked iff all of its mass sits on `⊥`.
    pub fn is_masked(&self, i: usize, mask_id: TokenId) -> bool {
        self.prob(i, mask_id) == 1.0
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            vocab_size: self.vocab_size,
            data: self.data.iter().map(|p| p * factor).collect(),
        }
    }

    /// Probability of `tokens` under the independent-position model.
    pub fn sequence_prob(&self, tokens: &[TokenId]) -> f64 {
        tokens.iter().enumerate().map(|(i, &t)| self.prob(i, t)).product()
    }

    pub fn sequence_log_prob(&self, tokens: &[TokenId]) -> f64 {
        tokens
            .iter()
            .enumerate()
            .map(|(i, &t)| self.prob(i, t).ln())
            .sum()
    }

    /// Every entry in `[0, 1]` and every row summing to 1 within `tol`.
    pub fn validate_distribution(&self, tol: f64) -> Result<(), BlockError> {
        for (i, row) in self.rows().enumerate() {
            if let Some(t) = row.iter().position(|&p| p > 1.0) {
                return Err(BlockError::InvalidEntry {
                    position: i,
                    token: t,
                    value: row[t],
                });
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > tol {
                return Err(BlockError::NotNormalized { position: i, sum });
            }
        }
        Ok(())
    }

    /// Rows `start..start + len` as a new block.
    pub fn slice(&self, start: usize, len: usize) -> Self {
        Self {
            vocab_size: self.vocab_size,
            data: self.data[start * self.vocab_size..(start + len) * self.vocab_size].to_vec(),
        }
    }

    pub fn split(&self, blocks: usize) -> Result<Vec<Self>, BlockError> {
        if blocks == 0 || self.len() % blocks != 0 {
            return Err(BlockError::UnevenSplit {
                rows: self.len(),
                blocks,
            });
        }
        let d = self.len() / blocks;
        Ok((0..blocks).map(|b| self.slice(b * d, d)).collect())
    }

    pub fn concat(blocks: &[Self]) -> Result<Self, BlockError> {
        let vocab_size = blocks.first().map_or(1, |b| b.vocab_size);
        let mut data = Vec::new();
        for b in blocks {
            if b.vocab_size != vocab_size {
                return Err(BlockError::DimensionMismatch {
                    expected: vocab_size,
                    found: b.vocab_size,
                });
            }
            data.extend_from_slice(&b.data);
        }
        Ok(Self { vocab_size, data })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&BlockJson {
            d: self.len(),
            vocab_size: self.vocab_size,
            rows: self.rows().map(<[f64]>::to_vec).collect(),
        })
        .expect("finite values serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, BlockError> {
        let parsed: BlockJson =
            serde_json::from_str(text).map_err(|e| BlockError::Format(e.to_string()))?;
        if parsed.rows.len() != parsed.d {
            return Err(BlockError::Format(format!(
                "declared d = {} but found {} rows",
                parsed.d,
                parsed.rows.len()
            )));
        }
        Self::new(parsed.vocab_size, parsed.rows)
    }

    /// Binary encoding; values are narrowed to float32.
    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.data.len() * 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.vocab_size as u32).to_le_bytes());
        for &p in &self.data {
            out.extend_from_slice(&(p as f32).to_le_bytes());
        }
        out
    }

    pub fn from_binary(bytes: &[u8]) -> Result<Self, BlockError> {
        if bytes.len() < 16 || &bytes[..4] != MAGIC {
            return Err(BlockError::Format("missing DGPB header".into()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let version = word(4);
        if version != VERSION {
            return Err(BlockError::VersionMismatch(version));
        }
        let (d, m) = (word(8) as usize, word(12) as usize);
        let expected = d
            .checked_mul(m)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| BlockError::Format("dimensions overflow".into()))?;
        if bytes.len() - 16 != expected {
            return Err(BlockError::Format(format!(
                "expected {expected} payload bytes, found {}",
                bytes.len() - 16
            )));
        }
        let data = bytes[16..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        Self::from_flat(m, data)
    }

    /// Detects the format from the leading bytes.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, BlockError> {
        if bytes.starts_with(MAGIC) {
            Self::from_binary(bytes)
        } else {
            let text = std::str::from_utf8(bytes).map_err(|e| BlockError::Format(e.to_string()))?;
            Self::from_json(text)
        }
    }
}
