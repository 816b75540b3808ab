use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::block::{BlockError, ProbabilityBlock};
use crate::vocab::TokenVocabulary;
use crate::TokenId;

/// Supplies the model's per-position distributions at one diffusion step.
pub trait DistributionSource {
    fn vocab_size(&self) -> usize;

    /// `committed[i]` is the token already fixed at position `i`, if any.
    /// Committed rows must come back one-hot on that token.
    fn distribution(
        &mut self,
        block: usize,
        step: usize,
        committed: &[Option<TokenId>],
    ) -> Result<ProbabilityBlock, BlockError>;
}

/// Seeded stand-in for a denoising model: each free row is a softmax of
/// Gaussian logits divided by `temperature`. Low temperatures give peaked
/// rows, high ones near-uniform rows.
#[derive(Debug, Clone)]
pub struct SyntheticSource {
    seed: u64,
    temperature: f64,
    vocab_size: usize,
    excluded: Vec<bool>,
}

impl SyntheticSource {
    /// The mask and special tokens of `vocab` always get probability 0.
    pub fn new(seed: u64, temperature: f64, vocab: &TokenVocabulary) -> Self {
        let mut excluded = vec![false; vocab.len()];
        excluded[vocab.mask_id() as usize] = true;
        for t in vocab.special_ids() {
            excluded[t as usize] = true;
        }
        Self::with_excluded(seed, temperature, excluded)
    }

    pub fn with_excluded(seed: u64, temperature: f64, excluded: Vec<bool>) -> Self {
        assert!(temperature > 0.0 && temperature.is_finite(), "temperature must be positive");
        assert!(excluded.iter().any(|e| !e), "every token is excluded");
        Self {
            seed,
            temperature,
            vocab_size: excluded.len(),
            excluded,
        }
    }
}

impl DistributionSource for SyntheticSource {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn distribution(
        &mut self,
        block: usize,
        step: usize,
        committed: &[Option<TokenId>],
    ) -> Result<ProbabilityBlock, BlockError> {
        Ok(synthetic_distribution(
            self.seed,
            block,
            step,
            committed,
            &self.excluded,
            self.temperature,
        ))
    }
}

/// One synthetic block. Every row is drawn whether or not it is committed,
/// so a free row does not depend on which other rows were committed.
pub fn synthetic_distribution(
    seed: u64,
    block: usize,
    step: usize,
    committed: &[Option<TokenId>],
    excluded: &[bool],
    temperature: f64,
) -> ProbabilityBlock {
    let v = excluded.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((block as u64) << 32) | step as u64);
    let mut data = vec![0.0; committed.len() * v];
    for (row, fixed) in data.chunks_exact_mut(v).zip(committed) {
        for (p, &skip) in row.iter_mut().zip(excluded) {
            let z: f64 = StandardNormal.sample(&mut rng);
            *p = if skip { f64::NEG_INFINITY } else { z / temperature };
        }
        match fixed {
            Some(t) => {
                row.fill(0.0);
                row[*t as usize] = 1.0;
            }
            None => {
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut sum = 0.0;
                for p in row.iter_mut() {
                    *p = (*p - max).exp();
                    sum += *p;
                }
                for p in row.iter_mut() {
                    *p /= sum;
                }
            }
        }
    }
    ProbabilityBlock::from_flat(v, data).expect("softmax rows are finite")
}

/// Replays fixed blocks, one per block index, whatever the step. Committed
/// rows are overwritten with their one-hot.
#[derive(Debug, Clone)]
pub struct InjectedSource {
    blocks: Vec<ProbabilityBlock>,
}

impl InjectedSource {
    pub fn new(blocks: Vec<ProbabilityBlock>) -> Self {
        assert!(!blocks.is_empty(), "no blocks to inject");
        Self { blocks }
    }
}

impl DistributionSource for InjectedSource {
    fn vocab_size(&self) -> usize {
        self.blocks[0].vocab_size()
    }

    fn distribution(
        &mut self,
        block: usize,
        _step: usize,
        committed: &[Option<TokenId>],
    ) -> Result<ProbabilityBlock, BlockError> {
        let mut out = self
            .blocks
            .get(block)
            .ok_or_else(|| BlockError::Format(format!("no injected block {block}")))?
            .clone();
        if out.len() != committed.len() {
            return Err(BlockError::Format(format!(
                "injected block {block} has {} rows, expected {}",
                out.len(),
                committed.len()
            )));
        }
        for (i, c) in committed.iter().enumerate() {
            if let Some(t) = c {
                out.set_one_hot(i, *t);
            }
        }
        Ok(out)
    }
}
