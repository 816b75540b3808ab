use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::block::ProbabilityBlock;

/// Masked-count schedule for one block: `⌊d·(T−i)/T⌋` positions stay masked
/// after step `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub steps: usize,
    pub block_len: usize,
}

impl Schedule {
    /// `None` when `steps` is zero.
    pub fn new(steps: usize, block_len: usize) -> Option<Self> {
        (steps > 0).then_some(Self { steps, block_len })
    }

    pub fn masked_count(&self, step: usize) -> usize {
        assert!(step <= self.steps, "step {step} beyond {} steps", self.steps);
        let (d, t, i) = (self.block_len as u128, self.steps as u128, step as u128);
        (d * (t - i) / t) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemaskStrategy {
    Random {
        seed: u64,
    },
    /// Remask rows whose most likely token is least likely.
    #[default]
    TopTokenProbability,
    /// Remask rows with the highest entropy.
    Entropy,
}

impl fmt::Display for RemaskStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RemaskStrategy::Random { .. } => f.write_str("random"),
            RemaskStrategy::TopTokenProbability => f.write_str("topprob"),
            RemaskStrategy::Entropy => f.write_str("entropy"),
        }
    }
}

impl FromStr for RemaskStrategy {
    type Err = String;

    /// Parses the strategy kind; a random strategy gets seed 0.
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "random" => Ok(RemaskStrategy::Random { seed: 0 }),
            "topprob" => Ok(RemaskStrategy::TopTokenProbability),
            "entropy" => Ok(RemaskStrategy::Entropy),
            other => Err(format!("unknown remask strategy {other:?}")),
        }
    }
}

impl RemaskStrategy {
    pub fn with_seed(self, seed: u64) -> Self {
        match self {
            RemaskStrategy::Random { .. } => RemaskStrategy::Random { seed },
            other => other,
        }
    }
}

pub fn row_entropy(row: &[f64]) -> f64 {
    let total: f64 = row.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    row.iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| {
            let q = p / total;
            -q * q.ln()
        })
        .sum()
}

fn row_max(row: &[f64]) -> f64 {
    row.iter().copied().fold(0.0, f64::max)
}

/// Positions to keep masked after `step`: exactly `masked_count(step)` of
/// them, sorted ascending. Uncommitted positions are chosen before committed
/// ones; within each group the strategy ranks rows and ties go to the
/// smaller index.
pub fn remask_positions(
    block: &ProbabilityBlock,
    schedule: &Schedule,
    step: usize,
    strategy: RemaskStrategy,
    committed: &[bool],
) -> Vec<usize> {
    let d = block.len();
    assert_eq!(d, schedule.block_len, "block length differs from schedule");
    assert_eq!(committed.len(), d, "one committed flag per position");
    let n = schedule.masked_count(step);

    let mut order: Vec<usize> = (0..d).collect();
    match strategy {
        RemaskStrategy::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(step as u64);
            order.shuffle(&mut rng);
            // stable: keeps the shuffled order within each group
            order.sort_by_key(|&i| committed[i]);
        }
        RemaskStrategy::TopTokenProbability => {
            let keys: Vec<f64> = block.rows().map(row_max).collect();
            order.sort_by(|&a, &b| {
                committed[a]
                    .cmp(&committed[b])
                    .then(keys[a].partial_cmp(&keys[b]).unwrap_or(Ordering::Equal))
                    .then(a.cmp(&b))
            });
        }
        RemaskStrategy::Entropy => {
            let keys: Vec<f64> = block.rows().map(row_entropy).collect();
            order.sort_by(|&a, &b| {
                committed[a]
                    .cmp(&committed[b])
                    .then(keys[b].partial_cmp(&keys[a]).unwrap_or(Ordering::Equal))
                    .then(a.cmp(&b))
            });
        }
    }
    order.truncate(n);
    order.sort_unstable();
    order
}
