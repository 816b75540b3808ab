//! Model-free diffusion generation loop.
//!
//! Each block starts fully masked and is refined over `T` steps. At step `i`
//! a [`DistributionSource`] proposes distributions for the block, the remask
//! strategy picks `⌊d·(T−i)/T⌋` positions to hold back (their rows become
//! one-hot on `⊥`), and the selected decoder fills in the rest. Positions
//! decoded to a real token are committed and passed back to the source as
//! one-hot rows on later steps.

mod remask;
mod source;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{greedy_constrained_decode, unconstrained_decode, BaselineError, GreedyOutcome};
use crate::block::BlockError;
use crate::decoder::{decode_block, DecodeError, DecodeOutcome};
use crate::token_automaton::TokenAutomaton;
use crate::{StateId, TokenId};

pub use remask::{remask_positions, row_entropy, RemaskStrategy, Schedule};
pub use source::{synthetic_distribution, DistributionSource, InjectedSource, SyntheticSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeMode {
    #[default]
    Dingo,
    Greedy,
    Unconstrained,
}

impl fmt::Display for DecodeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecodeMode::Dingo => "dingo",
            DecodeMode::Greedy => "greedy",
            DecodeMode::Unconstrained => "unconstrained",
        })
    }
}

impl FromStr for DecodeMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "dingo" => Ok(DecodeMode::Dingo),
            "greedy" => Ok(DecodeMode::Greedy),
            "unconstrained" => Ok(DecodeMode::Unconstrained),
            other => Err(format!("unknown decode mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    pub schedule: Schedule,
    pub blocks: usize,
    pub strategy: RemaskStrategy,
    pub mode: DecodeMode,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("distribution source failed: {0}")]
    Source(#[from] BlockError),
    #[error("source produced {found} rows, expected {expected}")]
    BlockLength { expected: usize, found: usize },
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
}

/// One diffusion step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub block: usize,
    pub step: usize,
    /// Positions held back as `⊥` at this step.
    pub masked: Vec<usize>,
    /// Decoder output for the whole block, `⊥` included; empty on failure.
    pub decoded: Vec<TokenId>,
    /// Log-probability of `decoded` under this step's rows.
    pub log_prob: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeadEnd {
    pub block: usize,
    pub step: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub mode: DecodeMode,
    pub steps: Vec<StepRecord>,
    /// Final tokens of every completed block.
    pub tokens: Vec<TokenId>,
    /// State after replaying `tokens`; `None` once the replay leaves the
    /// language or a block ended with `⊥`.
    pub end_state: Option<StateId>,
    /// `end_state` exists and is live, and no dead end occurred.
    pub valid: bool,
    pub dead_end: Option<DeadEnd>,
}

impl Transcript {
    /// One JSON object per step, newline-terminated.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.steps {
            out.push_str(&serde_json::to_string(r).expect("records serialize"));
            out.push('\n');
        }
        out
    }
}

fn block_strategy(strategy: RemaskStrategy, block: usize) -> RemaskStrategy {
    match strategy {
        RemaskStrategy::Random { seed } => RemaskStrategy::Random {
            seed: seed ^ (block as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
        },
        other => other,
    }
}

/// Runs `config.blocks` blocks of `config.schedule.steps` steps each.
///
/// Greedy mode commits positions left to right within a step. A block's
/// start state is the state reached after the previous blocks.
pub fn simulate_generation(
    ta: &TokenAutomaton,
    config: &SimConfig,
    source: &mut dyn DistributionSource,
) -> Result<Transcript, SimError> {
    if source.vocab_size() != ta.vocab_size() {
        return Err(DecodeError::DimensionMismatch {
            expected: ta.vocab_size(),
            found: source.vocab_size(),
        }
        .into());
    }
    let d = config.schedule.block_len;
    let mask = ta.mask_id();
    let natural: Vec<usize> = (0..d).collect();
    let mut transcript = Transcript {
        mode: config.mode,
        steps: Vec::new(),
        tokens: Vec::with_capacity(d * config.blocks),
        end_state: Some(ta.start()),
        valid: false,
        dead_end: None,
    };

    'blocks: for b in 0..config.blocks {
        let strategy = block_strategy(config.strategy, b);
        let start = transcript.end_state;
        let mut committed: Vec<Option<TokenId>> = vec![None; d];
        let mut last: Vec<TokenId> = vec![mask; d];
        let mut realized: Vec<TokenId> = vec![mask; d];
        let mut dingo_end = None;

        for step in 1..=config.schedule.steps {
            let mut block = source.distribution(b, step, &committed)?;
            if block.len() != d {
                return Err(SimError::BlockLength {
                    expected: d,
                    found: block.len(),
                });
            }
            let flags: Vec<bool> = committed.iter().map(Option::is_some).collect();
            let masked = remask_positions(&block, &config.schedule, step, strategy, &flags);
            for &i in &masked {
                block.set_one_hot(i, mask);
                committed[i] = None;
            }

            let decoded = match (config.mode, start) {
                (DecodeMode::Unconstrained, _) => {
                    let tokens = unconstrained_decode(&block);
                    Some((block.sequence_log_prob(&tokens), tokens.clone(), tokens))
                }
                (DecodeMode::Dingo, Some(q)) => match decode_block(ta, &block, q)? {
                    DecodeOutcome::Optimal(dec) => {
                        dingo_end = Some(dec.end_state);
                        Some((dec.log_prob, dec.tokens, dec.realized))
                    }
                    DecodeOutcome::NoValidPrefix { .. } => None,
                },
                (DecodeMode::Greedy, Some(q)) => match greedy_constrained_decode(ta, &block, q, &natural)? {
                    GreedyOutcome::Committed { tokens, log_prob, .. } => {
                        Some((log_prob, tokens.clone(), tokens))
                    }
                    GreedyOutcome::Failed { .. } => None,
                },
                (_, None) => None,
            };
            let Some((log_prob, tokens, real)) = decoded else {
                log::info!("{} mode: dead end at block {b}, step {step}", config.mode);
                transcript.steps.push(StepRecord {
                    block: b,
                    step,
                    masked,
                    decoded: Vec::new(),
                    log_prob: None,
                });
                transcript.dead_end = Some(DeadEnd { block: b, step });
                transcript.end_state = None;
                break 'blocks;
            };
            for i in 0..d {
                if masked.binary_search(&i).is_err() {
                    committed[i] = (tokens[i] != mask).then_some(tokens[i]);
                }
            }
            transcript.steps.push(StepRecord {
                block: b,
                step,
                masked,
                decoded: tokens.clone(),
                log_prob: log_prob.is_finite().then_some(log_prob),
            });
            last = tokens;
            realized = real;
        }

        transcript.end_state = match config.mode {
            DecodeMode::Dingo => {
                transcript.tokens.extend_from_slice(&realized);
                dingo_end
            }
            _ => {
                transcript.tokens.extend_from_slice(&last);
                match start {
                    Some(q) if !last.contains(&mask) => ta.replay(q, &last),
                    _ => None,
                }
            }
        };
    }

    transcript.valid = transcript.dead_end.is_none()
        && transcript.end_state.is_some_and(|q| ta.is_live(q));
    Ok(transcript)
}
