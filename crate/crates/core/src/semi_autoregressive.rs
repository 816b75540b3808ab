//! Multi-block generation with automaton state carried across blocks.
//!
//! Each block is decoded optimally from the state reached by the committed
//! prefix. Optimality holds per block only: the concatenation is valid but
//! not necessarily the best sequence over all blocks.

use std::error::Error as StdError;

use thiserror::Error;

use crate::block::ProbabilityBlock;
use crate::decoder::{decode_block, DecodeError, DecodeOutcome};
use crate::token_automaton::TokenAutomaton;
use crate::{StateId, TokenId};

pub type SourceError = Box<dyn StdError + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenerationConfig {
    /// Tokens per block (`d`).
    pub block_len: usize,
    /// Diffusion steps per block (`T`); unused by [`run_blocks`].
    pub steps: usize,
    /// Number of blocks (`k`).
    pub blocks: usize,
}

impl GenerationConfig {
    pub fn new(block_len: usize, steps: usize, blocks: usize) -> Self {
        Self {
            block_len,
            steps,
            blocks,
        }
    }

    pub fn total_len(&self) -> usize {
        self.block_len * self.blocks
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationState {
    pub committed: Vec<TokenId>,
    pub current_state: StateId,
    pub block_index: usize,
    pub config: GenerationConfig,
}

impl GenerationState {
    pub fn new(ta: &TokenAutomaton, config: GenerationConfig) -> Self {
        Self {
            committed: Vec::with_capacity(config.total_len()),
            current_state: ta.start(),
            block_index: 0,
            config,
        }
    }
}

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error("block source failed at block {block}: {source}")]
    BlockSource { block: usize, source: SourceError },
    #[error("block {block} has {found} rows, expected {expected}")]
    BlockLength {
        block: usize,
        expected: usize,
        found: usize,
    },
    #[error(transparent)]
    Decode(#[from] DecodeError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum GenerationOutcome {
    Complete {
        /// Real tokens; any `⊥` in a decoded block is replaced by the token
        /// that realized its edge.
        tokens: Vec<TokenId>,
        end_state: StateId,
        /// Sum of per-block optimal log-probabilities.
        log_prob: f64,
    },
    Failed {
        partial: Vec<TokenId>,
        failed_block: usize,
        state: StateId,
    },
}

/// Decodes `config.blocks` blocks in sequence, asking `source` for each block
/// given its index and the tokens committed so far.
pub fn run_blocks<F>(
    ta: &TokenAutomaton,
    config: GenerationConfig,
    source: F,
) -> Result<GenerationOutcome, GenerationError>
where
    F: FnMut(usize, &[TokenId]) -> Result<ProbabilityBlock, SourceError>,
{
    run_blocks_from(ta, ta.start(), config, source)
}

/// [`run_blocks`] with the first block decoded from `start`.
pub fn run_blocks_from<F>(
    ta: &TokenAutomaton,
    start: StateId,
    config: GenerationConfig,
    mut source: F,
) -> Result<GenerationOutcome, GenerationError>
where
    F: FnMut(usize, &[TokenId]) -> Result<ProbabilityBlock, SourceError>,
{
    let mut state = GenerationState::new(ta, config);
    state.current_state = start;
    let mut log_prob = 0.0;
    while state.block_index < config.blocks {
        let block_idx = state.block_index;
        let block = source(block_idx, &state.committed).map_err(|source| {
            GenerationError::BlockSource {
                block: block_idx,
                source,
            }
        })?;
        if block.len() != config.block_len {
            return Err(GenerationError::BlockLength {
                block: block_idx,
                expected: config.block_len,
                found: block.len(),
            });
        }
        match decode_block(ta, &block, state.current_state)? {
            DecodeOutcome::Optimal(d) if ta.is_live(d.end_state) => {
                log::debug!(
                    "block {block_idx}: {} -> {} (log p = {})",
                    state.current_state,
                    d.end_state,
                    d.log_prob
                );
                state.committed.extend_from_slice(&d.realized);
                state.current_state = d.end_state;
                log_prob += d.log_prob;
            }
            _ => {
                log::info!("block {block_idx}: no valid continuation from {}", state.current_state);
                return Ok(GenerationOutcome::Failed {
                    partial: state.committed,
                    failed_block: block_idx,
                    state: state.current_state,
                });
            }
        }
        state.block_index += 1;
    }
    Ok(GenerationOutcome::Complete {
        tokens: state.committed,
        end_state: state.current_state,
        log_prob,
    })
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ResumeError {
    #[error("prefix leaves the language after {consumed} tokens")]
    DeadPrefix { consumed: usize },
    #[error("prefix contains the mask token at position {0}")]
    MaskInPrefix(usize),
    #[error("token id {0} is out of range")]
    InvalidToken(TokenId),
}

/// State reached by replaying `committed` from the start state.
pub fn resume_state(ta: &TokenAutomaton, committed: &[TokenId]) -> Result<StateId, ResumeError> {
    let mut q = ta.start();
    for (i, &t) in committed.iter().enumerate() {
        if t as usize >= ta.vocab_size() {
            return Err(ResumeError::InvalidToken(t));
        }
        if t == ta.mask_id() {
            return Err(ResumeError::MaskInPrefix(i));
        }
        q = match ta.delta_t(q, t) {
            Some(r) if ta.is_live(r) => r,
            _ => return Err(ResumeError::DeadPrefix { consumed: i + 1 }),
        };
    }
    if ta.is_live(q) {
        Ok(q)
    } else {
        Err(ResumeError::DeadPrefix { consumed: 0 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regex_automaton::{compile_regex, compute_live_states};
    use crate::token_automaton::build_token_dfa;
    use crate::vocab::TokenVocabulary;

    fn automaton(pattern: &str, tokens: &[&str]) -> TokenAutomaton {
        let dfa = compile_regex(pattern).unwrap();
        let vocab =
            TokenVocabulary::new(tokens.iter().map(|s| s.to_string()).collect(), "<m>").unwrap();
        build_token_dfa(&dfa, &compute_live_states(&dfa), &vocab)
    }

    fn one_hot(v: usize, t: usize) -> ProbabilityBlock {
        let mut row = vec![0.0; v];
        row[t] = 1.0;
        ProbabilityBlock::new(v, vec![row]).unwrap()
    }

    #[test]
    fn two_blocks_of_ab() {
        // ab=0, x=1, mask=2
        let ta = automaton("(ab)(ab)", &["ab", "x"]);
        let out = run_blocks(&ta, GenerationConfig::new(1, 1, 2), |_, _| Ok(one_hot(3, 0))).unwrap();
        match out {
            GenerationOutcome::Complete {
                tokens,
                end_state,
                log_prob,
            } => {
                assert_eq!(tokens, vec![0, 0]);
                assert!(ta.is_accepting(end_state));
                assert_eq!(log_prob, 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn single_block_matches_decode_block() {
        let ta = automaton("a*b", &["a", "b"]);
        let block =
            ProbabilityBlock::new(3, vec![vec![0.6, 0.4, 0.0], vec![0.7, 0.3, 0.0]]).unwrap();
        let direct = decode_block(&ta, &block, ta.start()).unwrap();
        let direct = direct.optimal().unwrap();
        let out = run_blocks(&ta, GenerationConfig::new(2, 1, 1), |_, _| Ok(block.clone())).unwrap();
        assert_eq!(
            out,
            GenerationOutcome::Complete {
                tokens: direct.realized.clone(),
                end_state: direct.end_state,
                log_prob: direct.log_prob,
            }
        );
    }

    #[test]
    fn dead_end_keeps_partial_output() {
        // a=0, b=1, mask=2; after "b" nothing can follow
        let ta = automaton("a*b", &["a", "b"]);
        let out = run_blocks(&ta, GenerationConfig::new(1, 1, 2), |i, prefix| {
            assert_eq!(prefix.len(), i);
            Ok(one_hot(3, 1))
        })
        .unwrap();
        assert_eq!(
            out,
            GenerationOutcome::Failed {
                partial: vec![1],
                failed_block: 1,
                state: 1,
            }
        );
    }

    #[test]
    fn masked_block_end_carries_realized_token() {
        let ta = automaton("a*b", &["a", "b"]);
        let out = run_blocks(&ta, GenerationConfig::new(1, 1, 2), |i, _| {
            Ok(if i == 0 { one_hot(3, 2) } else { one_hot(3, 1) })
        })
        .unwrap();
        match out {
            GenerationOutcome::Complete { tokens, end_state, .. } => {
                assert!(tokens.iter().all(|&t| t != ta.mask_id()));
                assert_eq!(ta.replay(ta.start(), &tokens), Some(end_state));
                assert!(ta.is_accepting(end_state));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn source_errors_and_length_checks() {
        let ta = automaton("a*b", &["a", "b"]);
        let err = run_blocks(&ta, GenerationConfig::new(1, 1, 1), |_, _| Err("boom".into())).unwrap_err();
        assert!(matches!(err, GenerationError::BlockSource { block: 0, .. }));
        let err = run_blocks(&ta, GenerationConfig::new(2, 1, 1), |_, _| Ok(one_hot(3, 0))).unwrap_err();
        assert!(matches!(err, GenerationError::BlockLength { expected: 2, found: 1, .. }));
    }

    #[test]
    fn resume_examples() {
        let ta = automaton("a*b", &["a", "b"]);
        assert_eq!(resume_state(&ta, &[0, 0]), Ok(0));
        assert_eq!(resume_state(&ta, &[]), Ok(ta.start()));
        assert_eq!(resume_state(&ta, &[1, 0]), Err(ResumeError::DeadPrefix { consumed: 2 }));
        assert_eq!(resume_state(&ta, &[2]), Err(ResumeError::MaskInPrefix(0)));
        assert_eq!(resume_state(&ta, &[9]), Err(ResumeError::InvalidToken(9)));
    }
}
