//! Optimal regex-constrained decoding for diffusion-style block generation.

pub mod baselines;
pub mod block;
pub mod corpus;
pub mod decoder;
pub mod diffusion;
pub mod regex_automaton;
pub mod semi_autoregressive;
mod state_set;
pub mod token_automaton;
pub mod vocab;

pub use block::{BlockError, ProbabilityBlock};
pub use decoder::{decode_block, DecodeError, DecodeOutcome, Decoded};
pub use regex_automaton::{compile_regex, compute_live_states, CharDfa, LiveSet, RegexError};
pub use state_set::StateSet;
pub use token_automaton::{build_token_dfa, AutomatonError, TokenAutomaton};
pub use vocab::{TokenVocabulary, VocabError};

/// Dense automaton state id.
pub type StateId = u32;
/// Dense vocabulary token id.
pub type TokenId = u32;
