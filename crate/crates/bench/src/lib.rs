//! Shared fixtures for the benchmarks.

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use dingo_core::{build_token_dfa, compile_regex, compute_live_states, TokenAutomaton, TokenVocabulary};

/// The 151,667-token vocabulary under `data/`.
pub fn large_vocab() -> TokenVocabulary {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/qwen2_vocab.json");
    let file = File::open(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    TokenVocabulary::from_json_reader(BufReader::new(file)).expect("valid vocabulary")
}

pub fn automaton(pattern: &str, vocab: &TokenVocabulary) -> TokenAutomaton {
    let dfa = compile_regex(pattern).expect("valid pattern");
    build_token_dfa(&dfa, &compute_live_states(&dfa), vocab)
}
