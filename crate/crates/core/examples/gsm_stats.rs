//! Compiles the arithmetic-reasoning pattern against a vocabulary file and
//! prints automaton statistics.
//!
//! cargo run --release -p dingo-core --example gsm_stats -- data/qwen2_vocab.json

use std::fs::File;
use std::io::BufReader;
use std::time::Instant;

use dingo_core::corpus::gsm_regex;
use dingo_core::{build_token_dfa, compile_regex, compute_live_states, TokenVocabulary};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "data/qwen2_vocab.json".into());
    let vocab = TokenVocabulary::from_json_reader(BufReader::new(File::open(&path)?))?;
    let t = Instant::now();
    let dfa = compile_regex(&gsm_regex())?;
    let live = compute_live_states(&dfa);
    println!(
        "char dfa: {} states ({} live), {} classes, {:.3}s",
        dfa.num_states(),
        live.len(),
        dfa.num_classes(),
        t.elapsed().as_secs_f64()
    );
    let ta = build_token_dfa(&dfa, &live, &vocab);
    println!("{}", serde_json::to_string_pretty(&ta.stats())?);
    Ok(())
}
