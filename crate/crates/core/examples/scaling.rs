//! Times single-block decodes over the large vocabulary.
//!
//! cargo run --release -p dingo-core --example scaling -- data/qwen2_vocab.json

use std::fs::File;
use std::io::BufReader;
use std::time::Instant;

use dingo_core::corpus::{cyclic_regex, gsm_regex, synthetic_block};
use dingo_core::{build_token_dfa, compile_regex, compute_live_states, decode_block, TokenVocabulary};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "data/qwen2_vocab.json".into());
    let vocab = TokenVocabulary::from_json_reader(BufReader::new(File::open(&path)?))?;
    for (name, pattern) in [("gsm", gsm_regex()), ("cyclic40", cyclic_regex(40))] {
        let dfa = compile_regex(&pattern)?;
        let ta = build_token_dfa(&dfa, &compute_live_states(&dfa), &vocab);
        println!("{name}: {:?}", ta.stats());
        for d in [16, 32, 64, 128] {
            let block = synthetic_block(&vocab, d, 7, 0.3);
            let t = Instant::now();
            let out = decode_block(&ta, &block, ta.start())?;
            println!("  d={d:4} {:.4}s optimal={}", t.elapsed().as_secs_f64(), out.optimal().is_some());
        }
    }
    Ok(())
}
