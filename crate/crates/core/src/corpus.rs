//! Fixed patterns used by the benchmarks and seeded random instances for
//! cross-checking decoders.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::block::ProbabilityBlock;
use crate::diffusion::synthetic_distribution;
use crate::regex_automaton::{compile_regex, compute_live_states};
use crate::token_automaton::{build_token_dfa, TokenAutomaton};
use crate::vocab::TokenVocabulary;
use crate::{StateId, TokenId};

/// Mask token used by generated vocabularies.
pub const MASK: &str = "<|mask|>";

const TEXT: &str = r"[ -;=?-~\n]+";
const OPERATOR: &str = r"(?:\+|\-|//|/|\*|%)";

fn atom(depth: usize) -> String {
    let leaf = "(?:[a-j])|(?:[0-9]{1,3})";
    if depth == 0 {
        format!("(?:{leaf})")
    } else {
        format!(r"(?:{leaf}|\((?:{})\))", expression(depth - 1))
    }
}

fn expression(depth: usize) -> String {
    let a = atom(depth);
    format!(r"(?:{a}(?:(?:\ )?{OPERATOR}(?:\ )?{a})*)")
}

/// Free text interleaved with `<< expr >>` blocks, where `expr` is an
/// arithmetic expression over single-letter variables and numbers of up to
/// three digits with parentheses nested at most three deep. Text may not
/// contain `<` or `>`.
pub fn gsm_regex() -> String {
    format!(
        r"(?:(?:{TEXT})*(?:<<(?:\ )?{}(?:\ )?>>))*(?:{TEXT})*",
        expression(3)
    )
}

/// A flat JSON object with string and date fields and one optional field.
pub fn json_regex() -> String {
    let string = r#""([^"\\\x00-\x1F\x7F-\x9F]|\\["\\])*""#;
    let date = r#""(?:\d{4})-(?:0[1-9]|1[0-2])-(?:0[1-9]|[1-2][0-9]|3[0-1])""#;
    let field = |name: &str, value: &str| format!(r#""{name}"[ ]?:[ ]?{value}"#);
    format!(
        r"\{{[ ]?{}[ ]?,[ ]?{}[ ]?,[ ]?{}[ ]?,[ ]?{}([ ]?,[ ]?{})?[ ]?\}}",
        field("campaignID", string),
        field("productID", string),
        field("startDate", date),
        field("endDate", date),
        field("discountDetails", string),
    )
}

/// Printable ASCII in chunks of `states - 1` characters. The minimal
/// automaton is a cycle of `states - 1` states plus the dead sink, and every
/// printable token moves every cycle state, so the token edges are dense.
pub fn cyclic_regex(states: usize) -> String {
    assert!(states >= 2, "need at least one cycle state besides the sink");
    format!("(?:[ -~]{{{}}})*", states - 1)
}

/// `d` rows of seeded synthetic distributions over `vocab`, with roughly
/// `masked_fraction` of them replaced by one-hot mask rows.
pub fn synthetic_block(vocab: &TokenVocabulary, d: usize, seed: u64, masked_fraction: f64) -> ProbabilityBlock {
    let mut excluded = vec![false; vocab.len()];
    excluded[vocab.mask_id() as usize] = true;
    for t in vocab.special_ids() {
        excluded[t as usize] = true;
    }
    let mut block = synthetic_distribution(seed, 0, 0, &vec![None; d], &excluded, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6d61_736b);
    for i in 0..d {
        if rng.gen_bool(masked_fraction) {
            block.set_one_hot(i, vocab.mask_id());
        }
    }
    block
}

/// A complete decoding problem.
#[derive(Debug, Clone)]
pub struct Instance {
    pub pattern: String,
    pub vocab: TokenVocabulary,
    pub automaton: TokenAutomaton,
    pub block: ProbabilityBlock,
    pub start: StateId,
}

fn random_pattern(rng: &mut ChaCha8Rng, depth: usize) -> String {
    if depth == 0 || rng.gen_bool(0.3) {
        return ["a", "b", "c", "[ab]", "[bc]"].choose(rng).unwrap().to_string();
    }
    let sub = |rng: &mut ChaCha8Rng| random_pattern(rng, depth - 1);
    match rng.gen_range(0..5) {
        0 | 1 => {
            let (x, y) = (sub(rng), sub(rng));
            format!("{x}{y}")
        }
        2 => {
            let (x, y) = (sub(rng), sub(rng));
            format!("(?:{x}|{y})")
        }
        3 => format!("(?:{})*", sub(rng)),
        _ => format!("(?:{})?", sub(rng)),
    }
}

fn random_tokens(rng: &mut ChaCha8Rng, count: usize, alphabet: &[char]) -> Vec<String> {
    let mut tokens: Vec<String> = Vec::with_capacity(count);
    while tokens.len() < count {
        let len = rng.gen_range(1..=3);
        let t: String = (0..len).map(|_| *alphabet.choose(rng).unwrap()).collect();
        if !tokens.contains(&t) {
            tokens.push(t);
        }
    }
    tokens
}

/// Rows are a mix of fully masked rows, rows with some mass on the mask and
/// plain token distributions. Weights are often quantized, which produces
/// exact ties, and often zero.
fn random_block(rng: &mut ChaCha8Rng, d: usize, vocab_size: usize, mask: TokenId) -> ProbabilityBlock {
    let mut rows = Vec::with_capacity(d);
    for _ in 0..d {
        let mut row = vec![0.0; vocab_size];
        if rng.gen_bool(0.3) {
            row[mask as usize] = 1.0;
            rows.push(row);
            continue;
        }
        let quantize = rng.gen_bool(0.5);
        let mask_mass = rng.gen_bool(0.25);
        for (t, p) in row.iter_mut().enumerate() {
            if (t as TokenId == mask && !mask_mass) || rng.gen_bool(0.15) {
                continue;
            }
            let w: f64 = rng.gen();
            *p = if quantize { (w * 4.0).ceil() } else { w };
        }
        let sum: f64 = row.iter().sum();
        if sum == 0.0 {
            row[rng.gen_range(0..vocab_size)] = 1.0;
        } else {
            row.iter_mut().for_each(|p| *p /= sum);
        }
        rows.push(row);
    }
    ProbabilityBlock::new(vocab_size, rows).expect("rows are well formed")
}

/// Small instance: at most 8 automaton states (dead sink included), at most
/// 10 tokens (mask included), block length 1 to 6. Patterns are usually
/// starred and vocabularies usually hold single letters, so most instances
/// have a solution. One start in five is a uniformly random state, live or
/// not.
pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (pattern, dfa) = loop {
        let mut p = random_pattern(&mut rng, 3);
        if rng.gen_bool(0.7) {
            p = format!("(?:{p})*");
        }
        let dfa = compile_regex(&p).expect("generated patterns are valid");
        if dfa.num_states() <= 8 {
            break (p, dfa);
        }
    };
    let count = rng.gen_range(1..=9);
    let mut letters = vec!["a", "b", "c"];
    letters.shuffle(&mut rng);
    let singles = rng.gen_range(2..=3).min(count);
    let mut tokens: Vec<String> = letters[..singles].iter().map(|s| s.to_string()).collect();
    // 'd' never occurs in patterns; it makes some tokens useless
    for t in random_tokens(&mut rng, count, &['a', 'b', 'c', 'a', 'b', 'c', 'd']) {
        if tokens.len() < count && !tokens.contains(&t) {
            tokens.push(t);
        }
    }
    tokens.shuffle(&mut rng);
    let vocab = TokenVocabulary::new(tokens, MASK).expect("tokens are distinct");
    let automaton = build_token_dfa(&dfa, &compute_live_states(&dfa), &vocab);
    let d = rng.gen_range(1..=6);
    let block = random_block(&mut rng, d, vocab.len(), vocab.mask_id());
    let start = if rng.gen_bool(0.2) {
        rng.gen_range(0..automaton.num_states() as StateId)
    } else {
        automaton.start()
    };
    Instance {
        pattern,
        vocab,
        automaton,
        block,
        start,
    }
}

/// Pattern `(?:R)+` with a vocabulary containing every single letter of R's
/// alphabet plus longer tokens that may use a letter outside it. Every live
/// state has a token edge into another live state, so constrained generation
/// of any length can always continue.
pub fn random_extendable(seed: u64) -> (String, TokenVocabulary, TokenAutomaton) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let pattern = format!("(?:{})+", random_pattern(&mut rng, 3));
        let dfa = compile_regex(&pattern).expect("generated patterns are valid");
        if dfa.accepts("") {
            continue;
        }
        let mut tokens: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let extra = rng.gen_range(1..=6);
        for t in random_tokens(&mut rng, extra + 3, &['a', 'b', 'c', 'd']) {
            if tokens.len() < 3 + extra && !tokens.contains(&t) {
                tokens.push(t);
            }
        }
        let vocab = TokenVocabulary::new(tokens, MASK).expect("tokens are distinct");
        let ta = build_token_dfa(&dfa, &compute_live_states(&dfa), &vocab);
        let extendable = ta
            .live()
            .iter()
            .all(|q| ta.token_edges(q).any(|(_, r)| ta.is_live(r)));
        if extendable && ta.is_live(ta.start()) {
            return (pattern, vocab, ta);
        }
    }
}
