#![allow(dead_code)]

use std::collections::{HashMap, HashSet, VecDeque};
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use dingo_core::regex_automaton::CharDfa;
use dingo_core::{StateId, TokenAutomaton, TokenId, TokenVocabulary};

pub fn qwen_vocab_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/qwen2_vocab.json")
}

pub fn load_qwen_vocab() -> TokenVocabulary {
    let file = File::open(qwen_vocab_path()).expect("vocabulary file under data/");
    TokenVocabulary::from_json_reader(BufReader::new(file)).expect("valid vocabulary")
}

/// Number of Myhill-Nerode classes among the states reachable from `start`,
/// by plain table filling. `step(q, a)` must be total over `0..n` and
/// `0..alphabet`.
pub fn table_filling_classes(
    n: usize,
    start: usize,
    alphabet: usize,
    accepting: impl Fn(usize) -> bool,
    step: impl Fn(usize, usize) -> usize,
) -> usize {
    let mut reach = vec![false; n];
    let mut queue = VecDeque::from([start]);
    reach[start] = true;
    while let Some(q) = queue.pop_front() {
        for a in 0..alphabet {
            let r = step(q, a);
            if !reach[r] {
                reach[r] = true;
                queue.push_back(r);
            }
        }
    }
    let states: Vec<usize> = (0..n).filter(|&q| reach[q]).collect();
    let mut distinct = vec![vec![false; n]; n];
    for &p in &states {
        for &q in &states {
            distinct[p][q] = accepting(p) != accepting(q);
        }
    }
    loop {
        let mut changed = false;
        for &p in &states {
            for &q in &states {
                if p < q && !distinct[p][q] && (0..alphabet).any(|a| distinct[step(p, a)][step(q, a)]) {
                    distinct[p][q] = true;
                    distinct[q][p] = true;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    // count classes: a state opens a new class unless equal to an earlier one
    states
        .iter()
        .enumerate()
        .filter(|&(i, &p)| states[..i].iter().all(|&q| distinct[p][q]))
        .count()
}

/// `(reachable states, Myhill-Nerode classes)` of a character DFA over its
/// own character classes.
pub fn char_dfa_classes(dfa: &CharDfa) -> (usize, usize) {
    let n = dfa.num_states();
    let k = dfa.num_classes();
    let mut reach = HashSet::from([dfa.start()]);
    let mut stack = vec![dfa.start()];
    while let Some(q) = stack.pop() {
        for c in 0..k {
            let r = dfa.step_class(q, c);
            if reach.insert(r) {
                stack.push(r);
            }
        }
    }
    let classes = table_filling_classes(
        n,
        dfa.start() as usize,
        k,
        |q| dfa.is_accepting(q as StateId),
        |q, c| dfa.step_class(q as StateId, c) as usize,
    );
    (reach.len(), classes)
}

/// Myhill-Nerode classes of a token automaton over its real tokens, with
/// missing moves sent to an extra rejecting sink. Tokens with identical move
/// vectors are collapsed first; that does not change the partition.
pub fn token_level_classes(ta: &TokenAutomaton, vocab: &TokenVocabulary) -> usize {
    let n = ta.num_states();
    let sink = n;
    let mut distinct_moves: HashMap<Vec<usize>, ()> = HashMap::new();
    for t in vocab.decodable_ids() {
        let moves: Vec<usize> = (0..n as StateId)
            .map(|q| ta.delta_t(q, t).map_or(sink, |r| r as usize))
            .collect();
        distinct_moves.insert(moves, ());
    }
    let letters: Vec<Vec<usize>> = distinct_moves.into_keys().collect();
    table_filling_classes(
        n + 1,
        ta.start() as usize,
        letters.len(),
        |q| q < n && ta.is_accepting(q as StateId),
        |q, a| if q == sink { sink } else { letters[a][q] },
    )
}

/// Bounded search for an accepting state reachable with at most `depth`
/// real tokens.
pub fn reaches_accepting(ta: &TokenAutomaton, from: StateId, depth: usize) -> bool {
    let mut frontier = HashSet::from([from]);
    let mut seen = frontier.clone();
    for _ in 0..=depth {
        if frontier.iter().any(|&q| ta.is_accepting(q)) {
            return true;
        }
        let mut next = HashSet::new();
        for &q in &frontier {
            for (_, r) in ta.token_edges(q) {
                if seen.insert(r) {
                    next.insert(r);
                }
            }
        }
        frontier = next;
    }
    false
}

/// Every string over `alphabet` of length at most `max_len`.
pub fn strings_up_to(alphabet: &[char], max_len: usize) -> Vec<String> {
    let mut out = vec![String::new()];
    let mut layer = vec![String::new()];
    for _ in 0..max_len {
        let mut next = Vec::with_capacity(layer.len() * alphabet.len());
        for s in &layer {
            for &c in alphabet {
                let mut t = s.clone();
                t.push(c);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// Token ids of `vocab` whose text is exactly `s`.
pub fn token_id(vocab: &TokenVocabulary, s: &str) -> TokenId {
    vocab
        .tokens()
        .iter()
        .position(|t| t == s)
        .unwrap_or_else(|| panic!("token {s:?} not in vocabulary")) as TokenId
}
