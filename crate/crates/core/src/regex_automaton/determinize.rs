//! Subset construction and partition-refinement minimization.

use std::collections::{HashMap, VecDeque};

use super::nfa::Nfa;

/// A complete DFA over class indices, before canonical renumbering.
pub(crate) struct RawDfa {
    pub num_classes: usize,
    pub start: usize,
    /// Index of the empty subset; always present.
    pub dead: usize,
    pub accepting: Vec<bool>,
    /// Row-major `state * num_classes + class`.
    pub trans: Vec<usize>,
}

fn closure(nfa: &Nfa, seeds: &mut Vec<usize>, seen: &mut [bool]) -> Vec<usize> {
    let mut out = Vec::new();
    while let Some(s) = seeds.pop() {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        out.push(s);
        seeds.extend(nfa.states[s].eps.iter().copied().filter(|&t| !seen[t]));
    }
    for &s in &out {
        seen[s] = false;
    }
    out.sort_unstable();
    out
}

pub(crate) fn determinize(nfa: &Nfa, num_classes: usize) -> RawDfa {
    let mut seen = vec![false; nfa.states.len()];
    let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut subsets: Vec<Vec<usize>> = Vec::new();
    let mut trans: Vec<usize> = Vec::new();

    // The empty subset is the dead sink.
    index.insert(Vec::new(), 0);
    subsets.push(Vec::new());
    let start_set = closure(nfa, &mut vec![nfa.start], &mut seen);
    let start = *index.entry(start_set.clone()).or_insert_with(|| {
        subsets.push(start_set);
        subsets.len() - 1
    });

    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    let mut cursor = 0;
    while cursor < subsets.len() {
        for b in buckets.iter_mut() {
            b.clear();
        }
        for &s in &subsets[cursor] {
            for &(first, last, target) in &nfa.states[s].edges {
                for bucket in &mut buckets[first..=last] {
                    bucket.push(target);
                }
            }
        }
        for bucket in buckets.iter_mut() {
            let next = if bucket.is_empty() {
                0
            } else {
                let mut seeds = std::mem::take(bucket);
                let set = closure(nfa, &mut seeds, &mut seen);
                *bucket = seeds;
                match index.get(&set) {
                    Some(&id) => id,
                    None => {
                        subsets.push(set.clone());
                        index.insert(set, subsets.len() - 1);
                        subsets.len() - 1
                    }
                }
            };
            trans.push(next);
        }
        cursor += 1;
    }

    let accepting = subsets
        .iter()
        .map(|set| set.binary_search(&nfa.accept).is_ok())
        .collect();
    RawDfa {
        num_classes,
        start,
        dead: 0,
        accepting,
        trans,
    }
}

/// Moore-style refinement to the coarsest language-equivalence partition,
/// then renumbering: breadth-first from the start state over classes in
/// order, with the dead sink last.
pub(crate) fn minimize(dfa: &RawDfa) -> RawDfa {
    let n = dfa.accepting.len();
    let k = dfa.num_classes;
    let mut block: Vec<usize> = dfa.accepting.iter().map(|&a| a as usize).collect();
    let mut count = block.iter().copied().max().map_or(0, |m| m + 1);
    loop {
        let mut ids: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut next = vec![0; n];
        for s in 0..n {
            let mut sig = Vec::with_capacity(k + 1);
            sig.push(block[s]);
            sig.extend(dfa.trans[s * k..(s + 1) * k].iter().map(|&t| block[t]));
            let fresh = ids.len();
            next[s] = *ids.entry(sig).or_insert(fresh);
        }
        let new_count = ids.len();
        block = next;
        if new_count == count {
            break;
        }
        count = new_count;
    }

    let dead_block = block[dfa.dead];
    let mut order: Vec<Option<usize>> = vec![None; count];
    let mut reps: Vec<usize> = Vec::with_capacity(count);
    let mut queue = VecDeque::new();
    if block[dfa.start] != dead_block {
        order[block[dfa.start]] = Some(0);
        reps.push(dfa.start);
        queue.push_back(dfa.start);
    }
    while let Some(s) = queue.pop_front() {
        for c in 0..k {
            let t = dfa.trans[s * k + c];
            let b = block[t];
            if b != dead_block && order[b].is_none() {
                order[b] = Some(reps.len());
                reps.push(t);
                queue.push_back(t);
            }
        }
    }
    let dead = reps.len();
    order[dead_block] = Some(dead);
    reps.push(dfa.dead);

    let mut trans = Vec::with_capacity(reps.len() * k);
    for &rep in &reps {
        trans.extend(
            dfa.trans[rep * k..(rep + 1) * k]
                .iter()
                .map(|&t| order[block[t]].expect("reachable block")),
        );
    }
    RawDfa {
        num_classes: k,
        start: order[block[dfa.start]].unwrap(),
        dead,
        accepting: reps.iter().map(|&r| dfa.accepting[r]).collect(),
        trans,
    }
}
