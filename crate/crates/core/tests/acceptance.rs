//! Acceptance checks, one status line each. Run with
//! `cargo test -p dingo-core --test acceptance`.
//!
//! A line reads PASS or FAIL, or DOCUMENTED when a measured value differs
//! from the reference figure for a known reason that the line states.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use dingo_core::baselines::{brute_force_oracle, greedy_constrained_decode, GreedyOutcome};
use dingo_core::corpus::{cyclic_regex, gsm_regex, random_extendable, random_instance, synthetic_block};
use dingo_core::diffusion::{
    remask_positions, simulate_generation, DecodeMode, RemaskStrategy, Schedule, SimConfig,
    SyntheticSource,
};
use dingo_core::{
    build_token_dfa, compile_regex, compute_live_states, decode_block, DecodeOutcome,
    ProbabilityBlock, TokenVocabulary,
};

#[derive(Clone, Copy, PartialEq, Eq)]
enum Status {
    Pass,
    Fail,
    Documented,
}

struct Report {
    lines: Vec<(Status, String, String)>,
}

impl Report {
    fn record(&mut self, status: Status, name: &str, detail: String) {
        let tag = match status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Documented => "DOCUMENTED",
        };
        println!("{tag:<10} {name}: {detail}");
        self.lines.push((status, name.to_string(), detail));
    }

    fn check(&mut self, ok: bool, name: &str, detail: String) {
        self.record(if ok { Status::Pass } else { Status::Fail }, name, detail);
    }
}

fn rel_close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-10 * b.abs().max(1.0)
}

const CORPUS: u64 = 2000;

fn oracle_and_validity(report: &mut Report) {
    let started = Instant::now();
    let mut disagreements = Vec::new();
    let mut optimal = 0;
    let mut none = 0;
    let mut invalid = Vec::new();
    let mut masked_positions = 0;
    for seed in 0..CORPUS {
        let inst = random_instance(seed);
        let ta = &inst.automaton;
        let out = decode_block(ta, &inst.block, inst.start).expect("well-formed instance");
        let oracle = brute_force_oracle(ta, &inst.block, inst.start).expect("within oracle limit");
        match (&out, &oracle.best) {
            (DecodeOutcome::Optimal(d), Some((_, p))) if rel_close(d.log_prob, p.ln()) => optimal += 1,
            (DecodeOutcome::NoValidPrefix { .. }, None) => none += 1,
            _ => disagreements.push(seed),
        }
        if let DecodeOutcome::Optimal(d) = &out {
            let set_ok = ta.replay_set(inst.start, &d.tokens).unwrap().contains(d.end_state);
            let realized_ok = ta.replay(inst.start, &d.realized) == Some(d.end_state)
                && d.tokens
                    .iter()
                    .zip(&d.realized)
                    .all(|(&t, &r)| r != ta.mask_id() && (t == r || t == ta.mask_id()));
            masked_positions += d.tokens.iter().filter(|&&t| t == ta.mask_id()).count();
            if !(ta.is_live(d.end_state) && set_ok && realized_ok) {
                invalid.push(seed);
            }
        }
    }
    let elapsed = started.elapsed();
    report.check(
        disagreements.is_empty() && elapsed < Duration::from_secs(120),
        "oracle optimality",
        format!(
            "{CORPUS} instances, {optimal} optimal matches, {none} agreed no-valid-prefix, \
             {} disagreements {:?}, {:.1}s (limit 120s)",
            disagreements.len(),
            &disagreements[..disagreements.len().min(5)],
            elapsed.as_secs_f64()
        ),
    );
    report.check(
        invalid.is_empty() && optimal > 0,
        "prefix validity",
        format!(
            "{optimal} optimal outputs replay to a live state; {masked_positions} mask positions \
             realized by recorded tokens; {} violations",
            invalid.len()
        ),
    );
}

fn greedy_witness(report: &mut Report) {
    let vocab = TokenVocabulary::new(vec!["a".into(), "b".into(), "c".into()], "<m>").unwrap();
    let dfa = compile_regex("(aa)|(bc)").unwrap();
    let ta = build_token_dfa(&dfa, &compute_live_states(&dfa), &vocab);
    let block =
        ProbabilityBlock::new(4, vec![vec![0.6, 0.4, 0.0, 0.0], vec![0.1, 0.0, 0.9, 0.0]]).unwrap();
    let dingo = decode_block(&ta, &block, ta.start()).unwrap();
    let dingo_p = dingo.log_prob().map(f64::exp);
    let greedy_p = match greedy_constrained_decode(&ta, &block, ta.start(), &[0, 1]).unwrap() {
        GreedyOutcome::Committed { log_prob, .. } => Some(log_prob.exp()),
        GreedyOutcome::Failed { .. } => None,
    };
    let ok = dingo_p.is_some_and(|p| (p - 0.36).abs() < 1e-12)
        && greedy_p.is_some_and(|p| (p - 0.06).abs() < 1e-12)
        && dingo.optimal().is_some_and(|d| vocab.render(&d.tokens, "?") == "bc");
    report.check(
        ok,
        "greedy suboptimality witness",
        format!("optimal {dingo_p:?} (expected 0.36), greedy {greedy_p:?} (expected 0.06)"),
    );
}

fn schedule_exactness(report: &mut Report) {
    let started = Instant::now();
    let mut checked = 0u64;
    let mut wrong = Vec::new();
    for d in 1..=256usize {
        for t in 1..=d {
            let s = Schedule::new(t, d).unwrap();
            for i in 0..=t {
                let expected = ((d * (t - i)) as f64 / t as f64).floor() as usize;
                checked += 1;
                if s.masked_count(i) != expected {
                    wrong.push((d, t, i));
                }
            }
        }
    }
    // the remasking step must hold back exactly that many positions
    let mut remask_checked = 0u64;
    for d in 1..=48usize {
        let block = ProbabilityBlock::all_masked(d, 2, 1);
        let committed = vec![false; d];
        for t in 1..=d {
            let s = Schedule::new(t, d).unwrap();
            for i in 1..=t {
                for strategy in [
                    RemaskStrategy::TopTokenProbability,
                    RemaskStrategy::Entropy,
                    RemaskStrategy::Random { seed: i as u64 },
                ] {
                    remask_checked += 1;
                    if remask_positions(&block, &s, i, strategy, &committed).len() != s.masked_count(i) {
                        wrong.push((d, t, i));
                    }
                }
            }
        }
    }
    let elapsed = started.elapsed();
    report.check(
        wrong.is_empty() && elapsed < Duration::from_secs(10),
        "schedule exactness",
        format!(
            "{checked} (d, T, i) triples for d <= 256, {remask_checked} remask calls for d <= 48, \
             {} mismatches, {:.2}s (limit 10s)",
            wrong.len(),
            elapsed.as_secs_f64()
        ),
    );
}

fn precomputation(report: &mut Report, vocab: &TokenVocabulary) {
    let started = Instant::now();
    let dfa = compile_regex(&gsm_regex()).unwrap();
    let live = compute_live_states(&dfa);
    let ta = build_token_dfa(&dfa, &live, vocab);
    let elapsed = started.elapsed();
    let (reachable, classes) = common::char_dfa_classes(&dfa);
    let char_minimal = classes == reachable && dfa.num_states() <= reachable + 1;
    let token_classes = common::token_level_classes(&ta, vocab);
    let stats = ta.stats();
    report.check(
        vocab.len() == 151_667 && elapsed <= Duration::from_secs(120) && char_minimal,
        "precomputation time and minimality",
        format!(
            "|V| = {}, built in {:.2}s (limit 120s), {} token edges; table filling finds {} \
             classes over {} reachable character states",
            vocab.len(),
            elapsed.as_secs_f64(),
            stats.token_edges,
            classes,
            reachable
        ),
    );
    let status = if ta.num_states() == 40 {
        Status::Pass
    } else if char_minimal && token_classes == ta.num_states() {
        Status::Documented
    } else {
        Status::Fail
    };
    report.record(
        status,
        "precomputation state count",
        format!(
            "{} states (reference 40), {} live; token-level table filling gives {} classes. The \
             published arithmetic pattern is truncated after its operator list, so the \
             reconstructed pattern is not the original",
            ta.num_states(),
            stats.live_states,
            token_classes
        ),
    );
}

fn median_decode_time(ta: &dingo_core::TokenAutomaton, block: &ProbabilityBlock) -> Duration {
    let _ = decode_block(ta, block, ta.start());
    let mut times: Vec<Duration> = (0..11)
        .map(|_| {
            let t = Instant::now();
            let out = decode_block(ta, block, ta.start()).unwrap();
            let e = t.elapsed();
            assert!(out.optimal().is_some());
            e
        })
        .collect();
    times.sort();
    times[times.len() / 2]
}

fn scaling(report: &mut Report, vocab: &TokenVocabulary) {
    let dfa = compile_regex(&cyclic_regex(40)).unwrap();
    let ta = build_token_dfa(&dfa, &compute_live_states(&dfa), vocab);
    let sizes = [16usize, 32, 64, 128];
    let times: Vec<Duration> = sizes
        .iter()
        .map(|&d| median_decode_time(&ta, &synthetic_block(vocab, d, d as u64, 0.3)))
        .collect();
    let ratios: Vec<f64> = times
        .windows(2)
        .map(|w| w[1].as_secs_f64() / w[0].as_secs_f64())
        .collect();
    let last = *times.last().unwrap();
    report.check(
        ta.num_states() == 40
            && vocab.len() == 151_667
            && ratios.iter().all(|&r| r <= 2.5)
            && last < Duration::from_secs(1),
        "decode scaling",
        format!(
            "|Q| = {}, |V| = {}, {} token edges; median ms at d = {:?}: {:?}; doubling ratios \
             {:?} (limit 2.5); d = 128 takes {:.3}s (limit 1s)",
            ta.num_states(),
            vocab.len(),
            ta.num_token_edges(),
            sizes,
            times.iter().map(|t| format!("{:.1}", t.as_secs_f64() * 1e3)).collect::<Vec<_>>(),
            ratios.iter().map(|r| format!("{r:.2}")).collect::<Vec<_>>(),
            last.as_secs_f64()
        ),
    );
}

fn simulation(report: &mut Report) {
    let mut dingo_valid = 0;
    let mut free_invalid = 0;
    let runs = 100u64;
    for seed in 0..runs {
        let (_, vocab, ta) = random_extendable(seed);
        let run = |mode| {
            let config = SimConfig {
                schedule: Schedule::new(4, 8).unwrap(),
                blocks: 2,
                strategy: RemaskStrategy::default(),
                mode,
            };
            let mut source = SyntheticSource::new(seed, 1.0, &vocab);
            simulate_generation(&ta, &config, &mut source).unwrap()
        };
        let dingo = run(DecodeMode::Dingo);
        if dingo.valid && dingo.end_state.is_some_and(|q| ta.replay(ta.start(), &dingo.tokens) == Some(q)) {
            dingo_valid += 1;
        }
        if !run(DecodeMode::Unconstrained).valid {
            free_invalid += 1;
        }
    }
    report.check(
        dingo_valid == runs && free_invalid > 0,
        "end-to-end simulation",
        format!(
            "{runs} seeded runs (d = 8, T = 4, 2 blocks): constrained {dingo_valid}/{runs} end live, \
             unconstrained {}/{runs} end live",
            runs - free_invalid
        ),
    );
}

fn main() -> ExitCode {
    let mut report = Report { lines: Vec::new() };
    oracle_and_validity(&mut report);
    greedy_witness(&mut report);
    schedule_exactness(&mut report);
    let vocab = common::load_qwen_vocab();
    precomputation(&mut report, &vocab);
    scaling(&mut report, &vocab);
    simulation(&mut report);

    let failed: Vec<&str> = report
        .lines
        .iter()
        .filter(|(s, _, _)| *s == Status::Fail)
        .map(|(_, n, _)| n.as_str())
        .collect();
    println!(
        "acceptance: {} checks, {} failed",
        report.lines.len(),
        failed.len()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
