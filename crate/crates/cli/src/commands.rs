use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde_json::{json, Value};

use dingo_core::baselines::{
    brute_force_oracle, greedy_constrained_decode, unconstrained_decode, GreedyOutcome,
};
use dingo_core::corpus::{random_instance, synthetic_block};
use dingo_core::diffusion::{
    simulate_generation, DecodeMode, DistributionSource, InjectedSource, Schedule, SimConfig,
    SyntheticSource,
};
use dingo_core::semi_autoregressive::{run_blocks_from, GenerationConfig, GenerationOutcome};
use dingo_core::{
    build_token_dfa, compile_regex, compute_live_states, decode_block, DecodeOutcome,
    ProbabilityBlock, StateId, TokenAutomaton, TokenId, TokenVocabulary,
};

use crate::args::{
    BaselineArgs, BenchArgs, CompileArgs, Constraint, DecodeArgs, Format, Input, OracleArgs,
    SimulateArgs,
};

/// Failure of a subcommand. `Input` goes to stderr with exit code 2;
/// `Reported` prints its payload on stdout and exits with `code`.
#[derive(Debug)]
pub enum Failure {
    Input(String),
    Reported { code: u8, payload: Value },
}

pub const NO_VALID_PREFIX: u8 = 3;
pub const CHECK_FAILED: u8 = 1;

fn input<E: std::fmt::Display>(context: &str) -> impl FnOnce(E) -> Failure + '_ {
    move |e| Failure::Input(format!("{context}: {e}"))
}

type Outcome = Result<Value, Failure>;

fn load_vocab(inp: &Input) -> Result<TokenVocabulary, Failure> {
    let path = inp
        .vocab
        .as_ref()
        .ok_or_else(|| Failure::Input("--vocab is required".into()))?;
    let file = File::open(path).map_err(input(&path.display().to_string()))?;
    TokenVocabulary::from_json_reader(BufReader::new(file)).map_err(input(&path.display().to_string()))
}

fn read_pattern(c: &Constraint) -> Result<Option<String>, Failure> {
    if let Some(p) = &c.regex {
        return Ok(Some(p.clone()));
    }
    if let Some(path) = &c.regex_file {
        let text = fs::read_to_string(path).map_err(input(&path.display().to_string()))?;
        let text = text
            .strip_suffix("\r\n")
            .or_else(|| text.strip_suffix('\n'))
            .unwrap_or(&text);
        return Ok(Some(text.to_string()));
    }
    Ok(None)
}

fn build(pattern: &str, vocab: &TokenVocabulary) -> Result<(TokenAutomaton, usize), Failure> {
    let dfa = compile_regex(pattern).map_err(|e| Failure::Input(e.to_string()))?;
    let live = compute_live_states(&dfa);
    log::info!("character DFA: {} states, {} live", dfa.num_states(), live.len());
    Ok((build_token_dfa(&dfa, &live, vocab), dfa.num_states()))
}

fn load_automaton(inp: &Input, vocab: &TokenVocabulary) -> Result<TokenAutomaton, Failure> {
    if let Some(pattern) = read_pattern(&inp.constraint)? {
        return Ok(build(&pattern, vocab)?.0);
    }
    match &inp.constraint.automaton {
        Some(path) => TokenAutomaton::read_from(path, vocab).map_err(input(&path.display().to_string())),
        None => Err(Failure::Input(
            "one of --regex, --regex-file or --automaton is required".into(),
        )),
    }
}

fn load_block(path: &Path) -> Result<ProbabilityBlock, Failure> {
    let bytes = fs::read(path).map_err(input(&path.display().to_string()))?;
    ProbabilityBlock::from_bytes(&bytes).map_err(input(&path.display().to_string()))
}

fn check_vocab(block: &ProbabilityBlock, ta: &TokenAutomaton) -> Result<(), Failure> {
    if block.vocab_size() != ta.vocab_size() {
        return Err(Failure::Input(format!(
            "probability rows have length {}, vocabulary has {} tokens",
            block.vocab_size(),
            ta.vocab_size()
        )));
    }
    Ok(())
}

fn start_state(requested: Option<u32>, ta: &TokenAutomaton) -> Result<StateId, Failure> {
    let q = requested.unwrap_or(ta.start());
    if q as usize >= ta.num_states() {
        return Err(Failure::Input(format!(
            "start state {q} is out of range (automaton has {} states)",
            ta.num_states()
        )));
    }
    Ok(q)
}

/// Splits or checks the given block files against a block count.
fn gather_blocks(paths: &[std::path::PathBuf], blocks: Option<usize>) -> Result<Vec<ProbabilityBlock>, Failure> {
    let loaded = paths.iter().map(|p| load_block(p)).collect::<Result<Vec<_>, _>>()?;
    let k = blocks.unwrap_or(loaded.len());
    if k == 0 {
        return Err(Failure::Input("--blocks must be positive".into()));
    }
    let out = if loaded.len() == k {
        loaded
    } else if loaded.len() == 1 {
        loaded[0].split(k).map_err(input("--blocks"))?
    } else {
        return Err(Failure::Input(format!(
            "{} probability files given for {k} blocks",
            loaded.len()
        )));
    };
    let d = out[0].len();
    if let Some(b) = out.iter().find(|b| b.len() != d || b.vocab_size() != out[0].vocab_size()) {
        return Err(Failure::Input(format!(
            "blocks differ in shape: {}x{} vs {}x{}",
            d,
            out[0].vocab_size(),
            b.len(),
            b.vocab_size()
        )));
    }
    Ok(out)
}

fn render(vocab: &TokenVocabulary, tokens: &[TokenId], placeholder: &str) -> String {
    vocab.render(tokens, placeholder)
}

fn sequence(vocab: &TokenVocabulary, tokens: &[TokenId], log_prob: f64, placeholder: &str) -> Value {
    json!({
        "tokens": tokens,
        "text": render(vocab, tokens, placeholder),
        "log_prob": finite(log_prob),
    })
}

/// JSON has no infinities; `-inf` becomes null.
fn finite(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

pub fn compile(args: &CompileArgs) -> Outcome {
    let vocab = load_vocab(&args.input)?;
    let pattern = read_pattern(&args.input.constraint)?
        .ok_or_else(|| Failure::Input("compile needs --regex or --regex-file".into()))?;
    let (ta, char_states) = build(&pattern, &vocab)?;
    let written = match args.format {
        Format::Binary => ta.write_to(&args.out).map_err(input(&args.out.display().to_string())),
        Format::Json => fs::write(&args.out, ta.to_json()).map_err(input(&args.out.display().to_string())),
    };
    written?;
    let stats = ta.stats();
    log::info!("wrote {} ({} states, {} token edges)", args.out.display(), stats.states, stats.token_edges);
    let mut out = serde_json::to_value(&stats).expect("stats serialize");
    out["char_states"] = json!(char_states);
    out["vocab_hash"] = json!(ta.vocab_hash().to_string());
    out["out"] = json!(args.out.display().to_string());
    out["format"] = json!(match args.format {
        Format::Binary => "binary",
        Format::Json => "json",
    });
    Ok(out)
}

pub fn decode(args: &DecodeArgs) -> Outcome {
    let vocab = load_vocab(&args.input)?;
    let ta = load_automaton(&args.input, &vocab)?;
    let blocks = gather_blocks(&args.probs, args.blocks)?;
    check_vocab(&blocks[0], &ta)?;
    let start = start_state(args.start_state, &ta)?;
    let placeholder = &args.input.mask_placeholder;

    if blocks.len() == 1 {
        let out = decode_block(&ta, &blocks[0], start).map_err(input("decode"))?;
        return match out {
            DecodeOutcome::Optimal(d) => {
                let mut v = sequence(&vocab, &d.tokens, d.log_prob, placeholder);
                v["realized"] = json!(d.realized);
                v["end_state"] = json!(d.end_state);
                Ok(v)
            }
            DecodeOutcome::NoValidPrefix { witness_state } => Err(Failure::Reported {
                code: NO_VALID_PREFIX,
                payload: json!({"error": "no_valid_prefix", "witness_state": witness_state}),
            }),
        };
    }

    let config = GenerationConfig::new(blocks[0].len(), 1, blocks.len());
    let out = run_blocks_from(&ta, start, config, |i, _| Ok(blocks[i].clone()))
        .map_err(input("decode"))?;
    match out {
        GenerationOutcome::Complete {
            tokens,
            end_state,
            log_prob,
        } => {
            let mut v = sequence(&vocab, &tokens, log_prob, placeholder);
            v["realized"] = json!(tokens);
            v["end_state"] = json!(end_state);
            v["blocks"] = json!(blocks.len());
            Ok(v)
        }
        GenerationOutcome::Failed {
            partial,
            failed_block,
            state,
        } => Err(Failure::Reported {
            code: NO_VALID_PREFIX,
            payload: json!({
                "error": "no_valid_prefix",
                "failed_block": failed_block,
                "state": state,
                "partial": partial,
                "partial_text": render(&vocab, &partial, placeholder),
            }),
        }),
    }
}

pub fn simulate(args: &SimulateArgs) -> Outcome {
    let vocab = load_vocab(&args.input)?;
    let ta = load_automaton(&args.input, &vocab)?;
    let (mut source, d): (Box<dyn DistributionSource>, usize) = if args.probs.is_empty() {
        if !(args.temperature > 0.0 && args.temperature.is_finite()) {
            return Err(Failure::Input("--temperature must be positive".into()));
        }
        let d = args
            .block_len
            .ok_or_else(|| Failure::Input("--block-len is required without --probs".into()))?;
        (Box::new(SyntheticSource::new(args.seed, args.temperature, &vocab)), d)
    } else {
        let blocks = gather_blocks(&args.probs, Some(args.blocks))?;
        check_vocab(&blocks[0], &ta)?;
        let d = blocks[0].len();
        if args.block_len.is_some_and(|n| n != d) {
            return Err(Failure::Input(format!(
                "--block-len disagrees with blocks of {d} rows"
            )));
        }
        (Box::new(InjectedSource::new(blocks)), d)
    };
    if d == 0 {
        return Err(Failure::Input("block length must be positive".into()));
    }
    let steps = args.steps.unwrap_or(d);
    let schedule = Schedule::new(steps, d).ok_or_else(|| Failure::Input("--steps must be positive".into()))?;
    let config = SimConfig {
        schedule,
        blocks: args.blocks,
        strategy: args.strategy.with_seed(args.seed),
        mode: args.mode,
    };
    let transcript = simulate_generation(&ta, &config, source.as_mut()).map_err(input("simulate"))?;
    let placeholder = &args.input.mask_placeholder;

    let mut summary = json!({
        "mode": args.mode.to_string(),
        "strategy": args.strategy.to_string(),
        "seed": args.seed,
        "block_len": d,
        "steps": steps,
        "blocks": args.blocks,
        "tokens": transcript.tokens,
        "text": render(&vocab, &transcript.tokens, placeholder),
        "end_state": transcript.end_state,
        "valid": transcript.valid,
        "dead_end": transcript.dead_end,
    });
    match &args.out {
        Some(path) => {
            let mut f = File::create(path).map_err(input(&path.display().to_string()))?;
            f.write_all(transcript.to_jsonl().as_bytes())
                .map_err(input(&path.display().to_string()))?;
            summary["transcript"] = json!(path.display().to_string());
        }
        None => summary["records"] = json!(transcript.steps),
    }
    if args.mode == DecodeMode::Dingo && transcript.dead_end.is_some() {
        summary["error"] = json!("no_valid_prefix");
        return Err(Failure::Reported {
            code: NO_VALID_PREFIX,
            payload: summary,
        });
    }
    Ok(summary)
}

fn rel_close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-10 * b.abs().max(1.0)
}

/// Agreement of the decoder with exhaustive search on one instance, as
/// `(agree, oracle best, decoder outcome, sequences enumerated)`.
fn cross_check(
    ta: &TokenAutomaton,
    block: &ProbabilityBlock,
    start: StateId,
) -> Result<(bool, Option<(Vec<TokenId>, f64)>, DecodeOutcome, u64), Failure> {
    let oracle = brute_force_oracle(ta, block, start).map_err(input("oracle"))?;
    let dingo = decode_block(ta, block, start).map_err(input("decode"))?;
    let agree = match (&dingo, &oracle.best) {
        (DecodeOutcome::Optimal(d), Some((_, p))) => rel_close(d.log_prob, p.ln()),
        (DecodeOutcome::NoValidPrefix { .. }, None) => true,
        _ => false,
    };
    Ok((agree, oracle.best, dingo, oracle.enumerated))
}

pub fn oracle(args: &OracleArgs) -> Outcome {
    if let Some(n) = args.random {
        return oracle_random(args.seed, n);
    }
    let vocab = load_vocab(&args.input)?;
    let ta = load_automaton(&args.input, &vocab)?;
    let path = args
        .probs
        .as_ref()
        .ok_or_else(|| Failure::Input("--probs or --random is required".into()))?;
    let block = load_block(path)?;
    check_vocab(&block, &ta)?;
    let start = start_state(args.start_state, &ta)?;
    let placeholder = &args.input.mask_placeholder;
    let (agree, best, dingo, enumerated) = cross_check(&ta, &block, start)?;
    let payload = json!({
        "agree": agree,
        "enumerated": enumerated,
        "oracle": best.map(|(t, p)| sequence(&vocab, &t, p.ln(), placeholder)),
        "dingo": dingo.optimal().map(|d| sequence(&vocab, &d.tokens, d.log_prob, placeholder)),
    });
    if agree {
        Ok(payload)
    } else {
        Err(Failure::Reported {
            code: CHECK_FAILED,
            payload,
        })
    }
}

fn oracle_random(first: u64, n: u64) -> Outcome {
    let started = Instant::now();
    // collected in seed order whatever the pool size
    let results = (first..first.saturating_add(n))
        .into_par_iter()
        .map(|seed| {
            let inst = random_instance(seed);
            cross_check(&inst.automaton, &inst.block, inst.start)
                .map(|(agree, best, _, enumerated)| (seed, agree, best.is_some(), enumerated))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let disagreements: Vec<u64> = results.iter().filter(|r| !r.1).map(|r| r.0).collect();
    let optimal = results.iter().filter(|r| r.1 && r.2).count();
    let payload = json!({
        "instances": n,
        "first_seed": first,
        "optimal": optimal,
        "no_valid_prefix": results.iter().filter(|r| r.1 && !r.2).count(),
        "disagreements": disagreements,
        "enumerated": results.iter().map(|r| r.3).sum::<u64>(),
        "seconds": started.elapsed().as_secs_f64(),
    });
    if disagreements.is_empty() {
        Ok(payload)
    } else {
        Err(Failure::Reported {
            code: CHECK_FAILED,
            payload,
        })
    }
}

pub fn baseline(args: &BaselineArgs) -> Outcome {
    let vocab = load_vocab(&args.input)?;
    let ta = load_automaton(&args.input, &vocab)?;
    let block = load_block(&args.probs)?;
    check_vocab(&block, &ta)?;
    let start = start_state(args.start_state, &ta)?;
    let placeholder = &args.input.mask_placeholder;
    let order: Vec<usize> = args.order.clone().unwrap_or_else(|| (0..block.len()).collect());

    let dingo = decode_block(&ta, &block, start).map_err(input("decode"))?;
    let greedy = match greedy_constrained_decode(&ta, &block, start, &order).map_err(input("greedy"))? {
        GreedyOutcome::Committed {
            tokens,
            log_prob,
            zero_probability,
        } => {
            let mut v = sequence(&vocab, &tokens, log_prob, placeholder);
            v["zero_probability"] = json!(zero_probability);
            v
        }
        GreedyOutcome::Failed { position, .. } => json!({"failed_position": position}),
    };
    let free = unconstrained_decode(&block);
    let free_valid = ta
        .replay_set(start, &free)
        .map(|s| s.iter().any(|q| ta.is_live(q)))
        .unwrap_or(false);
    let mut unconstrained = sequence(&vocab, &free, block.sequence_log_prob(&free), placeholder);
    unconstrained["valid"] = json!(free_valid);
    Ok(json!({
        "dingo": dingo.optimal().map(|d| sequence(&vocab, &d.tokens, d.log_prob, placeholder)),
        "greedy": greedy,
        "unconstrained": unconstrained,
    }))
}

pub fn bench(args: &BenchArgs) -> Outcome {
    let vocab = load_vocab(&args.input)?;
    let ta = load_automaton(&args.input, &vocab)?;
    if args.repeats == 0 || args.d_values.contains(&0) {
        return Err(Failure::Input("--repeats and every d must be positive".into()));
    }
    if !(0.0..=1.0).contains(&args.masked_fraction) {
        return Err(Failure::Input("--masked-fraction must lie in [0, 1]".into()));
    }
    let mut rows = Vec::new();
    for &d in &args.d_values {
        let block = synthetic_block(&vocab, d, args.seed ^ d as u64, args.masked_fraction);
        let _ = decode_block(&ta, &block, ta.start());
        let mut times: Vec<f64> = (0..args.repeats)
            .map(|_| {
                let t = Instant::now();
                let _ = decode_block(&ta, &block, ta.start());
                t.elapsed().as_secs_f64()
            })
            .collect();
        times.sort_by(f64::total_cmp);
        let seconds = times[times.len() / 2];
        log::info!("d = {d}: {seconds:.6}s");
        rows.push((d, seconds));
    }
    if let Some(path) = &args.out {
        let mut csv = String::from("d,states,vocab,seconds\n");
        for (d, s) in &rows {
            csv.push_str(&format!("{d},{},{},{s:.9}\n", ta.num_states(), vocab.len()));
        }
        fs::write(path, csv).map_err(input(&path.display().to_string()))?;
    }
    let ratios: Vec<f64> = rows.windows(2).map(|w| w[1].1 / w[0].1).collect();
    Ok(json!({
        "states": ta.num_states(),
        "vocab": vocab.len(),
        "token_edges": ta.num_token_edges(),
        "rows": rows.iter().map(|(d, s)| json!({"d": d, "seconds": s})).collect::<Vec<_>>(),
        "ratios": ratios,
        "csv": args.out.as_ref().map(|p| p.display().to_string()),
    }))
}
