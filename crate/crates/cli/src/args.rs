use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dingo_core::diffusion::{DecodeMode, RemaskStrategy};

#[derive(Debug, Parser)]
#[command(name = "dingo", version, about = "Regex-constrained decoding for diffusion-style block generation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a token automaton from a regex and write it to a file.
    Compile(CompileArgs),
    /// Decode probability blocks under the constraint.
    Decode(DecodeArgs),
    /// Run the diffusion loop with a seeded synthetic model or fixed blocks.
    Simulate(SimulateArgs),
    /// Compare the decoder with exhaustive search.
    Oracle(OracleArgs),
    /// Compare the decoder with the greedy and unconstrained baselines.
    Baseline(BaselineArgs),
    /// Time decodes over a sweep of block lengths.
    Bench(BenchArgs),
}

/// Where the constraint comes from. Exactly one is required; the check
/// happens at load time so `oracle --random` can go without.
#[derive(Debug, Args)]
#[group(id = "constraint", multiple = false)]
pub struct Constraint {
    #[arg(long)]
    pub regex: Option<String>,
    /// File holding the pattern; one trailing newline is dropped.
    #[arg(long)]
    pub regex_file: Option<PathBuf>,
    /// Automaton written by `compile`, either format.
    #[arg(long)]
    pub automaton: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Input {
    #[command(flatten)]
    pub constraint: Constraint,
    /// Vocabulary JSON: {"tokens": [...], "mask": "...", "special": [...]}.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Rendering of the mask token in `text` fields.
    #[arg(long, default_value = "␠M")]
    pub mask_placeholder: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Binary,
    Json,
}

#[derive(Debug, Args)]
pub struct CompileArgs {
    #[command(flatten)]
    pub input: Input,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Binary)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    #[command(flatten)]
    pub input: Input,
    /// Probability block file (JSON or DGPB). Repeat for one file per block,
    /// or pass one file of d·k rows together with --blocks k.
    #[arg(long, required = true)]
    pub probs: Vec<PathBuf>,
    #[arg(long)]
    pub start_state: Option<u32>,
    #[arg(long)]
    pub blocks: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub input: Input,
    /// Tokens per block; taken from the blocks when --probs is given.
    #[arg(long, short = 'd')]
    pub block_len: Option<usize>,
    /// Diffusion steps per block; defaults to the block length.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub blocks: usize,
    #[arg(long, default_value = "topprob")]
    pub strategy: RemaskStrategy,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "dingo")]
    pub mode: DecodeMode,
    /// Softmax temperature of the synthetic model.
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f64,
    /// Fixed blocks replayed at every step instead of the synthetic model.
    #[arg(long)]
    pub probs: Vec<PathBuf>,
    /// Write the step transcript here as JSON lines.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub input: Input,
    #[arg(long)]
    pub probs: Option<PathBuf>,
    #[arg(long)]
    pub start_state: Option<u32>,
    /// Check this many generated small instances instead of one given one.
    #[arg(long, conflicts_with_all = ["probs", "start_state", "constraint", "vocab"])]
    pub random: Option<u64>,
    /// First instance seed for --random.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub input: Input,
    #[arg(long)]
    pub probs: PathBuf,
    #[arg(long)]
    pub start_state: Option<u32>,
    /// Commit order for the greedy decoder, e.g. 2,0,1; left to right if absent.
    #[arg(long, value_delimiter = ',')]
    pub order: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub input: Input,
    #[arg(long, value_delimiter = ',', default_value = "16,32,64,128")]
    pub d_values: Vec<usize>,
    /// Timed decodes per block length; the median is reported.
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.3)]
    pub masked_fraction: f64,
    /// CSV output: d,states,vocab,seconds.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
