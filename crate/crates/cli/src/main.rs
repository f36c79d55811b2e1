mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "repgraph", version, about = "Repeat detection in metagenomic assembly graphs")]
struct Cli {
    /// `key = value` configuration file; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Extra configuration entry, e.g. `--set skew_ratio=3`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Run seed (the first seed for multi-seed commands).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate two genomes with inserted repeats and paired-end reads.
    Simulate(SimulateArgs),
    /// Assemble reads into unitigs.
    Assemble(AssembleArgs),
    /// Map read prefixes (or import a SAM file) and compute unitig coverage.
    Map(MapArgs),
    /// Build and prune the unitig graph from a mapping.
    BuildGraph(BuildGraphArgs),
    /// Compute graph features.
    Features(FeaturesArgs),
    /// Assign percentile pseudo-labels.
    Pseudolabel(PseudolabelArgs),
    /// Train the graph network on pseudo-labels and write embeddings.
    GnnTrain(GnnTrainArgs),
    /// Train the random forest on features and embeddings.
    Rf(RfArgs),
    /// Fine-tune forest labels with per-class percentile outliers.
    Finetune(FinetuneArgs),
    /// Run the heuristic baseline detectors.
    Baselines(BaselinesArgs),
    /// Label unitigs by exact occurrence in reference genomes.
    Truth(TruthArgs),
    /// Score predicted labels against the truth.
    Eval(EvalArgs),
    /// Sweep the pseudo-label percentile over a finished run.
    Sweep(SweepArgs),
    /// Train on sampled true labels over a finished run.
    Semi(SemiArgs),
    /// Run the whole pipeline.
    Detect(DetectArgs),
    /// Summarize a finished run directory.
    Report(ReportArgs),
}

#[derive(Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 2)]
    pub genomes: usize,
    /// Genome length in bp.
    #[arg(long = "len", default_value_t = 5_000_000)]
    pub genome_len: usize,
    /// Repeat unit length in bp.
    #[arg(long = "L", default_value_t = 400)]
    pub repeat_len: usize,
    /// Copies of each repeat unit per genome.
    #[arg(long = "C", default_value_t = 25)]
    pub copies: usize,
    /// Total read pairs.
    #[arg(long, default_value_t = 2_000_000)]
    pub pairs: usize,
    #[arg(long, default_value_t = 101)]
    pub read_len: usize,
    #[arg(long, default_value_t = 500)]
    pub outer_dist: usize,
    /// Per-base substitution error rate.
    #[arg(long, default_value_t = 0.02)]
    pub err: f64,
    /// Per-base mutation rate.
    #[arg(long = "mut", default_value_t = 0.001)]
    pub mutation: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct AssembleArgs {
    #[arg(long, num_args = 2, value_names = ["R1", "R2"])]
    pub reads: Vec<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct MapArgs {
    /// Unitig FASTA.
    #[arg(long)]
    pub unitigs: PathBuf,
    #[arg(long, num_args = 2, value_names = ["R1", "R2"], required_unless_present = "sam")]
    pub reads: Vec<PathBuf>,
    /// SAM alignments of the reads against the unitigs.
    #[arg(long, conflicts_with = "reads")]
    pub sam: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct BuildGraphArgs {
    /// Directory holding mapping.tsv and unitigs.tsv.
    #[arg(long)]
    pub mapping: PathBuf,
    #[arg(long)]
    pub max_multimap: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct FeaturesArgs {
    #[arg(long)]
    pub graph: PathBuf,
    /// Estimate betweenness from this many sampled sources (0 = exact).
    #[arg(long)]
    pub approx_betweenness: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct PseudolabelArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct GnnTrainArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct RfArgs {
    #[arg(long)]
    pub xbar: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub trees: Option<usize>,
    /// Use the five graph features only.
    #[arg(long)]
    pub exclude_gnn: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct FinetuneArgs {
    #[arg(long)]
    pub rf: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct BaselinesArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub bambus_c: Option<f64>,
    /// Percentile for the pseudo-label baseline.
    #[arg(long)]
    pub p: Option<f64>,
    /// Truth table to score the methods against.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct TruthArgs {
    /// Unitig FASTA.
    #[arg(long)]
    pub unitigs: PathBuf,
    /// Reference genomes (FASTA).
    #[arg(long, required_unless_present = "alignment_counts")]
    pub refs: Option<PathBuf>,
    /// External `unitig_id<TAB>count` table instead of exact matching.
    #[arg(long, conflicts_with = "refs")]
    pub alignment_counts: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct EvalArgs {
    /// Label TSV (`unitig_id<TAB>label...`).
    #[arg(long)]
    pub pred: PathBuf,
    /// Truth TSV written by `truth`.
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct SweepArgs {
    /// Run directory with features, graph and truth.
    #[arg(long, default_value = "run")]
    pub run: PathBuf,
    /// Comma-separated percentiles.
    #[arg(long, value_delimiter = ',', default_values_t = [5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0, 45.0, 50.0])]
    pub p: Vec<f64>,
    /// Number of seeds, starting at `--seed`.
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
    /// Output directory (defaults to the run directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SemiArgs {
    #[arg(long, default_value = "run")]
    pub run: PathBuf,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
    /// Also run the self-supervised pipeline on the same seeds for comparison.
    #[arg(long)]
    pub compare: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct DetectArgs {
    #[arg(long, num_args = 2, value_names = ["R1", "R2"])]
    pub reads: Vec<PathBuf>,
    /// Pre-built unitig FASTA (skips assembly).
    #[arg(long)]
    pub unitigs: Option<PathBuf>,
    #[arg(long)]
    pub sam: Option<PathBuf>,
    #[arg(long)]
    pub refs: Option<PathBuf>,
    #[arg(long)]
    pub alignment_counts: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub trees: Option<usize>,
    #[arg(long)]
    pub exclude_gnn: bool,
    /// Comma-separated seed list.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
    /// `self` or `semi`.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub max_multimap: Option<usize>,
    #[arg(long)]
    pub approx_betweenness: Option<usize>,
    #[arg(long)]
    pub bambus_c: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Reuse deterministic artifacts already in the output directory.
    #[arg(long)]
    pub resume: bool,
}

#[derive(Args)]
pub struct ReportArgs {
    #[arg(long, default_value = "run")]
    pub run: PathBuf,
}

/// Settings shared by every command.
pub struct Globals {
    pub config: repgraph::config::RunConfig,
    pub seed: u64,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<repgraph::Error>()) {
        Some(e) if !e.is_input_error() => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let mut config = repgraph::config::RunConfig::default();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| repgraph::Error::from(e).at_path(path))?;
        config.apply_text(&text).map_err(|e| e.at_path(path))?;
    }
    for entry in &cli.set {
        let (k, v) = entry
            .split_once('=')
            .ok_or_else(|| repgraph::Error::invalid(format!("`--set {entry}`: expected KEY=VALUE")))?;
        config.set(k.trim(), v)?;
    }
    let seed = cli.seed.unwrap_or_else(|| config.seeds.first().copied().unwrap_or(0));
    let g = Globals { config, seed };
    use commands::*;
    match cli.command {
        Command::Simulate(a) => simulate(&g, a),
        Command::Assemble(a) => assemble(&g, a),
        Command::Map(a) => map(&g, a),
        Command::BuildGraph(a) => build_graph(&g, a),
        Command::Features(a) => features(&g, a),
        Command::Pseudolabel(a) => pseudolabel(&g, a),
        Command::GnnTrain(a) => gnn_train(&g, a),
        Command::Rf(a) => rf(&g, a),
        Command::Finetune(a) => finetune(&g, a),
        Command::Baselines(a) => baselines(&g, a),
        Command::Truth(a) => truth(&g, a),
        Command::Eval(a) => eval(&g, a),
        Command::Sweep(a) => sweep(&g, a),
        Command::Semi(a) => semi(&g, a),
        Command::Detect(a) => detect(g, a, cli.seed),
        Command::Report(a) => report(&g, a),
    }
}
