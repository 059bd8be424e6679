//! `trecdl`: one entry point for the whole pipeline.
//!
//! Every subcommand except `serve` writes its artifacts and a `manifest.json`
//! under `--out`. Exit codes: 0 success, 1 bad or inconsistent data, 2 usage.

mod commands;
mod manifest;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use trecdl::metrics::Metric;
use trecdl::trec_io::TaskKind;

#[derive(Debug, Parser)]
#[command(name = "trecdl", version, about = "Build, judge, evaluate and stress-test pooled test collections")]
struct Cli {
    /// Print a JSON report on stdout instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Directory for artifacts and manifest.json.
    #[arg(long, short, global = true, default_value = "trecdl-out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse input files and report counts and problems.
    Validate(ValidateArgs),
    /// Write a small generated collection with complete judgments.
    Synth(SynthArgs),
    /// Build a BM25 index from a corpus.
    Index(IndexArgs),
    /// Rank documents for a topics file with BM25, optionally with RM3.
    Search(SearchArgs),
    /// Select candidate topics and build depth-k pools.
    Pool(PoolArgs),
    /// Run the judging service.
    Serve(ServeArgs),
    /// One simulated judging trial.
    Simulate(SimulateArgs),
    /// Leave-one-team-out trials over several seeds.
    Lou(LouArgs),
    /// Compare stopping criteria by judgments spent and ranking agreement.
    Budgets(BudgetsArgs),
    /// Evaluate runs against qrels.
    Evaluate(EvaluateArgs),
    /// Per-topic difference between two runs.
    Compare(CompareArgs),
    /// Run × topic NDCG@10 matrix.
    ExportMatrix(EvalSetArgs),
    /// Data files for per-query bars, heatmaps and metric scatter plots.
    PlotData(PlotDataArgs),
}

#[derive(Debug, Args, Serialize)]
#[command(group(ArgGroup::new("inputs").required(true).multiple(true).args(["run", "qrels", "topics", "corpus", "meta"])))]
pub struct ValidateArgs {
    #[arg(long, num_args = 1..)]
    pub run: Vec<PathBuf>,
    #[arg(long, num_args = 1..)]
    pub qrels: Vec<PathBuf>,
    #[arg(long, num_args = 1..)]
    pub topics: Vec<PathBuf>,
    #[arg(long, num_args = 1..)]
    pub corpus: Vec<PathBuf>,
    /// Run metadata: `tag group subtask category` per line.
    #[arg(long, num_args = 1..)]
    pub meta: Vec<PathBuf>,
    #[arg(long, default_value = "document")]
    pub task: TaskKind,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 1000)]
    pub docs: usize,
    #[arg(long, default_value_t = 20)]
    pub topics: usize,
    #[arg(long, default_value_t = 2019)]
    pub seed: u64,
    /// Depth of the generated runs.
    #[arg(long, default_value_t = 100)]
    pub depth: usize,
    /// Per-topic cap of the judging pass that produces official.qrels.
    #[arg(long, default_value_t = 1000)]
    pub official_cap: usize,
    #[arg(long, default_value_t = 0)]
    pub official_seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct IndexArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value = "document")]
    pub task: TaskKind,
}

#[derive(Debug, Args, Serialize)]
pub struct SearchArgs {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub topics: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub k: usize,
    #[arg(long, default_value = "bm25")]
    pub tag: String,
    #[arg(long, default_value_t = 0.9)]
    pub k1: f64,
    #[arg(long, default_value_t = 0.4)]
    pub b: f64,
    #[arg(long)]
    pub rm3: bool,
    #[arg(long, default_value_t = 10, requires = "rm3")]
    pub fb_docs: usize,
    #[arg(long, default_value_t = 10, requires = "rm3")]
    pub fb_terms: usize,
    /// Weight of the original query.
    #[arg(long, default_value_t = 0.5, requires = "rm3")]
    pub lambda: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct PoolArgs {
    #[arg(long, required = true, num_args = 1..)]
    pub run: Vec<PathBuf>,
    /// Sparse labels used for topic selection and added to every pool.
    #[arg(long)]
    pub sparse: PathBuf,
    #[arg(long, default_value = "document")]
    pub task: TaskKind,
    #[arg(long, default_value_t = 10)]
    pub depth: usize,
    /// Pool every topic of the sparse labels instead of the candidate topics.
    #[arg(long)]
    pub all_topics: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub bind: SocketAddr,
    /// Overrides TRECDL_DATA_DIR.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct CollectionArgs {
    /// Directory in the layout `synth` writes (corpus.tsv, topics.tsv,
    /// sparse.qrels, runs/*.run, runs.meta).
    #[arg(long)]
    pub collection: PathBuf,
    /// Qrels standing in for the official judgments [default: <collection>/official.qrels].
    #[arg(long)]
    pub official: Option<PathBuf>,
    /// Complete judgments answering for the assessor [default: <collection>/oracle.qrels].
    #[arg(long)]
    pub oracle: Option<PathBuf>,
    #[arg(long, default_value = "document")]
    pub task: TaskKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionKind {
    /// As many judgments per topic as the official qrels has.
    Original,
    /// The same number of judgments for every topic.
    Budget,
    /// The judging stopping rules, with a per-topic cap.
    Heuristic,
}

#[derive(Debug, Args, Serialize)]
pub struct CriterionArgs {
    #[arg(long, value_enum, default_value = "original")]
    pub criterion: CriterionKind,
    /// Judgments per topic for `--criterion budget`.
    #[arg(long, required_if_eq("criterion", "budget"))]
    pub budget: Option<usize>,
    /// Per-topic cap for `--criterion heuristic`.
    #[arg(long, default_value_t = 1000)]
    pub cap: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub collection: CollectionArgs,
    #[command(flatten)]
    pub criterion: CriterionArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Leave this team's runs out of the pools.
    #[arg(long)]
    pub omit_team: Option<String>,
    /// Longest per-topic trace.
    #[arg(long, default_value_t = 2500)]
    pub trace_length: usize,
    /// Include the judged-order traces in trial.json.
    #[arg(long)]
    pub traces: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct LouArgs {
    #[command(flatten)]
    pub collection: CollectionArgs,
    #[command(flatten)]
    pub criterion: CriterionArgs,
    /// Number of trials; seeds run from --first-seed upwards.
    #[arg(long, default_value_t = 10)]
    pub seeds: usize,
    #[arg(long, default_value_t = 1)]
    pub first_seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct BudgetsArgs {
    #[command(flatten)]
    pub collection: CollectionArgs,
    /// Criteria to compare, one row each.
    #[arg(long, value_enum, required = true)]
    pub criterion: Vec<CriterionKind>,
    /// Judgments per topic, one row per value, for `budget`.
    #[arg(long)]
    pub budget: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    pub cap: usize,
    #[arg(long, default_value_t = 5)]
    pub seeds: usize,
    #[arg(long, default_value_t = 1)]
    pub first_seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalSetArgs {
    #[arg(long, required = true, num_args = 1..)]
    pub run: Vec<PathBuf>,
    #[arg(long)]
    pub qrels: PathBuf,
    #[arg(long, default_value = "document")]
    pub task: TaskKind,
    /// One topic id per line [default: every topic in the qrels].
    #[arg(long)]
    pub eval_topics: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub set: EvalSetArgs,
    /// Sparse labels for the MS MARCO style reciprocal rank.
    #[arg(long)]
    pub sparse: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct CompareArgs {
    #[arg(long)]
    pub run_a: PathBuf,
    #[arg(long)]
    pub run_b: PathBuf,
    #[arg(long)]
    pub qrels: PathBuf,
    #[arg(long, default_value = "document")]
    pub task: TaskKind,
    #[arg(long)]
    pub eval_topics: Option<PathBuf>,
    #[arg(long, default_value = "ndcg@10")]
    pub metric: Metric,
}

#[derive(Debug, Args, Serialize)]
pub struct PlotDataArgs {
    #[command(flatten)]
    pub set: EvalSetArgs,
    /// Two run tags for the per-query bar data.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    pub pair: Option<Vec<String>>,
}

/// Problems with the command line found after parsing.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

/// What a command prints: text for people, JSON with `--json`.
pub struct Report {
    pub text: String,
    pub json: serde_json::Value,
    /// Artifacts were written but the data did not pass.
    pub failed: bool,
}

fn run(cli: Cli) -> anyhow::Result<Report> {
    let out = cli.out.as_path();
    match cli.command {
        Command::Validate(a) => commands::validate(out, a),
        Command::Synth(a) => commands::synth(out, a),
        Command::Index(a) => commands::index(out, a),
        Command::Search(a) => commands::search(out, a),
        Command::Pool(a) => commands::pool(out, a),
        Command::Serve(a) => commands::serve(a),
        Command::Simulate(a) => commands::simulate(out, a),
        Command::Lou(a) => commands::lou(out, a),
        Command::Budgets(a) => commands::budgets(out, a),
        Command::Evaluate(a) => commands::evaluate(out, a),
        Command::Compare(a) => commands::compare(out, a),
        Command::ExportMatrix(a) => commands::export_matrix(out, a),
        Command::PlotData(a) => commands::plot_data(out, a),
    }
}

/// The error chain on one line, skipping causes the previous message already quotes.
fn describe(e: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if msg.contains(&text) {
            continue;
        }
        if !msg.is_empty() {
            msg.push_str(": ");
        }
        msg.push_str(&text);
    }
    msg
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let json = cli.json;
    match run(cli) {
        Ok(report) => {
            if json {
                println!("{}", serde_json::to_string_pretty(&report.json).expect("reports serialise"));
            } else {
                print!("{}", report.text);
            }
            if report.failed {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) if e.is::<Usage>() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(1)
        }
    }
}
