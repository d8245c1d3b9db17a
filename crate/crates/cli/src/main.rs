use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nutrient_estimate::Aggregation;

mod baseline;
mod commands;
mod config;
mod figures;
mod output;

/// Estimate macro-nutrients per 100 g from food titles and analyze Reddit food posts.
#[derive(Parser)]
#[command(name = "nutrient-estimate", version, arg_required_else_help = true)]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Seed for the train/test split.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (default: ./out).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Build the canonical food database from USDA FoodData Central exports.
    IngestUsda(IngestArgs),
    /// Validate food embeddings against the database and write the index store.
    BuildIndex(BuildIndexArgs),
    /// Estimate one title and print a CSV row to stdout.
    Estimate(EstimateArgs),
    /// Estimate every line of a titles file.
    EstimateBatch(EstimateBatchArgs),
    /// Grid-search (n, t, m) on the training split of a labeled dataset.
    Tune(TuneArgs),
    /// Score one configuration on the held-out split.
    Evaluate(EvaluateArgs),
    /// Score the external nutrition API on the held-out split.
    BaselineEval(BaselineArgs),
    /// Parse submission dumps and apply the deletion, tag and duplicate rules.
    CorpusFilter(CorpusFilterArgs),
    /// Weekly activity and nutrient medians for filtered submissions.
    CorpusAnalyze(CorpusAnalyzeArgs),
    /// Vega-Lite chart specs for the weekly series.
    EmitFigures(FiguresArgs),
}

#[derive(Args)]
pub struct EstimatorArgs {
    /// Number of neighbors.
    #[arg(long)]
    pub n: Option<usize>,
    /// Minimum cosine similarity.
    #[arg(long, allow_negative_numbers = true)]
    pub t: Option<f64>,
    /// Aggregation: mean, median or weighted_mean.
    #[arg(long)]
    pub m: Option<Aggregation>,
}

#[derive(Args)]
pub struct RetrievalArgs {
    /// Food database TSV.
    #[arg(long)]
    pub db: Option<PathBuf>,
    /// Food index NTEB store, keyed by food id.
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// Precomputed title embeddings keyed by normalized title.
    #[arg(long)]
    pub query_embeddings: Option<PathBuf>,
}

#[derive(Args)]
pub struct IngestArgs {
    /// Foundation Foods export directory.
    #[arg(long)]
    pub foundation: Option<PathBuf>,
    /// FNDDS (Survey) export directory.
    #[arg(long)]
    pub survey: Option<PathBuf>,
    /// SR Legacy export directory.
    #[arg(long)]
    pub sr_legacy: Option<PathBuf>,
    /// Column schema TOML (default: bundled v1).
    #[arg(long)]
    pub schema: Option<PathBuf>,
}

#[derive(Args)]
pub struct BuildIndexArgs {
    #[arg(long)]
    pub db: Option<PathBuf>,
    /// NTEB store of food-name embeddings keyed by food id. Without it the
    /// configured provider embeds the names.
    #[arg(long)]
    pub food_embeddings: Option<PathBuf>,
}

#[derive(Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub title: String,
    #[command(flatten)]
    pub retrieval: RetrievalArgs,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
}

#[derive(Args)]
pub struct EstimateBatchArgs {
    /// UTF-8 text file, one title per line.
    #[arg(long)]
    pub titles: Option<PathBuf>,
    #[command(flatten)]
    pub retrieval: RetrievalArgs,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
}

#[derive(Args)]
pub struct SplitArgs {
    /// Labeled CSV with header `title,calories_per_100g`.
    #[arg(long)]
    pub labeled: Option<PathBuf>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
}

#[derive(Args)]
pub struct TuneArgs {
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub retrieval: RetrievalArgs,
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub retrieval: RetrievalArgs,
    /// best_config.json written by `tune`.
    #[arg(long)]
    pub best: Option<PathBuf>,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
}

#[derive(Args)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub split: SplitArgs,
}

#[derive(Args)]
pub struct CorpusFilterArgs {
    /// Line-delimited JSON dumps (.zst and .gz are decompressed).
    #[arg(long = "dump")]
    pub dumps: Vec<PathBuf>,
    /// First day kept, YYYY-MM-DD.
    #[arg(long)]
    pub start: Option<chrono::NaiveDate>,
    /// Last day kept, YYYY-MM-DD.
    #[arg(long)]
    pub end: Option<chrono::NaiveDate>,
    #[arg(long)]
    pub subreddit: Option<String>,
}

#[derive(Args)]
pub struct CorpusAnalyzeArgs {
    /// submissions.csv written by `corpus-filter`.
    #[arg(long)]
    pub submissions: Option<PathBuf>,
    /// Reuse an existing post_estimates.csv instead of estimating.
    #[arg(long)]
    pub post_estimates: Option<PathBuf>,
    #[command(flatten)]
    pub retrieval: RetrievalArgs,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
}

#[derive(Args)]
pub struct FiguresArgs {
    #[arg(long)]
    pub weekly_activity: Option<PathBuf>,
    #[arg(long)]
    pub weekly_nutrients: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
