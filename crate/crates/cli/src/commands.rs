use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use nutrient_estimate::corpus::{
    estimate_submissions, filter_submissions, open_dump, parse_submissions, read_post_estimates,
    read_submissions, weekly_activity, weekly_medians, write_post_estimates, write_submissions,
    write_weekly_activity, write_weekly_nutrients, ParseStats,
};
use nutrient_estimate::estimator::write_batch_csv;
use nutrient_estimate::store::write_store;
use nutrient_estimate::tuning::{
    baseline_eval, dataset_stats, evaluate, grid_search, read_labeled_csv, split_dataset,
    write_test_summary, write_tuning_report, CachedBaseline, EvalContext, LabeledRecipe,
    TestSummary,
};
use nutrient_estimate::usda::{build_food_db_with_stats, parse_usda_dir, IngestSchema};
use nutrient_estimate::{
    build_index, normalize_query_title, EmbeddingProvider, EmbeddingRecord, EmbeddingStore,
    Estimator, EstimatorConfig, FoodDb, Index, NutrientVector, Outcome, PrecomputedEmbeddings,
    ProcessProvider, Source,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::baseline::HttpBaseline;
use crate::config::{self, input_path, optional_input, FileConfig};
use crate::output::OutDir;
use crate::{figures, Cli, Command, EstimatorArgs, RetrievalArgs, SplitArgs};

pub const MISSING_EMBEDDINGS: &str = "missing_embeddings.tsv";

struct Ctx {
    file: FileConfig,
    seed: u64,
    out: PathBuf,
    inputs: Vec<PathBuf>,
}

impl Ctx {
    fn input(
        &mut self,
        flag: Option<&PathBuf>,
        config: Option<&PathBuf>,
        what: &str,
    ) -> Result<PathBuf> {
        let p = input_path(flag, config, what)?;
        self.inputs.push(p.clone());
        Ok(p)
    }

    fn optional(
        &mut self,
        flag: Option<&PathBuf>,
        config: Option<&PathBuf>,
        what: &str,
    ) -> Result<Option<PathBuf>> {
        let p = optional_input(flag, config, what)?;
        self.inputs.extend(p.clone());
        Ok(p)
    }

    fn estimator(&self, args: &EstimatorArgs) -> Result<EstimatorConfig> {
        config::estimator_config(args.n, args.t, args.m, &self.file.estimator)
    }

    fn out_dir(&self) -> Result<OutDir> {
        OutDir::create(&self.out)
    }

    fn finish(self, out: OutDir, command: &str, mut run_config: serde_json::Value) -> Result<()> {
        run_config["command"] = json!(command);
        out.finish(command, &run_config, &self.inputs)
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let workers = cli.workers.or(file.workers);
    if let Some(k) = workers {
        if k == 0 {
            bail!("--workers must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()?;
    }
    let mut ctx = Ctx {
        seed: config::seed(cli.seed, &file),
        out: cli
            .out
            .clone()
            .or_else(|| file.out.clone())
            .unwrap_or_else(|| PathBuf::from("out")),
        file,
        inputs: Vec::new(),
    };
    if let Some(p) = &cli.config {
        ctx.inputs.push(p.clone());
    }
    match &cli.command {
        Command::IngestUsda(a) => ingest_usda(ctx, a),
        Command::BuildIndex(a) => build_index_cmd(ctx, a),
        Command::Estimate(a) => estimate(ctx, a),
        Command::EstimateBatch(a) => estimate_batch(ctx, a),
        Command::Tune(a) => tune(ctx, a),
        Command::Evaluate(a) => evaluate_cmd(ctx, a),
        Command::BaselineEval(a) => baseline_cmd(ctx, a),
        Command::CorpusFilter(a) => corpus_filter(ctx, a),
        Command::CorpusAnalyze(a) => corpus_analyze(ctx, a),
        Command::EmitFigures(a) => emit_figures(ctx, a),
    }
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> csv::Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn ingest_usda(mut ctx: Ctx, a: &crate::IngestArgs) -> Result<()> {
    let paths = ctx.file.paths.clone();
    let schema_path = ctx.optional(a.schema.as_ref(), paths.schema.as_ref(), "schema")?;
    let schema = match &schema_path {
        Some(p) => IngestSchema::load(p)?,
        None => IngestSchema::default(),
    };
    let sources = [
        (
            Source::Foundation,
            a.foundation.as_ref(),
            paths.foundation.as_ref(),
        ),
        (Source::Survey, a.survey.as_ref(), paths.survey.as_ref()),
        (
            Source::SrLegacy,
            a.sr_legacy.as_ref(),
            paths.sr_legacy.as_ref(),
        ),
    ];
    let mut dirs = Vec::new();
    for (source, flag, cfg) in sources {
        if let Some(dir) = optional_input(flag, cfg, source.as_str())? {
            for f in ["food.csv", "food_nutrient.csv"] {
                config::check_exists(&dir.join(f), source.as_str())?;
                ctx.inputs.push(dir.join(f));
            }
            dirs.push((source, dir));
        }
    }
    if dirs.is_empty() {
        bail!("no USDA export given; pass --foundation, --survey and/or --sr-legacy");
    }

    let mut entries = Vec::new();
    let mut per_source = BTreeMap::new();
    let mut warnings = 0usize;
    for (source, dir) in &dirs {
        let export = parse_usda_dir(dir, *source, &schema)
            .with_context(|| format!("reading {} export {}", source, dir.display()))?;
        for w in export.warnings.iter().take(20) {
            log::warn!("{}:{}: {}", w.file, w.line, w.message);
        }
        if export.warnings.len() > 20 {
            log::warn!(
                "{} more warnings in {}",
                export.warnings.len() - 20,
                dir.display()
            );
        }
        warnings += export.warnings.len();
        per_source.insert(source.as_str(), export.entries.len());
        entries.extend(export.entries);
    }
    let (db, stats) = build_food_db_with_stats(&entries)?;
    log::info!(
        "food database: {} records from {} entries",
        db.len(),
        entries.len()
    );

    let mut out = ctx.out_dir()?;
    let mut tsv = Vec::new();
    db.write_tsv(&mut tsv)?;
    out.write("food_db.tsv", &tsv)?;
    let names: String = db
        .records()
        .iter()
        .map(|r| format!("{}\t{}\n", r.id, r.name))
        .collect();
    out.write("food_names.tsv", names.as_bytes())?;
    let kept: BTreeMap<&str, usize> = db
        .counts_by_source()
        .into_iter()
        .map(|(s, c)| (s.as_str(), c))
        .collect();
    out.write_json(
        "ingest_report.json",
        &json!({
            "entries_by_source": per_source,
            "warnings": warnings,
            "build": stats,
            "records": db.len(),
            "records_by_source": kept,
        }),
    )?;
    let run_config = json!({
        "schema_version": schema.version,
        "schema": schema_path,
        "exports": dirs.iter().map(|(s, d)| (s.as_str(), d.clone())).collect::<BTreeMap<_, _>>(),
    });
    ctx.finish(out, "ingest-usda", run_config)
}

fn provider_tag(p: &config::ProviderSection) -> String {
    std::iter::once(p.program.as_str())
        .chain(p.args.iter().map(String::as_str))
        .collect::<Vec<_>>()
        .join(" ")
}

fn build_index_cmd(mut ctx: Ctx, a: &crate::BuildIndexArgs) -> Result<()> {
    let paths = ctx.file.paths.clone();
    let db_path = ctx.input(a.db.as_ref(), paths.db.as_ref(), "food database")?;
    let db = FoodDb::load(&db_path)?;
    let emb_path = ctx.optional(
        a.food_embeddings.as_ref(),
        paths.food_embeddings.as_ref(),
        "food embeddings",
    )?;

    let store = match &emb_path {
        Some(p) => {
            let store =
                EmbeddingStore::load(p).with_context(|| format!("reading {}", p.display()))?;
            restrict_to_db(&store, &db)?
        }
        None => {
            let Some(section) = &ctx.file.provider else {
                bail!("no food embeddings given and no [provider] configured");
            };
            let provider = ProcessProvider::new(section.program.clone(), section.args.clone());
            let names: Vec<String> = db.records().iter().map(|r| r.name.clone()).collect();
            let vectors = provider.embed(&names)?;
            let dim = vectors
                .iter()
                .find_map(|v| v.as_ref().ok().map(Vec::len))
                .context("provider returned no vectors")?;
            let mut store = EmbeddingStore::new(dim as u32, provider_tag(section))?;
            for (r, v) in db.records().iter().zip(vectors) {
                store.push(EmbeddingRecord {
                    id: r.id.clone(),
                    vector: v.with_context(|| format!("embedding '{}'", r.name))?,
                })?;
            }
            store
        }
    };
    let index = build_index(&store, &db)?;
    log::info!(
        "index: {} of {} foods, dimension {}",
        index.len(),
        db.len(),
        index.dimension()
    );

    let mut out = ctx.out_dir()?;
    let mut bytes = Vec::new();
    write_store(&store, &mut bytes)?;
    out.write("food_index.nteb", &bytes)?;
    out.write_json(
        "index_report.json",
        &json!({
            "foods": db.len(),
            "indexed": index.len(),
            "dimension": index.dimension(),
            "model_tag": store.model_tag(),
        }),
    )?;
    let run_config = json!({
        "db": db_path,
        "food_embeddings": emb_path,
        "provider": ctx.file.provider,
    });
    ctx.finish(out, "build-index", run_config)
}

/// Keep the records whose id is a food, in id order. Foods without a vector
/// are unreachable, so they are reported.
fn restrict_to_db(store: &EmbeddingStore, db: &FoodDb) -> Result<EmbeddingStore> {
    let mut records: Vec<EmbeddingRecord> = store
        .records()
        .iter()
        .filter(|r| db.contains(&r.id))
        .cloned()
        .collect();
    records.sort_by(|a, b| a.id.cmp(&b.id));
    let extra = store.len() - records.len();
    if extra > 0 {
        log::warn!("{extra} embeddings have no matching food and were dropped");
    }
    let missing = db.len() - records.len();
    if missing > 0 {
        log::warn!("{missing} foods have no embedding and cannot be retrieved");
    }
    if records.is_empty() {
        bail!("no embedding id matches a food id");
    }
    Ok(EmbeddingStore::from_records(
        store.dimension() as u32,
        store.model_tag(),
        records,
    )?)
}

struct Retrieval {
    db: FoodDb,
    index: Index,
    tag: String,
}

impl Retrieval {
    fn estimator(&self) -> Estimator<'_> {
        Estimator::new(&self.index, &self.db)
    }
}

fn load_retrieval(ctx: &mut Ctx, a: &RetrievalArgs) -> Result<Retrieval> {
    let paths = ctx.file.paths.clone();
    let db_path = ctx.input(a.db.as_ref(), paths.db.as_ref(), "food database")?;
    let index_path = ctx.input(a.index.as_ref(), paths.index.as_ref(), "food index")?;
    let db = FoodDb::load(&db_path)?;
    let store = EmbeddingStore::load(&index_path)
        .with_context(|| format!("reading {}", index_path.display()))?;
    let index = build_index(&store, &db)?;
    Ok(Retrieval {
        db,
        index,
        tag: store.model_tag().to_string(),
    })
}

enum Provider {
    Precomputed(PrecomputedEmbeddings),
    Process(ProcessProvider),
}

impl Provider {
    fn as_dyn(&self) -> &dyn EmbeddingProvider {
        match self {
            Provider::Precomputed(p) => p,
            Provider::Process(p) => p,
        }
    }

    /// Normalized titles a precomputed store cannot answer.
    fn missing<'a>(&self, titles: impl IntoIterator<Item = &'a str>) -> Vec<String> {
        let Provider::Precomputed(p) = self else {
            return Vec::new();
        };
        let mut seen = HashSet::new();
        titles
            .into_iter()
            .filter_map(|t| normalize_query_title(t).ok())
            .filter(|t| p.get(t).is_none() && seen.insert(t.clone()))
            .collect()
    }
}

fn load_provider(ctx: &mut Ctx, a: &RetrievalArgs, retrieval: &Retrieval) -> Result<Provider> {
    let paths = ctx.file.paths.clone();
    if let Some(p) = ctx.optional(
        a.query_embeddings.as_ref(),
        paths.query_embeddings.as_ref(),
        "query embeddings",
    )? {
        let store = EmbeddingStore::load(&p).with_context(|| format!("reading {}", p.display()))?;
        if store.dimension() != retrieval.index.dimension() {
            bail!(
                "query embeddings have dimension {}, the index has {}",
                store.dimension(),
                retrieval.index.dimension()
            );
        }
        if store.model_tag() != retrieval.tag {
            log::warn!(
                "query model tag '{}' differs from index model tag '{}'",
                store.model_tag(),
                retrieval.tag
            );
        }
        return Ok(Provider::Precomputed(PrecomputedEmbeddings::new(store)));
    }
    match &ctx.file.provider {
        Some(s) => Ok(Provider::Process(ProcessProvider::new(
            s.program.clone(),
            s.args.clone(),
        ))),
        None => bail!("no query embeddings given and no [provider] configured"),
    }
}

/// List texts that still need embedding, in exporter input format.
fn report_missing(out: &mut OutDir, missing: &[String]) -> Result<()> {
    let mut sorted = missing.to_vec();
    sorted.sort();
    let body: String = sorted.iter().map(|t| format!("{t}\t{t}\n")).collect();
    out.write(MISSING_EMBEDDINGS, body.as_bytes())?;
    log::warn!(
        "{} titles have no precomputed embedding; see {}",
        missing.len(),
        out.dir().join(MISSING_EMBEDDINGS).display()
    );
    Ok(())
}

fn estimate(mut ctx: Ctx, a: &crate::EstimateArgs) -> Result<()> {
    let cfg = ctx.estimator(&a.estimator)?;
    let retrieval = load_retrieval(&mut ctx, &a.retrieval)?;
    let provider = load_provider(&mut ctx, &a.retrieval, &retrieval)?;
    let items = retrieval.estimator().estimate_batch(
        std::slice::from_ref(&a.title),
        provider.as_dyn(),
        &cfg,
    )?;
    write_batch_csv(&items, std::io::stdout().lock())?;
    if let Err(e) = &items[0].result {
        bail!("could not estimate '{}': {e}", a.title);
    }
    Ok(())
}

fn estimate_batch(mut ctx: Ctx, a: &crate::EstimateBatchArgs) -> Result<()> {
    let cfg = ctx.estimator(&a.estimator)?;
    let paths = ctx.file.paths.clone();
    let titles_path = ctx.input(a.titles.as_ref(), paths.titles.as_ref(), "titles")?;
    let retrieval = load_retrieval(&mut ctx, &a.retrieval)?;
    let provider = load_provider(&mut ctx, &a.retrieval, &retrieval)?;
    let text = std::fs::read_to_string(&titles_path)
        .with_context(|| format!("reading {}", titles_path.display()))?;
    let titles: Vec<String> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(str::to_string)
        .collect();

    let mut out = ctx.out_dir()?;
    let missing = provider.missing(titles.iter().map(String::as_str));
    if !missing.is_empty() {
        report_missing(&mut out, &missing)?;
    }
    let items = retrieval
        .estimator()
        .estimate_batch(&titles, provider.as_dyn(), &cfg)?;
    let failed = items.iter().filter(|i| i.result.is_err()).count();
    if failed > 0 {
        log::warn!("{failed} of {} titles failed", items.len());
    }
    out.write("estimates.csv", &csv_bytes(|b| write_batch_csv(&items, b))?)?;
    let run_config = json!({ "estimator": cfg, "titles": titles_path });
    ctx.finish(out, "estimate-batch", run_config)
}

struct Split {
    train: Vec<LabeledRecipe>,
    test: Vec<LabeledRecipe>,
    fraction: f64,
    labeled: PathBuf,
}

fn load_split(ctx: &mut Ctx, a: &SplitArgs) -> Result<Split> {
    let paths = ctx.file.paths.clone();
    let labeled = ctx.input(
        a.labeled.as_ref(),
        paths.labeled.as_ref(),
        "labeled dataset",
    )?;
    let fraction = config::train_fraction(a.train_fraction, &ctx.file);
    let file = std::fs::File::open(&labeled)?;
    let recipes = read_labeled_csv(std::io::BufReader::new(file))
        .with_context(|| format!("reading {}", labeled.display()))?;
    let (train, test) = split_dataset(&recipes, fraction, ctx.seed)?;
    log::info!(
        "split {} recipes into {} train / {} test",
        recipes.len(),
        train.len(),
        test.len()
    );
    Ok(Split {
        train,
        test,
        fraction,
        labeled,
    })
}

fn titles(recipes: &[LabeledRecipe]) -> Vec<&str> {
    recipes.iter().map(|r| r.title.as_str()).collect()
}

#[derive(Serialize, Deserialize)]
struct BestConfig {
    n: usize,
    t: f64,
    m: nutrient_estimate::Aggregation,
}

fn tune(mut ctx: Ctx, a: &crate::TuneArgs) -> Result<()> {
    let split = load_split(&mut ctx, &a.split)?;
    let grid = config::grid(&ctx.file);
    let retrieval = load_retrieval(&mut ctx, &a.retrieval)?;
    let provider = load_provider(&mut ctx, &a.retrieval, &retrieval)?;
    let (mean, std) = dataset_stats(&split.train)?;
    log::info!("train calories: mean {mean:.2}, std {std:.2}");

    let mut out = ctx.out_dir()?;
    let missing = provider.missing(titles(&split.train));
    if !missing.is_empty() {
        report_missing(&mut out, &missing)?;
        bail!("{} training titles have no embedding", missing.len());
    }
    let ctx_eval = EvalContext::prepare(
        retrieval.estimator(),
        provider.as_dyn(),
        &titles(&split.train),
        grid.max_n(),
    )?;
    let report = grid_search(&split.train, &grid, &ctx_eval)?;
    if !report.uncovered.is_empty() {
        log::warn!(
            "{} configs estimated no title at all",
            report.uncovered.len()
        );
    }
    let best = report.best().context("no config produced any estimate")?;
    log::info!(
        "best: n={} t={} m={} train RMSE {:.2} (coverage {:.3})",
        best.config.n,
        best.config.t,
        best.config.m,
        best.train_rmse,
        best.coverage
    );

    out.write(
        "tuning_report.csv",
        &csv_bytes(|b| write_tuning_report(&report, b))?,
    )?;
    let mut split_csv = csv::Writer::from_writer(Vec::new());
    split_csv.write_record(["title", "calories_per_100g", "split"])?;
    for (part, rows) in [("train", &split.train), ("test", &split.test)] {
        for r in rows.iter() {
            split_csv.write_record([r.title.as_str(), &r.true_calories.to_string(), part])?;
        }
    }
    out.write("split.csv", &split_csv.into_inner()?)?;
    out.write_json(
        "best_config.json",
        &json!({
            "n": best.config.n,
            "t": best.config.t,
            "m": best.config.m,
            "train_rmse": best.train_rmse,
            "coverage": best.coverage,
            "train_size": split.train.len(),
            "test_size": split.test.len(),
            "train_mean": mean,
            "train_std": std,
        }),
    )?;
    let run_config = json!({
        "labeled": split.labeled,
        "seed": ctx.seed,
        "train_fraction": split.fraction,
        "grid": grid,
    });
    ctx.finish(out, "tune", run_config)
}

fn evaluate_cmd(mut ctx: Ctx, a: &crate::EvaluateArgs) -> Result<()> {
    let best_path = ctx.optional(a.best.as_ref(), None, "best config")?;
    let base = match &best_path {
        Some(p) => {
            let b: BestConfig = serde_json::from_slice(&std::fs::read(p)?)
                .with_context(|| format!("parsing {}", p.display()))?;
            config::EstimatorSection {
                n: Some(b.n),
                t: Some(b.t),
                m: Some(b.m),
            }
        }
        None => ctx.file.estimator.clone(),
    };
    let cfg = config::estimator_config(a.estimator.n, a.estimator.t, a.estimator.m, &base)?;
    let split = load_split(&mut ctx, &a.split)?;
    let retrieval = load_retrieval(&mut ctx, &a.retrieval)?;
    let provider = load_provider(&mut ctx, &a.retrieval, &retrieval)?;

    let mut out = ctx.out_dir()?;
    let all: Vec<&str> = titles(&split.train)
        .into_iter()
        .chain(titles(&split.test))
        .collect();
    let missing = provider.missing(all.iter().copied());
    if !missing.is_empty() {
        report_missing(&mut out, &missing)?;
        bail!("{} titles have no embedding", missing.len());
    }
    let ctx_eval = EvalContext::prepare(retrieval.estimator(), provider.as_dyn(), &all, cfg.n)?;
    let (train_mean, train_std) = dataset_stats(&split.train)?;
    let (train_rmse, _) = evaluate(&cfg, &split.train, &ctx_eval)?;
    let (test_rmse, test_coverage) = evaluate(&cfg, &split.test, &ctx_eval)?;
    log::info!("test RMSE {test_rmse:.2} (coverage {test_coverage:.3})");
    let summary = TestSummary {
        config: cfg,
        train_size: split.train.len(),
        test_size: split.test.len(),
        train_mean,
        train_std,
        train_rmse,
        test_rmse,
        test_coverage,
    };
    out.write(
        "test_summary.csv",
        &csv_bytes(|b| write_test_summary(&summary, b))?,
    )?;
    let run_config = json!({
        "labeled": split.labeled,
        "seed": ctx.seed,
        "train_fraction": split.fraction,
        "estimator": cfg,
        "best": best_path,
    });
    ctx.finish(out, "evaluate", run_config)
}

fn baseline_cmd(mut ctx: Ctx, a: &crate::BaselineArgs) -> Result<()> {
    let section = ctx.file.baseline.clone();
    let key = std::env::var(&section.api_key_env).with_context(|| {
        format!(
            "baseline credential: environment variable {} is not set",
            section.api_key_env
        )
    })?;
    let split = load_split(&mut ctx, &a.split)?;
    let mut out = ctx.out_dir()?;
    let client = CachedBaseline::new(
        HttpBaseline::new(&section, key)?,
        out.child("baseline_cache")?,
    )?;
    let report = baseline_eval(&client, &split.test)?;
    log::info!(
        "baseline RMSE {:.2} over {} titles ({} failed)",
        report.rmse,
        report.successes,
        report.failures
    );
    out.write_json("baseline_report.json", &report)?;
    let run_config = json!({
        "labeled": split.labeled,
        "seed": ctx.seed,
        "train_fraction": split.fraction,
        "url": section.url,
        "api_key_env": section.api_key_env,
    });
    ctx.finish(out, "baseline-eval", run_config)
}

fn corpus_filter(mut ctx: Ctx, a: &crate::CorpusFilterArgs) -> Result<()> {
    let mut cfg = ctx.file.corpus.clone();
    if let Some(d) = a.start {
        cfg.start = d;
    }
    if let Some(d) = a.end {
        cfg.end = d;
    }
    if a.subreddit.is_some() {
        cfg.subreddit = a.subreddit.clone();
    }
    if cfg.start > cfg.end {
        bail!("start date {} is after end date {}", cfg.start, cfg.end);
    }
    let dumps = if a.dumps.is_empty() {
        ctx.file.paths.dumps.clone()
    } else {
        a.dumps.clone()
    };
    if dumps.is_empty() {
        bail!("no dump given; pass --dump");
    }
    for d in &dumps {
        config::check_exists(d, "dump")?;
        ctx.inputs.push(d.clone());
    }

    let mut records = Vec::new();
    let mut parse = Vec::new();
    let mut total = ParseStats::default();
    for d in &dumps {
        let parsed = parse_submissions(open_dump(d)?, &cfg)
            .with_context(|| format!("parsing {}", d.display()))?;
        if parsed.stats.malformed > 0 {
            log::warn!(
                "{}: skipped {} malformed lines",
                d.display(),
                parsed.stats.malformed
            );
        }
        total.lines += parsed.stats.lines;
        total.malformed += parsed.stats.malformed;
        total.out_of_range += parsed.stats.out_of_range;
        total.other_subreddit += parsed.stats.other_subreddit;
        parse.push(json!({ "dump": d, "stats": parsed.stats }));
        records.extend(parsed.records);
    }
    let (kept, stats) = filter_submissions(&records, &cfg);
    log::info!("kept {} of {} submissions", stats.kept, stats.input);

    let mut out = ctx.out_dir()?;
    out.write(
        "submissions.csv",
        &csv_bytes(|b| write_submissions(&kept, b))?,
    )?;
    out.write_json(
        "corpus_filter_report.json",
        &json!({ "dumps": parse, "parse": total, "filter": stats }),
    )?;
    let run_config = json!({ "corpus": cfg, "dumps": dumps });
    ctx.finish(out, "corpus-filter", run_config)
}

fn corpus_analyze(mut ctx: Ctx, a: &crate::CorpusAnalyzeArgs) -> Result<()> {
    let paths = ctx.file.paths.clone();
    let subs_path = ctx.input(
        a.submissions.as_ref(),
        paths.submissions.as_ref(),
        "submissions",
    )?;
    let subs = read_submissions(std::fs::File::open(&subs_path)?)
        .with_context(|| format!("reading {}", subs_path.display()))?;
    let activity = weekly_activity(&subs)?;

    let mut out = ctx.out_dir()?;
    out.write(
        "weekly_activity.csv",
        &csv_bytes(|b| write_weekly_activity(&activity, b))?,
    )?;

    let mut run_config = json!({ "submissions": subs_path });
    let existing = ctx.optional(
        a.post_estimates.as_ref(),
        paths.post_estimates.as_ref(),
        "post estimates",
    )?;
    let have_index = a.retrieval.db.is_some() || paths.db.is_some();
    let estimates: Option<HashMap<String, NutrientVector>> = if let Some(p) = &existing {
        run_config["post_estimates"] = json!(p);
        Some(read_post_estimates(std::fs::File::open(p)?)?)
    } else if have_index {
        let cfg = ctx.estimator(&a.estimator)?;
        let retrieval = load_retrieval(&mut ctx, &a.retrieval)?;
        let provider = load_provider(&mut ctx, &a.retrieval, &retrieval)?;
        let missing = provider.missing(subs.iter().map(|s| s.clean_title.as_str()));
        if !missing.is_empty() {
            report_missing(&mut out, &missing)?;
        }
        let posts = estimate_submissions(&retrieval.estimator(), provider.as_dyn(), &cfg, &subs)?;
        out.write(
            "post_estimates.csv",
            &csv_bytes(|b| write_post_estimates(&posts, b))?,
        )?;
        run_config["estimator"] = json!(cfg);
        Some(
            posts
                .into_iter()
                .filter_map(|p| match p.outcome {
                    Ok(Outcome::Estimate(e)) => Some((p.id, e.nutrients)),
                    _ => None,
                })
                .collect(),
        )
    } else {
        log::info!("no food database given; writing weekly activity only");
        None
    };
    if let Some(estimates) = estimates {
        let weekly = weekly_medians(&subs, &estimates);
        out.write(
            "weekly_nutrients.csv",
            &csv_bytes(|b| write_weekly_nutrients(&weekly, b))?,
        )?;
    }
    ctx.finish(out, "corpus-analyze", run_config)
}

fn emit_figures(mut ctx: Ctx, a: &crate::FiguresArgs) -> Result<()> {
    let paths = ctx.file.paths.clone();
    let activity = ctx.input(
        a.weekly_activity.as_ref(),
        paths.weekly_activity.as_ref(),
        "weekly activity",
    )?;
    let nutrients = ctx.optional(
        a.weekly_nutrients.as_ref(),
        paths.weekly_nutrients.as_ref(),
        "weekly nutrients",
    )?;
    let mut out = ctx.out_dir()?;
    for (name, spec) in figures::activity_figures(&read_file(&activity)?)? {
        out.write_json(name, &spec)?;
    }
    if let Some(p) = &nutrients {
        let (name, spec) = figures::nutrient_figure(&read_file(p)?)?;
        out.write_json(name, &spec)?;
    }
    let run_config = json!({ "weekly_activity": activity, "weekly_nutrients": nutrients });
    ctx.finish(out, "emit-figures", run_config)
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}
