//! Hyperparameter search over (n, t, m) scored by calorie RMSE.

use std::collections::HashMap;
use std::fs;
use std::io::{Read, Write};
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::estimator::{
    Aggregation, EmbeddingProvider, EstimateError, Estimator, EstimatorConfig, ProviderError,
};
use crate::index::{select_hits, NeighborHit};
use crate::usda::normalize_query_title;

pub const DEFAULT_SPLIT_SEED: u64 = 42;
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.8;

#[derive(Debug, Error)]
pub enum TuningError {
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("length mismatch: {predicted} predictions vs {actual} actuals")]
    LengthMismatch { predicted: usize, actual: usize },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("dataset line {line}: {message}")]
    Dataset { line: u64, message: String },
    #[error("title '{title}' could not be embedded: {source}")]
    Embedding {
        title: String,
        #[source]
        source: EstimateError,
    },
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error("no title received an estimate")]
    ZeroCoverage,
    #[error("baseline: {0}")]
    Baseline(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledRecipe {
    pub title: String,
    pub true_calories: f64,
}

/// Read `title,calories_per_100g` CSV.
pub fn read_labeled_csv<R: Read>(input: R) -> Result<Vec<LabeledRecipe>, TuningError> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| TuningError::Dataset {
                line: 1,
                message: format!("missing column '{name}'"),
            })
    };
    let (title_col, kcal_col) = (col("title")?, col("calories_per_100g")?);
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = i as u64 + 2;
        let title = record.get(title_col).unwrap_or("").trim().to_string();
        let raw = record.get(kcal_col).unwrap_or("").trim();
        let kcal: f64 = raw.parse().map_err(|_| TuningError::Dataset {
            line,
            message: format!("bad calories value '{raw}'"),
        })?;
        if title.is_empty() || !kcal.is_finite() || kcal < 0.0 {
            return Err(TuningError::Dataset {
                line,
                message: "empty title or negative/non-finite calories".into(),
            });
        }
        out.push(LabeledRecipe {
            title,
            true_calories: kcal,
        });
    }
    Ok(out)
}

fn train_size(n: usize, fraction: f64) -> usize {
    let exact = fraction * n as f64;
    // 0.8 * 8865 is 7092.000000000001 in binary floating point.
    let rounded = exact.round();
    let k = if (exact - rounded).abs() < 1e-9 {
        rounded
    } else {
        exact.floor()
    };
    (k as usize).min(n)
}

/// Seeded shuffle, then cut after `floor(fraction * N)` records.
pub fn split_dataset(
    recipes: &[LabeledRecipe],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<LabeledRecipe>, Vec<LabeledRecipe>), TuningError> {
    if recipes.is_empty() {
        return Err(TuningError::Empty("recipe list"));
    }
    if !(train_fraction > 0.0 && train_fraction <= 1.0) {
        return Err(TuningError::Parameter(format!(
            "train fraction {train_fraction} outside (0, 1]"
        )));
    }
    let mut order: Vec<usize> = (0..recipes.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = train_size(recipes.len(), train_fraction);
    let pick = |idx: &[usize]| idx.iter().map(|&i| recipes[i].clone()).collect::<Vec<_>>();
    Ok((pick(&order[..cut]), pick(&order[cut..])))
}

pub fn rmse(predicted: &[f64], actual: &[f64]) -> Result<f64, TuningError> {
    if predicted.len() != actual.len() {
        return Err(TuningError::LengthMismatch {
            predicted: predicted.len(),
            actual: actual.len(),
        });
    }
    if predicted.is_empty() {
        return Err(TuningError::Empty("rmse inputs"));
    }
    let sse: f64 = predicted
        .iter()
        .zip(actual)
        .map(|(p, a)| (p - a) * (p - a))
        .sum();
    Ok((sse / predicted.len() as f64).sqrt())
}

/// Mean and population standard deviation of the true calories.
pub fn dataset_stats(recipes: &[LabeledRecipe]) -> Result<(f64, f64), TuningError> {
    if recipes.is_empty() {
        return Err(TuningError::Empty("recipe list"));
    }
    let n = recipes.len() as f64;
    let mean = recipes.iter().map(|r| r.true_calories).sum::<f64>() / n;
    let var = recipes
        .iter()
        .map(|r| (r.true_calories - mean).powi(2))
        .sum::<f64>()
        / n;
    Ok((mean, var.sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: Vec<usize>,
    pub t: Vec<f64>,
    pub m: Vec<Aggregation>,
}

impl GridSpec {
    /// 8 neighbor counts × 4 thresholds × 3 aggregations.
    pub fn standard() -> Self {
        Self {
            n: vec![1, 5, 10, 20, 25, 50, 75, 100],
            t: vec![0.0, 0.5, 0.75, 0.9],
            m: Aggregation::ALL.to_vec(),
        }
    }

    pub fn configs(&self) -> Vec<EstimatorConfig> {
        let mut out = Vec::with_capacity(self.n.len() * self.t.len() * self.m.len());
        for &n in &self.n {
            for &t in &self.t {
                for &m in &self.m {
                    out.push(EstimatorConfig { n, t, m });
                }
            }
        }
        out
    }

    pub fn max_n(&self) -> usize {
        self.n.iter().copied().max().unwrap_or(0)
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self::standard()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuningResult {
    pub config: EstimatorConfig,
    pub train_rmse: f64,
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridReport {
    /// Configs with at least one estimate, best first.
    pub ranked: Vec<TuningResult>,
    /// Configs under which every title was a NoMatch.
    pub uncovered: Vec<EstimatorConfig>,
}

impl GridReport {
    pub fn best(&self) -> Option<&TuningResult> {
        self.ranked.first()
    }

    pub fn evaluated(&self) -> usize {
        self.ranked.len() + self.uncovered.len()
    }
}

/// Retrieval results cached per normalized title, so every config in a grid
/// reuses one embedding and one index scan per title.
pub struct EvalContext<'a> {
    estimator: Estimator<'a>,
    ranked: HashMap<String, Vec<NeighborHit>>,
    depth: usize,
}

impl<'a> EvalContext<'a> {
    /// Embed and retrieve the top `depth` neighbors (no threshold) of every title.
    pub fn prepare(
        estimator: Estimator<'a>,
        provider: &dyn EmbeddingProvider,
        titles: &[&str],
        depth: usize,
    ) -> Result<Self, TuningError> {
        if depth == 0 {
            return Err(TuningError::Parameter(
                "retrieval depth must be positive".into(),
            ));
        }
        let mut texts: Vec<String> = Vec::with_capacity(titles.len());
        for &title in titles {
            let text = normalize_query_title(title).map_err(|e| TuningError::Embedding {
                title: title.to_string(),
                source: e.into(),
            })?;
            texts.push(text);
        }
        texts.sort();
        texts.dedup();
        let vectors = provider.embed(&texts).map_err(EstimateError::from)?;
        if vectors.len() != texts.len() {
            return Err(EstimateError::from(ProviderError::Protocol(format!(
                "provider returned {} vectors for {} texts",
                vectors.len(),
                texts.len()
            )))
            .into());
        }
        let ranked = texts
            .into_par_iter()
            .zip(vectors.into_par_iter())
            .map(|(text, vector)| {
                let hits = vector
                    .map_err(EstimateError::from)
                    .and_then(|v| Ok(estimator.index.query_top_n(&v, depth, -1.0)?))
                    .map_err(|source| TuningError::Embedding {
                        title: text.clone(),
                        source,
                    })?;
                Ok((text, hits))
            })
            .collect::<Result<HashMap<_, _>, TuningError>>()?;
        Ok(Self {
            estimator,
            ranked,
            depth,
        })
    }

    fn hits_for(&self, title: &str) -> Result<&[NeighborHit], TuningError> {
        let text = normalize_query_title(title).map_err(|e| TuningError::Embedding {
            title: title.to_string(),
            source: e.into(),
        })?;
        self.ranked
            .get(&text)
            .map(Vec::as_slice)
            .ok_or_else(|| TuningError::Parameter(format!("title '{title}' was not prepared")))
    }

    /// Calorie predictions for covered recipes as (predicted, actual) pairs,
    /// plus the number of recipes.
    fn predictions(
        &self,
        cfg: &EstimatorConfig,
        recipes: &[LabeledRecipe],
    ) -> Result<Vec<(f64, f64)>, TuningError> {
        cfg.validate()?;
        if cfg.n > self.depth {
            return Err(TuningError::Parameter(format!(
                "n = {} exceeds prepared retrieval depth {}",
                cfg.n, self.depth
            )));
        }
        let mut out = Vec::with_capacity(recipes.len());
        for r in recipes {
            let hits = select_hits(self.hits_for(&r.title)?, cfg.n, cfg.t);
            if let Some(e) = self.estimator.from_hits(hits, cfg.m)?.estimate() {
                let kcal = e
                    .nutrients
                    .calories
                    .expect("food records always carry calories");
                out.push((kcal, r.true_calories));
            }
        }
        Ok(out)
    }

    /// Calorie RMSE over covered recipes and the covered fraction.
    pub fn score(
        &self,
        cfg: &EstimatorConfig,
        recipes: &[LabeledRecipe],
    ) -> Result<Option<(f64, f64)>, TuningError> {
        if recipes.is_empty() {
            return Err(TuningError::Empty("recipe list"));
        }
        let pairs = self.predictions(cfg, recipes)?;
        if pairs.is_empty() {
            return Ok(None);
        }
        let (p, a): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let coverage = p.len() as f64 / recipes.len() as f64;
        Ok(Some((rmse(&p, &a)?, coverage)))
    }
}

fn result_order(a: &TuningResult, b: &TuningResult) -> std::cmp::Ordering {
    a.train_rmse
        .total_cmp(&b.train_rmse)
        .then(a.config.n.cmp(&b.config.n))
        .then(b.config.t.total_cmp(&a.config.t))
        .then(a.config.m.cmp(&b.config.m))
}

/// Score every grid config on `train`, best (lowest RMSE) first.
///
/// Ties prefer smaller n, then larger t, then mean < median < weighted mean.
pub fn grid_search(
    train: &[LabeledRecipe],
    grid: &GridSpec,
    ctx: &EvalContext<'_>,
) -> Result<GridReport, TuningError> {
    let configs = grid.configs();
    if configs.is_empty() {
        return Err(TuningError::Empty("grid"));
    }
    if train.is_empty() {
        return Err(TuningError::Empty("training set"));
    }
    let scored = configs
        .par_iter()
        .map(|cfg| ctx.score(cfg, train).map(|s| (*cfg, s)))
        .collect::<Result<Vec<_>, _>>()?;

    let mut ranked = Vec::new();
    let mut uncovered = Vec::new();
    for (config, score) in scored {
        match score {
            Some((train_rmse, coverage)) => ranked.push(TuningResult {
                config,
                train_rmse,
                coverage,
            }),
            None => uncovered.push(config),
        }
    }
    ranked.sort_by(result_order);
    Ok(GridReport { ranked, uncovered })
}

/// RMSE and coverage of `config` on a held-out set.
pub fn evaluate(
    config: &EstimatorConfig,
    test: &[LabeledRecipe],
    ctx: &EvalContext<'_>,
) -> Result<(f64, f64), TuningError> {
    ctx.score(config, test)?.ok_or(TuningError::ZeroCoverage)
}

/// Header of the per-config tuning report.
pub const REPORT_HEADER: [&str; 5] = ["n", "t", "m", "train_rmse", "coverage"];

/// Ranked configs first, then zero-coverage configs with an empty RMSE.
pub fn write_tuning_report<W: Write>(report: &GridReport, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_HEADER)?;
    for r in &report.ranked {
        w.write_record([
            r.config.n.to_string(),
            r.config.t.to_string(),
            r.config.m.to_string(),
            r.train_rmse.to_string(),
            r.coverage.to_string(),
        ])?;
    }
    for c in &report.uncovered {
        w.write_record([
            c.n.to_string(),
            c.t.to_string(),
            c.m.to_string(),
            String::new(),
            "0".to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestSummary {
    pub config: EstimatorConfig,
    pub train_size: usize,
    pub test_size: usize,
    pub train_mean: f64,
    pub train_std: f64,
    pub train_rmse: f64,
    pub test_rmse: f64,
    pub test_coverage: f64,
}

pub const SUMMARY_HEADER: [&str; 10] = [
    "n",
    "t",
    "m",
    "train_size",
    "test_size",
    "train_mean",
    "train_std",
    "train_rmse",
    "test_rmse",
    "test_coverage",
];

pub fn write_test_summary<W: Write>(s: &TestSummary, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    w.write_record([
        s.config.n.to_string(),
        s.config.t.to_string(),
        s.config.m.to_string(),
        s.train_size.to_string(),
        s.test_size.to_string(),
        s.train_mean.to_string(),
        s.train_std.to_string(),
        s.train_rmse.to_string(),
        s.test_rmse.to_string(),
        s.test_coverage.to_string(),
    ])?;
    w.flush()?;
    Ok(())
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("network: {0}")]
    Network(String),
    #[error("authentication: {0}")]
    Auth(String),
    #[error("bad response: {0}")]
    Response(String),
}

/// Black-box calorie estimator used as a comparison baseline.
pub trait BaselineClient: Sync {
    fn calories_per_100g(&self, title: &str) -> Result<f64, BaselineError>;
}

#[derive(Serialize, Deserialize)]
struct CachedAnswer {
    title: String,
    calories_per_100g: f64,
}

/// Disk cache in front of a baseline client, one JSON file per title keyed
/// by the SHA-256 of the title. Only successful answers are cached.
pub struct CachedBaseline<C> {
    inner: C,
    dir: PathBuf,
}

impl<C: BaselineClient> CachedBaseline<C> {
    pub fn new(inner: C, dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { inner, dir })
    }

    fn path_for(&self, title: &str) -> PathBuf {
        let digest = Sha256::digest(title.as_bytes());
        self.dir.join(format!("{}.json", hex::encode(digest)))
    }
}

impl<C: BaselineClient> BaselineClient for CachedBaseline<C> {
    fn calories_per_100g(&self, title: &str) -> Result<f64, BaselineError> {
        let path = self.path_for(title);
        if let Ok(bytes) = fs::read(&path) {
            if let Ok(answer) = serde_json::from_slice::<CachedAnswer>(&bytes) {
                if answer.title == title {
                    return Ok(answer.calories_per_100g);
                }
            }
        }
        let value = self.inner.calories_per_100g(title)?;
        let answer = CachedAnswer {
            title: title.to_string(),
            calories_per_100g: value,
        };
        let tmp = path.with_extension("json.tmp");
        let written = serde_json::to_vec(&answer)
            .map_err(std::io::Error::from)
            .and_then(|b| fs::write(&tmp, b))
            .and_then(|_| fs::rename(&tmp, &path));
        if let Err(e) = written {
            log::warn!("could not cache baseline answer for '{title}': {e}");
        }
        Ok(value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineReport {
    pub rmse: f64,
    pub successes: usize,
    pub failures: usize,
}

/// Score a baseline client on `test`; failed titles are excluded and counted.
pub fn baseline_eval(
    client: &dyn BaselineClient,
    test: &[LabeledRecipe],
) -> Result<BaselineReport, TuningError> {
    if test.is_empty() {
        return Err(TuningError::Empty("test set"));
    }
    let mut predicted = Vec::with_capacity(test.len());
    let mut actual = Vec::with_capacity(test.len());
    let mut failures = 0;
    for r in test {
        match client.calories_per_100g(&r.title) {
            Ok(v) if v.is_finite() => {
                predicted.push(v);
                actual.push(r.true_calories);
            }
            Ok(v) => {
                failures += 1;
                log::warn!("baseline returned non-finite value {v} for '{}'", r.title);
            }
            Err(e) => {
                failures += 1;
                log::warn!("baseline failed for '{}': {e}", r.title);
            }
        }
    }
    if failures > 0 {
        log::warn!("baseline: {failures} of {} titles failed", test.len());
    }
    if predicted.is_empty() {
        return Err(TuningError::Baseline(
            "no successful baseline answers".into(),
        ));
    }
    Ok(BaselineReport {
        rmse: rmse(&predicted, &actual)?,
        successes: predicted.len(),
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn recipes(values: &[f64]) -> Vec<LabeledRecipe> {
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| LabeledRecipe {
                title: format!("recipe {i}"),
                true_calories: v,
            })
            .collect()
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 3.53553).abs() < 1e-5);
        assert_eq!(rmse(&[10.0], &[5.0]).unwrap(), 5.0);
        assert!(rmse(&[], &[]).is_err());
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn split_sizes() {
        assert_eq!(train_size(8865, 0.8), 7092);
        let data = recipes(&vec![1.0; 8865]);
        let (train, test) = split_dataset(&data, 0.8, DEFAULT_SPLIT_SEED).unwrap();
        assert_eq!((train.len(), test.len()), (7092, 1773));
        let (train, test) = split_dataset(&data[..10], 1.0, 1).unwrap();
        assert_eq!((train.len(), test.len()), (10, 0));
        assert!(split_dataset(&[], 0.8, 1).is_err());
        assert!(split_dataset(&data, 0.0, 1).is_err());
    }

    #[test]
    fn split_is_seeded() {
        let data = recipes(&(0..50).map(f64::from).collect::<Vec<_>>());
        assert_eq!(
            split_dataset(&data, 0.7, 9).unwrap(),
            split_dataset(&data, 0.7, 9).unwrap()
        );
        assert_ne!(
            split_dataset(&data, 0.7, 9).unwrap(),
            split_dataset(&data, 0.7, 10).unwrap()
        );
    }

    #[test]
    fn stats_examples() {
        assert_eq!(
            dataset_stats(&recipes(&[100.0, 100.0])).unwrap(),
            (100.0, 0.0)
        );
        assert_eq!(dataset_stats(&recipes(&[0.0, 10.0])).unwrap(), (5.0, 5.0));
        assert!(dataset_stats(&[]).is_err());
    }

    #[test]
    fn standard_grid_has_96_configs() {
        assert_eq!(GridSpec::standard().configs().len(), 96);
        assert_eq!(GridSpec::standard().max_n(), 100);
    }

    #[test]
    fn labeled_csv_parsing() {
        let text = "title,calories_per_100g\n\"Mac, cheese\",180.5\nsoup,40\n";
        let r = read_labeled_csv(text.as_bytes()).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r[0].title, "Mac, cheese");
        assert!(read_labeled_csv("title,kcal\nx,1\n".as_bytes()).is_err());
        assert!(read_labeled_csv("title,calories_per_100g\nx,abc\n".as_bytes()).is_err());
    }

    struct Echo(HashMap<String, f64>);
    impl BaselineClient for Echo {
        fn calories_per_100g(&self, title: &str) -> Result<f64, BaselineError> {
            self.0
                .get(title)
                .copied()
                .ok_or_else(|| BaselineError::Network("unreachable".into()))
        }
    }

    struct Zero;
    impl BaselineClient for Zero {
        fn calories_per_100g(&self, _: &str) -> Result<f64, BaselineError> {
            Ok(0.0)
        }
    }

    #[test]
    fn baseline_examples() {
        let test = recipes(&[3.0, 4.0]);
        let echo = Echo(
            test.iter()
                .map(|r| (r.title.clone(), r.true_calories))
                .collect(),
        );
        assert_eq!(baseline_eval(&echo, &test).unwrap().rmse, 0.0);
        let r = baseline_eval(&Zero, &test).unwrap();
        assert!((r.rmse - 3.53553).abs() < 1e-5);
        let none = Echo(HashMap::new());
        assert!(baseline_eval(&none, &test).is_err());
    }

    #[test]
    fn baseline_failures_are_counted() {
        let test = recipes(&[3.0, 4.0]);
        let echo = Echo([("recipe 0".to_string(), 3.0)].into_iter().collect());
        let r = baseline_eval(&echo, &test).unwrap();
        assert_eq!((r.successes, r.failures), (1, 1));
    }

    #[test]
    fn cache_does_not_change_rmse() {
        let dir = tempfile::tempdir().unwrap();
        let test = recipes(&[3.0, 4.0, 10.0]);
        let values: HashMap<String, f64> = test
            .iter()
            .map(|r| (r.title.clone(), r.true_calories + 1.5))
            .collect();
        let fresh = baseline_eval(&Echo(values.clone()), &test).unwrap();
        let cached = CachedBaseline::new(Echo(values), dir.path()).unwrap();
        let first = baseline_eval(&cached, &test).unwrap();
        // Second pass is served from disk even though the inner client is gone.
        let offline = CachedBaseline::new(Echo(HashMap::new()), dir.path()).unwrap();
        let second = baseline_eval(&offline, &test).unwrap();
        assert_eq!(fresh, first);
        assert_eq!(first, second);
    }

    proptest! {
        #[test]
        fn rmse_properties(pairs in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..40)) {
            let (p, a): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
            let r = rmse(&p, &a).unwrap();
            prop_assert!(r >= 0.0);
            prop_assert_eq!(rmse(&a, &a).unwrap(), 0.0);
            let mut rev = pairs.clone();
            rev.reverse();
            let (rp, ra): (Vec<f64>, Vec<f64>) = rev.into_iter().unzip();
            prop_assert!((rmse(&rp, &ra).unwrap() - r).abs() <= 1e-9 * (1.0 + r));
            if p != a {
                prop_assert!(r > 0.0);
            }
        }

        #[test]
        fn split_partitions_exactly(n in 1usize..200, frac in 0.01f64..1.0, seed in any::<u64>()) {
            let data = recipes(&(0..n).map(|i| i as f64).collect::<Vec<_>>());
            let (train, test) = split_dataset(&data, frac, seed).unwrap();
            prop_assert_eq!(train.len() + test.len(), n);
            let mut all: Vec<f64> = train.iter().chain(&test).map(|r| r.true_calories).collect();
            all.sort_by(f64::total_cmp);
            prop_assert_eq!(all, (0..n).map(|i| i as f64).collect::<Vec<_>>());
        }
    }
}
