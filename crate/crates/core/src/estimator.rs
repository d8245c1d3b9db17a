//! Title → nutrient estimate: normalize, embed, retrieve, aggregate.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::str::FromStr;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::index::{Index, IndexError, NeighborHit};
use crate::nutrients::{median, Nutrient, NutrientVector};
use crate::store::{read_store, EmbeddingStore};
use crate::usda::{normalize_query_title, EmptyQuery, FoodDb};

/// Protocol marker an external provider must put in its NTEB model tag.
pub const PROVIDER_PROTOCOL: &str = "protocol=1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    Mean,
    Median,
    WeightedMean,
}

impl Aggregation {
    pub const ALL: [Aggregation; 3] = [
        Aggregation::Mean,
        Aggregation::Median,
        Aggregation::WeightedMean,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Aggregation::Mean => "mean",
            Aggregation::Median => "median",
            Aggregation::WeightedMean => "weighted_mean",
        }
    }
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Aggregation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "mean" => Ok(Aggregation::Mean),
            "median" => Ok(Aggregation::Median),
            "weighted_mean" | "weightedmean" | "wmean" => Ok(Aggregation::WeightedMean),
            other => Err(format!("unknown aggregation '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub n: usize,
    pub t: f64,
    pub m: Aggregation,
}

impl EstimatorConfig {
    pub fn new(n: usize, t: f64, m: Aggregation) -> Result<Self, EstimateError> {
        let cfg = Self { n, t, m };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), EstimateError> {
        if self.n == 0 {
            return Err(EstimateError::Config("n must be at least 1".into()));
        }
        if !(-1.0..=1.0).contains(&self.t) {
            return Err(EstimateError::Config(format!(
                "threshold {} outside [-1, 1]",
                self.t
            )));
        }
        Ok(())
    }
}

impl Default for EstimatorConfig {
    /// n = 50, t = 0.0, weighted mean.
    fn default() -> Self {
        Self {
            n: 50,
            t: 0.0,
            m: Aggregation::WeightedMean,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NutrientEstimate {
    pub nutrients: NutrientVector,
    pub support: usize,
    pub min_similarity: f64,
    pub max_similarity: f64,
    pub neighbor_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Estimate(NutrientEstimate),
    NoMatch,
}

impl Outcome {
    pub fn estimate(&self) -> Option<&NutrientEstimate> {
        match self {
            Outcome::Estimate(e) => Some(e),
            Outcome::NoMatch => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProviderError {
    #[error("embedding provider unavailable: {0}")]
    Unavailable(String),
    #[error("no embedding for '{0}'")]
    Missing(String),
    #[error("embedding provider protocol violation: {0}")]
    Protocol(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimateError {
    #[error(transparent)]
    Query(#[from] EmptyQuery),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("aggregation: {0}")]
    Aggregation(String),
    #[error("estimator config: {0}")]
    Config(String),
}

/// Source of sentence embeddings for normalized titles.
///
/// The outer `Result` fails the whole call (provider unreachable); the inner
/// one reports per-text failures.
pub trait EmbeddingProvider: Sync {
    fn embed(
        &self,
        texts: &[String],
    ) -> Result<Vec<Result<Vec<f32>, ProviderError>>, ProviderError>;
}

/// Looks texts up in an NTEB store keyed by normalized text.
pub struct PrecomputedEmbeddings {
    store: EmbeddingStore,
    by_id: HashMap<String, usize>,
}

impl PrecomputedEmbeddings {
    pub fn new(store: EmbeddingStore) -> Self {
        let by_id = store
            .records()
            .iter()
            .enumerate()
            .map(|(i, r)| (r.id.clone(), i))
            .collect();
        Self { store, by_id }
    }

    pub fn store(&self) -> &EmbeddingStore {
        &self.store
    }

    pub fn get(&self, text: &str) -> Option<&[f32]> {
        self.by_id
            .get(text)
            .map(|&i| self.store.records()[i].vector.as_slice())
    }
}

impl EmbeddingProvider for PrecomputedEmbeddings {
    fn embed(
        &self,
        texts: &[String],
    ) -> Result<Vec<Result<Vec<f32>, ProviderError>>, ProviderError> {
        Ok(texts
            .iter()
            .map(|t| {
                self.get(t)
                    .map(<[f32]>::to_vec)
                    .ok_or_else(|| ProviderError::Missing(t.clone()))
            })
            .collect())
    }
}

/// External embedding process: texts go to stdin one per line, an NTEB
/// stream comes back on stdout with ids "0", "1", ... by line number.
pub struct ProcessProvider {
    program: String,
    args: Vec<String>,
    lock: Mutex<()>,
}

impl ProcessProvider {
    pub fn new(program: impl Into<String>, args: Vec<String>) -> Self {
        Self {
            program: program.into(),
            args,
            lock: Mutex::new(()),
        }
    }
}

impl EmbeddingProvider for ProcessProvider {
    fn embed(
        &self,
        texts: &[String],
    ) -> Result<Vec<Result<Vec<f32>, ProviderError>>, ProviderError> {
        if let Some(t) = texts.iter().find(|t| t.contains('\n') || t.contains('\r')) {
            return Err(ProviderError::Protocol(format!(
                "text contains a line break: {t:?}"
            )));
        }
        let _guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| ProviderError::Unavailable(format!("{}: {e}", self.program)))?;

        let mut stdin = child.stdin.take().expect("piped stdin");
        let payload: String = texts.iter().map(|t| format!("{t}\n")).collect();
        let writer = std::thread::spawn(move || stdin.write_all(payload.as_bytes()));

        let mut output = Vec::new();
        child
            .stdout
            .take()
            .expect("piped stdout")
            .read_to_end(&mut output)
            .map_err(|e| ProviderError::Unavailable(e.to_string()))?;
        let status = child
            .wait()
            .map_err(|e| ProviderError::Unavailable(e.to_string()))?;
        writer
            .join()
            .map_err(|_| ProviderError::Unavailable("stdin writer panicked".into()))?
            .map_err(|e| ProviderError::Unavailable(format!("writing to provider: {e}")))?;
        if !status.success() {
            return Err(ProviderError::Unavailable(format!(
                "{} exited with {status}",
                self.program
            )));
        }

        let store = read_store(&output[..]).map_err(|e| ProviderError::Protocol(e.to_string()))?;
        if !store
            .model_tag()
            .split(';')
            .any(|part| part.trim() == PROVIDER_PROTOCOL)
        {
            return Err(ProviderError::Protocol(format!(
                "model tag '{}' does not declare {PROVIDER_PROTOCOL}",
                store.model_tag()
            )));
        }
        if store.len() != texts.len() {
            return Err(ProviderError::Protocol(format!(
                "sent {} texts, received {} vectors",
                texts.len(),
                store.len()
            )));
        }
        let mut out: Vec<Option<Vec<f32>>> = vec![None; texts.len()];
        for r in store.records() {
            let slot =
                r.id.parse::<usize>()
                    .ok()
                    .filter(|&i| i < texts.len())
                    .ok_or_else(|| ProviderError::Protocol(format!("unexpected id '{}'", r.id)))?;
            out[slot] = Some(r.vector.clone());
        }
        Ok(out
            .into_iter()
            .enumerate()
            .map(|(i, v)| v.ok_or_else(|| ProviderError::Missing(texts[i].clone())))
            .collect())
    }
}

/// Combine the nutrients of `hits` per field.
///
/// Fields absent from a hit's record are skipped for that field only; a field
/// absent from every hit stays absent. Weighted means use similarities clamped
/// at zero and fall back to the plain mean when every weight is zero.
pub fn aggregate(
    hits: &[NeighborHit],
    db: &FoodDb,
    m: Aggregation,
) -> Result<NutrientVector, EstimateError> {
    if hits.is_empty() {
        return Err(EstimateError::Aggregation("no hits to aggregate".into()));
    }
    let records = hits
        .iter()
        .map(|h| {
            db.get(&h.food_id)
                .map(|r| (r, h.similarity))
                .ok_or_else(|| EstimateError::Aggregation(format!("unknown food '{}'", h.food_id)))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut out = NutrientVector::default();
    for nutrient in Nutrient::ALL {
        let mut pairs: Vec<(f64, f64)> = records
            .iter()
            .filter_map(|(r, sim)| r.nutrients.get(nutrient).map(|v| (v, sim.max(0.0))))
            .collect();
        if pairs.is_empty() {
            continue;
        }
        // Fixed summation order makes the result independent of hit order.
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let lo = pairs[0].0;
        let hi = pairs[pairs.len() - 1].0;
        let mean = || pairs.iter().map(|p| p.0).sum::<f64>() / pairs.len() as f64;
        let value = match m {
            Aggregation::Mean => mean(),
            Aggregation::Median => {
                let values: Vec<f64> = pairs.iter().map(|p| p.0).collect();
                median(&values).expect("nonempty")
            }
            Aggregation::WeightedMean => {
                let total: f64 = pairs.iter().map(|p| p.1).sum();
                if total > 0.0 {
                    pairs.iter().map(|p| p.0 * p.1).sum::<f64>() / total
                } else {
                    mean()
                }
            }
        };
        out.set(nutrient, Some(value.clamp(lo, hi)));
    }
    Ok(out)
}

/// Estimator bound to one food database and its index.
#[derive(Clone, Copy)]
pub struct Estimator<'a> {
    pub index: &'a Index,
    pub db: &'a FoodDb,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchItem {
    pub title: String,
    pub result: Result<Outcome, EstimateError>,
}

impl<'a> Estimator<'a> {
    pub fn new(index: &'a Index, db: &'a FoodDb) -> Self {
        Self { index, db }
    }

    /// Aggregate an already retrieved, best-first hit list.
    pub fn from_hits(
        &self,
        hits: &[NeighborHit],
        m: Aggregation,
    ) -> Result<Outcome, EstimateError> {
        if hits.is_empty() {
            return Ok(Outcome::NoMatch);
        }
        let nutrients = aggregate(hits, self.db, m)?;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for h in hits {
            lo = lo.min(h.similarity);
            hi = hi.max(h.similarity);
        }
        Ok(Outcome::Estimate(NutrientEstimate {
            nutrients,
            support: hits.len(),
            min_similarity: lo,
            max_similarity: hi,
            neighbor_ids: hits.iter().map(|h| h.food_id.clone()).collect(),
        }))
    }

    pub fn estimate_vector(
        &self,
        embedding: &[f32],
        cfg: &EstimatorConfig,
    ) -> Result<Outcome, EstimateError> {
        cfg.validate()?;
        let hits = self.index.query_top_n(embedding, cfg.n, cfg.t)?;
        self.from_hits(&hits, cfg.m)
    }

    pub fn estimate_title(
        &self,
        title: &str,
        provider: &dyn EmbeddingProvider,
        cfg: &EstimatorConfig,
    ) -> Result<Outcome, EstimateError> {
        cfg.validate()?;
        let text = normalize_query_title(title)?;
        let mut embedded = provider.embed(std::slice::from_ref(&text))?;
        let vector = embedded
            .pop()
            .ok_or_else(|| ProviderError::Protocol("provider returned no vectors".into()))??;
        self.estimate_vector(&vector, cfg)
    }

    /// Estimate every title; per-title failures are recorded in place.
    pub fn estimate_batch(
        &self,
        titles: &[String],
        provider: &dyn EmbeddingProvider,
        cfg: &EstimatorConfig,
    ) -> Result<Vec<BatchItem>, EstimateError> {
        cfg.validate()?;
        let normalized: Vec<Result<String, EmptyQuery>> =
            titles.iter().map(|t| normalize_query_title(t)).collect();
        let texts: Vec<String> = normalized.iter().filter_map(|r| r.clone().ok()).collect();
        let mut vectors = provider.embed(&texts)?.into_iter();
        if vectors.len() != texts.len() {
            return Err(ProviderError::Protocol(format!(
                "sent {} texts, received {} results",
                texts.len(),
                vectors.len()
            ))
            .into());
        }
        let prepared: Vec<Result<Vec<f32>, EstimateError>> = normalized
            .into_iter()
            .map(|n| match n {
                Ok(_) => vectors.next().expect("length checked").map_err(Into::into),
                Err(e) => Err(e.into()),
            })
            .collect();

        Ok(titles
            .par_iter()
            .zip(prepared.into_par_iter())
            .map(|(title, vector)| BatchItem {
                title: title.clone(),
                result: vector.and_then(|v| self.estimate_vector(&v, cfg)),
            })
            .collect())
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const BATCH_CSV_HEADER: [&str; 8] = [
    "title",
    "calories",
    "protein",
    "fat",
    "carbohydrates",
    "support",
    "max_similarity",
    "status",
];

/// Write batch results as CSV with a fixed header; status is `ok`,
/// `no_match` or `error`.
pub fn write_batch_csv<W: Write>(items: &[BatchItem], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(BATCH_CSV_HEADER)?;
    for item in items {
        let row: [String; 8] = match &item.result {
            Ok(Outcome::Estimate(e)) => [
                item.title.clone(),
                fmt_opt(e.nutrients.calories),
                fmt_opt(e.nutrients.protein),
                fmt_opt(e.nutrients.fat),
                fmt_opt(e.nutrients.carbohydrates),
                e.support.to_string(),
                e.max_similarity.to_string(),
                "ok".into(),
            ],
            Ok(Outcome::NoMatch) => no_estimate_row(&item.title, "no_match"),
            Err(_) => no_estimate_row(&item.title, "error"),
        };
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn no_estimate_row(title: &str, status: &str) -> [String; 8] {
    [
        title.to_string(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        "0".into(),
        String::new(),
        status.into(),
    ]
}
