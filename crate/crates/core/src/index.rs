//! Exact cosine top-n retrieval over unit-normalized food vectors.

use std::cmp::Ordering;

use rayon::prelude::*;
use thiserror::Error;

use crate::store::{dot, unit_normalize, EmbeddingStore, VectorError};
use crate::usda::FoodDb;

/// Below this many multiply-adds a query is scanned on the calling thread.
const PARALLEL_SCAN_WORK: usize = 1 << 18;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IndexError {
    #[error("embedding id '{0}' is not in the food database")]
    UnknownId(String),
    #[error("embedding '{id}': {source}")]
    BadVector {
        id: String,
        #[source]
        source: VectorError,
    },
    #[error("query: {0}")]
    Query(#[from] VectorError),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("embedding store is empty")]
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborHit {
    pub food_id: String,
    pub similarity: f64,
}

/// Row-major matrix of unit vectors with ids sorted ascending, so row order
/// doubles as the id tie-break order.
#[derive(Debug, Clone, PartialEq)]
pub struct Index {
    dimension: usize,
    rows: Vec<f64>,
    ids: Vec<String>,
}

/// Build an index whose every id must exist in `db`.
pub fn build_index(store: &EmbeddingStore, db: &FoodDb) -> Result<Index, IndexError> {
    if let Some(r) = store.records().iter().find(|r| !db.contains(&r.id)) {
        return Err(IndexError::UnknownId(r.id.clone()));
    }
    Index::from_store(store)
}

fn rank_order(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

impl Index {
    pub fn from_store(store: &EmbeddingStore) -> Result<Self, IndexError> {
        if store.is_empty() {
            return Err(IndexError::Empty);
        }
        let mut order: Vec<usize> = (0..store.len()).collect();
        let records = store.records();
        order.sort_by(|&a, &b| records[a].id.cmp(&records[b].id));

        let dimension = store.dimension();
        let mut rows = Vec::with_capacity(records.len() * dimension);
        let mut ids = Vec::with_capacity(records.len());
        for i in order {
            let r = &records[i];
            let unit = unit_normalize(&r.vector).map_err(|source| IndexError::BadVector {
                id: r.id.clone(),
                source,
            })?;
            rows.extend_from_slice(&unit);
            ids.push(r.id.clone());
        }
        Ok(Self {
            dimension,
            rows,
            ids,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dimension..(i + 1) * self.dimension]
    }

    /// Normalize a raw query vector against this index's dimension.
    pub fn prepare_query(&self, query: &[f32]) -> Result<Vec<f64>, IndexError> {
        if query.len() != self.dimension {
            return Err(VectorError::DimensionMismatch {
                left: query.len(),
                right: self.dimension,
            }
            .into());
        }
        Ok(unit_normalize(query)?)
    }

    fn similarities(&self, unit_query: &[f64]) -> Vec<f64> {
        if self.rows.len() >= PARALLEL_SCAN_WORK {
            self.rows
                .par_chunks(self.dimension)
                .map(|row| dot(row, unit_query).clamp(-1.0, 1.0))
                .collect()
        } else {
            self.rows
                .chunks(self.dimension)
                .map(|row| dot(row, unit_query).clamp(-1.0, 1.0))
                .collect()
        }
    }

    /// Top `n` hits with similarity `>= t`, best first, ties by ascending id.
    pub fn query_top_n(
        &self,
        query: &[f32],
        n: usize,
        t: f64,
    ) -> Result<Vec<NeighborHit>, IndexError> {
        let unit = self.prepare_query(query)?;
        self.query_unit(&unit, n, t)
    }

    /// Same as [`Index::query_top_n`] for an already unit-normalized query.
    pub fn query_unit(
        &self,
        unit_query: &[f64],
        n: usize,
        t: f64,
    ) -> Result<Vec<NeighborHit>, IndexError> {
        if n == 0 {
            return Err(IndexError::Parameter("n must be at least 1".into()));
        }
        if t.is_nan() {
            return Err(IndexError::Parameter("threshold is NaN".into()));
        }
        if unit_query.len() != self.dimension {
            return Err(VectorError::DimensionMismatch {
                left: unit_query.len(),
                right: self.dimension,
            }
            .into());
        }
        let mut candidates: Vec<(usize, f64)> = self
            .similarities(unit_query)
            .into_iter()
            .enumerate()
            .filter(|&(_, s)| s >= t)
            .collect();
        if candidates.len() > n {
            candidates.select_nth_unstable_by(n - 1, rank_order);
            candidates.truncate(n);
        }
        candidates.sort_unstable_by(rank_order);
        Ok(candidates
            .into_iter()
            .map(|(row, similarity)| NeighborHit {
                food_id: self.ids[row].clone(),
                similarity,
            })
            .collect())
    }
}

/// Restrict a best-first hit list to `n` hits with similarity `>= t`.
///
/// For a list produced with a threshold no higher than `t` and a size no
/// smaller than `n`, this equals querying with `(n, t)` directly.
pub fn select_hits(ranked: &[NeighborHit], n: usize, t: f64) -> &[NeighborHit] {
    let above = ranked.partition_point(|h| h.similarity >= t);
    &ranked[..above.min(n)]
}
