//! Dense embedding store and its `NTEB` binary serialization.
//!
//! Layout (all integers little-endian, no padding):
//!
//! ```text
//! "NTEB" | version: u32 = 1 | dimension: u32 | count: u64
//! | model_tag: u16 length + UTF-8
//! | count × ( id: u16 length + UTF-8 | dimension × f32 )
//! ```

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"NTEB";
pub const VERSION: u32 = 1;
/// Fixed-size prefix: magic, version, dimension, count.
pub const HEADER_LEN: usize = 20;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("format error: {0}")]
    Format(String),
    #[error("corrupt store at byte offset {offset}: {message}")]
    Corruption { offset: u64, message: String },
    #[error("invalid store: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VectorError {
    #[error("degenerate (all-zero or non-finite) vector")]
    Degenerate,
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub id: String,
    pub vector: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dimension: u32,
    model_tag: String,
    records: Vec<EmbeddingRecord>,
}

impl EmbeddingStore {
    pub fn new(dimension: u32, model_tag: impl Into<String>) -> Result<Self, StoreError> {
        if dimension == 0 {
            return Err(StoreError::Invalid("dimension must be positive".into()));
        }
        let model_tag = model_tag.into();
        if model_tag.len() > u16::MAX as usize {
            return Err(StoreError::Invalid(
                "model tag longer than 65535 bytes".into(),
            ));
        }
        Ok(Self {
            dimension,
            model_tag,
            records: Vec::new(),
        })
    }

    /// Build a store and check every invariant (lengths, finiteness, unique ids).
    pub fn from_records(
        dimension: u32,
        model_tag: impl Into<String>,
        records: Vec<EmbeddingRecord>,
    ) -> Result<Self, StoreError> {
        let mut store = Self::new(dimension, model_tag)?;
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            store.check_record(r)?;
            if !seen.insert(r.id.as_str()) {
                return Err(StoreError::Invalid(format!("duplicate id '{}'", r.id)));
            }
        }
        store.records = records;
        Ok(store)
    }

    fn check_record(&self, r: &EmbeddingRecord) -> Result<(), StoreError> {
        if r.id.len() > u16::MAX as usize {
            return Err(StoreError::Invalid(format!(
                "id too long: {} bytes",
                r.id.len()
            )));
        }
        if r.vector.len() != self.dimension as usize {
            return Err(StoreError::Invalid(format!(
                "record '{}' has {} components, expected {}",
                r.id,
                r.vector.len(),
                self.dimension
            )));
        }
        if r.vector.iter().any(|x| !x.is_finite()) {
            return Err(StoreError::Invalid(format!(
                "record '{}' has a non-finite component",
                r.id
            )));
        }
        Ok(())
    }

    pub fn push(&mut self, record: EmbeddingRecord) -> Result<(), StoreError> {
        self.check_record(&record)?;
        if self.records.iter().any(|r| r.id == record.id) {
            return Err(StoreError::Invalid(format!("duplicate id '{}'", record.id)));
        }
        self.records.push(record);
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension as usize
    }

    pub fn model_tag(&self) -> &str {
        &self.model_tag
    }

    pub fn records(&self) -> &[EmbeddingRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn load(path: &Path) -> Result<Self, StoreError> {
        read_store(BufReader::new(File::open(path)?))
    }

    pub fn save(&self, path: &Path) -> Result<u64, StoreError> {
        let mut out = BufWriter::new(File::create(path)?);
        let n = write_store(self, &mut out)?;
        out.flush()?;
        Ok(n)
    }
}

/// Serialize `store`; returns the number of bytes written.
pub fn write_store<W: Write>(store: &EmbeddingStore, mut out: W) -> Result<u64, StoreError> {
    let mut written = 0u64;
    let mut put = |bytes: &[u8]| -> std::io::Result<()> {
        written += bytes.len() as u64;
        out.write_all(bytes)
    };
    put(MAGIC)?;
    put(&VERSION.to_le_bytes())?;
    put(&store.dimension.to_le_bytes())?;
    put(&(store.records.len() as u64).to_le_bytes())?;
    put(&(store.model_tag.len() as u16).to_le_bytes())?;
    put(store.model_tag.as_bytes())?;
    for r in &store.records {
        put(&(r.id.len() as u16).to_le_bytes())?;
        put(r.id.as_bytes())?;
        for x in &r.vector {
            put(&x.to_le_bytes())?;
        }
    }
    Ok(written)
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], StoreError> {
        if self.data.len() - self.pos < n {
            return Err(StoreError::Corruption {
                offset: self.pos as u64,
                message: format!(
                    "truncated {what}: need {n} bytes, {} remain",
                    self.data.len() - self.pos
                ),
            });
        }
        let slice = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u16(&mut self, what: &str) -> Result<u16, StoreError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32, StoreError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64, StoreError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn string(&mut self, what: &str) -> Result<String, StoreError> {
        let len = self.u16(what)? as usize;
        let start = self.pos;
        let bytes = self.take(len, what)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| StoreError::Corruption {
            offset: start as u64,
            message: format!("{what} is not valid UTF-8"),
        })
    }
}

/// Parse an NTEB stream, validating magic, version, dimension and count.
pub fn read_store<R: Read>(mut input: R) -> Result<EmbeddingStore, StoreError> {
    let mut data = Vec::new();
    input.read_to_end(&mut data)?;
    let mut cur = Cursor {
        data: &data,
        pos: 0,
    };

    if data.len() < MAGIC.len() || &data[..4] != MAGIC {
        return Err(StoreError::Format("bad magic, not an NTEB file".into()));
    }
    cur.pos = 4;
    let version = cur.u32("version")?;
    if version != VERSION {
        return Err(StoreError::Format(format!(
            "unsupported version {version} (expected {VERSION})"
        )));
    }
    let dimension = cur.u32("dimension")?;
    if dimension == 0 {
        return Err(StoreError::Format("dimension is zero".into()));
    }
    let count = cur.u64("record count")?;
    let model_tag = cur.string("model tag")?;

    // Each record needs at least the id length prefix plus the vector.
    let min_record = 2 + 4 * dimension as u64;
    let plausible = ((data.len() - cur.pos) as u64 / min_record).min(count) as usize;
    let mut records = Vec::with_capacity(plausible);
    let mut seen = HashSet::with_capacity(plausible);
    for i in 0..count {
        let record_start = cur.pos;
        let id = cur.string("record id")?;
        let raw = cur.take(4 * dimension as usize, "record vector")?;
        let vector: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(StoreError::Corruption {
                offset: record_start as u64,
                message: format!("record {i} ('{id}') has a non-finite component"),
            });
        }
        if !seen.insert(id.clone()) {
            return Err(StoreError::Corruption {
                offset: record_start as u64,
                message: format!("duplicate id '{id}'"),
            });
        }
        records.push(EmbeddingRecord { id, vector });
    }
    if cur.pos != data.len() {
        return Err(StoreError::Corruption {
            offset: cur.pos as u64,
            message: format!("{} trailing bytes after last record", data.len() - cur.pos),
        });
    }
    Ok(EmbeddingStore {
        dimension,
        model_tag,
        records,
    })
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_f32(v: &[f32]) -> f64 {
    v.iter()
        .map(|&x| (x as f64) * (x as f64))
        .sum::<f64>()
        .sqrt()
}

/// Scale `vector` to unit Euclidean norm (computed in f64).
pub fn unit_normalize(vector: &[f32]) -> Result<Vec<f64>, VectorError> {
    let norm = norm_f32(vector);
    if norm.is_nan() || norm <= 0.0 || !norm.is_finite() {
        return Err(VectorError::Degenerate);
    }
    Ok(vector.iter().map(|&x| x as f64 / norm).collect())
}

/// `dot(a, b) / (|a| |b|)`, clamped to [-1, 1].
pub fn cosine_similarity(a: &[f32], b: &[f32]) -> Result<f64, VectorError> {
    if a.len() != b.len() {
        return Err(VectorError::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let (na, nb) = (norm_f32(a), norm_f32(b));
    if !(na > 0.0 && nb > 0.0) || !(na.is_finite() && nb.is_finite()) {
        return Err(VectorError::Degenerate);
    }
    let dot: f64 = a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}
