//! USDA FoodData Central ingestion.
//!
//! Reads the `food.csv` / `food_nutrient.csv` pair of each export, turns the
//! comma-structured USDA descriptions into natural phrasing, and builds the
//! deduplicated, cooked-only food database that the index is built over.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nutrients::{Nutrient, NutrientVector, Source};

pub const DEFAULT_SCHEMA_TOML: &str = include_str!("../config/fdc_schema_v1.toml");
pub const SUPPORTED_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{file}: missing header")]
    MissingHeader { file: String },
    #[error("{file}: missing column '{column}'")]
    MissingColumn { file: String, column: String },
    #[error("{file}: {source}")]
    Csv {
        file: String,
        #[source]
        source: csv::Error,
    },
    #[error("ingest schema: {0}")]
    Schema(String),
    #[error("food db line {line}: {message}")]
    DbFormat { line: usize, message: String },
    #[error("food database is empty after filtering")]
    EmptyDb,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Column layout of a FoodData Central CSV export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSchema {
    pub version: u32,
    pub food: FoodColumns,
    pub food_nutrient: FoodNutrientColumns,
    pub nutrients: NutrientIds,
    #[serde(default)]
    pub data_types: DataTypes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoodColumns {
    pub id_column: String,
    pub description_column: String,
    pub data_type_column: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoodNutrientColumns {
    pub food_id_column: String,
    pub nutrient_id_column: String,
    pub amount_column: String,
    pub amount_basis_grams: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NutrientIds {
    pub calories: Vec<String>,
    pub protein: Vec<String>,
    pub fat: Vec<String>,
    pub carbohydrates: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DataTypes {
    #[serde(default)]
    pub foundation: Vec<String>,
    #[serde(default)]
    pub survey: Vec<String>,
    #[serde(default)]
    pub sr_legacy: Vec<String>,
}

impl IngestSchema {
    pub fn from_toml(text: &str) -> Result<Self, IngestError> {
        let schema: IngestSchema =
            toml::from_str(text).map_err(|e| IngestError::Schema(e.to_string()))?;
        if schema.version != SUPPORTED_SCHEMA_VERSION {
            return Err(IngestError::Schema(format!(
                "unsupported schema version {} (expected {SUPPORTED_SCHEMA_VERSION})",
                schema.version
            )));
        }
        let basis = schema.food_nutrient.amount_basis_grams;
        if basis.is_nan() || basis <= 0.0 {
            return Err(IngestError::Schema(
                "amount_basis_grams must be positive".into(),
            ));
        }
        Ok(schema)
    }

    pub fn load(path: &Path) -> Result<Self, IngestError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    fn ids_for(&self, nutrient: Nutrient) -> &[String] {
        match nutrient {
            Nutrient::Calories => &self.nutrients.calories,
            Nutrient::Protein => &self.nutrients.protein,
            Nutrient::Fat => &self.nutrients.fat,
            Nutrient::Carbohydrates => &self.nutrients.carbohydrates,
        }
    }

    fn data_types_for(&self, source: Source) -> &[String] {
        match source {
            Source::Foundation => &self.data_types.foundation,
            Source::Survey => &self.data_types.survey,
            Source::SrLegacy => &self.data_types.sr_legacy,
        }
    }
}

impl Default for IngestSchema {
    fn default() -> Self {
        Self::from_toml(DEFAULT_SCHEMA_TOML).expect("bundled schema is valid")
    }
}

/// One food as it appears in an export, before normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct RawFoodEntry {
    pub source_id: String,
    pub description: String,
    pub source: Source,
    pub nutrients: NutrientVector,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestWarning {
    pub file: String,
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Default)]
pub struct UsdaExport {
    pub entries: Vec<RawFoodEntry>,
    pub warnings: Vec<IngestWarning>,
}

fn csv_reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input)
}

fn column_index(
    headers: &csv::StringRecord,
    file: &str,
    column: &str,
) -> Result<usize, IngestError> {
    headers
        .iter()
        .position(|h| h.trim() == column)
        .ok_or_else(|| IngestError::MissingColumn {
            file: file.to_string(),
            column: column.to_string(),
        })
}

fn read_headers<R: Read>(
    reader: &mut csv::Reader<R>,
    file: &str,
) -> Result<csv::StringRecord, IngestError> {
    let headers = reader.headers().map_err(|source| IngestError::Csv {
        file: file.to_string(),
        source,
    })?;
    if headers.is_empty() || headers.iter().all(|h| h.trim().is_empty()) {
        return Err(IngestError::MissingHeader {
            file: file.to_string(),
        });
    }
    Ok(headers.clone())
}

/// Parse one FoodData Central export.
///
/// `foods` is the `food.csv` stream (id, description, optional data type) and
/// `food_nutrients` the long-format `food_nutrient.csv` stream. Amounts are
/// rescaled to a per-100 g basis. Unparseable or negative amounts become
/// warnings and leave the field absent.
pub fn parse_usda_export<F: Read, N: Read>(
    foods: F,
    food_nutrients: N,
    source: Source,
    schema: &IngestSchema,
) -> Result<UsdaExport, IngestError> {
    const FOOD: &str = "food.csv";
    const FOOD_NUTRIENT: &str = "food_nutrient.csv";

    let mut warnings = Vec::new();

    let mut reader = csv_reader(foods);
    let headers = read_headers(&mut reader, FOOD)?;
    let id_col = column_index(&headers, FOOD, &schema.food.id_column)?;
    let desc_col = column_index(&headers, FOOD, &schema.food.description_column)?;
    let type_col = schema
        .food
        .data_type_column
        .as_deref()
        .and_then(|c| column_index(&headers, FOOD, c).ok());
    let wanted_types = schema.data_types_for(source);

    let mut order: Vec<String> = Vec::new();
    let mut by_id: HashMap<String, RawFoodEntry> = HashMap::new();
    for (i, record) in reader.records().enumerate() {
        let line = i as u64 + 2;
        let record = record.map_err(|source| IngestError::Csv {
            file: FOOD.to_string(),
            source,
        })?;
        if let (Some(col), false) = (type_col, wanted_types.is_empty()) {
            let data_type = record.get(col).unwrap_or("").trim();
            if !wanted_types.iter().any(|t| t == data_type) {
                continue;
            }
        }
        let id = record.get(id_col).unwrap_or("").trim();
        let description = record.get(desc_col).unwrap_or("").trim();
        if id.is_empty() || description.is_empty() {
            warnings.push(IngestWarning {
                file: FOOD.into(),
                line,
                message: "empty food id or description".into(),
            });
            continue;
        }
        if by_id.contains_key(id) {
            warnings.push(IngestWarning {
                file: FOOD.into(),
                line,
                message: format!("duplicate food id {id}"),
            });
            continue;
        }
        order.push(id.to_string());
        by_id.insert(
            id.to_string(),
            RawFoodEntry {
                source_id: id.to_string(),
                description: description.to_string(),
                source,
                nutrients: NutrientVector::default(),
            },
        );
    }

    // nutrient id -> (nutrient, rank within its candidate list)
    let mut nutrient_lookup: HashMap<&str, (Nutrient, usize)> = HashMap::new();
    for n in Nutrient::ALL {
        for (rank, id) in schema.ids_for(n).iter().enumerate() {
            nutrient_lookup.insert(id.as_str(), (n, rank));
        }
    }

    let mut reader = csv_reader(food_nutrients);
    let headers = read_headers(&mut reader, FOOD_NUTRIENT)?;
    let fid_col = column_index(
        &headers,
        FOOD_NUTRIENT,
        &schema.food_nutrient.food_id_column,
    )?;
    let nid_col = column_index(
        &headers,
        FOOD_NUTRIENT,
        &schema.food_nutrient.nutrient_id_column,
    )?;
    let amount_col = column_index(&headers, FOOD_NUTRIENT, &schema.food_nutrient.amount_column)?;
    let scale = 100.0 / schema.food_nutrient.amount_basis_grams;

    // Best (lowest) candidate rank seen so far per (food, nutrient).
    let mut best_rank: HashMap<(String, Nutrient), usize> = HashMap::new();
    for (i, record) in reader.records().enumerate() {
        let line = i as u64 + 2;
        let record = record.map_err(|source| IngestError::Csv {
            file: FOOD_NUTRIENT.to_string(),
            source,
        })?;
        let fid = record.get(fid_col).unwrap_or("").trim();
        let Some(entry) = by_id.get_mut(fid) else {
            continue;
        };
        let nid = record.get(nid_col).unwrap_or("").trim();
        let Some(&(nutrient, rank)) = nutrient_lookup.get(nid) else {
            continue;
        };
        let raw = record.get(amount_col).unwrap_or("").trim();
        let amount = match raw.parse::<f64>() {
            Ok(v) if v.is_finite() && v >= 0.0 => v * scale,
            _ => {
                warnings.push(IngestWarning {
                    file: FOOD_NUTRIENT.into(),
                    line,
                    message: format!("food {fid}: unusable {} amount '{raw}'", nutrient.as_str()),
                });
                continue;
            }
        };
        let key = (fid.to_string(), nutrient);
        match best_rank.get(&key) {
            Some(&seen) if seen <= rank => {}
            _ => {
                best_rank.insert(key, rank);
                entry.nutrients.set(nutrient, Some(amount));
            }
        }
    }

    let entries = order
        .into_iter()
        .filter_map(|id| by_id.remove(&id))
        .collect();
    Ok(UsdaExport { entries, warnings })
}

/// Parse `food.csv` and `food_nutrient.csv` from an export directory.
pub fn parse_usda_dir(
    dir: &Path,
    source: Source,
    schema: &IngestSchema,
) -> Result<UsdaExport, IngestError> {
    let foods = BufReader::new(File::open(dir.join("food.csv"))?);
    let nutrients = BufReader::new(File::open(dir.join("food_nutrient.csv"))?);
    parse_usda_export(foods, nutrients, source, schema)
}

fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Rewrite a USDA description into natural word order.
///
/// Lowercases, splits on commas, reverses the phrase order and joins the
/// phrases with single spaces: `"Mushrooms, portabella, grilled"` becomes
/// `"grilled portabella mushrooms"`. No singularization is applied.
pub fn normalize_usda_name(description: &str) -> String {
    let lower = description.to_lowercase();
    let phrases: Vec<String> = lower
        .split(',')
        .map(collapse_whitespace)
        .filter(|p| !p.is_empty())
        .collect();
    phrases.into_iter().rev().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("query title is empty after normalization")]
pub struct EmptyQuery;

/// Lowercase, delete commas and collapse whitespace. Word order is kept.
pub fn normalize_query_title(title: &str) -> Result<String, EmptyQuery> {
    let cleaned = collapse_whitespace(&title.to_lowercase().replace(',', ""));
    if cleaned.is_empty() {
        Err(EmptyQuery)
    } else {
        Ok(cleaned)
    }
}

fn raw_word_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b(raw|uncooked)\b").expect("valid regex"))
}

/// Whole-word check for "raw" / "uncooked"; "strawberries" does not match.
pub fn is_raw_or_uncooked(name: &str) -> bool {
    raw_word_regex().is_match(name)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoodRecord {
    pub id: String,
    pub name: String,
    pub nutrients: NutrientVector,
    pub source: Source,
}

/// Immutable, id-sorted food database.
#[derive(Debug, Clone, PartialEq)]
pub struct FoodDb {
    records: Vec<FoodRecord>,
    by_id: HashMap<String, usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct BuildStats {
    pub input_entries: usize,
    pub dropped_empty_name: usize,
    pub dropped_raw: usize,
    pub dropped_missing_calories: usize,
    pub dropped_invalid_nutrients: usize,
    pub dropped_duplicates: usize,
}

impl FoodDb {
    /// Validate and index records. Records are re-sorted by id.
    pub fn from_records(mut records: Vec<FoodRecord>) -> Result<Self, IngestError> {
        if records.is_empty() {
            return Err(IngestError::EmptyDb);
        }
        records.sort_by(|a, b| a.id.cmp(&b.id));
        let mut by_id = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            let problem = if r.id.is_empty() {
                Some("empty id".to_string())
            } else if r.nutrients.calories.is_none() {
                Some(format!("'{}' has no calories", r.id))
            } else if !r.nutrients.is_valid() {
                Some(format!("'{}' has negative or non-finite nutrients", r.id))
            } else if is_raw_or_uncooked(&r.name) {
                Some(format!("'{}' is raw or uncooked", r.id))
            } else if r.name.contains(',') || r.name != r.name.to_lowercase() {
                Some(format!("'{}' is not a normalized name", r.id))
            } else if by_id.insert(r.id.clone(), i).is_some() {
                Some(format!("duplicate id '{}'", r.id))
            } else {
                None
            };
            if let Some(message) = problem {
                return Err(IngestError::DbFormat {
                    line: i + 1,
                    message,
                });
            }
        }
        Ok(Self { records, by_id })
    }

    pub fn records(&self) -> &[FoodRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&FoodRecord> {
        self.by_id.get(id).map(|&i| &self.records[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.by_id.contains_key(id)
    }

    pub fn counts_by_source(&self) -> BTreeMap<Source, usize> {
        let mut counts = BTreeMap::new();
        for r in &self.records {
            *counts.entry(r.source).or_insert(0) += 1;
        }
        counts
    }

    /// Canonical TSV: `id name source calories protein fat carbohydrates`,
    /// absent nutrients as empty fields, LF endings, sorted by id.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for r in &self.records {
            write!(out, "{}\t{}\t{}", r.id, r.name, r.source)?;
            for n in Nutrient::ALL {
                match r.nutrients.get(n) {
                    Some(v) => write!(out, "\t{v}")?,
                    None => write!(out, "\t")?,
                }
            }
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_tsv<R: Read>(input: R) -> Result<Self, IngestError> {
        let mut records = Vec::new();
        for (i, line) in BufReader::new(input).lines().enumerate() {
            let line = line?;
            let err = |message: String| IngestError::DbFormat {
                line: i + 1,
                message,
            };
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 7 {
                return Err(err(format!("expected 7 fields, found {}", fields.len())));
            }
            let source: Source = fields[2].parse().map_err(err)?;
            let mut nutrients = NutrientVector::default();
            for (n, raw) in Nutrient::ALL.iter().zip(&fields[3..]) {
                if !raw.is_empty() {
                    let v = raw
                        .parse::<f64>()
                        .map_err(|_| err(format!("bad {} value '{raw}'", n.as_str())))?;
                    nutrients.set(*n, Some(v));
                }
            }
            records.push(FoodRecord {
                id: fields[0].to_string(),
                name: fields[1].to_string(),
                nutrients,
                source,
            });
        }
        Self::from_records(records)
    }

    pub fn load(path: &Path) -> Result<Self, IngestError> {
        Self::read_tsv(File::open(path)?)
    }
}

/// Build the foundational food database.
///
/// Names are normalized, raw/uncooked foods and foods without calories are
/// dropped, and duplicate names collapse to a single record chosen by
/// source priority (Foundation, then Survey, then SR Legacy) and then by the
/// smallest source id.
pub fn build_food_db(entries: &[RawFoodEntry]) -> Result<FoodDb, IngestError> {
    build_food_db_with_stats(entries).map(|(db, _)| db)
}

pub fn build_food_db_with_stats(
    entries: &[RawFoodEntry],
) -> Result<(FoodDb, BuildStats), IngestError> {
    let mut stats = BuildStats {
        input_entries: entries.len(),
        ..Default::default()
    };
    let mut chosen: BTreeMap<String, &RawFoodEntry> = BTreeMap::new();
    for entry in entries {
        let name = normalize_usda_name(&entry.description);
        if name.is_empty() {
            stats.dropped_empty_name += 1;
            continue;
        }
        if is_raw_or_uncooked(&name) {
            stats.dropped_raw += 1;
            continue;
        }
        if entry.nutrients.calories.is_none() {
            stats.dropped_missing_calories += 1;
            continue;
        }
        if !entry.nutrients.is_valid() {
            stats.dropped_invalid_nutrients += 1;
            continue;
        }
        match chosen.get(&name) {
            Some(current) => {
                stats.dropped_duplicates += 1;
                let better = (entry.source.priority(), entry.source_id.as_str())
                    < (current.source.priority(), current.source_id.as_str());
                if better {
                    chosen.insert(name, entry);
                }
            }
            None => {
                chosen.insert(name, entry);
            }
        }
    }
    let records = chosen
        .into_iter()
        .map(|(name, e)| FoodRecord {
            id: name.clone(),
            name,
            nutrients: e.nutrients,
            source: e.source,
        })
        .collect::<Vec<_>>();
    if records.is_empty() {
        return Err(IngestError::EmptyDb);
    }
    Ok((FoodDb::from_records(records)?, stats))
}
