//! Reddit food-post corpus: dump parsing, tag extraction, filtering and the
//! weekly activity / nutrient-median series.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use chrono::{DateTime, Datelike, NaiveDate};
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::estimator::{EmbeddingProvider, EstimateError, Estimator, EstimatorConfig, Outcome};
use crate::nutrients::{median, Nutrient, NutrientVector};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error(
        "{malformed} of {lines} lines are malformed, above the {limit} tolerance; wrong file?"
    )]
    TooManyMalformed {
        malformed: usize,
        lines: usize,
        limit: f64,
    },
    #[error("no submissions to aggregate")]
    Empty,
    #[error("submissions file line {line}: {message}")]
    Format { line: u64, message: String },
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Parsing and filtering rules for a submission dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    /// First UTC day kept (inclusive).
    pub start: NaiveDate,
    /// Last UTC day kept (inclusive).
    pub end: NaiveDate,
    /// Author/title values that mark a deleted or removed post.
    pub deletion_sentinels: Vec<String>,
    /// Fields whose truthy value marks a removed post.
    pub removed_flag_fields: Vec<String>,
    pub max_malformed_fraction: f64,
    /// The malformed-fraction check only applies from this many lines on.
    pub malformed_check_min_lines: usize,
    /// Keep only this subreddit (case-insensitive) when set.
    pub subreddit: Option<String>,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            start: NaiveDate::from_ymd_opt(2017, 1, 1).unwrap(),
            end: NaiveDate::from_ymd_opt(2021, 12, 31).unwrap(),
            deletion_sentinels: vec!["[deleted]".into(), "[removed]".into()],
            removed_flag_fields: vec!["removed_by_category".into()],
            max_malformed_fraction: 0.01,
            malformed_check_min_lines: 100,
            subreddit: None,
        }
    }
}

impl CorpusConfig {
    fn in_range(&self, created_utc: i64) -> bool {
        match DateTime::from_timestamp(created_utc, 0) {
            Some(dt) => {
                let day = dt.date_naive();
                day >= self.start && day <= self.end
            }
            None => false,
        }
    }

    fn is_sentinel(&self, value: &str) -> bool {
        self.deletion_sentinels.iter().any(|s| s == value.trim())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawSubmission {
    pub id: String,
    pub author: String,
    pub title: String,
    pub created_utc: i64,
    /// Set when the dump carried an explicit removal marker.
    pub removed: bool,
}

#[derive(Debug, Default, Clone, PartialEq, Eq, Serialize)]
pub struct ParseStats {
    pub lines: usize,
    pub malformed: usize,
    pub out_of_range: usize,
    pub other_subreddit: usize,
}

#[derive(Debug, Default)]
pub struct ParsedDump {
    pub records: Vec<RawSubmission>,
    pub stats: ParseStats,
}

fn truthy(v: &Value) -> bool {
    match v {
        Value::Null => false,
        Value::Bool(b) => *b,
        Value::String(s) => !s.is_empty(),
        Value::Number(n) => n.as_f64().is_some_and(|x| x != 0.0),
        Value::Array(a) => !a.is_empty(),
        Value::Object(o) => !o.is_empty(),
    }
}

fn timestamp(v: &Value) -> Option<i64> {
    match v {
        Value::Number(n) => n
            .as_i64()
            .or_else(|| n.as_f64().filter(|x| x.is_finite()).map(|x| x as i64)),
        Value::String(s) => s.trim().parse::<i64>().ok().or_else(|| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .map(|x| x as i64)
        }),
        _ => None,
    }
}

fn text_field(obj: &serde_json::Map<String, Value>, key: &str) -> Option<String> {
    match obj.get(key)? {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

/// Parse one dump line; `None` for malformed lines.
fn parse_line(line: &str, cfg: &CorpusConfig) -> Option<(RawSubmission, Option<String>)> {
    let value: Value = serde_json::from_str(line).ok()?;
    let obj = value.as_object()?;
    let id = text_field(obj, "id")?;
    let author = text_field(obj, "author")?;
    let title = text_field(obj, "title")?;
    let created_utc = timestamp(obj.get("created_utc")?)?;
    let removed = cfg
        .removed_flag_fields
        .iter()
        .any(|f| obj.get(f).is_some_and(truthy));
    let subreddit = text_field(obj, "subreddit");
    Some((
        RawSubmission {
            id,
            author,
            title,
            created_utc,
            removed,
        },
        subreddit,
    ))
}

/// Tolerant line-delimited JSON parse with the configured date range applied.
///
/// Blank lines are ignored. Malformed lines (bad JSON or missing id, author,
/// title or created_utc) are counted and skipped; once the dump has at least
/// `malformed_check_min_lines` lines, a malformed fraction above
/// `max_malformed_fraction` is a hard error.
pub fn parse_submissions<R: BufRead>(
    input: R,
    cfg: &CorpusConfig,
) -> Result<ParsedDump, CorpusError> {
    let mut out = ParsedDump::default();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.stats.lines += 1;
        let Some((record, subreddit)) = parse_line(&line, cfg) else {
            out.stats.malformed += 1;
            continue;
        };
        if let Some(wanted) = &cfg.subreddit {
            if !subreddit.is_some_and(|s| s.eq_ignore_ascii_case(wanted)) {
                out.stats.other_subreddit += 1;
                continue;
            }
        }
        if !cfg.in_range(record.created_utc) {
            out.stats.out_of_range += 1;
            continue;
        }
        out.records.push(record);
    }
    let s = &out.stats;
    if s.lines >= cfg.malformed_check_min_lines
        && s.malformed as f64 > cfg.max_malformed_fraction * s.lines as f64
    {
        return Err(CorpusError::TooManyMalformed {
            malformed: s.malformed,
            lines: s.lines,
            limit: cfg.max_malformed_fraction,
        });
    }
    Ok(out)
}

/// Open a dump, decompressing `.zst` and `.gz` files by extension.
pub fn open_dump(path: &Path) -> std::io::Result<Box<dyn BufRead>> {
    let file = File::open(path)?;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    Ok(match ext {
        "zst" => {
            let mut decoder = zstd::stream::read::Decoder::new(file)?;
            // Pushshift archives are compressed with a 2 GiB window.
            decoder.window_log_max(31)?;
            Box::new(BufReader::new(decoder))
        }
        "gz" => Box::new(BufReader::new(flate2::read::MultiGzDecoder::new(file))),
        _ => Box::new(BufReader::new(file)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tag {
    Homemade,
    IAte,
    ProChef,
}

impl Tag {
    pub fn as_str(self) -> &'static str {
        match self {
            Tag::Homemade => "homemade",
            Tag::IAte => "i_ate",
            Tag::ProChef => "pro_chef",
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Tag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "homemade" => Ok(Tag::Homemade),
            "i_ate" => Ok(Tag::IAte),
            "pro_chef" => Ok(Tag::ProChef),
            other => Err(format!("unknown tag '{other}'")),
        }
    }
}

fn tag_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)\[\s*(homemade|i\s*ate|pro\s*/\s*chef)\s*\]").expect("valid regex")
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TagMatch {
    Tagged { tag: Tag, clean_title: String },
    Untagged,
}

/// Find the first `[Homemade]`, `[I ate]` or `[Pro/Chef]` tag (any case).
///
/// All tag occurrences are removed from the clean title. A title that is only
/// a tag has nothing left to describe the food and counts as untagged.
pub fn extract_tag(raw_title: &str) -> TagMatch {
    let re = tag_regex();
    let Some(caps) = re.captures(raw_title) else {
        return TagMatch::Untagged;
    };
    let word: String = caps[1]
        .chars()
        .filter(|c| !c.is_whitespace())
        .collect::<String>()
        .to_lowercase();
    let tag = match word.as_str() {
        "homemade" => Tag::Homemade,
        "iate" => Tag::IAte,
        _ => Tag::ProChef,
    };
    let stripped = re.replace_all(raw_title, " ");
    let clean_title = stripped.split_whitespace().collect::<Vec<_>>().join(" ");
    if clean_title.is_empty() {
        TagMatch::Untagged
    } else {
        TagMatch::Tagged { tag, clean_title }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Submission {
    pub id: String,
    pub author: String,
    pub created_utc: i64,
    pub raw_title: String,
    pub tag: Tag,
    pub clean_title: String,
}

impl From<&Submission> for RawSubmission {
    fn from(s: &Submission) -> Self {
        RawSubmission {
            id: s.id.clone(),
            author: s.author.clone(),
            title: s.raw_title.clone(),
            created_utc: s.created_utc,
            removed: false,
        }
    }
}

#[derive(Debug, Default, Clone, PartialEq, Eq, Serialize)]
pub struct FilterStats {
    pub input: usize,
    pub deleted: usize,
    pub untagged: usize,
    pub duplicates: usize,
    pub kept: usize,
}

fn utc_day(created_utc: i64) -> i64 {
    created_utc.div_euclid(86_400)
}

/// Drop deleted and untagged posts, then collapse duplicates on
/// (raw title, UTC day, author) keeping the earliest post. Output is sorted
/// by creation time, then id.
pub fn filter_submissions(
    records: &[RawSubmission],
    cfg: &CorpusConfig,
) -> (Vec<Submission>, FilterStats) {
    let mut stats = FilterStats {
        input: records.len(),
        ..Default::default()
    };
    let mut kept: HashMap<(String, i64, String), Submission> = HashMap::new();
    for r in records {
        if r.removed || cfg.is_sentinel(&r.author) || cfg.is_sentinel(&r.title) {
            stats.deleted += 1;
            continue;
        }
        let TagMatch::Tagged { tag, clean_title } = extract_tag(&r.title) else {
            stats.untagged += 1;
            continue;
        };
        let candidate = Submission {
            id: r.id.clone(),
            author: r.author.clone(),
            created_utc: r.created_utc,
            raw_title: r.title.clone(),
            tag,
            clean_title,
        };
        let key = (r.title.clone(), utc_day(r.created_utc), r.author.clone());
        match kept.get_mut(&key) {
            Some(existing) => {
                stats.duplicates += 1;
                if (candidate.created_utc, &candidate.id) < (existing.created_utc, &existing.id) {
                    *existing = candidate;
                }
            }
            None => {
                kept.insert(key, candidate);
            }
        }
    }
    let mut out: Vec<Submission> = kept.into_values().collect();
    out.sort_by(|a, b| {
        a.created_utc
            .cmp(&b.created_utc)
            .then_with(|| a.id.cmp(&b.id))
    });
    stats.kept = out.len();
    (out, stats)
}

/// ISO-8601 week, e.g. `2020-W53`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IsoWeek {
    pub year: i32,
    pub week: u32,
}

impl IsoWeek {
    pub fn of_timestamp(created_utc: i64) -> Option<Self> {
        let w = DateTime::from_timestamp(created_utc, 0)?.iso_week();
        Some(Self {
            year: w.year(),
            week: w.week(),
        })
    }
}

impl Serialize for IsoWeek {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl fmt::Display for IsoWeek {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-W{:02}", self.year, self.week)
    }
}

fn week_of(s: &Submission) -> IsoWeek {
    IsoWeek::of_timestamp(s.created_utc).expect("timestamp validated at parse")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WeeklyActivity {
    pub week: IsoWeek,
    pub posts: usize,
    pub unique_authors: usize,
}

/// Posts and distinct authors per ISO week, weeks ascending.
pub fn weekly_activity(submissions: &[Submission]) -> Result<Vec<WeeklyActivity>, CorpusError> {
    if submissions.is_empty() {
        return Err(CorpusError::Empty);
    }
    let mut weeks: BTreeMap<IsoWeek, (usize, BTreeSet<&str>)> = BTreeMap::new();
    for s in submissions {
        let entry = weeks.entry(week_of(s)).or_default();
        entry.0 += 1;
        entry.1.insert(&s.author);
    }
    Ok(weeks
        .into_iter()
        .map(|(week, (posts, authors))| WeeklyActivity {
            week,
            posts,
            unique_authors: authors.len(),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeeklyNutrients {
    pub week: IsoWeek,
    pub medians: NutrientVector,
    pub covered_posts: usize,
}

/// Per-week medians of each nutrient over posts that have an estimate.
///
/// `estimates` maps submission id to its nutrients; ids without an entry
/// (no match, errors) are not covered. Every week with a post is emitted;
/// weeks without covered posts carry absent medians.
pub fn weekly_medians(
    submissions: &[Submission],
    estimates: &HashMap<String, NutrientVector>,
) -> Vec<WeeklyNutrients> {
    let mut weeks: BTreeMap<IsoWeek, Vec<NutrientVector>> = BTreeMap::new();
    for s in submissions {
        let bucket = weeks.entry(week_of(s)).or_default();
        if let Some(v) = estimates.get(&s.id) {
            bucket.push(*v);
        }
    }
    weeks
        .into_iter()
        .map(|(week, values)| {
            let mut medians = NutrientVector::default();
            for n in Nutrient::ALL {
                let column: Vec<f64> = values.iter().filter_map(|v| v.get(n)).collect();
                medians.set(n, median(&column));
            }
            WeeklyNutrients {
                week,
                medians,
                covered_posts: values.len(),
            }
        })
        .collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_weekly_activity<W: Write>(rows: &[WeeklyActivity], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["week", "posts", "unique_authors"])?;
    for r in rows {
        w.write_record([
            r.week.to_string(),
            r.posts.to_string(),
            r.unique_authors.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_weekly_nutrients<W: Write>(rows: &[WeeklyNutrients], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "week",
        "calories_median",
        "protein_median",
        "fat_median",
        "carbs_median",
        "covered_posts",
    ])?;
    for r in rows {
        w.write_record([
            r.week.to_string(),
            fmt_opt(r.medians.calories),
            fmt_opt(r.medians.protein),
            fmt_opt(r.medians.fat),
            fmt_opt(r.medians.carbohydrates),
            r.covered_posts.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub const SUBMISSIONS_HEADER: [&str; 6] = [
    "id",
    "author",
    "created_utc",
    "tag",
    "clean_title",
    "raw_title",
];

pub fn write_submissions<W: Write>(subs: &[Submission], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUBMISSIONS_HEADER)?;
    for s in subs {
        w.write_record([
            s.id.as_str(),
            s.author.as_str(),
            &s.created_utc.to_string(),
            s.tag.as_str(),
            s.clean_title.as_str(),
            s.raw_title.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_submissions<R: Read>(input: R) -> Result<Vec<Submission>, CorpusError> {
    let mut reader = csv::Reader::from_reader(input);
    if reader.headers()?.iter().collect::<Vec<_>>() != SUBMISSIONS_HEADER {
        return Err(CorpusError::Format {
            line: 1,
            message: format!("expected header {}", SUBMISSIONS_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = i as u64 + 2;
        let err = |message: String| CorpusError::Format { line, message };
        let created_utc = record[2]
            .parse::<i64>()
            .map_err(|_| err(format!("bad created_utc '{}'", &record[2])))?;
        if IsoWeek::of_timestamp(created_utc).is_none() {
            return Err(err(format!("timestamp {created_utc} out of range")));
        }
        out.push(Submission {
            id: record[0].to_string(),
            author: record[1].to_string(),
            created_utc,
            tag: record[3].parse().map_err(err)?,
            clean_title: record[4].to_string(),
            raw_title: record[5].to_string(),
        });
    }
    Ok(out)
}

/// Per-post estimate outcome, keyed by submission id.
#[derive(Debug, Clone, PartialEq)]
pub struct PostEstimate {
    pub id: String,
    pub week: IsoWeek,
    pub outcome: Result<Outcome, EstimateError>,
}

/// Estimate every clean title; order follows `submissions`.
pub fn estimate_submissions(
    estimator: &Estimator<'_>,
    provider: &dyn EmbeddingProvider,
    cfg: &EstimatorConfig,
    submissions: &[Submission],
) -> Result<Vec<PostEstimate>, CorpusError> {
    let titles: Vec<String> = submissions.iter().map(|s| s.clean_title.clone()).collect();
    let items = estimator.estimate_batch(&titles, provider, cfg)?;
    Ok(submissions
        .iter()
        .zip(items)
        .map(|(s, item)| PostEstimate {
            id: s.id.clone(),
            week: week_of(s),
            outcome: item.result,
        })
        .collect())
}

pub const POST_ESTIMATES_HEADER: [&str; 9] = [
    "id",
    "week",
    "calories",
    "protein",
    "fat",
    "carbohydrates",
    "support",
    "max_similarity",
    "status",
];

pub fn write_post_estimates<W: Write>(rows: &[PostEstimate], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(POST_ESTIMATES_HEADER)?;
    for r in rows {
        let (n, support, max_sim, status) = match &r.outcome {
            Ok(Outcome::Estimate(e)) => (
                e.nutrients,
                e.support.to_string(),
                e.max_similarity.to_string(),
                "ok",
            ),
            Ok(Outcome::NoMatch) => (
                NutrientVector::default(),
                "0".into(),
                String::new(),
                "no_match",
            ),
            Err(_) => (
                NutrientVector::default(),
                "0".into(),
                String::new(),
                "error",
            ),
        };
        w.write_record([
            r.id.clone(),
            r.week.to_string(),
            fmt_opt(n.calories),
            fmt_opt(n.protein),
            fmt_opt(n.fat),
            fmt_opt(n.carbohydrates),
            support,
            max_sim,
            status.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Nutrients of every `ok` row of a post-estimates CSV, keyed by id.
pub fn read_post_estimates<R: Read>(
    input: R,
) -> Result<HashMap<String, NutrientVector>, CorpusError> {
    let mut reader = csv::Reader::from_reader(input);
    if reader.headers()?.iter().collect::<Vec<_>>() != POST_ESTIMATES_HEADER {
        return Err(CorpusError::Format {
            line: 1,
            message: format!("expected header {}", POST_ESTIMATES_HEADER.join(",")),
        });
    }
    let mut out = HashMap::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        if &record[8] != "ok" {
            continue;
        }
        let line = i as u64 + 2;
        let mut v = NutrientVector::default();
        for (k, n) in Nutrient::ALL.iter().enumerate() {
            let raw = &record[2 + k];
            if !raw.is_empty() {
                let x = raw.parse::<f64>().map_err(|_| CorpusError::Format {
                    line,
                    message: format!("bad {} value '{raw}'", n.as_str()),
                })?;
                v.set(*n, Some(x));
            }
        }
        out.insert(record[0].to_string(), v);
    }
    Ok(out)
}
