//! Run configuration file and flag merging.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use nutrient_estimate::corpus::CorpusConfig;
use nutrient_estimate::tuning::{GridSpec, DEFAULT_SPLIT_SEED, DEFAULT_TRAIN_FRACTION};
use nutrient_estimate::{Aggregation, EstimatorConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub estimator: EstimatorSection,
    pub tuning: TuningSection,
    pub corpus: CorpusConfig,
    pub paths: Paths,
    pub provider: Option<ProviderSection>,
    pub baseline: BaselineSection,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorSection {
    pub n: Option<usize>,
    pub t: Option<f64>,
    pub m: Option<Aggregation>,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuningSection {
    pub train_fraction: Option<f64>,
    pub grid: Option<GridSpec>,
}

/// Input locations; relative paths are resolved against the config file.
#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub foundation: Option<PathBuf>,
    pub survey: Option<PathBuf>,
    pub sr_legacy: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub db: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub food_embeddings: Option<PathBuf>,
    pub query_embeddings: Option<PathBuf>,
    pub labeled: Option<PathBuf>,
    pub titles: Option<PathBuf>,
    pub dumps: Vec<PathBuf>,
    pub submissions: Option<PathBuf>,
    pub post_estimates: Option<PathBuf>,
    pub weekly_activity: Option<PathBuf>,
    pub weekly_nutrients: Option<PathBuf>,
}

/// External embedding command speaking the stdin/NTEB protocol.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderSection {
    pub program: String,
    #[serde(default)]
    pub args: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSection {
    pub url: String,
    pub api_key_env: String,
    pub api_key_header: String,
    pub timeout_secs: u64,
}

impl Default for BaselineSection {
    fn default() -> Self {
        Self {
            url: "https://api.calorieninjas.com/v1/nutrition".into(),
            api_key_env: "CALORIE_API_KEY".into(),
            api_key_header: "X-Api-Key".into(),
            timeout_secs: 30,
        }
    }
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: FileConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.paths.resolve(base);
        if let Some(out) = &cfg.out {
            cfg.out = Some(base.join(out));
        }
        Ok(cfg)
    }
}

impl Paths {
    fn resolve(&mut self, base: &Path) {
        for p in [
            &mut self.foundation,
            &mut self.survey,
            &mut self.sr_legacy,
            &mut self.schema,
            &mut self.db,
            &mut self.index,
            &mut self.food_embeddings,
            &mut self.query_embeddings,
            &mut self.labeled,
            &mut self.titles,
            &mut self.submissions,
            &mut self.post_estimates,
            &mut self.weekly_activity,
            &mut self.weekly_nutrients,
        ]
        .into_iter()
        .flatten()
        {
            *p = base.join(&*p);
        }
        for p in &mut self.dumps {
            *p = base.join(&*p);
        }
    }
}

/// Flag value, else config value; the path must exist.
pub fn input_path(flag: Option<&PathBuf>, config: Option<&PathBuf>, what: &str) -> Result<PathBuf> {
    let Some(path) = flag.or(config) else {
        bail!("no {what} path given (flag or [paths] in the config file)");
    };
    check_exists(path, what)?;
    Ok(path.clone())
}

pub fn optional_input(
    flag: Option<&PathBuf>,
    config: Option<&PathBuf>,
    what: &str,
) -> Result<Option<PathBuf>> {
    match flag.or(config) {
        Some(p) => check_exists(p, what).map(|_| Some(p.clone())),
        None => Ok(None),
    }
}

pub fn check_exists(path: &Path, what: &str) -> Result<()> {
    if !path.exists() {
        bail!("{what} path {} does not exist", path.display());
    }
    Ok(())
}

/// Estimator flags over config over the tuned defaults.
pub fn estimator_config(
    n: Option<usize>,
    t: Option<f64>,
    m: Option<Aggregation>,
    file: &EstimatorSection,
) -> Result<EstimatorConfig> {
    let d = EstimatorConfig::default();
    Ok(EstimatorConfig::new(
        n.or(file.n).unwrap_or(d.n),
        t.or(file.t).unwrap_or(d.t),
        m.or(file.m).unwrap_or(d.m),
    )?)
}

pub fn seed(flag: Option<u64>, file: &FileConfig) -> u64 {
    flag.or(file.seed).unwrap_or(DEFAULT_SPLIT_SEED)
}

pub fn train_fraction(flag: Option<f64>, file: &FileConfig) -> f64 {
    flag.or(file.tuning.train_fraction)
        .unwrap_or(DEFAULT_TRAIN_FRACTION)
}

pub fn grid(file: &FileConfig) -> GridSpec {
    file.tuning.grid.clone().unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_beat_config_beat_defaults() {
        let file = EstimatorSection {
            n: Some(10),
            t: Some(0.5),
            m: None,
        };
        let cfg = estimator_config(Some(3), None, None, &file).unwrap();
        assert_eq!((cfg.n, cfg.t, cfg.m), (3, 0.5, Aggregation::WeightedMean));
        let cfg = estimator_config(None, None, None, &EstimatorSection::default()).unwrap();
        assert_eq!((cfg.n, cfg.t), (50, 0.0));
    }

    #[test]
    fn config_paths_resolve_against_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "seed = 7\n[estimator]\nm = \"median\"\n[paths]\ndb = \"data/food_db.tsv\"\n[corpus]\nsubreddit = \"food\"\n",
        )
        .unwrap();
        let cfg = FileConfig::load(&path).unwrap();
        assert_eq!(cfg.seed, Some(7));
        assert_eq!(cfg.estimator.m, Some(Aggregation::Median));
        assert_eq!(cfg.paths.db.unwrap(), dir.path().join("data/food_db.tsv"));
        assert_eq!(cfg.corpus.subreddit.as_deref(), Some("food"));
        assert_eq!(cfg.corpus.deletion_sentinels.len(), 2);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "[estimator]\nk = 5\n").unwrap();
        assert!(FileConfig::load(&path).is_err());
    }
}
