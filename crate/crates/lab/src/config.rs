//! Run configuration: TOML file, command-line and environment overrides,
//! validation, and the config hash embedded in every run manifest.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use reclab_core::eval::MetricId;
use reclab_core::online::Segment;
use reclab_core::recommender::GridAxes;
use reclab_core::synth::{BehaviorSpec, CorpusSpec};

use crate::error::{LabError, Result};
use crate::timefmt;

fn default_min_visits() -> usize {
    2
}
fn default_max_visits() -> usize {
    150
}
fn default_true() -> bool {
    true
}
fn default_dims() -> Vec<u32> {
    vec![32, 64, 128]
}
fn default_windows() -> Vec<u32> {
    vec![1, 3, 5]
}
fn default_history_ks() -> Vec<u32> {
    vec![3, 5, 10]
}
fn default_lambda() -> f64 {
    0.8
}
fn default_epochs() -> u32 {
    15
}
fn default_negatives() -> u32 {
    5
}
fn default_initial_lr() -> f64 {
    0.025
}
fn default_min_lr() -> f64 {
    1e-4
}
fn default_noise_exponent() -> f64 {
    0.75
}
fn default_k_eval() -> usize {
    10
}
fn default_mmr_cap() -> usize {
    200
}
fn default_select_metrics() -> Vec<String> {
    ["mae", "auc", "mrr", "ndcg100", "novt10", "novu10", "ild10"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}
fn default_budget() -> usize {
    12
}
fn default_closeness_tol() -> f64 {
    0.02
}
fn default_synth_items() -> u32 {
    120
}
fn default_synth_users() -> u32 {
    600
}
fn default_synth_clusters() -> u32 {
    4
}
fn default_visits_min() -> u32 {
    2
}
fn default_visits_max() -> u32 {
    12
}
fn default_noise() -> f64 {
    0.15
}
fn default_click_rate() -> f64 {
    0.05
}
fn default_purchase_rate() -> f64 {
    0.01
}
fn default_period_days() -> i64 {
    300
}
fn default_synth_start() -> String {
    "2020-01-01T00:00:00Z".to_string()
}
fn default_online_users() -> u32 {
    2000
}
fn default_organic_min() -> u32 {
    2
}
fn default_organic_max() -> u32 {
    5
}
fn default_step_secs() -> i64 {
    600
}
fn default_visit_delay() -> i64 {
    60
}
fn default_online_start() -> String {
    "2021-01-01T00:00:00Z".to_string()
}
fn default_cd_tol() -> f64 {
    1e-6
}
fn default_cd_max_iter() -> usize {
    20_000
}
fn default_lambda_grid() -> usize {
    50
}
fn default_tree_depth() -> usize {
    3
}
fn default_tree_min_leaf() -> usize {
    2
}
fn default_meta_segments() -> Vec<String> {
    vec!["s1_2".into(), "s3_5".into(), "s6_15".into()]
}
fn default_rank_segment() -> String {
    "s1_2".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    pub interactions: PathBuf,
    pub catalog: PathBuf,
    pub schema: PathBuf,
    pub descriptions: PathBuf,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusConfig {
    /// Required: test events start here (ISO-8601).
    pub split_point: String,
    #[serde(default = "default_min_visits")]
    pub min_visits: usize,
    #[serde(default = "default_max_visits")]
    pub max_visits: usize,
    /// Count raw detail views instead of distinct items for the 2..150 rule.
    #[serde(default)]
    pub count_raw_events: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TextConfig {
    /// Extra stop words joined with the built-in list.
    #[serde(default)]
    pub stopwords: Vec<String>,
    #[serde(default = "default_true")]
    pub strip_suffixes: bool,
}

impl Default for TextConfig {
    fn default() -> Self {
        toml::from_str("").expect("defaults")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_dims")]
    pub dims: Vec<u32>,
    #[serde(default = "default_windows")]
    pub windows: Vec<u32>,
    #[serde(default = "default_history_ks")]
    pub history_ks: Vec<u32>,
    #[serde(default = "default_true")]
    pub include_w2v: bool,
    #[serde(default = "default_true")]
    pub include_d2v: bool,
    #[serde(default = "default_true")]
    pub include_cosine: bool,
    #[serde(default = "default_lambda")]
    pub lambda_nov: f64,
    #[serde(default = "default_lambda")]
    pub lambda_div: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        toml::from_str("").expect("defaults")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_epochs")]
    pub epochs: u32,
    #[serde(default = "default_negatives")]
    pub negatives: u32,
    #[serde(default = "default_initial_lr")]
    pub initial_lr: f64,
    #[serde(default = "default_min_lr")]
    pub min_lr: f64,
    #[serde(default = "default_noise_exponent")]
    pub noise_exponent: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        toml::from_str("").expect("defaults")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    /// Slate size used when serving recommendations online.
    #[serde(default = "default_k_eval")]
    pub k_eval: usize,
    /// MMR re-ranks only this many head candidates.
    #[serde(default = "default_mmr_cap")]
    pub mmr_cap: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        toml::from_str("").expect("defaults")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectConfig {
    #[serde(default = "default_select_metrics")]
    pub metrics: Vec<String>,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default = "default_closeness_tol")]
    pub closeness_tol: f64,
    /// Compare the Pareto front on all 18 metrics instead of the reduced 7.
    #[serde(default)]
    pub pareto_all_metrics: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CbConfig {
    /// Per-attribute weight applied to all of an attribute's columns after
    /// binarization/standardization; missing attributes weigh 1.0.
    #[serde(default)]
    pub attribute_weights: std::collections::BTreeMap<String, f64>,
}

impl Default for CbConfig {
    fn default() -> Self {
        toml::from_str("").expect("defaults")
    }
}

impl Default for SelectConfig {
    fn default() -> Self {
        toml::from_str("").expect("defaults")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OnlineConfig {
    /// Attribution horizon in days; 0 means unbounded.
    #[serde(default)]
    pub horizon_days: i64,
    /// Fix each user's segment at their first impression instead of
    /// per impression.
    #[serde(default)]
    pub seniority_per_user: bool,
    /// Verify that impression arms match `uid % n_arms`.
    #[serde(default = "default_true")]
    pub check_bucketing: bool,
}

impl Default for OnlineConfig {
    fn default() -> Self {
        toml::from_str("").expect("defaults")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    /// Generate the corpus files at the configured paths during `ingest`
    /// when they do not exist yet.
    #[serde(default = "default_true")]
    pub enabled: bool,
    #[serde(default = "default_synth_items")]
    pub n_items: u32,
    #[serde(default = "default_synth_users")]
    pub n_users: u32,
    #[serde(default = "default_synth_clusters")]
    pub n_clusters: u32,
    #[serde(default = "default_visits_min")]
    pub visits_min: u32,
    #[serde(default = "default_visits_max")]
    pub visits_max: u32,
    #[serde(default = "default_noise")]
    pub cross_cluster_noise: f64,
    #[serde(default = "default_click_rate")]
    pub click_rate: f64,
    #[serde(default = "default_purchase_rate")]
    pub purchase_rate: f64,
    #[serde(default = "default_period_days")]
    pub period_days: i64,
    #[serde(default = "default_synth_start")]
    pub start: String,
}

impl Default for SynthConfig {
    fn default() -> Self {
        toml::from_str("").expect("defaults")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthOnlineConfig {
    #[serde(default = "default_online_users")]
    pub n_users: u32,
    #[serde(default = "default_organic_min")]
    pub organic_min: u32,
    #[serde(default = "default_organic_max")]
    pub organic_max: u32,
    #[serde(default = "default_true")]
    pub serve_before_first_visit: bool,
    #[serde(default = "default_step_secs")]
    pub step_secs: i64,
    #[serde(default = "default_visit_delay")]
    pub visit_delay_secs: i64,
    #[serde(default = "default_online_start")]
    pub start: String,
}

impl Default for SynthOnlineConfig {
    fn default() -> Self {
        toml::from_str("").expect("defaults")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetaSettings {
    #[serde(default = "default_cd_tol")]
    pub cd_tol: f64,
    #[serde(default = "default_cd_max_iter")]
    pub cd_max_iter: usize,
    #[serde(default = "default_lambda_grid")]
    pub lambda_grid: usize,
    #[serde(default = "default_tree_depth")]
    pub tree_depth: usize,
    #[serde(default = "default_tree_min_leaf")]
    pub tree_min_leaf: usize,
    /// Seniority segments used as meta-regression rows (16+ excluded by
    /// default: no reliable predictor can be learned for it).
    #[serde(default = "default_meta_segments")]
    pub segments: Vec<String>,
    /// Segment used to rank the full grid in predicted_grid CSVs.
    #[serde(default = "default_rank_segment")]
    pub rank_segment: String,
    /// Also fit the OLS and regression-tree baselines under LOOCV.
    #[serde(default = "default_true")]
    pub run_baselines: bool,
}

impl Default for MetaSettings {
    fn default() -> Self {
        toml::from_str("").expect("defaults")
    }
}

/// The full run configuration. `seed` is required: no wall-clock fallback.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; 0 uses all cores.
    #[serde(default)]
    pub jobs: usize,
    #[serde(default)]
    pub strict: bool,
    pub paths: PathsConfig,
    pub corpus: CorpusConfig,
    #[serde(default)]
    pub text: TextConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub cbsim: CbConfig,
    #[serde(default)]
    pub select: SelectConfig,
    #[serde(default)]
    pub online: OnlineConfig,
    #[serde(default)]
    pub synth: SynthConfig,
    #[serde(default)]
    pub synth_online: SynthOnlineConfig,
    #[serde(default)]
    pub meta: MetaSettings,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub strict: Option<bool>,
    /// Comma-separated metric names for pareto/select.
    pub metrics: Option<String>,
    pub tol: Option<f64>,
    pub budget: Option<usize>,
}

impl RunConfig {
    /// Load from TOML, apply CLI then `RECLAB_*` environment overrides
    /// (env wins), validate.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(LabError::io(path))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| LabError::Config(format!("{path:?}: {e}")))?;

        if let Some(out) = &overrides.out {
            cfg.paths.out = out.clone();
        }
        if let Some(seed) = overrides.seed {
            cfg.seed = seed;
        }
        if let Some(jobs) = overrides.jobs {
            cfg.jobs = jobs;
        }
        if let Some(strict) = overrides.strict {
            cfg.strict = strict;
        }
        if let Some(metrics) = &overrides.metrics {
            cfg.select.metrics = metrics.split(',').map(|m| m.trim().to_string()).collect();
        }
        if let Some(tol) = overrides.tol {
            cfg.select.closeness_tol = tol;
        }
        if let Some(budget) = overrides.budget {
            cfg.select.budget = budget;
        }

        let env = |key: &str| std::env::var(key).ok();
        if let Some(v) = env("RECLAB_SEED") {
            cfg.seed = v
                .parse()
                .map_err(|_| LabError::Config(format!("RECLAB_SEED={v:?} is not a u64")))?;
        }
        if let Some(v) = env("RECLAB_OUT") {
            cfg.paths.out = PathBuf::from(v);
        }
        if let Some(v) = env("RECLAB_JOBS") {
            cfg.jobs = v
                .parse()
                .map_err(|_| LabError::Config(format!("RECLAB_JOBS={v:?} is not a usize")))?;
        }
        if let Some(v) = env("RECLAB_STRICT") {
            cfg.strict = matches!(v.as_str(), "1" | "true" | "yes");
        }

        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.split_point()?;
        self.synth_start()?;
        self.online_start()?;
        if self.corpus.min_visits < 1 {
            return Err(LabError::Config("corpus.min_visits must be >= 1".into()));
        }
        if self.corpus.max_visits < self.corpus.min_visits {
            return Err(LabError::Config("corpus.max_visits < corpus.min_visits".into()));
        }
        for lambda in [self.grid.lambda_nov, self.grid.lambda_div] {
            if !(0.0..=1.0).contains(&lambda) {
                return Err(LabError::Config("grid lambdas must be in [0, 1]".into()));
            }
        }
        if self.eval.k_eval == 0 || self.eval.mmr_cap == 0 {
            return Err(LabError::Config("eval.k_eval and eval.mmr_cap must be positive".into()));
        }
        if self.select.budget < 2 {
            return Err(LabError::Config("select.budget must be at least 2".into()));
        }
        self.select_metrics()?;
        self.meta_segments()?;
        self.rank_segment()?;
        if self.synth.visits_max < self.synth.visits_min {
            return Err(LabError::Config("synth.visits_max < synth.visits_min".into()));
        }
        if self.synth_online.organic_max < self.synth_online.organic_min {
            return Err(LabError::Config("synth_online.organic_max < organic_min".into()));
        }
        if self.synth.n_clusters == 0 || self.synth.n_items == 0 {
            return Err(LabError::Config("synth.n_clusters and n_items must be positive".into()));
        }
        Ok(())
    }

    pub fn split_point(&self) -> Result<i64> {
        timefmt::parse_instant(&self.corpus.split_point)
    }

    pub fn synth_start(&self) -> Result<i64> {
        timefmt::parse_instant(&self.synth.start)
    }

    pub fn online_start(&self) -> Result<i64> {
        timefmt::parse_instant(&self.synth_online.start)
    }

    pub fn select_metrics(&self) -> Result<Vec<MetricId>> {
        let mut seen = BTreeSet::new();
        self.select
            .metrics
            .iter()
            .map(|name| {
                let m = MetricId::parse(name)
                    .ok_or_else(|| LabError::Config(format!("unknown metric {name:?}")))?;
                if !seen.insert(m) {
                    return Err(LabError::Config(format!("duplicate metric {name:?}")));
                }
                Ok(m)
            })
            .collect()
    }

    pub fn meta_segments(&self) -> Result<Vec<Segment>> {
        self.meta
            .segments
            .iter()
            .map(|name| {
                Segment::parse(name)
                    .ok_or_else(|| LabError::Config(format!("unknown segment {name:?}")))
            })
            .collect()
    }

    pub fn rank_segment(&self) -> Result<Segment> {
        Segment::parse(&self.meta.rank_segment)
            .ok_or_else(|| LabError::Config(format!("unknown segment {:?}", self.meta.rank_segment)))
    }

    pub fn grid_axes(&self) -> GridAxes {
        GridAxes {
            dims: self.grid.dims.clone(),
            windows: self.grid.windows.clone(),
            history_ks: self.grid.history_ks.clone(),
            include_w2v: self.grid.include_w2v,
            include_d2v: self.grid.include_d2v,
            include_cosine: self.grid.include_cosine,
            lambda_nov: self.grid.lambda_nov,
            lambda_div: self.grid.lambda_div,
        }
    }

    pub fn train_spec(&self, seed: u64) -> reclab_core::embed::TrainSpec {
        reclab_core::embed::TrainSpec {
            epochs: self.train.epochs,
            negatives: self.train.negatives,
            initial_lr: self.train.initial_lr,
            min_lr: self.train.min_lr,
            noise_exponent: self.train.noise_exponent,
            seed,
        }
    }

    pub fn corpus_spec(&self) -> Result<CorpusSpec> {
        Ok(CorpusSpec {
            n_items: self.synth.n_items,
            n_users: self.synth.n_users,
            n_clusters: self.synth.n_clusters,
            visits_per_user: (self.synth.visits_min, self.synth.visits_max),
            cross_cluster_noise: self.synth.cross_cluster_noise,
            click_rate: self.synth.click_rate,
            purchase_rate: self.synth.purchase_rate,
            start_t: self.synth_start()?,
            period_secs: self.synth.period_days * reclab_core::SECS_PER_DAY,
            seed: reclab_core::rng::derive_seed(self.seed, "synth_corpus"),
        })
    }

    pub fn behavior_spec(&self) -> Result<BehaviorSpec> {
        Ok(BehaviorSpec {
            n_users: self.synth_online.n_users,
            organic_visits: (self.synth_online.organic_min, self.synth_online.organic_max),
            slate_k: self.eval.k_eval,
            serve_before_first_visit: self.synth_online.serve_before_first_visit,
            start_t: self.online_start()?,
            step_secs: self.synth_online.step_secs,
            visit_delay_secs: self.synth_online.visit_delay_secs,
            seed: reclab_core::rng::derive_seed(self.seed, "synth_online"),
        })
    }

    pub fn normalizer(&self) -> reclab_core::text::Normalizer {
        let mut n = reclab_core::text::Normalizer {
            strip_suffixes: self.text.strip_suffixes,
            ..Default::default()
        };
        for w in &self.text.stopwords {
            n.stopwords.insert(w.to_lowercase());
        }
        n
    }

    pub fn horizon_secs(&self) -> Option<i64> {
        if self.online.horizon_days <= 0 {
            None
        } else {
            Some(self.online.horizon_days * reclab_core::SECS_PER_DAY)
        }
    }

    pub fn meta_config(&self) -> reclab_core::meta::MetaConfig {
        reclab_core::meta::MetaConfig {
            cd_tol: self.meta.cd_tol,
            cd_max_iter: self.meta.cd_max_iter,
            lambda_grid: self.meta.lambda_grid,
            ols_jitter: 1e-10,
            tree_depth: self.meta.tree_depth,
            tree_min_leaf: self.meta.tree_min_leaf,
        }
    }

    /// FNV-1a hash of the canonical serialized form of the effective
    /// configuration.
    pub fn config_hash(&self) -> String {
        fnv(&toml::to_string(self).expect("config serializes"))
    }

    /// Hash of the configuration slice that determines one stage's
    /// artifacts, chained through the hashes of its upstream stages.
    /// Artifacts carry their producing stage's hash in the run manifest, so
    /// changing an analysis knob (say the selection budget) invalidates the
    /// analysis outputs without touching the expensive grid artifacts.
    pub fn stage_hash(&self, stage: StageId) -> String {
        let own = self.sections_hash(stage.sections());
        let mut acc = format!("{stage:?}:{own}");
        for dep in stage.depends_on() {
            acc.push(':');
            acc.push_str(&self.stage_hash(*dep));
        }
        fnv(&acc)
    }

    fn sections_hash(&self, sections: &[&str]) -> String {
        let value = toml::Value::try_from(self).expect("config serializes");
        let table = value.as_table().expect("config is a table");
        let mut acc = String::new();
        for &key in sections {
            acc.push_str(key);
            acc.push('=');
            match key {
                "inputs" => {
                    // Input file locations, excluding the out dir.
                    for p in [
                        &self.paths.interactions,
                        &self.paths.catalog,
                        &self.paths.schema,
                        &self.paths.descriptions,
                    ] {
                        acc.push_str(&p.display().to_string());
                        acc.push(';');
                    }
                }
                _ => {
                    if let Some(v) = table.get(key) {
                        acc.push_str(&v.to_string());
                    }
                }
            }
            acc.push('\n');
        }
        fnv(&acc)
    }
}

/// The ten pipeline stages and their configuration dependencies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageId {
    Ingest,
    Train,
    EvalOffline,
    Correlate,
    Pareto,
    Select,
    SynthOnline,
    EvalOnline,
    PredictOnline,
    Report,
}

impl StageId {
    pub fn name(self) -> &'static str {
        match self {
            StageId::Ingest => "ingest",
            StageId::Train => "train",
            StageId::EvalOffline => "eval-offline",
            StageId::Correlate => "correlate",
            StageId::Pareto => "pareto",
            StageId::Select => "select",
            StageId::SynthOnline => "synth-online",
            StageId::EvalOnline => "eval-online",
            StageId::PredictOnline => "predict-online",
            StageId::Report => "report",
        }
    }

    /// Top-level config keys whose values shape this stage's artifacts
    /// ("inputs" stands for the input file paths).
    fn sections(self) -> &'static [&'static str] {
        match self {
            StageId::Ingest => &["seed", "inputs", "corpus", "text", "synth"],
            StageId::Train => &["grid", "train", "cbsim"],
            StageId::EvalOffline => &["eval"],
            StageId::Correlate => &[],
            StageId::Pareto | StageId::Select => &["select"],
            StageId::SynthOnline => &["synth_online", "eval"],
            StageId::EvalOnline => &["online"],
            StageId::PredictOnline => &["meta"],
            StageId::Report => &[],
        }
    }

    fn depends_on(self) -> &'static [StageId] {
        match self {
            StageId::Ingest => &[],
            StageId::Train => &[StageId::Ingest],
            StageId::EvalOffline => &[StageId::Train],
            StageId::Correlate => &[StageId::EvalOffline],
            StageId::Pareto | StageId::Select => &[StageId::EvalOffline],
            StageId::SynthOnline => &[StageId::Train, StageId::Select],
            StageId::EvalOnline => &[StageId::SynthOnline],
            StageId::PredictOnline => &[StageId::EvalOffline, StageId::EvalOnline],
            StageId::Report => &[StageId::EvalOffline],
        }
    }
}

fn fnv(text: &str) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    format!("{h:016x}")
}

/// A ready-to-edit configuration with every default spelled out.
pub fn example_config() -> String {
    let cfg = RunConfig {
        seed: 42,
        jobs: 0,
        strict: false,
        paths: PathsConfig {
            interactions: "data/interactions.csv".into(),
            catalog: "data/catalog_attributes.csv".into(),
            schema: "data/schema.json".into(),
            descriptions: "data/descriptions.csv".into(),
            out: "out".into(),
        },
        corpus: CorpusConfig {
            split_point: "2020-09-15T00:00:00Z".into(),
            min_visits: 2,
            max_visits: 150,
            count_raw_events: false,
        },
        text: TextConfig::default(),
        grid: GridConfig::default(),
        train: TrainConfig::default(),
        eval: EvalConfig::default(),
        cbsim: CbConfig::default(),
        select: SelectConfig::default(),
        online: OnlineConfig::default(),
        synth: SynthConfig::default(),
        synth_online: SynthOnlineConfig::default(),
        meta: MetaSettings::default(),
    };
    toml::to_string_pretty(&cfg).expect("serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_toml() -> String {
        r#"
seed = 7

[paths]
interactions = "d/i.csv"
catalog = "d/c.csv"
schema = "d/s.json"
descriptions = "d/d.csv"
out = "out"

[corpus]
split_point = "2020-09-15T00:00:00Z"
"#
        .to_string()
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg: RunConfig = toml::from_str(&minimal_toml()).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.grid.dims, vec![32, 64, 128]);
        assert_eq!(cfg.train.epochs, 15);
        assert_eq!(cfg.select.budget, 12);
        assert_eq!(cfg.select_metrics().unwrap().len(), 7);
        assert_eq!(cfg.meta_segments().unwrap().len(), 3);
        assert_eq!(reclab_core::recommender::enumerate_variants(&cfg.grid_axes()).len(), 800);
    }

    #[test]
    fn missing_seed_is_an_error() {
        let toml_text = minimal_toml().replace("seed = 7", "");
        assert!(toml::from_str::<RunConfig>(&toml_text).is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let toml_text = minimal_toml() + "\n[corpus2]\nx = 1\n";
        assert!(toml::from_str::<RunConfig>(&toml_text).is_err());
    }

    #[test]
    fn config_hash_tracks_content() {
        let a: RunConfig = toml::from_str(&minimal_toml()).unwrap();
        let mut b = a.clone();
        assert_eq!(a.config_hash(), b.config_hash());
        b.seed = 8;
        assert_ne!(a.config_hash(), b.config_hash());
    }

    #[test]
    fn bad_metric_name_is_rejected() {
        let mut cfg: RunConfig = toml::from_str(&minimal_toml()).unwrap();
        cfg.select.metrics = vec!["bogus".into()];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn example_config_parses_back() {
        let text = example_config();
        let cfg: RunConfig = toml::from_str(&text).unwrap();
        cfg.validate().unwrap();
    }

    #[test]
    fn stage_hashes_isolate_analysis_knobs() {
        let a: RunConfig = toml::from_str(&minimal_toml()).unwrap();

        // A selection knob touches only the selection stages.
        let mut b = a.clone();
        b.select.budget = 4;
        assert_eq!(a.stage_hash(StageId::EvalOffline), b.stage_hash(StageId::EvalOffline));
        assert_ne!(a.stage_hash(StageId::Select), b.stage_hash(StageId::Select));
        assert_ne!(a.stage_hash(StageId::SynthOnline), b.stage_hash(StageId::SynthOnline));

        // The seed invalidates the whole chain.
        let mut c = a.clone();
        c.seed = 8;
        for stage in [
            StageId::Ingest,
            StageId::Train,
            StageId::EvalOffline,
            StageId::Select,
            StageId::SynthOnline,
            StageId::EvalOnline,
            StageId::PredictOnline,
        ] {
            assert_ne!(a.stage_hash(stage), c.stage_hash(stage), "{stage:?}");
        }

        // Evaluation settings leave ingest/train untouched.
        let mut d = a.clone();
        d.eval.mmr_cap = 50;
        assert_eq!(a.stage_hash(StageId::Ingest), d.stage_hash(StageId::Ingest));
        assert_eq!(a.stage_hash(StageId::Train), d.stage_hash(StageId::Train));
        assert_ne!(a.stage_hash(StageId::EvalOffline), d.stage_hash(StageId::EvalOffline));

        // The out dir is not part of any hash.
        let mut e = a.clone();
        e.paths.out = "elsewhere".into();
        assert_eq!(a.stage_hash(StageId::EvalOffline), e.stage_hash(StageId::EvalOffline));
        assert_eq!(a.stage_hash(StageId::Report), e.stage_hash(StageId::Report));
    }
}
