//! The ten pipeline stages behind the CLI subcommands. Every stage loads
//! its inputs from the out directory (verifying provenance through the run
//! manifest), computes via `reclab-core`, and writes its artifacts plus a
//! manifest update.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use reclab_core::cbsim::{vectorize_attributes, SimTable};
use reclab_core::corpus::{
    build_profiles, filter_users, ingest, temporal_split, Catalog, SplitCorpus,
    VisitCount,
};
use reclab_core::embed::{fit_doc_embeddings, fit_session_embeddings, EmbedKind};
use reclab_core::eval::{evaluate_variant, prepare_eval_data, MetricId, OfflineReport};
use reclab_core::grid::{
    correlation_matrix, metric_clusters, pareto_front, representative_metrics, select_candidates,
    CorrMethod,
};
use reclab_core::meta::{
    build_meta_dataset, fit_ols_pipeline, fit_tree, loocv, lasso_cv, poly2_names,
    rank_all_variants, score_predictions, segment_ordinal, MetaDataset,
};
use reclab_core::online::{
    evaluate_online, offline_online_correlation, OnlineAccounting, OnlineRow, Segment,
    SeniorityMode,
};
use reclab_core::recommender::{enumerate_variants, BaseKind, RecContext, VariantConfig};
use reclab_core::rng::derive_seed;
use reclab_core::synth::{gen_catalog, gen_interactions, synth_behavior, PropensityModel, VariantArm};

use crate::config::{RunConfig, StageId};
use crate::error::{LabError, Result};
use crate::formats;
use crate::interner::Interner;
use crate::manifest::RunManifest;
use crate::timefmt;

pub const TRAIN_CSV: &str = "corpus/train.csv";
pub const TEST_CSV: &str = "corpus/test.csv";
pub const CORPUS_SUMMARY: &str = "corpus/summary.json";
pub const MODELS_DIR: &str = "models";
pub const OFFLINE_REPORT: &str = "offline/offline_report.csv";
pub const VARIANTS_DIR: &str = "offline/variants";
pub const CLUSTERS_CSV: &str = "analysis/metric_clusters.csv";
pub const PARETO_CSV: &str = "analysis/pareto.csv";
pub const CANDIDATES_CSV: &str = "analysis/candidates.csv";
pub const IMPRESSIONS_CSV: &str = "online/impressions.csv";
pub const CLICKS_CSV: &str = "online/clicks.csv";
pub const ONLINE_INTERACTIONS_CSV: &str = "online/online_interactions.csv";
pub const ONLINE_REPORT_CSV: &str = "online/online_report.csv";
pub const ONLINE_CORRELATION_CSV: &str = "online/offline_online_correlation.csv";
pub const ONLINE_SUMMARY: &str = "online/online_summary.json";
pub const META_DATASET_CSV: &str = "meta/meta_dataset.csv";
pub const SUMMARY_CSV: &str = "summary.csv";

fn correlations_csv(method: CorrMethod) -> String {
    format!("analysis/correlations_{}.csv", method.name())
}

fn meta_model_json(target: &str) -> String {
    format!("meta/meta_model_{target}.json")
}

fn predicted_grid_csv(target: &str) -> String {
    format!("meta/predicted_grid_{target}.csv")
}

/// One stage's execution summary, printed by the CLI.
#[derive(Debug, Default)]
pub struct StageReport {
    pub lines: Vec<String>,
}

impl StageReport {
    fn note(&mut self, line: impl Into<String>) {
        self.lines.push(line.into());
    }
}

struct Stage<'a> {
    cfg: &'a RunConfig,
    out: PathBuf,
    manifest: RunManifest,
}

impl<'a> Stage<'a> {
    fn open(cfg: &'a RunConfig) -> Result<Stage<'a>> {
        let out = cfg.paths.out.clone();
        let mut manifest = RunManifest::load(&out)?;
        manifest.seed = cfg.seed;
        manifest.tool_version = env!("CARGO_PKG_VERSION").to_string();
        Ok(Stage { cfg, out, manifest })
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.out.join(rel)
    }

    /// Record an artifact under its producing stage's hash.
    fn record(&mut self, rel: &str, producer: StageId) {
        self.manifest
            .record(rel, producer.name(), &self.cfg.stage_hash(producer));
    }

    /// Check that an input artifact exists and was produced under the
    /// current configuration slice of its producing stage.
    fn verify(&self, rel: &str, producer: StageId) -> Result<PathBuf> {
        self.manifest
            .verify(&self.out, rel, &self.cfg.stage_hash(producer), producer.name())
    }

    fn close(self) -> Result<()> {
        self.manifest.save(&self.out)
    }
}

// ---------------------------------------------------------------------------
// Shared loaders
// ---------------------------------------------------------------------------

fn load_catalog(cfg: &RunConfig) -> Result<(Catalog, Interner)> {
    formats::read_catalog(
        &cfg.paths.catalog,
        &cfg.paths.schema,
        &cfg.paths.descriptions,
        &cfg.normalizer(),
    )
}

fn load_split(stage: &Stage<'_>, items: &Interner) -> Result<(SplitCorpus, Interner)> {
    let train_path = stage.verify(TRAIN_CSV, StageId::Ingest)?;
    let test_path = stage.verify(TEST_CSV, StageId::Ingest)?;
    let mut users = Interner::new();
    let train = formats::read_interactions(&train_path, &mut users, items, true)?;
    let test = formats::read_interactions(&test_path, &mut users, items, true)?;
    let (train, _) = ingest(train.events);
    let (test, _) = ingest(test.events);
    let split_point = stage.cfg.split_point()?;
    Ok((
        SplitCorpus {
            train,
            test,
            split_point,
            dropped_test_events: 0,
            dropped_test_users: 0,
        },
        users,
    ))
}

/// All trained base similarity tables plus the content-based table with
/// self-similarity (used by MMR and ILD).
struct LoadedModels {
    sims: BTreeMap<BaseKind, SimTable>,
    cos_true: SimTable,
}

fn load_models(stage: &Stage<'_>, items: &Interner) -> Result<LoadedModels> {
    let models_dir = stage.path(MODELS_DIR);
    let axes = stage.cfg.grid_axes();
    let mut sims = BTreeMap::new();
    let matrix = {
        stage.verify(&format!("{MODELS_DIR}/cb_matrix.csv"), StageId::Train)?;
        formats::read_cb_matrix(&models_dir, items)?
    };
    let cos_true = SimTable::from_attributes(&matrix, true);
    for base in axes.bases() {
        let sim = match base {
            BaseKind::W2v { dim, window } => {
                let rel = format!(
                    "{MODELS_DIR}/{}",
                    formats::model_file_name(EmbedKind::SessionW2v, dim as usize, window as usize)
                );
                stage.verify(&rel, StageId::Train)?;
                let model = formats::read_model(
                    &models_dir,
                    EmbedKind::SessionW2v,
                    dim as usize,
                    window as usize,
                    items,
                )?;
                SimTable::from_embeddings(&model.vectors, &model.cold)
            }
            BaseKind::D2v { dim, window } => {
                let rel = format!(
                    "{MODELS_DIR}/{}",
                    formats::model_file_name(EmbedKind::DocD2v, dim as usize, window as usize)
                );
                stage.verify(&rel, StageId::Train)?;
                let model = formats::read_model(
                    &models_dir,
                    EmbedKind::DocD2v,
                    dim as usize,
                    window as usize,
                    items,
                )?;
                SimTable::from_embeddings(&model.vectors, &model.cold)
            }
            BaseKind::Cosine { allow_self } => SimTable::from_attributes(&matrix, allow_self),
        };
        sims.insert(base, sim);
    }
    Ok(LoadedModels { sims, cos_true })
}

fn load_offline_reports(stage: &Stage<'_>) -> Result<Vec<OfflineReport>> {
    let path = stage.verify(OFFLINE_REPORT, StageId::EvalOffline)?;
    formats::read_offline_reports(&path)
}

fn variant_by_id(cfg: &RunConfig) -> BTreeMap<String, VariantConfig> {
    enumerate_variants(&cfg.grid_axes())
        .into_iter()
        .map(|v| (v.id(), v))
        .collect()
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct CorpusSummary {
    rows_read: usize,
    malformed_dropped: usize,
    unknown_item_rows: usize,
    duplicates_dropped: usize,
    users_total: usize,
    users_kept: usize,
    events_after_filter: usize,
    train_events: usize,
    test_events: usize,
    dropped_test_events: usize,
    dropped_test_users: usize,
    stale_last_update_items: usize,
    split_point: String,
    synthesized: bool,
}

pub fn run_ingest(cfg: &RunConfig) -> Result<StageReport> {
    let mut stage = Stage::open(cfg)?;
    let mut report = StageReport::default();

    let synthesized = cfg.synth.enabled && !cfg.paths.interactions.exists();
    if synthesized {
        write_synth_corpus(cfg)?;
        report.note(format!(
            "synthesized corpus at {} ({} items, {} users)",
            cfg.paths.interactions.display(),
            cfg.synth.n_items,
            cfg.synth.n_users
        ));
    }

    let (catalog, items) = load_catalog(cfg)?;
    let mut users = Interner::new();
    let parsed = formats::read_interactions(&cfg.paths.interactions, &mut users, &items, false)?;
    if cfg.strict && parsed.malformed > 0 {
        return Err(LabError::Strict(format!(
            "{} malformed rows in {}",
            parsed.malformed,
            cfg.paths.interactions.display()
        )));
    }
    let rows_read = parsed.events.len() + parsed.malformed;
    let (log, duplicates) = ingest(parsed.events);
    let users_total = log.distinct_users();

    let mode = if cfg.corpus.count_raw_events {
        VisitCount::RawEvents
    } else {
        VisitCount::DistinctItems
    };
    let filtered = filter_users(&log, cfg.corpus.min_visits, cfg.corpus.max_visits, mode);
    let users_kept = filtered.distinct_users();

    let split_point = cfg.split_point()?;
    let split = temporal_split(&filtered, split_point).map_err(LabError::Core)?;

    // Catalog freshness: last_update beyond the newest interaction is
    // suspicious input.
    let max_t = log.time_range().map(|(_, hi)| hi).unwrap_or(split_point);
    let stale = catalog.last_update.iter().filter(|&&t| t > max_t).count();
    if stale > 0 {
        let msg = format!("{stale} items have last_update after the newest interaction");
        if cfg.strict {
            return Err(LabError::Strict(msg));
        }
        report.note(format!("warning: {msg}"));
    }

    formats::write_interactions(&stage.path(TRAIN_CSV), &split.train.events, &users, &items)?;
    formats::write_interactions(&stage.path(TEST_CSV), &split.test.events, &users, &items)?;

    let summary = CorpusSummary {
        rows_read,
        malformed_dropped: parsed.malformed,
        unknown_item_rows: parsed.unknown_items,
        duplicates_dropped: duplicates,
        users_total,
        users_kept,
        events_after_filter: filtered.len(),
        train_events: split.train.len(),
        test_events: split.test.len(),
        dropped_test_events: split.dropped_test_events,
        dropped_test_users: split.dropped_test_users,
        stale_last_update_items: stale,
        split_point: cfg.corpus.split_point.clone(),
        synthesized,
    };
    let summary_path = stage.path(CORPUS_SUMMARY);
    if let Some(parent) = summary_path.parent() {
        std::fs::create_dir_all(parent).map_err(LabError::io(parent))?;
    }
    let text = serde_json::to_string_pretty(&summary)
        .map_err(|source| LabError::Json { path: summary_path.clone(), source })?;
    std::fs::write(&summary_path, text).map_err(LabError::io(&summary_path))?;

    stage.record(TRAIN_CSV, StageId::Ingest);
    stage.record(TEST_CSV, StageId::Ingest);
    stage.record(CORPUS_SUMMARY, StageId::Ingest);
    stage.close()?;

    report.note(format!(
        "ingested {rows_read} rows: {} malformed, {duplicates} duplicates dropped",
        summary.malformed_dropped
    ));
    report.note(format!(
        "filter kept {users_kept} of {users_total} users ({} events)",
        summary.events_after_filter
    ));
    report.note(format!(
        "split: {} train / {} test events, {} test events of {} historyless users dropped",
        summary.train_events,
        summary.test_events,
        summary.dropped_test_events,
        summary.dropped_test_users
    ));
    Ok(report)
}

/// Write the bundled synthetic corpus at the configured input paths.
fn write_synth_corpus(cfg: &RunConfig) -> Result<()> {
    let spec = cfg.corpus_spec()?;
    let catalog = gen_catalog(&spec);
    let events = gen_interactions(&spec);

    // Item/user ids as plain strings: items in catalog order, numeric users
    // (required for the UID % n bucketing online).
    let mut items = Interner::new();
    for i in 0..catalog.n_items {
        items.intern(&format!("i{i:04}"));
    }
    let mut users = Interner::new();
    for u in 0..spec.n_users {
        users.intern(&u.to_string());
    }

    // catalog_attributes.csv + schema.json
    let attr_path = &cfg.paths.catalog;
    let mut header = vec!["item_id".to_string()];
    for a in &catalog.nominal {
        header.push(a.name.clone());
    }
    for a in &catalog.numeric {
        header.push(a.name.clone());
    }
    header.push("last_update".into());
    let mut rows = Vec::with_capacity(catalog.n_items);
    for idx in 0..catalog.n_items {
        let mut row = vec![items.resolve(idx as u32).to_string()];
        for a in &catalog.nominal {
            row.push(match a.values[idx] {
                Some(c) => a.categories[c as usize].clone(),
                None => String::new(),
            });
        }
        for a in &catalog.numeric {
            row.push(match a.values[idx] {
                Some(v) => formats::float_cell(v),
                None => String::new(),
            });
        }
        row.push(timefmt::format_date(catalog.last_update[idx]));
        rows.push(row);
    }
    formats::write_table(attr_path, &header, &rows)?;

    let mut attributes = BTreeMap::new();
    for a in &catalog.nominal {
        attributes.insert(a.name.clone(), "nominal".to_string());
    }
    for a in &catalog.numeric {
        attributes.insert(a.name.clone(), "numeric".to_string());
    }
    formats::write_schema(
        &cfg.paths.schema,
        &formats::CatalogSchema { attributes, last_update_column: "last_update".into() },
    )?;

    // descriptions.csv: tokens joined back into text.
    let mut desc_rows = Vec::with_capacity(catalog.n_items);
    for idx in 0..catalog.n_items {
        desc_rows.push(vec![
            items.resolve(idx as u32).to_string(),
            catalog.tokens[idx].join(" "),
        ]);
    }
    formats::write_table(
        &cfg.paths.descriptions,
        &["item_id".to_string(), "text".to_string()],
        &desc_rows,
    )?;

    let (log, _) = ingest(events);
    formats::write_interactions(&cfg.paths.interactions, &log.events, &users, &items)
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

pub fn run_train(cfg: &RunConfig) -> Result<StageReport> {
    let mut stage = Stage::open(cfg)?;
    let mut report = StageReport::default();

    let (catalog, items) = load_catalog(cfg)?;
    let (split, _) = load_split(&stage, &items)?;
    let corpus_hash = formats::fnv_hash_file(&stage.path(TRAIN_CSV))?;

    // Session sequences ordered by user id.
    let profiles = build_profiles(&split.train, split.split_point);
    let sequences: Vec<Vec<u32>> = profiles
        .values()
        .map(|p| p.visits.iter().map(|&(i, _)| i).collect())
        .collect();

    let axes = cfg.grid_axes();
    let mut jobs: Vec<(EmbedKind, u32, u32)> = Vec::new();
    if axes.include_w2v {
        for &dim in &axes.dims {
            for &window in &axes.windows {
                jobs.push((EmbedKind::SessionW2v, dim, window));
            }
        }
    }
    if axes.include_d2v {
        for &dim in &axes.dims {
            for &window in &axes.windows {
                jobs.push((EmbedKind::DocD2v, dim, window));
            }
        }
    }

    let models_dir = stage.path(MODELS_DIR);
    let trained: Vec<Result<(String, String, f64)>> = jobs
        .par_iter()
        .map(|&(kind, dim, window)| {
            let tag = format!("{}_{dim}_{window}", kind.as_str());
            let spec = cfg.train_spec(derive_seed(cfg.seed, &tag));
            let model = match kind {
                EmbedKind::SessionW2v => fit_session_embeddings(
                    &sequences,
                    catalog.n_items,
                    dim as usize,
                    window as usize,
                    &spec,
                )?,
                EmbedKind::DocD2v => {
                    fit_doc_embeddings(&catalog.tokens, dim as usize, window as usize, &spec)?
                }
            };
            let (csv_name, json_name) =
                formats::write_model(&models_dir, &model, &spec, &corpus_hash, &items)?;
            Ok((csv_name, json_name, model.final_loss))
        })
        .collect();

    for result in trained {
        let (csv_name, json_name, loss) = result?;
        stage.record(&format!("{MODELS_DIR}/{csv_name}"), StageId::Train);
        stage.record(&format!("{MODELS_DIR}/{json_name}"), StageId::Train);
        report.note(format!("trained {csv_name} (final loss {loss:.4})"));
    }

    let matrix = if cfg.cbsim.attribute_weights.is_empty() {
        vectorize_attributes(&catalog)
    } else {
        reclab_core::cbsim::vectorize_attributes_weighted(&catalog, &cfg.cbsim.attribute_weights)
    };
    for col in &matrix.zero_variance {
        report.note(format!("warning: numeric column {col:?} has zero variance"));
    }
    formats::write_cb_matrix(&models_dir, &matrix, &items)?;
    stage.record(&format!("{MODELS_DIR}/cb_matrix.csv"), StageId::Train);
    stage.record(&format!("{MODELS_DIR}/cb_matrix.json"), StageId::Train);
    report.note(format!(
        "vectorized {} attribute columns over {} items",
        matrix.columns.len(),
        catalog.n_items
    ));

    stage.close()?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// eval-offline
// ---------------------------------------------------------------------------

pub fn run_eval_offline(cfg: &RunConfig) -> Result<StageReport> {
    let mut stage = Stage::open(cfg)?;
    let mut report = StageReport::default();

    let (catalog, items) = load_catalog(cfg)?;
    let (split, _) = load_split(&stage, &items)?;
    let models = load_models(&stage, &items)?;
    let data = prepare_eval_data(&split, catalog.n_items);
    if data.users.is_empty() {
        return Err(LabError::Core(reclab_core::CoreError::NoEvaluableUsers));
    }
    report.note(format!(
        "{} evaluable test users ({} skipped without profile, {} without test views)",
        data.users.len(),
        data.skipped_no_profile,
        data.skipped_no_relevant
    ));

    let ctx = RecContext {
        sims: &models.sims,
        cos_true: &models.cos_true,
        last_update: &catalog.last_update,
        mmr_cap: cfg.eval.mmr_cap,
    };
    let variants = enumerate_variants(&cfg.grid_axes());
    let out_dir = stage.out.clone();
    let hash = cfg.stage_hash(StageId::EvalOffline);
    let manifest_snapshot = stage.manifest.clone();

    let results: Vec<Result<(OfflineReport, String, bool)>> = variants
        .par_iter()
        .map(|variant| {
            let rel = format!("{VARIANTS_DIR}/{}.csv", variant.id());
            if manifest_snapshot.can_reuse(&out_dir, &rel, &hash) {
                let reports = formats::read_offline_reports(&out_dir.join(&rel))?;
                if let Some(r) = reports.into_iter().next() {
                    return Ok((r, rel, true));
                }
            }
            let r = evaluate_variant(variant, &data, &ctx).map_err(LabError::Core)?;
            formats::write_offline_reports(&out_dir.join(&rel), std::slice::from_ref(&r))?;
            Ok((r, rel, false))
        })
        .collect();

    let mut reports = Vec::with_capacity(variants.len());
    let mut reused = 0usize;
    for result in results {
        let (r, rel, was_reused) = result?;
        stage.record(&rel, StageId::EvalOffline);
        if was_reused {
            reused += 1;
        }
        reports.push(r);
    }
    formats::write_offline_reports(&stage.path(OFFLINE_REPORT), &reports)?;
    stage.record(OFFLINE_REPORT, StageId::EvalOffline);
    stage.close()?;

    report.note(format!(
        "evaluated {} variants ({} reused from a previous run)",
        reports.len(),
        reused
    ));
    Ok(report)
}

// ---------------------------------------------------------------------------
// correlate
// ---------------------------------------------------------------------------

pub fn run_correlate(cfg: &RunConfig) -> Result<StageReport> {
    let mut stage = Stage::open(cfg)?;
    let mut report = StageReport::default();
    let reports = load_offline_reports(&stage)?;

    for method in [CorrMethod::Pearson, CorrMethod::Spearman] {
        let corr = correlation_matrix(&reports, method).map_err(LabError::Core)?;
        let mut header = vec!["metric".to_string()];
        header.extend(MetricId::ALL.iter().map(|m| m.name().to_string()));
        let mut rows = Vec::new();
        for a in MetricId::ALL {
            let mut row = vec![a.name().to_string()];
            row.extend(MetricId::ALL.iter().map(|&b| formats::float_cell(corr.get(a, b))));
            rows.push(row);
        }
        let rel = correlations_csv(method);
        formats::write_table(&stage.path(&rel), &header, &rows)?;
        stage.record(&rel, StageId::Correlate);

        if method == CorrMethod::Spearman {
            let clusters = metric_clusters(&corr, 0.96);
            let mut rows = Vec::new();
            for (i, cluster) in clusters.iter().enumerate() {
                rows.push(vec![
                    i.to_string(),
                    cluster[0].name().to_string(),
                    cluster
                        .iter()
                        .map(|m| m.name())
                        .collect::<Vec<_>>()
                        .join("|"),
                ]);
            }
            formats::write_table(
                &stage.path(CLUSTERS_CSV),
                &["cluster".to_string(), "representative".to_string(), "members".to_string()],
                &rows,
            )?;
            stage.record(CLUSTERS_CSV, StageId::Correlate);
            report.note(format!(
                "{} metric clusters at |rho| >= 0.96 (spearman)",
                clusters.len()
            ));
        }
    }
    stage.close()?;
    report.note("wrote correlations_pearson.csv and correlations_spearman.csv".to_string());
    Ok(report)
}

// ---------------------------------------------------------------------------
// pareto
// ---------------------------------------------------------------------------

pub fn run_pareto(cfg: &RunConfig) -> Result<StageReport> {
    let mut stage = Stage::open(cfg)?;
    let mut report = StageReport::default();
    let reports = load_offline_reports(&stage)?;
    let metrics: Vec<MetricId> = if cfg.select.pareto_all_metrics {
        MetricId::ALL.to_vec()
    } else {
        representative_metrics().to_vec()
    };
    let front = pareto_front(&reports, &metrics);

    let mut header = vec!["variant_id".to_string()];
    header.extend(metrics.iter().map(|m| m.name().to_string()));
    let mut rows = Vec::new();
    for &i in &front {
        let mut row = vec![reports[i].variant_id.clone()];
        row.extend(metrics.iter().map(|&m| formats::float_cell(reports[i].get(m))));
        rows.push(row);
    }
    formats::write_table(&stage.path(PARETO_CSV), &header, &rows)?;
    stage.record(PARETO_CSV, StageId::Pareto);
    stage.close()?;
    report.note(format!(
        "{} of {} variants on the Pareto front over {} metrics",
        front.len(),
        reports.len(),
        metrics.len()
    ));
    Ok(report)
}

// ---------------------------------------------------------------------------
// select
// ---------------------------------------------------------------------------

pub fn run_select(cfg: &RunConfig) -> Result<StageReport> {
    let mut stage = Stage::open(cfg)?;
    let mut report = StageReport::default();
    let reports = load_offline_reports(&stage)?;
    let metrics = cfg.select_metrics()?;
    let set = select_candidates(
        &reports,
        &metrics,
        cfg.select.budget,
        cfg.select.closeness_tol,
        cfg.strict,
    )
    .map_err(LabError::Core)?;
    let entries: Vec<(String, String)> = set
        .entries
        .iter()
        .map(|c| (c.variant_id.clone(), c.reason.clone()))
        .collect();
    formats::write_candidates(&stage.path(CANDIDATES_CSV), &entries)?;
    stage.record(CANDIDATES_CSV, StageId::Select);
    stage.close()?;
    report.note(format!("selected {} A/B candidates (budget {})", entries.len(), cfg.select.budget));
    for (variant_id, reason) in &entries {
        report.note(format!("  {variant_id} ({reason})"));
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// synth-online
// ---------------------------------------------------------------------------

pub fn run_synth_online(cfg: &RunConfig) -> Result<StageReport> {
    let mut stage = Stage::open(cfg)?;
    let mut report = StageReport::default();

    let (catalog, items) = load_catalog(cfg)?;
    let (split, _) = load_split(&stage, &items)?;
    let models = load_models(&stage, &items)?;
    let arm_ids = formats::read_candidates(&stage.verify(CANDIDATES_CSV, StageId::Select)?)?;
    if arm_ids.is_empty() {
        return Err(LabError::Config("candidates.csv holds no arms".into()));
    }

    let by_id = variant_by_id(cfg);
    let ctx = RecContext {
        sims: &models.sims,
        cos_true: &models.cos_true,
        last_update: &catalog.last_update,
        mmr_cap: cfg.eval.mmr_cap,
    };
    let popularity = catalog.popularity_order(&split.train);
    let mut arms: Vec<VariantArm> = Vec::with_capacity(arm_ids.len());
    for id in &arm_ids {
        let variant = by_id.get(id).ok_or_else(|| {
            LabError::Config(format!("candidate {id:?} is not in the configured grid"))
        })?;
        arms.push(VariantArm { variant: variant.clone(), ctx: &ctx, popularity: &popularity });
    }
    let arm_refs: Vec<&dyn reclab_core::synth::ArmPolicy> =
        arms.iter().map(|a| a as &dyn reclab_core::synth::ArmPolicy).collect();

    let prefs = PropensityModel::from_clusters(catalog.n_items as u32, cfg.synth.n_clusters);
    let spec = cfg.behavior_spec()?;
    let logs = synth_behavior(&arm_refs, &prefs, &spec);

    // Online users are a fresh numeric namespace (bucketing needs uid % n).
    let mut online_users = Interner::new();
    for u in 0..spec.n_users {
        online_users.intern(&u.to_string());
    }
    let imp_rows: Vec<(u32, u16, u32, i64)> =
        logs.impressions.iter().map(|i| (i.user, i.arm, i.item, i.t)).collect();
    let click_rows: Vec<(u32, u16, u32, i64)> =
        logs.clicks.iter().map(|c| (c.user, c.arm, c.item, c.t)).collect();
    formats::write_slate_events(
        &stage.path(IMPRESSIONS_CSV),
        &imp_rows,
        &online_users,
        &items,
        &arm_ids,
    )?;
    formats::write_slate_events(
        &stage.path(CLICKS_CSV),
        &click_rows,
        &online_users,
        &items,
        &arm_ids,
    )?;
    let (visits, _) = ingest(logs.interactions);
    formats::write_interactions(
        &stage.path(ONLINE_INTERACTIONS_CSV),
        &visits.events,
        &online_users,
        &items,
    )?;

    stage.record(IMPRESSIONS_CSV, StageId::SynthOnline);
    stage.record(CLICKS_CSV, StageId::SynthOnline);
    stage.record(ONLINE_INTERACTIONS_CSV, StageId::SynthOnline);
    stage.close()?;
    report.note(format!(
        "simulated {} users over {} arms: {} impressions, {} clicks, {} visits",
        spec.n_users,
        arm_ids.len(),
        imp_rows.len(),
        click_rows.len(),
        visits.len()
    ));
    Ok(report)
}

// ---------------------------------------------------------------------------
// eval-online
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct OnlineSummary {
    arms: usize,
    impressions: usize,
    clicks: usize,
    visits: usize,
    unmatched_clicks: u64,
    excluded_zero_prior_impressions: u64,
    bucket_mismatches: usize,
    unknown_variant_rows: usize,
}

fn accounting_rows(
    arm_ids: &[String],
    accounting: &OnlineAccounting,
) -> Vec<formats::OnlineReportRow> {
    let mut out = Vec::new();
    for (arm, variant_id) in arm_ids.iter().enumerate() {
        for segment in Segment::ALL.iter().copied().map(Some).chain([None]) {
            let row = accounting
                .row(arm as u16, segment)
                .copied()
                .unwrap_or(OnlineRow {
                    arm: arm as u16,
                    segment,
                    impressions: 0,
                    clicks: 0,
                    attributed_visits: 0,
                });
            out.push(formats::OnlineReportRow {
                variant_id: variant_id.clone(),
                segment: segment.map_or("all".to_string(), |s| s.name().to_string()),
                impressions: row.impressions,
                clicks: row.clicks,
                visits: row.attributed_visits,
                ctr: row.ctr(),
                vrr: row.vrr(),
            });
        }
    }
    out
}

pub fn run_eval_online(cfg: &RunConfig) -> Result<StageReport> {
    let mut stage = Stage::open(cfg)?;
    let mut report = StageReport::default();

    let (_catalog, items) = load_catalog(cfg)?;
    let arm_ids = formats::read_candidates(&stage.verify(CANDIDATES_CSV, StageId::Select)?)?;
    let offline = load_offline_reports(&stage)?;

    let mut users = Interner::new();
    let impressions_file = formats::read_slate_events(
        &stage.verify(IMPRESSIONS_CSV, StageId::SynthOnline)?,
        &mut users,
        &items,
        &arm_ids,
        cfg.online.check_bucketing,
    )?;
    let clicks_file = formats::read_slate_events(
        &stage.verify(CLICKS_CSV, StageId::SynthOnline)?,
        &mut users,
        &items,
        &arm_ids,
        false,
    )?;
    let visits_file = formats::read_interactions(
        &stage.verify(ONLINE_INTERACTIONS_CSV, StageId::SynthOnline)?,
        &mut users,
        &items,
        true,
    )?;
    let (visits, _) = ingest(visits_file.events);

    let mismatches = impressions_file.bucket_mismatches;
    if mismatches > 0 {
        let msg = format!("{mismatches} impressions disagree with uid % {}", arm_ids.len());
        if cfg.strict {
            return Err(LabError::Strict(msg));
        }
        report.note(format!("warning: {msg}"));
    }

    let impressions = formats::to_impressions(&impressions_file.rows);
    let clicks = formats::to_clicks(&clicks_file.rows);
    let mode = if cfg.online.seniority_per_user {
        SeniorityMode::PerUserAtStart
    } else {
        SeniorityMode::PerImpression
    };
    let accounting = evaluate_online(
        &impressions,
        &clicks,
        &visits.events,
        arm_ids.len() as u16,
        cfg.horizon_secs(),
        mode,
    );

    let rows = accounting_rows(&arm_ids, &accounting);
    formats::write_online_report(&stage.path(ONLINE_REPORT_CSV), &rows)?;
    stage.record(ONLINE_REPORT_CSV, StageId::EvalOnline);

    // Offline vs online correlation per segment slice, when enough arms.
    let by_id: BTreeMap<&str, &OfflineReport> =
        offline.iter().map(|r| (r.variant_id.as_str(), r)).collect();
    let mut arm_reports = Vec::new();
    for id in &arm_ids {
        let r = by_id.get(id.as_str()).ok_or_else(|| {
            LabError::Config(format!("candidate {id:?} missing from offline_report.csv"))
        })?;
        arm_reports.push(*r);
    }
    if arm_ids.len() >= 3 {
        let mut header = vec!["segment".to_string(), "offline_metric".to_string()];
        header.push("ctr_spearman".into());
        header.push("vrr_spearman".into());
        header.push("degenerate".into());
        let mut rows = Vec::new();
        for segment in Segment::ALL.iter().copied().map(Some).chain([None]) {
            let corr = offline_online_correlation(&arm_reports, &accounting, segment)
                .map_err(LabError::Core)?;
            let seg_name = segment.map_or("all".to_string(), |s| s.name().to_string());
            for m in MetricId::ALL {
                rows.push(vec![
                    seg_name.clone(),
                    m.name().to_string(),
                    formats::float_cell(corr.values[m.index()][0]),
                    formats::float_cell(corr.values[m.index()][1]),
                    (corr.degenerate[m.index()][0] || corr.degenerate[m.index()][1]).to_string(),
                ]);
            }
        }
        formats::write_table(&stage.path(ONLINE_CORRELATION_CSV), &header, &rows)?;
        stage.record(ONLINE_CORRELATION_CSV, StageId::EvalOnline);
    } else {
        report.note("fewer than 3 arms: offline/online correlation skipped".to_string());
    }

    let summary = OnlineSummary {
        arms: arm_ids.len(),
        impressions: impressions.len(),
        clicks: clicks.len(),
        visits: visits.len(),
        unmatched_clicks: accounting.unmatched_clicks,
        excluded_zero_prior_impressions: accounting.excluded_impressions,
        bucket_mismatches: mismatches,
        unknown_variant_rows: impressions_file.unknown_variants + clicks_file.unknown_variants,
    };
    let path = stage.path(ONLINE_SUMMARY);
    let text = serde_json::to_string_pretty(&summary)
        .map_err(|source| LabError::Json { path: path.clone(), source })?;
    std::fs::write(&path, text).map_err(LabError::io(&path))?;
    stage.record(ONLINE_SUMMARY, StageId::EvalOnline);
    stage.close()?;

    report.note(format!(
        "accounted {} impressions / {} clicks / {} visits ({} clicks unmatched, {} impressions excluded)",
        summary.impressions,
        summary.clicks,
        summary.visits,
        summary.unmatched_clicks,
        summary.excluded_zero_prior_impressions
    ));
    Ok(report)
}

// ---------------------------------------------------------------------------
// predict-online
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
struct MetaModelJson {
    target: String,
    lambda: f64,
    y_mean: f64,
    loocv_r2: f64,
    loocv_tau_b: f64,
    loocv_tau_p_value: f64,
    degenerate: bool,
    n_nonzero: usize,
    coefficients: Vec<CoefficientJson>,
    segments: Vec<String>,
    baselines: Option<BaselinesJson>,
}

#[derive(Debug, Serialize)]
struct CoefficientJson {
    feature: String,
    value: f64,
}

#[derive(Debug, Serialize)]
struct BaselinesJson {
    ols_r2: f64,
    ols_tau_b: f64,
    tree_r2: f64,
    tree_tau_b: f64,
}

fn rebuild_accounting(
    arm_ids: &[String],
    rows: &[formats::OnlineReportRow],
) -> Result<OnlineAccounting> {
    let mut out = Vec::new();
    for row in rows {
        let arm = arm_ids
            .iter()
            .position(|id| *id == row.variant_id)
            .ok_or_else(|| LabError::Config(format!("unknown arm {:?}", row.variant_id)))?
            as u16;
        let segment = if row.segment == "all" {
            None
        } else {
            Some(Segment::parse(&row.segment).ok_or_else(|| {
                LabError::Config(format!("unknown segment {:?}", row.segment))
            })?)
        };
        out.push(OnlineRow {
            arm,
            segment,
            impressions: row.impressions,
            clicks: row.clicks,
            attributed_visits: row.visits,
        });
    }
    Ok(OnlineAccounting { rows: out, unmatched_clicks: 0, excluded_impressions: 0 })
}

pub fn run_predict_online(cfg: &RunConfig) -> Result<StageReport> {
    let mut stage = Stage::open(cfg)?;
    let mut report = StageReport::default();

    let offline = load_offline_reports(&stage)?;
    let arm_ids = formats::read_candidates(&stage.verify(CANDIDATES_CSV, StageId::Select)?)?;
    let online_rows =
        formats::read_online_report(&stage.verify(ONLINE_REPORT_CSV, StageId::EvalOnline)?)?;
    let accounting = rebuild_accounting(&arm_ids, &online_rows)?;

    let by_id: BTreeMap<&str, &OfflineReport> =
        offline.iter().map(|r| (r.variant_id.as_str(), r)).collect();
    let mut arm_reports = Vec::new();
    for id in &arm_ids {
        arm_reports.push(*by_id.get(id.as_str()).ok_or_else(|| {
            LabError::Config(format!("candidate {id:?} missing from offline_report.csv"))
        })?);
    }
    let segments = cfg.meta_segments()?;
    let dataset =
        build_meta_dataset(&arm_reports, &accounting, &segments).map_err(LabError::Core)?;
    write_meta_dataset(&stage.path(META_DATASET_CSV), &dataset)?;
    stage.record(META_DATASET_CSV, StageId::PredictOnline);
    report.note(format!(
        "meta dataset: {} rows ({} arms x {} segments)",
        dataset.rows.len(),
        arm_ids.len(),
        segments.len()
    ));

    let meta_cfg = cfg.meta_config();
    let rank_segment = cfg.rank_segment()?;
    for (target, y) in [("ctr", &dataset.y_ctr), ("vrr", &dataset.y_vrr)] {
        let (lambda, preds, pipeline) =
            lasso_cv(&dataset.rows, y, true, &meta_cfg).map_err(LabError::Core)?;
        let scores = score_predictions(y, &preds).map_err(LabError::Core)?;

        let baselines = if cfg.meta.run_baselines {
            Some(fit_baselines(&dataset, y, &meta_cfg)?)
        } else {
            None
        };

        let expanded_names = poly2_names(&dataset.feature_names);
        let coefficients: Vec<CoefficientJson> = pipeline
            .beta
            .iter()
            .enumerate()
            .filter(|&(_, &b)| b != 0.0)
            .map(|(i, &b)| CoefficientJson { feature: expanded_names[i].clone(), value: b })
            .collect();
        let model_json = MetaModelJson {
            target: target.to_string(),
            lambda,
            y_mean: pipeline.y_mean,
            loocv_r2: scores.r2,
            loocv_tau_b: scores.tau_b,
            loocv_tau_p_value: scores.p_value,
            degenerate: scores.degenerate,
            n_nonzero: coefficients.len(),
            coefficients,
            segments: segments.iter().map(|s| s.name().to_string()).collect(),
            baselines,
        };
        let rel = meta_model_json(target);
        let path = stage.path(&rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(LabError::io(parent))?;
        }
        let text = serde_json::to_string_pretty(&model_json)
            .map_err(|source| LabError::Json { path: path.clone(), source })?;
        std::fs::write(&path, text).map_err(LabError::io(&path))?;
        stage.record(&rel, StageId::PredictOnline);
        report.note(format!(
            "{target}: lambda {lambda:.6}, LOOCV R2 {:.3}, tau-b {:.3} (p {:.4}), {} nonzero",
            scores.r2, scores.tau_b, scores.p_value, model_json.n_nonzero
        ));

        // Rank the whole grid per segment.
        let ranked = rank_all_variants(&pipeline, &offline, rank_segment);
        let mut header =
            vec!["rank".to_string(), "variant_id".to_string(), "predicted".to_string()];
        header.extend(segments.iter().map(|s| format!("pred_{}", s.name())));
        let mut rows = Vec::with_capacity(ranked.len());
        for (rank, (variant_id, pred)) in ranked.iter().enumerate() {
            let mut row =
                vec![(rank + 1).to_string(), variant_id.clone(), formats::float_cell(*pred)];
            let base = by_id[variant_id.as_str()];
            for &segment in &segments {
                let mut features: Vec<f64> =
                    MetricId::ALL.iter().map(|&m| base.get(m)).collect();
                features.push(segment_ordinal(segment));
                row.push(formats::float_cell(pipeline.predict(&features).clamp(0.0, 1.0)));
            }
            rows.push(row);
        }
        let rel = predicted_grid_csv(target);
        formats::write_table(&stage.path(&rel), &header, &rows)?;
        stage.record(&rel, StageId::PredictOnline);
    }

    stage.close()?;
    Ok(report)
}

fn fit_baselines(
    dataset: &MetaDataset,
    y: &[f64],
    meta_cfg: &reclab_core::meta::MetaConfig,
) -> Result<BaselinesJson> {
    let ols_preds = loocv(&dataset.rows, y, |tx, ty, test| {
        Ok(fit_ols_pipeline(tx, ty, true, meta_cfg)?.predict(test))
    })
    .map_err(LabError::Core)?;
    let ols = score_predictions(y, &ols_preds).map_err(LabError::Core)?;

    // The tree splits raw features; polynomial expansion adds nothing to
    // axis-aligned splits.
    let tree_preds = loocv(&dataset.rows, y, |tx, ty, test| {
        let tree = fit_tree(tx, ty, meta_cfg.tree_depth, meta_cfg.tree_min_leaf);
        Ok(tree.predict(test))
    })
    .map_err(LabError::Core)?;
    let tree = score_predictions(y, &tree_preds).map_err(LabError::Core)?;

    Ok(BaselinesJson {
        ols_r2: ols.r2,
        ols_tau_b: ols.tau_b,
        tree_r2: tree.r2,
        tree_tau_b: tree.tau_b,
    })
}

fn write_meta_dataset(path: &Path, dataset: &MetaDataset) -> Result<()> {
    let mut header = vec!["label".to_string()];
    header.extend(dataset.feature_names.iter().cloned());
    header.push("ctr".into());
    header.push("vrr".into());
    let mut rows = Vec::with_capacity(dataset.rows.len());
    for (i, features) in dataset.rows.iter().enumerate() {
        let mut row = vec![dataset.labels[i].clone()];
        row.extend(features.iter().map(|&v| formats::float_cell(v)));
        row.push(formats::float_cell(dataset.y_ctr[i]));
        row.push(formats::float_cell(dataset.y_vrr[i]));
        rows.push(row);
    }
    formats::write_table(path, &header, &rows)
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

pub fn run_report(cfg: &RunConfig) -> Result<StageReport> {
    let mut stage = Stage::open(cfg)?;
    let mut report = StageReport::default();
    let offline = load_offline_reports(&stage)?;

    // Optional joins: online rates (all-segment) and grid predictions.
    let arm_ids = if stage.verify(CANDIDATES_CSV, StageId::Select).is_ok() {
        formats::read_candidates(&stage.path(CANDIDATES_CSV))?
    } else {
        Vec::new()
    };
    let mut online_all: BTreeMap<String, (f64, f64)> = BTreeMap::new();
    if stage.verify(ONLINE_REPORT_CSV, StageId::EvalOnline).is_ok() {
        for row in formats::read_online_report(&stage.path(ONLINE_REPORT_CSV))? {
            if row.segment == "all" {
                online_all.insert(row.variant_id.clone(), (row.ctr, row.vrr));
            }
        }
    }
    let mut preds: BTreeMap<String, [Option<f64>; 2]> = BTreeMap::new();
    for (slot, target) in ["ctr", "vrr"].iter().enumerate() {
        let rel = predicted_grid_csv(target);
        if stage.verify(&rel, StageId::PredictOnline).is_err() {
            continue;
        }
        let path = stage.path(&rel);
        let mut reader = csv::Reader::from_path(&path)
            .map_err(|source| LabError::Csv { path: path.clone(), source })?;
        for record in reader.records() {
            let record =
                record.map_err(|source| LabError::Csv { path: path.clone(), source })?;
            let value: f64 = record[2].parse().unwrap_or(f64::NAN);
            preds.entry(record[1].to_string()).or_default()[slot] = Some(value);
        }
    }

    let mut header = vec!["variant_id".to_string()];
    header.extend(MetricId::ALL.iter().map(|m| m.name().to_string()));
    header.extend(
        ["n_users", "arm", "ctr", "vrr", "pred_ctr", "pred_vrr"]
            .iter()
            .map(|s| s.to_string()),
    );
    let mut rows = Vec::with_capacity(offline.len());
    for r in &offline {
        let mut row = vec![r.variant_id.clone()];
        row.extend(r.values.iter().map(|&v| formats::float_cell(v)));
        row.push(r.n_users.to_string());
        let arm = arm_ids.iter().position(|id| *id == r.variant_id);
        row.push(arm.map_or(String::new(), |a| a.to_string()));
        match online_all.get(&r.variant_id) {
            Some(&(ctr, vrr)) => {
                row.push(formats::float_cell(ctr));
                row.push(formats::float_cell(vrr));
            }
            None => {
                row.push(String::new());
                row.push(String::new());
            }
        }
        let p = preds.get(&r.variant_id).copied().unwrap_or_default();
        for slot in p {
            row.push(slot.map_or(String::new(), formats::float_cell));
        }
        rows.push(row);
    }
    formats::write_table(&stage.path(SUMMARY_CSV), &header, &rows)?;
    stage.record(SUMMARY_CSV, StageId::Report);
    stage.close()?;
    report.note(format!(
        "summary.csv: {} variants, {} with online rates, {} with predictions",
        offline.len(),
        online_all.len(),
        preds.len()
    ));
    Ok(report)
}
