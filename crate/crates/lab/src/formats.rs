//! CSV and JSON readers/writers for every file the pipeline consumes or
//! produces. Floats are written with Rust's shortest round-trip formatting
//! so save/load cycles are bit-exact.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use reclab_core::cbsim::AttributeMatrix;
use reclab_core::corpus::{Catalog, Event, EventKind, NominalAttr, NumericAttr};
use reclab_core::embed::{EmbedKind, EmbeddingModel, TrainSpec};
use reclab_core::eval::{MetricId, OfflineReport};
use reclab_core::online::{ClickEvent, Impression};
use reclab_core::text::Normalizer;

use crate::error::{LabError, Result};
use crate::interner::Interner;
use crate::timefmt;

fn csv_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    if !path.exists() {
        return Err(LabError::MissingArtifact {
            path: path.to_path_buf(),
            produced_by: "a previous step (or provide the input file)".into(),
        });
    }
    csv::ReaderBuilder::new()
        .flexible(false)
        .from_path(path)
        .map_err(|source| LabError::Csv { path: path.to_path_buf(), source })
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(LabError::io(parent))?;
    }
    csv::Writer::from_path(path).map_err(|source| LabError::Csv { path: path.to_path_buf(), source })
}

fn write_record<I, S>(w: &mut csv::Writer<std::fs::File>, path: &Path, record: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    w.write_record(record)
        .map_err(|source| LabError::Csv { path: path.to_path_buf(), source })
}

fn finish(mut w: csv::Writer<std::fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(LabError::io(path))
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn parse_f64(s: &str, path: &Path, line: u64) -> Result<f64> {
    s.parse().map_err(|_| LabError::Format {
        file: path.to_path_buf(),
        line,
        message: format!("invalid number {s:?}"),
    })
}

// ---------------------------------------------------------------------------
// Interactions
// ---------------------------------------------------------------------------

pub const INTERACTIONS_HEADER: [&str; 4] = ["user_id", "item_id", "timestamp", "kind"];

/// Outcome of reading an interaction log file.
#[derive(Debug)]
pub struct InteractionsFile {
    pub events: Vec<Event>,
    pub malformed: usize,
    /// Rows whose item id is not in the catalog.
    pub unknown_items: usize,
}

fn check_header(path: &Path, got: &csv::StringRecord, want: &[&str]) -> Result<()> {
    let got_cols: Vec<&str> = got.iter().collect();
    if got_cols != want {
        return Err(LabError::Format {
            file: path.to_path_buf(),
            line: 1,
            message: format!("header mismatch: expected {want:?}, got {got_cols:?}"),
        });
    }
    Ok(())
}

/// Read `user_id,item_id,timestamp,kind`. Item ids must resolve through the
/// catalog interner; users are interned on the fly in file order. Malformed
/// rows (bad timestamp, undeclared kind, unknown item) are dropped and
/// counted; in strict mode any malformed row aborts.
pub fn read_interactions(
    path: &Path,
    users: &mut Interner,
    items: &Interner,
    strict: bool,
) -> Result<InteractionsFile> {
    let mut reader = csv_reader(path)?;
    let header = reader
        .headers()
        .map_err(|source| LabError::Csv { path: path.to_path_buf(), source })?
        .clone();
    check_header(path, &header, &INTERACTIONS_HEADER)?;

    let mut out = InteractionsFile { events: Vec::new(), malformed: 0, unknown_items: 0 };
    for (i, record) in reader.records().enumerate() {
        let line = i as u64 + 2;
        let record = record.map_err(|source| LabError::Csv { path: path.to_path_buf(), source })?;
        let drop_row = |what: String, out: &mut InteractionsFile, unknown: bool| -> Result<()> {
            if strict {
                return Err(LabError::Strict(format!("{}:{line}: {what}", path.display())));
            }
            out.malformed += 1;
            if unknown {
                out.unknown_items += 1;
            }
            Ok(())
        };
        let (user_s, item_s, ts_s, kind_s) = (&record[0], &record[1], &record[2], &record[3]);
        let Ok(t) = timefmt::parse_instant(ts_s) else {
            drop_row(format!("bad timestamp {ts_s:?}"), &mut out, false)?;
            continue;
        };
        let Some(kind) = EventKind::parse(kind_s) else {
            drop_row(format!("undeclared kind {kind_s:?}"), &mut out, false)?;
            continue;
        };
        let Some(item) = items.get(item_s) else {
            drop_row(format!("unknown item {item_s:?}"), &mut out, true)?;
            continue;
        };
        let user = users.intern(user_s);
        out.events.push(Event { user, item, t, kind });
    }
    Ok(out)
}

pub fn write_interactions(
    path: &Path,
    events: &[Event],
    users: &Interner,
    items: &Interner,
) -> Result<()> {
    let mut w = csv_writer(path)?;
    write_record(&mut w, path, INTERACTIONS_HEADER)?;
    for e in events {
        write_record(
            &mut w,
            path,
            [
                users.resolve(e.user),
                items.resolve(e.item),
                &timefmt::format_instant(e.t),
                e.kind.as_str(),
            ],
        )?;
    }
    finish(w, path)
}

// ---------------------------------------------------------------------------
// Catalog (attributes + schema + descriptions)
// ---------------------------------------------------------------------------

/// Attribute typing sidecar for `catalog_attributes.csv`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CatalogSchema {
    /// Attribute name -> "nominal" | "numeric".
    pub attributes: BTreeMap<String, String>,
    /// Name of the last-update date column.
    pub last_update_column: String,
}

pub fn read_schema(path: &Path) -> Result<CatalogSchema> {
    let text = std::fs::read_to_string(path).map_err(LabError::io(path))?;
    let schema: CatalogSchema = serde_json::from_str(&text)
        .map_err(|source| LabError::Json { path: path.to_path_buf(), source })?;
    for (name, kind) in &schema.attributes {
        if kind != "nominal" && kind != "numeric" {
            return Err(LabError::Config(format!(
                "schema attribute {name:?} has unknown type {kind:?}"
            )));
        }
    }
    Ok(schema)
}

pub fn write_schema(path: &Path, schema: &CatalogSchema) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(LabError::io(parent))?;
    }
    let text = serde_json::to_string_pretty(schema)
        .map_err(|source| LabError::Json { path: path.to_path_buf(), source })?;
    std::fs::write(path, text).map_err(LabError::io(path))
}

/// Load the catalog: attribute CSV (+ JSON schema) and the descriptions
/// file, normalizing text on the way in. Returns the catalog and the item
/// interner in catalog row order.
pub fn read_catalog(
    attributes_path: &Path,
    schema_path: &Path,
    descriptions_path: &Path,
    normalizer: &Normalizer,
) -> Result<(Catalog, Interner)> {
    let schema = read_schema(schema_path)?;
    let mut reader = csv_reader(attributes_path)?;
    let header = reader
        .headers()
        .map_err(|source| LabError::Csv { path: attributes_path.to_path_buf(), source })?
        .clone();
    let columns: Vec<String> = header.iter().map(str::to_string).collect();
    if columns.first().map(String::as_str) != Some("item_id") {
        return Err(LabError::Format {
            file: attributes_path.to_path_buf(),
            line: 1,
            message: "first column must be item_id".into(),
        });
    }
    let mut last_update_col = None;
    for (ci, name) in columns.iter().enumerate().skip(1) {
        if *name == schema.last_update_column {
            last_update_col = Some(ci);
        } else if !schema.attributes.contains_key(name) {
            return Err(LabError::Format {
                file: attributes_path.to_path_buf(),
                line: 1,
                message: format!("column {name:?} not declared in the schema"),
            });
        }
    }
    let last_update_col = last_update_col.ok_or_else(|| LabError::Format {
        file: attributes_path.to_path_buf(),
        line: 1,
        message: format!("missing last-update column {:?}", schema.last_update_column),
    })?;

    let mut items = Interner::new();
    let mut raw_rows: Vec<csv::StringRecord> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record
            .map_err(|source| LabError::Csv { path: attributes_path.to_path_buf(), source })?;
        let id = &record[0];
        if items.get(id).is_some() {
            return Err(LabError::Format {
                file: attributes_path.to_path_buf(),
                line: i as u64 + 2,
                message: format!("duplicate item_id {id:?}"),
            });
        }
        items.intern(id);
        raw_rows.push(record);
    }
    let n_items = raw_rows.len();

    let mut nominal: Vec<NominalAttr> = Vec::new();
    let mut numeric: Vec<NumericAttr> = Vec::new();
    let mut last_update = vec![0i64; n_items];
    for (ci, name) in columns.iter().enumerate().skip(1) {
        if ci == last_update_col {
            for (ri, record) in raw_rows.iter().enumerate() {
                last_update[ri] = timefmt::parse_date(&record[ci]).map_err(|_| {
                    LabError::Format {
                        file: attributes_path.to_path_buf(),
                        line: ri as u64 + 2,
                        message: format!("bad date {:?}", &record[ci]),
                    }
                })?;
            }
            continue;
        }
        match schema.attributes[name].as_str() {
            "nominal" => {
                let mut categories = Interner::new();
                let mut values = Vec::with_capacity(n_items);
                for record in &raw_rows {
                    let v = record[ci].trim();
                    values.push(if v.is_empty() { None } else { Some(categories.intern(v)) });
                }
                nominal.push(NominalAttr {
                    name: name.clone(),
                    categories: categories.names().to_vec(),
                    values,
                });
            }
            _ => {
                let mut values = Vec::with_capacity(n_items);
                for (ri, record) in raw_rows.iter().enumerate() {
                    let v = record[ci].trim();
                    values.push(if v.is_empty() {
                        None
                    } else {
                        Some(parse_f64(v, attributes_path, ri as u64 + 2)?)
                    });
                }
                numeric.push(NumericAttr { name: name.clone(), values });
            }
        }
    }

    // Descriptions: rows may come in any order; missing rows mean empty text.
    let mut tokens = vec![Vec::new(); n_items];
    let mut reader = csv_reader(descriptions_path)?;
    let header = reader
        .headers()
        .map_err(|source| LabError::Csv { path: descriptions_path.to_path_buf(), source })?
        .clone();
    check_header(descriptions_path, &header, &["item_id", "text"])?;
    for (i, record) in reader.records().enumerate() {
        let record = record
            .map_err(|source| LabError::Csv { path: descriptions_path.to_path_buf(), source })?;
        let Some(item) = items.get(&record[0]) else {
            return Err(LabError::Format {
                file: descriptions_path.to_path_buf(),
                line: i as u64 + 2,
                message: format!("unknown item {:?}", &record[0]),
            });
        };
        tokens[item as usize] = normalizer.normalize(&record[1]);
    }

    Ok((Catalog { n_items, nominal, numeric, tokens, last_update }, items))
}

// ---------------------------------------------------------------------------
// Embedding models
// ---------------------------------------------------------------------------

pub fn model_file_name(kind: EmbedKind, dim: usize, window: usize) -> String {
    format!("model_{}_{dim}_{window}.csv", kind.as_str())
}

/// JSON sidecar of a persisted embedding model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSidecar {
    pub kind: String,
    pub dim: usize,
    pub window: usize,
    pub epochs: u32,
    pub negatives: u32,
    pub initial_lr: f64,
    pub min_lr: f64,
    pub noise_exponent: f64,
    pub seed: u64,
    pub corpus_hash: String,
    pub final_loss: f64,
    pub cold_items: usize,
}

pub fn write_model(
    dir: &Path,
    model: &EmbeddingModel,
    spec: &TrainSpec,
    corpus_hash: &str,
    items: &Interner,
) -> Result<(String, String)> {
    let csv_name = model_file_name(model.kind, model.dim, model.window);
    let path = dir.join(&csv_name);
    let mut w = csv_writer(&path)?;
    let mut header = vec!["item_id".to_string()];
    header.extend((0..model.dim).map(|i| format!("v{i}")));
    write_record(&mut w, &path, &header)?;
    for (idx, vector) in model.vectors.iter().enumerate() {
        let mut row = vec![items.resolve(idx as u32).to_string()];
        row.extend(vector.iter().map(|&v| fmt_f64(v)));
        write_record(&mut w, &path, &row)?;
    }
    finish(w, &path)?;

    let sidecar = ModelSidecar {
        kind: model.kind.as_str().to_string(),
        dim: model.dim,
        window: model.window,
        epochs: spec.epochs,
        negatives: spec.negatives,
        initial_lr: spec.initial_lr,
        min_lr: spec.min_lr,
        noise_exponent: spec.noise_exponent,
        seed: spec.seed,
        corpus_hash: corpus_hash.to_string(),
        final_loss: model.final_loss,
        cold_items: model.cold.iter().filter(|&&c| c).count(),
    };
    let json_name = csv_name.replace(".csv", ".json");
    let json_path = dir.join(&json_name);
    let text = serde_json::to_string_pretty(&sidecar)
        .map_err(|source| LabError::Json { path: json_path.clone(), source })?;
    std::fs::write(&json_path, text).map_err(LabError::io(&json_path))?;
    Ok((csv_name, json_name))
}

pub fn read_model(
    dir: &Path,
    kind: EmbedKind,
    dim: usize,
    window: usize,
    items: &Interner,
) -> Result<EmbeddingModel> {
    let path = dir.join(model_file_name(kind, dim, window));
    let mut reader = csv_reader(&path)?;
    let mut vectors = vec![Vec::new(); items.len()];
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|source| LabError::Csv { path: path.clone(), source })?;
        let line = i as u64 + 2;
        let Some(item) = items.get(&record[0]) else {
            return Err(LabError::Format {
                file: path.clone(),
                line,
                message: format!("unknown item {:?}", &record[0]),
            });
        };
        let mut v = Vec::with_capacity(dim);
        for j in 0..dim {
            v.push(parse_f64(&record[j + 1], &path, line)?);
        }
        vectors[item as usize] = v;
    }
    for (idx, v) in vectors.iter().enumerate() {
        if v.len() != dim {
            return Err(LabError::Format {
                file: path.clone(),
                line: 0,
                message: format!("item {:?} missing from model", items.resolve(idx as u32)),
            });
        }
    }
    let cold: Vec<bool> = vectors.iter().map(|v| v.iter().all(|&x| x == 0.0)).collect();
    Ok(EmbeddingModel { kind, dim, window, vectors, cold, final_loss: f64::NAN })
}

// ---------------------------------------------------------------------------
// Attribute matrix
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CbSidecar {
    pub columns: Vec<String>,
    pub numeric_stats: Vec<CbColumnStats>,
    pub zero_variance: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CbColumnStats {
    pub column: String,
    pub mean: f64,
    pub std: f64,
}

pub fn write_cb_matrix(dir: &Path, matrix: &AttributeMatrix, items: &Interner) -> Result<()> {
    let path = dir.join("cb_matrix.csv");
    let mut w = csv_writer(&path)?;
    let mut header = vec!["item_id".to_string()];
    header.extend(matrix.columns.iter().cloned());
    write_record(&mut w, &path, &header)?;
    for (idx, row) in matrix.rows.iter().enumerate() {
        let mut record = vec![items.resolve(idx as u32).to_string()];
        record.extend(row.iter().map(|&v| fmt_f64(v)));
        write_record(&mut w, &path, &record)?;
    }
    finish(w, &path)?;

    let sidecar = CbSidecar {
        columns: matrix.columns.clone(),
        numeric_stats: matrix
            .numeric_stats
            .iter()
            .map(|s| CbColumnStats { column: s.column.clone(), mean: s.mean, std: s.std })
            .collect(),
        zero_variance: matrix.zero_variance.clone(),
    };
    let json_path = dir.join("cb_matrix.json");
    let text = serde_json::to_string_pretty(&sidecar)
        .map_err(|source| LabError::Json { path: json_path.clone(), source })?;
    std::fs::write(&json_path, text).map_err(LabError::io(&json_path))
}

pub fn read_cb_matrix(dir: &Path, items: &Interner) -> Result<AttributeMatrix> {
    let json_path = dir.join("cb_matrix.json");
    let text = std::fs::read_to_string(&json_path).map_err(|_| LabError::MissingArtifact {
        path: json_path.clone(),
        produced_by: "train".into(),
    })?;
    let sidecar: CbSidecar = serde_json::from_str(&text)
        .map_err(|source| LabError::Json { path: json_path, source })?;

    let path = dir.join("cb_matrix.csv");
    let mut reader = csv_reader(&path)?;
    let n_cols = sidecar.columns.len();
    let mut rows = vec![Vec::new(); items.len()];
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|source| LabError::Csv { path: path.clone(), source })?;
        let line = i as u64 + 2;
        let Some(item) = items.get(&record[0]) else {
            return Err(LabError::Format {
                file: path.clone(),
                line,
                message: format!("unknown item {:?}", &record[0]),
            });
        };
        let mut row = Vec::with_capacity(n_cols);
        for j in 0..n_cols {
            row.push(parse_f64(&record[j + 1], &path, line)?);
        }
        rows[item as usize] = row;
    }
    Ok(AttributeMatrix {
        columns: sidecar.columns,
        rows,
        numeric_stats: sidecar
            .numeric_stats
            .into_iter()
            .map(|s| reclab_core::cbsim::ColumnStats { column: s.column, mean: s.mean, std: s.std })
            .collect(),
        zero_variance: sidecar.zero_variance,
    })
}

// ---------------------------------------------------------------------------
// Offline reports
// ---------------------------------------------------------------------------

pub fn offline_report_header() -> Vec<String> {
    let mut h = vec!["variant_id".to_string()];
    h.extend(MetricId::ALL.iter().map(|m| m.name().to_string()));
    h.push("n_users".into());
    h
}

pub fn write_offline_reports(path: &Path, reports: &[OfflineReport]) -> Result<()> {
    let mut w = csv_writer(path)?;
    write_record(&mut w, path, offline_report_header())?;
    for r in reports {
        let mut record = vec![r.variant_id.clone()];
        record.extend(r.values.iter().map(|&v| fmt_f64(v)));
        record.push(r.n_users.to_string());
        write_record(&mut w, path, &record)?;
    }
    finish(w, path)
}

pub fn read_offline_reports(path: &Path) -> Result<Vec<OfflineReport>> {
    let mut reader = csv_reader(path)?;
    let header = reader
        .headers()
        .map_err(|source| LabError::Csv { path: path.to_path_buf(), source })?
        .clone();
    let want = offline_report_header();
    let got: Vec<&str> = header.iter().collect();
    if got != want.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(LabError::Format {
            file: path.to_path_buf(),
            line: 1,
            message: "offline report header mismatch".into(),
        });
    }
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|source| LabError::Csv { path: path.to_path_buf(), source })?;
        let line = i as u64 + 2;
        let mut values = [0.0; 18];
        for (j, slot) in values.iter_mut().enumerate() {
            *slot = parse_f64(&record[j + 1], path, line)?;
        }
        let n_users: usize = record[19].parse().map_err(|_| LabError::Format {
            file: path.to_path_buf(),
            line,
            message: format!("bad n_users {:?}", &record[19]),
        })?;
        out.push(OfflineReport {
            variant_id: record[0].to_string(),
            values,
            n_users,
            auc_skipped: 0,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Online logs and reports
// ---------------------------------------------------------------------------

pub const IMPRESSIONS_HEADER: [&str; 4] = ["user_id", "variant_id", "item_id", "timestamp"];

/// Write impressions/clicks (same shape).
pub fn write_slate_events(
    path: &Path,
    rows: &[(u32, u16, u32, i64)],
    users: &Interner,
    items: &Interner,
    arm_ids: &[String],
) -> Result<()> {
    let mut w = csv_writer(path)?;
    write_record(&mut w, path, IMPRESSIONS_HEADER)?;
    for &(user, arm, item, t) in rows {
        write_record(
            &mut w,
            path,
            [
                users.resolve(user),
                arm_ids[arm as usize].as_str(),
                items.resolve(item),
                &timefmt::format_instant(t),
            ],
        )?;
    }
    finish(w, path)
}

#[derive(Debug)]
pub struct SlateEventsFile {
    /// (user, arm, item, t) with users interned on the fly.
    pub rows: Vec<(u32, u16, u32, i64)>,
    /// Rows whose variant_id is not an arm.
    pub unknown_variants: usize,
    /// Rows whose arm disagrees with `uid % n_arms`.
    pub bucket_mismatches: usize,
}

pub fn read_slate_events(
    path: &Path,
    users: &mut Interner,
    items: &Interner,
    arm_ids: &[String],
    check_bucketing: bool,
) -> Result<SlateEventsFile> {
    let mut reader = csv_reader(path)?;
    let header = reader
        .headers()
        .map_err(|source| LabError::Csv { path: path.to_path_buf(), source })?
        .clone();
    check_header(path, &header, &IMPRESSIONS_HEADER)?;
    let arm_index: BTreeMap<&str, u16> = arm_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i as u16))
        .collect();
    let mut out =
        SlateEventsFile { rows: Vec::new(), unknown_variants: 0, bucket_mismatches: 0 };
    for (i, record) in reader.records().enumerate() {
        let line = i as u64 + 2;
        let record = record.map_err(|source| LabError::Csv { path: path.to_path_buf(), source })?;
        let Some(&arm) = arm_index.get(&record[1]) else {
            out.unknown_variants += 1;
            continue;
        };
        let Some(item) = items.get(&record[2]) else {
            return Err(LabError::Format {
                file: path.to_path_buf(),
                line,
                message: format!("unknown item {:?}", &record[2]),
            });
        };
        let t = timefmt::parse_instant(&record[3])?;
        let user = users.intern(&record[0]);
        if check_bucketing
            && reclab_core::online::assign_bucket(&record[0], arm_ids.len() as u32)
                != u32::from(arm)
        {
            out.bucket_mismatches += 1;
        }
        out.rows.push((user, arm, item, t));
    }
    Ok(out)
}

pub fn to_impressions(rows: &[(u32, u16, u32, i64)]) -> Vec<Impression> {
    rows.iter().map(|&(user, arm, item, t)| Impression { user, arm, item, t }).collect()
}

pub fn to_clicks(rows: &[(u32, u16, u32, i64)]) -> Vec<ClickEvent> {
    rows.iter().map(|&(user, arm, item, t)| ClickEvent { user, arm, item, t }).collect()
}

pub const ONLINE_REPORT_HEADER: [&str; 7] =
    ["variant_id", "segment", "impressions", "clicks", "visits", "ctr", "vrr"];

#[derive(Debug, Clone)]
pub struct OnlineReportRow {
    pub variant_id: String,
    pub segment: String,
    pub impressions: u64,
    pub clicks: u64,
    pub visits: u64,
    pub ctr: f64,
    pub vrr: f64,
}

pub fn write_online_report(path: &Path, rows: &[OnlineReportRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    write_record(&mut w, path, ONLINE_REPORT_HEADER)?;
    for r in rows {
        write_record(
            &mut w,
            path,
            [
                r.variant_id.as_str(),
                r.segment.as_str(),
                &r.impressions.to_string(),
                &r.clicks.to_string(),
                &r.visits.to_string(),
                &fmt_f64(r.ctr),
                &fmt_f64(r.vrr),
            ],
        )?;
    }
    finish(w, path)
}

pub fn read_online_report(path: &Path) -> Result<Vec<OnlineReportRow>> {
    let mut reader = csv_reader(path)?;
    let header = reader
        .headers()
        .map_err(|source| LabError::Csv { path: path.to_path_buf(), source })?
        .clone();
    check_header(path, &header, &ONLINE_REPORT_HEADER)?;
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i as u64 + 2;
        let record = record.map_err(|source| LabError::Csv { path: path.to_path_buf(), source })?;
        let parse_u64 = |s: &str| -> Result<u64> {
            s.parse().map_err(|_| LabError::Format {
                file: path.to_path_buf(),
                line,
                message: format!("bad count {s:?}"),
            })
        };
        out.push(OnlineReportRow {
            variant_id: record[0].to_string(),
            segment: record[1].to_string(),
            impressions: parse_u64(&record[2])?,
            clicks: parse_u64(&record[3])?,
            visits: parse_u64(&record[4])?,
            ctr: parse_f64(&record[5], path, line)?,
            vrr: parse_f64(&record[6], path, line)?,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Candidates
// ---------------------------------------------------------------------------

pub const CANDIDATES_HEADER: [&str; 2] = ["variant_id", "reason"];

/// Row order defines the arm index (arm i = row i).
pub fn write_candidates(path: &Path, entries: &[(String, String)]) -> Result<()> {
    let mut w = csv_writer(path)?;
    write_record(&mut w, path, CANDIDATES_HEADER)?;
    for (variant_id, reason) in entries {
        write_record(&mut w, path, [variant_id, reason])?;
    }
    finish(w, path)
}

/// Returns variant ids in arm order.
pub fn read_candidates(path: &Path) -> Result<Vec<String>> {
    let mut reader = csv_reader(path)?;
    let header = reader
        .headers()
        .map_err(|source| LabError::Csv { path: path.to_path_buf(), source })?
        .clone();
    check_header(path, &header, &CANDIDATES_HEADER)?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|source| LabError::Csv { path: path.to_path_buf(), source })?;
        out.push(record[0].to_string());
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Generic helpers for small report tables
// ---------------------------------------------------------------------------

/// Write a table with a string header and stringified records.
pub fn write_table(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv_writer(path)?;
    write_record(&mut w, path, header)?;
    for row in rows {
        write_record(&mut w, path, row)?;
    }
    finish(w, path)
}

pub fn fnv_hash_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(LabError::io(path))?;
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in &bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    Ok(format!("{h:016x}"))
}

pub fn float_cell(v: f64) -> String {
    fmt_f64(v)
}

/// Resolve a path relative to the out dir into (absolute, relative-string).
pub fn rel(out_dir: &Path, rel_path: &str) -> (PathBuf, String) {
    (out_dir.join(rel_path), rel_path.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp() -> PathBuf {
        let dir = std::env::temp_dir().join(format!(
            "reclab_formats_{}_{:?}",
            std::process::id(),
            std::thread::current().id()
        ));
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn interactions_roundtrip_and_malformed_handling() {
        let dir = tmp();
        let path = dir.join("interactions.csv");
        std::fs::write(
            &path,
            "user_id,item_id,timestamp,kind\n\
             u1,a,2020-01-02T03:04:05Z,detail_view\n\
             u1,a,2020-01-02T03:04:05Z,detail_view\n\
             u2,b,2020-01-03T00:00:00Z,rec_click\n\
             u3,zz,2020-01-04T00:00:00Z,detail_view\n\
             u4,a,not-a-time,detail_view\n\
             u5,b,2020-01-05T00:00:00Z,view\n",
        )
        .unwrap();
        let mut items = Interner::new();
        items.intern("a");
        items.intern("b");
        let mut users = Interner::new();
        let parsed = read_interactions(&path, &mut users, &items, false).unwrap();
        assert_eq!(parsed.events.len(), 3); // duplicate kept here (dedup is ingest's job)
        assert_eq!(parsed.malformed, 3);
        assert_eq!(parsed.unknown_items, 1);

        let mut users2 = Interner::new();
        let strict = read_interactions(&path, &mut users2, &items, true);
        assert!(strict.is_err());

        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn header_mismatch_is_an_error() {
        let dir = tmp();
        let path = dir.join("interactions.csv");
        std::fs::write(&path, "user,item,time,kind\n").unwrap();
        let mut users = Interner::new();
        let items = Interner::new();
        let err = read_interactions(&path, &mut users, &items, false).unwrap_err();
        assert_eq!(err.kind(), "format");
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn offline_report_roundtrip_is_bit_exact() {
        let dir = tmp();
        let path = dir.join("offline_report.csv");
        let mut values = [0.0; 18];
        for (i, v) in values.iter_mut().enumerate() {
            *v = (i as f64 + 1.0) / 3.0; // non-terminating binary fractions
        }
        let reports = vec![OfflineReport {
            variant_id: "w2v_e32_w1.mean.nov0.div0".into(),
            values,
            n_users: 37,
            auc_skipped: 0,
        }];
        write_offline_reports(&path, &reports).unwrap();
        let back = read_offline_reports(&path).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].variant_id, reports[0].variant_id);
        for i in 0..18 {
            assert_eq!(back[0].values[i].to_bits(), reports[0].values[i].to_bits());
        }
        // Writing the parsed table back reproduces the bytes.
        let path2 = dir.join("offline_report2.csv");
        write_offline_reports(&path2, &back).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn model_roundtrip_preserves_bits() {
        let dir = tmp();
        let mut items = Interner::new();
        items.intern("x");
        items.intern("y");
        let model = EmbeddingModel {
            kind: EmbedKind::SessionW2v,
            dim: 3,
            window: 2,
            vectors: vec![vec![0.1, -0.25, 1.0 / 3.0], vec![0.0, 0.0, 0.0]],
            cold: vec![false, true],
            final_loss: 0.5,
        };
        let spec = TrainSpec::new(9);
        write_model(&dir, &model, &spec, "hash", &items).unwrap();
        let back = read_model(&dir, EmbedKind::SessionW2v, 3, 2, &items).unwrap();
        for (a, b) in model.vectors.iter().zip(&back.vectors) {
            for (x, y) in a.iter().zip(b) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        assert_eq!(back.cold, vec![false, true]);
        std::fs::remove_dir_all(&dir).ok();
    }
}
