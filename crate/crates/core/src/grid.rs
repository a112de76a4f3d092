//! Grid-level analysis over the per-variant offline reports: metric
//! correlation matrices, correlation-based metric clustering, Pareto front
//! extraction and A/B candidate selection.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::CoreError;
use crate::eval::{MetricId, OfflineReport, Orientation};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrMethod {
    Pearson,
    Spearman,
}

impl CorrMethod {
    pub fn name(self) -> &'static str {
        match self {
            CorrMethod::Pearson => "pearson",
            CorrMethod::Spearman => "spearman",
        }
    }
}

/// Symmetric 18x18 correlation matrix with a unit diagonal. Zero-variance
/// metric columns correlate as 0 and are flagged.
#[derive(Debug, Clone)]
pub struct CorrMatrix {
    pub method: CorrMethod,
    pub values: [[f64; 18]; 18],
    pub degenerate: [bool; 18],
}

impl CorrMatrix {
    pub fn get(&self, a: MetricId, b: MetricId) -> f64 {
        self.values[a.index()][b.index()]
    }
}

/// Correlations between all metric pairs across the report table.
pub fn correlation_matrix(
    reports: &[OfflineReport],
    method: CorrMethod,
) -> Result<CorrMatrix, CoreError> {
    if reports.len() < 3 {
        return Err(CoreError::InvalidArgument("need at least 3 reports".into()));
    }
    let columns: Vec<Vec<f64>> = MetricId::ALL
        .iter()
        .map(|&m| reports.iter().map(|r| r.get(m)).collect())
        .collect();
    let mut degenerate = [false; 18];
    for (i, col) in columns.iter().enumerate() {
        degenerate[i] = col.iter().all(|&v| v == col[0]);
    }
    let mut values = [[0.0; 18]; 18];
    for i in 0..18 {
        values[i][i] = 1.0;
        for j in (i + 1)..18 {
            let corr = match method {
                CorrMethod::Pearson => stats::pearson(&columns[i], &columns[j]),
                CorrMethod::Spearman => stats::spearman(&columns[i], &columns[j]),
            }
            .unwrap_or(0.0);
            values[i][j] = corr;
            values[j][i] = corr;
        }
    }
    Ok(CorrMatrix { method, values, degenerate })
}

/// Group metrics whose pairwise |correlation| reaches `threshold`; within a
/// cluster every pair must qualify. The first metric (in column order) of
/// each cluster is its representative.
pub fn metric_clusters(corr: &CorrMatrix, threshold: f64) -> Vec<Vec<MetricId>> {
    let mut assigned = [false; 18];
    let mut clusters = Vec::new();
    for (i, &m) in MetricId::ALL.iter().enumerate() {
        if assigned[i] {
            continue;
        }
        assigned[i] = true;
        let mut cluster = vec![m];
        for (j, &cand) in MetricId::ALL.iter().enumerate().skip(i + 1) {
            if assigned[j] {
                continue;
            }
            let fits = cluster
                .iter()
                .all(|&member| corr.get(member, cand).abs() >= threshold);
            if fits {
                assigned[j] = true;
                cluster.push(cand);
            }
        }
        clusters.push(cluster);
    }
    clusters
}

/// The reduced metric set used for the Pareto front and candidate selection
/// by default: one representative per strongly correlated cluster.
pub fn representative_metrics() -> [MetricId; 7] {
    [
        MetricId::Mae,
        MetricId::Auc,
        MetricId::Mrr,
        MetricId::Ndcg100,
        MetricId::NovT10,
        MetricId::NovU10,
        MetricId::Ild10,
    ]
}

/// Oriented value: flip lower-better metrics so larger is always better.
fn oriented(report: &OfflineReport, m: MetricId) -> f64 {
    match m.orientation() {
        Orientation::HigherBetter => report.get(m),
        Orientation::LowerBetter => -report.get(m),
    }
}

/// True when `a` weakly dominates `b` over `metrics` and is strictly better
/// somewhere.
fn dominates(a: &OfflineReport, b: &OfflineReport, metrics: &[MetricId]) -> bool {
    let mut strict = false;
    for &m in metrics {
        let (va, vb) = (oriented(a, m), oriented(b, m));
        if va < vb {
            return false;
        }
        if va > vb {
            strict = true;
        }
    }
    strict
}

/// Indices of the reports on the Pareto front: variants not dominated by any
/// other variant.
pub fn pareto_front(reports: &[OfflineReport], metrics: &[MetricId]) -> Vec<usize> {
    (0..reports.len())
        .filter(|&i| {
            !reports
                .iter()
                .enumerate()
                .any(|(j, other)| j != i && dominates(other, &reports[i], metrics))
        })
        .collect()
}

/// One selected A/B candidate and why it was chosen.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub variant_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct CandidateSet {
    pub entries: Vec<Candidate>,
}

impl CandidateSet {
    pub fn contains(&self, variant_id: &str) -> bool {
        self.entries.iter().any(|c| c.variant_id == variant_id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Is `value` within `tol` (relative) of the extreme `target`?
fn close_to(value: f64, target: f64, tol: f64) -> bool {
    if target == 0.0 {
        value.abs() <= tol
    } else {
        (value - target).abs() <= tol * target.abs()
    }
}

/// Select A/B candidates: per metric the best and worst variant, skipping an
/// extreme when an already selected variant scores within `tol` of it; then,
/// while budget remains, one close-to-best variant for each base-algorithm
/// family not yet represented ("for the sake of diversity").
///
/// Reports are processed in variant-id order, so the outcome does not depend
/// on the input ordering.
pub fn select_candidates(
    reports: &[OfflineReport],
    metrics: &[MetricId],
    budget: usize,
    tol: f64,
    strict: bool,
) -> Result<CandidateSet, CoreError> {
    if budget < 2 {
        return Err(CoreError::InvalidArgument("budget must be at least 2".into()));
    }
    if strict && budget < metrics.len() {
        return Err(CoreError::InvalidArgument(format!(
            "budget {budget} below metric count {} in strict mode",
            metrics.len()
        )));
    }
    if reports.is_empty() {
        return Err(CoreError::NoEvaluableUsers);
    }
    let mut order: Vec<&OfflineReport> = reports.iter().collect();
    order.sort_by(|a, b| a.variant_id.cmp(&b.variant_id));

    let mut set = CandidateSet::default();

    let extreme = |metric: MetricId, best: bool| -> &OfflineReport {
        order
            .iter()
            .copied()
            .max_by(|a, b| {
                let (va, vb) = if best {
                    (oriented(a, metric), oriented(b, metric))
                } else {
                    (-oriented(a, metric), -oriented(b, metric))
                };
                va.total_cmp(&vb).then(b.variant_id.cmp(&a.variant_id))
            })
            .expect("non-empty reports")
    };

    'outer: for &metric in metrics {
        for best in [true, false] {
            if set.len() >= budget {
                break 'outer;
            }
            let pick = extreme(metric, best);
            let target = pick.get(metric);
            let covered = order.iter().any(|r| {
                set.contains(&r.variant_id) && close_to(r.get(metric), target, tol)
            });
            if covered || set.contains(&pick.variant_id) {
                continue;
            }
            set.entries.push(Candidate {
                variant_id: pick.variant_id.clone(),
                reason: format!("{}:{}", metric.name(), if best { "best" } else { "worst" }),
            });
        }
    }

    // Diversity pass: pull in unrepresented base families that score close
    // to the best on some metric.
    let family_of = |variant_id: &str| -> String {
        variant_id.split('_').next().unwrap_or("?").into()
    };
    'diversity: for &metric in metrics {
        if set.len() >= budget {
            break;
        }
        let best_val = extreme(metric, true).get(metric);
        let represented: BTreeSet<String> =
            set.entries.iter().map(|c| family_of(&c.variant_id)).collect();
        for r in &order {
            if set.len() >= budget {
                break 'diversity;
            }
            let fam = family_of(&r.variant_id);
            if represented.contains(&fam) || set.contains(&r.variant_id) {
                continue;
            }
            if close_to(r.get(metric), best_val, tol) {
                set.entries.push(Candidate {
                    variant_id: r.variant_id.clone(),
                    reason: format!("{}:diversity({fam})", metric.name()),
                });
                break; // one per metric pass
            }
        }
    }

    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::MetricId;

    fn report(id: &str, pairs: &[(MetricId, f64)]) -> OfflineReport {
        let mut values = [0.0; 18];
        for &(m, v) in pairs {
            values[m.index()] = v;
        }
        OfflineReport { variant_id: id.into(), values, n_users: 1, auc_skipped: 0 }
    }

    fn two_metric_report(id: &str, a: f64, b: f64) -> OfflineReport {
        report(id, &[(MetricId::Auc, a), (MetricId::Mrr, b)])
    }

    #[test]
    fn spearman_inversion_and_pearson_affine() {
        let reports: Vec<OfflineReport> = (0..3)
            .map(|i| {
                let x = (i + 1) as f64;
                report(
                    "v",
                    &[(MetricId::Auc, x), (MetricId::Mrr, 4.0 - x), (MetricId::Map, 2.0 * x + 1.0)],
                )
            })
            .collect();
        let s = correlation_matrix(&reports, CorrMethod::Spearman).unwrap();
        assert!((s.get(MetricId::Auc, MetricId::Mrr) + 1.0).abs() < 1e-12);
        let p = correlation_matrix(&reports, CorrMethod::Pearson).unwrap();
        assert!((p.get(MetricId::Auc, MetricId::Map) - 1.0).abs() < 1e-12);
        // Degenerate columns flagged, correlations zeroed, diagonal kept.
        assert!(p.degenerate[MetricId::Ndcg.index()]);
        assert_eq!(p.get(MetricId::Ndcg, MetricId::Auc), 0.0);
        assert_eq!(p.get(MetricId::Ndcg, MetricId::Ndcg), 1.0);
    }

    #[test]
    fn spearman_tie_fixture_matches_rank_formula() {
        // 5 points with one tie in x.
        let xs = [1.0, 2.0, 2.0, 3.0, 4.0];
        let ys = [1.0, 3.0, 2.0, 4.0, 5.0];
        let reports: Vec<OfflineReport> = xs
            .iter()
            .zip(ys.iter())
            .map(|(&x, &y)| report("v", &[(MetricId::Auc, x), (MetricId::Mrr, y)]))
            .collect();
        let s = correlation_matrix(&reports, CorrMethod::Spearman).unwrap();
        let expect =
            stats::pearson(&stats::average_ranks(&xs), &stats::average_ranks(&ys)).unwrap();
        assert!((s.get(MetricId::Auc, MetricId::Mrr) - expect).abs() < 1e-12);
    }

    #[test]
    fn clusters_group_perfectly_correlated_metrics() {
        // AUC == MRR exactly, MAP independent.
        let reports: Vec<OfflineReport> = [(1.0, 0.3), (2.0, 0.9), (3.0, 0.1), (4.0, 0.5)]
            .iter()
            .map(|&(x, z)| {
                report("v", &[(MetricId::Auc, x), (MetricId::Mrr, x), (MetricId::Map, z)])
            })
            .collect();
        let corr = correlation_matrix(&reports, CorrMethod::Spearman).unwrap();
        let clusters = metric_clusters(&corr, 0.96);
        let auc_cluster = clusters
            .iter()
            .find(|c| c.contains(&MetricId::Auc))
            .unwrap();
        assert!(auc_cluster.contains(&MetricId::Mrr));
        assert!(!auc_cluster.contains(&MetricId::Map));
    }

    #[test]
    fn pareto_front_matches_quadrant_fixture() {
        // Maximizing both AUC and MRR.
        let reports = vec![
            two_metric_report("a", 1.0, 1.0),
            two_metric_report("b", 2.0, 0.5),
            two_metric_report("c", 0.5, 2.0),
            two_metric_report("d", 1.5, 1.5),
        ];
        let metrics = [MetricId::Auc, MetricId::Mrr];
        let front = pareto_front(&reports, &metrics);
        assert_eq!(front, vec![1, 2, 3]); // (1,1) dominated by (1.5,1.5)
    }

    #[test]
    fn pareto_single_and_duplicates() {
        let one = vec![two_metric_report("a", 1.0, 1.0)];
        assert_eq!(pareto_front(&one, &[MetricId::Auc]).len(), 1);

        let dup = vec![two_metric_report("a", 1.0, 2.0), two_metric_report("b", 1.0, 2.0)];
        assert_eq!(pareto_front(&dup, &[MetricId::Auc, MetricId::Mrr]).len(), 2);
    }

    #[test]
    fn pareto_respects_orientation_and_fixpoint() {
        // MAE is lower-better.
        let reports = vec![
            report("low_mae", &[(MetricId::Mae, 0.1), (MetricId::Auc, 0.5)]),
            report("hi_mae", &[(MetricId::Mae, 0.9), (MetricId::Auc, 0.5)]),
            report("hi_auc", &[(MetricId::Mae, 0.9), (MetricId::Auc, 0.9)]),
        ];
        let metrics = [MetricId::Mae, MetricId::Auc];
        let front = pareto_front(&reports, &metrics);
        assert_eq!(front, vec![0, 2]);

        // Front of the front is the front.
        let front_reports: Vec<OfflineReport> =
            front.iter().map(|&i| reports[i].clone()).collect();
        let again = pareto_front(&front_reports, &metrics);
        assert_eq!(again.len(), front_reports.len());
    }

    #[test]
    fn best_variant_per_metric_is_on_front() {
        let mut rng = crate::rng::Rng::new(99);
        let reports: Vec<OfflineReport> = (0..40)
            .map(|i| {
                report(
                    &alloc::format!("v{i:02}"),
                    &[
                        (MetricId::Mae, rng.next_f64()),
                        (MetricId::Auc, rng.next_f64()),
                        (MetricId::Mrr, rng.next_f64()),
                    ],
                )
            })
            .collect();
        let metrics = [MetricId::Mae, MetricId::Auc, MetricId::Mrr];
        let front = pareto_front(&reports, &metrics);
        for m in metrics {
            let best = (0..reports.len())
                .max_by(|&a, &b| oriented(&reports[a], m).total_cmp(&oriented(&reports[b], m)))
                .unwrap();
            assert!(front.contains(&best), "best of {} missing from front", m.name());
        }
    }

    #[test]
    fn select_dedups_correlated_extremes() {
        // Two metrics in perfect agreement: 2 candidates cover 4 extremes.
        let reports = vec![
            two_metric_report("a", 0.1, 0.1),
            two_metric_report("b", 0.5, 0.5),
            two_metric_report("c", 0.9, 0.9),
        ];
        let set =
            select_candidates(&reports, &[MetricId::Auc, MetricId::Mrr], 12, 0.02, false).unwrap();
        assert_eq!(set.len(), 2);
        assert!(set.contains("c") && set.contains("a"));
    }

    #[test]
    fn select_with_zero_tol_takes_plain_extremes() {
        let reports = vec![
            two_metric_report("a", 0.1, 0.9),
            two_metric_report("b", 0.5, 0.5),
            two_metric_report("c", 0.9, 0.1),
        ];
        let set =
            select_candidates(&reports, &[MetricId::Auc, MetricId::Mrr], 12, 0.0, false).unwrap();
        // best/worst on AUC: c,a; best/worst on MRR: a,c -> deduplicated.
        assert_eq!(set.len(), 2);
    }

    #[test]
    fn select_respects_budget_and_strict_mode() {
        let reports: Vec<OfflineReport> = (0..10)
            .map(|i| two_metric_report(&alloc::format!("v{i}"), i as f64, (10 - i) as f64))
            .collect();
        let set =
            select_candidates(&reports, &[MetricId::Auc, MetricId::Mrr], 2, 0.0, false).unwrap();
        assert_eq!(set.len(), 2);
        assert!(select_candidates(&reports, &[MetricId::Auc, MetricId::Mrr], 2, 0.0, true)
            .is_ok());
        let err = select_candidates(
            &reports,
            &[MetricId::Auc, MetricId::Mrr, MetricId::Map],
            2,
            0.0,
            true,
        );
        assert!(err.is_err());
    }

    #[test]
    fn select_greedy_trace_on_fixture() {
        // 10 variants x 3 metrics with tol 0.05 and budget 6; hand trace:
        //  auc best = v9 (0.90), worst = v0 (0.00)
        //  mrr best = v0 (0.95) already selected? v0 value 0.95 is the best
        //  and v0 is selected -> skip; mrr worst = v9 (0.05), selected -> skip
        //  map best = v5 (1.0), worst = v4 (0.0) -> selected.
        let mut reports = Vec::new();
        for i in 0..10 {
            let auc = i as f64 * 0.1;
            let mrr = 0.95 - i as f64 * 0.1;
            let map = if i == 5 {
                1.0
            } else if i == 4 {
                0.0
            } else {
                0.5
            };
            reports.push(report(
                &alloc::format!("v{i}"),
                &[(MetricId::Auc, auc), (MetricId::Mrr, mrr), (MetricId::Map, map)],
            ));
        }
        let set = select_candidates(
            &reports,
            &[MetricId::Auc, MetricId::Mrr, MetricId::Map],
            6,
            0.05,
            false,
        )
        .unwrap();
        let ids: Vec<&str> = set.entries.iter().map(|c| c.variant_id.as_str()).collect();
        assert_eq!(ids, vec!["v9", "v0", "v5", "v4"]);
    }

    #[test]
    fn select_is_input_order_invariant() {
        let mut reports: Vec<OfflineReport> = (0..8)
            .map(|i| two_metric_report(&alloc::format!("v{i}"), i as f64 * 1.7, (i * i) as f64))
            .collect();
        let a = select_candidates(&reports, &[MetricId::Auc, MetricId::Mrr], 4, 0.02, false)
            .unwrap();
        reports.reverse();
        let b = select_candidates(&reports, &[MetricId::Auc, MetricId::Mrr], 4, 0.02, false)
            .unwrap();
        assert_eq!(a.entries, b.entries);
    }
}
