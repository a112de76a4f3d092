//! Per-user offline metrics: rating error, ranking accuracy, temporal and
//! user-perceived novelty, intra-list diversity.

use alloc::vec::Vec;

use crate::cbsim::SimTable;
use crate::error::CoreError;
use crate::math;
use crate::recommender::RecEntry;
use crate::SECS_PER_DAY;

/// Whole days between `t` and `as_of` (non-negative).
#[inline]
pub fn whole_days(t: i64, as_of: i64) -> i64 {
    (as_of - t).max(0) / SECS_PER_DAY
}

/// Temporal novelty of an item updated `days` ago: 1/(ln(days) + 1), with
/// the timespan clamped to at least one day so the value stays in (0, 1].
#[inline]
pub fn novelty_t(days: i64) -> f64 {
    1.0 / (math::ln(days.max(1) as f64) + 1.0)
}

/// One user's evaluation input: the full ranked candidate list plus the
/// relevant (test-visited) and known (train-visited) item sets as bitmaps
/// over the catalog.
#[derive(Debug, Clone)]
pub struct Judgment {
    pub ranking: Vec<RecEntry>,
    pub relevant: Vec<bool>,
    pub known: Vec<bool>,
}

impl Judgment {
    fn n_relevant(&self) -> usize {
        self.relevant.iter().filter(|&&r| r).count()
    }
}

/// MAE and R^2 of min-max-normalized scores against binary relevance.
/// A zero-variance relevance vector yields R^2 = 0.
pub fn rating_metrics(j: &Judgment) -> Result<(f64, f64), CoreError> {
    if j.ranking.is_empty() {
        return Err(CoreError::NoEvaluableUsers);
    }
    let scores: Vec<f64> = j.ranking.iter().map(|e| e.score).collect();
    let normalized = math::minmax_normalize(&scores);
    let rel: Vec<f64> = j
        .ranking
        .iter()
        .map(|e| if j.relevant[e.item as usize] { 1.0 } else { 0.0 })
        .collect();
    let n = normalized.len() as f64;
    let mae = normalized.iter().zip(&rel).map(|(s, r)| (s - r).abs()).sum::<f64>() / n;
    let mean_r = rel.iter().sum::<f64>() / n;
    let ss_tot: f64 = rel.iter().map(|r| (r - mean_r) * (r - mean_r)).sum();
    let r2 = if ss_tot == 0.0 {
        0.0
    } else {
        let ss_res: f64 = normalized.iter().zip(&rel).map(|(s, r)| (s - r) * (s - r)).sum();
        1.0 - ss_res / ss_tot
    };
    Ok((mae, r2))
}

/// Ranking accuracy bundle. AUC is `None` when the user has no relevant or
/// no non-relevant candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankingMetrics {
    pub auc: Option<f64>,
    pub map: f64,
    pub mrr: f64,
    pub p5: f64,
    pub p10: f64,
    pub r5: f64,
    pub r10: f64,
    pub ndcg10: f64,
    pub ndcg100: f64,
    pub ndcg: f64,
}

/// AUC (tied scores get half credit, via the rank-sum formulation), MAP,
/// MRR, precision/recall at 5 and 10, and binary-gain nDCG with log2
/// discount at 10, 100 and the full list.
pub fn ranking_metrics(j: &Judgment) -> Result<RankingMetrics, CoreError> {
    let n = j.ranking.len();
    let n_rel = j.n_relevant();
    if n == 0 || n_rel == 0 {
        return Err(CoreError::NoEvaluableUsers);
    }

    // AUC over scores with 0.5 credit for ties: rank-sum, O(n log n).
    let n_pos = j.ranking.iter().filter(|e| j.relevant[e.item as usize]).count();
    let n_neg = n - n_pos;
    let auc = if n_pos > 0 && n_neg > 0 {
        let scores: Vec<f64> = j.ranking.iter().map(|e| e.score).collect();
        let ranks = crate::stats::average_ranks(&scores);
        let sum_pos: f64 = j
            .ranking
            .iter()
            .zip(&ranks)
            .filter(|(e, _)| j.relevant[e.item as usize])
            .map(|(_, r)| r)
            .sum();
        Some((sum_pos - n_pos as f64 * (n_pos as f64 + 1.0) / 2.0) / (n_pos as f64 * n_neg as f64))
    } else {
        None
    };

    let mut mrr = 0.0;
    let mut map_sum = 0.0;
    let mut hits = 0usize;
    let mut hits5 = 0usize;
    let mut hits10 = 0usize;
    let mut dcg10 = 0.0;
    let mut dcg100 = 0.0;
    let mut dcg = 0.0;
    for (pos0, e) in j.ranking.iter().enumerate() {
        if !j.relevant[e.item as usize] {
            continue;
        }
        let rank = pos0 + 1;
        hits += 1;
        if mrr == 0.0 {
            mrr = 1.0 / rank as f64;
        }
        map_sum += hits as f64 / rank as f64;
        if rank <= 5 {
            hits5 += 1;
        }
        if rank <= 10 {
            hits10 += 1;
        }
        let gain = 1.0 / math::log2(rank as f64 + 1.0);
        if rank <= 10 {
            dcg10 += gain;
        }
        if rank <= 100 {
            dcg100 += gain;
        }
        dcg += gain;
    }
    let map = map_sum / n_rel as f64;

    let idcg_at = |k: usize| -> f64 {
        (1..=n_rel.min(k)).map(|r| 1.0 / math::log2(r as f64 + 1.0)).sum()
    };
    let ndcg_at = |dcg_val: f64, k: usize| -> f64 {
        let ideal = idcg_at(k);
        if ideal == 0.0 {
            0.0
        } else {
            dcg_val / ideal
        }
    };

    Ok(RankingMetrics {
        auc,
        map,
        mrr,
        p5: hits5 as f64 / 5.0,
        p10: hits10 as f64 / 10.0,
        r5: hits5 as f64 / n_rel as f64,
        r10: hits10 as f64 / n_rel as f64,
        ndcg10: ndcg_at(dcg10, 10),
        ndcg100: ndcg_at(dcg100, 100),
        ndcg: ndcg_at(dcg, n),
    })
}

/// Mean temporal novelty over the top-k; a list shorter than k averages over
/// what is there and reports the shortfall.
pub fn novelty_temporal_at_k(
    ranking: &[RecEntry],
    last_update: &[i64],
    as_of: i64,
    k: usize,
) -> (f64, bool) {
    let take = ranking.len().min(k);
    if take == 0 {
        return (0.0, true);
    }
    let sum: f64 = ranking[..take]
        .iter()
        .map(|e| novelty_t(whole_days(last_update[e.item as usize], as_of)))
        .sum();
    (sum / take as f64, take < k)
}

/// User-perceived novelty: 1 - |top-k intersect known| / min(k, list len).
pub fn novelty_user_at_k(ranking: &[RecEntry], known: &[bool], k: usize) -> f64 {
    let take = ranking.len().min(k);
    if take == 0 {
        return 0.0;
    }
    let known_hits = ranking[..take].iter().filter(|e| known[e.item as usize]).count();
    1.0 - known_hits as f64 / take as f64
}

/// Intra-list diversity: mean pairwise attribute distance over the top-k,
/// with distance = 1 - max(cosine, 0). The cosine is clamped below at zero
/// (standardized numeric columns can push it slightly negative) so the
/// distance and the mean stay in [0,1]. Fewer than two items yields 0 and a
/// flag.
pub fn ild_at_k(ranking: &[RecEntry], cb: &SimTable, k: usize) -> (f64, bool) {
    let take = ranking.len().min(k);
    if take < 2 {
        return (0.0, true);
    }
    let mut sum = 0.0;
    let mut pairs = 0u64;
    for i in 0..take {
        for jj in (i + 1)..take {
            let cos = cb.get(ranking[i].item, ranking[jj].item);
            sum += 1.0 - cos.max(0.0);
            pairs += 1;
        }
    }
    (sum / pairs as f64, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use crate::cbsim::{vectorize_attributes, SimTable};
    use crate::corpus::{Catalog, NominalAttr};
    use alloc::string::String;

    fn judgment(order: &[(u32, f64)], relevant: &[u32], known: &[u32], n_items: usize) -> Judgment {
        let mut rel = vec![false; n_items];
        for &r in relevant {
            rel[r as usize] = true;
        }
        let mut kn = vec![false; n_items];
        for &k in known {
            kn[k as usize] = true;
        }
        Judgment {
            ranking: order.iter().map(|&(item, score)| RecEntry { item, score }).collect(),
            relevant: rel,
            known: kn,
        }
    }

    #[test]
    fn mae_fixture() {
        // scores (0, 0.5, 1), r = (0, 0, 1) -> MAE = 0.5/3.
        let j = judgment(&[(2, 1.0), (1, 0.5), (0, 0.0)], &[2], &[], 3);
        let (mae, _) = rating_metrics(&j).unwrap();
        assert!((mae - 0.5 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_scores_give_zero_mae_unit_r2() {
        let j = judgment(&[(1, 1.0), (0, 0.0), (2, 0.0)], &[1], &[], 3);
        let (mae, r2) = rating_metrics(&j).unwrap();
        assert_eq!(mae, 0.0);
        assert_eq!(r2, 1.0);
    }

    #[test]
    fn constant_scores_normalize_to_half() {
        let j = judgment(&[(0, 3.0), (1, 3.0)], &[1], &[], 2);
        let (mae, _) = rating_metrics(&j).unwrap();
        assert!((mae - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_variance_relevance_r2_is_zero() {
        let j = judgment(&[(0, 1.0), (1, 0.5)], &[0, 1], &[], 2);
        let (_, r2) = rating_metrics(&j).unwrap();
        assert_eq!(r2, 0.0);
    }

    #[test]
    fn mrr_first_relevant_at_rank_four() {
        let j = judgment(
            &[(0, 0.9), (1, 0.8), (2, 0.7), (3, 0.6), (4, 0.5)],
            &[3],
            &[],
            5,
        );
        let m = ranking_metrics(&j).unwrap();
        assert_eq!(m.mrr, 0.25);
    }

    #[test]
    fn auc_fixture_five_candidates() {
        // Relevant at ranks 1 and 3 of 5 -> 5 of 6 pairs correct.
        let j = judgment(
            &[(0, 0.9), (1, 0.8), (2, 0.7), (3, 0.6), (4, 0.5)],
            &[0, 2],
            &[],
            5,
        );
        let m = ranking_metrics(&j).unwrap();
        assert!((m.auc.unwrap() - 5.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn ndcg_fixture() {
        // Relevant at ranks 1 and 3: (1 + 1/log2 4) / (1 + 1/log2 3).
        let j = judgment(
            &[(0, 0.9), (1, 0.8), (2, 0.7), (3, 0.6), (4, 0.5)],
            &[0, 2],
            &[],
            5,
        );
        let m = ranking_metrics(&j).unwrap();
        let expect = (1.0 + 1.0 / math::log2(4.0)) / (1.0 + 1.0 / math::log2(3.0));
        assert!((m.ndcg10 - expect).abs() < 1e-9);
        assert!((expect - 0.9197).abs() < 1e-4);
    }

    #[test]
    fn precision_recall_integer_consistency() {
        let j = judgment(
            &[(0, 0.9), (1, 0.8), (2, 0.7), (3, 0.6), (4, 0.5), (5, 0.4)],
            &[1, 4, 5],
            &[],
            6,
        );
        let m = ranking_metrics(&j).unwrap();
        assert_eq!((m.p5 * 5.0).round() as u64, 2);
        assert_eq!((m.r5 * 3.0).round() as u64, 2);
        assert_eq!((m.p10 * 10.0).round() as u64, 3);
        assert_eq!((m.r10 * 3.0).round() as u64, 3);
    }

    #[test]
    fn perfect_and_reversed_ranking() {
        let perfect = judgment(&[(0, 0.9), (1, 0.8), (2, 0.2), (3, 0.1)], &[0, 1], &[], 4);
        let m = ranking_metrics(&perfect).unwrap();
        assert_eq!(m.auc.unwrap(), 1.0);
        assert_eq!(m.map, 1.0);
        assert_eq!(m.mrr, 1.0);
        assert_eq!(m.ndcg, 1.0);
        assert_eq!(m.ndcg10, 1.0);

        let reversed = judgment(&[(3, 0.9), (2, 0.8), (1, 0.2), (0, 0.1)], &[0, 1], &[], 4);
        let r = ranking_metrics(&reversed).unwrap();
        assert!((r.auc.unwrap() - (1.0 - m.auc.unwrap())).abs() < 1e-12);
    }

    #[test]
    fn auc_undefined_when_all_relevant() {
        let j = judgment(&[(0, 0.9), (1, 0.8)], &[0, 1], &[], 2);
        assert_eq!(ranking_metrics(&j).unwrap().auc, None);
    }

    #[test]
    fn empty_relevance_errors() {
        let j = judgment(&[(0, 0.9)], &[], &[], 1);
        assert!(ranking_metrics(&j).is_err());
    }

    #[test]
    fn temporal_novelty_values() {
        assert!((novelty_t(1) - 1.0).abs() < 1e-12);
        assert!((novelty_t(30) - 0.2272).abs() < 1e-4);
        assert!((novelty_t(0) - 1.0).abs() < 1e-12); // clamped to one day

        let entries: Vec<RecEntry> = (0..2).map(|i| RecEntry { item: i, score: 1.0 }).collect();
        let day = SECS_PER_DAY;
        let as_of = 100 * day;
        let (nov, flagged) = novelty_temporal_at_k(&entries, &[99 * day, 70 * day], as_of, 2);
        assert!(!flagged);
        assert!((nov - (1.0 + novelty_t(30)) / 2.0).abs() < 1e-12);
        assert!((nov - 0.6136).abs() < 1e-4);

        let (_, flagged) = novelty_temporal_at_k(&entries, &[99 * day, 70 * day], as_of, 10);
        assert!(flagged);
    }

    #[test]
    fn user_novelty_values() {
        let entries: Vec<RecEntry> =
            (0..10).map(|i| RecEntry { item: i, score: 1.0 - i as f64 * 0.01 }).collect();
        let mut known = vec![false; 10];
        known[0] = true;
        known[5] = true;
        assert!((novelty_user_at_k(&entries, &known, 10) - 0.8).abs() < 1e-12);
        assert_eq!(novelty_user_at_k(&entries, &[false; 10], 10), 1.0);
        assert_eq!(novelty_user_at_k(&entries, &[true; 10], 10), 0.0);
        // Short list: denominator is the list length.
        assert!((novelty_user_at_k(&entries[..4], &known, 10) - 0.75).abs() < 1e-12);
    }

    fn orthogonal_cb(n: usize) -> SimTable {
        let catalog = Catalog {
            n_items: n,
            nominal: vec![NominalAttr {
                name: String::from("c"),
                categories: (0..n).map(|i| alloc::format!("k{i}")).collect(),
                values: (0..n).map(|i| Some(i as u32)).collect(),
            }],
            numeric: Vec::new(),
            tokens: vec![Vec::new(); n],
            last_update: vec![0; n],
        };
        SimTable::from_attributes(&vectorize_attributes(&catalog), true)
    }

    #[test]
    fn ild_identical_and_orthogonal() {
        // All items in the same category -> identical rows -> ILD 0.
        let catalog = Catalog {
            n_items: 3,
            nominal: vec![NominalAttr {
                name: String::from("c"),
                categories: vec![String::from("x")],
                values: vec![Some(0); 3],
            }],
            numeric: Vec::new(),
            tokens: vec![Vec::new(); 3],
            last_update: vec![0; 3],
        };
        let same = SimTable::from_attributes(&vectorize_attributes(&catalog), true);
        let entries: Vec<RecEntry> =
            (0..3).map(|i| RecEntry { item: i, score: 1.0 }).collect();
        assert_eq!(ild_at_k(&entries, &same, 3).0, 0.0);

        // Three mutually orthogonal one-hot items -> ILD 1.
        let ortho = orthogonal_cb(3);
        assert_eq!(ild_at_k(&entries, &ortho, 3).0, 1.0);
    }

    #[test]
    fn ild_matches_brute_force_pair_mean() {
        let catalog = Catalog {
            n_items: 4,
            nominal: vec![NominalAttr {
                name: String::from("c"),
                categories: vec![String::from("a"), String::from("b")],
                values: vec![Some(0), Some(0), Some(1), Some(1)],
            }],
            numeric: Vec::new(),
            tokens: vec![Vec::new(); 4],
            last_update: vec![0; 4],
        };
        let cb = SimTable::from_attributes(&vectorize_attributes(&catalog), true);
        let entries: Vec<RecEntry> =
            (0..4).map(|i| RecEntry { item: i, score: 1.0 }).collect();
        // Pairs: (0,1)=0, (0,2)=1, (0,3)=1, (1,2)=1, (1,3)=1, (2,3)=0 -> 4/6.
        let (ild, _) = ild_at_k(&entries, &cb, 4);
        assert!((ild - 4.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn ild_single_item_is_flagged_zero() {
        let ortho = orthogonal_cb(2);
        let entries = vec![RecEntry { item: 0, score: 1.0 }];
        assert_eq!(ild_at_k(&entries, &ortho, 5), (0.0, true));
    }
}
