//! Variant evaluation: build per-user judgments from the temporal split and
//! aggregate the 18 offline metrics into one report per variant.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::corpus::{build_profiles, EventKind, ItemId, SplitCorpus, UserId};
use crate::error::CoreError;
use crate::math::KahanSum;
use crate::metrics::{
    ild_at_k, novelty_temporal_at_k, novelty_user_at_k, ranking_metrics, rating_metrics, Judgment,
};
use crate::recommender::{recommend, RecContext, VariantConfig};

/// The 18 offline metrics in report column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MetricId {
    Mae,
    R2,
    Auc,
    Map,
    Mrr,
    P5,
    P10,
    R5,
    R10,
    Ndcg10,
    Ndcg100,
    Ndcg,
    NovT5,
    NovT10,
    NovU5,
    NovU10,
    Ild5,
    Ild10,
}

/// Whether larger values of a metric are better.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    HigherBetter,
    LowerBetter,
}

impl MetricId {
    pub const ALL: [MetricId; 18] = [
        MetricId::Mae,
        MetricId::R2,
        MetricId::Auc,
        MetricId::Map,
        MetricId::Mrr,
        MetricId::P5,
        MetricId::P10,
        MetricId::R5,
        MetricId::R10,
        MetricId::Ndcg10,
        MetricId::Ndcg100,
        MetricId::Ndcg,
        MetricId::NovT5,
        MetricId::NovT10,
        MetricId::NovU5,
        MetricId::NovU10,
        MetricId::Ild5,
        MetricId::Ild10,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricId::Mae => "mae",
            MetricId::R2 => "r2",
            MetricId::Auc => "auc",
            MetricId::Map => "map",
            MetricId::Mrr => "mrr",
            MetricId::P5 => "p5",
            MetricId::P10 => "p10",
            MetricId::R5 => "r5",
            MetricId::R10 => "r10",
            MetricId::Ndcg10 => "ndcg10",
            MetricId::Ndcg100 => "ndcg100",
            MetricId::Ndcg => "ndcg",
            MetricId::NovT5 => "novt5",
            MetricId::NovT10 => "novt10",
            MetricId::NovU5 => "novu5",
            MetricId::NovU10 => "novu10",
            MetricId::Ild5 => "ild5",
            MetricId::Ild10 => "ild10",
        }
    }

    pub fn parse(name: &str) -> Option<MetricId> {
        MetricId::ALL.iter().copied().find(|m| m.name() == name)
    }

    pub fn index(self) -> usize {
        MetricId::ALL.iter().position(|&m| m == self).unwrap()
    }

    /// Error goes down, everything else goes up.
    pub fn orientation(self) -> Orientation {
        match self {
            MetricId::Mae => Orientation::LowerBetter,
            _ => Orientation::HigherBetter,
        }
    }
}

/// Per-variant mean metrics over the evaluated users.
#[derive(Debug, Clone, PartialEq)]
pub struct OfflineReport {
    pub variant_id: String,
    pub values: [f64; 18],
    pub n_users: usize,
    /// Users skipped for AUC only (single-class candidates).
    pub auc_skipped: usize,
}

impl OfflineReport {
    pub fn get(&self, m: MetricId) -> f64 {
        self.values[m.index()]
    }
}

/// Shared, variant-independent evaluation input: one row per evaluable test
/// user (train profile, test-relevant items, train-known items).
#[derive(Debug, Clone)]
pub struct EvalData {
    pub users: Vec<UserId>,
    pub profiles: Vec<Vec<(ItemId, i64)>>,
    pub relevant: Vec<Vec<ItemId>>,
    pub known: Vec<Vec<ItemId>>,
    pub as_of: i64,
    pub n_items: usize,
    /// Test users without a detail-view train profile.
    pub skipped_no_profile: usize,
    /// Test users without any detail-view test event.
    pub skipped_no_relevant: usize,
}

/// Collect the evaluable users of a split: those with a non-empty
/// detail-view train profile and at least one detail-view test event.
/// Users are ordered by id so aggregation order is stable.
pub fn prepare_eval_data(split: &SplitCorpus, n_items: usize) -> EvalData {
    let profiles = build_profiles(&split.train, split.split_point);
    let mut relevant: BTreeMap<UserId, BTreeSet<ItemId>> = BTreeMap::new();
    for e in &split.test.events {
        if e.kind == EventKind::DetailView {
            relevant.entry(e.user).or_default().insert(e.item);
        }
    }

    let mut data = EvalData {
        users: Vec::new(),
        profiles: Vec::new(),
        relevant: Vec::new(),
        known: Vec::new(),
        as_of: split.split_point,
        n_items,
        skipped_no_profile: 0,
        skipped_no_relevant: 0,
    };
    let test_users: BTreeSet<UserId> = split.test.events.iter().map(|e| e.user).collect();
    for user in test_users {
        let Some(profile) = profiles.get(&user) else {
            data.skipped_no_profile += 1;
            continue;
        };
        let Some(rel) = relevant.get(&user) else {
            data.skipped_no_relevant += 1;
            continue;
        };
        data.users.push(user);
        data.known.push(profile.visits.iter().map(|&(i, _)| i).collect::<BTreeSet<_>>()
            .into_iter()
            .collect());
        data.profiles.push(profile.visits.clone());
        data.relevant.push(rel.iter().copied().collect());
    }
    data
}

/// Evaluate one variant: rank the full catalog for every user, compute all
/// 18 metrics, report unweighted means (compensated summation).
pub fn evaluate_variant(
    variant: &VariantConfig,
    data: &EvalData,
    ctx: &RecContext<'_>,
) -> Result<OfflineReport, CoreError> {
    if data.users.is_empty() {
        return Err(CoreError::NoEvaluableUsers);
    }
    let mut sums = [KahanSum::new(); 18];
    let mut auc_sum = KahanSum::new();
    let mut auc_n = 0usize;
    let mut auc_skipped = 0usize;

    let mut relevant = vec![false; data.n_items];
    let mut known = vec![false; data.n_items];

    for row in 0..data.users.len() {
        let list = recommend(
            variant,
            &data.profiles[row],
            data.users[row],
            data.as_of,
            data.n_items,
            ctx,
        )?;

        for &i in &data.relevant[row] {
            relevant[i as usize] = true;
        }
        for &i in &data.known[row] {
            known[i as usize] = true;
        }
        let judgment = Judgment {
            ranking: list.entries,
            relevant: relevant.clone(),
            known: known.clone(),
        };
        for &i in &data.relevant[row] {
            relevant[i as usize] = false;
        }
        for &i in &data.known[row] {
            known[i as usize] = false;
        }

        let (mae, r2) = rating_metrics(&judgment)?;
        let rank = ranking_metrics(&judgment)?;
        match rank.auc {
            Some(a) => {
                auc_sum.add(a);
                auc_n += 1;
            }
            None => auc_skipped += 1,
        }
        let (novt5, _) = novelty_temporal_at_k(&judgment.ranking, ctx.last_update, data.as_of, 5);
        let (novt10, _) =
            novelty_temporal_at_k(&judgment.ranking, ctx.last_update, data.as_of, 10);
        let novu5 = novelty_user_at_k(&judgment.ranking, &judgment.known, 5);
        let novu10 = novelty_user_at_k(&judgment.ranking, &judgment.known, 10);
        let (ild5, _) = ild_at_k(&judgment.ranking, ctx.cos_true, 5);
        let (ild10, _) = ild_at_k(&judgment.ranking, ctx.cos_true, 10);

        let per_user = [
            (MetricId::Mae, mae),
            (MetricId::R2, r2),
            (MetricId::Map, rank.map),
            (MetricId::Mrr, rank.mrr),
            (MetricId::P5, rank.p5),
            (MetricId::P10, rank.p10),
            (MetricId::R5, rank.r5),
            (MetricId::R10, rank.r10),
            (MetricId::Ndcg10, rank.ndcg10),
            (MetricId::Ndcg100, rank.ndcg100),
            (MetricId::Ndcg, rank.ndcg),
            (MetricId::NovT5, novt5),
            (MetricId::NovT10, novt10),
            (MetricId::NovU5, novu5),
            (MetricId::NovU10, novu10),
            (MetricId::Ild5, ild5),
            (MetricId::Ild10, ild10),
        ];
        for (metric, value) in per_user {
            sums[metric.index()].add(value);
        }
    }

    let n = data.users.len() as f64;
    let mut values = [0.0; 18];
    for m in MetricId::ALL {
        values[m.index()] = match m {
            MetricId::Auc => {
                if auc_n > 0 {
                    auc_sum.value() / auc_n as f64
                } else {
                    0.0
                }
            }
            _ => sums[m.index()].value() / n,
        };
    }

    Ok(OfflineReport {
        variant_id: variant.id(),
        values,
        n_users: data.users.len(),
        auc_skipped,
    })
}
