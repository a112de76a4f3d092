//! Recommendation pipelines: a base similarity model, history aggregation,
//! and optional temporal-novelty / MMR diversity re-ranking. Also owns the
//! variant grid enumeration.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::cbsim::SimTable;
use crate::corpus::{ItemId, UserId};
use crate::error::CoreError;
use crate::math;
use crate::metrics::{novelty_t, whole_days};

/// Base item-to-item model of one variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum BaseKind {
    W2v { dim: u32, window: u32 },
    D2v { dim: u32, window: u32 },
    Cosine { allow_self: bool },
}

impl BaseKind {
    pub fn id(&self) -> String {
        match self {
            BaseKind::W2v { dim, window } => format!("w2v_e{dim}_w{window}"),
            BaseKind::D2v { dim, window } => format!("d2v_e{dim}_w{window}"),
            BaseKind::Cosine { allow_self: true } => String::from("cos_strue"),
            BaseKind::Cosine { allow_self: false } => String::from("cos_sfalse"),
        }
    }

    /// Algorithm family tag used by the candidate-selection diversity pass.
    pub fn family(&self) -> &'static str {
        match self {
            BaseKind::W2v { .. } => "w2v",
            BaseKind::D2v { .. } => "d2v",
            BaseKind::Cosine { .. } => "cos",
        }
    }
}

/// How the per-visited-item score maps are combined into one user map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum HistoryStrategy {
    Mean,
    Max,
    Last,
    LastK(u32),
    TemporalK(u32),
    TemporalFull,
}

impl HistoryStrategy {
    pub fn id(&self) -> String {
        match self {
            HistoryStrategy::Mean => String::from("mean"),
            HistoryStrategy::Max => String::from("max"),
            HistoryStrategy::Last => String::from("last"),
            HistoryStrategy::LastK(k) => format!("last{k}"),
            HistoryStrategy::TemporalK(k) => format!("temporal{k}"),
            HistoryStrategy::TemporalFull => String::from("temporal_full"),
        }
    }
}

/// One cell of the evaluation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantConfig {
    pub base: BaseKind,
    pub history: HistoryStrategy,
    pub novelty_enh: bool,
    pub diversity_enh: bool,
    pub lambda_nov: f64,
    pub lambda_div: f64,
}

impl VariantConfig {
    /// Stable identifier, e.g. `w2v_e32_w5.temporal_full.nov0.div1`.
    pub fn id(&self) -> String {
        format!(
            "{}.{}.nov{}.div{}",
            self.base.id(),
            self.history.id(),
            u8::from(self.novelty_enh),
            u8::from(self.diversity_enh)
        )
    }
}

/// Grid axes; the defaults reproduce the full 800-variant grid:
/// (9 w2v + 9 d2v + 2 cosine) bases x 10 history strategies x 2 x 2 flags.
#[derive(Debug, Clone, PartialEq)]
pub struct GridAxes {
    pub dims: Vec<u32>,
    pub windows: Vec<u32>,
    pub history_ks: Vec<u32>,
    pub include_w2v: bool,
    pub include_d2v: bool,
    pub include_cosine: bool,
    pub lambda_nov: f64,
    pub lambda_div: f64,
}

impl Default for GridAxes {
    fn default() -> Self {
        GridAxes {
            dims: vec![32, 64, 128],
            windows: vec![1, 3, 5],
            history_ks: vec![3, 5, 10],
            include_w2v: true,
            include_d2v: true,
            include_cosine: true,
            lambda_nov: 0.8,
            lambda_div: 0.8,
        }
    }
}

impl GridAxes {
    pub fn bases(&self) -> Vec<BaseKind> {
        let mut out = Vec::new();
        if self.include_w2v {
            for &dim in &self.dims {
                for &window in &self.windows {
                    out.push(BaseKind::W2v { dim, window });
                }
            }
        }
        if self.include_d2v {
            for &dim in &self.dims {
                for &window in &self.windows {
                    out.push(BaseKind::D2v { dim, window });
                }
            }
        }
        if self.include_cosine {
            out.push(BaseKind::Cosine { allow_self: false });
            out.push(BaseKind::Cosine { allow_self: true });
        }
        out
    }

    pub fn history_strategies(&self) -> Vec<HistoryStrategy> {
        let mut out = vec![HistoryStrategy::Mean, HistoryStrategy::Max, HistoryStrategy::Last];
        for &k in &self.history_ks {
            out.push(HistoryStrategy::LastK(k));
        }
        for &k in &self.history_ks {
            out.push(HistoryStrategy::TemporalK(k));
        }
        out.push(HistoryStrategy::TemporalFull);
        out
    }
}

/// Enumerate the grid in a stable order (bases, then history, then flags).
pub fn enumerate_variants(axes: &GridAxes) -> Vec<VariantConfig> {
    let mut out = Vec::new();
    for base in axes.bases() {
        for history in axes.history_strategies() {
            for novelty_enh in [false, true] {
                for diversity_enh in [false, true] {
                    out.push(VariantConfig {
                        base,
                        history,
                        novelty_enh,
                        diversity_enh,
                        lambda_nov: axes.lambda_nov,
                        lambda_div: axes.lambda_div,
                    });
                }
            }
        }
    }
    out
}

/// One ranked entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecEntry {
    pub item: ItemId,
    pub score: f64,
}

/// Ranked recommendation list: scores non-increasing, items unique, score
/// ties broken by ascending item id.
#[derive(Debug, Clone, PartialEq)]
pub struct RecList {
    pub entries: Vec<RecEntry>,
    pub user: UserId,
    pub as_of: i64,
}

impl RecList {
    pub fn items(&self) -> Vec<ItemId> {
        self.entries.iter().map(|e| e.item).collect()
    }
}

/// Similarity of one query item to the whole catalog. An out-of-catalog
/// query yields an all-zero map plus a flag instead of an error.
pub fn score_from_item(sim: &SimTable, query: ItemId) -> (Vec<f64>, bool) {
    if (query as usize) < sim.n_items() {
        (sim.row(query).to_vec(), false)
    } else {
        (vec![0.0; sim.n_items()], true)
    }
}

/// Per-visit weights of a history strategy, aligned with the profile order
/// (oldest first). `Max` carries no weights.
#[derive(Debug, Clone, PartialEq)]
pub enum HistoryWeights {
    Weighted(Vec<f64>),
    Max,
}

pub fn history_weights(
    strategy: HistoryStrategy,
    profile: &[(ItemId, i64)],
    as_of: i64,
) -> Result<HistoryWeights, CoreError> {
    let n = profile.len();
    if n == 0 {
        return Err(CoreError::EmptyProfile);
    }
    let weights = match strategy {
        HistoryStrategy::Mean => vec![1.0 / n as f64; n],
        HistoryStrategy::Max => return Ok(HistoryWeights::Max),
        HistoryStrategy::Last => {
            let mut w = vec![0.0; n];
            w[n - 1] = 1.0;
            w
        }
        HistoryStrategy::LastK(k) => {
            // rank 0 = most recent; w = 1 - rank/k for the k newest visits.
            let k = k as usize;
            let mut w = vec![0.0; n];
            for rank in 0..k.min(n) {
                w[n - 1 - rank] = 1.0 - rank as f64 / k as f64;
            }
            w
        }
        HistoryStrategy::TemporalK(k) => {
            let k = k as usize;
            let mut w = vec![0.0; n];
            for rank in 0..k.min(n) {
                let idx = n - 1 - rank;
                w[idx] = novelty_t(whole_days(profile[idx].1, as_of));
            }
            w
        }
        HistoryStrategy::TemporalFull => profile
            .iter()
            .map(|&(_, t)| novelty_t(whole_days(t, as_of)))
            .collect(),
    };
    Ok(HistoryWeights::Weighted(weights))
}

/// Combine per-visited-item similarity rows into one score map over the
/// catalog: a normalized weighted average, or the per-candidate maximum for
/// the `Max` strategy. Repeated visits each contribute under their own
/// weight.
pub fn aggregate_history(
    sim: &SimTable,
    profile: &[(ItemId, i64)],
    strategy: HistoryStrategy,
    as_of: i64,
) -> Result<Vec<f64>, CoreError> {
    let n_items = sim.n_items();
    match history_weights(strategy, profile, as_of)? {
        HistoryWeights::Max => {
            let mut scores = vec![f64::NEG_INFINITY; n_items];
            for &(item, _) in profile {
                let (row, _) = score_from_item(sim, item);
                for (s, r) in scores.iter_mut().zip(row.iter()) {
                    if *r > *s {
                        *s = *r;
                    }
                }
            }
            Ok(scores)
        }
        HistoryWeights::Weighted(weights) => {
            let total: f64 = weights.iter().sum();
            if total <= 0.0 {
                return Err(CoreError::EmptyProfile);
            }
            let mut scores = vec![0.0; n_items];
            for (&(item, _), &w) in profile.iter().zip(weights.iter()) {
                if w == 0.0 {
                    continue;
                }
                let (row, _) = score_from_item(sim, item);
                for (s, r) in scores.iter_mut().zip(row.iter()) {
                    *s += w * r;
                }
            }
            for s in scores.iter_mut() {
                *s /= total;
            }
            Ok(scores)
        }
    }
}

/// Rank a score map: descending score, ties by ascending item id.
pub fn rank_scores(scores: &[f64], user: UserId, as_of: i64) -> RecList {
    let mut entries: Vec<RecEntry> = scores
        .iter()
        .enumerate()
        .map(|(i, &score)| RecEntry { item: i as ItemId, score })
        .collect();
    entries.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.item.cmp(&b.item)));
    RecList { entries, user, as_of }
}

/// Re-rank by a weighted average of relevance and temporal novelty:
/// r' = lambda * r + (1 - lambda) * novelty_t(item). Scores are replaced by
/// r'; callers normalize relevance to [0,1] first so the two terms are
/// commensurate.
pub fn rerank_temporal_novelty(
    list: RecList,
    last_update: &[i64],
    as_of: i64,
    lambda: f64,
) -> RecList {
    let mut entries: Vec<RecEntry> = list
        .entries
        .into_iter()
        .map(|e| {
            let nov = novelty_t(whole_days(last_update[e.item as usize], as_of));
            RecEntry { item: e.item, score: lambda * e.score + (1.0 - lambda) * nov }
        })
        .collect();
    entries.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.item.cmp(&b.item)));
    RecList { entries, user: list.user, as_of: list.as_of }
}

/// Maximal-marginal-relevance re-ranking.
///
/// Greedily selects up to `k` items from the head of the list (at most
/// `cap` candidates) maximizing
/// `lambda * r - (1 - lambda) * max_{s in selected} sim(item, s)`,
/// with the first pick being the top-relevance entry. Unselected candidates
/// and the beyond-cap tail follow in their original order; selected entries
/// carry their greedy margin as score and trailing scores are clamped so the
/// list stays non-increasing.
pub fn rerank_mmr(
    list: RecList,
    sim: &SimTable,
    lambda: f64,
    k: usize,
    cap: usize,
) -> Result<RecList, CoreError> {
    if k == 0 {
        return Err(CoreError::InvalidArgument("mmr k must be positive".into()));
    }
    if list.entries.is_empty() {
        return Ok(list);
    }
    let pool_len = list.entries.len().min(cap.max(1));
    let take = k.min(pool_len);

    let mut remaining: Vec<RecEntry> = list.entries[..pool_len].to_vec();
    let mut best_sim = vec![0.0f64; pool_len];
    let mut selected: Vec<RecEntry> = Vec::with_capacity(take);

    for _ in 0..take {
        let mut best_idx = 0;
        let mut best_margin = f64::NEG_INFINITY;
        for (i, e) in remaining.iter().enumerate() {
            let margin = lambda * e.score - (1.0 - lambda) * best_sim[i];
            if margin > best_margin {
                best_margin = margin;
                best_idx = i;
            }
        }
        let picked = remaining.remove(best_idx);
        best_sim.remove(best_idx);
        for (i, e) in remaining.iter().enumerate() {
            let s = sim.get(e.item, picked.item);
            if s > best_sim[i] {
                best_sim[i] = s;
            }
        }
        selected.push(RecEntry { item: picked.item, score: best_margin });
    }

    let mut entries = selected;
    let mut floor = entries.last().map_or(f64::INFINITY, |e| e.score);
    for e in remaining.into_iter().chain(list.entries[pool_len..].iter().copied()) {
        let score = e.score.min(floor);
        floor = score;
        entries.push(RecEntry { item: e.item, score });
    }
    Ok(RecList { entries, user: list.user, as_of: list.as_of })
}

/// Everything a variant needs at recommendation time: one similarity table
/// per base, the content-based table with self-similarity (MMR penalty and
/// ILD), and the per-item last-update timestamps (temporal novelty).
pub struct RecContext<'a> {
    pub sims: &'a BTreeMap<BaseKind, SimTable>,
    pub cos_true: &'a SimTable,
    pub last_update: &'a [i64],
    /// MMR re-ranks only this many head candidates; the tail is untouched.
    pub mmr_cap: usize,
}

impl<'a> RecContext<'a> {
    pub fn base_sim(&self, base: &BaseKind) -> Result<&'a SimTable, CoreError> {
        self.sims
            .get(base)
            .ok_or_else(|| CoreError::InvalidArgument(format!("missing base model {}", base.id())))
    }
}

/// Full pipeline: aggregate history under the base model, optionally
/// re-rank for temporal novelty then for diversity, truncate to `k`.
/// When any enhancement is active, scores are min-max normalized first.
pub fn recommend(
    variant: &VariantConfig,
    profile: &[(ItemId, i64)],
    user: UserId,
    as_of: i64,
    k: usize,
    ctx: &RecContext<'_>,
) -> Result<RecList, CoreError> {
    let sim = ctx.base_sim(&variant.base)?;
    let scores = aggregate_history(sim, profile, variant.history, as_of)?;
    let mut list = rank_scores(&scores, user, as_of);
    if variant.novelty_enh || variant.diversity_enh {
        let raw: Vec<f64> = list.entries.iter().map(|e| e.score).collect();
        for (e, s) in list.entries.iter_mut().zip(math::minmax_normalize(&raw)) {
            e.score = s;
        }
    }
    if variant.novelty_enh {
        list = rerank_temporal_novelty(list, ctx.last_update, as_of, variant.lambda_nov);
    }
    if variant.diversity_enh {
        list = rerank_mmr(list, ctx.cos_true, variant.lambda_div, k, ctx.mmr_cap)?;
    }
    list.entries.truncate(k);
    Ok(list)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cbsim::{vectorize_attributes, SimTable};
    use crate::corpus::{Catalog, NominalAttr};
    use crate::SECS_PER_DAY;

    #[test]
    fn default_grid_has_800_variants() {
        let variants = enumerate_variants(&GridAxes::default());
        assert_eq!(variants.len(), 800);
        // 20 bases, 10 strategies, unique ids.
        let ids: alloc::collections::BTreeSet<String> =
            variants.iter().map(VariantConfig::id).collect();
        assert_eq!(ids.len(), 800);
        assert_eq!(GridAxes::default().bases().len(), 20);
        assert_eq!(GridAxes::default().history_strategies().len(), 10);
    }

    #[test]
    fn cosine_only_grid_has_80_variants() {
        let axes = GridAxes { include_w2v: false, include_d2v: false, ..GridAxes::default() };
        assert_eq!(enumerate_variants(&axes).len(), 80);
    }

    #[test]
    fn variant_id_format() {
        let v = VariantConfig {
            base: BaseKind::W2v { dim: 32, window: 5 },
            history: HistoryStrategy::TemporalFull,
            novelty_enh: false,
            diversity_enh: true,
            lambda_nov: 0.8,
            lambda_div: 0.8,
        };
        assert_eq!(v.id(), "w2v_e32_w5.temporal_full.nov0.div1");
    }

    fn day(n: i64) -> i64 {
        n * SECS_PER_DAY
    }

    #[test]
    fn last_k_weights_fixture() {
        // Profile oldest-first; ranks count from the newest visit.
        let profile = vec![(0u32, day(1)), (1, day(2)), (2, day(3)), (3, day(4))];
        let w = history_weights(HistoryStrategy::LastK(3), &profile, day(5)).unwrap();
        match w {
            HistoryWeights::Weighted(w) => {
                assert_eq!(w[0], 0.0);
                assert!((w[3] - 1.0).abs() < 1e-12);
                assert!((w[2] - 2.0 / 3.0).abs() < 1e-12);
                assert!((w[1] - 1.0 / 3.0).abs() < 1e-12);
            }
            _ => panic!("expected weights"),
        }
    }

    #[test]
    fn temporal_weight_thirty_days() {
        let profile = vec![(0u32, day(0))];
        let w = history_weights(HistoryStrategy::TemporalFull, &profile, day(30)).unwrap();
        match w {
            HistoryWeights::Weighted(w) => assert!((w[0] - 0.2272).abs() < 1e-4),
            _ => panic!(),
        }
    }

    #[test]
    fn last_weight_is_impulse() {
        let profile = vec![(0u32, day(1)), (1, day(2)), (2, day(3))];
        match history_weights(HistoryStrategy::Last, &profile, day(4)).unwrap() {
            HistoryWeights::Weighted(w) => assert_eq!(w, vec![0.0, 0.0, 1.0]),
            _ => panic!(),
        }
    }

    #[test]
    fn empty_profile_errors() {
        assert_eq!(
            history_weights(HistoryStrategy::Mean, &[], 0).unwrap_err(),
            CoreError::EmptyProfile
        );
    }

    /// Catalog of n one-hot items grouped into two categories.
    fn two_group_cb() -> SimTable {
        let catalog = Catalog {
            n_items: 3,
            nominal: vec![NominalAttr {
                name: String::from("g"),
                categories: vec![String::from("a"), String::from("b")],
                values: vec![Some(0), Some(0), Some(1)],
            }],
            numeric: Vec::new(),
            tokens: vec![Vec::new(); 3],
            last_update: vec![0; 3],
        };
        SimTable::from_attributes(&vectorize_attributes(&catalog), true)
    }

    #[test]
    fn aggregate_mean_and_max() {
        let sim = two_group_cb();
        // Items 0,1 identical; item 2 orthogonal.
        let profile = vec![(0u32, day(1)), (2, day(2))];
        let mean = aggregate_history(&sim, &profile, HistoryStrategy::Mean, day(3)).unwrap();
        // Candidate 1: (sim(0,1) + sim(2,1)) / 2 = (1 + 0) / 2.
        assert!((mean[1] - 0.5).abs() < 1e-12);
        let max = aggregate_history(&sim, &profile, HistoryStrategy::Max, day(3)).unwrap();
        assert!((max[1] - 1.0).abs() < 1e-12);
        assert!((max[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn aggregate_last3_weighted_mean_fixture() {
        // Hand fixture: sims newest-first (0.3, 0.6, 0.9), weights
        // (1, 2/3, 1/3) -> 0.5 after normalizing by 2.
        let weights = [1.0 / 3.0, 2.0 / 3.0, 1.0];
        let sims_oldest_first = vec![0.9, 0.6, 0.3];
        let total: f64 = weights.iter().sum();
        let score: f64 =
            weights.iter().zip(&sims_oldest_first).map(|(w, s)| w * s).sum::<f64>() / total;
        assert!((score - 0.5).abs() < 1e-12);
    }

    #[test]
    fn convex_combination_bound_for_weighted_strategies() {
        let sim = two_group_cb();
        let profile = vec![(0u32, day(1)), (1, day(2)), (2, day(3))];
        for strategy in [
            HistoryStrategy::Mean,
            HistoryStrategy::Last,
            HistoryStrategy::LastK(3),
            HistoryStrategy::TemporalK(5),
            HistoryStrategy::TemporalFull,
        ] {
            let agg = aggregate_history(&sim, &profile, strategy, day(4)).unwrap();
            for c in 0..3u32 {
                let per_visit: Vec<f64> =
                    profile.iter().map(|&(i, _)| sim.get(i, c)).collect();
                let lo = per_visit.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = per_visit.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                assert!(
                    agg[c as usize] >= lo - 1e-12 && agg[c as usize] <= hi + 1e-12,
                    "{strategy:?} candidate {c}: {} not in [{lo}, {hi}]",
                    agg[c as usize]
                );
            }
        }
    }

    #[test]
    fn rank_scores_breaks_ties_by_item() {
        let list = rank_scores(&[0.5, 0.9, 0.5], 1, 0);
        assert_eq!(list.items(), vec![1, 0, 2]);
    }

    #[test]
    fn novelty_rerank_lambda_one_is_identity() {
        let list = rank_scores(&[0.1, 0.9, 0.5], 1, day(10));
        let last_update = vec![day(9), day(1), day(5)];
        let out = rerank_temporal_novelty(list.clone(), &last_update, day(10), 1.0);
        assert_eq!(out.items(), list.items());
    }

    #[test]
    fn novelty_rerank_weighted_average_fixture() {
        // r = 0.5, 30-day-old item, lambda 0.8 -> 0.8*0.5 + 0.2*0.2272.
        let list = RecList {
            entries: vec![RecEntry { item: 0, score: 0.5 }],
            user: 0,
            as_of: day(30),
        };
        let out = rerank_temporal_novelty(list, &[day(0)], day(30), 0.8);
        assert!((out.entries[0].score - 0.44544).abs() < 1e-4);
    }

    #[test]
    fn novelty_rerank_prefers_fresher_on_equal_relevance() {
        let list = RecList {
            entries: vec![RecEntry { item: 0, score: 0.5 }, RecEntry { item: 1, score: 0.5 }],
            user: 0,
            as_of: day(100),
        };
        // Item 1 updated yesterday, item 0 long ago.
        let out = rerank_temporal_novelty(list, &[day(1), day(99)], day(100), 0.8);
        assert_eq!(out.items(), vec![1, 0]);
    }

    fn mmr_sim_fixture() -> SimTable {
        // sim(A,B)=1 (same group), sim(A,C)=sim(B,C)=0.
        two_group_cb()
    }

    #[test]
    fn mmr_prefers_diverse_runner_up() {
        let list = RecList {
            entries: vec![
                RecEntry { item: 0, score: 0.9 },  // A
                RecEntry { item: 1, score: 0.8 },  // B, identical to A
                RecEntry { item: 2, score: 0.75 }, // C, orthogonal
            ],
            user: 0,
            as_of: 0,
        };
        let out = rerank_mmr(list, &mmr_sim_fixture(), 0.8, 3, 200).unwrap();
        // Margins: B = 0.8*0.8 - 0.2*1 = 0.44 < C = 0.8*0.75 = 0.60.
        assert_eq!(out.items(), vec![0, 2, 1]);
        assert!(out.entries.windows(2).all(|w| w[0].score >= w[1].score));
    }

    #[test]
    fn mmr_lambda_one_is_identity() {
        let scores = vec![0.9, 0.2, 0.9];
        let list = rank_scores(&scores, 0, 0);
        let out = rerank_mmr(list.clone(), &mmr_sim_fixture(), 1.0, 3, 200).unwrap();
        assert_eq!(out.items(), list.items());
        for (a, b) in out.entries.iter().zip(list.entries.iter()) {
            assert!((a.score - b.score).abs() < 1e-12);
        }
    }

    #[test]
    fn mmr_zero_similarity_keeps_relevance_order() {
        let catalog = Catalog {
            n_items: 4,
            nominal: vec![NominalAttr {
                name: String::from("g"),
                categories: (0..4).map(|i| alloc::format!("c{i}")).collect(),
                values: (0..4).map(|i| Some(i as u32)).collect(),
            }],
            numeric: Vec::new(),
            tokens: vec![Vec::new(); 4],
            last_update: vec![0; 4],
        };
        let sim = SimTable::from_attributes(&vectorize_attributes(&catalog), true);
        let list = rank_scores(&[0.4, 0.9, 0.1, 0.6], 0, 0);
        let out = rerank_mmr(list.clone(), &sim, 0.5, 4, 200).unwrap();
        assert_eq!(out.items(), list.items());
    }

    #[test]
    fn mmr_is_a_permutation_and_rejects_k_zero() {
        let list = rank_scores(&[0.4, 0.9, 0.1], 0, 0);
        assert!(rerank_mmr(list.clone(), &mmr_sim_fixture(), 0.5, 0, 200).is_err());
        let out = rerank_mmr(list.clone(), &mmr_sim_fixture(), 0.5, 2, 200).unwrap();
        let mut a = out.items();
        let mut b = list.items();
        a.sort_unstable();
        b.sort_unstable();
        assert_eq!(a, b);
    }

    #[test]
    fn recommend_composes_and_truncates() {
        let sim = two_group_cb();
        let mut sims = BTreeMap::new();
        sims.insert(BaseKind::Cosine { allow_self: true }, sim.clone());
        let last_update = vec![day(1), day(1), day(1)];
        let ctx = RecContext { sims: &sims, cos_true: &sim, last_update: &last_update, mmr_cap: 200 };
        let variant = VariantConfig {
            base: BaseKind::Cosine { allow_self: true },
            history: HistoryStrategy::Mean,
            novelty_enh: false,
            diversity_enh: false,
            lambda_nov: 0.8,
            lambda_div: 0.8,
        };
        let profile = vec![(0u32, day(0))];
        // k larger than the catalog returns the whole catalog.
        let list = recommend(&variant, &profile, 7, day(2), 10, &ctx).unwrap();
        assert_eq!(list.entries.len(), 3);
        assert_eq!(list.items()[0], 0); // self-similarity 1.0 on top
        let top1 = recommend(&variant, &profile, 7, day(2), 1, &ctx).unwrap();
        assert_eq!(top1.entries.len(), 1);
    }

    #[test]
    fn recommend_with_both_enhancements_matches_hand_composition() {
        let sim = two_group_cb();
        let mut sims = BTreeMap::new();
        sims.insert(BaseKind::Cosine { allow_self: true }, sim.clone());
        let last_update = vec![day(25), day(1), day(28)];
        let ctx = RecContext { sims: &sims, cos_true: &sim, last_update: &last_update, mmr_cap: 200 };
        let variant = VariantConfig {
            base: BaseKind::Cosine { allow_self: true },
            history: HistoryStrategy::Mean,
            novelty_enh: true,
            diversity_enh: true,
            lambda_nov: 0.8,
            lambda_div: 0.8,
        };
        let profile = vec![(0u32, day(2)), (2, day(3))];
        let got = recommend(&variant, &profile, 7, day(30), 3, &ctx).unwrap();

        // Hand composition: aggregate -> normalize -> novelty -> mmr.
        let agg = aggregate_history(&sim, &profile, HistoryStrategy::Mean, day(30)).unwrap();
        let mut list = rank_scores(&agg, 7, day(30));
        let raw: Vec<f64> = list.entries.iter().map(|e| e.score).collect();
        for (e, s) in list.entries.iter_mut().zip(math::minmax_normalize(&raw)) {
            e.score = s;
        }
        let list = rerank_temporal_novelty(list, &last_update, day(30), 0.8);
        let want = rerank_mmr(list, &sim, 0.8, 3, 200).unwrap();
        assert_eq!(got.entries, want.entries);
    }
}
