//! Online A/B accounting: impression/click/visit joining, last-impression
//! attribution, user-seniority segmentation, and offline-to-online
//! correlation.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use crate::corpus::{Event, EventKind, ItemId, UserId};
use crate::error::CoreError;
use crate::eval::{MetricId, OfflineReport};
use crate::stats;

/// User-seniority segment by prior distinct visited items.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Segment {
    S1_2,
    S3_5,
    S6_15,
    S16Plus,
}

impl Segment {
    pub const ALL: [Segment; 4] = [Segment::S1_2, Segment::S3_5, Segment::S6_15, Segment::S16Plus];

    pub fn name(self) -> &'static str {
        match self {
            Segment::S1_2 => "s1_2",
            Segment::S3_5 => "s3_5",
            Segment::S6_15 => "s6_15",
            Segment::S16Plus => "s16_plus",
        }
    }

    pub fn parse(s: &str) -> Option<Segment> {
        Segment::ALL.iter().copied().find(|seg| seg.name() == s)
    }

    /// `None` for users without any prior visit; those impressions are
    /// excluded from the analysis.
    pub fn of_profile_size(n: usize) -> Option<Segment> {
        match n {
            0 => None,
            1..=2 => Some(Segment::S1_2),
            3..=5 => Some(Segment::S3_5),
            6..=15 => Some(Segment::S6_15),
            _ => Some(Segment::S16Plus),
        }
    }
}

/// Stable arm assignment: numeric ids take `uid % n_arms`, other ids hash
/// (FNV-1a, 64-bit) before the modulo.
pub fn assign_bucket(user_id: &str, n_arms: u32) -> u32 {
    debug_assert!(n_arms >= 1);
    if let Ok(numeric) = user_id.parse::<u64>() {
        return (numeric % u64::from(n_arms)) as u32;
    }
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in user_id.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    (h % u64::from(n_arms)) as u32
}

/// One recommendation slot shown to a user.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Impression {
    pub user: UserId,
    pub arm: u16,
    pub item: ItemId,
    pub t: i64,
}

/// One click on a recommendation slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClickEvent {
    pub user: UserId,
    pub arm: u16,
    pub item: ItemId,
    pub t: i64,
}

/// When the seniority of an impression is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeniorityMode {
    /// Profile size at the impression timestamp (default).
    PerImpression,
    /// Profile size at the user's first impression, fixed for the period.
    PerUserAtStart,
}

/// Raw counts for one (arm, segment) cell; `segment == None` is the
/// all-segments row (users with at least one prior visit).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OnlineRow {
    pub arm: u16,
    pub segment: Option<Segment>,
    pub impressions: u64,
    pub clicks: u64,
    pub attributed_visits: u64,
}

impl OnlineRow {
    pub fn ctr(&self) -> f64 {
        if self.impressions == 0 {
            0.0
        } else {
            self.clicks as f64 / self.impressions as f64
        }
    }

    pub fn vrr(&self) -> f64 {
        if self.impressions == 0 {
            0.0
        } else {
            self.attributed_visits as f64 / self.impressions as f64
        }
    }
}

/// Full accounting output.
#[derive(Debug, Clone)]
pub struct OnlineAccounting {
    /// One row per (arm, segment) plus one all-segments row per arm, ordered
    /// by (arm, segment).
    pub rows: Vec<OnlineRow>,
    /// Clicks that matched no impression.
    pub unmatched_clicks: u64,
    /// Impressions excluded because the user had no prior visits.
    pub excluded_impressions: u64,
}

impl OnlineAccounting {
    pub fn row(&self, arm: u16, segment: Option<Segment>) -> Option<&OnlineRow> {
        self.rows.iter().find(|r| r.arm == arm && r.segment == segment)
    }
}

/// Join impressions with clicks and visits.
///
/// Clicks join on (user, item, arm) with click time at or after the
/// impression; each click credits the latest such impression not yet
/// click-credited, and each impression is click-credited at most once.
///
/// Visits (organic detail views) join on (user, item) only: a visit credits
/// the latest impression of that item strictly before the visit (within
/// `horizon_secs` when set), unless that impression was already
/// visit-credited.
///
/// Segmentation counts prior distinct visited items from the `visits` log.
pub fn evaluate_online(
    impressions: &[Impression],
    clicks: &[ClickEvent],
    visits: &[Event],
    n_arms: u16,
    horizon_secs: Option<i64>,
    mode: SeniorityMode,
) -> OnlineAccounting {
    // Group indices per user for a single pass per user.
    let mut imp_by_user: BTreeMap<UserId, Vec<usize>> = BTreeMap::new();
    for (i, imp) in impressions.iter().enumerate() {
        imp_by_user.entry(imp.user).or_default().push(i);
    }
    let mut clicks_by_user: BTreeMap<UserId, Vec<usize>> = BTreeMap::new();
    for (i, c) in clicks.iter().enumerate() {
        clicks_by_user.entry(c.user).or_default().push(i);
    }
    let mut visits_by_user: BTreeMap<UserId, Vec<(ItemId, i64)>> = BTreeMap::new();
    for e in visits {
        if e.kind == EventKind::DetailView {
            visits_by_user.entry(e.user).or_default().push((e.item, e.t));
        }
    }

    let mut segment_of_imp: Vec<Option<Segment>> = alloc::vec![None; impressions.len()];
    let mut click_credited: Vec<bool> = alloc::vec![false; impressions.len()];
    let mut visit_credited: Vec<bool> = alloc::vec![false; impressions.len()];
    let mut unmatched_clicks = 0u64;
    let mut excluded = 0u64;

    for (&user, imp_idx) in &imp_by_user {
        let user_visits = visits_by_user.get(&user).map(Vec::as_slice).unwrap_or(&[]);
        // Visits are time-sorted (the interaction log contract); impressions
        // are processed in time order.
        let mut order: Vec<usize> = imp_idx.clone();
        order.sort_by_key(|&i| (impressions[i].t, i));

        // Seniority per impression: sweep visits strictly before each
        // impression, accumulating the distinct item set.
        let mut seen: BTreeSet<ItemId> = BTreeSet::new();
        let mut vcursor = 0usize;
        let mut start_segment: Option<Option<Segment>> = None;
        for &i in &order {
            let imp = &impressions[i];
            while vcursor < user_visits.len() && user_visits[vcursor].1 < imp.t {
                seen.insert(user_visits[vcursor].0);
                vcursor += 1;
            }
            let seg = Segment::of_profile_size(seen.len());
            segment_of_imp[i] = match mode {
                SeniorityMode::PerImpression => seg,
                SeniorityMode::PerUserAtStart => *start_segment.get_or_insert(seg),
            };
            if segment_of_imp[i].is_none() {
                excluded += 1;
            }
        }

        // Click attribution: latest not-yet-credited impression of the same
        // (item, arm) at or before the click.
        if let Some(click_idx) = clicks_by_user.get(&user) {
            let mut corder: Vec<usize> = click_idx.clone();
            corder.sort_by_key(|&i| (clicks[i].t, i));
            for &ci in &corder {
                let c = &clicks[ci];
                let target = order
                    .iter()
                    .rev()
                    .copied()
                    .find(|&ii| {
                        let imp = &impressions[ii];
                        imp.item == c.item
                            && imp.arm == c.arm
                            && imp.t <= c.t
                            && !click_credited[ii]
                    });
                match target {
                    Some(ii) => click_credited[ii] = true,
                    None => unmatched_clicks += 1,
                }
            }
        }

        // Visit attribution: the latest impression of the item strictly
        // before the visit (within the horizon); credited at most once.
        for &(item, vt) in user_visits {
            let designated = order
                .iter()
                .rev()
                .copied()
                .find(|&ii| {
                    let imp = &impressions[ii];
                    imp.item == item
                        && imp.t < vt
                        && horizon_secs.is_none_or(|h| vt - imp.t <= h)
                });
            if let Some(ii) = designated {
                if !visit_credited[ii] {
                    visit_credited[ii] = true;
                }
            }
        }
    }

    // Aggregate rows.
    let mut rows = Vec::new();
    for arm in 0..n_arms {
        for segment in Segment::ALL.iter().copied().map(Some).chain([None]) {
            rows.push(OnlineRow { arm, segment, impressions: 0, clicks: 0, attributed_visits: 0 });
        }
    }
    let row_index = |arm: u16, seg_slot: usize| arm as usize * 5 + seg_slot;
    for (i, imp) in impressions.iter().enumerate() {
        let Some(seg) = segment_of_imp[i] else {
            continue;
        };
        if imp.arm >= n_arms {
            continue;
        }
        let slot = Segment::ALL.iter().position(|&s| s == seg).unwrap();
        for idx in [row_index(imp.arm, slot), row_index(imp.arm, 4)] {
            rows[idx].impressions += 1;
            if click_credited[i] {
                rows[idx].clicks += 1;
            }
            if visit_credited[i] {
                rows[idx].attributed_visits += 1;
            }
        }
    }

    OnlineAccounting { rows, unmatched_clicks, excluded_impressions: excluded }
}

/// Spearman correlations between each offline metric and each online metric
/// (CTR, VRR) across the A/B arms, for one segment slice. Degenerate columns
/// yield 0 with a flag.
#[derive(Debug, Clone)]
pub struct OnlineCorrelation {
    pub segment: Option<Segment>,
    /// `[metric][0]` = CTR, `[metric][1]` = VRR.
    pub values: [[f64; 2]; 18],
    pub degenerate: [[bool; 2]; 18],
}

pub fn offline_online_correlation(
    offline: &[&OfflineReport],
    accounting: &OnlineAccounting,
    segment: Option<Segment>,
) -> Result<OnlineCorrelation, CoreError> {
    let n_arms = offline.len();
    if n_arms < 3 {
        return Err(CoreError::InvalidArgument("need at least 3 arms".into()));
    }
    let mut ctr = Vec::with_capacity(n_arms);
    let mut vrr = Vec::with_capacity(n_arms);
    for arm in 0..n_arms {
        let row = accounting
            .row(arm as u16, segment)
            .ok_or_else(|| CoreError::InvalidArgument("missing online row".into()))?;
        ctr.push(row.ctr());
        vrr.push(row.vrr());
    }
    let mut values = [[0.0; 2]; 18];
    let mut degenerate = [[false; 2]; 18];
    for m in MetricId::ALL {
        let xs: Vec<f64> = offline.iter().map(|r| r.get(m)).collect();
        for (j, ys) in [&ctr, &vrr].into_iter().enumerate() {
            match stats::spearman(&xs, ys) {
                Some(c) => values[m.index()][j] = c,
                None => degenerate[m.index()][j] = true,
            }
        }
    }
    Ok(OnlineCorrelation { segment, values, degenerate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn bucket_assignment() {
        assert_eq!(assign_bucket("25", 12), 1);
        assert_eq!(assign_bucket("12", 12), 0);
        let a = assign_bucket("visitor-xyz", 12);
        assert_eq!(a, assign_bucket("visitor-xyz", 12));
        assert!(a < 12);
    }

    #[test]
    fn segment_bounds() {
        assert_eq!(Segment::of_profile_size(0), None);
        assert_eq!(Segment::of_profile_size(1), Some(Segment::S1_2));
        assert_eq!(Segment::of_profile_size(2), Some(Segment::S1_2));
        assert_eq!(Segment::of_profile_size(3), Some(Segment::S3_5));
        assert_eq!(Segment::of_profile_size(5), Some(Segment::S3_5));
        assert_eq!(Segment::of_profile_size(6), Some(Segment::S6_15));
        assert_eq!(Segment::of_profile_size(15), Some(Segment::S6_15));
        assert_eq!(Segment::of_profile_size(16), Some(Segment::S16Plus));
        assert_eq!(Segment::of_profile_size(400), Some(Segment::S16Plus));
    }

    fn visit(user: u32, item: u32, t: i64) -> Event {
        Event { user, item, t, kind: EventKind::DetailView }
    }

    #[test]
    fn twelve_event_fixture_hand_counts() {
        // User 1 (arm 0): 2 prior visits -> s1_2. Three impressions; one
        // clicked; item 7 impressed twice (t=20, t=30) then visited at t=40
        // -> the t=30 impression gets the visit credit.
        // User 2 (arm 1): no prior visits -> excluded.
        let visits = vec![
            visit(1, 100, 1),
            visit(1, 101, 2),
            visit(1, 7, 40),
            visit(2, 8, 35),
        ];
        let impressions = vec![
            Impression { user: 1, arm: 0, item: 7, t: 20 },
            Impression { user: 1, arm: 0, item: 7, t: 30 },
            Impression { user: 1, arm: 0, item: 9, t: 30 },
            Impression { user: 2, arm: 1, item: 8, t: 30 },
        ];
        let clicks = vec![
            ClickEvent { user: 1, arm: 0, item: 9, t: 31 },
            // Click before any impression of the item: dropped.
            ClickEvent { user: 1, arm: 0, item: 7, t: 10 },
        ];
        let acc = evaluate_online(
            &impressions,
            &clicks,
            &visits,
            2,
            None,
            SeniorityMode::PerImpression,
        );
        assert_eq!(acc.excluded_impressions, 1);
        assert_eq!(acc.unmatched_clicks, 1);

        let row = acc.row(0, Some(Segment::S1_2)).unwrap();
        assert_eq!(row.impressions, 3);
        assert_eq!(row.clicks, 1);
        assert_eq!(row.attributed_visits, 1);
        assert!((row.ctr() - 1.0 / 3.0).abs() < 1e-12);
        assert!((row.vrr() - 1.0 / 3.0).abs() < 1e-12);

        // The all-segments row matches (one segment only here).
        let all = acc.row(0, None).unwrap();
        assert_eq!(all.impressions, 3);

        // Excluded arm-1 impression appears nowhere.
        let arm1_all = acc.row(1, None).unwrap();
        assert_eq!(arm1_all.impressions, 0);
    }

    #[test]
    fn last_impression_attribution() {
        // Impressions at t1 < t2, visit at t3: t2 credited, t1 not.
        let visits = vec![visit(1, 5, 1), visit(1, 7, 100)];
        let impressions = vec![
            Impression { user: 1, arm: 0, item: 7, t: 10 },
            Impression { user: 1, arm: 0, item: 7, t: 50 },
        ];
        let acc =
            evaluate_online(&impressions, &[], &visits, 1, None, SeniorityMode::PerImpression);
        let row = acc.row(0, Some(Segment::S1_2)).unwrap();
        assert_eq!(row.attributed_visits, 1);
        assert_eq!(row.impressions, 2);
        assert!((row.vrr() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn visit_without_prior_impression_is_uncredited() {
        let visits = vec![visit(1, 5, 1), visit(1, 7, 9)];
        let impressions = vec![Impression { user: 1, arm: 0, item: 7, t: 10 }];
        let acc =
            evaluate_online(&impressions, &[], &visits, 1, None, SeniorityMode::PerImpression);
        assert_eq!(acc.row(0, None).unwrap().attributed_visits, 0);
    }

    #[test]
    fn horizon_limits_attribution() {
        let visits = vec![visit(1, 5, 1), visit(1, 7, 1000)];
        let impressions = vec![Impression { user: 1, arm: 0, item: 7, t: 10 }];
        let acc = evaluate_online(
            &impressions,
            &[],
            &visits,
            1,
            Some(100),
            SeniorityMode::PerImpression,
        );
        assert_eq!(acc.row(0, None).unwrap().attributed_visits, 0);
    }

    #[test]
    fn ctr_ratio_and_conservation() {
        let visits: Vec<Event> = (0..100).map(|i| visit(1, 1000 + i, i as i64)).collect();
        let impressions: Vec<Impression> = (0..100)
            .map(|i| Impression { user: 1, arm: 0, item: i, t: 200 + i as i64 })
            .collect();
        let clicks: Vec<ClickEvent> = (0..3)
            .map(|i| ClickEvent { user: 1, arm: 0, item: i, t: 400 + i as i64 })
            .collect();
        let acc =
            evaluate_online(&impressions, &clicks, &visits, 1, None, SeniorityMode::PerImpression);
        let row = acc.row(0, Some(Segment::S16Plus)).unwrap();
        assert_eq!(row.impressions, 100);
        assert!((row.ctr() - 0.03).abs() < 1e-12);
        assert!(row.clicks <= row.impressions);
        assert!(row.attributed_visits <= row.impressions);
        // Segment rows sum to the all row.
        let total: u64 = Segment::ALL
            .iter()
            .filter_map(|&s| acc.row(0, Some(s)))
            .map(|r| r.impressions)
            .sum();
        assert_eq!(total, acc.row(0, None).unwrap().impressions);
    }

    #[test]
    fn seniority_crosses_segments_per_impression() {
        // One visit before the first impression, many before the second.
        let mut visits = vec![visit(1, 900, 0)];
        for i in 0..10 {
            visits.push(visit(1, 800 + i, 20 + i as i64));
        }
        let impressions = vec![
            Impression { user: 1, arm: 0, item: 1, t: 10 },
            Impression { user: 1, arm: 0, item: 2, t: 100 },
        ];
        let acc =
            evaluate_online(&impressions, &[], &visits, 1, None, SeniorityMode::PerImpression);
        assert_eq!(acc.row(0, Some(Segment::S1_2)).unwrap().impressions, 1);
        assert_eq!(acc.row(0, Some(Segment::S6_15)).unwrap().impressions, 1);

        // Per-user-at-start pins the first segment.
        let acc =
            evaluate_online(&impressions, &[], &visits, 1, None, SeniorityMode::PerUserAtStart);
        assert_eq!(acc.row(0, Some(Segment::S1_2)).unwrap().impressions, 2);
    }

    #[test]
    fn reprocessing_is_idempotent() {
        let visits = vec![visit(1, 1, 0), visit(1, 2, 5), visit(1, 3, 50)];
        let impressions = vec![
            Impression { user: 1, arm: 0, item: 3, t: 10 },
            Impression { user: 1, arm: 0, item: 2, t: 11 },
        ];
        let clicks = vec![ClickEvent { user: 1, arm: 0, item: 3, t: 12 }];
        let a = evaluate_online(&impressions, &clicks, &visits, 1, None, SeniorityMode::PerImpression);
        let b = evaluate_online(&impressions, &clicks, &visits, 1, None, SeniorityMode::PerImpression);
        assert_eq!(a.rows, b.rows);
    }

    #[test]
    fn correlation_against_online_rates() {
        use crate::eval::OfflineReport;
        // 4 arms; AUC proportional to CTR.
        let mut reports = Vec::new();
        let mut rows = Vec::new();
        for arm in 0..4u16 {
            let mut values = [0.0; 18];
            values[MetricId::Auc.index()] = 0.2 + arm as f64 * 0.1;
            values[MetricId::Mae.index()] = 0.5; // constant -> degenerate
            reports.push(OfflineReport {
                variant_id: alloc::format!("arm{arm}"),
                values,
                n_users: 1,
                auc_skipped: 0,
            });
            rows.push(OnlineRow {
                arm,
                segment: None,
                impressions: 1000,
                clicks: 10 * (arm as u64 + 1),
                attributed_visits: 20,
            });
        }
        let acc = OnlineAccounting { rows, unmatched_clicks: 0, excluded_impressions: 0 };
        let refs: Vec<&OfflineReport> = reports.iter().collect();
        let corr = offline_online_correlation(&refs, &acc, None).unwrap();
        assert!((corr.values[MetricId::Auc.index()][0] - 1.0).abs() < 1e-12);
        assert!(corr.degenerate[MetricId::Mae.index()][0]);

        let two: Vec<&OfflineReport> = reports.iter().take(2).collect();
        assert!(offline_online_correlation(&two, &acc, None).is_err());
    }
}
