//! Interaction log ingestion, user filtering, temporal splitting, profiles.
//!
//! Identifiers are dense `u32` indices; the std front end owns the mapping
//! between opaque string ids and these indices. Timestamps are UTC epoch
//! seconds.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::CoreError;

pub type UserId = u32;
pub type ItemId = u32;

/// Implicit-feedback event kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    DetailView,
    RecClick,
    Purchase,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::DetailView => "detail_view",
            EventKind::RecClick => "rec_click",
            EventKind::Purchase => "purchase",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "detail_view" => Some(EventKind::DetailView),
            "rec_click" => Some(EventKind::RecClick),
            "purchase" => Some(EventKind::Purchase),
            _ => None,
        }
    }
}

/// One implicit-feedback event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    pub user: UserId,
    pub item: ItemId,
    pub t: i64,
    pub kind: EventKind,
}

/// Time-ordered event log. Events are sorted by timestamp; equal timestamps
/// keep their input order so repeated runs are deterministic.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InteractionLog {
    pub events: Vec<Event>,
}

impl InteractionLog {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn time_range(&self) -> Option<(i64, i64)> {
        if self.events.is_empty() {
            return None;
        }
        Some((self.events[0].t, self.events[self.events.len() - 1].t))
    }

    pub fn distinct_users(&self) -> usize {
        self.events.iter().map(|e| e.user).collect::<BTreeSet<_>>().len()
    }
}

/// Sort events by time (stable in input order for ties) and drop exact
/// duplicates, keeping the first occurrence. Returns the number of
/// duplicates removed.
pub fn ingest(events: Vec<Event>) -> (InteractionLog, usize) {
    let mut events = events;
    events.sort_by_key(|e| e.t);
    let mut seen: BTreeSet<(UserId, ItemId, i64, EventKind)> = BTreeSet::new();
    let before = events.len();
    events.retain(|e| seen.insert((e.user, e.item, e.t, e.kind)));
    let dropped = before - events.len();
    (InteractionLog { events }, dropped)
}

/// How `filter_users` measures the per-user visit volume.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VisitCount {
    /// Count distinct visited items (default).
    DistinctItems,
    /// Count raw detail-view events.
    RawEvents,
}

/// Keep only events of users whose visit count lies in `[min_visits,
/// max_visits]`. Visits are detail-view events; other event kinds never
/// contribute to the count but survive with their user.
pub fn filter_users(
    log: &InteractionLog,
    min_visits: usize,
    max_visits: usize,
    mode: VisitCount,
) -> InteractionLog {
    let mut counts: BTreeMap<UserId, BTreeSet<ItemId>> = BTreeMap::new();
    let mut raw: BTreeMap<UserId, usize> = BTreeMap::new();
    for e in &log.events {
        if e.kind == EventKind::DetailView {
            counts.entry(e.user).or_default().insert(e.item);
            *raw.entry(e.user).or_default() += 1;
        }
    }
    let keep = |u: UserId| -> bool {
        let n = match mode {
            VisitCount::DistinctItems => counts.get(&u).map_or(0, BTreeSet::len),
            VisitCount::RawEvents => raw.get(&u).copied().unwrap_or(0),
        };
        n >= min_visits && n <= max_visits
    };
    InteractionLog { events: log.events.iter().filter(|e| keep(e.user)).copied().collect() }
}

/// Train/test partition at a fixed time point.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitCorpus {
    pub train: InteractionLog,
    pub test: InteractionLog,
    pub split_point: i64,
    /// Test events discarded because their user has no train history.
    pub dropped_test_events: usize,
    pub dropped_test_users: usize,
}

/// Split at `split_point`: train events strictly before, test events at or
/// after. Test users without at least one train event are dropped and
/// counted.
///
/// The split point must leave at least one event on the train side; a split
/// point past the newest event is allowed and yields an empty test set.
pub fn temporal_split(log: &InteractionLog, split_point: i64) -> Result<SplitCorpus, CoreError> {
    let (t_min, _) = log.time_range().ok_or(CoreError::SplitOutOfRange)?;
    if split_point <= t_min {
        return Err(CoreError::SplitOutOfRange);
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for e in &log.events {
        if e.t < split_point {
            train.push(*e);
        } else {
            test.push(*e);
        }
    }
    let train_users: BTreeSet<UserId> = train.iter().map(|e| e.user).collect();
    let mut dropped_users: BTreeSet<UserId> = BTreeSet::new();
    let before = test.len();
    test.retain(|e| {
        if train_users.contains(&e.user) {
            true
        } else {
            dropped_users.insert(e.user);
            false
        }
    });
    let dropped = before - test.len();
    Ok(SplitCorpus {
        train: InteractionLog { events: train },
        test: InteractionLog { events: test },
        split_point,
        dropped_test_events: dropped,
        dropped_test_users: dropped_users.len(),
    })
}

/// Time-ordered detail-view history of one user.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UserProfile {
    pub user: UserId,
    /// (item, timestamp), non-decreasing in time.
    pub visits: Vec<(ItemId, i64)>,
}

/// Per-user profiles from detail-view events strictly before `as_of`.
pub fn build_profiles(log: &InteractionLog, as_of: i64) -> BTreeMap<UserId, UserProfile> {
    let mut out: BTreeMap<UserId, UserProfile> = BTreeMap::new();
    for e in &log.events {
        if e.kind == EventKind::DetailView && e.t < as_of {
            out.entry(e.user)
                .or_insert_with(|| UserProfile { user: e.user, visits: Vec::new() })
                .visits
                .push((e.item, e.t));
        }
    }
    out
}

/// Per-item catalog metadata used by the content-based and text models.
#[derive(Debug, Clone, Default)]
pub struct Catalog {
    pub n_items: usize,
    pub nominal: Vec<NominalAttr>,
    pub numeric: Vec<NumericAttr>,
    /// Normalized description tokens per item.
    pub tokens: Vec<Vec<String>>,
    /// Last content update, epoch seconds at UTC midnight.
    pub last_update: Vec<i64>,
}

#[derive(Debug, Clone)]
pub struct NominalAttr {
    pub name: String,
    pub categories: Vec<String>,
    /// Per-item category index into `categories`; `None` when missing.
    pub values: Vec<Option<u32>>,
}

#[derive(Debug, Clone)]
pub struct NumericAttr {
    pub name: String,
    pub values: Vec<Option<f64>>,
}

impl Catalog {
    /// Global popularity order: train detail-view count descending, item id
    /// ascending. Used as the empty-profile fallback ranking.
    pub fn popularity_order(&self, train: &InteractionLog) -> Vec<ItemId> {
        let mut counts = alloc::vec![0u64; self.n_items];
        for e in &train.events {
            if e.kind == EventKind::DetailView && (e.item as usize) < self.n_items {
                counts[e.item as usize] += 1;
            }
        }
        let mut order: Vec<ItemId> = (0..self.n_items as u32).collect();
        order.sort_by(|&a, &b| {
            counts[b as usize].cmp(&counts[a as usize]).then(a.cmp(&b))
        });
        order
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn ev(user: u32, item: u32, t: i64, kind: EventKind) -> Event {
        Event { user, item, t, kind }
    }

    fn view(user: u32, item: u32, t: i64) -> Event {
        ev(user, item, t, EventKind::DetailView)
    }

    #[test]
    fn ingest_sorts_and_dedups() {
        let (log, dropped) = ingest(vec![view(1, 2, 30), view(1, 1, 10), view(1, 2, 30)]);
        assert_eq!(dropped, 1);
        assert_eq!(log.events, vec![view(1, 1, 10), view(1, 2, 30)]);
    }

    #[test]
    fn ingest_keeps_tie_order() {
        let a = view(3, 9, 50);
        let b = view(2, 8, 50);
        let (log, _) = ingest(vec![a, b]);
        assert_eq!(log.events, vec![a, b]);
    }

    #[test]
    fn filter_bounds_on_distinct_items() {
        // User 1: one distinct item (visited twice). User 2: two distinct.
        let (log, _) = ingest(vec![
            view(1, 5, 1),
            view(1, 5, 2),
            view(2, 5, 3),
            view(2, 6, 4),
        ]);
        let f = filter_users(&log, 2, 150, VisitCount::DistinctItems);
        assert!(f.events.iter().all(|e| e.user == 2));

        // Raw-event mode keeps user 1 (two events).
        let f = filter_users(&log, 2, 150, VisitCount::RawEvents);
        assert_eq!(f.distinct_users(), 2);
    }

    #[test]
    fn filter_upper_boundary() {
        let mut events = Vec::new();
        for i in 0..151 {
            events.push(view(1, i, i as i64));
        }
        for i in 0..150 {
            events.push(view(2, i, 1000 + i as i64));
        }
        let (log, _) = ingest(events);
        let f = filter_users(&log, 2, 150, VisitCount::DistinctItems);
        assert!(f.events.iter().all(|e| e.user == 2), "151 distinct items must be dropped");
    }

    #[test]
    fn filter_ten_user_fixture() {
        // 10 users; users 0,1,2 have a single distinct item, rest have 3.
        let mut events = Vec::new();
        for u in 0..10u32 {
            let n = if u < 3 { 1 } else { 3 };
            for i in 0..n {
                events.push(view(u, i, (u * 10 + i) as i64));
            }
        }
        let (log, _) = ingest(events);
        let f = filter_users(&log, 2, 150, VisitCount::DistinctItems);
        assert_eq!(f.distinct_users(), 7);
    }

    #[test]
    fn filter_is_idempotent() {
        let (log, _) = ingest(
            (0..20u32)
                .flat_map(|u| (0..(u % 5)).map(move |i| view(u, i, (u + i) as i64)))
                .collect(),
        );
        let once = filter_users(&log, 2, 3, VisitCount::DistinctItems);
        let twice = filter_users(&once, 2, 3, VisitCount::DistinctItems);
        assert_eq!(once, twice);
    }

    #[test]
    fn split_partitions_and_drops_unseen_users() {
        // 6 users / 20 events; users 4,5 only appear after the split.
        let mut events = Vec::new();
        let mut t = 0;
        for u in 0..4u32 {
            for i in 0..3 {
                events.push(view(u, i, t));
                t += 1;
            }
        } // 12 train events, t in 0..12
        for u in 0..4u32 {
            events.push(view(u, 9, 100 + u as i64));
        } // 4 test events with history
        events.push(view(4, 1, 50)); // post-split, user 4 has no train history
        events.push(view(4, 2, 101));
        events.push(view(5, 1, 102));
        events.push(view(5, 2, 103));
        let (log, _) = ingest(events);
        let split = temporal_split(&log, 20).unwrap();
        assert_eq!(split.train.len(), 12);
        assert_eq!(split.test.len(), 4);
        assert_eq!(split.dropped_test_events, 4);
        assert_eq!(split.dropped_test_users, 2);
        assert_eq!(split.train.len() + split.test.len() + split.dropped_test_events, log.len());
        let train_users: BTreeSet<_> = split.train.events.iter().map(|e| e.user).collect();
        assert!(split.test.events.iter().all(|e| train_users.contains(&e.user)));
    }

    #[test]
    fn split_past_newest_event_gives_empty_test() {
        let (log, _) = ingest(vec![view(1, 1, 10), view(1, 2, 20)]);
        let split = temporal_split(&log, 1000).unwrap();
        assert!(split.test.is_empty());
        assert_eq!(split.train.len(), 2);
    }

    #[test]
    fn split_at_or_before_oldest_event_errors() {
        let (log, _) = ingest(vec![view(1, 1, 10), view(1, 2, 20)]);
        assert_eq!(temporal_split(&log, 10), Err(CoreError::SplitOutOfRange));
        assert_eq!(temporal_split(&log, 5), Err(CoreError::SplitOutOfRange));
    }

    #[test]
    fn profiles_respect_as_of_and_kind() {
        let (log, _) = ingest(vec![
            view(1, 10, 100),
            view(1, 11, 200),
            ev(1, 12, 150, EventKind::RecClick),
            ev(1, 13, 160, EventKind::Purchase),
        ]);
        let profiles = build_profiles(&log, 300);
        assert_eq!(profiles[&1].visits, vec![(10, 100), (11, 200)]);
        // Strict inequality at as_of.
        let profiles = build_profiles(&log, 100);
        assert!(!profiles.contains_key(&1));
    }

    #[test]
    fn profile_order_matches_log_order() {
        let (log, _) = ingest(vec![view(1, 5, 100), view(1, 6, 100), view(1, 7, 90)]);
        let profiles = build_profiles(&log, 1000);
        assert_eq!(profiles[&1].visits, vec![(7, 90), (5, 100), (6, 100)]);
    }

    #[test]
    fn popularity_breaks_ties_by_item_id() {
        let catalog = Catalog { n_items: 3, ..Default::default() };
        let (log, _) = ingest(vec![view(1, 2, 1), view(2, 2, 2), view(1, 0, 3)]);
        assert_eq!(catalog.popularity_order(&log), vec![2, 0, 1]);
    }
}
