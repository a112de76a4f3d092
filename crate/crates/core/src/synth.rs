//! Synthetic data generation: a cluster-structured catalog + interaction
//! corpus, and an online behavior simulator that replays A/B arms against a
//! ground-truth propensity model. Both are deterministic for a fixed seed.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::corpus::{Catalog, Event, EventKind, ItemId, NominalAttr, NumericAttr, UserId};
use crate::online::{ClickEvent, Impression};
use crate::recommender::{recommend, RecContext, VariantConfig};
use crate::rng::{derive_seed, Rng};
use crate::SECS_PER_DAY;

/// Shape of the synthetic corpus. Users and items are grouped into
/// co-visitation clusters (user u and item i belong to cluster `% n_clusters`).
#[derive(Debug, Clone)]
pub struct CorpusSpec {
    pub n_items: u32,
    pub n_users: u32,
    pub n_clusters: u32,
    /// Inclusive range of detail views per user.
    pub visits_per_user: (u32, u32),
    /// Probability that one visit goes outside the user's cluster.
    pub cross_cluster_noise: f64,
    /// Probability that a visit is followed by a rec_click event.
    pub click_rate: f64,
    /// Probability that a visit is followed by a purchase event.
    pub purchase_rate: f64,
    pub start_t: i64,
    pub period_secs: i64,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            n_items: 120,
            n_users: 600,
            n_clusters: 4,
            visits_per_user: (2, 12),
            cross_cluster_noise: 0.15,
            click_rate: 0.05,
            purchase_rate: 0.01,
            start_t: 1_577_836_800, // 2020-01-01T00:00:00Z
            period_secs: 300 * SECS_PER_DAY,
            seed: 1,
        }
    }
}

pub fn item_cluster(item: ItemId, n_clusters: u32) -> u32 {
    item % n_clusters.max(1)
}

pub fn user_cluster(user: UserId, n_clusters: u32) -> u32 {
    user % n_clusters.max(1)
}

/// Generate a catalog whose `category` attribute matches the co-visitation
/// clusters, plus an unrelated `region` attribute, two numeric attributes,
/// per-cluster description vocabularies and update dates inside the period.
pub fn gen_catalog(spec: &CorpusSpec) -> Catalog {
    let n = spec.n_items as usize;
    let mut rng = Rng::new(derive_seed(spec.seed, "catalog"));
    let n_clusters = spec.n_clusters.max(1);

    let category = NominalAttr {
        name: String::from("category"),
        categories: (0..n_clusters).map(|c| format!("c{c}")).collect(),
        values: (0..spec.n_items).map(|i| Some(item_cluster(i, n_clusters))).collect(),
    };
    let region = NominalAttr {
        name: String::from("region"),
        categories: (0..7).map(|r| format!("r{r}")).collect(),
        values: (0..spec.n_items).map(|i| Some(i % 7)).collect(),
    };
    let price = NumericAttr {
        name: String::from("price"),
        values: (0..spec.n_items)
            .map(|i| {
                if rng.chance(0.02) {
                    None // occasional missing value
                } else {
                    let base = 100.0 * (1.0 + item_cluster(i, n_clusters) as f64);
                    Some(base + rng.gen_f64(-30.0, 30.0))
                }
            })
            .collect(),
    };
    let duration = NumericAttr {
        name: String::from("duration_days"),
        values: (0..spec.n_items).map(|_| Some(3.0 + rng.gen_range(18) as f64)).collect(),
    };

    let tokens: Vec<Vec<String>> = (0..spec.n_items)
        .map(|i| {
            let cluster = item_cluster(i, n_clusters);
            let len = 6 + rng.gen_range(7) as usize;
            (0..len)
                .map(|_| {
                    if rng.chance(0.7) {
                        format!("c{cluster}w{}", rng.gen_range(12))
                    } else {
                        format!("base{}", rng.gen_range(10))
                    }
                })
                .collect()
        })
        .collect();

    let last_update: Vec<i64> = (0..spec.n_items)
        .map(|_| {
            let span_days = (spec.period_secs / SECS_PER_DAY * 9 / 10).max(1);
            let day = rng.gen_range(span_days as u64) as i64;
            spec.start_t + day * SECS_PER_DAY
        })
        .collect();

    Catalog {
        n_items: n,
        nominal: alloc::vec![category, region],
        numeric: alloc::vec![price, duration],
        tokens,
        last_update,
    }
}

/// Generate the interaction corpus: each user visits mostly items of their
/// own cluster, in sessions spread over weeks so a realistic share of users
/// straddles any split point inside the period. Occasional rec_click and
/// purchase events follow a visit.
pub fn gen_interactions(spec: &CorpusSpec) -> Vec<Event> {
    let n_clusters = spec.n_clusters.max(1);
    let per_cluster: Vec<Vec<ItemId>> = (0..n_clusters)
        .map(|c| (0..spec.n_items).filter(|&i| item_cluster(i, n_clusters) == c).collect())
        .collect();
    let mut events = Vec::new();
    for u in 0..spec.n_users {
        let mut rng = Rng::new(derive_seed(spec.seed, &format!("user{u}")));
        let (lo, hi) = spec.visits_per_user;
        let n_visits = lo + rng.gen_range(u64::from(hi - lo + 1)) as u32;
        // Users enter throughout the period (a small end margin keeps the
        // tail inside it).
        let window = (spec.period_secs * 9 / 10).max(1);
        let mut t = spec.start_t + rng.gen_range(window as u64) as i64;
        let own = user_cluster(u, n_clusters);
        for _ in 0..n_visits {
            let cluster = if rng.chance(spec.cross_cluster_noise) {
                rng.gen_range(u64::from(n_clusters)) as u32
            } else {
                own
            };
            let pool = &per_cluster[cluster as usize];
            if pool.is_empty() {
                continue;
            }
            let item = pool[rng.gen_range(pool.len() as u64) as usize];
            events.push(Event { user: u, item, t, kind: EventKind::DetailView });
            if rng.chance(spec.click_rate) {
                events.push(Event { user: u, item, t: t + 10, kind: EventKind::RecClick });
            }
            if rng.chance(spec.purchase_rate) {
                events.push(Event { user: u, item, t: t + 60, kind: EventKind::Purchase });
            }
            // Some gaps stay within a session, the rest jump days so the
            // median user spans several weeks.
            t += if rng.chance(0.4) {
                600 + rng.gen_range(7200) as i64
            } else {
                SECS_PER_DAY * (1 + rng.gen_range(28) as i64)
            };
        }
    }
    events
}

/// Ground-truth click/visit propensities: high for items of the user's own
/// cluster, low otherwise.
#[derive(Debug, Clone)]
pub struct PropensityModel {
    pub n_clusters: u32,
    pub item_cluster: Vec<u32>,
    pub p_click_match: f64,
    pub p_click_miss: f64,
    pub p_visit_match: f64,
    pub p_visit_miss: f64,
}

impl PropensityModel {
    pub fn from_clusters(n_items: u32, n_clusters: u32) -> Self {
        PropensityModel {
            n_clusters,
            item_cluster: (0..n_items).map(|i| item_cluster(i, n_clusters)).collect(),
            p_click_match: 0.25,
            p_click_miss: 0.01,
            p_visit_match: 0.35,
            p_visit_miss: 0.02,
        }
    }

    pub fn click_p(&self, user: UserId, item: ItemId) -> f64 {
        if self.matches(user, item) {
            self.p_click_match
        } else {
            self.p_click_miss
        }
    }

    pub fn visit_p(&self, user: UserId, item: ItemId) -> f64 {
        if self.matches(user, item) {
            self.p_visit_match
        } else {
            self.p_visit_miss
        }
    }

    fn matches(&self, user: UserId, item: ItemId) -> bool {
        self.item_cluster[item as usize] == user_cluster(user, self.n_clusters)
    }
}

/// An A/B arm: anything that can produce a top-k slate for a profile.
pub trait ArmPolicy {
    fn top_k(&self, profile: &[(ItemId, i64)], as_of: i64, k: usize) -> Vec<ItemId>;
}

/// Arm backed by a grid variant; empty profiles (and cold failures) fall
/// back to the global popularity ranking.
pub struct VariantArm<'a> {
    pub variant: VariantConfig,
    pub ctx: &'a RecContext<'a>,
    pub popularity: &'a [ItemId],
}

impl ArmPolicy for VariantArm<'_> {
    fn top_k(&self, profile: &[(ItemId, i64)], as_of: i64, k: usize) -> Vec<ItemId> {
        if !profile.is_empty() {
            if let Ok(list) = recommend(&self.variant, profile, 0, as_of, k, self.ctx) {
                return list.items();
            }
        }
        self.popularity.iter().take(k).copied().collect()
    }
}

/// Simulation shape for the online period.
#[derive(Debug, Clone)]
pub struct BehaviorSpec {
    pub n_users: u32,
    /// Inclusive range of organic visits per user.
    pub organic_visits: (u32, u32),
    /// Impressions per recommendation slate.
    pub slate_k: usize,
    /// Serve one slate before the first visit (exercises the zero-prior
    /// exclusion path).
    pub serve_before_first_visit: bool,
    pub start_t: i64,
    /// Gap between a user's browsing steps.
    pub step_secs: i64,
    /// Delay of a propensity-driven organic visit after an impression.
    pub visit_delay_secs: i64,
    pub seed: u64,
}

impl Default for BehaviorSpec {
    fn default() -> Self {
        BehaviorSpec {
            n_users: 2000,
            organic_visits: (2, 5),
            slate_k: 5,
            serve_before_first_visit: true,
            start_t: 1_609_459_200, // 2021-01-01T00:00:00Z
            step_secs: 600,
            visit_delay_secs: 60,
            seed: 7,
        }
    }
}

/// All logs produced by one simulated A/B period.
#[derive(Debug, Clone, Default)]
pub struct BehaviorLogs {
    /// Organic detail views (including click-induced ones), unsorted.
    pub interactions: Vec<Event>,
    pub impressions: Vec<Impression>,
    pub clicks: Vec<ClickEvent>,
}

/// Simulate the online period: each user is assigned the arm `uid % arms`,
/// browses items of their own cluster, receives top-k slates and clicks or
/// later visits impressed items according to the propensity model. A click
/// always implies a visit event just after it.
pub fn synth_behavior(
    arms: &[&dyn ArmPolicy],
    prefs: &PropensityModel,
    spec: &BehaviorSpec,
) -> BehaviorLogs {
    assert!(!arms.is_empty(), "at least one arm");
    let n_arms = arms.len() as u32;
    let n_clusters = prefs.n_clusters.max(1);
    let per_cluster: Vec<Vec<ItemId>> = (0..n_clusters)
        .map(|c| {
            (0..prefs.item_cluster.len() as u32)
                .filter(|&i| prefs.item_cluster[i as usize] == c)
                .collect()
        })
        .collect();

    let mut logs = BehaviorLogs::default();
    for u in 0..spec.n_users {
        let arm_idx = (u % n_arms) as usize;
        let arm = arms[arm_idx];
        let mut rng = Rng::new(derive_seed(spec.seed, &format!("behavior{u}")));
        let mut t = spec.start_t + (u as i64 % 1009) * 13;
        let mut profile: Vec<(ItemId, i64)> = Vec::new();

        let serve = |profile: &[(ItemId, i64)],
                         t: &mut i64,
                         rng: &mut Rng,
                         logs: &mut BehaviorLogs| {
            let slate = arm.top_k(profile, *t, spec.slate_k);
            let mut followups: Vec<(ItemId, i64)> = Vec::new();
            for (slot, &item) in slate.iter().enumerate() {
                logs.impressions.push(Impression {
                    user: u,
                    arm: arm_idx as u16,
                    item,
                    t: *t,
                });
                let offset = 2 + slot as i64;
                if rng.chance(prefs.click_p(u, item)) {
                    logs.clicks.push(ClickEvent {
                        user: u,
                        arm: arm_idx as u16,
                        item,
                        t: *t + offset,
                    });
                    // A click implies a visit.
                    logs.interactions.push(Event {
                        user: u,
                        item,
                        t: *t + offset,
                        kind: EventKind::DetailView,
                    });
                    followups.push((item, *t + offset));
                } else if rng.chance(prefs.visit_p(u, item)) {
                    let vt = *t + spec.visit_delay_secs + slot as i64;
                    logs.interactions.push(Event {
                        user: u,
                        item,
                        t: vt,
                        kind: EventKind::DetailView,
                    });
                    followups.push((item, vt));
                }
            }
            *t += spec.step_secs;
            followups
        };

        if spec.serve_before_first_visit {
            // No prior visits yet: these impressions land outside every
            // seniority segment.
            let follow = serve(&profile, &mut t, &mut rng, &mut logs);
            profile.extend(follow);
            profile.sort_by_key(|&(_, vt)| vt);
        }

        let (lo, hi) = spec.organic_visits;
        let n_visits = lo + rng.gen_range(u64::from(hi - lo + 1)) as u32;
        for _ in 0..n_visits {
            let pool = &per_cluster[user_cluster(u, n_clusters) as usize];
            if pool.is_empty() {
                break;
            }
            let item = pool[rng.gen_range(pool.len() as u64) as usize];
            logs.interactions.push(Event { user: u, item, t, kind: EventKind::DetailView });
            profile.push((item, t));
            t += 30;
            let follow = serve(&profile, &mut t, &mut rng, &mut logs);
            profile.extend(follow);
            profile.sort_by_key(|&(_, vt)| vt);
        }
    }
    logs
}
