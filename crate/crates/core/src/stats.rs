//! Shared statistics: means, correlations, rank transforms, Kendall τ-b.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::CoreError;
use crate::math;

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation.
pub fn pop_std(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64;
    math::sqrt(var)
}

/// 1-based ranks with ties assigned the average rank of their group.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]).then(a.cmp(&b)));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        // Positions i..=j share the same value.
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation; `None` when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    debug_assert_eq!(x.len(), y.len());
    let n = x.len();
    if n < 2 {
        return None;
    }
    let mx = mean(x);
    let my = mean(y);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..n {
        let dx = x[i] - mx;
        let dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / math::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

/// Spearman correlation: Pearson over average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Result of a Kendall τ-b computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauB {
    pub tau: f64,
    /// Normal-approximation z score of S = C - D (tie-adjusted variance).
    pub z: f64,
    /// Two-sided p-value. Exact (permutation) for n <= 8, else normal
    /// approximation.
    pub p_value: f64,
}

/// Kendall τ-b with tie correction:
/// τ-b = (C - D) / sqrt((n0 - n1)(n0 - n2)).
///
/// Counting uses sort + merge-sort inversion counting, O(n log n).
pub fn tau_b(x: &[f64], y: &[f64]) -> Result<TauB, CoreError> {
    if x.len() != y.len() {
        return Err(CoreError::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    let n = x.len();
    if n < 2 {
        return Err(CoreError::InvalidArgument("tau_b needs at least 2 points".into()));
    }

    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    // Tie counts over x (n1), joint ties (n_xy), and tie-group moments for
    // the variance of S.
    let mut n1 = 0u64;
    let mut n_xy = 0u64;
    let mut vt = 0u64; // sum t(t-1)(2t+5) over x tie groups
    let mut v1x = 0u64; // sum t(t-1)
    let mut v2x = 0u64; // sum t(t-1)(t-2)
    {
        let mut i = 0;
        while i < n {
            let mut j = i;
            while j + 1 < n && pairs[j + 1].0 == pairs[i].0 {
                j += 1;
            }
            let t = (j - i + 1) as u64;
            n1 += t * (t - 1) / 2;
            vt += t * (t - 1) * (2 * t + 5);
            v1x += t * (t - 1);
            v2x += t * (t - 1) * t.saturating_sub(2);
            // Joint ties within the x group.
            let mut a = i;
            while a <= j {
                let mut b = a;
                while b < j && pairs[b + 1].1 == pairs[a].1 {
                    b += 1;
                }
                let u = (b - a + 1) as u64;
                n_xy += u * (u - 1) / 2;
                a = b + 1;
            }
            i = j + 1;
        }
    }

    // Discordant pairs = swaps needed to sort the y sequence.
    let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let swaps = merge_count_swaps(ys.clone());

    // Tie counts over y (n2) and variance moments.
    let mut sorted_y = ys;
    sorted_y.sort_by(|a, b| a.total_cmp(b));
    let mut n2 = 0u64;
    let mut vu = 0u64;
    let mut v1y = 0u64;
    let mut v2y = 0u64;
    {
        let mut i = 0;
        while i < n {
            let mut j = i;
            while j + 1 < n && sorted_y[j + 1] == sorted_y[i] {
                j += 1;
            }
            let u = (j - i + 1) as u64;
            n2 += u * (u - 1) / 2;
            vu += u * (u - 1) * (2 * u + 5);
            v1y += u * (u - 1);
            v2y += u * (u - 1) * u.saturating_sub(2);
            i = j + 1;
        }
    }

    let n0 = (n as u64) * (n as u64 - 1) / 2;
    let denom_x = n0 - n1;
    let denom_y = n0 - n2;
    if denom_x == 0 || denom_y == 0 {
        return Err(CoreError::InvalidArgument("tau_b undefined for a constant vector".into()));
    }

    // S = C - D = n0 - n1 - n2 + n_xy - 2*swaps.
    let s = n0 as f64 - n1 as f64 - n2 as f64 + n_xy as f64 - 2.0 * swaps as f64;
    let tau = (s / math::sqrt(denom_x as f64 * denom_y as f64)).clamp(-1.0, 1.0);

    let nf = n as f64;
    let v0 = nf * (nf - 1.0) * (2.0 * nf + 5.0);
    let var_s = (v0 - vt as f64 - vu as f64) / 18.0
        + (v1x as f64 * v1y as f64) / (2.0 * nf * (nf - 1.0))
        + (v2x as f64 * v2y as f64) / (9.0 * nf * (nf - 1.0) * (nf - 2.0));
    let z = if var_s > 0.0 { s / math::sqrt(var_s) } else { 0.0 };

    let p_value = if n <= 8 { exact_p_value(x, y, s) } else { normal_two_sided_p(z) };

    Ok(TauB { tau, z, p_value })
}

/// Number of swaps a merge sort needs: the count of discordant-orderings in y
/// after sorting by x (y ties contribute no swaps because groups are stable).
fn merge_count_swaps(mut v: Vec<f64>) -> u64 {
    let n = v.len();
    let mut buf = vec![0.0f64; n];
    let mut swaps = 0u64;
    let mut width = 1;
    while width < n {
        let mut lo = 0;
        while lo < n {
            let mid = (lo + width).min(n);
            let hi = (lo + 2 * width).min(n);
            if mid < hi {
                let (mut i, mut j, mut k) = (lo, mid, lo);
                while i < mid || j < hi {
                    if i < mid && (j >= hi || v[i] <= v[j]) {
                        buf[k] = v[i];
                        i += 1;
                    } else {
                        buf[k] = v[j];
                        j += 1;
                        swaps += (mid - i) as u64;
                    }
                    k += 1;
                }
                v[lo..hi].copy_from_slice(&buf[lo..hi]);
            }
            lo += 2 * width;
        }
        width *= 2;
    }
    swaps
}

/// Exact two-sided p-value by enumerating all permutations of y (n <= 8).
fn exact_p_value(x: &[f64], y: &[f64], s_obs: f64) -> f64 {
    let n = y.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut total = 0u64;
    let mut at_least = 0u64;
    let target = s_obs.abs();
    permute(&mut perm, 0, &mut |p| {
        let mut s = 0i64;
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = x[i] - x[j];
                let dy = y[p[i]] - y[p[j]];
                let prod = dx * dy;
                if prod > 0.0 {
                    s += 1;
                } else if prod < 0.0 {
                    s -= 1;
                }
            }
        }
        total += 1;
        if (s as f64).abs() >= target - 1e-12 {
            at_least += 1;
        }
    });
    at_least as f64 / total as f64
}

fn permute(items: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, visit);
        items.swap(k, i);
    }
}

/// Two-sided tail probability of a standard normal.
pub fn normal_two_sided_p(z: f64) -> f64 {
    math::erfc(z.abs() / math::sqrt(2.0))
}

/// Pooled two-proportion z statistic for (successes, trials) pairs.
pub fn two_proportion_z(s1: u64, n1: u64, s2: u64, n2: u64) -> f64 {
    if n1 == 0 || n2 == 0 {
        return 0.0;
    }
    let p1 = s1 as f64 / n1 as f64;
    let p2 = s2 as f64 / n2 as f64;
    let pooled = (s1 + s2) as f64 / (n1 + n2) as f64;
    let se = math::sqrt(pooled * (1.0 - pooled) * (1.0 / n1 as f64 + 1.0 / n2 as f64));
    if se == 0.0 {
        return 0.0;
    }
    (p1 - p2) / se
}
