//! Offline-to-online meta prediction: degree-2 polynomial features, LASSO
//! via cyclic coordinate descent with soft thresholding, ordinary least
//! squares and a regression-tree baseline, leave-one-out cross validation
//! and R^2 / Kendall tau-b scoring.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::CoreError;
use crate::eval::{MetricId, OfflineReport};
use crate::math;
use crate::online::{OnlineAccounting, Segment};
use crate::stats;

/// Degree-2 expansion: the original features followed by all pairwise
/// products including squares, d + d(d+1)/2 columns in a fixed order
/// (x_i * x_j for i <= j, row-major in i).
pub fn poly2_features(row: &[f64]) -> Vec<f64> {
    let d = row.len();
    let mut out = Vec::with_capacity(d + d * (d + 1) / 2);
    out.extend_from_slice(row);
    for i in 0..d {
        for j in i..d {
            out.push(row[i] * row[j]);
        }
    }
    out
}

pub fn poly2_names(names: &[String]) -> Vec<String> {
    let mut out: Vec<String> = names.to_vec();
    for i in 0..names.len() {
        for j in i..names.len() {
            out.push(format!("{}*{}", names[i], names[j]));
        }
    }
    out
}

/// Per-column standardization (population stddev); zero-variance columns
/// transform to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Standardizer {
        let p = rows.first().map_or(0, Vec::len);
        let mut means = vec![0.0; p];
        let mut stds = vec![0.0; p];
        for j in 0..p {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            means[j] = stats::mean(&col);
            stds[j] = stats::pop_std(&col);
        }
        Standardizer { means, stds }
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, &v)| {
                if self.stds[j] == 0.0 {
                    0.0
                } else {
                    (v - self.means[j]) / self.stds[j]
                }
            })
            .collect()
    }

    pub fn transform_all(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.transform(r)).collect()
    }
}

#[inline]
fn soft_threshold(z: f64, lambda: f64) -> f64 {
    if z > lambda {
        z - lambda
    } else if z < -lambda {
        z + lambda
    } else {
        0.0
    }
}

/// LASSO objective (1/2n)||y - X beta||^2 + lambda ||beta||_1.
pub fn lasso_objective(x: &[Vec<f64>], y: &[f64], beta: &[f64], lambda: f64) -> f64 {
    let n = y.len() as f64;
    let mut sse = 0.0;
    for (row, &yi) in x.iter().zip(y) {
        let r = yi - math::dot(row, beta);
        sse += r * r;
    }
    sse / (2.0 * n) + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
}

/// Raw coordinate-descent fit on an already standardized X and centered y.
#[derive(Debug, Clone)]
pub struct LassoFit {
    pub beta: Vec<f64>,
    pub sweeps: usize,
    /// Objective value after every sweep.
    pub objective_history: Vec<f64>,
}

/// Cyclic coordinate descent with soft thresholding. Converges when the
/// largest coordinate update of a sweep drops below `tol`. `warm_start`
/// seeds the coefficients (used along a lambda path).
pub fn fit_lasso(
    x: &[Vec<f64>],
    y: &[f64],
    lambda: f64,
    tol: f64,
    max_iter: usize,
    warm_start: Option<Vec<f64>>,
) -> Result<LassoFit, CoreError> {
    let n = y.len();
    if n == 0 || x.len() != n {
        return Err(CoreError::DimensionMismatch { expected: n, got: x.len() });
    }
    let p = x[0].len();
    if lambda < 0.0 {
        return Err(CoreError::InvalidArgument("lambda must be non-negative".into()));
    }
    let nf = n as f64;
    let col_sq: Vec<f64> = (0..p)
        .map(|j| x.iter().map(|r| r[j] * r[j]).sum::<f64>() / nf)
        .collect();

    let mut beta = warm_start.unwrap_or_else(|| vec![0.0; p]);
    if beta.len() != p {
        return Err(CoreError::DimensionMismatch { expected: p, got: beta.len() });
    }
    // Residual r = y - X beta.
    let mut resid: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(row, &yi)| yi - math::dot(row, &beta))
        .collect();

    let mut history: Vec<f64> = Vec::new();
    for sweep in 1..=max_iter {
        let mut max_delta = 0.0f64;
        for j in 0..p {
            if col_sq[j] == 0.0 {
                continue;
            }
            let old = beta[j];
            // rho = x_j . (r + x_j * old) / n
            let mut rho = 0.0;
            for i in 0..n {
                rho += x[i][j] * (resid[i] + x[i][j] * old);
            }
            rho /= nf;
            let new = soft_threshold(rho, lambda) / col_sq[j];
            if new != old {
                let delta = old - new;
                for i in 0..n {
                    resid[i] += x[i][j] * delta;
                }
                beta[j] = new;
                max_delta = max_delta.max(delta.abs());
            }
        }
        let objective = lasso_objective(x, y, &beta, lambda);
        // Plateau guard: once a sweep stops moving the objective relative to
        // its own magnitude, further cycling is numerically meaningless
        // (near-duplicate columns can wobble forever below any absolute
        // tolerance).
        let plateau = history
            .last()
            .is_some_and(|&prev| (prev - objective).abs() <= 1e-15 * prev.abs());
        history.push(objective);
        if max_delta < tol || plateau {
            return Ok(LassoFit { beta, sweeps: sweep, objective_history: history });
        }
        if sweep == max_iter {
            return Err(CoreError::NoConvergence { sweeps: sweep, max_delta });
        }
    }
    unreachable!("loop returns")
}

/// Smallest lambda for which all coefficients are zero: max_j |x_j . y| / n.
pub fn lambda_max(x: &[Vec<f64>], y: &[f64]) -> f64 {
    let n = y.len();
    if n == 0 {
        return 0.0;
    }
    let p = x[0].len();
    let mut best = 0.0f64;
    for j in 0..p {
        let g: f64 = x.iter().zip(y).map(|(r, &yi)| r[j] * yi).sum::<f64>() / n as f64;
        best = best.max(g.abs());
    }
    best
}

/// Subgradient optimality of a fitted LASSO: for every coordinate,
/// |x_j . r / n| <= lambda + tol when beta_j = 0, and
/// x_j . r / n = lambda * sign(beta_j) within tol otherwise.
pub fn check_kkt(x: &[Vec<f64>], y: &[f64], beta: &[f64], lambda: f64, tol: f64) -> bool {
    let n = y.len() as f64;
    let resid: Vec<f64> = x.iter().zip(y).map(|(row, &yi)| yi - math::dot(row, beta)).collect();
    for j in 0..beta.len() {
        let g: f64 = x.iter().zip(&resid).map(|(r, &ri)| r[j] * ri).sum::<f64>() / n;
        if beta[j] == 0.0 {
            if g.abs() > lambda + tol {
                return false;
            }
        } else if (g - lambda * beta[j].signum()).abs() > tol {
            return false;
        }
    }
    true
}

/// Ordinary least squares via the normal equations. `jitter` adds a ridge
/// term to the diagonal for rank-deficient systems; without it a (near-)
/// singular system is an error.
pub fn fit_ols(x: &[Vec<f64>], y: &[f64], jitter: Option<f64>) -> Result<Vec<f64>, CoreError> {
    let n = y.len();
    if n == 0 || x.len() != n {
        return Err(CoreError::DimensionMismatch { expected: n, got: x.len() });
    }
    let p = x[0].len();
    // A = X'X (+ jitter I), b = X'y.
    let mut a = vec![vec![0.0f64; p]; p];
    let mut b = vec![0.0f64; p];
    for i in 0..n {
        for j in 0..p {
            b[j] += x[i][j] * y[i];
            for k in j..p {
                a[j][k] += x[i][j] * x[i][k];
            }
        }
    }
    for j in 0..p {
        for k in 0..j {
            a[j][k] = a[k][j];
        }
        if let Some(eps) = jitter {
            a[j][j] += eps;
        }
    }
    // Gaussian elimination with partial pivoting.
    let scale: f64 = (0..p).map(|j| a[j][j].abs()).fold(0.0, f64::max).max(1.0);
    for col in 0..p {
        let (pivot_row, pivot) = (col..p)
            .map(|r| (r, a[r][col].abs()))
            .fold((col, 0.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        if pivot <= 1e-12 * scale {
            return Err(CoreError::RankDeficient);
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for r in (col + 1)..p {
            let f = a[r][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for c in col..p {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut beta = vec![0.0f64; p];
    for col in (0..p).rev() {
        let mut acc = b[col];
        for c in (col + 1)..p {
            acc -= a[col][c] * beta[c];
        }
        beta[col] = acc / a[col][col];
    }
    Ok(beta)
}

/// Depth-limited regression tree with greedy variance-reduction splits.
#[derive(Debug, Clone)]
pub struct TreeModel {
    nodes: Vec<TreeNode>,
}

#[derive(Debug, Clone)]
enum TreeNode {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

pub fn fit_tree(x: &[Vec<f64>], y: &[f64], max_depth: usize, min_leaf: usize) -> TreeModel {
    let mut model = TreeModel { nodes: Vec::new() };
    let idx: Vec<usize> = (0..y.len()).collect();
    build_node(&mut model, x, y, &idx, max_depth, min_leaf.max(1));
    model
}

fn build_node(
    model: &mut TreeModel,
    x: &[Vec<f64>],
    y: &[f64],
    idx: &[usize],
    depth_left: usize,
    min_leaf: usize,
) -> usize {
    let mean = idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len().max(1) as f64;
    if depth_left == 0 || idx.len() < 2 * min_leaf {
        model.nodes.push(TreeNode::Leaf { value: mean });
        return model.nodes.len() - 1;
    }
    let sse = |ids: &[usize]| -> f64 {
        let m = ids.iter().map(|&i| y[i]).sum::<f64>() / ids.len() as f64;
        ids.iter().map(|&i| (y[i] - m) * (y[i] - m)).sum()
    };
    let parent_sse = sse(idx);
    let p = x[0].len();
    let mut best: Option<(f64, usize, f64)> = None; // (sse, feature, threshold)
    for feature in 0..p {
        let mut values: Vec<f64> = idx.iter().map(|&i| x[i][feature]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let threshold = (w[0] + w[1]) / 2.0;
            let left: Vec<usize> =
                idx.iter().copied().filter(|&i| x[i][feature] <= threshold).collect();
            if left.len() < min_leaf || idx.len() - left.len() < min_leaf {
                continue;
            }
            let right: Vec<usize> =
                idx.iter().copied().filter(|&i| x[i][feature] > threshold).collect();
            let split_sse = sse(&left) + sse(&right);
            if best.as_ref().is_none_or(|&(s, _, _)| split_sse < s) {
                best = Some((split_sse, feature, threshold));
            }
        }
    }
    match best {
        Some((split_sse, feature, threshold)) if split_sse < parent_sse - 1e-15 => {
            let left_idx: Vec<usize> =
                idx.iter().copied().filter(|&i| x[i][feature] <= threshold).collect();
            let right_idx: Vec<usize> =
                idx.iter().copied().filter(|&i| x[i][feature] > threshold).collect();
            let slot = model.nodes.len();
            model.nodes.push(TreeNode::Leaf { value: mean }); // placeholder
            let left = build_node(model, x, y, &left_idx, depth_left - 1, min_leaf);
            let right = build_node(model, x, y, &right_idx, depth_left - 1, min_leaf);
            model.nodes[slot] = TreeNode::Split { feature, threshold, left, right };
            slot
        }
        _ => {
            model.nodes.push(TreeNode::Leaf { value: mean });
            model.nodes.len() - 1
        }
    }
}

impl TreeModel {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut node = 0usize;
        loop {
            match &self.nodes[node] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split { feature, threshold, left, right } => {
                    node = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

/// Solver settings for the meta models.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaConfig {
    pub cd_tol: f64,
    pub cd_max_iter: usize,
    /// Log-spaced lambda grid size from lambda_max down to lambda_max*1e-3.
    pub lambda_grid: usize,
    pub ols_jitter: f64,
    pub tree_depth: usize,
    pub tree_min_leaf: usize,
}

impl Default for MetaConfig {
    fn default() -> Self {
        MetaConfig {
            cd_tol: 1e-6,
            cd_max_iter: 20_000,
            lambda_grid: 50,
            ols_jitter: 1e-10,
            tree_depth: 3,
            tree_min_leaf: 2,
        }
    }
}

/// A fitted prediction pipeline: optional poly2 expansion, stored
/// standardization statistics, centered-target linear coefficients.
#[derive(Debug, Clone)]
pub struct MetaPipeline {
    pub expand_poly2: bool,
    pub standardizer: Standardizer,
    pub y_mean: f64,
    pub beta: Vec<f64>,
    pub lambda: f64,
}

impl MetaPipeline {
    fn design(&self, row_raw: &[f64]) -> Vec<f64> {
        let expanded =
            if self.expand_poly2 { poly2_features(row_raw) } else { row_raw.to_vec() };
        self.standardizer.transform(&expanded)
    }

    pub fn predict(&self, row_raw: &[f64]) -> f64 {
        self.y_mean + math::dot(&self.design(row_raw), &self.beta)
    }

    pub fn n_nonzero(&self) -> usize {
        self.beta.iter().filter(|&&b| b != 0.0).count()
    }
}

/// Coordinate-update stopping tolerance scaled to the target: roughly
/// sqrt(tol * var(y)), floored at tol itself. Keeps the iteration count
/// independent of the target's unit (CTR-scale targets converge as fast as
/// unit-scale ones).
fn scaled_tol(cd_tol: f64, y_centered: &[f64]) -> f64 {
    let n = y_centered.len().max(1) as f64;
    let var = y_centered.iter().map(|v| v * v).sum::<f64>() / n;
    math::sqrt(cd_tol * var).max(cd_tol)
}

fn prepare_design(
    rows_raw: &[Vec<f64>],
    y: &[f64],
    expand: bool,
) -> (Vec<Vec<f64>>, Standardizer, Vec<f64>, f64) {
    let expanded: Vec<Vec<f64>> = if expand {
        rows_raw.iter().map(|r| poly2_features(r)).collect()
    } else {
        rows_raw.to_vec()
    };
    let standardizer = Standardizer::fit(&expanded);
    let x = standardizer.transform_all(&expanded);
    let y_mean = stats::mean(y);
    let y_centered: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    (x, standardizer, y_centered, y_mean)
}

/// Fit a LASSO pipeline at a fixed lambda.
pub fn fit_lasso_pipeline(
    rows_raw: &[Vec<f64>],
    y: &[f64],
    lambda: f64,
    expand: bool,
    cfg: &MetaConfig,
) -> Result<MetaPipeline, CoreError> {
    let (x, standardizer, y_centered, y_mean) = prepare_design(rows_raw, y, expand);
    let tol = scaled_tol(cfg.cd_tol, &y_centered);
    let fit = fit_lasso(&x, &y_centered, lambda, tol, cfg.cd_max_iter, None)?;
    Ok(MetaPipeline { expand_poly2: expand, standardizer, y_mean, beta: fit.beta, lambda })
}

/// Fit an OLS pipeline (ridge jitter for rank deficiency).
pub fn fit_ols_pipeline(
    rows_raw: &[Vec<f64>],
    y: &[f64],
    expand: bool,
    cfg: &MetaConfig,
) -> Result<MetaPipeline, CoreError> {
    let (x, standardizer, y_centered, y_mean) = prepare_design(rows_raw, y, expand);
    let beta = fit_ols(&x, &y_centered, Some(cfg.ols_jitter))?;
    Ok(MetaPipeline { expand_poly2: expand, standardizer, y_mean, beta, lambda: 0.0 })
}

/// Generic leave-one-out cross validation: for every row, fit on the rest
/// (fresh standardization inside `fit_predict`) and predict the held-out
/// row. Predictions are aligned with the input rows.
pub fn loocv<F>(rows_raw: &[Vec<f64>], y: &[f64], mut fit_predict: F) -> Result<Vec<f64>, CoreError>
where
    F: FnMut(&[Vec<f64>], &[f64], &[f64]) -> Result<f64, CoreError>,
{
    let n = rows_raw.len();
    if n < 3 {
        return Err(CoreError::InvalidArgument("loocv needs at least 3 rows".into()));
    }
    let mut preds = Vec::with_capacity(n);
    for i in 0..n {
        let train_x: Vec<Vec<f64>> = rows_raw
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, r)| r.clone())
            .collect();
        let train_y: Vec<f64> = y
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &v)| v)
            .collect();
        preds.push(fit_predict(&train_x, &train_y, &rows_raw[i])?);
    }
    Ok(preds)
}

/// LASSO with the penalty chosen by LOOCV over a log-spaced grid from
/// lambda_max (computed on the full data) down to lambda_max*1e-3. Per fold
/// the whole path is fitted with warm starts; the lambda minimizing the
/// pooled LOOCV squared error wins. Returns the chosen lambda, the LOOCV
/// predictions at that lambda and the final pipeline fitted on all rows.
pub fn lasso_cv(
    rows_raw: &[Vec<f64>],
    y: &[f64],
    expand: bool,
    cfg: &MetaConfig,
) -> Result<(f64, Vec<f64>, MetaPipeline), CoreError> {
    let n = rows_raw.len();
    if n < 3 {
        return Err(CoreError::InvalidArgument("lasso_cv needs at least 3 rows".into()));
    }
    let (x_full, _, y_c_full, _) = prepare_design(rows_raw, y, expand);
    let lmax = lambda_max(&x_full, &y_c_full);
    if lmax == 0.0 {
        // Constant target: intercept-only model at any lambda.
        let pipeline = fit_lasso_pipeline(rows_raw, y, 0.0, expand, cfg)?;
        let preds = loocv(rows_raw, y, |tx, ty, test| {
            Ok(fit_lasso_pipeline(tx, ty, 0.0, expand, cfg)?.predict(test))
        })?;
        return Ok((0.0, preds, pipeline));
    }
    let grid_len = cfg.lambda_grid.max(2);
    let grid: Vec<f64> = (0..grid_len)
        .map(|k| lmax * math::powf(1e-3, k as f64 / (grid_len - 1) as f64))
        .collect();

    // preds[k][i] = LOOCV prediction of row i at grid lambda k.
    let mut preds = vec![vec![0.0f64; n]; grid_len];
    for i in 0..n {
        let train_raw: Vec<Vec<f64>> = rows_raw
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, r)| r.clone())
            .collect();
        let train_y: Vec<f64> = y
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &v)| v)
            .collect();
        let (x, standardizer, y_centered, y_mean) = prepare_design(&train_raw, &train_y, expand);
        let tol = scaled_tol(cfg.cd_tol, &y_centered);
        let test_design = {
            let expanded = if expand {
                poly2_features(&rows_raw[i])
            } else {
                rows_raw[i].clone()
            };
            standardizer.transform(&expanded)
        };
        let mut warm: Option<Vec<f64>> = None;
        for (k, &lambda) in grid.iter().enumerate() {
            let fit = fit_lasso(&x, &y_centered, lambda, tol, cfg.cd_max_iter, warm.take())?;
            preds[k][i] = y_mean + math::dot(&test_design, &fit.beta);
            warm = Some(fit.beta);
        }
    }

    let mut best_k = 0;
    let mut best_mse = f64::INFINITY;
    for k in 0..grid_len {
        let mse = preds[k]
            .iter()
            .zip(y)
            .map(|(p, &t)| (p - t) * (p - t))
            .sum::<f64>()
            / n as f64;
        if mse < best_mse {
            best_mse = mse;
            best_k = k;
        }
    }
    let lambda = grid[best_k];
    let pipeline = fit_lasso_pipeline(rows_raw, y, lambda, expand, cfg)?;
    Ok((lambda, preds.swap_remove(best_k), pipeline))
}

/// Prediction quality: R^2 plus Kendall tau-b with its two-sided p-value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionScores {
    pub r2: f64,
    pub tau_b: f64,
    pub p_value: f64,
    /// Target had zero variance (R^2 fixed at 0) or tau was undefined.
    pub degenerate: bool,
}

pub fn score_predictions(y: &[f64], y_hat: &[f64]) -> Result<PredictionScores, CoreError> {
    if y.len() != y_hat.len() {
        return Err(CoreError::DimensionMismatch { expected: y.len(), got: y_hat.len() });
    }
    if y.len() < 3 {
        return Err(CoreError::InvalidArgument("need at least 3 points".into()));
    }
    let mean_y = stats::mean(y);
    let ss_tot: f64 = y.iter().map(|v| (v - mean_y) * (v - mean_y)).sum();
    let constant = y.iter().all(|&v| v == y[0]);
    let (r2, mut degenerate) = if constant || ss_tot == 0.0 {
        (0.0, true)
    } else {
        let ss_res: f64 = y.iter().zip(y_hat).map(|(t, p)| (t - p) * (t - p)).sum();
        (1.0 - ss_res / ss_tot, false)
    };
    let (tau_b, p_value) = match stats::tau_b(y_hat, y) {
        Ok(t) => (t.tau, t.p_value),
        Err(_) => {
            degenerate = true;
            (0.0, 1.0)
        }
    };
    Ok(PredictionScores { r2, tau_b, p_value, degenerate })
}

/// The meta-regression dataset: one row per (arm, seniority segment).
#[derive(Debug, Clone)]
pub struct MetaDataset {
    pub feature_names: Vec<String>,
    /// Raw (unstandardized, unexpanded) feature rows: the 18 offline metric
    /// means plus the ordinal segment encoding.
    pub rows: Vec<Vec<f64>>,
    pub y_ctr: Vec<f64>,
    pub y_vrr: Vec<f64>,
    /// "variant_id.segment" per row.
    pub labels: Vec<String>,
}

/// Ordinal encoding of a segment for the feature vector.
pub fn segment_ordinal(segment: Segment) -> f64 {
    match segment {
        Segment::S1_2 => 1.0,
        Segment::S3_5 => 2.0,
        Segment::S6_15 => 3.0,
        Segment::S16Plus => 4.0,
    }
}

/// Join the arm offline reports with the online accounting into the meta
/// dataset. `segments` defaults to the three groups below 16+ (the 16+
/// group is excluded from modeling).
pub fn build_meta_dataset(
    arm_reports: &[&OfflineReport],
    accounting: &OnlineAccounting,
    segments: &[Segment],
) -> Result<MetaDataset, CoreError> {
    if arm_reports.is_empty() || segments.is_empty() {
        return Err(CoreError::InvalidArgument("empty arms or segments".into()));
    }
    let mut feature_names: Vec<String> =
        MetricId::ALL.iter().map(|m| String::from(m.name())).collect();
    feature_names.push(String::from("segment"));

    let mut out = MetaDataset {
        feature_names,
        rows: Vec::new(),
        y_ctr: Vec::new(),
        y_vrr: Vec::new(),
        labels: Vec::new(),
    };
    for (arm_idx, report) in arm_reports.iter().enumerate() {
        for &segment in segments {
            let row = accounting
                .row(arm_idx as u16, Some(segment))
                .ok_or_else(|| CoreError::InvalidArgument("missing online row".into()))?;
            let mut features: Vec<f64> =
                MetricId::ALL.iter().map(|&m| report.get(m)).collect();
            features.push(segment_ordinal(segment));
            out.rows.push(features);
            out.y_ctr.push(row.ctr());
            out.y_vrr.push(row.vrr());
            out.labels.push(format!("{}.{}", report.variant_id, segment.name()));
        }
    }
    Ok(out)
}

/// Predict the chosen online metric for every grid variant at a fixed
/// segment; clamped to [0,1], sorted descending with variant-id tie break.
pub fn rank_all_variants(
    pipeline: &MetaPipeline,
    reports: &[OfflineReport],
    segment: Segment,
) -> Vec<(String, f64)> {
    let mut out: Vec<(String, f64)> = reports
        .iter()
        .map(|r| {
            let mut features: Vec<f64> = MetricId::ALL.iter().map(|&m| r.get(m)).collect();
            features.push(segment_ordinal(segment));
            let pred = pipeline.predict(&features).clamp(0.0, 1.0);
            (r.variant_id.clone(), pred)
        })
        .collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    out
}
