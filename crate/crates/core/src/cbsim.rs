//! Content-based similarity: one-hot nominal attributes, standardized
//! numeric attributes, cosine similarity with a self-similarity switch.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::corpus::{Catalog, ItemId};
use crate::error::CoreError;
use crate::math;

/// Standardization statistics of one numeric column.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnStats {
    pub column: String,
    pub mean: f64,
    /// Population standard deviation over non-null entries.
    pub std: f64,
}

/// Item-by-feature matrix over the catalog attributes.
///
/// Columns are ordered by attribute name; a nominal attribute expands into
/// one binary column per observed category (category names sorted), a
/// numeric attribute contributes a single standardized column. Numeric nulls
/// impute to the mean, i.e. zero after standardization.
#[derive(Debug, Clone)]
pub struct AttributeMatrix {
    pub columns: Vec<String>,
    /// Row-major item vectors, `n_items x columns.len()`.
    pub rows: Vec<Vec<f64>>,
    pub numeric_stats: Vec<ColumnStats>,
    /// Numeric columns kept as all-zeros because their variance was zero.
    pub zero_variance: Vec<String>,
}

impl AttributeMatrix {
    pub fn n_items(&self) -> usize {
        self.rows.len()
    }
}

/// Vectorize with uniform attribute weights.
pub fn vectorize_attributes(catalog: &Catalog) -> AttributeMatrix {
    vectorize_attributes_weighted(catalog, &BTreeMap::new())
}

/// Vectorize the catalog attributes. `weights` scales all columns of the
/// named attribute after binarization/standardization; missing entries
/// default to 1.0.
pub fn vectorize_attributes_weighted(
    catalog: &Catalog,
    weights: &BTreeMap<String, f64>,
) -> AttributeMatrix {
    let n = catalog.n_items;
    enum Plan<'a> {
        Nominal(&'a crate::corpus::NominalAttr),
        Numeric(&'a crate::corpus::NumericAttr),
    }
    let mut plans: Vec<(&str, Plan)> = Vec::new();
    for a in &catalog.nominal {
        plans.push((a.name.as_str(), Plan::Nominal(a)));
    }
    for a in &catalog.numeric {
        plans.push((a.name.as_str(), Plan::Numeric(a)));
    }
    plans.sort_by(|a, b| a.0.cmp(b.0));

    let mut columns = Vec::new();
    let mut rows = vec![Vec::new(); n];
    let mut numeric_stats = Vec::new();
    let mut zero_variance = Vec::new();

    for (name, plan) in plans {
        let w = weights.get(name).copied().unwrap_or(1.0);
        match plan {
            Plan::Nominal(attr) => {
                // Categories sorted by name; `values` indexes the attribute's
                // own category table.
                let mut order: Vec<usize> = (0..attr.categories.len()).collect();
                order.sort_by(|&a, &b| attr.categories[a].cmp(&attr.categories[b]));
                for &cat in &order {
                    columns.push(format!("{name}={}", attr.categories[cat]));
                    for (i, row) in rows.iter_mut().enumerate() {
                        let hit = attr.values[i] == Some(cat as u32);
                        row.push(if hit { w } else { 0.0 });
                    }
                }
            }
            Plan::Numeric(attr) => {
                let non_null: Vec<f64> = attr.values.iter().flatten().copied().collect();
                let mean = crate::stats::mean(&non_null);
                let std = crate::stats::pop_std(&non_null);
                columns.push(String::from(name));
                numeric_stats.push(ColumnStats { column: String::from(name), mean, std });
                if std == 0.0 {
                    zero_variance.push(String::from(name));
                    for row in rows.iter_mut() {
                        row.push(0.0);
                    }
                } else {
                    for (i, row) in rows.iter_mut().enumerate() {
                        let z = match attr.values[i] {
                            Some(v) => (v - mean) / std,
                            None => 0.0,
                        };
                        row.push(z * w);
                    }
                }
            }
        }
    }

    AttributeMatrix { columns, rows, numeric_stats, zero_variance }
}

/// Cosine similarity between two items' attribute vectors.
///
/// Self-similarity is 1.0 when `allow_self` and 0.0 otherwise; for distinct
/// items a zero vector yields 0.
pub fn cb_similarity(
    m: &AttributeMatrix,
    a: ItemId,
    b: ItemId,
    allow_self: bool,
) -> Result<f64, CoreError> {
    let n = m.n_items();
    if a as usize >= n {
        return Err(CoreError::UnknownItem(a));
    }
    if b as usize >= n {
        return Err(CoreError::UnknownItem(b));
    }
    if a == b {
        return Ok(if allow_self { 1.0 } else { 0.0 });
    }
    Ok(math::cosine(&m.rows[a as usize], &m.rows[b as usize]))
}

/// Dense precomputed item-to-item similarity table.
#[derive(Debug, Clone)]
pub struct SimTable {
    n: usize,
    data: Vec<f64>,
}

impl SimTable {
    pub fn n_items(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, a: ItemId, b: ItemId) -> f64 {
        self.data[a as usize * self.n + b as usize]
    }

    /// Similarity row of one query item, complete over the catalog.
    #[inline]
    pub fn row(&self, a: ItemId) -> &[f64] {
        &self.data[a as usize * self.n..(a as usize + 1) * self.n]
    }

    /// Build from the attribute matrix; the diagonal carries the
    /// self-similarity switch.
    pub fn from_attributes(m: &AttributeMatrix, allow_self: bool) -> SimTable {
        Self::from_vectors_with_diagonal(&m.rows, if allow_self { 1.0 } else { 0.0 }, None)
    }

    /// Build from embedding vectors; cold items (flagged) have similarity 0
    /// to everything including themselves.
    pub fn from_embeddings(vectors: &[Vec<f64>], cold: &[bool]) -> SimTable {
        Self::from_vectors_with_diagonal(vectors, 1.0, Some(cold))
    }

    fn from_vectors_with_diagonal(
        vectors: &[Vec<f64>],
        diagonal: f64,
        cold: Option<&[bool]>,
    ) -> SimTable {
        let n = vectors.len();
        let norms: Vec<f64> = vectors.iter().map(|v| math::norm(v)).collect();
        let zero = |i: usize| cold.is_some_and(|c| c[i]) || norms[i] == 0.0;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            // Attribute tables keep the switch value on the diagonal even for
            // zero vectors; embedding tables zero out cold items entirely.
            data[i * n + i] = if cold.is_some() && zero(i) { 0.0 } else { diagonal };
            if zero(i) {
                continue;
            }
            for j in (i + 1)..n {
                if zero(j) {
                    continue;
                }
                let s = math::dot(&vectors[i], &vectors[j]) / (norms[i] * norms[j]);
                data[i * n + j] = s;
                data[j * n + i] = s;
            }
        }
        SimTable { n, data }
    }
}
