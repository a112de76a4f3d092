//! Item embeddings trained with skip-gram negative sampling (SGNS), either
//! over per-user visit sequences or over item description tokens with a
//! per-document vector.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::corpus::ItemId;
use crate::error::CoreError;
use crate::math::{self, sigmoid};
use crate::rng::{CumulativeSampler, Rng};

/// Trainer hyperparameters. The grid only varies embedding size and window;
/// everything here stays fixed across the grid (but is configurable).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSpec {
    pub epochs: u32,
    pub negatives: u32,
    pub initial_lr: f64,
    pub min_lr: f64,
    pub noise_exponent: f64,
    pub seed: u64,
}

impl TrainSpec {
    pub fn new(seed: u64) -> Self {
        TrainSpec {
            epochs: 15,
            negatives: 5,
            initial_lr: 0.025,
            min_lr: 1e-4,
            noise_exponent: 0.75,
            seed,
        }
    }

    fn validate(&self) -> Result<(), CoreError> {
        if self.epochs < 1 || self.negatives < 1 {
            return Err(CoreError::InvalidArgument("epochs and negatives must be >= 1".into()));
        }
        if !(self.min_lr > 0.0 && self.min_lr <= self.initial_lr) {
            return Err(CoreError::InvalidArgument("require 0 < min_lr <= initial_lr".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EmbedKind {
    SessionW2v,
    DocD2v,
}

impl EmbedKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EmbedKind::SessionW2v => "session_w2v",
            EmbedKind::DocD2v => "doc_d2v",
        }
    }
}

/// Trained per-item embeddings. Every catalog item has a vector; items
/// without any training signal keep the zero vector and are flagged cold.
#[derive(Debug, Clone)]
pub struct EmbeddingModel {
    pub kind: EmbedKind,
    pub dim: usize,
    pub window: usize,
    pub vectors: Vec<Vec<f64>>,
    pub cold: Vec<bool>,
    /// Mean SGNS loss over the final epoch.
    pub final_loss: f64,
}

/// Gradients of the SGNS loss with respect to every input vector.
#[derive(Debug, Clone)]
pub struct SgnsGradients {
    pub loss: f64,
    pub d_center: Vec<f64>,
    pub d_context: Vec<f64>,
    pub d_negatives: Vec<Vec<f64>>,
}

/// Numerically stable ln(1 + e^z).
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + math::ln(1.0 + math::exp(-z))
    } else {
        math::ln(1.0 + math::exp(z))
    }
}

/// SGNS loss: -ln sigma(c.x) - sum_k ln sigma(-n_k.x).
pub fn sgns_loss(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> Result<f64, CoreError> {
    check_dims(center, context, negatives)?;
    let mut loss = softplus(-math::dot(center, context));
    for n in negatives {
        loss += softplus(math::dot(center, n));
    }
    Ok(loss)
}

/// SGNS loss with analytic gradients for the center, context and negative
/// vectors.
pub fn sgns_loss_and_grad(
    center: &[f64],
    context: &[f64],
    negatives: &[&[f64]],
) -> Result<SgnsGradients, CoreError> {
    check_dims(center, context, negatives)?;
    let dim = center.len();
    let d_pos = math::dot(center, context);
    let mut loss = softplus(-d_pos);
    let g_pos = sigmoid(d_pos) - 1.0;
    let mut d_center = vec![0.0; dim];
    let mut d_context = vec![0.0; dim];
    for i in 0..dim {
        d_center[i] += g_pos * context[i];
        d_context[i] = g_pos * center[i];
    }
    let mut d_negatives = Vec::with_capacity(negatives.len());
    for n in negatives {
        let d_neg = math::dot(center, n);
        loss += softplus(d_neg);
        let g_neg = sigmoid(d_neg);
        let mut dn = vec![0.0; dim];
        for i in 0..dim {
            d_center[i] += g_neg * n[i];
            dn[i] = g_neg * center[i];
        }
        d_negatives.push(dn);
    }
    Ok(SgnsGradients { loss, d_center, d_context, d_negatives })
}

fn check_dims(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> Result<(), CoreError> {
    let dim = center.len();
    if context.len() != dim {
        return Err(CoreError::DimensionMismatch { expected: dim, got: context.len() });
    }
    for n in negatives {
        if n.len() != dim {
            return Err(CoreError::DimensionMismatch { expected: dim, got: n.len() });
        }
    }
    Ok(())
}

/// Noise distribution proportional to frequency^exponent, normalized to 1.
pub fn noise_distribution(counts: &[u64], exponent: f64) -> Vec<f64> {
    let raised: Vec<f64> = counts
        .iter()
        .map(|&c| if c == 0 { 0.0 } else { math::powf(c as f64, exponent) })
        .collect();
    let total: f64 = raised.iter().sum();
    if total == 0.0 {
        return raised;
    }
    raised.iter().map(|w| w / total).collect()
}

/// All (center, context) pairs of one sequence under the window:
/// |pos(center) - pos(context)| <= window, center != context position.
pub fn positive_pairs(seq: &[ItemId], window: usize) -> Vec<(ItemId, ItemId)> {
    let mut out = Vec::new();
    for_each_pair(seq, window, |c, x| out.push((c, x)));
    out
}

fn for_each_pair(seq: &[ItemId], window: usize, mut visit: impl FnMut(ItemId, ItemId)) {
    for i in 0..seq.len() {
        let lo = i.saturating_sub(window);
        let hi = (i + window).min(seq.len().saturating_sub(1));
        for j in lo..=hi {
            if j != i {
                visit(seq[i], seq[j]);
            }
        }
    }
}

fn count_pairs(seq_len: usize, window: usize) -> u64 {
    let mut n = 0u64;
    for i in 0..seq_len {
        let lo = i.saturating_sub(window);
        let hi = (i + window).min(seq_len.saturating_sub(1));
        n += (hi - lo) as u64;
    }
    n
}

/// Flat row-major table of vectors.
struct Table {
    dim: usize,
    data: Vec<f64>,
}

impl Table {
    fn zeros(n: usize, dim: usize) -> Table {
        Table { dim, data: vec![0.0; n * dim] }
    }

    fn uniform_init(n: usize, dim: usize, rng: &mut Rng) -> Table {
        let half = 0.5 / dim as f64;
        let data = (0..n * dim).map(|_| rng.gen_f64(-half, half)).collect();
        Table { dim, data }
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// Learning-rate schedule: linear decay over all scheduled updates, floored
/// at `min_lr`.
struct LrSchedule {
    initial: f64,
    min: f64,
    total: u64,
    processed: u64,
}

impl LrSchedule {
    fn next(&mut self) -> f64 {
        let frac = if self.total == 0 { 1.0 } else { self.processed as f64 / self.total as f64 };
        self.processed += 1;
        (self.initial * (1.0 - frac)).max(self.min)
    }
}

struct SgnsTrainer<'a> {
    out: Table,
    sampler: CumulativeSampler,
    negatives: u32,
    rng: &'a mut Rng,
    lr: LrSchedule,
    /// Accumulated input-side gradient; reused across steps.
    grad: Vec<f64>,
    /// Snapshot of the input row; reused across steps.
    x_buf: Vec<f64>,
}

impl<'a> SgnsTrainer<'a> {
    /// One SGD step on the pair (input row of `input`, output index). The
    /// gradient is scaled by `scale`; returns the (unscaled) pair loss.
    fn step(&mut self, input: &mut Table, input_idx: usize, output_idx: usize, scale: f64) -> f64 {
        let lr = self.lr.next() * scale;
        let dim = input.dim;
        self.grad.clear();
        self.grad.resize(dim, 0.0);
        self.x_buf.clear();
        self.x_buf.extend_from_slice(input.row(input_idx));

        // Positive target, then sampled negatives; output rows update in
        // place, the input update accumulates against the snapshot.
        let update = |out: &mut Table, idx: usize, label: f64, grad: &mut [f64]| -> f64 {
            let row = out.row_mut(idx);
            let d = math::dot(&self.x_buf, row);
            let g = (sigmoid(d) - label) * lr;
            for i in 0..dim {
                grad[i] += g * row[i];
                row[i] -= g * self.x_buf[i];
            }
            if label == 1.0 {
                softplus(-d)
            } else {
                softplus(d)
            }
        };

        let mut loss = update(&mut self.out, output_idx, 1.0, &mut self.grad);
        for _ in 0..self.negatives {
            let mut neg = self.sampler.sample(self.rng);
            let mut attempts = 0;
            while neg == output_idx && attempts < 8 {
                neg = self.sampler.sample(self.rng);
                attempts += 1;
            }
            if neg == output_idx {
                continue; // degenerate vocabulary, skip this negative
            }
            loss += update(&mut self.out, neg, 0.0, &mut self.grad);
        }

        let x = input.row_mut(input_idx);
        for i in 0..dim {
            x[i] -= self.grad[i];
        }
        loss
    }
}

/// Train session embeddings over per-user visit sequences. Deterministic for
/// a fixed (sequences, dim, window, spec) input; sequences should be passed
/// in a stable order (ascending user id).
pub fn fit_session_embeddings(
    sequences: &[Vec<ItemId>],
    n_items: usize,
    dim: usize,
    window: usize,
    spec: &TrainSpec,
) -> Result<EmbeddingModel, CoreError> {
    spec.validate()?;
    let pairs_per_epoch: u64 = sequences.iter().map(|s| count_pairs(s.len(), window)).sum();
    if pairs_per_epoch == 0 {
        return Err(CoreError::NoTrainingPairs);
    }
    let mut counts = vec![0u64; n_items];
    for seq in sequences {
        for &it in seq {
            counts[it as usize] += 1;
        }
    }
    let noise = noise_distribution(&counts, spec.noise_exponent);
    let sampler = CumulativeSampler::new(&noise).ok_or(CoreError::NoTrainingPairs)?;

    let mut rng = Rng::new(spec.seed);
    let mut input = Table::uniform_init(n_items, dim, &mut rng);
    let out = Table::zeros(n_items, dim);
    let mut trainer = SgnsTrainer {
        out,
        sampler,
        negatives: spec.negatives,
        rng: &mut rng,
        lr: LrSchedule {
            initial: spec.initial_lr,
            min: spec.min_lr,
            total: pairs_per_epoch * u64::from(spec.epochs),
            processed: 0,
        },
        grad: Vec::new(),
        x_buf: Vec::new(),
    };

    let mut final_loss = 0.0;
    for epoch in 0..spec.epochs {
        let mut epoch_loss = 0.0;
        for seq in sequences {
            for i in 0..seq.len() {
                let lo = i.saturating_sub(window);
                let hi = (i + window).min(seq.len() - 1);
                for j in lo..=hi {
                    if j != i {
                        epoch_loss +=
                            trainer.step(&mut input, seq[i] as usize, seq[j] as usize, 1.0);
                    }
                }
            }
        }
        if epoch + 1 == spec.epochs {
            final_loss = epoch_loss / pairs_per_epoch as f64;
        }
    }

    let cold: Vec<bool> = counts.iter().map(|&c| c == 0).collect();
    let vectors = export_rows(&input, &cold);
    Ok(EmbeddingModel { kind: EmbedKind::SessionW2v, dim, window, vectors, cold, final_loss })
}

/// Train document vectors over normalized description tokens: the document
/// vector predicts each of its tokens (negative sampling over the token
/// vocabulary), plus a half-weight token-to-token skip-gram term within the
/// window.
pub fn fit_doc_embeddings(
    docs: &[Vec<String>],
    dim: usize,
    window: usize,
    spec: &TrainSpec,
) -> Result<EmbeddingModel, CoreError> {
    spec.validate()?;
    let vocab: BTreeSet<&str> = docs.iter().flatten().map(String::as_str).collect();
    if vocab.is_empty() {
        return Err(CoreError::EmptyVocabulary);
    }
    let vocab: Vec<&str> = vocab.into_iter().collect();
    let index_of = |tok: &str| vocab.binary_search(&tok).expect("token in vocab");

    let doc_tokens: Vec<Vec<usize>> = docs
        .iter()
        .map(|toks| toks.iter().map(|t| index_of(t)).collect())
        .collect();
    let mut counts = vec![0u64; vocab.len()];
    for toks in &doc_tokens {
        for &t in toks {
            counts[t] += 1;
        }
    }
    let noise = noise_distribution(&counts, spec.noise_exponent);
    let sampler = CumulativeSampler::new(&noise).ok_or(CoreError::EmptyVocabulary)?;

    let doc_pairs: u64 = doc_tokens.iter().map(|t| t.len() as u64).sum();
    let ctx_pairs: u64 = doc_tokens.iter().map(|t| count_pairs(t.len(), window)).sum();
    let pairs_per_epoch = doc_pairs + ctx_pairs;
    if pairs_per_epoch == 0 {
        return Err(CoreError::EmptyVocabulary);
    }

    let mut rng = Rng::new(spec.seed);
    let mut doc_table = Table::uniform_init(docs.len(), dim, &mut rng);
    let mut tok_in = Table::uniform_init(vocab.len(), dim, &mut rng);
    let tok_out = Table::zeros(vocab.len(), dim);
    let mut trainer = SgnsTrainer {
        out: tok_out,
        sampler,
        negatives: spec.negatives,
        rng: &mut rng,
        lr: LrSchedule {
            initial: spec.initial_lr,
            min: spec.min_lr,
            total: pairs_per_epoch * u64::from(spec.epochs),
            processed: 0,
        },
        grad: Vec::new(),
        x_buf: Vec::new(),
    };

    let mut final_loss = 0.0;
    for epoch in 0..spec.epochs {
        let mut epoch_loss = 0.0;
        for (d, toks) in doc_tokens.iter().enumerate() {
            for (i, &tok) in toks.iter().enumerate() {
                epoch_loss += trainer.step(&mut doc_table, d, tok, 1.0);
                let lo = i.saturating_sub(window);
                let hi = (i + window).min(toks.len() - 1);
                for j in lo..=hi {
                    if j != i {
                        epoch_loss += trainer.step(&mut tok_in, tok, toks[j], 0.5);
                    }
                }
            }
        }
        if epoch + 1 == spec.epochs {
            final_loss = epoch_loss / pairs_per_epoch as f64;
        }
    }

    let cold: Vec<bool> = doc_tokens.iter().map(Vec::is_empty).collect();
    let vectors = export_rows(&doc_table, &cold);
    Ok(EmbeddingModel { kind: EmbedKind::DocD2v, dim, window, vectors, cold, final_loss })
}

fn export_rows(table: &Table, cold: &[bool]) -> Vec<Vec<f64>> {
    cold.iter()
        .enumerate()
        .map(|(i, &is_cold)| {
            if is_cold {
                vec![0.0; table.dim]
            } else {
                table.row(i).to_vec()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn loss_on_zero_vectors_is_two_ln_two() {
        let z = [0.0, 0.0, 0.0];
        let loss = sgns_loss(&z, &z, &[&z]).unwrap();
        assert!((loss - 2.0 * math::ln(2.0)).abs() < 1e-12);
        assert!((loss - 1.3863).abs() < 1e-4);
    }

    #[test]
    fn loss_decreases_as_positive_dot_grows() {
        let c = [1.0, 0.0];
        let mut prev = f64::INFINITY;
        for scale in [0.5, 1.0, 2.0, 8.0, 32.0] {
            let x = [scale, 0.0];
            let l = softplus(-math::dot(&x, &c));
            assert!(l < prev);
            prev = l;
        }
    }

    #[test]
    fn gradients_match_central_finite_differences() {
        let mut rng = Rng::new(42);
        let dim = 6;
        let h = 1e-5;
        for _ in 0..100 {
            let gen = |rng: &mut Rng| -> Vec<f64> {
                (0..dim).map(|_| rng.gen_f64(-1.5, 1.5)).collect()
            };
            let center = gen(&mut rng);
            let context = gen(&mut rng);
            let negs: Vec<Vec<f64>> = (0..3).map(|_| gen(&mut rng)).collect();
            let neg_refs: Vec<&[f64]> = negs.iter().map(Vec::as_slice).collect();
            let g = sgns_loss_and_grad(&center, &context, &neg_refs).unwrap();

            let check = |analytic: f64, plus: f64, minus: f64| {
                let numeric = (plus - minus) / (2.0 * h);
                let denom = analytic.abs().max(numeric.abs()).max(1e-8);
                let rel = (analytic - numeric).abs() / denom;
                assert!(rel < 1e-4, "analytic {analytic} vs numeric {numeric}");
            };

            for i in 0..dim {
                let mut p = center.clone();
                let mut m = center.clone();
                p[i] += h;
                m[i] -= h;
                check(
                    g.d_center[i],
                    sgns_loss(&p, &context, &neg_refs).unwrap(),
                    sgns_loss(&m, &context, &neg_refs).unwrap(),
                );

                let mut p = context.clone();
                let mut m = context.clone();
                p[i] += h;
                m[i] -= h;
                check(
                    g.d_context[i],
                    sgns_loss(&center, &p, &neg_refs).unwrap(),
                    sgns_loss(&center, &m, &neg_refs).unwrap(),
                );
            }
            for (k, n) in negs.iter().enumerate() {
                for i in 0..dim {
                    let mut p = n.clone();
                    let mut m = n.clone();
                    p[i] += h;
                    m[i] -= h;
                    let mut refs_p: Vec<&[f64]> = neg_refs.clone();
                    let mut refs_m: Vec<&[f64]> = neg_refs.clone();
                    refs_p[k] = &p;
                    refs_m[k] = &m;
                    check(
                        g.d_negatives[k][i],
                        sgns_loss(&center, &context, &refs_p).unwrap(),
                        sgns_loss(&center, &context, &refs_m).unwrap(),
                    );
                }
            }
        }
    }

    #[test]
    fn window_one_pairs_are_exact() {
        let pairs = positive_pairs(&[10, 11, 12], 1);
        assert_eq!(pairs, vec![(10, 11), (11, 10), (11, 12), (12, 11)]);
    }

    #[test]
    fn pairs_respect_window_bound() {
        let seq: Vec<ItemId> = (0..9).collect();
        for window in 1..=4usize {
            for (c, x) in positive_pairs(&seq, window) {
                let d = (c as i64 - x as i64).unsigned_abs() as usize;
                assert!(d >= 1 && d <= window);
            }
            assert_eq!(positive_pairs(&seq, window).len() as u64, count_pairs(9, window));
        }
    }

    #[test]
    fn noise_distribution_sums_to_one() {
        let d = noise_distribution(&[10, 3, 0, 7], 0.75);
        let total: f64 = d.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert_eq!(d[2], 0.0);
    }

    #[test]
    fn session_training_is_deterministic_and_shaped() {
        let seqs: Vec<Vec<ItemId>> =
            vec![vec![0, 1, 2, 0, 1], vec![3, 4, 3, 4], vec![0, 2, 1]];
        let spec = TrainSpec { epochs: 3, ..TrainSpec::new(9) };
        let a = fit_session_embeddings(&seqs, 6, 8, 2, &spec).unwrap();
        let b = fit_session_embeddings(&seqs, 6, 8, 2, &spec).unwrap();
        assert_eq!(a.vectors, b.vectors);
        assert_eq!(a.vectors.len(), 6);
        assert!(a.vectors.iter().all(|v| v.len() == 8 && v.iter().all(|x| x.is_finite())));
        // Item 5 never occurs -> cold, zero vector.
        assert!(a.cold[5]);
        assert!(a.vectors[5].iter().all(|&x| x == 0.0));
        assert!(!a.cold[0]);
    }

    #[test]
    fn no_sequence_of_two_errors() {
        let seqs: Vec<Vec<ItemId>> = vec![vec![0], vec![1]];
        let err = fit_session_embeddings(&seqs, 2, 4, 2, &TrainSpec::new(1)).unwrap_err();
        assert_eq!(err, CoreError::NoTrainingPairs);
    }

    #[test]
    fn co_visited_items_end_up_closer() {
        // Two disjoint co-visit groups.
        let mut seqs = Vec::new();
        let mut rng = Rng::new(5);
        for u in 0..200 {
            let base: ItemId = if u % 2 == 0 { 0 } else { 5 };
            let seq: Vec<ItemId> = (0..6).map(|_| base + rng.gen_range(5) as u32).collect();
            seqs.push(seq);
        }
        let spec = TrainSpec { epochs: 8, ..TrainSpec::new(77) };
        let model = fit_session_embeddings(&seqs, 10, 16, 2, &spec).unwrap();
        let mut intra = Vec::new();
        let mut inter = Vec::new();
        for a in 0..10u32 {
            for b in 0..10u32 {
                if a >= b {
                    continue;
                }
                let c = math::cosine(&model.vectors[a as usize], &model.vectors[b as usize]);
                if (a < 5) == (b < 5) {
                    intra.push(c);
                } else {
                    inter.push(c);
                }
            }
        }
        let mi = crate::stats::mean(&intra);
        let me = crate::stats::mean(&inter);
        assert!(mi > me + 0.2, "intra {mi} vs inter {me}");
    }

    #[test]
    fn doc_training_identical_texts_align() {
        // Two vocabulary pools; docs 0 and 1 share the exact same tokens.
        let pool_a: Vec<String> = (0..15).map(|i| alloc::format!("alpha{i}")).collect();
        let pool_b: Vec<String> = (0..15).map(|i| alloc::format!("beta{i}")).collect();
        let mut rng = Rng::new(13);
        let mut docs: Vec<Vec<String>> = Vec::new();
        let shared: Vec<String> =
            (0..10).map(|_| pool_a[rng.gen_range(15) as usize].to_string()).collect();
        docs.push(shared.clone());
        docs.push(shared);
        for d in 2..20 {
            let pool = if d % 2 == 0 { &pool_a } else { &pool_b };
            docs.push((0..10).map(|_| pool[rng.gen_range(15) as usize].clone()).collect());
        }
        let spec = TrainSpec { epochs: 40, ..TrainSpec::new(3) };
        let model = fit_doc_embeddings(&docs, 16, 2, &spec).unwrap();
        let twin = math::cosine(&model.vectors[0], &model.vectors[1]);
        let mut others = Vec::new();
        for d in 2..20 {
            others.push(math::cosine(&model.vectors[0], &model.vectors[d]));
        }
        let mean_others = crate::stats::mean(&others);
        assert!(twin > mean_others, "twin {twin} vs mean {mean_others}");
    }

    #[test]
    fn doc_empty_text_is_cold_zero() {
        let docs = vec![
            vec!["alpine".to_string(), "lake".to_string()],
            Vec::new(),
            vec!["lake".to_string(), "shore".to_string()],
        ];
        let model = fit_doc_embeddings(&docs, 8, 1, &TrainSpec::new(2)).unwrap();
        assert!(model.cold[1]);
        assert!(model.vectors[1].iter().all(|&x| x == 0.0));
        assert_eq!(model.vectors.len(), 3);
        assert!(model.vectors.iter().flatten().all(|x| x.is_finite()));
    }

    #[test]
    fn all_docs_empty_errors() {
        let docs: Vec<Vec<String>> = vec![Vec::new(), Vec::new()];
        let err = fit_doc_embeddings(&docs, 8, 1, &TrainSpec::new(2)).unwrap_err();
        assert_eq!(err, CoreError::EmptyVocabulary);
    }
}

