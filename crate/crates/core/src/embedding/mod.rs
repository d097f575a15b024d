//! Skip-gram negative-sampling embeddings trained from scratch.
//!
//! [`build_vocab`] keeps every corpus token (min count 1), so speaker
//! tokens get vectors exactly like words. [`sgns_loss`] / [`sgns_grad`]
//! are the training objective and its analytic gradient; [`train`] runs
//! SGD over all in-window (target, context) pairs with negatives drawn
//! from the unigram^0.75 table.

mod model;
mod train;

pub use model::{export_text, load_model, save_model, EmbeddingModel, TrainMeta, FORMAT_VERSION, MAGIC};
pub use train::{train, TrainConfig};

use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, Result};

/// Token ↔ index ↔ count, ordered by descending count with lexicographic
/// tie-break. Every corpus token is present.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    index_of: HashMap<String, u32>,
    tokens: Vec<String>,
    counts: Vec<u64>,
    total_tokens: u64,
}

impl Vocabulary {
    /// Rebuild from (token, count) pairs already in index order. Used by
    /// model deserialization; validates bijectivity and positive counts.
    pub fn from_entries(entries: Vec<(String, u64)>) -> Result<Vocabulary> {
        let mut index_of = HashMap::with_capacity(entries.len());
        let mut tokens = Vec::with_capacity(entries.len());
        let mut counts = Vec::with_capacity(entries.len());
        let mut total = 0u64;
        for (i, (token, count)) in entries.into_iter().enumerate() {
            if count == 0 {
                return Err(Error::data(format!("vocabulary count for {token:?} is zero")));
            }
            if index_of.insert(token.clone(), i as u32).is_some() {
                return Err(Error::data(format!("duplicate vocabulary token {token:?}")));
            }
            tokens.push(token);
            counts.push(count);
            total += count;
        }
        Ok(Vocabulary {
            index_of,
            tokens,
            counts,
            total_tokens: total,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn index(&self, token: &str) -> Option<u32> {
        self.index_of.get(token).copied()
    }

    pub fn token(&self, index: u32) -> &str {
        &self.tokens[index as usize]
    }

    pub fn count(&self, index: u32) -> u64 {
        self.counts[index as usize]
    }

    /// Total token occurrences in the corpus the vocabulary was built from.
    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    /// (token, count) pairs in index order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.tokens
            .iter()
            .map(String::as_str)
            .zip(self.counts.iter().copied())
    }
}

/// Count every distinct token; index order is descending count, ties
/// broken lexicographically. Errors on an empty corpus.
pub fn build_vocab(corpus: &[Vec<String>]) -> Result<Vocabulary> {
    let mut freq: HashMap<&str, u64> = HashMap::new();
    for doc in corpus {
        for token in doc {
            *freq.entry(token.as_str()).or_insert(0) += 1;
        }
    }
    if freq.is_empty() {
        return Err(Error::EmptyInput("corpus has no tokens"));
    }
    let mut entries: Vec<(&str, u64)> = freq.into_iter().collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    Vocabulary::from_entries(
        entries
            .into_iter()
            .map(|(t, c)| (t.to_string(), c))
            .collect(),
    )
}

/// Cumulative distribution over the vocabulary under counts^power.
#[derive(Debug, Clone)]
pub struct NegativeSampler {
    cdf: Vec<f64>,
}

/// `P(i) = count(i)^power / Σ_j count(j)^power`, strictly positive for
/// every token since counts are ≥ 1.
pub fn build_negative_table(vocab: &Vocabulary, power: f64) -> NegativeSampler {
    let weights: Vec<f64> = (0..vocab.len() as u32)
        .map(|i| (vocab.count(i) as f64).powf(power))
        .collect();
    let total: f64 = weights.iter().sum();
    let mut cdf = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in &weights {
        acc += w / total;
        cdf.push(acc);
    }
    if let Some(last) = cdf.last_mut() {
        *last = 1.0;
    }
    NegativeSampler { cdf }
}

impl NegativeSampler {
    pub fn prob(&self, index: u32) -> f64 {
        let i = index as usize;
        if i == 0 {
            self.cdf[0]
        } else {
            self.cdf[i] - self.cdf[i - 1]
        }
    }

    pub fn len(&self) -> usize {
        self.cdf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cdf.is_empty()
    }

    /// Inverse-CDF draw.
    pub fn sample(&self, rng: &mut impl Rng) -> u32 {
        let u: f64 = rng.random();
        self.cdf.partition_point(|&c| c <= u) as u32
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// ln(1 + e^x), overflow-safe. Note −ln σ(x) = softplus(−x).
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn check_dims(u: &[f64], v: &[f64], negatives: &[&[f64]]) -> Result<()> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    for n in negatives {
        if n.len() != u.len() {
            return Err(Error::DimensionMismatch {
                left: u.len(),
                right: n.len(),
            });
        }
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// SGNS objective for one (target, context) pair:
/// `L = −ln σ(u·v) − Σ_i ln σ(−u·n_i)`.
pub fn sgns_loss(u: &[f64], v: &[f64], negatives: &[&[f64]]) -> Result<f64> {
    check_dims(u, v, negatives)?;
    let mut loss = softplus(-dot(u, v));
    for n in negatives {
        loss += softplus(dot(u, n));
    }
    Ok(loss)
}

/// Analytic gradients of [`sgns_loss`] with respect to the target vector,
/// the context vector, and each negative vector.
#[derive(Debug, Clone)]
pub struct SgnsGradients {
    pub target: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

/// `∂L/∂u = (σ(u·v)−1)·v + Σ σ(u·n_i)·n_i`, `∂L/∂v = (σ(u·v)−1)·u`,
/// `∂L/∂n_i = σ(u·n_i)·u`.
pub fn sgns_grad(u: &[f64], v: &[f64], negatives: &[&[f64]]) -> Result<SgnsGradients> {
    check_dims(u, v, negatives)?;
    let dim = u.len();
    let g_pos = sigmoid(dot(u, v)) - 1.0;
    let mut du = vec![0.0; dim];
    for d in 0..dim {
        du[d] += g_pos * v[d];
    }
    let dv: Vec<f64> = u.iter().map(|x| g_pos * x).collect();
    let mut dnegs = Vec::with_capacity(negatives.len());
    for n in negatives {
        let g_neg = sigmoid(dot(u, n));
        for d in 0..dim {
            du[d] += g_neg * n[d];
        }
        dnegs.push(u.iter().map(|x| g_neg * x).collect());
    }
    Ok(SgnsGradients {
        target: du,
        context: dv,
        negatives: dnegs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn corpus(docs: &[&str]) -> Vec<Vec<String>> {
        docs.iter()
            .map(|d| d.split_whitespace().map(str::to_string).collect())
            .collect()
    }

    #[test]
    fn vocab_counts_and_order() {
        let v = build_vocab(&corpus(&["a b a"])).unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v.index("a"), Some(0));
        assert_eq!(v.index("b"), Some(1));
        assert_eq!(v.count(0), 2);
        assert_eq!(v.count(1), 1);
        assert_eq!(v.total_tokens(), 3);
    }

    #[test]
    fn vocab_ties_break_lexicographically() {
        let v = build_vocab(&corpus(&["zeta alpha", "mid mid"])).unwrap();
        assert_eq!(v.index("mid"), Some(0));
        assert_eq!(v.index("alpha"), Some(1));
        assert_eq!(v.index("zeta"), Some(2));
    }

    #[test]
    fn vocab_deterministic_across_runs() {
        let c = corpus(&["the cat sat", "the dog ran", "cats and dogs"]);
        let a = build_vocab(&c).unwrap();
        let b = build_vocab(&c).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn vocab_empty_corpus_is_error() {
        assert!(build_vocab(&[]).is_err());
        assert!(build_vocab(&corpus(&[""])).is_err());
    }

    #[test]
    fn vocab_covers_speaker_tokens() {
        let c = corpus(&["spk::ann::single hello world", "spk::bob::mixed hello"]);
        let v = build_vocab(&c).unwrap();
        assert_eq!(v.len(), 4);
        assert!(v.index("spk::ann::single").is_some());
        assert!(v.index("spk::bob::mixed").is_some());
    }

    #[test]
    fn negative_table_matches_closed_form() {
        let v = build_vocab(&corpus(&["a a a b"])).unwrap();
        let sampler = build_negative_table(&v, 0.75);
        let pa = 3f64.powf(0.75) / (3f64.powf(0.75) + 1.0);
        assert!((sampler.prob(v.index("a").unwrap()) - pa).abs() < 1e-12);
        assert!((pa - 0.6951).abs() < 1e-4);
        let total: f64 = (0..v.len() as u32).map(|i| sampler.prob(i)).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn negative_table_single_token() {
        let v = build_vocab(&corpus(&["only only"])).unwrap();
        let sampler = build_negative_table(&v, 0.75);
        assert_eq!(sampler.prob(0), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(sampler.sample(&mut rng), 0);
    }

    #[test]
    fn negative_table_equal_counts_equal_probs() {
        let v = build_vocab(&corpus(&["a b c d"])).unwrap();
        let sampler = build_negative_table(&v, 0.75);
        for i in 0..4 {
            assert!((sampler.prob(i) - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn negative_sampling_frequencies_follow_table() {
        let v = build_vocab(&corpus(&["a a a a a a a a b b"])).unwrap();
        let sampler = build_negative_table(&v, 0.75);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let draws = 100_000;
        let mut hits = vec![0u64; v.len()];
        for _ in 0..draws {
            hits[sampler.sample(&mut rng) as usize] += 1;
        }
        for i in 0..v.len() as u32 {
            let expected = sampler.prob(i) * draws as f64;
            let observed = hits[i as usize] as f64;
            assert!(
                (observed - expected).abs() < 4.0 * expected.sqrt() + 5.0,
                "token {i}: observed {observed}, expected {expected}"
            );
        }
    }

    #[test]
    fn loss_closed_forms() {
        let u = vec![0.0, 0.0];
        let v = vec![0.0, 0.0];
        let loss = sgns_loss(&u, &v, &[]).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);

        let n = vec![0.0, 0.0];
        let loss = sgns_loss(&u, &v, &[&n]).unwrap();
        assert!((loss - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn loss_vanishes_for_aligned_pair() {
        let u = vec![40.0, 0.0];
        let v = vec![40.0, 0.0];
        let loss = sgns_loss(&u, &v, &[]).unwrap();
        assert!(loss >= 0.0);
        assert!(loss < 1e-12);
        // and is decreasing in u·v
        let weaker = sgns_loss(&[1.0, 0.0], &[1.0, 0.0], &[]).unwrap();
        assert!(weaker > loss);
    }

    #[test]
    fn loss_dimension_mismatch_is_error() {
        assert!(sgns_loss(&[0.0], &[0.0, 0.0], &[]).is_err());
        let n = vec![0.0];
        assert!(sgns_loss(&[0.0, 0.0], &[0.0, 0.0], &[&n]).is_err());
    }

    #[test]
    fn grad_closed_form_at_zero() {
        // σ(0) = 1/2, so ∂L/∂v = (1/2 − 1)·u = −u/2.
        let u = vec![1.0, 2.0, -3.0];
        let v = vec![0.0, 0.0, 0.0];
        let g = sgns_grad(&u, &v, &[]).unwrap();
        for d in 0..3 {
            assert!((g.context[d] + u[d] / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn grad_zero_everywhere_is_zero_for_target() {
        // ∂L/∂u = (σ(0)−1)·v + Σ σ(0)·n_i = −v/2 + Σ n_i/2 = 0 for zeros.
        let z = vec![0.0; 4];
        let n1 = vec![0.0; 4];
        let n2 = vec![0.0; 4];
        let g = sgns_grad(&z, &z, &[&n1, &n2]).unwrap();
        assert!(g.target.iter().all(|&x| x == 0.0));
    }

    /// Full-gradient relative error of one random configuration against
    /// central finite differences: ‖g_fd − g‖ / ‖g‖ over the concatenated
    /// (target, context, negatives) gradient.
    pub(crate) fn finite_difference_rel_error(rng: &mut ChaCha8Rng, dim: usize, step: f64) -> f64 {
        let n_neg = rng.random_range(0..=5);
        let rand_vec =
            |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect() };
        let u = rand_vec(rng);
        let v = rand_vec(rng);
        let negs: Vec<Vec<f64>> = (0..n_neg).map(|_| rand_vec(rng)).collect();
        let neg_refs: Vec<&[f64]> = negs.iter().map(|n| n.as_slice()).collect();
        let analytic = sgns_grad(&u, &v, &neg_refs).unwrap();

        let mut diff_sq = 0.0f64;
        let mut exact_sq = 0.0f64;
        let mut accumulate = |numeric: f64, exact: f64| {
            diff_sq += (numeric - exact) * (numeric - exact);
            exact_sq += exact * exact;
        };

        for d in 0..dim {
            let mut up = u.clone();
            let mut um = u.clone();
            up[d] += step;
            um[d] -= step;
            let fd = (sgns_loss(&up, &v, &neg_refs).unwrap()
                - sgns_loss(&um, &v, &neg_refs).unwrap())
                / (2.0 * step);
            accumulate(fd, analytic.target[d]);

            let mut vp = v.clone();
            let mut vm = v.clone();
            vp[d] += step;
            vm[d] -= step;
            let fd = (sgns_loss(&u, &vp, &neg_refs).unwrap()
                - sgns_loss(&u, &vm, &neg_refs).unwrap())
                / (2.0 * step);
            accumulate(fd, analytic.context[d]);

            for (i, n) in negs.iter().enumerate() {
                let mut np = n.clone();
                let mut nm = n.clone();
                np[d] += step;
                nm[d] -= step;
                let mut refs_p = neg_refs.clone();
                let mut refs_m = neg_refs.clone();
                refs_p[i] = &np;
                refs_m[i] = &nm;
                let fd = (sgns_loss(&u, &v, &refs_p).unwrap()
                    - sgns_loss(&u, &v, &refs_m).unwrap())
                    / (2.0 * step);
                accumulate(fd, analytic.negatives[i][d]);
            }
        }
        (diff_sq.sqrt()) / exact_sq.sqrt().max(1e-12)
    }

    #[test]
    fn grad_matches_central_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut max_rel = 0.0f64;
        for _ in 0..100 {
            max_rel = max_rel.max(finite_difference_rel_error(&mut rng, 8, 1e-5));
        }
        assert!(max_rel < 1e-4, "max relative error {max_rel}");
    }
}
