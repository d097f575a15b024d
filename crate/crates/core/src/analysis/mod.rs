//! Similarity measures over the trained landscape: group concentration
//! (pairwise and centroid variants — the two readings of "how tightly a
//! group clusters"), per-author audience shift, topic affinity against
//! keyword lexicons, and the KS/t statistics backing every comparison.

pub mod stats;

pub use stats::{ks_exact_p, ks_statistic, ks_two_sample, t_test, Ks2Sample, TTest};

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingModel;
use crate::error::{Error, Result};
use crate::ingest::{Audience, Cohort, GenderGroup};
use crate::inject::SpeakerToken;
use crate::preprocess::{tokenize, Lemmatizer};

/// Pairwise concentration above this many pairs is estimated on a seeded
/// uniform subsample of the pair space instead of full enumeration.
pub const PAIRWISE_SUBSAMPLE_LIMIT: u64 = 10_000_000;
const PAIRWISE_SUBSAMPLE_SEED: u64 = 0x70_61_69_72; // "pair"

/// One of the four (gender-analog × audience-context) speaker groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupLabel {
    pub gender: GenderGroup,
    pub audience: Audience,
}

impl GroupLabel {
    pub const ALL: [GroupLabel; 4] = [
        GroupLabel {
            gender: GenderGroup::A,
            audience: Audience::Single,
        },
        GroupLabel {
            gender: GenderGroup::A,
            audience: Audience::Mixed,
        },
        GroupLabel {
            gender: GenderGroup::B,
            audience: Audience::Single,
        },
        GroupLabel {
            gender: GenderGroup::B,
            audience: Audience::Mixed,
        },
    ];

    pub fn name(self) -> String {
        format!("{}-{}", self.gender, self.audience)
    }

    pub fn parse(name: &str) -> Option<GroupLabel> {
        let (g, a) = name.split_once('-')?;
        let gender = match g {
            "A" => GenderGroup::A,
            "B" => GenderGroup::B,
            _ => return None,
        };
        let audience = match a {
            "single" => Audience::Single,
            "mixed" => Audience::Mixed,
            _ => return None,
        };
        Some(GroupLabel { gender, audience })
    }
}

impl fmt::Display for GroupLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// A labeled sample of cosine values with its summary statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityDistribution {
    pub label: String,
    pub values: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (n−1 denominator); 0 for n ≤ 1.
    pub std: f64,
}

impl SimilarityDistribution {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> SimilarityDistribution {
        let n = values.len() as f64;
        let mean = if values.is_empty() {
            0.0
        } else {
            values.iter().sum::<f64>() / n
        };
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        SimilarityDistribution {
            label: label.into(),
            values,
            mean,
            std,
        }
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }
}

/// A curated keyword list standing in for a discussion topic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicLexicon {
    pub name: String,
    pub keywords: Vec<String>,
}

/// Cosine similarity (Eq. form: dot product over the product of norms),
/// clamped to [−1, 1] against float overshoot.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

/// Componentwise arithmetic mean of a nonempty set of vectors.
pub fn centroid(vectors: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = vectors
        .first()
        .ok_or(Error::EmptyInput("centroid of an empty set"))?;
    let dim = first.len();
    let mut mean = vec![0.0; dim];
    for v in vectors {
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: v.len(),
            });
        }
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    let n = vectors.len() as f64;
    for m in &mut mean {
        *m /= n;
    }
    Ok(mean)
}

/// All n(n−1)/2 unordered-pair cosines within a group. Above
/// [`PAIRWISE_SUBSAMPLE_LIMIT`] pairs the pair space is subsampled
/// uniformly with a fixed seed.
pub fn group_concentration_pairwise(
    label: impl Into<String>,
    vectors: &[Vec<f64>],
) -> Result<SimilarityDistribution> {
    let n = vectors.len();
    if n < 2 {
        return Err(Error::data(format!(
            "pairwise concentration needs at least 2 vectors, got {n}"
        )));
    }
    let pairs = n as u64 * (n as u64 - 1) / 2;
    let mut values;
    if pairs <= PAIRWISE_SUBSAMPLE_LIMIT {
        values = Vec::with_capacity(pairs as usize);
        for i in 0..n {
            for j in (i + 1)..n {
                values.push(cosine(&vectors[i], &vectors[j])?);
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(PAIRWISE_SUBSAMPLE_SEED);
        let k = PAIRWISE_SUBSAMPLE_LIMIT as usize;
        values = Vec::with_capacity(k);
        while values.len() < k {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            if i == j {
                continue;
            }
            values.push(cosine(&vectors[i], &vectors[j])?);
        }
    }
    Ok(SimilarityDistribution::new(label, values))
}

/// One cosine per group member against the group centroid.
pub fn group_concentration_centroid(
    label: impl Into<String>,
    vectors: &[Vec<f64>],
) -> Result<SimilarityDistribution> {
    let center = centroid(vectors)?;
    if center.iter().all(|&x| x == 0.0) {
        return Err(Error::ZeroVector);
    }
    let values: Result<Vec<f64>> = vectors.iter().map(|v| cosine(v, &center)).collect();
    Ok(SimilarityDistribution::new(label, values?))
}

/// Cosine between the two speaker vectors of one author across contexts.
/// Lower means a larger behavioral change between audiences.
pub fn audience_shift(model: &EmbeddingModel, author: &str) -> Result<f64> {
    let lookup = |audience: Audience| -> Result<Vec<f64>> {
        model
            .vector_f64(&SpeakerToken::new(author, audience).render())
            .ok_or_else(|| Error::MissingSpeakerToken {
                author: author.to_string(),
                context: audience.as_str().to_string(),
            })
    };
    let single = lookup(Audience::Single)?;
    let mixed = lookup(Audience::Mixed)?;
    cosine(&single, &mixed)
}

/// Result of [`topic_affinity`]: the cosine between the group centroid and
/// the centroid of the lexicon keywords found in the vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicAffinity {
    pub topic: String,
    pub affinity: f64,
    /// Keywords absent from the model vocabulary.
    pub missing_keywords: Vec<String>,
}

pub fn topic_affinity(
    group_vectors: &[Vec<f64>],
    lexicon: &TopicLexicon,
    model: &EmbeddingModel,
) -> Result<TopicAffinity> {
    if group_vectors.is_empty() {
        return Err(Error::EmptyInput("topic affinity of an empty group"));
    }
    let mut found = Vec::new();
    let mut missing = Vec::new();
    for kw in &lexicon.keywords {
        match model.vector_f64(kw) {
            Some(v) => found.push(v),
            None => missing.push(kw.clone()),
        }
    }
    if found.is_empty() {
        return Err(Error::data(format!(
            "topic {:?}: no lexicon keyword is in the vocabulary",
            lexicon.name
        )));
    }
    let affinity = cosine(&centroid(group_vectors)?, &centroid(&found)?)?;
    Ok(TopicAffinity {
        topic: lexicon.name.clone(),
        affinity,
        missing_keywords: missing,
    })
}

/// Authors with at least `k` comments in *both* their contexts.
pub fn min_activity_filter(cohort: &Cohort, k: usize) -> Cohort {
    let authors: BTreeMap<String, _> = cohort
        .authors
        .iter()
        .filter(|(_, rec)| rec.single_comments.len() >= k && rec.mixed_comments.len() >= k)
        .map(|(name, rec)| (name.clone(), rec.clone()))
        .collect();
    Cohort { authors }
}

/// The speaker vectors of one group, in author order. Authors whose
/// speaker token is absent from the vocabulary (all their comments were
/// dropped in preprocessing) are skipped; the second element counts them.
pub fn group_vectors(
    model: &EmbeddingModel,
    cohort: &Cohort,
    group: GroupLabel,
) -> (Vec<Vec<f64>>, usize) {
    let mut vectors = Vec::new();
    let mut skipped = 0;
    for rec in cohort.authors.values() {
        if rec.gender != group.gender {
            continue;
        }
        let token = SpeakerToken::new(rec.author.clone(), group.audience).render();
        match model.vector_f64(&token) {
            Some(v) => vectors.push(v),
            None => skipped += 1,
        }
    }
    (vectors, skipped)
}

/// Load topic lexicons from either a directory of `<topic>.txt` files or
/// a single sectioned file (`[topic-name]` headers, one keyword per
/// line). Keywords are normalized with the corpus pipeline: tokenized,
/// lemmatized, multi-token keywords joined with the phrase joiner.
pub fn load_lexicons(path: impl AsRef<Path>, lemmatizer: &dyn Lemmatizer) -> Result<Vec<TopicLexicon>> {
    let path = path.as_ref();
    let mut lexicons = Vec::new();
    if path.is_dir() {
        let mut files: Vec<_> = fs::read_dir(path)
            .map_err(|e| Error::io(path, e))?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|ext| ext == "txt"))
            .collect();
        files.sort();
        for file in files {
            let name = file
                .file_stem()
                .map(|s| s.to_string_lossy().to_string())
                .unwrap_or_default();
            let text = fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
            let keywords = normalize_keywords(text.lines(), lemmatizer);
            lexicons.push(TopicLexicon { name, keywords });
        }
    } else {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut current: Option<TopicLexicon> = None;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                if let Some(lex) = current.take() {
                    lexicons.push(lex);
                }
                current = Some(TopicLexicon {
                    name: name.trim().to_string(),
                    keywords: Vec::new(),
                });
            } else if let Some(lex) = current.as_mut() {
                lex.keywords
                    .extend(normalize_keywords(std::iter::once(line), lemmatizer));
            } else {
                return Err(Error::data(format!(
                    "lexicon file {}: keyword {line:?} before any [topic] header",
                    path.display()
                )));
            }
        }
        if let Some(lex) = current.take() {
            lexicons.push(lex);
        }
    }
    for lex in &lexicons {
        if lex.keywords.is_empty() {
            return Err(Error::data(format!(
                "topic {:?} has an empty keyword list",
                lex.name
            )));
        }
    }
    if lexicons.is_empty() {
        return Err(Error::data(format!(
            "no topic lexicons found at {}",
            path.display()
        )));
    }
    Ok(lexicons)
}

fn normalize_keywords<'a>(
    lines: impl Iterator<Item = &'a str>,
    lemmatizer: &dyn Lemmatizer,
) -> Vec<String> {
    let mut out = Vec::new();
    for line in lines {
        let tokens = tokenize(line);
        if tokens.is_empty() {
            continue;
        }
        let lemmas: Vec<String> = tokens.iter().map(|t| lemmatizer.lemma(t)).collect();
        out.push(lemmas.join("_"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{train, TrainConfig};
    use crate::ingest::{AuthorRecord, RawComment};
    use crate::preprocess::RuleLemmatizer;
    use proptest::prelude::*;
    use std::io::Write;

    #[test]
    fn cosine_identical_vectors() {
        let a = vec![1.0, 2.0, -1.0];
        assert_eq!(cosine(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn cosine_orthogonal_vectors() {
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn cosine_frozen_case() {
        let c = cosine(&[1.0, 2.0, 2.0], &[2.0, 1.0, 2.0]).unwrap();
        assert!((c - 8.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn cosine_zero_vector_is_error() {
        assert!(matches!(
            cosine(&[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::ZeroVector)
        ));
    }

    #[test]
    fn cosine_dimension_mismatch_is_error() {
        assert!(cosine(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn centroid_cases() {
        let c = centroid(&[vec![0.0, 0.0], vec![2.0, 0.0], vec![1.0, 3.0]]).unwrap();
        assert_eq!(c, vec![1.0, 1.0]);
        let single = centroid(&[vec![4.0, -2.0]]).unwrap();
        assert_eq!(single, vec![4.0, -2.0]);
        let zero = centroid(&[vec![1.0, 1.0], vec![-1.0, -1.0]]).unwrap();
        assert_eq!(zero, vec![0.0, 0.0]);
        assert!(centroid(&[]).is_err());
    }

    #[test]
    fn pairwise_concentration_identical_vectors() {
        let vs = vec![vec![1.0, 1.0]; 4];
        let d = group_concentration_pairwise("g", &vs).unwrap();
        assert_eq!(d.n(), 6);
        assert!(d.values.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        assert!(d.std.abs() < 1e-12);
    }

    #[test]
    fn pairwise_concentration_two_orthogonal_users() {
        let vs = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let d = group_concentration_pairwise("g", &vs).unwrap();
        assert_eq!(d.values, vec![0.0]);
    }

    #[test]
    fn pairwise_concentration_matches_enumeration() {
        let vs = vec![vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]];
        let d = group_concentration_pairwise("g", &vs).unwrap();
        // pairs: (0,1), (0,2), (1,2)
        let expected = [
            cosine(&vs[0], &vs[1]).unwrap(),
            cosine(&vs[0], &vs[2]).unwrap(),
            cosine(&vs[1], &vs[2]).unwrap(),
        ];
        assert_eq!(d.values.len(), 3);
        let mean = expected.iter().sum::<f64>() / 3.0;
        assert!((d.mean - mean).abs() < 1e-15);
        assert!(group_concentration_pairwise("g", &vs[..1]).is_err());
    }

    #[test]
    fn centroid_concentration_cases() {
        let vs = vec![vec![2.0, 0.0], vec![3.0, 0.0]];
        let d = group_concentration_centroid("g", &vs).unwrap();
        assert!(d.values.iter().all(|&v| (v - 1.0).abs() < 1e-12));

        let opposed = vec![vec![1.0, 1.0], vec![-1.0, -1.0]];
        assert!(group_concentration_centroid("g", &opposed).is_err());

        let fixed = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        let d = group_concentration_centroid("g", &fixed).unwrap();
        // centroid = (2/3, 2/3); cosines: 1/√2, 1/√2, 1
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((d.values[0] - r).abs() < 1e-12);
        assert!((d.values[1] - r).abs() < 1e-12);
        assert!((d.values[2] - 1.0).abs() < 1e-12);
    }

    fn shift_model() -> EmbeddingModel {
        let corpus: Vec<Vec<String>> = [
            "spk::ann::single crib nap",
            "spk::ann::mixed crib nap",
            "spk::bob::single ball park",
        ]
        .iter()
        .map(|d| d.split_whitespace().map(str::to_string).collect())
        .collect();
        let cfg = TrainConfig {
            dim: 8,
            window: 3,
            negatives: 2,
            epochs: 2,
            lr_initial: 0.05,
            lr_final: 0.001,
            seed: 4,
            workers: 1,
        };
        train(&corpus, &cfg).unwrap()
    }

    #[test]
    fn audience_shift_missing_context_names_it() {
        let model = shift_model();
        assert!(audience_shift(&model, "ann").is_ok());
        match audience_shift(&model, "bob") {
            Err(Error::MissingSpeakerToken { context, .. }) => assert_eq!(context, "mixed"),
            other => panic!("expected MissingSpeakerToken, got {other:?}"),
        }
    }

    #[test]
    fn audience_shift_identical_tokens_gives_one() {
        // Build a model then query with both vectors forced equal by using
        // the same author twice in one context is impossible; instead
        // verify the identity through cosine directly.
        let model = shift_model();
        let v = model.vector_f64("spk::ann::single").unwrap();
        assert_eq!(cosine(&v, &v).unwrap(), 1.0);
    }

    #[test]
    fn topic_affinity_single_keyword_equal_to_member() {
        let model = shift_model();
        let lex = TopicLexicon {
            name: "self".to_string(),
            keywords: vec!["spk::ann::single".to_string()],
        };
        let group = vec![model.vector_f64("spk::ann::single").unwrap()];
        let a = topic_affinity(&group, &lex, &model).unwrap();
        assert!((a.affinity - 1.0).abs() < 1e-12);
        assert!(a.missing_keywords.is_empty());
    }

    #[test]
    fn topic_affinity_all_oov_is_error() {
        let model = shift_model();
        let lex = TopicLexicon {
            name: "ghost".to_string(),
            keywords: vec!["nowhere".to_string(), "nothing".to_string()],
        };
        let group = vec![model.vector_f64("spk::ann::single").unwrap()];
        assert!(topic_affinity(&group, &lex, &model).is_err());
    }

    #[test]
    fn topic_affinity_reports_missing() {
        let model = shift_model();
        let lex = TopicLexicon {
            name: "partial".to_string(),
            keywords: vec!["crib".to_string(), "unseen".to_string()],
        };
        let group = vec![model.vector_f64("spk::ann::single").unwrap()];
        let a = topic_affinity(&group, &lex, &model).unwrap();
        assert_eq!(a.missing_keywords, vec!["unseen".to_string()]);
    }

    fn cohort_with_counts(counts: &[(&str, usize, usize)]) -> Cohort {
        let mut authors = BTreeMap::new();
        for (name, singles, mixeds) in counts {
            let mk = |venue: &str, i: usize| RawComment {
                id: format!("{name}-{venue}-{i}"),
                author: name.to_string(),
                venue: venue.to_string(),
                body: "text".to_string(),
                created_utc: 0,
            };
            authors.insert(
                name.to_string(),
                AuthorRecord {
                    author: name.to_string(),
                    gender: GenderGroup::A,
                    single_comments: (0..*singles).map(|i| mk("S", i)).collect(),
                    mixed_comments: (0..*mixeds).map(|i| mk("M", i)).collect(),
                },
            );
        }
        Cohort { authors }
    }

    #[test]
    fn min_activity_boundary() {
        let cohort = cohort_with_counts(&[("keep", 5, 5), ("drop", 5, 4)]);
        let filtered = min_activity_filter(&cohort, 5);
        assert_eq!(filtered.len(), 1);
        assert!(filtered.authors.contains_key("keep"));
    }

    #[test]
    fn min_activity_k1_is_identity_on_valid_cohort() {
        let cohort = cohort_with_counts(&[("a", 1, 2), ("b", 3, 1)]);
        let filtered = min_activity_filter(&cohort, 1);
        assert_eq!(filtered.len(), cohort.len());
    }

    #[test]
    fn group_label_naming_round_trip() {
        for label in GroupLabel::ALL {
            assert_eq!(GroupLabel::parse(&label.name()), Some(label));
        }
    }

    #[test]
    fn lexicon_sectioned_file_and_normalization() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(
            f,
            "[Sleep training]\nsleeping\nnaps\n\n[Food]\nsnacks\nbottles warmed\n"
        )
        .unwrap();
        let lems = RuleLemmatizer::default();
        let lexicons = load_lexicons(f.path(), &lems).unwrap();
        assert_eq!(lexicons.len(), 2);
        assert_eq!(lexicons[0].name, "Sleep training");
        assert_eq!(lexicons[0].keywords, vec!["sleep", "nap"]);
        assert_eq!(lexicons[1].keywords, vec!["snack", "bottle_warm"]);
    }

    #[test]
    fn lexicon_directory_form() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("topic-b.txt"), "balls\n").unwrap();
        std::fs::write(dir.path().join("topic-a.txt"), "crayons\n").unwrap();
        let lems = RuleLemmatizer::default();
        let lexicons = load_lexicons(dir.path(), &lems).unwrap();
        assert_eq!(lexicons.len(), 2);
        assert_eq!(lexicons[0].name, "topic-a"); // sorted
        assert_eq!(lexicons[0].keywords, vec!["crayon"]);
    }

    #[test]
    fn lexicon_empty_topic_is_error() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, "[empty]\n").unwrap();
        let lems = RuleLemmatizer::default();
        assert!(load_lexicons(f.path(), &lems).is_err());
    }

    #[test]
    fn duplicate_member_changes_pairwise_mean_predictably() {
        // Adding a duplicate of member 0 to a group of n adds n pairs:
        // one pair with cosine 1 (the duplicate) and the n−1 pairs of
        // member 0 repeated. Verified against brute-force enumeration.
        let base: Vec<Vec<f64>> = (0..6)
            .map(|i| {
                let angle = i as f64 * 0.4;
                vec![angle.cos(), angle.sin()]
            })
            .collect();
        let d_base = group_concentration_pairwise("g", &base).unwrap();
        let mut dup = base.clone();
        dup.push(base[0].clone());
        let d_dup = group_concentration_pairwise("g", &dup).unwrap();

        let n = base.len() as f64;
        let member_pairs: f64 = (1..base.len())
            .map(|j| cosine(&base[0], &base[j]).unwrap())
            .sum();
        let expected_mean = (d_base.mean * (n * (n - 1.0) / 2.0) + 1.0 + member_pairs)
            / ((n + 1.0) * n / 2.0);
        assert!((d_dup.mean - expected_mean).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn cosine_symmetry_and_scale_invariance(
            a in proptest::collection::vec(-10.0f64..10.0, 5),
            b in proptest::collection::vec(-10.0f64..10.0, 5),
            lambda in 0.01f64..100.0,
        ) {
            prop_assume!(a.iter().any(|&x| x.abs() > 1e-6));
            prop_assume!(b.iter().any(|&x| x.abs() > 1e-6));
            let ab = cosine(&a, &b).unwrap();
            let ba = cosine(&b, &a).unwrap();
            prop_assert!((ab - ba).abs() < 1e-12);
            let scaled: Vec<f64> = a.iter().map(|x| x * lambda).collect();
            let s = cosine(&scaled, &b).unwrap();
            prop_assert!((ab - s).abs() < 1e-9);
            prop_assert!((-1.0..=1.0).contains(&ab));
        }

        #[test]
        fn pairwise_matches_brute_force_up_to_20(
            n in 2usize..=20,
            seed in 0u64..1000,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let vectors: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..4).map(|_| rng.random_range(-1.0f64..1.0)).collect())
                .collect();
            prop_assume!(vectors.iter().all(|v: &Vec<f64>| v.iter().any(|&x| x != 0.0)));
            let d = group_concentration_pairwise("g", &vectors).unwrap();
            // independent oracle: index-pair enumeration in the other order
            let mut brute = Vec::new();
            for j in 0..n {
                for i in 0..j {
                    brute.push(cosine(&vectors[i], &vectors[j]).unwrap());
                }
            }
            prop_assert_eq!(d.values.len(), brute.len());
            let mean = brute.iter().sum::<f64>() / brute.len() as f64;
            prop_assert!((d.mean - mean).abs() < 1e-12);
        }
    }
}
