//! Synthetic corpora with planted group/audience/topic structure.
//!
//! The generator writes the same dump format the ingestion stage reads,
//! so a synthetic run exercises the entire pipeline end to end, and it
//! emits ground truth (author groups, the mixtures used, topic lexicons)
//! so downstream measures can be scored against what was planted.
//!
//! Vocabulary words are built to pass preprocessing unchanged: plain
//! alphanumeric, absent from the stoplist, fixpoints of the rule
//! lemmatizer (they end in digits, so no suffix rule fires).

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::TopicLexicon;
use crate::error::{Error, Result};
use crate::ingest::{Audience, AudienceClass, GenderGroup, RawComment, VenueSpec};

/// Timestamp base for generated comments (2020-01-01 UTC).
const CREATED_BASE: i64 = 1_577_836_800;

/// Probability vector over T topics plus a filler bucket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mixture {
    pub topic_weights: Vec<f64>,
    pub filler_weight: f64,
}

impl Mixture {
    /// Uniform over the given topics, with the rest going to filler.
    pub fn over_topics(topics: &[usize], n_topics: usize, filler_weight: f64) -> Mixture {
        let mut topic_weights = vec![0.0; n_topics];
        let share = (1.0 - filler_weight) / topics.len() as f64;
        for &t in topics {
            topic_weights[t] = share;
        }
        Mixture {
            topic_weights,
            filler_weight,
        }
    }

    /// One dominant topic with the remaining non-filler mass spread over
    /// the other listed topics.
    pub fn dominated_by(
        dominant: usize,
        others: &[usize],
        dominant_weight: f64,
        n_topics: usize,
        filler_weight: f64,
    ) -> Mixture {
        let mut topic_weights = vec![0.0; n_topics];
        topic_weights[dominant] = dominant_weight;
        if !others.is_empty() {
            let rest = (1.0 - filler_weight - dominant_weight).max(0.0) / others.len() as f64;
            for &t in others {
                topic_weights[t] += rest;
            }
        }
        Mixture {
            topic_weights,
            filler_weight,
        }
    }

    fn total(&self) -> f64 {
        self.topic_weights.iter().sum::<f64>() + self.filler_weight
    }

    /// Index of the heaviest topic; first index wins ties.
    pub fn dominant_topic(&self) -> usize {
        let mut best = 0;
        for (i, &w) in self.topic_weights.iter().enumerate() {
            if w > self.topic_weights[best] {
                best = i;
            }
        }
        best
    }
}

/// Everything needed to generate a planted corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantSpec {
    pub authors_per_group: usize,
    pub comments_per_context: usize,
    /// Mean comment length; lengths are geometric with floor 3.
    pub mean_comment_len: f64,
    pub topics: usize,
    pub words_per_topic: usize,
    pub filler_words: usize,
    pub a_single: Mixture,
    pub a_mixed: Mixture,
    pub b_single: Mixture,
    pub b_mixed: Mixture,
    pub venue_a: String,
    pub venue_b: String,
    pub venue_mixed: String,
    pub seed: u64,
}

impl Default for PlantSpec {
    fn default() -> Self {
        let topics = 10;
        PlantSpec {
            authors_per_group: 50,
            comments_per_context: 5,
            mean_comment_len: 12.0,
            topics,
            words_per_topic: 30,
            filler_words: 150,
            a_single: Mixture::over_topics(&[0, 1], topics, 0.1),
            a_mixed: Mixture::over_topics(&[0, 1, 2, 3, 4, 5, 6, 7], topics, 0.1),
            b_single: Mixture::over_topics(&[2, 3], topics, 0.1),
            b_mixed: Mixture::over_topics(&[0, 1, 2, 3, 4, 5, 6, 7], topics, 0.1),
            venue_a: "venue-a".to_string(),
            venue_b: "venue-b".to_string(),
            venue_mixed: "venue-mixed".to_string(),
            seed: 1,
        }
    }
}

impl PlantSpec {
    pub fn validate(&self) -> Result<()> {
        let mut violations = Vec::new();
        if self.topics < 2 {
            violations.push(format!("synth.topics must be >= 2, got {}", self.topics));
        }
        if self.authors_per_group == 0
            || self.comments_per_context == 0
            || self.words_per_topic == 0
            || self.filler_words == 0
        {
            violations.push("synth counts must all be >= 1".to_string());
        }
        for (name, mix) in self.mixtures() {
            if mix.topic_weights.len() != self.topics {
                violations.push(format!(
                    "synth.{name}: mixture has {} topic weights, expected {}",
                    mix.topic_weights.len(),
                    self.topics
                ));
            } else if (mix.total() - 1.0).abs() > 1e-9 {
                violations.push(format!(
                    "synth.{name}: mixture weights sum to {}, expected 1",
                    mix.total()
                ));
            }
            if mix
                .topic_weights
                .iter()
                .chain(std::iter::once(&mix.filler_weight))
                .any(|&w| w < 0.0)
            {
                violations.push(format!("synth.{name}: negative mixture weight"));
            }
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::config(violations))
        }
    }

    pub fn mixtures(&self) -> [(&'static str, &Mixture); 4] {
        [
            ("a_single", &self.a_single),
            ("a_mixed", &self.a_mixed),
            ("b_single", &self.b_single),
            ("b_mixed", &self.b_mixed),
        ]
    }

    fn mixture_for(&self, gender: GenderGroup, audience: Audience) -> &Mixture {
        match (gender, audience) {
            (GenderGroup::A, Audience::Single) => &self.a_single,
            (GenderGroup::A, Audience::Mixed) => &self.a_mixed,
            (GenderGroup::B, Audience::Single) => &self.b_single,
            (GenderGroup::B, Audience::Mixed) => &self.b_mixed,
        }
    }

    /// The venue assignment matching the generated dump.
    pub fn venue_spec(&self) -> Result<VenueSpec> {
        let mut classes = BTreeMap::new();
        classes.insert(self.venue_a.clone(), AudienceClass::SingleGenderA);
        classes.insert(self.venue_b.clone(), AudienceClass::SingleGenderB);
        classes.insert(self.venue_mixed.clone(), AudienceClass::Mixed);
        VenueSpec::new(classes)
    }

    pub fn topic_word(&self, topic: usize, word: usize) -> String {
        format!("topic{topic:02}word{word:03}")
    }

    fn filler_word(&self, word: usize) -> String {
        format!("filler{word:04}")
    }

    /// The planted topic lexicons, one per topic, already in the
    /// normalized form the corpus words take after preprocessing.
    pub fn lexicons(&self) -> Vec<TopicLexicon> {
        (0..self.topics)
            .map(|t| TopicLexicon {
                name: format!("topic{t:02}"),
                keywords: (0..self.words_per_topic)
                    .map(|w| self.topic_word(t, w))
                    .collect(),
            })
            .collect()
    }
}

/// Ground truth emitted alongside the corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub author_group: BTreeMap<String, GenderGroup>,
    pub mixtures: BTreeMap<String, Mixture>,
    /// Heaviest planted topic per (group, context) cell.
    pub dominant_topic: BTreeMap<String, usize>,
}

/// A generated corpus plus its ground truth.
#[derive(Debug, Clone)]
pub struct GeneratedCorpus {
    pub comments: Vec<RawComment>,
    pub truth: GroundTruth,
}

/// Sample a comment length: floor 3, geometric tail with the configured
/// mean (inverse transform, one uniform draw per comment).
fn sample_len(mean: f64, rng: &mut ChaCha8Rng) -> usize {
    let floor = 3usize;
    if mean <= floor as f64 {
        return floor;
    }
    let p = 1.0 / (mean - floor as f64 + 1.0);
    let u: f64 = rng.random();
    let extra = ((1.0 - u).ln() / (1.0 - p).ln()).floor() as usize;
    floor + extra
}

/// Generate the corpus: per comment, sample a topic from the author's
/// (group, context) mixture per token, then a word uniformly within that
/// topic's lexicon (or the filler pool). Deterministic given the seed;
/// each author draws from an independent derived RNG stream.
pub fn generate(spec: &PlantSpec, seed: u64) -> Result<GeneratedCorpus> {
    spec.validate()?;

    let mut comments = Vec::new();
    let mut author_group = BTreeMap::new();
    let mut comment_id = 0u64;

    for (gender, venue_single, tag) in [
        (GenderGroup::A, &spec.venue_a, 'a'),
        (GenderGroup::B, &spec.venue_b, 'b'),
    ] {
        for author_idx in 0..spec.authors_per_group {
            let author = format!("author-{tag}-{author_idx:04}");
            author_group.insert(author.clone(), gender);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let stream = match gender {
                GenderGroup::A => author_idx as u64,
                GenderGroup::B => (spec.authors_per_group + author_idx) as u64,
            };
            rng.set_stream(stream);

            for (audience, venue) in [
                (Audience::Single, venue_single.as_str()),
                (Audience::Mixed, spec.venue_mixed.as_str()),
            ] {
                let mixture = spec.mixture_for(gender, audience);
                for _ in 0..spec.comments_per_context {
                    let len = sample_len(spec.mean_comment_len, &mut rng);
                    let mut words = Vec::with_capacity(len);
                    for _ in 0..len {
                        words.push(sample_word(spec, mixture, &mut rng));
                    }
                    comments.push(RawComment {
                        id: format!("syn-{comment_id:08}"),
                        author: author.clone(),
                        venue: venue.to_string(),
                        body: words.join(" "),
                        created_utc: CREATED_BASE + comment_id as i64,
                    });
                    comment_id += 1;
                }
            }
        }
    }

    let mut mixtures = BTreeMap::new();
    let mut dominant_topic = BTreeMap::new();
    for (name, mix) in spec.mixtures() {
        mixtures.insert(name.to_string(), mix.clone());
        dominant_topic.insert(name.to_string(), mix.dominant_topic());
    }

    Ok(GeneratedCorpus {
        comments,
        truth: GroundTruth {
            author_group,
            mixtures,
            dominant_topic,
        },
    })
}

fn sample_word(spec: &PlantSpec, mixture: &Mixture, rng: &mut ChaCha8Rng) -> String {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (topic, &w) in mixture.topic_weights.iter().enumerate() {
        acc += w;
        if u < acc {
            let word = rng.random_range(0..spec.words_per_topic);
            return spec.topic_word(topic, word);
        }
    }
    let word = rng.random_range(0..spec.filler_words);
    spec.filler_word(word)
}

/// Write the generated comments in the dump format `load_comments` reads.
pub fn write_dump(corpus: &GeneratedCorpus, path: impl AsRef<std::path::Path>) -> Result<()> {
    use std::io::Write;
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for c in &corpus.comments {
        let line = serde_json::to_string(c)
            .map_err(|e| Error::Internal(format!("serializing comment: {e}")))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Write the planted lexicons in the sectioned format the analyze stage
/// reads.
pub fn write_lexicons(spec: &PlantSpec, path: impl AsRef<std::path::Path>) -> Result<()> {
    use std::io::Write;
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for lex in spec.lexicons() {
        writeln!(w, "[{}]", lex.name).map_err(|e| Error::io(path, e))?;
        for kw in &lex.keywords {
            writeln!(w, "{kw}").map_err(|e| Error::io(path, e))?;
        }
        writeln!(w).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
