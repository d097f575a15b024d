//! Text preprocessing: tokenization, bigram phrase merging, stopword
//! removal, rule lemmatization, and the full per-comment cleaning pipeline.
//!
//! Tokenization lowercases, strips URLs, deletes apostrophes in place (so
//! contractions collapse: "don't" → "dont" and match the bundled
//! contraction stopwords), and splits on every remaining non-alphanumeric
//! character. The pipeline order is fixed: tokenize → phrases → stopwords
//! → lemmatize; comments that end up empty are dropped.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Audience, Cohort, GenderGroup};

/// Joiner character for merged phrases. The tokenizer treats `_` as a
/// separator, so natural tokens can never contain it.
pub const PHRASE_JOINER: char = '_';

/// Bundled base stoplist (the scikit-learn English function-word list).
const BASE_STOPWORDS: &str = include_str!("stopwords_en.txt");

/// Contraction fragments and fillers added on top of the base list.
const CUSTOM_STOPWORDS: [&str; 18] = [
    "ai", "im", "m", "s", "ve", "w", "d", "ive", "id", "itll", "shes", "hes", "theyre", "youre",
    "dont", "got", "havent", "didn",
];

/// Bundled irregular-form table for the rule lemmatizer.
const LEMMA_EXCEPTIONS: &str = include_str!("lemma_exceptions.txt");

/// A preprocessed comment: ordered tokens plus author/context labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenDoc {
    pub author: String,
    pub gender: GenderGroup,
    pub audience: Audience,
    pub venue: String,
    pub id: String,
    pub tokens: Vec<String>,
}

fn url_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?:https?://|www\.)\S+").expect("static regex"))
}

/// Lowercase, strip URLs, delete apostrophes, split on non-alphanumerics.
pub fn tokenize(body: &str) -> Vec<String> {
    let lower = body.to_lowercase();
    let no_urls = url_regex().replace_all(&lower, " ");
    let no_apostrophes: String = no_urls
        .chars()
        .filter(|c| *c != '\'' && *c != '\u{2019}')
        .collect();
    no_apostrophes
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Lowercased stopword set: bundled base list + custom additions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StopList {
    words: BTreeSet<String>,
}

impl StopList {
    /// The bundled list: base English function words plus the contraction
    /// fragments produced by apostrophe-deleting tokenization.
    pub fn bundled() -> StopList {
        let mut words: BTreeSet<String> = BASE_STOPWORDS
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_string)
            .collect();
        words.extend(CUSTOM_STOPWORDS.iter().map(|w| w.to_string()));
        StopList { words }
    }

    pub fn empty() -> StopList {
        StopList::default()
    }

    /// Add entries from a plain-text file, one per line. Entries are
    /// lowercased on insert so set semantics hold.
    pub fn extend_from_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        for line in text.lines() {
            let w = line.trim().to_lowercase();
            if !w.is_empty() {
                self.words.insert(w);
            }
        }
        Ok(())
    }

    pub fn insert(&mut self, word: &str) {
        self.words.insert(word.to_lowercase());
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Order-preserving stopword filter.
pub fn remove_stopwords(tokens: Vec<String>, stoplist: &StopList) -> Vec<String> {
    tokens.into_iter().filter(|t| !stoplist.contains(t)).collect()
}

/// Corpus bigram statistics and the merge rule fitted from them.
#[derive(Debug, Clone)]
pub struct PhraseModel {
    unigram: HashMap<String, u64>,
    bigram: HashMap<(String, String), u64>,
    pub min_count: u64,
    pub threshold: f64,
}

impl PhraseModel {
    /// Score of a candidate bigram:
    /// `(count(ab) − min_count) · V / (count(a) · count(b))`
    /// where V is the unigram vocabulary size. `None` when a part is
    /// unseen or the bigram never occurred.
    pub fn score(&self, a: &str, b: &str) -> Option<f64> {
        let ca = *self.unigram.get(a)? as f64;
        let cb = *self.unigram.get(b)? as f64;
        let cab = *self.bigram.get(&(a.to_string(), b.to_string()))? as f64;
        let v = self.unigram.len() as f64;
        Some((cab - self.min_count as f64) * v / (ca * cb))
    }

    fn should_merge(&self, a: &str, b: &str) -> bool {
        self.score(a, b).is_some_and(|s| s > self.threshold)
    }

    /// One greedy left-to-right merging pass, bigrams only.
    pub fn apply(&self, tokens: Vec<String>) -> Vec<String> {
        let mut out = Vec::with_capacity(tokens.len());
        let mut i = 0;
        while i < tokens.len() {
            if i + 1 < tokens.len() && self.should_merge(&tokens[i], &tokens[i + 1]) {
                out.push(format!("{}{}{}", tokens[i], PHRASE_JOINER, tokens[i + 1]));
                i += 2;
            } else {
                out.push(tokens[i].clone());
                i += 1;
            }
        }
        out
    }

    pub fn vocab_size(&self) -> usize {
        self.unigram.len()
    }
}

/// Count unigrams and adjacent bigrams over the tokenized corpus.
pub fn fit_phrases(corpus: &[Vec<String>], min_count: u64, threshold: f64) -> PhraseModel {
    let mut unigram: HashMap<String, u64> = HashMap::new();
    let mut bigram: HashMap<(String, String), u64> = HashMap::new();
    for doc in corpus {
        for t in doc {
            *unigram.entry(t.clone()).or_insert(0) += 1;
        }
        for pair in doc.windows(2) {
            *bigram
                .entry((pair[0].clone(), pair[1].clone()))
                .or_insert(0) += 1;
        }
    }
    PhraseModel {
        unigram,
        bigram,
        min_count,
        threshold,
    }
}

/// Token-to-lemma mapping. The pipeline takes any implementation; the
/// default is [`RuleLemmatizer`].
pub trait Lemmatizer: Send + Sync {
    fn lemma(&self, token: &str) -> String;
}

/// Exception table plus ordered suffix rules, first match wins:
/// `…ies→y` (length > 4), `…sses→ss`, trailing `s` dropped (length > 3,
/// not ending `ss`), `…ing`/`…ed` stripped when a vowel remains in the
/// stem. The `ss` guard keeps the engine idempotent on its own output
/// ("class" stays "class").
#[derive(Debug, Clone)]
pub struct RuleLemmatizer {
    exceptions: HashMap<String, String>,
}

impl Default for RuleLemmatizer {
    fn default() -> Self {
        let mut lem = RuleLemmatizer {
            exceptions: HashMap::new(),
        };
        for line in LEMMA_EXCEPTIONS.lines() {
            if let Some((surface, lemma)) = line.split_once('\t') {
                lem.exceptions
                    .insert(surface.trim().to_string(), lemma.trim().to_string());
            }
        }
        lem
    }
}

impl RuleLemmatizer {
    /// Extend the exception table from a file of `surface TAB lemma` lines.
    pub fn extend_from_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        for line in text.lines() {
            if let Some((surface, lemma)) = line.split_once('\t') {
                self.exceptions
                    .insert(surface.trim().to_lowercase(), lemma.trim().to_lowercase());
            }
        }
        Ok(())
    }
}

fn has_vowel(s: &str) -> bool {
    s.chars().any(|c| matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y'))
}

impl Lemmatizer for RuleLemmatizer {
    fn lemma(&self, token: &str) -> String {
        if let Some(lemma) = self.exceptions.get(token) {
            return lemma.clone();
        }
        if token.len() > 4 {
            if let Some(stem) = token.strip_suffix("ies") {
                return format!("{stem}y");
            }
        }
        if let Some(stem) = token.strip_suffix("sses") {
            return format!("{stem}ss");
        }
        if token.len() > 3 && token.ends_with('s') && !token.ends_with("ss") {
            return token[..token.len() - 1].to_string();
        }
        if let Some(stem) = token.strip_suffix("ing") {
            if has_vowel(stem) {
                return stem.to_string();
            }
        }
        if let Some(stem) = token.strip_suffix("ed") {
            if has_vowel(stem) {
                return stem.to_string();
            }
        }
        token.to_string()
    }
}

/// Map every token through the lemmatizer, order preserved.
pub fn lemmatize(tokens: Vec<String>, lemmatizer: &dyn Lemmatizer) -> Vec<String> {
    tokens.into_iter().map(|t| lemmatizer.lemma(&t)).collect()
}

/// Knobs for [`clean_corpus`].
pub struct PreprocessOptions {
    pub stoplist: StopList,
    pub lemmatizer: Box<dyn Lemmatizer>,
    pub phrase_min_count: u64,
    pub phrase_threshold: f64,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        PreprocessOptions {
            stoplist: StopList::bundled(),
            lemmatizer: Box::new(RuleLemmatizer::default()),
            phrase_min_count: 5,
            phrase_threshold: 10.0,
        }
    }
}

/// Per-stage drop counts from a [`clean_corpus`] run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanStats {
    pub input_docs: u64,
    pub dropped_empty_after_tokenize: u64,
    pub dropped_empty_after_stopwords: u64,
    pub output_docs: u64,
}

/// Full pipeline over a cohort: tokenize → phrases → stopwords →
/// lemmatize, dropping comments that become empty.
pub fn clean_corpus(cohort: &Cohort, opts: &PreprocessOptions) -> (Vec<TokenDoc>, CleanStats) {
    let mut stats = CleanStats::default();

    // Tokenize everything first; the phrase pass needs corpus-wide counts.
    let mut tokenized: Vec<TokenDoc> = Vec::new();
    for rec in cohort.authors.values() {
        let contexts = [
            (Audience::Single, &rec.single_comments),
            (Audience::Mixed, &rec.mixed_comments),
        ];
        for (audience, comments) in contexts {
            for c in comments.iter() {
                stats.input_docs += 1;
                let tokens = tokenize(&c.body);
                if tokens.is_empty() {
                    stats.dropped_empty_after_tokenize += 1;
                    continue;
                }
                tokenized.push(TokenDoc {
                    author: rec.author.clone(),
                    gender: rec.gender,
                    audience,
                    venue: c.venue.clone(),
                    id: c.id.clone(),
                    tokens,
                });
            }
        }
    }

    let token_lists: Vec<Vec<String>> = tokenized.iter().map(|d| d.tokens.clone()).collect();
    let phrases = fit_phrases(&token_lists, opts.phrase_min_count, opts.phrase_threshold);

    let mut out = Vec::with_capacity(tokenized.len());
    for mut doc in tokenized {
        let merged = phrases.apply(std::mem::take(&mut doc.tokens));
        let filtered = remove_stopwords(merged, &opts.stoplist);
        if filtered.is_empty() {
            stats.dropped_empty_after_stopwords += 1;
            continue;
        }
        doc.tokens = lemmatize(filtered, opts.lemmatizer.as_ref());
        out.push(doc);
    }
    stats.output_docs = out.len() as u64;
    (out, stats)
}
