//! Dump ingestion and cohort selection.
//!
//! Reads newline-delimited comment records (Pushshift field names:
//! `id`, `author`, `subreddit`, `body`, `created_utc`; unknown fields
//! ignored) and selects the dual-venue analysis cohort: authors with at
//! least one comment in exactly one single-gender venue and at least one
//! in the mixed venue.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bodies that mark a comment as deleted. Matched exactly.
pub const DELETION_PLACEHOLDERS: [&str; 2] = ["[deleted]", "[removed]"];

/// One authored message with venue and timestamp — the ingestion unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawComment {
    pub id: String,
    pub author: String,
    #[serde(rename = "subreddit")]
    pub venue: String,
    pub body: String,
    pub created_utc: i64,
}

impl RawComment {
    fn is_valid(&self) -> bool {
        !self.id.is_empty() && !self.author.is_empty() && !self.venue.is_empty()
    }
}

/// Audience class of a venue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AudienceClass {
    SingleGenderA,
    SingleGenderB,
    Mixed,
}

/// Gender-analog group label of an author, inferred from the single-gender
/// venue they posted in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenderGroup {
    A,
    B,
}

impl fmt::Display for GenderGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GenderGroup::A => write!(f, "A"),
            GenderGroup::B => write!(f, "B"),
        }
    }
}

/// Whether a comment was posted to a single-gender venue or the mixed one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Audience {
    Single,
    Mixed,
}

impl Audience {
    pub fn as_str(self) -> &'static str {
        match self {
            Audience::Single => "single",
            Audience::Mixed => "mixed",
        }
    }
}

impl fmt::Display for Audience {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Venue name → audience class assignment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VenueSpec {
    pub classes: BTreeMap<String, AudienceClass>,
}

impl VenueSpec {
    pub fn new(classes: BTreeMap<String, AudienceClass>) -> Result<Self> {
        let spec = VenueSpec { classes };
        spec.validate()?;
        Ok(spec)
    }

    /// Exactly one mixed venue and at least one single-gender venue.
    pub fn validate(&self) -> Result<()> {
        let mut violations = Vec::new();
        let mixed = self
            .classes
            .values()
            .filter(|c| **c == AudienceClass::Mixed)
            .count();
        if mixed != 1 {
            violations.push(format!("venues: expected exactly one mixed venue, got {mixed}"));
        }
        let single = self
            .classes
            .values()
            .filter(|c| **c != AudienceClass::Mixed)
            .count();
        if single == 0 {
            violations.push("venues: at least one single-gender venue required".to_string());
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::config(violations))
        }
    }

    pub fn class_of(&self, venue: &str) -> Option<AudienceClass> {
        self.classes.get(venue).copied()
    }
}

/// Ingestion knobs beyond the venue assignment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestOptions {
    /// Author name of the moderation bot whose comments are dropped.
    /// Case-sensitive exact match.
    pub bot_author: String,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            bot_author: "AutoModerator".to_string(),
        }
    }
}

/// Result of reading a dump file.
#[derive(Debug)]
pub struct LoadedComments {
    pub comments: Vec<RawComment>,
    /// Syntactically invalid lines skipped (bad JSON, missing/empty
    /// required fields). Blank lines are ignored and not counted.
    pub malformed: u64,
}

/// Read a newline-delimited dump file. Malformed lines are counted and
/// skipped; an unreadable file is fatal.
pub fn load_comments(path: impl AsRef<Path>) -> Result<LoadedComments> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut comments = Vec::new();
    let mut malformed = 0u64;
    for line in reader.lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<RawComment>(&line) {
            Ok(c) if c.is_valid() => comments.push(c),
            _ => malformed += 1,
        }
    }
    Ok(LoadedComments { comments, malformed })
}

/// One retained author with comments partitioned by audience context.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuthorRecord {
    pub author: String,
    pub gender: GenderGroup,
    pub single_comments: Vec<RawComment>,
    pub mixed_comments: Vec<RawComment>,
}

/// The dual-venue analysis cohort, keyed by author name.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Cohort {
    pub authors: BTreeMap<String, AuthorRecord>,
}

impl Cohort {
    pub fn len(&self) -> usize {
        self.authors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.authors.is_empty()
    }

    pub fn comment_count(&self) -> usize {
        self.authors
            .values()
            .map(|a| a.single_comments.len() + a.mixed_comments.len())
            .sum()
    }
}

/// Select the analysis cohort.
///
/// Drops comments by the moderation bot and comments whose body is a
/// deletion placeholder; excludes authors who posted in both single-gender
/// venues and authors lacking either a single-gender or a mixed-venue
/// comment. Comments in venues outside the spec are ignored. Survivors are
/// labeled by their single-gender venue. An empty result is a warning for
/// the caller, not an error.
pub fn select_cohort(
    comments: &[RawComment],
    venues: &VenueSpec,
    opts: &IngestOptions,
) -> Result<Cohort> {
    venues.validate()?;

    struct Buckets {
        a: Vec<RawComment>,
        b: Vec<RawComment>,
        mixed: Vec<RawComment>,
    }
    let mut by_author: BTreeMap<String, Buckets> = BTreeMap::new();

    for c in comments {
        if c.author == opts.bot_author {
            continue;
        }
        if DELETION_PLACEHOLDERS.contains(&c.body.as_str()) {
            continue;
        }
        let Some(class) = venues.class_of(&c.venue) else {
            continue;
        };
        let bucket = by_author.entry(c.author.clone()).or_insert_with(|| Buckets {
            a: Vec::new(),
            b: Vec::new(),
            mixed: Vec::new(),
        });
        match class {
            AudienceClass::SingleGenderA => bucket.a.push(c.clone()),
            AudienceClass::SingleGenderB => bucket.b.push(c.clone()),
            AudienceClass::Mixed => bucket.mixed.push(c.clone()),
        }
    }

    let mut authors = BTreeMap::new();
    for (author, buckets) in by_author {
        let in_a = !buckets.a.is_empty();
        let in_b = !buckets.b.is_empty();
        if in_a && in_b {
            continue; // cannot infer a single group label
        }
        if buckets.mixed.is_empty() || (!in_a && !in_b) {
            continue; // fails the dual-venue membership rule
        }
        let (gender, single_comments) = if in_a {
            (GenderGroup::A, buckets.a)
        } else {
            (GenderGroup::B, buckets.b)
        };
        authors.insert(
            author.clone(),
            AuthorRecord {
                author,
                gender,
                single_comments,
                mixed_comments: buckets.mixed,
            },
        );
    }

    Ok(Cohort { authors })
}

/// Deterministic count report: authors per group label and comments per
/// venue × label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortSummary {
    pub authors_per_group: BTreeMap<GenderGroup, u64>,
    pub comments_per_venue_group: BTreeMap<(String, GenderGroup), u64>,
}

impl CohortSummary {
    pub fn total_comments(&self) -> u64 {
        self.comments_per_venue_group.values().sum()
    }
}

pub fn cohort_summary(cohort: &Cohort) -> CohortSummary {
    let mut authors_per_group = BTreeMap::new();
    let mut comments_per_venue_group = BTreeMap::new();
    for rec in cohort.authors.values() {
        *authors_per_group.entry(rec.gender).or_insert(0) += 1;
        for c in rec.single_comments.iter().chain(&rec.mixed_comments) {
            *comments_per_venue_group
                .entry((c.venue.clone(), rec.gender))
                .or_insert(0) += 1;
        }
    }
    CohortSummary {
        authors_per_group,
        comments_per_venue_group,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn venues() -> VenueSpec {
        let mut classes = BTreeMap::new();
        classes.insert("Mommit".to_string(), AudienceClass::SingleGenderA);
        classes.insert("Daddit".to_string(), AudienceClass::SingleGenderB);
        classes.insert("Parenting".to_string(), AudienceClass::Mixed);
        VenueSpec::new(classes).unwrap()
    }

    fn comment(id: &str, author: &str, venue: &str, body: &str) -> RawComment {
        RawComment {
            id: id.to_string(),
            author: author.to_string(),
            venue: venue.to_string(),
            body: body.to_string(),
            created_utc: 1_600_000_000,
        }
    }

    #[test]
    fn load_valid_records() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(
            f,
            r#"{{"id":"c1","author":"ann","subreddit":"Mommit","body":"hi","created_utc":1}}"#
        )
        .unwrap();
        writeln!(
            f,
            r#"{{"id":"c2","author":"bob","subreddit":"Daddit","body":"yo","created_utc":2,"score":7}}"#
        )
        .unwrap();
        let loaded = load_comments(f.path()).unwrap();
        assert_eq!(loaded.comments.len(), 2);
        assert_eq!(loaded.malformed, 0);
        assert_eq!(loaded.comments[0].venue, "Mommit");
    }

    #[test]
    fn load_skips_malformed_lines() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, r#"{{"id":"c1","subreddit":"Mommit","body":"hi","created_utc":1}}"#).unwrap();
        writeln!(
            f,
            r#"{{"id":"c2","author":"bob","subreddit":"Daddit","body":"yo","created_utc":2}}"#
        )
        .unwrap();
        let loaded = load_comments(f.path()).unwrap();
        assert_eq!(loaded.comments.len(), 1);
        assert_eq!(loaded.malformed, 1);
    }

    #[test]
    fn load_empty_file() {
        let f = tempfile::NamedTempFile::new().unwrap();
        let loaded = load_comments(f.path()).unwrap();
        assert!(loaded.comments.is_empty());
        assert_eq!(loaded.malformed, 0);
    }

    #[test]
    fn load_unreadable_file_is_fatal() {
        assert!(load_comments("/nonexistent/dump.jsonl").is_err());
    }

    #[test]
    fn load_rejects_empty_required_fields() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, r#"{{"id":"","author":"x","subreddit":"Mommit","body":"hi","created_utc":1}}"#)
            .unwrap();
        let loaded = load_comments(f.path()).unwrap();
        assert!(loaded.comments.is_empty());
        assert_eq!(loaded.malformed, 1);
    }

    #[test]
    fn dual_venue_author_retained_with_label() {
        let comments = vec![
            comment("1", "ann", "Mommit", "hello"),
            comment("2", "ann", "Parenting", "world"),
        ];
        let cohort = select_cohort(&comments, &venues(), &IngestOptions::default()).unwrap();
        assert_eq!(cohort.len(), 1);
        let rec = &cohort.authors["ann"];
        assert_eq!(rec.gender, GenderGroup::A);
        assert_eq!(rec.single_comments.len(), 1);
        assert_eq!(rec.mixed_comments.len(), 1);
    }

    #[test]
    fn author_in_both_single_venues_excluded() {
        let comments = vec![
            comment("1", "pat", "Mommit", "one"),
            comment("2", "pat", "Daddit", "two"),
            comment("3", "pat", "Parenting", "three"),
        ];
        let cohort = select_cohort(&comments, &venues(), &IngestOptions::default()).unwrap();
        assert!(cohort.is_empty());
    }

    #[test]
    fn mixed_only_author_excluded() {
        let comments = vec![comment("1", "solo", "Parenting", "hi")];
        let cohort = select_cohort(&comments, &venues(), &IngestOptions::default()).unwrap();
        assert!(cohort.is_empty());
    }

    #[test]
    fn bot_and_deleted_comments_dropped() {
        let comments = vec![
            comment("1", "ann", "Mommit", "[deleted]"),
            comment("2", "ann", "Mommit", "kept"),
            comment("3", "ann", "Parenting", "[removed]"),
            comment("4", "ann", "Parenting", "kept too"),
            comment("5", "AutoModerator", "Mommit", "I am a bot"),
        ];
        let cohort = select_cohort(&comments, &venues(), &IngestOptions::default()).unwrap();
        assert_eq!(cohort.len(), 1);
        for rec in cohort.authors.values() {
            for c in rec.single_comments.iter().chain(&rec.mixed_comments) {
                assert_ne!(c.author, "AutoModerator");
                assert!(!DELETION_PLACEHOLDERS.contains(&c.body.as_str()));
            }
        }
        assert_eq!(cohort.comment_count(), 2);
    }

    #[test]
    fn select_cohort_is_idempotent() {
        let comments = vec![
            comment("1", "ann", "Mommit", "a"),
            comment("2", "ann", "Parenting", "b"),
            comment("3", "bob", "Daddit", "c"),
            comment("4", "bob", "Parenting", "d"),
            comment("5", "pat", "Mommit", "e"),
            comment("6", "pat", "Daddit", "f"),
            comment("7", "solo", "Parenting", "g"),
        ];
        let opts = IngestOptions::default();
        let once = select_cohort(&comments, &venues(), &opts).unwrap();
        let flattened: Vec<RawComment> = once
            .authors
            .values()
            .flat_map(|r| r.single_comments.iter().chain(&r.mixed_comments).cloned())
            .collect();
        let twice = select_cohort(&flattened, &venues(), &opts).unwrap();
        assert_eq!(
            once.authors.keys().collect::<Vec<_>>(),
            twice.authors.keys().collect::<Vec<_>>()
        );
        for (name, rec) in &once.authors {
            let rec2 = &twice.authors[name];
            assert_eq!(rec.gender, rec2.gender);
            assert_eq!(rec.single_comments, rec2.single_comments);
            assert_eq!(rec.mixed_comments, rec2.mixed_comments);
        }
    }

    #[test]
    fn partition_property_one_label_per_author() {
        let comments = vec![
            comment("1", "ann", "Mommit", "a"),
            comment("2", "ann", "Parenting", "b"),
            comment("3", "bob", "Daddit", "c"),
            comment("4", "bob", "Parenting", "d"),
        ];
        let cohort = select_cohort(&comments, &venues(), &IngestOptions::default()).unwrap();
        // BTreeMap keys are unique, so each author appears under exactly one
        // label; check the labels match the venues posted in.
        assert_eq!(cohort.authors["ann"].gender, GenderGroup::A);
        assert_eq!(cohort.authors["bob"].gender, GenderGroup::B);
    }

    #[test]
    fn summary_counts_sum_to_cohort_size() {
        let comments = vec![
            comment("1", "ann", "Mommit", "a"),
            comment("2", "ann", "Parenting", "b"),
        ];
        let cohort = select_cohort(&comments, &venues(), &IngestOptions::default()).unwrap();
        let summary = cohort_summary(&cohort);
        assert_eq!(summary.total_comments(), 2);
        assert_eq!(summary.authors_per_group[&GenderGroup::A], 1);
    }

    #[test]
    fn summary_empty_cohort_is_all_zeros() {
        let summary = cohort_summary(&Cohort::default());
        assert!(summary.authors_per_group.is_empty());
        assert_eq!(summary.total_comments(), 0);
    }

    #[test]
    fn summary_matches_constructed_split() {
        // 3 A-authors with 1 single comment each, 2 B-authors with 2 mixed
        // comments each; every author needs both contexts to be retained.
        let mut comments = Vec::new();
        for (i, name) in ["a1", "a2", "a3"].iter().enumerate() {
            comments.push(comment(&format!("s{i}"), name, "Mommit", "x"));
            comments.push(comment(&format!("m{i}"), name, "Parenting", "y"));
        }
        for (i, name) in ["b1", "b2"].iter().enumerate() {
            comments.push(comment(&format!("t{i}"), name, "Daddit", "x"));
            comments.push(comment(&format!("p{i}a"), name, "Parenting", "y"));
            comments.push(comment(&format!("p{i}b"), name, "Parenting", "z"));
        }
        let cohort = select_cohort(&comments, &venues(), &IngestOptions::default()).unwrap();
        let summary = cohort_summary(&cohort);
        assert_eq!(summary.authors_per_group[&GenderGroup::A], 3);
        assert_eq!(summary.authors_per_group[&GenderGroup::B], 2);
        assert_eq!(
            summary.comments_per_venue_group[&("Mommit".to_string(), GenderGroup::A)],
            3
        );
        assert_eq!(
            summary.comments_per_venue_group[&("Daddit".to_string(), GenderGroup::B)],
            2
        );
        assert_eq!(
            summary.comments_per_venue_group[&("Parenting".to_string(), GenderGroup::A)],
            3
        );
        assert_eq!(
            summary.comments_per_venue_group[&("Parenting".to_string(), GenderGroup::B)],
            4
        );
    }

    #[test]
    fn venue_spec_rejects_bad_shapes() {
        let mut classes = BTreeMap::new();
        classes.insert("OnlySingle".to_string(), AudienceClass::SingleGenderA);
        assert!(VenueSpec::new(classes.clone()).is_err());
        classes.insert("M1".to_string(), AudienceClass::Mixed);
        classes.insert("M2".to_string(), AudienceClass::Mixed);
        assert!(VenueSpec::new(classes).is_err());
    }
}
