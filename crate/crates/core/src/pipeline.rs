//! Stage orchestration and provenance.
//!
//! Each stage reads the previous stage's artifacts from the output
//! directory, writes its own, and appends one manifest line recording the
//! digests of everything it consumed and produced — so identical
//! parameters and seed yield identical manifests, and any artifact can be
//! traced to the exact inputs that made it.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{
    audience_shift, group_concentration_centroid, group_concentration_pairwise, group_vectors,
    ks_two_sample, load_lexicons, min_activity_filter, t_test, topic_affinity, GroupLabel,
    SimilarityDistribution, TopicLexicon,
};
use crate::config::RunConfig;
use crate::embedding::{export_text, load_model, save_model, train};
use crate::error::{Error, Result};
use crate::ingest::{cohort_summary, load_comments, select_cohort, Audience, AuthorRecord, Cohort, GenderGroup, RawComment};
use crate::inject::{inject_corpus, write_corpus, SpeakerToken};
use crate::plot::{plot_distributions, plot_landscape, PlotPoint};
use crate::preprocess::{clean_corpus, TokenDoc};
use crate::projection::project;
use crate::synth::{generate, write_dump, write_lexicons};

pub const DUMP_FILE: &str = "dump.jsonl";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";
pub const LEXICON_FILE: &str = "topics.txt";
pub const COHORT_FILE: &str = "cohort.jsonl";
pub const INGEST_SUMMARY_FILE: &str = "ingest_summary.csv";
pub const DOCS_FILE: &str = "docs.jsonl";
pub const PREPROCESS_STATS_FILE: &str = "preprocess_stats.json";
pub const CORPUS_FILE: &str = "corpus.txt";
pub const MODEL_FILE: &str = "model.bin";
pub const MODEL_TEXT_FILE: &str = "model.txt";
pub const CONCENTRATION_FILE: &str = "concentration.csv";
pub const CONCENTRATION_SAMPLES_FILE: &str = "concentration_samples.csv";
pub const KS_MATRIX_FILE: &str = "ks_matrix.csv";
pub const AUDIENCE_SHIFT_FILE: &str = "audience_shift.csv";
pub const TOPIC_AFFINITY_FILE: &str = "topic_affinity.csv";
pub const LAYOUT_FILE: &str = "layout.csv";
pub const LANDSCAPE_SVG: &str = "landscape.svg";
pub const DISTRIBUTIONS_SVG: &str = "distributions.svg";
pub const MANIFEST_FILE: &str = "manifest.tsv";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Synth,
    Ingest,
    Preprocess,
    Train,
    Analyze,
    Project,
    Plot,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Ingest => "ingest",
            Stage::Preprocess => "preprocess",
            Stage::Train => "train",
            Stage::Analyze => "analyze",
            Stage::Project => "project",
            Stage::Plot => "plot",
        }
    }
}

/// One manifest line: the stage, the parameter digest, and the digests of
/// consumed and produced artifacts (by file name, never by path, so runs
/// in different directories compare equal).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub stage: String,
    pub config_digest: String,
    pub inputs: Vec<(String, String)>,
    pub outputs: Vec<(String, String)>,
}

impl ManifestEntry {
    pub fn line(&self) -> String {
        let mut fields = vec![self.stage.clone(), format!("config={}", self.config_digest)];
        for (name, digest) in &self.inputs {
            fields.push(format!("in:{name}={digest}"));
        }
        for (name, digest) in &self.outputs {
            fields.push(format!("out:{name}={digest}"));
        }
        fields.join("\t")
    }
}

pub fn file_digest(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(format!("{:x}", hasher.finalize()))
}

fn config_digest(cfg: &RunConfig) -> Result<String> {
    let params = cfg.params_toml()?;
    Ok(format!("{:x}", Sha256::digest(params.as_bytes())))
}

fn append_manifest(out_dir: &Path, entry: &ManifestEntry) -> Result<()> {
    let path = out_dir.join(MANIFEST_FILE);
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .map_err(|e| Error::io(&path, e))?;
    writeln!(file, "{}", entry.line()).map_err(|e| Error::io(&path, e))?;
    Ok(())
}

/// Error for a stage input that has not been produced yet, naming the
/// stage that produces it.
fn require_artifact(out_dir: &Path, name: &str, producer: Stage) -> Result<PathBuf> {
    let path = out_dir.join(name);
    if !path.is_file() {
        return Err(Error::MissingStageInput {
            artifact: name.to_string(),
            stage: producer.name().to_string(),
        });
    }
    Ok(path)
}

/// The dump this run ingests: the configured input file, or the
/// synth-generated one.
fn dump_path(cfg: &RunConfig) -> Result<(PathBuf, String)> {
    if let Some(input) = &cfg.input {
        if !input.is_file() {
            return Err(Error::data(format!(
                "input dump {} is not readable",
                input.display()
            )));
        }
        let name = input
            .file_name()
            .map(|n| n.to_string_lossy().to_string())
            .unwrap_or_else(|| "input".to_string());
        Ok((input.clone(), name))
    } else if cfg.synth.is_some() {
        let path = require_artifact(&cfg.out_dir, DUMP_FILE, Stage::Synth)?;
        Ok((path, DUMP_FILE.to_string()))
    } else {
        Err(Error::config(vec![
            "no input dump configured and no [synth] section".to_string(),
        ]))
    }
}

/// The lexicon source, when one exists: configured path, else the
/// synth-generated file.
fn lexicon_path(cfg: &RunConfig) -> Result<Option<PathBuf>> {
    if let Some(path) = &cfg.analysis.lexicons {
        return Ok(Some(path.clone()));
    }
    if cfg.synth.is_some() {
        return Ok(Some(require_artifact(&cfg.out_dir, LEXICON_FILE, Stage::Synth)?));
    }
    Ok(None)
}

// ---------------------------------------------------------------------
// intermediate artifact formats
// ---------------------------------------------------------------------

/// One retained comment with its cohort labels — the `cohort.jsonl` row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortRow {
    pub author: String,
    pub gender: GenderGroup,
    pub audience: Audience,
    pub venue: String,
    pub id: String,
    pub body: String,
    pub created_utc: i64,
}

pub fn write_cohort(path: impl AsRef<Path>, cohort: &Cohort) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    for rec in cohort.authors.values() {
        let contexts = [
            (Audience::Single, &rec.single_comments),
            (Audience::Mixed, &rec.mixed_comments),
        ];
        for (audience, comments) in contexts {
            for c in comments {
                let row = CohortRow {
                    author: rec.author.clone(),
                    gender: rec.gender,
                    audience,
                    venue: c.venue.clone(),
                    id: c.id.clone(),
                    body: c.body.clone(),
                    created_utc: c.created_utc,
                };
                let line = serde_json::to_string(&row)
                    .map_err(|e| Error::Internal(format!("serializing cohort row: {e}")))?;
                writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_cohort(path: impl AsRef<Path>) -> Result<Cohort> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut authors: BTreeMap<String, AuthorRecord> = BTreeMap::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: CohortRow = serde_json::from_str(&line).map_err(|e| {
            Error::data(format!("{}:{}: bad cohort row: {e}", path.display(), lineno + 1))
        })?;
        let rec = authors.entry(row.author.clone()).or_insert_with(|| AuthorRecord {
            author: row.author.clone(),
            gender: row.gender,
            single_comments: Vec::new(),
            mixed_comments: Vec::new(),
        });
        if rec.gender != row.gender {
            return Err(Error::data(format!(
                "author {:?} carries two group labels in {}",
                row.author,
                path.display()
            )));
        }
        let comment = RawComment {
            id: row.id,
            author: row.author,
            venue: row.venue,
            body: row.body,
            created_utc: row.created_utc,
        };
        match row.audience {
            Audience::Single => rec.single_comments.push(comment),
            Audience::Mixed => rec.mixed_comments.push(comment),
        }
    }
    Ok(Cohort { authors })
}

pub fn write_docs(path: impl AsRef<Path>, docs: &[TokenDoc]) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    for doc in docs {
        let line = serde_json::to_string(doc)
            .map_err(|e| Error::Internal(format!("serializing doc: {e}")))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_docs(path: impl AsRef<Path>) -> Result<Vec<TokenDoc>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut docs = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: TokenDoc = serde_json::from_str(&line).map_err(|e| {
            Error::data(format!("{}:{}: bad doc row: {e}", path.display(), lineno + 1))
        })?;
        docs.push(doc);
    }
    Ok(docs)
}

// ---------------------------------------------------------------------
// CSV report tables
// ---------------------------------------------------------------------

/// Group summary row (Table-1 shape): one line per group × variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationRow {
    pub group: String,
    pub variant: String,
    pub mean: f64,
    pub std: f64,
    pub n: u64,
}

/// Raw concentration sample value, for density plots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub group: String,
    pub variant: String,
    pub value: f64,
}

/// Pairwise test row (Table-2 shape), KS and t for every comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsMatrixRow {
    pub variant: String,
    pub group_x: String,
    pub group_y: String,
    pub ks_d: f64,
    pub ks_p: f64,
    pub t_stat: f64,
    pub t_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudienceShiftRow {
    pub author: String,
    pub group: String,
    pub shift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicAffinityRow {
    pub group: String,
    pub topic: String,
    pub affinity: f64,
    pub missing_keywords: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutRow {
    pub token: String,
    pub group: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummaryRow {
    pub kind: String,
    pub venue: String,
    pub group: String,
    pub count: u64,
}

pub fn write_csv<T: Serialize>(path: impl AsRef<Path>, rows: &[T]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
    for row in rows {
        w.serialize(row)
            .map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for row in r.deserialize() {
        rows.push(row.map_err(|e| Error::data(format!("{}: {e}", path.display())))?);
    }
    Ok(rows)
}

// ---------------------------------------------------------------------
// stages
// ---------------------------------------------------------------------

fn ensure_out_dir(cfg: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))
}

pub fn run_synth(cfg: &RunConfig) -> Result<ManifestEntry> {
    ensure_out_dir(cfg)?;
    let spec = cfg
        .synth
        .as_ref()
        .ok_or_else(|| Error::config(vec!["synth stage needs a [synth] section".to_string()]))?;
    let corpus = generate(spec, cfg.seed()?)?;
    let dump = cfg.out_dir.join(DUMP_FILE);
    write_dump(&corpus, &dump)?;
    let truth_path = cfg.out_dir.join(GROUND_TRUTH_FILE);
    let truth_json = serde_json::to_string_pretty(&corpus.truth)
        .map_err(|e| Error::Internal(format!("serializing ground truth: {e}")))?;
    std::fs::write(&truth_path, truth_json).map_err(|e| Error::io(&truth_path, e))?;
    let lex_path = cfg.out_dir.join(LEXICON_FILE);
    write_lexicons(spec, &lex_path)?;

    Ok(ManifestEntry {
        stage: Stage::Synth.name().to_string(),
        config_digest: config_digest(cfg)?,
        inputs: vec![],
        outputs: vec![
            (DUMP_FILE.to_string(), file_digest(&dump)?),
            (GROUND_TRUTH_FILE.to_string(), file_digest(&truth_path)?),
            (LEXICON_FILE.to_string(), file_digest(&lex_path)?),
        ],
    })
}

pub fn run_ingest(cfg: &RunConfig) -> Result<ManifestEntry> {
    ensure_out_dir(cfg)?;
    let (dump, dump_name) = dump_path(cfg)?;
    let loaded = load_comments(&dump)?;
    let cohort = select_cohort(&loaded.comments, &cfg.venue_spec()?, &cfg.ingest)?;
    if cohort.is_empty() {
        eprintln!("warning: cohort is empty after selection");
    }
    if loaded.malformed > 0 {
        eprintln!("warning: skipped {} malformed dump lines", loaded.malformed);
    }

    let cohort_path = cfg.out_dir.join(COHORT_FILE);
    write_cohort(&cohort_path, &cohort)?;

    let summary = cohort_summary(&cohort);
    let mut rows = Vec::new();
    for (group, count) in &summary.authors_per_group {
        rows.push(IngestSummaryRow {
            kind: "authors".to_string(),
            venue: String::new(),
            group: group.to_string(),
            count: *count,
        });
    }
    for ((venue, group), count) in &summary.comments_per_venue_group {
        rows.push(IngestSummaryRow {
            kind: "comments".to_string(),
            venue: venue.clone(),
            group: group.to_string(),
            count: *count,
        });
    }
    let summary_path = cfg.out_dir.join(INGEST_SUMMARY_FILE);
    write_csv(&summary_path, &rows)?;

    Ok(ManifestEntry {
        stage: Stage::Ingest.name().to_string(),
        config_digest: config_digest(cfg)?,
        inputs: vec![(dump_name, file_digest(&dump)?)],
        outputs: vec![
            (COHORT_FILE.to_string(), file_digest(&cohort_path)?),
            (INGEST_SUMMARY_FILE.to_string(), file_digest(&summary_path)?),
        ],
    })
}

pub fn run_preprocess(cfg: &RunConfig) -> Result<ManifestEntry> {
    ensure_out_dir(cfg)?;
    let cohort_path = require_artifact(&cfg.out_dir, COHORT_FILE, Stage::Ingest)?;
    let cohort = read_cohort(&cohort_path)?;
    let opts = cfg.preprocess_options()?;
    let (docs, stats) = clean_corpus(&cohort, &opts);

    let docs_path = cfg.out_dir.join(DOCS_FILE);
    write_docs(&docs_path, &docs)?;
    let stats_path = cfg.out_dir.join(PREPROCESS_STATS_FILE);
    let stats_json = serde_json::to_string_pretty(&stats)
        .map_err(|e| Error::Internal(format!("serializing stats: {e}")))?;
    std::fs::write(&stats_path, stats_json).map_err(|e| Error::io(&stats_path, e))?;

    Ok(ManifestEntry {
        stage: Stage::Preprocess.name().to_string(),
        config_digest: config_digest(cfg)?,
        inputs: vec![(COHORT_FILE.to_string(), file_digest(&cohort_path)?)],
        outputs: vec![
            (DOCS_FILE.to_string(), file_digest(&docs_path)?),
            (PREPROCESS_STATS_FILE.to_string(), file_digest(&stats_path)?),
        ],
    })
}

pub fn run_train(cfg: &RunConfig) -> Result<ManifestEntry> {
    ensure_out_dir(cfg)?;
    let docs_path = require_artifact(&cfg.out_dir, DOCS_FILE, Stage::Preprocess)?;
    let docs = read_docs(&docs_path)?;
    if docs.is_empty() {
        return Err(Error::data("no documents survived preprocessing"));
    }
    let seed = cfg.seed()?;
    let corpus = inject_corpus(&docs, seed)?;
    let corpus_path = cfg.out_dir.join(CORPUS_FILE);
    write_corpus(&corpus_path, &corpus)?;

    let train_config = cfg.train.to_train_config(seed, cfg.workers);
    let model = train(&corpus, &train_config)?;
    let model_path = cfg.out_dir.join(MODEL_FILE);
    save_model(&model, &model_path)?;

    let mut outputs = vec![
        (CORPUS_FILE.to_string(), file_digest(&corpus_path)?),
        (MODEL_FILE.to_string(), file_digest(&model_path)?),
    ];
    if cfg.train.text_export {
        let text_path = cfg.out_dir.join(MODEL_TEXT_FILE);
        export_text(&model, &text_path)?;
        outputs.push((MODEL_TEXT_FILE.to_string(), file_digest(&text_path)?));
    }

    Ok(ManifestEntry {
        stage: Stage::Train.name().to_string(),
        config_digest: config_digest(cfg)?,
        inputs: vec![(DOCS_FILE.to_string(), file_digest(&docs_path)?)],
        outputs,
    })
}

fn load_lexicons_if_any(cfg: &RunConfig) -> Result<Option<(PathBuf, Vec<TopicLexicon>)>> {
    match lexicon_path(cfg)? {
        Some(path) => {
            let lemmatizer = crate::preprocess::RuleLemmatizer::default();
            let lexicons = load_lexicons(&path, &lemmatizer)?;
            Ok(Some((path, lexicons)))
        }
        None => Ok(None),
    }
}

pub fn run_analyze(cfg: &RunConfig) -> Result<ManifestEntry> {
    ensure_out_dir(cfg)?;
    let model_path = require_artifact(&cfg.out_dir, MODEL_FILE, Stage::Train)?;
    let cohort_path = require_artifact(&cfg.out_dir, COHORT_FILE, Stage::Ingest)?;
    let model = load_model(&model_path)?;
    let cohort = read_cohort(&cohort_path)?;
    let lexicons = load_lexicons_if_any(cfg)?;

    let mut concentration_rows = Vec::new();
    let mut sample_rows = Vec::new();
    let mut distributions: BTreeMap<(String, String), SimilarityDistribution> = BTreeMap::new();

    for label in GroupLabel::ALL {
        let (vectors, skipped) = group_vectors(&model, &cohort, label);
        if skipped > 0 {
            eprintln!(
                "note: {} {} authors have no trained speaker vector",
                skipped,
                label.name()
            );
        }
        if vectors.len() >= 2 {
            let pairwise = group_concentration_pairwise(label.name(), &vectors)?;
            let centroid = group_concentration_centroid(label.name(), &vectors)?;
            for (variant, dist) in [("pairwise", &pairwise), ("centroid", &centroid)] {
                concentration_rows.push(ConcentrationRow {
                    group: label.name(),
                    variant: variant.to_string(),
                    mean: dist.mean,
                    std: dist.std,
                    n: dist.n() as u64,
                });
                for &value in &dist.values {
                    sample_rows.push(SampleRow {
                        group: label.name(),
                        variant: variant.to_string(),
                        value,
                    });
                }
            }
            distributions.insert((label.name(), "pairwise".to_string()), pairwise);
            distributions.insert((label.name(), "centroid".to_string()), centroid);
        }
    }

    let concentration_path = cfg.out_dir.join(CONCENTRATION_FILE);
    write_csv(&concentration_path, &concentration_rows)?;
    let samples_path = cfg.out_dir.join(CONCENTRATION_SAMPLES_FILE);
    write_csv(&samples_path, &sample_rows)?;

    // KS and t for every unordered pair of groups, both variants
    let mut matrix_rows = Vec::new();
    for variant in ["pairwise", "centroid"] {
        let present: Vec<&GroupLabel> = GroupLabel::ALL
            .iter()
            .filter(|l| distributions.contains_key(&(l.name(), variant.to_string())))
            .collect();
        for (i, x) in present.iter().enumerate() {
            for y in present.iter().skip(i + 1) {
                let dx = &distributions[&(x.name(), variant.to_string())];
                let dy = &distributions[&(y.name(), variant.to_string())];
                let ks = ks_two_sample(&dx.values, &dy.values)?;
                let tt = t_test(&dx.values, &dy.values, false)?;
                matrix_rows.push(KsMatrixRow {
                    variant: variant.to_string(),
                    group_x: x.name(),
                    group_y: y.name(),
                    ks_d: ks.d,
                    ks_p: ks.p,
                    t_stat: tt.t,
                    t_p: tt.p,
                });
            }
        }
    }
    let matrix_path = cfg.out_dir.join(KS_MATRIX_FILE);
    write_csv(&matrix_path, &matrix_rows)?;

    // per-author audience shift; authors whose either token is missing
    // from the vocabulary are skipped
    let mut shift_rows = Vec::new();
    for rec in cohort.authors.values() {
        match audience_shift(&model, &rec.author) {
            Ok(shift) => shift_rows.push(AudienceShiftRow {
                author: rec.author.clone(),
                group: rec.gender.to_string(),
                shift,
            }),
            Err(Error::MissingSpeakerToken { .. }) => continue,
            Err(other) => return Err(other),
        }
    }
    let shift_path = cfg.out_dir.join(AUDIENCE_SHIFT_FILE);
    write_csv(&shift_path, &shift_rows)?;

    let mut inputs = vec![
        (MODEL_FILE.to_string(), file_digest(&model_path)?),
        (COHORT_FILE.to_string(), file_digest(&cohort_path)?),
    ];
    let mut outputs = vec![
        (CONCENTRATION_FILE.to_string(), file_digest(&concentration_path)?),
        (CONCENTRATION_SAMPLES_FILE.to_string(), file_digest(&samples_path)?),
        (KS_MATRIX_FILE.to_string(), file_digest(&matrix_path)?),
        (AUDIENCE_SHIFT_FILE.to_string(), file_digest(&shift_path)?),
    ];

    if let Some((lex_path, lexicons)) = lexicons {
        let mut affinity_rows = Vec::new();
        for label in GroupLabel::ALL {
            let (vectors, _) = group_vectors(&model, &cohort, label);
            if vectors.is_empty() {
                continue;
            }
            for lex in &lexicons {
                match topic_affinity(&vectors, lex, &model) {
                    Ok(a) => affinity_rows.push(TopicAffinityRow {
                        group: label.name(),
                        topic: a.topic,
                        affinity: a.affinity,
                        missing_keywords: a.missing_keywords.len() as u64,
                    }),
                    Err(Error::Data(msg)) => {
                        eprintln!("note: skipping topic {:?} for {}: {msg}", lex.name, label.name());
                    }
                    Err(other) => return Err(other),
                }
            }
        }
        let affinity_path = cfg.out_dir.join(TOPIC_AFFINITY_FILE);
        write_csv(&affinity_path, &affinity_rows)?;
        inputs.push((
            lex_path
                .file_name()
                .map(|n| n.to_string_lossy().to_string())
                .unwrap_or_else(|| LEXICON_FILE.to_string()),
            file_digest(&lex_path)?,
        ));
        outputs.push((TOPIC_AFFINITY_FILE.to_string(), file_digest(&affinity_path)?));
    }

    Ok(ManifestEntry {
        stage: Stage::Analyze.name().to_string(),
        config_digest: config_digest(cfg)?,
        inputs,
        outputs,
    })
}

pub fn run_project(cfg: &RunConfig) -> Result<ManifestEntry> {
    ensure_out_dir(cfg)?;
    let model_path = require_artifact(&cfg.out_dir, MODEL_FILE, Stage::Train)?;
    let cohort_path = require_artifact(&cfg.out_dir, COHORT_FILE, Stage::Ingest)?;
    let model = load_model(&model_path)?;
    let cohort = read_cohort(&cohort_path)?;
    let filtered = min_activity_filter(&cohort, cfg.analysis.activity_threshold);
    if filtered.is_empty() {
        return Err(Error::data(format!(
            "no author reaches the activity threshold of {} comments per context",
            cfg.analysis.activity_threshold
        )));
    }

    let mut tokens: Vec<(String, String)> = Vec::new(); // (token, group)
    for rec in filtered.authors.values() {
        for audience in [Audience::Single, Audience::Mixed] {
            let token = SpeakerToken::new(rec.author.clone(), audience).render();
            if model.vector(&token).is_some() {
                let label = GroupLabel {
                    gender: rec.gender,
                    audience,
                };
                tokens.push((token, label.name()));
            }
        }
    }
    let lexicons = load_lexicons_if_any(cfg)?;
    if let Some((_, lexicons)) = &lexicons {
        let mut seen = std::collections::BTreeSet::new();
        for lex in lexicons {
            for kw in &lex.keywords {
                if model.vector(kw).is_some() && seen.insert(kw.clone()) {
                    tokens.push((kw.clone(), lex.name.clone()));
                }
            }
        }
    }
    if tokens.len() < 2 {
        return Err(Error::data("projection needs at least 2 points"));
    }

    let vectors: Vec<Vec<f64>> = tokens
        .iter()
        .map(|(t, _)| model.vector_f64(t).expect("token vetted above"))
        .collect();
    let projection_config = cfg.projection.to_projection_config(cfg.seed()?);
    let result = project(&vectors, &projection_config)?;

    let rows: Vec<LayoutRow> = tokens
        .iter()
        .zip(&result.coords)
        .map(|((token, group), coord)| LayoutRow {
            token: token.clone(),
            group: group.clone(),
            x: coord[0],
            y: coord[1],
        })
        .collect();
    let layout_path = cfg.out_dir.join(LAYOUT_FILE);
    write_csv(&layout_path, &rows)?;

    Ok(ManifestEntry {
        stage: Stage::Project.name().to_string(),
        config_digest: config_digest(cfg)?,
        inputs: vec![
            (MODEL_FILE.to_string(), file_digest(&model_path)?),
            (COHORT_FILE.to_string(), file_digest(&cohort_path)?),
        ],
        outputs: vec![(LAYOUT_FILE.to_string(), file_digest(&layout_path)?)],
    })
}

pub fn run_plot(cfg: &RunConfig) -> Result<ManifestEntry> {
    ensure_out_dir(cfg)?;
    let layout_path = require_artifact(&cfg.out_dir, LAYOUT_FILE, Stage::Project)?;
    let samples_path = require_artifact(&cfg.out_dir, CONCENTRATION_SAMPLES_FILE, Stage::Analyze)?;

    let layout_rows: Vec<LayoutRow> = read_csv(&layout_path)?;
    let mut speakers = Vec::new();
    let mut overlay = Vec::new();
    for row in layout_rows {
        let point = PlotPoint {
            token: row.token,
            group: row.group.clone(),
            x: row.x,
            y: row.y,
        };
        if GroupLabel::parse(&row.group).is_some() {
            speakers.push(point);
        } else {
            overlay.push(point);
        }
    }
    let landscape = plot_landscape(&speakers, &overlay);
    let landscape_path = cfg.out_dir.join(LANDSCAPE_SVG);
    std::fs::write(&landscape_path, landscape).map_err(|e| Error::io(&landscape_path, e))?;

    let sample_rows: Vec<SampleRow> = read_csv(&samples_path)?;
    let mut by_group: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for row in sample_rows {
        if row.variant == "pairwise" {
            by_group.entry(row.group).or_default().push(row.value);
        }
    }
    let dists: Vec<SimilarityDistribution> = by_group
        .into_iter()
        .map(|(group, values)| SimilarityDistribution::new(group, values))
        .collect();
    if dists.is_empty() {
        return Err(Error::data("no pairwise concentration samples to plot"));
    }
    let curves = plot_distributions(&dists);
    let curves_path = cfg.out_dir.join(DISTRIBUTIONS_SVG);
    std::fs::write(&curves_path, curves).map_err(|e| Error::io(&curves_path, e))?;

    Ok(ManifestEntry {
        stage: Stage::Plot.name().to_string(),
        config_digest: config_digest(cfg)?,
        inputs: vec![
            (LAYOUT_FILE.to_string(), file_digest(&layout_path)?),
            (CONCENTRATION_SAMPLES_FILE.to_string(), file_digest(&samples_path)?),
        ],
        outputs: vec![
            (LANDSCAPE_SVG.to_string(), file_digest(&landscape_path)?),
            (DISTRIBUTIONS_SVG.to_string(), file_digest(&curves_path)?),
        ],
    })
}

pub fn run_stage(cfg: &RunConfig, stage: Stage) -> Result<ManifestEntry> {
    cfg.validate()?;
    let entry = match stage {
        Stage::Synth => run_synth(cfg),
        Stage::Ingest => run_ingest(cfg),
        Stage::Preprocess => run_preprocess(cfg),
        Stage::Train => run_train(cfg),
        Stage::Analyze => run_analyze(cfg),
        Stage::Project => run_project(cfg),
        Stage::Plot => run_plot(cfg),
    }?;
    append_manifest(&cfg.out_dir, &entry)?;
    Ok(entry)
}

/// Run every stage in order (synth first when configured), restarting the
/// manifest.
pub fn run_pipeline(cfg: &RunConfig) -> Result<Vec<ManifestEntry>> {
    cfg.validate()?;
    ensure_out_dir(cfg)?;
    let manifest_path = cfg.out_dir.join(MANIFEST_FILE);
    if manifest_path.exists() {
        std::fs::remove_file(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    }

    let mut stages = Vec::new();
    if cfg.synth.is_some() && cfg.input.is_none() {
        stages.push(Stage::Synth);
    }
    stages.extend([
        Stage::Ingest,
        Stage::Preprocess,
        Stage::Train,
        Stage::Analyze,
        Stage::Project,
        Stage::Plot,
    ]);

    let mut entries = Vec::new();
    for stage in stages {
        entries.push(run_stage(cfg, stage)?);
    }
    Ok(entries)
}
