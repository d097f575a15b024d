//! Run configuration: a single sectioned key-value (TOML) file driving
//! every pipeline stage. All keys have documented defaults except the
//! input dump path and the seed; relative paths resolve against the
//! config file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::embedding::TrainConfig;
use crate::error::{Error, Result};
use crate::ingest::{AudienceClass, IngestOptions, VenueSpec};
use crate::preprocess::{PreprocessOptions, RuleLemmatizer, StopList};
use crate::projection::ProjectionConfig;
use crate::synth::PlantSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed for every stage. Mandatory.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Input dump path. Mandatory unless a `[synth]` section generates it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// Stage artifact directory.
    pub out_dir: PathBuf,
    /// Training worker threads; 1 is deterministic.
    pub workers: usize,
    /// Venue name → audience class. May be empty when `[synth]` supplies
    /// the venues.
    pub venues: BTreeMap<String, AudienceClass>,
    pub ingest: IngestOptions,
    pub preprocess: PreprocessSection,
    pub train: TrainSection,
    pub analysis: AnalysisSection,
    pub projection: ProjectionSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synth: Option<PlantSpec>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: None,
            input: None,
            out_dir: PathBuf::from("out"),
            workers: 1,
            venues: BTreeMap::new(),
            ingest: IngestOptions::default(),
            preprocess: PreprocessSection::default(),
            train: TrainSection::default(),
            analysis: AnalysisSection::default(),
            projection: ProjectionSection::default(),
            synth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessSection {
    pub phrase_min_count: u64,
    pub phrase_threshold: f64,
    /// Extra stopwords file (one per line), added to the bundled list.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extra_stopwords: Option<PathBuf>,
    /// Extra lemmatizer exceptions file (`surface TAB lemma` per line).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lemma_exceptions: Option<PathBuf>,
}

impl Default for PreprocessSection {
    fn default() -> Self {
        PreprocessSection {
            phrase_min_count: 5,
            phrase_threshold: 10.0,
            extra_stopwords: None,
            lemma_exceptions: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub lr_initial: f64,
    pub lr_final: f64,
    /// Also write a plain-text vector export next to the binary model.
    pub text_export: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            dim: t.dim,
            window: t.window,
            negatives: t.negatives,
            epochs: t.epochs,
            lr_initial: t.lr_initial,
            lr_final: t.lr_final,
            text_export: false,
        }
    }
}

impl TrainSection {
    pub fn to_train_config(&self, seed: u64, workers: usize) -> TrainConfig {
        TrainConfig {
            dim: self.dim,
            window: self.window,
            negatives: self.negatives,
            epochs: self.epochs,
            lr_initial: self.lr_initial,
            lr_final: self.lr_final,
            seed,
            workers,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    /// Authors need at least this many comments in both contexts to be
    /// plotted (applied in the projection stage, as the method does for
    /// visualization).
    pub activity_threshold: usize,
    /// Topic lexicon file or directory. Defaults to the synth-generated
    /// lexicons when a `[synth]` section is present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lexicons: Option<PathBuf>,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            activity_threshold: 5,
            lexicons: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectionSection {
    pub n_neighbors: usize,
    pub min_dist: f64,
    pub epochs: usize,
}

impl Default for ProjectionSection {
    fn default() -> Self {
        let p = ProjectionConfig::default();
        ProjectionSection {
            n_neighbors: p.n_neighbors,
            min_dist: p.min_dist,
            epochs: p.epochs,
        }
    }
}

impl ProjectionSection {
    pub fn to_projection_config(&self, seed: u64) -> ProjectionConfig {
        ProjectionConfig {
            n_neighbors: self.n_neighbors,
            min_dist: self.min_dist,
            epochs: self.epochs,
            seed,
        }
    }
}

impl RunConfig {
    /// Parse a config file and resolve its relative paths against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<RunConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| Error::config(vec![format!("{}: {e}", path.display())]))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&p);
            }
        };
        if let Some(input) = self.input.as_mut() {
            resolve(input);
        }
        resolve(&mut self.out_dir);
        if let Some(p) = self.preprocess.extra_stopwords.as_mut() {
            resolve(p);
        }
        if let Some(p) = self.preprocess.lemma_exceptions.as_mut() {
            resolve(p);
        }
        if let Some(p) = self.analysis.lexicons.as_mut() {
            resolve(p);
        }
    }

    /// Validate everything, reporting every violation at once.
    pub fn validate(&self) -> Result<()> {
        fn merge(violations: &mut Vec<String>, result: Result<()>) {
            match result {
                Ok(()) => {}
                Err(Error::Config { violations: v }) => violations.extend(v),
                Err(other) => violations.push(other.to_string()),
            }
        }
        let mut violations = Vec::new();

        if self.seed.is_none() {
            violations.push("seed is mandatory".to_string());
        }
        if self.workers == 0 {
            violations.push("workers must be >= 1".to_string());
        }
        match (&self.input, &self.synth) {
            (None, None) => {
                violations.push("input is mandatory unless a [synth] section is present".to_string())
            }
            (Some(input), _) => {
                if !input.is_file() {
                    violations.push(format!("input {} is not a readable file", input.display()));
                }
            }
            _ => {}
        }
        if !self.venues.is_empty() {
            merge(&mut violations, VenueSpec::new(self.venues.clone()).map(|_| ()));
        } else if self.synth.is_none() {
            violations.push("venues must be given unless a [synth] section supplies them".to_string());
        }
        merge(
            &mut violations,
            self.train
                .to_train_config(self.seed.unwrap_or(0), self.workers.max(1))
                .validate(),
        );
        merge(
            &mut violations,
            self.projection
                .to_projection_config(self.seed.unwrap_or(0))
                .validate(),
        );
        if let Some(spec) = &self.synth {
            merge(&mut violations, spec.validate());
        }
        for (key, path) in [
            ("preprocess.extra_stopwords", &self.preprocess.extra_stopwords),
            ("preprocess.lemma_exceptions", &self.preprocess.lemma_exceptions),
            ("analysis.lexicons", &self.analysis.lexicons),
        ] {
            if let Some(p) = path {
                if !p.exists() {
                    violations.push(format!("{key} path {} does not exist", p.display()));
                }
            }
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::config(violations))
        }
    }

    /// The venue assignment: explicit `[venues]` section, else the one the
    /// synth spec implies.
    pub fn venue_spec(&self) -> Result<VenueSpec> {
        if !self.venues.is_empty() {
            return VenueSpec::new(self.venues.clone());
        }
        if let Some(spec) = &self.synth {
            return spec.venue_spec();
        }
        Err(Error::config(vec!["no venue assignment available".to_string()]))
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::config(vec!["seed is mandatory".to_string()]))
    }

    /// Assemble preprocessing options (bundled resources plus configured
    /// extensions).
    pub fn preprocess_options(&self) -> Result<PreprocessOptions> {
        let mut stoplist = StopList::bundled();
        if let Some(path) = &self.preprocess.extra_stopwords {
            stoplist.extend_from_file(path)?;
        }
        let mut lemmatizer = RuleLemmatizer::default();
        if let Some(path) = &self.preprocess.lemma_exceptions {
            lemmatizer.extend_from_file(path)?;
        }
        Ok(PreprocessOptions {
            stoplist,
            lemmatizer: Box::new(lemmatizer),
            phrase_min_count: self.preprocess.phrase_min_count,
            phrase_threshold: self.preprocess.phrase_threshold,
        })
    }

    /// Canonical parameter rendering for provenance digests: the full
    /// config minus its location-dependent paths, so identical parameters
    /// digest identically regardless of where a run writes.
    pub fn params_toml(&self) -> Result<String> {
        let mut semantic = self.clone();
        semantic.input = None;
        semantic.out_dir = PathBuf::new();
        semantic.preprocess.extra_stopwords = None;
        semantic.preprocess.lemma_exceptions = None;
        semantic.analysis.lexicons = None;
        toml::to_string(&semantic)
            .map_err(|e| Error::Internal(format!("serializing config: {e}")))
    }
}
