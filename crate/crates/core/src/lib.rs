//! Speaker-landscape toolkit.
//!
//! Embeds speakers as tokens inside their own text: every preprocessed
//! comment gets its author's reserved speaker token inserted at a random
//! position, skip-gram negative-sampling vectors are trained from scratch
//! over the result, and the trained speaker vectors are then compared —
//! to each other (group concentration, audience shift) and to topic
//! keyword centroids (topic affinity) — with two-sample statistics and a
//! 2D neighbor-embedding projection for plotting.
//!
//! Stages: ingest → preprocess → inject → train → analyze → project →
//! plot. [`pipeline`] chains them from a single [`config::RunConfig`];
//! every stage is also usable on its own. [`synth`] generates corpora
//! with planted group/audience/topic structure for end-to-end
//! verification.

pub mod analysis;
pub mod config;
pub mod embedding;
pub mod error;
pub mod ingest;
pub mod inject;
pub mod pipeline;
pub mod plot;
pub mod preprocess;
pub mod projection;
pub mod synth;

pub use error::{Error, Result};
