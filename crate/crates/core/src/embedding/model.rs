//! Trained model container and its binary/text serialization.
//!
//! Binary layout (little-endian): magic `SPKL`, format version u32,
//! |V| u64, dim u32; vocabulary table (u32 length-prefixed UTF-8 token +
//! u64 count, in index order); W row-major f32; C row-major f32; then the
//! training metadata block (config fields, per-epoch mean losses, final
//! mean loss) so a round trip is bit-exact including metadata.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::ingest::Audience;
use crate::inject::SpeakerToken;

use super::train::TrainConfig;
use super::Vocabulary;

pub const MAGIC: [u8; 4] = *b"SPKL";
pub const FORMAT_VERSION: u32 = 1;

/// Training provenance stored alongside the matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainMeta {
    pub config: TrainConfig,
    /// Mean SGNS loss per epoch, in epoch order.
    pub epoch_losses: Vec<f64>,
    pub final_mean_loss: f64,
}

/// Vocabulary plus input (W) and output (C) vector matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    pub vocab: Vocabulary,
    pub dim: usize,
    w: Vec<f32>,
    c: Vec<f32>,
    pub meta: TrainMeta,
}

impl EmbeddingModel {
    pub fn from_parts(
        vocab: Vocabulary,
        dim: usize,
        w: Vec<f32>,
        c: Vec<f32>,
        meta: TrainMeta,
    ) -> Result<EmbeddingModel> {
        let expected = vocab.len() * dim;
        if w.len() != expected || c.len() != expected {
            return Err(Error::Internal(format!(
                "matrix shape mismatch: |V|={} dim={} but W has {} and C has {} entries",
                vocab.len(),
                dim,
                w.len(),
                c.len()
            )));
        }
        if w.iter().chain(&c).any(|x| !x.is_finite()) {
            return Err(Error::Internal(
                "model contains non-finite vector entries".to_string(),
            ));
        }
        Ok(EmbeddingModel {
            vocab,
            dim,
            w,
            c,
            meta,
        })
    }

    /// Input (W) vector of a vocabulary index.
    pub fn input_row(&self, index: u32) -> &[f32] {
        let i = index as usize * self.dim;
        &self.w[i..i + self.dim]
    }

    /// Output (C) vector of a vocabulary index.
    pub fn output_row(&self, index: u32) -> &[f32] {
        let i = index as usize * self.dim;
        &self.c[i..i + self.dim]
    }

    /// Input vector of a token; all comparisons in this crate use input
    /// vectors.
    pub fn vector(&self, token: &str) -> Option<&[f32]> {
        self.vocab.index(token).map(|i| self.input_row(i))
    }

    pub fn vector_f64(&self, token: &str) -> Option<Vec<f64>> {
        self.vector(token)
            .map(|v| v.iter().map(|&x| x as f64).collect())
    }

    pub fn speaker_vector(&self, author: &str, audience: Audience) -> Option<&[f32]> {
        self.vector(&SpeakerToken::new(author, audience).render())
    }

    pub fn input_matrix(&self) -> &[f32] {
        &self.w
    }

    pub fn output_matrix(&self) -> &[f32] {
        &self.c
    }
}

fn write_u32(w: &mut impl Write, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn write_u64(w: &mut impl Write, v: u64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn write_f64(w: &mut impl Write, v: f64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn read_exact_or_format(r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf)
        .map_err(|_| Error::ModelFormat("unexpected end of file".to_string()))
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact_or_format(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact_or_format(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f32(r: &mut impl Read) -> Result<f32> {
    let mut b = [0u8; 4];
    read_exact_or_format(r, &mut b)?;
    Ok(f32::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    read_exact_or_format(r, &mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn save_model(model: &EmbeddingModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e: std::io::Error| Error::io(path, e);

    w.write_all(&MAGIC).map_err(io_err)?;
    write_u32(&mut w, FORMAT_VERSION).map_err(io_err)?;
    write_u64(&mut w, model.vocab.len() as u64).map_err(io_err)?;
    write_u32(&mut w, model.dim as u32).map_err(io_err)?;

    for (token, count) in model.vocab.iter() {
        let bytes = token.as_bytes();
        write_u32(&mut w, bytes.len() as u32).map_err(io_err)?;
        w.write_all(bytes).map_err(io_err)?;
        write_u64(&mut w, count).map_err(io_err)?;
    }
    for x in &model.w {
        w.write_all(&x.to_le_bytes()).map_err(io_err)?;
    }
    for x in &model.c {
        w.write_all(&x.to_le_bytes()).map_err(io_err)?;
    }

    let cfg = &model.meta.config;
    write_u32(&mut w, cfg.window as u32).map_err(io_err)?;
    write_u32(&mut w, cfg.negatives as u32).map_err(io_err)?;
    write_u32(&mut w, cfg.epochs as u32).map_err(io_err)?;
    write_u32(&mut w, cfg.workers as u32).map_err(io_err)?;
    write_f64(&mut w, cfg.lr_initial).map_err(io_err)?;
    write_f64(&mut w, cfg.lr_final).map_err(io_err)?;
    write_u64(&mut w, cfg.seed).map_err(io_err)?;
    write_u32(&mut w, model.meta.epoch_losses.len() as u32).map_err(io_err)?;
    for loss in &model.meta.epoch_losses {
        write_f64(&mut w, *loss).map_err(io_err)?;
    }
    write_f64(&mut w, model.meta.final_mean_loss).map_err(io_err)?;
    w.flush().map_err(io_err)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<EmbeddingModel> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 4];
    read_exact_or_format(&mut r, &mut magic)?;
    if magic != MAGIC {
        return Err(Error::ModelFormat(format!(
            "bad magic {magic:?}; not a speaker-landscape model file"
        )));
    }
    let version = read_u32(&mut r)?;
    if version != FORMAT_VERSION {
        return Err(Error::ModelFormat(format!(
            "unsupported format version {version} (this build reads version {FORMAT_VERSION})"
        )));
    }
    let vocab_len = read_u64(&mut r)? as usize;
    let dim = read_u32(&mut r)? as usize;

    let mut entries = Vec::with_capacity(vocab_len);
    for _ in 0..vocab_len {
        let len = read_u32(&mut r)? as usize;
        let mut bytes = vec![0u8; len];
        read_exact_or_format(&mut r, &mut bytes)?;
        let token = String::from_utf8(bytes)
            .map_err(|_| Error::ModelFormat("vocabulary token is not UTF-8".to_string()))?;
        let count = read_u64(&mut r)?;
        entries.push((token, count));
    }
    let vocab = Vocabulary::from_entries(entries)
        .map_err(|e| Error::ModelFormat(format!("invalid vocabulary table: {e}")))?;

    let cells = vocab_len * dim;
    let mut w = Vec::with_capacity(cells);
    for _ in 0..cells {
        w.push(read_f32(&mut r)?);
    }
    let mut c = Vec::with_capacity(cells);
    for _ in 0..cells {
        c.push(read_f32(&mut r)?);
    }

    let window = read_u32(&mut r)? as usize;
    let negatives = read_u32(&mut r)? as usize;
    let epochs = read_u32(&mut r)? as usize;
    let workers = read_u32(&mut r)? as usize;
    let lr_initial = read_f64(&mut r)?;
    let lr_final = read_f64(&mut r)?;
    let seed = read_u64(&mut r)?;
    let n_losses = read_u32(&mut r)? as usize;
    let mut epoch_losses = Vec::with_capacity(n_losses);
    for _ in 0..n_losses {
        epoch_losses.push(read_f64(&mut r)?);
    }
    let final_mean_loss = read_f64(&mut r)?;

    let mut trailing = [0u8; 1];
    if r.read(&mut trailing).map_err(|e| Error::io(path, e))? != 0 {
        return Err(Error::ModelFormat(
            "trailing data after the metadata block".to_string(),
        ));
    }

    let meta = TrainMeta {
        config: TrainConfig {
            dim,
            window,
            negatives,
            epochs,
            lr_initial,
            lr_final,
            seed,
            workers,
        },
        epoch_losses,
        final_mean_loss,
    };
    EmbeddingModel::from_parts(vocab, dim, w, c, meta)
        .map_err(|e| Error::ModelFormat(format!("inconsistent model file: {e}")))
}

/// Plain-text export for interoperability: one line per token, the token
/// followed by its space-separated input-vector components.
pub fn export_text(model: &EmbeddingModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for i in 0..model.vocab.len() as u32 {
        write!(w, "{}", model.vocab.token(i)).map_err(|e| Error::io(path, e))?;
        for x in model.input_row(i) {
            write!(w, " {x}").map_err(|e| Error::io(path, e))?;
        }
        writeln!(w).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
