//! Speaker-token injection.
//!
//! Every cleaned comment receives exactly one reserved token identifying
//! its (author × audience-context) pair, inserted at a position drawn
//! uniformly from the n+1 gaps of an n-token document. The injected
//! corpus is what the embedding trainer consumes, so speakers are trained
//! exactly like words.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ingest::Audience;
use crate::preprocess::TokenDoc;

/// Reserved prefix; the tokenizer treats `:` as a separator, so no natural
/// token can collide with a rendered speaker token.
pub const SPEAKER_PREFIX: &str = "spk::";

/// RNG stream id for injection, distinct from the trainer's streams.
const INJECT_STREAM: u64 = 0x494e_4a45; // "INJE"

/// The reserved token identifying (author × audience-context).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpeakerToken {
    pub author: String,
    pub audience: Audience,
}

impl SpeakerToken {
    pub fn new(author: impl Into<String>, audience: Audience) -> Self {
        SpeakerToken {
            author: author.into(),
            audience,
        }
    }

    /// Rendered form, identical for all of an author's documents in one
    /// context: `spk::<author>::<single|mixed>`.
    pub fn render(&self) -> String {
        format!("{SPEAKER_PREFIX}{}::{}", self.author, self.audience.as_str())
    }

    /// Inverse of [`render`](Self::render); `None` for natural tokens.
    pub fn parse(token: &str) -> Option<SpeakerToken> {
        let rest = token.strip_prefix(SPEAKER_PREFIX)?;
        let (author, context) = rest.rsplit_once("::")?;
        let audience = match context {
            "single" => Audience::Single,
            "mixed" => Audience::Mixed,
            _ => return None,
        };
        if author.is_empty() {
            return None;
        }
        Some(SpeakerToken::new(author, audience))
    }
}

/// Insert the document's speaker token at an index drawn uniformly from
/// `{0, 1, …, n}`. Errors on an empty document (those must have been
/// dropped during cleaning).
pub fn inject_speaker(doc: &TokenDoc, rng: &mut impl Rng) -> Result<Vec<String>> {
    let n = doc.tokens.len();
    if n == 0 {
        return Err(Error::data(format!(
            "cannot inject speaker token into empty document {} by {}",
            doc.id, doc.author
        )));
    }
    let k = rng.random_range(0..=n);
    let token = SpeakerToken::new(doc.author.clone(), doc.audience).render();
    let mut out = Vec::with_capacity(n + 1);
    out.extend_from_slice(&doc.tokens[..k]);
    out.push(token);
    out.extend_from_slice(&doc.tokens[k..]);
    Ok(out)
}

/// Inject one speaker token per document, processing documents in stable
/// (author, venue, id) order with a single seeded RNG stream, so the
/// result is independent of ingestion order. Returns the documents in
/// that canonical order.
pub fn inject_corpus(docs: &[TokenDoc], seed: u64) -> Result<Vec<Vec<String>>> {
    let mut order: Vec<usize> = (0..docs.len()).collect();
    order.sort_by(|&a, &b| {
        let ka = (&docs[a].author, &docs[a].venue, &docs[a].id);
        let kb = (&docs[b].author, &docs[b].venue, &docs[b].id);
        ka.cmp(&kb)
    });
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(INJECT_STREAM);
    let mut out = Vec::with_capacity(docs.len());
    for &i in &order {
        out.push(inject_speaker(&docs[i], &mut rng)?);
    }
    Ok(out)
}

/// Materialize an injected corpus: one document per line, space-joined
/// tokens — the exact input the embedding trainer reads back.
pub fn write_corpus(path: impl AsRef<Path>, corpus: &[Vec<String>]) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    for doc in corpus {
        for t in doc {
            if t.chars().any(char::is_whitespace) {
                return Err(Error::data(format!(
                    "token {t:?} contains whitespace and cannot be written to the corpus file"
                )));
            }
        }
        writeln!(w, "{}", doc.join(" ")).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Read a corpus file written by [`write_corpus`]. Blank lines skipped.
pub fn read_corpus(path: impl AsRef<Path>) -> Result<Vec<Vec<String>>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(line.split_whitespace().map(str::to_string).collect());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::GenderGroup;

    fn doc(author: &str, id: &str, tokens: &[&str]) -> TokenDoc {
        TokenDoc {
            author: author.to_string(),
            gender: GenderGroup::A,
            audience: Audience::Single,
            venue: "S".to_string(),
            id: id.to_string(),
            tokens: tokens.iter().map(|t| t.to_string()).collect(),
        }
    }

    #[test]
    fn render_and_parse_round_trip() {
        let tok = SpeakerToken::new("ann", Audience::Mixed);
        assert_eq!(tok.render(), "spk::ann::mixed");
        assert_eq!(SpeakerToken::parse("spk::ann::mixed"), Some(tok));
        assert_eq!(SpeakerToken::parse("sleep"), None);
        assert_eq!(SpeakerToken::parse("spk::ann::elsewhere"), None);
    }

    #[test]
    fn single_token_doc_has_uniform_two_point_support() {
        let d = doc("ann", "1", &["a"]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut before = 0u32;
        let mut after = 0u32;
        for _ in 0..2000 {
            let injected = inject_speaker(&d, &mut rng).unwrap();
            assert_eq!(injected.len(), 2);
            if injected[0].starts_with(SPEAKER_PREFIX) {
                before += 1;
            } else {
                after += 1;
            }
        }
        assert!(before > 800 && after > 800, "before={before} after={after}");
    }

    #[test]
    fn fixed_seed_is_byte_identical() {
        let docs = vec![
            doc("ann", "1", &["a", "b", "c"]),
            doc("bob", "2", &["x", "y"]),
        ];
        let one = inject_corpus(&docs, 42).unwrap();
        let two = inject_corpus(&docs, 42).unwrap();
        assert_eq!(one, two);
    }

    #[test]
    fn injection_independent_of_input_order() {
        let a = doc("ann", "1", &["a", "b", "c"]);
        let b = doc("bob", "2", &["x", "y"]);
        let fwd = inject_corpus(&[a.clone(), b.clone()], 9).unwrap();
        let rev = inject_corpus(&[b, a], 9).unwrap();
        assert_eq!(fwd, rev);
    }

    #[test]
    fn empty_doc_is_an_error() {
        let d = doc("ann", "1", &[]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(inject_speaker(&d, &mut rng).is_err());
    }

    #[test]
    fn exactly_one_token_and_removal_recovers_original() {
        let docs = vec![
            doc("ann", "1", &["a", "b", "c", "d"]),
            doc("bob", "2", &["x"]),
            doc("cat", "3", &["p", "q", "r"]),
        ];
        let injected = inject_corpus(&docs, 5).unwrap();
        // canonical order = sorted by author, so docs[i] matches injected[i]
        for (orig, inj) in docs.iter().zip(&injected) {
            let speaker_positions: Vec<usize> = inj
                .iter()
                .enumerate()
                .filter(|(_, t)| t.starts_with(SPEAKER_PREFIX))
                .map(|(i, _)| i)
                .collect();
            assert_eq!(speaker_positions.len(), 1);
            assert_eq!(inj.len(), orig.tokens.len() + 1);
            let mut recovered = inj.clone();
            recovered.remove(speaker_positions[0]);
            assert_eq!(recovered, orig.tokens);
        }
    }

    #[test]
    fn distinct_speaker_tokens_equal_author_context_pairs() {
        let mut docs = Vec::new();
        for author in ["ann", "bob"] {
            for (ctx, venue) in [(Audience::Single, "S"), (Audience::Mixed, "M")] {
                for i in 0..3 {
                    let mut d = doc(author, &format!("{author}-{i}-{venue}"), &["w1", "w2"]);
                    d.audience = ctx;
                    d.venue = venue.to_string();
                    docs.push(d);
                }
            }
        }
        let injected = inject_corpus(&docs, 3).unwrap();
        let mut speakers: std::collections::BTreeSet<String> = Default::default();
        for d in &injected {
            for t in d {
                if t.starts_with(SPEAKER_PREFIX) {
                    speakers.insert(t.clone());
                }
            }
        }
        assert_eq!(speakers.len(), 4); // 2 authors x 2 contexts
    }

    #[test]
    fn corpus_file_round_trip() {
        let docs = vec![doc("ann", "1", &["a", "b"]), doc("bob", "2", &["c"])];
        let corpus = inject_corpus(&docs, 11).unwrap();
        let tmp = tempfile::NamedTempFile::new().unwrap();
        write_corpus(tmp.path(), &corpus).unwrap();
        let back = read_corpus(tmp.path()).unwrap();
        assert_eq!(corpus, back);
    }

    #[test]
    fn write_corpus_rejects_whitespace_tokens() {
        let corpus = vec![vec!["bad token".to_string()]];
        let tmp = tempfile::NamedTempFile::new().unwrap();
        assert!(write_corpus(tmp.path(), &corpus).is_err());
    }
}
