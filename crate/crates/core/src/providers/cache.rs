//! Append-only JSONL store of pair messages.
//!
//! Each line is `{u, v, model, text, emb_b64, dim, tok_in, tok_out, ts}` with
//! the embedding stored as base64 of little-endian `f32`s. Later lines win
//! over earlier ones for the same pair; [`PairCache::compact`] rewrites the
//! file with one line per pair.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::PairKey;

/// LM connection analysis for an unordered node pair plus its embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct PairMessage {
    pub key: PairKey,
    pub text: String,
    pub embedding: Vec<f32>,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub model: String,
    /// Unix seconds.
    pub created: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheLine {
    u: usize,
    v: usize,
    model: String,
    text: String,
    emb_b64: String,
    dim: usize,
    tok_in: u64,
    tok_out: u64,
    ts: u64,
}

pub fn encode_embedding(e: &[f32]) -> String {
    let bytes: Vec<u8> = e.iter().flat_map(|v| v.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

pub fn decode_embedding(s: &str) -> std::result::Result<Vec<f32>, String> {
    let bytes = STANDARD.decode(s).map_err(|e| e.to_string())?;
    if bytes.len() % 4 != 0 {
        return Err(format!("blob length {} is not a multiple of 4", bytes.len()));
    }
    Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
}

impl PairMessage {
    fn to_line(&self) -> CacheLine {
        CacheLine {
            u: self.key.u,
            v: self.key.v,
            model: self.model.clone(),
            text: self.text.clone(),
            emb_b64: encode_embedding(&self.embedding),
            dim: self.embedding.len(),
            tok_in: self.prompt_tokens,
            tok_out: self.completion_tokens,
            ts: self.created,
        }
    }

    fn from_line(l: CacheLine) -> std::result::Result<Self, String> {
        let embedding = decode_embedding(&l.emb_b64)?;
        if embedding.len() != l.dim {
            return Err(format!("dim field {} but blob holds {}", l.dim, embedding.len()));
        }
        Ok(Self {
            key: PairKey::new(l.u, l.v),
            text: l.text,
            embedding,
            prompt_tokens: l.tok_in,
            completion_tokens: l.tok_out,
            model: l.model,
            created: l.ts,
        })
    }
}

#[derive(Debug, Default)]
pub struct PairCache {
    path: Option<PathBuf>,
    records: HashMap<PairKey, PairMessage>,
    dim: Option<usize>,
    writer: Option<BufWriter<File>>,
    lines: usize,
}

impl PairCache {
    /// Cache that never touches disk.
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (or creates) the cache file at `path`. A torn final line, as left
    /// by a crash mid-append, is dropped with a warning and the file is
    /// compacted so later appends start on a clean line. A malformed line
    /// anywhere else is an error.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut cache = Self { path: Some(path.clone()), ..Self::default() };
        let mut torn = false;
        if path.exists() {
            let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
            let lines: Vec<String> =
                BufReader::new(file).lines().collect::<std::io::Result<_>>().map_err(|e| Error::io(&path, e))?;
            let last = lines.iter().rposition(|l| !l.trim().is_empty());
            for (no, line) in lines.iter().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let parsed = serde_json::from_str::<CacheLine>(line)
                    .map_err(|e| e.to_string())
                    .and_then(PairMessage::from_line);
                match parsed {
                    Ok(m) => cache.remember(m)?,
                    Err(reason) if Some(no) == last => {
                        log::warn!("{}: dropping torn final line {}: {reason}", path.display(), no + 1);
                        torn = true;
                    }
                    Err(reason) => {
                        return Err(Error::CacheFormat { path, reason: format!("line {}: {reason}", no + 1) });
                    }
                }
                cache.lines += 1;
            }
        }
        if torn {
            cache.compact()?;
        }
        Ok(cache)
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Embedding dimension shared by all records, once known.
    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn get(&self, a: usize, b: usize) -> Option<&PairMessage> {
        self.records.get(&PairKey::new(a, b))
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        self.records.contains_key(&PairKey::new(a, b))
    }

    /// Records in ascending key order.
    pub fn records(&self) -> Vec<&PairMessage> {
        let mut v: Vec<_> = self.records.values().collect();
        v.sort_by_key(|m| m.key);
        v
    }

    fn remember(&mut self, m: PairMessage) -> Result<()> {
        match self.dim {
            Some(d) if d != m.embedding.len() => {
                return Err(Error::DimensionMismatch { expected: d, actual: m.embedding.len() })
            }
            _ => self.dim = Some(m.embedding.len()),
        }
        self.records.insert(m.key, m);
        Ok(())
    }

    /// Stores `m` and, for file-backed caches, appends and flushes one line.
    pub fn insert(&mut self, m: PairMessage) -> Result<()> {
        if let Some(d) = self.dim {
            if d != m.embedding.len() {
                return Err(Error::DimensionMismatch { expected: d, actual: m.embedding.len() });
            }
        }
        if let Some(path) = self.path.clone() {
            if self.writer.is_none() {
                let f = OpenOptions::new().create(true).append(true).open(&path).map_err(|e| Error::io(&path, e))?;
                self.writer = Some(BufWriter::new(f));
            }
            let line = serde_json::to_string(&m.to_line())?;
            let w = self.writer.as_mut().expect("writer opened above");
            writeln!(w, "{line}").and_then(|_| w.flush()).map_err(|e| Error::io(&path, e))?;
            self.lines += 1;
        }
        self.remember(m)
    }

    /// Number of lines on disk, counting superseded duplicates.
    pub fn line_count(&self) -> usize {
        self.lines
    }

    /// Rewrites the file with one line per pair, in key order. The new file is
    /// written beside the old one and renamed over it.
    pub fn compact(&mut self) -> Result<()> {
        let Some(path) = self.path.clone() else { return Ok(()) };
        self.writer = None;
        let tmp = path.with_extension("compact.tmp");
        {
            let f = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
            let mut w = BufWriter::new(f);
            for m in self.records() {
                let line = serde_json::to_string(&m.to_line())?;
                writeln!(w, "{line}").map_err(|e| Error::io(&tmp, e))?;
            }
            w.flush().map_err(|e| Error::io(&tmp, e))?;
        }
        std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
        self.lines = self.records.len();
        Ok(())
    }
}
