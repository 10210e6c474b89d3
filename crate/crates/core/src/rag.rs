//! Domain resource library: chunking, a deterministic hashed embedder and an
//! exact cosine vector store with a binary file format.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Embedding dimension of [`HashingEmbedder`].
pub const EMBED_DIM: usize = 256;

/// FNV-1a 64 offset basis, used as the index hash seed.
pub const INDEX_SEED: u64 = 0xcbf2_9ce4_8422_2325;
/// Second seed (halves of the offset basis swapped), used for the sign hash.
pub const SIGN_SEED: u64 = 0x8422_2325_cbf2_9ce4;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

const STORE_MAGIC: &[u8; 8] = b"OARAGVS\0";
const STORE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum RagError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid document {id}: {reason}")]
    InvalidDocument { id: String, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("corrupt store file: {0}")]
    Format(String),
    #[error("store dimension {found} does not match embedder dimension {expected}")]
    Dimension { expected: usize, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocKind {
    Manual,
    Rule,
    Knowledge,
    DataNote,
}

impl DocKind {
    /// Kind implied by a directory name such as `manual` or `data_notes`.
    pub fn from_dir_name(name: &str) -> Option<DocKind> {
        match name.to_ascii_lowercase().trim_end_matches('s') {
            "manual" => Some(DocKind::Manual),
            "rule" => Some(DocKind::Rule),
            "knowledge" => Some(DocKind::Knowledge),
            "data_note" | "data-note" | "datanote" => Some(DocKind::DataNote),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub source: String,
    pub kind: DocKind,
    pub text: String,
}

impl Document {
    pub fn new(id: impl Into<String>, source: impl Into<String>, kind: DocKind, text: impl Into<String>) -> Result<Self, RagError> {
        let doc = Document {
            id: id.into(),
            source: source.into(),
            kind,
            text: text.into(),
        };
        doc.validate()?;
        Ok(doc)
    }

    pub fn validate(&self) -> Result<(), RagError> {
        let bad = |reason: &str| RagError::InvalidDocument {
            id: self.id.clone(),
            reason: reason.to_string(),
        };
        if self.id.is_empty() {
            return Err(bad("empty id"));
        }
        if self.text.split_whitespace().next().is_none() {
            return Err(bad("text has no tokens"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chunk {
    pub doc_id: String,
    pub seq: u64,
    pub text: String,
    pub token_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkConfig {
    pub max_tokens: usize,
    pub overlap: usize,
}

impl Default for ChunkConfig {
    fn default() -> Self {
        ChunkConfig {
            max_tokens: 200,
            overlap: 40,
        }
    }
}

/// Byte spans of whitespace-separated tokens.
fn token_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                spans.push((s, i));
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        spans.push((s, text.len()));
    }
    spans
}

/// Sliding-window chunking over whitespace tokens. Each chunk's text is the
/// original substring covering its tokens, so line structure survives.
pub fn chunk_document(doc: &Document, cfg: ChunkConfig) -> Result<Vec<Chunk>, RagError> {
    if cfg.max_tokens == 0 || cfg.overlap >= cfg.max_tokens {
        return Err(RagError::Config(format!(
            "overlap {} must be smaller than max_tokens {}",
            cfg.overlap, cfg.max_tokens
        )));
    }
    doc.validate()?;
    let spans = token_spans(&doc.text);
    let advance = cfg.max_tokens - cfg.overlap;
    let mut chunks = Vec::new();
    let mut start = 0;
    loop {
        let end = (start + cfg.max_tokens).min(spans.len());
        chunks.push(Chunk {
            doc_id: doc.id.clone(),
            seq: chunks.len() as u64,
            text: doc.text[spans[start].0..spans[end - 1].1].to_string(),
            token_count: end - start,
        });
        if end == spans.len() {
            break;
        }
        start += advance;
    }
    Ok(chunks)
}

/// Text embedding contract. Implementations must be deterministic.
pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Vec<f64>;
}

fn fnv1a64(seed: u64, bytes: &[u8]) -> u64 {
    bytes.iter().fold(seed, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Lowercased alphanumeric runs.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

/// Feature-hashed signed bag of words.
///
/// A token lands in bucket `fnv1a64(INDEX_SEED) % D` with sign `−1` when bit 63
/// of `fnv1a64(SIGN_SEED)` is set. The accumulated vector is L2-normalised;
/// token-free text maps to the zero vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashingEmbedder {
    pub dim: usize,
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        HashingEmbedder { dim: EMBED_DIM }
    }
}

impl Embedder for HashingEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for tok in tokenize(text) {
            let idx = (fnv1a64(INDEX_SEED, tok.as_bytes()) % self.dim as u64) as usize;
            let sign = if fnv1a64(SIGN_SEED, tok.as_bytes()) >> 63 == 1 { -1.0 } else { 1.0 };
            v[idx] += sign;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }
}

/// Cosine similarity; zero when either operand is the zero vector.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalHit {
    pub doc_id: String,
    pub seq: u64,
    pub text: String,
    pub score: f64,
}

impl RetrievalHit {
    /// `doc_id#seq`, the traceable chunk reference.
    pub fn chunk_ref(&self) -> String {
        format!("{}#{}", self.doc_id, self.seq)
    }
}

/// Hit order: score descending, then doc id, then seq.
pub fn hit_order(a: &RetrievalHit, b: &RetrievalHit) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.doc_id.cmp(&b.doc_id))
        .then_with(|| a.seq.cmp(&b.seq))
}

/// Anything that can answer a top-k text query.
pub trait Retriever: Send + Sync {
    fn retrieve(&self, query: &str, k: usize) -> Vec<RetrievalHit>;
    fn is_empty(&self) -> bool;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpsertStats {
    pub inserted: usize,
    pub replaced: usize,
}

#[derive(Debug, Clone)]
struct Record {
    text: String,
    vector: Vec<f64>,
}

/// Exact-scan vector store keyed by (doc_id, seq).
#[derive(Clone)]
pub struct VectorStore {
    embedder: Arc<dyn Embedder>,
    records: BTreeMap<(String, u64), Record>,
}

impl std::fmt::Debug for VectorStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VectorStore")
            .field("dim", &self.embedder.dim())
            .field("len", &self.records.len())
            .finish()
    }
}

impl Default for VectorStore {
    fn default() -> Self {
        VectorStore::new(Arc::new(HashingEmbedder::default()))
    }
}

impl VectorStore {
    pub fn new(embedder: Arc<dyn Embedder>) -> Self {
        VectorStore {
            embedder,
            records: BTreeMap::new(),
        }
    }

    pub fn embedder(&self) -> &dyn Embedder {
        self.embedder.as_ref()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn upsert(&mut self, chunks: &[Chunk]) -> UpsertStats {
        let mut stats = UpsertStats::default();
        for c in chunks {
            let rec = Record {
                vector: self.embedder.embed(&c.text),
                text: c.text.clone(),
            };
            match self.records.insert((c.doc_id.clone(), c.seq), rec) {
                Some(_) => stats.replaced += 1,
                None => stats.inserted += 1,
            }
        }
        stats
    }

    pub fn chunks(&self) -> impl Iterator<Item = (&str, u64, &str)> {
        self.records.iter().map(|((d, s), r)| (d.as_str(), *s, r.text.as_str()))
    }

    pub fn vector(&self, doc_id: &str, seq: u64) -> Option<&[f64]> {
        self.records.get(&(doc_id.to_string(), seq)).map(|r| r.vector.as_slice())
    }

    /// Top-k hits for a precomputed query vector.
    pub fn retrieve_vector(&self, q: &[f64], k: usize) -> Vec<RetrievalHit> {
        self.retrieve_where(q, k, |_| true)
    }

    /// Top-k hits among chunks whose doc id satisfies `keep`.
    pub fn retrieve_where(&self, q: &[f64], k: usize, keep: impl Fn(&str) -> bool) -> Vec<RetrievalHit> {
        if k == 0 {
            return Vec::new();
        }
        let mut hits: Vec<RetrievalHit> = self
            .records
            .iter()
            .filter(|((doc_id, _), _)| keep(doc_id))
            .map(|((doc_id, seq), r)| RetrievalHit {
                doc_id: doc_id.clone(),
                seq: *seq,
                text: r.text.clone(),
                score: cosine(q, &r.vector),
            })
            .collect();
        if hits.len() > k {
            hits.select_nth_unstable_by(k - 1, hit_order);
            hits.truncate(k);
        }
        hits.sort_by(hit_order);
        hits
    }

    pub fn save(&self, path: &Path) -> Result<(), RagError> {
        let io_err = |source| RagError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut buf = Vec::new();
        self.write_to(&mut buf).map_err(io_err)?;
        fs::write(path, buf).map_err(io_err)
    }

    /// Header: magic, u32 version, u32 dimension. Each record is a u32 byte
    /// length followed by doc_id (u32-prefixed UTF-8), u64 seq, text
    /// (u32-prefixed UTF-8) and the vector as little-endian f64.
    pub fn write_to(&self, w: &mut impl Write) -> io::Result<()> {
        w.write_all(STORE_MAGIC)?;
        w.write_all(&STORE_VERSION.to_le_bytes())?;
        w.write_all(&(self.embedder.dim() as u32).to_le_bytes())?;
        for ((doc_id, seq), r) in &self.records {
            let mut rec = Vec::with_capacity(16 + doc_id.len() + r.text.len() + 8 * r.vector.len());
            rec.extend_from_slice(&(doc_id.len() as u32).to_le_bytes());
            rec.extend_from_slice(doc_id.as_bytes());
            rec.extend_from_slice(&seq.to_le_bytes());
            rec.extend_from_slice(&(r.text.len() as u32).to_le_bytes());
            rec.extend_from_slice(r.text.as_bytes());
            for x in &r.vector {
                rec.extend_from_slice(&x.to_le_bytes());
            }
            w.write_all(&(rec.len() as u32).to_le_bytes())?;
            w.write_all(&rec)?;
        }
        Ok(())
    }

    pub fn load(path: &Path, embedder: Arc<dyn Embedder>) -> Result<Self, RagError> {
        let bytes = fs::read(path).map_err(|source| RagError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::read_from(&mut bytes.as_slice(), embedder)
    }

    pub fn read_from(r: &mut impl Read, embedder: Arc<dyn Embedder>) -> Result<Self, RagError> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes).map_err(|e| RagError::Format(e.to_string()))?;
        let mut cur = Cursor { buf: &bytes, pos: 0 };
        if cur.take(8)? != STORE_MAGIC {
            return Err(RagError::Format("bad magic".into()));
        }
        let version = cur.u32()?;
        if version != STORE_VERSION {
            return Err(RagError::Format(format!("unsupported version {version}")));
        }
        let dim = cur.u32()? as usize;
        if dim != embedder.dim() {
            return Err(RagError::Dimension {
                expected: embedder.dim(),
                found: dim,
            });
        }
        let mut records = BTreeMap::new();
        while cur.pos < bytes.len() {
            let len = cur.u32()? as usize;
            let mut rec = Cursor {
                buf: cur.take(len)?,
                pos: 0,
            };
            let doc_id = rec.string()?;
            let seq = rec.u64()?;
            let text = rec.string()?;
            let vector = (0..dim).map(|_| rec.f64()).collect::<Result<Vec<_>, _>>()?;
            if rec.pos != rec.buf.len() {
                return Err(RagError::Format(format!("trailing bytes in record {doc_id}#{seq}")));
            }
            records.insert((doc_id, seq), Record { text, vector });
        }
        Ok(VectorStore { embedder, records })
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], RagError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| RagError::Format("unexpected end of data".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, RagError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, RagError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64, RagError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String, RagError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| RagError::Format(e.to_string()))
    }
}

impl Retriever for VectorStore {
    fn retrieve(&self, query: &str, k: usize) -> Vec<RetrievalHit> {
        self.retrieve_vector(&self.embedder.embed(query), k)
    }

    fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Read-only view of the chunks whose doc id starts with `prefix`, e.g.
/// `manual/` for the alarm manual.
#[derive(Debug, Clone, Copy)]
pub struct PrefixView<'a> {
    pub store: &'a VectorStore,
    pub prefix: &'a str,
}

impl Retriever for PrefixView<'_> {
    fn retrieve(&self, query: &str, k: usize) -> Vec<RetrievalHit> {
        let q = self.store.embedder.embed(query);
        self.store.retrieve_where(&q, k, |d| d.starts_with(self.prefix))
    }

    fn is_empty(&self) -> bool {
        !self.store.records.keys().any(|(d, _)| d.starts_with(self.prefix))
    }
}

/// Chunks and upserts documents; returns the total stats.
pub fn index_documents(store: &mut VectorStore, docs: &[Document], cfg: ChunkConfig) -> Result<UpsertStats, RagError> {
    let mut total = UpsertStats::default();
    for d in docs {
        let s = store.upsert(&chunk_document(d, cfg)?);
        total.inserted += s.inserted;
        total.replaced += s.replaced;
    }
    Ok(total)
}

/// Reads every `.txt` / `.md` file under `dir` (recursively, sorted). The
/// document id is the relative path without extension; the kind comes from
/// the first directory component, defaulting to knowledge.
pub fn load_documents(dir: &Path) -> Result<Vec<Document>, RagError> {
    let mut files = Vec::new();
    collect_files(dir, &mut files)?;
    files.sort();
    let mut docs = Vec::new();
    for path in files {
        let rel = path.strip_prefix(dir).unwrap_or(&path);
        let parts: Vec<String> = rel.iter().map(|p| p.to_string_lossy().into_owned()).collect();
        let kind = if parts.len() > 1 {
            DocKind::from_dir_name(&parts[0]).unwrap_or(DocKind::Knowledge)
        } else {
            DocKind::Knowledge
        };
        let id = rel.with_extension("").iter().map(|p| p.to_string_lossy()).collect::<Vec<_>>().join("/");
        let text = fs::read_to_string(&path).map_err(|source| RagError::Io {
            path: path.clone(),
            source,
        })?;
        if text.split_whitespace().next().is_none() {
            tracing::warn!(path = %path.display(), "skipping empty document");
            continue;
        }
        docs.push(Document::new(id, path.display().to_string(), kind, text)?);
    }
    Ok(docs)
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), RagError> {
    let entries = fs::read_dir(dir).map_err(|source| RagError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    for e in entries {
        let path = e
            .map_err(|source| RagError::Io {
                path: dir.to_path_buf(),
                source,
            })?
            .path();
        if path.is_dir() {
            collect_files(&path, out)?;
        } else if matches!(path.extension().and_then(|e| e.to_str()), Some("txt" | "md")) {
            out.push(path);
        }
    }
    Ok(())
}

/// Builds a store from a directory tree with the default embedder.
pub fn index_dir(dir: &Path, cfg: ChunkConfig) -> Result<VectorStore, RagError> {
    let docs = load_documents(dir)?;
    let mut store = VectorStore::default();
    index_documents(&mut store, &docs, cfg)?;
    Ok(store)
}
