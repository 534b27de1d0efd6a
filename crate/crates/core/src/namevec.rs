//! Name and source-code embeddings.
//!
//! The default provider hashes FastText-style character n-grams (names) or
//! token unigrams/bigrams (code) into `D` signed buckets. A text vector file
//! can be loaded instead to stand in for a trained subword model.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::xxh3_64_with_seed;

use crate::error::EmbeddingError;
use crate::textsim::NormalizedName;

pub const DEFAULT_DIMENSION: usize = 128;
pub const DEFAULT_SEED: u64 = 42;
const MIN_NGRAM: usize = 3;
const MAX_NGRAM: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NameVector {
    pub values: Vec<f64>,
    pub norm: f64,
}

impl NameVector {
    pub fn new(values: Vec<f64>) -> Self {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        NameVector { values, norm }
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    /// Unit-length copy, or `ZeroVector` when there is nothing to scale.
    pub fn normalized(&self) -> Result<NameVector, EmbeddingError> {
        if self.norm == 0.0 || !self.norm.is_finite() {
            return Err(EmbeddingError::ZeroVector);
        }
        Ok(NameVector::new(self.values.iter().map(|v| v / self.norm).collect()))
    }

    pub fn scaled(&self, factor: f64) -> NameVector {
        NameVector::new(self.values.iter().map(|v| v * factor).collect())
    }

    pub fn dot(&self, other: &NameVector) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum()
    }
}

pub fn cosine_similarity(u: &NameVector, v: &NameVector) -> Result<f64, EmbeddingError> {
    if u.dimension() != v.dimension() {
        return Err(EmbeddingError::DimensionMismatch(u.dimension(), v.dimension()));
    }
    if u.norm == 0.0 || v.norm == 0.0 {
        return Err(EmbeddingError::ZeroNorm);
    }
    Ok((u.dot(v) / (u.norm * v.norm)).clamp(-1.0, 1.0))
}

/// Element-wise mean, then L2-normalized.
pub fn aggregate_package_vector(file_vectors: &[NameVector]) -> Result<NameVector, EmbeddingError> {
    let first = file_vectors.first().ok_or(EmbeddingError::NoVectors)?;
    let dim = first.dimension();
    let mut sum = vec![0.0; dim];
    for v in file_vectors {
        if v.dimension() != dim {
            return Err(EmbeddingError::DimensionMismatch(dim, v.dimension()));
        }
        for (s, x) in sum.iter_mut().zip(&v.values) {
            *s += x;
        }
    }
    let count = file_vectors.len() as f64;
    NameVector::new(sum.into_iter().map(|s| s / count).collect()).normalized()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderKind {
    HashedSubword,
    ExternalVectorFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingProvider {
    kind: ProviderKind,
    dimension: usize,
    seed: u64,
    /// Weight of token bigrams relative to unigrams in code embeddings.
    code_bigram_weight: f64,
    table: BTreeMap<String, Vec<f64>>,
}

impl Default for EmbeddingProvider {
    fn default() -> Self {
        EmbeddingProvider::hashed(DEFAULT_DIMENSION, DEFAULT_SEED)
    }
}

/// Character n-grams (n = 3..=5) of `<name>`.
pub fn subword_ngrams(canonical: &str) -> Vec<String> {
    let chars: Vec<char> = std::iter::once('<')
        .chain(canonical.chars())
        .chain(std::iter::once('>'))
        .collect();
    let mut out = Vec::new();
    for n in MIN_NGRAM..=MAX_NGRAM {
        for w in chars.windows(n) {
            out.push(w.iter().collect());
        }
    }
    out
}

/// Lowercased alphanumeric runs.
pub fn code_tokens(source: &str) -> Vec<String> {
    source
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

impl EmbeddingProvider {
    pub fn hashed(dimension: usize, seed: u64) -> Self {
        EmbeddingProvider {
            kind: ProviderKind::HashedSubword,
            dimension,
            seed,
            code_bigram_weight: 1.0,
            table: BTreeMap::new(),
        }
    }

    pub fn with_code_bigram_weight(mut self, weight: f64) -> Self {
        self.code_bigram_weight = weight;
        self
    }

    /// Loads `token v1 .. vD` lines. A leading `count dimension` header is
    /// skipped when both fields parse as integers.
    pub fn from_vector_file(path: &Path, seed: u64) -> Result<Self, EmbeddingError> {
        let file = std::fs::File::open(path).map_err(|e| EmbeddingError::Io(e.to_string()))?;
        let mut table = BTreeMap::new();
        let mut dimension = None;
        for (idx, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|e| EmbeddingError::Io(e.to_string()))?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if idx == 0 && fields.len() == 2 && fields.iter().all(|f| f.parse::<u64>().is_ok()) {
                continue;
            }
            let values = fields[1..]
                .iter()
                .map(|f| f.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| EmbeddingError::VectorFile { line: line_no, message: e.to_string() })?;
            let dim = *dimension.get_or_insert(values.len());
            if values.len() != dim || dim == 0 {
                return Err(EmbeddingError::VectorFile {
                    line: line_no,
                    message: format!("expected {dim} components, found {}", values.len()),
                });
            }
            table.insert(fields[0].to_string(), values);
        }
        let dimension = dimension.ok_or(EmbeddingError::ZeroDimension)?;
        Ok(EmbeddingProvider {
            kind: ProviderKind::ExternalVectorFile,
            dimension,
            seed,
            code_bigram_weight: 1.0,
            table,
        })
    }

    pub fn kind(&self) -> ProviderKind {
        self.kind
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Bucket and sign a hashed feature string lands on.
    pub fn hashed_bucket(&self, feature: &str) -> (usize, f64) {
        let h = xxh3_64_with_seed(feature.as_bytes(), self.seed);
        let bucket = (h % self.dimension as u64) as usize;
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        (bucket, sign)
    }

    fn hash_features<'a>(&self, features: impl Iterator<Item = (String, f64)> + 'a) -> Vec<f64> {
        let mut values = vec![0.0; self.dimension];
        for (feature, weight) in features {
            let (bucket, sign) = self.hashed_bucket(&feature);
            values[bucket] += sign * weight;
        }
        values
    }

    fn average_lookup<'a>(&self, keys: impl Iterator<Item = &'a str>) -> Result<NameVector, EmbeddingError> {
        let mut sum = vec![0.0; self.dimension];
        let mut hits = 0usize;
        for key in keys {
            if let Some(v) = self.table.get(key) {
                hits += 1;
                for (s, x) in sum.iter_mut().zip(v) {
                    *s += x;
                }
            }
        }
        if hits == 0 {
            return Err(EmbeddingError::ZeroVector);
        }
        NameVector::new(sum.into_iter().map(|s| s / hits as f64).collect()).normalized()
    }

    pub fn embed_name(&self, name: &NormalizedName) -> Result<NameVector, EmbeddingError> {
        if name.canonical.is_empty() {
            return Err(EmbeddingError::ZeroVector);
        }
        let grams = subword_ngrams(&name.canonical);
        match self.kind {
            ProviderKind::HashedSubword => {
                let values = self.hash_features(grams.into_iter().map(|g| (format!("n:{g}"), 1.0)));
                NameVector::new(values).normalized()
            }
            ProviderKind::ExternalVectorFile => {
                let word = format!("<{}>", name.canonical);
                self.average_lookup(
                    std::iter::once(name.canonical.as_str())
                        .chain(std::iter::once(word.as_str()))
                        .chain(grams.iter().map(String::as_str)),
                )
            }
        }
    }

    pub fn embed_code_file(&self, source_text: &str) -> Result<NameVector, EmbeddingError> {
        let tokens = code_tokens(source_text);
        if tokens.is_empty() {
            return Err(EmbeddingError::ZeroVector);
        }
        match self.kind {
            ProviderKind::HashedSubword => {
                let unigrams = tokens.iter().map(|t| (format!("u:{t}"), 1.0));
                let bigram_weight = self.code_bigram_weight;
                let bigrams = tokens
                    .windows(2)
                    .filter(|_| bigram_weight != 0.0)
                    .map(move |w| (format!("b:{}\u{1}{}", w[0], w[1]), bigram_weight));
                NameVector::new(self.hash_features(unigrams.chain(bigrams))).normalized()
            }
            ProviderKind::ExternalVectorFile => self.average_lookup(tokens.iter().map(String::as_str)),
        }
    }
}
