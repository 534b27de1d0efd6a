//! In-memory name index with dual-channel hybrid retrieval.
//!
//! Retrieval runs two channels over every entry and fuses them:
//!
//! 1. semantic focus: the top `k1` entries by embedding cosine among those
//!    whose name length differs from the query by at most `n`;
//! 2. hybrid signal: the top `k2` entries by cosine + trigram Dice, with no
//!    length constraint.
//!
//! The union is deduplicated by name and sorted by `(s_total desc,
//! delta_l asc, name asc)`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{EmbeddingError, IndexError};
use crate::namevec::{cosine_similarity, EmbeddingProvider, NameVector};
use crate::registry::{Ecosystem, EcosystemStats};
use crate::textsim::{dice, trigram_set, NormalizedName, Trigram};

const MAGIC: &[u8; 8] = b"TGINDEX\0";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct IndexEntry {
    pub name: NormalizedName,
    pub vector: NameVector,
    pub trigrams: Vec<Trigram>,
    pub popularity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Semantic,
    Hybrid,
    Both,
    Syntactic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateMatch {
    pub name: NormalizedName,
    pub s_sem: f64,
    pub s_syn: f64,
    pub s_total: f64,
    pub delta_l: usize,
    pub channel: Channel,
    pub popularity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchParams {
    /// Max name-length difference admitted by the semantic channel.
    pub n: usize,
    pub k1: usize,
    pub k2: usize,
    pub k: usize,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams { n: 1, k1: 100, k2: 150, k: 10 }
    }
}

impl SearchParams {
    pub fn validate(&self) -> Result<(), IndexError> {
        if !(self.k2 > self.k1 && self.k1 >= self.k && self.k >= 1) {
            return Err(IndexError::InvalidParams(format!(
                "need K2 > K1 >= k >= 1, got K1={} K2={} k={}",
                self.k1, self.k2, self.k
            )));
        }
        Ok(())
    }

    /// Same channel depths, output size raised to `k` (depths grow if needed).
    pub fn with_k(self, k: usize) -> Self {
        let k1 = self.k1.max(k);
        let k2 = self.k2.max(k1 + 1);
        SearchParams { k, k1, k2, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SingleChannel {
    SemanticOnly,
    SyntacticOnly,
}

/// Optional ecosystem context persisted alongside the entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexMeta {
    pub ecosystem: Ecosystem,
    pub stats: EcosystemStats,
}

#[derive(Debug, Clone)]
pub struct CandidateIndex {
    provider: EmbeddingProvider,
    entries: Vec<IndexEntry>,
    meta: Option<IndexMeta>,
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    provider: EmbeddingProvider,
    meta: Option<IndexMeta>,
    entries: Vec<(String, f64, Vec<f64>)>,
}

/// Per-entry scores against one query.
#[derive(Debug, Clone, Copy)]
struct Scored {
    idx: usize,
    s_sem: f64,
    s_syn: f64,
    s_total: f64,
    delta_l: usize,
}

fn by_total(entries: &[IndexEntry]) -> impl Fn(&Scored, &Scored) -> Ordering + '_ {
    move |a, b| {
        b.s_total
            .total_cmp(&a.s_total)
            .then(a.delta_l.cmp(&b.delta_l))
            .then_with(|| entries[a.idx].name.key().cmp(&entries[b.idx].name.key()))
    }
}

fn top_k<T>(mut items: Vec<T>, k: usize, cmp: impl Fn(&T, &T) -> Ordering) -> Vec<T> {
    if items.len() > k && k > 0 {
        items.select_nth_unstable_by(k - 1, &cmp);
        items.truncate(k);
    } else if k == 0 {
        items.clear();
    }
    items.sort_by(cmp);
    items
}

impl CandidateIndex {
    /// One entry per identity key. Exact duplicate raw names are rejected;
    /// names that only collide after canonicalization keep the more popular
    /// entry.
    pub fn build(entries: &[(String, f64)], provider: EmbeddingProvider) -> Result<Self, IndexError> {
        let mut seen_raw = std::collections::HashSet::new();
        let mut by_key: BTreeMap<String, (NormalizedName, f64)> = BTreeMap::new();
        for (raw, popularity) in entries {
            if !seen_raw.insert(raw.as_str()) {
                return Err(IndexError::DuplicateName(raw.clone()));
            }
            let name = NormalizedName::new(raw);
            if name.is_empty() {
                continue;
            }
            let key = name.key();
            let replace = match by_key.get(&key) {
                None => true,
                Some((old, old_pop)) => *popularity > *old_pop || (*popularity == *old_pop && name.raw < old.raw),
            };
            if replace {
                by_key.insert(key, (name, *popularity));
            }
        }
        let entries = by_key
            .into_values()
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|(name, popularity)| {
                let vector = provider.embed_name(&name)?;
                let trigrams = trigram_set(&name.canonical);
                Ok(IndexEntry { name, vector, trigrams, popularity })
            })
            .collect::<Result<Vec<_>, IndexError>>()?;
        Ok(CandidateIndex { provider, entries, meta: None })
    }

    pub fn with_meta(mut self, meta: IndexMeta) -> Self {
        self.meta = Some(meta);
        self
    }

    pub fn meta(&self) -> Option<&IndexMeta> {
        self.meta.as_ref()
    }

    pub fn provider(&self) -> &EmbeddingProvider {
        &self.provider
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&IndexEntry> {
        let key = NormalizedName::new(name).key();
        self.entries
            .binary_search_by(|e| e.name.key().cmp(&key))
            .ok()
            .map(|i| &self.entries[i])
    }

    fn score_all(&self, query: &NormalizedName) -> Result<Vec<Scored>, IndexError> {
        if self.entries.is_empty() {
            return Err(IndexError::Empty);
        }
        let qv = self.provider.embed_name(query)?;
        let qt = trigram_set(&query.canonical);
        let qlen = query.char_len();
        Ok(self
            .entries
            .par_iter()
            .enumerate()
            .map(|(idx, e)| {
                let s_sem = cosine_similarity(&qv, &e.vector)?;
                let s_syn = dice(&qt, &e.trigrams);
                Ok(Scored { idx, s_sem, s_syn, s_total: s_sem + s_syn, delta_l: qlen.abs_diff(e.name.char_len()) })
            })
            .collect::<Result<_, EmbeddingError>>()?)
    }

    fn to_match(&self, s: &Scored, channel: Channel) -> CandidateMatch {
        let e = &self.entries[s.idx];
        CandidateMatch {
            name: e.name.clone(),
            s_sem: s.s_sem,
            s_syn: s.s_syn,
            s_total: s.s_total,
            delta_l: s.delta_l,
            channel,
            popularity: e.popularity,
        }
    }

    pub fn hybrid_search(&self, query: &NormalizedName, params: &SearchParams) -> Result<Vec<CandidateMatch>, IndexError> {
        params.validate()?;
        let scored = self.score_all(query)?;
        let entries = &self.entries;

        let semantic_pool: Vec<Scored> = scored.iter().copied().filter(|s| s.delta_l <= params.n).collect();
        let semantic = top_k(semantic_pool, params.k1, |a, b| {
            b.s_sem
                .total_cmp(&a.s_sem)
                .then_with(|| entries[a.idx].name.key().cmp(&entries[b.idx].name.key()))
        });
        let hybrid = top_k(scored, params.k2, by_total(entries));

        let mut union: BTreeMap<usize, (Scored, Channel)> = BTreeMap::new();
        for s in semantic {
            union.insert(s.idx, (s, Channel::Semantic));
        }
        for s in hybrid {
            union
                .entry(s.idx)
                .and_modify(|(_, ch)| *ch = Channel::Both)
                .or_insert((s, Channel::Hybrid));
        }
        let cmp = by_total(entries);
        let mut fused: Vec<(Scored, Channel)> = union.into_values().collect();
        fused.sort_by(|a, b| cmp(&a.0, &b.0));
        fused.truncate(params.k);
        Ok(fused.iter().map(|(s, ch)| self.to_match(s, *ch)).collect())
    }

    /// Ranking by one score only, for comparing retrieval strategies.
    pub fn channel_search(
        &self,
        query: &NormalizedName,
        channel: SingleChannel,
        k: usize,
    ) -> Result<Vec<CandidateMatch>, IndexError> {
        let scored = self.score_all(query)?;
        let entries = &self.entries;
        let (ranked, tag) = match channel {
            SingleChannel::SemanticOnly => (
                top_k(scored, k, |a, b| {
                    b.s_sem.total_cmp(&a.s_sem).then_with(|| entries[a.idx].name.key().cmp(&entries[b.idx].name.key()))
                }),
                Channel::Semantic,
            ),
            SingleChannel::SyntacticOnly => (
                top_k(scored, k, |a, b| {
                    b.s_syn.total_cmp(&a.s_syn).then_with(|| entries[a.idx].name.key().cmp(&entries[b.idx].name.key()))
                }),
                Channel::Syntactic,
            ),
        };
        Ok(ranked.iter().map(|s| self.to_match(s, tag)).collect())
    }

    pub fn save(&self, path: &Path) -> Result<(), IndexError> {
        let file = IndexFile {
            provider: self.provider.clone(),
            meta: self.meta.clone(),
            entries: self
                .entries
                .iter()
                .map(|e| (e.name.raw.clone(), e.popularity, e.vector.values.clone()))
                .collect(),
        };
        let payload = bincode::serialize(&file).map_err(|e| IndexError::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let tmp = path.with_extension("tmp");
        {
            let mut out = std::fs::File::create(&tmp)?;
            out.write_all(MAGIC)?;
            out.write_all(&FORMAT_VERSION.to_le_bytes())?;
            out.write_all(&payload)?;
            out.sync_all()?;
        }
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, IndexError> {
        let format_err = |message: String| IndexError::Format { path: path.to_path_buf(), message };
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        if bytes.len() < 12 || &bytes[..8] != MAGIC {
            return Err(format_err("missing index magic header".into()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(IndexError::Version { found: version, expected: FORMAT_VERSION });
        }
        let file: IndexFile = bincode::deserialize(&bytes[12..]).map_err(|e| format_err(e.to_string()))?;
        let entries = file
            .entries
            .into_iter()
            .map(|(raw, popularity, values)| {
                let name = NormalizedName::new(&raw);
                let trigrams = trigram_set(&name.canonical);
                IndexEntry { name, vector: NameVector::new(values), trigrams, popularity }
            })
            .collect();
        Ok(CandidateIndex { provider: file.provider, entries, meta: file.meta })
    }
}
