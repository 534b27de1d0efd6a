//! String-similarity metrics over package names.
//!
//! Every metric works on the canonical form of a [`NormalizedName`] (lowercase,
//! scope prefix stripped) and returns a score in `[0, 1]`.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::TextSimError;

/// A package name with its canonical comparison form.
///
/// `@org/pkg` keeps `@org` in `scope` and `pkg` in `canonical`. Scope is kept
/// so that scope-default impersonation (`@evil/lodash` vs `lodash`) is still
/// visible to callers even though similarity ignores it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NormalizedName {
    pub raw: String,
    pub canonical: String,
    pub scope: Option<String>,
}

impl NormalizedName {
    pub fn new(raw: &str) -> Self {
        let trimmed = raw.trim();
        let lower = trimmed.to_lowercase();
        let (scope, canonical) = match lower.strip_prefix('@').and_then(|s| s.split_once('/')) {
            Some((scope, rest)) if !rest.is_empty() => (Some(format!("@{scope}")), rest.to_string()),
            _ => (None, lower),
        };
        NormalizedName { raw: raw.to_string(), canonical, scope }
    }

    /// Identity key: scope and canonical name, lowercase.
    pub fn key(&self) -> String {
        match &self.scope {
            Some(s) => format!("{s}/{}", self.canonical),
            None => self.canonical.clone(),
        }
    }

    pub fn char_len(&self) -> usize {
        self.canonical.chars().count()
    }

    pub fn is_empty(&self) -> bool {
        self.canonical.is_empty()
    }
}

impl fmt::Display for NormalizedName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

impl From<&str> for NormalizedName {
    fn from(s: &str) -> Self {
        NormalizedName::new(s)
    }
}

/// Plain edit distance over chars (insert, delete, substitute; unit cost).
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn levenshtein_str(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 1.0;
    }
    1.0 - edit_distance(a, b) as f64 / longest as f64
}

/// `1 - d(a, b) / max(|a|, |b|)`; 1.0 for two empty names.
pub fn levenshtein_similarity(a: &NormalizedName, b: &NormalizedName) -> f64 {
    levenshtein_str(&a.canonical, &b.canonical)
}

fn jaro(a: &[char], b: &[char]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let window = (a.len().max(b.len()) / 2).saturating_sub(1);
    let mut a_matched = vec![false; a.len()];
    let mut b_matched = vec![false; b.len()];
    let mut matches = 0usize;
    for (i, ca) in a.iter().enumerate() {
        let lo = i.saturating_sub(window);
        let hi = (i + window + 1).min(b.len());
        for j in lo..hi {
            if !b_matched[j] && b[j] == *ca {
                a_matched[i] = true;
                b_matched[j] = true;
                matches += 1;
                break;
            }
        }
    }
    if matches == 0 {
        return 0.0;
    }
    let a_seq = a.iter().zip(&a_matched).filter(|(_, m)| **m).map(|(c, _)| c);
    let b_seq = b.iter().zip(&b_matched).filter(|(_, m)| **m).map(|(c, _)| c);
    let half_transpositions = a_seq.zip(b_seq).filter(|(x, y)| x != y).count();
    let m = matches as f64;
    let t = (half_transpositions / 2) as f64;
    (m / a.len() as f64 + m / b.len() as f64 + (m - t) / m) / 3.0
}

const WINKLER_SCALE: f64 = 0.1;
const WINKLER_MAX_PREFIX: usize = 4;
const WINKLER_BOOST_THRESHOLD: f64 = 0.7;

/// Jaro similarity with the Winkler common-prefix boost (scale 0.1, prefix
/// capped at 4, applied when Jaro exceeds 0.7).
pub fn jaro_winkler_similarity(a: &NormalizedName, b: &NormalizedName) -> f64 {
    jaro_winkler_str(&a.canonical, &b.canonical)
}

fn jaro_winkler_str(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let sim = jaro(&a, &b);
    if sim <= WINKLER_BOOST_THRESHOLD {
        return sim;
    }
    let prefix = a
        .iter()
        .zip(&b)
        .take(WINKLER_MAX_PREFIX)
        .take_while(|(x, y)| x == y)
        .count() as f64;
    (sim + prefix * WINKLER_SCALE * (1.0 - sim)).min(1.0)
}

/// Confusable characters and the letter each one imitates.
pub const CONFUSABLES: [(char, char); 8] = [
    ('0', 'o'),
    ('1', 'l'),
    ('3', 'e'),
    ('5', 's'),
    ('7', 't'),
    ('@', 'a'),
    ('$', 's'),
    ('!', 'i'),
];

pub fn map_confusables(s: &str) -> String {
    s.chars()
        .map(|c| CONFUSABLES.iter().find(|(from, _)| *from == c).map_or(c, |(_, to)| *to))
        .collect()
}

/// Levenshtein similarity after folding confusable characters.
pub fn homoglyph_similarity(a: &NormalizedName, b: &NormalizedName) -> f64 {
    levenshtein_str(&map_confusables(&a.canonical), &map_confusables(&b.canonical))
}

const BOUNDARY: char = '\u{2}';

pub type Trigram = [char; 3];

/// Sorted, deduplicated character trigrams of `s` padded with two leading
/// and one trailing boundary marker. Empty input has no trigrams.
pub fn trigram_set(s: &str) -> Vec<Trigram> {
    if s.is_empty() {
        return Vec::new();
    }
    let padded: Vec<char> = [BOUNDARY, BOUNDARY]
        .into_iter()
        .chain(s.chars())
        .chain(std::iter::once(BOUNDARY))
        .collect();
    let mut grams: Vec<Trigram> = padded.windows(3).map(|w| [w[0], w[1], w[2]]).collect();
    grams.sort_unstable();
    grams.dedup();
    grams
}

/// Dice coefficient of two sorted trigram sets.
pub fn dice(a: &[Trigram], b: &[Trigram]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let (mut i, mut j, mut shared) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                shared += 1;
                i += 1;
                j += 1;
            }
        }
    }
    2.0 * shared as f64 / (a.len() + b.len()) as f64
}

pub fn trigram_similarity(a: &NormalizedName, b: &NormalizedName) -> f64 {
    dice(&trigram_set(&a.canonical), &trigram_set(&b.canonical))
}

/// `||a| - |b|| / max(|a|, |b|)`.
pub fn length_diff_ratio(a: &NormalizedName, b: &NormalizedName) -> Result<f64, TextSimError> {
    let (la, lb) = (a.char_len(), b.char_len());
    let longest = la.max(lb);
    if longest == 0 {
        return Err(TextSimError::UndefinedRatio);
    }
    Ok(la.abs_diff(lb) as f64 / longest as f64)
}

/// `max{Levenshtein, Jaro-Winkler, homoglyph}`.
pub fn syntactic_max(a: &NormalizedName, b: &NormalizedName) -> f64 {
    levenshtein_similarity(a, b)
        .max(jaro_winkler_similarity(a, b))
        .max(homoglyph_similarity(a, b))
}
