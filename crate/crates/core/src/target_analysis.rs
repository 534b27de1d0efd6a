//! Legitimate-target selection for a suspect name.
//!
//! Hybrid-search candidates are filtered by popularity and repository
//! presence, ranked by their strongest syntactic similarity to the suspect,
//! cut to three, and the most probable victim is chosen by a weighted blend
//! of similarity and popularity.

use serde::{Deserialize, Serialize};

use crate::candidate_index::CandidateMatch;
use crate::registry::{Ecosystem, EcosystemStats, PackageRecord};
use crate::textsim::{syntactic_max, NormalizedName};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopularityWeights {
    pub downloads: f64,
    pub dependents: f64,
    pub stars: f64,
    pub forks: f64,
}

impl Default for PopularityWeights {
    fn default() -> Self {
        PopularityWeights { downloads: 0.5, dependents: 0.2, stars: 0.2, forks: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub popularity: PopularityWeights,
    pub w_sim: f64,
    pub w_pop: f64,
    pub min_popularity: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig { popularity: PopularityWeights::default(), w_sim: 0.7, w_pop: 0.3, min_popularity: 0.1 }
    }
}

fn min_max(count: u64, (lo, hi): (f64, f64)) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    (((count as f64).ln_1p() - lo) / (hi - lo)).clamp(0.0, 1.0)
}

/// Weighted sum of min-max normalized `ln(1 + count)` signals. A signal
/// whose ecosystem range is degenerate contributes nothing.
pub fn popularity_score(record: &PackageRecord, stats: &EcosystemStats, weights: &PopularityWeights) -> f64 {
    weights.downloads * min_max(record.downloads, stats.downloads)
        + weights.dependents * min_max(record.dependents, stats.dependents)
        + weights.stars * min_max(record.stars, stats.stars)
        + weights.forks * min_max(record.forks, stats.forks)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegitimateTarget {
    pub record: PackageRecord,
    pub syntactic_max: f64,
    pub popularity: f64,
    pub combined: f64,
}

impl LegitimateTarget {
    pub fn name(&self) -> NormalizedName {
        NormalizedName::new(&self.record.name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreatReport {
    pub input_name: String,
    pub ecosystem: Ecosystem,
    pub candidates: Vec<CandidateMatch>,
    pub top3: Vec<LegitimateTarget>,
    pub best: Option<LegitimateTarget>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub top3: Vec<LegitimateTarget>,
    pub best: Option<LegitimateTarget>,
    pub notes: Vec<String>,
}

/// Filters, ranks and picks the most probable impersonation target.
///
/// `resolve` maps a candidate to its metadata record; candidates it cannot
/// resolve are dropped with a note.
pub fn select_targets(
    input: &NormalizedName,
    candidates: &[CandidateMatch],
    resolve: impl Fn(&CandidateMatch) -> Option<PackageRecord>,
    stats: &EcosystemStats,
    config: &SelectionConfig,
) -> Selection {
    let mut notes = Vec::new();
    let input_key = input.key();
    let mut survivors: Vec<LegitimateTarget> = Vec::new();
    for c in candidates {
        if c.name.key() == input_key {
            continue;
        }
        let Some(record) = resolve(c) else {
            notes.push(format!("candidate {} has no metadata record; skipped", c.name));
            continue;
        };
        let popularity = popularity_score(&record, stats, &config.popularity);
        let min = config.min_popularity;
        if popularity < min || (record.repository_url.is_none() && popularity < 2.0 * min) {
            continue;
        }
        let sim = syntactic_max(input, &NormalizedName::new(&record.name));
        survivors.push(LegitimateTarget {
            combined: config.w_sim * sim + config.w_pop * popularity,
            record,
            syntactic_max: sim,
            popularity,
        });
    }
    survivors.sort_by(|a, b| {
        b.syntactic_max
            .total_cmp(&a.syntactic_max)
            .then(b.popularity.total_cmp(&a.popularity))
            .then_with(|| a.name().key().cmp(&b.name().key()))
    });
    survivors.truncate(3);
    // first maximal element keeps the syntactic ranking as tie-break
    let best = survivors
        .iter()
        .fold(None::<&LegitimateTarget>, |acc, t| match acc {
            Some(b) if b.combined >= t.combined => Some(b),
            _ => Some(t),
        })
        .cloned();
    if survivors.is_empty() {
        notes.push("no plausible legitimate target: every candidate was filtered out".into());
    }
    Selection { top3: survivors, best, notes }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::candidate_index::Channel;

    fn stats() -> EcosystemStats {
        // counts span 0..=999 on every signal
        let top = 1000f64.ln();
        EcosystemStats { downloads: (0.0, top), dependents: (0.0, top), stars: (0.0, top), forks: (0.0, top) }
    }

    fn rec(name: &str, count: u64) -> PackageRecord {
        PackageRecord {
            downloads: count,
            dependents: count,
            stars: count,
            forks: count,
            repository_url: Some(format!("https://github.com/o/{name}")),
            ..PackageRecord::empty(name, Ecosystem::Npm)
        }
    }

    fn cand(name: &str) -> CandidateMatch {
        CandidateMatch {
            name: NormalizedName::new(name),
            s_sem: 0.5,
            s_syn: 0.5,
            s_total: 1.0,
            delta_l: 0,
            channel: Channel::Both,
            popularity: 0.0,
        }
    }

    #[test]
    fn popularity_extremes() {
        let w = PopularityWeights::default();
        assert!((popularity_score(&rec("a", 999), &stats(), &w) - 1.0).abs() < 1e-12);
        assert_eq!(popularity_score(&rec("a", 0), &stats(), &w), 0.0);
        let mut r = rec("a", 0);
        r.downloads = 999;
        assert!((popularity_score(&r, &stats(), &w) - 0.5).abs() < 1e-12);
        // degenerate span contributes zero
        let flat = EcosystemStats { downloads: (2.0, 2.0), ..stats() };
        assert!((popularity_score(&rec("a", 999), &flat, &w) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn log_shift_leaves_normalized_values_unchanged() {
        // multiplying (1 + x) by e^c shifts ln(1 + x) by c for every package
        let w = PopularityWeights::default();
        let base = [0u64, 9, 99, 999];
        let factor = 10u64;
        let shifted: Vec<u64> = base.iter().map(|x| (x + 1) * factor - 1).collect();
        let s1 = EcosystemStats::from_records(base.iter().map(|&x| rec("p", x)).collect::<Vec<_>>().iter());
        let s2 = EcosystemStats::from_records(shifted.iter().map(|&x| rec("p", x)).collect::<Vec<_>>().iter());
        for (a, b) in base.iter().zip(&shifted) {
            let pa = popularity_score(&rec("p", *a), &s1, &w);
            let pb = popularity_score(&rec("p", *b), &s2, &w);
            assert!((pa - pb).abs() < 1e-12);
        }
    }

    #[test]
    fn single_candidate_is_best() {
        let out = select_targets(&"lodahs".into(), &[cand("lodash")], |c| Some(rec(&c.name.raw, 999)), &stats(), &SelectionConfig::default());
        assert_eq!(out.top3.len(), 1);
        assert_eq!(out.best.unwrap().record.name, "lodash");
    }

    #[test]
    fn popularity_breaks_similarity_tie() {
        // "abcx" and "abcy" are equally similar to "abcz"
        let input: NormalizedName = "abcz".into();
        let records = |c: &CandidateMatch| Some(if c.name.raw == "abcx" { rec("abcx", 50) } else { rec("abcy", 900) });
        let out = select_targets(&input, &[cand("abcx"), cand("abcy")], records, &stats(), &SelectionConfig::default());
        let [a, b] = &out.top3[..] else { panic!("expected two targets") };
        assert_eq!(a.syntactic_max, b.syntactic_max);
        let best = out.best.unwrap();
        assert_eq!(best.record.name, "abcy");
        let expected = 0.7 * best.syntactic_max + 0.3 * best.popularity;
        assert!((best.combined - expected).abs() < 1e-12);
    }

    #[test]
    fn self_and_unpopular_are_excluded() {
        let input: NormalizedName = "reqests".into();
        let mut norepo = rec("requests2", 2);
        norepo.repository_url = None;
        let lookup = |c: &CandidateMatch| match c.name.raw.as_str() {
            "reqests" => Some(rec("reqests", 999)),
            "requests" => Some(rec("requests", 999)),
            "requestz" => Some(rec("requestz", 0)),
            "requests2" => Some(norepo.clone()),
            _ => None,
        };
        let cands = [cand("reqests"), cand("requests"), cand("requestz"), cand("requests2"), cand("ghost")];
        let out = select_targets(&input, &cands, lookup, &stats(), &SelectionConfig::default());
        let names: Vec<_> = out.top3.iter().map(|t| t.record.name.as_str()).collect();
        assert_eq!(names, ["requests"]);
        assert!(out.notes.iter().any(|n| n.contains("ghost")));
    }

    #[test]
    fn empty_selection_records_note() {
        let out = select_targets(&"x".into(), &[], |_| None, &stats(), &SelectionConfig::default());
        assert!(out.top3.is_empty() && out.best.is_none());
        assert!(out.notes[0].contains("no plausible legitimate target"));
    }

    #[test]
    fn best_is_argmax_of_top3() {
        let names = ["colors", "colours", "color", "coolers", "collars"];
        let cands: Vec<_> = names.iter().map(|n| cand(n)).collect();
        let pops = [100u64, 999, 10, 500, 700];
        let lookup = |c: &CandidateMatch| {
            let i = names.iter().position(|n| *n == c.name.raw)?;
            Some(rec(names[i], pops[i]))
        };
        let out = select_targets(&"colrs".into(), &cands, lookup, &stats(), &SelectionConfig::default());
        assert_eq!(out.top3.len(), 3);
        let best = out.best.clone().unwrap();
        assert!(out.top3.iter().all(|t| t.combined <= best.combined));
        assert!(out.top3.contains(&best));
        assert_eq!(out, select_targets(&"colrs".into(), &cands, lookup, &stats(), &SelectionConfig::default()));
    }
}
