//! Evaluation harness: target discovery rate, feature-group ablation and
//! the adversarial metadata flip.

pub mod synthetic;

use std::collections::BTreeSet;
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::candidate_index::{CandidateIndex, CandidateMatch, SearchParams, SingleChannel};
use crate::error::{EvalError, IndexError};
use crate::features::{group_indices, FeatureGroup, FeatureTable};
use crate::forest::{cross_validate, evaluate, fit_fold_models, predict_folds, threshold_search, TreeParams};
use crate::registry::Ecosystem;
use crate::textsim::NormalizedName;

pub const DEFAULT_TDR_KS: [usize; 3] = [1, 3, 30];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Semantic,
    Syntactic,
    Hybrid,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Semantic, Strategy::Syntactic, Strategy::Hybrid];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Semantic => "semantic",
            Strategy::Syntactic => "syntactic",
            Strategy::Hybrid => "hybrid",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown strategy '{s}' (expected semantic, syntactic or hybrid)"))
    }
}

/// Top-`k` candidates for one strategy.
pub fn retrieve(index: &CandidateIndex, query: &NormalizedName, strategy: Strategy, k: usize) -> Result<Vec<CandidateMatch>, IndexError> {
    match strategy {
        Strategy::Hybrid => index.hybrid_search(query, &SearchParams::default().with_k(k)),
        Strategy::Semantic => index.channel_search(query, SingleChannel::SemanticOnly, k),
        Strategy::Syntactic => index.channel_search(query, SingleChannel::SyntacticOnly, k),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairRow {
    pub suspect: String,
    pub target: Option<String>,
    pub label: u8,
    pub ecosystem: Ecosystem,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PairDataset {
    pub source: String,
    pub rows: Vec<PairRow>,
}

#[derive(Deserialize)]
struct RawPair {
    suspect: String,
    #[serde(default)]
    target: String,
    label: u8,
    ecosystem: String,
}

impl PairDataset {
    /// CSV with header `suspect,target,label,ecosystem`; an empty target
    /// means no ground truth.
    pub fn read_csv(reader: impl Read, source: &str) -> Result<Self, EvalError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut rows = Vec::new();
        for (i, rec) in rdr.deserialize::<RawPair>().enumerate() {
            let line = i + 2;
            let raw = rec.map_err(|e| EvalError::PairDataset { line, message: e.to_string() })?;
            if raw.label > 1 {
                return Err(EvalError::PairDataset { line, message: format!("label must be 0 or 1, got {}", raw.label) });
            }
            let ecosystem = raw.ecosystem.parse().map_err(|message| EvalError::PairDataset { line, message })?;
            rows.push(PairRow {
                suspect: raw.suspect,
                target: Some(raw.target).filter(|t| !t.is_empty()),
                label: raw.label,
                ecosystem,
            });
        }
        Ok(PairDataset { source: source.to_string(), rows })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TdrRow {
    pub k: usize,
    pub hits: usize,
    pub total: usize,
    pub tdr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TdrTable {
    pub strategy: Strategy,
    pub rows: Vec<TdrRow>,
    /// Confusion rows without a ground-truth target.
    pub skipped: usize,
}

/// Fraction of confusion rows whose target is among the top-`k` results,
/// for each `k`. A suspect present in the index never counts as its own hit
/// and does not take up a slot.
pub fn tdr(index: &CandidateIndex, rows: &[PairRow], strategy: Strategy, ks: &[usize]) -> Result<TdrTable, EvalError> {
    let confusion: Vec<&PairRow> = rows.iter().filter(|r| r.label == 1).collect();
    let usable: Vec<(NormalizedName, String)> = confusion
        .iter()
        .filter_map(|r| r.target.as_ref().map(|t| (NormalizedName::new(&r.suspect), NormalizedName::new(t).key())))
        .collect();
    let skipped = confusion.len() - usable.len();
    let mut out = Vec::with_capacity(ks.len());
    for &k in ks {
        let hits = usable
            .par_iter()
            .map(|(query, target)| {
                let own = query.key();
                let found = retrieve(index, query, strategy, k + 1)?
                    .into_iter()
                    .filter(|c| c.name.key() != own)
                    .take(k)
                    .any(|c| c.name.key() == *target);
                Ok(found)
            })
            .collect::<Result<Vec<bool>, IndexError>>()?
            .into_iter()
            .filter(|&h| h)
            .count();
        let total = usable.len();
        let tdr = if total == 0 { 0.0 } else { hits as f64 / total as f64 };
        out.push(TdrRow { k, hits, total, tdr });
    }
    Ok(TdrTable { strategy, rows: out, skipped })
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AblationConfig {
    pub groups: Vec<FeatureGroup>,
}

impl AblationConfig {
    pub fn new(groups: &[FeatureGroup]) -> Result<Self, EvalError> {
        let set: BTreeSet<FeatureGroup> = groups.iter().copied().collect();
        let config = AblationConfig { groups: set.into_iter().collect() };
        if !config.groups.contains(&FeatureGroup::SS) {
            return Err(EvalError::MissingSs(config.name()));
        }
        Ok(config)
    }

    /// `SS+MQ`, `SS-Only`, `Metadata-Full`, `All-Features`, or `all`.
    pub fn parse(s: &str) -> Result<Self, EvalError> {
        let t = s.trim();
        match t.to_ascii_lowercase().as_str() {
            "all" | "all-features" => return AblationConfig::new(&FeatureGroup::ALL),
            "metadata-full" => {
                return AblationConfig::new(&[FeatureGroup::SS, FeatureGroup::MQ, FeatureGroup::CD, FeatureGroup::TS])
            }
            "ss-only" => return AblationConfig::new(&[FeatureGroup::SS]),
            _ => {}
        }
        let groups = t
            .split('+')
            .map(|g| g.parse::<FeatureGroup>().map_err(EvalError::UnknownGroup))
            .collect::<Result<Vec<_>, _>>()?;
        AblationConfig::new(&groups)
    }

    pub fn name(&self) -> String {
        use FeatureGroup::*;
        match self.groups.as_slice() {
            [SS] => "SS-Only".into(),
            [SS, MQ, CD, TS] => "Metadata-Full".into(),
            [SS, MQ, CD, TS, PC] => "All-Features".into(),
            gs => gs.iter().map(|g| g.as_str()).collect::<Vec<_>>().join("+"),
        }
    }

    pub fn indices(&self) -> Vec<usize> {
        group_indices(&self.groups)
    }

    pub fn uses(&self, group: FeatureGroup) -> bool {
        self.groups.contains(&group)
    }

    /// The six standard configurations.
    pub fn standard() -> Vec<AblationConfig> {
        ["SS-Only", "SS+MQ", "SS+CD", "SS+CD+TS", "Metadata-Full", "All-Features"]
            .iter()
            .map(|s| AblationConfig::parse(s).expect("standard configuration"))
            .collect()
    }
}

impl fmt::Display for AblationConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Drops repeated configurations (first occurrence kept) with one warning each.
pub fn dedup_configs(configs: Vec<AblationConfig>) -> (Vec<AblationConfig>, Vec<String>) {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    let mut warnings = Vec::new();
    for c in configs {
        if seen.insert(c.clone()) {
            out.push(c);
        } else {
            warnings.push(format!("duplicate configuration {} ignored", c.name()));
        }
    }
    (out, warnings)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub config: String,
    pub params: TreeParams,
    pub threshold: f64,
    pub auc: Option<f64>,
    pub f1: f64,
    pub recall: f64,
}

/// Cross-validation, threshold search and out-of-fold metrics per configuration.
pub fn ablate(table: &FeatureTable, configs: &[AblationConfig], grid: &[TreeParams], seed: u64) -> Result<Vec<AblationRow>, EvalError> {
    configs
        .iter()
        .map(|c| {
            let cv = cross_validate(table, &c.indices(), grid, seed)?;
            let t = threshold_search(&cv.oof.probabilities, &table.labels);
            let m = evaluate(&cv.oof.probabilities, &table.labels, t.threshold);
            Ok(AblationRow {
                config: c.name(),
                params: cv.params,
                threshold: t.threshold,
                auc: m.auc,
                f1: m.confusion.f1,
                recall: m.confusion.recall,
            })
        })
        .collect()
}

const MQ_FLAGS: std::ops::Range<usize> = 3..7;
const VERSION_COUNT: usize = 7;

fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

/// Makes every confusion row look benign on the forgeable metadata: the
/// four quality flags become 1 and the version count becomes the benign
/// median. Benign rows are untouched.
pub fn mq_flip(table: &FeatureTable) -> FeatureTable {
    let benign_median = median(
        table.rows.iter().zip(&table.labels).filter(|(_, &y)| y == 0).map(|(r, _)| r[VERSION_COUNT]).collect(),
    );
    let rows = table
        .rows
        .iter()
        .zip(&table.labels)
        .map(|(row, &y)| {
            let mut row = *row;
            if y == 1 {
                for i in MQ_FLAGS {
                    row[i] = 1.0;
                }
                row[VERSION_COUNT] = benign_median;
            }
            row
        })
        .collect();
    FeatureTable { rows, labels: table.labels.clone() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversarialRow {
    pub config: String,
    pub threshold: f64,
    pub recall_clean: f64,
    pub recall_adv: f64,
    pub delta_recall: f64,
}

/// Recall before and after the MQ flip. Both copies are scored by the same
/// out-of-fold models, at the threshold searched on the clean predictions.
pub fn adversarial(
    table: &FeatureTable,
    configs: &[AblationConfig],
    grid: &[TreeParams],
    seed: u64,
) -> Result<Vec<AdversarialRow>, EvalError> {
    let flipped = mq_flip(table);
    configs
        .iter()
        .map(|c| {
            let subset = c.indices();
            let cv = cross_validate(table, &subset, grid, seed)?;
            let models = fit_fold_models(table, &cv.oof.folds, &subset, &cv.params, seed)?;
            let clean = predict_folds(&models, &cv.oof.folds, &table.rows);
            let adv = predict_folds(&models, &cv.oof.folds, &flipped.rows);
            let t = threshold_search(&clean, &table.labels).threshold;
            let recall_clean = evaluate(&clean, &table.labels, t).confusion.recall;
            let recall_adv = evaluate(&adv, &table.labels, t).confusion.recall;
            Ok(AdversarialRow {
                config: c.name(),
                threshold: t,
                recall_clean,
                recall_adv,
                delta_recall: recall_clean - recall_adv,
            })
        })
        .collect()
}
