//! End-to-end scan: acquire, search, select targets, profile content,
//! assemble features, classify and report.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::candidate_index::{CandidateIndex, IndexMeta, SearchParams};
use crate::content::{fetch_archive, profile_archive, ContentProfile};
use crate::error::{AcquireError, IndexError, ScanError};
use crate::features::{assemble, Completeness, FeatureInputs, FeatureVector, DEFAULT_HIGH_SIMILARITY};
use crate::forest::{ModelRoute, TrainedForest};
use crate::registry::{acquire, Ecosystem, EcosystemStats, Endpoints, MetadataStore, PackageRecord, Provenance, RegistryClient};
use crate::namevec::EmbeddingProvider;
use crate::target_analysis::{popularity_score, select_targets, PopularityWeights, SelectionConfig, ThreatReport};
use crate::textsim::NormalizedName;

pub const SCHEMA_VERSION: &str = "1.0";
pub const BATCH_CONCURRENCY: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct ScanConfig {
    pub ecosystem: Ecosystem,
    pub offline: bool,
    pub content_enabled: bool,
    pub search_params: SearchParams,
    pub selection: SelectionConfig,
    pub high_similarity: f64,
    pub index_path: PathBuf,
    pub model_path: PathBuf,
    pub store_path: PathBuf,
    pub cache_dir: Option<PathBuf>,
    /// Replaces wall-clock "now" and suppresses timings.
    pub snapshot_time: Option<DateTime<Utc>>,
}

impl ScanConfig {
    pub fn new(ecosystem: Ecosystem, index_path: PathBuf, model_path: PathBuf, store_path: PathBuf) -> Self {
        ScanConfig {
            ecosystem,
            offline: false,
            content_enabled: true,
            search_params: SearchParams::default(),
            selection: SelectionConfig::default(),
            high_similarity: DEFAULT_HIGH_SIMILARITY,
            index_path,
            model_path,
            store_path,
            cache_dir: None,
            snapshot_time: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Confusion,
    Benign,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputIdentity {
    pub name: String,
    pub ecosystem: Ecosystem,
    pub version: Option<String>,
    pub provenance: Provenance,
    pub snapshot_time: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFeatures {
    pub values: FeatureVector,
    pub completeness: Completeness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalReport {
    pub schema_version: String,
    pub input: InputIdentity,
    pub threat_report: ThreatReport,
    pub feature_vector: ReportFeatures,
    pub probability: f64,
    pub threshold: f64,
    pub decision: Decision,
    pub model_route: ModelRoute,
    pub reasons: Vec<String>,
    /// Milliseconds per stage; null under a fixed snapshot time.
    pub timings: BTreeMap<String, Option<f64>>,
}

impl FinalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Candidate index over one ecosystem's records, with popularity and
/// normalization stats taken from the same snapshot.
pub fn build_index(records: &[PackageRecord], ecosystem: Ecosystem, provider: EmbeddingProvider) -> Result<CandidateIndex, IndexError> {
    let records: Vec<&PackageRecord> = records.iter().filter(|r| r.ecosystem == ecosystem).collect();
    let stats = EcosystemStats::from_records(records.iter().copied());
    let weights = PopularityWeights::default();
    let entries: Vec<(String, f64)> =
        records.iter().map(|r| (r.name.clone(), popularity_score(r, &stats, &weights))).collect();
    Ok(CandidateIndex::build(&entries, provider)?.with_meta(IndexMeta { ecosystem, stats }))
}

pub struct Scanner {
    config: ScanConfig,
    index: CandidateIndex,
    model: TrainedForest,
    store: MetadataStore,
    client: Option<RegistryClient>,
    stats: EcosystemStats,
}

struct Stopwatch {
    enabled: bool,
    timings: BTreeMap<String, Option<f64>>,
    last: Instant,
}

impl Stopwatch {
    fn new(enabled: bool) -> Self {
        Stopwatch { enabled, timings: BTreeMap::new(), last: Instant::now() }
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        let ms = self.enabled.then(|| (now - self.last).as_secs_f64() * 1000.0);
        self.timings.insert(stage.to_string(), ms);
        self.last = now;
    }
}

fn fmt_score(x: f64) -> String {
    format!("{x:.3}")
}

impl Scanner {
    /// Loads model, index and store named by the config. The model is loaded
    /// first so a bad model fails before any other work.
    pub fn open(config: ScanConfig) -> Result<Self, ScanError> {
        let model = TrainedForest::load(&config.model_path)?;
        let index = CandidateIndex::load(&config.index_path)?;
        let store = MetadataStore::open(&config.store_path)?;
        let client = (!config.offline).then(|| RegistryClient::new(Endpoints::from_env()));
        Ok(Scanner::new(config, index, model, store, client))
    }

    pub fn new(
        config: ScanConfig,
        index: CandidateIndex,
        model: TrainedForest,
        store: MetadataStore,
        client: Option<RegistryClient>,
    ) -> Self {
        let stats = match index.meta() {
            Some(meta) => meta.stats,
            None => EcosystemStats::from_records(store.records(config.ecosystem).iter()),
        };
        Scanner { config, index, model, store, client, stats }
    }

    pub fn config(&self) -> &ScanConfig {
        &self.config
    }

    pub fn model(&self) -> &TrainedForest {
        &self.model
    }

    pub fn index(&self) -> &CandidateIndex {
        &self.index
    }

    pub fn store(&self) -> &MetadataStore {
        &self.store
    }

    fn client(&self) -> Option<&RegistryClient> {
        if self.config.offline {
            None
        } else {
            self.client.as_ref()
        }
    }

    fn profile(&self, record: &PackageRecord, cache_dir: &Path) -> Result<ContentProfile, String> {
        let path = fetch_archive(record, cache_dir, self.client()).map_err(|e| e.to_string())?;
        profile_archive(&path, record.ecosystem, self.index.provider()).map_err(|e| e.to_string())
    }

    pub fn scan(&self, name: &str) -> Result<FinalReport, ScanError> {
        let cfg = &self.config;
        let eco = cfg.ecosystem;
        let mut clock = Stopwatch::new(cfg.snapshot_time.is_none());
        let mut reasons = Vec::new();

        let acquired = acquire(&self.store, self.client(), eco, name, cfg.offline).map_err(|source| match source {
            AcquireError::Store(e) => ScanError::Store(e),
            source => ScanError::MetadataUnavailable { source },
        })?;
        let record = acquired.record;
        let provenance = match acquired.provenance {
            Provenance::Local => "local store",
            Provenance::Remote => "registry API",
            Provenance::Merged => "local store refreshed from registry API",
        };
        reasons.push(format!("acquire: metadata for {eco}/{} from {provenance}", record.name));
        clock.lap("acquire");

        let input = NormalizedName::new(name);
        let candidates = self.index.hybrid_search(&input, &cfg.search_params)?;
        let preview: Vec<&str> = candidates.iter().take(3).map(|c| c.name.raw.as_str()).collect();
        reasons.push(format!("search: {} candidates retrieved (leading: {})", candidates.len(), preview.join(", ")));
        clock.lap("search");

        let resolve = |c: &crate::candidate_index::CandidateMatch| {
            acquire(&self.store, self.client(), eco, &c.name.raw, cfg.offline).ok().map(|a| a.record)
        };
        let selection = select_targets(&input, &candidates, resolve, &self.stats, &cfg.selection);
        match &selection.best {
            Some(best) => reasons.push(format!(
                "targets: most probable target {} (syntactic similarity {}, popularity {}) among {} plausible",
                best.record.name,
                fmt_score(best.syntactic_max),
                fmt_score(best.popularity),
                selection.top3.len()
            )),
            None => reasons.push("targets: no plausible legitimate target among the candidates".into()),
        }
        clock.lap("targets");

        let mut profiles: Option<(ContentProfile, ContentProfile)> = None;
        match (&selection.best, cfg.content_enabled, &cfg.cache_dir) {
            (_, false, _) => reasons.push("content: disabled; content features absent".into()),
            (None, true, _) => reasons.push("content: skipped, no target to compare against".into()),
            (Some(_), true, None) => reasons.push("content: unavailable, no archive cache directory configured".into()),
            (Some(best), true, Some(dir)) => match (self.profile(&record, dir), self.profile(&best.record, dir)) {
                (Ok(s), Ok(t)) => {
                    reasons.push(format!(
                        "content: profiled {} ({} files) and {} ({} files)",
                        record.name,
                        s.file_paths.len(),
                        best.record.name,
                        t.file_paths.len()
                    ));
                    profiles = Some((s, t));
                }
                (Err(e), _) | (_, Err(e)) => reasons.push(format!("content: unavailable ({e}); content features absent")),
            },
        }
        clock.lap("content");

        let now = cfg.snapshot_time.unwrap_or_else(Utc::now);
        let (values, completeness) = assemble(&FeatureInputs {
            input: &input,
            candidates: &candidates,
            top3: &selection.top3,
            best: selection.best.as_ref(),
            record: &record,
            suspect_profile: profiles.as_ref().map(|p| &p.0),
            target_profile: profiles.as_ref().map(|p| &p.1),
            now,
            high_similarity: cfg.high_similarity,
        })?;
        let missing: Vec<&str> = [
            ("SS", completeness.ss),
            ("MQ", completeness.mq),
            ("CD", completeness.cd),
            ("TS", completeness.ts),
            ("PC", completeness.pc),
        ]
        .iter()
        .filter(|(_, ok)| !ok)
        .map(|(g, _)| *g)
        .collect();
        reasons.push(if missing.is_empty() {
            "features: all groups complete".to_string()
        } else {
            format!("features: incomplete groups {}", missing.join(", "))
        });
        clock.lap("features");

        let (probability, threshold, route) = if selection.top3.is_empty() {
            reasons.push("classify: skipped, no plausible legitimate target".into());
            let threshold = self.model.companion.as_ref().map_or(self.model.threshold, |c| c.threshold);
            (0.0, threshold, ModelRoute::MetadataFull)
        } else {
            let p = self.model.predict(&values.values);
            let which = match p.route {
                ModelRoute::Full => "full model",
                ModelRoute::MetadataFull => "metadata-only model",
            };
            reasons.push(format!("classify: confusion probability {} from the {which}", fmt_score(p.probability)));
            (p.probability, p.threshold, p.route)
        };
        clock.lap("classify");

        let decision = if probability > threshold { Decision::Confusion } else { Decision::Benign };
        reasons.push(match decision {
            Decision::Confusion => format!("decision: confusion, probability {} exceeds threshold {}", fmt_score(probability), fmt_score(threshold)),
            Decision::Benign => format!("decision: benign, probability {} does not exceed threshold {}", fmt_score(probability), fmt_score(threshold)),
        });
        clock.lap("decision");

        let mut notes = selection.notes;
        if let Some((s, t)) = &profiles {
            notes.extend(s.warnings.iter().chain(&t.warnings).cloned());
        }
        Ok(FinalReport {
            schema_version: SCHEMA_VERSION.to_string(),
            input: InputIdentity {
                name: name.to_string(),
                ecosystem: eco,
                version: record.latest_version.clone(),
                provenance: acquired.provenance,
                snapshot_time: cfg.snapshot_time,
            },
            threat_report: ThreatReport {
                input_name: name.to_string(),
                ecosystem: eco,
                candidates,
                top3: selection.top3,
                best: selection.best,
                notes,
            },
            feature_vector: ReportFeatures { values, completeness },
            probability,
            threshold,
            decision,
            model_route: route,
            reasons,
            timings: clock.timings,
        })
    }

    /// Independent scans with bounded concurrency; results keep input order.
    pub fn scan_batch(&self, names: &[String]) -> Vec<Result<FinalReport, ScanError>> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(BATCH_CONCURRENCY)
            .build()
            .expect("thread pool");
        pool.install(|| names.par_iter().map(|n| self.scan(n)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{metadata_indices, FeatureTable, N_FEATURES};
    use crate::forest::{train, TreeParams};
    use chrono::TimeZone;

    fn snapshot() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2024, 6, 1, 0, 0, 0).unwrap()
    }

    fn record(name: &str, downloads: u64) -> PackageRecord {
        PackageRecord {
            downloads,
            stars: downloads / 10,
            dependents: downloads / 100,
            forks: downloads / 50,
            maintainer_count: 1,
            version_count: 12,
            latest_version: Some("1.2.0".into()),
            license: Some("MIT".into()),
            repository_url: Some(format!("https://github.com/o/{name}")),
            created_at: Some(Utc.with_ymd_and_hms(2015, 1, 1, 0, 0, 0).unwrap()),
            last_release_at: Some(Utc.with_ymd_and_hms(2023, 1, 1, 0, 0, 0).unwrap()),
            ..PackageRecord::empty(name, Ecosystem::Pypi)
        }
    }

    fn model() -> TrainedForest {
        let mut t = FeatureTable::default();
        for i in 0..60 {
            let label = (i % 2) as u8;
            let mut row = [0.5; N_FEATURES];
            row[0] = if label == 1 { 0.85 } else { 0.3 } + (i % 5) as f64 * 0.01;
            row[7] = if label == 1 { 1.0 } else { 12.0 };
            t.push(row, label);
        }
        let p = TreeParams { n_trees: 9, ..TreeParams::default() };
        let mut m = train(&t, &(0..N_FEATURES).collect::<Vec<_>>(), &p, 1).unwrap();
        m.threshold = 0.5;
        let mut c = train(&t, &metadata_indices(), &p, 2).unwrap();
        c.threshold = 0.4;
        m.companion = Some(Box::new(c));
        m
    }

    struct Fixture {
        _dir: tempfile::TempDir,
        scanner: Scanner,
    }

    fn fixture(content: bool) -> Fixture {
        fixture_with(content, &["requests", "numpy", "flask", "django", "pandas"])
    }

    fn fixture_with(content: bool, indexed: &[&str]) -> Fixture {
        let dir = tempfile::tempdir().unwrap();
        let store = MetadataStore::open(dir.path().join("store.jsonl")).unwrap();
        let legit = ["requests", "numpy", "flask", "django", "pandas"];
        for (i, n) in legit.iter().enumerate() {
            store.put(record(n, 10_000 * (i as u64 + 1))).unwrap();
        }
        let mut suspect = record("reqeusts", 3);
        suspect.version_count = 1;
        suspect.repository_url = None;
        store.put(suspect).unwrap();
        store.put(PackageRecord { downloads: 5, ..PackageRecord::empty("zzqx", Ecosystem::Pypi) }).unwrap();
        store.put(PackageRecord { downloads: 2, ..PackageRecord::empty("zzqy", Ecosystem::Pypi) }).unwrap();
        let entries: Vec<(String, f64)> = indexed.iter().map(|n| (n.to_string(), 0.0)).collect();
        let index = CandidateIndex::build(&entries, EmbeddingProvider::hashed(128, 42)).unwrap();
        let mut config = ScanConfig::new(Ecosystem::Pypi, PathBuf::new(), PathBuf::new(), store.path().to_path_buf());
        config.offline = true;
        config.content_enabled = content;
        config.snapshot_time = Some(snapshot());
        Fixture { scanner: Scanner::new(config, index, model(), store, None), _dir: dir }
    }

    fn check_consistency(r: &FinalReport) {
        assert_eq!(r.decision == Decision::Confusion, r.probability > r.threshold);
    }

    #[test]
    fn typo_scan_finds_target() {
        let f = fixture(false);
        let r = f.scanner.scan("reqeusts").unwrap();
        assert_eq!(r.threat_report.best.as_ref().unwrap().record.name, "requests");
        assert_eq!(r.model_route, ModelRoute::MetadataFull);
        let companion = f.scanner.model().companion.as_ref().unwrap();
        assert_eq!(r.probability, companion.predict_proba(&r.feature_vector.values.values));
        check_consistency(&r);
        for stage in ["acquire", "search", "targets", "content", "features", "classify", "decision"] {
            assert_eq!(r.reasons.iter().filter(|l| l.starts_with(&format!("{stage}:"))).count(), 1, "{stage}");
            assert_eq!(r.timings.get(stage), Some(&None));
        }
    }

    #[test]
    fn content_without_cache_degrades() {
        let f = fixture(true);
        let r = f.scanner.scan("reqeusts").unwrap();
        assert!(r.reasons.iter().any(|l| l.starts_with("content: unavailable")));
        assert_eq!(r.model_route, ModelRoute::MetadataFull);
        check_consistency(&r);
    }

    #[test]
    fn no_target_is_benign() {
        let f = fixture_with(false, &["zzqx", "zzqy"]);
        let r = f.scanner.scan("zzqx").unwrap();
        assert!(r.threat_report.top3.is_empty());
        assert_eq!(r.decision, Decision::Benign);
        assert!(r.reasons.iter().any(|l| l.contains("no plausible legitimate target")));
        check_consistency(&r);
    }

    #[test]
    fn offline_cold_store_errors() {
        let f = fixture(false);
        let err = f.scanner.scan("never-seen").unwrap_err();
        assert!(matches!(err, ScanError::MetadataUnavailable { .. }));
        assert!(err.to_string().contains("retry"));
    }

    #[test]
    fn batch_matches_single_scans() {
        let f = fixture(false);
        let names: Vec<String> = ["reqeusts", "never-seen", "zzqx"].iter().map(|s| s.to_string()).collect();
        let out = f.scanner.scan_batch(&names);
        assert_eq!(out.len(), 3);
        assert!(out[1].is_err());
        assert_eq!(out[0].as_ref().unwrap(), &f.scanner.scan("reqeusts").unwrap());
        assert_eq!(out[2].as_ref().unwrap(), &f.scanner.scan("zzqx").unwrap());
        assert!(f.scanner.scan_batch(&[]).is_empty());
    }

    #[test]
    fn report_has_exact_top_level_fields() {
        let f = fixture(false);
        let v: serde_json::Value = serde_json::from_str(&f.scanner.scan("reqeusts").unwrap().to_json()).unwrap();
        let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        keys.sort_unstable();
        assert_eq!(
            keys,
            [
                "decision",
                "feature_vector",
                "input",
                "model_route",
                "probability",
                "reasons",
                "schema_version",
                "threat_report",
                "threshold",
                "timings"
            ]
        );
    }
}
