use chrono::{TimeZone, Utc};
use typoguard_core::candidate_index::{CandidateIndex, SearchParams};
use typoguard_core::eval::synthetic::mq_correlated_table;
use typoguard_core::features::{FeatureTable, N_FEATURES};
use typoguard_core::forest::{train_with_cv, TrainedForest, TreeParams};
use typoguard_core::namevec::EmbeddingProvider;
use typoguard_core::pipeline::{build_index, Decision, ScanConfig, Scanner};
use typoguard_core::registry::{Ecosystem, MetadataStore, PackageRecord};
use typoguard_core::textsim::NormalizedName;

fn popular(name: &str, downloads: u64) -> PackageRecord {
    let day = |y, m| Utc.with_ymd_and_hms(y, m, 1, 0, 0, 0).unwrap();
    PackageRecord {
        downloads,
        stars: downloads / 1000,
        forks: downloads / 5000,
        dependents: downloads / 2000,
        maintainer_count: 3,
        repository_url: Some(format!("https://github.com/org/{name}")),
        license: Some("MIT".into()),
        latest_version: Some("2.1.0".into()),
        version_count: 40,
        created_at: Some(day(2012, 3)),
        last_release_at: Some(day(2023, 9)),
        last_updated_at: Some(day(2024, 1)),
        ..PackageRecord::empty(name, Ecosystem::Npm)
    }
}

#[test]
fn store_index_model_scan() {
    let dir = tempfile::tempdir().unwrap();
    let store_path = dir.path().join("store.jsonl");
    let store = MetadataStore::open(&store_path).unwrap();
    for (i, name) in ["react", "lodash", "express", "chalk", "axios", "moment"].iter().enumerate() {
        store.put(popular(name, 1_000_000 * (i as u64 + 1))).unwrap();
    }
    let created = Utc.with_ymd_and_hms(2024, 5, 28, 0, 0, 0).unwrap();
    store
        .put(PackageRecord {
            downloads: 12,
            maintainer_count: 1,
            latest_version: Some("1.0.0".into()),
            version_count: 1,
            created_at: Some(created),
            last_release_at: Some(created),
            last_updated_at: Some(created),
            ..PackageRecord::empty("lodahs", Ecosystem::Npm)
        })
        .unwrap();
    drop(store);

    let reopened = MetadataStore::open(&store_path).unwrap();
    assert_eq!(reopened.records(Ecosystem::Npm).len(), 7);
    assert!(reopened.warnings().is_empty());

    let index = build_index(&reopened.records(Ecosystem::Npm), Ecosystem::Npm, EmbeddingProvider::hashed(128, 42)).unwrap();
    let index_path = dir.path().join("index.bin");
    index.save(&index_path).unwrap();
    let loaded = CandidateIndex::load(&index_path).unwrap();
    let q = NormalizedName::new("lodahs");
    let params = SearchParams::default();
    assert_eq!(index.hybrid_search(&q, &params).unwrap(), loaded.hybrid_search(&q, &params).unwrap());
    assert_eq!(loaded.meta(), index.meta());

    let table = mq_correlated_table(11, 200);
    let grid = [TreeParams { n_trees: 30, ..TreeParams::default() }];
    let out = train_with_cv(&table, &(0..N_FEATURES).collect::<Vec<_>>(), &grid, 42).unwrap();
    let model_path = dir.path().join("model.bin");
    out.model.save(&model_path).unwrap();
    let model = TrainedForest::load(&model_path).unwrap();
    assert_eq!(model.to_bytes(), out.model.to_bytes());
    assert!(model.companion.is_some());

    let mut config = ScanConfig::new(Ecosystem::Npm, index_path, model_path, store_path);
    config.offline = true;
    config.snapshot_time = Some(Utc.with_ymd_and_hms(2024, 6, 1, 0, 0, 0).unwrap());
    let scanner = Scanner::open(config).unwrap();
    let report = scanner.scan("lodahs").unwrap();
    assert_eq!(report.threat_report.best.as_ref().unwrap().record.name, "lodash");
    assert_eq!(report.decision == Decision::Confusion, report.probability > report.threshold);
    assert_eq!(report.to_json(), scanner.scan("lodahs").unwrap().to_json());
}

#[test]
fn feature_csv_round_trip() {
    let table = mq_correlated_table(3, 50);
    let mut buf = Vec::new();
    table.write_csv(&mut buf).unwrap();
    let back = FeatureTable::read_csv(buf.as_slice()).unwrap();
    assert_eq!(back, table);
}
