//! The 18-dimensional feature vector for a (suspect, target) pair.
//!
//! Order is fixed: SS (3), MQ (5), CD (3), TS (3), PC (4). Absent inputs
//! are encoded as `-1.0` so a tree can tell "unknown" from a real zero.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::sync::OnceLock;

use chrono::{DateTime, Utc};
use regex::Regex;
use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};

use crate::candidate_index::CandidateMatch;
use crate::content::{set_jaccard, ContentProfile};
use crate::error::FeatureError;
use crate::namevec::cosine_similarity;
use crate::registry::PackageRecord;
use crate::target_analysis::LegitimateTarget;
use crate::textsim::{
    homoglyph_similarity, jaro_winkler_similarity, length_diff_ratio, levenshtein_similarity, syntactic_max, NormalizedName,
};

pub const N_FEATURES: usize = 18;
pub const ABSENT: f64 = -1.0;
pub const DEFAULT_HIGH_SIMILARITY: f64 = 0.8;

pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "max_levenshtein",
    "max_jaro_winkler",
    "max_homoglyph",
    "maintainer_adequacy",
    "repo_url_validity",
    "version_format_validity",
    "license_validity",
    "version_count",
    "high_similarity_count",
    "min_length_diff_ratio",
    "target_popularity",
    "package_age_log",
    "time_since_last_release_log",
    "time_since_last_update_log",
    "package_size_ratio",
    "file_list_similarity",
    "dependency_similarity",
    "code_vector_similarity",
];

pub const LABEL_COLUMN: &str = "label";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureGroup {
    SS,
    MQ,
    CD,
    TS,
    PC,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 5] = [FeatureGroup::SS, FeatureGroup::MQ, FeatureGroup::CD, FeatureGroup::TS, FeatureGroup::PC];

    pub fn indices(self) -> std::ops::Range<usize> {
        match self {
            FeatureGroup::SS => 0..3,
            FeatureGroup::MQ => 3..8,
            FeatureGroup::CD => 8..11,
            FeatureGroup::TS => 11..14,
            FeatureGroup::PC => 14..18,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureGroup::SS => "SS",
            FeatureGroup::MQ => "MQ",
            FeatureGroup::CD => "CD",
            FeatureGroup::TS => "TS",
            FeatureGroup::PC => "PC",
        }
    }
}

impl fmt::Display for FeatureGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureGroup {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FeatureGroup::ALL
            .into_iter()
            .find(|g| g.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| s.to_string())
    }
}

/// Feature indices covered by a set of groups, ascending.
pub fn group_indices(groups: &[FeatureGroup]) -> Vec<usize> {
    let set: BTreeSet<usize> = groups.iter().flat_map(|g| g.indices()).collect();
    set.into_iter().collect()
}

/// Indices for the metadata-only model (everything except PC).
pub fn metadata_indices() -> Vec<usize> {
    group_indices(&[FeatureGroup::SS, FeatureGroup::MQ, FeatureGroup::CD, FeatureGroup::TS])
}

pub fn pc_absent(values: &[f64; N_FEATURES]) -> bool {
    FeatureGroup::PC.indices().any(|i| values[i] == ABSENT)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completeness {
    pub ss: bool,
    pub mq: bool,
    pub cd: bool,
    pub ts: bool,
    pub pc: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector {
    pub values: [f64; N_FEATURES],
}

impl Serialize for FeatureVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(N_FEATURES))?;
        for (name, v) in FEATURE_NAMES.iter().zip(&self.values) {
            map.serialize_entry(name, v)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for FeatureVector {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let map = std::collections::HashMap::<String, f64>::deserialize(deserializer)?;
        let mut values = [0.0; N_FEATURES];
        for (slot, name) in values.iter_mut().zip(FEATURE_NAMES) {
            *slot = *map.get(name).ok_or_else(|| serde::de::Error::missing_field(name))?;
        }
        if map.len() != N_FEATURES {
            return Err(serde::de::Error::custom("unexpected feature names"));
        }
        Ok(FeatureVector { values })
    }
}

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        FEATURE_NAMES.iter().position(|n| *n == name).map(|i| self.values[i])
    }

    pub fn group(&self, g: FeatureGroup) -> &[f64] {
        &self.values[g.indices()]
    }
}

pub fn extract_ss(input: &NormalizedName, top3: &[LegitimateTarget]) -> [f64; 3] {
    let mut out = [0.0f64; 3];
    for t in top3 {
        let name = t.name();
        out[0] = out[0].max(levenshtein_similarity(input, &name));
        out[1] = out[1].max(jaro_winkler_similarity(input, &name));
        out[2] = out[2].max(homoglyph_similarity(input, &name));
    }
    out
}

fn version_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^v?\d+(\.\d+){0,3}([-+][0-9A-Za-z.+-]+)?$").expect("valid regex"))
}

pub fn valid_repo_url(url: &str) -> bool {
    url::Url::parse(url.trim())
        .map(|u| matches!(u.scheme(), "http" | "https" | "git") && u.host_str().is_some_and(|h| !h.is_empty()))
        .unwrap_or(false)
}

pub fn valid_version(version: &str) -> bool {
    version_pattern().is_match(version.trim())
}

/// SPDX identifier (case-insensitive), SPDX expression, or a recognized
/// informal alias such as "Apache 2.0".
pub fn valid_license(license: &str) -> bool {
    let l = license.trim();
    if l.is_empty() {
        return false;
    }
    if spdx::identifiers::LICENSES.iter().any(|(id, _, _)| id.eq_ignore_ascii_case(l.trim_end_matches('+'))) {
        return true;
    }
    if spdx::Expression::parse_mode(l, spdx::ParseMode::LAX).is_ok() {
        return true;
    }
    matches!(spdx::imprecise_license_id(l), Some((_, len)) if len == l.len())
}

pub fn extract_mq(record: &PackageRecord) -> [f64; 5] {
    let flag = |b: bool| if b { 1.0 } else { 0.0 };
    [
        flag(record.maintainer_count >= 1),
        flag(record.repository_url.as_deref().is_some_and(valid_repo_url)),
        flag(record.latest_version.as_deref().is_some_and(valid_version)),
        flag(record.license.as_deref().is_some_and(valid_license)),
        record.version_count as f64,
    ]
}

pub fn extract_cd(
    input: &NormalizedName,
    candidates: &[CandidateMatch],
    top3: &[LegitimateTarget],
    best: Option<&LegitimateTarget>,
    high_similarity: f64,
) -> [f64; 3] {
    let count = candidates.iter().filter(|c| syntactic_max(input, &c.name) > high_similarity).count();
    let min_ratio = top3
        .iter()
        .filter_map(|t| length_diff_ratio(input, &t.name()).ok())
        .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.min(r))))
        .unwrap_or(1.0);
    [count as f64, min_ratio, best.map_or(0.0, |b| b.popularity)]
}

fn log_days(ts: Option<DateTime<Utc>>, now: DateTime<Utc>) -> Result<f64, FeatureError> {
    let Some(ts) = ts else { return Ok(ABSENT) };
    if ts > now {
        return Err(FeatureError::ClockSkew { timestamp: ts.to_rfc3339(), now: now.to_rfc3339() });
    }
    let days = (now - ts).num_milliseconds() as f64 / 86_400_000.0;
    Ok(days.ln_1p())
}

pub fn extract_ts(record: &PackageRecord, now: DateTime<Utc>) -> Result<[f64; 3], FeatureError> {
    Ok([
        log_days(record.created_at, now)?,
        log_days(record.last_release_at, now)?,
        log_days(record.last_updated_at, now)?,
    ])
}

pub fn extract_pc(suspect: Option<&ContentProfile>, target: Option<&ContentProfile>) -> [f64; 4] {
    let (Some(s), Some(t)) = (suspect, target) else {
        return [ABSENT; 4];
    };
    let size_ratio = if t.total_size_bytes == 0 {
        ABSENT
    } else {
        (s.total_size_bytes as f64).ln_1p() / (t.total_size_bytes as f64).ln_1p()
    };
    let code = match (&s.code_vector, &t.code_vector) {
        (Some(a), Some(b)) => cosine_similarity(a, b).map(|c| c.max(0.0)).unwrap_or(ABSENT),
        _ => ABSENT,
    };
    [
        size_ratio,
        set_jaccard(&s.file_paths, &t.file_paths),
        set_jaccard(&s.dependency_names, &t.dependency_names),
        code,
    ]
}

#[derive(Debug, Clone, Copy)]
pub struct FeatureInputs<'a> {
    pub input: &'a NormalizedName,
    pub candidates: &'a [CandidateMatch],
    pub top3: &'a [LegitimateTarget],
    pub best: Option<&'a LegitimateTarget>,
    pub record: &'a PackageRecord,
    pub suspect_profile: Option<&'a ContentProfile>,
    pub target_profile: Option<&'a ContentProfile>,
    pub now: DateTime<Utc>,
    pub high_similarity: f64,
}

pub fn assemble(inputs: &FeatureInputs<'_>) -> Result<(FeatureVector, Completeness), FeatureError> {
    let ss = extract_ss(inputs.input, inputs.top3);
    let mq = extract_mq(inputs.record);
    let cd = extract_cd(inputs.input, inputs.candidates, inputs.top3, inputs.best, inputs.high_similarity);
    let ts = extract_ts(inputs.record, inputs.now)?;
    let pc = extract_pc(inputs.suspect_profile, inputs.target_profile);
    let mut values = [0.0; N_FEATURES];
    let parts: [&[f64]; 5] = [&ss, &mq, &cd, &ts, &pc];
    for (group, part) in FeatureGroup::ALL.iter().zip(parts) {
        values[group.indices()].copy_from_slice(part);
    }
    let completeness = Completeness {
        ss: !inputs.top3.is_empty(),
        mq: true,
        cd: inputs.best.is_some(),
        ts: !ts.contains(&ABSENT),
        pc: !pc.contains(&ABSENT),
    };
    Ok((FeatureVector { values }, completeness))
}

/// Feature rows with binary labels (1 = confusion).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureTable {
    pub rows: Vec<[f64; N_FEATURES]>,
    pub labels: Vec<u8>,
}

impl FeatureTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, row: [f64; N_FEATURES], label: u8) {
        self.rows.push(row);
        self.labels.push(label);
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<(), FeatureError> {
        let mut w = csv::Writer::from_writer(writer);
        let csv_err = |e: csv::Error| FeatureError::Csv(e.to_string());
        let mut header: Vec<&str> = FEATURE_NAMES.to_vec();
        header.push(LABEL_COLUMN);
        w.write_record(&header).map_err(csv_err)?;
        for (row, label) in self.rows.iter().zip(&self.labels) {
            let mut fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            fields.push(label.to_string());
            w.write_record(&fields).map_err(csv_err)?;
        }
        w.flush().map_err(|e| FeatureError::Csv(e.to_string()))
    }

    /// Reads a CSV whose header is exactly the 18 feature names plus `label`
    /// (any column order).
    pub fn read_csv(reader: impl Read) -> Result<Self, FeatureError> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers().map_err(|e| FeatureError::Csv(e.to_string()))?.clone();
        let cols: Vec<&str> = header.iter().map(str::trim).collect();
        let mut problems = Vec::new();
        for expected in FEATURE_NAMES.iter().chain(std::iter::once(&LABEL_COLUMN)) {
            if !cols.contains(expected) {
                problems.push(format!("missing '{expected}'"));
            }
        }
        for c in &cols {
            if !FEATURE_NAMES.contains(c) && *c != LABEL_COLUMN {
                problems.push(format!("unexpected '{c}'"));
            }
        }
        if !problems.is_empty() {
            return Err(FeatureError::Schema(problems.join(", ")));
        }
        let position = |name: &str| cols.iter().position(|c| *c == name).expect("validated");
        let feature_pos: Vec<usize> = FEATURE_NAMES.iter().map(|n| position(n)).collect();
        let label_pos = position(LABEL_COLUMN);
        let mut table = FeatureTable::default();
        for (i, rec) in r.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| FeatureError::Csv(format!("line {line}: {e}")))?;
            let mut row = [0.0; N_FEATURES];
            for (k, &p) in feature_pos.iter().enumerate() {
                row[k] = rec
                    .get(p)
                    .unwrap_or("")
                    .trim()
                    .parse()
                    .map_err(|_| FeatureError::Csv(format!("line {line}: column '{}' is not a number", FEATURE_NAMES[k])))?;
            }
            let label: u8 = match rec.get(label_pos).unwrap_or("").trim() {
                "0" | "benign" | "Benign" => 0,
                "1" | "confusion" | "Confusion" => 1,
                other => return Err(FeatureError::Csv(format!("line {line}: label '{other}' is not 0/1"))),
            };
            table.push(row, label);
        }
        Ok(table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::candidate_index::Channel;
    use crate::registry::Ecosystem;
    use chrono::{Duration, TimeZone};

    fn target(name: &str, popularity: f64) -> LegitimateTarget {
        LegitimateTarget {
            record: PackageRecord::empty(name, Ecosystem::Pypi),
            syntactic_max: 0.0,
            popularity,
            combined: 0.0,
        }
    }

    fn cand(name: &str) -> CandidateMatch {
        CandidateMatch {
            name: NormalizedName::new(name),
            s_sem: 0.0,
            s_syn: 0.0,
            s_total: 0.0,
            delta_l: 0,
            channel: Channel::Hybrid,
            popularity: 0.0,
        }
    }

    fn now() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2025, 1, 1, 0, 0, 0).unwrap()
    }

    #[test]
    fn ss_examples() {
        let input: NormalizedName = "bz2fiel".into();
        assert_eq!(extract_ss(&"bz2file".into(), &[target("bz2file", 0.5)]), [1.0, 1.0, 1.0]);
        let one = extract_ss(&input, &[target("bz2file", 0.5)]);
        let t: NormalizedName = "bz2file".into();
        assert_eq!(one, [levenshtein_similarity(&input, &t), jaro_winkler_similarity(&input, &t), homoglyph_similarity(&input, &t)]);
        let trio = ["bz2file", "bzfile", "b22fiel"];
        let got = extract_ss(&input, &trio.map(|n| target(n, 0.1)));
        for (k, f) in [levenshtein_similarity, jaro_winkler_similarity, homoglyph_similarity].iter().enumerate() {
            let want = trio.iter().map(|n| f(&input, &(*n).into())).fold(0.0, f64::max);
            assert_eq!(got[k], want);
        }
        assert_eq!(extract_ss(&input, &[]), [0.0; 3]);
    }

    #[test]
    fn mq_examples() {
        let mut r = PackageRecord::empty("x", Ecosystem::Npm);
        assert_eq!(extract_mq(&r), [0.0; 5]);
        r.repository_url = Some("https://github.com/x/y".into());
        r.license = Some("MIT".into());
        r.latest_version = Some("1.2.3".into());
        r.maintainer_count = 2;
        r.version_count = 10;
        assert_eq!(extract_mq(&r), [1.0, 1.0, 1.0, 1.0, 10.0]);
        r.latest_version = Some("abc".into());
        assert_eq!(extract_mq(&r)[2], 0.0);
    }

    #[test]
    fn mq_rules() {
        assert!(valid_repo_url("git://github.com/a/b.git"));
        assert!(!valid_repo_url("ssh://git@github.com/a/b"));
        assert!(!valid_repo_url("github.com/a/b"));
        assert!(!valid_repo_url("https://"));
        for v in ["1", "1.2", "1.2.3.4", "2.0.0-rc.1", "1.0.0+build.5", "0.1.0a1".replace('a', "-a").as_str()] {
            assert!(valid_version(v), "{v}");
        }
        for v in ["abc", "1.2.3.4.5", "", "1..2"] {
            assert!(!valid_version(v), "{v}");
        }
        for l in ["MIT", "mit", "Apache-2.0", "MIT OR Apache-2.0", "BSD-3-Clause", "GPL-2.0+"] {
            assert!(valid_license(l), "{l}");
        }
        for l in ["", "UNLICENSED-custom-thing", "see LICENSE file"] {
            assert!(!valid_license(l), "{l}");
        }
    }

    #[test]
    fn cd_examples() {
        let input: NormalizedName = "colors".into();
        let same = vec![cand("colors"), cand("colors")];
        assert_eq!(extract_cd(&input, &same, &[], None, DEFAULT_HIGH_SIMILARITY), [2.0, 1.0, 0.0]);
        let mixed: Vec<_> = ["colours", "color", "zzzzzz", "qwerty", "a"].iter().map(|n| cand(n)).collect();
        let oracle = mixed.iter().filter(|c| syntactic_max(&input, &c.name) > 0.8).count();
        assert_eq!(oracle, 2);
        let t = [target("colours", 0.4), target("color", 0.6)];
        let got = extract_cd(&input, &mixed, &t, Some(&t[1]), DEFAULT_HIGH_SIMILARITY);
        assert_eq!(got, [2.0, 1.0 / 7.0, 0.6]);
    }

    #[test]
    fn ts_examples() {
        let mut r = PackageRecord::empty("x", Ecosystem::Npm);
        assert_eq!(extract_ts(&r, now()).unwrap(), [ABSENT; 3]);
        r.created_at = Some(now());
        assert_eq!(extract_ts(&r, now()).unwrap()[0], 0.0);
        r.created_at = Some(now() - Duration::days(364));
        assert!((extract_ts(&r, now()).unwrap()[0] - 365f64.ln()).abs() < 1e-12);
        // e^3 - 1 days gives exactly 3 (to millisecond resolution)
        let ms = ((3f64.exp() - 1.0) * 86_400_000.0).round() as i64;
        r.created_at = Some(now() - Duration::milliseconds(ms));
        assert!((extract_ts(&r, now()).unwrap()[0] - 3.0).abs() < 1e-9);
        r.last_updated_at = Some(now() + Duration::seconds(1));
        assert!(matches!(extract_ts(&r, now()), Err(FeatureError::ClockSkew { .. })));
    }

    fn profile(files: &[&str], deps: &[&str], size: u64, code: Option<Vec<f64>>) -> ContentProfile {
        ContentProfile {
            total_size_bytes: size,
            file_paths: files.iter().map(|s| s.to_string()).collect(),
            dependency_names: deps.iter().map(|s| s.to_string()).collect(),
            code_vector: code.map(crate::namevec::NameVector::new),
            source_file_count: 1,
            warnings: vec![],
        }
    }

    #[test]
    fn pc_examples() {
        let t = profile(&["index.js", "lib/a.js", "lib/b.js", "README.md"], &["lodash", "debug", "ms"], 40_000, Some(vec![1.0, 0.0]));
        assert_eq!(extract_pc(Some(&t), Some(&t)), [1.0, 1.0, 1.0, 1.0]);
        assert_eq!(extract_pc(None, Some(&t)), [ABSENT; 4]);
        let mimic = profile(&["index.js", "README.md"], &["lodash", "debug", "ms"], 300, Some(vec![0.6, 0.8]));
        let got = extract_pc(Some(&mimic), Some(&t));
        assert!((got[0] - 301f64.ln() / 40_001f64.ln()).abs() < 1e-12);
        assert_eq!(got[1], 0.5);
        assert_eq!(got[2], 1.0);
        assert!((got[3] - 0.6).abs() < 1e-12);
        let opposite = profile(&[], &[], 10, Some(vec![-1.0, 0.0]));
        assert_eq!(extract_pc(Some(&opposite), Some(&t))[3], 0.0);
        let zero = profile(&[], &[], 0, None);
        let z = extract_pc(Some(&mimic), Some(&zero));
        assert_eq!((z[0], z[3]), (ABSENT, ABSENT));
    }

    fn inputs<'a>(
        input: &'a NormalizedName,
        candidates: &'a [CandidateMatch],
        top3: &'a [LegitimateTarget],
        record: &'a PackageRecord,
    ) -> FeatureInputs<'a> {
        FeatureInputs {
            input,
            candidates,
            top3,
            best: top3.first(),
            record,
            suspect_profile: None,
            target_profile: None,
            now: now(),
            high_similarity: DEFAULT_HIGH_SIMILARITY,
        }
    }

    #[test]
    fn assemble_defaults_and_order_insensitivity() {
        let input: NormalizedName = "x".into();
        let record = PackageRecord::empty("x", Ecosystem::Npm);
        let (fv, c) = assemble(&inputs(&input, &[], &[], &record)).unwrap();
        let expected = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, -1.0, -1.0, -1.0, -1.0, -1.0, -1.0, -1.0];
        assert_eq!(fv.values, expected);
        assert!(!c.ss && c.mq && !c.ts && !c.pc);

        let input: NormalizedName = "reqeusts".into();
        let cands: Vec<_> = ["requests", "request", "reqs", "urllib3"].iter().map(|n| cand(n)).collect();
        let mut reversed = cands.clone();
        reversed.reverse();
        let top3 = [target("requests", 0.9), target("request", 0.3)];
        let a = assemble(&inputs(&input, &cands, &top3, &record)).unwrap();
        let b = assemble(&inputs(&input, &reversed, &top3, &record)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn csv_round_trip_and_schema_errors() {
        let mut t = FeatureTable::default();
        let mut row = [0.0; N_FEATURES];
        row[0] = 0.123456789012345;
        row[17] = ABSENT;
        t.push(row, 1);
        t.push([0.5; N_FEATURES], 0);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(FeatureTable::read_csv(&buf[..]).unwrap(), t);

        let bad = "max_levenshtein,bogus,label\n0.1,0.2,1\n";
        match FeatureTable::read_csv(bad.as_bytes()) {
            Err(FeatureError::Schema(msg)) => {
                assert!(msg.contains("unexpected 'bogus'"));
                assert!(msg.contains("missing 'max_jaro_winkler'"));
            }
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn serialized_vector_uses_names_in_order() {
        let fv = FeatureVector { values: std::array::from_fn(|i| i as f64) };
        let json = serde_json::to_string(&fv).unwrap();
        assert!(json.starts_with("{\"max_levenshtein\":0.0,\"max_jaro_winkler\":1.0"));
        assert_eq!(fv.get("code_vector_similarity"), Some(17.0));
        assert_eq!(serde_json::from_str::<FeatureVector>(&json).unwrap(), fv);
        assert_eq!(fv.group(FeatureGroup::MQ).len(), 5);
        assert_eq!(metadata_indices(), (0..14).collect::<Vec<_>>());
    }
}
