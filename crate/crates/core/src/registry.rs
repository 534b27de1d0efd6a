//! Package metadata: record type, the local JSONL store, live registry
//! clients, and the local-first acquisition policy.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Mutex, RwLock};
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{AcquireError, FetchError, StoreError};
use crate::textsim::NormalizedName;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ecosystem {
    Npm,
    Pypi,
    Cargo,
}

impl Ecosystem {
    pub const ALL: [Ecosystem; 3] = [Ecosystem::Npm, Ecosystem::Pypi, Ecosystem::Cargo];

    pub fn as_str(self) -> &'static str {
        match self {
            Ecosystem::Npm => "npm",
            Ecosystem::Pypi => "pypi",
            Ecosystem::Cargo => "cargo",
        }
    }
}

impl fmt::Display for Ecosystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Ecosystem {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "npm" => Ok(Ecosystem::Npm),
            "pypi" => Ok(Ecosystem::Pypi),
            "cargo" | "crates" | "crates.io" => Ok(Ecosystem::Cargo),
            other => Err(format!("unsupported ecosystem '{other}' (expected npm, pypi or cargo)")),
        }
    }
}

/// One package's registry metadata snapshot. Counts default to zero and
/// optional fields to absent; no sentinel values are stored here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackageRecord {
    pub name: String,
    pub ecosystem: Ecosystem,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub downloads: u64,
    #[serde(default)]
    pub stars: u64,
    #[serde(default)]
    pub forks: u64,
    #[serde(default)]
    pub dependents: u64,
    #[serde(default)]
    pub maintainer_count: u64,
    #[serde(default)]
    pub repository_url: Option<String>,
    #[serde(default)]
    pub license: Option<String>,
    #[serde(default)]
    pub latest_version: Option<String>,
    #[serde(default)]
    pub version_count: u64,
    #[serde(default)]
    pub created_at: Option<DateTime<Utc>>,
    #[serde(default)]
    pub last_release_at: Option<DateTime<Utc>>,
    #[serde(default)]
    pub last_updated_at: Option<DateTime<Utc>>,
    #[serde(default)]
    pub archive_url: Option<String>,
}

impl PackageRecord {
    pub fn empty(name: &str, ecosystem: Ecosystem) -> Self {
        PackageRecord {
            name: name.to_string(),
            ecosystem,
            description: String::new(),
            downloads: 0,
            stars: 0,
            forks: 0,
            dependents: 0,
            maintainer_count: 0,
            repository_url: None,
            license: None,
            latest_version: None,
            version_count: 0,
            created_at: None,
            last_release_at: None,
            last_updated_at: None,
            archive_url: None,
        }
    }

    pub fn canonical_key(&self) -> String {
        NormalizedName::new(&self.name).key()
    }

    /// True when none of the fields that trigger a remote refresh is known.
    pub fn is_incomplete(&self) -> bool {
        self.created_at.is_none() && self.version_count == 0 && self.downloads == 0
    }

    /// Fill absent or zero fields of `self` from `other`.
    pub fn merged_with(&self, other: &PackageRecord) -> PackageRecord {
        fn count(a: u64, b: u64) -> u64 {
            if a == 0 { b } else { a }
        }
        PackageRecord {
            name: self.name.clone(),
            ecosystem: self.ecosystem,
            description: if self.description.is_empty() { other.description.clone() } else { self.description.clone() },
            downloads: count(self.downloads, other.downloads),
            stars: count(self.stars, other.stars),
            forks: count(self.forks, other.forks),
            dependents: count(self.dependents, other.dependents),
            maintainer_count: count(self.maintainer_count, other.maintainer_count),
            repository_url: self.repository_url.clone().or_else(|| other.repository_url.clone()),
            license: self.license.clone().or_else(|| other.license.clone()),
            latest_version: self.latest_version.clone().or_else(|| other.latest_version.clone()),
            version_count: count(self.version_count, other.version_count),
            created_at: self.created_at.or(other.created_at),
            last_release_at: self.last_release_at.or(other.last_release_at),
            last_updated_at: self.last_updated_at.or(other.last_updated_at),
            archive_url: self.archive_url.clone().or_else(|| other.archive_url.clone()),
        }
    }
}

/// Min/max of `ln(1 + count)` per popularity signal over an ecosystem snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EcosystemStats {
    pub downloads: (f64, f64),
    pub dependents: (f64, f64),
    pub stars: (f64, f64),
    pub forks: (f64, f64),
}

impl Default for EcosystemStats {
    fn default() -> Self {
        EcosystemStats { downloads: (0.0, 0.0), dependents: (0.0, 0.0), stars: (0.0, 0.0), forks: (0.0, 0.0) }
    }
}

impl EcosystemStats {
    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a PackageRecord>) -> Self {
        fn widen(range: &mut Option<(f64, f64)>, count: u64) {
            let x = (count as f64).ln_1p();
            *range = Some(match *range {
                None => (x, x),
                Some((lo, hi)) => (lo.min(x), hi.max(x)),
            });
        }
        let (mut d, mut dep, mut s, mut f) = (None, None, None, None);
        for r in records {
            widen(&mut d, r.downloads);
            widen(&mut dep, r.dependents);
            widen(&mut s, r.stars);
            widen(&mut f, r.forks);
        }
        let z = (0.0, 0.0);
        EcosystemStats {
            downloads: d.unwrap_or(z),
            dependents: dep.unwrap_or(z),
            stars: s.unwrap_or(z),
            forks: f.unwrap_or(z),
        }
    }
}

type StoreKey = (Ecosystem, String);

/// JSONL-backed metadata store keyed by (ecosystem, canonical name).
///
/// A missing file is an empty store. Duplicate keys resolve to the last line.
#[derive(Debug)]
pub struct MetadataStore {
    path: PathBuf,
    records: RwLock<BTreeMap<StoreKey, PackageRecord>>,
    writer: Mutex<()>,
    warnings: Vec<String>,
}

impl MetadataStore {
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let path = path.into();
        let mut records = BTreeMap::new();
        let mut warnings = Vec::new();
        if path.exists() {
            let file = File::open(&path).map_err(|source| StoreError::Io { path: path.clone(), source })?;
            for (idx, line) in BufReader::new(file).lines().enumerate() {
                let line_no = idx + 1;
                let line = line.map_err(|e| StoreError::Corrupt {
                    path: path.clone(),
                    line: line_no,
                    message: e.to_string(),
                })?;
                if line.trim().is_empty() {
                    continue;
                }
                let record: PackageRecord = serde_json::from_str(&line).map_err(|e| StoreError::Corrupt {
                    path: path.clone(),
                    line: line_no,
                    message: e.to_string(),
                })?;
                let key = (record.ecosystem, record.canonical_key());
                if records.insert(key, record).is_some() {
                    let msg = format!("{}: line {line_no} overrides an earlier record with the same key", path.display());
                    log::warn!("{msg}");
                    warnings.push(msg);
                }
            }
        }
        Ok(MetadataStore { path, records: RwLock::new(records), writer: Mutex::new(()), warnings })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn len(&self) -> usize {
        self.records.read().expect("store lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lookup(&self, ecosystem: Ecosystem, name: &str) -> Option<PackageRecord> {
        let key = (ecosystem, NormalizedName::new(name).key());
        self.records.read().expect("store lock poisoned").get(&key).cloned()
    }

    pub fn records(&self, ecosystem: Ecosystem) -> Vec<PackageRecord> {
        self.records
            .read()
            .expect("store lock poisoned")
            .iter()
            .filter(|((eco, _), _)| *eco == ecosystem)
            .map(|(_, r)| r.clone())
            .collect()
    }

    /// Appends the record to the file and makes it visible to lookups.
    pub fn put(&self, record: PackageRecord) -> Result<(), StoreError> {
        let _guard = self.writer.lock().expect("store writer poisoned");
        let line = serde_json::to_string(&record).expect("record serializes");
        if let Some(parent) = self.path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|source| StoreError::Io { path: self.path.clone(), source })?;
        }
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|source| StoreError::Io { path: self.path.clone(), source })?;
        writeln!(file, "{line}").map_err(|source| StoreError::Io { path: self.path.clone(), source })?;
        let key = (record.ecosystem, record.canonical_key());
        self.records.write().expect("store lock poisoned").insert(key, record);
        Ok(())
    }
}

pub const NPM_REGISTRY_ENV: &str = "TYPOGUARD_NPM_REGISTRY";
pub const NPM_DOWNLOADS_ENV: &str = "TYPOGUARD_NPM_DOWNLOADS";
pub const PYPI_API_ENV: &str = "TYPOGUARD_PYPI_API";
pub const CRATES_API_ENV: &str = "TYPOGUARD_CRATES_API";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Endpoints {
    pub npm_registry: String,
    pub npm_downloads: String,
    pub pypi: String,
    pub crates: String,
}

impl Default for Endpoints {
    fn default() -> Self {
        Endpoints {
            npm_registry: "https://registry.npmjs.org".into(),
            npm_downloads: "https://api.npmjs.org/downloads/point/last-month".into(),
            pypi: "https://pypi.org/pypi".into(),
            crates: "https://crates.io".into(),
        }
    }
}

impl Endpoints {
    pub fn from_env() -> Self {
        let d = Endpoints::default();
        let var = |k: &str, default: String| std::env::var(k).map(|v| v.trim_end_matches('/').to_string()).unwrap_or(default);
        Endpoints {
            npm_registry: var(NPM_REGISTRY_ENV, d.npm_registry),
            npm_downloads: var(NPM_DOWNLOADS_ENV, d.npm_downloads),
            pypi: var(PYPI_API_ENV, d.pypi),
            crates: var(CRATES_API_ENV, d.crates),
        }
    }

    /// Points every endpoint at one base URL (test replay servers).
    pub fn all_at(base: &str) -> Self {
        let base = base.trim_end_matches('/');
        Endpoints {
            npm_registry: format!("{base}/npm"),
            npm_downloads: format!("{base}/npm-downloads"),
            pypi: format!("{base}/pypi"),
            crates: format!("{base}/crates"),
        }
    }
}

/// Blocking HTTP client with retry for transient failures.
#[derive(Debug, Clone)]
pub struct RegistryClient {
    agent: ureq::Agent,
    endpoints: Endpoints,
    retries: u32,
    backoff: Duration,
}

impl RegistryClient {
    pub fn new(endpoints: Endpoints) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs(30))
            .user_agent(concat!("typoguard/", env!("CARGO_PKG_VERSION")))
            .build();
        RegistryClient { agent, endpoints, retries: 3, backoff: Duration::from_millis(500) }
    }

    pub fn with_backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }

    pub fn endpoints(&self) -> &Endpoints {
        &self.endpoints
    }

    fn with_retry<T>(&self, mut op: impl FnMut() -> Result<T, FetchError>) -> Result<T, FetchError> {
        let mut delay = self.backoff;
        let mut attempt = 0;
        loop {
            match op() {
                Err(FetchError::Transient(msg)) if attempt < self.retries => {
                    log::debug!("transient failure ({msg}); retrying in {delay:?}");
                    std::thread::sleep(delay);
                    delay *= 2;
                    attempt += 1;
                }
                other => return other,
            }
        }
    }

    fn get_once(&self, url: &str) -> Result<Vec<u8>, FetchError> {
        match self.agent.get(url).call() {
            Ok(resp) => {
                let mut body = Vec::new();
                resp.into_reader()
                    .read_to_end(&mut body)
                    .map_err(|e| FetchError::Transient(format!("{url}: {e}")))?;
                Ok(body)
            }
            Err(ureq::Error::Status(404, _)) => Err(FetchError::NotFound(url.to_string())),
            Err(ureq::Error::Status(code, _)) => Err(FetchError::Transient(format!("{url}: HTTP {code}"))),
            Err(e) => Err(FetchError::Transient(format!("{url}: {e}"))),
        }
    }

    /// GET with retries on transient failures; 404 and parse errors are final.
    pub fn get_bytes(&self, url: &str) -> Result<Vec<u8>, FetchError> {
        self.with_retry(|| self.get_once(url))
    }

    fn get_json(&self, url: &str) -> Result<Value, FetchError> {
        self.with_retry(|| {
            let body = self.get_once(url)?;
            serde_json::from_slice(&body).map_err(|e| FetchError::Parse(format!("{url}: {e}")))
        })
    }

    pub fn fetch_remote(&self, ecosystem: Ecosystem, name: &str) -> Result<PackageRecord, FetchError> {
        match ecosystem {
            Ecosystem::Npm => {
                let doc = self.get_json(&format!("{}/{}", self.endpoints.npm_registry, encode_npm_name(name)))?;
                let mut record = npm_record(&doc, name)?;
                // download counts live on a separate API and are best-effort
                match self.get_json(&format!("{}/{}", self.endpoints.npm_downloads, name)) {
                    Ok(d) => record.downloads = d.get("downloads").and_then(Value::as_u64).unwrap_or(0),
                    Err(e) => log::warn!("npm downloads for {name}: {e}"),
                }
                Ok(record)
            }
            Ecosystem::Pypi => {
                let doc = self.get_json(&format!("{}/{}/json", self.endpoints.pypi, name))?;
                pypi_record(&doc, name)
            }
            Ecosystem::Cargo => {
                let doc = self.get_json(&format!("{}/api/v1/crates/{}", self.endpoints.crates, name))?;
                crates_record(&doc, name, &self.endpoints.crates)
            }
        }
    }
}


fn encode_npm_name(name: &str) -> String {
    name.replace('/', "%2F")
}

fn parse_time(v: Option<&Value>) -> Option<DateTime<Utc>> {
    v.and_then(Value::as_str)
        .and_then(|s| DateTime::parse_from_rfc3339(s).ok().or_else(|| {
            // PyPI upload_time has no offset
            chrono::NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S").ok().map(|n| n.and_utc().fixed_offset())
        }))
        .map(|t| t.with_timezone(&Utc))
}

fn non_empty(s: Option<&str>) -> Option<String> {
    s.map(str::trim).filter(|s| !s.is_empty()).map(str::to_string)
}

fn clean_repo_url(url: &str) -> String {
    url.trim().trim_start_matches("git+").to_string()
}

/// Maps an npm registry package document.
pub fn npm_record(doc: &Value, requested: &str) -> Result<PackageRecord, FetchError> {
    let obj = doc.as_object().ok_or_else(|| FetchError::Parse("npm document is not an object".into()))?;
    let name = obj.get("name").and_then(Value::as_str).unwrap_or(requested);
    let mut r = PackageRecord::empty(name, Ecosystem::Npm);
    r.description = obj.get("description").and_then(Value::as_str).unwrap_or_default().to_string();
    let latest = doc.pointer("/dist-tags/latest").and_then(Value::as_str).map(str::to_string);
    let versions = obj.get("versions").and_then(Value::as_object);
    r.version_count = versions.map_or(0, |v| v.len() as u64);
    r.maintainer_count = obj.get("maintainers").and_then(Value::as_array).map_or(0, |m| m.len() as u64);
    let latest_doc = latest.as_ref().and_then(|l| versions.and_then(|v| v.get(l)));
    let license_of = |v: &Value| match v.get("license") {
        Some(Value::String(s)) => non_empty(Some(s)),
        Some(Value::Object(o)) => non_empty(o.get("type").and_then(Value::as_str)),
        _ => None,
    };
    r.license = license_of(doc).or_else(|| latest_doc.and_then(license_of));
    let repo_of = |v: &Value| match v.get("repository") {
        Some(Value::String(s)) => non_empty(Some(s)).map(|s| clean_repo_url(&s)),
        Some(Value::Object(o)) => non_empty(o.get("url").and_then(Value::as_str)).map(|s| clean_repo_url(&s)),
        _ => None,
    };
    r.repository_url = repo_of(doc).or_else(|| latest_doc.and_then(repo_of));
    r.archive_url = latest_doc.and_then(|d| d.pointer("/dist/tarball")).and_then(Value::as_str).map(str::to_string);
    r.created_at = parse_time(doc.pointer("/time/created"));
    r.last_updated_at = parse_time(doc.pointer("/time/modified"));
    r.last_release_at = latest.as_ref().and_then(|l| parse_time(doc.get("time").and_then(|t| t.get(l))));
    r.latest_version = latest;
    Ok(r)
}

/// Maps a PyPI JSON API document.
pub fn pypi_record(doc: &Value, requested: &str) -> Result<PackageRecord, FetchError> {
    let info = doc.get("info").and_then(Value::as_object).ok_or_else(|| FetchError::Parse("pypi document has no info".into()))?;
    let name = info.get("name").and_then(Value::as_str).unwrap_or(requested);
    let mut r = PackageRecord::empty(name, Ecosystem::Pypi);
    let s = |k: &str| non_empty(info.get(k).and_then(Value::as_str));
    r.description = s("summary").unwrap_or_default();
    r.latest_version = s("version");
    r.license = s("license").filter(|l| l.len() < 100).or_else(|| {
        info.get("classifiers")?.as_array()?.iter().filter_map(Value::as_str).find_map(|c| {
            c.strip_prefix("License :: OSI Approved :: ").map(|l| l.trim_end_matches(" License").to_string())
        })
    });
    r.maintainer_count = ["author", "maintainer", "author_email", "maintainer_email"]
        .iter()
        .filter_map(|k| s(k))
        .collect::<std::collections::BTreeSet<_>>()
        .len()
        .min(2) as u64;
    let urls = info.get("project_urls").and_then(Value::as_object);
    r.repository_url = urls
        .and_then(|u| {
            ["Source", "Source Code", "Repository", "Code", "Homepage"]
                .iter()
                .find_map(|k| non_empty(u.get(*k).and_then(Value::as_str)))
        })
        .or_else(|| s("home_page"));
    r.downloads = info.get("downloads").and_then(|d| d.get("last_month")).and_then(Value::as_i64).unwrap_or(0).max(0) as u64;
    let releases = doc.get("releases").and_then(Value::as_object);
    r.version_count = releases.map_or(0, |m| m.len() as u64);
    let mut times: Vec<DateTime<Utc>> = releases
        .into_iter()
        .flat_map(|m| m.values())
        .filter_map(Value::as_array)
        .flatten()
        .filter_map(|f| parse_time(f.get("upload_time_iso_8601").or_else(|| f.get("upload_time"))))
        .collect();
    times.sort();
    r.created_at = times.first().copied();
    r.last_updated_at = times.last().copied();
    let current = doc.get("urls").and_then(Value::as_array);
    r.last_release_at = current
        .into_iter()
        .flatten()
        .filter_map(|f| parse_time(f.get("upload_time_iso_8601").or_else(|| f.get("upload_time"))))
        .min()
        .or(r.last_updated_at);
    let files: Vec<&Value> = current.into_iter().flatten().collect();
    let pick = |kind: &str| {
        files
            .iter()
            .find(|f| f.get("packagetype").and_then(Value::as_str) == Some(kind))
            .and_then(|f| f.get("url"))
            .and_then(Value::as_str)
            .map(str::to_string)
    };
    r.archive_url = pick("sdist").or_else(|| pick("bdist_wheel"));
    Ok(r)
}

/// Maps a crates.io `/api/v1/crates/<name>` document.
pub fn crates_record(doc: &Value, requested: &str, base: &str) -> Result<PackageRecord, FetchError> {
    let krate = doc.get("crate").and_then(Value::as_object).ok_or_else(|| FetchError::Parse("crates.io document has no crate".into()))?;
    let name = krate.get("name").and_then(Value::as_str).unwrap_or(requested);
    let mut r = PackageRecord::empty(name, Ecosystem::Cargo);
    let s = |k: &str| non_empty(krate.get(k).and_then(Value::as_str));
    r.description = s("description").unwrap_or_default();
    r.downloads = krate.get("downloads").and_then(Value::as_u64).unwrap_or(0);
    r.repository_url = s("repository");
    r.latest_version = s("max_stable_version").or_else(|| s("newest_version")).or_else(|| s("max_version"));
    r.created_at = parse_time(krate.get("created_at"));
    r.last_updated_at = parse_time(krate.get("updated_at"));
    let versions = doc.get("versions").and_then(Value::as_array);
    r.version_count = versions.map_or(0, |v| v.len() as u64);
    let latest = versions.and_then(|vs| {
        vs.iter().find(|v| v.get("num").and_then(Value::as_str) == r.latest_version.as_deref())
    });
    r.license = latest.and_then(|v| non_empty(v.get("license").and_then(Value::as_str)));
    r.last_release_at = latest.and_then(|v| parse_time(v.get("created_at")));
    r.maintainer_count = latest.and_then(|v| v.get("published_by")).map_or(0, |p| u64::from(!p.is_null()));
    r.archive_url = latest
        .and_then(|v| v.get("dl_path"))
        .and_then(Value::as_str)
        .map(|p| format!("{}{p}", base.trim_end_matches('/')));
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Local,
    Remote,
    Merged,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Acquired {
    pub record: PackageRecord,
    pub provenance: Provenance,
}

/// Local store first; registry API when the record is missing or lacks every
/// refresh-trigger field. Remote results are written through to the store.
pub fn acquire(
    store: &MetadataStore,
    client: Option<&RegistryClient>,
    ecosystem: Ecosystem,
    name: &str,
    offline: bool,
) -> Result<Acquired, AcquireError> {
    let local = store.lookup(ecosystem, name);
    let client = match (client, offline) {
        (Some(c), false) => c,
        _ => {
            return local
                .map(|record| Acquired { record, provenance: Provenance::Local })
                .ok_or_else(|| AcquireError::Unavailable { ecosystem: ecosystem.to_string(), name: name.to_string() });
        }
    };
    match local {
        Some(record) if !record.is_incomplete() => Ok(Acquired { record, provenance: Provenance::Local }),
        Some(record) => match client.fetch_remote(ecosystem, name) {
            Ok(remote) => {
                let merged = record.merged_with(&remote);
                store.put(merged.clone())?;
                Ok(Acquired { record: merged, provenance: Provenance::Merged })
            }
            Err(e) => {
                log::warn!("refreshing incomplete record {ecosystem}/{name} failed: {e}");
                Ok(Acquired { record, provenance: Provenance::Local })
            }
        },
        None => {
            let remote = client.fetch_remote(ecosystem, name)?;
            store.put(remote.clone())?;
            Ok(Acquired { record: remote, provenance: Provenance::Remote })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    pub(crate) fn sample(name: &str) -> PackageRecord {
        PackageRecord {
            downloads: 1200,
            stars: 4,
            version_count: 3,
            latest_version: Some("1.0.2".into()),
            repository_url: Some("https://github.com/x/y".into()),
            license: Some("MIT".into()),
            maintainer_count: 1,
            created_at: Some(Utc.with_ymd_and_hms(2020, 1, 2, 3, 4, 5).unwrap()),
            last_release_at: Some(Utc.with_ymd_and_hms(2021, 6, 1, 0, 0, 0).unwrap()),
            ..PackageRecord::empty(name, Ecosystem::Pypi)
        }
    }

    #[test]
    fn store_round_trip_and_absent_lookup() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("meta.jsonl");
        let store = MetadataStore::open(&path).unwrap();
        assert!(store.is_empty());
        let rec = sample("Bz2File");
        store.put(rec.clone()).unwrap();
        assert_eq!(store.lookup(Ecosystem::Pypi, "bz2file"), Some(rec.clone()));
        let reopened = MetadataStore::open(&path).unwrap();
        assert_eq!(reopened.lookup(Ecosystem::Pypi, "BZ2FILE"), Some(rec));
        assert_eq!(reopened.lookup(Ecosystem::Pypi, "nope"), None);
        assert_eq!(reopened.lookup(Ecosystem::Npm, "bz2file"), None);
    }

    #[test]
    fn duplicate_key_last_wins_with_warning() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("meta.jsonl");
        let mut first = sample("dup");
        first.downloads = 1;
        let mut second = sample("DUP");
        second.downloads = 2;
        let body = format!("{}\n{}\n", serde_json::to_string(&first).unwrap(), serde_json::to_string(&second).unwrap());
        std::fs::write(&path, body).unwrap();
        let store = MetadataStore::open(&path).unwrap();
        assert_eq!(store.lookup(Ecosystem::Pypi, "dup").unwrap().downloads, 2);
        assert_eq!(store.warnings().len(), 1);
    }

    #[test]
    fn corrupt_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("meta.jsonl");
        std::fs::write(&path, format!("{}\n{{not json\n", serde_json::to_string(&sample("a")).unwrap())).unwrap();
        match MetadataStore::open(&path) {
            Err(StoreError::Corrupt { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected corrupt error, got {other:?}"),
        }
    }

    #[test]
    fn offline_acquire() {
        let dir = tempfile::tempdir().unwrap();
        let store = MetadataStore::open(dir.path().join("m.jsonl")).unwrap();
        store.put(sample("present")).unwrap();
        let got = acquire(&store, None, Ecosystem::Pypi, "present", true).unwrap();
        assert_eq!(got.provenance, Provenance::Local);
        assert!(matches!(
            acquire(&store, None, Ecosystem::Pypi, "absent", true),
            Err(AcquireError::Unavailable { .. })
        ));
    }

    #[test]
    fn stats_span_records() {
        let mut a = sample("a");
        a.downloads = 0;
        let mut b = sample("b");
        b.downloads = 99;
        let stats = EcosystemStats::from_records([&a, &b]);
        assert_eq!(stats.downloads, (0.0, 100f64.ln()));
        assert_eq!(stats.stars, (5f64.ln(), 5f64.ln()));
    }

    #[test]
    fn npm_mapping() {
        let doc: Value = serde_json::from_str(
            r#"{"name":"left-pad","description":"pad","dist-tags":{"latest":"1.3.0"},
                "versions":{"1.0.0":{},"1.3.0":{"dist":{"tarball":"https://r/left-pad-1.3.0.tgz"},"license":"WTFPL"}},
                "maintainers":[{"name":"a"},{"name":"b"}],
                "repository":{"type":"git","url":"git+https://github.com/stevemao/left-pad.git"},
                "time":{"created":"2014-03-01T00:00:00.000Z","modified":"2020-01-01T00:00:00.000Z","1.3.0":"2018-04-09T00:00:00.000Z"}}"#,
        )
        .unwrap();
        let r = npm_record(&doc, "left-pad").unwrap();
        assert_eq!(r.version_count, 2);
        assert_eq!(r.maintainer_count, 2);
        assert_eq!(r.license.as_deref(), Some("WTFPL"));
        assert_eq!(r.repository_url.as_deref(), Some("https://github.com/stevemao/left-pad.git"));
        assert_eq!(r.archive_url.as_deref(), Some("https://r/left-pad-1.3.0.tgz"));
        assert_eq!(r.latest_version.as_deref(), Some("1.3.0"));
        assert!(r.created_at.unwrap() <= r.last_release_at.unwrap());
        assert!(npm_record(&Value::Null, "x").is_err());
    }

    #[test]
    fn merge_fills_gaps_only() {
        let mut local = PackageRecord::empty("p", Ecosystem::Npm);
        local.stars = 7;
        let remote = sample("p");
        let m = local.merged_with(&remote);
        assert_eq!(m.stars, 7);
        assert_eq!(m.downloads, remote.downloads);
        assert_eq!(m.created_at, remote.created_at);
        assert_eq!(m.ecosystem, Ecosystem::Npm);
    }
}
