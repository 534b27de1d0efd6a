//! Package archive profiling: size, file manifest, dependency set and an
//! aggregated code vector.

use std::collections::BTreeSet;
use std::io::{Cursor, Read};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::ContentError;
use crate::namevec::{aggregate_package_vector, EmbeddingProvider, NameVector};
use crate::registry::{Ecosystem, PackageRecord, RegistryClient};

pub const MAX_SOURCE_BYTES: u64 = 1 << 20;
pub const MAX_SOURCE_FILES: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContentProfile {
    pub total_size_bytes: u64,
    pub file_paths: BTreeSet<String>,
    pub dependency_names: BTreeSet<String>,
    pub code_vector: Option<NameVector>,
    pub source_file_count: usize,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// `|A ∩ B| / |A ∪ B|`, 1.0 for two empty sets.
pub fn set_jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let shared = a.intersection(b).count();
    shared as f64 / (a.len() + b.len() - shared) as f64
}

fn sanitize(component: &str) -> String {
    component
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "._-@".contains(c) { c } else { '_' })
        .collect()
}

/// `<cache>/<ecosystem>/<name>/<version>/<archive file>`.
pub fn cache_path(cache_dir: &Path, record: &PackageRecord) -> Result<PathBuf, ContentError> {
    let url = record
        .archive_url
        .as_deref()
        .ok_or_else(|| ContentError::Unavailable(format!("{} has no archive URL", record.name)))?;
    let file = url.rsplit('/').next().filter(|s| !s.is_empty()).unwrap_or("archive");
    let file = file.split(['?', '#']).next().unwrap_or(file);
    Ok(cache_dir
        .join(record.ecosystem.as_str())
        .join(sanitize(&record.name))
        .join(sanitize(record.latest_version.as_deref().unwrap_or("unknown")))
        .join(sanitize(file)))
}

/// Returns the cached archive, downloading it first when a client is given.
pub fn fetch_archive(
    record: &PackageRecord,
    cache_dir: &Path,
    client: Option<&RegistryClient>,
) -> Result<PathBuf, ContentError> {
    let path = cache_path(cache_dir, record)?;
    if std::fs::metadata(&path).map(|m| m.len() > 0).unwrap_or(false) {
        return Ok(path);
    }
    let client = client.ok_or_else(|| ContentError::Unavailable(format!("{} is not cached and network is disabled", path.display())))?;
    let url = record.archive_url.as_deref().expect("checked by cache_path");
    let bytes = client.get_bytes(url).map_err(|e| ContentError::Unavailable(e.to_string()))?;
    if bytes.is_empty() {
        return Err(ContentError::Unavailable(format!("{url} returned an empty body")));
    }
    let dir = path.parent().expect("cache path has a parent");
    std::fs::create_dir_all(dir).map_err(|e| ContentError::Unavailable(e.to_string()))?;
    let tmp = dir.join(format!(".{}.partial", std::process::id()));
    std::fs::write(&tmp, &bytes).map_err(|e| ContentError::Unavailable(e.to_string()))?;
    std::fs::rename(&tmp, &path).map_err(|e| ContentError::Unavailable(e.to_string()))?;
    Ok(path)
}

struct Member {
    path: String,
    size: u64,
    data: Option<Vec<u8>>,
}

fn wanted(path: &str, ecosystem: Ecosystem) -> bool {
    let lower = path.to_ascii_lowercase();
    let file = lower.rsplit('/').next().unwrap_or(&lower);
    is_source(&lower, ecosystem)
        || matches!(file, "package.json" | "cargo.toml" | "pkg-info" | "metadata" | "requires.txt" | "requirements.txt")
}

fn read_member(reader: &mut impl Read, size: u64, path: &str, ecosystem: Ecosystem) -> Result<Option<Vec<u8>>, std::io::Error> {
    if size > MAX_SOURCE_BYTES || !wanted(path, ecosystem) {
        return Ok(None);
    }
    let mut buf = Vec::with_capacity(size as usize);
    reader.take(MAX_SOURCE_BYTES + 1).read_to_end(&mut buf)?;
    Ok(Some(buf))
}

fn read_tar_gz(bytes: &[u8], ecosystem: Ecosystem) -> Result<Vec<Member>, String> {
    let mut archive = tar::Archive::new(GzDecoder::new(bytes));
    let mut out = Vec::new();
    for entry in archive.entries().map_err(|e| e.to_string())? {
        let mut entry = entry.map_err(|e| e.to_string())?;
        if !entry.header().entry_type().is_file() {
            continue;
        }
        let path = entry.path().map_err(|e| e.to_string())?.to_string_lossy().into_owned();
        let size = entry.header().size().map_err(|e| e.to_string())?;
        let data = read_member(&mut entry, size, &path, ecosystem).map_err(|e| e.to_string())?;
        out.push(Member { path, size, data });
    }
    Ok(out)
}

fn read_zip(bytes: &[u8], ecosystem: Ecosystem) -> Result<Vec<Member>, String> {
    let mut archive = zip::ZipArchive::new(Cursor::new(bytes)).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    for i in 0..archive.len() {
        let mut file = archive.by_index(i).map_err(|e| e.to_string())?;
        if !file.is_file() {
            continue;
        }
        let path = file.name().to_string();
        let size = file.size();
        let data = read_member(&mut file, size, &path, ecosystem).map_err(|e| e.to_string())?;
        out.push(Member { path, size, data });
    }
    Ok(out)
}

fn normalize_path(p: &str) -> String {
    let p = p.replace('\\', "/");
    p.split('/')
        .filter(|c| !c.is_empty() && *c != ".")
        .collect::<Vec<_>>()
        .join("/")
}

/// Drops the single top-level directory when every member lives under it.
fn strip_root(paths: &mut [String]) {
    let root = match paths.first().and_then(|p| p.split_once('/')) {
        Some((root, _)) => root.to_string(),
        None => return,
    };
    let prefix = format!("{root}/");
    if paths.iter().all(|p| p.starts_with(&prefix)) {
        for p in paths.iter_mut() {
            *p = p[prefix.len()..].to_string();
        }
    }
}

fn is_source(path: &str, ecosystem: Ecosystem) -> bool {
    let ext = path.rsplit_once('.').map(|(_, e)| e.to_ascii_lowercase());
    let ext = ext.as_deref().unwrap_or("");
    match ecosystem {
        Ecosystem::Npm => matches!(ext, "js" | "mjs" | "cjs" | "ts"),
        Ecosystem::Pypi => ext == "py",
        Ecosystem::Cargo => ext == "rs",
    }
}

/// Lowercased requirement name with `_` folded to `-`.
pub fn requirement_name(spec: &str) -> Option<String> {
    let name: String = spec
        .trim()
        .chars()
        .take_while(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
        .collect();
    if name.is_empty() {
        None
    } else {
        Some(name.to_ascii_lowercase().replace('_', "-"))
    }
}

fn npm_dependencies(manifest: &str) -> Result<BTreeSet<String>, String> {
    let doc: Value = serde_json::from_str(manifest).map_err(|e| format!("package.json: {e}"))?;
    let mut deps = BTreeSet::new();
    for table in ["dependencies", "peerDependencies"] {
        if let Some(obj) = doc.get(table).and_then(Value::as_object) {
            deps.extend(obj.keys().map(|k| k.to_lowercase()));
        }
    }
    Ok(deps)
}

fn pypi_metadata_dependencies(metadata: &str) -> BTreeSet<String> {
    metadata
        .lines()
        .filter_map(|l| l.strip_prefix("Requires-Dist:"))
        .filter_map(requirement_name)
        .collect()
}

fn pypi_requirements(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty() && !l.starts_with('[') && !l.starts_with('-'))
        .filter_map(requirement_name)
        .collect()
}

fn cargo_dependencies(manifest: &str) -> Result<BTreeSet<String>, String> {
    let doc: toml::Table = manifest.parse().map_err(|e| format!("Cargo.toml: {e}"))?;
    let mut deps = BTreeSet::new();
    let mut take = |t: Option<&toml::Value>| {
        if let Some(t) = t.and_then(toml::Value::as_table) {
            deps.extend(t.keys().map(|k| k.to_lowercase()));
        }
    };
    take(doc.get("dependencies"));
    if let Some(targets) = doc.get("target").and_then(toml::Value::as_table) {
        for cfg in targets.values() {
            take(cfg.get("dependencies"));
        }
    }
    Ok(deps)
}

fn dependency_names(members: &[(String, &Member)], ecosystem: Ecosystem, warnings: &mut Vec<String>) -> BTreeSet<String> {
    let text = |pred: &dyn Fn(&str) -> bool| {
        members
            .iter()
            .filter(|(p, _)| pred(p))
            .min_by_key(|(p, _)| (p.matches('/').count(), p.clone()))
            .and_then(|(_, m)| m.data.as_ref())
            .map(|d| String::from_utf8_lossy(d).into_owned())
    };
    let parsed = match ecosystem {
        Ecosystem::Npm => text(&|p| p == "package.json").map(|t| npm_dependencies(&t)),
        Ecosystem::Cargo => text(&|p| p == "Cargo.toml").map(|t| cargo_dependencies(&t)),
        Ecosystem::Pypi => {
            let wheel_meta = text(&|p| p.ends_with(".dist-info/METADATA"));
            let requires = text(&|p| p.ends_with(".egg-info/requires.txt"));
            let reqs = text(&|p| p == "requirements.txt");
            let pkg_info = text(&|p| p == "PKG-INFO");
            let from_meta = wheel_meta.or(pkg_info).map(|m| pypi_metadata_dependencies(&m)).filter(|d| !d.is_empty());
            from_meta
                .or_else(|| requires.map(|r| pypi_requirements(&r)))
                .or_else(|| reqs.map(|r| pypi_requirements(&r)))
                .map(Ok)
        }
    };
    match parsed {
        Some(Ok(deps)) => deps,
        Some(Err(e)) => {
            warnings.push(format!("unparseable manifest ({e}); dependency set left empty"));
            BTreeSet::new()
        }
        None => {
            warnings.push("no dependency manifest found; dependency set left empty".into());
            BTreeSet::new()
        }
    }
}

/// Profiles a gzip-tar or zip archive held in memory.
pub fn profile_bytes(bytes: &[u8], ecosystem: Ecosystem, provider: &EmbeddingProvider) -> Result<ContentProfile, ContentError> {
    let members = if bytes.starts_with(b"PK\x03\x04") {
        read_zip(bytes, ecosystem)
    } else {
        read_tar_gz(bytes, ecosystem)
    }
    .map_err(|e| ContentError::Unavailable(format!("unreadable archive: {e}")))?;
    if members.is_empty() {
        return Err(ContentError::Unavailable("archive contains no files".into()));
    }
    let mut paths: Vec<String> = members.iter().map(|m| normalize_path(&m.path)).collect();
    strip_root(&mut paths);
    let mut named: Vec<(String, &Member)> = paths.into_iter().zip(members.iter()).collect();
    named.sort_by(|a, b| a.0.cmp(&b.0));

    let mut warnings = Vec::new();
    let dependency_names = dependency_names(&named, ecosystem, &mut warnings);

    let mut source_file_count = 0;
    let mut vectors = Vec::new();
    for (path, member) in &named {
        if !is_source(path, ecosystem) {
            continue;
        }
        source_file_count += 1;
        if source_file_count > MAX_SOURCE_FILES {
            continue;
        }
        let Some(data) = member.data.as_ref() else {
            warnings.push(format!("{path}: larger than 1 MiB, not embedded"));
            continue;
        };
        let Ok(text) = std::str::from_utf8(data) else {
            warnings.push(format!("{path}: not UTF-8, not embedded"));
            continue;
        };
        match provider.embed_code_file(text) {
            Ok(v) => vectors.push(v),
            Err(e) => warnings.push(format!("{path}: {e}")),
        }
    }
    let code_vector = if vectors.is_empty() {
        if source_file_count > 0 {
            warnings.push("no embeddable source files; code vector absent".into());
        }
        None
    } else {
        aggregate_package_vector(&vectors).ok()
    };
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(ContentProfile {
        total_size_bytes: named.iter().map(|(_, m)| m.size).sum(),
        file_paths: named.iter().map(|(p, _)| p.clone()).collect(),
        dependency_names,
        code_vector,
        source_file_count,
        warnings,
    })
}

pub fn profile_archive(path: &Path, ecosystem: Ecosystem, provider: &EmbeddingProvider) -> Result<ContentProfile, ContentError> {
    let bytes = std::fs::read(path).map_err(|e| ContentError::Unavailable(format!("{}: {e}", path.display())))?;
    profile_bytes(&bytes, ecosystem, provider)
}

/// Archive builders for fixtures and tests.
pub mod fixture {
    use std::io::Write;

    use flate2::write::GzEncoder;
    use flate2::Compression;

    /// gzip-tar with a fixed mtime so output bytes are reproducible.
    pub fn tar_gz(files: &[(&str, &[u8])]) -> Vec<u8> {
        let mut builder = tar::Builder::new(GzEncoder::new(Vec::new(), Compression::default()));
        for (path, data) in files {
            let mut header = tar::Header::new_gnu();
            header.set_size(data.len() as u64);
            header.set_mode(0o644);
            header.set_mtime(0);
            header.set_cksum();
            builder.append_data(&mut header, path, *data).expect("in-memory tar");
        }
        builder.into_inner().and_then(|gz| gz.finish()).expect("in-memory gzip")
    }

    pub fn zip(files: &[(&str, &[u8])]) -> Vec<u8> {
        let mut writer = zip::ZipWriter::new(std::io::Cursor::new(Vec::new()));
        let opts = zip::write::FileOptions::default().compression_method(zip::CompressionMethod::Deflated);
        for (path, data) in files {
            writer.start_file(*path, opts).expect("in-memory zip");
            writer.write_all(data).expect("in-memory zip");
        }
        writer.finish().expect("in-memory zip").into_inner()
    }
}
