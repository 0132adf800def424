//! Per-tile analysis records: append-only log, filtered queries, and
//! similarity ranking.

mod log;
mod query;
mod similarity;

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;

pub use log::{format_percent, parse_line, record_line};
pub use query::{PercentInterval, Query};
pub use similarity::{intersection_over_union, rank, similarity, SimilarityWeights};

pub const CATALOG_FILE: &str = "catalog.log";

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("record {tile_id} {capture_date} already present with different content")]
    DuplicateKeyDifferentContent { tile_id: String, capture_date: NaiveDate },
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("invalid similarity weights: {0}")]
    InvalidWeights(String),
    #[error("cannot read sparse feature vector {path}: {reason}")]
    SfvUnreadable { path: PathBuf, reason: String },
    #[error("catalog line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error("I/O failure at {path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = CatalogError> = std::result::Result<T, E>;

/// Analysis summary of one tile on one date.
///
/// Percentages are `None` when that segmentation has not been run.
/// References are paths relative to the store root.
#[derive(Debug, Clone, PartialEq)]
pub struct CatalogRecord {
    pub tile_id: String,
    pub capture_date: NaiveDate,
    pub water_percent: Option<f64>,
    pub burnt_percent: Option<f64>,
    pub water_sfv_ref: Option<String>,
    pub burnt_sfv_ref: Option<String>,
    pub mask_refs: Vec<String>,
    pub total_pixels: u64,
}

/// Catalog key: `(tile_id, capture_date)`.
pub type RecordKey = (String, NaiveDate);

impl CatalogRecord {
    pub fn key(&self) -> RecordKey {
        (self.tile_id.clone(), self.capture_date)
    }

    fn refs(&self) -> impl Iterator<Item = &String> {
        self.water_sfv_ref.iter().chain(&self.burnt_sfv_ref).chain(&self.mask_refs)
    }

    /// Field-level invariants; file existence is checked on insert.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CatalogError::InvalidRecord(m));
        if self.tile_id.is_empty() || !self.tile_id.chars().all(|c| c.is_ascii_alphanumeric()) {
            return bad(format!("tile_id {:?} must be non-empty alphanumeric", self.tile_id));
        }
        for (name, p) in [("water_percent", self.water_percent), ("burnt_percent", self.burnt_percent)] {
            if let Some(v) = p {
                if !(0.0..=100.0).contains(&v) {
                    return bad(format!("{name} {v} outside [0, 100]"));
                }
            }
        }
        for r in self.refs() {
            if r.is_empty() || r.contains(['\t', '\n', '\r', ',']) {
                return bad(format!("reference {r:?} is empty or contains a separator"));
            }
            if Path::new(r).is_absolute() {
                return bad(format!("reference {r:?} must be relative to the store root"));
            }
        }
        Ok(())
    }
}

/// In-memory index over `catalog.log`.
///
/// One writer at a time; readers see the state as of [`Catalog::open`] or
/// the last [`Catalog::refresh`].
#[derive(Debug)]
pub struct Catalog {
    root: PathBuf,
    records: BTreeMap<RecordKey, CatalogRecord>,
    // Bytes of the log covered by complete lines at the last replay.
    log_len: u64,
}

impl Catalog {
    /// Opens the catalog under `store_root`, replaying the log. A missing log
    /// is an empty catalog.
    pub fn open(store_root: impl Into<PathBuf>) -> Result<Self> {
        let mut c = Self { root: store_root.into(), records: BTreeMap::new(), log_len: 0 };
        c.refresh()?;
        Ok(c)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn log_path(&self) -> PathBuf {
        self.root.join(CATALOG_FILE)
    }

    pub fn refresh(&mut self) -> Result<()> {
        (self.records, self.log_len) = log::replay(&self.log_path())?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, tile_id: &str, capture_date: NaiveDate) -> Option<&CatalogRecord> {
        self.records.get(&(tile_id.to_string(), capture_date))
    }

    /// All records in `(tile_id, capture_date)` order.
    pub fn records(&self) -> impl Iterator<Item = &CatalogRecord> {
        self.records.values()
    }

    fn check_refs_exist(&self, record: &CatalogRecord) -> Result<()> {
        for r in record.refs() {
            if !self.root.join(r).is_file() {
                return Err(CatalogError::InvalidRecord(format!("referenced file {r} does not exist")));
            }
        }
        Ok(())
    }

    fn append(&mut self, record: CatalogRecord) -> Result<()> {
        let path = self.log_path();
        let io = |source| CatalogError::IoFailure { path: path.clone(), source };
        let mut f: File = OpenOptions::new().create(true).read(true).append(true).open(&path).map_err(io)?;
        let len = f.metadata().map_err(io)?.len();
        if len != self.log_len {
            // A torn final line from an interrupted write is dropped before
            // appending; anything else means another writer got in.
            let mut tail = Vec::new();
            f.seek(SeekFrom::Start(self.log_len)).map_err(io)?;
            f.read_to_end(&mut tail).map_err(io)?;
            if len < self.log_len || tail.contains(&b'\n') {
                return Err(CatalogError::Corrupt {
                    line: 0,
                    message: "log changed since it was opened; refresh before writing".into(),
                });
            }
            f.set_len(self.log_len).map_err(io)?;
        }
        let line = record_line(&record);
        f.write_all(line.as_bytes()).map_err(io)?;
        f.sync_data().map_err(io)?;
        self.log_len += line.len() as u64;
        self.records.insert(record.key(), record);
        Ok(())
    }

    /// Adds a record. Re-inserting identical content is a no-op; the same
    /// key with different content is rejected.
    pub fn insert_record(&mut self, record: CatalogRecord) -> Result<()> {
        record.validate()?;
        self.check_refs_exist(&record)?;
        match self.records.get(&record.key()) {
            Some(existing) if *existing == record => Ok(()),
            Some(_) => Err(CatalogError::DuplicateKeyDifferentContent {
                tile_id: record.tile_id,
                capture_date: record.capture_date,
            }),
            None => self.append(record),
        }
    }

    /// Adds or replaces a record. A replacement is appended to the log and
    /// supersedes earlier lines for the same key on replay.
    pub fn upsert_record(&mut self, record: CatalogRecord) -> Result<()> {
        record.validate()?;
        self.check_refs_exist(&record)?;
        match self.records.get(&record.key()) {
            Some(existing) if *existing == record => Ok(()),
            _ => self.append(record),
        }
    }

    /// Records satisfying every filter present in `q`, in key order.
    pub fn query(&self, q: &Query) -> Vec<CatalogRecord> {
        let range = match q.tile_id() {
            Some(id) => {
                let lo = (id.to_string(), NaiveDate::MIN);
                let hi = (id.to_string(), NaiveDate::MAX);
                self.records.range(lo..=hi)
            }
            None => self.records.range(..),
        };
        range.map(|(_, r)| r).filter(|r| q.matches(r)).cloned().collect()
    }
}
