use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::chunk::{chunk_grid, chunk_raster, reassemble, Chunk};
use super::raster::{assemble_bundle, BandRaster, TileBundle, TileMetadata};
use super::{Result, TileIoError};
use crate::band::Band;

/// 2264-pixel AWiFS tiles divide into an exact 8x8 grid at this size.
pub const DEFAULT_CHUNK_SIDE: u32 = 283;

/// Contents of `meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredMeta {
    #[serde(flatten)]
    pub metadata: TileMetadata,
    pub width: u32,
    pub height: u32,
    pub chunk_side: u32,
}

/// Location of one stored chunk, relative to the store root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChunkRef {
    pub band: Band,
    pub row_index: u32,
    pub col_index: u32,
    pub path: PathBuf,
}

/// Directory-backed tile store.
///
/// Layout under the root:
/// `tiles/<tile_id>/<YYYY-MM-DD>/meta.json` and
/// `tiles/<tile_id>/<YYYY-MM-DD>/band_<B>/chunk_<row>_<col>.bin`.
///
/// Concurrent readers are fine. Writers for a single tile and date must be
/// serialized by the caller.
#[derive(Debug, Clone)]
pub struct TileStore {
    root: PathBuf,
}

fn io_failure(path: &Path) -> impl FnOnce(std::io::Error) -> TileIoError + '_ {
    move |source| TileIoError::IoFailure { path: path.to_path_buf(), source }
}

/// Writes through a sibling temp file so readers never see a partial file.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

impl TileStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Tile directory relative to the root.
    pub fn tile_rel_dir(tile_id: &str, date: NaiveDate) -> PathBuf {
        Path::new("tiles").join(tile_id).join(date.format("%Y-%m-%d").to_string())
    }

    pub fn tile_dir(&self, tile_id: &str, date: NaiveDate) -> PathBuf {
        self.root.join(Self::tile_rel_dir(tile_id, date))
    }

    pub fn meta_path(&self, tile_id: &str, date: NaiveDate) -> PathBuf {
        self.tile_dir(tile_id, date).join("meta.json")
    }

    pub fn chunk_rel_path(tile_id: &str, date: NaiveDate, band: Band, row: u32, col: u32) -> PathBuf {
        Self::tile_rel_dir(tile_id, date)
            .join(format!("band_{band}"))
            .join(format!("chunk_{row}_{col}.bin"))
    }

    pub fn contains(&self, tile_id: &str, date: NaiveDate) -> bool {
        self.meta_path(tile_id, date).is_file()
    }

    pub fn read_meta(&self, tile_id: &str, date: NaiveDate) -> Result<StoredMeta> {
        let path = self.meta_path(tile_id, date);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == ErrorKind::NotFound => {
                return Err(TileIoError::NotFound { tile_id: tile_id.to_string(), capture_date: date })
            }
            Err(e) => return Err(io_failure(&path)(e)),
        };
        serde_json::from_str(&text)
            .map_err(|e| io_failure(&path)(std::io::Error::new(ErrorKind::InvalidData, e)))
    }

    fn refs_for(meta: &StoredMeta) -> Vec<ChunkRef> {
        let id = &meta.metadata.tile_id;
        let date = meta.metadata.capture_date;
        let grid = chunk_grid(meta.width, meta.height, meta.chunk_side);
        Band::ALL
            .iter()
            .flat_map(|&band| {
                grid.iter().map(move |r| ChunkRef {
                    band,
                    row_index: r.row_index,
                    col_index: r.col_index,
                    path: Self::chunk_rel_path(id, date, band, r.row_index, r.col_index),
                })
            })
            .collect()
    }

    /// Chunks, compresses and writes all four bands plus `meta.json`.
    ///
    /// Storing identical content again is a no-op. `meta.json` is written
    /// last, so its presence marks a complete tile.
    pub fn store_tile(&self, bundle: &TileBundle, chunk_side: u32) -> Result<Vec<ChunkRef>> {
        assert!(chunk_side >= 1, "chunk_side must be at least 1");
        let md = bundle.metadata();
        let (id, date) = (md.tile_id.as_str(), md.capture_date);

        if self.contains(id, date) {
            let existing = self.load_tile(id, date)?;
            if &existing != bundle {
                return Err(TileIoError::AlreadyExistsWithDifferentContent {
                    tile_id: id.to_string(),
                    capture_date: date,
                });
            }
            return Ok(Self::refs_for(&self.read_meta(id, date)?));
        }

        let meta = StoredMeta {
            metadata: md.clone(),
            width: bundle.width(),
            height: bundle.height(),
            chunk_side,
        };
        for band in Band::ALL {
            let dir = self.tile_dir(id, date).join(format!("band_{band}"));
            fs::create_dir_all(&dir).map_err(io_failure(&dir))?;
        }
        Band::ALL.par_iter().try_for_each(|&band| {
            chunk_raster(bundle.band(band), chunk_side).par_iter().try_for_each(|c| {
                let path = self.root.join(Self::chunk_rel_path(id, date, band, c.row_index, c.col_index));
                write_atomic(&path, &c.to_bytes()).map_err(io_failure(&path))
            })
        })?;
        let meta_path = self.meta_path(id, date);
        let json = serde_json::to_string_pretty(&meta).expect("meta serializes");
        write_atomic(&meta_path, json.as_bytes()).map_err(io_failure(&meta_path))?;
        Ok(Self::refs_for(&meta))
    }

    /// Reads and verifies every chunk, reassembling the original bundle.
    pub fn load_tile(&self, tile_id: &str, date: NaiveDate) -> Result<TileBundle> {
        let meta = self.read_meta(tile_id, date)?;
        let bits = meta.metadata.radiometric_bits;
        let grid = chunk_grid(meta.width, meta.height, meta.chunk_side);
        let rasters = Band::ALL
            .par_iter()
            .map(|&band| {
                let pieces = grid
                    .par_iter()
                    .map(|rect| {
                        let path = self.root.join(Self::chunk_rel_path(tile_id, date, band, rect.row_index, rect.col_index));
                        let bad = |reason: String| TileIoError::ChecksumMismatch { chunk: path.clone(), reason };
                        let bytes = match fs::read(&path) {
                            Ok(b) => b,
                            Err(e) if e.kind() == ErrorKind::NotFound => return Err(bad("chunk file missing".into())),
                            Err(e) => return Err(io_failure(&path)(e)),
                        };
                        let chunk = Chunk::from_bytes(&bytes, rect.row_index, rect.col_index).map_err(bad)?;
                        if (chunk.width, chunk.height) != (rect.width, rect.height) {
                            return Err(bad(format!(
                                "header says {}x{}, grid expects {}x{}",
                                chunk.width, chunk.height, rect.width, rect.height
                            )));
                        }
                        let px = chunk.decode().map_err(bad)?;
                        Ok((*rect, px))
                    })
                    .collect::<Result<Vec<_>>>()?;
                BandRaster::new(band, meta.width, meta.height, bits, reassemble(meta.width, meta.height, &pieces))
            })
            .collect::<Result<Vec<_>>>()?;
        assemble_bundle(rasters, meta.metadata)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bundle(w: u32, h: u32, salt: u16) -> TileBundle {
        let meta = TileMetadata {
            tile_id: "NE43I".into(),
            capture_date: NaiveDate::from_ymd_opt(2013, 1, 8).unwrap(),
            center_latitude: 22.0,
            center_longitude: 76.0,
            acquisition_time: Some(10.5),
            radiometric_bits: 12,
        };
        let rasters = Band::ALL
            .iter()
            .map(|&b| {
                let dn = (0..w * h).map(|i| ((i * 7 + b.index() as u32 * 13) % 4096) as u16 ^ salt).collect();
                BandRaster::new(b, w, h, 12, dn).unwrap()
            })
            .collect();
        assemble_bundle(rasters, meta).unwrap()
    }

    fn count_chunks(root: &Path) -> usize {
        let mut n = 0;
        let mut stack = vec![root.to_path_buf()];
        while let Some(d) = stack.pop() {
            for e in fs::read_dir(d).unwrap() {
                let p = e.unwrap().path();
                if p.is_dir() {
                    stack.push(p);
                } else if p.extension().is_some_and(|x| x == "bin") {
                    n += 1;
                }
            }
        }
        n
    }

    #[test]
    fn store_and_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let store = TileStore::new(dir.path());
        let b = bundle(50, 37, 0);
        let refs = store.store_tile(&b, 16).unwrap();
        assert_eq!(refs.len(), 4 * 4 * 3);
        assert_eq!(count_chunks(dir.path()), refs.len());
        assert!(refs.iter().all(|r| dir.path().join(&r.path).is_file()));
        let back = store.load_tile("NE43I", b.metadata().capture_date).unwrap();
        assert_eq!(back, b);
    }

    #[test]
    fn arbitrary_float_metadata_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let store = TileStore::new(dir.path());
        let b = bundle(5, 3, 0);
        let mut md = b.metadata().clone();
        md.center_latitude = 0.1f64 + 0.2;
        md.center_longitude = -151.30587244612178;
        md.acquisition_time = Some(10.123456789012345);
        let b = assemble_bundle(Band::ALL.iter().map(|&x| b.band(x).clone()).collect(), md).unwrap();
        store.store_tile(&b, 2).unwrap();
        assert_eq!(store.load_tile("NE43I", b.metadata().capture_date).unwrap(), b);
    }

    #[test]
    fn meta_json_has_expected_keys() {
        let dir = tempfile::tempdir().unwrap();
        let store = TileStore::new(dir.path());
        let b = bundle(8, 8, 0);
        store.store_tile(&b, 4).unwrap();
        let text = fs::read_to_string(store.meta_path("NE43I", b.metadata().capture_date)).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        for key in [
            "tile_id",
            "capture_date",
            "center_latitude",
            "center_longitude",
            "acquisition_time",
            "radiometric_bits",
            "width",
            "height",
            "chunk_side",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["capture_date"], "2013-01-08");
    }

    #[test]
    fn idempotent_store_and_conflict() {
        let dir = tempfile::tempdir().unwrap();
        let store = TileStore::new(dir.path());
        let b = bundle(20, 20, 0);
        let first = store.store_tile(&b, 8).unwrap();
        let second = store.store_tile(&b, 8).unwrap();
        assert_eq!(first, second);
        let altered = bundle(20, 20, 1);
        assert!(matches!(
            store.store_tile(&altered, 8),
            Err(TileIoError::AlreadyExistsWithDifferentContent { .. })
        ));
    }

    #[test]
    fn unknown_tile_is_not_found() {
        let dir = tempfile::tempdir().unwrap();
        let store = TileStore::new(dir.path());
        assert!(matches!(
            store.load_tile("XX00X", NaiveDate::from_ymd_opt(2012, 1, 1).unwrap()),
            Err(TileIoError::NotFound { .. })
        ));
    }

    #[test]
    fn truncated_chunk_is_checksum_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let store = TileStore::new(dir.path());
        let b = bundle(30, 30, 0);
        let refs = store.store_tile(&b, 10).unwrap();
        let victim = dir.path().join(&refs[5].path);
        let bytes = fs::read(&victim).unwrap();
        fs::write(&victim, &bytes[..bytes.len() - 3]).unwrap();
        match store.load_tile("NE43I", b.metadata().capture_date) {
            Err(TileIoError::ChecksumMismatch { chunk, .. }) => assert_eq!(chunk, victim),
            other => panic!("unexpected {other:?}"),
        }
    }
}
