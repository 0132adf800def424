//! Full-size tile path: TIFF files on disk through the chunked store.

use std::path::Path;

use awcbir::pipeline::{ingest, Timings};
use awcbir::tile_io::{BandRaster, TileMetadata, TileStore, DEFAULT_CHUNK_SIDE};
use awcbir::Band;
use chrono::NaiveDate;

fn count_files(dir: &Path, ext: &str) -> usize {
    let mut n = 0;
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|x| x == ext) {
                n += 1;
            }
        }
    }
    n
}

#[test]
fn awifs_sized_tile_makes_256_chunks_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let side = 2264u32;
    let meta = TileMetadata {
        tile_id: "NH44N".into(),
        capture_date: NaiveDate::from_ymd_opt(2013, 5, 9).unwrap(),
        center_latitude: 27.0,
        center_longitude: 81.0,
        acquisition_time: None,
        radiometric_bits: 12,
    };
    let mut paths = Vec::new();
    let mut rasters = Vec::new();
    for b in Band::ALL {
        let dn: Vec<u16> = (0..side * side).map(|i| ((i / 7 + 311 * b.index() as u32) % 4096) as u16).collect();
        let r = BandRaster::new(b, side, side, 12, dn).unwrap();
        let p = dir.path().join(format!("{b}.tif"));
        r.write_tiff(&p).unwrap();
        paths.push(p);
        rasters.push(r);
    }
    let store = TileStore::new(dir.path().join("store"));
    let refs = ingest(&store, &paths.try_into().unwrap(), meta.clone(), DEFAULT_CHUNK_SIDE, &mut Timings::default()).unwrap();
    assert_eq!(refs.len(), 256);
    assert_eq!(count_files(store.root(), "bin"), 256);

    let loaded = store.load_tile(&meta.tile_id, meta.capture_date).unwrap();
    for r in &rasters {
        assert_eq!(loaded.band(r.band()).dn(), r.dn());
    }
}
