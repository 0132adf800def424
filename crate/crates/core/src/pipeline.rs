//! Store-level operations: ingest band files, segment a stored tile into
//! masks, SFVs and a catalog record, and export masks.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use chrono::NaiveDate;

use crate::band::Band;
use crate::catalog::{Catalog, CatalogError, CatalogRecord};
use crate::dss::{self, BurntStats, DssError, MaskKind, SegmentationMask, ThresholdTable, WaterStats};
use crate::features::{FeatureConfig, FeatureError, SparseFeatureVector};
use crate::radiometry::{calibrate_tile, tile_geometry, CalibrationSet, RadiometryError};
use crate::tile_io::store::write_atomic;
use crate::tile_io::{assemble_bundle, load_band_raster, ChunkRef, TileIoError, TileMetadata, TileStore};

pub const WATER_MASK_FILE: &str = "water_mask.pgm";
pub const WATER_SFV_FILE: &str = "water.sfv";
pub const BURNT_MASK_FILE: &str = "burnt_mask.pgm";
pub const BURNT_SFV_FILE: &str = "burnt.sfv";

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    TileIo(#[from] TileIoError),
    #[error(transparent)]
    Radiometry(#[from] RadiometryError),
    #[error(transparent)]
    Dss(#[from] DssError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error("band {band}: {source}")]
    BandInput {
        band: Band,
        #[source]
        source: TileIoError,
    },
    #[error("no {kind} mask stored for {tile_id} {capture_date}")]
    MaskMissing { kind: MaskKind, tile_id: String, capture_date: NaiveDate },
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Water,
    Burnt,
    Both,
}

impl Target {
    pub fn water(self) -> bool {
        matches!(self, Target::Water | Target::Both)
    }

    pub fn burnt(self) -> bool {
        matches!(self, Target::Burnt | Target::Both)
    }
}

impl FromStr for Target {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "water" => Ok(Target::Water),
            "burnt" => Ok(Target::Burnt),
            "both" => Ok(Target::Both),
            _ => Err(format!("unknown target {s:?}; expected water, burnt or both")),
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Target::Water => "water",
            Target::Burnt => "burnt",
            Target::Both => "both",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskFormat {
    Pgm,
    Tiff,
}

impl FromStr for MaskFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "pgm" => Ok(MaskFormat::Pgm),
            "tiff" | "tif" => Ok(MaskFormat::Tiff),
            _ => Err(format!("unknown mask format {s:?}; expected pgm or tiff")),
        }
    }
}

/// Wall-clock milliseconds per named stage.
#[derive(Debug, Clone, Default)]
pub struct Timings(pub Vec<(&'static str, u128)>);

impl Timings {
    fn time<T>(&mut self, stage: &'static str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.0.push((stage, start.elapsed().as_millis()));
        out
    }
}

/// Loads four band files plus metadata and stores the tile.
pub fn ingest(
    store: &TileStore,
    band_paths: &[PathBuf; 4],
    meta: TileMetadata,
    chunk_side: u32,
    timings: &mut Timings,
) -> Result<Vec<ChunkRef>> {
    meta.validate()?;
    let rasters = timings.time("load", || {
        Band::ALL
            .iter()
            .zip(band_paths)
            .map(|(b, p)| {
                load_band_raster(p, *b, meta.radiometric_bits)
                    .map_err(|source| PipelineError::BandInput { band: *b, source })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let bundle = assemble_bundle(rasters, meta)?;
    Ok(timings.time("store", || store.store_tile(&bundle, chunk_side))?)
}

#[derive(Debug, Clone)]
pub struct SegmentOptions {
    pub target: Target,
    pub calibration: CalibrationSet,
    pub thresholds: ThresholdTable,
    pub features: FeatureConfig,
}

#[derive(Debug, Clone)]
pub struct SegmentOutcome {
    pub record: CatalogRecord,
    pub water: Option<WaterStats>,
    pub burnt: Option<BurntStats>,
    pub water_relevant_fraction: Option<f64>,
    pub burnt_relevant_fraction: Option<f64>,
    pub local_solar_time: f64,
    /// Absolute paths of every artifact written.
    pub outputs: Vec<PathBuf>,
}

fn rel(tile_id: &str, date: NaiveDate, file: &str) -> String {
    TileStore::tile_rel_dir(tile_id, date).join(file).to_string_lossy().into_owned()
}

fn write_artifacts(
    store: &TileStore,
    mask: &SegmentationMask,
    sfv: &SparseFeatureVector,
    mask_file: &str,
    sfv_file: &str,
) -> Result<[PathBuf; 2]> {
    let dir = store.tile_dir(sfv.tile_id(), sfv.capture_date());
    let mask_path = dir.join(mask_file);
    let sfv_path = dir.join(sfv_file);
    for (path, bytes) in [(&mask_path, mask.to_pgm()), (&sfv_path, sfv.to_bytes())] {
        write_atomic(path, &bytes).map_err(|source| PipelineError::Io { path: path.clone(), source })?;
    }
    Ok([mask_path, sfv_path])
}

/// Calibrates and segments a stored tile, writes masks and SFVs into its
/// store directory, and upserts its catalog record. Fields for a target that
/// was not run keep their previous catalog values.
pub fn segment_tile(
    store: &TileStore,
    tile_id: &str,
    capture_date: NaiveDate,
    opts: &SegmentOptions,
    timings: &mut Timings,
) -> Result<SegmentOutcome> {
    opts.thresholds.validate()?;
    opts.features.validate()?;
    let bundle = timings.time("load", || store.load_tile(tile_id, capture_date))?;
    let (geom, local_solar_time) = tile_geometry(bundle.metadata())?;
    let stack = timings.time("calibrate", || calibrate_tile(&bundle, &opts.calibration, &geom))?;

    let mut catalog = Catalog::open(store.root())?;
    let mut record = catalog.get(tile_id, capture_date).cloned().unwrap_or(CatalogRecord {
        tile_id: tile_id.to_string(),
        capture_date,
        water_percent: None,
        burnt_percent: None,
        water_sfv_ref: None,
        burnt_sfv_ref: None,
        mask_refs: vec![],
        total_pixels: 0,
    });
    record.total_pixels = stack.len() as u64;
    let mut out = SegmentOutcome {
        record: record.clone(),
        water: None,
        burnt: None,
        water_relevant_fraction: None,
        burnt_relevant_fraction: None,
        local_solar_time,
        outputs: vec![],
    };

    if opts.target.water() {
        let (mask, sfv) = timings.time("segment_water", || {
            dss::segment_water(&stack, &opts.thresholds, &opts.features, tile_id, capture_date)
        })?;
        let stats = WaterStats::from_mask(&mask)?;
        out.outputs.extend(timings.time("write_water", || {
            write_artifacts(store, &mask, &sfv, WATER_MASK_FILE, WATER_SFV_FILE)
        })?);
        record.water_percent = Some(stats.water_percent);
        record.water_sfv_ref = Some(rel(tile_id, capture_date, WATER_SFV_FILE));
        record.mask_refs.push(rel(tile_id, capture_date, WATER_MASK_FILE));
        out.water = Some(stats);
        out.water_relevant_fraction = Some(sfv.relevant_fraction());
    }
    if opts.target.burnt() {
        let (mask, sfv) = timings.time("segment_burnt", || {
            dss::segment_burnt(&stack, &opts.thresholds, &opts.features, tile_id, capture_date)
        })?;
        let stats = BurntStats::from_mask(&mask)?;
        out.outputs.extend(timings.time("write_burnt", || {
            write_artifacts(store, &mask, &sfv, BURNT_MASK_FILE, BURNT_SFV_FILE)
        })?);
        record.burnt_percent = Some(stats.burnt_percent);
        record.burnt_sfv_ref = Some(rel(tile_id, capture_date, BURNT_SFV_FILE));
        record.mask_refs.push(rel(tile_id, capture_date, BURNT_MASK_FILE));
        out.burnt = Some(stats);
        out.burnt_relevant_fraction = Some(sfv.relevant_fraction());
    }
    record.mask_refs.sort();
    record.mask_refs.dedup();

    timings.time("catalog", || catalog.upsert_record(record.clone()))?;
    out.outputs.push(catalog.log_path());
    out.record = record;
    Ok(out)
}

/// Path of a stored mask inside the tile's store directory.
pub fn mask_path(store: &TileStore, tile_id: &str, capture_date: NaiveDate, kind: MaskKind) -> PathBuf {
    let file = match kind {
        MaskKind::Water => WATER_MASK_FILE,
        MaskKind::Burnt => BURNT_MASK_FILE,
    };
    store.tile_dir(tile_id, capture_date).join(file)
}

/// Copies a stored mask to `out` as PGM or 16-bit TIFF.
pub fn export_mask(
    store: &TileStore,
    tile_id: &str,
    capture_date: NaiveDate,
    kind: MaskKind,
    format: MaskFormat,
    out: &Path,
) -> Result<()> {
    let src = mask_path(store, tile_id, capture_date, kind);
    if !src.is_file() {
        return Err(PipelineError::MaskMissing { kind, tile_id: tile_id.to_string(), capture_date });
    }
    let mask = SegmentationMask::read_pgm(&src, kind)?;
    let io = |source| PipelineError::Io { path: out.to_path_buf(), source };
    match format {
        MaskFormat::Pgm => mask.write_pgm(out).map_err(io),
        MaskFormat::Tiff => mask.write_tiff16(out).map_err(io),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SynthSpec};

    fn small() -> SynthSpec {
        SynthSpec { width: 40, height: 30, clear: 24, muddy: 12, burnt_sure: 30, ..SynthSpec::default() }
    }

    fn ingest_synth(root: &Path, spec: &SynthSpec) -> (TileStore, SegmentOptions) {
        let tile = generate(spec, &ThresholdTable::default()).unwrap();
        let files = tile.write_inputs(&root.join("inputs")).unwrap();
        let store = TileStore::new(root.join("store"));
        ingest(&store, &files.bands, tile.bundle.metadata().clone(), 16, &mut Timings::default()).unwrap();
        let opts = SegmentOptions {
            target: Target::Both,
            calibration: tile.calibration,
            thresholds: ThresholdTable::default(),
            features: FeatureConfig::default(),
        };
        (store, opts)
    }

    #[test]
    fn segment_both_writes_artifacts_and_record() {
        let dir = tempfile::tempdir().unwrap();
        let spec = small();
        let (store, opts) = ingest_synth(dir.path(), &spec);
        let out = segment_tile(&store, &spec.tile_id, spec.capture_date, &opts, &mut Timings::default()).unwrap();
        assert_eq!(out.water.unwrap().water_pixels(), 36);
        assert_eq!(out.burnt.unwrap().sure, 30);
        assert_eq!(out.record.water_percent, Some(3.0));
        assert_eq!(out.record.burnt_percent, Some(2.5));
        assert_eq!(out.record.mask_refs.len(), 2);
        let catalog = Catalog::open(store.root()).unwrap();
        assert_eq!(catalog.get(&spec.tile_id, spec.capture_date), Some(&out.record));
    }

    #[test]
    fn water_only_leaves_burnt_untouched() {
        let dir = tempfile::tempdir().unwrap();
        let spec = small();
        let (store, mut opts) = ingest_synth(dir.path(), &spec);
        opts.target = Target::Water;
        let out = segment_tile(&store, &spec.tile_id, spec.capture_date, &opts, &mut Timings::default()).unwrap();
        assert!(out.record.burnt_percent.is_none());
        assert!(!mask_path(&store, &spec.tile_id, spec.capture_date, MaskKind::Burnt).exists());
        let e = export_mask(&store, &spec.tile_id, spec.capture_date, MaskKind::Burnt, MaskFormat::Pgm, &dir.path().join("x.pgm"));
        assert!(matches!(e, Err(PipelineError::MaskMissing { .. })));

        opts.target = Target::Burnt;
        let out = segment_tile(&store, &spec.tile_id, spec.capture_date, &opts, &mut Timings::default()).unwrap();
        assert_eq!(out.record.water_percent, Some(3.0));
        assert_eq!(out.record.burnt_percent, Some(2.5));
    }

    #[test]
    fn unreadable_band_names_the_band() {
        let dir = tempfile::tempdir().unwrap();
        let spec = small();
        let tile = generate(&spec, &ThresholdTable::default()).unwrap();
        let mut files = tile.write_inputs(dir.path()).unwrap();
        files.bands[1] = dir.path().join("nope.tif");
        let store = TileStore::new(dir.path().join("store"));
        let e = ingest(&store, &files.bands, tile.bundle.metadata().clone(), 16, &mut Timings::default()).unwrap_err();
        assert!(matches!(e, PipelineError::BandInput { band: Band::B3, .. }));
        assert!(e.to_string().contains("B3"));
    }

    #[test]
    fn missing_tile_is_not_found() {
        let dir = tempfile::tempdir().unwrap();
        let store = TileStore::new(dir.path());
        let opts = SegmentOptions {
            target: Target::Both,
            calibration: CalibrationSet::placeholder(),
            thresholds: ThresholdTable::default(),
            features: FeatureConfig::default(),
        };
        let e = segment_tile(&store, "NONE", NaiveDate::from_ymd_opt(2013, 1, 1).unwrap(), &opts, &mut Timings::default());
        assert!(matches!(e, Err(PipelineError::TileIo(TileIoError::NotFound { .. }))));
    }
}
