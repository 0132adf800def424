use std::path::{Path, PathBuf};

use awcbir::catalog::{self, format_percent, Catalog, CatalogRecord, Query, SimilarityWeights};
use awcbir::dss::{MaskKind, ThresholdTable};
use awcbir::features::FeatureConfig;
use awcbir::pipeline::{self, MaskFormat, SegmentOptions, Target, Timings};
use awcbir::radiometry::CalibrationSet;
use awcbir::synth::{self, SynthSpec};
use awcbir::tile_io::{TileMetadata, TileStore};
use chrono::NaiveDate;

use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;
use crate::{
    parse_date, ExportArgs, FilterArgs, IngestArgs, MaskFormatArg, OutputFormat, QueryArgs, RankArgs, SegmentArgs,
    SynthArgs, TargetArg,
};

pub struct Context {
    pub store: Option<PathBuf>,
    pub verbose: bool,
}

impl Context {
    fn store(&self) -> CliResult<TileStore> {
        self.store
            .as_ref()
            .map(TileStore::new)
            .ok_or_else(|| CliError::validation("no store given: pass --store or set AWCBIR_STORE"))
    }

    fn log_stages(&self, timings: &Timings) {
        if self.verbose {
            for (stage, ms) in &timings.0 {
                eprintln!("stage {stage}: {ms} ms");
            }
        }
    }
}

pub fn ingest(ctx: &Context, a: IngestArgs) -> CliResult<()> {
    let store = ctx.store()?;
    let mut manifest = RunManifest::new("ingest");
    manifest.config("meta", &a.meta)?;
    let text = std::fs::read_to_string(&a.meta)
        .map_err(|e| CliError::validation(format!("cannot read metadata {}: {e}", a.meta.display())))?;
    let meta: TileMetadata = serde_json::from_str(&text)
        .map_err(|e| CliError::validation(format!("invalid metadata {}: {e}", a.meta.display())))?;
    if let Some(t) = &a.tile {
        if *t != meta.tile_id {
            return Err(CliError::validation(format!("--tile {t} does not match metadata tile_id {}", meta.tile_id)));
        }
    }
    if let Some(d) = a.date {
        if d != meta.capture_date {
            return Err(CliError::validation(format!(
                "--date {d} does not match metadata capture_date {}",
                meta.capture_date
            )));
        }
    }
    let (tile_id, date) = (meta.tile_id.clone(), meta.capture_date);
    let mut timings = Timings::default();
    let chunks = pipeline::ingest(&store, &[a.b2, a.b3, a.b4, a.b5], meta, a.chunk_side, &mut timings)?;
    ctx.log_stages(&timings);
    let stored = store.read_meta(&tile_id, date)?;

    println!("stored {tile_id} {date}: {}x{} pixels in {} chunks", stored.width, stored.height, chunks.len());
    println!("tile_id={tile_id}");
    println!("capture_date={date}");
    println!("width={}", stored.width);
    println!("height={}", stored.height);
    println!("chunks={}", chunks.len());

    manifest.timings(&timings.0);
    manifest.outputs.push(store.meta_path(&tile_id, date));
    manifest.outputs.extend(chunks.iter().map(|c| store.root().join(&c.path)));
    manifest.emit();
    Ok(())
}

pub fn segment(ctx: &Context, a: SegmentArgs) -> CliResult<()> {
    let store = ctx.store()?;
    let mut manifest = RunManifest::new("segment");
    manifest.config("calibration", &a.calibration)?;
    let calibration = CalibrationSet::load(&a.calibration)?;
    let thresholds = match &a.thresholds {
        Some(p) => {
            manifest.config("thresholds", p)?;
            ThresholdTable::load(p).map_err(CliError::validation)?
        }
        None => ThresholdTable::default(),
    };
    let target = match a.target {
        TargetArg::Water => Target::Water,
        TargetArg::Burnt => Target::Burnt,
        TargetArg::Both => Target::Both,
    };
    let opts = SegmentOptions { target, calibration, thresholds, features: FeatureConfig::default() };
    let mut timings = Timings::default();
    let out = pipeline::segment_tile(&store, &a.tile, a.date, &opts, &mut timings)?;
    ctx.log_stages(&timings);

    let r = &out.record;
    println!("{} {}: {} pixels, local solar time {}", r.tile_id, r.capture_date, r.total_pixels, out.local_solar_time);
    if let Some(w) = &out.water {
        println!(
            "water: {}% ({} clear, {} moderately clear, {} muddy)",
            format_percent(w.water_percent),
            w.clear,
            w.moderately_clear,
            w.muddy
        );
    }
    if let Some(b) = &out.burnt {
        println!("burnt: {}% sure ({} sure, {} probable only)", format_percent(b.burnt_percent), b.sure, b.probable_only);
    }
    println!("tile_id={}", r.tile_id);
    println!("capture_date={}", r.capture_date);
    println!("total_pixels={}", r.total_pixels);
    println!("local_solar_time={}", out.local_solar_time);
    if let Some(w) = &out.water {
        println!("water_percent={}", format_percent(w.water_percent));
        println!("water_clear={}", w.clear);
        println!("water_moderately_clear={}", w.moderately_clear);
        println!("water_muddy={}", w.muddy);
        println!("water_relevant_fraction={}", out.water_relevant_fraction.unwrap_or(0.0));
    }
    if let Some(b) = &out.burnt {
        println!("burnt_percent={}", format_percent(b.burnt_percent));
        println!("burnt_sure={}", b.sure);
        println!("burnt_probable_only={}", b.probable_only);
        println!("burnt_relevant_fraction={}", out.burnt_relevant_fraction.unwrap_or(0.0));
    }

    manifest.timings(&timings.0);
    manifest.outputs = out.outputs;
    manifest.emit();
    Ok(())
}

fn parse_interval(flag: &str, s: &str) -> CliResult<(f64, f64)> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| CliError::validation(format!("{flag} expects lo:hi, got {s:?}")))?;
    let num = |t: &str, default: f64| -> CliResult<f64> {
        if t.trim().is_empty() {
            Ok(default)
        } else {
            t.trim().parse().map_err(|_| CliError::validation(format!("{flag}: {t:?} is not a number")))
        }
    };
    Ok((num(lo, 0.0)?, num(hi, 100.0)?))
}

fn build_query(f: &FilterArgs) -> CliResult<Query> {
    let mut q = Query::all();
    if let Some(t) = &f.tile {
        q = q.with_tile(t.clone());
    }
    if f.from.is_some() || f.to.is_some() {
        q = q.with_dates(f.from.unwrap_or(NaiveDate::MIN), f.to.unwrap_or(NaiveDate::MAX))?;
    }
    if let Some(s) = &f.query_water {
        let (lo, hi) = parse_interval("--query-water", s)?;
        q = q.with_water(lo, hi)?;
    }
    if let Some(s) = &f.query_burnt {
        let (lo, hi) = parse_interval("--query-burnt", s)?;
        q = q.with_burnt(lo, hi)?;
    }
    Ok(q)
}

fn open_catalog(ctx: &Context) -> CliResult<Catalog> {
    let store = ctx.store()?;
    Ok(Catalog::open(store.root())?)
}

fn record_cells(r: &CatalogRecord, absent: &str) -> Vec<String> {
    let p = |v: Option<f64>| v.map(format_percent).unwrap_or_else(|| absent.to_string());
    vec![r.tile_id.clone(), r.capture_date.to_string(), p(r.water_percent), p(r.burnt_percent)]
}

fn print_rows(format: OutputFormat, header: &[&str], rows: &[Vec<String>]) {
    match format {
        OutputFormat::Tsv => {
            for row in rows {
                println!("{}", row.join("\t"));
            }
        }
        OutputFormat::Table => {
            let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
            for row in rows {
                for (w, cell) in widths.iter_mut().zip(row) {
                    *w = (*w).max(cell.len());
                }
            }
            let line = |cells: Vec<&str>| {
                let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
                println!("{}", padded.join("  ").trim_end());
            };
            line(header.to_vec());
            for row in rows {
                line(row.iter().map(String::as_str).collect());
            }
        }
    }
}

pub fn query(ctx: &Context, a: QueryArgs) -> CliResult<()> {
    let q = build_query(&a.filters)?;
    let catalog = open_catalog(ctx)?;
    let rows: Vec<Vec<String>> = catalog
        .query(&q)
        .iter()
        .map(|r| record_cells(r, if a.filters.format == OutputFormat::Tsv { "" } else { "-" }))
        .collect();
    print_rows(a.filters.format, &["tile_id", "date", "water%", "burnt%"], &rows);
    let mut manifest = RunManifest::new("query");
    manifest.outputs.push(catalog.log_path());
    manifest.emit();
    Ok(())
}

fn parse_reference(s: &str) -> CliResult<(String, NaiveDate)> {
    let (tile, date) = s
        .split_once('@')
        .ok_or_else(|| CliError::validation(format!("--reference expects TILE@YYYY-MM-DD, got {s:?}")))?;
    let date = parse_date(date).map_err(|e| CliError::validation(format!("--reference: {e}")))?;
    Ok((tile.to_string(), date))
}

pub fn rank(ctx: &Context, a: RankArgs) -> CliResult<()> {
    let q = build_query(&a.filters)?;
    let weights: SimilarityWeights = a.weights.parse()?;
    let (tile, date) = parse_reference(&a.reference)?;
    let catalog = open_catalog(ctx)?;
    let reference = catalog
        .get(&tile, date)
        .cloned()
        .ok_or_else(|| CliError::not_found(format!("no catalog record for {tile} {date}")))?;
    let ranked = catalog::rank(&reference, &q, &weights, &catalog)?;
    let tsv = a.filters.format == OutputFormat::Tsv;
    let rows: Vec<Vec<String>> = ranked
        .iter()
        .map(|(r, s)| {
            let mut cells = record_cells(r, if tsv { "" } else { "-" });
            cells.push(if tsv { s.to_string() } else { format!("{s:.6}") });
            cells
        })
        .collect();
    print_rows(a.filters.format, &["tile_id", "date", "water%", "burnt%", "score"], &rows);
    let mut manifest = RunManifest::new("rank");
    manifest.outputs.push(catalog.log_path());
    manifest.emit();
    Ok(())
}

pub fn export_mask(ctx: &Context, a: ExportArgs) -> CliResult<()> {
    let store = ctx.store()?;
    // An unknown kind can never name a stored mask.
    let kind: MaskKind = a
        .kind
        .parse()
        .map_err(|_| CliError::not_found(format!("no mask kind {:?}; expected water or burnt", a.kind)))?;
    let format = match a.format {
        MaskFormatArg::Pgm => MaskFormat::Pgm,
        MaskFormatArg::Tiff => MaskFormat::Tiff,
    };
    pipeline::export_mask(&store, &a.tile, a.date, kind, format, &a.out)?;
    println!("wrote {kind} mask of {} {} to {}", a.tile, a.date, a.out.display());
    let mut manifest = RunManifest::new("export-mask");
    manifest.outputs.push(a.out);
    manifest.emit();
    Ok(())
}

pub fn synth(_ctx: &Context, a: SynthArgs) -> CliResult<()> {
    let spec = SynthSpec {
        tile_id: a.tile,
        capture_date: a.date,
        width: a.width,
        height: a.height,
        clear: a.clear,
        muddy: a.muddy,
        burnt_sure: a.burnt,
        seed: a.seed,
        center_latitude: a.latitude,
        ..SynthSpec::default()
    };
    let tile = synth::generate(&spec, &ThresholdTable::default())?;
    let files = tile.write_inputs(&a.out)?;
    let show = |p: &Path| p.display().to_string();
    println!("synthetic tile {} {} ({}x{})", spec.tile_id, spec.capture_date, spec.width, spec.height);
    for (b, p) in ["b2", "b3", "b4", "b5"].iter().zip(&files.bands) {
        println!("{b}={}", show(p));
    }
    println!("meta={}", show(&files.meta));
    println!("calibration={}", show(&files.calibration));
    let mut manifest = RunManifest::new("synth");
    manifest.outputs.extend(files.bands.iter().cloned());
    manifest.outputs.push(files.meta);
    manifest.outputs.push(files.calibration);
    manifest.emit();
    Ok(())
}
