//! Per-pixel threshold decision trees for water bodies and burnt areas.
//!
//! Water: a pixel is tested against the clear-water and muddy-water range
//! sets over B2-B5, BRT and NDVI. Inside both is moderately clear, inside
//! one is that class, inside neither is non-water. Pixels that pass the
//! burnt-sure test are never water.
//!
//! Burnt: a strict band filter marks probable pixels; of those, pixels whose
//! BAIM, NDVI and BRT fall in the auxiliary ranges are sure.

mod mask;
mod thresholds;

use std::path::PathBuf;

use chrono::NaiveDate;
use rayon::prelude::*;

use crate::features::{build_sfv, FeatureConfig, FeatureError, PixelFeatures, SparseFeatureVector};
use crate::radiometry::ReflectanceStack;

pub use mask::{MaskKind, SegmentationMask, WaterClass, BURNT_NOT, BURNT_PROBABLE, BURNT_SURE};
pub use thresholds::{Feature, FeatureRange, RangeSet, ThresholdTable};

#[derive(Debug, thiserror::Error)]
pub enum DssError {
    #[error("invalid threshold table: {0}")]
    InvalidThreshold(String),
    #[error("threshold config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("burnt-sure test needs BAIM but the pixel has none")]
    MissingBaim,
    #[error("expected a {expected} mask, got {found}")]
    WrongMaskKind { expected: MaskKind, found: MaskKind },
    #[error("invalid mask: {0}")]
    InvalidMask(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = DssError> = std::result::Result<T, E>;

/// First burnt filter: strict band ranges only.
pub fn classify_burnt_pixel_probable(b2: f64, b3: f64, b4: f64, b5: f64, t: &ThresholdTable) -> bool {
    let bands = [b2, b3, b4, b5];
    Feature::BANDS
        .iter()
        .zip(bands)
        .all(|(f, v)| t.burnt_probable.get(*f).is_some_and(|r| r.contains(v)))
}

/// Second burnt filter, nested inside the first.
pub fn classify_burnt_pixel_sure(f: &PixelFeatures, t: &ThresholdTable) -> Result<bool> {
    if f.baim.is_none() {
        return Err(DssError::MissingBaim);
    }
    Ok(classify_burnt_pixel_probable(f.b2, f.b3, f.b4, f.b5, t) && t.burnt_sure.matches(f))
}

/// Burnt-sure test that computes BAIM on demand, and only for pixels that
/// pass the band filter.
fn is_sure_burnt(f: &PixelFeatures, t: &ThresholdTable, cfg: &FeatureConfig) -> Result<bool> {
    if !classify_burnt_pixel_probable(f.b2, f.b3, f.b4, f.b5, t) {
        return Ok(false);
    }
    let with_baim = match f.baim {
        Some(_) => *f,
        None => PixelFeatures { baim: Some(crate::features::baim(f.b4, f.b5, cfg)?), ..*f },
    };
    classify_burnt_pixel_sure(&with_baim, t)
}

pub fn classify_water_pixel(f: &PixelFeatures, t: &ThresholdTable, cfg: &FeatureConfig) -> Result<WaterClass> {
    let values = [f.b2, f.b3, f.b4, f.b5, f.ndvi, f.brt];
    if values.iter().any(|v| v.is_nan()) {
        return Ok(WaterClass::NonWater);
    }
    let clear = t.clear_water.matches(f);
    let muddy = t.muddy_water.matches(f);
    if !(clear || muddy) || is_sure_burnt(f, t, cfg)? {
        return Ok(WaterClass::NonWater);
    }
    Ok(match (clear, muddy) {
        (true, true) => WaterClass::ModeratelyClear,
        (true, false) => WaterClass::Clear,
        _ => WaterClass::Muddy,
    })
}

/// Labels rows in parallel; each row is written by exactly one task.
fn label_rows<F>(stack: &ReflectanceStack, label: F) -> Result<Vec<u8>>
where
    F: Fn(u32, u32, [f64; 4]) -> Result<u8> + Sync,
{
    let width = stack.width() as usize;
    let mut labels = vec![0u8; stack.len()];
    labels
        .par_chunks_mut(width.max(1))
        .enumerate()
        .try_for_each(|(y, row)| {
            for (x, out) in row.iter_mut().enumerate() {
                *out = label(x as u32, y as u32, stack.pixel(y * width + x))?;
            }
            Ok::<(), DssError>(())
        })?;
    Ok(labels)
}

/// Water mask plus the SFV of every water pixel.
pub fn segment_water(
    stack: &ReflectanceStack,
    t: &ThresholdTable,
    cfg: &FeatureConfig,
    tile_id: &str,
    capture_date: NaiveDate,
) -> Result<(SegmentationMask, SparseFeatureVector)> {
    t.validate()?;
    cfg.validate()?;
    let labels = label_rows(stack, |x, y, px| {
        Ok(match PixelFeatures::compute(x, y, px, cfg, false)? {
            Some(f) => classify_water_pixel(&f, t, cfg)?.code(),
            None => WaterClass::NonWater.code(),
        })
    })?;
    let mask = SegmentationMask::new(MaskKind::Water, stack.width(), stack.height(), labels)?;
    let sfv = build_sfv(stack, &mask, cfg, false, tile_id, capture_date)?;
    Ok((mask, sfv))
}

/// Burnt mask (255 sure, 128 probable only) plus the SFV, with BAIM, of
/// every probable or sure pixel.
pub fn segment_burnt(
    stack: &ReflectanceStack,
    t: &ThresholdTable,
    cfg: &FeatureConfig,
    tile_id: &str,
    capture_date: NaiveDate,
) -> Result<(SegmentationMask, SparseFeatureVector)> {
    t.validate()?;
    cfg.validate()?;
    let labels = label_rows(stack, |x, y, px| {
        let [b2, b3, b4, b5] = px;
        if !classify_burnt_pixel_probable(b2, b3, b4, b5, t) {
            return Ok(BURNT_NOT);
        }
        Ok(match PixelFeatures::compute(x, y, px, cfg, true)? {
            Some(f) if classify_burnt_pixel_sure(&f, t)? => BURNT_SURE,
            Some(_) => BURNT_PROBABLE,
            None => BURNT_NOT,
        })
    })?;
    let mask = SegmentationMask::new(MaskKind::Burnt, stack.width(), stack.height(), labels)?;
    let sfv = build_sfv(stack, &mask, cfg, true, tile_id, capture_date)?;
    Ok((mask, sfv))
}

fn percent(count: u64, total: u64) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * count as f64 / total as f64
    }
}

/// Share of pixels labeled as any water class, in percent.
pub fn water_percentage(mask: &SegmentationMask) -> Result<f64> {
    if mask.kind() != MaskKind::Water {
        return Err(DssError::WrongMaskKind { expected: MaskKind::Water, found: mask.kind() });
    }
    Ok(percent(mask.count_nonzero(), mask.total_pixels()))
}

/// Share of sure-burnt pixels, in percent. Probable-only pixels do not count.
pub fn burnt_percentage(mask: &SegmentationMask) -> Result<f64> {
    if mask.kind() != MaskKind::Burnt {
        return Err(DssError::WrongMaskKind { expected: MaskKind::Burnt, found: mask.kind() });
    }
    Ok(percent(mask.count(BURNT_SURE), mask.total_pixels()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaterStats {
    pub total_pixels: u64,
    pub clear: u64,
    pub moderately_clear: u64,
    pub muddy: u64,
    pub water_percent: f64,
}

impl WaterStats {
    pub fn from_mask(mask: &SegmentationMask) -> Result<Self> {
        Ok(Self {
            water_percent: water_percentage(mask)?,
            total_pixels: mask.total_pixels(),
            clear: mask.count(WaterClass::Clear.code()),
            moderately_clear: mask.count(WaterClass::ModeratelyClear.code()),
            muddy: mask.count(WaterClass::Muddy.code()),
        })
    }

    pub fn water_pixels(&self) -> u64 {
        self.clear + self.moderately_clear + self.muddy
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BurntStats {
    pub total_pixels: u64,
    pub sure: u64,
    pub probable_only: u64,
    pub burnt_percent: f64,
}

impl BurntStats {
    pub fn from_mask(mask: &SegmentationMask) -> Result<Self> {
        Ok(Self {
            burnt_percent: burnt_percentage(mask)?,
            total_pixels: mask.total_pixels(),
            sure: mask.count(BURNT_SURE),
            probable_only: mask.count(BURNT_PROBABLE),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{baim, brightness, ndvi, NdviOrientation};

    fn date() -> NaiveDate {
        NaiveDate::from_ymd_opt(2013, 2, 25).unwrap()
    }

    fn pf(b: [f64; 4], ndvi: f64, brt: f64, baim: Option<f64>) -> PixelFeatures {
        PixelFeatures { x: 0, y: 0, b2: b[0], b3: b[1], b4: b[2], b5: b[3], ndvi, brt, baim }
    }

    fn features(b: [f64; 4], cfg: &FeatureConfig) -> PixelFeatures {
        PixelFeatures::compute(0, 0, b, cfg, true).unwrap().unwrap()
    }

    #[test]
    fn clear_water_example() {
        let t = ThresholdTable::default();
        let f = pf([0.0100, 0.0050, 0.0060, 0.0045], 0.08, 0.0255, None);
        assert_eq!(classify_water_pixel(&f, &t, &FeatureConfig::default()).unwrap(), WaterClass::Clear);
    }

    #[test]
    fn muddy_water_example() {
        let t = ThresholdTable::default();
        let f = pf([0.0239, 0.0192, 0.0285, 0.0276], 0.20, 0.0992, None);
        assert_eq!(classify_water_pixel(&f, &t, &FeatureConfig::default()).unwrap(), WaterClass::Muddy);
    }

    #[test]
    fn moderately_clear_is_the_overlap() {
        let t = ThresholdTable::default();
        let f = pf([0.0100, 0.0080, 0.0170, 0.0160], 0.36, 0.0510, None);
        assert!(t.clear_water.matches(&f) && t.muddy_water.matches(&f));
        assert_eq!(classify_water_pixel(&f, &t, &FeatureConfig::default()).unwrap(), WaterClass::ModeratelyClear);
    }

    #[test]
    fn zeros_are_not_water() {
        let t = ThresholdTable::default();
        let f = pf([0.0; 4], 0.0, 0.0, None);
        assert_eq!(classify_water_pixel(&f, &t, &FeatureConfig::default()).unwrap(), WaterClass::NonWater);
    }

    #[test]
    fn burnt_takes_precedence_over_clear_water() {
        let t = ThresholdTable::default();
        let cfg = FeatureConfig::default();
        let f = features([0.0092, 0.006, 0.012, 0.012], &cfg);
        assert!(t.clear_water.matches(&f));
        assert!(classify_burnt_pixel_sure(&f, &t).unwrap());
        assert_eq!(classify_water_pixel(&f, &t, &cfg).unwrap(), WaterClass::NonWater);
        // Same answer when BAIM has to be computed on the fly.
        let no_baim = PixelFeatures { baim: None, ..f };
        assert_eq!(classify_water_pixel(&no_baim, &t, &cfg).unwrap(), WaterClass::NonWater);
    }

    #[test]
    fn probable_examples() {
        let t = ThresholdTable::default();
        assert!(classify_burnt_pixel_probable(0.0092, 0.006, 0.012, 0.012, &t));
        assert!(!classify_burnt_pixel_probable(0.0092, 0.006, 0.012, 0.014, &t));
        assert!(!classify_burnt_pixel_probable(0.0, 0.0, 0.0, 0.0, &t));
        // Strict bounds.
        assert!(!classify_burnt_pixel_probable(0.0085, 0.006, 0.012, 0.012, &t));
        assert!(!classify_burnt_pixel_probable(0.0092, 0.006, 0.012, 0.0130, &t));
    }

    #[test]
    fn sure_examples() {
        let t = ThresholdTable::default();
        let b = [0.0092, 0.006, 0.012, 0.012];
        let brt = brightness(b[0], b[1], b[2], b[3]).unwrap();
        let nd = ndvi(b[1], b[2], NdviOrientation::StandardNirRed).unwrap();
        let ba = baim(b[2], b[3], &FeatureConfig::default()).unwrap();
        assert!((ba - 663.13).abs() < 0.01);
        assert!((nd - 0.3333).abs() < 1e-4);
        assert!(classify_burnt_pixel_sure(&pf(b, nd, brt, Some(ba)), &t).unwrap());
        assert!(!classify_burnt_pixel_sure(&pf(b, nd, brt, Some(500.0)), &t).unwrap());
        // Fails the band filter: sure is false whatever the auxiliary values.
        assert!(!classify_burnt_pixel_sure(&pf([0.0092, 0.006, 0.012, 0.014], nd, brt, Some(ba)), &t).unwrap());
        assert!(matches!(classify_burnt_pixel_sure(&pf(b, nd, brt, None), &t), Err(DssError::MissingBaim)));
    }

    #[test]
    fn sure_auxiliary_bounds_are_inclusive() {
        let t = ThresholdTable::default();
        let b = [0.0092, 0.006, 0.012, 0.012];
        assert!(classify_burnt_pixel_sure(&pf(b, 0.09, 0.035, Some(585.0)), &t).unwrap());
        assert!(classify_burnt_pixel_sure(&pf(b, 0.45, 0.05, Some(925.0)), &t).unwrap());
        assert!(!classify_burnt_pixel_sure(&pf(b, 0.45, 0.0501, Some(925.0)), &t).unwrap());
    }

    fn uniform_stack(w: u32, h: u32, px: [f64; 4]) -> ReflectanceStack {
        let n = (w * h) as usize;
        ReflectanceStack::from_grids(w, h, px.map(|v| vec![v; n])).unwrap()
    }

    const CLEAR: [f64; 4] = [0.0110, 0.0080, 0.0100, 0.0090];
    const BACKGROUND: [f64; 4] = [0.035, 0.030, 0.038, 0.036];

    #[test]
    fn all_clear_tile() {
        let s = uniform_stack(10, 10, CLEAR);
        let (m, sfv) = segment_water(&s, &ThresholdTable::default(), &FeatureConfig::default(), "T", date()).unwrap();
        assert!(m.labels().iter().all(|&l| l == 255));
        assert_eq!(sfv.len(), 100);
        assert_eq!(water_percentage(&m).unwrap(), 100.0);
    }

    #[test]
    fn no_water_tile() {
        let s = uniform_stack(10, 10, BACKGROUND);
        let (m, sfv) = segment_water(&s, &ThresholdTable::default(), &FeatureConfig::default(), "T", date()).unwrap();
        assert_eq!(m.count_nonzero(), 0);
        assert!(sfv.is_empty());
    }

    #[test]
    fn planted_clear_patch() {
        let mut grids = BACKGROUND.map(|v| vec![v; 10_000]);
        for y in 40..60 {
            for x in 30..50 {
                for (g, v) in grids.iter_mut().zip(CLEAR) {
                    g[y * 100 + x] = v;
                }
            }
        }
        let s = ReflectanceStack::from_grids(100, 100, grids).unwrap();
        let (m, sfv) = segment_water(&s, &ThresholdTable::default(), &FeatureConfig::default(), "T", date()).unwrap();
        assert_eq!(m.count(255), 400);
        assert_eq!(m.count_nonzero(), 400);
        assert_eq!(sfv.len(), 400);
        assert_eq!(water_percentage(&m).unwrap(), 4.0);
    }

    #[test]
    fn planted_burnt_patch() {
        let burnt = [0.0092, 0.006, 0.012, 0.012];
        let mut grids = BACKGROUND.map(|v| vec![v; 10_000]);
        for i in 0..250 {
            for (g, v) in grids.iter_mut().zip(burnt) {
                g[i * 37 % 10_000] = v;
            }
        }
        let s = ReflectanceStack::from_grids(100, 100, grids).unwrap();
        let (m, sfv) = segment_burnt(&s, &ThresholdTable::default(), &FeatureConfig::default(), "T", date()).unwrap();
        assert_eq!(m.count(BURNT_SURE), 250);
        assert_eq!(m.count(BURNT_PROBABLE), 0);
        assert_eq!(burnt_percentage(&m).unwrap(), 2.5);
        assert!(sfv.has_baim());
        assert_eq!(sfv.len(), 250);
    }

    #[test]
    fn bright_probable_pixels_are_not_sure() {
        // Passes the band filter with BRT 0.0365 and NDVI 0.125 in range, but
        // BAIM = 1 / (0.041^2 + 0.009^2) ~ 567.5 is below 585.
        let px = [0.0095, 0.0070, 0.0090, 0.0110];
        let cfg = FeatureConfig::default();
        let f = features(px, &cfg);
        let t = ThresholdTable::default();
        assert!(classify_burnt_pixel_probable(px[0], px[1], px[2], px[3], &t));
        assert!(!t.burnt_sure.matches(&f));
        let s = uniform_stack(8, 8, px);
        let (m, sfv) = segment_burnt(&s, &t, &cfg, "T", date()).unwrap();
        assert_eq!(m.count(BURNT_PROBABLE), 64);
        assert_eq!(m.count(BURNT_SURE), 0);
        assert_eq!(sfv.len(), 64);
    }

    #[test]
    fn brt_above_sure_bound_gives_probable_only() {
        // The band filter caps BRT below 0.051, so a BRT of 0.06 is only
        // reachable by loosening the band ranges; widen B5 to admit it.
        let mut t = ThresholdTable::default();
        t.burnt_probable = RangeSet::from_pairs([
            (Feature::B2, FeatureRange::open(0.0085, 0.010)),
            (Feature::B3, FeatureRange::open(0.004, 0.008)),
            (Feature::B4, FeatureRange::open(0.0085, 0.0170)),
            (Feature::B5, FeatureRange::open(0.01, 0.030)),
        ]);
        let px = [0.0095, 0.0075, 0.0160, 0.0270];
        let cfg = FeatureConfig::default();
        assert!((features(px, &cfg).brt - 0.06).abs() < 1e-12);
        let (m, _) = segment_burnt(&uniform_stack(4, 4, px), &t, &cfg, "T", date()).unwrap();
        assert_eq!(m.count(BURNT_PROBABLE), 16);
        assert_eq!(m.count(BURNT_SURE), 0);
    }

    #[test]
    fn all_nodata_tile() {
        let s = uniform_stack(5, 5, [f64::NAN; 4]);
        let t = ThresholdTable::default();
        let cfg = FeatureConfig::default();
        let (w, wsfv) = segment_water(&s, &t, &cfg, "T", date()).unwrap();
        let (b, bsfv) = segment_burnt(&s, &t, &cfg, "T", date()).unwrap();
        assert_eq!(w.count_nonzero() + b.count_nonzero(), 0);
        assert!(wsfv.is_empty() && bsfv.is_empty());
    }

    #[test]
    fn percentages() {
        let mut labels = vec![0u8; 4096];
        labels[..512].fill(63);
        let m = SegmentationMask::new(MaskKind::Water, 64, 64, labels).unwrap();
        assert_eq!(water_percentage(&m).unwrap(), 12.5);
        assert_eq!(water_percentage(&SegmentationMask::zeros(MaskKind::Water, 8, 8)).unwrap(), 0.0);
        let full = SegmentationMask::new(MaskKind::Water, 2, 2, vec![255, 127, 63, 255]).unwrap();
        assert_eq!(water_percentage(&full).unwrap(), 100.0);

        let probable = SegmentationMask::new(MaskKind::Burnt, 64, 64, vec![BURNT_PROBABLE; 4096]).unwrap();
        assert_eq!(burnt_percentage(&probable).unwrap(), 0.0);
        let mut labels = vec![0u8; 10_000];
        labels[..250].fill(BURNT_SURE);
        let sure = SegmentationMask::new(MaskKind::Burnt, 100, 100, labels).unwrap();
        assert_eq!(burnt_percentage(&sure).unwrap(), 2.5);
        assert_eq!(burnt_percentage(&SegmentationMask::zeros(MaskKind::Burnt, 3, 3)).unwrap(), 0.0);

        assert!(matches!(water_percentage(&sure), Err(DssError::WrongMaskKind { .. })));
        assert!(matches!(burnt_percentage(&m), Err(DssError::WrongMaskKind { .. })));
    }

    #[test]
    fn stats_add_up() {
        let m = SegmentationMask::new(MaskKind::Water, 4, 1, vec![255, 127, 63, 0]).unwrap();
        let s = WaterStats::from_mask(&m).unwrap();
        assert_eq!((s.clear, s.moderately_clear, s.muddy), (1, 1, 1));
        assert_eq!(s.water_pixels(), m.count_nonzero());
        assert_eq!(s.water_percent, 75.0);
    }
}
