use std::io::{Read, Write};

use chrono::NaiveDate;
use rayon::prelude::*;

use super::{FeatureConfig, FeatureError, PixelFeatures, Result};
use crate::dss::SegmentationMask;
use crate::radiometry::ReflectanceStack;

pub const SFV_MAGIC: &[u8; 4] = b"AWFV";
pub const SFV_HEADER_LEN: usize = 32;
const SFV_VERSION: u8 = 1;
const FLAG_BAIM: u8 = 0b1;

/// Features of the relevant pixels of one tile, ordered by `(y, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseFeatureVector {
    tile_id: String,
    capture_date: NaiveDate,
    total_pixels: u64,
    has_baim: bool,
    entries: Vec<PixelFeatures>,
}

/// Bytes of a dense grid holding the same features for every pixel.
pub fn dense_grid_bytes(total_pixels: u64, include_baim: bool) -> u64 {
    total_pixels * if include_baim { 7 } else { 6 } * 8
}

impl SparseFeatureVector {
    pub fn new(
        tile_id: impl Into<String>,
        capture_date: NaiveDate,
        total_pixels: u64,
        has_baim: bool,
        entries: Vec<PixelFeatures>,
    ) -> Result<Self> {
        if entries.len() as u64 > total_pixels {
            return Err(FeatureError::Malformed(format!(
                "{} entries for {total_pixels} pixels",
                entries.len()
            )));
        }
        if entries.windows(2).any(|w| (w[0].y, w[0].x) >= (w[1].y, w[1].x)) {
            return Err(FeatureError::Malformed("entries not strictly ordered by (y, x)".into()));
        }
        if entries.iter().any(|e| e.baim.is_some() != has_baim) {
            return Err(FeatureError::Malformed("BAIM presence differs between entries".into()));
        }
        Ok(Self { tile_id: tile_id.into(), capture_date, total_pixels, has_baim, entries })
    }

    pub fn tile_id(&self) -> &str {
        &self.tile_id
    }

    pub fn capture_date(&self) -> NaiveDate {
        self.capture_date
    }

    pub fn total_pixels(&self) -> u64 {
        self.total_pixels
    }

    pub fn has_baim(&self) -> bool {
        self.has_baim
    }

    pub fn entries(&self) -> &[PixelFeatures] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Share of pixels that are relevant, in `[0, 1]`.
    pub fn relevant_fraction(&self) -> f64 {
        if self.total_pixels == 0 {
            0.0
        } else {
            self.entries.len() as f64 / self.total_pixels as f64
        }
    }

    /// Pixel coordinates in `(y, x)` order.
    pub fn coordinates(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.entries.iter().map(|e| (e.y, e.x))
    }

    fn record_len(&self) -> usize {
        8 + 8 * if self.has_baim { 7 } else { 6 }
    }

    pub fn serialized_len(&self) -> u64 {
        (SFV_HEADER_LEN + self.entries.len() * self.record_len()) as u64
    }

    /// Binary layout: 32-byte header (magic, version, flags, reserved,
    /// total_pixels u64, entry_count u64) then fixed-width little-endian
    /// records `x u32, y u32, b2..b5, ndvi, brt [, baim]` as f64.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = [0u8; SFV_HEADER_LEN];
        header[0..4].copy_from_slice(SFV_MAGIC);
        header[4] = SFV_VERSION;
        header[5] = if self.has_baim { FLAG_BAIM } else { 0 };
        header[16..24].copy_from_slice(&self.total_pixels.to_le_bytes());
        header[24..32].copy_from_slice(&(self.entries.len() as u64).to_le_bytes());
        w.write_all(&header)?;
        let mut rec = Vec::with_capacity(self.record_len());
        for e in &self.entries {
            rec.clear();
            rec.extend_from_slice(&e.x.to_le_bytes());
            rec.extend_from_slice(&e.y.to_le_bytes());
            for v in [e.b2, e.b3, e.b4, e.b5, e.ndvi, e.brt] {
                rec.extend_from_slice(&v.to_le_bytes());
            }
            if let Some(b) = e.baim {
                rec.extend_from_slice(&b.to_le_bytes());
            }
            w.write_all(&rec)?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.serialized_len() as usize);
        self.write_to(&mut out).expect("write to Vec");
        out
    }

    /// Parses the binary layout. Tile identity is not stored in the file.
    pub fn read_from<R: Read>(mut r: R, tile_id: impl Into<String>, capture_date: NaiveDate) -> Result<Self> {
        let mut header = [0u8; SFV_HEADER_LEN];
        r.read_exact(&mut header)?;
        if &header[0..4] != SFV_MAGIC {
            return Err(FeatureError::Malformed("bad magic".into()));
        }
        if header[4] != SFV_VERSION {
            return Err(FeatureError::Malformed(format!("unsupported version {}", header[4])));
        }
        let has_baim = header[5] & FLAG_BAIM != 0;
        let total_pixels = u64::from_le_bytes(header[16..24].try_into().unwrap());
        let count = u64::from_le_bytes(header[24..32].try_into().unwrap());
        if count > total_pixels {
            return Err(FeatureError::Malformed(format!("{count} entries for {total_pixels} pixels")));
        }
        let rec_len = 8 + 8 * if has_baim { 7 } else { 6 };
        let mut body = Vec::new();
        r.read_to_end(&mut body)?;
        if body.len() as u64 != count * rec_len as u64 {
            return Err(FeatureError::Malformed(format!(
                "body is {} bytes, expected {count} records of {rec_len}",
                body.len()
            )));
        }
        let entries = body
            .chunks_exact(rec_len)
            .map(|rec| {
                let u = |o: usize| u32::from_le_bytes(rec[o..o + 4].try_into().unwrap());
                let f = |o: usize| f64::from_le_bytes(rec[o..o + 8].try_into().unwrap());
                PixelFeatures {
                    x: u(0),
                    y: u(4),
                    b2: f(8),
                    b3: f(16),
                    b4: f(24),
                    b5: f(32),
                    ndvi: f(40),
                    brt: f(48),
                    baim: has_baim.then(|| f(56)),
                }
            })
            .collect();
        Self::new(tile_id, capture_date, total_pixels, has_baim, entries)
    }
}

/// Collects features for every pixel with a non-zero mask label.
///
/// Rows are processed in parallel and concatenated in row order, so the
/// result is independent of thread count.
pub fn build_sfv(
    stack: &ReflectanceStack,
    relevance: &SegmentationMask,
    cfg: &FeatureConfig,
    include_baim: bool,
    tile_id: &str,
    capture_date: NaiveDate,
) -> Result<SparseFeatureVector> {
    cfg.validate()?;
    let (width, height) = (stack.width(), stack.height());
    if relevance.width() != width || relevance.height() != height {
        return Err(FeatureError::DimensionMismatch {
            width,
            height,
            mask_width: relevance.width(),
            mask_height: relevance.height(),
        });
    }
    let labels = relevance.labels();
    let rows = (0..height)
        .into_par_iter()
        .map(|y| {
            let mut row = Vec::new();
            for x in 0..width {
                let i = y as usize * width as usize + x as usize;
                if labels[i] == 0 {
                    continue;
                }
                match PixelFeatures::compute(x, y, stack.pixel(i), cfg, include_baim)? {
                    Some(f) => row.push(f),
                    None => return Err(FeatureError::NoDataInRelevantPixel { x, y }),
                }
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let entries = rows.into_iter().flatten().collect();
    SparseFeatureVector::new(tile_id, capture_date, u64::from(width) * u64::from(height), include_baim, entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dss::MaskKind;
    use crate::features::{baim, brightness, ndvi};
    use proptest::prelude::*;

    fn date() -> NaiveDate {
        NaiveDate::from_ymd_opt(2012, 4, 19).unwrap()
    }

    fn stack(w: u32, h: u32) -> ReflectanceStack {
        let n = (w * h) as usize;
        let g = |k: f64| (0..n).map(|i| 0.005 + k * 0.001 + i as f64 * 1e-5).collect::<Vec<_>>();
        ReflectanceStack::from_grids(w, h, [g(1.0), g(2.0), g(3.0), g(4.0)]).unwrap()
    }

    #[test]
    fn empty_mask_gives_empty_sfv() {
        let s = stack(5, 4);
        let m = SegmentationMask::zeros(MaskKind::Water, 5, 4);
        let sfv = build_sfv(&s, &m, &FeatureConfig::default(), false, "NH44N", date()).unwrap();
        assert!(sfv.is_empty());
        assert_eq!(sfv.total_pixels(), 20);
    }

    #[test]
    fn labeled_pixels_match_scalar_ops() {
        let s = stack(6, 5);
        let mut labels = vec![0u8; 30];
        for &(x, y) in &[(1u32, 0u32), (5, 2), (0, 4)] {
            labels[(y * 6 + x) as usize] = 255;
        }
        let m = SegmentationMask::new(MaskKind::Water, 6, 5, labels).unwrap();
        let cfg = FeatureConfig::default();
        let sfv = build_sfv(&s, &m, &cfg, true, "NH44N", date()).unwrap();
        assert_eq!(sfv.len(), 3);
        let coords: Vec<_> = sfv.coordinates().collect();
        assert_eq!(coords, vec![(0, 1), (2, 5), (4, 0)]);
        for e in sfv.entries() {
            let [b2, b3, b4, b5] = s.pixel((e.y * 6 + e.x) as usize);
            assert_eq!(e.bands(), [b2, b3, b4, b5]);
            assert_eq!(e.ndvi, ndvi(b3, b4, cfg.ndvi_orientation).unwrap());
            assert_eq!(e.brt, brightness(b2, b3, b4, b5).unwrap());
            assert_eq!(e.baim, Some(baim(b4, b5, &cfg).unwrap()));
        }
    }

    #[test]
    fn synthetic_sparse_fraction() {
        let s = stack(100, 100);
        let mut labels = vec![0u8; 10_000];
        for i in 0..59 {
            labels[i * 163] = 127;
        }
        let m = SegmentationMask::new(MaskKind::Water, 100, 100, labels).unwrap();
        let sfv = build_sfv(&s, &m, &FeatureConfig::default(), false, "NH44N", date()).unwrap();
        assert_eq!(sfv.len(), 59);
        assert!((sfv.relevant_fraction() * 100.0 - 0.59).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let m = SegmentationMask::zeros(MaskKind::Water, 3, 3);
        assert!(matches!(
            build_sfv(&stack(4, 3), &m, &FeatureConfig::default(), false, "T", date()),
            Err(FeatureError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn nodata_pixel_cannot_be_relevant() {
        let s = ReflectanceStack::from_grids(1, 1, [vec![f64::NAN], vec![0.01], vec![0.01], vec![0.01]]).unwrap();
        let m = SegmentationMask::new(MaskKind::Water, 1, 1, vec![255]).unwrap();
        assert!(matches!(
            build_sfv(&s, &m, &FeatureConfig::default(), false, "T", date()),
            Err(FeatureError::NoDataInRelevantPixel { x: 0, y: 0 })
        ));
    }

    #[test]
    fn header_layout() {
        let s = stack(4, 4);
        let m = SegmentationMask::new(MaskKind::Burnt, 4, 4, [vec![255u8; 3], vec![0u8; 13]].concat()).unwrap();
        let sfv = build_sfv(&s, &m, &FeatureConfig::default(), true, "T", date()).unwrap();
        let bytes = sfv.to_bytes();
        assert_eq!(&bytes[0..4], b"AWFV");
        assert_eq!(bytes[4], 1);
        assert_eq!(bytes[5], 1);
        assert_eq!(u64::from_le_bytes(bytes[16..24].try_into().unwrap()), 16);
        assert_eq!(u64::from_le_bytes(bytes[24..32].try_into().unwrap()), 3);
        assert_eq!(bytes.len() as u64, sfv.serialized_len());
        assert_eq!(bytes.len(), 32 + 3 * 64);
    }

    #[test]
    fn rejects_truncated_and_unordered() {
        let s = stack(3, 3);
        let m = SegmentationMask::new(MaskKind::Water, 3, 3, vec![255; 9]).unwrap();
        let sfv = build_sfv(&s, &m, &FeatureConfig::default(), false, "T", date()).unwrap();
        let bytes = sfv.to_bytes();
        assert!(SparseFeatureVector::read_from(&bytes[..bytes.len() - 1], "T", date()).is_err());
        let mut swapped = sfv.entries().to_vec();
        swapped.swap(0, 1);
        assert!(SparseFeatureVector::new("T", date(), 9, false, swapped).is_err());
    }

    proptest! {
        #[test]
        fn serialization_round_trips(w in 1u32..12, h in 1u32..12, bits in proptest::collection::vec(any::<bool>(), 144), with_baim in any::<bool>()) {
            let s = stack(w, h);
            let labels = (0..(w * h) as usize).map(|i| if bits[i] { 255 } else { 0 }).collect();
            let m = SegmentationMask::new(MaskKind::Water, w, h, labels).unwrap();
            let sfv = build_sfv(&s, &m, &FeatureConfig::default(), with_baim, "NH44B", date()).unwrap();
            prop_assert_eq!(sfv.len() as u64, m.count_nonzero());
            let back = SparseFeatureVector::read_from(&sfv.to_bytes()[..], "NH44B", date()).unwrap();
            prop_assert_eq!(back, sfv);
        }
    }
}
