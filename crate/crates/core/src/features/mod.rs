//! Per-pixel distinguishing features and the sparse feature vector.

mod sfv;

use serde::{Deserialize, Serialize};

pub use sfv::{build_sfv, dense_grid_bytes, SparseFeatureVector, SFV_HEADER_LEN, SFV_MAGIC};

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("BAIM undefined at (nir={nir}, swir={swir}): pixel sits on the convergence point")]
    BaimSingularity { nir: f64, swir: f64 },
    #[error("invalid feature config: {0}")]
    InvalidConfig(String),
    #[error("mask is {mask_width}x{mask_height}, rasters are {width}x{height}")]
    DimensionMismatch {
        width: u32,
        height: u32,
        mask_width: u32,
        mask_height: u32,
    },
    #[error("pixel (x={x}, y={y}) is marked relevant but has NoData features")]
    NoDataInRelevantPixel { x: u32, y: u32 },
    #[error("malformed sparse feature vector: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = FeatureError> = std::result::Result<T, E>;

/// Which way round the red/NIR difference is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NdviOrientation {
    /// `(red - nir) / (red + nir)`, as the index is printed in the source
    /// material. Negative over vegetation and burnt scars.
    PaperEq4,
    /// `(nir - red) / (nir + red)`.
    #[default]
    StandardNirRed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub ndvi_orientation: NdviOrientation,
    /// BAIM convergence point, NIR coordinate.
    pub pc_nir: f64,
    /// BAIM convergence point, SWIR coordinate.
    pub pc_swir: f64,
    pub baim_singularity_epsilon: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            ndvi_orientation: NdviOrientation::StandardNirRed,
            pc_nir: 0.05,
            pc_swir: 0.02,
            baim_singularity_epsilon: 1e-12,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("pc_nir", self.pc_nir),
            ("pc_swir", self.pc_swir),
            ("baim_singularity_epsilon", self.baim_singularity_epsilon),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(FeatureError::InvalidConfig(format!("{name} = {v} must be positive")));
            }
        }
        Ok(())
    }
}

/// Normalized difference of red (B3) and NIR (B4). `None` when either input
/// is NoData or both are zero.
pub fn ndvi(red: f64, nir: f64, orientation: NdviOrientation) -> Option<f64> {
    let sum = red + nir;
    if red.is_nan() || nir.is_nan() || sum == 0.0 {
        return None;
    }
    Some(match orientation {
        NdviOrientation::StandardNirRed => (nir - red) / sum,
        NdviOrientation::PaperEq4 => (red - nir) / sum,
    })
}

/// Sum of the four band reflectances, in band order.
pub fn brightness(b2: f64, b3: f64, b4: f64, b5: f64) -> Option<f64> {
    let s = b2 + b3 + b4 + b5;
    (!s.is_nan()).then_some(s)
}

/// Reciprocal squared distance from `(nir, swir)` to the convergence point.
pub fn baim(rho_nir: f64, rho_swir: f64, cfg: &FeatureConfig) -> Result<f64> {
    let dn = cfg.pc_nir - rho_nir;
    let ds = cfg.pc_swir - rho_swir;
    let denom = dn * dn + ds * ds;
    if denom < cfg.baim_singularity_epsilon {
        return Err(FeatureError::BaimSingularity { nir: rho_nir, swir: rho_swir });
    }
    Ok(1.0 / denom)
}

/// Features of one relevant pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelFeatures {
    pub x: u32,
    pub y: u32,
    pub b2: f64,
    pub b3: f64,
    pub b4: f64,
    pub b5: f64,
    pub ndvi: f64,
    pub brt: f64,
    pub baim: Option<f64>,
}

impl PixelFeatures {
    /// Computes every feature from the four reflectances. Returns `Ok(None)`
    /// when any band or derived feature is NoData; such a pixel is never
    /// relevant.
    pub fn compute(x: u32, y: u32, bands: [f64; 4], cfg: &FeatureConfig, include_baim: bool) -> Result<Option<Self>> {
        let [b2, b3, b4, b5] = bands;
        let (Some(ndvi), Some(brt)) = (ndvi(b3, b4, cfg.ndvi_orientation), brightness(b2, b3, b4, b5)) else {
            return Ok(None);
        };
        if b2.is_nan() || b5.is_nan() {
            return Ok(None);
        }
        let baim = if include_baim { Some(baim(b4, b5, cfg)?) } else { None };
        Ok(Some(Self { x, y, b2, b3, b4, b5, ndvi, brt, baim }))
    }

    pub fn bands(&self) -> [f64; 4] {
        [self.b2, self.b3, self.b4, self.b5]
    }
}
