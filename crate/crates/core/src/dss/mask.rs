use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use tiff::encoder::{colortype, TiffEncoder};

use super::{DssError, Result};

/// Gray levels of the water mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum WaterClass {
    NonWater = 0,
    Muddy = 63,
    ModeratelyClear = 127,
    Clear = 255,
}

impl WaterClass {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Self::NonWater),
            63 => Some(Self::Muddy),
            127 => Some(Self::ModeratelyClear),
            255 => Some(Self::Clear),
            _ => None,
        }
    }

    pub fn is_water(self) -> bool {
        self != Self::NonWater
    }
}

pub const BURNT_NOT: u8 = 0;
pub const BURNT_PROBABLE: u8 = 128;
pub const BURNT_SURE: u8 = 255;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MaskKind {
    Water,
    Burnt,
}

impl MaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MaskKind::Water => "water",
            MaskKind::Burnt => "burnt",
        }
    }

    fn allows(self, label: u8) -> bool {
        match self {
            MaskKind::Water => WaterClass::from_code(label).is_some(),
            MaskKind::Burnt => matches!(label, BURNT_NOT | BURNT_PROBABLE | BURNT_SURE),
        }
    }
}

impl fmt::Display for MaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MaskKind {
    type Err = DssError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "water" => Ok(MaskKind::Water),
            "burnt" => Ok(MaskKind::Burnt),
            _ => Err(DssError::InvalidMask(format!("unknown mask kind {s:?}"))),
        }
    }
}

/// Per-pixel class labels for one tile, row-major.
///
/// Water masks hold the [`WaterClass`] codes; burnt masks hold 0 (not
/// burnt), 128 (probable only) or 255 (sure, which implies probable).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentationMask {
    kind: MaskKind,
    width: u32,
    height: u32,
    labels: Vec<u8>,
}

impl SegmentationMask {
    pub fn new(kind: MaskKind, width: u32, height: u32, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != width as usize * height as usize {
            return Err(DssError::InvalidMask(format!("{width}x{height} mask with {} labels", labels.len())));
        }
        if let Some(i) = labels.iter().position(|&l| !kind.allows(l)) {
            return Err(DssError::InvalidMask(format!(
                "label {} at index {i} is not a {kind} mask code",
                labels[i]
            )));
        }
        Ok(Self { kind, width, height, labels })
    }

    pub fn zeros(kind: MaskKind, width: u32, height: u32) -> Self {
        Self { kind, width, height, labels: vec![0; width as usize * height as usize] }
    }

    pub fn kind(&self) -> MaskKind {
        self.kind
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.labels[y as usize * self.width as usize + x as usize]
    }

    pub fn total_pixels(&self) -> u64 {
        self.labels.len() as u64
    }

    pub fn count(&self, label: u8) -> u64 {
        self.labels.iter().filter(|&&l| l == label).count() as u64
    }

    pub fn count_nonzero(&self) -> u64 {
        self.labels.iter().filter(|&&l| l != 0).count() as u64
    }

    /// Binary 8-bit PGM (P5, maxval 255).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.labels);
        out
    }

    pub fn write_pgm(&self, path: &Path) -> std::io::Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(&self.to_pgm())?;
        w.flush()
    }

    /// Parses a P5 PGM with maxval 255 and validates its codes for `kind`.
    pub fn read_pgm(path: &Path, kind: MaskKind) -> Result<Self> {
        let file = File::open(path).map_err(|e| DssError::Io { path: path.to_path_buf(), source: e })?;
        let mut r = BufReader::new(file);
        let bad = |m: &str| DssError::InvalidMask(format!("{}: {m}", path.display()));
        let mut header = Vec::new();
        // Magic, width, height, maxval: four whitespace-separated tokens.
        while header.len() < 4 {
            let mut line = String::new();
            if r.read_line(&mut line).map_err(|_| bad("unreadable header"))? == 0 {
                return Err(bad("truncated header"));
            }
            let content = line.split('#').next().unwrap_or("");
            header.extend(content.split_whitespace().map(str::to_owned));
        }
        if header.len() != 4 || header[0] != "P5" || header[3] != "255" {
            return Err(bad("expected binary PGM with maxval 255"));
        }
        let width: u32 = header[1].parse().map_err(|_| bad("bad width"))?;
        let height: u32 = header[2].parse().map_err(|_| bad("bad height"))?;
        let mut labels = Vec::with_capacity(width as usize * height as usize);
        r.read_to_end(&mut labels).map_err(|_| bad("unreadable raster"))?;
        Self::new(kind, width, height, labels)
    }

    /// Single-channel 16-bit TIFF carrying the same label codes.
    pub fn write_tiff16(&self, path: &Path) -> std::io::Result<()> {
        let to_io = |e: tiff::TiffError| std::io::Error::new(std::io::ErrorKind::Other, e.to_string());
        let mut enc = TiffEncoder::new(BufWriter::new(File::create(path)?)).map_err(to_io)?;
        let data: Vec<u16> = self.labels.iter().map(|&l| u16::from(l)).collect();
        enc.write_image::<colortype::Gray16>(self.width, self.height, &data).map_err(to_io)
    }
}
