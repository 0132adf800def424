use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// One of the four AWiFS spectral bands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Band {
    /// Green.
    B2,
    /// Red.
    B3,
    /// Near infrared.
    B4,
    /// Short-wave infrared.
    B5,
}

impl Band {
    pub const ALL: [Band; 4] = [Band::B2, Band::B3, Band::B4, Band::B5];

    /// Position of the band in [`Band::ALL`].
    pub fn index(self) -> usize {
        match self {
            Band::B2 => 0,
            Band::B3 => 1,
            Band::B4 => 2,
            Band::B5 => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Band::B2 => "B2",
            Band::B3 => "B3",
            Band::B4 => "B4",
            Band::B5 => "B5",
        }
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown band {0:?} (expected B2, B3, B4 or B5)")]
pub struct UnknownBand(pub String);

impl FromStr for Band {
    type Err = UnknownBand;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "B2" => Ok(Band::B2),
            "B3" => Ok(Band::B3),
            "B4" => Ok(Band::B4),
            "B5" => Ok(Band::B5),
            _ => Err(UnknownBand(s.to_string())),
        }
    }
}
