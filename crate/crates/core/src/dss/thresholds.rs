use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use super::{DssError, Result};
use crate::features::PixelFeatures;

/// Features a threshold can test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Feature {
    B2,
    B3,
    B4,
    B5,
    Brt,
    Ndvi,
    Baim,
}

impl Feature {
    pub const BANDS: [Feature; 4] = [Feature::B2, Feature::B3, Feature::B4, Feature::B5];
    pub const WATER: [Feature; 6] = [Feature::B2, Feature::B3, Feature::B4, Feature::B5, Feature::Brt, Feature::Ndvi];
    pub const AUXILIARY: [Feature; 3] = [Feature::Baim, Feature::Ndvi, Feature::Brt];

    pub fn as_str(self) -> &'static str {
        match self {
            Feature::B2 => "B2",
            Feature::B3 => "B3",
            Feature::B4 => "B4",
            Feature::B5 => "B5",
            Feature::Brt => "BRT",
            Feature::Ndvi => "NDVI",
            Feature::Baim => "BAIM",
        }
    }

    /// Value of this feature at a pixel; `None` for an absent BAIM.
    pub fn value(self, f: &PixelFeatures) -> Option<f64> {
        match self {
            Feature::B2 => Some(f.b2),
            Feature::B3 => Some(f.b3),
            Feature::B4 => Some(f.b4),
            Feature::B5 => Some(f.b5),
            Feature::Brt => Some(f.brt),
            Feature::Ndvi => Some(f.ndvi),
            Feature::Baim => f.baim,
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Feature {
    type Err = DssError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_uppercase().as_str() {
            "B2" => Feature::B2,
            "B3" => Feature::B3,
            "B4" => Feature::B4,
            "B5" => Feature::B5,
            "BRT" => Feature::Brt,
            "NDVI" => Feature::Ndvi,
            "BAIM" => Feature::Baim,
            _ => return Err(DssError::InvalidThreshold(format!("unknown feature {s:?}"))),
        })
    }
}

/// Interval with independently open or closed ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureRange {
    pub lo: f64,
    pub hi: f64,
    pub lo_inclusive: bool,
    pub hi_inclusive: bool,
}

impl FeatureRange {
    pub fn new(lo: f64, hi: f64, lo_inclusive: bool, hi_inclusive: bool) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(DssError::InvalidThreshold(format!("range [{lo}, {hi}] is not well ordered")));
        }
        Ok(Self { lo, hi, lo_inclusive, hi_inclusive })
    }

    pub const fn closed(lo: f64, hi: f64) -> Self {
        Self { lo, hi, lo_inclusive: true, hi_inclusive: true }
    }

    pub const fn open(lo: f64, hi: f64) -> Self {
        Self { lo, hi, lo_inclusive: false, hi_inclusive: false }
    }

    /// NaN is never contained.
    #[inline]
    pub fn contains(&self, v: f64) -> bool {
        let above = if self.lo_inclusive { v >= self.lo } else { v > self.lo };
        let below = if self.hi_inclusive { v <= self.hi } else { v < self.hi };
        above && below
    }
}

/// Conjunction of feature ranges.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RangeSet(BTreeMap<Feature, FeatureRange>);

impl RangeSet {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (Feature, FeatureRange)>) -> Self {
        Self(pairs.into_iter().collect())
    }

    pub fn get(&self, feature: Feature) -> Option<&FeatureRange> {
        self.0.get(&feature)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Feature, &FeatureRange)> {
        self.0.iter().map(|(k, v)| (*k, v))
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// True when every listed feature is present and inside its range.
    pub fn matches(&self, f: &PixelFeatures) -> bool {
        self.0.iter().all(|(feat, r)| feat.value(f).is_some_and(|v| r.contains(v)))
    }

    fn features(&self) -> Vec<Feature> {
        self.0.keys().copied().collect()
    }
}

/// Thresholds for both decision trees.
///
/// The burnt-sure check reuses `burnt_probable` for its band ranges, so the
/// sure test always nests inside the probable test.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdTable {
    pub clear_water: RangeSet,
    pub muddy_water: RangeSet,
    /// Empirical burnt ranges for reference; not consulted by the classifier.
    pub burnt: RangeSet,
    /// Band ranges of the first burnt filter.
    pub burnt_probable: RangeSet,
    /// BAIM, NDVI and BRT ranges of the second burnt filter.
    pub burnt_sure: RangeSet,
}

const SECTIONS: [&str; 5] = ["clear_water", "muddy_water", "burnt", "burnt_probable", "burnt_sure"];

impl Default for ThresholdTable {
    /// Published water ranges and burnt-area filter literals.
    fn default() -> Self {
        use Feature::*;
        let c = FeatureRange::closed;
        let o = FeatureRange::open;
        Self {
            clear_water: RangeSet::from_pairs([
                (B2, c(0.0078, 0.0142)),
                (B3, c(0.0046, 0.0118)),
                (B4, c(0.0047, 0.0228)),
                (B5, c(0.0037, 0.0221)),
                (Brt, c(0.0255, 0.0677)),
                (Ndvi, c(-0.1746, 0.6600)),
            ]),
            muddy_water: RangeSet::from_pairs([
                (B2, c(0.0076, 0.0239)),
                (B3, c(0.0048, 0.0233)),
                (B4, c(0.0159, 0.0285)),
                (B5, c(0.0148, 0.0276)),
                (Brt, c(0.0475, 0.0992)),
                (Ndvi, c(-0.0492, 0.608)),
            ]),
            burnt: RangeSet::from_pairs([
                (B2, c(0.0092, 0.0100)),
                (B3, c(0.0071, 0.0084)),
                (B4, c(0.0092, 0.0154)),
                (B5, c(0.0087, 0.0155)),
                (Brt, c(0.0343, 0.0479)),
                (Ndvi, c(0.1203, 0.3598)),
                (Baim, c(558.3829, 922.4521)),
            ]),
            burnt_probable: RangeSet::from_pairs([
                (B2, o(0.0085, 0.010)),
                (B3, o(0.004, 0.008)),
                (B4, o(0.0085, 0.0170)),
                (B5, o(0.01, 0.0130)),
            ]),
            burnt_sure: RangeSet::from_pairs([
                (Baim, c(585.0, 925.0)),
                (Ndvi, c(0.09, 0.45)),
                (Brt, c(0.035, 0.05)),
            ]),
        }
    }
}

impl ThresholdTable {
    /// Default table with the burnt-sure BAIM/NDVI/BRT ranges taken from the
    /// empirical burnt column instead of the filter literals.
    pub fn with_empirical_burnt_sure() -> Self {
        let mut t = Self::default();
        t.burnt_sure = RangeSet::from_pairs(Feature::AUXILIARY.iter().map(|&f| (f, *t.burnt.get(f).expect("present"))));
        t
    }

    pub fn validate(&self) -> Result<()> {
        let expect = |name: &str, set: &RangeSet, want: &[Feature]| {
            let mut want = want.to_vec();
            want.sort();
            if set.features() != want {
                return Err(DssError::InvalidThreshold(format!(
                    "section {name} must list exactly {}",
                    want.iter().map(|f| f.as_str()).collect::<Vec<_>>().join(", ")
                )));
            }
            for (f, r) in set.iter() {
                FeatureRange::new(r.lo, r.hi, r.lo_inclusive, r.hi_inclusive)
                    .map_err(|e| DssError::InvalidThreshold(format!("{name} {f}: {e}")))?;
            }
            Ok(())
        };
        expect("clear_water", &self.clear_water, &Feature::WATER)?;
        expect("muddy_water", &self.muddy_water, &Feature::WATER)?;
        expect("burnt_probable", &self.burnt_probable, &Feature::BANDS)?;
        expect("burnt_sure", &self.burnt_sure, &Feature::AUXILIARY)?;
        for (f, r) in self.burnt.iter() {
            FeatureRange::new(r.lo, r.hi, r.lo_inclusive, r.hi_inclusive)
                .map_err(|e| DssError::InvalidThreshold(format!("burnt {f}: {e}")))?;
        }
        Ok(())
    }

    fn section(&self, name: &str) -> &RangeSet {
        match name {
            "clear_water" => &self.clear_water,
            "muddy_water" => &self.muddy_water,
            "burnt" => &self.burnt,
            "burnt_probable" => &self.burnt_probable,
            _ => &self.burnt_sure,
        }
    }

    /// Text format: `[section]` headers, then `feature lo hi lo_inc hi_inc`
    /// lines with inclusivity flags as 0/1. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut sections: BTreeMap<&str, RangeSet> = BTreeMap::new();
        let mut current: Option<&str> = None;
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let err = |m: String| DssError::Config { line: line_no, message: m };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                let name = SECTIONS
                    .iter()
                    .find(|s| **s == name.trim())
                    .ok_or_else(|| err(format!("unknown section [{name}]")))?;
                if sections.contains_key(name) {
                    return Err(err(format!("section [{name}] repeated")));
                }
                sections.insert(name, RangeSet::default());
                current = Some(name);
                continue;
            }
            let section = current.ok_or_else(|| err("range line before any section".into()))?;
            let tok: Vec<&str> = line.split_whitespace().collect();
            if tok.len() != 5 {
                return Err(err(format!("expected `feature lo hi lo_inc hi_inc`, got {line:?}")));
            }
            let feature: Feature = tok[0].parse().map_err(|e: DssError| err(e.to_string()))?;
            let num = |s: &str| s.parse::<f64>().map_err(|_| err(format!("bad number {s:?}")));
            let flag = |s: &str| match s {
                "1" | "true" => Ok(true),
                "0" | "false" => Ok(false),
                _ => Err(err(format!("bad inclusivity flag {s:?}"))),
            };
            let range = FeatureRange::new(num(tok[1])?, num(tok[2])?, flag(tok[3])?, flag(tok[4])?)
                .map_err(|e| err(e.to_string()))?;
            let set = sections.get_mut(section).expect("section exists");
            if set.0.insert(feature, range).is_some() {
                return Err(err(format!("{feature} repeated in [{section}]")));
            }
        }
        let mut take = |name: &str| sections.remove(name);
        let missing = |name: &str| DssError::InvalidThreshold(format!("section [{name}] missing"));
        let table = Self {
            clear_water: take("clear_water").ok_or_else(|| missing("clear_water"))?,
            muddy_water: take("muddy_water").ok_or_else(|| missing("muddy_water"))?,
            burnt: take("burnt").unwrap_or_default(),
            burnt_probable: take("burnt_probable").ok_or_else(|| missing("burnt_probable"))?,
            burnt_sure: take("burnt_sure").ok_or_else(|| missing("burnt_sure"))?,
        };
        table.validate()?;
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| DssError::Io { path: path.to_path_buf(), source: e })?;
        Self::parse(&text)
    }

    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        for name in SECTIONS {
            let set = self.section(name);
            if set.is_empty() {
                continue;
            }
            writeln!(out, "[{name}]").unwrap();
            for (f, r) in set.iter() {
                writeln!(out, "{f} {:?} {:?} {} {}", r.lo, r.hi, u8::from(r.lo_inclusive), u8::from(r.hi_inclusive)).unwrap();
            }
            out.push('\n');
        }
        out
    }
}
