use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BandCalibration, RadiometryError, Result};
use crate::band::Band;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BandEntry {
    band: Band,
    lmin: f64,
    lmax: f64,
    qcal_min: u16,
    qcal_max: u16,
    esun: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CalibrationFile {
    band: Vec<BandEntry>,
}

/// Calibration constants for all four bands.
///
/// File format (TOML), one table per band:
///
/// ```toml
/// [[band]]
/// band = "B2"
/// lmin = 0.0
/// lmax = 52.0
/// qcal_min = 0
/// qcal_max = 4095
/// esun = 1850.0
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSet {
    bands: [BandCalibration; 4],
}

impl CalibrationSet {
    pub fn new(bands: [BandCalibration; 4]) -> Result<Self> {
        for b in &bands {
            b.validate()?;
        }
        Ok(Self { bands })
    }

    /// Same constants for every band.
    pub fn uniform(cal: BandCalibration) -> Result<Self> {
        Self::new([cal; 4])
    }

    /// Non-physical placeholder constants. Real runs must supply the sensor's
    /// published LMIN/LMAX/ESUN through a calibration file.
    pub fn placeholder() -> Self {
        let cal = BandCalibration { lmin: 0.0, lmax: 50.0, qcal_min: 0, qcal_max: 4095, esun: 1500.0 };
        Self { bands: [cal; 4] }
    }

    pub fn get(&self, band: Band) -> &BandCalibration {
        &self.bands[band.index()]
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: CalibrationFile = toml::from_str(text).map_err(|e| RadiometryError::Config(e.to_string()))?;
        let mut slots: [Option<BandCalibration>; 4] = [None; 4];
        for e in file.band {
            let slot = &mut slots[e.band.index()];
            if slot.is_some() {
                return Err(RadiometryError::Config(format!("band {} listed twice", e.band)));
            }
            *slot = Some(BandCalibration::new(e.lmin, e.lmax, e.qcal_min, e.qcal_max, e.esun)?);
        }
        let mut bands = [BandCalibration { lmin: 0.0, lmax: 0.0, qcal_min: 0, qcal_max: 0, esun: 0.0 }; 4];
        for (band, slot) in Band::ALL.into_iter().zip(slots) {
            bands[band.index()] = slot.ok_or_else(|| RadiometryError::Config(format!("band {band} missing")))?;
        }
        Ok(Self { bands })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RadiometryError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            RadiometryError::Config(m) => RadiometryError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        let file = CalibrationFile {
            band: Band::ALL
                .iter()
                .map(|&band| {
                    let c = self.get(band);
                    BandEntry {
                        band,
                        lmin: c.lmin,
                        lmax: c.lmax,
                        qcal_min: c.qcal_min,
                        qcal_max: c.qcal_max,
                        esun: c.esun,
                    }
                })
                .collect(),
        };
        toml::to_string(&file).expect("calibration serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_is_exact() {
        let cal = BandCalibration::new(0.1, 40.95, 1, 4095, std::f64::consts::PI * 1234.567).unwrap();
        let set = CalibrationSet::uniform(cal).unwrap();
        let back = CalibrationSet::from_toml_str(&set.to_toml_string()).unwrap();
        assert_eq!(back, set);
    }

    #[test]
    fn missing_and_duplicate_bands() {
        let one = "[[band]]\nband = \"B2\"\nlmin = 0.0\nlmax = 1.0\nqcal_min = 0\nqcal_max = 4095\nesun = 1.0\n";
        let err = CalibrationSet::from_toml_str(one).unwrap_err().to_string();
        assert!(err.contains("B3 missing"), "{err}");
        let twice = format!("{one}{one}");
        assert!(CalibrationSet::from_toml_str(&twice).unwrap_err().to_string().contains("twice"));
    }

    #[test]
    fn invalid_constants_rejected() {
        let mut text = CalibrationSet::placeholder().to_toml_string();
        text = text.replacen("esun = 1500.0", "esun = -1.0", 1);
        assert!(matches!(CalibrationSet::from_toml_str(&text), Err(RadiometryError::InvalidCalibration(_))));
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = CalibrationSet::placeholder().to_toml_string().replacen("esun", "gain = 1.0\nesun", 1);
        assert!(CalibrationSet::from_toml_str(&text).is_err());
    }
}
