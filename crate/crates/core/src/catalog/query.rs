use chrono::NaiveDate;

use super::{CatalogError, CatalogRecord, Result};

/// Closed percentage interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PercentInterval {
    lo: f64,
    hi: f64,
}

impl PercentInterval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(CatalogError::InvalidQuery(format!("percentage interval [{lo}, {hi}] is not well-ordered")));
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    /// Absent values never match.
    pub fn contains(&self, v: Option<f64>) -> bool {
        v.is_some_and(|v| self.lo <= v && v <= self.hi)
    }
}

/// Conjunction of optional filters. Every interval is inclusive.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Query {
    tile_id: Option<String>,
    dates: Option<(NaiveDate, NaiveDate)>,
    water: Option<PercentInterval>,
    burnt: Option<PercentInterval>,
}

impl Query {
    /// Matches every record.
    pub fn all() -> Self {
        Self::default()
    }

    pub fn with_tile(mut self, tile_id: impl Into<String>) -> Self {
        self.tile_id = Some(tile_id.into());
        self
    }

    pub fn with_dates(mut self, from: NaiveDate, to: NaiveDate) -> Result<Self> {
        if from > to {
            return Err(CatalogError::InvalidQuery(format!("date interval {from}..{to} is not well-ordered")));
        }
        self.dates = Some((from, to));
        Ok(self)
    }

    pub fn with_water(mut self, lo: f64, hi: f64) -> Result<Self> {
        self.water = Some(PercentInterval::new(lo, hi)?);
        Ok(self)
    }

    pub fn with_burnt(mut self, lo: f64, hi: f64) -> Result<Self> {
        self.burnt = Some(PercentInterval::new(lo, hi)?);
        Ok(self)
    }

    pub fn tile_id(&self) -> Option<&str> {
        self.tile_id.as_deref()
    }

    pub fn dates(&self) -> Option<(NaiveDate, NaiveDate)> {
        self.dates
    }

    pub fn water(&self) -> Option<PercentInterval> {
        self.water
    }

    pub fn burnt(&self) -> Option<PercentInterval> {
        self.burnt
    }

    pub fn matches(&self, r: &CatalogRecord) -> bool {
        self.tile_id.as_deref().map_or(true, |t| t == r.tile_id)
            && self.dates.map_or(true, |(a, b)| a <= r.capture_date && r.capture_date <= b)
            && self.water.map_or(true, |i| i.contains(r.water_percent))
            && self.burnt.map_or(true, |i| i.contains(r.burnt_percent))
    }
}
