use chrono::{Datelike, NaiveDate};

use super::{RadiometryError, Result, SolarGeometry, ZENITH_COS_EPSILON};
use crate::tile_io::TileMetadata;

/// Local solar time assumed when a tile carries no acquisition time
/// (sun-synchronous descending node, 10:30).
pub const DEFAULT_LOCAL_SOLAR_TIME: f64 = 10.5;

pub fn day_of_year(date: NaiveDate) -> u32 {
    date.ordinal()
}

fn distance_for_doy(doy: u32) -> f64 {
    1.0 - 0.01672 * (0.9856 * (f64::from(doy) - 4.0)).to_radians().cos()
}

/// Earth-sun distance in AU from the day-of-year cosine approximation.
pub fn earth_sun_distance(date: NaiveDate) -> f64 {
    distance_for_doy(day_of_year(date))
}

/// Cooper's declination approximation, degrees.
pub fn solar_declination_deg(doy: u32) -> f64 {
    23.45 * (360.0 * (284.0 + f64::from(doy)) / 365.0).to_radians().sin()
}

/// Solar zenith angle in degrees at a latitude and local solar time.
pub fn solar_zenith(date: NaiveDate, latitude_deg: f64, local_solar_time_hours: f64) -> Result<f64> {
    if !(-90.0..=90.0).contains(&latitude_deg) {
        return Err(RadiometryError::InvalidGeometry(format!("latitude {latitude_deg} outside [-90, 90]")));
    }
    if !(0.0..24.0).contains(&local_solar_time_hours) {
        return Err(RadiometryError::InvalidGeometry(format!(
            "local solar time {local_solar_time_hours} outside [0, 24)"
        )));
    }
    let phi = latitude_deg.to_radians();
    let delta = solar_declination_deg(day_of_year(date)).to_radians();
    let hour_angle = (15.0 * (local_solar_time_hours - 12.0)).to_radians();
    let cos_z = (phi.sin() * delta.sin() + phi.cos() * delta.cos() * hour_angle.cos()).clamp(-1.0, 1.0);
    let zenith_deg = cos_z.acos().to_degrees();
    // cos(90 deg) evaluates to ~6e-17, so the horizon test shares the
    // reflectance epsilon rather than comparing against exact zero.
    if cos_z <= ZENITH_COS_EPSILON {
        return Err(RadiometryError::SunBelowHorizon { zenith_deg });
    }
    Ok(zenith_deg)
}

/// Geometry for a tile from its metadata. Returns the local solar time
/// actually used alongside the geometry so outputs can record it.
pub fn tile_geometry(meta: &TileMetadata) -> Result<(SolarGeometry, f64)> {
    let time = meta.acquisition_time.unwrap_or(DEFAULT_LOCAL_SOLAR_TIME);
    let geom = SolarGeometry {
        earth_sun_distance_au: earth_sun_distance(meta.capture_date),
        solar_zenith_deg: solar_zenith(meta.capture_date, meta.center_latitude, time)?,
    };
    Ok((geom, time))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doy(n: u32) -> NaiveDate {
        NaiveDate::from_yo_opt(2013, n).unwrap()
    }

    #[test]
    fn perihelion_proxy() {
        assert!((earth_sun_distance(doy(4)) - 0.98328).abs() < 1e-12);
    }

    #[test]
    fn aphelion_proxy() {
        assert!((earth_sun_distance(doy(187)) - 1.01672).abs() < 1e-4);
    }

    #[test]
    fn distance_bounds_over_leap_year() {
        for n in 1..=366 {
            let d = distance_for_doy(n);
            assert!((0.98328 - 1e-12..=1.01672 + 1e-12).contains(&d), "doy {n}: {d}");
        }
    }

    #[test]
    fn equinox_noon_on_equator() {
        assert!(solar_zenith(doy(81), 0.0, 12.0).unwrap().abs() < 1e-6);
    }

    #[test]
    fn six_pm_equinox_is_below_horizon() {
        assert!(matches!(solar_zenith(doy(81), 0.0, 18.0), Err(RadiometryError::SunBelowHorizon { .. })));
    }

    #[test]
    fn midsummer_at_45_north() {
        let z = solar_zenith(doy(172), 45.0, 12.0).unwrap();
        assert!((z - 21.6).abs() < 0.2, "{z}");
    }

    #[test]
    fn input_ranges() {
        assert!(solar_zenith(doy(1), 91.0, 12.0).is_err());
        assert!(solar_zenith(doy(1), 0.0, 24.0).is_err());
    }

    #[test]
    fn tile_geometry_defaults_time() {
        let meta = TileMetadata {
            tile_id: "NH44B".into(),
            capture_date: NaiveDate::from_ymd_opt(2012, 9, 4).unwrap(),
            center_latitude: 26.0,
            center_longitude: 82.0,
            acquisition_time: None,
            radiometric_bits: 12,
        };
        let (g, t) = tile_geometry(&meta).unwrap();
        assert_eq!(t, DEFAULT_LOCAL_SOLAR_TIME);
        assert!(g.solar_zenith_deg > 0.0 && g.solar_zenith_deg < 90.0);
        assert!(g.validate().is_ok());
    }
}
