//! Sector antenna pattern.

use serde::{Deserialize, Serialize};

use super::constants::uma;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AntennaPattern {
    /// Boresight azimuth, degrees clockwise from north.
    pub bearing_deg: f64,
    /// Boresight elevation above the horizon; negative is a down-tilt.
    pub tilt_deg: f64,
    pub h_hpbw_deg: f64,
    pub v_hpbw_deg: f64,
    pub max_gain_dbi: f64,
}

impl AntennaPattern {
    /// Pattern whose peak gain follows the beamwidths via [`max_gain`].
    pub fn new(bearing_deg: f64, tilt_deg: f64, h_hpbw_deg: f64, v_hpbw_deg: f64) -> Self {
        Self {
            bearing_deg,
            tilt_deg,
            h_hpbw_deg,
            v_hpbw_deg,
            max_gain_dbi: max_gain(v_hpbw_deg, h_hpbw_deg),
        }
    }
}

/// Wrap an angle in degrees to (−180, 180].
pub fn wrap_deg(a: f64) -> f64 {
    let w = (a + 180.0).rem_euclid(360.0) - 180.0;
    if w == -180.0 {
        180.0
    } else {
        w
    }
}

/// Attenuation of one principal plane, in [−cap, 0].
pub fn plane_attenuation(offset_deg: f64, hpbw_deg: f64) -> f64 {
    let c = &uma().antenna;
    -(c.attenuation_coef * (offset_deg / hpbw_deg).powi(2)).min(c.max_attenuation_db)
}

/// Combined attenuation of both planes, floored at the side-lobe level.
pub fn combine_attenuation(horizontal_db: f64, vertical_db: f64) -> f64 {
    (horizontal_db + vertical_db).max(-uma().antenna.max_attenuation_db)
}

/// Gain toward (azimuth, elevation), including the peak gain.
pub fn antenna_gain(azimuth_deg: f64, elevation_deg: f64, pattern: &AntennaPattern) -> f64 {
    let a_h = plane_attenuation(wrap_deg(azimuth_deg - pattern.bearing_deg), pattern.h_hpbw_deg);
    let a_v = plane_attenuation(elevation_deg - pattern.tilt_deg, pattern.v_hpbw_deg);
    pattern.max_gain_dbi + combine_attenuation(a_h, a_v)
}

/// Peak gain scaled with beam solid angle from the 65°×65° → 8 dBi anchor.
pub fn max_gain(v_hpbw_deg: f64, h_hpbw_deg: f64) -> f64 {
    let c = &uma().antenna;
    c.anchor_max_gain_dbi + 10.0 * ((c.anchor_hpbw_deg * c.anchor_hpbw_deg) / (v_hpbw_deg * h_hpbw_deg)).log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn pattern(v: f64) -> AntennaPattern {
        AntennaPattern::new(30.0, -12.0, 65.0, v)
    }

    #[test]
    fn boresight_peak_is_8_dbi_for_65_by_65() {
        let p = AntennaPattern::new(30.0, 0.0, 65.0, 65.0);
        assert!((antenna_gain(30.0, 0.0, &p) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn max_gain_values() {
        assert!((max_gain(65.0, 65.0) - 8.0).abs() < 1e-12);
        assert!((max_gain(6.5, 65.0) - 18.0).abs() < 1e-12);
        let d = max_gain(5.0, 65.0) - max_gain(10.0, 65.0);
        assert!((d - 10.0 * 2f64.log10()).abs() < 1e-12);
    }

    #[test]
    fn half_beamwidth_is_minus_3_db() {
        let p = pattern(10.0);
        let g = antenna_gain(30.0, -12.0 + 5.0, &p);
        assert!((g - (p.max_gain_dbi - 3.0)).abs() < 1e-12);
        let g = antenna_gain(30.0 + 32.5, -12.0, &p);
        assert!((g - (p.max_gain_dbi - 3.0)).abs() < 1e-12);
    }

    #[test]
    fn floor_at_25_db() {
        let p = pattern(10.0);
        let k = 2.0 * (25.0f64 / 12.0).sqrt();
        let g = antenna_gain(30.0 + 65.0 * k, -12.0 + 10.0 * k, &p);
        assert!((g - (p.max_gain_dbi - 25.0)).abs() < 1e-12);
        assert!((antenna_gain(210.0, 80.0, &p) - (p.max_gain_dbi - 25.0)).abs() < 1e-12);
    }

    #[test]
    fn azimuth_wraps() {
        assert_eq!(wrap_deg(190.0), -170.0);
        assert_eq!(wrap_deg(-180.0), 180.0);
        assert_eq!(wrap_deg(540.0), 180.0);
        let p = AntennaPattern::new(350.0, 0.0, 65.0, 65.0);
        assert!((antenna_gain(10.0, 0.0, &p) - antenna_gain(330.0, 0.0, &p)).abs() < 1e-12);
    }

    #[test]
    fn double_min_form_matches_max_form() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let c = &uma().antenna;
        for _ in 0..10_000 {
            let ah = plane_attenuation(rng.random_range(-180.0..180.0), rng.random_range(5.0..70.0));
            let av = plane_attenuation(rng.random_range(-90.0..90.0), rng.random_range(5.0..70.0));
            let double_min = -(-(ah + av)).min(c.max_attenuation_db);
            assert!((double_min - combine_attenuation(ah, av)).abs() < 1e-12);
            assert!((-25.0..=0.0).contains(&ah) && (-25.0..=0.0).contains(&av));
        }
    }
}
