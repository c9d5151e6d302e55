//! Adopted urban-macro propagation constants.
//!
//! Ground links (UE height 1.5–22.5 m) follow the terrestrial UMa model;
//! aerial links (22.5–300 m) follow the UMa-AV model for aerial vehicles.
//! The table ships as `resources/uma_constants.json` so that every golden
//! value in the test suite can be traced to a single number.

use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

pub const UMA_CONSTANTS_JSON: &str = include_str!("../../resources/uma_constants.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerrestrialUma {
    pub min_height_m: f64,
    pub max_height_m: f64,
    /// Horizontal distances below this are clamped.
    pub min_d2d_m: f64,
    pub env_height_m: f64,
    pub los_intercept_db: f64,
    pub los_slope_near: f64,
    pub los_slope_far: f64,
    pub los_breakpoint_coef: f64,
    pub nlos_intercept_db: f64,
    pub nlos_slope: f64,
    pub nlos_height_coef: f64,
    pub freq_coef: f64,
    pub sf_sigma_los_db: f64,
    pub sf_sigma_nlos_db: f64,
    pub los_prob_d1_m: f64,
    pub los_prob_p1_m: f64,
    pub los_prob_height_knee_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AerialUma {
    pub min_height_m: f64,
    pub max_height_m: f64,
    pub los_intercept_db: f64,
    pub los_slope: f64,
    pub nlos_intercept_db: f64,
    pub nlos_slope_base: f64,
    pub nlos_slope_height_coef: f64,
    pub freq_coef: f64,
    pub sf_los_scale_db: f64,
    pub sf_los_decay_per_m: f64,
    pub sf_sigma_nlos_db: f64,
    pub full_los_height_m: f64,
    pub los_prob_p1_log_coef: f64,
    pub los_prob_p1_offset: f64,
    pub los_prob_d1_log_coef: f64,
    pub los_prob_d1_offset: f64,
    pub los_prob_d1_min_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AntennaConstants {
    pub anchor_max_gain_dbi: f64,
    pub anchor_hpbw_deg: f64,
    pub attenuation_coef: f64,
    pub max_attenuation_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UmaConstants {
    pub thermal_noise_dbm_per_hz: f64,
    pub speed_of_light_mps: f64,
    pub terrestrial: TerrestrialUma,
    pub aerial: AerialUma,
    pub antenna: AntennaConstants,
}

static CONSTANTS: LazyLock<UmaConstants> =
    LazyLock::new(|| serde_json::from_str(UMA_CONSTANTS_JSON).expect("embedded constants table is valid JSON"));

pub fn uma() -> &'static UmaConstants {
    &CONSTANTS
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_loads() {
        let c = uma();
        assert_eq!(c.thermal_noise_dbm_per_hz, -174.0);
        assert_eq!(c.aerial.max_height_m, 300.0);
        assert_eq!(c.terrestrial.max_height_m, c.aerial.min_height_m);
        assert_eq!(c.antenna.max_attenuation_db, 25.0);
    }
}
