//! Urban-macro path loss, line-of-sight probability, shadowing and
//! small-scale fading.

use rand::Rng as _;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use super::constants::uma;
use crate::error::{config_err, Result};
use crate::rng::Rng;
use crate::scenario::UeKind;

/// Geometry of one BS→UE link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkGeometry {
    pub d2d: f64,
    pub d3d: f64,
    pub h_bs: f64,
    pub h_ut: f64,
    /// Direction of the UE seen from the BS, degrees clockwise from north.
    pub azimuth_deg: f64,
    /// Elevation of the UE above the BS horizon.
    pub elevation_deg: f64,
}

impl LinkGeometry {
    pub fn between(bs: [f64; 3], ue: [f64; 3]) -> Self {
        let dx = ue[0] - bs[0];
        let dy = ue[1] - bs[1];
        let dz = ue[2] - bs[2];
        let d2d = dx.hypot(dy);
        Self {
            d2d,
            d3d: (d2d * d2d + dz * dz).sqrt(),
            h_bs: bs[2],
            h_ut: ue[2],
            azimuth_deg: dx.atan2(dy).to_degrees(),
            elevation_deg: dz.atan2(d2d).to_degrees(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Regime {
    Terrestrial,
    Aerial,
}

fn regime(geom: &LinkGeometry, kind: UeKind) -> Result<Regime> {
    let c = uma();
    let h = geom.h_ut;
    match kind {
        UeKind::Gue if (c.terrestrial.min_height_m..=c.terrestrial.max_height_m).contains(&h) => {
            Ok(Regime::Terrestrial)
        }
        UeKind::Uav if (c.terrestrial.min_height_m..=c.terrestrial.max_height_m).contains(&h) => {
            Ok(Regime::Terrestrial)
        }
        UeKind::Uav if h > c.aerial.min_height_m && h <= c.aerial.max_height_m => Ok(Regime::Aerial),
        _ => config_err(format!(
            "{} height {h} m outside the supported model bands",
            kind.as_str()
        )),
    }
}

fn terrestrial_los(geom: &LinkGeometry, fc_ghz: f64) -> f64 {
    let c = &uma().terrestrial;
    let d2d = geom.d2d.max(c.min_d2d_m);
    let dz = geom.h_bs - geom.h_ut;
    let d3d = (d2d * d2d + dz * dz).sqrt();
    let h_bs = geom.h_bs - c.env_height_m;
    let h_ut = geom.h_ut - c.env_height_m;
    let d_bp = 4.0 * h_bs * h_ut * fc_ghz * 1e9 / uma().speed_of_light_mps;
    let freq = c.freq_coef * fc_ghz.log10();
    if d2d <= d_bp {
        c.los_intercept_db + c.los_slope_near * d3d.log10() + freq
    } else {
        c.los_intercept_db + c.los_slope_far * d3d.log10() + freq
            - c.los_breakpoint_coef * (d_bp * d_bp + dz * dz).log10()
    }
}

fn terrestrial_nlos(geom: &LinkGeometry, fc_ghz: f64) -> f64 {
    let c = &uma().terrestrial;
    let d2d = geom.d2d.max(c.min_d2d_m);
    let dz = geom.h_bs - geom.h_ut;
    let d3d = (d2d * d2d + dz * dz).sqrt();
    let nlos = c.nlos_intercept_db + c.nlos_slope * d3d.log10() + c.freq_coef * fc_ghz.log10()
        - c.nlos_height_coef * (geom.h_ut - 1.5);
    nlos.max(terrestrial_los(geom, fc_ghz))
}

/// Path loss in dB (positive).
pub fn path_loss(geom: &LinkGeometry, kind: UeKind, los: bool, fc_ghz: f64) -> Result<f64> {
    if !(geom.d3d > 0.0) {
        return config_err("link distance must be positive");
    }
    Ok(match (regime(geom, kind)?, los) {
        (Regime::Terrestrial, true) => terrestrial_los(geom, fc_ghz),
        (Regime::Terrestrial, false) => terrestrial_nlos(geom, fc_ghz),
        (Regime::Aerial, true) => {
            let c = &uma().aerial;
            c.los_intercept_db + c.los_slope * geom.d3d.log10() + c.freq_coef * fc_ghz.log10()
        }
        (Regime::Aerial, false) => {
            let c = &uma().aerial;
            let slope = c.nlos_slope_base - c.nlos_slope_height_coef * geom.h_ut.log10();
            c.nlos_intercept_db
                + slope * geom.d3d.log10()
                + c.freq_coef * (40.0 * std::f64::consts::PI * fc_ghz / 3.0).log10()
        }
    })
}

pub fn los_probability(geom: &LinkGeometry, kind: UeKind) -> Result<f64> {
    Ok(match regime(geom, kind)? {
        Regime::Terrestrial => {
            let c = &uma().terrestrial;
            let d = geom.d2d;
            if d <= c.los_prob_d1_m {
                return Ok(1.0);
            }
            let base = c.los_prob_d1_m / d + (-d / c.los_prob_p1_m).exp() * (1.0 - c.los_prob_d1_m / d);
            let c_h = if geom.h_ut <= c.los_prob_height_knee_m {
                0.0
            } else {
                ((geom.h_ut - c.los_prob_height_knee_m) / 10.0).powf(1.5)
            };
            base * (1.0 + c_h * 1.25 * (d / 100.0).powi(3) * (-d / 150.0).exp())
        }
        Regime::Aerial => {
            let c = &uma().aerial;
            let h = geom.h_ut;
            if h > c.full_los_height_m {
                return Ok(1.0);
            }
            let p1 = c.los_prob_p1_log_coef * h.log10() + c.los_prob_p1_offset;
            let d1 = (c.los_prob_d1_log_coef * h.log10() + c.los_prob_d1_offset).max(c.los_prob_d1_min_m);
            let d = geom.d2d;
            if d <= d1 {
                1.0
            } else {
                d1 / d + (-d / p1).exp() * (1.0 - d1 / d)
            }
        }
    })
}

/// One Bernoulli draw from [`los_probability`]. Always consumes one uniform.
pub fn los_draw(geom: &LinkGeometry, kind: UeKind, rng: &mut Rng) -> Result<bool> {
    let p = los_probability(geom, kind)?;
    let u: f64 = rng.random();
    Ok(u < p)
}

pub fn shadow_sigma_db(geom: &LinkGeometry, kind: UeKind, los: bool) -> Result<f64> {
    Ok(match (regime(geom, kind)?, los) {
        (Regime::Terrestrial, true) => uma().terrestrial.sf_sigma_los_db,
        (Regime::Terrestrial, false) => uma().terrestrial.sf_sigma_nlos_db,
        (Regime::Aerial, true) => {
            let c = &uma().aerial;
            c.sf_los_scale_db * (-c.sf_los_decay_per_m * geom.h_ut).exp()
        }
        (Regime::Aerial, false) => uma().aerial.sf_sigma_nlos_db,
    })
}

/// Zero-mean lognormal shadowing sample in dB.
pub fn shadow_fading(rng: &mut Rng, sigma_db: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    sigma_db * z
}

/// Small-scale power gains `|h|²` for every (cell, UE) pair, UE-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingDraw {
    pub n_cells: usize,
    pub n_ues: usize,
    pub power_gain: Vec<f64>,
}

impl FadingDraw {
    pub fn get(&self, cell: usize, ue: usize) -> f64 {
        self.power_gain[ue * self.n_cells + cell]
    }

    pub fn ones(n_cells: usize, n_ues: usize) -> Self {
        Self {
            n_cells,
            n_ues,
            power_gain: vec![1.0; n_cells * n_ues],
        }
    }
}

/// Rayleigh fading for ground UEs, unit gain for UAVs.
pub fn small_scale(rng: &mut Rng, kinds: &[UeKind], n_cells: usize) -> FadingDraw {
    let mut power_gain = Vec::with_capacity(kinds.len() * n_cells);
    for &k in kinds {
        match k {
            UeKind::Gue => power_gain.extend((0..n_cells).map(|_| -> f64 { Exp1.sample(rng) })),
            UeKind::Uav => power_gain.extend(std::iter::repeat_n(1.0, n_cells)),
        }
    }
    FadingDraw {
        n_cells,
        n_ues: kinds.len(),
        power_gain,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn geom(d2d: f64, h_ut: f64) -> LinkGeometry {
        LinkGeometry::between([0.0, 0.0, 25.0], [0.0, d2d, h_ut])
    }

    fn uav_at_d3d(d3d: f64, h: f64) -> LinkGeometry {
        let dz = h - 25.0;
        geom((d3d * d3d - dz * dz).sqrt(), h)
    }

    #[test]
    fn uav_los_golden() {
        let g = uav_at_d3d(200.0, 150.0);
        let pl = path_loss(&g, UeKind::Uav, true, 2.0).unwrap();
        // 28 + 22 log10(200) + 20 log10(2)
        assert!((pl - 84.643_259_817_9).abs() < 1e-6, "{pl}");
        let pl2 = path_loss(&uav_at_d3d(400.0, 150.0), UeKind::Uav, true, 2.0).unwrap();
        assert!((pl2 - pl - 22.0 * 2f64.log10()).abs() < 1e-9);
    }

    #[test]
    fn gue_los_golden_at_100m() {
        let pl = path_loss(&geom(100.0, 1.5), UeKind::Gue, true, 2.0).unwrap();
        // d3d = sqrt(100² + 23.5²) below the 320 m breakpoint
        assert!((pl - 78.277_395_703_1).abs() < 1e-6, "{pl}");
        // same intercept with a square-law distance exponent
        let floor = 28.0 + 20.0 * 102.724_145f64.log10() + 20.0 * 2f64.log10();
        assert!(pl > floor && pl.is_finite());
    }

    #[test]
    fn gue_los_continuous_at_breakpoint() {
        let d_bp = 4.0 * 24.0 * 0.5 * 2e9 / 299_792_458.0;
        let a = path_loss(&geom(d_bp - 1e-7, 1.5), UeKind::Gue, true, 2.0).unwrap();
        let b = path_loss(&geom(d_bp + 1e-7, 1.5), UeKind::Gue, true, 2.0).unwrap();
        assert!((a - b).abs() < 1e-5);
    }

    #[test]
    fn path_loss_monotone_in_distance() {
        for (kind, h) in [
            (UeKind::Gue, 1.5),
            (UeKind::Uav, 50.0),
            (UeKind::Uav, 150.0),
            (UeKind::Uav, 15.0),
        ] {
            for los in [true, false] {
                let mut prev = f64::NEG_INFINITY;
                for i in 1..400 {
                    let pl = path_loss(&geom(i as f64 * 10.0, h), kind, los, 2.0).unwrap();
                    assert!(pl >= prev - 1e-12, "{kind:?} h={h} los={los} d={}", i * 10);
                    prev = pl;
                }
            }
        }
    }

    #[test]
    fn unsupported_heights_rejected() {
        assert!(path_loss(&geom(100.0, 400.0), UeKind::Uav, true, 2.0).is_err());
        assert!(path_loss(&geom(100.0, 50.0), UeKind::Gue, true, 2.0).is_err());
        assert!(path_loss(&geom(100.0, 1.0), UeKind::Gue, true, 2.0).is_err());
    }

    #[test]
    fn los_probability_limits() {
        assert_eq!(los_probability(&geom(800.0, 150.0), UeKind::Uav).unwrap(), 1.0);
        assert_eq!(los_probability(&geom(1e-3, 1.5), UeKind::Gue).unwrap(), 1.0);
        let near = los_probability(&geom(19.0, 1.5), UeKind::Gue).unwrap();
        let far = los_probability(&geom(500.0, 1.5), UeKind::Gue).unwrap();
        assert!(near > 0.98 && far < 0.1);
        let mid = los_probability(&geom(500.0, 50.0), UeKind::Uav).unwrap();
        assert!(mid > 0.5 && mid < 1.0);
        let mut r = rng::stream(1, 0);
        assert!((0..1000).all(|_| los_draw(&geom(900.0, 150.0), UeKind::Uav, &mut r).unwrap()));
    }

    #[test]
    fn los_draws_reproducible() {
        let draw = |seed| {
            let mut r = rng::stream(seed, rng::STREAM_LOS);
            (0..200)
                .map(|i| los_draw(&geom(20.0 + i as f64 * 3.0, 1.5), UeKind::Gue, &mut r).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(4), draw(4));
    }

    #[test]
    fn fading_statistics() {
        let mut r = rng::stream(5, rng::STREAM_FADING);
        let kinds = vec![UeKind::Gue; 100_000];
        let f = small_scale(&mut r, &kinds, 1);
        let mean = f.power_gain.iter().sum::<f64>() / f.power_gain.len() as f64;
        assert!((mean - 1.0).abs() < 0.02, "{mean}");
        assert!(f.power_gain.iter().all(|&g| g > 0.0));
        let uav = small_scale(&mut r, &[UeKind::Uav, UeKind::Uav], 57);
        assert!(uav.power_gain.iter().all(|&g| g == 1.0));
    }

    #[test]
    fn shadowing_std() {
        let mut r = rng::stream(6, rng::STREAM_LOS);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| shadow_fading(&mut r, 6.0)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!((sd - 6.0).abs() < 0.12, "{sd}");
        let g = geom(300.0, 150.0);
        let s = shadow_sigma_db(&g, UeKind::Uav, true).unwrap();
        assert!((s - 4.64 * (-0.0066f64 * 150.0).exp()).abs() < 1e-12);
    }
}
