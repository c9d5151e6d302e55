use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uavtilt::netsim::{geo_mean, map_objective_to_geomean, normalized_objective, objective};
use uavtilt::scenario::UeKind;
use uavtilt::turbo::tr_side_lengths;

#[test]
fn side_lengths_hand_values() {
    let s = tr_side_lengths(0.8, &[1.0, 4.0]);
    assert!((s[0] - 0.4).abs() < 1e-12);
    assert!((s[1] - 1.6).abs() < 1e-12);
    let s = tr_side_lengths(0.5, &[2.0, 2.0, 2.0]);
    assert!(s.iter().all(|v| (v - 0.5).abs() < 1e-12));
}

#[test]
fn side_length_volume_is_length_to_the_d() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    for _ in 0..1000 {
        let d = rng.random_range(1..=114);
        let l = rng.random_range(2f64.powi(-7)..1.6);
        let ls: Vec<f64> = (0..d).map(|_| rng.random_range(0.01..10.0)).collect();
        let s = tr_side_lengths(l, &ls);
        let log_vol: f64 = s.iter().map(|v| v.ln()).sum();
        let rel = (log_vol - d as f64 * l.ln()).exp() - 1.0;
        assert!(rel.abs() <= 1e-9, "d {d}: relative volume error {rel}");
    }
}

proptest! {
    #[test]
    fn geomean_objective_round_trip(rates in prop::collection::vec(1.0..1e8f64, 1..300), split in 0.0..1.0f64) {
        let n = rates.len();
        let n_uav = (split * n as f64) as usize;
        let kinds: Vec<UeKind> = (0..n).map(|i| if i < n_uav { UeKind::Uav } else { UeKind::Gue }).collect();
        let f = objective(&rates, &kinds, 0.5, 1e-3);
        let g = geo_mean(&rates);
        // twice the λ = 0.5 objective is the plain sum of logs
        prop_assert!((map_objective_to_geomean(2.0 * f, n) / g - 1.0).abs() <= 1e-12);
        prop_assert!((normalized_objective(f, &kinds, 0.5).exp() / g - 1.0).abs() <= 1e-12);
    }
}
