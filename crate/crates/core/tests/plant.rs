use heli_smc::plant::{aux_to_physical, controls_to_voltages, plant_deriv, DisturbanceSpec, HeliParams, PlantState};
use heli_smc::scenario::BUNDLED;
use heli_smc::scenario::Scenario;
use proptest::prelude::*;

proptest! {
    #[test]
    fn gravity_pulls_elevation_down(x1 in -1.5f64..1.5, x3 in -1.4f64..1.4) {
        let p = HeliParams::default();
        let d = plant_deriv(&PlantState::new(x1, 0.0, x3, 0.0), 0.0, 0.0, 0.0, 0.0, &p);
        prop_assert_eq!(d[3], 0.0);
        prop_assert!(d[1] < 0.0);
    }

    #[test]
    fn voltage_map_round_trips(vf in -24.0f64..24.0, vb in -24.0f64..24.0) {
        let p = HeliParams::default();
        let (u1, u2) = (p.k_f * (vf + vb), p.k_f * (vf - vb));
        let v = controls_to_voltages(u1, u2, &p, true);
        prop_assert!(!v.saturated);
        prop_assert!((v.front - vf).abs() < 1e-12 && (v.back - vb).abs() < 1e-12);
        let (r1, r2) = v.to_controls(&p);
        prop_assert!((r1 - u1).abs() < 1e-12 && (r2 - u2).abs() < 1e-12);
    }

    #[test]
    fn cosine_cancels(v1 in -5.0f64..5.0, v2 in -5.0f64..5.0, x3 in -1.47f64..1.47) {
        let (u1, u2) = aux_to_physical(v1, v2, x3, 0.1).unwrap();
        prop_assert!((x3.cos() * u1 - v1).abs() <= 1e-12 * v1.abs().max(1.0));
        prop_assert_eq!(u2, v2);
    }

    #[test]
    fn sinusoid_respects_its_bounds(
        a in -3.0f64..3.0, w in 0.0f64..10.0, ph in -3.2f64..3.2, off in -1.0f64..1.0, t in 0.0f64..100.0,
    ) {
        let d = DisturbanceSpec::sinusoid(a, w, ph, off);
        prop_assert!(d.eval(t).unwrap().abs() <= d.magnitude_bound() + 1e-12);
        let dt = 1e-6;
        let rate = (d.eval(t + dt).unwrap() - d.eval(t).unwrap()) / dt;
        prop_assert!(rate.abs() <= d.rate_bound() + 1e-4);
    }
}

#[test]
fn bundled_disturbances_are_bounded() {
    for (file, text) in BUNDLED {
        let sc = Scenario::from_toml_str(text).unwrap();
        for d in [&sc.disturbance.elevation, &sc.disturbance.pitch] {
            let (bound, rate) = (d.magnitude_bound(), d.rate_bound());
            assert!(bound.is_finite() && rate.is_finite(), "{file}");
            for k in 0..=6000 {
                let t = k as f64 * 0.01;
                assert!(d.eval(t).unwrap().abs() <= bound + 1e-12, "{file} at {t}");
            }
        }
    }
}

#[test]
fn saturation_clamps_and_flags() {
    let p = HeliParams::default();
    let v = controls_to_voltages(10.0, 0.0, &p, true);
    assert!(v.saturated);
    assert_eq!((v.front, v.back), (24.0, 24.0));
    let free = controls_to_voltages(10.0, 0.0, &p, false);
    assert!(!free.saturated && free.front > 24.0);
}
