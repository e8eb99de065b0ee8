use heli_smc::gains::{adapt_step, check_feasibility, gain_values, GainConfig, GainState};
use proptest::prelude::*;

fn cfg(m: f64) -> GainConfig {
    GainConfig::new([2.0, 2.5, 4.0, 30.0], m, 5.0)
}

proptest! {
    #[test]
    fn l0_never_decreases(surfaces in prop::collection::vec(-0.01f64..0.01, 1..200), kappa in 0.1f64..20.0) {
        let c = GainConfig { kappa, ..cfg(3.0) };
        let mut st = GainState::new(&c);
        for s in surfaces {
            let next = adapt_step(st, s, &c, 1e-3);
            prop_assert!(next.l0 >= st.l0);
            if s.abs() < c.epsilon {
                prop_assert_eq!(next.l0, st.l0);
            }
            st = next;
        }
    }

    #[test]
    fn gains_grow_with_l0(a in 0.01f64..100.0, b in 0.01f64..100.0, m in 2.0f64..8.0) {
        let c = cfg(m);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let gl = gain_values(&c, &GainState { l0: lo });
        let gh = gain_values(&c, &GainState { l0: hi });
        prop_assert!(gl.l1 <= gh.l1 && gl.l2 <= gh.l2 && gl.l3 <= gh.l3 && gl.l4 <= gh.l4);
    }

    #[test]
    fn exponents_are_homogeneous(l0 in 0.05f64..50.0, m in 2.0001f64..10.0) {
        let unit = GainConfig::new([1.0; 4], m, 1.0);
        let g = gain_values(&unit, &GainState { l0 });
        prop_assert!((g.l2 - g.l3).abs() <= 1e-12 * g.l2);
        prop_assert!((g.l4 - g.l2 * g.l2).abs() <= 1e-10 * g.l4);
        prop_assert!((g.l1 * g.l1 - g.l2).abs() <= 1e-10 * g.l2);
    }

    #[test]
    fn margin_increases_with_k4(a in 0.1f64..100.0, b in 0.1f64..100.0, m in 2.1f64..6.0) {
        prop_assume!((a - b).abs() > 1e-6);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let f_lo = check_feasibility(&GainConfig { k4: lo, ..cfg(m) }).unwrap();
        let f_hi = check_feasibility(&GainConfig { k4: hi, ..cfg(m) }).unwrap();
        prop_assert!(f_hi.margin > f_lo.margin);
        // Linear in k4 with slope m²k₃.
        let slope = (f_hi.margin - f_lo.margin) / (hi - lo);
        prop_assert!((slope - m * m * 4.0).abs() <= 1e-9 * slope);
    }
}

#[test]
fn feasibility_of_the_reference_gains() {
    let f = check_feasibility(&cfg(3.0)).unwrap();
    assert_eq!((f.lhs, f.rhs), (1080.0, 962.5));
    assert!(f.feasible && !f.out_of_family);
    let f2 = check_feasibility(&cfg(2.0)).unwrap();
    assert_eq!((f2.lhs, f2.rhs), (480.0, 425.0));
    assert!(f2.out_of_family);
    assert!(check_feasibility(&cfg(1.0)).is_err());
}
