use phonon_core::saw::{
    fit_bvd, generate_bvd, linear_grid_hz, mirror_reflection, resonator_admittance, BvdParams,
    SawModelParams,
};
use phonon_core::{hz_to_rad, C64};
use proptest::prelude::*;

fn arb_params() -> impl Strategy<Value = SawModelParams> {
    (
        5usize..40,
        0usize..600,
        0.005f64..0.05,
        0.01f64..0.06,
        0.0f64..3000.0,
        0.0f64..1e-6,
        0.0f64..0.1,
    )
        .prop_map(|(np, nm, rt, rm, eta, gap, k2)| SawModelParams {
            transducer_pairs: np,
            mirror_lines: nm,
            r_t: C64::new(0.0, rt),
            r_m: C64::new(0.0, -rm),
            eta,
            gap_t_m: gap,
            k2,
            ..SawModelParams::default()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn admittance_is_passive(p in arb_params()) {
        let grid = linear_grid_hz(3.9e9, 4.1e9, 201);
        let s = resonator_admittance(&grid, &p).unwrap();
        for y in &s.y {
            prop_assert!(y.re >= -1e-12, "Re Y = {}", y.re);
        }
    }

    #[test]
    fn mirror_reflection_is_bounded(p in arb_params(), f in 3.5e9f64..4.5e9) {
        let g = mirror_reflection(hz_to_rad(f), &p).unwrap();
        prop_assert!(g.norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn two_routes_to_no_mirror_agree(p in arb_params()) {
        let grid = linear_grid_hz(3.95e9, 4.05e9, 41);
        let a = resonator_admittance(&grid, &SawModelParams { mirror_lines: 0, ..p }).unwrap();
        let b = resonator_admittance(&grid, &SawModelParams { r_m: C64::new(0.0, 0.0), ..p }).unwrap();
        for (x, y) in a.y.iter().zip(&b.y) {
            prop_assert!((x - y).norm() <= 1e-9 * x.norm().max(1e-12), "{x} vs {y}");
        }
    }

    #[test]
    fn bvd_round_trip(
        c_s in 5e-15f64..30e-15,
        l_s in 60e-9f64..250e-9,
        q in 1e3f64..1e4,
    ) {
        let ws = 1.0 / (l_s * c_s).sqrt();
        let r_s = (l_s / c_s).sqrt() / q;
        let p = BvdParams { c_s, l_s, r_s, c_t: 0.75e-12 };
        let fs = ws / std::f64::consts::TAU;
        let grid = linear_grid_hz(fs - 10e6, fs + 10e6, 2001);
        let fit = fit_bvd(&generate_bvd(&p, &grid).unwrap(), (grid[0], grid[2000])).unwrap();
        prop_assert!((fit.params.c_s / c_s - 1.0).abs() < 1e-3);
        prop_assert!((fit.params.l_s / l_s - 1.0).abs() < 1e-3);
        prop_assert!((fit.params.r_s / r_s - 1.0).abs() < 1e-3);
    }
}

#[test]
fn lossless_long_mirror_reflects_fully_at_bragg() {
    let p = SawModelParams {
        eta: 0.0,
        mirror_lines: 5000,
        ..SawModelParams::default()
    };
    let f_bragg = p.v_m / (2.0 * p.mirror_pitch);
    let g = mirror_reflection(hz_to_rad(f_bragg), &p).unwrap();
    assert!((g.norm() - 1.0).abs() < 1e-9, "{}", g.norm());
}
