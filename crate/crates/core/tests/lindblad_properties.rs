use nalgebra::DVector;
use phonon_core::lindblad::{
    displacement_operator, evolve, ControlSegment, DensityMatrix, EvolveOptions, Schedule,
    SystemParams,
};
use phonon_core::{hz_to_rad, C64};
use proptest::prelude::*;

fn arb_state(dim: usize) -> impl Strategy<Value = DVector<C64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 2 * dim).prop_filter_map(
        "zero vector",
        |v| {
            let psi = DVector::from_iterator(v.len(), v.iter().map(|(a, b)| C64::new(*a, *b)));
            let n = psi.norm();
            (n > 1e-3).then(|| psi / C64::new(n, 0.0))
        },
    )
}

fn arb_params() -> impl Strategy<Value = SystemParams> {
    (
        2usize..6,
        0.5f64..12.0,
        0.2e-6f64..30e-6,
        0.1f64..1.9,
        20e-9f64..500e-9,
    )
        .prop_map(|(dim, g_mhz, t1, ratio, t1r)| SystemParams {
            g: hz_to_rad(g_mhz * 1e6),
            t1,
            t2_ramsey: ratio * t1,
            t1r,
            dim,
            ..SystemParams::default()
        })
}

fn arb_schedule() -> impl Strategy<Value = Schedule> {
    prop::collection::vec(
        (0.0f64..60e-9, -20.0f64..20.0, 0.0f64..1.0, 0.0f64..5e-9),
        1..4,
    )
    .prop_map(|segs| {
        Schedule::new(
            segs.into_iter()
                .map(|(d, delta, gs, ramp)| {
                    ControlSegment::new(d, hz_to_rad(delta * 1e6), gs * hz_to_rad(10e6))
                        .with_ramp(ramp.min(d / 2.0))
                })
                .collect(),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn trajectories_stay_physical(
        (p, psi) in arb_params().prop_flat_map(|p| (Just(p), arb_state(p.dim))),
        sched in arb_schedule(),
    ) {
        let rho0 = DensityMatrix::pure(&psi, 2, p.dim).unwrap();
        let t_end = sched.duration();
        let grid: Vec<f64> = (0..=10).map(|i| t_end * i as f64 / 10.0).collect();
        let opts = EvolveOptions { store_states: true, ..EvolveOptions::default() };
        let traj = evolve(&rho0, &sched, &p, &grid, &opts).unwrap();
        prop_assert_eq!(traj.states.len(), grid.len());
        for s in &traj.states {
            prop_assert!((s.trace().re - 1.0).abs() < 1e-9);
            prop_assert!(s.hermiticity_error() < 1e-10);
            prop_assert!(s.min_eigenvalue() > -1e-8);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn excitations_are_conserved_without_dissipation(
        psi in arb_state(5),
        sched in arb_schedule(),
    ) {
        let p = SystemParams::ideal(hz_to_rad(7.3e6), 5);
        // Restrict to at most three excitations so nothing reaches the cutoff.
        let mut psi = psi;
        psi[5 + 3] = C64::new(0.0, 0.0);
        psi[5 + 4] = C64::new(0.0, 0.0);
        psi[4] = C64::new(0.0, 0.0);
        let n = psi.norm();
        prop_assume!(n > 1e-3);
        let rho0 = DensityMatrix::pure(&(psi / C64::new(n, 0.0)), 2, 5).unwrap();
        let number = |pe: f64, pops: &[f64]| {
            pe + pops.iter().enumerate().map(|(k, v)| k as f64 * v).sum::<f64>()
        };
        let start = number(rho0.excited_population(), &rho0.resonator_populations());
        let grid: Vec<f64> = (0..=8).map(|i| sched.duration() * i as f64 / 8.0).collect();
        let traj = evolve(&rho0, &sched, &p, &grid, &EvolveOptions::default()).unwrap();
        for (pe, pops) in traj.p_e.iter().zip(&traj.populations) {
            prop_assert!((number(*pe, pops) - start).abs() < 1e-8);
        }
    }
}

#[test]
fn displaced_vacuum_is_poissonian() {
    let dim = 50;
    for a in [0.5, 1.0, 2.0] {
        let d = displacement_operator(C64::new(a, 0.0), dim).unwrap();
        let mean = a * a;
        let mut poisson = (-mean).exp();
        for n in 0..dim {
            if n > 0 {
                poisson *= mean / n as f64;
            }
            let p = d[(n, 0)].norm_sqr();
            assert!((p - poisson).abs() < 1e-4, "α={a} n={n}: {p} vs {poisson}");
        }
    }
}

#[test]
fn large_displacement_stays_hermitian() {
    // Rounding in the jump sum used to seed an anti-Hermitian part that grew
    // under resonator decay until the trace check failed.
    let p = SystemParams {
        dim: 50,
        ..SystemParams::default()
    };
    let rho = DensityMatrix::thermal(p.p_e_th, p.p_1_th, p.dim)
        .unwrap()
        .displaced(C64::new(-4.0, 0.0))
        .unwrap();
    let grid = [0.0, 125e-9, 250e-9];
    let opts = EvolveOptions {
        store_states: true,
        ..EvolveOptions::default()
    };
    let traj = evolve(
        &rho,
        &Schedule::constant(250e-9, 0.0, p.g),
        &p,
        &grid,
        &opts,
    )
    .unwrap();
    for s in &traj.states {
        assert!(s.hermiticity_error() < 1e-12);
        assert!((s.trace().re - 1.0).abs() < 1e-12);
    }
}
