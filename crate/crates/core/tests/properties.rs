use proptest::prelude::*;
use stefan_core::controller::{control_flux, SafetyMonitor};
use stefan_core::diagnostics::{energy_decay_residual, fit_decay_rate, tracking_functional_with};
use stefan_core::records::{format_float, parse_records, write_records};
use stefan_core::solver::run;
use stefan_core::{PhysicalParams, SolverConfig, StefanSolver, TrajectoryRecord};

fn record(t: f64, energy: f64, energy_ref: f64) -> TrajectoryRecord {
    TrajectoryRecord {
        t,
        s: 0.1,
        sdot: 0.0,
        q_c: 0.0,
        energy,
        energy_ref,
        phi: None,
        t_min: 0.0,
        t_at0: 0.0,
        safe_flux: true,
        safe_temp: true,
    }
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![-1e6f64..1e6, -1e-6f64..1e-6]
}

fn any_record() -> impl Strategy<Value = TrajectoryRecord> {
    (
        (0.0f64..1e4, 0.05f64..0.2, finite(), finite(), finite(), finite()),
        (
            prop::option::of(0.0f64..1e3),
            finite(),
            finite(),
            any::<bool>(),
            any::<bool>(),
        ),
    )
        .prop_map(
            |((t, s, sdot, q_c, energy, energy_ref), (phi, t_min, t_at0, safe_flux, safe_temp))| {
                TrajectoryRecord {
                    t,
                    s,
                    sdot,
                    q_c,
                    energy,
                    energy_ref,
                    phi,
                    t_min,
                    t_at0,
                    safe_flux,
                    safe_temp,
                }
            },
        )
}

fn round9(v: f64) -> f64 {
    format_float(v).parse().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn zero_energy_error_gives_feedforward(q in -1e5f64..1e5, e in -100.0f64..100.0, c in 1e-4f64..1.0) {
        let phys = PhysicalParams::<f64>::zinc();
        prop_assert_eq!(control_flux(q, e, e, c, &phys), q);
    }

    #[test]
    fn decay_residual_is_scale_invariant(
        lambda in 1e-3f64..1e3,
        e0 in -10.0f64..10.0,
        noise in 0.0f64..0.1,
        c in 1e-4f64..1e-2,
    ) {
        prop_assume!(e0.abs() > 1e-3);
        let recs: Vec<_> = (0..30)
            .map(|i| {
                let t = 100.0 * i as f64;
                record(t, 5.0 + e0 * (-c * t).exp() + noise * (t / 700.0).sin(), 5.0)
            })
            .collect();
        let scaled: Vec<_> = recs.iter().map(|r| record(r.t, lambda * r.energy, lambda * r.energy_ref)).collect();
        let a = energy_decay_residual(&recs, c).unwrap();
        let b = energy_decay_residual(&scaled, c).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1e-12), "{} vs {}", a, b);
    }

    #[test]
    fn fit_recovers_exponential(rate in -1e-2f64..1e-2, amp in 1e-6f64..1e6, n in 10usize..200) {
        let t: Vec<f64> = (0..n).map(|i| 10.0 * i as f64).collect();
        let v: Vec<f64> = t.iter().map(|t| amp * (-rate * t).exp()).collect();
        let fit = fit_decay_rate(&t, &v).unwrap();
        prop_assert!((fit.rate - rate).abs() <= 1e-9);
    }

    #[test]
    fn records_round_trip(recs in prop::collection::vec(any_record(), 0..20)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        write_records(&path, &["config-hash: test".to_owned()], &recs).unwrap();
        let back = parse_records(&path).unwrap();
        prop_assert_eq!(back.len(), recs.len());
        for (a, b) in recs.iter().zip(&back) {
            prop_assert_eq!(round9(a.t), b.t);
            prop_assert_eq!(round9(a.s), b.s);
            prop_assert_eq!(round9(a.sdot), b.sdot);
            prop_assert_eq!(round9(a.q_c), b.q_c);
            prop_assert_eq!(round9(a.energy), b.energy);
            prop_assert_eq!(round9(a.energy_ref), b.energy_ref);
            prop_assert_eq!(a.phi.map(round9), b.phi);
            prop_assert_eq!(round9(a.t_min), b.t_min);
            prop_assert_eq!(round9(a.t_at0), b.t_at0);
            prop_assert_eq!((a.safe_flux, a.safe_temp), (b.safe_flux, b.safe_temp));
        }
        // a second write of the parsed rows reproduces the file byte for byte
        let again = dir.path().join("r2.csv");
        write_records(&again, &["config-hash: test".to_owned()], &back).unwrap();
        prop_assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn phi_invariant_under_common_offset(
        shift in -50.0f64..50.0,
        slope in 0.0f64..100.0,
        ds in -2e-3f64..2e-3,
        dv in -1e-5f64..1e-5,
    ) {
        let solver = StefanSolver::new(PhysicalParams::zinc(), SolverConfig { n_grid: 64, ..Default::default() }).unwrap();
        let state = solver.initialize(0.1, 1e-6, |x| slope * (0.1 - x)).unwrap();
        let s_r = 0.1 - ds;
        let reference = |x: f64| Ok(0.8 * slope * (s_r - x) + 0.1 * (x * 40.0).sin() * (s_r - x));
        let base = tracking_functional_with(&state, s_r, 1e-6 + dv, reference).unwrap();
        let mut lifted = state.clone();
        lifted.temp.iter_mut().for_each(|u| *u += shift);
        let moved = tracking_functional_with(&lifted, s_r, 1e-6 + dv, |x| reference(x).map(|r| r + shift)).unwrap();
        prop_assert!(base >= 0.0);
        prop_assert!((base - moved).abs() <= 1e-9 * base.max(1e-12), "{} vs {}", base, moved);
    }

    #[test]
    fn nonnegative_flux_keeps_plant_safe(q in 0.0f64..2e4, excess in 0.0f64..20.0, v0 in 0.0f64..1e-5) {
        let phys = PhysicalParams::<f64>::zinc();
        let cfg = SolverConfig { n_grid: 64, dt: 0.1, ..Default::default() };
        let solver = StefanSolver::new(phys, cfg).unwrap();
        let initial = solver.initialize(0.1, v0, |x| excess * (1.0 - x / 0.1)).unwrap();
        let monitor = SafetyMonitor::new(0.1, 0.19, &phys);
        let eps = phys.epsilon;
        let mut worst_gap = f64::INFINITY;
        let mut flags_ok = true;
        let out = run(&solver, initial, 60.0, 1, |_| Ok(q), |state, q| {
            let f = monitor.check(state, q);
            flags_ok &= f.flux_nonneg && f.temp_valid && f.sdot_nonneg;
            // Gronwall: sdot >= v0 e^{-t/eps}
            worst_gap = worst_gap.min(state.sdot - v0 * (-state.t / eps).exp());
            Ok(())
        }).unwrap();
        prop_assert!(matches!(out.status, stefan_core::solver::RunStatus::Completed));
        prop_assert!(flags_ok);
        prop_assert!(worst_gap >= -1e-9, "{}", worst_gap);
    }
}
