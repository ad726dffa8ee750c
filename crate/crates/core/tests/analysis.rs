use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rydtwin::analysis::{classify_readout, dephasing_fidelity, DephasingModel};
use rydtwin::compiler::{compile, CompileMode, CompileRequest};
use rydtwin::engine::{exact_distribution, run_pulse, sample_measurements, QutritState, Scheme};
use rydtwin::{BackendConfig, DeviceProfile, FidelityReport, LatticeKind, LatticeSpec};

fn state(amps: &[(f64, f64)], layout: Vec<usize>) -> QutritState {
    QutritState::from_amplitudes(layout, amps.iter().map(|&(r, i)| C64::new(r, i)).collect()).unwrap()
}

fn scheme() -> impl Strategy<Value = Scheme> {
    prop_oneof![Just(Scheme::TwoState), Just(Scheme::SingleState)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn average_fidelity_compounds_to_total(f in 1e-6f64..=1.0, n in 0usize..200) {
        let r = FidelityReport::new(f, n);
        let back = if n == 0 { r.average_fidelity } else { r.average_fidelity.powi(n as i32) };
        prop_assert!((back - r.fidelity).abs() <= 1e-12);
        prop_assert!((r.infidelity + r.fidelity - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn dephasing_decays_towards_half(n in 1usize..100, t1 in 0.0f64..1e4, dt in 0.0f64..1e4, t2 in 0.1f64..100.0) {
        let a = dephasing_fidelity(n, t1, t2);
        let b = dephasing_fidelity(n, t1 + dt, t2);
        prop_assert!(b <= a && b >= 0.5 && a <= 1.0);
    }

    #[test]
    fn staggered_starts_never_dephase_faster(starts in prop::collection::vec(0usize..40, 1..30), t in 0.0f64..50.0) {
        let n = starts.len();
        let late = DephasingModel { t2_ms: 10.0, n_qubits: n, start_layers: starts, tau_layer_us: 0.2 };
        let early = DephasingModel::uniform(n, 10.0, 0.2).unwrap();
        prop_assert!(late.estimate(t) >= early.estimate(t) - 1e-15);
        prop_assert!((early.estimate(t) - early.closed_form(t)).abs() < 1e-14);
    }

    #[test]
    fn readout_masses_are_complete(
        amps in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 27),
        scheme in scheme(),
        min_fraction in 0.0f64..0.2,
    ) {
        let s = state(&amps, vec![0, 1, 2]);
        prop_assume!(s.norm_sq() > 1e-6);
        let exact = exact_distribution(&s, 3, scheme).unwrap();
        prop_assert!((exact.total() - 1.0).abs() < 1e-12);
        let c = classify_readout(&exact, 3, min_fraction);
        prop_assert!((c.ghz_mass + c.error_mass - 1.0).abs() < 1e-12);
        prop_assert!(c.coverage <= 1.0 + 1e-12);
        prop_assert!(c.bins.iter().all(|b| b.mass >= min_fraction));

        let sampled = sample_measurements(&s, 500, scheme, 9).unwrap();
        prop_assert_eq!(sampled.total(), 500.0);
        let c = classify_readout(&sampled, 3, 0.0);
        prop_assert!((c.ghz_mass + c.error_mass - 1.0).abs() < 1e-12);
        prop_assert!((c.coverage - 1.0).abs() < 1e-12);
    }
}

#[test]
fn sampling_stays_within_statistical_bound() {
    let s = state(
        &[(0.5, 0.0), (0.1, 0.2), (0.0, 0.3), (0.4, 0.0), (0.2, -0.1), (0.0, 0.0), (0.3, 0.3), (0.1, 0.0), (0.35, 0.1)],
        vec![0, 1],
    );
    let exact = exact_distribution(&s, 2, Scheme::TwoState).unwrap();
    for shots in [100u64, 1_000, 10_000, 100_000] {
        for seed in 0..10 {
            let h = sample_measurements(&s, shots, Scheme::TwoState, seed).unwrap();
            let tv: f64 = exact
                .counts
                .keys()
                .chain(h.counts.keys())
                .collect::<std::collections::BTreeSet<_>>()
                .into_iter()
                .map(|b| (exact.frequency(*b) - h.frequency(*b)).abs())
                .sum::<f64>()
                / 2.0;
            assert!(tv <= 3.0 / (shots as f64).sqrt(), "shots {shots} seed {seed}: TV {tv}");
        }
    }
}

#[test]
fn sampling_is_reproducible_per_seed() {
    let s = QutritState::from_amplitudes(
        vec![0, 1],
        (0..9).map(|i| C64::new(i as f64 + 1.0, 0.0)).collect(),
    )
    .unwrap();
    let a = sample_measurements(&s, 20_000, Scheme::TwoState, 5).unwrap();
    let b = sample_measurements(&s, 20_000, Scheme::TwoState, 5).unwrap();
    let c = sample_measurements(&s, 20_000, Scheme::TwoState, 6).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn tighter_crosstalk_radius_leaks_more_readout_weight() {
    let spec = LatticeSpec { kind: LatticeKind::Square, rows: 2, cols: 4, spacing_um: 3.0 };
    let error_mass = |r: f64| {
        let circuit = compile(&CompileRequest::new(spec.clone(), r, CompileMode::Native)).unwrap().circuit;
        let run = run_pulse(&circuit, &DeviceProfile::reference(), &BackendConfig::default()).unwrap();
        let dist = exact_distribution(&run.final_state, 8, Scheme::TwoState).unwrap();
        let c = classify_readout(&dist, 8, 1e-4);
        assert!(c.coverage > 0.99 && c.coverage <= 1.0 + 1e-12);
        c.error_mass
    };
    let (tight, loose) = (error_mass(2.0), error_mass(16.0));
    assert!(tight > loose, "error mass {tight} at r_g^2=2 vs {loose} at 16");
}
