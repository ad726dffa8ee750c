use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix3};
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rydtwin::analysis::{compare_runs, cz_per_layer, per_layer_infidelity, target_groups};
use rydtwin::compiler::{compile, CompileMode, CompileRequest};
use rydtwin::engine::{apply_hamiltonian, run_ideal_with, run_pulse, DiagTable, Krylov, MaskIndex, QutritState};
use rydtwin::physics::two_atom_unitary;
use rydtwin::{BackendConfig, Circuit, DeviceParams, DeviceProfile, Gate, LatticeKind, LatticeSpec, Layer, Level};

const MINUS_I: C64 = C64::new(0.0, -1.0);

fn rect(rows: usize, cols: usize) -> LatticeSpec {
    LatticeSpec { kind: LatticeKind::Square, rows, cols, spacing_um: 3.0 }
}

fn rydberg_drive(omega: f64, detuning: f64) -> Matrix3<C64> {
    let mut h = Matrix3::zeros();
    h[(2, 1)] = C64::new(omega, 0.0);
    h[(1, 2)] = C64::new(omega, 0.0);
    h[(2, 2)] = C64::new(detuning, 0.0);
    h
}

/// Dense `H` built term by term: one-body terms as Kronecker products, pair
/// and decay terms as explicit digit checks.
fn naive_hamiltonian(n: usize, local: &[(usize, Matrix3<C64>)], pairs: &[(usize, usize, f64)], gamma: f64) -> DMatrix<C64> {
    let dim = 3usize.pow(n as u32);
    let digit = |i: usize, p: usize| i / 3usize.pow(p as u32) % 3;
    let mut h = DMatrix::<C64>::zeros(dim, dim);
    for (p, m) in local {
        for i in 0..dim {
            for j in 0..dim {
                let others_equal = (0..n).filter(|&q| q != *p).all(|q| digit(i, q) == digit(j, q));
                if others_equal {
                    h[(i, j)] += m[(digit(i, *p), digit(j, *p))];
                }
            }
        }
    }
    for i in 0..dim {
        for &(p, q, v) in pairs {
            if digit(i, p) == 2 && digit(i, q) == 2 {
                h[(i, i)] += v;
            }
        }
        for p in 0..n {
            if digit(i, p) == 2 {
                h[(i, i)] += C64::new(0.0, -gamma);
            }
        }
    }
    h
}

/// `exp(−iHt)ψ` by Krylov steps through the matrix-free operator.
fn evolve(n: usize, local: &[(usize, Matrix3<C64>)], pairs: &[(usize, usize, f64)], psi: &mut [C64], t: f64, steps: usize, mut each: impl FnMut(&[C64])) {
    let masks = MaskIndex::new(n);
    let diag = DiagTable::new(n, pairs, 0.0);
    let diag = DiagTable { values: diag.values.iter().map(|d| d * MINUS_I).collect() };
    let gens: Vec<(usize, Matrix3<C64>)> = local.iter().map(|(p, h)| (*p, h * MINUS_I)).collect();
    let mut krylov = Krylov::new(1e-13, 30);
    let matvec = |v: &[C64], out: &mut [C64]| apply_hamiltonian(&masks, &diag, &gens, v, out);
    for _ in 0..steps {
        krylov.expv(psi, t / steps as f64, &matvec);
        each(psi);
    }
}

#[test]
fn resonant_drive_transfers_population() {
    let omega = 2.0 * PI * 10.0;
    let t = PI / 2.0 / omega;
    let mut psi = vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
    let mut k = 0;
    let steps = 50;
    evolve(1, &[(0, rydberg_drive(omega, 0.0))], &[], &mut psi, t, steps, |psi| {
        k += 1;
        let expected = (omega * t * k as f64 / steps as f64).sin().powi(2);
        assert!((psi[2].norm_sqr() - expected).abs() < 1e-10);
    });
    assert!(psi[2].norm_sqr() >= 1.0 - 1e-6);
}

#[test]
fn blockade_suppresses_double_excitation() {
    let params = DeviceParams::default();
    let omega = params.rabi();
    let v = params.vdw(params.spacing_um);
    let local = [(0, rydberg_drive(omega, 0.0)), (1, rydberg_drive(omega, 0.0))];
    let pairs = [(0, 1, v)];
    let h = naive_hamiltonian(2, &local, &pairs, 0.0);
    let dt = 0.002;
    let step = (h * C64::new(0.0, -dt)).exp();
    let mut exact = DVector::<C64>::zeros(9);
    exact[4] = C64::new(1.0, 0.0);
    let mut psi = exact.as_slice().to_vec();
    let mut max_rr: f64 = 0.0;
    evolve(2, &local, &pairs, &mut psi, 0.3, 150, |psi| {
        exact = &step * &exact;
        let dev = psi.iter().zip(exact.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(dev < 1e-8, "deviation {dev}");
        max_rr = max_rr.max(psi[8].norm_sqr());
    });
    assert!(max_rr < 0.1, "<n1 n2> peaked at {max_rr}");
}

fn random_state() -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 27).prop_map(|v| v.into_iter().map(|(r, i)| C64::new(r, i)).collect())
}

fn random_local() -> impl Strategy<Value = Matrix3<C64>> {
    prop::collection::vec(-50.0f64..50.0, 5).prop_map(|x| {
        let mut h = Matrix3::zeros();
        h[(0, 0)] = C64::new(x[0], 0.0);
        h[(1, 1)] = C64::new(-x[0], 0.0);
        h[(0, 1)] = C64::new(x[1], 0.0);
        h[(1, 0)] = C64::new(x[1], 0.0);
        h[(2, 1)] = C64::new(x[2], x[3]);
        h[(1, 2)] = C64::new(x[2], -x[3]);
        h[(2, 2)] = C64::new(x[4], 0.0);
        h
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matrix_free_hamiltonian_matches_naive(
        psi in random_state(),
        h0 in random_local(),
        h2 in random_local(),
        v in prop::collection::vec(-3000.0f64..0.0, 3),
        gamma in 0.0f64..1.0,
    ) {
        let local = vec![(0, h0), (2, h2)];
        let pairs = [(0, 1, v[0]), (1, 2, v[1]), (0, 2, v[2])];
        let mut out = vec![C64::new(0.0, 0.0); 27];
        apply_hamiltonian(&MaskIndex::new(3), &DiagTable::new(3, &pairs, gamma), &local, &psi, &mut out);
        let dense = naive_hamiltonian(3, &local, &pairs, gamma) * DVector::from_vec(psi.clone());
        let scale = dense.iter().map(|z| z.norm()).fold(1.0, f64::max);
        for (a, b) in out.iter().zip(dense.iter()) {
            prop_assert!((a - b).norm() <= 1e-12 * scale);
        }
    }
}

fn two_atom_cz(rx: [f64; 2]) -> (Circuit, Circuit) {
    let mut prep = Circuit::new(Level::Native, rect(1, 2));
    prep.layers.push(
        Layer::new(vec![Gate::Rx { site: 0, theta: rx[0] }, Gate::Rx { site: 1, theta: rx[1] }]).unwrap(),
    );
    let mut full = prep.clone();
    full.layers.push(Layer::new(vec![Gate::CzPhi { control: 0, target: 1, phi: 0.0 }]).unwrap());
    (prep, full)
}

#[test]
fn engine_matches_two_atom_propagator() {
    let profile = DeviceProfile::reference();
    let (prep, full) = two_atom_cz([0.7, 1.9]);
    let run = run_pulse(&full, &profile, &BackendConfig::default()).unwrap();
    let (before, _) = run_ideal_with(&prep, vec![0, 1], false).unwrap();
    let u = two_atom_unitary(profile.cz.as_ref().unwrap(), &profile.device, 3.0, 0.0, 0.001);
    let expected = u * DVector::from_column_slice(before.amplitudes());
    let dev = run
        .final_state
        .amplitudes()
        .iter()
        .zip(expected.iter())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    assert!(dev < 1e-9, "deviation {dev}");
}

#[test]
fn cz_converges_in_dt() {
    let profile = DeviceProfile::reference();
    let (_, full) = two_atom_cz([PI / 2.0, PI / 2.0]);
    let coarse = run_pulse(&full, &profile, &BackendConfig::default()).unwrap();
    let fine = run_pulse(&full, &profile, &BackendConfig { dt_us: 0.0001, ..Default::default() }).unwrap();
    let (c, _) = compare_runs(&coarse.final_state, &fine.final_state, &[vec![0, 1]]).unwrap();
    assert!(c <= 1e-8, "C = {c}");
}

/// Two CZs in one layer on a 2×7 array; the second pair sits at `offset`.
fn parallel_pair_error(second: Option<(usize, usize)>) -> (f64, f64) {
    let spec = rect(2, 7);
    let mut sites = vec![0, 1];
    let mut czs = vec![Gate::CzPhi { control: 0, target: 1, phi: 0.0 }];
    if let Some((a, b)) = second {
        sites.extend([a, b]);
        czs.push(Gate::CzPhi { control: a, target: b, phi: 0.0 });
    }
    let mut c = Circuit::new(Level::Native, spec);
    c.layers.push(Layer::new(sites.iter().map(|&site| Gate::Rx { site, theta: PI / 2.0 }).collect()).unwrap());
    c.layers.push(Layer::new(czs).unwrap());
    let cfg = BackendConfig { snapshot_per_layer: true, ..Default::default() };
    let run = run_pulse(&c, &DeviceProfile::reference(), &cfg).unwrap();
    let (ideal, snaps) = run_ideal_with(&c, run.layout().to_vec(), true).unwrap();
    let total = 1.0 - ideal.overlap(&run.final_state).unwrap().norm_sqr();
    let layers = per_layer_infidelity(&run.snapshots, &snaps, &cz_per_layer(&c)).unwrap();
    (total, layers[1].per_gate)
}

#[test]
fn crosstalk_falls_with_separation() {
    // nearest atoms of the two pairs at √2a, 2a, 3a and 4a
    let errors: Vec<f64> = [(9, 10), (3, 4), (4, 5), (5, 6)]
        .into_iter()
        .map(|p| parallel_pair_error(Some(p)).0)
        .collect();
    assert!(errors.windows(2).all(|w| w[0] >= w[1]), "{errors:?}");
    let (_, isolated) = parallel_pair_error(None);
    let (_, close) = parallel_pair_error(Some((9, 10)));
    assert!(close >= 10.0 * isolated, "close {close} vs isolated {isolated}");
}

fn ghz_with_cutoff(spec: LatticeSpec, r_g_sq: f64, d_off_a: f64) -> QutritState {
    let circuit = compile(&CompileRequest::new(spec, r_g_sq, CompileMode::Native)).unwrap().circuit;
    let mut profile = DeviceProfile::reference();
    profile.device.d_off_a = d_off_a;
    run_pulse(&circuit, &profile, &BackendConfig::default()).unwrap().final_state
}

#[test]
fn interaction_cutoff_converges() {
    for (spec, r) in [(rect(3, 3), 2.0), (rect(1, 8), 1.0)] {
        let near = ghz_with_cutoff(spec.clone(), r, 2.0);
        let far = ghz_with_cutoff(spec.clone(), r, 6.0);
        let groups = vec![(0..spec.rows * spec.cols).collect::<Vec<_>>()];
        let (c, df) = compare_runs(&near, &far, &groups).unwrap();
        eprintln!("{}x{} r_g^2={r}: C={c:.3e} dF={df:.3e}", spec.rows, spec.cols);
        assert!(c <= 1e-2, "C = {c}");
    }
}

#[test]
fn open_system_norm_decays_monotonically() {
    let circuit = compile(&CompileRequest::new(rect(2, 2), 4.0, CompileMode::Native)).unwrap().circuit;
    let cfg = BackendConfig { open_system: true, ..Default::default() };
    let run = run_pulse(&circuit, &DeviceProfile::reference(), &cfg).unwrap();
    assert!(run.norms.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    assert!(*run.norms.last().unwrap() < 1.0);
    let groups = target_groups(&circuit);
    let closed = run_pulse(&circuit, &DeviceProfile::reference(), &BackendConfig::default()).unwrap();
    let f_open = rydtwin::ghz_fidelity(&run.final_state, &groups).unwrap();
    let f_closed = rydtwin::ghz_fidelity(&closed.final_state, &groups).unwrap();
    assert!(f_open < f_closed);
}
