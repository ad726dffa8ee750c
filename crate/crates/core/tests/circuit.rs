use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rydtwin::engine::{run_ideal, QutritState};
use rydtwin::scheduler::lower_to_native;
use rydtwin::{Circuit, Gate, Lattice, LatticeKind, LatticeSpec, Layer, Level};

fn spec() -> LatticeSpec {
    LatticeSpec { kind: LatticeKind::Square, rows: 2, cols: 3, spacing_um: 3.0 }
}

/// Gate choices on the 2×3 lattice; pairs index into its edge list.
fn logical_gate() -> impl Strategy<Value = (u8, usize, usize, f64)> {
    (0u8..5, 0usize..6, 0usize..7, -PI..PI)
}

fn native_gate() -> impl Strategy<Value = (u8, usize, usize, f64)> {
    (0u8..3, 0usize..6, 0usize..7, -PI..PI)
}

fn build(level: Level, picks: &[(u8, usize, usize, f64)]) -> Circuit {
    let lattice = Lattice::build(spec()).unwrap();
    let edges = lattice.edges();
    let mut c = Circuit::new(level, spec());
    for &(kind, site, edge, angle) in picks {
        let (a, b) = edges[edge % edges.len()];
        let gate = match (level, kind) {
            (Level::Logical, 0) => Gate::H { site },
            (Level::Logical, 1) => Gate::Cnot { control: a, target: b },
            (Level::Logical, 2) => Gate::Cnot { control: b, target: a },
            (Level::Logical, 3) => Gate::CzIdeal { control: a, target: b },
            (Level::Logical, _) => Gate::H { site },
            (_, 0) => Gate::Rx { site, theta: angle },
            (_, 1) => Gate::Rz { site, theta: angle },
            _ => Gate::CzPhi { control: a, target: b, phi: angle },
        };
        c.layers.push(Layer::new(vec![gate]).unwrap());
    }
    c
}

fn phase_free_overlap(a: &QutritState, b: &QutritState) -> f64 {
    a.inner(b).unwrap().norm_sqr() / (a.norm_sq() * b.norm_sq())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn native_json_round_trip(picks in prop::collection::vec(native_gate(), 0..30), r in 1.0f64..30.0) {
        let mut c = build(Level::Native, &picks);
        c.metadata.r_g_sq_in_a2 = Some(r);
        c.metadata.notes.insert("seed".into(), 7.into());
        let back = Circuit::from_json(&c.to_json().unwrap()).unwrap();
        prop_assert_eq!(back, c);
    }

    #[test]
    fn logical_json_round_trip(picks in prop::collection::vec(logical_gate(), 0..30)) {
        let c = build(Level::Logical, &picks);
        let text = c.to_json().unwrap();
        let back = Circuit::from_json(&text).unwrap();
        prop_assert_eq!(back.to_json().unwrap(), text);
        prop_assert_eq!(back, c);
    }

    #[test]
    fn lowering_preserves_the_state(
        picks in prop::collection::vec(logical_gate(), 1..14),
        phi in prop_oneof![Just(0.0), Just(PI)],
        r_g_sq in prop_oneof![Just(1.0), Just(2.0), Just(5.0)],
    ) {
        let logical = build(Level::Logical, &picks);
        let lattice = Lattice::build(spec()).unwrap();
        let native = lower_to_native(&logical, &lattice, r_g_sq, phi).unwrap();
        prop_assert_eq!(native.level, Level::Native);
        let all_native = native.gates().all(|g| matches!(g, Gate::Rx { .. } | Gate::Rz { .. } | Gate::CzPhi { .. }));
        prop_assert!(all_native);
        let a = run_ideal(&logical).unwrap();
        let b = run_ideal(&native).unwrap();
        prop_assert!(phase_free_overlap(&a, &b) >= 1.0 - 1e-10);
    }

    #[test]
    fn state_bytes_round_trip(
        layout in Just(vec![0usize, 2, 5, 7]).prop_shuffle(),
        re in prop::collection::vec(-1.0f64..1.0, 81),
        im in prop::collection::vec(-1.0f64..1.0, 81),
    ) {
        let amps: Vec<C64> = re.iter().zip(&im).map(|(&r, &i)| C64::new(r, i)).collect();
        let s = QutritState::from_amplitudes(layout, amps).unwrap();
        let back = QutritState::from_le_bytes(&s.to_le_bytes()).unwrap();
        prop_assert_eq!(back.layout(), s.layout());
        prop_assert_eq!(back.amplitudes(), s.amplitudes());
    }
}

#[test]
fn truncated_state_bytes_are_rejected() {
    let s = QutritState::zero(vec![0, 1]).unwrap();
    let bytes = s.to_le_bytes();
    assert!(QutritState::from_le_bytes(&bytes[..bytes.len() - 1]).is_err());
    assert!(QutritState::from_le_bytes(b"not a state").is_err());
}
