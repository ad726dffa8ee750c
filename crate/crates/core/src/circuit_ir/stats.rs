use serde::{Deserialize, Serialize};

use super::{Circuit, Level};
use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CircuitStats {
    pub depth: usize,
    pub gates: usize,
    pub single: usize,
    pub two: usize,
    pub o1: f64,
    pub o2: f64,
    pub max1: usize,
    pub max2: usize,
    /// Gates per second at the given layer period.
    pub qgs: f64,
}

pub fn circuit_stats(circuit: &Circuit, tau_layer_us: f64) -> Result<CircuitStats> {
    if !(tau_layer_us > 0.0) {
        return Err(Error::InvalidParameter(format!("tau_layer {tau_layer_us} must be positive")));
    }
    if circuit.level != Level::Native {
        return Err(Error::InvalidCircuit("statistics are defined on native circuits".into()));
    }
    let mut s = CircuitStats { depth: circuit.depth(), ..Default::default() };
    for layer in &circuit.layers {
        let two = layer.two_qubit_count();
        let one = layer.len() - two;
        s.single += one;
        s.two += two;
        s.max1 = s.max1.max(one);
        s.max2 = s.max2.max(two);
    }
    s.gates = s.single + s.two;
    if s.depth > 0 {
        let d = s.depth as f64;
        s.o1 = s.single as f64 / d;
        s.o2 = s.two as f64 / d;
        s.qgs = s.gates as f64 / (d * tau_layer_us * 1e-6);
    }
    Ok(s)
}

/// `(D_min, D_CZ_serial, D_serial)` for an even side length.
pub fn depth_bounds(side: usize) -> Result<(usize, usize, usize)> {
    if side < 2 || !side.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!("depth bounds need an even side >= 2, got {side}")));
    }
    let n = side * side;
    Ok((3 + 5 * side, n + 14, 11 * (n - 1) + 3))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeSpec;

    #[test]
    fn bounds_table() {
        assert_eq!(depth_bounds(4).unwrap(), (23, 30, 168));
        assert_eq!(depth_bounds(6).unwrap(), (33, 50, 388));
        assert_eq!(depth_bounds(8).unwrap(), (43, 78, 696));
        assert!(depth_bounds(3).is_err());
    }

    #[test]
    fn empty_circuit_stats() {
        let c = Circuit::new(Level::Native, LatticeSpec::square(2, 3.0));
        let s = circuit_stats(&c, 2.0).unwrap();
        assert_eq!(s, CircuitStats::default());
        assert!(circuit_stats(&c, 0.0).is_err());
    }
}
