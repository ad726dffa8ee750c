//! Lowering of CZ-round plans and logical circuits to native layers, and the
//! pulse timeline.

use serde::{Deserialize, Serialize};

use crate::circuit_ir::{
    cnot_identity_deviation, decompose_cnot_native, decompose_hadamard, validate_parallel_layers, Circuit, Gate,
    Layer, Level, NativeCnot,
};
use crate::compiler::CzPlan;
use crate::error::{Error, Result};
use crate::lattice::Lattice;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timeline {
    pub tau_layer_us: f64,
    pub gate_duration_us: f64,
    /// Start of the active window of each layer.
    pub start_us: Vec<f64>,
    pub total_us: f64,
}

/// Layer `i` drives during `[i·τ, i·τ + gate_duration)`; total time `D·τ`.
pub fn assign_pulse_timeline(circuit: &Circuit, tau_layer_us: f64, gate_duration_us: f64) -> Result<Timeline> {
    if !(tau_layer_us >= gate_duration_us) {
        return Err(Error::InvalidParameter(format!(
            "layer period {tau_layer_us} us is shorter than the gate duration {gate_duration_us} us"
        )));
    }
    let d = circuit.depth();
    Ok(Timeline {
        tau_layer_us,
        gate_duration_us,
        start_us: (0..d).map(|i| i as f64 * tau_layer_us).collect(),
        total_us: d as f64 * tau_layer_us,
    })
}

/// Per-layer slots that reject double occupancy.
struct Slots {
    layers: Vec<Layer>,
}

impl Slots {
    fn put(&mut self, layer: usize, gate: Gate) -> Result<()> {
        if self.layers.len() <= layer {
            self.layers.resize_with(layer + 1, Layer::default);
        }
        self.layers[layer]
            .push(gate)
            .map_err(|_| Error::Infeasible(format!("layer {layer}: {} collides with another gate", gate.kind())))
    }

    fn cz_conflict(&self, layer: usize, pair: (usize, usize), lattice: &Lattice, r_g_sq_in_a2: f64) -> bool {
        self.layers.get(layer).is_some_and(|l| {
            l.gates().iter().filter_map(Gate::pair).any(|(c, d)| {
                [(pair.0, c), (pair.0, d), (pair.1, c), (pair.1, d)]
                    .iter()
                    .any(|&(s, t)| !lattice.at_least(s, t, r_g_sq_in_a2))
            })
        })
    }

    fn finish(self, lattice: &Lattice, r_g_sq_in_a2: f64, phi: f64) -> Result<Circuit> {
        let mut circuit = Circuit::new(Level::Native, lattice.spec().clone());
        circuit.layers = self.layers.into_iter().filter(|l| !l.is_empty()).collect();
        circuit.metadata.r_g_sq_in_a2 = Some(r_g_sq_in_a2);
        circuit.metadata.cz_phi = Some(phi);
        circuit.metadata.notes.insert("cnot_identity_deviation".into(), cnot_identity_deviation(phi).into());
        circuit.validate(lattice)?;
        let violations = validate_parallel_layers(&circuit, lattice, r_g_sq_in_a2);
        if let Some(v) = violations.first() {
            return Err(Error::Infeasible(format!(
                "layer {}: parallel CZs {} um apart, below r_g",
                v.layer, v.distance_um
            )));
        }
        Ok(circuit)
    }
}

/// Pinned lowering of a native-mode plan.
///
/// Hadamards fill layers 0–2 and round `k` puts its CZs in layer `4 + k`.
/// Each CNOT's pre-rotations sit directly before its CZ and its
/// post-rotations directly after, which the four-round block makes
/// collision free. Empty layers are removed.
pub fn lower_plan(plan: &CzPlan, lattice: &Lattice, r_g_sq_in_a2: f64, phi: f64) -> Result<Circuit> {
    if lattice.spec() != &plan.lattice {
        return Err(Error::InvalidCircuit("plan lattice does not match".into()));
    }
    let mut slots = Slots { layers: Vec::new() };
    for &s in &plan.starts {
        for (i, g) in decompose_hadamard(s).into_iter().enumerate() {
            slots.put(i, g)?;
        }
    }
    for (k, round) in plan.rounds.iter().enumerate() {
        let cz = 4 + k;
        for &(c, t) in round {
            let cnot = decompose_cnot_native(lattice, c, t, phi)?;
            place_cnot(&mut slots, &cnot, cz)?;
        }
    }
    slots.finish(lattice, r_g_sq_in_a2, phi)
}

fn place_cnot(slots: &mut Slots, cnot: &NativeCnot, cz: usize) -> Result<()> {
    for (i, &g) in cnot.control_pre.iter().rev().enumerate() {
        slots.put(cz - 1 - i, g)?;
    }
    for (i, &g) in cnot.target_pre.iter().rev().enumerate() {
        slots.put(cz - 1 - i, g)?;
    }
    slots.put(cz, cnot.cz)?;
    for (i, &g) in cnot.control_post.iter().enumerate() {
        slots.put(cz + 1 + i, g)?;
    }
    for (i, &g) in cnot.target_post.iter().enumerate() {
        slots.put(cz + 1 + i, g)?;
    }
    Ok(())
}

/// Greedy lowering of a logical circuit.
///
/// Single-qubit gates go to the earliest layer their site allows. A CZ goes
/// to the earliest layer where both sites have finished their pre-rotations
/// and no CZ already there is closer than `r_g`; the pre-rotations are then
/// packed directly in front of it. Native input is validated and returned.
pub fn lower_to_native(circuit: &Circuit, lattice: &Lattice, r_g_sq_in_a2: f64, phi: f64) -> Result<Circuit> {
    circuit.validate(lattice)?;
    if circuit.level == Level::Native {
        return Ok(circuit.clone());
    }
    let mut slots = Slots { layers: Vec::new() };
    let mut ready = vec![0usize; lattice.len()];
    let cz_slot = |slots: &Slots, ready: &[usize], c: usize, t: usize, pre_c: usize, pre_t: usize| {
        let mut l = (ready[c] + pre_c).max(ready[t] + pre_t);
        while slots.cz_conflict(l, (c, t), lattice, r_g_sq_in_a2) {
            l += 1;
        }
        l
    };
    for g in circuit.gates() {
        match *g {
            Gate::Rx { site, .. } | Gate::Rz { site, .. } => {
                slots.put(ready[site], *g)?;
                ready[site] += 1;
            }
            Gate::H { site } => {
                for h in decompose_hadamard(site) {
                    slots.put(ready[site], h)?;
                    ready[site] += 1;
                }
            }
            Gate::Cnot { control, target } => {
                let cnot = decompose_cnot_native(lattice, control, target, phi)?;
                let cz = cz_slot(&slots, &ready, control, target, cnot.control_pre.len(), cnot.target_pre.len());
                place_cnot(&mut slots, &cnot, cz)?;
                ready[control] = cz + 1 + cnot.control_post.len();
                ready[target] = cz + 1 + cnot.target_post.len();
            }
            Gate::CzIdeal { control, target } => {
                let cz = cz_slot(&slots, &ready, control, target, 0, 0);
                slots.put(cz, Gate::CzPhi { control, target, phi })?;
                ready[control] = cz + 1;
                ready[target] = cz + 1;
                // CZ(φ) equals CZ after RZ(−φ) on both sites
                if phi != 0.0 {
                    for site in [control, target] {
                        slots.put(cz + 1, Gate::Rz { site, theta: -phi })?;
                        ready[site] = cz + 2;
                    }
                }
            }
            Gate::CzPhi { .. } => unreachable!("validated as logical"),
        }
    }
    let mut out = slots.finish(lattice, r_g_sq_in_a2, phi)?;
    out.metadata.tau_layer_us = circuit.metadata.tau_layer_us;
    for (k, v) in &circuit.metadata.notes {
        out.metadata.notes.entry(k.clone()).or_insert_with(|| v.clone());
    }
    Ok(out)
}
