//! Layered gate programs at the logical (H, CNOT, CZ) and native
//! (RX, RZ, CZ(φ)) levels.

mod decompose;
mod json;
mod stats;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Lattice, LatticeSpec};

pub use decompose::{
    cnot_identity_deviation, cnot_matrix, decompose_cnot_native, decompose_hadamard,
    hadamard_matrix, NativeCnot, CNOT_IDENTITY_TOL,
};
pub use json::{CIRCUIT_SCHEMA, fmt_angle, parse_angle};
pub use stats::{circuit_stats, depth_bounds, CircuitStats};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Logical,
    Native,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gate {
    Rx { site: usize, theta: f64 },
    Rz { site: usize, theta: f64 },
    H { site: usize },
    CzIdeal { control: usize, target: usize },
    Cnot { control: usize, target: usize },
    CzPhi { control: usize, target: usize, phi: f64 },
}

impl Gate {
    pub fn kind(&self) -> &'static str {
        match self {
            Gate::Rx { .. } => "RX",
            Gate::Rz { .. } => "RZ",
            Gate::H { .. } => "H",
            Gate::CzIdeal { .. } => "CZ_IDEAL",
            Gate::Cnot { .. } => "CNOT",
            Gate::CzPhi { .. } => "CZ_PHI",
        }
    }

    /// Sites touched, control first for two-site gates.
    pub fn sites(&self) -> Vec<usize> {
        match *self {
            Gate::Rx { site, .. } | Gate::Rz { site, .. } | Gate::H { site } => vec![site],
            Gate::CzIdeal { control, target }
            | Gate::Cnot { control, target }
            | Gate::CzPhi { control, target, .. } => vec![control, target],
        }
    }

    pub fn pair(&self) -> Option<(usize, usize)> {
        match *self {
            Gate::CzIdeal { control, target }
            | Gate::Cnot { control, target }
            | Gate::CzPhi { control, target, .. } => Some((control, target)),
            _ => None,
        }
    }

    pub fn is_two_qubit(&self) -> bool {
        self.pair().is_some()
    }

    pub fn angle(&self) -> Option<f64> {
        match *self {
            Gate::Rx { theta, .. } | Gate::Rz { theta, .. } => Some(theta),
            Gate::CzPhi { phi, .. } => Some(phi),
            _ => None,
        }
    }

    pub fn level(&self) -> Level {
        match self {
            Gate::H { .. } | Gate::CzIdeal { .. } | Gate::Cnot { .. } => Level::Logical,
            _ => Level::Native,
        }
    }

    fn check(&self, n_sites: usize) -> Result<()> {
        if let Some(angle) = self.angle() {
            if !angle.is_finite() {
                return Err(Error::InvalidGate(format!("{} angle {angle} not finite", self.kind())));
            }
        }
        let sites = self.sites();
        if let Some(&s) = sites.iter().find(|&&s| s >= n_sites) {
            return Err(Error::InvalidGate(format!("{} site {s} out of range", self.kind())));
        }
        if sites.len() == 2 && sites[0] == sites[1] {
            return Err(Error::InvalidGate(format!("{} on a single site {}", self.kind(), sites[0])));
        }
        Ok(())
    }
}

/// Gates applied in the same time slot; site sets are pairwise disjoint.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Layer {
    gates: Vec<Gate>,
}

impl Layer {
    pub fn new(gates: Vec<Gate>) -> Result<Self> {
        let mut layer = Self::default();
        for g in gates {
            layer.push(g)?;
        }
        Ok(layer)
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        for s in gate.sites() {
            if self.occupies(s) {
                return Err(Error::InvalidCircuit(format!("site {s} used twice in one layer")));
            }
        }
        self.gates.push(gate);
        Ok(())
    }

    pub fn occupies(&self, site: usize) -> bool {
        self.gates.iter().any(|g| g.sites().contains(&site))
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn two_qubit_count(&self) -> usize {
        self.gates.iter().filter(|g| g.is_two_qubit()).count()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CircuitMetadata {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_g_sq_in_a2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_layer_us: Option<f64>,
    /// Calibrated CZ(φ) phase used for lowering.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cz_phi: Option<f64>,
    /// Free-form annotations: compiler settings, identity verdicts, hashes.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub notes: BTreeMap<String, serde_json::Value>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    pub level: Level,
    pub lattice: LatticeSpec,
    pub layers: Vec<Layer>,
    pub metadata: CircuitMetadata,
}

impl Circuit {
    pub fn new(level: Level, lattice: LatticeSpec) -> Self {
        Self { level, lattice, layers: Vec::new(), metadata: CircuitMetadata::default() }
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn n_sites(&self) -> usize {
        self.lattice.rows * self.lattice.cols
    }

    pub fn gates(&self) -> impl Iterator<Item = &Gate> {
        self.layers.iter().flat_map(|l| l.gates.iter())
    }

    pub fn two_qubit_count(&self) -> usize {
        self.gates().filter(|g| g.is_two_qubit()).count()
    }

    /// Structural checks: gate level, site range, disjointness, adjacency of pairs.
    pub fn validate(&self, lattice: &Lattice) -> Result<()> {
        if lattice.spec() != &self.lattice {
            return Err(Error::InvalidCircuit("lattice does not match circuit header".into()));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            let mut seen = vec![false; lattice.len()];
            for g in layer.gates() {
                if g.level() != self.level {
                    return Err(Error::InvalidCircuit(format!(
                        "layer {i}: {} not allowed in a {:?} circuit",
                        g.kind(),
                        self.level
                    )));
                }
                g.check(lattice.len())?;
                for s in g.sites() {
                    if std::mem::replace(&mut seen[s], true) {
                        return Err(Error::InvalidCircuit(format!("layer {i}: site {s} used twice")));
                    }
                }
                if let Some((c, t)) = g.pair() {
                    if !lattice.are_neighbors(c, t) {
                        return Err(Error::NonAdjacent(c, t));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub layer: usize,
    pub gates: (usize, usize),
    pub distance_um: f64,
}

/// Checks the crosstalk radius: two-qubit gates sharing a layer must keep all
/// cross-pair distances at or above `r_g`.
pub fn validate_parallel_layers(circuit: &Circuit, lattice: &Lattice, r_g_sq_in_a2: f64) -> Vec<Violation> {
    let mut out = Vec::new();
    for (li, layer) in circuit.layers.iter().enumerate() {
        let pairs: Vec<(usize, (usize, usize))> = layer
            .gates()
            .iter()
            .enumerate()
            .filter_map(|(gi, g)| g.pair().map(|p| (gi, p)))
            .collect();
        for (x, &(gi, (a, b))) in pairs.iter().enumerate() {
            for &(gj, (c, d)) in &pairs[x + 1..] {
                let cross = [(a, c), (a, d), (b, c), (b, d)];
                if cross.iter().any(|&(s, t)| !lattice.at_least(s, t, r_g_sq_in_a2)) {
                    let distance_um = cross
                        .iter()
                        .map(|&(s, t)| lattice.distance(s, t))
                        .fold(f64::INFINITY, f64::min);
                    out.push(Violation { layer: li, gates: (gi, gj), distance_um });
                }
            }
        }
    }
    out
}
