use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Circuit, CircuitMetadata, Gate, Layer, Level};
use crate::error::{Error, Result};
use crate::lattice::{Lattice, LatticeKind, LatticeSpec, Site};

pub const CIRCUIT_SCHEMA: &str = "rydtwin-circuit/1";

/// 17 significant digits: parses back to the identical `f64`.
pub fn fmt_angle(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn parse_angle(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| Error::Schema(format!("bad angle {s:?}: {e}")))
}

#[derive(Serialize, Deserialize)]
struct CircuitDoc {
    schema: String,
    level: Level,
    lattice: LatticeDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    r_g_sq_in_a2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tau_layer_us: Option<f64>,
    #[serde(default)]
    metadata: MetadataDoc,
    layers: Vec<Vec<GateDoc>>,
}

#[derive(Serialize, Deserialize)]
struct LatticeDoc {
    kind: LatticeKind,
    rows: usize,
    cols: usize,
    spacing_um: f64,
    sites: Vec<Site>,
}

#[derive(Default, Serialize, Deserialize)]
struct MetadataDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cz_phi: Option<String>,
    #[serde(default, flatten)]
    notes: BTreeMap<String, serde_json::Value>,
}

#[derive(Serialize, Deserialize)]
struct GateDoc {
    kind: String,
    sites: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    angle: Option<String>,
}

impl GateDoc {
    fn from_gate(g: &Gate) -> Self {
        Self { kind: g.kind().to_string(), sites: g.sites(), angle: g.angle().map(fmt_angle) }
    }

    fn into_gate(self) -> Result<Gate> {
        let angle = || {
            self.angle
                .as_deref()
                .ok_or_else(|| Error::Schema(format!("{} needs an angle", self.kind)))
                .and_then(parse_angle)
        };
        let one = || match self.sites.as_slice() {
            [s] => Ok(*s),
            _ => Err(Error::Schema(format!("{} takes one site", self.kind))),
        };
        let two = || match self.sites.as_slice() {
            [c, t] => Ok((*c, *t)),
            _ => Err(Error::Schema(format!("{} takes two sites", self.kind))),
        };
        Ok(match self.kind.as_str() {
            "RX" => Gate::Rx { site: one()?, theta: angle()? },
            "RZ" => Gate::Rz { site: one()?, theta: angle()? },
            "H" => Gate::H { site: one()? },
            "CNOT" => {
                let (control, target) = two()?;
                Gate::Cnot { control, target }
            }
            "CZ_IDEAL" => {
                let (control, target) = two()?;
                Gate::CzIdeal { control, target }
            }
            "CZ_PHI" => {
                let (control, target) = two()?;
                Gate::CzPhi { control, target, phi: angle()? }
            }
            other => return Err(Error::Schema(format!("unknown gate kind {other:?}"))),
        })
    }
}

impl Circuit {
    pub fn to_json(&self) -> Result<String> {
        let lattice = Lattice::build(self.lattice.clone())?;
        let doc = CircuitDoc {
            schema: CIRCUIT_SCHEMA.to_string(),
            level: self.level,
            lattice: LatticeDoc {
                kind: self.lattice.kind,
                rows: self.lattice.rows,
                cols: self.lattice.cols,
                spacing_um: self.lattice.spacing_um,
                sites: lattice.sites().to_vec(),
            },
            r_g_sq_in_a2: self.metadata.r_g_sq_in_a2,
            tau_layer_us: self.metadata.tau_layer_us,
            metadata: MetadataDoc {
                cz_phi: self.metadata.cz_phi.map(fmt_angle),
                notes: self.metadata.notes.clone(),
            },
            layers: self
                .layers
                .iter()
                .map(|l| l.gates().iter().map(GateDoc::from_gate).collect())
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&doc)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: CircuitDoc = serde_json::from_str(text)?;
        if doc.schema != CIRCUIT_SCHEMA {
            return Err(Error::Schema(format!("expected {CIRCUIT_SCHEMA}, found {}", doc.schema)));
        }
        let spec = LatticeSpec {
            kind: doc.lattice.kind,
            rows: doc.lattice.rows,
            cols: doc.lattice.cols,
            spacing_um: doc.lattice.spacing_um,
        };
        let lattice = Lattice::build(spec.clone())?;
        if doc.lattice.sites.len() != lattice.len() {
            return Err(Error::Schema("site list does not match lattice dimensions".into()));
        }
        for (given, built) in doc.lattice.sites.iter().zip(lattice.sites()) {
            let off = (given.x_um - built.x_um).hypot(given.y_um - built.y_um);
            if given.index != built.index || off > 1e-9 * spec.spacing_um {
                return Err(Error::Schema(format!("site {} position disagrees with lattice", given.index)));
            }
        }
        let mut layers = Vec::with_capacity(doc.layers.len());
        for gates in doc.layers {
            let gates = gates.into_iter().map(GateDoc::into_gate).collect::<Result<Vec<_>>>()?;
            layers.push(Layer::new(gates)?);
        }
        let circuit = Circuit {
            level: doc.level,
            lattice: spec,
            layers,
            metadata: CircuitMetadata {
                r_g_sq_in_a2: doc.r_g_sq_in_a2,
                tau_layer_us: doc.tau_layer_us,
                cz_phi: doc.metadata.cz_phi.as_deref().map(parse_angle).transpose()?,
                notes: doc.metadata.notes,
            },
        };
        circuit.validate(&lattice)?;
        Ok(circuit)
    }
}
