//! Fidelities, per-layer errors, Rydberg observables, dephasing estimates,
//! readout classification and run comparison.

use serde::{Deserialize, Serialize};

use crate::circuit_ir::{Circuit, Gate};
use crate::engine::{Histogram, QutritState, ReadoutBin, RunRecord, Scheme};
use crate::error::{Error, Result};

/// Per-gate values below this are reported as the floor itself.
pub const PRECISION_FLOOR: f64 = 1e-12;

/// Largest number of GHZ groups whose product target is expanded.
pub const MAX_TARGET_GROUPS: usize = 24;

/// GHZ groups a circuit prepares: the `ghz_groups` note when present,
/// otherwise one group over every site.
pub fn target_groups(circuit: &Circuit) -> Vec<Vec<usize>> {
    circuit
        .metadata
        .notes
        .get("ghz_groups")
        .and_then(|v| serde_json::from_value(v.clone()).ok())
        .unwrap_or_else(|| vec![(0..circuit.n_sites()).collect()])
}

/// `|⟨target|ψ⟩|²` with the target a product of GHZ states, one per group,
/// and `|0⟩` elsewhere. A one-site group is `|+⟩`.
///
/// The state is not normalised, so lost norm counts as infidelity. Target
/// sites missing from the layout are taken to be `|0⟩`.
pub fn ghz_fidelity(state: &QutritState, groups: &[Vec<usize>]) -> Result<f64> {
    Ok(ghz_amplitude(state, groups)?.norm_sqr())
}

fn ghz_amplitude(state: &QutritState, groups: &[Vec<usize>]) -> Result<num_complex::Complex64> {
    if groups.len() > MAX_TARGET_GROUPS {
        return Err(Error::InvalidParameter(format!("{} GHZ groups exceed {MAX_TARGET_GROUPS}", groups.len())));
    }
    let positions: Vec<Option<Vec<usize>>> = groups
        .iter()
        .map(|g| g.iter().map(|&s| state.position(s)).collect())
        .collect();
    let weight = std::f64::consts::FRAC_1_SQRT_2.powi(groups.len() as i32);
    let mut digits = vec![0u8; state.n_sites()];
    let mut sum = num_complex::Complex64::new(0.0, 0.0);
    'assign: for bits in 0u64..1 << groups.len() {
        digits.fill(0);
        for (g, pos) in positions.iter().enumerate() {
            if bits >> g & 1 == 1 {
                match pos {
                    Some(pos) => pos.iter().for_each(|&p| digits[p] = 1),
                    None => continue 'assign,
                }
            }
        }
        sum += state.amplitude(&digits) * weight;
    }
    Ok(sum)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerInfidelity {
    pub layer: usize,
    pub n_cz: usize,
    /// Overlap with the ideal state after this layer.
    pub fidelity: f64,
    /// `F(i) / F(i−1)`.
    pub ratio: f64,
    pub infidelity: f64,
    /// `1 − ratio^(1/n_cz)`, or `1 − ratio` for layers without CZ; floored.
    pub per_gate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub fidelity: f64,
    pub infidelity: f64,
    pub n_cz: usize,
    /// `F^(1/n_cz)`; equal to `F` without CZ gates.
    pub average_fidelity: f64,
    pub per_layer: Vec<LayerInfidelity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub norm_loss: Option<f64>,
}

impl FidelityReport {
    pub fn new(fidelity: f64, n_cz: usize) -> Self {
        let fidelity = fidelity.clamp(0.0, 1.0);
        let average_fidelity = if n_cz == 0 { fidelity } else { fidelity.powf(1.0 / n_cz as f64) };
        Self { fidelity, infidelity: 1.0 - fidelity, n_cz, average_fidelity, per_layer: Vec::new(), norm_loss: None }
    }

    /// Report for a final state against the circuit's GHZ target.
    pub fn for_state(state: &QutritState, circuit: &Circuit, open_system: bool) -> Result<Self> {
        let mut report = Self::new(ghz_fidelity(state, &target_groups(circuit))?, circuit.two_qubit_count());
        if open_system {
            report.norm_loss = Some(1.0 - state.norm_sq());
        }
        Ok(report)
    }
}

/// Per-layer error from matching pulse and ideal snapshots.
///
/// `F(i) = |⟨ψ_ideal(i)|ψ_pulse(i)⟩|²` on the unnormalised pulse state and
/// `ρ(i) = F(i)/F(i−1)` with `F(−1) = 1`.
pub fn per_layer_infidelity(
    pulse: &[QutritState],
    ideal: &[QutritState],
    cz_per_layer: &[usize],
) -> Result<Vec<LayerInfidelity>> {
    if pulse.is_empty() || pulse.len() != ideal.len() || pulse.len() != cz_per_layer.len() {
        return Err(Error::MissingSnapshots(format!(
            "{} pulse, {} ideal snapshots for {} layers",
            pulse.len(),
            ideal.len(),
            cz_per_layer.len()
        )));
    }
    let mut prev = 1.0;
    let mut out = Vec::with_capacity(pulse.len());
    for (i, ((p, q), &n)) in pulse.iter().zip(ideal).zip(cz_per_layer).enumerate() {
        let f = (q.inner(p)?.norm_sqr() / q.norm_sq()).min(1.0);
        let ratio = if prev > 0.0 { f / prev } else { 0.0 };
        let raw = if n == 0 { 1.0 - ratio } else { 1.0 - ratio.powf(1.0 / n as f64) };
        out.push(LayerInfidelity {
            layer: i,
            n_cz: n,
            fidelity: f,
            ratio,
            infidelity: 1.0 - f,
            per_gate: raw.max(PRECISION_FLOOR),
        });
        prev = f;
    }
    Ok(out)
}

/// CZ count of every layer.
pub fn cz_per_layer(circuit: &Circuit) -> Vec<usize> {
    circuit.layers.iter().map(|l| l.two_qubit_count()).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RydbergObservables {
    /// Total Rydberg population at the end.
    pub p_r: f64,
    /// Time-integrated total Rydberg population, μs.
    pub t_r_us: f64,
}

/// `P_R` from the last record and `T_R` by the trapezoid rule on the record grid.
pub fn rydberg_observables(run: &RunRecord) -> Result<RydbergObservables> {
    if run.times_us.is_empty() {
        return Err(Error::EmptySeries);
    }
    let totals: Vec<f64> = (0..run.times_us.len()).map(|i| run.total_population(i)).collect();
    let t_r_us = run
        .times_us
        .windows(2)
        .zip(totals.windows(2))
        .map(|(t, p)| 0.5 * (t[1] - t[0]) * (p[0] + p[1]))
        .sum();
    Ok(RydbergObservables { p_r: *totals.last().expect("nonempty"), t_r_us })
}

/// `F_D(t) = 1/2 + 1/2·exp(−n·t/T2)`.
pub fn dephasing_fidelity(n_qubits: usize, t_us: f64, t2_ms: f64) -> f64 {
    0.5 + 0.5 * (-(n_qubits as f64) * t_us / (t2_ms * 1e3)).exp()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DephasingModel {
    pub t2_ms: f64,
    pub n_qubits: usize,
    /// Layer index at which each qubit starts to dephase.
    pub start_layers: Vec<usize>,
    pub tau_layer_us: f64,
}

impl DephasingModel {
    /// Every qubit dephases from `t = 0`.
    pub fn uniform(n_qubits: usize, t2_ms: f64, tau_layer_us: f64) -> Result<Self> {
        let model = Self { t2_ms, n_qubits, start_layers: vec![0; n_qubits], tau_layer_us };
        model.validate()?;
        Ok(model)
    }

    /// Each touched qubit starts dephasing at its first RX gate.
    pub fn from_circuit(circuit: &Circuit, t2_ms: f64, tau_layer_us: f64) -> Result<Self> {
        let mut first = vec![None; circuit.n_sites()];
        for (i, layer) in circuit.layers.iter().enumerate() {
            for g in layer.gates() {
                if let Gate::Rx { site, .. } | Gate::H { site } = *g {
                    first[site].get_or_insert(i);
                }
            }
        }
        let start_layers: Vec<usize> = first.into_iter().flatten().collect();
        let model = Self { t2_ms, n_qubits: start_layers.len(), start_layers, tau_layer_us };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        if !(self.t2_ms > 0.0) || !(self.tau_layer_us > 0.0) {
            return Err(Error::InvalidParameter("T2 and the layer period must be positive".into()));
        }
        Ok(())
    }

    pub fn closed_form(&self, t_us: f64) -> f64 {
        dephasing_fidelity(self.n_qubits, t_us, self.t2_ms)
    }

    /// `1/2 + 1/2·exp(−Σ_q (t − t_q)⁺ / T2)` with per-qubit start times.
    pub fn estimate(&self, t_us: f64) -> f64 {
        let exposure: f64 = self
            .start_layers
            .iter()
            .map(|&l| (t_us - l as f64 * self.tau_layer_us).max(0.0))
            .sum();
        0.5 + 0.5 * (-exposure / (self.t2_ms * 1e3)).exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReadoutLabel {
    Ghz,
    Error,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledBin {
    pub bin: ReadoutBin,
    pub label: ReadoutLabel,
    /// Fraction of the total weight.
    pub mass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifiedReadout {
    pub bins: Vec<LabeledBin>,
    pub ghz_mass: f64,
    pub error_mass: f64,
    /// Weight of the reported bins.
    pub coverage: f64,
}

/// Labels the all-zero and all-one outcomes as GHZ and everything else as
/// error. Bins lighter than `min_fraction` are left out of `bins`; coverage
/// says how much weight the listed bins carry.
pub fn classify_readout(hist: &Histogram, n_sites: usize, min_fraction: f64) -> ClassifiedReadout {
    let total = hist.total();
    let is_ghz = |b: &ReadoutBin| match hist.scheme {
        Scheme::TwoState => {
            (b.zeros == n_sites && b.ones == Some(0)) || (b.zeros == 0 && b.ones == Some(n_sites))
        }
        Scheme::SingleState => b.zeros == 0 || b.zeros == n_sites,
    };
    let mut out = ClassifiedReadout { bins: Vec::new(), ghz_mass: 0.0, error_mass: 0.0, coverage: 0.0 };
    if total <= 0.0 {
        return out;
    }
    for (bin, &count) in &hist.counts {
        let mass = count / total;
        let label = if is_ghz(bin) { ReadoutLabel::Ghz } else { ReadoutLabel::Error };
        match label {
            ReadoutLabel::Ghz => out.ghz_mass += mass,
            ReadoutLabel::Error => out.error_mass += mass,
        }
        if mass >= min_fraction {
            out.coverage += mass;
            out.bins.push(LabeledBin { bin: *bin, label, mass });
        }
    }
    out
}

/// `(C, Δ_F)`: `C = 1 − |⟨ψ₁|ψ₂⟩|²` on normalised states and
/// `Δ_F = F₁ − F₂` against the GHZ target.
pub fn compare_runs(s1: &QutritState, s2: &QutritState, groups: &[Vec<usize>]) -> Result<(f64, f64)> {
    let c = (1.0 - s1.overlap(s2)?.norm_sqr()).max(0.0);
    Ok((c, ghz_fidelity(s1, groups)? - ghz_fidelity(s2, groups)?))
}

/// One line of a simulation summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub fidelity: f64,
    pub infidelity: f64,
    pub average_fidelity: f64,
    pub n_cz: usize,
    pub p_r: f64,
    pub t_r_us: f64,
    pub norm_sq: f64,
}

pub fn summarize_run(run: &RunRecord, circuit: &Circuit) -> Result<RunSummary> {
    let report = FidelityReport::for_state(&run.final_state, circuit, run.open_system)?;
    let obs = rydberg_observables(run)?;
    Ok(RunSummary {
        fidelity: report.fidelity,
        infidelity: report.infidelity,
        average_fidelity: report.average_fidelity,
        n_cz: report.n_cz,
        p_r: obs.p_r,
        t_r_us: obs.t_r_us,
        norm_sq: run.final_state.norm_sq(),
    })
}
