use nalgebra::Matrix3;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::diag::{DiagTable, MaskIndex};
use super::krylov::Krylov;
use super::magnus::{self, C1, C2};
use super::state::{accumulate_local, apply_local_inplace};
use super::{QutritState, MAX_DENSE_SITES};
use crate::circuit_ir::Circuit;
use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::physics::{build_terms_for, pulses_for_layer, DeviceProfile, LayerPulse, PulseSchedule, SiteDrive};

/// Pulse runs above this many active sites need `allow_large`.
pub const PULSE_ROUTINE_LIMIT: usize = 9;

const MINUS_I: C64 = C64::new(0.0, -1.0);

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayoutHint {
    #[default]
    RowMajor,
    Hilbert,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub dt_us: f64,
    pub record_stride: usize,
    pub snapshot_per_layer: bool,
    pub open_system: bool,
    pub seed: u64,
    pub krylov_tol: f64,
    pub krylov_m_max: usize,
    /// Overrides `r_g + d_off` as the interaction cutoff.
    pub interaction_radius_um: Option<f64>,
    /// Also evolve the idle part of each layer period under the diagonal.
    pub integrate_idle: bool,
    pub allow_large: bool,
    pub layout: LayoutHint,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            dt_us: 0.001,
            record_stride: 10,
            snapshot_per_layer: false,
            open_system: false,
            seed: 0,
            krylov_tol: 1e-12,
            krylov_m_max: 40,
            interaction_radius_um: None,
            integrate_idle: false,
            allow_large: false,
            layout: LayoutHint::RowMajor,
        }
    }
}

/// Observables of a pulse run. Times are simulation time; by default only
/// the active window of each layer is integrated.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub times_us: Vec<f64>,
    /// `⟨n⟩` per layout position at each record.
    pub populations: Vec<Vec<f64>>,
    /// Squared norm at each record.
    pub norms: Vec<f64>,
    /// Record index at the end of each layer.
    pub layer_ends: Vec<usize>,
    /// State after each layer when requested.
    pub snapshots: Vec<QutritState>,
    pub final_state: QutritState,
    pub open_system: bool,
    pub gamma_per_us: f64,
    pub dt_us: f64,
    pub interaction_pairs: usize,
    pub krylov_max_dim: usize,
}

impl RunRecord {
    pub fn layout(&self) -> &[usize] {
        self.final_state.layout()
    }

    pub fn total_population(&self, record: usize) -> f64 {
        self.populations[record].iter().sum()
    }
}

/// Sites touched by any gate, ascending; all sites for an empty circuit.
pub fn active_sites(circuit: &Circuit) -> Vec<usize> {
    let mut used = vec![false; circuit.n_sites()];
    for g in circuit.gates() {
        for s in g.sites() {
            used[s] = true;
        }
    }
    let sites: Vec<usize> = (0..used.len()).filter(|&s| used[s]).collect();
    if sites.is_empty() {
        (0..circuit.n_sites()).collect()
    } else {
        sites
    }
}

/// Amplitude layout for a pulse run of `circuit`.
pub fn pulse_layout(circuit: &Circuit, lattice: &Lattice, hint: LayoutHint) -> Vec<usize> {
    let active = active_sites(circuit);
    match (hint, lattice.hilbert_order()) {
        (LayoutHint::Hilbert, Ok(order)) => order.into_iter().filter(|s| active.contains(s)).collect(),
        _ => active,
    }
}

/// Timeline plus drive coefficients for every layer of a native circuit.
pub fn pulse_schedule(circuit: &Circuit, profile: &DeviceProfile) -> Result<PulseSchedule> {
    let params = &profile.device;
    let tau = circuit.metadata.tau_layer_us.unwrap_or(params.tau_layer_us);
    let starts = crate::scheduler::assign_pulse_timeline(circuit, tau, params.gate_duration_us)?;
    let layers = circuit
        .layers
        .iter()
        .zip(starts.start_us)
        .enumerate()
        .map(|(i, (layer, start_us))| {
            Ok(LayerPulse {
                layer: i,
                start_us,
                duration_us: params.gate_duration_us,
                drives: pulses_for_layer(layer, params, profile.cz.as_ref())?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PulseSchedule { tau_layer_us: tau, layers })
}

struct Observer<'a> {
    masks: &'a MaskIndex,
    stride: usize,
    rec: RunRecordParts,
}

#[derive(Default)]
struct RunRecordParts {
    times: Vec<f64>,
    pops: Vec<Vec<f64>>,
    norms: Vec<f64>,
}

#[derive(Clone, Copy)]
struct Acc([f64; MAX_DENSE_SITES + 1]);

impl std::ops::AddAssign for Acc {
    fn add_assign(&mut self, o: Self) {
        self.0.iter_mut().zip(o.0).for_each(|(a, b)| *a += b);
    }
}

impl Observer<'_> {
    fn record(&mut self, t: f64, psi: &[C64], n: usize) {
        let acc = self.masks.sum(psi, Acc([0.0; MAX_DENSE_SITES + 1]), |acc, mask, a| {
            let p = a.norm_sqr();
            acc.0[MAX_DENSE_SITES] += p;
            let mut bits = mask;
            while bits != 0 {
                acc.0[bits.trailing_zeros() as usize] += p;
                bits &= bits - 1;
            }
        });
        self.rec.times.push(t);
        self.rec.pops.push(acc.0[..n].to_vec());
        self.rec.norms.push(acc.0[MAX_DENSE_SITES]);
    }
}

fn apply_diag_exact(masks: &MaskIndex, diag: &DiagTable, psi: &mut [C64], duration: f64) {
    if diag.is_zero() {
        return;
    }
    let phase: Vec<C64> = diag.values.iter().map(|d| (MINUS_I * d * duration).exp()).collect();
    masks.for_each_mut(psi, |m, a| *a *= phase[m as usize]);
}

/// `out = H·v` with `H = D + Σ_p h_p`, where `D` is the diagonal
/// interaction and decay table and each `(p, h_p)` acts on digit `p`.
pub fn apply_hamiltonian(masks: &MaskIndex, diag: &DiagTable, local: &[(usize, Matrix3<C64>)], v: &[C64], out: &mut [C64]) {
    out.copy_from_slice(v);
    masks.for_each_mut(out, |m, o| *o *= diag.values[m as usize]);
    for (p, h) in local {
        accumulate_local(v, out, *p, h);
    }
}

fn local_exp(drive: &SiteDrive, duration: f64) -> Matrix3<C64> {
    (drive.local_matrix(0.0) * (MINUS_I * duration)).exp()
}

pub fn run_pulse(circuit: &Circuit, profile: &DeviceProfile, cfg: &BackendConfig) -> Result<RunRecord> {
    let params = &profile.device;
    params.validate()?;
    let t_gate = params.gate_duration_us;
    if !(cfg.dt_us > 0.0) || cfg.dt_us > t_gate / 10.0 {
        return Err(Error::InvalidParameter(format!("dt {} must lie in (0, {}]", cfg.dt_us, t_gate / 10.0)));
    }
    let lattice = Lattice::build(circuit.lattice.clone())?;
    circuit.validate(&lattice)?;
    let layout = pulse_layout(circuit, &lattice, cfg.layout);
    let n = layout.len();
    if n > MAX_DENSE_SITES {
        return Err(Error::TooManySites { n, max: MAX_DENSE_SITES });
    }
    if n > PULSE_ROUTINE_LIMIT && !cfg.allow_large {
        let bytes = (cfg.krylov_m_max as u64 + 4) * 3u64.pow(n as u32) * 16;
        return Err(Error::LargeRun { n, bytes });
    }
    let schedule = pulse_schedule(circuit, profile)?;
    let r_i = cfg.interaction_radius_um.unwrap_or_else(|| match circuit.metadata.r_g_sq_in_a2 {
        Some(r) => params.interaction_radius(r),
        None => f64::INFINITY,
    });
    let terms = build_terms_for(&lattice, &layout, r_i.max(lattice.spacing()), cfg.open_system, params)?;
    let pos = |site: usize| layout.iter().position(|&s| s == site).expect("site in layout");
    let pairs: Vec<(usize, usize, f64)> = terms.pairs.iter().map(|p| (pos(p.a), pos(p.b), p.v)).collect();
    let diag = DiagTable::new(n, &pairs, terms.gamma_per_us);
    let masks = MaskIndex::new(n);
    // −i·D/2: each Magnus exponential carries half the constant part
    let half_diag: Vec<C64> = diag.values.iter().map(|d| MINUS_I * d * 0.5).collect();

    let mut state = QutritState::zero(layout.clone())?;
    let mut obs = Observer { masks: &masks, stride: cfg.record_stride.max(1), rec: RunRecordParts::default() };
    let mut krylov = Krylov::new(cfg.krylov_tol, cfg.krylov_m_max);
    let mut layer_ends = Vec::new();
    let mut snapshots = Vec::new();
    let mut t = 0.0;
    obs.record(t, state.amplitudes(), n);

    for lp in &schedule.layers {
        let (ryd, local): (Vec<&SiteDrive>, Vec<&SiteDrive>) = lp.drives.iter().partition(|d| d.rydberg.is_some());
        // qubit-only drives commute with everything else on the register
        for d in &local {
            apply_local_inplace(state.amplitudes_mut(), pos(d.site), &local_exp(d, lp.duration_us));
        }
        if ryd.is_empty() {
            apply_diag_exact(&masks, &diag, state.amplitudes_mut(), lp.duration_us);
            t += lp.duration_us;
            obs.record(t, state.amplitudes(), n);
        } else {
            let strength = ryd.iter().map(|d| d.strength()).fold(0.0, f64::max);
            if cfg.dt_us * strength > 0.5 {
                return Err(Error::IntegratorUnstable(cfg.dt_us * strength));
            }
            let steps = magnus::step_count(lp.duration_us, cfg.dt_us);
            let h = lp.duration_us / steps as f64;
            let ryd_pos: Vec<usize> = ryd.iter().map(|d| pos(d.site)).collect();
            for k in 0..steps {
                let t0 = k as f64 * h;
                let h1: Vec<Matrix3<C64>> = ryd.iter().map(|d| d.local_matrix(t0 + C1 * h)).collect();
                let h2: Vec<Matrix3<C64>> = ryd.iter().map(|d| d.local_matrix(t0 + C2 * h)).collect();
                for (w1, w2) in [magnus::FIRST, magnus::SECOND] {
                    let gens: Vec<Matrix3<C64>> =
                        h1.iter().zip(&h2).map(|(a, b)| (a * C64::from(w1) + b * C64::from(w2)) * MINUS_I).collect();
                    let matvec = |v: &[C64], out: &mut [C64]| {
                        out.copy_from_slice(v);
                        masks.for_each_mut(out, |m, o| *o *= half_diag[m as usize]);
                        for (g, &p) in gens.iter().zip(&ryd_pos) {
                            accumulate_local(v, out, p, g);
                        }
                    };
                    krylov.expv(state.amplitudes_mut(), h, &matvec);
                }
                if (k + 1) % obs.stride == 0 || k + 1 == steps {
                    obs.record(t + (k + 1) as f64 * h, state.amplitudes(), n);
                }
            }
            t += lp.duration_us;
        }
        let idle = schedule.tau_layer_us - lp.duration_us;
        if cfg.integrate_idle && idle > 0.0 {
            apply_diag_exact(&masks, &diag, state.amplitudes_mut(), idle);
            t += idle;
            obs.record(t, state.amplitudes(), n);
        }
        layer_ends.push(obs.rec.times.len() - 1);
        if cfg.snapshot_per_layer {
            snapshots.push(state.clone());
        }
    }
    let RunRecordParts { times, pops, norms } = obs.rec;
    Ok(RunRecord {
        times_us: times,
        populations: pops,
        norms,
        layer_ends,
        snapshots,
        final_state: state,
        open_system: cfg.open_system,
        gamma_per_us: terms.gamma_per_us,
        dt_us: cfg.dt_us,
        interaction_pairs: terms.pairs.len(),
        krylov_max_dim: krylov.max_dim_used,
    })
}
