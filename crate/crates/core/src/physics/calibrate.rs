//! Two-atom CZ calibration.
//!
//! The pulse drives |1⟩ ↔ |r⟩ on both atoms with constant Rabi coefficient
//! and a Gaussian detuning, plus a constant σ_z term. On the {|1⟩, |r⟩}
//! manifold σ_z acts as an extra detuning, and between |0⟩ and |1⟩ it adds a
//! relative phase. The optimiser therefore works with the effective detuning
//! alone; the σ_z strength is then chosen to move the conditional phase onto
//! a value for which the native CNOT lowering is exact.

use std::cell::Cell;
use std::f64::consts::{PI, SQRT_2, TAU};

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;
use nalgebra::{DMatrix, Matrix2, Matrix3, Matrix4, Vector2, Vector3};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{angular, CzPulse, DeviceParams, Gaussian};
use crate::engine::magnus::{self, C1, C2};
use crate::error::{Error, Result};

const I: C64 = C64::new(0.0, 1.0);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOptions {
    pub seed: u64,
    pub starts: usize,
    pub max_iters: u64,
    pub dt_us: f64,
    /// Fidelity below which calibration is reported as failed.
    pub min_fidelity: f64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self { seed: 1, starts: 8, max_iters: 1500, dt_us: 0.001, min_fidelity: 0.999 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub pulse: CzPulse,
    /// Average gate fidelity against CZ up to a common R_Z frame.
    pub fidelity: f64,
    /// Average gate fidelity against the CZ_PHI(φ) model at the returned φ.
    pub model_fidelity: f64,
    /// Rydberg population left after the gate acting on |11⟩.
    pub rydberg_residual_11: f64,
    /// ∫⟨n⟩dt summed over both atoms, for inputs |01⟩ and |11⟩.
    pub t_r_01_us: f64,
    pub t_r_11_us: f64,
    pub evaluations: u64,
}

/// Average gate fidelity of a 4×4 qubit block against `target`.
fn average_fidelity(m: &Matrix4<C64>, target: &Matrix4<C64>) -> f64 {
    let tr = (target.adjoint() * m).trace();
    let tmm = (m.adjoint() * m).trace().re;
    (tr.norm_sqr() + tmm) / 20.0
}

fn cz_frame(theta: f64) -> Matrix4<C64> {
    let e = C64::from_polar(1.0, theta);
    Matrix4::from_diagonal(&nalgebra::Vector4::new(C64::new(1.0, 0.0), e, e, -e * e))
}

/// Qubit block of a two-qutrit operator (site 0 fastest), in the |c t⟩ basis with index 2c + t.
fn qubit_block(u: &DMatrix<C64>) -> Matrix4<C64> {
    let idx = [0usize, 3, 1, 4];
    Matrix4::from_fn(|r, c| u[(idx[r], idx[c])])
}

/// `(F, θ)`: fidelity against CZ in the R_Z frame fixed by the single-excitation phase.
pub fn cz_average_fidelity(u: &DMatrix<C64>) -> (f64, f64) {
    let m = qubit_block(u);
    let theta = (m[(1, 1)] / m[(0, 0)]).arg();
    (average_fidelity(&m, &cz_frame(theta)), theta)
}

/// Propagator of two atoms at distance `d_um` under the calibrated pulse.
pub fn two_atom_unitary(pulse: &CzPulse, params: &DeviceParams, d_um: f64, gamma: f64, dt_us: f64) -> DMatrix<C64> {
    let t = params.gate_duration_us;
    let omega = C64::from_polar(angular(pulse.rabi_mhz), pulse.rabi_phase_rad);
    let det = Gaussian {
        offset: angular(pulse.detuning_offset_mhz),
        amplitude: angular(pulse.detuning_amplitude_mhz),
        center_us: pulse.detuning_center_us,
        width_us: pulse.detuning_width_us,
    };
    let oz = angular(pulse.sigma_z_mhz);
    let v = params.vdw(d_um);
    let local = |tr: f64| {
        let mut h = Matrix3::<C64>::zeros();
        h[(0, 0)] = oz.into();
        h[(1, 1)] = (-oz).into();
        h[(2, 1)] = omega;
        h[(1, 2)] = omega.conj();
        h[(2, 2)] = det.at(tr).into();
        h
    };
    let id = Matrix3::<C64>::identity();
    let mut diag = DMatrix::<C64>::zeros(9, 9);
    for d1 in 0..3 {
        for d0 in 0..3 {
            let k = d0 + 3 * d1;
            let nr = (d0 == 2) as u8 + (d1 == 2) as u8;
            diag[(k, k)] = C64::new(if nr == 2 { v } else { 0.0 }, -gamma * nr as f64);
        }
    }
    let full = |tr: f64| {
        let l = local(tr);
        // site 0 is the fast digit: H = I ⊗ L0 + L1 ⊗ I in kronecker order (d1, d0)
        let h = id.kronecker(&l) + l.kronecker(&id);
        DMatrix::from_fn(9, 9, |r, c| h[(r, c)]) + &diag
    };
    let steps = magnus::step_count(t, dt_us);
    let h = t / steps as f64;
    let mut u = DMatrix::<C64>::identity(9, 9);
    for k in 0..steps {
        let t0 = k as f64 * h;
        let (h1, h2) = (full(t0 + C1 * h), full(t0 + C2 * h));
        let (w1, w2) = magnus::FIRST;
        let first = ((&h1 * C64::from(w1) + &h2 * C64::from(w2)) * (-I * h)).exp();
        let (w1, w2) = magnus::SECOND;
        let second = ((&h1 * C64::from(w1) + &h2 * C64::from(w2)) * (-I * h)).exp();
        u = second * first * u;
    }
    u
}

/// Reduced propagation: single excitation block {|1⟩, |r⟩} and symmetric
/// double block {|11⟩, |B⟩, |rr⟩}. Parameters are in rad/μs and μs.
struct Reduced {
    omega: f64,
    v: f64,
    t: f64,
    steps: usize,
}

struct ReducedOut {
    a01: C64,
    a11: C64,
    t_r_01: f64,
    t_r_11: f64,
}

impl Reduced {
    fn run(&self, det: &Gaussian) -> ReducedOut {
        let om = C64::new(self.omega, 0.0);
        let s2 = om * SQRT_2;
        let h1 = |d: f64| Matrix2::new(C64::new(0.0, 0.0), om, om, d.into());
        let h2 = |d: f64| {
            Matrix3::new(
                0.0.into(), s2, 0.0.into(),
                s2, d.into(), s2,
                0.0.into(), s2, (2.0 * d + self.v).into(),
            )
        };
        let h = self.t / self.steps as f64;
        let mut x = Vector2::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0));
        let mut y = Vector3::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0));
        let (mut t_r_01, mut t_r_11) = (0.0, 0.0);
        let pop = |x: &Vector2<C64>, y: &Vector3<C64>| (x[1].norm_sqr(), y[1].norm_sqr() + 2.0 * y[2].norm_sqr());
        let mut prev = pop(&x, &y);
        for k in 0..self.steps {
            let t0 = k as f64 * h;
            let (d1, d2) = (det.at(t0 + C1 * h), det.at(t0 + C2 * h));
            for (w1, w2) in [magnus::FIRST, magnus::SECOND] {
                let d = w1 * d1 + w2 * d2;
                // constant couplings carry weight w1 + w2 = 1/2
                x = (h1(d / (w1 + w2)) * (-I * h * (w1 + w2))).exp() * x;
                y = (h2(d / (w1 + w2)) * (-I * h * (w1 + w2))).exp() * y;
            }
            let now = pop(&x, &y);
            t_r_01 += 0.5 * h * (prev.0 + now.0);
            t_r_11 += 0.5 * h * (prev.1 + now.1);
            prev = now;
        }
        ReducedOut { a01: x[0], a11: y[0], t_r_01, t_r_11 }
    }
}

/// Frame-optimised CZ fidelity from the reduced amplitudes (|00⟩ untouched).
fn reduced_fidelity(a01: C64, a11: C64) -> f64 {
    let one = C64::new(1.0, 0.0);
    let m = Matrix4::from_diagonal(&nalgebra::Vector4::new(one, a01, a01, a11));
    average_fidelity(&m, &cz_frame(a01.arg()))
}

struct Objective<'a> {
    model: &'a Reduced,
    calls: &'a Cell<u64>,
}

impl Objective<'_> {
    fn gaussian(&self, p: &[f64]) -> Option<Gaussian> {
        let (om, t) = (self.model.omega, self.model.t);
        let ok = p[3] > 0.02 && p[3] < 1.0 && (0.0..=1.0).contains(&p[2]) && p[0].abs() < 8.0 && p[1].abs() < 8.0;
        ok.then(|| Gaussian { offset: p[0] * om, amplitude: p[1] * om, center_us: p[2] * t, width_us: p[3] * t })
    }
}

impl CostFunction for Objective<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        self.calls.set(self.calls.get() + 1);
        Ok(match self.gaussian(p) {
            Some(g) => {
                let out = self.model.run(&g);
                1.0 - reduced_fidelity(out.a01, out.a11)
            }
            None => 2.0,
        })
    }
}

fn nelder_mead(obj: &Objective, x0: &[f64], step: &[f64], iters: u64) -> Result<(Vec<f64>, f64)> {
    let mut simplex = vec![x0.to_vec()];
    for (i, s) in step.iter().enumerate() {
        let mut v = x0.to_vec();
        v[i] += s;
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(1e-12)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let res = Executor::new(Objective { model: obj.model, calls: obj.calls }, solver)
        .configure(|s| s.max_iters(iters))
        .run()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let state = res.state();
    let best = state.get_best_param().cloned().unwrap_or_else(|| x0.to_vec());
    Ok((best, state.get_best_cost()))
}

/// Nearest of the phases {0, π} at which the native CNOT lowering is exact.
fn admissible_phi(phi_pulse: f64) -> f64 {
    let w = phi_pulse.rem_euclid(TAU);
    if (w - PI).abs() < PI / 2.0 {
        PI
    } else {
        0.0
    }
}

fn wrap(x: f64) -> f64 {
    let w = (x + PI).rem_euclid(TAU) - PI;
    if w <= -PI { w + TAU } else { w }
}

pub fn calibrate_cz(params: &DeviceParams, opts: &CalibrationOptions) -> Result<CalibrationResult> {
    params.validate()?;
    let t = params.gate_duration_us;
    let model = Reduced {
        omega: params.rabi(),
        v: params.vdw(params.spacing_um),
        t,
        steps: magnus::step_count(t, opts.dt_us),
    };
    let calls = Cell::new(0);
    let obj = Objective { model: &model, calls: &calls };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best = (vec![0.0; 4], f64::INFINITY);
    for _ in 0..opts.starts.max(1) {
        let x0 = vec![
            rng.random_range(-3.0..0.0),
            rng.random_range(0.5..5.0),
            0.5,
            rng.random_range(0.06..0.3),
        ];
        let (x, c) = nelder_mead(&obj, &x0, &[0.3, 0.3, 0.05, 0.03], opts.max_iters)?;
        if c < best.1 {
            best = (x, c);
        }
    }
    for scale in [0.05, 0.01] {
        let (x, c) = nelder_mead(&obj, &best.0, &[scale, scale, scale / 5.0, scale / 5.0], opts.max_iters)?;
        if c < best.1 {
            best = (x, c);
        }
    }
    let g = obj.gaussian(&best.0).expect("best point is feasible");
    let out = model.run(&g);
    let phi_pulse = out.a01.arg();
    let phi = admissible_phi(phi_pulse);
    // σ_z coefficient c shifts the conditional phase by 2cT and the detuning by +c
    let c = wrap(phi - phi_pulse) / (2.0 * t);
    let pulse = CzPulse {
        rabi_mhz: params.rabi_max_mhz,
        rabi_phase_rad: 0.0,
        detuning_offset_mhz: (g.offset - c) / TAU,
        detuning_amplitude_mhz: g.amplitude / TAU,
        detuning_center_us: g.center_us,
        detuning_width_us: g.width_us,
        sigma_z_mhz: c / TAU,
        phi_rad: phi,
        fidelity: 0.0,
    };
    let u = two_atom_unitary(&pulse, params, params.spacing_um, 0.0, opts.dt_us);
    let (fidelity, _) = cz_average_fidelity(&u);
    let model_fidelity = average_fidelity(&qubit_block(&u), &cz_frame(phi));
    let residual = 1.0 - [0usize, 1, 3, 4].iter().map(|&r| u[(r, 4)].norm_sqr()).sum::<f64>();
    if fidelity < opts.min_fidelity {
        return Err(Error::CalibrationFailed { fidelity, params: best.0 });
    }
    Ok(CalibrationResult {
        pulse: CzPulse { fidelity, ..pulse },
        fidelity,
        model_fidelity,
        rydberg_residual_11: residual,
        t_r_01_us: out.t_r_01,
        t_r_11_us: out.t_r_11,
        evaluations: calls.get(),
    })
}

/// γ such that one gate on inputs with equal |0⟩/|1⟩ weights loses
/// `loss_per_gate` of the norm to first order: `loss = 2γ·T_R` with
/// `T_R = (2·T_R(01) + T_R(11)) / 4`.
pub fn fit_gamma(loss_per_gate: f64, t_r_01_us: f64, t_r_11_us: f64) -> f64 {
    loss_per_gate / (2.0 * (2.0 * t_r_01_us + t_r_11_us) / 4.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_detuning_is_poor() {
        let p = DeviceParams::default();
        let model = Reduced { omega: p.rabi(), v: p.vdw(p.spacing_um), t: p.gate_duration_us, steps: 122 };
        let out = model.run(&Gaussian { offset: 0.0, amplitude: 0.0, center_us: 0.061, width_us: 0.01 });
        assert!(reduced_fidelity(out.a01, out.a11) < 0.999);
    }

    #[test]
    fn wrap_and_phi() {
        assert!((wrap(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert_eq!(admissible_phi(0.66), 0.0);
        assert_eq!(admissible_phi(2.9), PI);
        assert_eq!(admissible_phi(-3.0), PI);
    }

    #[test]
    fn perfect_cz_scores_one() {
        let mut u = DMatrix::<C64>::identity(9, 9);
        u[(4, 4)] = C64::new(-1.0, 0.0);
        assert!((cz_average_fidelity(&u).0 - 1.0).abs() < 1e-15);
    }
}
