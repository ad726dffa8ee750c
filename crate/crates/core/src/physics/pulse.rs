use nalgebra::Matrix3;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{angular, DeviceParams};
use crate::circuit_ir::{Gate, Layer};
use crate::error::{Error, Result};

/// Tolerance when matching a circuit's CZ(φ) against the calibrated φ.
const PHI_TOL: f64 = 1e-9;

/// Calibrated CZ(φ) pulse, stored with cyclic units as in the device profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CzPulse {
    pub rabi_mhz: f64,
    pub rabi_phase_rad: f64,
    pub detuning_offset_mhz: f64,
    pub detuning_amplitude_mhz: f64,
    /// Relative to the start of the gate window.
    pub detuning_center_us: f64,
    pub detuning_width_us: f64,
    /// σ_z correction applied to both atoms during the window.
    pub sigma_z_mhz: f64,
    pub phi_rad: f64,
    pub fidelity: f64,
}

impl CzPulse {
    /// Output of `calibrate_cz` with default device parameters and options,
    /// kept so tests and quick runs skip the optimisation.
    pub fn reference() -> Self {
        Self {
            rabi_mhz: 10.0,
            rabi_phase_rad: 0.0,
            detuning_offset_mhz: -21.614065868924925,
            detuning_amplitude_mhz: 31.510049471370923,
            detuning_center_us: 0.06099999812931669,
            detuning_width_us: 0.015188766893596896,
            sigma_z_mhz: -0.4335871085536874,
            phi_rad: 0.0,
            fidelity: 0.9999990391799477,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gaussian {
    pub offset: f64,
    pub amplitude: f64,
    pub center_us: f64,
    pub width_us: f64,
}

impl Gaussian {
    pub fn at(&self, t_rel: f64) -> f64 {
        let x = (t_rel - self.center_us) / self.width_us;
        self.offset + self.amplitude * (-0.5 * x * x).exp()
    }

    pub fn max_abs(&self) -> f64 {
        self.offset.abs().max((self.offset + self.amplitude).abs())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RydbergDrive {
    /// Coefficient of σ⁺ = |r⟩⟨1| in rad/μs.
    pub omega: C64,
    /// Detuning on |r⟩ in rad/μs.
    pub detuning: Gaussian,
}

/// Drive coefficients of one site during a layer window, in rad/μs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteDrive {
    pub site: usize,
    pub omega_x: f64,
    pub omega_z: f64,
    pub rydberg: Option<RydbergDrive>,
}

impl SiteDrive {
    pub fn idle(site: usize) -> Self {
        Self { site, omega_x: 0.0, omega_z: 0.0, rydberg: None }
    }

    pub fn is_zero(&self) -> bool {
        self.omega_x == 0.0 && self.omega_z == 0.0 && self.rydberg.is_none()
    }

    /// One-site Hamiltonian in the basis (|0⟩, |1⟩, |r⟩) at time `t_rel`
    /// into the window.
    pub fn local_matrix(&self, t_rel: f64) -> Matrix3<C64> {
        let mut h = Matrix3::zeros();
        h[(0, 0)] = C64::new(self.omega_z, 0.0);
        h[(1, 1)] = C64::new(-self.omega_z, 0.0);
        h[(0, 1)] = C64::new(self.omega_x, 0.0);
        h[(1, 0)] = C64::new(self.omega_x, 0.0);
        if let Some(r) = &self.rydberg {
            h[(2, 1)] = r.omega;
            h[(1, 2)] = r.omega.conj();
            h[(2, 2)] = C64::new(r.detuning.at(t_rel), 0.0);
        }
        h
    }

    /// Upper bound on the local drive strength over the window.
    pub fn strength(&self) -> f64 {
        let r = self.rydberg.map_or((0.0, 0.0), |r| (r.omega.norm(), r.detuning.max_abs()));
        (self.omega_x.abs() + self.omega_z.abs() + r.0).max(r.0 + r.1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerPulse {
    pub layer: usize,
    pub start_us: f64,
    pub duration_us: f64,
    pub drives: Vec<SiteDrive>,
}

impl LayerPulse {
    pub fn has_rydberg(&self) -> bool {
        self.drives.iter().any(|d| d.rydberg.is_some())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSchedule {
    pub tau_layer_us: f64,
    pub layers: Vec<LayerPulse>,
}

impl PulseSchedule {
    /// Sampled coefficients `(t, Ω^x, Ω^z, |Ω^R|, Δ)` of one site on a grid of step `dt`.
    pub fn sample_site(&self, site: usize, dt_us: f64) -> Vec<[f64; 5]> {
        let mut out = Vec::new();
        for lp in &self.layers {
            let steps = (lp.duration_us / dt_us).round().max(1.0) as usize;
            let drive = lp.drives.iter().find(|d| d.site == site).copied().unwrap_or(SiteDrive::idle(site));
            for k in 0..steps {
                let t_rel = k as f64 * lp.duration_us / steps as f64;
                let (om, det) = drive.rydberg.map_or((0.0, 0.0), |r| (r.omega.norm(), r.detuning.at(t_rel)));
                out.push([lp.start_us + t_rel, drive.omega_x, drive.omega_z, om, det]);
            }
        }
        out
    }
}

/// Drive coefficients realising one native layer in a window of the gate duration.
pub fn pulses_for_layer(layer: &Layer, params: &DeviceParams, cz: Option<&CzPulse>) -> Result<Vec<SiteDrive>> {
    let t = params.gate_duration_us;
    let mut drives = Vec::new();
    for gate in layer.gates() {
        match *gate {
            Gate::Rx { site, theta } => {
                drives.push(SiteDrive { omega_x: theta / (2.0 * t), ..SiteDrive::idle(site) })
            }
            Gate::Rz { site, theta } => {
                drives.push(SiteDrive { omega_z: theta / (2.0 * t), ..SiteDrive::idle(site) })
            }
            Gate::CzPhi { control, target, phi } => {
                let cz = cz.ok_or_else(|| Error::InvalidGate("CZ_PHI needs a calibrated pulse".into()))?;
                if (phi - cz.phi_rad).abs() > PHI_TOL {
                    return Err(Error::InvalidGate(format!(
                        "CZ_PHI phase {phi} differs from the calibrated {}",
                        cz.phi_rad
                    )));
                }
                let rydberg = RydbergDrive {
                    omega: C64::from_polar(angular(cz.rabi_mhz), cz.rabi_phase_rad),
                    detuning: Gaussian {
                        offset: angular(cz.detuning_offset_mhz),
                        amplitude: angular(cz.detuning_amplitude_mhz),
                        center_us: cz.detuning_center_us,
                        width_us: cz.detuning_width_us,
                    },
                };
                for site in [control, target] {
                    drives.push(SiteDrive {
                        site,
                        omega_x: 0.0,
                        omega_z: angular(cz.sigma_z_mhz),
                        rydberg: Some(rydberg),
                    });
                }
            }
            other => {
                return Err(Error::InvalidGate(format!("{} has no pulse; lower the circuit first", other.kind())))
            }
        }
    }
    drives.retain(|d| !d.is_zero());
    Ok(drives)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn rotation_areas() {
        let p = DeviceParams::default();
        let layer = Layer::new(vec![Gate::Rx { site: 0, theta: PI }, Gate::Rz { site: 1, theta: 0.0 }]).unwrap();
        let d = pulses_for_layer(&layer, &p, None).unwrap();
        assert_eq!(d.len(), 1);
        assert!((d[0].omega_x - PI / (2.0 * 0.122)).abs() < 1e-12);
        assert!((2.0 * d[0].omega_x * p.gate_duration_us - PI).abs() < 1e-12);
    }

    #[test]
    fn logical_gates_rejected() {
        let p = DeviceParams::default();
        let layer = Layer::new(vec![Gate::H { site: 0 }]).unwrap();
        assert!(pulses_for_layer(&layer, &p, None).is_err());
    }

    #[test]
    fn local_matrix_is_hermitian() {
        let d = SiteDrive {
            site: 0,
            omega_x: 1.0,
            omega_z: -2.0,
            rydberg: Some(RydbergDrive {
                omega: C64::new(3.0, 4.0),
                detuning: Gaussian { offset: 1.0, amplitude: 2.0, center_us: 0.06, width_us: 0.01 },
            }),
        };
        let h = d.local_matrix(0.05);
        assert!((h - h.adjoint()).norm() < 1e-15);
        assert_eq!(h[(2, 1)], C64::new(3.0, 4.0));
    }
}
