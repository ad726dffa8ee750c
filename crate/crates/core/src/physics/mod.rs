//! Device constants, Hamiltonian terms, pulse shapes and CZ calibration.
//!
//! Configuration values carry cyclic units (MHz, μs, μm); internally every
//! frequency is an angular rate in rad/μs, i.e. `2π × MHz`.

mod calibrate;
mod profile;
mod pulse;
mod terms;

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use calibrate::{
    calibrate_cz, cz_average_fidelity, fit_gamma, two_atom_unitary, CalibrationOptions,
    CalibrationResult,
};
pub use profile::{DeviceProfile, PROFILE_SCHEMA};
pub use pulse::{
    pulses_for_layer, CzPulse, Gaussian, LayerPulse, PulseSchedule, RydbergDrive, SiteDrive,
};
pub use terms::{build_terms, build_terms_for, HamiltonianTerms, PairTerm};

/// Rydberg decay rate fitted so that one calibrated CZ on inputs with half
/// population in `|1⟩` loses about 1.4e-2 / 15 of the norm (see [`fit_gamma`]).
pub const DEFAULT_GAMMA_PER_US: f64 = 0.01375;

/// MHz to rad/μs.
pub fn angular(mhz: f64) -> f64 {
    TAU * mhz
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceParams {
    pub spacing_um: f64,
    pub blockade_radius_um: f64,
    /// `None` derives C6 from the blockade condition.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c6_mhz_um6: Option<f64>,
    pub rabi_max_mhz: f64,
    pub gate_duration_us: f64,
    pub gamma_per_us: f64,
    pub t2_ms: f64,
    /// Interaction cutoff pad in units of the spacing.
    pub d_off_a: f64,
    pub tau_layer_us: f64,
}

impl Default for DeviceParams {
    fn default() -> Self {
        Self {
            spacing_um: 3.0,
            blockade_radius_um: 4.98,
            c6_mhz_um6: None,
            rabi_max_mhz: 10.0,
            gate_duration_us: 0.122,
            gamma_per_us: DEFAULT_GAMMA_PER_US,
            t2_ms: 10.0,
            d_off_a: 2.0,
            tau_layer_us: 0.2,
        }
    }
}

impl DeviceParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("spacing_um", self.spacing_um),
            ("blockade_radius_um", self.blockade_radius_um),
            ("rabi_max_mhz", self.rabi_max_mhz),
            ("gate_duration_us", self.gate_duration_us),
            ("t2_ms", self.t2_ms),
            ("tau_layer_us", self.tau_layer_us),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be positive")));
            }
        }
        if !(self.gamma_per_us >= 0.0) || !(self.d_off_a >= 0.0) {
            return Err(Error::InvalidParameter("gamma and d_off must be non-negative".into()));
        }
        if let Some(c6) = self.c6_mhz_um6 {
            if !(c6 > 0.0) {
                return Err(Error::InvalidParameter(format!("c6 = {c6} must be positive")));
            }
        }
        Ok(())
    }

    /// C6 in MHz·μm⁶, explicit or derived.
    pub fn c6(&self) -> f64 {
        self.c6_mhz_um6.unwrap_or_else(|| derive_c6(self))
    }

    /// Pair shift `V(d) = −C6/d⁶` in MHz.
    pub fn vdw_mhz(&self, d_um: f64) -> f64 {
        -self.c6() / d_um.powi(6)
    }

    /// Pair shift in rad/μs.
    pub fn vdw(&self, d_um: f64) -> f64 {
        angular(self.vdw_mhz(d_um))
    }

    /// Rydberg Rabi coefficient in rad/μs.
    pub fn rabi(&self) -> f64 {
        angular(self.rabi_max_mhz)
    }

    /// Interaction cutoff `r_i = r_g + d_off` in μm.
    pub fn interaction_radius(&self, r_g_sq_in_a2: f64) -> f64 {
        (r_g_sq_in_a2.sqrt() + self.d_off_a) * self.spacing_um
    }
}

/// `C6 = Ω_max · r_b⁶`, so that `|V(r_b)| = Ω_max`.
pub fn derive_c6(params: &DeviceParams) -> f64 {
    params.rabi_max_mhz * params.blockade_radius_um.powi(6)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_c6_value() {
        let p = DeviceParams::default();
        let c6 = derive_c6(&p);
        assert!((c6 - 10.0 * 4.98f64.powi(6)).abs() < 1e-6);
        assert!((c6 / 1.525e5 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn nearest_neighbour_shift() {
        let p = DeviceParams::default();
        let v = p.vdw_mhz(3.0);
        assert!((v - (-p.c6() / 729.0)).abs() < 1e-9);
        assert!((v + 209.2).abs() < 0.1, "{v}");
        assert!(v.abs() / p.rabi_max_mhz > 20.0);
        assert!((p.vdw_mhz(6.0) / v - 1.0 / 64.0).abs() < 1e-15);
        assert!((p.vdw_mhz(p.blockade_radius_um).abs() - p.rabi_max_mhz).abs() < 1e-9);
    }

    #[test]
    fn explicit_c6_overrides() {
        let p = DeviceParams { c6_mhz_um6: Some(1.0), ..Default::default() };
        assert_eq!(p.c6(), 1.0);
        assert!(DeviceParams { c6_mhz_um6: Some(-1.0), ..Default::default() }.validate().is_err());
    }
}
