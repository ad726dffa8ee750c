use serde::{Deserialize, Serialize};

use super::{CalibrationOptions, CalibrationResult, CzPulse, DeviceParams};
use crate::error::{Error, Result};

pub const PROFILE_SCHEMA: &str = "rydtwin-device/1";

/// Device constants plus the calibrated CZ pulse, stored as TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviceProfile {
    pub schema: String,
    /// Frequencies in the file are cyclic (MHz); the Rydberg drive enters the
    /// Hamiltonian as the coefficient of σ⁺ with magnitude 2π·rabi_mhz rad/μs.
    pub convention: String,
    pub device: DeviceParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cz: Option<CzPulse>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub seed: u64,
    pub dt_us: f64,
    pub evaluations: u64,
    pub model_fidelity: f64,
    pub rydberg_residual_11: f64,
    pub t_r_01_us: f64,
    pub t_r_11_us: f64,
}

impl DeviceProfile {
    pub fn new(device: DeviceParams) -> Self {
        Self {
            schema: PROFILE_SCHEMA.into(),
            convention: "angular: coefficient = 2*pi*MHz rad/us".into(),
            device,
            cz: None,
            provenance: None,
        }
    }

    /// Default device with [`CzPulse::reference`].
    pub fn reference() -> Self {
        let mut p = Self::new(DeviceParams::default());
        p.cz = Some(CzPulse::reference());
        p.provenance = Some(Provenance {
            source: "reference".into(),
            seed: CalibrationOptions::default().seed,
            dt_us: CalibrationOptions::default().dt_us,
            evaluations: 2900,
            model_fidelity: 0.9999990391799474,
            rydberg_residual_11: 3.8428221870168144e-6,
            t_r_01_us: 0.04223024055165186,
            t_r_11_us: 0.05129665724742777,
        });
        p
    }

    pub fn with_calibration(mut self, result: &CalibrationResult, opts: &CalibrationOptions) -> Self {
        self.cz = Some(result.pulse.clone());
        self.provenance = Some(Provenance {
            source: "calibrate_cz".into(),
            seed: opts.seed,
            dt_us: opts.dt_us,
            evaluations: result.evaluations,
            model_fidelity: result.model_fidelity,
            rydberg_residual_11: result.rydberg_residual_11,
            t_r_01_us: result.t_r_01_us,
            t_r_11_us: result.t_r_11_us,
        });
        self
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Schema(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let p: Self = toml::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        if p.schema != PROFILE_SCHEMA {
            return Err(Error::Schema(format!("expected {PROFILE_SCHEMA}, found {}", p.schema)));
        }
        p.device.validate()?;
        Ok(p)
    }

    pub fn cz_phi(&self) -> Option<f64> {
        self.cz.as_ref().map(|c| c.phi_rad)
    }
}
