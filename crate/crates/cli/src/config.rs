use std::path::{Path, PathBuf};

use rydtwin::compiler::{repetition_code_groups, CompileMode, CompileRequest, GhzTarget, TruncationPolicy};
use rydtwin::engine::{LayoutHint, Scheme};
use rydtwin::physics::DeviceParams;
use rydtwin::{BackendConfig, LatticeKind, LatticeSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Bad or incomplete configuration; maps to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn missing(key: &str) -> ConfigError {
    ConfigError(format!("missing key `{key}`"))
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub lattice: LatticeSection,
    pub compile: CompileSection,
    pub device: DeviceSection,
    pub sim: SimSection,
    pub output: OutputSection,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatticeSection {
    pub kind: Option<LatticeKind>,
    /// Shorthand for `rows = cols = side`.
    pub side: Option<usize>,
    pub rows: Option<usize>,
    pub cols: Option<usize>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    #[default]
    GlobalGhz,
    LocalGhz,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompileSection {
    pub r_g_sq_in_a2: Option<f64>,
    /// Radii for `sweep`.
    pub r_g_sq_list: Option<Vec<f64>>,
    pub mode: CompileMode,
    pub target: TargetKind,
    pub groups: Option<Vec<Vec<usize>>>,
    /// Named group layout; `repetition_code` is the 4×4 three-block tiling.
    pub groups_preset: Option<String>,
    pub seed: u64,
    pub max_rounds: Option<usize>,
    pub policy: TruncationPolicy,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceSection {
    /// Calibrated profile written by `calibrate`; overrides `params`.
    pub profile: Option<PathBuf>,
    pub params: DeviceParams,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Ideal,
    #[default]
    Pulse,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub backend: Backend,
    pub open_system: bool,
    pub dt_us: f64,
    pub record_stride: usize,
    pub seed: u64,
    pub shots: u64,
    pub scheme: Scheme,
    pub allow_large: bool,
    pub layout: LayoutHint,
    pub integrate_idle: bool,
    pub interaction_radius_um: Option<f64>,
    pub tau_layer_us: Option<f64>,
    /// Readout bins lighter than this are left out of classification listings.
    pub min_fraction: f64,
}

impl Default for SimSection {
    fn default() -> Self {
        let b = BackendConfig::default();
        Self {
            backend: Backend::Pulse,
            open_system: false,
            dt_us: b.dt_us,
            record_stride: b.record_stride,
            seed: 0,
            shots: 100_000,
            scheme: Scheme::TwoState,
            allow_large: false,
            layout: LayoutHint::RowMajor,
            integrate_idle: false,
            interaction_radius_um: None,
            tau_layer_us: None,
            min_fraction: 0.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
    }

    /// SHA-256 of the effective configuration in canonical JSON form. The
    /// output directory is left out so relocated runs hash the same.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serialises");
        value.as_object_mut().expect("config is a table").remove("output");
        let canonical = serde_json::to_string(&value).expect("value serialises");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn lattice_spec(&self) -> Result<LatticeSpec, ConfigError> {
        let l = &self.lattice;
        let rows = l.rows.or(l.side).ok_or_else(|| missing("lattice.side"))?;
        let cols = l.cols.or(l.side).ok_or_else(|| missing("lattice.side"))?;
        let spec = LatticeSpec {
            kind: l.kind.unwrap_or(LatticeKind::Square),
            rows,
            cols,
            spacing_um: self.device.params.spacing_um,
        };
        spec.validate().map_err(|e| ConfigError(e.to_string()))?;
        Ok(spec)
    }

    pub fn r_g_sq(&self) -> Result<f64, ConfigError> {
        self.compile.r_g_sq_in_a2.ok_or_else(|| missing("compile.r_g_sq_in_a2"))
    }

    pub fn target(&self) -> Result<GhzTarget, ConfigError> {
        match self.compile.target {
            TargetKind::GlobalGhz => Ok(GhzTarget::GlobalGhz),
            TargetKind::LocalGhz => {
                let groups = match (&self.compile.groups, self.compile.groups_preset.as_deref()) {
                    (Some(g), None) => g.clone(),
                    (None, Some("repetition_code")) => repetition_code_groups(),
                    (None, Some(other)) => return Err(ConfigError(format!("unknown groups_preset `{other}`"))),
                    (Some(_), Some(_)) => {
                        return Err(ConfigError("set either compile.groups or compile.groups_preset".into()))
                    }
                    (None, None) => return Err(missing("compile.groups")),
                };
                Ok(GhzTarget::LocalGhz { groups })
            }
        }
    }

    pub fn compile_request(&self, r_g_sq: f64, cz_phi: f64) -> Result<CompileRequest, ConfigError> {
        Ok(CompileRequest {
            lattice: self.lattice_spec()?,
            r_g_sq_in_a2: r_g_sq,
            mode: self.compile.mode,
            target: self.target()?,
            policy: self.compile.policy.clone(),
            seed: self.compile.seed,
            cz_phi,
            max_rounds: self.compile.max_rounds,
        })
    }

    pub fn backend_config(&self) -> BackendConfig {
        let s = &self.sim;
        BackendConfig {
            dt_us: s.dt_us,
            record_stride: s.record_stride,
            snapshot_per_layer: false,
            open_system: s.open_system,
            seed: s.seed,
            interaction_radius_um: s.interaction_radius_um,
            integrate_idle: s.integrate_idle,
            allow_large: s.allow_large,
            layout: s.layout,
            ..BackendConfig::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_namespaced_keys() {
        let c: Config = toml::from_str(
            "[lattice]\nside = 4\n[compile]\nr_g_sq_in_a2 = 8\nmode = \"native\"\n[device.params]\nt2_ms = 5.0\n[sim]\nbackend = \"ideal\"\n",
        )
        .unwrap();
        assert_eq!(c.lattice_spec().unwrap().rows, 4);
        assert_eq!(c.r_g_sq().unwrap(), 8.0);
        assert_eq!(c.device.params.t2_ms, 5.0);
        assert_eq!(c.sim.backend, Backend::Ideal);
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(toml::from_str::<Config>("[compile]\nrg = 2\n").is_err());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = Config::default();
        let mut b = Config::default();
        assert_eq!(a.hash(), b.hash());
        b.compile.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        b.compile.seed = 0;
        b.output.dir = "elsewhere".into();
        assert_eq!(a.hash(), b.hash());
    }
}
