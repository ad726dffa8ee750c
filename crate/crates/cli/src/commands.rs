use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use rayon::prelude::*;
use rydtwin::analysis::{
    classify_readout, cz_per_layer, per_layer_infidelity, rydberg_observables, summarize_run, target_groups,
    ClassifiedReadout, DephasingModel, FidelityReport, LayerInfidelity, RunSummary, PRECISION_FLOOR,
};
use rydtwin::compiler::{compile, SearchReport};
use rydtwin::engine::{
    exact_distribution, pulse_layout, run_ideal_with, run_pulse, sample_measurements, Histogram, MAX_DENSE_SITES,
    PULSE_ROUTINE_LIMIT,
};
use rydtwin::physics::{calibrate_cz, CalibrationOptions, DeviceParams};
use rydtwin::scheduler::lower_to_native;
use rydtwin::{Circuit, DeviceProfile, Lattice, Level, QutritState, RunRecord};
use serde::Serialize;

use crate::config::{Backend, Config, ConfigError};
use crate::output::{read_to_string, Output};

pub const RUN_SCHEMA: &str = "rydtwin-run/1";
pub const SEARCH_SCHEMA: &str = "rydtwin-search/1";
pub const HISTOGRAM_SCHEMA: &str = "rydtwin-histogram/1";
pub const REPORT_SCHEMA: &str = "rydtwin-report/1";
pub const SWEEP_SCHEMA: &str = "rydtwin-sweep/1";
pub const SERIES_SCHEMA: &str = "rydtwin-series/1";

/// Device profile from `--profile`, `device.profile`, or the parameters in
/// the config. Parameters that change the CZ dynamics trigger a fresh
/// calibration; otherwise the bundled reference pulse is used.
pub fn resolve_profile(cfg: &Config, flag: Option<&Path>) -> Result<DeviceProfile> {
    if let Some(path) = flag.or(cfg.device.profile.as_deref()) {
        return Ok(DeviceProfile::from_toml(&read_to_string(path)?)?);
    }
    let p = &cfg.device.params;
    p.validate()?;
    let d = DeviceParams::default();
    let same_gate = p.spacing_um == d.spacing_um
        && p.blockade_radius_um == d.blockade_radius_um
        && p.c6_mhz_um6 == d.c6_mhz_um6
        && p.rabi_max_mhz == d.rabi_max_mhz
        && p.gate_duration_us == d.gate_duration_us;
    if same_gate {
        let mut profile = DeviceProfile::reference();
        profile.device = p.clone();
        return Ok(profile);
    }
    eprintln!("device parameters differ from the reference; calibrating the CZ pulse");
    let opts = CalibrationOptions::default();
    let result = calibrate_cz(p, &opts)?;
    Ok(DeviceProfile::new(p.clone()).with_calibration(&result, &opts))
}

fn load_circuit(path: &Path) -> Result<Circuit> {
    Circuit::from_json(&read_to_string(path)?).with_context(|| format!("loading circuit {}", path.display()))
}

fn stamp(circuit: &mut Circuit, hash: &str) {
    circuit.metadata.notes.insert("config_sha256".into(), hash.into());
}

pub fn cmd_compile(cfg: &Config, out: &Output) -> Result<(Circuit, SearchReport)> {
    let r_g = cfg.r_g_sq()?;
    let profile = resolve_profile(cfg, None)?;
    let request = cfg.compile_request(r_g, profile.cz_phi().unwrap_or(0.0))?;
    let t = Instant::now();
    let mut result = compile(&request)?;
    out.log(&format!("compile r_g^2={r_g} depth={} wall_s={:.3}", result.circuit.depth(), t.elapsed().as_secs_f64()));
    stamp(&mut result.circuit, &out.config_hash);
    out.write_bytes("circuit.json", result.circuit.to_json()?.as_bytes())?;
    out.write_json("search_report.json", SEARCH_SCHEMA, &result.report)?;
    eprintln!(
        "compiled {} circuit: depth {}, {} CZ rounds, {} two-qubit gates",
        match result.circuit.level {
            Level::Native => "native",
            Level::Logical => "logical",
        },
        result.circuit.depth(),
        result.report.cz_rounds,
        result.circuit.two_qubit_count()
    );
    Ok((result.circuit, result.report))
}

pub fn cmd_lower(cfg: &Config, circuit_path: &Path, out: &Output) -> Result<Circuit> {
    let circuit = load_circuit(circuit_path)?;
    let lattice = Lattice::build(circuit.lattice.clone())?;
    let r_g = match (cfg.compile.r_g_sq_in_a2, circuit.metadata.r_g_sq_in_a2) {
        (Some(r), _) | (None, Some(r)) => r,
        (None, None) => return Err(ConfigError("missing key `compile.r_g_sq_in_a2`".into()).into()),
    };
    let profile = resolve_profile(cfg, None)?;
    let mut native = lower_to_native(&circuit, &lattice, r_g, profile.cz_phi().unwrap_or(0.0))?;
    stamp(&mut native, &out.config_hash);
    out.write_bytes("circuit_native.json", native.to_json()?.as_bytes())?;
    eprintln!("lowered to {} native layers", native.depth());
    Ok(native)
}

#[derive(Serialize)]
struct RunFile<'a> {
    backend: Backend,
    open_system: bool,
    dt_us: Option<f64>,
    layout: &'a [usize],
    summary: &'a RunSummary,
    report: &'a FidelityReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    interaction_pairs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    krylov_max_dim: Option<usize>,
}

#[derive(Serialize)]
struct SeriesRow {
    t_us: f64,
    norm_sq: f64,
    sum_n: f64,
}

pub struct Simulation {
    pub state: QutritState,
    pub summary: RunSummary,
    pub record: Option<RunRecord>,
}

/// Working-set estimate for a pulse run: Krylov basis plus four state-sized buffers.
pub fn gib(n: usize) -> f64 {
    let vectors = rydtwin::BackendConfig::default().krylov_m_max as f64 + 4.0;
    vectors * 3f64.powi(n as i32) * 16.0 / (1u64 << 30) as f64
}

fn pulse_guard(circuit: &Circuit, cfg: &Config) -> Result<()> {
    let lattice = Lattice::build(circuit.lattice.clone())?;
    let n = pulse_layout(circuit, &lattice, cfg.sim.layout).len();
    if cfg.sim.allow_large && n > PULSE_ROUTINE_LIMIT && n <= MAX_DENSE_SITES {
        eprintln!("warning: pulse run on {n} sites needs roughly {:.2} GiB", gib(n));
    }
    Ok(())
}

/// Runs `circuit` on the configured backend and summarises the final state.
pub fn simulate(cfg: &Config, circuit: &Circuit, profile: &DeviceProfile) -> Result<Simulation> {
    let mut circuit = circuit.clone();
    if let Some(tau) = cfg.sim.tau_layer_us {
        circuit.metadata.tau_layer_us = Some(tau);
    }
    match cfg.sim.backend {
        Backend::Ideal => {
            let lattice = Lattice::build(circuit.lattice.clone())?;
            let layout = (0..lattice.len()).collect();
            let (state, _) = run_ideal_with(&circuit, layout, false)?;
            let report = FidelityReport::for_state(&state, &circuit, false)?;
            let summary = RunSummary {
                fidelity: report.fidelity,
                infidelity: report.infidelity,
                average_fidelity: report.average_fidelity,
                n_cz: report.n_cz,
                p_r: 0.0,
                t_r_us: 0.0,
                norm_sq: state.norm_sq(),
            };
            Ok(Simulation { state, summary, record: None })
        }
        Backend::Pulse => {
            if circuit.level == Level::Logical {
                let lattice = Lattice::build(circuit.lattice.clone())?;
                let r_g = circuit.metadata.r_g_sq_in_a2.or(cfg.compile.r_g_sq_in_a2).unwrap_or(1.0);
                circuit = lower_to_native(&circuit, &lattice, r_g, profile.cz_phi().unwrap_or(0.0))?;
            }
            pulse_guard(&circuit, cfg)?;
            let record = run_pulse(&circuit, profile, &cfg.backend_config())?;
            let summary = summarize_run(&record, &circuit)?;
            Ok(Simulation { state: record.final_state.clone(), summary, record: Some(record) })
        }
    }
}

pub fn summary_line(s: &RunSummary) -> String {
    format!(
        "F={:.10} I={:.3e} F_avg={:.10} n_cz={} P_R={:.3e} T_R={:.6e}us norm2={:.12}",
        s.fidelity, s.infidelity, s.average_fidelity, s.n_cz, s.p_r, s.t_r_us, s.norm_sq
    )
}

pub fn cmd_simulate(cfg: &Config, circuit_path: &Path, profile_flag: Option<&Path>, out: &Output) -> Result<Simulation> {
    let circuit = load_circuit(circuit_path)?;
    let profile = resolve_profile(cfg, profile_flag)?;
    let t = Instant::now();
    let sim = simulate(cfg, &circuit, &profile)?;
    out.log(&format!("simulate backend={:?} wall_s={:.3}", cfg.sim.backend, t.elapsed().as_secs_f64()));
    write_run(cfg, &circuit, &sim, out)?;
    println!("{}", summary_line(&sim.summary));
    Ok(sim)
}

fn write_run(cfg: &Config, circuit: &Circuit, sim: &Simulation, out: &Output) -> Result<()> {
    let mut report = FidelityReport::for_state(&sim.state, circuit, cfg.sim.open_system)?;
    report.norm_loss = cfg.sim.open_system.then(|| 1.0 - sim.state.norm_sq());
    let rec = sim.record.as_ref();
    let file = RunFile {
        backend: cfg.sim.backend,
        open_system: cfg.sim.open_system,
        dt_us: rec.map(|r| r.dt_us),
        layout: sim.state.layout(),
        summary: &sim.summary,
        report: &report,
        interaction_pairs: rec.map(|r| r.interaction_pairs),
        krylov_max_dim: rec.map(|r| r.krylov_max_dim),
    };
    out.write_json("run.json", RUN_SCHEMA, &file)?;
    if let Some(r) = rec {
        let rows: Vec<SeriesRow> = (0..r.times_us.len())
            .map(|i| SeriesRow { t_us: r.times_us[i], norm_sq: r.norms[i], sum_n: r.total_population(i) })
            .collect();
        out.write_csv("series.csv", SERIES_SCHEMA, &["t_us", "norm_sq", "sum_n"], &rows)?;
    }
    out.write_bytes("state.bin", &sim.state.to_le_bytes())?;
    Ok(())
}

#[derive(Serialize)]
struct HistogramRow {
    bin: String,
    zeros: usize,
    ones: Option<usize>,
    count: f64,
}

#[derive(Serialize)]
struct HistogramFile<'a> {
    seed: u64,
    histogram: &'a Histogram,
    classification: &'a ClassifiedReadout,
}

pub fn cmd_sample(cfg: &Config, state_path: &Path, out: &Output) -> Result<Histogram> {
    let bytes = std::fs::read(state_path).with_context(|| format!("reading {}", state_path.display()))?;
    let state = QutritState::from_le_bytes(&bytes)?;
    let n = state.layout().iter().max().map_or(0, |&m| m + 1).max(state.n_sites());
    let t = Instant::now();
    let hist = sample_measurements(&state, cfg.sim.shots, cfg.sim.scheme, cfg.sim.seed)?;
    out.log(&format!("sample shots={} wall_s={:.3}", cfg.sim.shots, t.elapsed().as_secs_f64()));
    let hist = Histogram { n_sites: n, counts: pad_bins(&hist, n - state.n_sites()), ..hist };
    let classes = classify_readout(&hist, n, cfg.sim.min_fraction);
    let rows: Vec<HistogramRow> = hist
        .counts
        .iter()
        .map(|(b, &c)| HistogramRow { bin: b.to_string(), zeros: b.zeros, ones: b.ones, count: c })
        .collect();
    out.write_csv("histogram.csv", HISTOGRAM_SCHEMA, &["bin", "zeros", "ones", "count"], &rows)?;
    out.write_json(
        "histogram.json",
        HISTOGRAM_SCHEMA,
        &HistogramFile { seed: cfg.sim.seed, histogram: &hist, classification: &classes },
    )?;
    eprintln!("GHZ-labelled mass {:.6}, error mass {:.6}", classes.ghz_mass, classes.error_mass);
    Ok(hist)
}

/// Sites absent from a pulse layout read `|0⟩`.
fn pad_bins(hist: &Histogram, pad: usize) -> std::collections::BTreeMap<rydtwin::engine::ReadoutBin, f64> {
    hist.counts
        .iter()
        .map(|(b, &c)| (rydtwin::engine::ReadoutBin { zeros: b.zeros + pad, ones: b.ones }, c))
        .collect()
}

#[derive(Serialize)]
struct LayerRow {
    layer: usize,
    #[serde(rename = "I")]
    infidelity: f64,
    #[serde(rename = "I_per_gate")]
    per_gate: f64,
}

#[derive(Serialize)]
struct Dephasing {
    t2_ms: f64,
    tau_layer_us: f64,
    t_us: f64,
    n_qubits: usize,
    closed_form: f64,
    estimate: f64,
}

#[derive(Serialize)]
struct AnalysisFile {
    fidelity: FidelityReport,
    p_r: f64,
    t_r_us: f64,
    dephasing: Dephasing,
    readout: ClassifiedReadout,
}

pub fn cmd_analyze(cfg: &Config, circuit_path: &Path, profile_flag: Option<&Path>, out: &Output) -> Result<()> {
    let circuit = load_circuit(circuit_path)?;
    let profile = resolve_profile(cfg, profile_flag)?;
    let lattice = Lattice::build(circuit.lattice.clone())?;
    let native = if circuit.level == Level::Logical {
        let r_g = circuit.metadata.r_g_sq_in_a2.or(cfg.compile.r_g_sq_in_a2).unwrap_or(1.0);
        lower_to_native(&circuit, &lattice, r_g, profile.cz_phi().unwrap_or(0.0))?
    } else {
        circuit
    };
    let t = Instant::now();
    let (state, per_layer, obs) = match cfg.sim.backend {
        Backend::Pulse => {
            pulse_guard(&native, cfg)?;
            let bc = rydtwin::BackendConfig { snapshot_per_layer: true, ..cfg.backend_config() };
            let run = run_pulse(&native, &profile, &bc)?;
            let (_, ideal) = run_ideal_with(&native, run.layout().to_vec(), true)?;
            let rows = per_layer_infidelity(&run.snapshots, &ideal, &cz_per_layer(&native))?;
            let obs = rydberg_observables(&run)?;
            (run.final_state, rows, obs)
        }
        Backend::Ideal => {
            // Gate-level evolution is exact; every layer sits at the precision floor.
            let (state, _) = run_ideal_with(&native, (0..lattice.len()).collect(), false)?;
            let rows = cz_per_layer(&native)
                .into_iter()
                .enumerate()
                .map(|(layer, n_cz)| LayerInfidelity {
                    layer,
                    n_cz,
                    fidelity: 1.0,
                    ratio: 1.0,
                    infidelity: 0.0,
                    per_gate: PRECISION_FLOOR,
                })
                .collect();
            (state, rows, rydtwin::analysis::RydbergObservables { p_r: 0.0, t_r_us: 0.0 })
        }
    };
    out.log(&format!("analyze backend={:?} wall_s={:.3}", cfg.sim.backend, t.elapsed().as_secs_f64()));
    let mut fidelity = FidelityReport::for_state(&state, &native, cfg.sim.open_system)?;
    fidelity.per_layer = per_layer;
    let tau = cfg.sim.tau_layer_us.or(native.metadata.tau_layer_us).unwrap_or(profile.device.tau_layer_us);
    let model = DephasingModel::from_circuit(&native, profile.device.t2_ms, tau)?;
    let t_us = native.depth() as f64 * tau;
    let dist = exact_distribution(&state, lattice.len(), cfg.sim.scheme)?;
    let groups = target_groups(&native);
    let readout = classify_readout(&dist, groups.iter().map(Vec::len).sum(), cfg.sim.min_fraction);
    let rows: Vec<LayerRow> = fidelity
        .per_layer
        .iter()
        .map(|r| LayerRow { layer: r.layer, infidelity: r.infidelity, per_gate: r.per_gate })
        .collect();
    out.write_csv("per_layer.csv", REPORT_SCHEMA, &["layer", "I", "I_per_gate"], &rows)?;
    let file = AnalysisFile {
        fidelity,
        p_r: obs.p_r,
        t_r_us: obs.t_r_us,
        dephasing: Dephasing {
            t2_ms: model.t2_ms,
            tau_layer_us: tau,
            t_us,
            n_qubits: model.n_qubits,
            closed_form: model.closed_form(t_us),
            estimate: model.estimate(t_us),
        },
        readout,
    };
    out.write_json("analysis.json", REPORT_SCHEMA, &file)?;
    println!(
        "F={:.10} F_avg={:.10} P_R={:.3e} T_R={:.6e}us F_D={:.6}",
        file.fidelity.fidelity, file.fidelity.average_fidelity, file.p_r, file.t_r_us, file.dephasing.estimate
    );
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub r_g_sq: f64,
    pub lattice: String,
    pub depth: Option<usize>,
    #[serde(rename = "F")]
    pub fidelity: Option<f64>,
    #[serde(rename = "I")]
    pub infidelity: Option<f64>,
    #[serde(rename = "P_R")]
    pub p_r: Option<f64>,
    #[serde(rename = "T_R")]
    pub t_r_us: Option<f64>,
    pub norm: Option<f64>,
    pub status: String,
}

#[derive(Serialize)]
struct SiteRow {
    index: usize,
    row: usize,
    col: usize,
    x_um: f64,
    y_um: f64,
}

pub fn cmd_sweep(cfg: &Config, out: &Output) -> Result<Vec<SweepRow>> {
    let radii = match (&cfg.compile.r_g_sq_list, cfg.compile.r_g_sq_in_a2) {
        (Some(list), _) if !list.is_empty() => list.clone(),
        (_, Some(r)) => vec![r],
        _ => return Err(ConfigError("missing key `compile.r_g_sq_list`".into()).into()),
    };
    let profile = resolve_profile(cfg, None)?;
    let spec = cfg.lattice_spec()?;
    let label = format!("{:?}{}x{}", spec.kind, spec.rows, spec.cols).to_lowercase();
    let t = Instant::now();
    let rows: Vec<SweepRow> = radii
        .par_iter()
        .map(|&r| {
            let mut row = SweepRow {
                r_g_sq: r,
                lattice: label.clone(),
                depth: None,
                fidelity: None,
                infidelity: None,
                p_r: None,
                t_r_us: None,
                norm: None,
                status: "ok".into(),
            };
            let run = || -> Result<(usize, RunSummary)> {
                let req = cfg.compile_request(r, profile.cz_phi().unwrap_or(0.0))?;
                let circuit = compile(&req)?.circuit;
                let sim = simulate(cfg, &circuit, &profile)?;
                Ok((circuit.depth(), sim.summary))
            };
            match run() {
                Ok((d, s)) => {
                    row.depth = Some(d);
                    row.fidelity = Some(s.fidelity);
                    row.infidelity = Some(s.infidelity);
                    row.p_r = Some(s.p_r);
                    row.t_r_us = Some(s.t_r_us);
                    row.norm = Some(s.norm_sq);
                }
                Err(e) => row.status = format!("error: {e}"),
            }
            row
        })
        .collect();
    out.log(&format!("sweep radii={} wall_s={:.3}", radii.len(), t.elapsed().as_secs_f64()));
    out.write_csv(
        "sweep.csv",
        SWEEP_SCHEMA,
        &["r_g_sq", "lattice", "depth", "F", "I", "P_R", "T_R", "norm", "status"],
        &rows,
    )?;
    let lattice = Lattice::build(spec)?;
    let sites: Vec<SiteRow> = lattice
        .sites()
        .iter()
        .map(|s| SiteRow { index: s.index, row: s.row, col: s.col, x_um: s.x_um, y_um: s.y_um })
        .collect();
    out.write_csv("sites.csv", SWEEP_SCHEMA, &["index", "row", "col", "x_um", "y_um"], &sites)?;
    for r in &rows {
        eprintln!("r_g^2={} D={:?} I={:?} {}", r.r_g_sq, r.depth, r.infidelity, r.status);
    }
    Ok(rows)
}

pub fn cmd_calibrate(cfg: &Config, out: &Output) -> Result<DeviceProfile> {
    let opts = CalibrationOptions { seed: cfg.sim.seed.max(1), ..Default::default() };
    let t = Instant::now();
    let result = calibrate_cz(&cfg.device.params, &opts)?;
    out.log(&format!("calibrate evaluations={} wall_s={:.3}", result.evaluations, t.elapsed().as_secs_f64()));
    let profile = DeviceProfile::new(cfg.device.params.clone()).with_calibration(&result, &opts);
    let text = format!("# config_sha256 = \"{}\"\n{}", out.config_hash, profile.to_toml()?);
    out.write_bytes("device.toml", text.as_bytes())?;
    println!("F_CZ={:.10} phi={} T_R(01)={:.6e}us T_R(11)={:.6e}us", result.fidelity, result.pulse.phi_rad, result.t_r_01_us, result.t_r_11_us);
    Ok(profile)
}

#[derive(Serialize)]
struct PipelineReport<'a> {
    depth: usize,
    cz_rounds: usize,
    summary: &'a RunSummary,
    ghz_mass: f64,
    shots: u64,
}

/// compile → simulate → sample → analyze into one directory.
pub fn cmd_report(cfg: &Config, out: &Output) -> Result<()> {
    let (circuit, search) = cmd_compile(cfg, out)?;
    let circuit_path = out.path("circuit.json");
    let sim = cmd_simulate(cfg, &circuit_path, None, out)?;
    let hist = cmd_sample(cfg, &out.path("state.bin"), out)?;
    cmd_analyze(cfg, &circuit_path, None, out)?;
    let n: usize = target_groups(&circuit).iter().map(Vec::len).sum();
    let classes = classify_readout(&hist, n, cfg.sim.min_fraction);
    out.write_json(
        "report.json",
        REPORT_SCHEMA,
        &PipelineReport {
            depth: circuit.depth(),
            cz_rounds: search.cz_rounds,
            summary: &sim.summary,
            ghz_mass: classes.ghz_mass,
            shots: cfg.sim.shots,
        },
    )?;
    Ok(())
}
