use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn rydtwin(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("config.toml");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_rydtwin"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out-dir")
        .arg(dir.join("out"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn compile_square_4x4_within_depth_budget() {
    let dir = tempfile::tempdir().unwrap();
    let o = rydtwin(dir.path(), "[lattice]\nside = 4\n[compile]\nr_g_sq_in_a2 = 8\n", &["compile"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let c = json(&dir.path().join("out/circuit.json"));
    let depth = c["layers"].as_array().unwrap().len();
    assert!(depth <= 30, "depth {depth}");
    let report = json(&dir.path().join("out/search_report.json"));
    assert_eq!(report["schema"], "rydtwin-search/1");
    assert_eq!(report["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn compile_local_ghz_preset() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[lattice]\nside = 4\n[compile]\nr_g_sq_in_a2 = 8\nmode = \"logical\"\ntarget = \"local_ghz\"\ngroups_preset = \"repetition_code\"\n";
    let o = rydtwin(dir.path(), cfg, &["compile"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let c = json(&dir.path().join("out/circuit.json"));
    assert!(c["layers"].as_array().unwrap().len() <= 26);
}

#[test]
fn missing_radius_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = rydtwin(dir.path(), "[lattice]\nside = 4\n", &["compile"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("compile.r_g_sq_in_a2"), "{}", stderr(&o));
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = rydtwin(dir.path(), "[lattice]\nside = 4\nsides = 3\n", &["compile"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn oversized_pulse_run_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[lattice]\nside = 5\n[compile]\nr_g_sq_in_a2 = 8\n";
    assert!(rydtwin(dir.path(), cfg, &["compile"]).status.success());
    let circuit = dir.path().join("out/circuit.json");
    let o = rydtwin(dir.path(), cfg, &["simulate", "--circuit", circuit.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("GiB"));
}

#[test]
fn large_pulse_run_needs_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[lattice]\nrows = 2\ncols = 5\n[compile]\nr_g_sq_in_a2 = 8\n";
    assert!(rydtwin(dir.path(), cfg, &["compile"]).status.success());
    let circuit = dir.path().join("out/circuit.json");
    let o = rydtwin(dir.path(), cfg, &["simulate", "--circuit", circuit.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("bytes"));
}

#[test]
fn oversized_dt_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[lattice]\nside = 2\n[compile]\nr_g_sq_in_a2 = 4\n";
    assert!(rydtwin(dir.path(), cfg, &["compile"]).status.success());
    let circuit = dir.path().join("out/circuit.json");
    let o = rydtwin(dir.path(), cfg, &["--dt", "0.5", "simulate", "--circuit", circuit.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn pulse_report_on_2x2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[lattice]\nside = 2\n[compile]\nr_g_sq_in_a2 = 4\n[sim]\nshots = 5000\nseed = 3\n";
    let o = rydtwin(dir.path(), cfg, &["report"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("out");
    let run = json(&out.join("run.json"));
    let f = run["summary"]["fidelity"].as_f64().unwrap();
    assert!(f >= 0.999, "F = {f}");
    assert_eq!(run["schema"], "rydtwin-run/1");
    for name in ["series.csv", "histogram.csv", "per_layer.csv"] {
        let text = std::fs::read_to_string(out.join(name)).unwrap();
        assert!(text.starts_with("# schema="), "{name}");
        assert!(text.contains(run["config_sha256"].as_str().unwrap()), "{name}");
    }
    let hist = json(&out.join("histogram.json"));
    assert!(hist["classification"]["ghz_mass"].as_f64().unwrap() > 0.99);
    let report = json(&out.join("report.json"));
    assert_eq!(report["shots"], 5000);
    assert!(std::fs::read_to_string(out.join("rydtwin.log")).unwrap().contains("wall_s"));
}

#[test]
fn ideal_4x4_ghz() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[lattice]\nside = 4\n[compile]\nr_g_sq_in_a2 = 8\n[sim]\nbackend = \"ideal\"\n";
    assert!(rydtwin(dir.path(), cfg, &["compile"]).status.success());
    let circuit = dir.path().join("out/circuit.json");
    let o = rydtwin(dir.path(), cfg, &["simulate", "--circuit", circuit.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let run = json(&dir.path().join("out/run.json"));
    assert!(run["summary"]["fidelity"].as_f64().unwrap() >= 1.0 - 1e-10);
}

#[test]
fn sweep_writes_one_row_per_radius() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[lattice]\nrows = 2\ncols = 3\n[compile]\nr_g_sq_list = [1, 4, 16]\n";
    let o = rydtwin(dir.path(), cfg, &["sweep"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(dir.path().join("out/sweep.csv"))
        .unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3);
    let inf: Vec<f64> = rows.iter().map(|r| r[4].parse().unwrap()).collect();
    assert!(inf[0] > inf[2], "{inf:?}");
    assert!(rows.iter().all(|r| &r[8] == "ok"));
    assert!(dir.path().join("out/sites.csv").exists());
}

fn sweep_rows(dir: &Path) -> Vec<csv::StringRecord> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(dir.join("out/sweep.csv"))
        .unwrap()
        .records()
        .map(Result::unwrap)
        .collect()
}

#[test]
fn pulse_sweep_on_3x3_improves_with_radius() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[lattice]\nside = 3\n[compile]\nr_g_sq_list = [1, 2, 4, 8, 16]\n";
    let o = rydtwin(dir.path(), cfg, &["sweep"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = sweep_rows(dir.path());
    let inf: Vec<f64> = rows.iter().map(|r| r[4].parse().unwrap()).collect();
    // r_g^2 >= 2 admits no parallel CZs on 3×3, so those rows tie
    assert!(inf.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9)), "{inf:?}");
    assert!(inf[0] > 10.0 * inf[1], "{inf:?}");
}

#[test]
fn hex_sweep_records_positions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[lattice]\nkind = \"hexagonal\"\nside = 4\n[compile]\nr_g_sq_list = [4]\n[sim]\nbackend = \"ideal\"\n";
    let o = rydtwin(dir.path(), cfg, &["sweep"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let sites = std::fs::read_to_string(dir.path().join("out/sites.csv")).unwrap();
    assert_eq!(sites.lines().count(), 2 + 16);
    let rows = sweep_rows(dir.path());
    assert_eq!(rows.len(), 1);
    assert_eq!(&rows[0][1], "hexagonal4x4");
    assert!(rows[0][2].parse::<usize>().unwrap() <= 29);
    assert!(rows[0][3].parse::<f64>().unwrap() >= 1.0 - 1e-10);
}

#[test]
fn calibrated_profile_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[lattice]\nside = 2\n[compile]\nr_g_sq_in_a2 = 4\n";
    assert!(rydtwin(dir.path(), cfg, &["calibrate"]).status.success());
    assert!(rydtwin(dir.path(), cfg, &["compile"]).status.success());
    let out = dir.path().join("out");
    let profile = out.join("device.toml");
    let circuit = out.join("circuit.json");
    let o = rydtwin(
        dir.path(),
        cfg,
        &["simulate", "--circuit", circuit.to_str().unwrap(), "--profile", profile.to_str().unwrap()],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(json(&out.join("run.json"))["summary"]["fidelity"].as_f64().unwrap() >= 0.999);
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let cfg = "[lattice]\nside = 2\n[compile]\nr_g_sq_in_a2 = 4\n[sim]\nshots = 2000\nseed = 11\n";
    let files = ["circuit.json", "search_report.json", "run.json", "series.csv", "state.bin", "histogram.csv", "histogram.json", "per_layer.csv", "analysis.json", "report.json"];
    let runs: Vec<Vec<Vec<u8>>> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            let o = rydtwin(dir.path(), cfg, &["report"]);
            assert!(o.status.success(), "{}", stderr(&o));
            files.iter().map(|f| std::fs::read(dir.path().join("out").join(f)).unwrap()).collect()
        })
        .collect();
    for (i, f) in files.iter().enumerate() {
        assert_eq!(runs[0][i], runs[1][i], "{f} differs");
    }
}

#[test]
fn thread_count_does_not_change_sweep() {
    let cfg = "[lattice]\nrows = 1\ncols = 4\n[compile]\nr_g_sq_list = [1, 4]\n";
    let read = |threads: &str| {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = dir.path().join("config.toml");
        std::fs::write(&cfg_path, cfg).unwrap();
        let o = Command::new(env!("CARGO_BIN_EXE_rydtwin"))
            .env("RYDTWIN_THREADS", threads)
            .arg("--config")
            .arg(&cfg_path)
            .arg("--out-dir")
            .arg(dir.path().join("out"))
            .arg("sweep")
            .output()
            .unwrap();
        assert!(o.status.success());
        std::fs::read(dir.path().join("out/sweep.csv")).unwrap()
    };
    assert_eq!(read("1"), read("2"));
}
