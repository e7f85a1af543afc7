use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use qfc_link::config::REFERENCE_CONFIG;
use qfc_link::conversion::conversion_efficiency;
use qfc_link::link::snr_at_distance;
use qfc_link::report::sha256_hex;
use qfc_link::verification::bell::optimal_schedule;
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_qfc-link");

struct Outcome {
    code: i32,
    stderr: String,
}

fn qfc(args: &[&str], env_config: Option<&Path>) -> Outcome {
    let mut cmd = Command::new(BIN);
    cmd.args(args).env_remove("QFC_LINK_CONFIG").env("RUST_LOG", "error");
    if let Some(p) = env_config {
        cmd.env("QFC_LINK_CONFIG", p);
    }
    let out = cmd.output().expect("binary runs");
    Outcome {
        code: out.status.code().unwrap_or(-1),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

fn reference() -> Value {
    serde_json::from_str(REFERENCE_CONFIG).unwrap()
}

fn write_config(dir: &Path, v: &Value) -> PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, serde_json::to_vec_pretty(v).unwrap()).unwrap();
    p
}

fn read_json(p: &Path) -> Value {
    serde_json::from_slice(&fs::read(p).unwrap()).unwrap()
}

fn csv_rows(p: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(p).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r.records().map(|x| x.unwrap().iter().map(str::to_string).collect()).collect();
    (header, rows)
}

fn out_arg(dir: &Path) -> String {
    dir.display().to_string()
}

#[test]
fn every_command_succeeds_with_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let runs: &[(&str, Option<&str>)] = &[
        ("efficiency", None),
        ("cavity", None),
        ("link", None),
        ("g2", None),
        ("bell", Some("table")),
        ("bell", Some("analyze")),
        ("bell", Some("simulate")),
    ];
    for (cmd, mode) in runs {
        let out = tmp.path().join(format!("{cmd}-{}", mode.unwrap_or("x")));
        let mut args = vec![*cmd, "--out", out.to_str().unwrap()];
        if let Some(m) = mode {
            args.extend(["--mode", m]);
        }
        let r = qfc(&args, None);
        assert_eq!(r.code, 0, "{cmd}: {}", r.stderr);
        let man = read_json(&out.join("manifest.json"));
        assert_eq!(man["command"], *cmd);
        assert_eq!(man["tool"], "qfc-link");
        assert_eq!(man["version"], env!("CARGO_PKG_VERSION"));
        assert_eq!(man["config_sha256"].as_str().unwrap().len(), 64);
        let files = man["files"].as_array().unwrap();
        let on_disk = fs::read_dir(&out).unwrap().count();
        assert_eq!(files.len() + 1, on_disk, "manifest lists every emitted file");
        for f in files {
            let bytes = fs::read(out.join(f["name"].as_str().unwrap())).unwrap();
            assert_eq!(f["sha256"], sha256_hex(&bytes));
            assert_eq!(f["bytes"], bytes.len());
            assert!(!bytes.contains(&b'\r'));
        }
    }
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    for cmd in [vec!["bell", "--mode", "simulate"], vec!["g2"], vec!["link"], vec!["efficiency"]] {
        let mut manifests = Vec::new();
        for k in 0..2 {
            let out = tmp.path().join(format!("{}-{k}", cmd[0]));
            let mut args = cmd.clone();
            args.extend(["--out", out.to_str().unwrap(), "--seed", "7"]);
            assert_eq!(qfc(&args, None).code, 0);
            let m = read_json(&out.join("manifest.json"));
            manifests.push((m["files"].clone(), m["config_sha256"].clone()));
        }
        assert_eq!(manifests[0], manifests[1], "{cmd:?}");
    }
    // a different seed changes the simulated counts
    let a = tmp.path().join("bell-0");
    let c = tmp.path().join("bell-other");
    assert_eq!(qfc(&["bell", "--mode", "simulate", "--seed", "8", "--out", c.to_str().unwrap()], None).code, 0);
    assert_ne!(fs::read(a.join("bell_trials.csv")).unwrap(), fs::read(c.join("bell_trials.csv")).unwrap());
}

#[test]
fn unknown_key_is_a_config_error_without_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let mut v = reference();
    v["cavity"]["reflectivty_in"] = 0.9.into();
    let cfg = write_config(tmp.path(), &v);
    let out = tmp.path().join("out");
    let r = qfc(&["cavity", "--config", cfg.to_str().unwrap(), "--out", &out_arg(&out)], None);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("unknown field"), "{}", r.stderr);
    assert!(r.stderr.contains("config.json:"), "line diagnostics: {}", r.stderr);
    assert!(!out.exists());
}

#[test]
fn empty_grids_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let mut v = reference();
    v["efficiency"]["grid_w"] = serde_json::json!({"start": 10.0, "stop": 0.0, "step": 1.0});
    v["link"]["grid_km"] = serde_json::json!({"start": 10.0, "stop": 0.0, "step": 1.0});
    let cfg = write_config(tmp.path(), &v);
    for cmd in ["efficiency", "link"] {
        let out = tmp.path().join(cmd);
        let r = qfc(&[cmd, "--config", cfg.to_str().unwrap(), "--out", &out_arg(&out)], None);
        assert_eq!(r.code, 2, "{cmd}: {}", r.stderr);
        assert!(r.stderr.contains("grid"));
        assert!(!out.exists());
    }
}

#[test]
fn unstable_cavity_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let mut v = reference();
    v["cavity"]["facet_curvature_radius_m"] = 0.010.into();
    let cfg = write_config(tmp.path(), &v);
    let out = tmp.path().join("out");
    let r = qfc(&["cavity", "--config", cfg.to_str().unwrap(), "--out", &out_arg(&out)], None);
    assert_eq!(r.code, 2, "{}", r.stderr);
    assert!(!out.exists());
}

#[test]
fn cavity_coupling_arithmetic() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    assert_eq!(qfc(&["cavity", "--out", &out_arg(&out)], None).code, 0);
    let j = read_json(&out.join("cavity.json"));
    assert!((j["lossless"]["circulating_power"].as_f64().unwrap() - 75.0).abs() < 1e-9);
    assert!((j["lossless"]["finesse"].as_f64().unwrap() - 155.5).abs() < 0.1);
    assert!((j["with_loss"]["finesse"].as_f64().unwrap() - 146.0).abs() < 1e-6);
    let xi = j["lossless"]["focusing_parameter"].as_f64().unwrap();
    assert!((1.5..=1.65).contains(&xi));
}

#[test]
fn efficiency_curve_passes_operating_point_and_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    assert_eq!(qfc(&["efficiency", "--out", &out_arg(&out)], None).code, 0);
    let (header, rows) = csv_rows(&out.join("efficiency_curve.csv"));
    assert_eq!(header, ["pump_power_w", "efficiency"]);
    assert_eq!(rows.len(), 161);
    for r in &rows {
        let p: f64 = r[0].parse().unwrap();
        let e: f64 = r[1].parse().unwrap();
        assert_eq!(e.to_bits(), conversion_efficiency(p, 177.0).unwrap().to_bits());
    }
    let j = read_json(&out.join("efficiency.json"));
    assert!((j["operating_efficiency"].as_f64().unwrap() - 0.727).abs() < 0.005);
}

#[test]
fn depletion_fit_echoes_truth() {
    let tmp = tempfile::tempdir().unwrap();
    let mut csv = String::from("circulating_power_w,efficiency,uncertainty\n");
    for i in 1..=15 {
        let p = 6.0 * i as f64;
        csv.push_str(&format!("{p},{},0.004\n", conversion_efficiency(p, 142.5).unwrap()));
    }
    fs::write(tmp.path().join("depletion.csv"), csv).unwrap();
    let mut v = reference();
    v["efficiency"]["depletion_csv"] = "depletion.csv".into();
    let cfg = write_config(tmp.path(), &v);
    let out = tmp.path().join("out");
    let r = qfc(&["efficiency", "--config", cfg.to_str().unwrap(), "--out", &out_arg(&out)], None);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let j = read_json(&out.join("efficiency.json"));
    assert_eq!(j["p_max_source"], "fit");
    assert!((j["p_max_w"].as_f64().unwrap() / 142.5 - 1.0).abs() < 1e-6);
}

#[test]
fn malformed_csv_reports_row() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("d.csv"), "circulating_power_w,efficiency\n1.0,0.1\n2.0,abc\n").unwrap();
    let mut v = reference();
    v["efficiency"]["depletion_csv"] = "d.csv".into();
    let cfg = write_config(tmp.path(), &v);
    let out = tmp.path().join("out");
    let r = qfc(&["efficiency", "--config", cfg.to_str().unwrap(), "--out", &out_arg(&out)], None);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("d.csv:3"), "{}", r.stderr);
    assert!(!out.exists());
}

#[test]
fn link_sweep_shape_and_fidelity() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    assert_eq!(qfc(&["link", "--out", &out_arg(&out)], None).code, 0);
    let (header, rows) = csv_rows(&out.join("snr_sweep.csv"));
    assert_eq!(header[0], "distance_km");
    assert_eq!(rows.len(), 201);
    let ratio_col = header.iter().position(|h| h == "ratio_ppktp_over_ppln").unwrap();
    let r0: f64 = rows[0][ratio_col].parse().unwrap();
    assert!((r0 - 5.0).abs() < 0.1, "{r0}");
    let noiseless: f64 = rows[0][1].parse().unwrap();
    assert_eq!(noiseless, 3600.0);
    // values parse back bit-exactly
    let cfg: qfc_link::config::RunConfig = serde_json::from_str(REFERENCE_CONFIG).unwrap();
    let budgets = cfg.link.unwrap().budgets().unwrap();
    for row in rows.iter().step_by(17) {
        let x: f64 = row[0].parse().unwrap();
        for (k, (_, b)) in budgets.iter().enumerate() {
            let v: f64 = row[k + 1].parse().unwrap();
            assert_eq!(v.to_bits(), snr_at_distance(b, x).unwrap().to_bits());
        }
    }
    let noise = read_json(&out.join("noise.json"));
    assert!((noise["collection_efficiency"].as_f64().unwrap() - 0.459).abs() < 1e-3);
    assert!((noise["slope_fit_hz_per_nm_per_w"]["slope"].as_f64().unwrap() - 1480.0).abs() < 1e-6);
}

#[test]
fn single_noiseless_budget() {
    let tmp = tempfile::tempdir().unwrap();
    let mut v = reference();
    let first = v["link"]["budgets"][0].clone();
    v["link"]["budgets"] = Value::Array(vec![first]);
    v["link"]["ratios"] = Value::Array(vec![]);
    v["link"]["grid_km"] = serde_json::json!({"start": 0.0, "stop": 0.0, "step": 1.0});
    let cfg = write_config(tmp.path(), &v);
    let out = tmp.path().join("out");
    assert_eq!(qfc(&["link", "--config", cfg.to_str().unwrap(), "--out", &out_arg(&out)], None).code, 0);
    let (_, rows) = csv_rows(&out.join("snr_sweep.csv"));
    assert_eq!(rows, vec![vec!["0".to_string(), "3600".to_string()]]);
}

#[test]
fn bell_table_matches_printed_values() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    assert_eq!(qfc(&["bell", "--mode", "table", "--out", &out_arg(&out)], None).code, 0);
    let (header, rows) = csv_rows(&out.join("bell_bounds.csv"));
    assert_eq!(header, ["settings", "s_lhv", "s_qm", "v_crit"]);
    assert_eq!(rows.len(), 11);
    let n5 = &rows[3];
    assert_eq!(n5[0], "5");
    assert_eq!(format!("{:.3}", n5[2].parse::<f64>().unwrap()), "9.511");
    assert_eq!(format!("{:.2}", 100.0 * n5[3].parse::<f64>().unwrap()), "94.63");
}

fn expectations_csv(n: usize, drop_last: bool) -> String {
    let s = optimal_schedule(n).unwrap().with_model_expectations(1.0);
    let mut out = String::from("a,b,expectation,sigma\n");
    let k = s.terms().len() - usize::from(drop_last);
    for (t, e) in s.terms().iter().zip(s.expectations()).take(k) {
        out.push_str(&format!("{},{},{},0.001\n", t.a, t.b, e.unwrap().estimate));
    }
    out
}

#[test]
fn bell_analyze_ideal_and_incomplete() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("ideal.csv"), expectations_csv(4, false)).unwrap();
    fs::write(tmp.path().join("partial.csv"), expectations_csv(4, true)).unwrap();
    let mut v = reference();
    v["bell"]["settings"] = 4.into();
    v["bell"]["expectations_csv"] = "ideal.csv".into();
    let cfg = write_config(tmp.path(), &v);
    let out = tmp.path().join("ideal");
    let r = qfc(&["bell", "--mode", "analyze", "--config", cfg.to_str().unwrap(), "--out", &out_arg(&out)], None);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let j = read_json(&out.join("bell_analysis.json"));
    assert!((j["s"]["estimate"].as_f64().unwrap() - 7.391).abs() < 5e-4);
    assert_eq!(j["violates_local_bound"], true);

    v["bell"]["expectations_csv"] = "partial.csv".into();
    let cfg = write_config(tmp.path(), &v);
    let out = tmp.path().join("partial");
    let r = qfc(&["bell", "--mode", "analyze", "--config", cfg.to_str().unwrap(), "--out", &out_arg(&out)], None);
    assert_eq!(r.code, 3, "{}", r.stderr);
    assert!(!out.exists());
}

#[test]
fn bell_simulation_near_model() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    assert_eq!(qfc(&["bell", "--mode", "simulate", "--out", &out_arg(&out)], None).code, 0);
    let j = read_json(&out.join("bell_simulation.json"));
    let s = j["s"]["estimate"].as_f64().unwrap();
    let sigma = j["s"]["sigma"].as_f64().unwrap();
    assert!((s - 9.282).abs() < 3.0 * sigma.max(0.017), "{s} ± {sigma}");
    let (_, rows) = csv_rows(&out.join("bell_trials.csv"));
    assert_eq!(rows.len(), 10 * 10);
}

#[test]
fn g2_and_franson_from_files() {
    let tmp = tempfile::tempdir().unwrap();
    let mut hist = String::from("delay_s,counts\n");
    for i in -100i64..=100 {
        let c = if i == 0 { 31045 } else { 100 };
        hist.push_str(&format!("{},{c}\n", i as f64 * 2e-11));
    }
    fs::write(tmp.path().join("h.csv"), hist).unwrap();
    let mut scan = String::from("phase_rad,port,counts,time_s\n");
    for i in 0..12 {
        scan.push_str(&format!("{},++,500,1\n", i as f64 * std::f64::consts::PI / 6.0));
    }
    fs::write(tmp.path().join("s.csv"), scan).unwrap();
    let mut v = reference();
    v["g2"]["histogram_csv"] = "h.csv".into();
    v["franson"]["scan_csv"] = "s.csv".into();
    v["franson"]["ports"] = serde_json::json!([{ "port": "++", "accidental_rate_hz": 0.0 }]);
    let cfg = write_config(tmp.path(), &v);
    let out = tmp.path().join("out");
    let r = qfc(&["g2", "--config", cfg.to_str().unwrap(), "--out", &out_arg(&out)], None);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let j = read_json(&out.join("g2.json"));
    assert!((j["g2"]["g2"]["estimate"].as_f64().unwrap() - 310.45).abs() < 1e-9);
    assert_eq!(j["g2"]["source"], "csv");
    let vis = j["franson"]["ports"][0]["raw_visibility"]["estimate"].as_f64().unwrap();
    assert!(vis.abs() < 1e-12, "flat scan gives V = 0, got {vis}");
    assert!(!out.join("g2_histogram.csv").exists());
}

#[test]
fn synthetic_franson_recovers_visibilities() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    assert_eq!(qfc(&["g2", "--out", &out_arg(&out)], None).code, 0);
    let j = read_json(&out.join("g2.json"));
    let cfg = reference();
    for (k, p) in j["franson"]["ports"].as_array().unwrap().iter().enumerate() {
        let truth = cfg["franson"]["ports"][k]["visibility"].as_f64().unwrap();
        let c = &p["corrected_visibility"];
        let (est, sigma) = (c["estimate"].as_f64().unwrap(), c["sigma"].as_f64().unwrap());
        assert!((est - truth).abs() < 3.0 * sigma, "{}: {est} ± {sigma} vs {truth}", p["port"]);
        assert!(sigma < 0.0015);
    }
    assert!(j["g2"]["cauchy_schwarz_sigmas"].as_f64().unwrap() > 1200.0);
}

#[test]
fn env_var_supplies_default_config() {
    let tmp = tempfile::tempdir().unwrap();
    let mut v = reference();
    v["seed"] = 4242.into();
    let cfg = write_config(tmp.path(), &v);
    let out = tmp.path().join("out");
    let r = qfc(&["bell", "--mode", "table", "--out", &out_arg(&out)], Some(&cfg));
    assert_eq!(r.code, 0, "{}", r.stderr);
    let man = read_json(&out.join("manifest.json"));
    assert_eq!(man["seed"], 4242);
    assert!(man["config_source"].as_str().unwrap().ends_with("config.json"));

    // --config wins over the environment
    let out2 = tmp.path().join("out2");
    let r = qfc(&["bell", "--mode", "table", "--config", "/nonexistent.json", "--out", &out_arg(&out2)], Some(&cfg));
    assert_eq!(r.code, 2);
}

#[test]
fn bad_mode_and_usage() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    assert_eq!(qfc(&["cavity", "--mode", "fast", "--out", &out_arg(&out)], None).code, 2);
    assert_eq!(qfc(&["bell", "--mode", "fast", "--out", &out_arg(&out)], None).code, 2);
    assert_eq!(qfc(&["teleport"], None).code, 2);
    assert!(!out.exists());
    assert_eq!(qfc(&["--version"], None).code, 0);
}
