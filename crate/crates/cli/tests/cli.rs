use std::path::Path;
use std::process::{Command, Output};

fn jjpump(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jjpump"))
        .args(args)
        .current_dir(dir)
        .env_remove("JJPUMP_THREADS")
        .output()
        .unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn data_rows(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).skip(1).collect()
}

#[test]
fn steady_conserves_current() {
    let dir = tempfile::tempdir().unwrap();
    let out = jjpump(
        &["steady", "--geometry", "symmetric", "--K", "0.1", "--Ec", "0.1", "--gamma-up", "100", "--bias", "1", "--flux", "0.25"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["converged"], true);
    assert!(v["currents"]["conservation_defect"].as_f64().unwrap().abs() < 1e-8);
    assert!(v["currents"]["pump"].as_f64().unwrap().abs() > 1e-4);
    assert_eq!(v["populations"].as_array().unwrap().len(), 4);
    assert_eq!(v["coherences"].as_array().unwrap().len(), 6);
    assert_eq!(v["manifest"]["subcommand"], "steady");
    assert_eq!(v["manifest"]["parameters"]["model_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn asymmetric_pump_without_charging_does_not_pump() {
    let dir = tempfile::tempdir().unwrap();
    let out = jjpump(
        &["steady", "--geometry", "asymmetric", "--Ec", "0", "--bias", "3", "--flux", "0.3"],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    assert!(json(&out)["currents"]["pump"].as_f64().unwrap().abs() < 1e-8);
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let missing = jjpump(&["steady", "--K", "0.1"], dir.path());
    assert_eq!(code(&missing), 1);
    assert!(String::from_utf8_lossy(&missing.stderr).contains("Usage"));
    assert_eq!(code(&jjpump(&["steady", "--geometry", "triangle"], dir.path())), 1);
    assert_eq!(code(&jjpump(&["bogus"], dir.path())), 1);
    assert_eq!(code(&jjpump(&["--help"], dir.path())), 0);
    assert_eq!(code(&jjpump(&["--version"], dir.path())), 0);
}

#[test]
fn invalid_input_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let bias = jjpump(&["steady", "--geometry", "symmetric", "--bias", "500"], dir.path());
    assert_eq!(code(&bias), 1);
    assert!(String::from_utf8_lossy(&bias.stderr).contains("negative"));
    std::fs::write(dir.path().join("bad.json"), r#"{"geometry": "symmetric", "K": 0.1}"#).unwrap();
    let bad = jjpump(&["steady", "--config", "bad.json"], dir.path());
    assert_eq!(code(&bad), 1);
    assert!(String::from_utf8_lossy(&bad.stderr).contains("schema error"));
    let gone = jjpump(&["steady", "--config", "missing.json"], dir.path());
    assert_eq!(code(&gone), 1);
    let clash = jjpump(&["steady", "--config", "bad.json", "--K", "0.2"], dir.path());
    assert_eq!(code(&clash), 1);
}

#[test]
fn non_convergence_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = jjpump(
        &["steady", "--geometry", "symmetric", "--Ec", "0.1", "--bias", "1", "--flux", "0.25", "--max-iter", "2", "--no-fallback"],
        dir.path(),
    );
    assert_eq!(code(&out), 2);
    assert_eq!(json(&out)["converged"], false);
}

#[test]
fn steady_from_config_matches_flags() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("m.json"),
        r#"{"geometry": "symmetric", "K": 0.1, "Ec": 0.1, "gamma_up": 100, "bias": 1, "flux_ratio": 0.25}"#,
    )
    .unwrap();
    let a = json(&jjpump(&["steady", "--config", "m.json"], dir.path()));
    let b = json(&jjpump(
        &["steady", "--geometry", "symmetric", "--Ec", "0.1", "--bias", "1", "--flux", "0.25"],
        dir.path(),
    ));
    assert_eq!(a["populations"], b["populations"]);
    assert_eq!(a["manifest"]["input_hashes"].as_object().unwrap().len(), 1);
}

#[test]
fn evolve_single_mode_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("one.json"),
        r#"{"geometry": "custom", "n_modes": 1, "gamma": 1, "gamma_up": 2}"#,
    )
    .unwrap();
    let out = jjpump(&["evolve", "--config", "one.json", "--t-end", "3", "-o", "tr.csv"], dir.path());
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(dir.path().join("tr.csv")).unwrap();
    assert!(text.contains("# manifest: tr.csv.manifest.json"));
    assert!(dir.path().join("tr.csv.manifest.json").exists());
    for row in data_rows(&text) {
        let f: Vec<f64> = row.split(',').map(|x| x.parse().unwrap()).collect();
        let exact = 2.0 * (1.0 - (-f[0]).exp());
        assert!((f[1] - exact).abs() < 1e-7, "t={} n={} exact={exact}", f[0], f[1]);
    }
}

#[test]
fn evolve_zero_horizon_and_uncoupled_network() {
    let dir = tempfile::tempdir().unwrap();
    let out = jjpump(
        &["evolve", "--geometry", "symmetric", "--K", "0", "--bias", "1", "--t-end", "0", "-o", "t0.csv"],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(dir.path().join("t0.csv")).unwrap();
    assert_eq!(data_rows(&text).len(), 1);

    jjpump(
        &["evolve", "--geometry", "symmetric", "--K", "0", "--Ec", "0.3", "--bias", "1", "--t-end", "2", "-o", "k0.csv"],
        dir.path(),
    );
    let text = std::fs::read_to_string(dir.path().join("k0.csv")).unwrap();
    let header: Vec<&str> = text.lines().find(|l| !l.starts_with('#')).unwrap().split(',').collect();
    assert_eq!(header.len(), 1 + 4 + 12);
    for row in data_rows(&text) {
        let f: Vec<f64> = row.split(',').map(|x| x.parse().unwrap()).collect();
        assert!(f[5..].iter().all(|&z| z == 0.0));
    }
}

#[test]
fn single_point_sweep_layout() {
    let dir = tempfile::tempdir().unwrap();
    let out = jjpump(
        &["sweep", "--geometry", "symmetric", "--Ec", "0.1", "--flux-min", "0.25", "--flux-max", "0.25", "--flux-count", "1", "--bias-min", "1", "--bias-max", "1", "--bias-count", "1", "--svg", "-o", "one.csv"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("one.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let comments = lines.iter().take_while(|l| l.starts_with('#')).count();
    assert!(comments > 0);
    assert_eq!(lines.len(), comments + 2);
    assert_eq!(
        lines[comments],
        "flux_ratio,bias,I_pump,I_L,I_D,I_R,I_U,n_L,n_D,n_R,n_U,converged,iterations,method"
    );
    assert!(text.contains("# manifest: one.csv.manifest.json"));

    let steady = json(&jjpump(
        &["steady", "--geometry", "symmetric", "--Ec", "0.1", "--bias", "1", "--flux", "0.25"],
        dir.path(),
    ));
    let pump: f64 = lines[comments + 1].split(',').nth(2).unwrap().parse().unwrap();
    assert_eq!(pump, steady["currents"]["pump"].as_f64().unwrap());

    let svg = std::fs::read_to_string(dir.path().join("one.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("one.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);
    assert_eq!(manifest["status"], "ok");
}

#[test]
fn sweep_rejects_bad_grids_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let base = ["sweep", "--geometry", "symmetric", "-o", "x.csv"];
    let with = |extra: &[&str]| {
        let mut v = base.to_vec();
        v.extend_from_slice(extra);
        code(&jjpump(&v, dir.path()))
    };
    assert_eq!(with(&["--flux-count", "0"]), 1);
    assert_eq!(with(&["--threads", "0"]), 1);
    assert_eq!(with(&["--Ec", "0.1", "--method", "linear_ec0"]), 1);
    assert_eq!(with(&["--quantity", "I_Z"]), 1);
    let env = Command::new(env!("CARGO_BIN_EXE_jjpump"))
        .args(base)
        .current_dir(dir.path())
        .env("JJPUMP_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(code(&env), 1);
}

#[test]
fn scan_ec_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = jjpump(
        &["scan-ec", "--geometry", "asymmetric", "--Ec", "0,0.1", "--K", "0.1", "--flux-step", "0.05", "--flux-count", "20", "-o", "scan.csv"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    let entries = v["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 2);
    assert!(entries[0]["max_abs_pump"].as_f64().unwrap() < 1e-8);
    assert!(entries[1]["max_abs_pump"].as_f64().unwrap() > 1e-6);
    let text = std::fs::read_to_string(dir.path().join("scan.csv")).unwrap();
    assert_eq!(data_rows(&text).len(), 2);
    let short = jjpump(
        &["scan-ec", "--geometry", "asymmetric", "--flux-step", "0.1", "--flux-count", "5", "-o", "s.csv"],
        dir.path(),
    );
    assert_eq!(code(&short), 1);
}

#[test]
fn verify_contract() {
    let dir = tempfile::tempdir().unwrap();
    let ok = jjpump(&["verify"], dir.path());
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stderr));
    assert_eq!(json(&ok)["report"]["all_passed"], true);

    let dev = jjpump(&["verify", "--Ec", "0.05"], dir.path());
    assert_eq!(code(&dev), 0);
    let d = json(&dev)["report"]["deviation"]["max_dev"].as_f64().unwrap();
    assert!(d > 1e-4);
    assert!(String::from_utf8_lossy(&dev.stderr).contains("deviation at Ec=0.05"));

    let guard = jjpump(&["verify", "--cutoff", "80"], dir.path());
    assert_eq!(code(&guard), 1);
    assert!(String::from_utf8_lossy(&guard.stderr).contains("exceeds the limit"));
}
