//! CLI behaviour: subcommand outputs, exit codes, determinism of reports.

use std::path::{Path, PathBuf};

fn write(path: &Path, content: &str) {
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::write(path, content).unwrap();
}

fn run(args: &[&str]) -> i32 {
    let mut argv = vec!["rwmh-certify"];
    argv.extend_from_slice(args);
    rwmh_certify::cli::run(argv)
}

fn normal_config(dir: &Path) -> PathBuf {
    let p = dir.join("normal1d.toml");
    write(
        &p,
        r#"
[target]
preset = "standard-normal"
dim = 1

[proposal]
family = "gaussian"
scale = 1.0

[pipeline]
seed = 11
mc-samples = 15000
chain-steps = 500
minor-x-points = 5
minor-sets = 10

[grid]
lo = [-8.0]
hi = [8.0]
cells = [161]
"#,
    );
    p
}

#[test]
fn bounds_happy_path_writes_cert_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = normal_config(dir.path());
    let out = dir.path().join("out");
    let code = run(&["bounds", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(out.join("cert.json").exists());
    assert!(out.join("bounds.csv").exists());
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("cert.json")).unwrap()).unwrap();
    assert_eq!(json["schema_version"], 1);
    assert_eq!(json["kind"], "bounds");
    // Every reported numeric carries provenance.
    let lam = &json["payload"]["certificate"]["lambda_tilde"];
    assert!(lam["value"].is_number());
    assert!(lam["formula"].is_string());
    assert!(lam["inputs_hash"].is_string());
    // b is beyond double range here: only the log is materialized.
    assert!(json["payload"]["certificate"]["b"]["value"].is_null());
    assert!(json["payload"]["certificate"]["b"]["log_value"].is_number());
    let csv_text = std::fs::read_to_string(out.join("bounds.csv")).unwrap();
    assert!(csv_text.starts_with("method,value,metadata"));
    assert!(csv_text.contains("acceptance"));
    assert!(csv_text.contains("upper-coupling"));
}

#[test]
fn oracle_passes_without_spectral_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = normal_config(dir.path());
    let out = dir.path().join("out");
    let code = run(&[
        "oracle",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--slack",
        "1e-3",
    ]);
    assert_eq!(code, 0, "sandwich must pass without the spectral bounds");
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("oracle.json")).unwrap()).unwrap();
    assert_eq!(json["payload"]["verdict"]["pass"], true);
    let slem = json["payload"]["slem"]["value"].as_f64().unwrap();
    assert!((slem - 0.798117).abs() < 5e-4, "slem {slem}");
    assert!(out.join("tv.csv").exists());
    assert!(out.join("spectrum.csv").exists());
}

#[test]
fn oracle_flags_dirichlet_bound_with_exit_3() {
    // With the spectral block enabled, the Dirichlet-form lower bound
    // exceeds the oracle SLEM and the sandwich fails: exit code 3.
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("spectral.toml");
    write(
        &p,
        r#"
[target]
preset = "standard-normal"
dim = 1

[proposal]
family = "gaussian"
scale = 1.0

[pipeline]
seed = 11
mc-samples = 15000
minor-x-points = 3
minor-sets = 5
spectral = { m = 1.0, l = 1.0 }
"#,
    );
    let out = dir.path().join("out");
    let code = run(&["oracle", "--config", p.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 3);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("oracle.json")).unwrap()).unwrap();
    assert_eq!(json["payload"]["verdict"]["pass"], false);
    let failing: Vec<&str> = json["payload"]["verdict"]["lower_checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|l| l["ok"] == false)
        .map(|l| l["method"].as_str().unwrap())
        .collect();
    assert_eq!(failing, vec!["spectral-dirichlet"]);
}

#[test]
fn verify_and_lower_and_sample_write_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = normal_config(dir.path());
    let out = dir.path().join("out");
    assert_eq!(
        run(&["verify", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]),
        0
    );
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("assumptions.json")).unwrap())
            .unwrap();
    assert_eq!(json["payload"]["all_pass"], true);

    assert_eq!(
        run(&["lower", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]),
        0
    );
    assert!(out.join("lower.csv").exists());
    assert!(out.join("lower.json").exists());

    assert_eq!(
        run(&["sample", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]),
        0
    );
    let chain = std::fs::read_to_string(out.join("chain.csv")).unwrap();
    let lines: Vec<&str> = chain.lines().collect();
    assert_eq!(lines[0], "step,x1,accepted");
    assert_eq!(lines.len(), 1 + 501); // header + initial + 500 recorded steps

    // Merge everything.
    assert_eq!(
        run(&["report", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]),
        0
    );
    let merged: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!(merged["assumptions"].is_object());
    assert!(merged["lower"].is_object());
}

#[test]
fn invalid_configs_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    // Constraint violation: eps-alpha beyond 1/3.
    let p = dir.path().join("bad.toml");
    write(
        &p,
        r#"
[target]
preset = "standard-normal"
dim = 1

[proposal]
family = "gaussian"
scale = 1.0

[pipeline]
eps-alpha = 0.5
"#,
    );
    assert_eq!(run(&["bounds", "--config", p.to_str().unwrap()]), 1);

    // Unknown key.
    let p2 = dir.path().join("unknown.toml");
    write(
        &p2,
        r#"
[target]
preset = "standard-normal"
dim = 1
bogus = 3

[proposal]
family = "gaussian"
scale = 1.0
"#,
    );
    assert_eq!(run(&["bounds", "--config", p2.to_str().unwrap()]), 1);

    // Missing file.
    assert_eq!(run(&["bounds", "--config", "/nonexistent/x.toml"]), 1);
}

#[test]
fn logistic_dataset_pipeline_via_cli() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("toy.csv");
    write(&data, "y,x1\n1,1.0\n0,-1.0\n");
    let cfg = dir.path().join("logistic.toml");
    write(
        &cfg,
        &format!(
            r#"
[target]
preset = "logistic"
dataset = "{}"
eta = 0.5

[proposal]
family = "gaussian"
scale = 1.0

[pipeline]
seed = 3
mc-samples = 12000
"#,
            data.display()
        ),
    );
    let out = dir.path().join("out");
    assert_eq!(
        run(&["bounds", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]),
        0
    );
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("cert.json")).unwrap()).unwrap();
    let consts = &json["payload"]["logistic_constants"];
    assert_eq!(consts["c1"], 3.0);
    assert_eq!(consts["mp_prime"], 24.0);
}

#[test]
fn poisson_dataset_lower_bound_via_cli() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("counts.csv");
    write(&data, "y,x1\n1,0.5\n2,1.0\n0,-0.5\n");
    let cfg = dir.path().join("poisson.toml");
    write(
        &cfg,
        &format!(
            r#"
[target]
preset = "poisson"
dataset = "{}"

[proposal]
family = "gaussian"
scale = 1.0

[pipeline]
seed = 9
mc-samples = 12000
"#,
            data.display()
        ),
    );
    let out = dir.path().join("out");
    assert_eq!(
        run(&["lower", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]),
        0
    );
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("lower.json")).unwrap()).unwrap();
    let entries = json["payload"]["lower_bounds"].as_array().unwrap();
    // The preset's mode-based bound is appended; frozen oracle value 0.444102.
    let preset_bound = entries.last().unwrap();
    let v = preset_bound["bound"]["value"].as_f64().unwrap();
    assert!((v - 0.444102).abs() < 2e-4, "{v}");
}

#[test]
fn seed_env_var_overrides_flag() {
    // Serialize access to the env var by running both checks in one test.
    let dir = tempfile::tempdir().unwrap();
    let cfg = normal_config(dir.path());
    let (a, b, c) = (
        dir.path().join("a"),
        dir.path().join("b"),
        dir.path().join("c"),
    );
    std::env::set_var("RWMH_CERTIFY_SEED", "4242");
    assert_eq!(
        run(&["bounds", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap(), "--seed", "1"]),
        0
    );
    std::env::remove_var("RWMH_CERTIFY_SEED");
    assert_eq!(
        run(&["bounds", "--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap(), "--seed", "4242"]),
        0
    );
    assert_eq!(
        run(&["bounds", "--config", cfg.to_str().unwrap(), "--out", c.to_str().unwrap(), "--seed", "1"]),
        0
    );
    let ja = std::fs::read(a.join("cert.json")).unwrap();
    let jb = std::fs::read(b.join("cert.json")).unwrap();
    let jc = std::fs::read(c.join("cert.json")).unwrap();
    assert_eq!(ja, jb, "env seed must override the flag");
    assert_ne!(ja, jc, "different seeds must change the MC parts");
}
