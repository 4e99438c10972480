use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn cvtele(args: &[&str], out_dir: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cvtele"));
    cmd.args(args).env_remove("CVTELE_OUT_DIR");
    if let Some(dir) = out_dir {
        cmd.env("CVTELE_OUT_DIR", dir);
    }
    cmd.output().expect("binary runs")
}

fn meta_value(csv: &str, key: &str) -> Option<String> {
    csv.lines()
        .filter_map(|l| l.strip_prefix("# "))
        .find_map(|l| l.strip_prefix(&format!("{key}=")).map(str::to_string))
}

fn meta_f64(csv: &str, key: &str) -> f64 {
    meta_value(csv, key)
        .unwrap_or_else(|| panic!("missing {key}"))
        .parse()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(
        o.status.success(),
        "exit {:?}: {}",
        o.status.code(),
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn fidelity_coherent_input() {
    let o = cvtele(
        &[
            "fidelity",
            "--state",
            "coherent",
            "--alpha-re",
            "1",
            "--q",
            "0.5",
            "--cutoff",
            "40",
        ],
        None,
    );
    let text = stdout(&o);
    assert!((meta_f64(&text, "f_av") - 0.75).abs() < 1e-4);
    assert_eq!(meta_f64(&text, "f_av_closed_form"), 0.75);
    assert!(meta_f64(&text, "grid_boundary_mass") < 1e-8);
    for key in ["config_hash", "rng_version", "cutoff"] {
        assert!(meta_value(&text, key).is_some(), "{key}");
    }
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "t,beta_re,beta_im,probability,conditional_fidelity");
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 42);
    assert!(!text.contains('\r'));
}

#[test]
fn fidelity_number_state_at_classical_limit() {
    let text = stdout(&cvtele(
        &["fidelity", "--state", "number", "--n", "1", "--q", "0"],
        None,
    ));
    assert!((meta_f64(&text, "f_av") - 0.25).abs() < 1e-4);
    assert_eq!(meta_value(&text, "f_av_closed_form").unwrap(), "");
}

#[test]
fn invalid_q_is_a_validation_error() {
    let o = cvtele(&["fidelity", "--q", "1.2"], None);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("q must lie in"), "{err}");
}

#[test]
fn bad_flags_and_config_exit_2() {
    assert_eq!(
        cvtele(&["fidelity", "--points", "100"], None).status.code(),
        Some(2)
    );
    assert_eq!(
        cvtele(&["fidelity", "--bogus"], None).status.code(),
        Some(2)
    );
    assert_eq!(
        cvtele(&["fidelity", "--config", "/nonexistent/cfg.json"], None)
            .status
            .code(),
        Some(2)
    );
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"q": 0.5, "unknown_key": 1}"#).unwrap();
    let o = cvtele(&["fidelity", "--config", cfg.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn non_convergence_exits_3() {
    let o = cvtele(&["fidelity", "--extent", "1.0"], None);
    assert_eq!(o.status.code(), Some(3));
    let o = cvtele(&["povm-check", "--extent", "2.0"], None);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn sweep_q_matches_closed_form() {
    let text = stdout(&cvtele(
        &[
            "sweep-q",
            "--state",
            "coherent",
            "--alpha-re",
            "0.5",
            "--q-list",
            "0,0.25,0.5,0.75",
        ],
        None,
    ));
    assert!(meta_f64(&text, "max_closed_form_residual") < 1e-3);
    let rows: Vec<Vec<&str>> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    assert_eq!(rows.len(), 4);
    let first: f64 = rows[0][1].parse().unwrap();
    assert!((first - 0.5).abs() < 1e-6);
    assert_eq!(rows[0][5], "");
    let o = cvtele(&["sweep-q"], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_q_sampled_column() {
    let text = stdout(&cvtele(
        &[
            "sweep-q",
            "--q-list",
            "0.5",
            "--sampled",
            "--shots",
            "2000",
            "--seed",
            "5",
        ],
        None,
    ));
    let row: Vec<&str> = text.lines().last().unwrap().split(',').collect();
    let sampled: f64 = row[5].parse().unwrap();
    let stderr: f64 = row[6].parse().unwrap();
    assert!((sampled - 0.75).abs() < 4.0 * stderr);
}

#[test]
fn config_file_with_flag_override_and_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"state": "coherent", "alpha_re": 1.0, "q": 0.25, "shots": 2000, "seed": 3}"#,
    )
    .unwrap();
    let o = cvtele(
        &["shots", "--config", cfg.to_str().unwrap(), "--q", "0.5"],
        Some(dir.path()),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("shots.csv")).unwrap();
    assert_eq!(meta_f64(&csv, "q"), 0.5);
    assert_eq!(meta_value(&csv, "seed").unwrap(), "3");
    let summary: Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("shots.summary.json")).unwrap(),
    )
    .unwrap();
    let meta = &summary["meta"];
    assert_eq!(
        meta["config_hash"].as_str(),
        meta_value(&csv, "config_hash").as_deref()
    );
    assert!(meta["chi_square_p_value"].as_f64().unwrap() > 0.0);
    let (m, se) = (
        meta["mean_fidelity"].as_f64().unwrap(),
        meta["std_error"].as_f64().unwrap(),
    );
    assert!((m - 0.75).abs() < 4.0 * se);
    let header = csv.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(
        header,
        "shot_index,beta_re,beta_im,conditional_fidelity,weight_at_beta"
    );
}

#[test]
fn explicit_out_wins_over_out_dir_and_reruns_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a/f.json");
    let b = dir.path().join("b/f.json");
    for p in [&a, &b] {
        let o = cvtele(
            &[
                "fidelity",
                "--format",
                "json",
                "--q",
                "0.3",
                "--out",
                p.to_str().unwrap(),
            ],
            Some(dir.path()),
        );
        assert!(o.status.success());
    }
    assert!(!dir.path().join("fidelity.json").exists());
    let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    let v: Value = serde_json::from_slice(&ta).unwrap();
    assert_eq!(v["meta"]["q"], 0.3);
    assert_eq!(v["rows"].as_array().unwrap().len(), 41);
}

#[test]
fn verify_reports_completeness_and_noise_law() {
    let text = stdout(&cvtele(
        &[
            "verify",
            "--state",
            "coherent",
            "--alpha-re",
            "1",
            "--q",
            "0.5",
            "--basis",
            "homodyne-x",
        ],
        None,
    ));
    assert!(meta_f64(&text, "completeness_deviation") < 1e-4);
    let var = meta_f64(&text, "teleported_variance");
    assert!((var - (0.25 + 0.5 / 3.0)).abs() < 1e-3);
    let text = stdout(&cvtele(
        &[
            "verify", "--state", "number", "--n", "2", "--basis", "number",
        ],
        None,
    ));
    assert!(meta_f64(&text, "completeness_deviation") < 1e-4);
    assert!((meta_f64(&text, "input_mean_photon_number") - 2.0).abs() < 1e-12);
}

#[test]
fn verify_eight_port_gamma_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v.csv");
    let o = cvtele(
        &[
            "verify",
            "--state",
            "cat",
            "--alpha-re",
            "0.8",
            "--q",
            "0.6",
            "--basis",
            "eight-port",
            "--shots",
            "3000",
            "--out",
            out.to_str().unwrap(),
        ],
        None,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let main = std::fs::read_to_string(&out).unwrap();
    assert!(meta_f64(&main, "completeness_deviation") < 1e-4);
    let gamma = std::fs::read_to_string(dir.path().join("v.gamma.csv")).unwrap();
    assert!(meta_f64(&gamma, "max_abs_z_score") < 4.5);
    assert_eq!(
        gamma.lines().find(|l| !l.starts_with('#')).unwrap(),
        "moment,sampled,std_error,expected,z_score"
    );
}

#[test]
fn povm_check_reports_interior_dimension() {
    let text = stdout(&cvtele(
        &[
            "povm-check",
            "--state",
            "number",
            "--n",
            "1",
            "--cutoff",
            "30",
        ],
        None,
    ));
    assert_eq!(meta_value(&text, "interior_dim").unwrap(), "23");
    assert!(meta_f64(&text, "deviation") < 1e-6);
}
