use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hedgefront"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("HEDGEFRONT_OUT")
        .env_remove("HEDGEFRONT_THREADS")
        .output()
        .expect("binary runs")
}

fn problem() -> String {
    data("two_by_two.json").display().to_string()
}

#[test]
fn solve_writes_channel_report_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["solve", "--problem", &problem(), "--beta", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("channel.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("stimulus,umbrella,none"));
    // KL at beta = 2 on the symmetric 0/1 loss: P(correct) = 1 / (1 + e^-2)
    let rain: Vec<&str> = lines.next().unwrap().split(',').collect();
    let p: f64 = rain[1].parse().unwrap();
    assert!((p - 1.0 / (1.0 + (-2.0f64).exp())).abs() < 1e-9);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "solve");
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    assert!(dir.path().join("report.json").exists());
}

#[test]
fn unknown_generator_exits_2_and_lists_ids() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["solve", "--problem", &problem(), "--beta", "2", "--generator", "bogus"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    for id in ["kl", "pearson_chi2", "sq_hellinger", "hockey_stick"] {
        assert!(err.contains(id), "{err}");
    }
}

#[test]
fn malformed_problem_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\n  \"prior\": [0.5, 0.5],\n  \"loss\": [[0, 1], [1, 0]\n}\n").unwrap();
    let o = run(dir.path(), &["solve", "--problem", bad.to_str().unwrap(), "--beta", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 4"));
}

#[test]
fn invalid_prior_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"prior": [0.5, 0.6], "loss": [[0, 1], [1, 0]]}"#).unwrap();
    let o = run(dir.path(), &["hedge", "--problem", bad.to_str().unwrap(), "--beta", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["--seed", "7", "probe", "--box", "builtin:kl", "--problem", &problem(), "--controls", "0.5,1,2,4", "--samples", "4000"];
    for d in [&a, &b] {
        let o = run(d.path(), &args);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let read = |d: &tempfile::TempDir| fs::read(d.path().join("probe.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    let hash = |d: &tempfile::TempDir| {
        let m: serde_json::Value = serde_json::from_slice(&fs::read(d.path().join("manifest.json")).unwrap()).unwrap();
        m["config_hash"].clone()
    };
    assert_eq!(hash(&a), hash(&b));
}

#[test]
fn frontier_writes_projection_columns() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &["frontier", "--problem", &problem(), "--points", "6", "--project", "pearson_chi2,sq_hellinger"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("curve.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("beta,I_native,L,L_adv"));
    assert!(header.contains("I_projected_pearson_chi2") && header.contains("I_projected_sq_hellinger"));
    assert_eq!(csv.lines().count(), 7);
}

#[test]
fn hedge_certificate_matches_identity() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["hedge", "--problem", &problem(), "--beta", "3", "--generator", "sq_hellinger"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let c: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("certificate.json")).unwrap()).unwrap();
    assert!(c["identity_residual"].as_f64().unwrap() < 1e-10);
}

#[test]
fn tails_prints_json() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["tails", "--generator", "kl", "--beta", "2", "--u", "1", "--info", "0.1"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    // canonical KL gauge f(x) = x ln x - x + 1 has f*(y) = e^y - 1, so q_bar = 1 / e^(beta u)
    assert!((v["q_bar"].as_f64().unwrap() - (-2f64).exp()).abs() < 1e-12);
    assert!(v["delta"].as_f64().unwrap() > v["q_bar"].as_f64().unwrap());
}

#[test]
fn nonpositive_threshold_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["tails", "--beta", "2", "--u", "-1", "--info", "0.1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn experiment_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"mcc": 3}"#).unwrap();
    let o = run(dir.path(), &["experiment", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["selftest"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 3, "{text}");
}
