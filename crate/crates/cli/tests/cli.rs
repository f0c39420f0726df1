use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

fn spme(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spme-lab"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn only_run_dir(root: &Path) -> PathBuf {
    let dirs: Vec<_> = std::fs::read_dir(root).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(dirs.len(), 1, "{dirs:?}");
    dirs.into_iter().next().unwrap()
}

#[test]
fn validate_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let ok = spme(tmp.path(), &["validate", fixture("pme_m2.toml").to_str().unwrap()]);
    assert_eq!(ok.status.code(), Some(0), "{}", stdout(&ok));

    let bad = spme(tmp.path(), &["validate", fixture("mu2_d3.toml").to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout(&bad).contains("Γ_d"));

    let missing = spme(tmp.path(), &["validate", "/definitely/not/here.toml"]);
    assert_eq!(missing.status.code(), Some(2));

    let broken = tmp.path().join("broken.toml");
    std::fs::write(&broken, "[domain]\ndim = \"one\"\n").unwrap();
    let parse = spme(tmp.path(), &["validate", broken.to_str().unwrap()]);
    assert_eq!(parse.status.code(), Some(2));
}

#[test]
fn moser_ladder_prints_exact_constants() {
    let tmp = tempfile::tempdir().unwrap();
    let o = spme(tmp.path(), &["moser-ladder", "--d", "1", "--mtilde", "1", "--n-max", "3"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for needle in ["δ = 3/2", "n₀ = 1", "κ = 8", "θ̃ = 2/3", "13.000000", "40.000000"] {
        assert!(text.contains(needle), "missing {needle} in\n{text}");
    }
}

#[test]
fn moser_ladder_rejects_inadmissible_mu() {
    let tmp = tempfile::tempdir().unwrap();
    let o = spme(tmp.path(), &["moser-ladder", "--d", "3", "--mtilde", "1", "--mu", "2"]);
    assert!(!o.status.success());
}

#[test]
fn gn_check_passes_on_frozen_sine() {
    let tmp = tempfile::tempdir().unwrap();
    let o = spme(tmp.path(), &["gn-check", fixture("sine.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("0.312500") && text.contains("PASS"), "{text}");
}

#[test]
fn sweep_writes_one_row_per_epsilon() {
    let tmp = tempfile::tempdir().unwrap();
    let o = spme(tmp.path(), &["--seed", "3", "sweep-epsilon", fixture("pme_m2.toml").to_str().unwrap(), "--paths", "6"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let dir = only_run_dir(tmp.path());
    assert!(dir.file_name().unwrap().to_str().unwrap().ends_with("-s3"));
    let csv = std::fs::read_to_string(dir.join("estimates.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("param,value,statistic"));
    assert_eq!(lines.len(), 5);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "complete");
    assert_eq!(manifest["seed"], 3);
    assert_eq!(manifest["spec_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn simulate_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fixture("pme_m2.toml");
    let mut outputs = Vec::new();
    for (i, threads) in ["1", "3"].iter().enumerate() {
        let root = tmp.path().join(i.to_string());
        let o = spme(&root, &["--threads", threads, "simulate", cfg.to_str().unwrap(), "--paths", "5"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let dir = only_run_dir(&root);
        for name in ["trajectory.csv", "field_final.csv", "estimates.csv", "paths.csv"] {
            assert!(dir.join(name).exists(), "{name}");
        }
        outputs.push(std::fs::read(dir.join("paths.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}
