use std::io::Write;

use spme_core::{Error, RunConfig};

const MINIMAL: &str = r#"
[domain]
dim = 1
nodes = 15
horizon = 0.1

[phi]
kind = "power"
m = 2.0

[data]
xi = { kind = "sine", params = [1.0, 1.0] }
"#;

#[test]
fn loads_minimal_file_with_defaults() {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    file.write_all(MINIMAL.as_bytes()).unwrap();
    let cfg = RunConfig::from_path(file.path()).unwrap();
    let spec = cfg.problem().unwrap();
    assert_eq!(spec.dim(), 1);
    let solver = cfg.solver();
    assert_eq!(solver.dt, 1e-3);
    assert_eq!(solver.seed, 0);
    assert_eq!(cfg.experiment.paths, 100);
}

#[test]
fn unknown_key_is_a_config_error() {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    write!(file, "{MINIMAL}\n[noise]\nsede = 3\n").unwrap();
    match RunConfig::from_path(file.path()) {
        Err(Error::Config(msg)) => assert!(msg.contains("sede"), "{msg}"),
        other => panic!("expected config error, got {other:?}"),
    }
}

#[test]
fn missing_file_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    assert!(RunConfig::from_path(dir.path().join("absent.toml")).is_err());
}
