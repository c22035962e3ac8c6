use std::path::{Path, PathBuf};
use std::process::Command;

use spas_core::cli::{parse_config, ConstructOutput, GainSearchOutput, RunManifest, SimulateOutput, MANIFEST_FILE};

fn docs(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/configs").join(name)
}

fn spas(sub: &str, config: &Path, out: &Path, extra: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_spas"))
        .arg(sub)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .env("SPAS_LOG", "error")
        .status()
        .expect("binary runs")
        .code()
        .expect("exit code")
}

fn read<T: serde::de::DeserializeOwned>(path: &Path) -> T {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn worked_configs_parse() {
    for name in ["example1.json", "ellipse.json", "consensus.json", "consensus_ring.json", "drift.json"] {
        let raw = std::fs::read(docs(name)).unwrap();
        parse_config(&raw).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn ellipse_construct_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(spas("construct", &docs("ellipse.json"), dir.path(), &[]), 0);
    let out: ConstructOutput = read(&dir.path().join("construction.json"));
    let outer = out.outer.unwrap();
    assert!((outer.l_hat - 4.0).abs() < 1e-3 && (outer.sigma_hat - 2.0).abs() < 1e-3);
    assert!(out.chain.unwrap().pass);
    let csv = std::fs::read_to_string(dir.path().join("levelsets.csv")).unwrap();
    assert!(csv.starts_with("set,level,x0,x1,dist"));
}

#[test]
fn construct_below_floor_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("floor.json");
    std::fs::write(
        &cfg,
        r#"{
  "system": { "kind": "contraction", "target": { "kind": "singleton", "point": [0.0, 0.0] } },
  "lyapunov": { "kind": "weighted_quadratic", "weights": [1.0, 4.0], "center": [0.0, 0.0] },
  "sampling": { "directions_per_shell": 128 },
  "construct": { "eps_o": 0.5, "rho_s": 1.0 }
}"#,
    )
    .unwrap();
    assert_eq!(spas("construct", &cfg, &dir.path().join("out"), &[]), 1);
    let out: ConstructOutput = read(&dir.path().join("out/construction.json"));
    assert!(out.failure.unwrap().contains("floor"));
    assert!(out.inner.rho_check_s > 1.0);
}

#[test]
fn spherical_construct_keeps_radii() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sphere.json");
    std::fs::write(
        &cfg,
        r#"{
  "system": { "kind": "contraction", "target": { "kind": "singleton", "point": [0.0, 0.0, 0.0] } },
  "sampling": { "directions_per_shell": 64 },
  "construct": { "sigma_tilde": 3.0, "rho_s": 2.0 }
}"#,
    )
    .unwrap();
    assert_eq!(spas("construct", &cfg, &dir.path().join("out"), &[]), 0);
    let out: ConstructOutput = read(&dir.path().join("out/construction.json"));
    let (o, b) = (out.outer.unwrap(), out.backward.unwrap());
    assert!((o.sigma_hat - 3.0).abs() < 1e-9);
    assert!((b.delta - 2.0).abs() < 1e-9 && (b.rho_o_s - 2.0).abs() < 1e-9);
}

#[test]
fn example1_gain_search_reports_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(spas("gain-search", &docs("example1.json"), dir.path(), &["--threads", "2"]), 0);
    let out: GainSearchOutput = read(&dir.path().join("gain_search.json"));
    let cf = out.closed_form.unwrap();
    assert_eq!(cf.alpha_hat, 0.5);
    assert!(cf.relative_gap.unwrap() < 0.01);
    assert!(out.result.unwrap().trace.len() > 3);
}

#[test]
fn consensus_simulation_passes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(spas("simulate", &docs("consensus.json"), dir.path(), &[]), 0);
    let out: SimulateOutput = read(&dir.path().join("simulation.json"));
    assert!(out.empirical_t.is_some());
    let csv = std::fs::read_to_string(dir.path().join(&out.trajectory_csvs[0])).unwrap();
    assert!(csv.starts_with("t,x0,x1,dist,V"));
    assert_eq!(csv.lines().count(), 1 + 501);
}

#[test]
fn consensus_matrix_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(spas("simulate", &docs("consensus_ring.json"), dir.path(), &[]), 0);
}

#[test]
fn drift_fails_with_witnesses() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(spas("simulate", &docs("drift.json"), dir.path(), &[]), 1);
    let out: SimulateOutput = read(&dir.path().join("simulation.json"));
    assert!(!out.verdict.pass);
    assert!(out.trajectory_csvs.iter().any(|f| f.contains("witness")));
}

#[test]
fn seed_override_changes_samples_but_not_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = docs("drift.json");
    spas("simulate", &cfg, &dir.path().join("a"), &["--seed", "1", "--threads", "1"]);
    spas("simulate", &cfg, &dir.path().join("b"), &["--seed", "1", "--threads", "4"]);
    spas("simulate", &cfg, &dir.path().join("c"), &["--seed", "2"]);
    let a = std::fs::read(dir.path().join("a/simulation.json")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b/simulation.json")).unwrap());
    assert_ne!(a, std::fs::read(dir.path().join("c/simulation.json")).unwrap());
    let m: RunManifest = read(&dir.path().join("c").join(MANIFEST_FILE));
    assert_eq!(m.seed, 2);
    assert_eq!(m.subcommand, "simulate");
    assert_eq!(m.config_sha256.len(), 64);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("custom", r#"{ "system": { "kind": "custom" }, "gain": 0.1 }"#),
        ("unknown_field", r#"{ "system": { "kind": "drift", "target": { "kind": "singleton", "point": [0.0] }, "velocity": [1.0] }, "gian": 0.1 }"#),
        (
            "bad_certificate",
            r#"{ "system": { "kind": "example1", "target": { "kind": "ball", "center": [0.0, 0.0], "radius": 1.0 }, "tau": 1.0 },
                 "certificate": { "sigma_o": 1.0, "rho_o": 1.0, "b_o": 1.0 }, "gain": 0.1 }"#,
        ),
        ("missing_gain", r#"{ "system": { "kind": "example1", "target": { "kind": "ball", "center": [0.0, 0.0], "radius": 1.0 }, "tau": 1.0 },
                 "certificate": { "sigma_o": 4.0, "rho_o": 1.0, "b_o": 1.0 } }"#),
    ];
    for (name, text) in cases {
        let cfg = dir.path().join(format!("{name}.json"));
        std::fs::write(&cfg, text).unwrap();
        assert_eq!(spas("verify", &cfg, &dir.path().join(name), &[]), 2, "{name}");
    }
    assert_eq!(spas("verify", &dir.path().join("absent.json"), dir.path(), &[]), 2);
}

#[test]
fn usage_errors_exit_2() {
    let status = Command::new(env!("CARGO_BIN_EXE_spas")).arg("verify").status().unwrap();
    assert_eq!(status.code(), Some(2));
}
