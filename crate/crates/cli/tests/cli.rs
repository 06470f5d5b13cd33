use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn noisebath(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_noisebath")).args(args).output().expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn effective_noise(dir: &Path, decomp: &str) -> Value {
    let out = dir.join(decomp);
    let o = noisebath(&["effective-noise", "--decomp", decomp, "--n-q", "2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    json(&out.join("effective_noise.json"))
}

#[test]
fn malformed_config_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"name": "x", "target": 3}"#).unwrap();
    let o = noisebath(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("schema"));

    fs::write(&cfg, "not json").unwrap();
    let o = noisebath(&["fit", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn lorentzian_self_fit_has_no_residual() {
    let dir = tempfile::tempdir().unwrap();
    let o = noisebath(&["fit", "--target", "lorentzian-sum", "--n", "1", "--homogeneous", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    let text = fs::read_to_string(dir.path().join("residual.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("omega,target,fit,residual"));
    let worst = lines.map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap().abs()).fold(0.0, f64::max);
    assert!(worst < 1e-10, "{worst}");
    let fit = json(&dir.path().join("fit.json"));
    assert!(fit["result"]["cost"].as_f64().unwrap() < 1e-20);
}

#[test]
fn effective_noise_reports() {
    let dir = tempfile::tempdir().unwrap();
    let ms = effective_noise(dir.path(), "ms");
    for q in ms["qubits"].as_array().unwrap() {
        for (got, want) in [("damping", "expected_damping"), ("dephasing", "expected_dephasing")] {
            let (g, w) = (q[got].as_f64().unwrap(), q[want].as_f64().unwrap());
            assert!((g - w).abs() <= 1e-6 * w.abs().max(1e-12), "{q}");
        }
    }
    let scale = ms["qubits"][1]["expected_damping"].as_f64().unwrap();
    let weight = |v: &Value| v["system_dephasing_weight"].as_f64().unwrap();
    let cnot_s = effective_noise(dir.path(), "cnot-s");
    let cnot_b = effective_noise(dir.path(), "cnot-b");
    let cz = effective_noise(dir.path(), "cz");
    assert!(weight(&cnot_s) > 1e-2 * scale);
    assert!(weight(&cnot_b).abs() < 1e-2 * scale);
    // control-Z behaves like CNOT-B: bath noise stays off the system's σ_z
    assert!(weight(&cz).abs() < 1e-2 * scale);
    assert!(fs::read_to_string(dir.path().join("cnot-s/effective_noise.txt")).unwrap().contains("system σ_z weight"));
}

#[test]
fn analyze_rejects_empty_input() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    let o = noisebath(&["analyze", "--input", empty.to_str().unwrap(), "--out", dir.path().join("a").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    fs::write(&empty, "t,sx\n").unwrap();
    let o = noisebath(&["analyze", "--input", empty.to_str().unwrap(), "--out", dir.path().join("a").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn runs_are_byte_identical_and_analyzable() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = noisebath(&["example-a", "--N", "1", "--eps", "0.05", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let (a, b) = (run("a"), run("b"));
    let mut names: Vec<String> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names, ["circuit.txt", "manifest.json", "oracle.csv", "simulator.csv", "spectrum.csv"]);
    for n in &names {
        assert_eq!(fs::read(a.join(n)).unwrap(), fs::read(b.join(n)).unwrap(), "{n} differs");
    }
    let manifest = json(&a.join("manifest.json"));
    assert_eq!(manifest["v_tau_exact"], "1/5");
    assert_eq!(manifest["depth"], 2);

    // the manifest's config reruns through `simulate` to the same trajectory
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, serde_json::to_string_pretty(&manifest["config"]).unwrap()).unwrap();
    let c = dir.path().join("c");
    let o = noisebath(&["simulate", "--config", cfg.to_str().unwrap(), "--out", c.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(a.join("simulator.csv")).unwrap(), fs::read(c.join("simulator.csv")).unwrap());

    let an = dir.path().join("an");
    let o = noisebath(&["analyze", "--input", a.join("simulator.csv").to_str().unwrap(), "--out", an.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&an.join("analysis.json"));
    assert!(!report["peaks"].as_array().unwrap().is_empty());
}

#[test]
fn unknown_decomposition_is_a_usage_error() {
    let o = noisebath(&["effective-noise", "--decomp", "toffoli"]);
    assert!(!o.status.success());
}
