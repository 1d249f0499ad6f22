use std::path::Path;
use std::process::{Command, Output};

use gsf_cli::config::bundled;
use gsf_cli::output::sha256_hex;

fn gsf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gsf")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn header(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

fn run_bundled(name: &str, out: &Path, extra: &[&str]) -> Output {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", bundled(name).unwrap());
    let mut args = vec!["run", cfg.as_str(), "--output-dir", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    gsf(&args)
}

#[test]
fn single_point_grid_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = bundled("embed_profiles").unwrap().replace("points = 12", "points = 1");
    let cfg = write_config(dir.path(), "bad.toml", &text);
    let out = gsf(&["run", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("gauge.points") && err.contains("line"), "{err}");
}

#[test]
fn unknown_key_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{}\nflux = 1\n", bundled("ring_suite").unwrap());
    let out = gsf(&["run", &write_config(dir.path(), "bad.toml", &text)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("flux"));
}

#[test]
fn degenerate_frequencies_exit_with_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let text = bundled("pu").unwrap().replace("w1hat = 0.7", "w1hat = 1.2");
    let cfg = write_config(dir.path(), "pu.toml", &text);
    let out = gsf(&["run", &cfg, "--output-dir", dir.path().join("o").to_str().unwrap(), "--eps-points", "4"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dynamics"));
}

#[test]
fn pu_run_writes_fit_and_manifest() {
    let out = tempfile::tempdir().unwrap();
    let status = run_bundled("pu", out.path(), &["--eps-points", "4"]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    assert_eq!(header(&out.path().join("trajectory.csv")), "t,eps,q0,q1,q2,q3,rhs,energy");
    assert_eq!(header(&out.path().join("energy.csv")), "t,eps,energy,relative_drift");
    let fit: serde_json::Value = serde_json::from_slice(&std::fs::read(out.path().join("analytic_fit.json")).unwrap()).unwrap();
    let a1 = fit["pre"]["modes"][0]["amplitude"].as_f64().unwrap();
    assert!((a1 - 6.02827).abs() < 1e-4, "{a1}");
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(out.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_sha256"], sha256_hex(bundled("pu").unwrap().as_bytes()));
    assert_eq!(manifest["library_version"], gsf_core::VERSION);
    let files = manifest["files"].as_object().unwrap();
    assert_eq!(files.len(), 3);
    for (name, sum) in files {
        assert_eq!(sum.as_str().unwrap(), sha256_hex(&std::fs::read(out.path().join(name)).unwrap()));
    }
}

#[test]
fn profiles_have_half_at_the_origin() {
    let out = tempfile::tempdir().unwrap();
    let status = gsf(&["dump-profiles", "--output-dir", out.path().to_str().unwrap(), "--eps-points", "6"]);
    assert!(status.status.success());
    assert_eq!(header(&out.path().join("delta.csv")), "x,eps,value");
    let text = std::fs::read_to_string(out.path().join("heaviside.csv")).unwrap();
    let centre: Vec<f64> = text
        .lines()
        .filter(|l| l.starts_with("0e0,"))
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(centre.len(), 6);
    assert!(centre.iter().all(|h| (h - 0.5).abs() < 1e-8));
}

#[test]
fn every_experiment_has_its_documented_headers() {
    let cases: [(&str, &str, &str); 6] = [
        ("pendulum", "trajectory.csv", "t,eps,q0,q1,rhs,energy"),
        ("damped", "trajectory.csv", "t,eps,q0,q1,rhs,energy"),
        ("damped", "reference.csv", "t,eps,q0,q1,rhs,energy"),
        ("variational_checks", "residuals.csv", "t,eps,el_residual,dbr_residual,noether_C"),
        ("optctrl_lqr", "sweep.csv", "t,q,p,u,dHdu"),
        ("ring_suite", "ring.csv", "name,tag,slope,confidence"),
    ];
    for (name, file, expected) in cases {
        let out = tempfile::tempdir().unwrap();
        let status = run_bundled(name, out.path(), &["--eps-points", "8"]);
        assert!(status.status.success(), "{name}: {}", String::from_utf8_lossy(&status.stderr));
        let path = out.path().join(file);
        assert_eq!(header(&path), expected, "{name}/{file}");
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(!text.contains('\r'));
        assert!(text.ends_with('\n'));
    }
    let out = tempfile::tempdir().unwrap();
    run_bundled("optctrl_lqr", out.path(), &[]);
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(out.path().join("summary.json")).unwrap()).unwrap();
    for key in ["iterations", "grad_norm", "cost"] {
        assert!(summary.get(key).is_some(), "{key}");
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for out in [&a, &b] {
        assert!(run_bundled("pendulum", out.path(), &["--seed", "7"]).status.success());
    }
    for name in ["trajectory.csv", "energy.csv", "manifest.json"] {
        assert_eq!(std::fs::read(a.path().join(name)).unwrap(), std::fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn induced_moment_failure_is_reported() {
    let cfgs = tempfile::tempdir().unwrap();
    let text = bundled("embed_profiles").unwrap().replace("moment_order = 4", "moment_order = 0");
    write_config(cfgs.path(), "embed_profiles.toml", &text);
    let out = tempfile::tempdir().unwrap();
    let status = gsf(&[
        "acceptance",
        "--config-dir",
        cfgs.path().to_str().unwrap(),
        "--criteria",
        "1",
        "--output-dir",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(status.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.path().join("acceptance_report.json")).unwrap()).unwrap();
    let c = &report["criteria"][0];
    assert_eq!(c["id"], 1);
    assert_eq!(c["passed"], false);
    let moment = c["checks"].as_array().unwrap().iter().find(|k| k["name"].as_str().unwrap().starts_with("max |moment")).unwrap();
    assert!(moment["measured"].as_f64().unwrap() > 1e-3);
    assert_eq!(moment["passed"], false);
}

#[test]
fn report_has_one_entry_per_criterion() {
    let out = tempfile::tempdir().unwrap();
    let status = gsf(&["acceptance", "--output-dir", out.path().to_str().unwrap()]);
    let stdout = String::from_utf8_lossy(&status.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("criterion")).count(), 10);
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.path().join("acceptance_report.json")).unwrap()).unwrap();
    let ids: Vec<u64> = report["criteria"].as_array().unwrap().iter().map(|c| c["id"].as_u64().unwrap()).collect();
    assert_eq!(ids, (1..=10).collect::<Vec<_>>());
    for c in report["criteria"].as_array().unwrap() {
        for k in c["checks"].as_array().unwrap() {
            for field in ["name", "measured", "tolerance", "passed"] {
                assert!(k.get(field).is_some(), "{field}");
            }
        }
    }
    let failed = report["criteria"].as_array().unwrap().iter().any(|c| c["passed"] == false);
    assert_eq!(status.status.success(), !failed);
    assert!(out.path().join("pu").join("manifest.json").exists());
}
