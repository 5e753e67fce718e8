use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn coloc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coloc"))
        .args(args)
        .output()
        .unwrap()
}

fn write_cfg(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

const SMALL: &str = "# tiny scenario\nagentCount = 8\nslots = 6\nmcRuns = 2\nseed = 17\nparticleCount = 60\nlMax = 5\n";

#[test]
fn simulate_writes_exact_header_and_all_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "s.cfg", SMALL);
    let out = dir.path().join("r.csv");
    let o = coloc(&[
        "simulate",
        "--config",
        &cfg,
        "--alg",
        "ekf-stdf",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("run,slot,agent,alg,true_x,true_y,est_x,est_y,err,neighbors")
    );
    let rows = lines.count();
    let stderr = String::from_utf8_lossy(&o.stderr);
    let excluded: usize = stderr
        .split(" excluded")
        .next()
        .and_then(|s| s.rsplit(", ").next())
        .and_then(|s| s.trim().parse().ok())
        .unwrap();
    assert_eq!(rows + excluded, 2 * 6 * 8, "{stderr}");
}

#[test]
fn simulate_is_byte_identical_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "s.cfg", SMALL);
    for alg in ["ekf-stdf", "spawn", "spa-ekf", "ekf-only"] {
        let mut outputs = Vec::new();
        for (k, threads) in ["1", "1", "3"].iter().enumerate() {
            let out = dir.path().join(format!("{alg}-{k}.csv"));
            let o = coloc(&[
                "simulate",
                "--threads",
                threads,
                "--config",
                &cfg,
                "--alg",
                alg,
                "--out",
                out.to_str().unwrap(),
            ]);
            assert!(o.status.success());
            outputs.push(fs::read(&out).unwrap());
        }
        assert_eq!(outputs[0], outputs[1], "{alg}");
        assert_eq!(outputs[0], outputs[2], "{alg}");
    }
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let out = out.to_str().unwrap();
    for body in [
        "bogusKey = 3\n",
        "agentCount = many\n",
        "agentCount = 0\n",
        "slots = 3\nslots = 4\n",
        "no equals\n",
    ] {
        let cfg = write_cfg(dir.path(), "bad.cfg", body);
        let o = coloc(&["simulate", "--config", &cfg, "--alg", "spawn", "--out", out]);
        assert_eq!(
            o.status.code(),
            Some(1),
            "{body:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
    let missing = dir.path().join("missing.cfg");
    let o = coloc(&[
        "simulate",
        "--config",
        missing.to_str().unwrap(),
        "--alg",
        "spawn",
        "--out",
        out,
    ]);
    assert_eq!(o.status.code(), Some(1));
    let o = coloc(&["simulate", "--config", "x", "--alg", "kalman", "--out", out]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn fig3_writes_summary_header() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "s.cfg",
        "slots = 3\nmcRuns = 1\nparticleCount = 30\nlMax = 3\n",
    );
    let out = dir.path().join("f3.csv");
    let o = coloc(&[
        "fig3",
        "--config",
        &cfg,
        "--algs",
        "ekf-stdf,ekf-only",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("group_key,alg,rmse,ci95,n"));
    assert_eq!(lines.count(), 8);
}

#[test]
fn fig2_writes_summary_and_siblings() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "s.cfg",
        "slots = 22\nmcRuns = 1\nagentCount = 12\nparticleCount = 30\nlMax = 3\n",
    );
    let out = dir.path().join("f2.csv");
    let o = coloc(&[
        "fig2",
        "--config",
        &cfg,
        "--algs",
        "ekf-stdf",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["f2.csv", "f2.windows.csv"] {
        let text = fs::read_to_string(dir.path().join(name)).unwrap();
        assert!(text.starts_with("group_key,alg,rmse,ci95,n\n"), "{name}");
    }
    assert!(dir.path().join("f2.records.csv").exists());
    assert!(dir.path().join("f2.meta.txt").exists());
}

#[test]
fn validate_exit_code_follows_verdict() {
    let o = coloc(&["validate", "--cases", "6"]);
    let text = String::from_utf8_lossy(&o.stdout);
    let code = o.status.code();
    if text.contains("result: PASS") {
        assert_eq!(code, Some(0));
    } else {
        assert!(text.contains("result: FAIL"), "{text}");
        assert_eq!(code, Some(2));
    }
}
