use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn ctxauth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctxauth"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = ctxauth(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Relative path -> contents for every file below `root`.
fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

const SMALL: [&str; 4] = ["--set", "trials.n_legit=4", "--set", "trials.n_attack=4"];

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (out, workers) in [(&a, "1"), (&b, "3")] {
        let mut args = vec!["simulate", "--seed", "7", "--workers", workers, "--out", s(out)];
        args.extend(SMALL);
        ok(&args);
    }
    let (sa, sb) = (snapshot(&a), snapshot(&b));
    assert_eq!(sa.len(), 1 + 8 * 2);
    assert_eq!(sa, sb);
}

#[test]
fn timestamp_gap_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let est = dir.path().join("est.csv");
    std::fs::write(
        &est,
        "t_s,x_m,y_m\n0,1000,1000\n10,1010,1000\n30,1030,1000\n40,1040,1000\n",
    )
    .unwrap();
    let out = ctxauth(&["track", "--estimates", s(&est), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn usage_and_config_errors_exit_with_two() {
    assert_eq!(ctxauth(&["simulate", "--bogus"]).status.code(), Some(2));
    assert_eq!(ctxauth(&["simulate", "--set", "kalman.nope=1"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"samples": 1}"#).unwrap();
    assert_eq!(ctxauth(&["simulate", "--config", s(&cfg)]).status.code(), Some(2));
    let missing = dir.path().join("none.csv");
    assert_eq!(ctxauth(&["det", "--decisions", s(&missing)]).status.code(), Some(3));
}

/// Exhaustive count: fraction of legitimate E at or above `lambda`, and
/// of attack E below it.
fn count_oracle(legit: &[f64], attack: &[f64], lambda: f64) -> (f64, f64) {
    let mut fa = 0;
    for e in legit {
        if *e >= lambda {
            fa += 1;
        }
    }
    let mut md = 0;
    for e in attack {
        if *e < lambda {
            md += 1;
        }
    }
    (fa as f64 / legit.len() as f64, md as f64 / attack.len() as f64)
}

#[test]
fn det_reproduces_the_count_table() {
    let dir = tempfile::tempdir().unwrap();
    let f1 = dir.path().join("d1.csv");
    let f2 = dir.path().join("d2.csv");
    // Pilot rows carry no decision and must be ignored.
    std::fs::write(
        &f1,
        "run_id,t_s,E_m2,decision,truth\n0,10,50,,0\n0,20,1,0,0\n0,30,2,1,1\n1,10,3,1,0\n",
    )
    .unwrap();
    std::fs::write(&f2, "run_id,t_s,E_m2,decision,truth\n2,10,2,0,0\n2,20,3,1,1\n2,30,4,1,1\n").unwrap();
    ok(&["det", "--decisions", s(&f1), s(&f2), "--out", s(dir.path())]);
    let text = std::fs::read_to_string(dir.path().join("det.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("lambda_m2,p_fa,p_md"));
    let rows: Vec<(f64, f64, f64)> = lines
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            (v[0], v[1], v[2])
        })
        .collect();
    let (legit, attack) = ([1.0, 2.0, 3.0], [2.0, 3.0, 4.0]);
    let lambdas: Vec<f64> = rows.iter().map(|r| r.0).collect();
    assert_eq!(lambdas, vec![0.0, 1.0, 2.0, 3.0, 4.0, f64::INFINITY]);
    for (lambda, p_fa, p_md) in rows {
        assert_eq!((p_fa, p_md), count_oracle(&legit, &attack, lambda), "lambda {lambda}");
    }
    // Between grid points the curve holds its value: 2.5 behaves as 3.
    assert_eq!(count_oracle(&legit, &attack, 2.5), (1.0 / 3.0, 1.0 / 3.0));
    assert_eq!(count_oracle(&legit, &attack, 3.0), (1.0 / 3.0, 1.0 / 3.0));
}

#[test]
fn file_pipeline_matches_in_process_run() {
    let dir = tempfile::tempdir().unwrap();
    let (run_dir, sim_dir) = (dir.path().join("run"), dir.path().join("sim"));
    let mut args = vec!["run", "--seed", "3", "--workers", "2", "--out", s(&run_dir)];
    args.extend(SMALL);
    ok(&args);
    let mut args = vec!["simulate", "--seed", "3", "--out", s(&sim_dir)];
    args.extend(SMALL);
    ok(&args);

    let mut preds = Vec::new();
    let mut trajs = Vec::new();
    for i in 0..8 {
        let t = sim_dir.join("trials").join(format!("{i:05}"));
        let r = run_dir.join("trials").join(format!("{i:05}"));
        for f in ["trajectory.csv", "estimates.csv"] {
            assert_eq!(std::fs::read(t.join(f)).unwrap(), std::fs::read(r.join(f)).unwrap(), "{f} of trial {i}");
        }
        ok(&["track", "--estimates", s(&t.join("estimates.csv")), "--out", s(&t)]);
        assert_eq!(
            std::fs::read(t.join("predictions.csv")).unwrap(),
            std::fs::read(r.join("predictions.csv")).unwrap()
        );
        preds.push(t.join("predictions.csv"));
        trajs.push(t.join("trajectory.csv"));
    }
    let mut args = vec!["auth", "--out", s(&sim_dir), "--predictions"];
    args.extend(preds.iter().map(|p| s(p)));
    args.push("--trajectory");
    args.extend(trajs.iter().map(|p| s(p)));
    ok(&args);
    assert_eq!(
        std::fs::read(sim_dir.join("decisions.csv")).unwrap(),
        std::fs::read(run_dir.join("decisions.csv")).unwrap()
    );
    ok(&["det", "--decisions", s(&sim_dir.join("decisions.csv")), "--out", s(&sim_dir)]);
    assert_eq!(
        std::fs::read(sim_dir.join("det.csv")).unwrap(),
        std::fs::read(run_dir.join("det.csv")).unwrap()
    );

    let out = ok(&["stats", "--errors", s(&run_dir.join("errors.csv")), "--out", s(&sim_dir)]);
    let stats: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run_dir.join("summary.json")).unwrap()).unwrap();
    for key in ["rmse_x_m", "rmse_y_m", "mape_x_pct", "mape_y_pct", "median_err_m", "q1_m", "q3_m", "n_excluded_mape"] {
        assert_eq!(stats[key], summary[key], "{key}");
    }
    for key in ["p_fa", "p_md"] {
        assert!(summary[key].is_number(), "{key}");
    }
}
