//! Command-line contract tests. Cargo runs test targets in name order; this
//! one sorts ahead of `acceptance` so a red acceptance run does not skip it.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn mixfrac(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mixfrac"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn json_line(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stdout);
    serde_json::from_str(text.lines().last().expect("some output")).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// `(t, column)` pairs from a CSV with a header row.
fn read_column(text: &str, name: &str) -> Vec<(f64, f64)> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == name).unwrap();
    lines
        .filter(|l| !l.starts_with('{'))
        .map(|l| {
            let f: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            (f[0], f[col])
        })
        .collect()
}

const K0: &str = r#"{"schema": 1, "a": 0, "b": 1, "alpha": 0.5, "k": 0, "F": "v^2", "ya": 0, "yb": 1, "n": 501}"#;
const EX: &str = r#"{"schema": 1, "a": 0, "b": 1, "alpha": 0.5, "k": 1, "F": "v^2", "G": "v", "xi": 1,
                     "ya": 0, "yb": "auto-reference", "n": 1001}"#;

#[test]
fn solve_classical_problem() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "k0.json", K0);
    let out = mixfrac(&["solve", "k0.json"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let s = json_line(&out);
    assert_eq!(s["converged"], Value::Bool(true));
    assert!((s["objective"].as_f64().unwrap() - 1.0).abs() < 1e-10);
    assert!(s["lambda"].is_null() && s["constraint_residual"].is_null());
    let csv = std::fs::read_to_string(dir.path().join("k0.csv")).unwrap();
    assert!(csv.starts_with("t,y,v,el_residual\n"));
    let y = read_column(&csv, "y");
    assert_eq!(y.len(), 501);
    assert!(y.iter().all(|(t, y)| (t - y).abs() <= 1e-6));
}

#[test]
fn solve_isoperimetric_problem() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "ex.json", EX);
    let out = mixfrac(&["solve", "ex.json", "--out", "result", "--quiet"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stderr(&out).is_empty());
    let s = json_line(&out);
    assert!((s["lambda"].as_f64().unwrap() - 2.0).abs() <= 5e-2);
    assert!(s["constraint_residual"].as_f64().unwrap().abs() <= 1e-9);
    assert!(dir.path().join("result.csv").exists());
}

#[test]
fn input_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "alpha.json", &K0.replace("0.5", "1.5"));
    let out = mixfrac(&["solve", "alpha.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("(0, 1)"), "{}", stderr(&out));

    write(dir.path(), "syntax.json", &K0.replace("\"v^2\"", "\"v^^2\""));
    let out = mixfrac(&["solve", "syntax.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr(&out).contains("`F`") && stderr(&out).contains("byte 2"),
        "{}",
        stderr(&out)
    );

    write(dir.path(), "unknown.json", &K0.replace("\"n\"", "\"beta\": 1, \"n\""));
    let out = mixfrac(&["solve", "unknown.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("beta"));

    write(dir.path(), "k0.json", K0);
    for args in [
        &["solve", "k0.json", "--seed", "7"][..],
        &["solve", "k0.json", "--n", "1"],
        &["solve", "missing.json"],
        &["convergence", "k0.json", "--grids", "101"],
        &["frobnicate"],
    ] {
        assert_eq!(mixfrac(args, dir.path()).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn non_convergence_exits_three_with_summary() {
    let dir = TempDir::new().unwrap();
    let capped = r#"{"a": 0, "b": 1, "alpha": 0.4, "k": 1, "F": "sqrt(1 + v^2) + y^4", "ya": 0, "yb": 2, "n": 201,
                     "solver": {"max_iters": 1}}"#;
    write(dir.path(), "capped.json", capped);
    let out = mixfrac(&["solve", "capped.json"], dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert_eq!(json_line(&out)["converged"], Value::Bool(false));

    // with k = 0 every admissible y has ∫ v = yb − ya, so no multiplier helps
    let degenerate =
        r#"{"a": 0, "b": 1, "alpha": 0.5, "k": 0, "F": "v^2", "G": "v", "xi": 2, "ya": 0, "yb": 1, "n": 51}"#;
    write(dir.path(), "degenerate.json", degenerate);
    let out = mixfrac(&["solve", "degenerate.json"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json_line(&out)["converged"], Value::Bool(false));
    assert!(stderr(&out).contains("does not change sign"));
}

#[test]
fn domain_error_exits_four() {
    let dir = TempDir::new().unwrap();
    let text = r#"{"a": 0, "b": 1, "alpha": 0.5, "k": 0, "F": "log(v)", "ya": 1, "yb": 0, "n": 21}"#;
    write(dir.path(), "log.json", text);
    let out = mixfrac(&["solve", "log.json"], dir.path());
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
    assert!(stderr(&out).contains("log"));
}

#[test]
fn reference_command() {
    let dir = TempDir::new().unwrap();
    let out = mixfrac(
        &["reference", "--k", "0", "--alpha", "0.5", "--xi", "1", "--n", "11"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    let y = read_column(&text, "y");
    assert_eq!(y.len(), 11);
    assert!(y.iter().all(|(t, y)| (t - y).abs() <= 1e-10));
    assert_eq!(json_line(&out)["boundary_value"].as_f64(), Some(1.0));

    let out = mixfrac(
        &["reference", "--k", "1", "--alpha", "0.3", "--xi", "0", "--n", "21"],
        dir.path(),
    );
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    assert!(read_column(&text, "y").iter().all(|(_, y)| *y == 0.0));

    // y(1) for alpha = 0.05 sits an O(alpha) distance below 1 − 1/e
    let out = mixfrac(
        &["reference", "--k", "1", "--alpha", "0.05", "--xi", "1", "--out", "r"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let yb = json_line(&out)["boundary_value"].as_f64().unwrap();
    assert!((yb - 0.623_043).abs() < 5e-6, "{yb}");
    assert!(dir.path().join("r.csv").exists());

    let out = mixfrac(&["reference", "--k", "1", "--alpha", "1.0", "--xi", "1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn residual_command() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "ex.json", EX);
    let out = mixfrac(
        &[
            "reference",
            "--k",
            "1",
            "--alpha",
            "0.5",
            "--xi",
            "1",
            "--n",
            "2001",
            "--out",
            "ref",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let args = [
        "residual", "ex.json", "--y", "ref.csv", "--n", "2001", "--lambda", "2", "--window", "0.1,1",
    ];
    let out = mixfrac(&args, dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let r = json_line(&out);
    assert!(r["norm_max_window"].as_f64().unwrap() <= 5e-2);

    // a perturbed trajectory has a larger residual
    let csv = std::fs::read_to_string(dir.path().join("ref.csv")).unwrap();
    let mut perturbed = String::from("t,y\n");
    for (t, y) in read_column(&csv, "y") {
        perturbed.push_str(&format!(
            "{t:.16e},{:.16e}\n",
            y + 0.1 * (std::f64::consts::PI * t).sin()
        ));
    }
    write(dir.path(), "perturbed.csv", &perturbed);
    let p = json_line(&mixfrac(
        &[
            "residual",
            "ex.json",
            "--y",
            "perturbed.csv",
            "--n",
            "2001",
            "--lambda",
            "2",
            "--window",
            "0.1,1",
        ],
        dir.path(),
    ));
    assert!(p["norm_max_window"].as_f64().unwrap() > r["norm_max_window"].as_f64().unwrap());
    assert!(p["norm_max_interior"].as_f64().unwrap() > r["norm_max_interior"].as_f64().unwrap());

    // missing multiplier, wrong grid
    assert_eq!(
        mixfrac(&["residual", "ex.json", "--y", "ref.csv", "--n", "2001"], dir.path())
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        mixfrac(&["residual", "ex.json", "--y", "ref.csv", "--lambda", "2"], dir.path())
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn solve_csv_round_trips_through_residual() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "ex.json", &EX.replace("1001", "301"));
    let s = json_line(&mixfrac(&["solve", "ex.json", "--quiet"], dir.path()));
    let lambda = s["lambda"].as_f64().unwrap().to_string();
    let r = json_line(&mixfrac(
        &["residual", "ex.json", "--y", "ex.csv", "--lambda", &lambda],
        dir.path(),
    ));
    assert_eq!(r["norm_max_interior"], s["el_norm"]);

    write(dir.path(), "k0.json", K0);
    mixfrac(&["solve", "k0.json", "--quiet"], dir.path());
    let r = json_line(&mixfrac(&["residual", "k0.json", "--y", "k0.csv"], dir.path()));
    assert!(r["norm_max_interior"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn convergence_command() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "ex.json", EX);
    let out = mixfrac(&["convergence", "ex.json", "--grids", "251,501,1001"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let t = json_line(&out);
    assert_eq!(t["baseline"], "reference");
    let errors: Vec<f64> = t["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["error"].as_f64().unwrap())
        .collect();
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
    let order = t["rows"][2]["order"].as_f64().unwrap();
    assert!(order > 0.9, "{order}");

    write(dir.path(), "k0.json", K0);
    let t = json_line(&mixfrac(
        &["convergence", "k0.json", "--grids", "101,201,401"],
        dir.path(),
    ));
    assert_eq!(t["baseline"], "finest");
    for row in t["rows"].as_array().unwrap().iter().take(2) {
        assert!(row["error"].as_f64().unwrap() <= 1e-12);
    }
    assert!(t["rows"][2]["error"].is_null());
}
