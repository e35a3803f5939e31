use std::fs;
use std::process::{Command, Output};

fn vkplate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vkplate")).args(args).output().unwrap()
}

fn parse(cell: &str) -> Option<f64> {
    (!cell.is_empty()).then(|| cell.parse().unwrap())
}

#[test]
fn unknown_experiment_is_a_usage_error() {
    let out = vkplate(&["--experiment", "square-xx"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("square-dg"), "{err}");
}

#[test]
fn bad_parameters_are_usage_errors() {
    for args in [
        ["--experiment", "square-dg", "--theta", "1.5"],
        ["--experiment", "square-dg", "--sigma2", "0.5"],
        ["--experiment", "square-dg", "--sigma1", "-1"],
        ["--experiment", "square-dg", "--levels", "0"],
    ] {
        assert_eq!(vkplate(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn sigma1_warns_in_interior_penalty_mode() {
    let out = vkplate(&["--experiment", "square-ip", "--levels", "1", "--sigma1", "5"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
}

#[test]
fn table_is_reproducible_and_rates_recomputable() {
    let args = ["--experiment", "square-dg", "--levels", "3"];
    let first = vkplate(&args);
    let second = vkplate(&args);
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(first.stdout, second.stdout);

    let text = String::from_utf8(first.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "level,ndof,err_u,rate_u,err_v,rate_v,eta_total,rate_eta,efficiency,newton_iters"
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    for w in rows.windows(2) {
        let (n0, n1): (f64, f64) = (w[0][1].parse().unwrap(), w[1][1].parse().unwrap());
        for (e, r) in [(2, 3), (4, 5), (6, 7)] {
            let (e0, e1) = (parse(w[0][e]).unwrap(), parse(w[1][e]).unwrap());
            let expect = 2.0 * (e0 / e1).ln() / (n1 / n0).ln();
            let got = parse(w[1][r]).unwrap();
            assert!((got - expect).abs() <= 1e-9, "column {r}: {got} vs {expect}");
        }
    }
    assert!(parse(rows[0][3]).is_none());
}

#[test]
fn files_and_json_output() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let out = vkplate(&[
        "--experiment",
        "lshape-adaptive-f1",
        "--levels",
        "3",
        "--format",
        "json",
        "--out",
        &p("table.json"),
        "--mesh-out",
        &p("mesh.txt"),
        "--estimator-out",
        &p("eta.csv"),
        "--dump-system",
        &p("system.mtx"),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(p("table.json")).unwrap()).unwrap();
    let rows = doc["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows[0]["err_u"].is_null());
    assert!(rows[2]["eta_total"].as_f64().unwrap() < rows[0]["eta_total"].as_f64().unwrap());

    let plot = fs::read_to_string(p("table.plot.csv")).unwrap();
    assert_eq!(plot.lines().count(), 4);
    let eta = fs::read_to_string(p("eta.csv")).unwrap();
    assert_eq!(eta.lines().next().unwrap(), "triangle_id,eta_K_sq,eta_agg_sq");
    let triangles = doc["triangles"].as_array().unwrap()[2].as_u64().unwrap() as usize;
    assert_eq!(eta.lines().count(), triangles + 1);
    assert!(!fs::read_to_string(p("mesh.txt")).unwrap().is_empty());
    assert!(!fs::read_to_string(p("system.mtx")).unwrap().is_empty());
    let rhs = fs::read_to_string(p("system.mtx.rhs")).unwrap();
    let ndof = rows[2]["ndof"].as_u64().unwrap() as usize;
    assert_eq!(rhs.lines().count(), 2 * ndof);
}
