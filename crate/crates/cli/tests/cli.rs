use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hydronet::solver::{check_contraction, pipe_like, system_at, InitialFlows};
use hydronet::SolverConfig;
use serde_json::Value;
use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(format!("{name}.inp"))
}

fn hydronet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hydronet"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}", String::from_utf8_lossy(&out.stdout));
    })
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn solve_three_node() {
    let out = hydronet(&["solve", path_str(&fixture("three_node"))]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    assert_eq!(doc["schema_version"], 1);
    assert_eq!(doc["report"]["termination"], "converged");
    let h2 = doc["heads"]["2"].as_f64().unwrap();
    assert!((h2 - 277.63).abs() <= 0.05, "{h2}");
    assert_eq!(doc["variables"], 5);
}

#[test]
fn monitor_from_zero_flows_starts_at_worst_case() {
    let path = fixture("three_node");
    let out = hydronet(&["solve", path_str(&path), "--init", "zeros", "--monitor"]);
    assert_eq!(out.status.code(), Some(0));
    let trace = json(&out)["report"]["contraction_trace"]
        .as_array()
        .unwrap()
        .clone();
    assert!(!trace.is_empty());
    let first = trace[0]["norm"].as_f64().unwrap();

    let net = hydronet::inp::read_network(&fs::read_to_string(&path).unwrap()).unwrap();
    let cfg = SolverConfig {
        initial_flows: InitialFlows::Zeros,
        ..SolverConfig::default()
    };
    let (model, xi, sys) = system_at(&net, &cfg, None).unwrap();
    let (links, a_f) = pipe_like(&model, &xi);
    assert!(a_f.iter().all(|&a| a == -1.0));
    let f = sys.factor().unwrap();
    let expected = check_contraction(&f, sys.dim(), model.n_heads(), &links, &a_f).norm;
    assert!((first - expected).abs() <= 1e-12 * expected.max(1.0));
}

#[test]
fn unreadable_path_is_a_parse_failure() {
    let out = hydronet(&["solve", "/definitely/not/here.inp"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not/here.inp"));
}

#[test]
fn malformed_file_is_a_parse_failure() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "bad.inp", "[PIPES]\n p a b\n[END]\n");
    assert_eq!(hydronet(&["solve", path_str(&p)]).status.code(), Some(2));
}

#[test]
fn iteration_cap_means_not_converged() {
    let out = hydronet(&["solve", path_str(&fixture("three_node")), "--max-iter", "2"]);
    assert_eq!(out.status.code(), Some(5));
    assert_eq!(json(&out)["report"]["termination"], "max_iter");
}

#[test]
fn csv_trace_and_system_dump() {
    let dir = TempDir::new().unwrap();
    let trace = dir.path().join("trace.csv");
    let dump = dir.path().join("system");
    let out = hydronet(&[
        "solve",
        path_str(&fixture("eight_node_prv")),
        "--format",
        "csv",
        "--trace",
        path_str(&trace),
        "--dump-system",
        path_str(&dump),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("kind,id,value"));
    assert_eq!(lines.count(), 23);
    let trace = fs::read_to_string(trace).unwrap();
    assert!(trace.starts_with("iteration,error,pipe_step,status_stable,contraction\n"));
    assert!(trace.lines().count() > 2);
    let a = fs::read_to_string(dump.join("A.mtx")).unwrap();
    assert!(a.starts_with("%%MatrixMarket"));
    assert!(fs::read_to_string(dump.join("b.mtx"))
        .unwrap()
        .starts_with("%%MatrixMarket"));
    let labels: Value =
        serde_json::from_str(&fs::read_to_string(dump.join("labels.json")).unwrap()).unwrap();
    assert!(labels.is_object());
}

#[test]
fn compare_against_newton() {
    let out = hydronet(&["compare", path_str(&fixture("eight_node_prv"))]);
    assert_eq!(out.status.code(), Some(0));
    let m = &json(&out)["metrics"];
    assert_eq!(m["reference"], "newton");
    assert!(m["en"].as_f64().unwrap() <= 0.05);
    assert!(m["fraction_ae_within_half"].as_f64().unwrap() >= 0.99);
    let total: u64 = m["ae_histogram"]
        .as_array()
        .unwrap()
        .iter()
        .map(|b| b["count"].as_u64().unwrap())
        .sum();
    assert_eq!(total, 23);
}

#[test]
fn compare_result_against_itself() {
    let dir = TempDir::new().unwrap();
    let result = dir.path().join("result.json");
    let net = fixture("three_node");
    let solved = hydronet(&["solve", path_str(&net), "-o", path_str(&result)]);
    assert_eq!(solved.status.code(), Some(0));
    let out = hydronet(&["compare", path_str(&net), "--against", path_str(&result)]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["metrics"]["en"].as_f64(), Some(0.0));
}

#[test]
fn reference_missing_an_id_is_rejected() {
    let dir = TempDir::new().unwrap();
    let reference = write(
        &dir,
        "ref.json",
        r#"{"heads": {"1": 213.4, "3": 276.8}, "flows": {"12": 0.058, "23": 0.052}}"#,
    );
    let out = hydronet(&[
        "compare",
        path_str(&fixture("three_node")),
        "--against",
        path_str(&reference),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("dimension mismatch") && err.contains("'2'"),
        "{err}"
    );
}

#[test]
fn check_three_node() {
    let out = hydronet(&["check", path_str(&fixture("three_node"))]);
    assert_eq!(out.status.code(), Some(0));
    let d = json(&out);
    assert_eq!(d["invertible"], true);
    assert!(d["contraction"].as_f64().unwrap() < 1.0);
    assert_eq!(d["validation"]["overall_ok"], true);
}

#[test]
fn check_junction_only_network() {
    let dir = TempDir::new().unwrap();
    let p = write(
        &dir,
        "j.inp",
        "[JUNCTIONS]\n a 0 1\n b 0 1\n[PIPES]\n p a b 100 200 100 0 Open\n[OPTIONS]\n Units LPS\n[END]\n",
    );
    let out = hydronet(&["check", path_str(&p)]);
    assert_eq!(out.status.code(), Some(3));
    let d = json(&out);
    assert_eq!(d["invertible"], false);
    assert!(!d["singular_rows"].as_array().unwrap().is_empty());
}

#[test]
fn closed_gpv_is_a_validation_failure() {
    let dir = TempDir::new().unwrap();
    let p = write(
        &dir,
        "gpv.inp",
        "[JUNCTIONS]\n a 0 1\n b 0 1\n[RESERVOIRS]\n r 50\n[PIPES]\n p r a 100 200 100 0 Open\n\
         [VALVES]\n v a b 200 GPV 0 2\n[OPTIONS]\n Units LPS\n[END]\n",
    );
    let out = hydronet(&["check", path_str(&p)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("openness"));
    assert_eq!(hydronet(&["solve", path_str(&p)]).status.code(), Some(3));
}

fn bench_rows(dir: &Path) -> Vec<Vec<String>> {
    let out = hydronet(&["bench", path_str(dir), "--repeats", "3", "--seed", "11"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let mut r = csv::Reader::from_reader(out.stdout.as_slice());
    let header: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    let wall = header.iter().position(|h| h == "mean_wall_time_s").unwrap();
    r.records()
        .map(|rec| {
            rec.unwrap()
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != wall)
                .map(|(_, v)| v.to_string())
                .collect()
        })
        .collect()
}

#[test]
fn bench_fixture_directory() {
    let dir = TempDir::new().unwrap();
    for name in ["three_node", "eight_node_prv", "anytown_like"] {
        fs::copy(fixture(name), dir.path().join(format!("{name}.inp"))).unwrap();
    }
    let rows = bench_rows(dir.path());
    assert_eq!(rows.len(), 3);
    assert_eq!(rows, bench_rows(dir.path()));
    // Columns: network, six counts, variables, repeats, converged, mean_iterations.
    for row in &rows {
        let counts: usize = row[1..7].iter().map(|v| v.parse::<usize>().unwrap()).sum();
        assert_eq!(row[7].parse::<usize>().unwrap(), counts);
        assert_eq!(row[9], "3");
    }
    let eight = rows.iter().find(|r| r[0] == "eight_node_prv").unwrap();
    assert_eq!(eight[7], "23");
    let its: f64 = eight[10].parse().unwrap();
    assert!((57.0 / 5.0..=57.0 * 5.0).contains(&its), "{its}");
}

#[test]
fn gp_export_three_node() {
    let net = fixture("three_node");
    let out = hydronet(&["gp-export", path_str(&net)]);
    assert_eq!(out.status.code(), Some(0));
    let gp = json(&out);
    assert_eq!(gp["base"], 2.0);
    let cons = gp["constraints"].as_array().unwrap();
    assert_eq!(cons.len(), 5);
    assert!(cons.iter().all(|c| c["kind"] == "monomial_equality"));

    let fine = json(&hydronet(&[
        "gp-export",
        path_str(&net),
        "--delta",
        "0.001",
    ]));
    let fine_cons = fine["constraints"].as_array().unwrap();
    for (a, b) in cons.iter().zip(fine_cons) {
        assert_eq!(a["exponents"], b["exponents"]);
        assert_eq!(a["log_constant"], b["log_constant"]);
        if a["log_constant"].as_f64() != Some(0.0) {
            assert_ne!(a["constant"], b["constant"]);
        }
    }

    let cfg = SolverConfig::default();
    let lp = hydronet::inp::read_network(&fs::read_to_string(&net).unwrap()).unwrap();
    let (_, _, sys) = system_at(&lp, &cfg, None).unwrap();
    for (i, c) in cons.iter().enumerate() {
        let exps = c["exponents"].as_object().unwrap();
        let row: Vec<(String, f64)> = sys
            .a
            .row(i)
            .filter(|e| e.1 != 0.0)
            .map(|(j, v)| (sys.col_labels[j].to_string(), v))
            .collect();
        assert_eq!(exps.len(), row.len());
        for (name, v) in row {
            assert_eq!(exps[&name].as_f64(), Some(v));
        }
        let base: f64 = 2.0;
        let constant = c["constant"].as_f64().unwrap();
        let rhs = if constant.is_normal() {
            -constant.ln() / base.ln()
        } else {
            -c["log_constant"].as_f64().unwrap()
        };
        assert!((rhs - sys.b[i]).abs() <= 1e-9 * sys.b[i].abs().max(1.0));
    }
}
