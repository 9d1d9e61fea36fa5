//! The command-line front end, driven in-process.

use std::fs;
use std::path::Path;

use tempfile::TempDir;
use walker_qram::cli::{run, EXIT_INPUT, EXIT_OK, EXIT_PROPERTY};
use walker_qram::documents::{store_query, OutputDocument, TraceDocument};
use walker_qram::golden::{classical_case, entangled_case};
use walker_qram::memory::store_bank;

fn cli(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let mut argv = vec!["walker-qram"];
    argv.extend_from_slice(args);
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = path(dir, name);
    fs::write(&p, text).unwrap();
    p
}

fn output(text: &str) -> Vec<(String, String, f64, f64)> {
    let doc: OutputDocument = serde_json::from_str(text).unwrap();
    doc.terms.into_iter().map(|t| (t.address, t.message, t.re.0, t.im.0)).collect()
}

#[test]
fn classical_run() {
    let dir = TempDir::new().unwrap();
    let db = write(&dir, "classical.bank.json", &store_bank(&classical_case().unwrap().bank));
    let (code, out, err) = cli(&["run", "--db", &db, "--address", "10"]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert_eq!(output(&out), vec![("10".into(), "1".into(), 1.0, 0.0)]);
}

#[test]
fn entangled_run_from_a_query_file() {
    let dir = TempDir::new().unwrap();
    let case = entangled_case().unwrap();
    let db = write(&dir, "entangled.bank.json", &store_bank(&case.bank));
    let q = write(&dir, "entangled.query.json", &store_query(2, &case.query));
    let (code, out, err) = cli(&["run", "--db", &db, "--query", &q]);
    assert_eq!(code, EXIT_OK, "{err}");
    let terms = output(&out);
    assert_eq!(terms.len(), 2);
    assert_eq!((terms[0].0.as_str(), terms[0].1.as_str()), ("00", "1"));
    assert_eq!((terms[1].0.as_str(), terms[1].1.as_str()), ("11", "0"));
    for t in &terms {
        assert!((t.2 - std::f64::consts::FRAC_1_SQRT_2).abs() <= 1e-12);
    }
}

#[test]
fn identical_requests_give_identical_bytes() {
    let dir = TempDir::new().unwrap();
    let case = entangled_case().unwrap();
    let db = write(&dir, "b.json", &store_bank(&case.bank));
    let q = write(&dir, "q.json", &store_query(2, &case.query));
    let mut files = Vec::new();
    for i in 0..2 {
        let (t, l, o) = (path(&dir, &format!("t{i}")), path(&dir, &format!("l{i}")), path(&dir, &format!("o{i}")));
        let (code, out, _) = cli(&[
            "run",
            "--db",
            &db,
            "--query",
            &q,
            "--variant",
            "backup",
            "--trace",
            &t,
            "--ledger",
            &l,
            "--output",
            &o,
        ]);
        assert_eq!((code, out.as_str()), (EXIT_OK, ""));
        files.push([fs::read(t).unwrap(), fs::read(l).unwrap(), fs::read(o).unwrap()]);
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn switch_copy_with_backup_variant_is_rejected_before_running() {
    let dir = TempDir::new().unwrap();
    let db = write(&dir, "b.json", &store_bank(&classical_case().unwrap().bank));
    let trace = path(&dir, "t.json");
    let (code, _, err) = cli(&[
        "run",
        "--db",
        &db,
        "--address",
        "10",
        "--variant",
        "backup",
        "--copy-mode",
        "switch",
        "--trace",
        &trace,
    ]);
    assert_eq!(code, EXIT_INPUT);
    assert!(err.contains("configuration"), "{err}");
    assert!(!Path::new(&trace).exists());
}

#[test]
fn input_errors_exit_one() {
    let dir = TempDir::new().unwrap();
    let db = write(&dir, "b.json", &store_bank(&classical_case().unwrap().bank));
    let bad = write(&dir, "bad.json", "{\"n\": 2}");
    for args in [
        vec!["run", "--db", "/nonexistent/bank.json", "--address", "10"],
        vec!["run", "--db", &db, "--address", "101"],
        vec!["run", "--db", &db, "--address", "1x"],
        vec!["run", "--db", &bad, "--address", "10"],
        vec!["run", "--db", &db],
        vec!["run", "--db", &db, "--address", "10", "--query", &db],
        vec!["resources", "--n", "8..2"],
        vec!["verify", "unitarity", "--n", "4"],
        vec!["verify", "bogus"],
    ] {
        let (code, _, err) = cli(&args);
        assert_eq!(code, EXIT_INPUT, "{args:?}");
        assert!(!err.is_empty(), "{args:?}");
    }
}

#[test]
fn verify_scopes_pass() {
    let dir = TempDir::new().unwrap();
    for scope in ["golden", "unitarity", "equivalence", "recollection"] {
        let report = path(&dir, scope);
        let (code, out, err) = cli(&["verify", scope, "--n", "2", "--m", "1", "--report", &report]);
        assert_eq!(code, EXIT_OK, "{scope}: {out}{err}");
        assert!(out.lines().count() >= 2 && out.lines().all(|l| l.starts_with("PASS ")), "{out}");
        let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
        assert_eq!(json["scope"], scope);
    }
}

#[test]
fn replay_detects_tampering() {
    let dir = TempDir::new().unwrap();
    let db = write(&dir, "b.json", &store_bank(&classical_case().unwrap().bank));
    let t = path(&dir, "t.json");
    assert_eq!(cli(&["run", "--db", &db, "--address", "10", "--trace", &t]).0, EXIT_OK);
    let (code, out, _) = cli(&["replay", &t]);
    assert_eq!(code, EXIT_OK);
    assert!(out.starts_with("PASS"));

    let mut doc: TraceDocument = serde_json::from_str(&fs::read_to_string(&t).unwrap()).unwrap();
    let ket = &mut doc.steps[5].components[0].ket;
    *ket = ket.replacen("R@", "B@", 1);
    fs::write(&t, serde_json::to_string(&doc).unwrap()).unwrap();
    let (code, out, _) = cli(&["replay", &t]);
    assert_eq!(code, EXIT_PROPERTY, "{out}");
    assert!(out.starts_with("FAIL"));
}

#[test]
fn resources_verdicts() {
    let (code, out, _) = cli(&["resources", "--n", "2..8", "--m", "1", "--variant", "backup", "--format", "json"]);
    assert_eq!(code, EXIT_OK);
    let json: serde_json::Value = serde_json::from_str(&out).unwrap();
    let verdicts = json["verdicts"].as_array().unwrap();
    let depth = verdicts.iter().find(|v| v["metric"] == "classical depth").unwrap();
    assert_eq!(depth["report"]["class"], "quadratic");
    assert_eq!(json["walker_count_exact"], true);

    let (code, out, _) = cli(&["resources", "--n", "4..10", "--format", "csv"]);
    assert_eq!(code, EXIT_OK);
    let footprint = out.lines().find(|l| l.starts_with("superposition footprint,")).unwrap();
    assert!(footprint.contains(",doubling,"), "{footprint}");
    assert_eq!(out.split("\n\n").count(), 3);

    let (code, out, _) = cli(&["resources", "--n", "3"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("no scaling verdicts"));
}
