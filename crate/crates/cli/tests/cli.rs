use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use esscher_cli::{Evaluation, ReportSummary};
use esscher_core::diagnostics::Verdict;
use esscher_core::karamata::{VariationClass, VariationKind};
use serde_json::Value;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn esscher(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_esscher")).args(args).output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("config.json");
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn classify_builtins() {
    let o = esscher(&["classify", "--config", config("weibull2.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let c: VariationClass = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(c.kind, VariationKind::RegularlyVarying);
    assert!((c.beta.unwrap() - 1.0).abs() < 0.02);

    let o = esscher(&["classify", "--config", config("expexp.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let c: VariationClass = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(c.kind, VariationKind::RapidlyVarying);
}

#[test]
fn classification_round_trips_bit_exactly() {
    let o = esscher(&[
        "classify",
        "--config",
        config("weibull3_expression.json").to_str().unwrap(),
    ]);
    let text = stdout(&o);
    let c: VariationClass = serde_json::from_str(&text).unwrap();
    let mut again = serde_json::to_string_pretty(&c).unwrap();
    again.push('\n');
    assert_eq!(again, text);
}

#[test]
fn malformed_expression_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), r#"{"model": {"g": "x^2 +* x"}}"#);
    let o = esscher(&["classify", "--config", &p]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("position"));
}

#[test]
fn unknown_field_and_bad_j_max_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    for body in [
        r#"{"model": {"builtin": "expexp"}, "colour": 1}"#,
        r#"{"model": {"builtin": "expexp"}, "j_max": 11}"#,
        r#"{"model": {"builtin": "expexp", "g": "exp(x)"}}"#,
        r#"{"model": {"builtin": "weibull", "params": [-1]}}"#,
    ] {
        let p = write_config(dir.path(), body);
        let o = esscher(&["evaluate", "--config", &p, "--t", "10"]);
        assert_eq!(o.status.code(), Some(1), "{body}");
    }
    let o = esscher(&["evaluate", "--config", "/nonexistent/config.json", "--t", "10"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn evaluate_weibull2_closed_forms() {
    let o = esscher(&[
        "evaluate",
        "--config",
        config("weibull2.json").to_str().unwrap(),
        "--t",
        "3.5",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let e: Evaluation = serde_json::from_str(&text).unwrap();
    // h(x) = 2x - 1/x, so h(2) = 3.5
    let tp = e.tilt_point.unwrap();
    assert!((tp.x_hat - 2.0).abs() < 1e-14);
    let k_hat = 3.5 * 2.0 - (4.0 - 2f64.ln());
    assert!((tp.k_hat - k_hat).abs() < 1e-14);
    assert!(e.asymptotic.is_some());

    let mut again = serde_json::to_string_pretty(&e).unwrap();
    again.push('\n');
    assert_eq!(again, text, "moment sets must round-trip bit-exactly");
}

#[test]
fn evaluate_expexp_and_nonpositive_t() {
    let o = esscher(&[
        "evaluate",
        "--config",
        config("expexp.json").to_str().unwrap(),
        "--t",
        "10",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let e: Evaluation = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((e.tilt_point.unwrap().x_hat - (10f64.ln() + 1.0)).abs() < 1e-13);

    let o = esscher(&[
        "evaluate",
        "--config",
        config("expexp.json").to_str().unwrap(),
        "--t",
        "0",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["asymptotic"].is_null());
    assert!(!v["notes"].as_array().unwrap().is_empty());
    assert!(v["exact"]["log_phi"].as_f64().unwrap().abs() < 1e-9);
}

#[test]
fn numerical_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(
        dir.path(),
        r#"{"model": {"builtin": "weibull", "params": [2]}, "tolerances": {"quadrature": 1e-300}}"#,
    );
    let o = esscher(&["evaluate", "--config", &p, "--t", "10"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("numerical failure"));
}

#[test]
fn report_weibull2_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    let o = esscher(&[
        "report",
        "--config",
        config("weibull2.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s: ReportSummary = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(s.verdict, Verdict::Pass);
    let csv = fs::read_dir(&out)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "csv"))
        .count();
    assert!(csv >= 8, "{csv} csv files");
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["verdict"], "PASS");
    let phi = fs::read_to_string(out.join("phi.csv")).unwrap();
    assert_eq!(phi.lines().next(), Some("t,exact,asymptotic,ratio"));
    assert_eq!(phi.lines().count(), 8);
}

#[test]
fn report_expexp_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = esscher(&[
        "report",
        "--config",
        config("expexp.json").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("gaussian.csv").exists());
}

#[test]
fn unsupported_model_writes_report_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), r#"{"model": {"g": "x"}}"#);
    let out = dir.path().join("r");
    let o = esscher(&["report", "--config", &p, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["verdict"], "UNSUPPORTED");
}

#[test]
fn verify_expression_model() {
    let o = esscher(&[
        "verify",
        "--config",
        config("weibull3_expression.json").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["passed"], true);
}
