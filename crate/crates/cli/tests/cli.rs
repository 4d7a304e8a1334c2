use std::process::{Command, Output};

use serde_json::Value;

fn rcassoc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rcassoc")).args(args).output().expect("binary runs")
}

fn json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).expect("valid JSON")
}

#[test]
fn fit_table5_reference_model() {
    let out =
        rcassoc(&["fit", "--table", "table5", "--k", "2", "--row-logit", "L", "--col-logit", "G", "--lambda", "0.22"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out.stdout);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["kind"], "fit");
    assert!((v["deviance"].as_f64().unwrap() - 0.14).abs() < 0.1);
    assert_eq!(v["dof"], 2);
    assert_eq!(v["mu"].as_array().unwrap().len(), 4);
    assert_eq!(v["interactions"]["row_cuts"][0], "U|F");
    assert!(out.stderr.is_empty());
}

#[test]
fn rank_out_of_range_is_usage_error() {
    let out = rcassoc(&["fit", "--k", "9", "--table", "table5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    let v = json(&out.stderr);
    assert_eq!(v["error"]["kind"], "RankOutOfRange");
}

#[test]
fn bad_flags_are_usage_errors() {
    assert_eq!(rcassoc(&["fit", "--table", "table5", "--row-logit", "Q"]).status.code(), Some(2));
    assert_eq!(rcassoc(&["sweep", "--table", "table5", "--lambda-range", "1:0:0.1"]).status.code(), Some(2));
    assert_eq!(rcassoc(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn mobility_sweep_selects_reference_model() {
    let out = rcassoc(&[
        "sweep",
        "--table",
        "table7",
        "--k",
        "2",
        "--row-logits",
        "G",
        "--col-logits",
        "G",
        "--lambda-range",
        "-2:0:0.01",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out.stdout);
    let fit = &v["selected"]["fit"];
    assert!((fit["spec"]["lambda"].as_f64().unwrap() + 1.21).abs() <= 0.02);
    assert!(fit["deviance"].as_f64().unwrap() < 0.02);
    assert_eq!(fit["dof"], 1);
    assert_eq!(v["records"].as_array().unwrap().len(), 201);
}

#[test]
fn reports_are_byte_identical() {
    let args = [
        "sweep",
        "--table",
        "table6",
        "--k",
        "1,2",
        "--row-logits",
        "C",
        "--col-logits",
        "L",
        "--lambda-range",
        "-0.2:0.2:0.02",
    ];
    let a = rcassoc(&args);
    let b = Command::new(env!("CARGO_BIN_EXE_rcassoc")).args(args).env("RC_ASSOC_THREADS", "1").output().unwrap();
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn invalid_thread_cap_rejected() {
    let out = Command::new(env!("CARGO_BIN_EXE_rcassoc"))
        .args(["sweep", "--table", "table7", "--k", "1", "--lambda-range", "0:0:1"])
        .env("RC_ASSOC_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn out_directory_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = rcassoc(&[
        "fit",
        "--table",
        "table6",
        "--k",
        "2",
        "--row-logit",
        "C",
        "--col-logit",
        "L",
        "--lambda",
        "-0.06",
        "--out",
        d,
    ]);
    assert_eq!(out.status.code(), Some(0));
    let svg = std::fs::read_to_string(dir.path().join("scores.svg")).unwrap();
    assert!(svg.starts_with("<?xml") && svg.contains(r#"version="1.1""#));
    assert_eq!(svg.matches(r#"class="row""#).count() + svg.matches(r#"class="column""#).count(), 9);
    let report = std::fs::read(dir.path().join("fit.json")).unwrap();
    assert_eq!(report, out.stdout);
    let csv = std::fs::read_to_string(dir.path().join("interactions.csv")).unwrap();
    assert!(csv.starts_with(",U|F,F|S,S|W\n"));
}

#[test]
fn scenario_bundle_keeps_totals() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = rcassoc(&[
        "scenario",
        "--table",
        "table5",
        "--k",
        "2",
        "--row-logit",
        "L",
        "--col-logit",
        "G",
        "--lambda",
        "0.22",
        "--scale",
        "1,0.5,2.5",
        "--margins",
        "observed",
        "--out",
        d,
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    let at = |k: &str| text.find(&format!("\"{k}\": {{")).unwrap();
    assert!(at("1") < at("0.5") && at("0.5") < at("2.5"), "factors keep input order");
    let v = json(&out.stdout);
    for key in ["1", "0.5", "2.5"] {
        let totals = &v["scenarios"][key]["row_totals"];
        assert_eq!(totals, &serde_json::json!([3864.0, 10828.0, 8305.0, 4774.0]));
    }
    let csv = std::fs::read_to_string(dir.path().join("scenario_0.5.csv")).unwrap();
    assert!(csv.starts_with(",N,P,S,H,G\nU,"));
}

#[test]
fn csv_input_and_parse_errors() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.csv");
    std::fs::write(&good, ",a,b,c\nx,10,4,2\ny,3,9,5\nz,1,4,12\n").unwrap();
    let out = rcassoc(&["fit", "--table", good.to_str().unwrap(), "--k", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "rows,a,b\nx,1,2\ny,3,4\n").unwrap();
    let out = rcassoc(&["fit", "--table", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out.stderr);
    assert_eq!(v["error"]["kind"], "ParseError");
    assert_eq!(v["error"]["line"], 1);

    let out = rcassoc(&["fit", "--table", dir.path().join("missing.csv").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out.stderr)["error"]["kind"], "IOError");
}

#[test]
fn zero_cells_need_smoothing_flag() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("zero.csv");
    std::fs::write(&path, ",a,b,c\nx,10,0,2\ny,3,9,5\nz,1,4,12\n").unwrap();
    let p = path.to_str().unwrap();
    let out = rcassoc(&["fit", "--table", p]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out.stderr)["error"]["kind"], "ZeroCell");
    assert_eq!(rcassoc(&["fit", "--table", p, "--smoothing", "0.5"]).status.code(), Some(0));
}

#[test]
fn fixtures_listing_and_export() {
    let out = rcassoc(&["fixtures"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "table5\ntable6\ntable7\n");
    let out = rcassoc(&["fixtures", "table7"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with(",U,F,S,W\nU,2644,"));
}

#[test]
fn altham_and_ipf_commands() {
    let out = rcassoc(&["altham", "--table", "table5", "--other", "table5"]);
    assert_eq!(json(&out.stdout)["distance"], 0.0);

    let dir = tempfile::tempdir().unwrap();
    let moved = dir.path().join("moved.csv");
    let out = rcassoc(&["ipf", "--table", "table7", "--row-margins", "1,1,1,1", "--col-margins", "1,1,1,1"]);
    assert_eq!(out.status.code(), Some(0));
    std::fs::write(&moved, &out.stdout).unwrap();
    let out = rcassoc(&["altham", "--table", "table7", "--other", moved.to_str().unwrap()]);
    assert!(json(&out.stdout)["distance"].as_f64().unwrap() < 1e-9);

    let out = rcassoc(&["ipf", "--table", "table7"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn interactions_command() {
    let out =
        rcassoc(&["interactions", "--table", "table7", "--row-logit", "G", "--col-logit", "G", "--lambda", "-1.21"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out.stdout);
    assert_eq!(v["values"].as_array().unwrap().len(), 3);
    assert_eq!(v["positivity"]["all_nonneg"], true);
    let out = rcassoc(&["interactions", "--table", "table7", "--format", "csv"]);
    assert!(String::from_utf8(out.stdout).unwrap().starts_with(",U|F,F|S,S|W\n"));
}
