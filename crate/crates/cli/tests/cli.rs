use serde_json::Value;
use stoloc_cli::{run, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE};

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("stoloc").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn json(text: &str) -> Value {
    serde_json::from_str(text).unwrap_or_else(|e| panic!("{e}: {text}"))
}

#[test]
fn help_and_version_exit_zero() {
    let (code, out, _) = call(&["--help"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("localize") && out.contains("verify"));
    let (code, out, _) = call(&["--version"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains(env!("CARGO_PKG_VERSION")));
}

#[test]
fn unknown_subcommand_is_usage() {
    let (code, _, err) = call(&["frobnicate"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(!err.is_empty());
}

#[test]
fn field_diagnostics_name_every_bad_field() {
    let (code, out, err) = call(&["localize", "--dt=-1", "--paths", "0", "--seed", "x"]);
    assert_eq!(code, EXIT_USAGE);
    let doc = json(&out);
    assert_eq!(doc["error"]["kind"], "usage");
    let fields: Vec<&str> = doc["error"]["fields"].as_array().unwrap().iter().map(|f| f["field"].as_str().unwrap()).collect();
    assert_eq!(fields, ["seed", "paths", "dt"]);
    assert!(err.contains("dt"));
}

#[test]
fn unknown_identifiers_are_usage_errors() {
    let (code, out, _) = call(&["tau", "--family", "cauchy", "--N", "10000"]);
    assert_eq!(code, EXIT_USAGE);
    assert_eq!(json(&out)["error"]["kind"], "config");
    let (code, _, _) = call(&["localize", "--measure", "octahedron"]);
    assert_eq!(code, EXIT_USAGE);
}

#[test]
fn capability_errors_exit_two_with_structured_json() {
    let (code, out, _) = call(&["widths", "--norm", "cross", "--n", "100", "--N", "10000"]);
    assert_eq!(code, EXIT_NUMERICAL);
    let doc = json(&out);
    assert_eq!(doc["error"]["kind"], "capability");
    assert_eq!(doc["command"], "widths");
}

#[test]
fn reports_embed_version_seed_and_config() {
    let (code, out, _) = call(&["sigma", "--n", "1,2", "--N", "5000", "--seed", "19"]);
    assert_eq!(code, EXIT_OK);
    let doc = json(&out);
    assert_eq!(doc["version"], stoloc_cli::VERSION);
    assert_eq!(doc["seed"], 19);
    assert_eq!(doc["config"]["N"], 5000);
    assert!(doc["config"].get("threads").is_none());
    let rows = doc["result"]["estimates"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    for row in rows {
        for key in ["family", "n", "N", "estimate", "CI", "seed"] {
            assert!(row.get(key).is_some(), "missing {key}");
        }
    }
}

#[test]
fn config_file_is_overridden_by_flags() {
    let path = std::env::temp_dir().join(format!("stoloc-cli-test-{}.cfg", std::process::id()));
    std::fs::write(&path, "# sweep\nfamily = exp\nn = 2\nN = 20000\nseed = 1\n").unwrap();
    let (code, out, _) = call(&["tau", "--config", path.to_str().unwrap(), "--seed", "5"]);
    std::fs::remove_file(&path).ok();
    assert_eq!(code, EXIT_OK);
    let doc = json(&out);
    assert_eq!(doc["seed"], 5);
    assert_eq!(doc["config"]["family"], "exp");
    assert_eq!(doc["result"]["estimates"][0]["N"], 20000);
}

#[test]
fn bad_config_file_lines_are_reported() {
    let path = std::env::temp_dir().join(format!("stoloc-cli-bad-{}.cfg", std::process::id()));
    std::fs::write(&path, "seed = 1\nwidth: 3\n").unwrap();
    let (code, out, _) = call(&["tau", "--config", path.to_str().unwrap()]);
    std::fs::remove_file(&path).ok();
    assert_eq!(code, EXIT_USAGE);
    assert!(json(&out)["error"]["fields"][0]["field"].as_str().unwrap().ends_with(":2"));
}

#[test]
fn exponential_tau_example() {
    let (code, out, _) = call(&["tau", "--family", "exp", "--n", "10", "--N", "1000000", "--seed", "7"]);
    assert_eq!(code, EXIT_OK);
    let est = json(&out)["result"]["estimates"][0]["estimate"].as_f64().unwrap();
    assert!((est / 2.0 - 1.0).abs() <= 0.1, "{est}");
}

#[test]
fn two_point_trace_example() {
    let (code, out, _) = call(&["localize", "--measure", "twopoint", "--paths", "2000", "--t", "1", "--seed", "7"]);
    assert_eq!(code, EXIT_OK);
    let doc = json(&out);
    let agg = &doc["result"]["aggregate"];
    let grid = agg["time_grid"].as_array().unwrap();
    let k = grid.iter().position(|t| t.as_f64() == Some(1.0)).unwrap();
    let mean = agg["mean_trA"][k].as_f64().unwrap();
    let se = agg["se_trA"][k].as_f64().unwrap();
    assert!((mean - (-1.0f64).exp()).abs() <= 3.0 * se, "{mean} ± {se}");
    assert!(doc["result"]["decay"]["slope"].is_number());
}

#[test]
fn csv_trace_has_declared_columns() {
    let (code, out, _) = call(&["localize", "--measure", "four-atom", "--paths", "5", "--format", "csv"]);
    assert_eq!(code, EXIT_OK);
    let mut lines = out.lines();
    assert!(lines.next().unwrap().starts_with("# stoloc"));
    assert_eq!(lines.next().unwrap(), "t,a_1,a_2,trA,opA,trQV");
    assert!(lines.next().unwrap().split(',').count() == 6);
}

#[test]
fn compare_csv_rows() {
    let (code, out, _) =
        call(&["compare", "--family", "exp", "--norm", "l1", "--n", "2,20", "--N", "20000", "--format", "csv"]);
    assert_eq!(code, EXIT_OK);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[1], "n,family,norm,E_X,E_Gamma,ratio,tau_hat,bound");
    assert_eq!(lines.len(), 4);
    assert!(lines[3].starts_with("20,exp,"));
}

#[test]
fn output_flag_writes_file() {
    let path = std::env::temp_dir().join(format!("stoloc-cli-out-{}.json", std::process::id()));
    let (code, out, _) = call(&["widths", "--n", "3", "--N", "10000", "--output", path.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    assert!(out.is_empty());
    let doc = json(&std::fs::read_to_string(&path).unwrap());
    std::fs::remove_file(&path).ok();
    let row = &doc["result"]["rows"][0];
    assert!((row["isotropic_constant"].as_f64().unwrap() - 1.0 / (2.0 * 3f64.sqrt())).abs() < 1e-12);
    assert!(row["corollary"]["report"]["quarter_holds"].as_bool().unwrap());
}

#[test]
fn stopped_reports_coupling() {
    let (code, out, _) = call(&["stopped", "--measure", "twopoint", "--paths", "1000", "--theta", "0.5"]);
    assert_eq!(code, EXIT_OK);
    let doc = json(&out);
    assert!(doc["result"]["coupling"]["conformance"]["pass"].is_boolean());
    assert_eq!(doc["result"]["coupling"]["dominance"].as_array().unwrap().len(), 4);
    assert!(doc["result"]["stopped"]["max_qv_excess"].as_f64().unwrap() <= 1e-9);
}

#[test]
fn json_measure_files_are_accepted() {
    let path = std::env::temp_dir().join(format!("stoloc-cli-measure-{}.json", std::process::id()));
    std::fs::write(&path, r#"{"dimension": 1, "atoms": [[-2.0], [0.5], [1.0]], "weights": [0.2, 0.3, 0.5]}"#).unwrap();
    let (code, out, _) = call(&["localize", "--measure", path.to_str().unwrap(), "--paths", "50"]);
    std::fs::remove_file(&path).ok();
    assert_eq!(code, EXIT_OK);
    assert_eq!(json(&out)["result"]["atoms"], 3);
}
