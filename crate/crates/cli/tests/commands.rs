use std::fs;
use std::path::PathBuf;

use privalloc_cli::app::{EXIT_BOUND_VIOLATION, EXIT_ERROR, EXIT_OK};
use privalloc_cli::run;

fn invoke(args: &[&str]) -> (i32, String, String) {
    let mut argv = vec!["privalloc".to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("privalloc-commands-{}-{name}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn single_random_trial_with_no_budget() {
    let dir = scratch("trivial");
    let cfg = dir.join("c.cfg");
    fs::write(&cfg, "trials = 1\n[population]\nunits = 4\nunit_size = 5\n[strategy]\nname = rand\n[sweep]\nk = 0\n")
        .unwrap();
    let csv = dir.join("rows.csv");
    let (code, _, _) = invoke(&["--config", cfg.to_str().unwrap(), "sweep", "--out", csv.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3, "{text}");
    assert!(lines[0].starts_with('#'));
    assert_eq!(lines[1], "strategy,P,M,k,lambda,psi,G,rho_bar,regret,normalized_regret,bound");
    let fields: Vec<&str> = lines[2].split(',').collect();
    assert_eq!(fields[0], "rand");
    assert_eq!(fields[3], "0");
    assert_eq!(fields[8].parse::<f64>().unwrap(), 0.0);
    let _ = fs::remove_dir_all(dir);
}

#[test]
fn empty_config_lists_required_fields() {
    let dir = scratch("empty");
    let cfg = dir.join("empty.cfg");
    fs::write(&cfg, "").unwrap();
    let (code, _, err) = invoke(&["--config", cfg.to_str().unwrap(), "describe"]);
    assert_eq!(code, EXIT_ERROR);
    for field in ["trials", "units", "unit_size", "name"] {
        assert!(err.contains(field), "missing {field} in: {err}");
    }
    let _ = fs::remove_dir_all(dir);
}

#[test]
fn unknown_key_reports_line() {
    let dir = scratch("unknown");
    let cfg = dir.join("bad.cfg");
    fs::write(&cfg, "trials = 1\n[population]\nunits = 2\nwidth = 3\n").unwrap();
    let (code, _, err) = invoke(&["--config", cfg.to_str().unwrap(), "describe"]);
    assert_eq!(code, EXIT_ERROR);
    assert!(err.contains("line 4"), "{err}");
    let _ = fs::remove_dir_all(dir);
}

#[test]
fn unwritable_output_is_an_error() {
    let (code, _, err) = invoke(&["--preset", "default", "generate", "--out", "/nonexistent-dir/x/pop.csv"]);
    assert_eq!(code, EXIT_ERROR);
    assert!(!err.is_empty());
}

#[test]
fn violated_bounds_exit_with_distinct_code() {
    // The adversarial threshold bound is exceeded at psi = 1 on the default population.
    let dir = scratch("violation");
    let csv = dir.join("rows.csv");
    let (code, out, _) = invoke(&["--preset", "default", "--trials", "20", "sweep", "--out", csv.to_str().unwrap()]);
    assert_eq!(code, EXIT_BOUND_VIOLATION, "{out}");
    assert!(out.contains("FAIL"));
    let _ = fs::remove_dir_all(dir);
}

#[test]
fn generated_population_feeds_allocate() {
    let dir = scratch("roundtrip");
    let pop = dir.join("pop.csv");
    let alloc = dir.join("alloc.csv");
    let (code, _, err) = invoke(&["--preset", "default", "generate", "--out", pop.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK, "{err}");
    let (code, out, err) = invoke(&[
        "--preset",
        "default",
        "allocate",
        "--strategy",
        "ula",
        "--input",
        pop.to_str().unwrap(),
        "--k",
        "120",
        "--out",
        alloc.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.contains("ula"));
    let text = fs::read_to_string(&alloc).unwrap();
    let treated = text.lines().skip(1).filter(|l| l.ends_with(",1")).count();
    assert_eq!(treated, 120);
    let _ = fs::remove_dir_all(dir);
}

#[test]
fn describe_counts_rows() {
    let (code, out, _) = invoke(&["--preset", "regime-map", "describe"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("36 grid points x 200 trials x 3 strategies = 21600 runs"), "{out}");
}

#[test]
fn preset_and_config_conflict() {
    let (code, _, _) = invoke(&["--preset", "default", "--config", "x.cfg", "describe"]);
    assert_ne!(code, EXIT_OK);
}
