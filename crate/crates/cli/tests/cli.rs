use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn freshcrawl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_freshcrawl"))
        .args(args)
        .output()
        .unwrap()
}

fn ok_json(args: &[&str]) -> Value {
    let out = freshcrawl(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

/// Exit code plus the parsed last stderr line.
fn failure(args: &[&str]) -> (i32, Value) {
    let out = freshcrawl(args);
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    let stderr = String::from_utf8_lossy(&out.stderr);
    let last = stderr.lines().last().unwrap_or_default();
    (
        out.status.code().unwrap(),
        serde_json::from_str(last).unwrap(),
    )
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect()
}

#[test]
fn delay_allocation_example() {
    let v = ok_json(&[
        "allocate",
        "--objective",
        "delay",
        "--zeta",
        "1,1",
        "--xi",
        "1,4",
        "--R",
        "3",
    ]);
    let rates = floats(&v["rates"]);
    assert!(
        (rates[0] - 1.0).abs() < 1e-12 && (rates[1] - 2.0).abs() < 1e-12,
        "{rates:?}"
    );
}

#[test]
fn unchanged_bits_clip_to_the_lower_bound() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(
        dir.path(),
        "obs.csv",
        "page_id,y_time,bit\np,1,0\np,2,0\np,3,0\n",
    );
    let v = ok_json(&[
        "estimate", "--input", &input, "--method", "mm", "--xi-min", "0.1", "--xi-max", "1",
    ]);
    assert_eq!(v[0]["xi_hat"].as_f64().unwrap(), 0.1);
    assert!(v[0]["confidence_width"].as_f64().unwrap() > 0.0);
}

#[test]
fn etc_is_deterministic_and_tau_is_on_the_grid() {
    let args = [
        "etc",
        "--auto-tau",
        "--R",
        "50",
        "--T",
        "2000",
        "--pages",
        "20",
        "--seed",
        "9",
    ];
    let a = ok_json(&args);
    let b = ok_json(&args);
    assert_eq!(a, b);
    let step = 20.0 / 50.0;
    let tau = a["tau"].as_f64().unwrap();
    let rounds = tau / step;
    assert!((rounds - rounds.round()).abs() < 1e-9, "tau {tau}");
    assert!(tau < 2000.0);
}

#[test]
fn usage_errors_exit_one_with_json() {
    let (code, err) = failure(&["allocate", "--no-such-flag"]);
    assert_eq!(code, 1);
    assert_eq!(err["error"], "usage");
    let (code, _) = failure(&["no-such-command"]);
    assert_eq!(code, 1);
    let (code, err) = failure(&["etc", "--R", "10", "--pages", "5"]);
    assert_eq!(code, 1);
    assert!(err["message"].as_str().unwrap().contains("horizon"));
}

#[test]
fn help_exits_zero() {
    for args in [vec!["--help"], vec!["scaling", "--help"]] {
        assert!(freshcrawl(&args).status.success());
    }
}

#[test]
fn ingest_filters_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(
        dir.path(),
        "log.csv",
        "page_id,crawl_time,changed,importance\nx,1,1,1\nx,2,1,1\ny,1,0,3\ny,2,1,3\ny,3,0,3\ny,4,1,3\n",
    );
    let out = dir.path().join("ensemble.json");
    let summary = ok_json(&[
        "ingest",
        "--input",
        &input,
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(summary["pages"], 1);
    assert_eq!(summary["excluded_all_changed"], 1);
    let ensemble: Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(ensemble["page_ids"][0], "y");
    assert!((ensemble["change_rates"][0].as_f64().unwrap() - 2f64.ln()).abs() < 1e-9);

    // the ingested file drives other subcommands
    let v = ok_json(&["allocate", "--ensemble", out.to_str().unwrap(), "--R", "2"]);
    assert_eq!(floats(&v["rates"]), vec![2.0]);
}

#[test]
fn ingest_failures_are_data_errors_and_write_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ensemble.json");
    let bad = write(
        dir.path(),
        "bad.csv",
        "page_id,crawl_time,changed,importance\na,1,0,1\na,2,7,1\n",
    );
    let (code, err) = failure(&["ingest", "--input", &bad, "--output", out.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert_eq!(err["error"], "parse");
    assert_eq!(err["line"], 3);
    let empty = write(
        dir.path(),
        "empty.csv",
        "page_id,crawl_time,changed,importance\na,1,0,1\na,2,0,1\n",
    );
    let (code, err) = failure(&[
        "ingest",
        "--input",
        &empty,
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
    assert_eq!(err["error"], "empty_ensemble");
    assert!(!out.exists());
    assert_eq!(
        std::fs::read_dir(dir.path()).unwrap().count(),
        2,
        "stray temporary files"
    );
}

#[test]
fn flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "run.toml", "bandwidth = 4.0\n");
    let from_config = ok_json(&[
        "--config", &config, "allocate", "--zeta", "1,1", "--xi", "1,1",
    ]);
    assert!((floats(&from_config["rates"]).iter().sum::<f64>() - 4.0).abs() < 1e-9);
    let overridden = ok_json(&[
        "--config", &config, "allocate", "--zeta", "1,1", "--xi", "1,1", "--R", "3",
    ]);
    assert!((floats(&overridden["rates"]).iter().sum::<f64>() - 3.0).abs() < 1e-9);
    let broken = write(dir.path(), "broken.toml", "bandwith = 4.0\n");
    let (code, err) = failure(&["--config", &broken, "allocate", "--zeta", "1", "--xi", "1"]);
    assert_eq!(code, 1);
    assert_eq!(err["error"], "config");
}

#[test]
fn config_ensemble_is_used() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "run.toml",
        "bandwidth = 3.0\nensemble_seed = 4\n[ensemble]\nkind = \"log_normal\"\npages = 7\nxi_min = 0.2\nxi_max = 0.9\nsigma = 1.0\n",
    );
    let v = ok_json(&["--config", &config, "allocate"]);
    assert_eq!(v["rates"].as_array().unwrap().len(), 7);
}

#[test]
fn simulate_writes_a_reproducible_trace() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let base = [
        "simulate",
        "--pages",
        "5",
        "--R",
        "5",
        "--T",
        "20",
        "--seed",
        "2",
        "--policy",
        "uniform-interval",
    ];
    let run = |p: &Path| {
        let mut args = base.to_vec();
        args.extend(["--trace", p.to_str().unwrap()]);
        ok_json(&args)
    };
    assert_eq!(run(&a), run(&b));
    let text = std::fs::read_to_string(&a).unwrap();
    assert!(text.starts_with("page_id,stream,time,bit\n"));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn experiment_subcommands_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    let path = |n: &str| dir.path().join(n).to_str().unwrap().to_string();
    let common = ["--pages", "10", "--R", "10", "--seeds", "4", "--seed", "1"];

    let sweep_csv = path("sweep.csv");
    let mut args = vec![
        "sweep-tau",
        "--T",
        "300",
        "--log-grid",
        "5",
        "--output",
        &sweep_csv,
    ];
    args.extend(common);
    let v = ok_json(&args);
    assert_eq!(v["rows"].as_array().unwrap().len(), 5);
    assert!(std::fs::read_to_string(&sweep_csv)
        .unwrap()
        .starts_with("tau,mean_regret"));

    let phased_csv = path("phased.csv");
    let mut args = vec![
        "phased",
        "--T",
        "300",
        "--phases",
        "3",
        "--compare-etc",
        "--output",
        &phased_csv,
    ];
    args.extend(common);
    let v = ok_json(&args);
    assert!(v["median_regret"].is_number() && v["etc_median_regret"].is_number());
    assert_eq!(
        std::fs::read_to_string(&phased_csv)
            .unwrap()
            .lines()
            .count(),
        1 + 4 * 3
    );

    let summary = path("scaling.json");
    let v = ok_json(&[
        "scaling",
        "--pages",
        "10",
        "--bandwidths",
        "10",
        "--horizons",
        "100,300,1000",
        "--seeds",
        "3",
        "--summary",
        &summary,
    ]);
    assert_eq!(v["rows"].as_array().unwrap().len(), 3);
    assert!(Path::new(&summary).exists());

    let v = ok_json(&[
        "coverage",
        "--xis",
        "0.5",
        "--rhos",
        "0.25",
        "--observations",
        "100",
        "--trials",
        "200",
    ]);
    assert_eq!(v["rows"].as_array().unwrap().len(), 1);

    let cmp_csv = path("cmp.csv");
    let v = ok_json(&[
        "compare-estimators",
        "--xis",
        "0.5",
        "--seeds",
        "20",
        "--output",
        &cmp_csv,
    ]);
    assert_eq!(v.as_array().unwrap().len(), 4);
    assert!(std::fs::read_to_string(&cmp_csv)
        .unwrap()
        .starts_with("xi,rho,observations"));
}

#[test]
fn jobs_do_not_change_results() {
    let args = [
        "sweep-tau",
        "--pages",
        "8",
        "--R",
        "8",
        "--T",
        "200",
        "--seeds",
        "6",
        "--log-grid",
        "4",
    ];
    let one = ok_json(&[&["--jobs", "1"][..], &args[..]].concat());
    let three = ok_json(&[&["--jobs", "3"][..], &args[..]].concat());
    assert_eq!(one, three);
}
