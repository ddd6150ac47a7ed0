use std::fs;
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csit-dmt")).args(args).env_remove("CSIT_DMT_THREADS").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn baseline_csv() {
    let o = bin(&["baseline", "--nt", "2", "--nr", "2", "--blocks", "4", "--grid", "0:2:1"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "x,diversity,curve_id\n0,16,uniform\n1,4,uniform\n2,0,uniform\n");
}

#[test]
fn delay_three_sweep_overlays_four_ordered_curves() {
    let o = bin(&[
        "dmt-causal", "--nt", "2", "--nr", "2", "--blocks", "4", "--delay", "3", "--delta", "0,0.5,1,inf", "--grid", "0:2:0.05",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let rows: Vec<(f64, f64, String)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].to_string())
        })
        .collect();
    let ids: Vec<&str> = {
        let mut v: Vec<&str> = rows.iter().map(|r| r.2.as_str()).collect();
        v.dedup();
        v
    };
    assert_eq!(ids.len(), 4);
    let per = rows.len() / 4;
    assert_eq!(per, 41);
    for i in 0..per {
        for k in 0..3 {
            assert!(rows[k * per + i].1 <= rows[(k + 1) * per + i].1 + 1e-9);
        }
    }
}

#[test]
fn json_output_carries_metadata_and_inf() {
    let o = bin(&["dmt", "--nt", "1", "--nr", "1", "--blocks", "2", "--predict", "0", "--delta", "inf", "--grid", "0.5:1:0.5", "--format", "json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let curve = &v["curves"][0];
    assert_eq!(curve["channel"]["blocks"], 2);
    assert_eq!(curve["csit"]["mode"]["kind"], "predictive");
    assert_eq!(curve["points"][0]["diversity"], "inf");
    assert_eq!(curve["points"][1]["diversity"], 0.0);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.json");
    fs::write(&cfg, r#"{"nt": 1, "nr": 1, "blocks": 2, "delay": 1, "delta": [0.5], "grid": "0:1:0.5", "bits-per-symbol": null}"#).unwrap();
    let out = dir.path().join("curve.json");
    let o = bin(&["dmt", "--config", cfg.to_str().unwrap(), "--blocks", "3", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["curves"][0]["channel"]["blocks"], 3);
    assert_eq!(v["curves"][0]["points"].as_array().unwrap().len(), 3);
}

#[test]
fn unknown_config_field_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"nt": 1, "nr": 1, "blocks": 2, "dealy": 1}"#).unwrap();
    assert_eq!(bin(&["dmt", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn usage_errors_exit_two() {
    let base = ["--nt", "2", "--nr", "2", "--blocks", "4", "--delta", "0.5"];
    let with = |extra: &[&str]| {
        let mut v: Vec<&str> = vec!["dmt"];
        v.extend(base);
        v.extend(extra);
        bin(&v).status.code()
    };
    assert_eq!(with(&["--delay", "1", "--grid", "1:0:0.1"]), Some(2));
    assert_eq!(with(&["--delay", "1", "--predict", "0"]), Some(2));
    assert_eq!(with(&["--delay", "5"]), Some(2));
    assert_eq!(with(&["--delay", "1", "--grid", "0:2.5:0.5"]), Some(2));
    assert_eq!(with(&[]), Some(2));
    let o = bin(&["rdt", "--nt", "1", "--nr", "1", "--blocks", "2", "--delay", "1", "--delta", "0", "--bits-per-symbol", "2", "--rate-grid", "0.5:2:0.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("(0, 2)"));
}

#[test]
fn rdt_sweep_samples_both_sides_of_breakpoints() {
    let o = bin(&["rdt", "--nt", "1", "--nr", "1", "--blocks", "2", "--delay", "1", "--delta", "0", "--bits-per-symbol", "2"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("\n0.999999999,2,"));
    assert!(text.contains("\n1.000000001,1,"));
}

#[test]
fn simulate_csv_and_thread_env() {
    let args = ["simulate", "--nt", "1", "--nr", "1", "--blocks", "1", "--rate", "1", "--trials", "5000", "--seed", "3", "--snr-grid-db", "0,10"];
    let a = bin(&args);
    let b = Command::new(env!("CARGO_BIN_EXE_csit-dmt")).args(args).env("CSIT_DMT_THREADS", "2").output().unwrap();
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.starts_with("snr_db,snr,rate,p_out,ci95,trials,outages,mean_power\n"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn validate_reports_json_and_exit_status() {
    let o = bin(&["validate", "thresholds"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(v["suites"][0]["suite"], "thresholds");
    assert_eq!(bin(&["validate", "bogus"]).status.code(), Some(2));
}
