//! End-to-end experiment pipelines writing into temporary directories.

use spikelab::experiment::{run, ExperimentConfig, ExperimentError, ExperimentReport};
use spikelab::field_io::read_binary;
use std::fs;

const TABLE: &str = r#"{"kind": "emden_table", "p": [1.5, 2.0, 3.0], "samples": 2000}"#;

const DISK: &str = r#"{
  "kind": "disk_spike_sweep",
  "p": 2.0,
  "eps": [0.06, 0.05, 0.04, 0.035],
  "sweep": {
    "solver": {"tol": 1e-10, "max_iter": 60, "armijo": 1e-4, "min_damping": 0.0009765625,
               "undershoot_tol": 1e-8, "picard_fallback": true},
    "grid": {"n_min": 24, "n_max": 80, "min_cells_per_spike": 4.0, "cells_ramp": 0.0},
    "warm_start": "reseed"
  },
  "dump_fields": true
}"#;

#[test]
fn emden_table_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_json(TABLE).unwrap();
    let report = run(&cfg, dir.path()).unwrap();
    let ExperimentReport::EmdenTable(t) = report else { panic!("wrong report kind") };
    assert_eq!(t.rows.len(), 3);
    let csv = fs::read_to_string(dir.path().join("emden_table.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "p,phi0,dphi1,I_pm1,I_p,I_pp1,res_ip,res_pohozaev");
    assert_eq!(lines.count(), 3);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["kind"], "emden_table");
}

#[test]
fn runs_are_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = ExperimentConfig::from_json(TABLE).unwrap();
    run(&cfg, a.path()).unwrap();
    run(&cfg, b.path()).unwrap();
    for name in ["emden_table.csv", "summary.json"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn disk_sweep_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_json(DISK).unwrap();
    let ExperimentReport::Sweep(report) = run(&cfg, dir.path()).unwrap() else { panic!("wrong report kind") };
    assert_eq!(report.rows.len(), 4);
    assert!(report.rows.iter().all(|r| r.converged));
    assert_eq!(report.tracks.len(), 1);
    for name in ["sweep.csv", "trend_spike0.csv", "quantization.csv", "summary.json"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let sweep = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 5);
    for k in 0..4 {
        let sol = read_binary(&dir.path().join(format!("field_{k}.pslb"))).unwrap();
        assert_eq!(sol.eps, report.rows[k].eps);
        assert!((sol.v_max() - report.rows[k].v_max).abs() == 0.0);
        assert!(sol.residual < 1e-9);
    }
}

#[test]
fn defaults_fill_the_domain_and_centre() {
    let cfg = ExperimentConfig::from_json(r#"{"kind": "rect_spike_sweep", "eps": [0.05]}"#).unwrap();
    let ExperimentConfig::RectSpikeSweep(s) = cfg else { panic!("wrong kind") };
    assert_eq!(s.domain, Some(spikelab::Shape::Rect { lx: 2.0, ly: 1.0 }));
    assert_eq!(s.centers, Some(vec![[1.0, 0.5]]));
}

#[test]
fn invalid_configs_are_rejected() {
    let cases = [
        r#"{"kind": "emden_table", "p": []}"#,
        r#"{"kind": "emden_table", "p": [1.0]}"#,
        r#"{"kind": "disk_spike_sweep", "eps": [0.05, 0.06]}"#,
        r#"{"kind": "disk_spike_sweep", "eps": []}"#,
        r#"{"kind": "disk_spike_sweep", "eps": [0.05], "domain": {"kind": "rect", "lx": 1.0, "ly": 1.0}}"#,
        r#"{"kind": "disk_spike_sweep", "eps": [0.05], "centers": [[3.0, 0.0]]}"#,
    ];
    for c in cases {
        assert!(matches!(ExperimentConfig::from_json(c), Err(ExperimentError::Validation(_))), "{c}");
    }
    assert!(ExperimentConfig::from_json(r#"{"kind": "emden_table", "p": [2.0], "bogus": 1}"#).is_err());
    assert!(ExperimentConfig::from_json(r#"{"kind": "nope"}"#).is_err());
}
