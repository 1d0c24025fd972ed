//! Batch-runner behavior beyond the acceptance determinism suite.

use reachloop_cli::batch::{RunConfig, read_records, run_batch};
use reachloop_cli::config::SolverParams;
use std::path::{Path, PathBuf};
use std::process::Command;

fn benchmark_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../benchmarks/acas-desk")
}

fn config_for(out: &Path, cell_range: Option<(usize, usize)>) -> RunConfig {
    let dir = benchmark_dir();
    RunConfig {
        scenario_path: dir.join("scenario.json"),
        networks_dir: dir.join("networks"),
        jobs: 4,
        solver: SolverParams::default(),
        max_split_depth: 2,
        out_dir: out.to_path_buf(),
        cell_range,
        dump_tubes: false,
    }
}

#[test]
fn empty_cell_range_yields_no_records_and_undefined_coverage() {
    let out = std::env::temp_dir().join(format!("reachloop-batch-empty-{}", std::process::id()));
    let summary = run_batch(&config_for(&out, Some((0, 0)))).unwrap();
    assert_eq!(summary.cells, 0);
    assert_eq!(summary.k0, 0);
    assert_eq!(summary.coverage_pct, None);
    assert!(read_records(&out.join("records.jsonl")).unwrap().is_empty());
    std::fs::remove_dir_all(&out).ok();
}

#[test]
fn sharded_run_covers_only_requested_roots() {
    let out = std::env::temp_dir().join(format!("reachloop-batch-shard-{}", std::process::id()));
    let summary = run_batch(&config_for(&out, Some((10, 18)))).unwrap();
    assert_eq!(summary.k0, 8);
    let records = read_records(&out.join("records.jsonl")).unwrap();
    for rec in &records {
        let root: usize = rec.root_id().parse().unwrap();
        assert!((10..18).contains(&root));
    }
    // split descendants stay in the shard that produced them
    assert!(records.len() >= 8);
    std::fs::remove_dir_all(&out).ok();
}

#[test]
fn dump_tubes_writes_sidecar_when_requested() {
    let out = std::env::temp_dir().join(format!("reachloop-batch-tubes-{}", std::process::id()));
    let mut config = config_for(&out, Some((0, 2)));
    config.dump_tubes = true;
    run_batch(&config).unwrap();
    let tubes = std::fs::read_to_string(out.join("tubes.jsonl")).unwrap();
    assert!(!tubes.trim().is_empty());
    let first: serde_json::Value = serde_json::from_str(tubes.lines().next().unwrap()).unwrap();
    assert!(first.get("cell_id").is_some());
    assert!(first.get("step").is_some());
    assert!(first.get("box").is_some());
    std::fs::remove_dir_all(&out).ok();
}

/// A drift plant under an identity controller, written from scratch into a
/// temp dir: cells on the +x side of the circle leave the sensor range and
/// terminate, cells on the -x side drift inward without ever nearing the
/// collision disc within the horizon.
#[test]
fn linear_plant_scenario_end_to_end() {
    let dir = std::env::temp_dir().join(format!("reachloop-linear-{}", std::process::id()));
    let nets = dir.join("networks");
    std::fs::create_dir_all(&nets).unwrap();
    // two advisory costs, the first always wins
    let net_text = "2\n5,1,2\n-1000000000,-1000000000,-1000000000,-1000000000,-1000000000\n\
         1000000000,1000000000,1000000000,1000000000,1000000000\n\
         0,0,0,0,0,0\n1,1,1,1,1,1\n0,0,0,0,0\n1\n0\n0\n-1\n1\n";
    std::fs::write(nets.join("hold.nnet"), net_text).unwrap();
    std::fs::write(nets.join("push.nnet"), net_text).unwrap();
    let zeros = vec![vec![0.0; 5]; 5];
    let scenario = serde_json::json!({
        "plant": {
            "kind": "linear-test",
            "a": zeros,
            "b": [[150.0], [0.0], [0.0], [0.0], [0.0]]
        },
        "period": 1.0,
        "horizon_steps": 20,
        "commands": [[1.0], [2.0]],
        "pre_post": "identity",
        "networks": ["hold.nnet", "push.nnet"],
        "collision_radius_ft": 500.0,
        "sensor_radius_ft": 8000.0,
        "partition": {
            "arc_count": 16,
            "heading_bin_count": 2,
            "own_speed_ftps": 700.0,
            "intruder_speed_ftps": 600.0,
            "initial_command": 0
        }
    });
    std::fs::write(
        dir.join("scenario.json"),
        serde_json::to_string_pretty(&scenario).unwrap(),
    )
    .unwrap();

    let config = RunConfig {
        scenario_path: dir.join("scenario.json"),
        networks_dir: nets,
        jobs: 2,
        solver: SolverParams::default(),
        max_split_depth: 2,
        out_dir: dir.join("out"),
        cell_range: None,
        dump_tubes: false,
    };
    let summary = run_batch(&config).unwrap();
    assert_eq!(summary.k0, 32);
    assert_eq!(summary.cells, 32, "pure drift should not need refinement");
    assert!(summary.verdicts.contains_key("safe-terminated"));
    assert!(summary.verdicts.contains_key("safe-horizon"));
    assert!(
        !summary
            .verdicts
            .contains_key("indeterminate-unsafe-intersection")
    );
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn binary_end_to_end() {
    let out = std::env::temp_dir().join(format!("reachloop-bin-e2e-{}", std::process::id()));
    let dir = benchmark_dir();
    let status = Command::new(env!("CARGO_BIN_EXE_reachloop"))
        .args([
            "verify",
            "--config",
            dir.join("scenario.json").to_str().unwrap(),
            "--networks",
            dir.join("networks").to_str().unwrap(),
            "--jobs",
            "2",
            "--cells",
            "0..4",
            "--out",
            out.to_str().unwrap(),
        ])
        .status()
        .expect("binary runs");
    assert!(status.success());

    let report_out = out.join("report");
    let status = Command::new(env!("CARGO_BIN_EXE_reachloop"))
        .args([
            "report",
            "--records",
            out.join("records.jsonl").to_str().unwrap(),
            "--bin-arc-ft",
            "500",
            "--out",
            report_out.to_str().unwrap(),
        ])
        .status()
        .expect("binary runs");
    assert!(status.success());
    assert!(report_out.join("coverage_by_arc.csv").exists());
    assert!(report_out.join("cell_map.csv").exists());
    std::fs::remove_dir_all(&out).ok();
}
