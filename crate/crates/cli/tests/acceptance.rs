//! Batch-level acceptance: the closed-loop soundness suite over the
//! desk-scale encounter benchmark and the batch determinism contract.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use reachloop::closedloop::verify;
use reachloop::{ScenarioSpec, SymbolicState, Verdict};
use reachloop_cli::batch::{RunConfig, coverage_from_lines, read_records, run_batch, verdict_map};
use reachloop_cli::config::{SolverParams, load_scenario};
use reachloop_cli::report::{emit_report, root_angle};
use std::path::{Path, PathBuf};
use std::time::Instant;

fn benchmark_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../benchmarks/acas-desk")
}

fn desk_scenario() -> (ScenarioSpec, Vec<SymbolicState>) {
    let dir = benchmark_dir();
    let (spec, partition) = load_scenario(
        &dir.join("scenario.json"),
        &dir.join("networks"),
        SolverParams {
            integration_steps: 10,
            gamma: Some(5),
            taylor_order: 4,
        },
    )
    .expect("benchmark scenario loads");
    let cells = reachloop::partition::build_initial_partition(&partition).unwrap();
    (spec, cells)
}

fn pass(criterion: usize, name: &str, start: Instant, budget_ms: f64) {
    let ms = start.elapsed().as_secs_f64() * 1e3;
    println!("ACCEPTANCE {criterion} ({name}): PASS in {ms:.3} ms (budget {budget_ms} ms)");
    assert!(
        ms < budget_ms,
        "criterion {criterion} exceeded its runtime budget: {ms:.3} ms >= {budget_ms} ms"
    );
}

/// Closed-form flow of the encounter kinematics under a constant turn-rate
/// command, exact up to f64 rounding.
fn flow(s: &[f64; 5], u_deg: f64, t: f64) -> [f64; 5] {
    let (x0, y0, psi0, vo, vi) = (s[0], s[1], s[2], s[3], s[4]);
    let omega = -u_deg.to_radians();
    if omega == 0.0 {
        return [
            x0 - vi * psi0.sin() * t,
            y0 + (vi * psi0.cos() - vo) * t,
            psi0,
            vo,
            vi,
        ];
    }
    let psi_t = psi0 + omega * t;
    [
        x0 - vi * (psi0.cos() - psi_t.cos()) / omega,
        y0 + vi * (psi_t.sin() - psi0.sin()) / omega - vo * t,
        psi_t,
        vo,
        vi,
    ]
}

#[test]
fn criterion_4_closed_loop_soundness() {
    let start = Instant::now();
    let (spec, cells) = desk_scenario();
    let mut rng = StdRng::seed_from_u64(0xc4);
    let mut picked: Vec<SymbolicState> = Vec::new();
    while picked.len() < 20 {
        let cell = &cells[rng.gen_range(0..cells.len())];
        picked.push(cell.clone());
    }

    // 20 cells in chunks of 8 workers, 1000 concrete simulations each
    let mut violations = 0usize;
    for (chunk_no, chunk) in picked.chunks(8).enumerate() {
        violations += std::thread::scope(|scope| {
            let spec = &spec;
            let handles: Vec<_> = chunk
                .iter()
                .enumerate()
                .map(|(i, cell)| {
                    let idx = chunk_no * 8 + i;
                    scope.spawn(move || {
                        let result = verify(spec, cell, 0);
                        let mut rng = StdRng::seed_from_u64(0x51d + idx as u64);
                        let mut escaped = 0usize;
                        for _ in 0..1000 {
                            let p: Vec<f64> = cell
                                .region
                                .dims()
                                .iter()
                                .map(|iv| {
                                    if iv.width() == 0.0 {
                                        iv.lo()
                                    } else {
                                        rng.gen_range(iv.lo()..=iv.hi())
                                    }
                                })
                                .collect();
                            let mut s = [p[0], p[1], p[2], p[3], p[4]];
                            let mut cmd = cell.command;
                            'sim: for step in 0..result.reachtube.len() {
                                // terminated trajectories stop being tracked
                                if s[0].hypot(s[1]) > spec.sensor_radius {
                                    break;
                                }
                                let u = spec.controller.commands.get(cmd)[0];
                                // sample the period densely against the step tube
                                for k in 0..20 {
                                    let t = spec.controller.period * k as f64 / 20.0;
                                    let at = flow(&s, u, t);
                                    if at[0].hypot(at[1]) > spec.sensor_radius {
                                        break 'sim;
                                    }
                                    // corollary of a safe verdict: no concrete
                                    // run may touch the collision disc
                                    if result.verdict == Verdict::SafeTerminated {
                                        assert!(
                                            at[0].hypot(at[1]) >= spec.collision_radius,
                                            "safe-terminated cell produced a colliding trajectory"
                                        );
                                    }
                                    let covered = result.reachtube[step].iter().any(|tube| {
                                        tube.command == cmd && tube.region.contains_point(&at)
                                    });
                                    if !covered {
                                        escaped += 1;
                                        break 'sim;
                                    }
                                }
                                let next_cmd = spec
                                    .controller
                                    .step_concrete(&s, cmd)
                                    .expect("concrete controller step");
                                s = flow(&s, u, spec.controller.period);
                                cmd = next_cmd;
                            }
                        }
                        escaped
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap())
                .sum::<usize>()
        });
    }
    assert_eq!(
        violations, 0,
        "concrete trajectories escaped the reachtubes"
    );
    pass(4, "closed-loop soundness 20x1000", start, 600_000.0);
}

#[test]
fn criterion_7_batch_determinism_and_report_recompute() {
    let start = Instant::now();
    let dir = benchmark_dir();
    let base = std::env::temp_dir().join(format!("reachloop-acc7-{}", std::process::id()));

    let mut maps = Vec::new();
    let mut summaries = Vec::new();
    for jobs in [1usize, 4, 8] {
        let out_dir = base.join(format!("jobs{jobs}"));
        let config = RunConfig {
            scenario_path: dir.join("scenario.json"),
            networks_dir: dir.join("networks"),
            jobs,
            solver: SolverParams {
                integration_steps: 10,
                gamma: Some(5),
                taylor_order: 4,
            },
            max_split_depth: 2,
            out_dir: out_dir.clone(),
            cell_range: None,
            dump_tubes: false,
        };
        let summary = run_batch(&config).expect("batch runs");
        let records = read_records(&out_dir.join("records.jsonl")).unwrap();
        assert_eq!(records.len(), summary.cells);
        maps.push(verdict_map(&records));
        summaries.push((summary, records));
    }
    assert_eq!(maps[0], maps[1], "jobs=1 and jobs=4 disagree");
    assert_eq!(maps[0], maps[2], "jobs=1 and jobs=8 disagree");

    let (summary, records) = &summaries[2];
    // every cell exactly once, split lineage intact
    let mut ids = std::collections::HashSet::new();
    for rec in records {
        assert!(
            ids.insert(rec.cell_id.clone()),
            "cell {} recorded twice",
            rec.cell_id
        );
    }
    for rec in records {
        if let Some(pid) = &rec.parent_id {
            assert!(
                ids.contains(pid),
                "cell {} lacks its parent {pid}",
                rec.cell_id
            );
        }
    }

    // summary coverage equals an independent recomputation from the stream
    let recomputed = coverage_from_lines(records, summary.k0).unwrap();
    let reported = summary.coverage_pct.unwrap();
    assert!(
        (recomputed - reported).abs() < 1e-9,
        "summary coverage {reported} != recomputed {recomputed}"
    );

    // report CSV equals an independent per-bin recomputation
    let out_dir = base.join("jobs8");
    let tables = emit_report(&out_dir.join("records.jsonl"), 500.0, &out_dir).unwrap();
    let csv = std::fs::read_to_string(out_dir.join("coverage_by_arc.csv")).unwrap();
    let mut csv_rows = Vec::new();
    for line in csv.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        csv_rows.push((
            cols[0].parse::<usize>().unwrap(),
            cols[2].parse::<f64>().unwrap(),
            cols[3].parse::<f64>().unwrap(),
        ));
    }
    // oracle recomputation from the raw records
    let roots: Vec<_> = records.iter().filter(|r| r.parent_id.is_none()).collect();
    let radius = {
        let mut rs: Vec<f64> = roots
            .iter()
            .map(|r| {
                let c = r.center();
                c[0].hypot(c[1])
            })
            .collect();
        rs.sort_by(f64::total_cmp);
        rs[rs.len() / 2]
    };
    let bin_of = |cx: f64, cy: f64| -> usize {
        let total = (std::f64::consts::TAU * radius / 500.0).ceil() as usize;
        ((root_angle(cx, cy) * radius / 500.0) as usize).min(total - 1)
    };
    let mut expected: std::collections::BTreeMap<usize, (usize, f64, f64)> =
        std::collections::BTreeMap::new();
    let root_bin: std::collections::HashMap<&str, usize> = roots
        .iter()
        .map(|r| {
            let c = r.center();
            (r.cell_id.as_str(), bin_of(c[0], c[1]))
        })
        .collect();
    for r in &roots {
        expected.entry(root_bin[r.cell_id.as_str()]).or_default().0 += 1;
    }
    for rec in records {
        let bin = root_bin[rec.root_id()];
        let entry = expected.entry(bin).or_default();
        entry.2 += rec.wall_ms;
        if Verdict::from_name(&rec.verdict) == Some(Verdict::SafeTerminated) {
            entry.1 += 1.0 / 8f64.powi(rec.depth as i32);
        }
    }
    assert_eq!(csv_rows.len(), expected.len());
    assert_eq!(tables.bins.len(), expected.len());
    for (bin_index, coverage_pct, wall_total) in csv_rows {
        let (k0, safe_weight, wall) = expected[&bin_index];
        let want = 100.0 / k0 as f64 * safe_weight;
        assert!(
            (coverage_pct - want).abs() < 1e-9,
            "bin {bin_index}: csv coverage {coverage_pct} != recomputed {want}"
        );
        assert!(
            (wall_total - wall).abs() < 1e-6,
            "bin {bin_index}: csv wall time {wall_total} != recomputed {wall}"
        );
    }

    std::fs::remove_dir_all(&base).ok();
    pass(
        7,
        "batch determinism and report recompute",
        start,
        900_000.0,
    );
}
