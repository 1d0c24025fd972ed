//! Acceptance suite: one test per criterion, each asserting its numeric
//! tolerances and runtime budget and printing a PASS line when it holds.
//! The batch-level criteria live in the driver crate's acceptance suite.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use reachloop::ScenarioSpec;
use reachloop::closedloop::{self, SymbolicState, Verdict};
use reachloop::controller::{CommandSet, ControllerSpec, PrePostKind};
use reachloop::interval::{Interval, IntervalBox};
use reachloop::network::ReluNetwork;
use reachloop::odesim::{PlantModel, simulate};
use reachloop::partition::{self, CellRecord, PartitionParams};
use std::time::Instant;

fn pass(criterion: usize, name: &str, start: Instant, budget_ms: f64) {
    let ms = start.elapsed().as_secs_f64() * 1e3;
    println!("ACCEPTANCE {criterion} ({name}): PASS in {ms:.3} ms (budget {budget_ms} ms)");
    assert!(
        ms < budget_ms,
        "criterion {criterion} exceeded its runtime budget: {ms:.3} ms >= {budget_ms} ms"
    );
}

/// Worked-example network: sizes 2,2,1, W2 = [[-1,4],[3,-8]], B2 = [5,6],
/// W3 = [[-0.5,1]], B3 = [2], identity normalization.
fn worked_example_net() -> ReluNetwork {
    ReluNetwork::parse(
        "2\n2,2,1\n-1000000000,-1000000000\n1000000000,1000000000\n0,0,0\n1,1,1\n\
         -1,4\n3,-8\n5\n6\n-0.5,1\n2\n",
    )
    .unwrap()
}

#[test]
fn criterion_1_worked_network_golden() {
    let net = worked_example_net();
    let start = Instant::now();

    let y = net.eval_concrete(&[1.0, 2.0]).unwrap();
    assert_eq!(y, vec![-4.0], "concrete evaluation must be exactly -4");

    let point = IntervalBox::from_point(&[1.0, 2.0]);
    for out in [
        net.eval_interval_naive(&point).unwrap(),
        net.eval_symbolic(&point).unwrap(),
    ] {
        assert!(out.get(0).contains(-4.0));
        assert!(out.get(0).lo() >= (-4.0f64).next_down());
        assert!(out.get(0).hi() <= (-4.0f64).next_up());
    }
    pass(1, "worked-network golden", start, 1.0);
}

#[test]
fn criterion_2_validated_integrator_oracle() {
    let start = Instant::now();

    // s' = -s from 1 over one unit of time
    let linear = PlantModel::Linear {
        a: vec![vec![-1.0]],
        b: vec![vec![0.0]],
    };
    let s0 = IntervalBox::from_point(&[1.0]);
    let (_, end) = simulate(&linear, &s0, &[0.0], 1.0, 10, 4).unwrap();
    let exact = (-1.0f64).exp();
    assert!(end.get(0).contains(exact), "{end:?} misses e^-1");
    assert!(
        end.get(0).width() <= 1e-6,
        "width {} too wide",
        end.get(0).width()
    );

    // straight-line encounter: y shrinks at 100 ft/s
    let acas = PlantModel::AcasXu;
    let p0 = IntervalBox::from_point(&[0.0, 8000.0, 0.0, 700.0, 600.0]);
    let (_, end) = simulate(&acas, &p0, &[0.0], 1.0, 10, 4).unwrap();
    assert!(end.contains_point(&[0.0, 7900.0, 0.0, 700.0, 600.0]));

    // constant -3 deg/s turn against the closed-form solution
    let start_state = [0.0, 8000.0, 0.0, 700.0, 600.0];
    let (_, end) = simulate(
        &acas,
        &IntervalBox::from_point(&start_state),
        &[-3.0],
        1.0,
        10,
        4,
    )
    .unwrap();
    let omega = -(-3.0f64).to_radians(); // psi' = -u
    let psi_t = omega;
    let x = -600.0 * (1.0 - psi_t.cos()) / omega;
    let y = 8000.0 + 600.0 * psi_t.sin() / omega - 700.0;
    let closed_form = [x, y, psi_t, 700.0, 600.0];
    let tol = 1e-6;
    for (i, v) in closed_form.iter().enumerate() {
        assert!(
            end.get(i).lo() - tol <= *v && *v <= end.get(i).hi() + tol,
            "component {i}: {v} outside {:?} (tolerance {tol} ft)",
            end.get(i)
        );
    }
    pass(2, "validated-integrator oracle", start, 1_000.0);
}

fn random_net(r: &mut StdRng) -> ReluNetwork {
    let layers = r.gen_range(2..=4usize);
    let sizes: Vec<usize> = (0..layers).map(|_| r.gen_range(1..=8usize)).collect();
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for l in 0..layers - 1 {
        let (rows, cols) = (sizes[l + 1], sizes[l]);
        weights.push(
            (0..rows)
                .map(|_| (0..cols).map(|_| r.gen_range(-2.0..2.0)).collect())
                .collect(),
        );
        biases.push((0..rows).map(|_| r.gen_range(-1.0..1.0)).collect());
    }
    let m = sizes[0];
    ReluNetwork::new(
        sizes,
        weights,
        biases,
        vec![-1e9; m],
        vec![1e9; m],
        vec![0.0; m],
        vec![1.0; m],
        0.0,
        1.0,
    )
    .unwrap()
}

#[test]
fn criterion_3_abstract_transformer_soundness() {
    let start = Instant::now();
    let mut r = StdRng::seed_from_u64(0xc3);
    let mut violations = 0usize;
    let mut dominance_failures = 0usize;
    for _ in 0..20 {
        let net = random_net(&mut r);
        for _ in 0..50 {
            let b = IntervalBox::new(
                (0..net.input_dim())
                    .map(|_| {
                        let c: f64 = r.gen_range(-3.0..3.0);
                        let w: f64 = r.gen_range(0.001..2.0);
                        Interval::new(c - w / 2.0, c + w / 2.0)
                    })
                    .collect(),
            );
            let naive = net.eval_interval_naive(&b).unwrap();
            let sym = net.eval_symbolic(&b).unwrap();
            if !naive.contains_box(&sym) {
                dominance_failures += 1;
            }
            for _ in 0..1000 {
                let x: Vec<f64> = b
                    .dims()
                    .iter()
                    .map(|iv| r.gen_range(iv.lo()..=iv.hi()))
                    .collect();
                let y = net.eval_concrete(&x).unwrap();
                if !naive.contains_point(&y) || !sym.contains_point(&y) {
                    violations += 1;
                }
            }
        }
    }
    assert_eq!(violations, 0, "containment violations found");
    assert_eq!(dominance_failures, 0, "symbolic exceeded naive somewhere");
    pass(
        3,
        "abstract-transformer soundness 20x50x1000",
        start,
        30_000.0,
    );
}

#[test]
fn criterion_5_resize_contract() {
    let start = Instant::now();
    let mut r = StdRng::seed_from_u64(0xc5);
    for _ in 0..500 {
        let n = r.gen_range(1..14usize);
        let gamma = r.gen_range(5..=10usize);
        let states: Vec<SymbolicState> = (0..n)
            .map(|_| {
                let cx: f64 = r.gen_range(-30.0..30.0);
                let cy: f64 = r.gen_range(-30.0..30.0);
                SymbolicState::new(
                    IntervalBox::from_bounds(&[(cx - 0.5, cx + 0.5), (cy - 0.5, cy + 0.5)]),
                    r.gen_range(0..5usize),
                )
            })
            .collect();

        let out = closedloop::resize(states.clone(), gamma);
        assert!(out.len() <= gamma.max(5), "cardinality bound violated");
        if states.len() <= gamma {
            assert_eq!(out, states, "resize must be the identity below the cap");
            continue;
        }
        for s in &states {
            assert!(
                out.iter()
                    .any(|o| o.command == s.command && o.region.contains_box(&s.region)),
                "union containment violated"
            );
        }
        // first-join argmin invariance against exhaustive pair enumeration
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..states.len() {
            for j in i + 1..states.len() {
                if states[i].command != states[j].command {
                    continue;
                }
                let d = closedloop::distance(&states[i], &states[j]).unwrap();
                if best.is_none_or(|(_, _, bd)| d < bd) {
                    best = Some((i, j, d));
                }
            }
        }
        if let Some((_, _, dmin)) = best {
            let one = closedloop::resize(states.clone(), states.len() - 1);
            // the state introduced by the single join must be the hull of a
            // pair at the exhaustive minimal distance
            if let Some(new_state) = one.iter().find(|s| !states.contains(s)) {
                let mut matched = false;
                for a in 0..states.len() {
                    for b in a + 1..states.len() {
                        if states[a].command != states[b].command {
                            continue;
                        }
                        if closedloop::join(&states[a], &states[b]).unwrap() == *new_state
                            && closedloop::distance(&states[a], &states[b]).unwrap() == dmin
                        {
                            matched = true;
                        }
                    }
                }
                assert!(matched, "joined pair is not at the minimal distance");
            }
        }
    }
    pass(5, "resize contract", start, 5_000.0);
}

#[test]
fn criterion_6_coverage_formula_and_partition_size() {
    let start = Instant::now();

    let rec = |id: &str, depth: usize, verdict: Verdict| -> CellRecord {
        CellRecord {
            cell_id: id.to_string(),
            parent_id: if id.contains('.') {
                Some(id.rsplit_once('.').unwrap().0.to_string())
            } else {
                None
            },
            depth,
            state: SymbolicState::new(IntervalBox::from_point(&[0.0]), 0),
            verdict: Some(verdict),
            j_end: 0,
            wall_ms: 0.0,
        }
    };

    // all depth-0 cells safe
    let all: Vec<CellRecord> = (0..7)
        .map(|i| rec(&i.to_string(), 0, Verdict::SafeTerminated))
        .collect();
    assert_eq!(partition::coverage(&all, 7, 2).unwrap(), 100.0);

    // one cell split once, 4 of 8 children safe
    let mut half = vec![rec("0", 0, Verdict::IndeterminateUnsafeIntersection)];
    for i in 0..8 {
        let v = if i < 4 {
            Verdict::SafeTerminated
        } else {
            Verdict::SafeHorizon
        };
        half.push(rec(&format!("0.{i}"), 1, v));
    }
    assert_eq!(partition::coverage(&half, 1, 2).unwrap(), 50.0);

    // two cells: one safe at depth 0, one split twice with 32/64 safe
    let mut mixed = vec![
        rec("0", 0, Verdict::SafeTerminated),
        rec("1", 0, Verdict::SafeHorizon),
    ];
    for i in 0..8 {
        mixed.push(rec(&format!("1.{i}"), 1, Verdict::SafeHorizon));
        for j in 0..8 {
            let v = if (i + j) % 2 == 0 {
                Verdict::SafeTerminated
            } else {
                Verdict::SafeHorizon
            };
            mixed.push(rec(&format!("1.{i}.{j}"), 2, v));
        }
    }
    assert_eq!(partition::coverage(&mixed, 2, 2).unwrap(), 75.0);

    // the production-scale partition parameters
    let params = PartitionParams {
        sensor_radius: 8000.0,
        arc_count: 629,
        heading_bin_count: 316,
        heading_cone_span: std::f64::consts::PI,
        own_speed: 700.0,
        intruder_speed: 600.0,
        initial_command: 0,
    };
    let cells = partition::build_initial_partition(&params).unwrap();
    assert_eq!(cells.len(), 198_764);

    pass(6, "coverage formula and partition size", start, 1_000.0);
}

/// A 5-command encounter controller whose networks always prefer the command
/// they are keyed by; enough structure for verdict plumbing tests.
fn encounter_scenario() -> ScenarioSpec {
    let nets: Vec<ReluNetwork> = (0..5)
        .map(|i| {
            let b2: Vec<f64> = (0..5).map(|j| if j == i { -1.0 } else { 1.0 }).collect();
            ReluNetwork::new(
                vec![5, 1, 5],
                vec![vec![vec![0.0; 5]], (0..5).map(|_| vec![0.0]).collect()],
                vec![vec![1.0], b2],
                vec![-1e12; 5],
                vec![1e12; 5],
                vec![0.0; 5],
                vec![1.0; 5],
                0.0,
                1.0,
            )
            .unwrap()
        })
        .collect();
    let controller =
        ControllerSpec::new(CommandSet::acasxu(), nets, 1.0, PrePostKind::AcasXu).unwrap();
    ScenarioSpec {
        plant: PlantModel::AcasXu,
        controller,
        horizon_steps: 20,
        integration_steps: 10,
        taylor_order: 4,
        resize_threshold: 5,
        collision_radius: 500.0,
        sensor_radius: 8000.0,
        radial_dims: vec![0, 1],
        split_dims: vec![0, 1, 2],
    }
}

#[test]
fn criterion_8_known_verdicts_at_step_zero() {
    let start = Instant::now();
    let spec = encounter_scenario();

    // intruder already inside the collision circle
    let colliding = SymbolicState::new(
        IntervalBox::from_bounds(&[
            (100.0, 200.0),
            (100.0, 200.0),
            (3.0, 3.1),
            (700.0, 700.0),
            (600.0, 600.0),
        ]),
        0,
    );
    let r = closedloop::verify(&spec, &colliding, 0);
    assert_eq!(r.verdict, Verdict::IndeterminateUnsafeIntersection);
    assert_eq!(r.j_end, 0);

    // intruder already beyond the sensor range
    let outside = SymbolicState::new(
        IntervalBox::from_bounds(&[
            (0.0, 100.0),
            (8100.0, 8200.0),
            (0.0, 0.1),
            (700.0, 700.0),
            (600.0, 600.0),
        ]),
        0,
    );
    let r = closedloop::verify(&spec, &outside, 0);
    assert_eq!(r.verdict, Verdict::SafeTerminated);
    assert_eq!(r.j_end, 0);

    pass(8, "known verdicts at step zero", start, 1_000.0);
}
