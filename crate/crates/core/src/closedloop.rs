//! Symbolic states and sets, the per-period reachability step, the
//! cardinality-capping resize heuristic, and the overall verification loop
//! with termination pruning, erroneous-set checks and split refinement.

use crate::controller::{ControllerError, ControllerSpec};
use crate::interval::IntervalBox;
use crate::odesim::{OdeError, PlantModel, simulate};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClosedLoopError {
    #[error("symbolic states carry different commands ({0} vs {1})")]
    CommandMismatch(usize, usize),
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Controller(#[from] ControllerError),
}

/// A box of plant states paired with one actuation command index; represents
/// every concrete state `(s, u)` with `s` in the box.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolicState {
    pub region: IntervalBox,
    pub command: usize,
}

impl SymbolicState {
    pub fn new(region: IntervalBox, command: usize) -> Self {
        SymbolicState { region, command }
    }
}

/// Squared euclidean distance between the box centers; defined only between
/// states carrying the same command. The squared form keeps the closest-pair
/// argmin unchanged and skips the root.
pub fn distance(a: &SymbolicState, b: &SymbolicState) -> Result<f64, ClosedLoopError> {
    if a.command != b.command {
        return Err(ClosedLoopError::CommandMismatch(a.command, b.command));
    }
    let ca = a.region.center();
    let cb = b.region.center();
    Ok(ca.iter().zip(&cb).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// Hull of the two regions under a shared command.
pub fn join(a: &SymbolicState, b: &SymbolicState) -> Result<SymbolicState, ClosedLoopError> {
    if a.command != b.command {
        return Err(ClosedLoopError::CommandMismatch(a.command, b.command));
    }
    Ok(SymbolicState {
        region: a
            .region
            .hull(&b.region)
            .expect("states share the plant dimension"),
        command: a.command,
    })
}

/// Cap the set size at `gamma` by repeatedly joining the globally closest
/// same-command pair. Sets already within the bound come back untouched; the
/// output always represents a superset of the input union.
pub fn resize(mut states: Vec<SymbolicState>, gamma: usize) -> Vec<SymbolicState> {
    while states.len() > gamma {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..states.len() {
            for j in i + 1..states.len() {
                if states[i].command != states[j].command {
                    continue;
                }
                let d = distance(&states[i], &states[j]).expect("same command");
                if best.is_none_or(|(_, _, bd)| d < bd) {
                    best = Some((i, j, d));
                }
            }
        }
        let Some((i, j, _)) = best else {
            break; // one state per command left; only possible when gamma < P
        };
        let joined = join(&states[i], &states[j]).expect("same command");
        states.swap_remove(j); // j > i, so i stays valid
        states[i] = joined;
    }
    states
}

/// Outcome of one cell verification.
///
/// Variants are ordered by severity; combining split children takes the
/// maximum, so a parent is safe exactly when every child is.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Verdict {
    /// Every propagated state reached the target set with no erroneous
    /// intersection along the way: safe until termination.
    SafeTerminated,
    /// No erroneous intersection within the horizon, but termination was not
    /// established for every state.
    SafeHorizon,
    /// Integration failed to produce an enclosure; nothing is claimed.
    IndeterminateEnclosureFailure,
    /// Some over-approximated set touched the erroneous set; nothing is
    /// claimed (the over-approximation may be at fault).
    IndeterminateUnsafeIntersection,
}

impl Verdict {
    pub fn is_safe_terminated(&self) -> bool {
        matches!(self, Verdict::SafeTerminated)
    }

    pub fn is_indeterminate(&self) -> bool {
        matches!(
            self,
            Verdict::IndeterminateEnclosureFailure | Verdict::IndeterminateUnsafeIntersection
        )
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::SafeTerminated => "safe-terminated",
            Verdict::SafeHorizon => "safe-horizon",
            Verdict::IndeterminateUnsafeIntersection => "indeterminate-unsafe-intersection",
            Verdict::IndeterminateEnclosureFailure => "indeterminate-enclosure-failure",
        }
    }

    pub fn from_name(s: &str) -> Option<Verdict> {
        Some(match s {
            "safe-terminated" => Verdict::SafeTerminated,
            "safe-horizon" => Verdict::SafeHorizon,
            "indeterminate-unsafe-intersection" => Verdict::IndeterminateUnsafeIntersection,
            "indeterminate-enclosure-failure" => Verdict::IndeterminateEnclosureFailure,
            _ => return None,
        })
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A complete verification problem instance.
#[derive(Clone, Debug)]
pub struct ScenarioSpec {
    pub plant: PlantModel,
    pub controller: ControllerSpec,
    /// Number of controller periods in the horizon (`tau = horizon_steps * period`).
    pub horizon_steps: usize,
    /// Integration sub-steps per controller period.
    pub integration_steps: usize,
    /// Taylor order of the validated integrator.
    pub taylor_order: usize,
    /// Cap on the symbolic set cardinality; must be at least the command count.
    pub resize_threshold: usize,
    /// Radius of the erroneous set `E = { |pos| < collision_radius }`.
    pub collision_radius: f64,
    /// Radius of the target set `T = { |pos| > sensor_radius }`.
    pub sensor_radius: f64,
    /// State dimensions that make up the radial position (defaults to x, y).
    pub radial_dims: Vec<usize>,
    /// Initial-box dimensions bisected by split refinement.
    pub split_dims: Vec<usize>,
}

impl ScenarioSpec {
    /// Conservative test for `state ∩ E != ∅`: fires whenever the minimal
    /// radial distance of the box could be below the collision radius.
    pub fn intersects_erroneous(&self, region: &IntervalBox) -> bool {
        let r2 = sq_upper(self.collision_radius);
        region.min_sq_norm_lower(&self.radial_dims) < r2
    }

    /// Certain test for `state ⊂ T`: true only when every point of the box
    /// is strictly beyond the sensor radius.
    pub fn inside_target(&self, region: &IntervalBox) -> bool {
        let r2 = sq_upper(self.sensor_radius);
        region.min_sq_norm_lower(&self.radial_dims) > r2
    }
}

fn sq_upper(r: f64) -> f64 {
    let p = r * r;
    if r.mul_add(r, -p) > 0.0 {
        p.next_up()
    } else {
        p
    }
}

/// Reachtube and verdict for one initial cell.
#[derive(Clone, Debug)]
pub struct ReachResult {
    pub verdict: Verdict,
    /// Index of the last controller step reached (the step at which the
    /// verdict was decided).
    pub j_end: usize,
    /// One tube state per propagated symbolic state per step: entry `j`
    /// covers the time interval `[jT, (j+1)T[`.
    pub reachtube: Vec<Vec<SymbolicState>>,
    /// The symbolic set at `t = j_end * T` when propagation stopped.
    pub final_set: Vec<SymbolicState>,
    pub stats: ReachStats,
}

#[derive(Clone, Debug, Default)]
pub struct ReachStats {
    pub wall_ms: f64,
    pub peak_states: usize,
}

/// One reachability step from a single symbolic state: the tube covering the
/// next controller period and the successor states at its end.
///
/// The caller is responsible for pruning target states and checking the
/// erroneous set before and after.
pub fn step_reach(
    spec: &ScenarioSpec,
    state: &SymbolicState,
) -> Result<(SymbolicState, Vec<SymbolicState>), ClosedLoopError> {
    let u = spec.controller.commands.get(state.command);
    let (tubes, end) = simulate(
        &spec.plant,
        &state.region,
        u,
        spec.controller.period,
        spec.integration_steps,
        spec.taylor_order,
    )?;
    let mut tube = tubes[0].clone();
    for t in &tubes[1..] {
        tube = tube.hull(t).expect("tubes share the plant dimension");
    }
    let commands = spec
        .controller
        .step_abstract(&state.region, state.command)?;
    let mut successors: Vec<SymbolicState> = Vec::with_capacity(commands.len());
    for c in commands {
        let s = SymbolicState::new(end.clone(), c);
        if !successors.contains(&s) {
            successors.push(s);
        }
    }
    Ok((SymbolicState::new(tube, state.command), successors))
}

/// Run the reachability loop from one initial symbolic state.
///
/// Per step: prune states inside the target set (terminated), flag any state
/// or tube touching the erroneous set, otherwise propagate through plant and
/// controller; resize keeps the set within the threshold. On an
/// indeterminate verdict with split budget left, the initial box is bisected
/// along the configured dimensions and the children are verified recursively
/// (safe only if all children are safe).
pub fn verify(spec: &ScenarioSpec, initial: &SymbolicState, split_budget: usize) -> ReachResult {
    assert!(
        spec.resize_threshold >= spec.controller.commands.len(),
        "resize threshold below command count"
    );
    let start = Instant::now();
    let mut result = verify_single(spec, initial);
    if result.verdict.is_indeterminate() && split_budget > 0 {
        let children = split_region(&initial.region, &spec.split_dims);
        let mut worst = Verdict::SafeTerminated;
        let mut j_end = 0;
        let mut peak = result.stats.peak_states;
        for child_region in children {
            let child = SymbolicState::new(child_region, initial.command);
            let r = verify(spec, &child, split_budget - 1);
            worst = worst.max(r.verdict);
            j_end = j_end.max(r.j_end);
            peak = peak.max(r.stats.peak_states);
        }
        // per-child reachtubes are not merged into the parent result
        result = ReachResult {
            verdict: worst,
            j_end,
            reachtube: Vec::new(),
            final_set: Vec::new(),
            stats: ReachStats {
                wall_ms: 0.0,
                peak_states: peak,
            },
        };
    }
    result.stats.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    result
}

/// Bisect a box along each listed dimension, yielding `2^n` children.
pub fn split_region(region: &IntervalBox, dims: &[usize]) -> Vec<IntervalBox> {
    let mut out = vec![region.clone()];
    for &d in dims {
        let mut next = Vec::with_capacity(out.len() * 2);
        for b in out {
            let (l, r) = b.bisect(d);
            next.push(l);
            next.push(r);
        }
        out = next;
    }
    out
}

fn verify_single(spec: &ScenarioSpec, initial: &SymbolicState) -> ReachResult {
    let start = Instant::now();
    let mut current = vec![initial.clone()];
    let mut reachtube: Vec<Vec<SymbolicState>> = Vec::new();
    let mut peak = 1;
    let mut verdict = Verdict::SafeHorizon;
    let mut j_end = spec.horizon_steps;

    'steps: for j in 0..spec.horizon_steps {
        peak = peak.max(current.len());
        if current.iter().all(|s| spec.inside_target(&s.region)) {
            verdict = Verdict::SafeTerminated;
            j_end = j;
            break;
        }
        current = resize(current, spec.resize_threshold);
        let mut next: Vec<SymbolicState> = Vec::new();
        let mut tubes: Vec<SymbolicState> = Vec::new();
        for state in &current {
            if spec.inside_target(&state.region) {
                continue; // terminated; not propagated further
            }
            if spec.intersects_erroneous(&state.region) {
                verdict = Verdict::IndeterminateUnsafeIntersection;
                j_end = j;
                break 'steps;
            }
            match step_reach(spec, state) {
                Ok((tube, successors)) => {
                    if spec.intersects_erroneous(&tube.region) {
                        verdict = Verdict::IndeterminateUnsafeIntersection;
                        j_end = j;
                        break 'steps;
                    }
                    tubes.push(tube);
                    for s in successors {
                        if !next.contains(&s) {
                            next.push(s);
                        }
                    }
                }
                Err(_) => {
                    verdict = Verdict::IndeterminateEnclosureFailure;
                    j_end = j;
                    break 'steps;
                }
            }
        }
        reachtube.push(tubes);
        peak = peak.max(next.len());
        current = next;
    }

    if verdict == Verdict::SafeHorizon && current.iter().all(|s| spec.inside_target(&s.region)) {
        // the horizon ended exactly when every remaining state terminated
        verdict = Verdict::SafeTerminated;
    }

    ReachResult {
        verdict,
        j_end,
        reachtube,
        final_set: current,
        stats: ReachStats {
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            peak_states: peak,
        },
    }
}
