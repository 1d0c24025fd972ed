//! Initial-set construction over the ribbon-shaped manifold of encounter
//! starts (positions on the sensor circle, headings in the inward cone),
//! split-refinement bookkeeping, and the coverage metric.

use crate::closedloop::{SymbolicState, Verdict, split_region};
use crate::interval::{Interval, IntervalBox};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PartitionError {
    #[error("invalid partition parameters: {0}")]
    Params(String),
    #[error("split depth {0} already at the maximum")]
    DepthExceeded(usize),
    #[error("inconsistent cell records: {0}")]
    Inconsistent(String),
}

/// Geometry of the initial manifold and its discretization.
///
/// The intruder starts somewhere on the circle of `sensor_radius`, heading
/// into it: at angular position `a` (measured so that the position is
/// `r (-sin a, cos a)`) the heading cone is `[a - pi/2 - span, a - pi/2]`.
/// The circle is cut into `arc_count` equal arcs and each arc's heading set
/// into `heading_bin_count` bins of equal width.
#[derive(Clone, Debug)]
pub struct PartitionParams {
    pub sensor_radius: f64,
    pub arc_count: usize,
    pub heading_bin_count: usize,
    /// Width of the inward heading cone at a fixed position (default pi).
    pub heading_cone_span: f64,
    pub own_speed: f64,
    pub intruder_speed: f64,
    /// Command index every initial cell starts from (clear-of-conflict).
    pub initial_command: usize,
}

impl PartitionParams {
    pub fn validate(&self) -> Result<(), PartitionError> {
        if self.arc_count == 0 || self.heading_bin_count == 0 {
            return Err(PartitionError::Params(
                "arc and heading bin counts must be positive".into(),
            ));
        }
        if self.sensor_radius.is_nan() || self.sensor_radius <= 0.0 {
            return Err(PartitionError::Params(
                "sensor radius must be positive".into(),
            ));
        }
        if self.heading_cone_span.is_nan() || self.heading_cone_span <= 0.0 {
            return Err(PartitionError::Params("cone span must be positive".into()));
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.arc_count * self.heading_bin_count
    }
}

/// The per-cell verification record used for coverage accounting and
/// reporting. Lineage ids are dotted paths: children of cell `17` are
/// `17.0` .. `17.7`.
#[derive(Clone, Debug)]
pub struct CellRecord {
    pub cell_id: String,
    pub parent_id: Option<String>,
    pub depth: usize,
    pub state: SymbolicState,
    pub verdict: Option<Verdict>,
    pub j_end: usize,
    pub wall_ms: f64,
}

impl CellRecord {
    pub fn root(cell_id: usize, state: SymbolicState) -> Self {
        CellRecord {
            cell_id: cell_id.to_string(),
            parent_id: None,
            depth: 0,
            state,
            verdict: None,
            j_end: 0,
            wall_ms: 0.0,
        }
    }

    /// The id of the depth-0 ancestor.
    pub fn root_id(&self) -> &str {
        self.cell_id.split('.').next().unwrap_or(&self.cell_id)
    }
}

/// Build the initial symbolic set: one state per (arc, heading bin) with the
/// position box bounding the arc, degenerate speed intervals and the initial
/// command. The union of the emitted boxes covers the whole manifold.
pub fn build_initial_partition(
    params: &PartitionParams,
) -> Result<Vec<SymbolicState>, PartitionError> {
    params.validate()?;
    let n = params.arc_count;
    let bins = params.heading_bin_count;
    let r = params.sensor_radius;
    let tau = std::f64::consts::TAU;
    let mut cells = Vec::with_capacity(n * bins);
    for i in 0..n {
        // shared expressions at arc borders keep neighbors gap-free
        let a1 = tau * i as f64 / n as f64;
        let a2 = tau * (i + 1) as f64 / n as f64;
        let angle = Interval::new(a1, a2);
        // position on the circle: (x, y) = r (-sin a, cos a); the interval
        // kernel picks up interior extrema, so the box bounds the full arc
        let x = angle.sin().scale(r).neg();
        let y = angle.cos().scale(r);

        // heading cone swept along the arc: [a1 - pi/2 - span, a2 - pi/2],
        // outer edges padded outward to cover the real-valued cone
        let half_pi = std::f64::consts::FRAC_PI_2;
        let lo = (a1 - half_pi - params.heading_cone_span)
            .next_down()
            .next_down();
        let hi = (a2 - half_pi).next_up().next_up();
        let width = (hi - lo) / bins as f64;
        for b in 0..bins {
            let psi_lo = if b == 0 { lo } else { lo + width * b as f64 };
            let psi_hi = if b + 1 == bins {
                hi.max(lo + width * (b + 1) as f64)
            } else {
                lo + width * (b + 1) as f64
            };
            cells.push(SymbolicState::new(
                IntervalBox::new(vec![
                    x,
                    y,
                    Interval::new(psi_lo, psi_hi),
                    Interval::point(params.own_speed),
                    Interval::point(params.intruder_speed),
                ]),
                params.initial_command,
            ));
        }
    }
    Ok(cells)
}

/// Bisect a cell along the position and heading dimensions, producing the
/// 2^3 children with lineage ids and incremented depth.
pub fn split_cell(cell: &CellRecord, max_depth: usize) -> Result<Vec<CellRecord>, PartitionError> {
    if cell.depth >= max_depth {
        return Err(PartitionError::DepthExceeded(cell.depth));
    }
    let children = split_region(&cell.state.region, &[0, 1, 2]);
    Ok(children
        .into_iter()
        .enumerate()
        .map(|(i, region)| CellRecord {
            cell_id: format!("{}.{}", cell.cell_id, i),
            parent_id: Some(cell.cell_id.clone()),
            depth: cell.depth + 1,
            state: SymbolicState::new(region, cell.state.command),
            verdict: None,
            j_end: 0,
            wall_ms: 0.0,
        })
        .collect())
}

/// Coverage in percent: `100 / K0 * sum_d n_d / 8^d` where `n_d` counts the
/// cells proved safe-terminated at split depth `d`.
pub fn coverage(
    records: &[CellRecord],
    k0: usize,
    max_depth: usize,
) -> Result<f64, PartitionError> {
    if k0 == 0 {
        return Err(PartitionError::Inconsistent("no depth-0 cells".into()));
    }
    let mut seen = std::collections::HashSet::new();
    for rec in records {
        if !seen.insert(rec.cell_id.as_str()) {
            return Err(PartitionError::Inconsistent(format!(
                "duplicate cell id {}",
                rec.cell_id
            )));
        }
        if rec.depth > max_depth {
            return Err(PartitionError::Inconsistent(format!(
                "cell {} beyond the maximum depth",
                rec.cell_id
            )));
        }
        if rec.verdict.is_none() {
            return Err(PartitionError::Inconsistent(format!(
                "cell {} has no verdict",
                rec.cell_id
            )));
        }
    }
    // a safe parent must not also have recorded children
    let safe_ids: std::collections::HashSet<&str> = records
        .iter()
        .filter(|r| r.verdict == Some(Verdict::SafeTerminated))
        .map(|r| r.cell_id.as_str())
        .collect();
    for rec in records {
        if let Some(pid) = &rec.parent_id
            && safe_ids.contains(pid.as_str())
        {
            return Err(PartitionError::Inconsistent(format!(
                "cell {} descends from a cell already counted safe",
                rec.cell_id
            )));
        }
    }
    let mut total = 0.0;
    for rec in records {
        if rec.verdict == Some(Verdict::SafeTerminated) {
            total += 1.0 / 8f64.powi(rec.depth as i32);
        }
    }
    Ok(100.0 / k0 as f64 * total)
}
