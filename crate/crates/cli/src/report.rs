//! Turn a JSONL record stream into per-arc coverage/timing tables and a
//! cell-map table for plotting.
//!
//! Cells are binned by the circumferential position of their depth-0
//! ancestor: the ancestor's box center gives its angle on the initial
//! circle, and bins are `bin_arc_ft` long along the circumference. Split
//! descendants inherit the ancestor's bin, so bin coverage follows the same
//! weighting as the global figure.

use crate::batch::{BatchError, RecordLine, read_records};
use reachloop::Verdict;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

#[derive(Clone, Debug, PartialEq)]
pub struct BinRow {
    pub bin_index: usize,
    pub arc_mid_angle_rad: f64,
    pub coverage_pct: f64,
    pub wall_ms_total: f64,
}

#[derive(Clone, Debug)]
pub struct ReportTables {
    pub bins: Vec<BinRow>,
    pub cell_rows: usize,
}

/// Angle of a depth-0 cell on the initial circle, in `[0, 2*pi)`.
pub fn root_angle(center_x: f64, center_y: f64) -> f64 {
    (-center_x)
        .atan2(center_y)
        .rem_euclid(std::f64::consts::TAU)
}

/// Build the per-bin table from records already in memory.
pub fn bin_records(records: &[RecordLine], bin_arc_ft: f64) -> Result<Vec<BinRow>, BatchError> {
    assert!(bin_arc_ft > 0.0, "bin arc length must be positive");
    let roots: Vec<&RecordLine> = records.iter().filter(|r| r.parent_id.is_none()).collect();
    if roots.is_empty() {
        return Ok(Vec::new());
    }
    // radius of the initial circle, recovered from the root cells themselves
    let mut radii: Vec<f64> = roots
        .iter()
        .map(|r| {
            let c = r.center();
            c[0].hypot(c[1])
        })
        .collect();
    radii.sort_by(f64::total_cmp);
    let radius = radii[radii.len() / 2];
    let circumference = std::f64::consts::TAU * radius;
    let bin_count = (circumference / bin_arc_ft).ceil().max(1.0) as usize;

    let bin_of = |r: &RecordLine| -> usize {
        let c = r.center();
        let angle = root_angle(c[0], c[1]);
        (((angle * radius) / bin_arc_ft) as usize).min(bin_count - 1)
    };
    let mut root_bins: BTreeMap<&str, usize> = BTreeMap::new();
    let mut k0_per_bin = vec![0usize; bin_count];
    for r in &roots {
        let b = bin_of(r);
        root_bins.insert(r.cell_id.as_str(), b);
        k0_per_bin[b] += 1;
    }

    let mut safe_weight = vec![0.0f64; bin_count];
    let mut wall = vec![0.0f64; bin_count];
    for rec in records {
        let Some(&bin) = root_bins.get(rec.root_id()) else {
            return Err(BatchError::Partition(
                reachloop::partition::PartitionError::Inconsistent(format!(
                    "cell {} has no recorded depth-0 ancestor",
                    rec.cell_id
                )),
            ));
        };
        wall[bin] += rec.wall_ms;
        if Verdict::from_name(&rec.verdict) == Some(Verdict::SafeTerminated) {
            safe_weight[bin] += 1.0 / 8f64.powi(rec.depth as i32);
        }
    }

    Ok((0..bin_count)
        .filter(|&b| k0_per_bin[b] > 0)
        .map(|b| BinRow {
            bin_index: b,
            arc_mid_angle_rad: (b as f64 + 0.5) * bin_arc_ft / radius,
            coverage_pct: 100.0 / k0_per_bin[b] as f64 * safe_weight[b],
            wall_ms_total: wall[b],
        })
        .collect())
}

/// Read a record stream and write the two CSV tables into `out_dir`:
/// `coverage_by_arc.csv` and `cell_map.csv`.
pub fn emit_report(
    records_path: &Path,
    bin_arc_ft: f64,
    out_dir: &Path,
) -> Result<ReportTables, BatchError> {
    let records = read_records(records_path)?;
    let bins = bin_records(&records, bin_arc_ft)?;

    std::fs::create_dir_all(out_dir).map_err(|source| BatchError::Io {
        path: out_dir.display().to_string(),
        source,
    })?;
    let arc_path = out_dir.join("coverage_by_arc.csv");
    let mut out = std::io::BufWriter::new(std::fs::File::create(&arc_path).map_err(|source| {
        BatchError::Io {
            path: arc_path.display().to_string(),
            source,
        }
    })?);
    let io_err = |source: std::io::Error| BatchError::Io {
        path: arc_path.display().to_string(),
        source,
    };
    writeln!(
        out,
        "bin_index,arc_mid_angle_rad,coverage_pct,wall_ms_total"
    )
    .map_err(io_err)?;
    for row in &bins {
        writeln!(
            out,
            "{},{},{},{}",
            row.bin_index, row.arc_mid_angle_rad, row.coverage_pct, row.wall_ms_total
        )
        .map_err(io_err)?;
    }
    out.flush().map_err(io_err)?;

    let map_path = out_dir.join("cell_map.csv");
    let mut out = std::io::BufWriter::new(std::fs::File::create(&map_path).map_err(|source| {
        BatchError::Io {
            path: map_path.display().to_string(),
            source,
        }
    })?);
    let io_err = |source: std::io::Error| BatchError::Io {
        path: map_path.display().to_string(),
        source,
    };
    writeln!(out, "cell_id,x_lo,x_hi,y_lo,y_hi,psi_lo,psi_hi,verdict").map_err(io_err)?;
    for rec in &records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            rec.cell_id,
            rec.bounds[0][0],
            rec.bounds[0][1],
            rec.bounds[1][0],
            rec.bounds[1][1],
            rec.bounds[2][0],
            rec.bounds[2][1],
            rec.verdict
        )
        .map_err(io_err)?;
    }
    out.flush().map_err(io_err)?;

    Ok(ReportTables {
        bins,
        cell_rows: records.len(),
    })
}
