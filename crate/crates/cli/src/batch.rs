//! Parallel batch verification: a dynamic queue of initial cells worked by a
//! thread pool, JSONL result records streamed through a single writer, and a
//! run summary with coverage and timing percentiles.
//!
//! Workers that hit an indeterminate verdict below the split-depth limit
//! enqueue the 2^3 refined children themselves, so load stays balanced even
//! when cell difficulty varies by orders of magnitude.

use crate::config::{ConfigError, SolverParams, load_scenario};
use reachloop::closedloop::verify;
use reachloop::partition::{
    CellRecord, PartitionError, build_initial_partition, coverage, split_cell,
};
use reachloop::{ScenarioSpec, Verdict};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, VecDeque};
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::sync::mpsc;
use std::sync::{Arc, Condvar, Mutex};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BatchError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

/// Everything one batch run needs.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub scenario_path: PathBuf,
    pub networks_dir: PathBuf,
    pub jobs: usize,
    pub solver: SolverParams,
    pub max_split_depth: usize,
    pub out_dir: PathBuf,
    /// Half-open index range of depth-0 cells to verify (sharding).
    pub cell_range: Option<(usize, usize)>,
    pub dump_tubes: bool,
}

/// One line of the JSONL record stream.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RecordLine {
    pub cell_id: String,
    pub parent_id: Option<String>,
    pub depth: usize,
    pub verdict: String,
    pub j_end: usize,
    pub wall_ms: f64,
    pub command: usize,
    /// Per-dimension `[lo, hi]` bounds of the initial box.
    #[serde(rename = "box")]
    pub bounds: Vec<[f64; 2]>,
}

impl RecordLine {
    fn from_record(rec: &CellRecord) -> Self {
        RecordLine {
            cell_id: rec.cell_id.clone(),
            parent_id: rec.parent_id.clone(),
            depth: rec.depth,
            verdict: rec
                .verdict
                .expect("verdict filled by worker")
                .as_str()
                .to_string(),
            j_end: rec.j_end,
            wall_ms: rec.wall_ms,
            command: rec.state.command,
            bounds: rec
                .state
                .region
                .dims()
                .iter()
                .map(|iv| [iv.lo(), iv.hi()])
                .collect(),
        }
    }

    pub fn root_id(&self) -> &str {
        self.cell_id.split('.').next().unwrap_or(&self.cell_id)
    }

    pub fn center(&self) -> Vec<f64> {
        self.bounds.iter().map(|b| 0.5 * (b[0] + b[1])).collect()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct TubeLine {
    cell_id: String,
    step: usize,
    command: usize,
    #[serde(rename = "box")]
    bounds: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BatchSummary {
    /// All recorded cells, split descendants included.
    pub cells: usize,
    /// Depth-0 cells verified in this run.
    pub k0: usize,
    pub verdicts: BTreeMap<String, usize>,
    /// None when the run produced no records (empty cell range).
    pub coverage_pct: Option<f64>,
    pub total_wall_ms: f64,
    pub p50_cell_ms: f64,
    pub p90_cell_ms: f64,
    pub max_cell_ms: f64,
}

struct WorkState {
    queue: VecDeque<CellRecord>,
    in_flight: usize,
}

struct ResultMsg {
    record: CellRecord,
    tubes: Vec<TubeLine>,
}

/// Run every cell of the scenario's initial partition through the verifier.
///
/// Per-cell results are independent of worker count; only record order in
/// the output stream varies.
pub fn run_batch(config: &RunConfig) -> Result<BatchSummary, BatchError> {
    let (spec, partition) =
        load_scenario(&config.scenario_path, &config.networks_dir, config.solver)?;
    let cells = build_initial_partition(&partition)?;

    let mut roots: Vec<CellRecord> = cells
        .into_iter()
        .enumerate()
        .map(|(i, state)| CellRecord::root(i, state))
        .collect();
    if let Some((lo, hi)) = config.cell_range {
        roots.retain(|r| {
            let idx: usize = r.cell_id.parse().unwrap_or(usize::MAX);
            idx >= lo && idx < hi
        });
    }
    let k0 = roots.len();

    std::fs::create_dir_all(&config.out_dir).map_err(|source| BatchError::Io {
        path: config.out_dir.display().to_string(),
        source,
    })?;
    let records_path = config.out_dir.join("records.jsonl");
    let records_file = std::fs::File::create(&records_path).map_err(|source| BatchError::Io {
        path: records_path.display().to_string(),
        source,
    })?;
    let mut records_out = BufWriter::new(records_file);
    let mut tubes_out = if config.dump_tubes {
        let p = config.out_dir.join("tubes.jsonl");
        let f = std::fs::File::create(&p).map_err(|source| BatchError::Io {
            path: p.display().to_string(),
            source,
        })?;
        Some(BufWriter::new(f))
    } else {
        None
    };

    let records = run_cells(
        Arc::new(spec),
        roots,
        config.jobs,
        config.max_split_depth,
        config.dump_tubes,
        |msg| {
            // single-writer contract: only this closure touches the files
            let line = serde_json::to_string(&RecordLine::from_record(&msg.record))?;
            writeln!(records_out, "{line}").map_err(|source| BatchError::Io {
                path: records_path.display().to_string(),
                source,
            })?;
            if let Some(out) = tubes_out.as_mut() {
                for tube in &msg.tubes {
                    let line = serde_json::to_string(tube)?;
                    writeln!(out, "{line}").map_err(|source| BatchError::Io {
                        path: "tubes.jsonl".to_string(),
                        source,
                    })?;
                }
            }
            Ok(())
        },
    )?;
    records_out.flush().map_err(|source| BatchError::Io {
        path: records_path.display().to_string(),
        source,
    })?;
    if let Some(mut out) = tubes_out {
        out.flush().map_err(|source| BatchError::Io {
            path: "tubes.jsonl".to_string(),
            source,
        })?;
    }

    let summary = summarize(&records, k0, config.max_split_depth)?;
    let summary_path = config.out_dir.join("summary.json");
    std::fs::write(&summary_path, serde_json::to_string_pretty(&summary)?).map_err(|source| {
        BatchError::Io {
            path: summary_path.display().to_string(),
            source,
        }
    })?;
    Ok(summary)
}

/// Worker pool over a dynamic cell queue. Each verified record is handed to
/// `sink` on the calling thread; indeterminate cells below the depth limit
/// spawn their children into the queue.
fn run_cells(
    spec: Arc<ScenarioSpec>,
    roots: Vec<CellRecord>,
    jobs: usize,
    max_split_depth: usize,
    collect_tubes: bool,
    mut sink: impl FnMut(&ResultMsg) -> Result<(), BatchError>,
) -> Result<Vec<CellRecord>, BatchError> {
    assert!(jobs >= 1, "need at least one worker");
    let state = Arc::new((
        Mutex::new(WorkState {
            queue: roots.into(),
            in_flight: 0,
        }),
        Condvar::new(),
    ));
    let (tx, rx) = mpsc::channel::<ResultMsg>();

    std::thread::scope(|scope| -> Result<Vec<CellRecord>, BatchError> {
        for _ in 0..jobs {
            let state = Arc::clone(&state);
            let spec = Arc::clone(&spec);
            let tx = tx.clone();
            scope.spawn(move || {
                let (lock, cvar) = &*state;
                loop {
                    let task = {
                        let mut st = lock.lock().unwrap();
                        loop {
                            if let Some(task) = st.queue.pop_front() {
                                st.in_flight += 1;
                                break Some(task);
                            }
                            if st.in_flight == 0 {
                                break None;
                            }
                            st = cvar.wait(st).unwrap();
                        }
                    };
                    let Some(mut task) = task else {
                        cvar.notify_all();
                        return;
                    };

                    let result = verify(&spec, &task.state, 0);
                    task.verdict = Some(result.verdict);
                    task.j_end = result.j_end;
                    task.wall_ms = result.stats.wall_ms;

                    let children =
                        if result.verdict.is_indeterminate() && task.depth < max_split_depth {
                            split_cell(&task, max_split_depth).expect("depth checked")
                        } else {
                            Vec::new()
                        };

                    let mut tubes = Vec::new();
                    if collect_tubes {
                        for (step, states) in result.reachtube.iter().enumerate() {
                            for s in states {
                                tubes.push(TubeLine {
                                    cell_id: task.cell_id.clone(),
                                    step,
                                    command: s.command,
                                    bounds: s
                                        .region
                                        .dims()
                                        .iter()
                                        .map(|iv| [iv.lo(), iv.hi()])
                                        .collect(),
                                });
                            }
                        }
                    }

                    let _ = tx.send(ResultMsg {
                        record: task,
                        tubes,
                    });

                    let mut st = lock.lock().unwrap();
                    st.in_flight -= 1;
                    for child in children {
                        st.queue.push_back(child);
                    }
                    drop(st);
                    cvar.notify_all();
                }
            });
        }
        drop(tx);

        let mut records = Vec::new();
        for msg in rx {
            sink(&msg)?;
            records.push(msg.record);
        }
        Ok(records)
    })
}

fn summarize(
    records: &[CellRecord],
    k0: usize,
    max_split_depth: usize,
) -> Result<BatchSummary, BatchError> {
    let mut verdicts = BTreeMap::new();
    for rec in records {
        let name = rec.verdict.expect("verdict filled").as_str().to_string();
        *verdicts.entry(name).or_insert(0usize) += 1;
    }
    let coverage_pct = if records.is_empty() {
        None // coverage undefined without records
    } else {
        Some(coverage(records, k0, max_split_depth)?)
    };
    let mut times: Vec<f64> = records.iter().map(|r| r.wall_ms).collect();
    times.sort_by(f64::total_cmp);
    let pct = |p: f64| -> f64 {
        if times.is_empty() {
            0.0
        } else {
            times[((times.len() - 1) as f64 * p) as usize]
        }
    };
    Ok(BatchSummary {
        cells: records.len(),
        k0,
        verdicts,
        coverage_pct,
        total_wall_ms: times.iter().sum(),
        p50_cell_ms: pct(0.5),
        p90_cell_ms: pct(0.9),
        max_cell_ms: pct(1.0),
    })
}

/// Read a JSONL record stream back.
pub fn read_records(path: &std::path::Path) -> Result<Vec<RecordLine>, BatchError> {
    let text = std::fs::read_to_string(path).map_err(|source| BatchError::Io {
        path: path.display().to_string(),
        source,
    })?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(BatchError::Json))
        .collect()
}

/// Verdict histogram keyed by cell id, for determinism comparisons.
pub fn verdict_map(records: &[RecordLine]) -> BTreeMap<String, String> {
    records
        .iter()
        .map(|r| (r.cell_id.clone(), r.verdict.clone()))
        .collect()
}

/// Recompute the coverage figure directly from serialized records.
pub fn coverage_from_lines(records: &[RecordLine], k0: usize) -> Option<f64> {
    if records.is_empty() || k0 == 0 {
        return None;
    }
    let total: f64 = records
        .iter()
        .filter(|r| Verdict::from_name(&r.verdict) == Some(Verdict::SafeTerminated))
        .map(|r| 1.0 / 8f64.powi(r.depth as i32))
        .sum();
    Some(100.0 / k0 as f64 * total)
}
