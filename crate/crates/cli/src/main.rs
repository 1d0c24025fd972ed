use clap::{Args, Parser, Subcommand};
use reachloop_cli::batch::{RunConfig, run_batch};
use reachloop_cli::config::SolverParams;
use reachloop_cli::report::emit_report;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "reachloop",
    about = "Reachability-based safety verification of neural-network controlled closed loops",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Verify every cell of the scenario's initial partition.
    Verify(VerifyArgs),
    /// Aggregate a record stream into CSV report tables.
    Report(ReportArgs),
}

#[derive(Args)]
struct VerifyArgs {
    /// Scenario configuration file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Directory holding the network files named in the scenario.
    #[arg(long)]
    networks: PathBuf,
    /// Worker thread count.
    #[arg(long, default_value_t = default_jobs())]
    jobs: usize,
    /// Integration steps per controller period.
    #[arg(long, default_value_t = 10)]
    steps: usize,
    /// Symbolic-set cardinality cap (defaults to the command count).
    #[arg(long)]
    gamma: Option<usize>,
    /// Taylor order of the validated integrator (1..=6).
    #[arg(long, default_value_t = 4)]
    order: usize,
    /// Maximum split-refinement depth for indeterminate cells.
    #[arg(long, default_value_t = 2)]
    max_split_depth: usize,
    /// Output directory for records.jsonl and summary.json.
    #[arg(long)]
    out: PathBuf,
    /// Half-open range A..B of depth-0 cell indices to verify.
    #[arg(long, value_parser = parse_range)]
    cells: Option<(usize, usize)>,
    /// Also dump per-step reachtube boxes to tubes.jsonl.
    #[arg(long)]
    dump_tubes: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// records.jsonl produced by `verify`.
    #[arg(long)]
    records: PathBuf,
    /// Arc length of one report bin along the initial circle, in feet.
    #[arg(long, default_value_t = 500.0)]
    bin_arc_ft: f64,
    /// Output directory for the CSV tables.
    #[arg(long)]
    out: PathBuf,
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| format!("expected A..B, got {s:?}"))?;
    let lo = a.parse().map_err(|e| format!("bad range start: {e}"))?;
    let hi = b.parse().map_err(|e| format!("bad range end: {e}"))?;
    if lo > hi {
        return Err(format!("inverted range {lo}..{hi}"));
    }
    Ok((lo, hi))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Verify(args) => {
            let config = RunConfig {
                scenario_path: args.config,
                networks_dir: args.networks,
                jobs: args.jobs.max(1),
                solver: SolverParams {
                    integration_steps: args.steps,
                    gamma: args.gamma,
                    taylor_order: args.order,
                },
                max_split_depth: args.max_split_depth,
                out_dir: args.out,
                cell_range: args.cells,
                dump_tubes: args.dump_tubes,
            };
            run_batch(&config)
                .map(|summary| serde_json::to_string_pretty(&summary).expect("summary serializes"))
                .map_err(|e| e.to_string())
        }
        Command::Report(args) => emit_report(&args.records, args.bin_arc_ft, &args.out)
            .map(|tables| {
                format!(
                    "wrote coverage_by_arc.csv ({} bins) and cell_map.csv ({} rows)",
                    tables.bins.len(),
                    tables.cell_rows
                )
            })
            .map_err(|e| e.to_string()),
    };
    match outcome {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
