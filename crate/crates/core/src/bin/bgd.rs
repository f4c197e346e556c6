//! Command line front end. Exit codes: 0 success, 2 invalid input or config,
//! 3 numeric failure, 1 other I/O errors.

use std::fs;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use bounded_gd::diagnostics::{self, InterpolatedTrajectory, WindowPartition};
use bounded_gd::engine::NormTrace;
use bounded_gd::harness::{self, parse_grid, parse_range, Experiment, SweepSpec};
use bounded_gd::{Error, Result, StepSchedule, Verdict};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bgd", version, about = "Gradient descent with bounded gradient errors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// SPSA sweep over the sensitivity c.
    Exp1(SweepArgs),
    /// Constant-error sweep over epsilon.
    Exp2(SweepArgs),
    /// One run with the full norm trace.
    Single(SingleArgs),
    /// Stability report for a saved n,t,norm record.
    Diagnose(DiagnoseArgs),
    /// Summability report for a step schedule.
    CheckSchedule(CheckArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// key=value config file; flags given on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    iters: Option<u64>,
    /// Eigenvalue range lo:hi of the random Q.
    #[arg(long)]
    spectrum: Option<String>,
    #[arg(long)]
    x0_radius: Option<f64>,
    #[arg(long)]
    martingale: Option<f64>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    runs: Option<usize>,
    /// start:end:step
    #[arg(long)]
    grid: Option<String>,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory receiving the Q matrix of every run.
    #[arg(long)]
    save_q: Option<PathBuf>,
}

#[derive(Args)]
struct SingleArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Oracle such as exact, constant:0.1, noise:0.1, spsa:1, newton:0.1, linear:1:0.1.
    #[arg(long)]
    oracle: Option<String>,
    /// Schedule such as harmonic:1, cyclic:800:100, constant:0.1.
    #[arg(long)]
    schedule: Option<String>,
    #[arg(long)]
    stride: Option<u64>,
    /// Record CSV (n,t,norm); stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// File receiving the final iterate.
    #[arg(long)]
    final_out: Option<PathBuf>,
    /// File receiving Q.
    #[arg(long)]
    save_q: Option<PathBuf>,
}

#[derive(Args)]
struct DiagnoseArgs {
    /// Record CSV written by `single`.
    #[arg(long)]
    record: PathBuf,
    #[arg(long, default_value_t = diagnostics::DEFAULT_WINDOW_LENGTH)]
    window: f64,
    /// Rescaling radius; defaults to 2 max(1, |x0|).
    #[arg(long)]
    a: Option<f64>,
    #[arg(long, default_value_t = diagnostics::DEFAULT_R_CHECK)]
    r_check: f64,
    #[arg(long, default_value_t = diagnostics::DEFAULT_CONTRACTION_THRESHOLD)]
    threshold: f64,
    /// Report CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    schedule: String,
    #[arg(long, default_value_t = 1_000_000)]
    horizon: u64,
}

fn load_spec(common: &CommonArgs, experiment: Experiment) -> Result<SweepSpec> {
    let mut spec = match &common.config {
        Some(path) => {
            let mut s = SweepSpec::from_config_text(&fs::read_to_string(path)?, experiment)?;
            s.experiment = experiment;
            s
        }
        None => SweepSpec::for_experiment(experiment),
    };
    if let Some(v) = common.seed {
        spec.master_seed = v;
    }
    if let Some(v) = common.dim {
        spec.dim = v;
    }
    if let Some(v) = common.iters {
        spec.iterations = v;
    }
    if let Some(v) = &common.spectrum {
        spec.spectrum = parse_range(v)?;
    }
    if let Some(v) = common.x0_radius {
        spec.x0_radius = v;
    }
    if let Some(v) = common.martingale {
        spec.martingale_bound = v;
    }
    Ok(spec)
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(fs::File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn sweep(args: SweepArgs, experiment: Experiment) -> Result<()> {
    let mut spec = load_spec(&args.common, experiment)?;
    if let Some(v) = args.runs {
        spec.runs_per_cell = v;
    }
    if let Some(g) = &args.grid {
        (spec.grid_start, spec.grid_end, spec.grid_step) = parse_grid(g)?;
    }
    if args.out.is_some() {
        spec.output_path = args.out;
    }
    if args.save_q.is_some() {
        spec.q_dir = args.save_q;
    }
    let cells = harness::run_grid(&spec)?;
    let mut out = output(&spec.output_path)?;
    harness::write_cells_csv(&cells, &mut out)?;
    out.flush()?;
    if cells.len() >= 3 {
        eprintln!("spearman(grid, mean_dist) = {:.4}", harness::summarize_trend(&cells)?);
    }
    Ok(())
}

fn single(args: SingleArgs) -> Result<()> {
    let mut spec = load_spec(&args.common, Experiment::Custom)?;
    if let Some(o) = &args.oracle {
        spec.oracle = o.parse()?;
    }
    if let Some(s) = &args.schedule {
        spec.schedule = s.parse()?;
    }
    spec.validate()?;
    let oracle = spec.oracle.build(spec.dim)?;
    let mut prepared = harness::prepare_run(&spec, 0, 0, oracle)?;
    if let Some(stride) = args.stride {
        prepared.config.record_stride = stride;
    }
    let record = bounded_gd::run(&prepared.config)?;
    let mut out = output(&args.out)?;
    record.write_csv(&mut out)?;
    out.flush()?;
    if let Some(p) = &args.final_out {
        record.write_final(BufWriter::new(fs::File::create(p)?))?;
    }
    if let Some(p) = &args.save_q {
        prepared.objective.write_matrix(BufWriter::new(fs::File::create(p)?))?;
    }
    eprintln!("status={:?} final_norm={:.6e} sup_norm={:.6e}", record.status, record.final_x.norm(), record.sup_norm);
    Ok(())
}

fn diagnose(args: DiagnoseArgs) -> Result<()> {
    let trace = NormTrace::read_csv(BufReader::new(fs::File::open(&args.record)?))?;
    let traj = InterpolatedTrajectory::from_trace(&trace)?;
    let partition = WindowPartition::from_times(traj.times(), args.window)?;
    let a = args.a.unwrap_or_else(|| diagnostics::default_radius(trace.norms[0]));
    let report = diagnostics::contraction_report(&traj, &partition, a, args.r_check, args.threshold)?;
    let mut out = output(&args.out)?;
    report.write_csv(&mut out)?;
    out.flush()?;
    match &report.verdict {
        Verdict::BoundedConsistent => eprintln!("verdict=bounded-consistent"),
        Verdict::Suspicious(w) => eprintln!("verdict=suspicious windows={w:?}"),
    }
    Ok(())
}

fn check_schedule(args: CheckArgs) -> Result<()> {
    let schedule: StepSchedule = args.schedule.parse()?;
    let r = schedule.check_a2(args.horizon)?;
    println!("schedule={schedule}");
    println!("sum_diverges={}", r.sum_diverges);
    println!("sum_squares_finite={}", r.sum_squares_finite);
    println!("gamma_to_zero={}", r.gamma_to_zero);
    println!("horizon={}", r.horizon);
    println!("partial_sum={:.16e}", r.partial_sum);
    println!("partial_sum_squares={:.16e}", r.partial_sum_squares);
    println!("satisfied={}", r.satisfied());
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NumericFailure { .. } | Error::IllConditioned { .. } | Error::NotCompleted { .. } => 3,
        Error::Io(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Exp1(a) => sweep(a, Experiment::Exp1),
        Command::Exp2(a) => sweep(a, Experiment::Exp2),
        Command::Single(a) => single(a),
        Command::Diagnose(a) => diagnose(a),
        Command::CheckSchedule(a) => check_schedule(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
