use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use gridopt::bench::{
    compute_profile, emit_profile_csv, emit_profile_svg, emit_records, read_records, run_suite,
    Metric, SuiteSpec,
};
use gridopt::grid::build_network;
use gridopt::ipm::{solve_opf, KktConditions, MuRule, SolveOptions, SolveStatus};
use gridopt::mpc::CaseData;
use gridopt::opf::{Formulation, Start, Voltage};

#[derive(Parser)]
#[command(name = "gridopt", version, about = "AC optimal power flow solver and benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one OPF case and write the result as JSON.
    Solve(SolveArgs),
    /// Run a benchmark suite and record one CSV row per run.
    Bench(BenchArgs),
    /// Compute Dolan-More performance profiles from recorded runs.
    Profile(ProfileArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// Case file (.m or .json mirror).
    #[arg(long)]
    case: PathBuf,
    /// polar-power | polar-current | cart-power | cart-current
    #[arg(long, default_value = "polar-power")]
    formulation: String,
    /// flat | mpc | pf
    #[arg(long, default_value = "mpc")]
    start: String,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    /// Barrier update rule: sigma | fm
    #[arg(long, default_value = "sigma")]
    mu_rule: String,
    /// Initial barrier parameter; defaults to 1 (flat) or 1e-2 (warm).
    #[arg(long)]
    mu0: Option<f64>,
    #[arg(long)]
    no_step_control: bool,
    /// Wall-clock limit in seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    /// Print the per-iteration log to stderr.
    #[arg(long)]
    verbose: bool,
    /// Output JSON path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Suite description (TOML).
    #[arg(long)]
    suite: PathBuf,
    /// Worker pool size.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ProfileArgs {
    /// runs.csv produced by `gridopt bench`.
    #[arg(long)]
    runs: PathBuf,
    /// time | iters | memory
    #[arg(long, default_value = "time")]
    metric: String,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Optional step-plot output.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Serialize)]
struct SolveReport {
    case: String,
    formulation: String,
    start: String,
    status: SolveStatus,
    objective: f64,
    iterations: usize,
    kkt: KktConditions,
    wall_time_s: f64,
    peak_mem_bytes: usize,
    factorizations: usize,
    failure: Option<String>,
    solution: SolutionReport,
}

#[derive(Serialize)]
struct SolutionReport {
    vm_pu: Vec<f64>,
    va_deg: Vec<f64>,
    pg_mw: Vec<f64>,
    qg_mvar: Vec<f64>,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Solve(args) => cmd_solve(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Profile(args) => cmd_profile(args),
    }
}

fn cmd_solve(args: SolveArgs) -> Result<()> {
    let formulation: Formulation = args.formulation.parse().map_err(anyhow::Error::msg)?;
    let start: Start = args.start.parse().map_err(anyhow::Error::msg)?;
    let mu_rule = match args.mu_rule.as_str() {
        "sigma" => MuRule::ScaledComplementarity { sigma: 0.1 },
        "fm" => MuRule::MonotoneFM { kappa: 0.2, theta: 1.5 },
        other => bail!("unknown mu rule `{other}`"),
    };
    let opts = SolveOptions {
        tol: args.tol,
        max_iter: args.max_iter,
        mu_rule,
        mu0: args.mu0,
        step_control: !args.no_step_control,
        time_limit: args.time_limit,
        verbose: args.verbose,
        ..SolveOptions::default()
    };

    let case = CaseData::read(&args.case)
        .with_context(|| format!("reading {}", args.case.display()))?;
    let net = build_network(&case).context("building network model")?;
    let result = solve_opf(&net, formulation, start, &opts).context("solving")?;

    // decode the variable vector into engineering quantities
    let nb = net.n_bus();
    let ng = net.n_gen();
    let rad = 180.0 / std::f64::consts::PI;
    let (vm_pu, va_deg): (Vec<f64>, Vec<f64>) = match formulation.voltage {
        Voltage::Polar => (
            result.x[nb..2 * nb].to_vec(),
            result.x[..nb].iter().map(|a| a * rad).collect(),
        ),
        Voltage::Cartesian => (0..nb)
            .map(|b| {
                let v = num_complex::Complex64::new(result.x[b], result.x[nb + b]);
                (v.norm(), v.arg() * rad)
            })
            .unzip(),
    };
    let report = SolveReport {
        case: case.name.clone(),
        formulation: formulation.to_string(),
        start: start.to_string(),
        status: result.status,
        objective: result.f,
        iterations: result.iterations,
        kkt: result.kkt,
        wall_time_s: result.wall_time,
        peak_mem_bytes: result.peak_mem,
        factorizations: result.factorizations,
        failure: result.failure.clone(),
        solution: SolutionReport {
            vm_pu,
            va_deg,
            pg_mw: result.x[2 * nb..2 * nb + ng].iter().map(|p| p * net.base_mva).collect(),
            qg_mvar: result.x[2 * nb + ng..].iter().map(|q| q * net.base_mva).collect(),
        },
    };

    let file = File::create(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    serde_json::to_writer_pretty(BufWriter::new(file), &report)?;
    eprintln!(
        "{}: {} / {} / {:?} f = {:.4} $/h in {} iterations ({:.3} s)",
        case.name, formulation, start, result.status, result.f, result.iterations, result.wall_time
    );
    if result.status != SolveStatus::Optimal {
        std::process::exit(1);
    }
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let spec = SuiteSpec::load(&args.suite)
        .with_context(|| format!("loading {}", args.suite.display()))?;
    let records = run_suite(&spec, args.jobs)?;
    let solved = records.iter().filter(|r| r.success).count();
    let mut out = BufWriter::new(
        File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?,
    );
    emit_records(&records, &mut out)?;
    out.flush()?;
    eprintln!("{} runs, {} solved -> {}", records.len(), solved, args.out.display());
    Ok(())
}

fn cmd_profile(args: ProfileArgs) -> Result<()> {
    let metric: Metric = args.metric.parse()?;
    let records = read_records(&args.runs)
        .with_context(|| format!("reading {}", args.runs.display()))?;
    let alphas = metric.default_alphas();
    let curves = compute_profile(&records, metric, &alphas)?;

    let mut out = BufWriter::new(
        File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?,
    );
    emit_profile_csv(&curves, &mut out)?;
    out.flush()?;
    if let Some(svg_path) = &args.svg {
        let mut svg = BufWriter::new(
            File::create(svg_path).with_context(|| format!("creating {}", svg_path.display()))?,
        );
        emit_profile_svg(&curves, &format!("performance profile ({metric})"), &mut svg)?;
        svg.flush()?;
    }
    eprintln!("{} curves -> {}", curves.len(), args.out.display());
    Ok(())
}
