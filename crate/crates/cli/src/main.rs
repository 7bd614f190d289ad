use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hydronet::assembly::{emit_gp_monomials, labels_json, matrix_market, matrix_market_vector};
use hydronet::document::{MetricsSummary, ResultDocument};
use hydronet::inp::read_network;
use hydronet::network::{validate, ValidationReport};
use hydronet::oracle::{compare, newton_solve, state_from_reference, NewtonConfig};
use hydronet::solver::{
    check_contraction, pipe_like, run, system_at, AccelPolicy, InitialFlows, Termination,
};
use hydronet::{Error, HydraulicState, Network, Solution, SolverConfig};
use log::info;
use rayon::prelude::*;
use serde::Serialize;

/// Flow range (m³/s) of `--init random=SEED`.
const RANDOM_INIT: (f64, f64) = (1e-3, 0.1);
const DEFAULT_ADAPTIVE_CAP: f64 = 1000.0;

#[derive(Parser)]
#[command(
    name = "hydronet",
    version,
    about = "Steady-state water network solver"
)]
struct Cli {
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a network and print the result document.
    Solve {
        path: PathBuf,
        #[command(flatten)]
        solver: SolverFlags,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// Write the per-iteration trace as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write A, b (Matrix Market) and row/column labels at the final state into this directory.
        #[arg(long)]
        dump_system: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Solve and compare against the Newton oracle or a reference state file.
    Compare {
        path: PathBuf,
        /// `newton` or a JSON file with `heads` and `flows` keyed by id.
        #[arg(long, default_value = "newton")]
        against: String,
        #[command(flatten)]
        solver: SolverFlags,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Report validation findings, invertibility and the contraction estimate at the start point.
    Check {
        path: PathBuf,
        #[command(flatten)]
        solver: SolverFlags,
    },
    /// Time every `.inp` file in a directory over seeded random starts; CSV output.
    Bench {
        dir: PathBuf,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        /// Seed of the first start; later starts use consecutive seeds.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.01)]
        threshold: f64,
        #[arg(long, default_value_t = 20_000)]
        max_iter: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Emit the monomial (GP) form of the linear system at the start point as JSON.
    GpExport {
        path: PathBuf,
        /// The base is `1 + delta`.
        #[arg(long, default_value_t = 1.0)]
        delta: f64,
        /// Linearize at the converged state instead of the start point.
        #[arg(long)]
        solved: bool,
        #[command(flatten)]
        solver: SolverFlags,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct SolverFlags {
    #[arg(long, default_value_t = 0.01)]
    threshold: f64,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    /// Acceleration cadence.
    #[arg(long, default_value_t = 10)]
    n_step: usize,
    /// `off`, `uniform=A`, `adaptive` or `adaptive=CAP`.
    #[arg(long, default_value = "off", value_parser = parse_accel)]
    accel: AccelPolicy<f64>,
    /// `zeros`, `uniform=Q` (m³/s) or `random=SEED`.
    #[arg(long, default_value = "uniform=0.03", value_parser = parse_init)]
    init: Init,
    /// Record the contraction estimate at every iteration.
    #[arg(long)]
    monitor: bool,
}

#[derive(Clone, Copy, Debug)]
enum Init {
    Zeros,
    Uniform(f64),
    Random(u64),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

fn parse_accel(s: &str) -> Result<AccelPolicy<f64>, String> {
    let number = |v: &str| v.parse::<f64>().map_err(|e| format!("{v}: {e}"));
    match s.split_once('=') {
        None if s == "off" => Ok(AccelPolicy::Off),
        None if s == "adaptive" => Ok(AccelPolicy::Adaptive {
            cap: DEFAULT_ADAPTIVE_CAP,
        }),
        Some(("uniform", a)) => Ok(AccelPolicy::Uniform(number(a)?)),
        Some(("adaptive", c)) => Ok(AccelPolicy::Adaptive { cap: number(c)? }),
        _ => Err(format!(
            "expected off, uniform=A, adaptive or adaptive=CAP, got '{s}'"
        )),
    }
}

fn parse_init(s: &str) -> Result<Init, String> {
    match s.split_once('=') {
        None if s == "zeros" => Ok(Init::Zeros),
        Some(("uniform", q)) => q
            .parse()
            .map(Init::Uniform)
            .map_err(|e| format!("{q}: {e}")),
        Some(("random", seed)) => seed
            .parse()
            .map(Init::Random)
            .map_err(|e| format!("{seed}: {e}")),
        _ => Err(format!(
            "expected zeros, uniform=Q or random=SEED, got '{s}'"
        )),
    }
}

impl SolverFlags {
    fn config(&self) -> SolverConfig {
        let initial_flows = match self.init {
            Init::Zeros => InitialFlows::Zeros,
            Init::Uniform(q) => InitialFlows::Uniform(q),
            Init::Random(seed) => InitialFlows::Random {
                seed,
                low: RANDOM_INIT.0,
                high: RANDOM_INIT.1,
            },
        };
        SolverConfig {
            threshold: self.threshold,
            max_iter: self.max_iter,
            n_step: self.n_step,
            accel: self.accel,
            initial_flows,
            monitor_contraction: self.monitor,
            ..SolverConfig::default()
        }
    }

    fn seed(&self) -> Option<u64> {
        match self.init {
            Init::Random(seed) => Some(seed),
            _ => None,
        }
    }
}

/// Failure classes and their exit codes.
#[derive(Debug)]
enum Failure {
    Input(String),
    Validation(String),
    Singular(String),
    NotConverged(String),
    Other(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Other(_) => 1,
            Failure::Input(_) => 2,
            Failure::Validation(_) => 3,
            Failure::Singular(_) => 4,
            Failure::NotConverged(_) => 5,
        }
    }
}

impl Failure {
    fn context(self, prefix: &str) -> Self {
        let with = |m: String| format!("{prefix}: {m}");
        match self {
            Failure::Input(m) => Failure::Input(with(m)),
            Failure::Validation(m) => Failure::Validation(with(m)),
            Failure::Singular(m) => Failure::Singular(with(m)),
            Failure::NotConverged(m) => Failure::NotConverged(with(m)),
            Failure::Other(m) => Failure::Other(with(m)),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (kind, msg) = match self {
            Failure::Input(m) => ("input error", m),
            Failure::Validation(m) => ("validation failed", m),
            Failure::Singular(m) => ("singular system", m),
            Failure::NotConverged(m) => ("not converged", m),
            Failure::Other(m) => ("error", m),
        };
        write!(f, "{kind}: {msg}")
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::MalformedRecord { .. }
            | Error::DuplicateId { .. }
            | Error::DanglingReference { .. }
            | Error::UnknownId { .. }
            | Error::UnknownUnit(_)
            | Error::UnknownHeadloss(_)
            | Error::PumpCurveUnderdetermined { .. }
            | Error::Json(_) => Failure::Input(msg),
            Error::Validation(_) | Error::NonPositiveDimension(_) | Error::ClosedValve(_) => {
                Failure::Validation(msg)
            }
            Error::SingularSystem { .. } => Failure::Singular(msg),
            Error::Diverged { .. } | Error::NewtonStall { .. } => Failure::NotConverged(msg),
            Error::NegativeFlow(_)
            | Error::DimensionMismatch(_)
            | Error::InfeasibleSpec(_)
            | Error::InvalidConfig(_) => Failure::Other(msg),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn load(path: &Path) -> CliResult<Network> {
    let text =
        fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let net =
        read_network(&text).map_err(|e| Failure::from(e).context(&path.display().to_string()))?;
    info!("{}: {:?}", path.display(), net.counts());
    Ok(net)
}

fn validated(path: &Path) -> CliResult<Network> {
    let net = load(path)?;
    let report = validate(&net);
    if !report.overall_ok {
        return Err(Failure::Validation(report.reasons().join("; ")));
    }
    Ok(net)
}

fn write_out(output: Option<&Path>, text: &str) -> CliResult<()> {
    match output {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Other(format!("{}: {e}", p.display()))),
        None => print_stdout(text),
    }
}

fn print_stdout(text: &str) -> CliResult<()> {
    match writeln!(io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(Failure::Other(e.to_string())),
        _ => Ok(()),
    }
}

fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    serde_json::to_string_pretty(value).map_err(|e| Failure::Other(e.to_string()))
}

fn csv_failure(e: impl fmt::Display) -> Failure {
    Failure::Other(e.to_string())
}

fn solve_network(net: &Network, cfg: &SolverConfig) -> CliResult<Solution> {
    let s = run(net, cfg)?;
    info!(
        "{:?} after {} iterations in {:.3} s",
        s.report.termination, s.report.iterations_used, s.report.wall_time_s
    );
    Ok(s)
}

fn convergence(s: &Solution) -> CliResult<()> {
    match s.report.termination {
        Termination::Converged => Ok(()),
        t => Err(Failure::NotConverged(format!(
            "{t:?} after {} iterations (last step {:.3e})",
            s.report.iterations_used,
            s.report.error_trace.last().copied().unwrap_or(f64::NAN)
        ))),
    }
}

fn document(net: &Network, s: &Solution, seed: Option<u64>) -> ResultDocument {
    let mut doc = ResultDocument::new(net, &s.state);
    doc.seed = seed;
    doc.report = Some(s.report.clone());
    doc
}

fn state_csv(net: &Network, state: &HydraulicState) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["kind", "id", "value"])
        .map_err(csv_failure)?;
    for n in 0..net.node_count() {
        w.write_record(["head", net.node_id(n), &state.heads[n].to_string()])
            .map_err(csv_failure)?;
    }
    for l in 0..net.link_count() {
        w.write_record(["flow", net.link_id(l), &state.flows[l].to_string()])
            .map_err(csv_failure)?;
    }
    String::from_utf8(w.into_inner().map_err(csv_failure)?).map_err(csv_failure)
}

fn write_trace(path: &Path, s: &Solution) -> CliResult<()> {
    let r = &s.report;
    let mut w = csv::Writer::from_path(path).map_err(csv_failure)?;
    w.write_record([
        "iteration",
        "error",
        "pipe_step",
        "status_stable",
        "contraction",
    ])
    .map_err(csv_failure)?;
    for k in 0..r.iterations_used {
        let contraction = r
            .contraction_trace
            .as_ref()
            .and_then(|t| t.get(k))
            .map(|c| c.norm.to_string())
            .unwrap_or_default();
        w.write_record([
            (k + 1).to_string(),
            r.error_trace[k].to_string(),
            r.pipe_step_trace[k].to_string(),
            r.status_stable[k].to_string(),
            contraction,
        ])
        .map_err(csv_failure)?;
    }
    w.flush().map_err(|e| Failure::Other(e.to_string()))
}

fn dump_system(
    dir: &Path,
    net: &Network,
    cfg: &SolverConfig,
    state: &HydraulicState,
) -> CliResult<()> {
    let (_, _, sys) = system_at(net, cfg, Some(state))?;
    let io = |e: std::io::Error| Failure::Other(format!("{}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(io)?;
    fs::write(dir.join("A.mtx"), matrix_market(&sys.a)).map_err(io)?;
    fs::write(dir.join("b.mtx"), matrix_market_vector(&sys.b)).map_err(io)?;
    fs::write(dir.join("labels.json"), to_json(&labels_json(&sys))?).map_err(io)?;
    Ok(())
}

fn cmd_solve(
    path: &Path,
    flags: &SolverFlags,
    format: Format,
    trace: Option<&Path>,
    dump: Option<&Path>,
    output: Option<&Path>,
) -> CliResult<()> {
    let net = validated(path)?;
    let cfg = flags.config();
    let s = solve_network(&net, &cfg)?;
    if let Some(t) = trace {
        write_trace(t, &s)?;
    }
    if let Some(d) = dump {
        dump_system(d, &net, &cfg, &s.state)?;
    }
    let text = match format {
        Format::Json => to_json(&document(&net, &s, flags.seed()))?,
        Format::Csv => state_csv(&net, &s.state)?,
    };
    write_out(output, text.trim_end())?;
    convergence(&s)
}

fn cmd_compare(
    path: &Path,
    against: &str,
    flags: &SolverFlags,
    output: Option<&Path>,
) -> CliResult<()> {
    let net = validated(path)?;
    let s = solve_network(&net, &flags.config())?;
    let reference = if against == "newton" {
        newton_solve(&net, &NewtonConfig::default())?.state
    } else {
        let text =
            fs::read_to_string(against).map_err(|e| Failure::Input(format!("{against}: {e}")))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Failure::Input(format!("{against}: {e}")))?;
        state_from_reference(&net, &value)?
    };
    let metrics = compare(&s.state, &reference)?;
    let mut doc = document(&net, &s, flags.seed());
    doc.metrics = Some(MetricsSummary::new(against, &metrics));
    write_out(output, &to_json(&doc)?)?;
    convergence(&s)
}

#[derive(Serialize)]
struct Diagnostics {
    counts: hydronet::network::Counts,
    variables: usize,
    validation: ValidationReport,
    invertible: bool,
    singular_rows: Vec<String>,
    /// Estimate of the pipe-flow iteration norm at the start point.
    contraction: Option<f64>,
    contraction_converged: Option<bool>,
}

fn cmd_check(path: &Path, flags: &SolverFlags) -> CliResult<()> {
    let net = load(path)?;
    let validation = validate(&net);
    let cfg = flags.config();
    let mut diag = Diagnostics {
        counts: net.counts(),
        variables: net.counts().variables(),
        validation,
        invertible: false,
        singular_rows: Vec::new(),
        contraction: None,
        contraction_converged: None,
    };
    let mut singular = None;
    match system_at(&net, &cfg, None) {
        Ok((model, xi, sys)) => match sys.factor() {
            Ok(f) => {
                diag.invertible = true;
                let (links, a_f) = pipe_like(&model, &xi);
                let est = check_contraction(&f, sys.dim(), model.n_heads(), &links, &a_f);
                diag.contraction = Some(est.norm);
                diag.contraction_converged = Some(est.converged);
            }
            Err(Error::SingularSystem { rows }) => {
                singular = Some(rows.join(", "));
                diag.singular_rows = rows;
            }
            Err(e) => return Err(e.into()),
        },
        Err(e) if diag.validation.overall_ok => return Err(e.into()),
        Err(e) => info!("no system assembled: {e}"),
    }
    print_stdout(&to_json(&diag)?)?;
    if !diag.validation.overall_ok {
        return Err(Failure::Validation(diag.validation.reasons().join("; ")));
    }
    match singular {
        Some(rows) => Err(Failure::Singular(rows)),
        None => Ok(()),
    }
}

#[derive(Serialize)]
struct BenchRow {
    network: String,
    junctions: usize,
    reservoirs: usize,
    tanks: usize,
    pipes: usize,
    pumps: usize,
    valves: usize,
    variables: usize,
    repeats: usize,
    converged: usize,
    mean_iterations: f64,
    mean_wall_time_s: f64,
}

fn bench_one(
    path: &Path,
    repeats: usize,
    seed: u64,
    threshold: f64,
    max_iter: usize,
) -> CliResult<BenchRow> {
    let net = validated(path)?;
    let c = net.counts();
    let (mut iterations, mut converged, mut time) = (0usize, 0usize, 0.0f64);
    for k in 0..repeats as u64 {
        let cfg = SolverConfig {
            threshold,
            max_iter,
            initial_flows: InitialFlows::Random {
                seed: seed + k,
                low: RANDOM_INIT.0,
                high: RANDOM_INIT.1,
            },
            ..SolverConfig::default()
        };
        let t = Instant::now();
        let s = run(&net, &cfg)?;
        time += t.elapsed().as_secs_f64();
        iterations += s.report.iterations_used;
        converged += usize::from(s.report.termination == Termination::Converged);
    }
    let n = repeats.max(1) as f64;
    Ok(BenchRow {
        network: path
            .file_stem()
            .unwrap_or_default()
            .to_string_lossy()
            .into_owned(),
        junctions: c.junctions,
        reservoirs: c.reservoirs,
        tanks: c.tanks,
        pipes: c.pipes,
        pumps: c.pumps,
        valves: c.valves,
        variables: c.variables(),
        repeats,
        converged,
        mean_iterations: iterations as f64 / n,
        mean_wall_time_s: time / n,
    })
}

fn cmd_bench(
    dir: &Path,
    repeats: usize,
    seed: u64,
    threshold: f64,
    max_iter: usize,
    output: Option<&Path>,
) -> CliResult<()> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Failure::Input(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("inp")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Failure::Input(format!(
            "no .inp files in {}",
            dir.display()
        )));
    }
    let rows: Vec<CliResult<BenchRow>> = files
        .par_iter()
        .map(|p| bench_one(p, repeats, seed, threshold, max_iter))
        .collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row?).map_err(csv_failure)?;
    }
    let text = String::from_utf8(w.into_inner().map_err(csv_failure)?).map_err(csv_failure)?;
    write_out(output, text.trim_end())
}

fn cmd_gp_export(
    path: &Path,
    delta: f64,
    solved: bool,
    flags: &SolverFlags,
    output: Option<&Path>,
) -> CliResult<()> {
    let net = validated(path)?;
    let cfg = flags.config();
    let state = if solved {
        let s = solve_network(&net, &cfg)?;
        convergence(&s)?;
        Some(s.state)
    } else {
        None
    };
    let (_, _, sys) = system_at(&net, &cfg, state.as_ref())?;
    let gp = emit_gp_monomials(&sys, 1.0 + delta, None)?;
    write_out(output, &to_json(&gp)?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.verbose {
            log::LevelFilter::Info
        } else {
            log::LevelFilter::Warn
        })
        .init();
    let result = match &cli.command {
        Command::Solve {
            path,
            solver,
            format,
            trace,
            dump_system,
            output,
        } => cmd_solve(
            path,
            solver,
            *format,
            trace.as_deref(),
            dump_system.as_deref(),
            output.as_deref(),
        ),
        Command::Compare {
            path,
            against,
            solver,
            output,
        } => cmd_compare(path, against, solver, output.as_deref()),
        Command::Check { path, solver } => cmd_check(path, solver),
        Command::Bench {
            dir,
            repeats,
            seed,
            threshold,
            max_iter,
            output,
        } => cmd_bench(
            dir,
            *repeats,
            *seed,
            *threshold,
            *max_iter,
            output.as_deref(),
        ),
        Command::GpExport {
            path,
            delta,
            solved,
            solver,
            output,
        } => cmd_gp_export(path, *delta, *solved, solver, output.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("hydronet: {f}");
            ExitCode::from(f.code())
        }
    }
}
