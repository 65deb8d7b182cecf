use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use icran::alignment::{dof_bounds, feasibility_necessary, ia_altmin, DofProfile, IaOptions};
use icran::channels::{snr_db_to_budget, Antennas, Channel, MimoChannel, ParallelChannel, ScalarChannel};
use icran::power_control::{
    apc_run, maxmin_sinr_optimum, minpower_closed_form, minpower_feasible, yates_fixed_point,
};
use icran::rate_region::{frontier_2user, ne_efficiency_2user, RegionSample};
use icran::utilities::QosTargets;
use icran::waterfilling::{cert_sequential, cert_simultaneous, iwfa, ne_residual, IwfaOptions, Schedule};
use icran_bench::{comparison_config, max_pairwise_gap, run_experiment, BenchError, ExperimentConfig, OutputFormat};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "icran", version, about = "Interference-channel resource allocation experiments")]
struct Cli {
    /// Seed for randomly generated instances.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file (stdout when omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
    /// Suppress the human-readable report on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Two-user rate region: Pareto frontier and time-sharing hull.
    Region(RegionArgs),
    /// WMMSE / MDP / SCALE comparison sweep on random parallel channels.
    Wsrm(WsrmArgs),
    /// Iterative water-filling game with convergence certificates.
    Iwfa(IwfaArgs),
    /// Scalar power-control suite: feasibility, Yates, max-min SINR.
    Power(PowerArgs),
    /// Interference alignment.
    #[command(subcommand)]
    Ia(IaCommand),
    /// Run an experiment described by a JSON config file.
    Bench {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct RegionArgs {
    /// Cross gain of the symmetric channel with unit direct gains.
    #[arg(long, default_value_t = 0.5, conflicts_with = "channel")]
    alpha: f64,
    /// Channel JSON document (two-user scalar channel).
    #[arg(long)]
    channel: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    budget: f64,
    /// Points per frontier edge.
    #[arg(long, default_value_t = 512)]
    grid: usize,
}

#[derive(Args)]
struct WsrmArgs {
    #[arg(long, default_value_t = 10)]
    users: usize,
    #[arg(long, default_value_t = 32)]
    tones: usize,
    /// SNR grid in dB.
    #[arg(long, value_delimiter = ',', default_value = "0,5,10,15,20,25,30")]
    snr: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    realizations: usize,
}

#[derive(Args)]
struct IwfaArgs {
    #[arg(long, default_value_t = 3)]
    users: usize,
    #[arg(long, default_value_t = 8)]
    tones: usize,
    /// Multiplier on every cross gain.
    #[arg(long, default_value_t = 1.0)]
    crosstalk: f64,
    #[arg(long, default_value_t = 10.0)]
    snr: f64,
    #[arg(long, default_value = "sequential")]
    schedule: Schedule,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
}

#[derive(Args)]
struct PowerArgs {
    #[arg(long, default_value_t = 4)]
    users: usize,
    /// Common SINR target.
    #[arg(long, default_value_t = 0.3)]
    target: f64,
    /// APC step size.
    #[arg(long, default_value_t = 0.1)]
    beta: f64,
    #[arg(long, default_value_t = 200)]
    apc_steps: usize,
}

#[derive(Args)]
struct ProfileArgs {
    /// Per-user antennas as TXxRX, e.g. `2x2,2x2,2x2`.
    #[arg(long, value_delimiter = ',', required = true)]
    antennas: Vec<String>,
    /// Streams per user; a single value applies to every user.
    #[arg(long, value_delimiter = ',', required = true)]
    dof: Vec<usize>,
}

#[derive(Subcommand)]
enum IaCommand {
    /// Evaluate the necessary feasibility conditions.
    Check(ProfileArgs),
    /// Alternating leakage minimization; emits the leakage trace.
    Solve {
        #[command(flatten)]
        profile: ProfileArgs,
        #[arg(long, default_value_t = 5000)]
        max_iter: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error("infeasible: {0}")]
    Infeasible(String),
}

impl From<icran::Error> for CliError {
    fn from(e: icran::Error) -> Self {
        match e {
            icran::Error::Infeasible { .. } | icran::Error::UserInfeasible { .. } => CliError::Infeasible(e.to_string()),
            other => CliError::Bench(other.into()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Bench(e.into())
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Infeasible(_) => 3,
            CliError::Bench(BenchError::Io(_)) => 1,
            CliError::Bench(_) => 2,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

struct Output {
    path: Option<PathBuf>,
    format: OutputFormat,
    quiet: bool,
}

impl Output {
    fn sink(&self) -> CliResult<Box<dyn Write>> {
        Ok(match &self.path {
            Some(p) => Box::new(File::create(p)?),
            None => Box::new(io::stdout().lock()),
        })
    }

    fn report(&self, line: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", line.as_ref());
        }
    }

    /// Writes `rows` as CSV, or `doc` as JSON.
    fn emit<R: Serialize, D: Serialize>(&self, rows: &[R], header: &[&str], doc: &D) -> CliResult<()> {
        let mut sink = self.sink()?;
        match self.format {
            OutputFormat::Csv => {
                let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(&mut sink);
                w.write_record(header).map_err(BenchError::from)?;
                for r in rows {
                    w.serialize(r).map_err(BenchError::from)?;
                }
                w.flush()?;
            }
            OutputFormat::Json => {
                serde_json::to_writer_pretty(&mut sink, doc).map_err(BenchError::from)?;
                writeln!(sink)?;
            }
        }
        Ok(())
    }
}

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Bench(BenchError::Config(msg.into()))
}

fn read_channel(path: &PathBuf) -> CliResult<Channel> {
    let text = std::fs::read_to_string(path)?;
    Channel::from_json(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))
}

fn region(args: &RegionArgs, out: &Output) -> CliResult<()> {
    let ch = match &args.channel {
        Some(path) => match read_channel(path)? {
            Channel::Scalar(c) if c.users() == 2 => c,
            _ => return Err(config_error("region needs a two-user scalar channel")),
        },
        None => ScalarChannel::symmetric(2, args.alpha, args.budget)?,
    };
    let sample: RegionSample = frontier_2user(&ch, args.grid)?;
    let ne = ne_efficiency_2user(&ch, args.grid)?;
    out.report(format!(
        "NE rates ({:.6}, {:.6}), sum {:.6}; best time-sharing sum {:.6}",
        ne.ne_rates.0, ne.ne_rates.1, ne.ne_sum, ne.best_timeshare_sum
    ));
    let mut rows: Vec<(f64, f64, String)> =
        sample.points.iter().zip(&sample.labels).map(|(p, l)| (p.0, p.1, l.to_string())).collect();
    rows.extend(sample.hull.iter().map(|p| (p.0, p.1, "hull".to_string())));
    #[derive(Serialize)]
    struct Doc<'a> {
        region: &'a RegionSample,
        equilibrium: icran::rate_region::NeEfficiency,
    }
    out.emit(&rows, &["R1", "R2", "label"], &Doc { region: &sample, equilibrium: ne })
}

fn wsrm(args: &WsrmArgs, seed: u64, out: &Output) -> CliResult<()> {
    let cfg = comparison_config(args.users, args.tones, args.snr.clone(), args.realizations, seed);
    let table = run_experiment(&cfg)?;
    for (snr, gap) in max_pairwise_gap(&table.summary()) {
        out.report(format!("SNR {snr:>5.1} dB: largest relative gap between algorithms {:.3}%", 100.0 * gap));
    }
    write_table(&table, out)
}

fn write_table(table: &icran_bench::ResultTable, out: &Output) -> CliResult<()> {
    let sink = out.sink()?;
    match out.format {
        OutputFormat::Csv => table.write_csv(sink)?,
        OutputFormat::Json => table.write_json(sink)?,
    }
    Ok(())
}

fn iwfa_cmd(args: &IwfaArgs, seed: u64, out: &Output) -> CliResult<()> {
    let ch = ParallelChannel::random(args.users, args.tones, seed)?
        .scale_crosstalk(args.crosstalk)
        .with_uniform_budget(snr_db_to_budget(args.snr))?;
    let sim = cert_simultaneous(&ch)?;
    let seq = cert_sequential(&ch)?;
    out.report(format!(
        "simultaneous certificate: rho = {:.6} ({}); sequential certificate: rho = {:.6} ({})",
        sim.rho,
        if sim.feasible { "holds" } else { "fails" },
        seq.rho,
        if seq.feasible { "holds" } else { "fails" },
    ));
    let opts = IwfaOptions { schedule: args.schedule, tol: args.tol, max_iter: args.max_iter, ..Default::default() };
    let t = iwfa(&ch, &opts, None)?;
    let residual = ne_residual(&ch, &t.final_state)?;
    out.report(format!(
        "{:?} IWFA: {} after {} iterations, NE residual {residual:.3e}",
        args.schedule,
        if t.converged { "converged" } else { "stopped" },
        t.iterations
    ));
    let rows: Vec<(usize, usize, f64)> = (0..ch.users())
        .flat_map(|k| (0..ch.tones()).map(move |n| (k, n)))
        .map(|(k, n)| (k, n, t.final_state.get(k, n)))
        .collect();
    #[derive(Serialize)]
    struct Doc {
        simultaneous_rho: f64,
        sequential_rho: f64,
        converged: bool,
        iterations: usize,
        ne_residual: f64,
        powers: Vec<Vec<f64>>,
    }
    let doc = Doc {
        simultaneous_rho: sim.rho,
        sequential_rho: seq.rho,
        converged: t.converged,
        iterations: t.iterations,
        ne_residual: residual,
        powers: t.final_state.rows(),
    };
    out.emit(&rows, &["user", "tone", "power"], &doc)
}

fn power(args: &PowerArgs, seed: u64, out: &Output) -> CliResult<()> {
    let ch = ScalarChannel::random(args.users, seed)?;
    let targets = QosTargets::sinr(vec![args.target; args.users])?;
    let f = minpower_feasible(&ch, &targets)?;
    out.report(format!("spectral radius of the normalized gain matrix: {:.6}", f.rho));
    if !f.feasible {
        return Err(CliError::Infeasible(format!(
            "SINR target {} is not attainable by {} users (rho = {:.6})",
            args.target, args.users, f.rho
        )));
    }
    let exact = minpower_closed_form(&ch, &targets)?;
    let yates = yates_fixed_point(&ch, &targets, &vec![0.0; args.users], 1e-12, 100_000)?;
    let gamma = maxmin_sinr_optimum(&ch)?;
    let apc = apc_run(&ch, &vec![1.0; args.users], args.beta, args.apc_steps)?;
    let gap = exact.iter().zip(&yates.final_state).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    out.report(format!("Yates: {} iterations, max deviation from the linear solution {gap:.3e}", yates.iterations));
    out.report(format!(
        "max-min SINR bound {gamma:.6}; APC after {} steps reaches {:.6}",
        args.apc_steps,
        apc.final_objective()
    ));
    let rows: Vec<(usize, f64, f64, f64)> =
        (0..args.users).map(|k| (k, exact[k], yates.final_state[k], apc.final_state[k])).collect();
    #[derive(Serialize)]
    struct Doc {
        rho: f64,
        min_power: Vec<f64>,
        yates: Vec<f64>,
        yates_iterations: usize,
        maxmin_sinr: f64,
        apc_powers: Vec<f64>,
        apc_objective: Vec<f64>,
    }
    let doc = Doc {
        rho: f.rho,
        min_power: exact.clone(),
        yates: yates.final_state.clone(),
        yates_iterations: yates.iterations,
        maxmin_sinr: gamma,
        apc_powers: apc.final_state.clone(),
        apc_objective: apc.objective_history.clone(),
    };
    out.emit(&rows, &["user", "min_power", "yates", "apc"], &doc)
}

fn parse_profile(args: &ProfileArgs) -> CliResult<DofProfile> {
    let antennas = args
        .antennas
        .iter()
        .map(|s| {
            let (tx, rx) = s.split_once(['x', 'X']).ok_or_else(|| config_error(format!("bad antenna spec `{s}`")))?;
            let parse = |v: &str| v.trim().parse::<usize>().map_err(|_| config_error(format!("bad antenna spec `{s}`")));
            Ok(Antennas::new(parse(tx)?, parse(rx)?))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let d = match args.dof.as_slice() {
        [one] => vec![*one; antennas.len()],
        many => many.to_vec(),
    };
    Ok(DofProfile::new(d, antennas)?)
}

fn ia_check(args: &ProfileArgs, out: &Output) -> CliResult<()> {
    let profile = parse_profile(args)?;
    let report = feasibility_necessary(&profile)?;
    let bounds = dof_bounds(&profile);
    let verdict = |b: bool| if b { "holds" } else { "fails" };
    out.report(format!("per-user streams fit the antennas: {}", verdict(report.per_user)));
    out.report(format!("pairwise stream counts: {}", verdict(report.pairwise)));
    out.report(format!("subset counting bound: {}", verdict(report.counting)));
    if let Some(s) = &report.violating_subset {
        out.report(format!("violating link subset: {s:?}"));
    }
    if let Some(holds) = bounds.sum_condition_holds {
        out.report(format!("symmetric bound 2M >= d(K+1): {}", verdict(holds)));
    }
    let rows = [
        ("per_user", report.per_user),
        ("pairwise", report.pairwise),
        ("counting", report.counting),
        ("symmetric_sum", bounds.sum_condition_holds.unwrap_or(true)),
    ];
    #[derive(Serialize)]
    struct Doc<'a> {
        necessary: &'a icran::alignment::NecessaryReport,
        bounds: icran::alignment::DofBounds,
    }
    out.emit(&rows, &["condition", "holds"], &Doc { necessary: &report, bounds })?;
    if report.all_hold() && bounds.sum_condition_holds != Some(false) {
        Ok(())
    } else {
        Err(CliError::Infeasible("the requested degrees of freedom violate a necessary condition".into()))
    }
}

fn ia_solve(args: &ProfileArgs, max_iter: usize, tol: f64, seed: u64, out: &Output) -> CliResult<()> {
    let profile = parse_profile(args)?;
    let ch = MimoChannel::random(profile.antennas.clone(), seed)?;
    let opts = IaOptions { max_iter, tol, seed: Some(seed), ..Default::default() };
    let r = ia_altmin(&ch, &profile.d, &opts)?;
    out.report(format!(
        "{} after {} iterations: leakage {:.3e}, max cross term {:.3e}, rank condition {}",
        if r.converged { "aligned" } else { "stopped" },
        r.iterations,
        r.leakage_history.last().copied().unwrap_or(f64::NAN),
        r.residual.max_crossterm,
        if r.rank_ok { "met" } else { "not met" }
    ));
    let rows: Vec<(usize, f64)> = r.leakage_history.iter().copied().enumerate().collect();
    #[derive(Serialize)]
    struct Doc<'a> {
        leakage: &'a [f64],
        residual: &'a icran::alignment::IaResidual,
        converged: bool,
        iterations: usize,
    }
    let doc = Doc { leakage: &r.leakage_history, residual: &r.residual, converged: r.converged, iterations: r.iterations };
    out.emit(&rows, &["iteration", "leakage"], &doc)
}

fn bench(path: &PathBuf, cli: &Cli) -> CliResult<()> {
    let text = std::fs::read_to_string(path)?;
    let cfg = ExperimentConfig::from_json(&text)?;
    let spec = cfg.output.clone();
    let out = Output {
        path: cli.out.clone().or_else(|| spec.as_ref().and_then(|s| s.path.clone()).map(PathBuf::from)),
        format: cli.format.or(spec.map(|s| s.format)).unwrap_or_default(),
        quiet: cli.quiet,
    };
    let table = run_experiment(&cfg)?;
    for s in table.summary() {
        out.report(format!(
            "{:<10} SNR {:>5.1} dB: mean sum rate {:.4} ({}/{} converged)",
            s.algorithm, s.snr_db, s.mean_sum_rate, s.converged, s.realizations
        ));
    }
    write_table(&table, &out)
}

fn run(cli: &Cli) -> CliResult<()> {
    let out = Output { path: cli.out.clone(), format: cli.format.unwrap_or_default(), quiet: cli.quiet };
    match &cli.command {
        Command::Region(a) => region(a, &out),
        Command::Wsrm(a) => wsrm(a, cli.seed, &out),
        Command::Iwfa(a) => iwfa_cmd(a, cli.seed, &out),
        Command::Power(a) => power(a, cli.seed, &out),
        Command::Ia(IaCommand::Check(a)) => ia_check(a, &out),
        Command::Ia(IaCommand::Solve { profile, max_iter, tol }) => ia_solve(profile, *max_iter, *tol, cli.seed, &out),
        Command::Bench { config } => bench(config, cli),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("icran: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
