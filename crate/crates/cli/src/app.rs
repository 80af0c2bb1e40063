//! Argument parsing and subcommand dispatch.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use privalloc::synth::generate;
use privalloc::{derive_seed, seeded};
use serde_json::json;

use crate::checks::{self, CheckOptions};
use crate::config::{parse, ExperimentConfig};
use crate::describe::describe;
use crate::error::CliError;
use crate::io::{read_population, write_outcome, write_population};
use crate::presets;
use crate::regime::{exact_stats, private_stats, report, RegimeStats};
use crate::strategy::{run_on_population, StrategyKind};
use crate::sweep::{fmt_real, render_summary, run_rows, summarize, write_csv};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_BOUND_VIOLATION: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "privalloc", version, about = "Private aid allocation experiments")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Experiment configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Built-in configuration: default, regime-map, bound-check-ila, learning.
    #[arg(long, global = true, value_name = "NAME", conflicts_with = "config")]
    pub preset: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_name = "N")]
    pub trials: Option<usize>,
    /// Worker threads for sweeps.
    #[arg(long, global = true, value_name = "N", default_value_t = 1)]
    pub parallel: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a population CSV for the first grid point.
    Generate,
    /// Run one strategy once and write the outcome CSV plus a JSON sidecar.
    Allocate(AllocateArgs),
    /// Monte Carlo sweep over the configured grid.
    Sweep,
    /// Classify the sampling (and optionally learning) regime.
    Regime(RegimeArgs),
    /// Run the acceptance checks.
    CheckBounds(CheckArgs),
    /// Print the experiment plan.
    Describe,
}

#[derive(Debug, Args)]
pub struct AllocateArgs {
    /// Strategy name; the first configured strategy when absent.
    #[arg(long)]
    pub strategy: Option<String>,
    /// Population CSV; generated from the config when absent.
    #[arg(long, value_name = "PATH")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub psi: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RegimeArgs {
    /// Population CSV; the config's population when absent.
    #[arg(long, value_name = "PATH")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub gini: Option<f64>,
    #[arg(long)]
    pub rho_bar: Option<f64>,
    /// Population size when `--gini` and `--rho-bar` are given directly.
    #[arg(long)]
    pub population: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    pub lambda: f64,
    /// Estimate the statistics privately with this budget.
    #[arg(long)]
    pub psi: Option<f64>,
    /// Irreducible noise level for the learning regime.
    #[arg(long)]
    pub sigma: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Comma-separated criterion numbers; all when absent.
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<u8>,
    /// Directory of golden files for the determinism check.
    #[arg(long, value_name = "DIR")]
    pub golden: Option<PathBuf>,
}

fn load_config(global: &GlobalArgs) -> Result<ExperimentConfig, CliError> {
    let mut config = match (&global.config, &global.preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|source| CliError::Read { path: path.clone(), source })?;
            parse(&text)?
        }
        (None, Some(name)) => presets::load(name)?,
        (None, None) => presets::load("default")?,
    };
    if let Some(seed) = global.seed {
        config.seed = seed;
    }
    if let Some(trials) = global.trials {
        config.trials = trials;
    }
    if let Some(out) = &global.out {
        config.output = Some(out.clone());
    }
    config.validate()?;
    Ok(config)
}

fn create(path: &Path) -> Result<fs::File, CliError> {
    fs::File::create(path).map_err(|source| CliError::Write { path: path.to_path_buf(), source })
}

/// Writes through `emit` to `path`, or to `out` when no path is given.
fn emit_to(
    path: Option<&Path>,
    out: &mut dyn Write,
    emit: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
) -> Result<(), CliError> {
    match path {
        Some(p) => {
            let mut file = std::io::BufWriter::new(create(p)?);
            emit(&mut file).map_err(|source| CliError::Write { path: p.to_path_buf(), source })
        }
        None => Ok(emit(out)?),
    }
}

fn cmd_generate(config: &ExperimentConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let point = config.grid()[0];
    let spec = config.population.spec(point.k, point.gini, derive_seed(config.seed, &[0, 0, 0]))?;
    let gp = generate(&spec)?;
    emit_to(config.output.as_deref(), out, |w| write_population(&gp.population, w))?;
    writeln!(
        err,
        "generated P = {}, M = {}, G = {}, rho_bar = {}",
        gp.population.size(),
        gp.population.n_units(),
        gp.stats.gini.map(fmt_real).unwrap_or_else(|| "undefined".into()),
        fmt_real(gp.stats.rho_bar)
    )?;
    Ok(EXIT_OK)
}

fn cmd_allocate(
    config: &ExperimentConfig,
    args: &AllocateArgs,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, CliError> {
    let point = config.grid()[0];
    let strategy = match &args.strategy {
        Some(name) => {
            let kind: StrategyKind =
                name.parse().map_err(|_| CliError::config(format!("unknown strategy '{name}'")))?;
            config
                .strategies
                .iter()
                .find(|s| s.kind == kind)
                .cloned()
                .unwrap_or(crate::config::StrategySpec { kind, beta: 0.1, margin_scale: 1.0 })
        }
        None => config.strategies[0].clone(),
    };
    if strategy.kind.is_learned() {
        return Err(CliError::config(format!("{} runs only inside sweeps", strategy.kind)));
    }
    let k = args.k.unwrap_or(point.k);
    let psi = args.psi.unwrap_or(point.psi);
    let lambda = args.lambda.unwrap_or(point.lambda);
    let gp = match &args.input {
        Some(path) => {
            let file = fs::File::open(path).map_err(|source| CliError::Read { path: path.clone(), source })?;
            let population = read_population(std::io::BufReader::new(file), config.population.delta_w)?;
            let profile = population.unit_profile();
            let stats = privalloc::synth::PopulationStats { rho_bar: profile.mean(), gini: profile.gini().ok() };
            privalloc::synth::GeneratedPopulation { population, profile, stats }
        }
        None => generate(&config.population.spec(k, point.gini, derive_seed(config.seed, &[0, 0, 0]))?)?,
    };
    if k > gp.population.size() {
        return Err(CliError::config(format!("k = {k} exceeds population {}", gp.population.size())));
    }
    let mut rng = seeded(derive_seed(config.seed, &[0, 0, 1]));
    let run = run_on_population(&strategy, &gp, k, lambda, psi, &mut rng)?;
    let summary = json!({
        "strategy": strategy.kind.name(),
        "P": gp.population.size(),
        "M": gp.population.n_units(),
        "k": k,
        "lambda": fmt_real(lambda),
        "psi": fmt_real(psi),
        "beta": strategy.beta,
        "margin_scale": strategy.margin_scale,
        "delta_w": gp.population.delta_w(),
        "seed": config.seed,
        "treated": run.allocation.as_ref().map(|a| a.len()),
        "regret": run.report.map(|r| r.regret),
        "normalized_regret": run.report.map(|r| r.normalized_regret),
        "bound": run.bound,
        "details": run.meta,
    });
    let Some(allocation) = run.allocation else {
        writeln!(err, "{} could not run: {}", strategy.kind, serde_json::to_string(&summary)?)?;
        return Ok(EXIT_ERROR);
    };
    let noisy = run.noisy_scores.as_deref();
    let p = gp.population.size();
    emit_to(config.output.as_deref(), out, |w| write_outcome(p, noisy, &allocation, w))?;
    let line = format!(
        "{}: treated {} of budget {k}, normalized regret {}, bound {}",
        strategy.kind,
        allocation.len(),
        run.report.map(|r| fmt_real(r.normalized_regret)).unwrap_or_default(),
        run.bound.map(fmt_real).unwrap_or_else(|| "NA".into())
    );
    match &config.output {
        Some(path) => {
            let mut sidecar = path.clone().into_os_string();
            sidecar.push(".json");
            let sidecar = PathBuf::from(sidecar);
            let mut f = create(&sidecar)?;
            serde_json::to_writer_pretty(&mut f, &summary)?;
            writeln!(f).map_err(|source| CliError::Write { path: sidecar.clone(), source })?;
            writeln!(out, "{line}")?;
        }
        None => writeln!(err, "{line}")?,
    }
    Ok(EXIT_OK)
}

fn cmd_sweep(config: &ExperimentConfig, threads: usize, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let rows = run_rows(config, threads)?;
    let summary = summarize(config, &rows);
    let table = render_summary(&summary);
    match &config.output {
        Some(path) => {
            emit_to(Some(path), out, |w| write_csv(&rows, w))?;
            write!(out, "{table}")?;
        }
        None => {
            write_csv(&rows, &mut *out)?;
            write!(err, "{table}")?;
        }
    }
    if summary.any_failure() {
        writeln!(err, "bound check failed at one or more grid points")?;
        return Ok(EXIT_BOUND_VIOLATION);
    }
    Ok(EXIT_OK)
}

fn cmd_regime(config: &ExperimentConfig, args: &RegimeArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let point = config.grid()[0];
    let stats = match (&args.input, args.gini, args.rho_bar) {
        (Some(path), _, _) => {
            let file = fs::File::open(path).map_err(|source| CliError::Read { path: path.clone(), source })?;
            let pop = read_population(std::io::BufReader::new(file), config.population.delta_w)?;
            match args.psi {
                Some(psi) => private_stats(&pop, psi, derive_seed(config.seed, &[0, 0, 2]))?,
                None => exact_stats(&pop),
            }
        }
        (None, Some(gini), Some(rho_bar)) => {
            if args.psi.is_some() {
                return Err(CliError::config("--psi needs a population (--input or the config)"));
            }
            RegimeStats { gini, rho_bar, population: args.population.unwrap_or(config.population.size()), psi: None }
        }
        (None, None, None) => {
            let k = args.k.unwrap_or(point.k);
            let spec = config.population.spec(k, point.gini, derive_seed(config.seed, &[0, 0, 0]))?;
            let pop = generate(&spec)?.population;
            match args.psi {
                Some(psi) => private_stats(&pop, psi, derive_seed(config.seed, &[0, 0, 2]))?,
                None => exact_stats(&pop),
            }
        }
        _ => return Err(CliError::config("--gini and --rho-bar must be given together")),
    };
    let k = args.k.unwrap_or(point.k);
    write!(out, "{}", report(&stats, k, args.lambda, args.sigma)?)?;
    Ok(EXIT_OK)
}

fn cmd_check(global: &GlobalArgs, args: &CheckArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let options = CheckOptions { seed: global.seed.unwrap_or(checks::DEFAULT_SEED), golden: args.golden.clone() };
    let ids: Vec<u8> = if args.only.is_empty() { (1..=10).collect() } else { args.only.clone() };
    let mut failed = false;
    for id in ids {
        let outcome = checks::run(id, &options)?;
        writeln!(out, "{}", outcome.line())?;
        for d in &outcome.details {
            writeln!(out, "    {d}")?;
        }
        out.flush()?;
        failed |= !outcome.passed;
    }
    Ok(if failed { EXIT_BOUND_VIOLATION } else { EXIT_OK })
}

fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    if let Command::CheckBounds(args) = &cli.command {
        return cmd_check(&cli.global, args, out);
    }
    let config = load_config(&cli.global)?;
    match &cli.command {
        Command::Generate => cmd_generate(&config, out, err),
        Command::Allocate(args) => cmd_allocate(&config, args, out, err),
        Command::Sweep => cmd_sweep(&config, cli.global.parallel.max(1), out, err),
        Command::Regime(args) => cmd_regime(&config, args, out),
        Command::Describe => {
            write!(out, "{}", describe(&config))?;
            Ok(EXIT_OK)
        }
        Command::CheckBounds(_) => unreachable!("handled above"),
    }
}

/// Runs the command line `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_ERROR;
            }
            let _ = write!(out, "{}", e.render());
            return EXIT_OK;
        }
    };
    match dispatch(&cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_ERROR
        }
    }
}
