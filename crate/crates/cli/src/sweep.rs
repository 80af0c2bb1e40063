//! Monte Carlo sweeps over a parameter grid.

use std::fmt::Write as _;
use std::io::Write;

use privalloc::synth::{generate, GeneratedPopulation};
use privalloc::{derive_seed, seeded};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, GridPoint};
use crate::error::CliError;
use crate::strategy::{learned_trial, run_on_population, BoundKind, StrategyKind};

pub const CSV_VERSION_LINE: &str = "# privalloc-csv v1";
pub const CSV_HEADER: &str = "strategy,P,M,k,lambda,psi,G,rho_bar,regret,normalized_regret,bound";

/// Absolute slack when comparing a regret with its bound.
pub const BOUND_TOLERANCE: f64 = 1e-9;

/// Stream coordinate shared by the learned strategies of one trial.
const LEARNED_STREAM: u64 = 1 << 20;

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub point: usize,
    pub trial: usize,
    pub strategy: StrategyKind,
    pub population: usize,
    pub units: usize,
    pub k: usize,
    pub lambda: f64,
    pub psi: f64,
    pub gini: Option<f64>,
    pub rho_bar: f64,
    /// `None` when the strategy could not run at this point.
    pub regret: Option<f64>,
    pub normalized_regret: Option<f64>,
    pub bound: Option<f64>,
}

impl Row {
    pub fn violates(&self) -> bool {
        matches!((self.normalized_regret, self.bound), (Some(r), Some(b)) if r > b + BOUND_TOLERANCE)
    }

    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.strategy,
            self.population,
            self.units,
            self.k,
            fmt_real(self.lambda),
            fmt_real(self.psi),
            fmt_opt(self.gini),
            fmt_real(self.rho_bar),
            fmt_opt(self.regret),
            fmt_opt(self.normalized_regret),
            fmt_opt(self.bound),
        )
    }
}

pub fn fmt_real(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x}")
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_real).unwrap_or_else(|| "NA".into())
}

fn trial_rows(config: &ExperimentConfig, g: usize, point: &GridPoint, t: usize) -> Result<Vec<Row>, CliError> {
    let base = config.seed;
    let (g64, t64) = (g as u64, t as u64);
    let needs_population = config.strategies.iter().any(|s| !s.kind.is_learned());
    let generated: Option<GeneratedPopulation> = if needs_population {
        let spec = config.population.spec(point.k, point.gini, derive_seed(base, &[g64, t64, 0]))?;
        Some(generate(&spec)?)
    } else {
        None
    };
    let mut learned = None;
    let mut rows = Vec::with_capacity(config.strategies.len());
    for (s, strategy) in config.strategies.iter().enumerate() {
        let row = if strategy.kind.is_learned() {
            if learned.is_none() {
                let seed = derive_seed(base, &[g64, t64, LEARNED_STREAM]);
                let beta = config
                    .strategies
                    .iter()
                    .find(|s| s.kind == StrategyKind::IlaLearned)
                    .unwrap_or(strategy)
                    .beta;
                learned = Some(learned_trial(
                    &config.learning,
                    config.population.size(),
                    point.k,
                    point.psi,
                    point.sigma,
                    beta,
                    seed,
                )?);
            }
            let tr = learned.as_ref().expect("computed above");
            let (r, b) = match strategy.kind {
                StrategyKind::IlaLearned => (tr.ila_regret, tr.ila_bound),
                _ => (tr.ula_regret, tr.ula_bound),
            };
            Row {
                point: g,
                trial: t,
                strategy: strategy.kind,
                population: config.population.size(),
                units: tr.units,
                k: point.k,
                lambda: point.lambda,
                psi: point.psi,
                gini: tr.gini,
                rho_bar: tr.rho_bar,
                regret: Some(r),
                normalized_regret: Some(r),
                bound: Some(b),
            }
        } else {
            let gp = generated.as_ref().expect("population generated for population strategies");
            let mut rng = seeded(derive_seed(base, &[g64, t64, 1 + s as u64]));
            let run = run_on_population(strategy, gp, point.k, point.lambda, point.psi, &mut rng)?;
            Row {
                point: g,
                trial: t,
                strategy: strategy.kind,
                population: gp.population.size(),
                units: gp.population.n_units(),
                k: point.k,
                lambda: point.lambda,
                psi: point.psi,
                gini: gp.stats.gini,
                rho_bar: gp.stats.rho_bar,
                regret: run.report.map(|r| r.regret),
                normalized_regret: run.report.map(|r| r.normalized_regret),
                bound: run.bound,
            }
        };
        rows.push(row);
    }
    Ok(rows)
}

/// Runs every (grid point, trial) pair. Rows come back in grid, then trial, then strategy
/// order whatever the thread count.
pub fn run_rows(config: &ExperimentConfig, threads: usize) -> Result<Vec<Row>, CliError> {
    config.validate()?;
    let grid = config.grid();
    let jobs: Vec<(usize, usize)> = (0..grid.len()).flat_map(|g| (0..config.trials).map(move |t| (g, t))).collect();
    let run = || -> Result<Vec<Vec<Row>>, CliError> {
        jobs.par_iter().map(|&(g, t)| trial_rows(config, g, &grid[g], t)).collect()
    };
    let nested = if threads <= 1 {
        jobs.iter().map(|&(g, t)| trial_rows(config, g, &grid[g], t)).collect::<Result<Vec<_>, _>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| CliError::config(format!("cannot start {threads} threads: {e}")))?;
        pool.install(run)?
    };
    Ok(nested.into_iter().flatten().collect())
}

pub fn write_csv<W: Write>(rows: &[Row], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_VERSION_LINE}")?;
    writeln!(out, "{CSV_HEADER}")?;
    for row in rows {
        writeln!(out, "{}", row.to_csv_line())?;
    }
    out.flush()
}

/// Aggregate of one strategy at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSummary {
    pub point: GridPoint,
    pub index: usize,
    pub strategy: StrategyKind,
    pub beta: f64,
    pub runs: usize,
    pub infeasible: usize,
    pub mean: f64,
    pub se: f64,
    pub mean_bound: Option<f64>,
    pub violations: usize,
    pub bound_kind: BoundKind,
}

impl PointSummary {
    pub fn violation_rate(&self) -> f64 {
        if self.runs == 0 {
            0.0
        } else {
            self.violations as f64 / self.runs as f64
        }
    }

    /// High-probability bounds fail when the violation rate exceeds `beta` by more than three
    /// binomial standard errors; bounds on the mean fail when the mean exceeds the mean bound by
    /// more than two standard errors.
    pub fn fails(&self) -> bool {
        if self.runs == 0 {
            return false;
        }
        match (self.bound_kind, self.mean_bound) {
            (BoundKind::HighProbability, Some(_)) => {
                let n = self.runs as f64;
                let allowed = self.beta + 3.0 * (self.beta * (1.0 - self.beta) / n).sqrt();
                self.violation_rate() > allowed + BOUND_TOLERANCE
            }
            (BoundKind::Expectation, Some(b)) => self.mean - 2.0 * self.se > b + BOUND_TOLERANCE,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub entries: Vec<PointSummary>,
    /// Strategy with the lowest mean regret at each grid point.
    pub best: Vec<Option<StrategyKind>>,
}

impl SweepSummary {
    pub fn any_failure(&self) -> bool {
        self.entries.iter().any(PointSummary::fails)
    }
}

pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

pub fn summarize(config: &ExperimentConfig, rows: &[Row]) -> SweepSummary {
    let grid = config.grid();
    let mut entries = Vec::new();
    let mut best = Vec::with_capacity(grid.len());
    for (g, point) in grid.iter().enumerate() {
        let mut best_here: Option<(f64, StrategyKind)> = None;
        for spec in &config.strategies {
            let mine: Vec<&Row> = rows.iter().filter(|r| r.point == g && r.strategy == spec.kind).collect();
            let regrets: Vec<f64> = mine.iter().filter_map(|r| r.normalized_regret).collect();
            let bounds: Vec<f64> = mine.iter().filter_map(|r| r.bound).collect();
            let (mean, se) = mean_se(&regrets);
            let entry = PointSummary {
                point: *point,
                index: g,
                strategy: spec.kind,
                beta: spec.beta,
                runs: regrets.len(),
                infeasible: mine.len() - regrets.len(),
                mean,
                se,
                mean_bound: if bounds.is_empty() { None } else { Some(mean_se(&bounds).0) },
                violations: mine.iter().filter(|r| r.violates()).count(),
                bound_kind: spec.kind.bound_kind(),
            };
            if entry.runs > 0 && best_here.map_or(true, |(m, _)| mean < m) {
                best_here = Some((mean, spec.kind));
            }
            entries.push(entry);
        }
        best.push(best_here.map(|(_, k)| k));
    }
    SweepSummary { entries, best }
}

fn fmt_axis(x: Option<f64>) -> String {
    x.map(fmt_real).unwrap_or_else(|| "-".into())
}

/// Fixed-width summary table.
pub fn render_summary(summary: &SweepSummary) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>5} {:>6} {:>6} {:>7} {:>7} {:>6}  {:<13} {:>6} {:>12} {:>10} {:>12} {:>9}  status",
        "point", "k", "G", "lambda", "psi", "sigma", "strategy", "runs", "mean_regret", "se", "mean_bound", "viol_rate"
    );
    for e in &summary.entries {
        let status = if e.runs == 0 {
            "infeasible"
        } else if e.fails() {
            "FAIL"
        } else if e.mean_bound.is_none() {
            "-"
        } else {
            "ok"
        };
        let best = if summary.best[e.index] == Some(e.strategy) { " *" } else { "" };
        let _ = writeln!(
            s,
            "{:>5} {:>6} {:>6} {:>7} {:>7} {:>6}  {:<13} {:>6} {:>12.4} {:>10.4} {:>12} {:>9.4}  {}{}",
            e.index,
            e.point.k,
            fmt_axis(e.point.gini),
            fmt_real(e.point.lambda),
            fmt_real(e.point.psi),
            fmt_axis(e.point.sigma),
            e.strategy.name(),
            e.runs,
            e.mean,
            e.se,
            e.mean_bound.map(|b| format!("{b:.4}")).unwrap_or_else(|| "NA".into()),
            e.violation_rate(),
            status,
            best,
        );
    }
    let _ = writeln!(s, "* lowest mean regret at the grid point");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse;

    #[test]
    fn single_rand_run_with_zero_budget() {
        let c = parse("trials = 1\n[population]\nunits = 2\nunit_size = 5\nk = 0\n[strategy]\nname = rand\n").unwrap();
        let rows = run_rows(&c, 1).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].regret, Some(0.0));
        assert_eq!(rows[0].bound, None);
        assert!(rows[0].to_csv_line().ends_with(",0,0,NA"));
    }

    #[test]
    fn rows_are_independent_of_thread_count() {
        let text = "trials = 6\nseed = 11\n[population]\nunits = 4\nunit_size = 10\ngini = 0.3\nrho_bar = 0.4\n\
            [strategy]\nname = ila\n[strategy]\nname = ula\n[sweep]\npsi = 0.5, inf\nk = 8, 20\n";
        let c = parse(text).unwrap();
        assert_eq!(run_rows(&c, 1).unwrap(), run_rows(&c, 3).unwrap());
    }

    #[test]
    fn mean_and_standard_error() {
        let (m, se) = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-12);
    }
}
