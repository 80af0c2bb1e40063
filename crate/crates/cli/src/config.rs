//! Experiment configuration: flat `key = value` lines grouped into `[section]` blocks.
//!
//! ```text
//! trials = 100
//! seed = 7
//!
//! [population]
//! units = 20
//! unit_size = 50
//! delta_w = 0.5
//! generator = gini_target
//! gini = 0.3
//! rho_bar = 0.4
//!
//! [strategy]
//! name = ula
//! beta = 0.05
//!
//! [sweep]
//! psi = 0.1, 1, inf
//! k = 100, 500
//! ```

use std::fmt::Write as _;
use std::path::PathBuf;

use privalloc::synth::{Generator, PopulationSpec, TwoPointEta};

use crate::error::CliError;
use crate::strategy::StrategyKind;

/// How the mean unit profile of a `gini_target` population is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RhoBar {
    Fixed(f64),
    /// `(1 - k/P)(1 - G)`: the hard-instance density, scaled down so every `G` is reachable.
    Coupled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PopulationSection {
    pub units: usize,
    pub unit_size: usize,
    pub delta_w: f64,
    pub generator: String,
    pub low_fraction: f64,
    pub a: f64,
    pub b: f64,
    pub gini: f64,
    pub rho_bar: RhoBar,
    pub ones: Option<usize>,
    pub binary: bool,
    pub k: Option<usize>,
}

impl PopulationSection {
    pub fn size(&self) -> usize {
        self.units * self.unit_size
    }

    /// Population spec at one grid point. A swept Gini switches the generator to `gini_target`.
    pub fn spec(&self, k: usize, gini: Option<f64>, seed: u64) -> Result<PopulationSpec, CliError> {
        let p = self.size();
        let generator = match (self.generator.as_str(), gini) {
            ("gini_target", _) | (_, Some(_)) => {
                let g = gini.unwrap_or(self.gini);
                let rho_bar = match self.rho_bar {
                    RhoBar::Fixed(r) => r,
                    RhoBar::Coupled => (1.0 - k as f64 / p as f64) * (1.0 - g),
                };
                Generator::GiniTarget { gini: g, rho_bar }
            }
            ("two_point", None) => Generator::TwoPoint { low_fraction: self.low_fraction },
            ("beta_units", None) => Generator::BetaUnits { a: self.a, b: self.b },
            ("hard_instance", None) => Generator::HardInstance { ones: self.ones.unwrap_or(p - k) },
            ("uniform", None) => Generator::Uniform,
            (other, None) => return Err(CliError::config(format!("unknown generator '{other}'"))),
        };
        Ok(PopulationSpec { units: self.units, unit_size: self.unit_size, delta_w: self.delta_w, generator, binary: self.binary, seed })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategySpec {
    pub kind: StrategyKind,
    pub beta: f64,
    pub margin_scale: f64,
}

/// Axes of the sweep grid. An empty axis takes its default.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepGrid {
    pub psi: Vec<f64>,
    pub lambda: Vec<f64>,
    pub k: Vec<usize>,
    pub gini: Vec<f64>,
    pub sigma: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningSection {
    pub dim: usize,
    pub eta_low: f64,
    pub eta_high: f64,
    pub tilt: f64,
    pub train_size: usize,
    pub cells: usize,
    pub min_cell: usize,
    pub learner_psi: f64,
    pub risk_samples: usize,
}

impl Default for LearningSection {
    fn default() -> Self {
        Self {
            dim: 6,
            eta_low: 0.2,
            eta_high: 0.8,
            tilt: 1.0,
            train_size: 1000,
            cells: 10,
            min_cell: 1,
            learner_psi: 1.0,
            risk_samples: 20_000,
        }
    }
}

impl LearningSection {
    /// Two-point distribution, or the one with irreducible risk `sigma^2` when swept.
    pub fn distribution(&self, sigma: Option<f64>) -> Result<TwoPointEta, CliError> {
        Ok(match sigma {
            Some(s) => TwoPointEta::with_sigma(self.dim, s, self.tilt)?,
            None => TwoPointEta::new(self.dim, self.eta_low, self.eta_high, self.tilt)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub population: PopulationSection,
    pub strategies: Vec<StrategySpec>,
    pub sweep: SweepGrid,
    pub learning: LearningSection,
    pub trials: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

/// One cell of the sweep grid with every axis resolved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub k: usize,
    pub gini: Option<f64>,
    pub lambda: f64,
    pub psi: f64,
    pub sigma: Option<f64>,
}

impl ExperimentConfig {
    pub fn default_k(&self) -> usize {
        self.population.k.unwrap_or(self.population.size() / 10)
    }

    /// Grid points in `k`, `G`, `lambda`, `psi`, `sigma` nesting order.
    pub fn grid(&self) -> Vec<GridPoint> {
        let ks = if self.sweep.k.is_empty() { vec![self.default_k()] } else { self.sweep.k.clone() };
        let ginis: Vec<Option<f64>> =
            if self.sweep.gini.is_empty() { vec![None] } else { self.sweep.gini.iter().copied().map(Some).collect() };
        let lambdas = if self.sweep.lambda.is_empty() { vec![0.0] } else { self.sweep.lambda.clone() };
        let psis = if self.sweep.psi.is_empty() { vec![1.0] } else { self.sweep.psi.clone() };
        let sigmas: Vec<Option<f64>> =
            if self.sweep.sigma.is_empty() { vec![None] } else { self.sweep.sigma.iter().copied().map(Some).collect() };
        let mut points = Vec::new();
        for &k in &ks {
            for &gini in &ginis {
                for &lambda in &lambdas {
                    for &psi in &psis {
                        for &sigma in &sigmas {
                            points.push(GridPoint { k, gini, lambda, psi, sigma });
                        }
                    }
                }
            }
        }
        points
    }

    pub fn runs(&self) -> usize {
        self.grid().len() * self.trials * self.strategies.len()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let p = self.population.size();
        if self.trials == 0 {
            return Err(CliError::config("trials must be at least 1"));
        }
        for point in self.grid() {
            if point.k > p {
                return Err(CliError::config(format!("k = {} exceeds population {p}", point.k)));
            }
            if point.psi.is_nan() || point.psi <= 0.0 {
                return Err(CliError::config(format!("psi = {} must be positive", point.psi)));
            }
            if !(point.lambda >= 0.0 && point.lambda.is_finite()) {
                return Err(CliError::config(format!("lambda = {} must be non-negative", point.lambda)));
            }
            if let Some(s) = point.sigma {
                if !(s > 0.0 && s <= 0.5) {
                    return Err(CliError::config(format!("sigma = {s} not in (0, 0.5]")));
                }
            }
            self.population.spec(point.k, point.gini, 0)?.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Top,
    Population,
    Strategy,
    Sweep,
    Learning,
}

#[derive(Default)]
struct RawStrategy {
    line: usize,
    name: Option<String>,
    beta: Option<f64>,
    margin_scale: Option<f64>,
}

fn parse_value<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::config(format!("line {line}: invalid value '{value}' for '{key}'")))
}

fn parse_real(line: usize, key: &str, value: &str) -> Result<f64, CliError> {
    match value {
        "inf" | "infinity" => Ok(f64::INFINITY),
        _ => parse_value(line, key, value),
    }
}

fn parse_list<T>(
    line: usize,
    key: &str,
    value: &str,
    parse: impl Fn(usize, &str, &str) -> Result<T, CliError>,
) -> Result<Vec<T>, CliError> {
    let items: Vec<&str> = value.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(CliError::config(format!("line {line}: '{key}' needs at least one value")));
    }
    items.into_iter().map(|v| parse(line, key, v)).collect()
}

/// Parses a configuration. Missing required fields are reported together.
pub fn parse(text: &str) -> Result<ExperimentConfig, CliError> {
    let mut section = Section::Top;
    let mut seen_population = false;
    let mut trials = None;
    let mut seed = 0u64;
    let mut output = None;
    let mut units = None;
    let mut unit_size = None;
    let mut population = PopulationSection {
        units: 0,
        unit_size: 0,
        delta_w: 0.5,
        generator: "gini_target".into(),
        low_fraction: 0.5,
        a: 2.0,
        b: 5.0,
        gini: 0.0,
        rho_bar: RhoBar::Fixed(0.5),
        ones: None,
        binary: false,
        k: None,
    };
    let mut strategies: Vec<RawStrategy> = Vec::new();
    let mut sweep = SweepGrid::default();
    let mut learning = LearningSection::default();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            section = match name.trim() {
                "population" => {
                    if seen_population {
                        return Err(CliError::config(format!("line {line}: duplicate [population] section")));
                    }
                    seen_population = true;
                    Section::Population
                }
                "strategy" => {
                    strategies.push(RawStrategy { line, ..Default::default() });
                    Section::Strategy
                }
                "sweep" => Section::Sweep,
                "learning" => Section::Learning,
                other => return Err(CliError::config(format!("line {line}: unknown section [{other}]"))),
            };
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(CliError::config(format!("line {line}: expected 'key = value'")));
        };
        let (key, value) = (key.trim(), value.trim());
        let unknown = || CliError::config(format!("line {line}: unknown key '{key}'"));
        match section {
            Section::Top => match key {
                "trials" => trials = Some(parse_value(line, key, value)?),
                "seed" => seed = parse_value(line, key, value)?,
                "output" => output = Some(PathBuf::from(value)),
                _ => return Err(unknown()),
            },
            Section::Population => match key {
                "units" => units = Some(parse_value(line, key, value)?),
                "unit_size" => unit_size = Some(parse_value(line, key, value)?),
                "delta_w" => population.delta_w = parse_real(line, key, value)?,
                "generator" => population.generator = value.to_string(),
                "low_fraction" => population.low_fraction = parse_real(line, key, value)?,
                "a" => population.a = parse_real(line, key, value)?,
                "b" => population.b = parse_real(line, key, value)?,
                "gini" | "G" => population.gini = parse_real(line, key, value)?,
                "rho_bar" => {
                    population.rho_bar = match value {
                        "coupled" => RhoBar::Coupled,
                        _ => RhoBar::Fixed(parse_real(line, key, value)?),
                    }
                }
                "ones" => population.ones = Some(parse_value(line, key, value)?),
                "binary" => population.binary = parse_value(line, key, value)?,
                "k" => population.k = Some(parse_value(line, key, value)?),
                _ => return Err(unknown()),
            },
            Section::Strategy => {
                let s = strategies.last_mut().expect("inside a strategy block");
                match key {
                    "name" => s.name = Some(value.to_string()),
                    "beta" => s.beta = Some(parse_real(line, key, value)?),
                    "margin_scale" => s.margin_scale = Some(parse_real(line, key, value)?),
                    _ => return Err(unknown()),
                }
            }
            Section::Sweep => match key {
                "psi" => sweep.psi = parse_list(line, key, value, parse_real)?,
                "lambda" => sweep.lambda = parse_list(line, key, value, parse_real)?,
                "k" => sweep.k = parse_list(line, key, value, parse_value)?,
                "G" | "gini" => sweep.gini = parse_list(line, key, value, parse_real)?,
                "sigma" => sweep.sigma = parse_list(line, key, value, parse_real)?,
                _ => return Err(unknown()),
            },
            Section::Learning => match key {
                "dim" => learning.dim = parse_value(line, key, value)?,
                "eta_low" => learning.eta_low = parse_real(line, key, value)?,
                "eta_high" => learning.eta_high = parse_real(line, key, value)?,
                "tilt" => learning.tilt = parse_real(line, key, value)?,
                "train_size" => learning.train_size = parse_value(line, key, value)?,
                "cells" => learning.cells = parse_value(line, key, value)?,
                "min_cell" => learning.min_cell = parse_value(line, key, value)?,
                "learner_psi" => learning.learner_psi = parse_real(line, key, value)?,
                "risk_samples" => learning.risk_samples = parse_value(line, key, value)?,
                _ => return Err(unknown()),
            },
        }
    }

    let mut missing = Vec::new();
    if trials.is_none() {
        missing.push("trials");
    }
    if units.is_none() {
        missing.push("[population] units");
    }
    if unit_size.is_none() {
        missing.push("[population] unit_size");
    }
    if strategies.is_empty() {
        missing.push("[strategy] name");
    }
    if !missing.is_empty() {
        let mut msg = String::from("missing required fields:");
        for m in missing {
            let _ = write!(msg, " {m};");
        }
        msg.pop();
        return Err(CliError::config(msg));
    }
    population.units = units.unwrap_or_default();
    population.unit_size = unit_size.unwrap_or_default();
    if population.units == 0 || population.unit_size == 0 {
        return Err(CliError::config("units and unit_size must be positive"));
    }
    let strategies = strategies
        .into_iter()
        .map(|s| {
            let name = s
                .name
                .ok_or_else(|| CliError::config(format!("line {}: [strategy] block without a name", s.line)))?;
            let kind = name
                .parse::<StrategyKind>()
                .map_err(|_| CliError::config(format!("line {}: unknown strategy '{name}'", s.line)))?;
            let beta = s.beta.unwrap_or(0.1);
            if !(beta > 0.0 && beta < 1.0) {
                return Err(CliError::config(format!("line {}: beta = {beta} not in (0, 1)", s.line)));
            }
            Ok(StrategySpec { kind, beta, margin_scale: s.margin_scale.unwrap_or(1.0) })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let config = ExperimentConfig {
        population,
        strategies,
        sweep,
        learning,
        trials: trials.unwrap_or_default(),
        seed,
        output,
    };
    config.validate()?;
    Ok(config)
}

/// Renders a config in the same grammar; parsing the result gives the same config.
pub fn render(config: &ExperimentConfig) -> String {
    fn list<T: ToString>(xs: &[T]) -> String {
        xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
    }
    let mut s = String::new();
    let _ = writeln!(s, "trials = {}", config.trials);
    let _ = writeln!(s, "seed = {}", config.seed);
    if let Some(out) = &config.output {
        let _ = writeln!(s, "output = {}", out.display());
    }
    let p = &config.population;
    let _ = writeln!(s, "\n[population]");
    let _ = writeln!(s, "units = {}", p.units);
    let _ = writeln!(s, "unit_size = {}", p.unit_size);
    let _ = writeln!(s, "delta_w = {}", p.delta_w);
    let _ = writeln!(s, "generator = {}", p.generator);
    match p.generator.as_str() {
        "two_point" => {
            let _ = writeln!(s, "low_fraction = {}", p.low_fraction);
        }
        "beta_units" => {
            let _ = writeln!(s, "a = {}\nb = {}", p.a, p.b);
        }
        "hard_instance" => {
            if let Some(ones) = p.ones {
                let _ = writeln!(s, "ones = {ones}");
            }
        }
        _ => {}
    }
    if p.generator == "gini_target" || !config.sweep.gini.is_empty() {
        let _ = writeln!(s, "gini = {}", p.gini);
        match p.rho_bar {
            RhoBar::Fixed(r) => {
                let _ = writeln!(s, "rho_bar = {r}");
            }
            RhoBar::Coupled => {
                let _ = writeln!(s, "rho_bar = coupled");
            }
        }
    }
    if p.binary {
        let _ = writeln!(s, "binary = true");
    }
    if let Some(k) = p.k {
        let _ = writeln!(s, "k = {k}");
    }
    for st in &config.strategies {
        let _ = writeln!(s, "\n[strategy]\nname = {}\nbeta = {}", st.kind, st.beta);
        if st.margin_scale != 1.0 {
            let _ = writeln!(s, "margin_scale = {}", st.margin_scale);
        }
    }
    let g = &config.sweep;
    if g != &SweepGrid::default() {
        let _ = writeln!(s, "\n[sweep]");
        for (name, values) in [("psi", list(&g.psi)), ("lambda", list(&g.lambda)), ("k", list(&g.k))] {
            if !values.is_empty() {
                let _ = writeln!(s, "{name} = {values}");
            }
        }
        if !g.gini.is_empty() {
            let _ = writeln!(s, "G = {}", list(&g.gini));
        }
        if !g.sigma.is_empty() {
            let _ = writeln!(s, "sigma = {}", list(&g.sigma));
        }
    }
    if config.strategies.iter().any(|s| s.kind.is_learned()) {
        let l = &config.learning;
        let _ = writeln!(s, "\n[learning]");
        let _ = writeln!(
            s,
            "dim = {}\neta_low = {}\neta_high = {}\ntilt = {}\ntrain_size = {}\ncells = {}\nmin_cell = {}\nlearner_psi = {}\nrisk_samples = {}",
            l.dim, l.eta_low, l.eta_high, l.tilt, l.train_size, l.cells, l.min_cell, l.learner_psi, l.risk_samples
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = "trials = 10\nseed = 3\n[population]\nunits = 4\nunit_size = 5\n\
        [strategy]\nname = rand\n[strategy]\nname = ula\nbeta = 0.05\n[sweep]\npsi = 0.1, 1, inf\nk = 2, 4, 6, 8\n";

    #[test]
    fn parses_sections_and_lists() {
        let c = parse(BASIC).unwrap();
        assert_eq!(c.trials, 10);
        assert_eq!(c.strategies.len(), 2);
        assert_eq!(c.strategies[1].beta, 0.05);
        assert_eq!(c.sweep.psi, vec![0.1, 1.0, f64::INFINITY]);
        assert_eq!(c.grid().len(), 12);
        assert_eq!(c.runs(), 240);
    }

    #[test]
    fn render_round_trips() {
        let c = parse(BASIC).unwrap();
        assert_eq!(parse(&render(&c)).unwrap(), c);
    }

    #[test]
    fn empty_config_lists_required_fields() {
        let err = parse("").unwrap_err().to_string();
        assert!(err.contains("trials") && err.contains("units") && err.contains("unit_size") && err.contains("[strategy]"));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse("trials = 1\n[population]\nunits = x\n").unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
        assert!(parse("trials = 1\n[bogus]\n").unwrap_err().to_string().contains("line 2"));
    }
}
