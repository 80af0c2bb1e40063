//! Human-readable plan of an experiment.

use std::fmt::Write as _;

use privalloc::bounds::{ila_adversarial_bound, ila_sampling_private_bound, ila_stochastic_bound};

use crate::config::ExperimentConfig;
use crate::strategy::{BoundKind, StrategyKind};
use crate::sweep::fmt_real;

fn axis<T: ToString>(name: &str, values: &[T]) -> Option<String> {
    if values.is_empty() {
        None
    } else {
        Some(format!("{name} = {}", values.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")))
    }
}

pub fn describe(config: &ExperimentConfig) -> String {
    let mut s = String::new();
    let p = &config.population;
    let grid = config.grid();
    let _ = writeln!(s, "population: P = {} ({} units of {}), delta_w = {}", p.size(), p.units, p.unit_size, p.delta_w);
    let generator = if config.sweep.gini.is_empty() { p.generator.as_str() } else { "gini_target" };
    let _ = writeln!(s, "generator: {generator}{}", if p.binary { " (binary welfare)" } else { "" });
    let axes: Vec<String> = [
        axis("k", &config.sweep.k),
        axis("G", &config.sweep.gini.iter().map(|x| fmt_real(*x)).collect::<Vec<_>>()),
        axis("lambda", &config.sweep.lambda.iter().map(|x| fmt_real(*x)).collect::<Vec<_>>()),
        axis("psi", &config.sweep.psi.iter().map(|x| fmt_real(*x)).collect::<Vec<_>>()),
        axis("sigma", &config.sweep.sigma.iter().map(|x| fmt_real(*x)).collect::<Vec<_>>()),
    ]
    .into_iter()
    .flatten()
    .collect();
    let _ = writeln!(s, "grid axes: {}", if axes.is_empty() { "none".to_string() } else { axes.join("; ") });
    let _ = writeln!(s, "seed: {}", config.seed);
    let names: Vec<&str> = config.strategies.iter().map(|st| st.kind.name()).collect();
    let _ = writeln!(s, "strategies: {}", names.join(", "));
    let _ = writeln!(
        s,
        "{} grid points x {} trials x {} strategies = {} runs",
        grid.len(),
        config.trials,
        config.strategies.len(),
        config.runs()
    );
    let _ = writeln!(s, "csv rows: {}", config.runs());
    let _ = writeln!(s, "bounds:");
    for st in &config.strategies {
        let kind = match st.kind.bound_kind() {
            BoundKind::None => "no bound".to_string(),
            BoundKind::HighProbability => format!("per run, probability 1 - {}", st.beta),
            BoundKind::Expectation => "on the mean".to_string(),
        };
        let _ = writeln!(s, "  {:<13} {kind}: {}", st.kind.name(), st.kind.bound_description());
    }
    let fixed: Vec<_> = config
        .strategies
        .iter()
        .filter(|st| matches!(st.kind, StrategyKind::Ila | StrategyKind::IlaIid | StrategyKind::IlaSampling))
        .collect();
    if !fixed.is_empty() {
        let _ = writeln!(s, "population-independent bound values:");
        for (g, point) in grid.iter().enumerate() {
            let values: Vec<String> = fixed
                .iter()
                .map(|st| {
                    let n = p.size();
                    let b = match st.kind {
                        StrategyKind::Ila => ila_adversarial_bound(n, point.psi, st.beta),
                        StrategyKind::IlaIid => ila_stochastic_bound(n, point.psi, st.beta, 1.0),
                        _ => ila_sampling_private_bound(n, point.k, point.lambda, point.psi, st.beta),
                    };
                    format!("{} {:.4}", st.kind.name(), b)
                })
                .collect();
            let _ = writeln!(
                s,
                "  point {g} (k = {}, lambda = {}, psi = {}): {}",
                point.k,
                fmt_real(point.lambda),
                fmt_real(point.psi),
                values.join(", ")
            );
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse;

    #[test]
    fn counts_runs() {
        let c = parse(
            "trials = 10\n[population]\nunits = 10\nunit_size = 10\n[strategy]\nname = rand\n[strategy]\nname = ila\n\
             [sweep]\nk = 10, 20, 30\npsi = 0.1, 0.5, 1, 2\n",
        )
        .unwrap();
        assert!(describe(&c).contains("12 grid points x 10 trials x 2 strategies = 240 runs"));
    }
}
