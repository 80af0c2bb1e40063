//! Regime classification from summary statistics, optionally estimated privately.

use std::fmt::Write as _;

use privalloc::budget::classify_regime_sampling;
use privalloc::dp::gaussian_mechanism;
use privalloc::learn::classify_regime_learning;
use privalloc::{seeded, Population, UnitProfile};

use crate::error::CliError;
use crate::sweep::fmt_real;

/// Inequality statistics feeding the classifiers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeStats {
    pub gini: f64,
    pub rho_bar: f64,
    pub population: usize,
    /// Privacy spent estimating the statistics, if any.
    pub psi: Option<f64>,
}

/// Exact statistics of a population's unit profile. An all-low population has `G = 0`.
pub fn exact_stats(pop: &Population) -> RegimeStats {
    let profile = pop.unit_profile();
    RegimeStats {
        gini: profile.gini().unwrap_or(0.0),
        rho_bar: profile.mean(),
        population: pop.size(),
        psi: None,
    }
}

/// Releases each unit's high-welfare fraction with Gaussian noise of sensitivity `1/N` and
/// computes the statistics from the clamped releases. Units are disjoint, so the whole
/// release is `psi`-zCDP.
pub fn private_stats(pop: &Population, psi: f64, seed: u64) -> Result<RegimeStats, CliError> {
    let mut rng = seeded(seed);
    let sensitivity = 1.0 / pop.partition().min_size() as f64;
    let noisy = pop
        .unit_profile()
        .rho()
        .iter()
        .map(|&r| gaussian_mechanism(r, sensitivity, psi, &mut rng).map(|v| v.clamp(0.0, 1.0)))
        .collect::<Result<Vec<_>, _>>()?;
    let profile = UnitProfile::new(noisy)?;
    Ok(RegimeStats {
        gini: profile.gini().unwrap_or(0.0),
        rho_bar: profile.mean(),
        population: pop.size(),
        psi: Some(psi),
    })
}

pub fn report(stats: &RegimeStats, k: usize, lambda: f64, sigma: Option<f64>) -> Result<String, CliError> {
    let mut s = String::new();
    let source = match stats.psi {
        Some(psi) => format!("private estimate, psi = {}", fmt_real(psi)),
        None => "exact".to_string(),
    };
    let _ = writeln!(s, "statistics ({source}): G = {:.6}, rho_bar = {:.6}", stats.gini, stats.rho_bar);
    let _ = writeln!(s, "P = {}, k = {k}", stats.population);
    let sampling = classify_regime_sampling(stats.gini, lambda, stats.rho_bar, k, stats.population)?;
    let _ = writeln!(
        s,
        "sampling regime at lambda = {}: {} (lambda_low = {:.6}, lambda_high = {:.6})",
        fmt_real(lambda),
        sampling.label,
        sampling.lambda_low,
        sampling.lambda_high
    );
    if let Some(sigma) = sigma {
        let learning = classify_regime_learning(sigma, k, stats.population, stats.gini, stats.rho_bar, None)?;
        let winner = if learning.ula_dominant { "ULA" } else { "ILA" };
        let _ = writeln!(
            s,
            "learning regime at sigma = {}: product = {:.6}, {winner} favored{}",
            fmt_real(sigma),
            learning.product,
            if learning.degenerate { " (noise-free outcomes)" } else { "" }
        );
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reports_sampling_label() {
        let stats = RegimeStats { gini: 0.2, rho_bar: 0.5, population: 1000, psi: None };
        let text = report(&stats, 100, 0.5, Some(0.4)).unwrap();
        assert!(text.contains("ULA>ILA>RAND"), "{text}");
        assert!(text.contains("ULA favored"), "{text}");
    }

    #[test]
    fn private_stats_converge_to_exact() {
        let pop = Population::new((0..400).map(|i| if i % 3 == 0 { 0.9 } else { 0.1 }).collect(), 40, 0.5).unwrap();
        let exact = exact_stats(&pop);
        let private = private_stats(&pop, 1e8, 1).unwrap();
        assert!((exact.rho_bar - private.rho_bar).abs() < 1e-3);
    }
}
