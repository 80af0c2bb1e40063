use std::fmt;

use crate::budget::RegimeLabel;
use crate::error::{ensure, Result};

/// Whether unit-level allocation by a learned model asymptotically beats individual-level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningRegime {
    /// `(1/sigma)(k/P)(1 - G) rho_bar_M`; infinite when `sigma = 0`.
    pub product: f64,
    pub ula_dominant: bool,
    /// Set when `sigma = 0`: outcomes are perfectly predictable and individual targeting wins.
    pub degenerate: bool,
    /// `(2 (k/P)(1 - G) rho_bar_M sqrt(L*), sigma^2)` when the optimal risk `L*` is supplied.
    pub general: Option<(f64, f64)>,
}

impl LearningRegime {
    pub fn label(&self) -> RegimeLabel {
        if self.ula_dominant {
            RegimeLabel::UlaIlaRand
        } else {
            RegimeLabel::IlaUlaRand
        }
    }

    /// The sufficient condition with a general optimal risk, when it was evaluated.
    pub fn general_holds(&self) -> Option<bool> {
        self.general.map(|(lhs, rhs)| lhs <= rhs)
    }
}

/// Classifies by `(1/sigma)(k/P)(1 - G) rho_bar_M <= 1/2`, the condition when the model class
/// contains the Bayes predictor.
pub fn classify_regime_learning(
    sigma: f64,
    k: usize,
    population: usize,
    gini: f64,
    rho_bar: f64,
    optimal_risk: Option<f64>,
) -> Result<LearningRegime> {
    ensure(sigma >= 0.0 && sigma.is_finite(), "sigma", format!("{sigma} must be finite and non-negative"))?;
    ensure(population > 0, "population", "must be positive")?;
    ensure(k <= population, "k", format!("{k} exceeds population {population}"))?;
    ensure((0.0..=1.0).contains(&gini), "gini", format!("{gini} not in [0, 1]"))?;
    ensure((0.0..=1.0).contains(&rho_bar), "rho_bar", format!("{rho_bar} not in [0, 1]"))?;
    let base = k as f64 / population as f64 * (1.0 - gini) * rho_bar;
    let general = match optimal_risk {
        Some(l) => {
            ensure(l >= 0.0, "optimal_risk", format!("{l} is negative"))?;
            Some((2.0 * base * l.sqrt(), sigma * sigma))
        }
        None => None,
    };
    if sigma == 0.0 {
        return Ok(LearningRegime {
            product: if base == 0.0 { 0.0 } else { f64::INFINITY },
            ula_dominant: false,
            degenerate: true,
            general,
        });
    }
    let product = base / sigma;
    Ok(LearningRegime { product, ula_dominant: product <= 0.5, degenerate: false, general })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recommendation {
    Sampling,
    Modeling,
    Either,
}

impl fmt::Display for Recommendation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Recommendation::Sampling => "sampling",
            Recommendation::Modeling => "modeling",
            Recommendation::Either => "either",
        })
    }
}

/// Rates within this relative band of each other are reported as [`Recommendation::Either`].
const BAND: f64 = 0.05;

fn compare(sampling: f64, modeling: f64) -> Recommendation {
    if modeling < (1.0 - BAND) * sampling {
        Recommendation::Modeling
    } else if modeling > (1.0 + BAND) * sampling {
        Recommendation::Sampling
    } else {
        Recommendation::Either
    }
}

/// Unit-level allocation: compares the excess regret of pure sampling, `(P^2 M lambda)^{1/3}`,
/// with that of modeling, `lambda^{1/5} P^{4/5} + P sqrt(E*)`.
pub fn modeling_vs_sampling(population: usize, units: usize, lambda: f64, excess_star: f64) -> Result<Recommendation> {
    ensure(population > 0, "population", "must be positive")?;
    ensure(units > 0 && units <= population, "units", format!("{units} not in 1..={population}"))?;
    ensure(lambda > 0.0 && lambda.is_finite(), "lambda", format!("{lambda} must be positive"))?;
    ensure(excess_star >= 0.0, "excess_star", format!("{excess_star} is negative"))?;
    let p = population as f64;
    let sampling = (p * p * units as f64 * lambda).cbrt();
    let modeling = lambda.powf(0.2) * p.powf(0.8) + p * excess_star.sqrt();
    Ok(compare(sampling, modeling))
}

/// Individual-level allocation: compares the linear regret of pure sampling,
/// `P lambda k / (P lambda + k)`, with that of modeling, `P sqrt(L*)`.
pub fn ila_modeling_vs_sampling(population: usize, k: usize, lambda: f64, optimal_risk: f64) -> Result<Recommendation> {
    ensure(population > 0, "population", "must be positive")?;
    ensure(k <= population, "k", format!("{k} exceeds population {population}"))?;
    ensure(lambda >= 0.0 && lambda.is_finite(), "lambda", format!("{lambda} must be non-negative"))?;
    ensure(optimal_risk >= 0.0, "optimal_risk", format!("{optimal_risk} is negative"))?;
    let p = population as f64;
    let k = k as f64;
    let denom = p * lambda + k;
    let sampling = if denom == 0.0 { 0.0 } else { p * lambda * k / denom };
    Ok(compare(sampling, p * optimal_risk.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_examples() {
        let r = classify_regime_learning(0.4, 10, 100, 0.2, 0.5, None).unwrap();
        assert!((r.product - 0.1).abs() < 1e-12);
        assert!(r.ula_dominant);
        let r = classify_regime_learning(0.4, 10, 100, 1.0, 0.5, None).unwrap();
        assert_eq!(r.product, 0.0);
        assert!(r.ula_dominant);
        let r = classify_regime_learning(0.0, 10, 100, 0.2, 0.5, None).unwrap();
        assert!(r.degenerate && !r.ula_dominant && r.product.is_infinite());
        assert!(!classify_regime_learning(1e-6, 10, 100, 0.2, 0.5, None).unwrap().ula_dominant);
    }

    #[test]
    fn general_condition_matches_bayes_case() {
        // With L* = sigma^2 the general condition is the product condition.
        let sigma: f64 = 0.3;
        let r = classify_regime_learning(sigma, 40, 100, 0.1, 0.6, Some(sigma * sigma)).unwrap();
        assert_eq!(r.general_holds(), Some(r.ula_dominant));
    }
}
