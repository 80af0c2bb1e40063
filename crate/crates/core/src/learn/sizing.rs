use crate::dp::check_psi;
use crate::error::{ensure, Result};

use super::learner::LearnerSpec;

/// Training sample size and the formula value it came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleSize {
    /// Size to sample, rounded up and capped at the population.
    pub n: usize,
    /// Uncapped formula value.
    pub raw: f64,
    pub instance_specific: bool,
}

fn check(population: usize, lambda: f64, psi: f64, spec: &LearnerSpec) -> Result<()> {
    ensure(population > 0, "population", "must be positive")?;
    ensure(lambda > 0.0, "lambda", format!("{lambda} must be positive"))?;
    check_psi(psi)?;
    spec.validate()
}

fn finish(population: usize, raw: f64, instance_specific: bool) -> SampleSize {
    let n = if raw >= population as f64 { population } else { raw.ceil() as usize };
    SampleSize { n, raw, instance_specific }
}

/// `max((P/lambda sqrt(10 L D (2 psi)^{-1/2} sqrt p))^{2/3}, (P/lambda sqrt(10 L D))^{4/5})`.
fn generic(population: usize, lambda: f64, psi: f64, spec: &LearnerSpec) -> f64 {
    let ratio = population as f64 / lambda;
    let ld = spec.lipschitz * spec.diameter;
    let privacy = if psi.is_infinite() {
        0.0
    } else {
        (ratio * (10.0 * ld * (2.0 * psi).powf(-0.5) * (spec.dim as f64).sqrt()).sqrt()).powf(2.0 / 3.0)
    };
    let statistical = (ratio * (10.0 * ld).sqrt()).powf(0.8);
    privacy.max(statistical)
}

/// `max(sqrt(5 P L D sqrt p / (lambda sqrt(2 psi floor))), (5 P L D / (lambda sqrt floor))^{2/3})`.
fn instance(population: usize, lambda: f64, psi: f64, spec: &LearnerSpec, floor: f64) -> f64 {
    let pld = 5.0 * population as f64 * spec.lipschitz * spec.diameter;
    let privacy = if psi.is_infinite() {
        0.0
    } else {
        (pld * (spec.dim as f64).sqrt() / (lambda * (2.0 * psi * floor).sqrt())).sqrt()
    };
    let statistical = (pld / (lambda * floor.sqrt())).powf(2.0 / 3.0);
    privacy.max(statistical)
}

/// Training sample size for individual-level allocation by a learned model. `risk_floor` is
/// a lower bound on the risk of the best model in the class.
pub fn ila_sample_size(
    population: usize,
    lambda: f64,
    psi: f64,
    spec: &LearnerSpec,
    risk_floor: Option<f64>,
) -> Result<SampleSize> {
    check(population, lambda, psi, spec)?;
    Ok(match risk_floor {
        None => finish(population, generic(population, lambda, psi, spec), false),
        Some(floor) => {
            ensure(floor > 0.0, "risk_floor", format!("{floor} must be positive"))?;
            finish(population, instance(population, lambda, psi, spec, floor), true)
        }
    })
}

/// Training sample size for unit-level allocation by a learned model. `excess_floor` is a
/// lower bound on the excess risk of the best model in the class.
pub fn ula_sample_size(
    population: usize,
    lambda: f64,
    psi: f64,
    spec: &LearnerSpec,
    excess_floor: Option<f64>,
) -> Result<SampleSize> {
    check(population, lambda, psi, spec)?;
    Ok(match excess_floor {
        None => finish(population, generic(population, lambda, psi, spec), false),
        Some(floor) => {
            ensure(floor > 0.0, "excess_floor", format!("{floor} must be positive"))?;
            finish(population, instance(population, lambda, psi, spec, floor), true)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> LearnerSpec {
        LearnerSpec::new(1.0, 1.0, 4, 1.0).unwrap()
    }

    #[test]
    fn generic_size_matches_formula() {
        let s = ila_sample_size(10_000, 1.0, 1.0, &spec(), None).unwrap();
        let privacy = (10_000.0 * (10.0 * 0.5f64.sqrt() * 2.0).sqrt()).powf(2.0 / 3.0);
        let statistical = (10_000.0 * 10f64.sqrt()).powf(0.8);
        assert!((s.raw - privacy.max(statistical)).abs() < 1e-9 * s.raw);
        assert_eq!(s.n, s.raw.ceil() as usize);
        assert!(!s.instance_specific);
    }

    #[test]
    fn instance_size_matches_formula() {
        let s = ula_sample_size(10_000, 2.0, 0.5, &spec(), Some(0.04)).unwrap();
        let pld = 5.0 * 10_000.0;
        let privacy = (pld * 2.0 / (2.0 * (2.0 * 0.5 * 0.04f64).sqrt())).sqrt();
        let statistical = (pld / (2.0 * 0.2)).powf(2.0 / 3.0);
        assert!((s.raw - privacy.max(statistical)).abs() < 1e-9 * s.raw);
        assert!(s.instance_specific);
    }

    #[test]
    fn capped_at_population() {
        let s = ila_sample_size(100, 0.001, 1.0, &spec(), None).unwrap();
        assert_eq!(s.n, 100);
        assert!(s.raw > 100.0);
    }

    #[test]
    fn invalid_inputs() {
        assert!(ila_sample_size(100, 0.0, 1.0, &spec(), None).is_err());
        assert!(ula_sample_size(100, 1.0, 1.0, &spec(), Some(0.0)).is_err());
    }
}
