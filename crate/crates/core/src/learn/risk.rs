use rand::RngCore;

use super::learner::LinearModel;
use crate::error::{ensure, Result};
use crate::synth::LabelDistribution;

/// Squared-loss risk split into excess risk and irreducible (Bayes) risk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskDecomposition {
    /// `excess + irreducible`.
    pub total: f64,
    pub excess: f64,
    pub irreducible: f64,
    /// Squared loss against freshly drawn labels.
    pub measured_total: f64,
    pub excess_se: f64,
    pub irreducible_se: f64,
    pub measured_se: f64,
    pub samples: usize,
}

impl RiskDecomposition {
    /// Whether the measured loss agrees with `excess + irreducible` within `z` standard errors.
    pub fn consistent(&self, z: f64) -> bool {
        let se = (self.measured_se.powi(2) + self.excess_se.powi(2) + self.irreducible_se.powi(2)).sqrt();
        (self.measured_total - self.total).abs() <= z * se + 1e-12
    }
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Monte Carlo risk decomposition of the clipped predictor, with labels drawn fresh from `dist`.
pub fn risk_decompose(
    model: &LinearModel,
    dist: &dyn LabelDistribution,
    samples: usize,
    rng: &mut dyn RngCore,
) -> Result<RiskDecomposition> {
    ensure(samples > 0, "samples", "must be positive")?;
    ensure(
        dist.dim() == model.spec.dim,
        "model",
        format!("model has {} features, distribution {}", model.spec.dim, dist.dim()),
    )?;
    let mut excess = Vec::with_capacity(samples);
    let mut irreducible = Vec::with_capacity(samples);
    let mut measured = Vec::with_capacity(samples);
    for _ in 0..samples {
        let x = dist.sample_features(rng);
        let eta = dist.eta(&x);
        let f = model.score(&x);
        let y = if rand::Rng::random::<f64>(rng) < eta { 1.0 } else { 0.0 };
        excess.push((f - eta).powi(2));
        irreducible.push(eta * (1.0 - eta));
        measured.push((f - y).powi(2));
    }
    let (excess, excess_se) = mean_se(&excess);
    let (irreducible, irreducible_se) = mean_se(&irreducible);
    let (measured_total, measured_se) = mean_se(&measured);
    Ok(RiskDecomposition {
        total: excess + irreducible,
        excess,
        irreducible,
        measured_total,
        excess_se,
        irreducible_se,
        measured_se,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::LearnerSpec;
    use crate::rng::seeded;
    use crate::synth::TwoPointEta;

    #[test]
    fn constant_model_on_two_point_eta() {
        // eta in {0.2, 0.8} equally likely; constant 0.5 predictor.
        let dist = TwoPointEta::new(3, 0.2, 0.8, 0.0).unwrap();
        let spec = LearnerSpec::new(1.0, 2.0, 3, 1.0).unwrap();
        let model = LinearModel::zero(spec);
        let r = risk_decompose(&model, &dist, 200_000, &mut seeded(1)).unwrap();
        assert!((r.excess - 0.09).abs() < 1e-12);
        assert!((r.irreducible - 0.16).abs() < 1e-12);
        assert!((r.total - r.excess - r.irreducible).abs() < 1e-9);
        assert!(r.consistent(3.0), "{r:?}");
    }

    #[test]
    fn bayes_model_has_no_excess() {
        let dist = TwoPointEta::new(4, 0.0, 1.0, 0.5).unwrap();
        let spec = LearnerSpec::new(1.0, 4.0, 4, 1.0).unwrap();
        let model = LinearModel { theta: vec![-0.5, 0.0, 1.0, 0.0], spec };
        let r = risk_decompose(&model, &dist, 10_000, &mut seeded(2)).unwrap();
        assert!(r.excess < 1e-20);
        assert_eq!(r.irreducible, 0.0);
        assert_eq!(r.measured_total, 0.0);
    }
}
