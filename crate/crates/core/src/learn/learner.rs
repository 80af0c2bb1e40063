use rand_distr::{Distribution, StandardNormal};

use crate::dp::check_psi;
use crate::error::{ensure, Result};

/// Features and binary label `y = 1` when welfare is high.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub features: Vec<f64>,
    pub label: bool,
}

/// Constants of the convex learning problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnerSpec {
    /// Per-example gradients are clipped to this norm.
    pub lipschitz: f64,
    /// Diameter of the parameter ball.
    pub diameter: f64,
    pub dim: usize,
    pub smoothness: f64,
}

impl LearnerSpec {
    pub fn new(lipschitz: f64, diameter: f64, dim: usize, smoothness: f64) -> Result<Self> {
        let spec = Self { lipschitz, diameter, dim, smoothness };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.lipschitz > 0.0, "lipschitz", "must be positive")?;
        ensure(self.diameter > 0.0, "diameter", "must be positive")?;
        ensure(self.dim > 0, "dim", "must be positive")?;
        ensure(self.smoothness > 0.0, "smoothness", "must be positive")
    }

    /// Squared-loss constants for features of norm at most `radius` and parameters in a ball
    /// of diameter `diameter`.
    pub fn squared_loss(dim: usize, radius: f64, diameter: f64) -> Result<Self> {
        let residual = 0.5 + 0.5 * diameter * radius;
        Self::new(2.0 * residual * radius, diameter, dim, 2.0 * radius * radius)
    }

    /// Whether `(D / L) min(4 / sqrt n, sqrt(2 psi) / sqrt p) <= 2 / xi`.
    pub fn step_condition_holds(&self, n: usize, psi: f64) -> bool {
        let privacy = if psi.is_infinite() { f64::INFINITY } else { (2.0 * psi).sqrt() / (self.dim as f64).sqrt() };
        let lhs = self.diameter / self.lipschitz * (4.0 / (n as f64).sqrt()).min(privacy);
        lhs <= 2.0 / self.smoothness
    }
}

/// Linear predictor `0.5 + theta . x`, centered on the uninformed prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub theta: Vec<f64>,
    pub spec: LearnerSpec,
}

impl LinearModel {
    pub const OFFSET: f64 = 0.5;

    pub fn zero(spec: LearnerSpec) -> Self {
        Self { theta: vec![0.0; spec.dim], spec }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        Self::OFFSET + self.theta.iter().zip(x).map(|(t, v)| t * v).sum::<f64>()
    }

    /// Prediction clipped to `[0, 1]`, used for ranking.
    pub fn score(&self, x: &[f64]) -> f64 {
        self.predict(x).clamp(0.0, 1.0)
    }

    pub fn norm(&self) -> f64 {
        self.theta.iter().map(|t| t * t).sum::<f64>().sqrt()
    }

    /// Flat export: `dim lipschitz diameter smoothness theta_0 .. theta_{p-1}`.
    pub fn to_flat(&self) -> String {
        let mut parts = vec![
            self.spec.dim.to_string(),
            self.spec.lipschitz.to_string(),
            self.spec.diameter.to_string(),
            self.spec.smoothness.to_string(),
        ];
        parts.extend(self.theta.iter().map(f64::to_string));
        parts.join(" ")
    }
}

fn project(theta: &mut [f64], radius: f64) {
    let norm = theta.iter().map(|t| t * t).sum::<f64>().sqrt();
    if norm > radius {
        let scale = radius / norm;
        theta.iter_mut().for_each(|t| *t *= scale);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub model: LinearModel,
    pub steps: usize,
    pub noise_std: f64,
    pub step_condition_holds: bool,
}

/// A learner that is `psi`-zCDP with respect to replacing one training example.
pub trait PrivateLearner {
    fn train(&self, data: &[LabeledExample], spec: &LearnerSpec, psi: f64, rng: &mut dyn rand::RngCore)
        -> Result<TrainReport>;
}

/// Projected gradient descent on the squared loss with per-example clipping and Gaussian noise.
///
/// Each pass splits the data into disjoint batches, so every example enters one step per
/// pass; the per-step budget is `psi / passes`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisyGradientDescent {
    pub passes: usize,
    /// Defaults to `ceil(sqrt n)`.
    pub batch_size: Option<usize>,
    /// Defaults to `1 / smoothness`.
    pub learning_rate: Option<f64>,
}

impl Default for NoisyGradientDescent {
    fn default() -> Self {
        Self { passes: 1, batch_size: None, learning_rate: None }
    }
}

impl PrivateLearner for NoisyGradientDescent {
    fn train(
        &self,
        data: &[LabeledExample],
        spec: &LearnerSpec,
        psi: f64,
        rng: &mut dyn rand::RngCore,
    ) -> Result<TrainReport> {
        spec.validate()?;
        check_psi(psi)?;
        ensure(!data.is_empty(), "data", "need at least one example")?;
        ensure(self.passes > 0, "passes", "must be positive")?;
        if let Some(bad) = data.iter().find(|e| e.features.len() != spec.dim) {
            return Err(crate::error::Error::param(
                "features",
                format!("example has {} features, spec expects {}", bad.features.len(), spec.dim),
            ));
        }
        let n = data.len();
        let batch = self.batch_size.unwrap_or_else(|| (n as f64).sqrt().ceil() as usize).clamp(1, n);
        let lr = self.learning_rate.unwrap_or(1.0 / spec.smoothness);
        let step_condition_holds = spec.step_condition_holds(n, psi);
        if !step_condition_holds {
            log::warn!("step-size condition of the learner's risk guarantee does not hold (n = {n}, psi = {psi})");
        }
        let step_psi = psi / self.passes as f64;
        let sensitivity = 2.0 * spec.lipschitz / batch as f64;
        let noise_std = if step_psi.is_infinite() { 0.0 } else { sensitivity / (2.0 * step_psi).sqrt() };
        let radius = spec.diameter / 2.0;

        let mut model = LinearModel::zero(*spec);
        let mut avg = vec![0.0; spec.dim];
        let mut averaged = 0usize;
        let steps_per_pass = n.div_ceil(batch);
        let total_steps = steps_per_pass * self.passes;
        let mut order: Vec<usize> = (0..n).collect();
        let mut grad = vec![0.0; spec.dim];
        let mut step = 0usize;
        for _ in 0..self.passes {
            rand::seq::SliceRandom::shuffle(order.as_mut_slice(), rng);
            for chunk in order.chunks(batch) {
                grad.iter_mut().for_each(|g| *g = 0.0);
                for &i in chunk {
                    let e = &data[i];
                    let y = if e.label { 1.0 } else { 0.0 };
                    let r = 2.0 * (model.predict(&e.features) - y);
                    let norm = r.abs() * e.features.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let clip = if norm > spec.lipschitz { spec.lipschitz / norm } else { 1.0 };
                    for (g, v) in grad.iter_mut().zip(&e.features) {
                        *g += clip * r * v;
                    }
                }
                // Dividing by the nominal batch size keeps the sensitivity at 2L / batch.
                for g in grad.iter_mut() {
                    let z: f64 = StandardNormal.sample(rng);
                    *g = *g / batch as f64 + noise_std * z;
                }
                for (t, g) in model.theta.iter_mut().zip(&grad) {
                    *t -= lr * g;
                }
                project(&mut model.theta, radius);
                step += 1;
                if 2 * step > total_steps {
                    for (a, t) in avg.iter_mut().zip(&model.theta) {
                        *a += t;
                    }
                    averaged += 1;
                }
            }
        }
        if averaged > 0 {
            model.theta = avg.into_iter().map(|a| a / averaged as f64).collect();
        }
        Ok(TrainReport { model, steps: total_steps, noise_std, step_condition_holds })
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn data(n: usize) -> Vec<LabeledExample> {
        // Label is high exactly when the second feature is positive.
        (0..n)
            .map(|i| {
                let x = if i % 2 == 0 { 0.5 } else { -0.5 };
                LabeledExample { features: vec![1.0, x], label: x > 0.0 }
            })
            .collect()
    }

    fn squared_risk(model: &LinearModel, data: &[LabeledExample]) -> f64 {
        data.iter()
            .map(|e| {
                let y = if e.label { 1.0 } else { 0.0 };
                (model.predict(&e.features) - y).powi(2)
            })
            .sum::<f64>()
            / data.len() as f64
    }

    #[test]
    fn squared_loss_constants() {
        let spec = LearnerSpec::squared_loss(4, 2.0, 2.0).unwrap();
        assert_eq!(spec.lipschitz, 2.0 * 2.5 * 2.0);
        assert_eq!(spec.smoothness, 8.0);
        assert_eq!(spec.diameter, 2.0);
    }

    #[test]
    fn noise_free_training_beats_the_zero_model() {
        let spec = LearnerSpec::squared_loss(2, 2f64.sqrt(), 2.0).unwrap();
        let d = data(400);
        let gd = NoisyGradientDescent { passes: 20, ..Default::default() };
        let report = gd.train(&d, &spec, f64::INFINITY, &mut seeded(1)).unwrap();
        assert_eq!(report.noise_std, 0.0);
        assert!(squared_risk(&report.model, &d) < 0.5 * squared_risk(&LinearModel::zero(spec), &d));
        assert!(report.model.theta[1] > 0.0);
    }

    #[test]
    fn parameters_stay_in_the_ball() {
        let spec = LearnerSpec::squared_loss(2, 2f64.sqrt(), 0.2).unwrap();
        let report = NoisyGradientDescent::default().train(&data(100), &spec, 0.01, &mut seeded(2)).unwrap();
        assert!(report.model.norm() <= 0.1 + 1e-12);
        assert!(report.noise_std > 0.0);
        assert_eq!(report.steps, 10);
    }

    #[test]
    fn rejects_wrong_dimension() {
        let spec = LearnerSpec::squared_loss(3, 1.0, 2.0).unwrap();
        assert!(NoisyGradientDescent::default().train(&data(10), &spec, 1.0, &mut seeded(3)).is_err());
    }

    #[test]
    fn flat_export_lists_parameters() {
        let spec = LearnerSpec::new(1.0, 2.0, 2, 3.0).unwrap();
        let model = LinearModel { theta: vec![0.25, -0.5], spec };
        assert_eq!(model.to_flat(), "2 1 2 3 0.25 -0.5");
        assert_eq!(model.score(&[4.0, 0.0]), 1.0);
    }
}
