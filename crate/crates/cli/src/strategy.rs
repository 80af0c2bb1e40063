//! Named allocation strategies and the analytic bound attached to each.

use std::fmt;
use std::str::FromStr;

use privalloc::alloc::{
    ila_nonprivate, ila_params_adversarial, ila_params_stochastic, ila_private, psi_split, ula_nonprivate,
    ula_private_private_membership, ula_private_public_membership,
};
use privalloc::bounds::{
    ila_adversarial_bound, ila_sampling_private_bound, ila_stochastic_bound, ula_baseline,
    ula_private_membership_bound, ula_privacy_term, ula_sampling_bound,
};
use privalloc::budget::{ila_with_sampling_private, ula_constant, ula_with_sampling_private, SamplingEconomy};
use privalloc::learn::{LearnerSpec, NoisyGradientDescent, PredictiveSetup, PredictiveTrial};
use privalloc::synth::GeneratedPopulation;
use privalloc::{random_allocation, regret, Allocation, Error, RegretReport, SimRng};
use serde_json::{json, Map, Value};

use crate::config::{LearningSection, StrategySpec};
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StrategyKind {
    Rand,
    IlaExact,
    Ila,
    IlaIid,
    Ula,
    UlaPm,
    IlaSampling,
    UlaSampling,
    IlaLearned,
    UlaLearned,
}

/// How a strategy's bound is meant to be read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    None,
    /// Holds for each run with probability at least `1 - beta`.
    HighProbability,
    /// Bounds the mean over runs.
    Expectation,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 10] = [
        StrategyKind::Rand,
        StrategyKind::IlaExact,
        StrategyKind::Ila,
        StrategyKind::IlaIid,
        StrategyKind::Ula,
        StrategyKind::UlaPm,
        StrategyKind::IlaSampling,
        StrategyKind::UlaSampling,
        StrategyKind::IlaLearned,
        StrategyKind::UlaLearned,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            StrategyKind::Rand => "rand",
            StrategyKind::IlaExact => "ila-exact",
            StrategyKind::Ila => "ila",
            StrategyKind::IlaIid => "ila-iid",
            StrategyKind::Ula => "ula",
            StrategyKind::UlaPm => "ula-pm",
            StrategyKind::IlaSampling => "ila-sampling",
            StrategyKind::UlaSampling => "ula-sampling",
            StrategyKind::IlaLearned => "ila-learned",
            StrategyKind::UlaLearned => "ula-learned",
        }
    }

    pub fn is_learned(&self) -> bool {
        matches!(self, StrategyKind::IlaLearned | StrategyKind::UlaLearned)
    }

    pub fn bound_kind(&self) -> BoundKind {
        match self {
            StrategyKind::Rand => BoundKind::None,
            StrategyKind::IlaExact
            | StrategyKind::Ila
            | StrategyKind::IlaIid
            | StrategyKind::Ula
            | StrategyKind::IlaSampling
            | StrategyKind::IlaLearned => BoundKind::HighProbability,
            StrategyKind::UlaPm | StrategyKind::UlaSampling | StrategyKind::UlaLearned => BoundKind::Expectation,
        }
    }

    /// The formula evaluated for the `bound` column.
    pub fn bound_description(&self) -> &'static str {
        match self {
            StrategyKind::Rand => "none",
            StrategyKind::IlaExact => "0 (exact)",
            StrategyKind::Ila => "(3 ln^1.5 P + 2 ln P sqrt(ln(2/beta))) / (pi sqrt psi)",
            StrategyKind::IlaIid => "(2 ln^1.5 P + 1 + 2 ln P sqrt(ln(2/beta))) / (pi sqrt psi)",
            StrategyKind::Ula => "k rho_K + min-of-three privacy term / (N sqrt psi)",
            StrategyKind::UlaPm => "k rho_K + [(3/pi)^(2/3) ln P + (C sqrt2 / N)^(2/3)]^1.5 / sqrt psi",
            StrategyKind::IlaSampling => "P(lk + sqrt(lk ln(3/beta)))/(Pl + k) + sampling term + privacy term",
            StrategyKind::UlaSampling => "k rho_K + (1 - rho_K) lambda n + min-of-three estimation term",
            StrategyKind::IlaLearned => "k eta_k + P sqrt(alpha) + P^0.75 sqrt(ln(1/beta)/2) + privacy term",
            StrategyKind::UlaLearned => "k rho_K + sqrt(P |cells| sigma^2) + P sqrt(E) + privacy term",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownStrategy(pub String);

impl FromStr for StrategyKind {
    type Err = UnknownStrategy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| UnknownStrategy(s.to_string()))
    }
}

/// One strategy applied to one population.
#[derive(Debug, Clone)]
pub struct StrategyRun {
    pub allocation: Option<Allocation>,
    pub noisy_scores: Option<Vec<f64>>,
    /// `None` when the strategy could not run (e.g. sampling cost above the budget).
    pub report: Option<RegretReport>,
    pub bound: Option<f64>,
    pub meta: Map<String, Value>,
}

impl StrategyRun {
    fn finished(
        allocation: Allocation,
        noisy: Option<Vec<f64>>,
        gp: &GeneratedPopulation,
        k: usize,
        bound: Option<f64>,
        meta: Map<String, Value>,
    ) -> Result<Self, CliError> {
        let report = regret(&allocation, &gp.population, k)?;
        Ok(Self { allocation: Some(allocation), noisy_scores: noisy, report: Some(report), bound, meta })
    }
}

fn meta(pairs: &[(&str, Value)]) -> Map<String, Value> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

/// Runs a population-based strategy. Learned strategies go through [`learned_trial`].
pub fn run_on_population(
    strategy: &StrategySpec,
    gp: &GeneratedPopulation,
    k: usize,
    lambda: f64,
    psi: f64,
    rng: &mut SimRng,
) -> Result<StrategyRun, CliError> {
    let pop = &gp.population;
    let p = pop.size();
    let m = pop.n_units();
    let n = pop.unit_size();
    let beta = strategy.beta;
    let scale = strategy.margin_scale;
    match strategy.kind {
        StrategyKind::Rand => {
            let a = random_allocation(p, k, rng)?;
            StrategyRun::finished(a, None, gp, k, None, Map::new())
        }
        StrategyKind::IlaExact => StrategyRun::finished(ila_nonprivate(pop, k)?, None, gp, k, Some(0.0), Map::new()),
        StrategyKind::Ila | StrategyKind::IlaIid => {
            let iid = strategy.kind == StrategyKind::IlaIid;
            let bound = if iid {
                ila_stochastic_bound(p, psi, beta, 1.0)
            } else {
                ila_adversarial_bound(p, psi, beta)
            };
            if psi.is_infinite() || k == 0 {
                return StrategyRun::finished(ila_nonprivate(pop, k)?, None, gp, k, Some(bound), Map::new());
            }
            let params = if iid {
                ila_params_stochastic(p, k, psi, beta)?
            } else {
                ila_params_adversarial(p, k, psi, beta)?
            }
            .with_margin_scale(scale);
            let out = ila_private(pop, &params, rng)?;
            let info = meta(&[
                ("threshold", json!(out.threshold)),
                ("bins", json!(out.bins)),
                ("margin", json!(out.margin)),
                ("threshold_bin", json!(out.threshold_bin)),
                ("theta", json!(params.theta)),
                ("s", json!(params.s)),
                ("treated_before_truncation", json!(out.treated.len())),
                ("budget_violation", json!(!out.within_budget(k))),
            ]);
            let alloc = out.truncated(k);
            StrategyRun::finished(alloc, Some(out.noisy_scores), gp, k, Some(bound), info)
        }
        StrategyKind::Ula => {
            let bound = ula_baseline(&gp.profile, n, k) + ula_privacy_term(p, m, n, k, psi, beta);
            let out = if psi.is_infinite() {
                ula_nonprivate(pop, k, rng)?
            } else {
                ula_private_public_membership(pop, k, psi, rng)?
            };
            let noisy: Vec<f64> = (0..p).map(|i| out.unit_scores[pop.partition().unit_of(i)]).collect();
            let info = meta(&[("unit_scores", json!(out.unit_scores))]);
            StrategyRun::finished(out.treated, Some(noisy), gp, k, Some(bound), info)
        }
        StrategyKind::UlaPm => {
            let c = ula_constant(p, m, k);
            let baseline = ula_baseline(&gp.profile, n, k);
            let bound = ula_private_membership_bound(baseline, p, n, c, psi);
            let split = psi_split(p, n, c, psi)?;
            let out = ula_private_private_membership(pop, k, split.psi1, split.psi2, beta, rng)?;
            let info = meta(&[
                ("psi1", json!(split.psi1)),
                ("psi2", json!(split.psi2)),
                ("threshold", json!(out.threshold)),
                ("budget_violation", json!(!out.within_budget(k))),
            ]);
            let alloc = out.truncated(k);
            StrategyRun::finished(alloc, Some(out.noisy_scores), gp, k, Some(bound), info)
        }
        StrategyKind::IlaSampling => {
            let econ = SamplingEconomy::new(lambda, k, p)?;
            let bound = ila_sampling_private_bound(p, k, lambda, psi, beta);
            let out = ila_with_sampling_private(pop, &econ, psi, beta, rng)?;
            let info = meta(&[
                ("mode", json!(format!("{:?}", out.plan.mode))),
                ("n", json!(out.plan.n)),
                ("k_prime", json!(out.plan.k_prime)),
                ("budget_violation", json!(out.budget_violation)),
            ]);
            StrategyRun::finished(out.allocation, None, gp, k, Some(bound), info)
        }
        StrategyKind::UlaSampling => match ula_with_sampling_private(pop, k, lambda, psi, rng) {
            Ok(out) => {
                let bound = ula_sampling_bound(&gp.profile, n, k, lambda, out.plan.n, psi);
                let info = meta(&[("n", json!(out.plan.n)), ("k_prime", json!(out.plan.k_prime))]);
                StrategyRun::finished(out.outcome.treated, None, gp, k, Some(bound), info)
            }
            Err(Error::PlanInfeasible { cost, budget }) => {
                log::warn!("ula-sampling infeasible: sampling cost {cost} exceeds budget {budget}");
                Ok(StrategyRun {
                    allocation: None,
                    noisy_scores: None,
                    report: None,
                    bound: None,
                    meta: meta(&[("infeasible", json!(true)), ("cost", json!(cost))]),
                })
            }
            Err(e) => Err(e.into()),
        },
        StrategyKind::IlaLearned | StrategyKind::UlaLearned => {
            Err(CliError::config(format!("{} needs a learning trial", strategy.kind)))
        }
    }
}

/// Trains a predictor and runs both learned allocations on a fresh population of `population`.
#[allow(clippy::too_many_arguments)]
pub fn learned_trial(
    learning: &LearningSection,
    population: usize,
    k: usize,
    psi: f64,
    sigma: Option<f64>,
    beta: f64,
    seed: u64,
) -> Result<PredictiveTrial, CliError> {
    let dist = learning.distribution(sigma)?;
    let spec = LearnerSpec::squared_loss(learning.dim, (learning.dim as f64).sqrt(), 2.0)?;
    let setup = PredictiveSetup {
        dist: &dist,
        population,
        cells: learning.cells,
        min_cell: learning.min_cell,
        k,
        train_size: learning.train_size,
        learner_psi: learning.learner_psi,
        alloc_psi: psi,
        beta,
        spec,
        learner: NoisyGradientDescent::default(),
        risk_samples: learning.risk_samples,
    };
    Ok(privalloc::learn::predictive_trial(&setup, seed)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for k in StrategyKind::ALL {
            assert_eq!(k.name().parse::<StrategyKind>().unwrap(), k);
        }
        assert!("ILA".parse::<StrategyKind>().is_err());
    }
}
