//! Allocation when observing welfare costs budget: each sampled individual costs `lambda`
//! units of aid.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::alloc::{ila_params_adversarial, ila_private_on_scores, ula_nonprivate_on_scores, UlaOutcome};
use crate::dp::{check_psi, gaussian_mechanism};
use crate::error::{ensure, Error, Result};
use crate::model::{random_allocation, Allocation, Population, UnitProfile};
use crate::num::{ceil_tol, floor_tol};

/// Costs and budget of a sampling problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingEconomy {
    pub lambda: f64,
    pub k: usize,
    pub population: usize,
}

impl SamplingEconomy {
    pub fn new(lambda: f64, k: usize, population: usize) -> Result<Self> {
        ensure(lambda >= 0.0 && lambda.is_finite(), "lambda", format!("{lambda} must be non-negative"))?;
        ensure(population > 0, "population", "must be positive")?;
        ensure(k <= population, "k", format!("{k} exceeds population {population}"))?;
        Ok(Self { lambda, k, population })
    }

    /// Aid spent on sampling `n` individuals.
    pub fn cost(&self, n: usize) -> usize {
        ceil_tol(self.lambda * n as f64) as usize
    }
}

/// How the sampling-based individual strategy spends its budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingMode {
    /// Observe `n` individuals and aid the lowest of them.
    Sample,
    /// Sampling is too expensive; aid `k` individuals at random.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IlaSamplingPlan {
    pub mode: SamplingMode,
    pub n: usize,
    /// Aid left after paying for the sample.
    pub k_prime: usize,
}

/// Sample size `floor(P k / (P lambda + k))` and remaining aid `k - ceil(lambda n)`;
/// random allocation once `lambda >= (P - k) / P`.
pub fn ila_sampling_plan(econ: &SamplingEconomy) -> IlaSamplingPlan {
    let p = econ.population as f64;
    let k = econ.k as f64;
    if econ.k == 0 {
        return IlaSamplingPlan { mode: SamplingMode::Sample, n: 0, k_prime: 0 };
    }
    if econ.lambda >= (p - k) / p {
        return IlaSamplingPlan { mode: SamplingMode::Random, n: 0, k_prime: econ.k };
    }
    let n = (floor_tol(p * k / (p * econ.lambda + k)) as usize).min(econ.population);
    let k_prime = econ.k.saturating_sub(econ.cost(n));
    IlaSamplingPlan { mode: SamplingMode::Sample, n, k_prime }
}

/// Outcome of a sampling-based individual allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingOutcome {
    pub plan: IlaSamplingPlan,
    /// Individuals whose welfare was observed.
    pub sampled: Vec<usize>,
    /// Treated individuals, at most `k_prime` (or `k` in random mode).
    pub allocation: Allocation,
    /// Whether the private threshold search overshot `k_prime` and was truncated.
    pub budget_violation: bool,
}

fn sample_by_welfare(pop: &Population, sampled: &[usize]) -> Vec<usize> {
    let mut s = sampled.to_vec();
    s.sort_by(|&a, &b| pop.welfare()[a].total_cmp(&pop.welfare()[b]).then(a.cmp(&b)));
    s
}

/// Samples `n` individuals uniformly, aids the `kappa` lowest of them (default `k'`), and
/// spends any aid left over on unseen individuals chosen at random.
pub fn ila_with_sampling<R: Rng + ?Sized>(
    pop: &Population,
    econ: &SamplingEconomy,
    kappa: Option<usize>,
    rng: &mut R,
) -> Result<SamplingOutcome> {
    ensure(econ.population == pop.size(), "population", "economy does not match population")?;
    let plan = ila_sampling_plan(econ);
    if plan.mode == SamplingMode::Random {
        return Ok(SamplingOutcome {
            plan,
            sampled: Vec::new(),
            allocation: random_allocation(pop.size(), econ.k, rng)?,
            budget_violation: false,
        });
    }
    let kappa = kappa.unwrap_or(plan.k_prime);
    ensure(
        kappa <= plan.k_prime.min(plan.n),
        "kappa",
        format!("{kappa} exceeds min(k', n) = {}", plan.k_prime.min(plan.n)),
    )?;
    let sampled = rand::seq::index::sample(rng, pop.size(), plan.n).into_vec();
    let mut treated: Vec<usize> = sample_by_welfare(pop, &sampled)[..kappa].to_vec();
    let rest = plan.k_prime - kappa;
    if rest > 0 {
        let mut seen = vec![false; pop.size()];
        for &i in &sampled {
            seen[i] = true;
        }
        let mut unseen: Vec<usize> = (0..pop.size()).filter(|&i| !seen[i]).collect();
        let take = rest.min(unseen.len());
        let (chosen, _) = unseen.partial_shuffle(rng, take);
        treated.extend_from_slice(chosen);
    }
    Ok(SamplingOutcome {
        plan,
        sampled,
        allocation: Allocation::new(treated, pop.size())?,
        budget_violation: false,
    })
}

/// Samples `n` individuals and runs the private threshold allocation on the sample with
/// budget `k'`. Overshoots are flagged and truncated to the `k'` lowest noisy scores.
pub fn ila_with_sampling_private<R: Rng + ?Sized>(
    pop: &Population,
    econ: &SamplingEconomy,
    psi: f64,
    beta: f64,
    rng: &mut R,
) -> Result<SamplingOutcome> {
    check_psi(psi)?;
    ensure(econ.population == pop.size(), "population", "economy does not match population")?;
    let plan = ila_sampling_plan(econ);
    if plan.mode == SamplingMode::Random {
        return Ok(SamplingOutcome {
            plan,
            sampled: Vec::new(),
            allocation: random_allocation(pop.size(), econ.k, rng)?,
            budget_violation: false,
        });
    }
    let sampled = rand::seq::index::sample(rng, pop.size(), plan.n).into_vec();
    if plan.k_prime == 0 {
        return Ok(SamplingOutcome { plan, sampled, allocation: Allocation::empty(), budget_violation: false });
    }
    if psi.is_infinite() || plan.n < 2 {
        let treated = sample_by_welfare(pop, &sampled)[..plan.k_prime.min(plan.n)].to_vec();
        return Ok(SamplingOutcome {
            plan,
            sampled,
            allocation: Allocation::new(treated, pop.size())?,
            budget_violation: false,
        });
    }
    let scores: Vec<f64> = sampled.iter().map(|&i| pop.welfare()[i]).collect();
    let params = ila_params_adversarial(plan.n, plan.k_prime, psi, beta)?;
    let out = ila_private_on_scores(&scores, &params, rng)?;
    let budget_violation = !out.within_budget(plan.k_prime);
    let local = out.truncated(plan.k_prime);
    let treated = local.indices().iter().map(|&j| sampled[j]).collect();
    Ok(SamplingOutcome { plan, sampled, allocation: Allocation::new(treated, pop.size())?, budget_violation })
}

/// Binary population with exactly `ones` high-welfare individuals at random positions and
/// `delta_w = 1`, as a single unit.
pub fn hard_instance<R: Rng + ?Sized>(population: usize, ones: usize, rng: &mut R) -> Result<Population> {
    ensure(population > 0, "population", "must be positive")?;
    ensure(ones <= population, "ones", format!("{ones} exceeds population {population}"))?;
    let mut w = vec![0.0; population];
    for i in rand::seq::index::sample(rng, population, ones) {
        w[i] = 1.0;
    }
    Population::ungrouped(w, 1.0)
}

/// Sample size for the sampling-based unit strategy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UlaSamplingPlan {
    pub n: usize,
    /// `min(2 min(k, P-k) sqrt(2 ln 2M), sqrt(2 min(k, P-k) P), P sqrt(2/pi))`.
    pub c: f64,
    pub k_prime: usize,
}

/// The constant `C` shared by the unit-level bounds.
pub fn ula_constant(population: usize, units: usize, k: usize) -> f64 {
    let p = population as f64;
    let m = k.min(population - k) as f64;
    let a = 2.0 * m * (2.0 * (2.0 * units as f64).ln()).sqrt();
    let b = (2.0 * m * p).sqrt();
    let c = p * (2.0 / std::f64::consts::PI).sqrt();
    a.min(b).min(c)
}

/// `n = max((C M / (lambda sqrt(2 psi)))^{1/2}, (C^2 M / (16 lambda^2))^{1/3})`, capped at `P`.
///
/// `lambda = 0` is reported as [`Error::FreeSampling`].
pub fn ula_sampling_plan(
    population: usize,
    units: usize,
    k: usize,
    lambda: f64,
    psi: f64,
) -> Result<UlaSamplingPlan> {
    let econ = SamplingEconomy::new(lambda, k, population)?;
    ensure(units > 0 && units <= population, "units", format!("{units} not in [1, {population}]"))?;
    check_psi(psi)?;
    if lambda == 0.0 {
        return Err(Error::FreeSampling);
    }
    let c = ula_constant(population, units, k);
    let m = units as f64;
    let privacy = if psi.is_infinite() { 0.0 } else { (c * m / (lambda * (2.0 * psi).sqrt())).sqrt() };
    let sampling = (c * c * m / (16.0 * lambda * lambda)).cbrt();
    let n = (ceil_tol(privacy.max(sampling)) as usize).min(population);
    let cost = econ.cost(n);
    let k_prime = k.saturating_sub(cost);
    Ok(UlaSamplingPlan { n, c, k_prime })
}

/// Outcome of the sampling-based unit allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct UlaSamplingOutcome {
    pub plan: UlaSamplingPlan,
    pub per_unit_sample: Vec<usize>,
    pub outcome: UlaOutcome,
}

/// Samples about `n / M` individuals per unit, releases each unit's sampled high-welfare
/// fraction with Gaussian noise, and fills the `k - ceil(lambda n)` remaining slots greedily.
///
/// With `lambda = 0` the whole population is sampled.
pub fn ula_with_sampling_private<R: Rng + ?Sized>(
    pop: &Population,
    k: usize,
    lambda: f64,
    psi: f64,
    rng: &mut R,
) -> Result<UlaSamplingOutcome> {
    let p = pop.size();
    let m = pop.n_units();
    let plan = match ula_sampling_plan(p, m, k, lambda, psi) {
        Ok(plan) => plan,
        Err(Error::FreeSampling) => UlaSamplingPlan { n: p, c: ula_constant(p, m, k), k_prime: k },
        Err(e) => return Err(e),
    };
    let cost = SamplingEconomy::new(lambda, k, p)?.cost(plan.n);
    if cost > k {
        return Err(Error::PlanInfeasible { cost, budget: k });
    }
    if plan.n < m {
        return Err(Error::param("n", format!("sample size {} is below the unit count {m}", plan.n)));
    }
    let base = plan.n / m;
    let extra = plan.n % m;
    let per_unit_sample: Vec<usize> =
        (0..m).map(|j| (base + usize::from(j < extra)).min(pop.unit_size())).collect();
    let smallest = *per_unit_sample.iter().min().expect("at least one unit");
    let sensitivity = 1.0 / smallest as f64;
    let mut estimates = Vec::with_capacity(m);
    for (j, &nj) in per_unit_sample.iter().enumerate() {
        let members = pop.partition().members(j);
        let highs = rand::seq::index::sample(rng, members.len(), nj)
            .into_iter()
            .filter(|&i| pop.is_high(members[i]))
            .count();
        estimates.push(highs as f64 / nj as f64);
    }
    let noisy = estimates
        .into_iter()
        .map(|r| gaussian_mechanism(r, sensitivity, psi, rng))
        .collect::<Result<Vec<_>>>()?;
    let outcome = ula_nonprivate_on_scores(&noisy, pop.partition(), plan.k_prime, rng)?;
    Ok(UlaSamplingOutcome { plan, per_unit_sample, outcome })
}

/// Predicted ordering of the three sampling-regime strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegimeLabel {
    /// Unit-level beats individual-level, which beats random.
    UlaIlaRand,
    /// Unit-level beats individual-level, which ties random.
    UlaOverIlaEqRand,
    /// Individual-level at least as good as unit-level, at least as good as random.
    IlaUlaRand,
}

impl RegimeLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegimeLabel::UlaIlaRand => "ULA>ILA>RAND",
            RegimeLabel::UlaOverIlaEqRand => "ULA>ILA=RAND",
            RegimeLabel::IlaUlaRand => "ILA>=ULA>=RAND",
        }
    }

    /// Whether the unit-level strategy is predicted to win.
    pub fn favors_ula(&self) -> bool {
        !matches!(self, RegimeLabel::IlaUlaRand)
    }
}

impl std::fmt::Display for RegimeLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingRegime {
    pub label: RegimeLabel,
    /// `(k/P) q / (1 - q)` with `q = rho_bar (1 - G)`.
    pub lambda_low: f64,
    /// `1 - k/P`.
    pub lambda_high: f64,
}

/// Classifies which strategy should win when sampling costs `lambda` per person.
pub fn classify_regime_sampling(
    gini: f64,
    lambda: f64,
    rho_bar: f64,
    k: usize,
    population: usize,
) -> Result<SamplingRegime> {
    ensure((0.0..=1.0).contains(&gini), "gini", format!("{gini} not in [0, 1]"))?;
    ensure((0.0..=1.0).contains(&rho_bar), "rho_bar", format!("{rho_bar} not in [0, 1]"))?;
    ensure(lambda >= 0.0 && lambda.is_finite(), "lambda", format!("{lambda} must be non-negative"))?;
    ensure(population > 0 && k <= population, "k", format!("{k} not in [0, {population}]"))?;
    let frac = k as f64 / population as f64;
    let q = rho_bar * (1.0 - gini);
    let lambda_low = if q >= 1.0 { f64::INFINITY } else { frac * q / (1.0 - q) };
    let lambda_high = 1.0 - frac;
    let label = if lambda >= lambda_high {
        if gini > 0.0 {
            RegimeLabel::UlaOverIlaEqRand
        } else {
            // Without inequality every strategy ties random.
            RegimeLabel::IlaUlaRand
        }
    } else if lambda > lambda_low {
        RegimeLabel::UlaIlaRand
    } else {
        RegimeLabel::IlaUlaRand
    };
    Ok(SamplingRegime { label, lambda_low, lambda_high })
}

/// Returns `(mean of rho (1 - rho), rho_bar (1 - rho_bar) - 3 rho_bar^2 G^2)`; the first never
/// exceeds the second.
pub fn inequality_variance_bound(profile: &UnitProfile) -> Result<(f64, f64)> {
    let rho = profile.rho();
    let lhs = rho.iter().map(|r| r * (1.0 - r)).sum::<f64>() / rho.len() as f64;
    let mean = profile.mean();
    let g = profile.gini()?;
    Ok((lhs, mean * (1.0 - mean) - 3.0 * mean * mean * g * g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn ila_plan_examples() {
        let plan = ila_sampling_plan(&SamplingEconomy::new(0.1, 100, 1000).unwrap());
        assert_eq!((plan.n, plan.k_prime, plan.mode), (500, 50, SamplingMode::Sample));
        let plan = ila_sampling_plan(&SamplingEconomy::new(0.0, 100, 1000).unwrap());
        assert_eq!((plan.n, plan.k_prime), (1000, 100));
        let plan = ila_sampling_plan(&SamplingEconomy::new(0.95, 100, 1000).unwrap());
        assert_eq!(plan.mode, SamplingMode::Random);
    }

    #[test]
    fn hard_instance_has_exact_count() {
        let pop = hard_instance(50, 10, &mut seeded(4)).unwrap();
        assert_eq!(pop.welfare().iter().filter(|&&w| w == 1.0).count(), 10);
        assert_eq!(pop.delta_w(), 1.0);
    }

    #[test]
    fn ila_with_sampling_spends_exactly_k_prime() {
        let pop = hard_instance(200, 160, &mut seeded(1)).unwrap();
        let econ = SamplingEconomy::new(0.2, 40, 200).unwrap();
        let out = ila_with_sampling(&pop, &econ, None, &mut seeded(2)).unwrap();
        assert_eq!(out.allocation.len(), out.plan.k_prime);
        let partial = ila_with_sampling(&pop, &econ, Some(5), &mut seeded(2)).unwrap();
        assert_eq!(partial.allocation.len(), out.plan.k_prime);
    }

    #[test]
    fn ula_plan_free_sampling_is_reported() {
        assert_eq!(ula_sampling_plan(1000, 10, 100, 0.0, 1.0), Err(Error::FreeSampling));
    }

    #[test]
    fn regime_examples() {
        let r = classify_regime_sampling(0.2, 0.5, 0.5, 100, 1000).unwrap();
        assert!((r.lambda_low - 0.04 / 0.6).abs() < 1e-12);
        assert!((r.lambda_high - 0.9).abs() < 1e-12);
        assert_eq!(r.label, RegimeLabel::UlaIlaRand);
        let r = classify_regime_sampling(0.2, 0.95, 0.5, 100, 1000).unwrap();
        assert_eq!(r.label, RegimeLabel::UlaOverIlaEqRand);
        let r = classify_regime_sampling(0.2, 0.01, 0.5, 100, 1000).unwrap();
        assert_eq!(r.label, RegimeLabel::IlaUlaRand);
        let r = classify_regime_sampling(0.0, 0.01, 0.5, 100, 1000).unwrap();
        assert_eq!(r.label, RegimeLabel::IlaUlaRand);
    }
}
