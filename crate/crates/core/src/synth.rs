//! Synthetic populations and feature distributions.

use rand::{Rng, RngCore};

use crate::budget::hard_instance;
use crate::error::{ensure, Error, Result};
use crate::model::{gini, Population, UnitProfile};
use crate::rng::seeded;

/// How unit profiles are drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Generator {
    /// Every unit has a fraction `low_fraction` of low-welfare individuals.
    TwoPoint { low_fraction: f64 },
    /// Unit profiles drawn i.i.d. from `Beta(a, b)`.
    BetaUnits { a: f64, b: f64 },
    /// Evenly spaced profile with the requested Gini coefficient and mean.
    GiniTarget { gini: f64, rho_bar: f64 },
    /// Binary welfare with exactly `ones` high-welfare individuals placed uniformly.
    HardInstance { ones: usize },
    /// Welfare i.i.d. `Uniform[0, 1]`, ignoring units.
    Uniform,
}

impl Generator {
    pub fn name(&self) -> &'static str {
        match self {
            Generator::TwoPoint { .. } => "two_point",
            Generator::BetaUnits { .. } => "beta_units",
            Generator::GiniTarget { .. } => "gini_target",
            Generator::HardInstance { .. } => "hard_instance",
            Generator::Uniform => "uniform",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopulationSpec {
    pub units: usize,
    pub unit_size: usize,
    pub delta_w: f64,
    pub generator: Generator,
    /// Two welfare levels only: `1 - delta_w` for low and `1` for high individuals.
    pub binary: bool,
    pub seed: u64,
}

impl PopulationSpec {
    pub fn population(&self) -> usize {
        self.units * self.unit_size
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.units > 0, "units", "must be positive")?;
        ensure(self.unit_size > 0, "unit_size", "must be positive")?;
        ensure(
            self.delta_w > 0.0 && self.delta_w <= 1.0,
            "delta_w",
            format!("{} not in (0, 1]", self.delta_w),
        )?;
        match self.generator {
            Generator::TwoPoint { low_fraction } => ensure(
                (0.0..=1.0).contains(&low_fraction),
                "low_fraction",
                format!("{low_fraction} not in [0, 1]"),
            ),
            Generator::BetaUnits { a, b } => ensure(a > 0.0 && b > 0.0, "beta", "shape parameters must be positive"),
            Generator::GiniTarget { gini, rho_bar } => {
                ensure((0.0..1.0).contains(&gini), "gini", format!("{gini} not in [0, 1)"))?;
                ensure((0.0..=1.0).contains(&rho_bar), "rho_bar", format!("{rho_bar} not in [0, 1]"))
            }
            Generator::HardInstance { ones } => ensure(
                ones <= self.population(),
                "ones",
                format!("{ones} exceeds population {}", self.population()),
            ),
            Generator::Uniform => Ok(()),
        }
    }
}

/// Summary statistics of a generated population.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopulationStats {
    pub rho_bar: f64,
    /// `None` when every unit profile is zero.
    pub gini: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedPopulation {
    pub population: Population,
    pub profile: UnitProfile,
    pub stats: PopulationStats,
}

/// Builds a population from a spec. Identical specs give identical populations.
pub fn generate(spec: &PopulationSpec) -> Result<GeneratedPopulation> {
    spec.validate()?;
    let mut rng = seeded(spec.seed);
    let population = match spec.generator {
        Generator::HardInstance { ones } => {
            let hi = hard_instance(spec.population(), ones, &mut rng)?;
            Population::new(hi.welfare().to_vec(), spec.unit_size, hi.delta_w())?
        }
        Generator::TwoPoint { low_fraction } => {
            let rho = vec![1.0 - low_fraction; spec.units];
            populate(&rho, spec, &mut rng)?
        }
        Generator::BetaUnits { a, b } => {
            let dist = rand_distr::Beta::new(a, b).map_err(|e| Error::param("beta", e))?;
            let rho: Vec<f64> = (0..spec.units).map(|_| rng.sample(dist)).collect();
            populate(&rho, spec, &mut rng)?
        }
        Generator::GiniTarget { gini, rho_bar } => {
            let profile = gini_targeted_profile(spec.units, gini, rho_bar)?;
            populate(profile.rho(), spec, &mut rng)?
        }
        Generator::Uniform => {
            let w = (0..spec.population()).map(|_| rng.random()).collect();
            Population::new(w, spec.unit_size, spec.delta_w)?
        }
    };
    let profile = population.unit_profile();
    let stats = PopulationStats { rho_bar: profile.mean(), gini: profile.gini().ok() };
    Ok(GeneratedPopulation { population, profile, stats })
}

/// Exactly `round(rho_j N)` members of unit `j` get welfare above `1 - delta_w`.
fn populate<R: Rng + ?Sized>(rho: &[f64], spec: &PopulationSpec, rng: &mut R) -> Result<Population> {
    let n = spec.unit_size;
    let d = spec.delta_w;
    let mut welfare = Vec::with_capacity(rho.len() * n);
    for &r in rho {
        let highs = (r * n as f64).round() as usize;
        let mut unit = vec![false; n];
        for i in rand::seq::index::sample(rng, n, highs.min(n)) {
            unit[i] = true;
        }
        for high in unit {
            let u: f64 = rng.random();
            welfare.push(match (spec.binary, high) {
                (true, true) => 1.0,
                (true, false) => 1.0 - d,
                (false, true) => 1.0 - d * u,
                (false, false) => (1.0 - d) * u,
            });
        }
    }
    Population::new(welfare, n, d)
}

const GINI_TOLERANCE: f64 = 0.02;

/// Evenly spaced profile `rho_bar + a (2i - M - 1)` with `a = 3 M rho_bar G / (M^2 - 1)`.
///
/// When that profile leaves `[0, 1]`, entries are clamped, the profile is shifted to restore
/// the mean, and the spacing is re-solved for the Gini target.
pub fn gini_targeted_profile(units: usize, target: f64, rho_bar: f64) -> Result<UnitProfile> {
    ensure(units > 0, "units", "must be positive")?;
    ensure((0.0..1.0).contains(&target), "gini", format!("{target} not in [0, 1)"))?;
    ensure((0.0..=1.0).contains(&rho_bar), "rho_bar", format!("{rho_bar} not in [0, 1]"))?;
    if target == 0.0 {
        return UnitProfile::new(vec![rho_bar; units]);
    }
    if units == 1 || rho_bar == 0.0 {
        return Err(Error::Infeasible(format!("Gini {target} with {units} unit(s) and mean {rho_bar}")));
    }
    let m = units as f64;
    let offsets: Vec<f64> = (1..=units).map(|i| 2.0 * i as f64 - m - 1.0).collect();
    let a0 = 3.0 * m * rho_bar * target / (m * m - 1.0);
    let even: Vec<f64> = offsets.iter().map(|o| rho_bar + a0 * o).collect();
    if even.iter().all(|r| (0.0..=1.0).contains(r)) {
        return UnitProfile::new(even);
    }

    let clamped = |a: f64, shift: f64| -> Vec<f64> {
        offsets.iter().map(|o| (rho_bar + shift + a * o).clamp(0.0, 1.0)).collect()
    };
    let mean_preserving = |a: f64| -> Vec<f64> {
        let reach = 1.0 + a * m;
        let (mut lo, mut hi) = (-reach, reach);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let mean = clamped(a, mid).iter().sum::<f64>() / m;
            if mean < rho_bar {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        clamped(a, 0.5 * (lo + hi))
    };
    let gini_at = |a: f64| gini(&mean_preserving(a)).unwrap_or(0.0);

    let mut hi = a0.max(1e-6);
    while gini_at(hi) < target {
        hi *= 2.0;
        if hi > 1e9 {
            let best = gini_at(hi);
            return Err(Error::Infeasible(format!(
                "Gini {target} unreachable with mean {rho_bar} over {units} units (max {best:.4})"
            )));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gini_at(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let rho = mean_preserving(hi);
    let achieved = gini(&rho)?;
    if (achieved - target).abs() > GINI_TOLERANCE {
        return Err(Error::Infeasible(format!("Gini {target} achieved only {achieved:.4}")));
    }
    UnitProfile::new(rho)
}

/// A feature distribution with a known conditional mean `eta(x) = P[y = 1 | x]`.
pub trait LabelDistribution: Send + Sync {
    /// Number of features, including any constant feature.
    fn dim(&self) -> usize;

    fn sample_features(&self, rng: &mut dyn RngCore) -> Vec<f64>;

    /// Probability that an individual with features `x` has high welfare.
    fn eta(&self, x: &[f64]) -> f64;

    /// Expected irreducible risk `E[eta (1 - eta)]`.
    fn irreducible_risk(&self) -> f64;

    /// Cell of an axis-aligned grid over the first non-constant feature.
    fn cell(&self, x: &[f64], cells: usize) -> usize {
        ((x[1] * cells as f64).floor().max(0.0) as usize).min(cells - 1)
    }
}

/// Features `(1, t, b, u_1, ..)` with `t ~ U[0, 1]`, `b | t ~ Bernoulli(1/2 + tilt (t - 1/2))`,
/// irrelevant `u_i ~ U[-1, 1]`, and `eta = eta_low + (eta_high - eta_low) b`.
///
/// `eta` is linear in the features, so a linear model can represent it exactly. `tilt`
/// controls how strongly the grid over `t` separates high- and low-`eta` individuals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPointEta {
    pub dim: usize,
    pub eta_low: f64,
    pub eta_high: f64,
    pub tilt: f64,
}

impl TwoPointEta {
    pub fn new(dim: usize, eta_low: f64, eta_high: f64, tilt: f64) -> Result<Self> {
        ensure(dim >= 3, "dim", format!("{dim} < 3"))?;
        ensure((0.0..=1.0).contains(&eta_low), "eta_low", "not in [0, 1]")?;
        ensure((0.0..=1.0).contains(&eta_high), "eta_high", "not in [0, 1]")?;
        ensure((0.0..=1.0).contains(&tilt), "tilt", "not in [0, 1]")?;
        Ok(Self { dim, eta_low, eta_high, tilt })
    }

    /// Two-point family with `eta in {0.5 - d, 0.5 + d}` and irreducible risk `sigma^2`.
    pub fn with_sigma(dim: usize, sigma: f64, tilt: f64) -> Result<Self> {
        ensure(sigma > 0.0 && sigma <= 0.5, "sigma", format!("{sigma} not in (0, 0.5]"))?;
        let d = (0.25 - sigma * sigma).max(0.0).sqrt();
        Self::new(dim, 0.5 - d, 0.5 + d, tilt)
    }

    /// Probability that `b = 1` given the grid coordinate `t`.
    pub fn high_probability(&self, t: f64) -> f64 {
        0.5 + self.tilt * (t - 0.5)
    }
}

impl LabelDistribution for TwoPointEta {
    fn dim(&self) -> usize {
        self.dim
    }

    fn sample_features(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let t: f64 = rng.random();
        let b = if rng.random::<f64>() < self.high_probability(t) { 1.0 } else { 0.0 };
        let mut x = Vec::with_capacity(self.dim);
        x.extend_from_slice(&[1.0, t, b]);
        x.extend((3..self.dim).map(|_| rng.random_range(-1.0..=1.0)));
        x
    }

    fn eta(&self, x: &[f64]) -> f64 {
        self.eta_low + (self.eta_high - self.eta_low) * x[2]
    }

    fn irreducible_risk(&self) -> f64 {
        // b is marginally Bernoulli(1/2).
        0.5 * (self.eta_low * (1.0 - self.eta_low) + self.eta_high * (1.0 - self.eta_high))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn even_profiles() {
        let p = gini_targeted_profile(2, 0.5, 0.5).unwrap();
        assert!((p.rho()[0]).abs() < 1e-12 && (p.rho()[1] - 1.0).abs() < 1e-12);
        let p = gini_targeted_profile(5, 0.25, 0.4).unwrap();
        assert!((p.gini().unwrap() - 0.25).abs() < 1e-12);
        assert!((p.mean() - 0.4).abs() < 1e-12);
        assert_eq!(gini_targeted_profile(4, 0.0, 0.3).unwrap().rho(), &[0.3; 4]);
    }

    #[test]
    fn clamped_profile_hits_target() {
        let p = gini_targeted_profile(20, 0.6, 0.3).unwrap();
        assert!((p.gini().unwrap() - 0.6).abs() <= 0.02);
        assert!((p.mean() - 0.3).abs() < 1e-9);
    }

    #[test]
    fn unreachable_gini_is_infeasible() {
        assert!(matches!(gini_targeted_profile(10, 0.9, 0.8), Err(Error::Infeasible(_))));
        assert!(matches!(gini_targeted_profile(1, 0.2, 0.5), Err(Error::Infeasible(_))));
    }

    #[test]
    fn two_point_all_low() {
        let spec = PopulationSpec {
            units: 4,
            unit_size: 10,
            delta_w: 0.3,
            generator: Generator::TwoPoint { low_fraction: 1.0 },
            binary: false,
            seed: 1,
        };
        let g = generate(&spec).unwrap();
        assert!(g.population.welfare().iter().all(|&w| w <= 0.7));
        assert_eq!(g.stats.gini, None);
        assert_eq!(g.stats.rho_bar, 0.0);
    }

    #[test]
    fn generate_is_deterministic() {
        let spec = PopulationSpec {
            units: 5,
            unit_size: 20,
            delta_w: 0.5,
            generator: Generator::BetaUnits { a: 2.0, b: 5.0 },
            binary: false,
            seed: 77,
        };
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
    }

    #[test]
    fn binary_welfare_has_two_levels() {
        let spec = PopulationSpec {
            units: 4,
            unit_size: 10,
            delta_w: 1.0,
            generator: Generator::GiniTarget { gini: 0.2, rho_bar: 0.5 },
            binary: true,
            seed: 3,
        };
        let g = generate(&spec).unwrap();
        assert!(g.population.welfare().iter().all(|&w| w == 0.0 || w == 1.0));
        assert_eq!(g.population.welfare().iter().filter(|&&w| w == 1.0).count(), 20);
    }

    #[test]
    fn two_point_eta_sigma() {
        let d = TwoPointEta::with_sigma(4, 0.4, 1.0).unwrap();
        assert!((d.eta_low - 0.2).abs() < 1e-12 && (d.eta_high - 0.8).abs() < 1e-12);
        assert!((d.irreducible_risk() - 0.16).abs() < 1e-12);
    }
}
