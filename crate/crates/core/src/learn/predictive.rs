use rand::{Rng, RngCore};

use super::learner::{LabeledExample, LearnerSpec, LinearModel, NoisyGradientDescent, PrivateLearner};
use super::risk::risk_decompose;
use crate::alloc::{ila_params_adversarial, ila_private_on_scores, psi_split, ula_private_membership_on_scores, IlaOutcome};
use crate::bounds::{ila_predictive_bound, predictive_privacy_overhead, ula_predictive_bound, ula_private_membership_bound};
use crate::budget::ula_constant;
use crate::dp::check_psi;
use crate::error::{ensure, Error, Result};
use crate::model::{gini, regret, Allocation, Partition, Population};
use crate::rng::{derive_seed, seeded};
use crate::synth::LabelDistribution;

/// Individuals with features, true conditional means and realized labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningPopulation {
    pub features: Vec<Vec<f64>>,
    pub eta: Vec<f64>,
    pub labels: Vec<bool>,
}

impl LearningPopulation {
    pub fn size(&self) -> usize {
        self.labels.len()
    }

    /// Welfare `1` for high-welfare individuals and `0` otherwise, with `delta_w = 1`.
    pub fn welfare_population(&self) -> Result<Population> {
        let w = self.labels.iter().map(|&y| if y { 1.0 } else { 0.0 }).collect();
        Population::ungrouped(w, 1.0)
    }

    pub fn scores(&self, model: &LinearModel) -> Vec<f64> {
        self.features.iter().map(|x| model.score(x)).collect()
    }

    pub fn examples(&self, indices: &[usize]) -> Vec<LabeledExample> {
        indices
            .iter()
            .map(|&i| LabeledExample { features: self.features[i].clone(), label: self.labels[i] })
            .collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            eta: indices.iter().map(|&i| self.eta[i]).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Fraction of high-welfare individuals in each unit.
    pub fn unit_rho(&self, partition: &Partition) -> Vec<f64> {
        (0..partition.n_units())
            .map(|j| {
                let m = partition.members(j);
                m.iter().filter(|&&i| self.labels[i]).count() as f64 / m.len() as f64
            })
            .collect()
    }
}

pub fn sample_population(dist: &dyn LabelDistribution, size: usize, rng: &mut dyn RngCore) -> LearningPopulation {
    let mut features = Vec::with_capacity(size);
    let mut eta = Vec::with_capacity(size);
    let mut labels = Vec::with_capacity(size);
    for _ in 0..size {
        let x = dist.sample_features(rng);
        let e = dist.eta(&x);
        labels.push(rng.random::<f64>() < e);
        eta.push(e);
        features.push(x);
    }
    LearningPopulation { features, eta, labels }
}

pub fn sample_examples(dist: &dyn LabelDistribution, n: usize, rng: &mut dyn RngCore) -> Vec<LabeledExample> {
    let pop = sample_population(dist, n, rng);
    pop.features
        .into_iter()
        .zip(pop.labels)
        .map(|(features, label)| LabeledExample { features, label })
        .collect()
}

/// Units induced by the distribution's grid of `cells` cells. Cells with fewer than
/// `min_size` members are merged into their smaller adjacent cell until none remain.
pub fn cell_partition(
    pop: &LearningPopulation,
    dist: &dyn LabelDistribution,
    cells: usize,
    min_size: usize,
) -> Result<Partition> {
    ensure(cells > 0, "cells", "must be positive")?;
    ensure(pop.size() > 0, "population", "is empty")?;
    let raw: Vec<usize> = pop.features.iter().map(|x| dist.cell(x, cells).min(cells - 1)).collect();
    let mut counts = vec![0usize; cells];
    for &c in &raw {
        counts[c] += 1;
    }
    // Groups of adjacent raw cells, in grid order.
    let mut groups: Vec<(Vec<usize>, usize)> =
        (0..cells).filter(|&c| counts[c] > 0).map(|c| (vec![c], counts[c])).collect();
    while groups.len() > 1 {
        let Some((g, _)) = groups.iter().enumerate().filter(|(_, g)| g.1 < min_size).min_by_key(|(_, g)| g.1)
        else {
            break;
        };
        let into = match (g.checked_sub(1), (g + 1 < groups.len()).then_some(g + 1)) {
            (Some(l), Some(r)) => {
                if groups[l].1 <= groups[r].1 {
                    l
                } else {
                    r
                }
            }
            (Some(l), None) => l,
            (None, Some(r)) => r,
            (None, None) => unreachable!(),
        };
        let (members, count) = groups.remove(g);
        let into = if into > g { into - 1 } else { into };
        groups[into].0.extend(members);
        groups[into].1 += count;
    }
    if groups[0].1 < min_size {
        return Err(Error::UnitTooSmall { unit: 0, size: groups[0].1, min: min_size });
    }
    let mut unit_of_cell = vec![0usize; cells];
    for (u, (members, _)) in groups.iter().enumerate() {
        for &c in members {
            unit_of_cell[c] = u;
        }
    }
    Partition::from_labels(raw.into_iter().map(|c| unit_of_cell[c]).collect())
}

/// Allocates to the `k_prime` individuals with the lowest predicted probability of high
/// welfare. With `psi = inf` the selection is exact with ties broken at random; otherwise
/// the private threshold search runs on the predictions.
pub fn ila_predictive<R: Rng + ?Sized>(
    pop: &LearningPopulation,
    model: &LinearModel,
    k_prime: usize,
    psi: f64,
    beta: f64,
    rng: &mut R,
) -> Result<Allocation> {
    check_psi(psi)?;
    let p = pop.size();
    ensure(k_prime <= p, "k_prime", format!("{k_prime} exceeds population {p}"))?;
    let scores = pop.scores(model);
    if k_prime == 0 {
        return Ok(Allocation::empty());
    }
    if psi.is_infinite() {
        let keys: Vec<u64> = (0..p).map(|_| rng.random()).collect();
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(keys[a].cmp(&keys[b])));
        order.truncate(k_prime);
        return Allocation::new(order, p);
    }
    let params = ila_params_adversarial(p, k_prime, psi, beta)?;
    Ok(ila_private_on_scores(&scores, &params, rng)?.truncated(k_prime))
}

/// Allocates to units in ascending order of their mean prediction, with private membership.
#[allow(clippy::too_many_arguments)]
pub fn ula_predictive<R: Rng + ?Sized>(
    pop: &LearningPopulation,
    model: &LinearModel,
    partition: &Partition,
    min_size: usize,
    k: usize,
    psi1: f64,
    psi2: f64,
    beta: f64,
    rng: &mut R,
) -> Result<IlaOutcome> {
    ensure(
        partition.population() == pop.size(),
        "partition",
        "partition size differs from population size",
    )?;
    let scores = pop.scores(model);
    let unit_scores: Vec<f64> = (0..partition.n_units())
        .map(|j| {
            let m = partition.members(j);
            m.iter().map(|&i| scores[i]).sum::<f64>() / m.len() as f64
        })
        .collect();
    ula_private_membership_on_scores(&unit_scores, partition, min_size, k, psi1, psi2, beta, rng)
}

/// `k' eta_bar_k'`: the sum of the `k_prime` smallest conditional means.
pub fn k_eta_bar(eta: &[f64], k_prime: usize) -> f64 {
    let mut sorted = eta.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.iter().take(k_prime).sum()
}

/// `k rho_bar_K` over realized unit fractions, with `K = ceil(k / N)` for the smallest unit size `N`.
pub fn ula_baseline_realized(rho: &[f64], min_size: usize, k: usize) -> f64 {
    if k == 0 || rho.is_empty() {
        return 0.0;
    }
    let count = k.div_ceil(min_size.max(1)).min(rho.len());
    let mut sorted = rho.to_vec();
    sorted.sort_by(f64::total_cmp);
    k as f64 * sorted[..count].iter().sum::<f64>() / count as f64
}

/// Configuration of one train-then-allocate run.
#[derive(Clone, Copy)]
pub struct PredictiveSetup<'a> {
    pub dist: &'a dyn LabelDistribution,
    /// Individuals eligible for aid; training individuals are drawn in addition.
    pub population: usize,
    pub cells: usize,
    pub min_cell: usize,
    pub k: usize,
    pub train_size: usize,
    pub learner_psi: f64,
    pub alloc_psi: f64,
    pub beta: f64,
    pub spec: LearnerSpec,
    pub learner: NoisyGradientDescent,
    pub risk_samples: usize,
}

/// Realized regrets and bound terms of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveTrial {
    pub ila_regret: f64,
    pub ula_regret: f64,
    pub ila_bound: f64,
    pub ula_bound: f64,
    pub alpha: f64,
    pub excess: f64,
    pub sigma2: f64,
    pub k_eta_bar: f64,
    pub ula_baseline: f64,
    pub units: usize,
    pub min_unit: usize,
    pub gini: Option<f64>,
    pub rho_bar: f64,
    /// Training and allocation individuals never overlap.
    pub disjoint: bool,
}

/// Draws `population + train_size` individuals, trains on a random `train_size` of them and
/// allocates `k` units of aid among the rest by both strategies.
pub fn predictive_trial(setup: &PredictiveSetup<'_>, seed: u64) -> Result<PredictiveTrial> {
    let s = setup;
    ensure(s.train_size > 0, "train_size", "must be positive")?;
    ensure(s.k <= s.population, "k", format!("{} exceeds population {}", s.k, s.population))?;
    let mut rng = seeded(seed);
    let pool = sample_population(s.dist, s.population + s.train_size, &mut rng);
    let mut train_idx = rand::seq::index::sample(&mut rng, pool.size(), s.train_size).into_vec();
    train_idx.sort_unstable();
    let mut in_train = vec![false; pool.size()];
    train_idx.iter().for_each(|&i| in_train[i] = true);
    let alloc_idx: Vec<usize> = (0..pool.size()).filter(|&i| !in_train[i]).collect();
    let disjoint = alloc_idx.iter().all(|&i| train_idx.binary_search(&i).is_err());

    let mut learn_rng = seeded(derive_seed(seed, &[1]));
    let report = s.learner.train(&pool.examples(&train_idx), &s.spec, s.learner_psi, &mut learn_rng)?;
    let model = report.model;
    let mut risk_rng = seeded(derive_seed(seed, &[2]));
    let risk = risk_decompose(&model, s.dist, s.risk_samples, &mut risk_rng)?;

    let pop = pool.subset(&alloc_idx);
    let welfare = pop.welfare_population()?;
    let p = pop.size();

    let ila = ila_predictive(&pop, &model, s.k, s.alloc_psi, s.beta, &mut rng)?;
    let ila_regret = regret(&ila, &welfare, s.k)?.normalized_regret;

    let partition = cell_partition(&pop, s.dist, s.cells, s.min_cell)?;
    let min_unit = partition.min_size();
    let units = partition.n_units();
    let c = ula_constant(p, units, s.k);
    let (psi1, psi2, privacy) = if s.alloc_psi.is_infinite() || s.k == 0 || s.k == p {
        (f64::INFINITY, f64::INFINITY, 0.0)
    } else {
        let split = psi_split(p, min_unit, c, s.alloc_psi)?;
        (split.psi1, split.psi2, ula_private_membership_bound(0.0, p, min_unit, c, s.alloc_psi))
    };
    let ula = ula_predictive(&pop, &model, &partition, min_unit, s.k, psi1, psi2, s.beta, &mut rng)?;
    let ula_regret = regret(&ula.truncated(s.k), &welfare, s.k)?.normalized_regret;

    let rho = pop.unit_rho(&partition);
    let rho_bar = rho.iter().sum::<f64>() / rho.len() as f64;
    let keta = k_eta_bar(&pop.eta, s.k);
    let baseline = ula_baseline_realized(&rho, min_unit, s.k);
    Ok(PredictiveTrial {
        ila_regret,
        ula_regret,
        ila_bound: ila_predictive_bound(keta, p, risk.total, s.beta) + predictive_privacy_overhead(p, s.alloc_psi),
        ula_bound: ula_predictive_bound(baseline, p, units, risk.irreducible, risk.total) + privacy,
        alpha: risk.total,
        excess: risk.excess,
        sigma2: risk.irreducible,
        k_eta_bar: keta,
        ula_baseline: baseline,
        units,
        min_unit,
        gini: gini(&rho).ok(),
        rho_bar,
        disjoint,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::TwoPointEta;

    #[test]
    fn small_cells_merge_into_neighbours() {
        let dist = TwoPointEta::new(3, 0.2, 0.8, 0.0).unwrap();
        let ts = [0.05, 0.06, 0.07, 0.15, 0.55, 0.56, 0.57, 0.58];
        let pop = LearningPopulation {
            features: ts.iter().map(|&t| vec![1.0, t, 0.0]).collect(),
            eta: vec![0.2; 8],
            labels: vec![false; 8],
        };
        let part = cell_partition(&pop, &dist, 10, 2).unwrap();
        assert_eq!(part.labels(), &[0, 0, 0, 0, 1, 1, 1, 1]);
        assert!(cell_partition(&pop, &dist, 10, 9).is_err());
    }

    #[test]
    fn exact_ila_picks_lowest_predictions() {
        let spec = LearnerSpec::new(1.0, 4.0, 3, 1.0).unwrap();
        let model = LinearModel { theta: vec![-0.5, 1.0, 0.0], spec };
        let pop = LearningPopulation {
            features: [0.9, 0.1, 0.5, 0.3].iter().map(|&t| vec![1.0, t, 0.0]).collect(),
            eta: vec![0.5; 4],
            labels: vec![true; 4],
        };
        let a = ila_predictive(&pop, &model, 2, f64::INFINITY, 0.1, &mut seeded(0)).unwrap();
        assert_eq!(a.indices(), &[1, 3]);
    }

    #[test]
    fn baseline_uses_smallest_unit() {
        assert_eq!(ula_baseline_realized(&[0.5, 0.1, 0.3], 10, 15), 15.0 * 0.2);
        assert_eq!(k_eta_bar(&[0.8, 0.2, 0.5], 2), 0.7);
    }
}
