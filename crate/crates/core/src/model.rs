//! Population model, allocations and regret.

use rand::Rng;

use crate::error::{ensure, Error, Result};

/// Welfare gained by aiding an individual with welfare `w`: `min(1, w + delta_w) - w`.
pub fn treatment_effect(w: f64, delta_w: f64) -> Result<f64> {
    ensure(delta_w > 0.0 && delta_w <= 1.0, "delta_w", format!("{delta_w} not in (0, 1]"))?;
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::WelfareOutOfRange { index: 0, value: w });
    }
    Ok(tau(w, delta_w))
}

/// Evaluated piecewise so that the effect is exactly `delta_w` below the cap and never increases
/// with `w`.
#[inline]
pub(crate) fn tau(w: f64, delta_w: f64) -> f64 {
    if w <= 1.0 - delta_w {
        delta_w
    } else {
        (1.0 - w).min(delta_w)
    }
}

/// Assignment of individuals to geographic units.
///
/// Units may have different sizes here; [`Population`] additionally requires them to be equal.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    unit_of: Vec<usize>,
    members: Vec<Vec<usize>>,
}

impl Partition {
    /// Consecutive blocks of `unit_size` individuals.
    pub fn contiguous(population: usize, unit_size: usize) -> Result<Self> {
        ensure(unit_size > 0, "unit_size", "must be positive")?;
        ensure(
            population % unit_size == 0,
            "unit_size",
            format!("{unit_size} does not divide population {population}"),
        )?;
        let unit_of = (0..population).map(|i| i / unit_size).collect();
        Self::from_labels(unit_of)
    }

    /// Builds a partition from per-individual unit labels. Labels must cover `0..M` with no gaps.
    pub fn from_labels(unit_of: Vec<usize>) -> Result<Self> {
        let n_units = unit_of.iter().max().map_or(0, |m| m + 1);
        let mut members = vec![Vec::new(); n_units];
        for (i, &u) in unit_of.iter().enumerate() {
            members[u].push(i);
        }
        if let Some(j) = members.iter().position(Vec::is_empty) {
            return Err(Error::param("unit_of", format!("unit {j} has no members")));
        }
        Ok(Self { unit_of, members })
    }

    pub fn n_units(&self) -> usize {
        self.members.len()
    }

    pub fn population(&self) -> usize {
        self.unit_of.len()
    }

    pub fn unit_of(&self, individual: usize) -> usize {
        self.unit_of[individual]
    }

    pub fn labels(&self) -> &[usize] {
        &self.unit_of
    }

    pub fn members(&self, unit: usize) -> &[usize] {
        &self.members[unit]
    }

    pub fn min_size(&self) -> usize {
        self.members.iter().map(Vec::len).min().unwrap_or(0)
    }

    /// Errors if any unit has fewer than `min` members.
    pub fn check_min_size(&self, min: usize) -> Result<()> {
        match self.members.iter().enumerate().find(|(_, m)| m.len() < min) {
            Some((unit, m)) => Err(Error::UnitTooSmall { unit, size: m.len(), min }),
            None => Ok(()),
        }
    }
}

/// A population of `P = M * N` individuals with welfare in `[0, 1]`, split into `M` units of `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    welfare: Vec<f64>,
    partition: Partition,
    unit_size: usize,
    delta_w: f64,
}

impl Population {
    /// Population whose units are consecutive blocks of `unit_size`.
    pub fn new(welfare: Vec<f64>, unit_size: usize, delta_w: f64) -> Result<Self> {
        let partition = Partition::contiguous(welfare.len(), unit_size)?;
        Self::with_partition(welfare, partition, delta_w)
    }

    /// Population with an explicit unit assignment. Every unit must have the same size.
    pub fn with_partition(welfare: Vec<f64>, partition: Partition, delta_w: f64) -> Result<Self> {
        ensure(!welfare.is_empty(), "welfare", "population is empty")?;
        ensure(delta_w > 0.0 && delta_w <= 1.0, "delta_w", format!("{delta_w} not in (0, 1]"))?;
        ensure(
            partition.population() == welfare.len(),
            "partition",
            "partition size differs from population size",
        )?;
        if let Some((index, &value)) =
            welfare.iter().enumerate().find(|(_, w)| !(0.0..=1.0).contains(*w))
        {
            return Err(Error::WelfareOutOfRange { index, value });
        }
        let unit_size = partition.members(0).len();
        if let Some(j) = (0..partition.n_units()).find(|&j| partition.members(j).len() != unit_size) {
            return Err(Error::param(
                "partition",
                format!("unit {j} has {} members, expected {unit_size}", partition.members(j).len()),
            ));
        }
        Ok(Self { welfare, partition, unit_size, delta_w })
    }

    /// Population treated as a single unit, for settings without geography.
    pub fn ungrouped(welfare: Vec<f64>, delta_w: f64) -> Result<Self> {
        let n = welfare.len().max(1);
        Self::new(welfare, n, delta_w)
    }

    pub fn size(&self) -> usize {
        self.welfare.len()
    }

    pub fn n_units(&self) -> usize {
        self.partition.n_units()
    }

    pub fn unit_size(&self) -> usize {
        self.unit_size
    }

    pub fn delta_w(&self) -> f64 {
        self.delta_w
    }

    pub fn welfare(&self) -> &[f64] {
        &self.welfare
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn is_high(&self, individual: usize) -> bool {
        self.welfare[individual] > 1.0 - self.delta_w
    }

    pub fn tau(&self, individual: usize) -> f64 {
        tau(self.welfare[individual], self.delta_w)
    }

    /// Number of individuals with welfare at most `1 - delta_w`.
    pub fn low_count(&self) -> usize {
        (0..self.size()).filter(|&i| !self.is_high(i)).count()
    }

    /// Fraction of high-welfare individuals in each unit.
    pub fn unit_profile(&self) -> UnitProfile {
        let rho = (0..self.n_units())
            .map(|j| {
                let m = self.partition.members(j);
                m.iter().filter(|&&i| self.is_high(i)).count() as f64 / m.len() as f64
            })
            .collect();
        UnitProfile { rho }
    }
}

/// Per-unit fractions of high-welfare individuals.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitProfile {
    rho: Vec<f64>,
}

impl UnitProfile {
    pub fn new(rho: Vec<f64>) -> Result<Self> {
        ensure(!rho.is_empty(), "rho", "profile is empty")?;
        if let Some(r) = rho.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::param("rho", format!("{r} not in [0, 1]")));
        }
        Ok(Self { rho })
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.rho.iter().sum::<f64>() / self.rho.len() as f64
    }

    pub fn sorted(&self) -> Vec<f64> {
        let mut s = self.rho.clone();
        s.sort_by(f64::total_cmp);
        s
    }

    /// Gini coefficient from the sorted closed form, `O(M log M)`.
    pub fn gini(&self) -> Result<f64> {
        gini(&self.rho)
    }

    /// Average `rho` of the `count` lowest units.
    pub fn mean_lowest(&self, count: usize) -> f64 {
        let s = self.sorted();
        let count = count.clamp(1, s.len());
        s[..count].iter().sum::<f64>() / count as f64
    }

    /// Expected fraction of high-welfare individuals when `k` people are aided by filling
    /// the lowest-`rho` units of size `unit_size` first.
    pub fn greedy_fill_mean(&self, k: usize, unit_size: usize) -> f64 {
        if k == 0 {
            return 0.0;
        }
        let mut remaining = k;
        let mut total = 0.0;
        for r in self.sorted() {
            let x = remaining.min(unit_size);
            total += r * x as f64;
            remaining -= x;
            if remaining == 0 {
                break;
            }
        }
        total / (k - remaining) as f64
    }
}

/// Gini coefficient `sum_{i,j} |rho_i - rho_j| / (2 M^2 mean)` via the sorted identity.
pub fn gini(rho: &[f64]) -> Result<f64> {
    ensure(!rho.is_empty(), "rho", "profile is empty")?;
    let m = rho.len() as f64;
    let mean = rho.iter().sum::<f64>() / m;
    if mean <= 0.0 {
        return Err(Error::UndefinedGini);
    }
    let mut s = rho.to_vec();
    s.sort_by(f64::total_cmp);
    let weighted: f64 = s
        .iter()
        .enumerate()
        .map(|(i, r)| (2.0 * (i as f64 + 1.0) - m - 1.0) * r)
        .sum();
    Ok(weighted / (m * m * mean))
}

/// Gini coefficient by the defining double sum, `O(M^2)`.
pub fn gini_pairwise(rho: &[f64]) -> Result<f64> {
    ensure(!rho.is_empty(), "rho", "profile is empty")?;
    let m = rho.len() as f64;
    let mean = rho.iter().sum::<f64>() / m;
    if mean <= 0.0 {
        return Err(Error::UndefinedGini);
    }
    let total: f64 = rho.iter().map(|a| rho.iter().map(|b| (a - b).abs()).sum::<f64>()).sum();
    Ok(total / (2.0 * m * m * mean))
}

/// A set of distinct individuals chosen for aid, kept in ascending index order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Allocation {
    treated: Vec<usize>,
}

impl Allocation {
    pub fn new(mut treated: Vec<usize>, population: usize) -> Result<Self> {
        treated.sort_unstable();
        for w in treated.windows(2) {
            if w[0] == w[1] {
                return Err(Error::DuplicateIndex(w[0]));
            }
        }
        if let Some(&index) = treated.last().filter(|&&i| i >= population) {
            return Err(Error::IndexOutOfRange { index, size: population });
        }
        Ok(Self { treated })
    }

    pub(crate) fn from_sorted_unchecked(treated: Vec<usize>) -> Self {
        debug_assert!(treated.windows(2).all(|w| w[0] < w[1]));
        Self { treated }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn indices(&self) -> &[usize] {
        &self.treated
    }

    pub fn len(&self) -> usize {
        self.treated.len()
    }

    pub fn is_empty(&self) -> bool {
        self.treated.is_empty()
    }

    pub fn contains(&self, individual: usize) -> bool {
        self.treated.binary_search(&individual).is_ok()
    }

    pub fn within_budget(&self, k: usize) -> bool {
        self.treated.len() <= k
    }

    pub fn into_indices(self) -> Vec<usize> {
        self.treated
    }
}

fn sorted_sum(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum()
}

/// Total treatment effect of an allocation.
///
/// Effects are summed in ascending order, so two allocations with the same multiset of
/// effects always have bit-identical values.
pub fn allocation_value(alloc: &Allocation, pop: &Population) -> f64 {
    sorted_sum(alloc.indices().iter().map(|&i| pop.tau(i)).collect())
}

/// The `k` lowest-welfare individuals, ties broken by lower index.
pub fn optimal_allocation(pop: &Population, k: usize) -> Result<Allocation> {
    ensure(k <= pop.size(), "k", format!("{k} exceeds population {}", pop.size()))?;
    let mut order: Vec<usize> = (0..pop.size()).collect();
    order.sort_by(|&a, &b| pop.welfare[a].total_cmp(&pop.welfare[b]).then(a.cmp(&b)));
    order.truncate(k);
    order.sort_unstable();
    Ok(Allocation::from_sorted_unchecked(order))
}

/// Largest brute-force population accepted by [`brute_force_opt_value`].
pub const BRUTE_FORCE_MAX: usize = 25;

/// Optimal value by enumerating every subset of size `k`. Test oracle only.
pub fn brute_force_opt_value(pop: &Population, k: usize) -> Result<f64> {
    let p = pop.size();
    if p > BRUTE_FORCE_MAX {
        return Err(Error::TooLargeForBruteForce { size: p, max: BRUTE_FORCE_MAX });
    }
    ensure(k <= p, "k", format!("{k} exceeds population {p}"))?;
    if k == 0 {
        return Ok(0.0);
    }
    // Effects sorted ascending so that bit order is summation order.
    let mut effects: Vec<f64> = (0..p).map(|i| pop.tau(i)).collect();
    effects.sort_by(f64::total_cmp);
    let mut best = f64::NEG_INFINITY;
    let mut mask: u32 = (1u32 << k) - 1;
    let limit: u32 = 1u32 << p;
    while mask < limit {
        let mut sum = 0.0;
        let mut bits = mask;
        while bits != 0 {
            let i = bits.trailing_zeros() as usize;
            sum += effects[i];
            bits &= bits - 1;
        }
        if sum > best {
            best = sum;
        }
        // Gosper's hack: next subset with the same popcount.
        let c = mask & mask.wrapping_neg();
        let r = mask + c;
        mask = (((r ^ mask) >> 2) / c) | r;
    }
    Ok(best)
}

/// Regret of an allocation relative to the best allocation of `k` individuals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegretReport {
    pub value: f64,
    pub opt_value: f64,
    pub regret: f64,
    pub normalized_regret: f64,
    pub bound: Option<f64>,
}

impl RegretReport {
    pub fn with_bound(mut self, bound: f64) -> Self {
        self.bound = Some(bound);
        self
    }

    pub fn violates_bound(&self) -> bool {
        self.bound.is_some_and(|b| self.normalized_regret > b)
    }
}

/// Regret of `alloc` under budget `k`. Errors if the allocation is over budget.
pub fn regret(alloc: &Allocation, pop: &Population, k: usize) -> Result<RegretReport> {
    if alloc.len() > k {
        return Err(Error::BudgetExceeded { treated: alloc.len(), budget: k });
    }
    for &i in alloc.indices() {
        if i >= pop.size() {
            return Err(Error::IndexOutOfRange { index: i, size: pop.size() });
        }
    }
    let opt = optimal_allocation(pop, k)?;
    let opt_value = allocation_value(&opt, pop);
    let value = allocation_value(alloc, pop);
    let r = opt_value - value;
    Ok(RegretReport {
        value,
        opt_value,
        regret: r,
        normalized_regret: r / pop.delta_w(),
        bound: None,
    })
}

/// `k` individuals drawn uniformly without replacement.
pub fn random_allocation<R: Rng + ?Sized>(population: usize, k: usize, rng: &mut R) -> Result<Allocation> {
    ensure(k <= population, "k", format!("{k} exceeds population {population}"))?;
    let mut idx = rand::seq::index::sample(rng, population, k).into_vec();
    idx.sort_unstable();
    Ok(Allocation::from_sorted_unchecked(idx))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pop(w: &[f64], n: usize, d: f64) -> Population {
        Population::new(w.to_vec(), n, d).unwrap()
    }

    #[test]
    fn treatment_effect_examples() {
        assert_eq!(treatment_effect(0.3, 0.2).unwrap(), 0.2);
        assert_eq!(treatment_effect(1.0, 0.2).unwrap(), 0.0);
        assert!((treatment_effect(0.9, 0.2).unwrap() - 0.1).abs() < 1e-12);
        assert!(treatment_effect(1.2, 0.5).is_err());
        assert!(treatment_effect(0.3, 0.0).is_err());
    }

    #[test]
    fn optimal_allocation_small_example() {
        let p = pop(&[0.9, 0.1, 0.5, 0.3], 2, 0.5);
        let a = optimal_allocation(&p, 2).unwrap();
        assert_eq!(a.indices(), &[1, 3]);
        assert_eq!(allocation_value(&a, &p), 1.0);
    }

    #[test]
    fn optimal_ties_prefer_lower_index() {
        let p = pop(&[0.2, 0.2, 0.2, 0.2], 4, 0.5);
        assert_eq!(optimal_allocation(&p, 2).unwrap().indices(), &[0, 1]);
    }

    #[test]
    fn k_zero_and_k_p() {
        let p = pop(&[0.9, 0.1, 0.5, 0.3], 2, 0.5);
        assert!(optimal_allocation(&p, 0).unwrap().is_empty());
        let all = optimal_allocation(&p, 4).unwrap();
        assert_eq!(all.len(), 4);
        assert_eq!(regret(&all, &p, 4).unwrap().regret, 0.0);
        assert!(optimal_allocation(&p, 5).is_err());
    }

    #[test]
    fn regret_rejects_over_budget() {
        let p = pop(&[0.9, 0.1, 0.5, 0.3], 2, 0.5);
        let a = Allocation::new(vec![0, 1, 2], 4).unwrap();
        assert!(matches!(regret(&a, &p, 2), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn allocation_validation() {
        assert!(matches!(Allocation::new(vec![1, 1], 3), Err(Error::DuplicateIndex(1))));
        assert!(matches!(Allocation::new(vec![3], 3), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn gini_examples() {
        assert_eq!(gini(&[0.5, 0.5]).unwrap(), 0.0);
        assert!((gini(&[0.0, 1.0]).unwrap() - 0.5).abs() < 1e-12);
        assert!((gini(&[0.0, 0.0, 0.0, 1.0]).unwrap() - 0.75).abs() < 1e-12);
        assert_eq!(gini(&[0.0, 0.0]), Err(Error::UndefinedGini));
        assert_eq!(gini(&[0.7]).unwrap(), 0.0);
    }

    #[test]
    fn unit_profile_counts_high_welfare() {
        let p = pop(&[0.9, 0.1, 0.8, 0.7], 2, 0.5);
        assert_eq!(p.unit_profile().rho(), &[0.5, 1.0]);
    }

    #[test]
    fn unequal_units_rejected() {
        let part = Partition::from_labels(vec![0, 0, 1]).unwrap();
        assert!(Population::with_partition(vec![0.1, 0.2, 0.3], part, 0.5).is_err());
    }

    #[test]
    fn greedy_fill_mean_matches_hand_count() {
        let prof = UnitProfile::new(vec![0.5, 0.1, 0.9]).unwrap();
        // 10 from the 0.1 unit, 5 from the 0.5 unit.
        let expected = (10.0 * 0.1 + 5.0 * 0.5) / 15.0;
        assert!((prof.greedy_fill_mean(15, 10) - expected).abs() < 1e-12);
    }
}
