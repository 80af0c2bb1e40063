use std::f64::consts::{PI, SQRT_2};

use rand::Rng;

use super::ila::{ila_params_adversarial, ila_private_on_scores, IlaOutcome};
use crate::dp::{check_psi, gaussian_mechanism};
use crate::error::{ensure, Result};
use crate::model::{Allocation, Partition, Population};

/// Result of a unit-level allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct UlaOutcome {
    /// Unit scores used for ranking (noisy when private).
    pub unit_scores: Vec<f64>,
    /// Number of treated individuals in each unit.
    pub per_unit: Vec<usize>,
    pub treated: Allocation,
}

/// Fills units in ascending score order (ties by unit index). The last, partially filled
/// unit has its treated members chosen uniformly at random.
pub fn ula_nonprivate_on_scores<R: Rng + ?Sized>(
    unit_scores: &[f64],
    partition: &Partition,
    k: usize,
    rng: &mut R,
) -> Result<UlaOutcome> {
    ensure(
        unit_scores.len() == partition.n_units(),
        "unit_scores",
        format!("{} scores for {} units", unit_scores.len(), partition.n_units()),
    )?;
    ensure(
        k <= partition.population(),
        "k",
        format!("{k} exceeds population {}", partition.population()),
    )?;
    let mut order: Vec<usize> = (0..unit_scores.len()).collect();
    order.sort_by(|&a, &b| unit_scores[a].total_cmp(&unit_scores[b]).then(a.cmp(&b)));
    let mut per_unit = vec![0usize; unit_scores.len()];
    let mut treated = Vec::with_capacity(k);
    let mut remaining = k;
    for j in order {
        if remaining == 0 {
            break;
        }
        let members = partition.members(j);
        let x = remaining.min(members.len());
        per_unit[j] = x;
        remaining -= x;
        if x == members.len() {
            treated.extend_from_slice(members);
        } else {
            treated.extend(rand::seq::index::sample(rng, members.len(), x).into_iter().map(|i| members[i]));
        }
    }
    Ok(UlaOutcome {
        unit_scores: unit_scores.to_vec(),
        per_unit,
        treated: Allocation::new(treated, partition.population())?,
    })
}

/// Unit-level allocation by exact high-welfare fractions.
pub fn ula_nonprivate<R: Rng + ?Sized>(pop: &Population, k: usize, rng: &mut R) -> Result<UlaOutcome> {
    ula_nonprivate_on_scores(pop.unit_profile().rho(), pop.partition(), k, rng)
}

/// Unit-level allocation when membership is public: each `rho_j` is released with
/// `N(0, 1 / (2 N^2 psi))` noise.
pub fn ula_private_public_membership<R: Rng + ?Sized>(
    pop: &Population,
    k: usize,
    psi: f64,
    rng: &mut R,
) -> Result<UlaOutcome> {
    check_psi(psi)?;
    let sensitivity = 1.0 / pop.unit_size() as f64;
    let noisy = pop
        .unit_profile()
        .rho()
        .iter()
        .map(|&r| gaussian_mechanism(r, sensitivity, psi, rng))
        .collect::<Result<Vec<_>>>()?;
    ula_nonprivate_on_scores(&noisy, pop.partition(), k, rng)
}

/// Unit-level allocation when membership is private. Unit scores are released with
/// `N(0, 1 / (N^2 psi_1))` noise, copied to every member, and allocated by the private
/// individual-level algorithm at `psi_2`.
///
/// `min_size` is the declared minimum unit size `N`; the sensitivity of each score is
/// `sqrt(2) / N`.
#[allow(clippy::too_many_arguments)]
pub fn ula_private_membership_on_scores<R: Rng + ?Sized>(
    unit_scores: &[f64],
    partition: &Partition,
    min_size: usize,
    k: usize,
    psi1: f64,
    psi2: f64,
    beta: f64,
    rng: &mut R,
) -> Result<IlaOutcome> {
    check_psi(psi1)?;
    check_psi(psi2)?;
    ensure(min_size > 0, "min_size", "must be positive")?;
    ensure(
        unit_scores.len() == partition.n_units(),
        "unit_scores",
        format!("{} scores for {} units", unit_scores.len(), partition.n_units()),
    )?;
    partition.check_min_size(min_size)?;
    let p = partition.population();
    ensure(k <= p, "k", format!("{k} exceeds population {p}"))?;
    let sensitivity = SQRT_2 / min_size as f64;
    let noisy = unit_scores
        .iter()
        .map(|&r| gaussian_mechanism(r, sensitivity, psi1, rng).map(|v| v.clamp(0.0, 1.0)))
        .collect::<Result<Vec<_>>>()?;
    let member_scores: Vec<f64> = (0..p).map(|i| noisy[partition.unit_of(i)]).collect();
    if psi2.is_infinite() {
        let out = ula_nonprivate_on_scores(&noisy, partition, k, rng)?;
        let threshold = out
            .treated
            .indices()
            .iter()
            .map(|&i| member_scores[i])
            .fold(f64::NEG_INFINITY, f64::max);
        return Ok(IlaOutcome {
            threshold,
            noisy_scores: member_scores,
            treated: out.treated,
            bins: 0,
            margin: 0.0,
            threshold_bin: 0,
        });
    }
    if k == 0 {
        return Ok(IlaOutcome {
            threshold: f64::NEG_INFINITY,
            noisy_scores: member_scores,
            treated: Allocation::empty(),
            bins: 0,
            margin: 0.0,
            threshold_bin: 0,
        });
    }
    let params = ila_params_adversarial(p, k, psi2, beta)?;
    ila_private_on_scores(&member_scores, &params, rng)
}

/// Private-membership unit-level allocation on a population.
pub fn ula_private_private_membership<R: Rng + ?Sized>(
    pop: &Population,
    k: usize,
    psi1: f64,
    psi2: f64,
    beta: f64,
    rng: &mut R,
) -> Result<IlaOutcome> {
    ula_private_membership_on_scores(
        pop.unit_profile().rho(),
        pop.partition(),
        pop.unit_size(),
        k,
        psi1,
        psi2,
        beta,
        rng,
    )
}

/// Division of a total budget between releasing unit scores and the threshold search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiSplit {
    pub psi1: f64,
    pub psi2: f64,
    /// `psi2 / psi1`.
    pub ratio: f64,
}

/// Splits `psi` so that the two noise terms of the private-membership bound balance:
/// `r = (3 ln^{3/2}(P) / pi * N / (C sqrt 2))^{2/3}`, `psi_1 = psi / (1 + r)`.
pub fn psi_split(population: usize, unit_size: usize, c: f64, psi: f64) -> Result<PsiSplit> {
    ensure(population > 1, "population", "must be at least 2")?;
    ensure(unit_size > 0, "unit_size", "must be positive")?;
    ensure(c > 0.0 && c.is_finite(), "c", format!("{c} must be positive"))?;
    check_psi(psi)?;
    let p = population as f64;
    let r = (3.0 * p.ln().powf(1.5) / PI * unit_size as f64 / (c * SQRT_2)).powf(2.0 / 3.0);
    Ok(PsiSplit { psi1: psi / (1.0 + r), psi2: psi * r / (1.0 + r), ratio: r })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn greedy_fills_lowest_units_first() {
        // Unit rho: 0.5, 0.0, 1.0.
        let w = vec![0.9, 0.1, 0.1, 0.1, 0.9, 0.9];
        let pop = Population::new(w, 2, 0.5).unwrap();
        let out = ula_nonprivate(&pop, 3, &mut seeded(2)).unwrap();
        assert_eq!(out.per_unit, vec![1, 2, 0]);
        assert!(out.treated.contains(2) && out.treated.contains(3));
    }

    #[test]
    fn ties_break_by_unit_index() {
        let pop = Population::new(vec![0.1; 6], 2, 0.5).unwrap();
        let out = ula_nonprivate(&pop, 2, &mut seeded(2)).unwrap();
        assert_eq!(out.per_unit, vec![2, 0, 0]);
    }

    #[test]
    fn public_membership_unlimited_equals_nonprivate() {
        let w: Vec<f64> = (0..40).map(|i| ((i * 37) % 40) as f64 / 40.0).collect();
        let pop = Population::new(w, 8, 0.5).unwrap();
        let a = ula_nonprivate(&pop, 13, &mut seeded(9)).unwrap();
        let b = ula_private_public_membership(&pop, 13, f64::INFINITY, &mut seeded(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn psi_split_sums_to_total() {
        let s = psi_split(10_000, 100, 447.2, 2.0).unwrap();
        assert!((s.psi1 + s.psi2 - 2.0).abs() < 1e-12);
        assert!((s.psi2 / s.psi1 - s.ratio).abs() < 1e-9);
    }

    #[test]
    fn undersized_unit_rejected() {
        let part = Partition::from_labels(vec![0, 0, 0, 1]).unwrap();
        let r = ula_private_membership_on_scores(&[0.1, 0.2], &part, 2, 1, 1.0, 1.0, 0.1, &mut seeded(1));
        assert!(r.is_err());
    }
}
