use std::f64::consts::PI;

use rand::Rng;

use crate::dp::{check_psi, private_partial_sums, sigma_max};
use crate::error::{ensure, Error, Result};
use crate::model::{Allocation, Population};

/// Default cap on the number of histogram bins.
pub const DEFAULT_MAX_BINS: u64 = 10_000_000;

/// Parameters of the private individual-level allocation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IlaParams {
    pub psi: f64,
    /// Bin width.
    pub theta: f64,
    /// Half-width of the uniform noise added to each score.
    pub s: f64,
    pub k: usize,
    pub beta: f64,
    /// Multiplier on the high-probability margin. `1.0` gives the analyzed algorithm.
    pub margin_scale: f64,
    pub max_bins: u64,
}

impl IlaParams {
    pub fn new(psi: f64, theta: f64, s: f64, k: usize, beta: f64) -> Result<Self> {
        let p = Self { psi, theta, s, k, beta, margin_scale: 1.0, max_bins: DEFAULT_MAX_BINS };
        p.validate()?;
        Ok(p)
    }

    pub fn with_margin_scale(mut self, scale: f64) -> Self {
        self.margin_scale = scale;
        self
    }

    pub fn with_max_bins(mut self, cap: u64) -> Self {
        self.max_bins = cap;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_psi(self.psi)?;
        ensure(self.theta > 0.0 && self.theta.is_finite(), "theta", format!("{} must be positive", self.theta))?;
        ensure(self.s >= 0.0 && self.s.is_finite(), "s", format!("{} must be non-negative", self.s))?;
        ensure(self.beta > 0.0 && self.beta < 1.0, "beta", format!("{} not in (0, 1)", self.beta))?;
        ensure(self.margin_scale >= 0.0, "margin_scale", "must be non-negative")?;
        Ok(())
    }

    pub fn grid(&self) -> Result<BinGrid> {
        BinGrid::new(self.theta, self.s, self.max_bins)
    }

    /// The additive slack subtracted from the budget when searching for the threshold bin.
    pub fn margin(&self, bins: usize) -> f64 {
        let nb = bins as f64;
        self.margin_scale
            * sigma_max(bins, self.psi)
            * (nb.ln().sqrt() + (2.0 / self.beta).ln().sqrt())
    }
}

/// Parameters for scores with i.i.d. continuous noise: `theta = 1 / (P pi sqrt(psi))`, `s = 0`.
pub fn ila_params_stochastic(population: usize, k: usize, psi: f64, beta: f64) -> Result<IlaParams> {
    ensure(population > 0, "population", "must be positive")?;
    check_psi(psi)?;
    let theta = 1.0 / (population as f64 * PI * psi.sqrt());
    IlaParams::new(psi, theta, 0.0, k, beta)
}

/// Parameters for arbitrary scores: `s = 1 / (k pi sqrt(psi))`,
/// `theta = 2 s ln^{3/2}(P) / (P pi sqrt(psi))`.
pub fn ila_params_adversarial(population: usize, k: usize, psi: f64, beta: f64) -> Result<IlaParams> {
    ensure(population > 1, "population", "must be at least 2")?;
    ensure(k > 0, "k", "must be positive")?;
    check_psi(psi)?;
    let p = population as f64;
    let s = 1.0 / (k as f64 * PI * psi.sqrt());
    let theta = 2.0 * s * p.ln().powf(1.5) / (p * PI * psi.sqrt());
    IlaParams::new(psi, theta, s, k, beta)
}

/// Histogram over `[-s, 1 + s]`: first bin `[-s, -s + theta]`, then `(l, l + theta]`, with
/// the last bin truncated at `1 + s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinGrid {
    pub theta: f64,
    pub s: f64,
    pub bins: usize,
}

impl BinGrid {
    pub fn new(theta: f64, s: f64, max_bins: u64) -> Result<Self> {
        ensure(theta > 0.0, "theta", "must be positive")?;
        let ratio = (1.0 + 2.0 * s) / theta;
        let rounded = ratio.round();
        let count = if (ratio - rounded).abs() <= 1e-9 * rounded.max(1.0) { rounded } else { ratio.ceil() };
        if !count.is_finite() || count > max_bins as f64 {
            return Err(Error::TooManyBins { bins: count.min(u64::MAX as f64) as u64, cap: max_bins });
        }
        Ok(Self { theta, s, bins: (count as usize).max(1) })
    }

    /// Left edge of bin `j` (0-based). `left_edge(bins)` is the right end `1 + s`.
    pub fn left_edge(&self, j: usize) -> f64 {
        if j >= self.bins {
            1.0 + self.s
        } else {
            -self.s + j as f64 * self.theta
        }
    }

    /// Bin containing `v`, consistent with comparisons against [`Self::left_edge`].
    pub fn bin_of(&self, v: f64) -> usize {
        let last = self.bins - 1;
        let guess = ((v + self.s) / self.theta).ceil() - 1.0;
        let mut j = if guess.is_nan() || guess < 0.0 { 0 } else { (guess as usize).min(last) };
        while j > 0 && v <= self.left_edge(j) {
            j -= 1;
        }
        while j < last && v > self.left_edge(j + 1) {
            j += 1;
        }
        j
    }
}

/// Result of an individual-level allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct IlaOutcome {
    /// Individuals with noisy score at most this value are treated.
    pub threshold: f64,
    pub noisy_scores: Vec<f64>,
    pub treated: Allocation,
    pub bins: usize,
    pub margin: f64,
    /// 1-based index of the selected bin; `bins + 1` when no bin qualified.
    pub threshold_bin: usize,
}

impl IlaOutcome {
    pub fn within_budget(&self, k: usize) -> bool {
        self.treated.within_budget(k)
    }

    /// The treated set truncated to the `k` lowest noisy scores.
    pub fn truncated(&self, k: usize) -> Allocation {
        if self.treated.len() <= k {
            return self.treated.clone();
        }
        let mut idx = self.treated.indices().to_vec();
        idx.sort_by(|&a, &b| self.noisy_scores[a].total_cmp(&self.noisy_scores[b]).then(a.cmp(&b)));
        idx.truncate(k);
        idx.sort_unstable();
        Allocation::new(idx, self.noisy_scores.len()).expect("subset of a valid allocation")
    }
}

/// Exact allocation to the `k` lowest welfare values; identical to the optimum.
pub fn ila_nonprivate(pop: &Population, k: usize) -> Result<Allocation> {
    crate::model::optimal_allocation(pop, k)
}

/// Private individual-level allocation on the population's welfare.
pub fn ila_private<R: Rng + ?Sized>(pop: &Population, params: &IlaParams, rng: &mut R) -> Result<IlaOutcome> {
    ensure(
        params.k <= pop.size(),
        "k",
        format!("{} exceeds population {}", params.k, pop.size()),
    )?;
    ila_private_on_scores(pop.welfare(), params, rng)
}

/// Private threshold allocation to the lowest of arbitrary scores in `[0, 1]`.
///
/// Each score is perturbed by `U[-s, s]`, binned, and the first bin whose noisy prefix count
/// plus the margin reaches `k` sets the threshold at its left edge.
pub fn ila_private_on_scores<R: Rng + ?Sized>(
    scores: &[f64],
    params: &IlaParams,
    rng: &mut R,
) -> Result<IlaOutcome> {
    params.validate()?;
    if let Some((index, &value)) = scores.iter().enumerate().find(|(_, w)| !(0.0..=1.0).contains(*w)) {
        return Err(Error::WelfareOutOfRange { index, value });
    }
    let grid = params.grid()?;
    let noisy_scores: Vec<f64> = if params.s > 0.0 {
        scores.iter().map(|w| w + rng.random_range(-params.s..=params.s)).collect()
    } else {
        scores.to_vec()
    };
    let mut counts = vec![0u64; grid.bins];
    for &v in &noisy_scores {
        counts[grid.bin_of(v)] += 1;
    }
    let sums = private_partial_sums(&counts, params.psi, rng)?;
    let margin = params.margin(grid.bins);
    let k = params.k as f64;
    let threshold_bin = sums
        .noisy
        .iter()
        .position(|s| s + margin >= k)
        .map_or(grid.bins + 1, |j| j + 1);
    let threshold = grid.left_edge(threshold_bin - 1);
    let treated: Vec<usize> = (0..noisy_scores.len()).filter(|&i| noisy_scores[i] <= threshold).collect();
    Ok(IlaOutcome {
        threshold,
        noisy_scores,
        treated: Allocation::new(treated, scores.len())?,
        bins: grid.bins,
        margin,
        threshold_bin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn bin_count_and_edges() {
        let g = BinGrid::new(0.25, 0.0, DEFAULT_MAX_BINS).unwrap();
        assert_eq!(g.bins, 4);
        assert_eq!(g.bin_of(0.0), 0);
        assert_eq!(g.bin_of(0.25), 0);
        assert_eq!(g.bin_of(0.2500001), 1);
        assert_eq!(g.bin_of(1.0), 3);
        let g = BinGrid::new(0.3, 0.0, DEFAULT_MAX_BINS).unwrap();
        assert_eq!(g.bins, 4);
        assert_eq!(g.left_edge(4), 1.0);
    }

    #[test]
    fn bin_cap_errors() {
        assert!(matches!(BinGrid::new(1e-9, 0.0, DEFAULT_MAX_BINS), Err(Error::TooManyBins { .. })));
    }

    #[test]
    fn single_occupied_bin_all_treated_when_k_is_p() {
        let pop = Population::new(vec![0.0; 10], 10, 0.5).unwrap();
        let params = IlaParams::new(f64::INFINITY, 0.5, 0.0, 10, 0.1).unwrap();
        let out = ila_private(&pop, &params, &mut seeded(1)).unwrap();
        assert_eq!(out.treated.len(), 10);
    }

    #[test]
    fn unlimited_budget_treats_below_threshold_edge() {
        let w = vec![0.05, 0.15, 0.25, 0.35, 0.45, 0.55, 0.65, 0.75, 0.85, 0.95];
        let pop = Population::new(w, 10, 0.5).unwrap();
        let params = IlaParams::new(f64::INFINITY, 0.1, 0.0, 3, 0.1).unwrap();
        let out = ila_private(&pop, &params, &mut seeded(1)).unwrap();
        // Prefix count reaches 3 in the third bin; its left edge admits two people.
        assert_eq!(out.treated.indices(), &[0, 1]);
        assert_eq!(out.threshold_bin, 3);
    }

    #[test]
    fn adversarial_params_formula() {
        let p = ila_params_adversarial(2000, 500, 1.0, 0.1).unwrap();
        let s = 1.0 / (500.0 * PI);
        assert!((p.s - s).abs() < 1e-15);
        assert!((p.theta - 2.0 * s * 2000f64.ln().powf(1.5) / (2000.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn truncation_keeps_lowest_scores() {
        let out = IlaOutcome {
            threshold: 1.0,
            noisy_scores: vec![0.3, 0.1, 0.2],
            treated: Allocation::new(vec![0, 1, 2], 3).unwrap(),
            bins: 1,
            margin: 0.0,
            threshold_bin: 1,
        };
        assert_eq!(out.truncated(2).indices(), &[1, 2]);
    }
}
