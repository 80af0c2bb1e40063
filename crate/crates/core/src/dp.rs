//! Zero-concentrated differential privacy primitives.
//!
//! Budgets are expressed as the zCDP parameter `psi`. An infinite budget turns every
//! mechanism into its exact, noise-free counterpart.

use std::cell::RefCell;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{ensure, Result};

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// A zCDP budget. Composition adds budgets.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct PrivacyBudget {
    psi: f64,
}

impl PrivacyBudget {
    pub fn new(psi: f64) -> Result<Self> {
        ensure(psi > 0.0 && !psi.is_nan(), "psi", format!("{psi} must be positive"))?;
        Ok(Self { psi })
    }

    /// The non-private limit.
    pub fn unlimited() -> Self {
        Self { psi: f64::INFINITY }
    }

    pub fn psi(&self) -> f64 {
        self.psi
    }

    pub fn is_unlimited(&self) -> bool {
        self.psi.is_infinite()
    }

    /// Budget consumed by running every mechanism in `parts` on the same data.
    pub fn compose(parts: &[PrivacyBudget]) -> Self {
        Self { psi: parts.iter().map(|p| p.psi).sum() }
    }

    /// Standard deviation that makes a query of sensitivity `sensitivity` satisfy this budget.
    pub fn gaussian_sigma(&self, sensitivity: f64) -> f64 {
        if self.is_unlimited() {
            0.0
        } else {
            sensitivity / (2.0 * self.psi).sqrt()
        }
    }
}

pub(crate) fn check_psi(psi: f64) -> Result<()> {
    PrivacyBudget::new(psi).map(|_| ())
}

/// Releases `value + N(0, sensitivity^2 / (2 psi))`.
pub fn gaussian_mechanism<R: Rng + ?Sized>(
    value: f64,
    sensitivity: f64,
    psi: f64,
    rng: &mut R,
) -> Result<f64> {
    ensure(sensitivity >= 0.0, "sensitivity", format!("{sensitivity} is negative"))?;
    let budget = PrivacyBudget::new(psi)?;
    if budget.is_unlimited() || sensitivity == 0.0 {
        return Ok(value);
    }
    let z: f64 = StandardNormal.sample(rng);
    Ok(value + budget.gaussian_sigma(sensitivity) * z)
}

/// Coefficients of the lower-triangular Toeplitz square root of the all-ones
/// lower-triangular matrix: `c_0 = 1`, `c_j = c_{j-1} (2j - 1) / (2j)`.
pub fn sqrt_counting_coefficients(n: usize) -> Vec<f64> {
    let mut c = Vec::with_capacity(n);
    let mut cur = 1.0;
    for j in 0..n {
        if j > 0 {
            cur *= (2 * j - 1) as f64 / (2 * j) as f64;
        }
        c.push(cur);
    }
    c
}

/// Largest per-coordinate noise standard deviation of the partial-sums mechanism.
pub fn sigma_max(n: usize, psi: f64) -> f64 {
    if psi.is_infinite() {
        return 0.0;
    }
    (1.0 + ((n.max(1) as f64).ln() + EULER_GAMMA) / std::f64::consts::PI) / psi.sqrt()
}

/// Noise calibration of the partial-sums mechanism for `n` counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartialSumsCalibration {
    pub n: usize,
    pub psi: f64,
    /// `sum_{j<n} c_j^2`, the squared column norm of the factor.
    pub factor_norm_sq: f64,
    /// Standard deviation of the i.i.d. Gaussians fed through the factor.
    pub noise_scale: f64,
    pub sigma_max: f64,
}

impl PartialSumsCalibration {
    pub fn new(n: usize, psi: f64) -> Result<Self> {
        ensure(n > 0, "n", "need at least one count")?;
        check_psi(psi)?;
        let factor_norm_sq: f64 = sqrt_counting_coefficients(n).iter().map(|c| c * c).sum();
        let sm = sigma_max(n, psi);
        Ok(Self { n, psi, factor_norm_sq, noise_scale: sm / factor_norm_sq.sqrt(), sigma_max: sm })
    }

    /// Standard deviation of the noise on prefix sum `i` (0-based).
    pub fn coordinate_std(&self, i: usize) -> f64 {
        let partial: f64 = sqrt_counting_coefficients(i + 1).iter().map(|c| c * c).sum();
        self.noise_scale * partial.sqrt()
    }

    /// Standard deviation needed for `psi`-zCDP when one individual moves between bins.
    ///
    /// Moving changes the counts by `e_a - e_b`; the factor maps that to a vector of norm at
    /// most `sqrt(2) * ||c||`, so the noise on the factored counts needs
    /// `sqrt(2) ||c|| / sqrt(2 psi)`, which after the second factor is `||c||^2 / sqrt(psi)`.
    pub fn required_sigma_max(&self) -> f64 {
        if self.psi.is_infinite() {
            0.0
        } else {
            self.factor_norm_sq / self.psi.sqrt()
        }
    }

    pub fn satisfies_budget(&self) -> bool {
        self.required_sigma_max() <= self.sigma_max
    }
}

/// Noisy prefix sums of a count vector.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyPrefixSums {
    pub exact: Vec<f64>,
    pub noisy: Vec<f64>,
    pub calibration: PartialSumsCalibration,
}

/// Releases every prefix sum of `counts` under `psi`-zCDP with correlated noise `L z`.
pub fn private_partial_sums<R: Rng + ?Sized>(counts: &[u64], psi: f64, rng: &mut R) -> Result<NoisyPrefixSums> {
    let calibration = PartialSumsCalibration::new(counts.len(), psi)?;
    let mut exact = Vec::with_capacity(counts.len());
    let mut acc = 0u64;
    for &c in counts {
        acc += c;
        exact.push(acc as f64);
    }
    let noisy = if psi.is_infinite() {
        exact.clone()
    } else {
        let z: Vec<f64> = (0..counts.len()).map(|_| StandardNormal.sample(rng)).collect();
        let noise = toeplitz_apply(&z);
        exact
            .iter()
            .zip(noise)
            .map(|(s, e)| s + calibration.noise_scale * e)
            .collect()
    };
    Ok(NoisyPrefixSums { exact, noisy, calibration })
}

const DIRECT_MAX: usize = 96;

/// Computes `L z`, choosing the direct product for short inputs and FFT convolution otherwise.
pub fn toeplitz_apply(z: &[f64]) -> Vec<f64> {
    if z.len() <= DIRECT_MAX {
        toeplitz_apply_direct(z)
    } else {
        toeplitz_apply_fft(z)
    }
}

/// `O(n^2)` product with the Toeplitz factor.
pub fn toeplitz_apply_direct(z: &[f64]) -> Vec<f64> {
    let c = sqrt_counting_coefficients(z.len());
    (0..z.len())
        .map(|i| (0..=i).map(|j| c[i - j] * z[j]).sum())
        .collect()
}

struct Kernel {
    n: usize,
    spectrum: Vec<Complex<f64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Kernel {
    fn build(n: usize) -> Self {
        let m = (2 * n - 1).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(m);
        let inverse = planner.plan_fft_inverse(m);
        let mut spectrum: Vec<Complex<f64>> = sqrt_counting_coefficients(n)
            .into_iter()
            .map(|c| Complex::new(c, 0.0))
            .collect();
        spectrum.resize(m, Complex::new(0.0, 0.0));
        forward.process(&mut spectrum);
        Self { n, spectrum, forward, inverse }
    }
}

const KERNEL_CACHE: usize = 4;

thread_local! {
    static KERNELS: RefCell<Vec<Arc<Kernel>>> = const { RefCell::new(Vec::new()) };
}

fn kernel_for(n: usize) -> Arc<Kernel> {
    KERNELS.with(|cell| {
        let mut cache = cell.borrow_mut();
        if let Some(pos) = cache.iter().position(|k| k.n == n) {
            let k = cache.remove(pos);
            cache.push(k.clone());
            return k;
        }
        let k = Arc::new(Kernel::build(n));
        if cache.len() == KERNEL_CACHE {
            cache.remove(0);
        }
        cache.push(k.clone());
        k
    })
}

/// `O(n log n)` product with the Toeplitz factor by zero-padded circular convolution.
pub fn toeplitz_apply_fft(z: &[f64]) -> Vec<f64> {
    let n = z.len();
    if n == 0 {
        return Vec::new();
    }
    let kernel = kernel_for(n);
    let m = kernel.spectrum.len();
    let mut buf: Vec<Complex<f64>> = z.iter().map(|&x| Complex::new(x, 0.0)).collect();
    buf.resize(m, Complex::new(0.0, 0.0));
    kernel.forward.process(&mut buf);
    for (b, k) in buf.iter_mut().zip(&kernel.spectrum) {
        *b *= k;
    }
    kernel.inverse.process(&mut buf);
    let scale = 1.0 / m as f64;
    buf.truncate(n);
    buf.into_iter().map(|b| b.re * scale).collect()
}

/// High-probability bound on the largest of `n` centered Gaussians with standard deviation at
/// most `sigma`: `sigma (sqrt(2 ln n) + sqrt(2 ln(1/beta)))`.
pub fn max_gaussian_bound(n: usize, sigma: f64, beta: f64) -> Result<f64> {
    ensure(n > 0, "n", "must be positive")?;
    ensure(beta > 0.0 && beta < 1.0, "beta", format!("{beta} not in (0, 1)"))?;
    ensure(sigma >= 0.0, "sigma", "must be non-negative")?;
    Ok(sigma * ((2.0 * (n as f64).ln()).sqrt() + (2.0 * (1.0 / beta).ln()).sqrt()))
}

/// Deviation of the sample proportion when `k` of `population` are drawn without replacement,
/// holding with probability `1 - beta`.
pub fn hypergeometric_deviation_bound(population: usize, k: usize, beta: f64) -> Result<f64> {
    ensure(k > 0 && k <= population, "k", format!("{k} not in [1, {population}]"))?;
    ensure(beta > 0.0 && beta < 1.0, "beta", format!("{beta} not in (0, 1)"))?;
    let p = population as f64;
    let k = k as f64;
    Ok(((p - k) / p).sqrt() * ((2.0 / beta).ln() / k).sqrt())
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn coefficients_square_to_all_ones() {
        let n = 12;
        let c = sqrt_counting_coefficients(n);
        for i in 0..n {
            let s: f64 = (0..=i).map(|j| c[j] * c[i - j]).sum();
            assert!((s - 1.0).abs() < 1e-12, "row {i}: {s}");
        }
    }

    #[test]
    fn calibration_meets_budget_across_sizes() {
        for n in [1, 2, 3, 10, 100, 1000, 100_000] {
            let cal = PartialSumsCalibration::new(n, 1.0).unwrap();
            assert!(cal.satisfies_budget(), "n = {n}");
            assert!((cal.coordinate_std(n - 1) - cal.sigma_max).abs() < 1e-9);
        }
    }

    #[test]
    fn fft_matches_direct() {
        let mut rng = seeded(3);
        for n in [1, 2, 7, 97, 300, 1025] {
            let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let a = toeplitz_apply_direct(&z);
            let b = toeplitz_apply_fft(&z);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-9, "n = {n}");
            }
        }
    }

    #[test]
    fn unlimited_budget_is_exact() {
        let mut rng = seeded(1);
        let out = private_partial_sums(&[1, 2, 3], f64::INFINITY, &mut rng).unwrap();
        assert_eq!(out.noisy, vec![1.0, 3.0, 6.0]);
        assert_eq!(gaussian_mechanism(0.25, 1.0, f64::INFINITY, &mut rng).unwrap(), 0.25);
    }

    #[test]
    fn rejects_bad_budgets() {
        let mut rng = seeded(1);
        assert!(gaussian_mechanism(0.0, 1.0, 0.0, &mut rng).is_err());
        assert!(gaussian_mechanism(0.0, 1.0, -1.0, &mut rng).is_err());
        assert!(private_partial_sums(&[], 1.0, &mut rng).is_err());
    }

    #[test]
    fn sigma_max_example() {
        let expected = 1.0 + ((1000f64).ln() + EULER_GAMMA) / std::f64::consts::PI;
        assert!((sigma_max(1000, 1.0) - expected).abs() < 1e-12);
        assert!((sigma_max(1000, 4.0) - expected / 2.0).abs() < 1e-12);
    }
}
