//! Closed-form regret and utilization bounds. Logarithms are natural.

use std::f64::consts::PI;

use crate::budget::ula_constant;
use crate::dp::EULER_GAMMA;
use crate::error::{ensure, Result};
use crate::model::UnitProfile;

fn ln(x: f64) -> f64 {
    x.ln()
}

/// Regret bound for the threshold allocation with i.i.d. scores of maximum density `gamma`:
/// `(2 ln^{3/2} P + gamma + 2 ln P sqrt(ln(2/beta))) / (pi sqrt(psi))`.
pub fn ila_stochastic_bound(population: usize, psi: f64, beta: f64, gamma: f64) -> f64 {
    let p = population as f64;
    (2.0 * ln(p).powf(1.5) + gamma + 2.0 * ln(p) * ln(2.0 / beta).sqrt()) / (PI * psi.sqrt())
}

/// Regret bound for the threshold allocation on arbitrary scores:
/// `(3 ln^{3/2} P + 2 ln P sqrt(ln(2/beta))) / (pi sqrt(psi))`.
pub fn ila_adversarial_bound(population: usize, psi: f64, beta: f64) -> f64 {
    let p = population as f64;
    (3.0 * ln(p).powf(1.5) + 2.0 * ln(p) * ln(2.0 / beta).sqrt()) / (PI * psi.sqrt())
}

/// Shortfall `k - |treated|` allowed when bin occupancies are independent with mean at most
/// `p`: `k s + n p + (2 sigma + sqrt(n p)) (sqrt(ln B) + sqrt(ln(2/beta)))`, with `B` bins and
/// `sigma = (1 + (ln B + gamma_E)/pi)/sqrt(psi)`.
pub fn ila_shortfall_bound(k: usize, s: f64, n: usize, p: f64, bins: usize, psi: f64, beta: f64) -> f64 {
    let b = bins as f64;
    let np = n as f64 * p;
    let sigma = (1.0 + (ln(b) + EULER_GAMMA) / PI) / psi.sqrt();
    k as f64 * s + np + (2.0 * sigma + np.sqrt()) * (ln(b).sqrt() + ln(2.0 / beta).sqrt())
}

/// Privacy term of the public-membership unit allocation, holding with probability `1 - beta`.
pub fn ula_privacy_term(population: usize, units: usize, unit_size: usize, k: usize, psi: f64, beta: f64) -> f64 {
    let p = population as f64;
    let m = units as f64;
    let kk = k.min(population - k) as f64;
    let lb = ln(1.0 / beta).sqrt();
    let a = 2.0 * kk * ln(2.0 * m).sqrt() + lb;
    let b = (kk * p).sqrt() + lb;
    let c = p / PI.sqrt() + (m * ln(1.0 / beta)).sqrt();
    a.min(b).min(c) / (unit_size as f64 * psi.sqrt())
}

/// `k * rho_bar_K` with `K = ceil(k / N)`: the non-private unit-level regret ceiling.
pub fn ula_baseline(profile: &UnitProfile, unit_size: usize, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let units = k.div_ceil(unit_size);
    k as f64 * profile.mean_lowest(units)
}

/// Both sides of the Gini baseline inequality for the `count` lowest units:
/// `(rho_bar_M - rho_bar_K, G M rho_bar_M / (M - 1))`.
pub fn gini_baseline(profile: &UnitProfile, count: usize) -> Result<(f64, f64)> {
    let m = profile.len();
    ensure(m >= 2, "profile", "needs at least two units")?;
    ensure((1..=m).contains(&count), "count", format!("{count} not in 1..={m}"))?;
    let g = profile.gini()?;
    let mean = profile.mean();
    Ok((mean - profile.mean_lowest(count), g * m as f64 * mean / (m as f64 - 1.0)))
}

/// Upper bound on the expected regret of sampling-based individual allocation.
pub fn ila_sampling_upper(population: usize, k: usize, lambda: f64) -> f64 {
    let p = population as f64;
    let k = k as f64;
    if lambda >= (p - k) / p {
        k * (1.0 - k / p)
    } else {
        p * lambda * k / (p * lambda + k) + ((p * k).min(p * p * lambda) / (16.0 * (p * lambda + k))).sqrt()
    }
}

/// Lower bound on the worst-case expected regret of any sampling-based individual strategy.
pub fn ila_sampling_lower(population: usize, k: usize, lambda: f64) -> f64 {
    let p = population as f64;
    let k = k as f64;
    if lambda >= (p - k) / p {
        k * (1.0 - k / p)
    } else {
        (p * lambda - 0.25) * k / (p * lambda + k)
    }
}

/// High-probability bound for private sampling-based individual allocation.
pub fn ila_sampling_private_bound(population: usize, k: usize, lambda: f64, psi: f64, beta: f64) -> f64 {
    let p = population as f64;
    let k = k as f64;
    let l3 = ln(3.0 / beta);
    let lk = lambda * k;
    p * (lk + (lk * l3).sqrt()) / (p * lambda + k)
        + ((p * k).min(p * p * lambda) / (16.0 * (p * lambda + k))).sqrt()
        + (3.0 * ln(p).powf(1.5) + 2.0 * ln(p) * l3.sqrt()) / (PI * psi.sqrt())
}

/// Expected-regret bound of the sampling-based unit allocation with sample size `n`.
pub fn ula_sampling_bound(profile: &UnitProfile, unit_size: usize, k: usize, lambda: f64, n: usize, psi: f64) -> f64 {
    let m = profile.len() as f64;
    let p = m * unit_size as f64;
    let nn = n as f64;
    let nsz = unit_size as f64;
    let kk = k.min(p as usize - k) as f64;
    let rho_k = if k == 0 { 0.0 } else { profile.mean_lowest(k.div_ceil(unit_size)) };
    let rho_m = profile.mean();
    let g = profile.gini().unwrap_or(0.0);
    let var_term = (rho_m * (1.0 - rho_m) - 3.0 * rho_m * rho_m * g * g).max(0.0);
    let noise = if psi.is_infinite() { 0.0 } else { m * m / (2.0 * psi * nn * nn) };
    let a = (noise + (p - nn) / (4.0 * nn * nsz)).sqrt() * 2.0 * kk * (2.0 * ln(2.0 * m)).sqrt();
    let b_factor = (noise + (p - nn) * var_term / (nn * nsz)).sqrt();
    let b = b_factor * (2.0 * kk * p).sqrt();
    let c = b_factor * p * (2.0 / PI).sqrt();
    rho_k * k as f64 + (1.0 - rho_k) * lambda * nn + a.min(b).min(c)
}

/// Excess expected regret of the sampling-based unit allocation over non-private ULA at the
/// recommended sample size: `2^{3/4} (C M lambda / sqrt psi)^{1/2} + 2^{-4/3} (C^2 M lambda)^{1/3}`.
pub fn ula_sampling_excess(population: usize, units: usize, k: usize, lambda: f64, psi: f64) -> f64 {
    let c = ula_constant(population, units, k);
    let m = units as f64;
    let privacy = if psi.is_infinite() { 0.0 } else { 2f64.powf(0.75) * (c * m * lambda / psi.sqrt()).sqrt() };
    privacy + 2f64.powf(-4.0 / 3.0) * (c * c * m * lambda).cbrt()
}

/// Expected regret bound of private-membership unit allocation at the balanced budget split:
/// `k rho_bar_K + [ (3/pi)^{2/3} ln P + (C sqrt 2 / N)^{2/3} ]^{3/2} / sqrt(psi)`.
pub fn ula_private_membership_bound(baseline: f64, population: usize, unit_size: usize, c: f64, psi: f64) -> f64 {
    let p = population as f64;
    let inner = (3.0 / PI).powf(2.0 / 3.0) * ln(p) + (c * 2f64.sqrt() / unit_size as f64).powf(2.0 / 3.0);
    baseline + inner.powf(1.5) / psi.sqrt()
}

/// High-probability regret bound for allocating by a model with squared loss `alpha`:
/// `k' eta_bar_k' + P sqrt(alpha) + P^{3/4} sqrt(ln(1/beta) / 2)`.
pub fn ila_predictive_bound(k_prime_eta: f64, population: usize, alpha: f64, beta: f64) -> f64 {
    let p = population as f64;
    k_prime_eta + p * alpha.sqrt() + p.powf(0.75) * (ln(1.0 / beta) / 2.0).sqrt()
}

/// Expected regret bound for unit allocation by mean predictions over `cells` cells:
/// `k rho_bar_K + sqrt(P |cells| sigma^2) + P sqrt(alpha - sigma^2)`.
pub fn ula_predictive_bound(baseline: f64, population: usize, cells: usize, sigma2: f64, alpha: f64) -> f64 {
    let p = population as f64;
    baseline + (p * cells as f64 * sigma2).sqrt() + p * (alpha - sigma2).max(0.0).sqrt()
}

/// Privacy overhead attached to prediction-based allocation: `(3/pi) ln^{3/2} P / sqrt(psi)`.
pub fn predictive_privacy_overhead(population: usize, psi: f64) -> f64 {
    if psi.is_infinite() {
        return 0.0;
    }
    3.0 / PI * ln(population as f64).powf(1.5) / psi.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampling_bounds_bracket() {
        for lambda in [0.01, 0.05, 0.2, 0.5] {
            let lo = ila_sampling_lower(200, 40, lambda);
            let hi = ila_sampling_upper(200, 40, lambda);
            assert!(lo <= hi, "lambda {lambda}: {lo} > {hi}");
        }
        assert_eq!(ila_sampling_upper(200, 40, 0.95), 40.0 * 0.8);
    }

    #[test]
    fn sampling_bound_values() {
        // P = 200, k = 40, lambda = 0.2: 40 * 40 / 80 = 20 plus sqrt(min(8000, 8000) / 1280).
        let hi = ila_sampling_upper(200, 40, 0.2);
        assert!((hi - (20.0 + (8000.0f64 / 1280.0).sqrt())).abs() < 1e-12);
        let lo = ila_sampling_lower(200, 40, 0.2);
        assert!((lo - 39.75 * 40.0 / 80.0).abs() < 1e-12);
    }

    #[test]
    fn privacy_term_shrinks_with_budget() {
        let a = ula_privacy_term(1000, 20, 50, 500, 0.1, 0.05);
        let b = ula_privacy_term(1000, 20, 50, 500, 1.0, 0.05);
        assert!(b < a);
        assert!((a / b - 10f64.sqrt()).abs() < 1e-9);
    }
}
