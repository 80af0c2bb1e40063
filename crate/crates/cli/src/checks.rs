//! Acceptance checks. Each runner returns a pass/fail verdict and the numbers behind it.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use privalloc::alloc::{ila_nonprivate, ila_params_adversarial, ila_params_stochastic, ila_private, ula_private_public_membership};
use privalloc::bounds::{
    gini_baseline, ila_sampling_lower, ila_sampling_upper, ila_stochastic_bound, ila_adversarial_bound, ula_baseline,
    ula_privacy_term,
};
use privalloc::budget::{classify_regime_sampling, hard_instance, ila_with_sampling, inequality_variance_bound, SamplingEconomy};
use privalloc::dp::{gaussian_mechanism, private_partial_sums, sigma_max, PartialSumsCalibration};
use privalloc::learn::classify_regime_learning;
use privalloc::synth::{generate, Generator, PopulationSpec};
use privalloc::{
    allocation_value, brute_force_opt_value, derive_seed, random_allocation, regret, seeded, Population, UnitProfile,
};
use rand::Rng;

use crate::config::parse;
use crate::error::CliError;
use crate::presets;
use crate::strategy::{learned_trial, StrategyKind};
use crate::sweep::{mean_se, run_rows, Row};

pub const DEFAULT_SEED: u64 = 20_240_601;

const TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct CheckOptions {
    pub seed: u64,
    /// Golden files for the determinism check; skipped when absent.
    pub golden: Option<PathBuf>,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self { seed: DEFAULT_SEED, golden: None }
    }
}

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    pub details: Vec<String>,
    pub elapsed: Duration,
}

impl CheckOutcome {
    pub fn line(&self) -> String {
        format!("criterion {:>2} {} {}", self.id, if self.passed { "PASS" } else { "FAIL" }, self.title)
    }
}

pub const TITLES: [&str; 10] = [
    "oracle equivalence of exact individual allocation",
    "budget safety of the private threshold allocation",
    "regret bounds of the private threshold allocation",
    "privacy term of unit-level allocation",
    "noise calibration",
    "phase transition of sampling-based individual allocation",
    "Gini baseline and inequality-variance inequalities",
    "sampling regime map",
    "learning pipeline bounds and crossover",
    "byte-reproducible commands",
];

pub fn run(id: u8, options: &CheckOptions) -> Result<CheckOutcome, CliError> {
    let start = Instant::now();
    let (passed, details) = match id {
        1 => oracle_equivalence(options.seed)?,
        2 => budget_safety(options.seed)?,
        3 => ila_regret(options.seed)?,
        4 => ula_privacy(options.seed)?,
        5 => noise_calibration(options.seed)?,
        6 => phase_transition(options.seed)?,
        7 => lemma_inequalities(options.seed)?,
        8 => regime_map(options.seed)?,
        9 => learning_pipeline(options.seed)?,
        10 => determinism(options.golden.as_deref())?,
        _ => return Err(CliError::config(format!("no criterion {id}; expected 1 to 10"))),
    };
    let elapsed = start.elapsed();
    let (passed, details) = match runtime_limit(id) {
        Some(limit) if elapsed > limit => {
            let mut d = details;
            d.push(format!("runtime {:.1} s exceeds {} s", elapsed.as_secs_f64(), limit.as_secs()));
            (false, d)
        }
        _ => (passed, details),
    };
    Ok(CheckOutcome { id, title: TITLES[usize::from(id) - 1], passed, details, elapsed })
}

fn runtime_limit(id: u8) -> Option<Duration> {
    match id {
        1 => Some(Duration::from_secs(10)),
        2 => Some(Duration::from_secs(120)),
        6 => Some(Duration::from_secs(180)),
        _ => None,
    }
}

type Verdict = Result<(bool, Vec<String>), CliError>;

fn binomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

fn oracle_equivalence(seed: u64) -> Verdict {
    const POPULATIONS: usize = 1000;
    let mut rng = seeded(derive_seed(seed, &[1]));
    let mut mismatches = Vec::new();
    for t in 0..POPULATIONS {
        let p = rng.random_range(1..=20usize);
        let k = rng.random_range(0..=p);
        let delta = rng.random_range(0.05..=1.0);
        let tied = rng.random_bool(0.5);
        let w: Vec<f64> = (0..p)
            .map(|_| if tied { f64::from(rng.random_range(0..=4u8)) / 4.0 } else { rng.random() })
            .collect();
        let pop = Population::ungrouped(w, delta)?;
        let value = allocation_value(&ila_nonprivate(&pop, k)?, &pop);
        let best = brute_force_opt_value(&pop, k)?;
        if value != best {
            mismatches.push(format!("population {t}: P = {p}, k = {k}, value {value} vs optimum {best}"));
        }
    }
    let mut details = vec![format!("{POPULATIONS} populations with P <= 20, {} mismatches", mismatches.len())];
    details.extend(mismatches.into_iter().take(5));
    Ok((details.len() == 1, details))
}

const ILA_P: usize = 2000;
const ILA_K: usize = 500;
const ILA_BETA: f64 = 0.1;
const ILA_PSIS: [f64; 3] = [0.1, 1.0, 10.0];
const ILA_DELTA: f64 = 0.1;

/// `(treated count, normalized regret of the k lowest noisy scores)` per trial.
fn iid_runs(seed: u64, psi_index: usize, trials: usize) -> Result<Vec<(usize, f64)>, CliError> {
    let psi = ILA_PSIS[psi_index];
    let params = ila_params_stochastic(ILA_P, ILA_K, psi, ILA_BETA)?;
    (0..trials)
        .map(|t| {
            let coords = [2, psi_index as u64, t as u64];
            let spec = PopulationSpec {
                units: 1,
                unit_size: ILA_P,
                delta_w: ILA_DELTA,
                generator: Generator::Uniform,
                binary: false,
                seed: derive_seed(seed, &coords),
            };
            let pop = generate(&spec)?.population;
            let mut rng = seeded(derive_seed(seed, &[2, psi_index as u64, t as u64, 1]));
            let out = ila_private(&pop, &params, &mut rng)?;
            let r = regret(&out.truncated(ILA_K), &pop, ILA_K)?;
            Ok((out.treated.len(), r.normalized_regret))
        })
        .collect()
}

fn budget_safety(seed: u64) -> Verdict {
    const TRIALS: usize = 1000;
    let mut ok = true;
    let mut details = Vec::new();
    for (i, psi) in ILA_PSIS.iter().enumerate() {
        let runs = iid_runs(seed, i, TRIALS)?;
        let over = runs.iter().filter(|(n, _)| *n > ILA_K).count();
        let rate = over as f64 / TRIALS as f64;
        let allowed = ILA_BETA / 2.0 + 3.0 * binomial_se(ILA_BETA / 2.0, TRIALS);
        let pass = rate <= allowed;
        ok &= pass;
        details.push(format!(
            "psi = {psi}: {over}/{TRIALS} over budget (rate {rate:.4}, allowed {allowed:.4}) {}",
            if pass { "ok" } else { "FAIL" }
        ));
    }
    Ok((ok, details))
}

fn ila_regret(seed: u64) -> Verdict {
    const TRIALS: usize = 1000;
    const SPIKE_TRIALS: usize = 100;
    let mut ok = true;
    let mut details = Vec::new();
    for (i, &psi) in ILA_PSIS.iter().enumerate() {
        let regrets: Vec<f64> = iid_runs(seed, i, TRIALS)?.into_iter().map(|r| r.1).collect();
        let (mean, se) = mean_se(&regrets);
        let bound = ila_stochastic_bound(ILA_P, psi, ILA_BETA, 1.0);
        let pass = mean - 2.0 * se <= bound + TOL;
        ok &= pass;
        details.push(format!(
            "i.i.d. uniform, psi = {psi}: mean regret {mean:.4} (se {se:.4}) vs bound {bound:.4} {}",
            if pass { "ok" } else { "FAIL" }
        ));
    }
    // Every welfare equal: any k individuals are optimal, so regret is the unspent budget.
    let spike = Population::ungrouped(vec![0.5; ILA_P], 0.5)?;
    for (i, &psi) in ILA_PSIS.iter().enumerate() {
        let params = ila_params_adversarial(ILA_P, ILA_K, psi, ILA_BETA)?;
        let regrets = (0..SPIKE_TRIALS)
            .map(|t| {
                let mut rng = seeded(derive_seed(seed, &[3, i as u64, t as u64]));
                let out = ila_private(&spike, &params, &mut rng)?;
                Ok(regret(&out.truncated(ILA_K), &spike, ILA_K)?.normalized_regret)
            })
            .collect::<Result<Vec<f64>, CliError>>()?;
        let (mean, se) = mean_se(&regrets);
        let bound = ila_adversarial_bound(ILA_P, psi, ILA_BETA);
        let pass = mean - 2.0 * se <= bound + TOL;
        ok &= pass;
        let margin = params.margin(params.grid()?.bins);
        details.push(format!(
            "spike, psi = {psi}: mean regret {mean:.4} (se {se:.4}) vs bound {bound:.4}, threshold margin {margin:.4} {}",
            if pass { "ok" } else { "FAIL" }
        ));
    }
    Ok((ok, details))
}

fn ula_privacy(seed: u64) -> Verdict {
    const TRIALS: usize = 1000;
    const M: usize = 20;
    const N: usize = 50;
    const BETA: f64 = 0.05;
    let mut ok = true;
    let mut details = Vec::new();
    for (ki, &k) in [100usize, 500, 900].iter().enumerate() {
        for (pi, &psi) in [0.1, 1.0].iter().enumerate() {
            let term = ula_privacy_term(M * N, M, N, k, psi, BETA);
            let mut held = 0usize;
            let mut worst = f64::NEG_INFINITY;
            for t in 0..TRIALS {
                let coords = [4, ki as u64, pi as u64, t as u64];
                let spec = PopulationSpec {
                    units: M,
                    unit_size: N,
                    delta_w: 1.0,
                    generator: Generator::GiniTarget { gini: 0.3, rho_bar: 0.4 },
                    binary: true,
                    seed: derive_seed(seed, &coords),
                };
                let gp = generate(&spec)?;
                let mut rng = seeded(derive_seed(seed, &[4, ki as u64, pi as u64, t as u64, 1]));
                let out = ula_private_public_membership(&gp.population, k, psi, &mut rng)?;
                let excess = regret(&out.treated, &gp.population, k)?.normalized_regret - ula_baseline(&gp.profile, N, k);
                worst = worst.max(excess);
                if excess <= term + TOL {
                    held += 1;
                }
            }
            let rate = held as f64 / TRIALS as f64;
            let needed = 0.95 - 3.0 * binomial_se(0.95, TRIALS);
            let pass = rate >= needed;
            ok &= pass;
            details.push(format!(
                "k = {k}, psi = {psi}: bound held in {held}/{TRIALS} (needed {needed:.4}), term {term:.3}, worst excess {worst:.3} {}",
                if pass { "ok" } else { "FAIL" }
            ));
        }
    }
    Ok((ok, details))
}

fn noise_calibration(seed: u64) -> Verdict {
    const DRAWS: usize = 1_000_000;
    const TRIALS: usize = 20_000;
    const PSI: f64 = 1.0;
    let mut ok = true;
    let mut details = Vec::new();
    let mut rng = seeded(derive_seed(seed, &[5]));
    let draws = (0..DRAWS)
        .map(|_| gaussian_mechanism(0.0, 1.0, PSI, &mut rng))
        .collect::<Result<Vec<f64>, _>>()?;
    let mean = draws.iter().sum::<f64>() / DRAWS as f64;
    let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (DRAWS - 1) as f64;
    let target = 1.0 / (2.0 * PSI);
    let pass = (var / target - 1.0).abs() <= 0.02;
    ok &= pass;
    details.push(format!(
        "Gaussian mechanism: variance {var:.5} vs {target} ({:+.2}%) {}",
        100.0 * (var / target - 1.0),
        if pass { "ok" } else { "FAIL" }
    ));
    for &n in &[1usize, 64, 1024] {
        let counts = vec![0u64; n];
        let mut sq = vec![0.0f64; n];
        let mut rng = seeded(derive_seed(seed, &[5, n as u64]));
        for _ in 0..TRIALS {
            let sums = private_partial_sums(&counts, PSI, &mut rng)?;
            for (acc, (noisy, exact)) in sq.iter_mut().zip(sums.noisy.iter().zip(&sums.exact)) {
                *acc += (noisy - exact).powi(2);
            }
        }
        let stds: Vec<f64> = sq.iter().map(|s| (s / TRIALS as f64).sqrt()).collect();
        let smax = sigma_max(n, PSI);
        let largest = stds.iter().cloned().fold(0.0, f64::max);
        let last = stds[n - 1];
        let analytic = PartialSumsCalibration::new(n, PSI)?.coordinate_std(n - 1);
        let pass = largest <= smax * 1.02 && (last / smax - 1.0).abs() <= 0.02 && (analytic - smax).abs() <= TOL;
        ok &= pass;
        details.push(format!(
            "partial sums n = {n}: largest coordinate std {largest:.4}, last {last:.4}, sigma_max {smax:.4} {}",
            if pass { "ok" } else { "FAIL" }
        ));
    }
    Ok((ok, details))
}

fn phase_transition(seed: u64) -> Verdict {
    const P: usize = 200;
    const K: usize = 40;
    const TRIALS: usize = 20_000;
    let mut ok = true;
    let mut details = Vec::new();
    let regrets = |li: u64, lambda: f64, random: bool| -> Result<Vec<f64>, CliError> {
        let econ = SamplingEconomy::new(lambda, K, P)?;
        (0..TRIALS)
            .map(|t| {
                let mut rng = seeded(derive_seed(seed, &[6, li, t as u64, u64::from(random)]));
                let pop = hard_instance(P, P - K, &mut rng)?;
                let alloc = if random {
                    random_allocation(P, K, &mut rng)?
                } else {
                    ila_with_sampling(&pop, &econ, None, &mut rng)?.allocation
                };
                Ok(regret(&alloc, &pop, K)?.normalized_regret)
            })
            .collect()
    };
    for (li, &lambda) in [0.05, 0.2, 0.5].iter().enumerate() {
        let (mean, se) = mean_se(&regrets(li as u64, lambda, false)?);
        let lower = ila_sampling_lower(P, K, lambda);
        let upper = ila_sampling_upper(P, K, lambda);
        let pass = mean >= lower - 2.0 * se && mean <= upper + 2.0 * se;
        ok &= pass;
        details.push(format!(
            "lambda = {lambda}: mean regret {mean:.4} (se {se:.4}) in [{lower:.4}, {upper:.4}] {}",
            if pass { "ok" } else { "FAIL" }
        ));
    }
    let lambda = 0.95;
    let (m1, s1) = mean_se(&regrets(3, lambda, false)?);
    let (m2, s2) = mean_se(&regrets(3, lambda, true)?);
    let se = (s1 * s1 + s2 * s2).sqrt();
    let pass = (m1 - m2).abs() <= 2.0 * se;
    ok &= pass;
    details.push(format!(
        "lambda = {lambda}: sampling {m1:.4} vs random {m2:.4}, difference {:.4} (2 se = {:.4}) {}",
        m1 - m2,
        2.0 * se,
        if pass { "ok" } else { "FAIL" }
    ));
    Ok((ok, details))
}

fn random_profile<R: Rng>(rng: &mut R) -> Result<UnitProfile, CliError> {
    loop {
        let m = rng.random_range(2..=40usize);
        let style = rng.random_range(0..3u8);
        let rho: Vec<f64> = (0..m)
            .map(|_| match style {
                0 => rng.random(),
                1 => f64::from(rng.random_range(0..=4u8)) / 4.0,
                _ => rng.random::<f64>().powi(4),
            })
            .collect();
        if rho.iter().any(|&r| r > 0.0) {
            return Ok(UnitProfile::new(rho)?);
        }
    }
}

fn lemma_inequalities(seed: u64) -> Verdict {
    const VECTORS: usize = 10_000;
    let mut rng = seeded(derive_seed(seed, &[7]));
    let mut any_k = 0usize;
    let mut first_unit = 0usize;
    let mut worst_gap = 0.0f64;
    let mut example = None;
    for _ in 0..VECTORS {
        let profile = random_profile(&mut rng)?;
        let m = profile.len();
        let mut violated = false;
        for count in 1..m {
            let (lhs, rhs) = gini_baseline(&profile, count)?;
            if lhs < rhs - TOL {
                violated = true;
                worst_gap = worst_gap.max(rhs - lhs);
                if count == 1 {
                    first_unit += 1;
                }
                if example.is_none() {
                    example = Some(format!("M = {m}, K = {count}: {lhs:.4} < {rhs:.4}"));
                }
            }
        }
        any_k += usize::from(violated);
    }
    let mut variance_violations = 0usize;
    let mut rng = seeded(derive_seed(seed, &[7, 1]));
    for _ in 0..VECTORS {
        let profile = random_profile(&mut rng)?;
        let (lhs, rhs) = inequality_variance_bound(&profile)?;
        if lhs > rhs + TOL {
            variance_violations += 1;
        }
    }
    let small = UnitProfile::new(vec![0.0, 0.5, 1.0])?;
    let (lhs, rhs) = gini_baseline(&small, 2)?;
    let details = vec![
        format!(
            "Gini baseline over K = 1..M-1: {any_k}/{VECTORS} vectors violate for some K, {first_unit} at K = 1, largest gap {worst_gap:.4}"
        ),
        format!("first violation: {}", example.unwrap_or_else(|| "none".into())),
        format!("rho = [0, 0.5, 1], K = 2: {lhs:.4} vs {rhs:.4}"),
        format!("inequality-variance: {variance_violations}/{VECTORS} violations"),
    ];
    Ok((any_k == 0 && variance_violations == 0, details))
}

fn cell_stats(rows: &[&Row]) -> (f64, f64) {
    let regrets: Vec<f64> = rows.iter().filter_map(|r| r.normalized_regret).collect();
    mean_se(&regrets)
}

fn regime_map(seed: u64) -> Verdict {
    let mut config = parse(presets::REGIME_MAP)?;
    config.seed = seed;
    config.trials = 200;
    let rows = run_rows(&config, 1)?;
    let grid = config.grid();
    let p = config.population.size();
    let mut included = 0usize;
    let mut matched = 0usize;
    let mut details = Vec::new();
    for (g, point) in grid.iter().enumerate() {
        let here: Vec<&Row> = rows.iter().filter(|r| r.point == g).collect();
        let mut stats: Vec<(StrategyKind, f64, f64)> = [StrategyKind::IlaSampling, StrategyKind::UlaSampling, StrategyKind::Rand]
            .iter()
            .map(|&kind| {
                let mine: Vec<&Row> = here.iter().copied().filter(|r| r.strategy == kind).collect();
                let (m, s) = cell_stats(&mine);
                (kind, m, s)
            })
            .filter(|s| s.1.is_finite())
            .collect();
        stats.sort_by(|a, b| a.1.total_cmp(&b.1));
        let rho_bar = here.iter().map(|r| r.rho_bar).sum::<f64>() / here.len() as f64;
        let gini = point.gini.unwrap_or(0.0);
        let regime = classify_regime_sampling(gini, point.lambda, rho_bar, point.k, p)?;
        let predicted = if regime.label.favors_ula() { StrategyKind::UlaSampling } else { StrategyKind::IlaSampling };
        let (best, second) = (stats[0], stats[1]);
        let gap_se = (best.2 * best.2 + second.2 * second.2).sqrt();
        let decisive = second.1 - best.1 >= 2.0 * gap_se;
        let verdict = if !decisive {
            "excluded"
        } else if best.0 == predicted {
            "match"
        } else {
            "mismatch"
        };
        if decisive {
            included += 1;
            matched += usize::from(best.0 == predicted);
        }
        let means: Vec<String> = stats.iter().map(|s| format!("{} {:.2}", s.0, s.1)).collect();
        details.push(format!(
            "lambda = {}, G = {gini}: predicted {} ({}), observed {} [{verdict}]",
            point.lambda,
            predicted,
            regime.label,
            means.join(", ")
        ));
    }
    let rate = if included == 0 { 0.0 } else { matched as f64 / included as f64 };
    details.insert(0, format!("{matched}/{included} decisive cells match ({:.1}%), need 80%", 100.0 * rate));
    Ok((included > 0 && rate >= 0.8, details))
}

fn learning_pipeline(seed: u64) -> Verdict {
    const TRIALS: usize = 1000;
    const CROSSOVER_TRIALS: usize = 200;
    const P: usize = 5000;
    const BETA: f64 = 0.1;
    let mut config = parse(presets::LEARNING)?;
    config.learning.cells = 10;
    let learning = config.learning.clone();
    let mut ok = true;
    let mut details = Vec::new();

    let trials = (0..TRIALS)
        .map(|t| learned_trial(&learning, P, 500, f64::INFINITY, None, BETA, derive_seed(seed, &[9, t as u64])))
        .collect::<Result<Vec<_>, _>>()?;
    let disjoint = trials.iter().all(|t| t.disjoint);
    for (name, gaps, regrets, bounds) in [
        (
            "individual (model ranking)",
            trials.iter().map(|t| t.ila_regret - t.ila_bound).collect::<Vec<_>>(),
            trials.iter().map(|t| t.ila_regret).collect::<Vec<_>>(),
            trials.iter().map(|t| t.ila_bound).collect::<Vec<_>>(),
        ),
        (
            "unit (cell means)",
            trials.iter().map(|t| t.ula_regret - t.ula_bound).collect(),
            trials.iter().map(|t| t.ula_regret).collect(),
            trials.iter().map(|t| t.ula_bound).collect(),
        ),
    ] {
        let (gap, se) = mean_se(&gaps);
        let pass = gap <= 2.0 * se + TOL;
        ok &= pass;
        details.push(format!(
            "{name}: mean regret {:.2} vs mean bound {:.2} {}",
            mean_se(&regrets).0,
            mean_se(&bounds).0,
            if pass { "ok" } else { "FAIL" }
        ));
    }
    let alpha = mean_se(&trials.iter().map(|t| t.alpha).collect::<Vec<_>>()).0;
    let excess = mean_se(&trials.iter().map(|t| t.excess).collect::<Vec<_>>()).0;
    details.push(format!("mean squared-loss risk {alpha:.4}, mean excess risk {excess:.5}, training disjoint: {disjoint}"));
    ok &= disjoint;

    let sigma = 0.45;
    for (fi, &fraction) in [0.1, 0.3, 0.8].iter().enumerate() {
        let k = (fraction * P as f64).round() as usize;
        let runs = (0..CROSSOVER_TRIALS)
            .map(|t| {
                learned_trial(&learning, P, k, f64::INFINITY, Some(sigma), BETA, derive_seed(seed, &[9, 1, fi as u64, t as u64]))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let ila = mean_se(&runs.iter().map(|t| t.ila_regret).collect::<Vec<_>>());
        let ula = mean_se(&runs.iter().map(|t| t.ula_regret).collect::<Vec<_>>());
        let gini = mean_se(&runs.iter().map(|t| t.gini.unwrap_or(0.0)).collect::<Vec<_>>()).0;
        let rho_bar = mean_se(&runs.iter().map(|t| t.rho_bar).collect::<Vec<_>>()).0;
        let regime = classify_regime_learning(sigma, k, P, gini.clamp(0.0, 1.0), rho_bar, None)?;
        let observed_ula = ula.0 < ila.0;
        let pass = observed_ula == regime.ula_dominant;
        ok &= pass;
        details.push(format!(
            "sigma = {sigma}, k/P = {fraction}: product {:.3} predicts {}, observed ILA {:.2} (se {:.2}) vs ULA {:.2} (se {:.2}) {}",
            regime.product,
            if regime.ula_dominant { "ULA" } else { "ILA" },
            ila.0,
            ila.1,
            ula.0,
            ula.1,
            if pass { "ok" } else { "FAIL" }
        ));
    }
    Ok((ok, details))
}

/// Command lines exercised by the determinism check. `{dir}` is replaced by a scratch directory.
pub const DETERMINISM_COMMANDS: [(&str, &[&str]); 7] = [
    ("describe_default.txt", &["describe", "--preset", "default"]),
    ("generate_default.csv", &["generate", "--preset", "default", "--out", "{dir}/out"]),
    ("allocate_ila.csv", &["allocate", "--preset", "default", "--strategy", "ila", "--out", "{dir}/out"]),
    ("allocate_ula_pm.csv", &["allocate", "--preset", "default", "--strategy", "ula-pm", "--k", "230", "--out", "{dir}/out"]),
    ("sweep_default.csv", &["sweep", "--preset", "default", "--trials", "3", "--out", "{dir}/out"]),
    ("regime_default.txt", &["regime", "--preset", "default", "--psi", "1", "--lambda", "0.2", "--sigma", "0.4"]),
    ("sweep_learning.csv", &["sweep", "--preset", "learning", "--trials", "2", "--out", "{dir}/out"]),
];

static SCRATCH: AtomicUsize = AtomicUsize::new(0);

fn scratch_dir() -> Result<PathBuf, CliError> {
    let n = SCRATCH.fetch_add(1, Ordering::Relaxed);
    let dir = std::env::temp_dir().join(format!("privalloc-{}-{n}", std::process::id()));
    fs::create_dir_all(&dir).map_err(|source| CliError::Write { path: dir.clone(), source })?;
    Ok(dir)
}

/// Runs one determinism command and returns its stdout followed by every file it wrote.
pub fn command_artifact(args: &[&str], parallel: Option<usize>) -> Result<(i32, Vec<u8>), CliError> {
    let dir = scratch_dir()?;
    let dir_str = dir.to_string_lossy().to_string();
    let mut argv: Vec<String> = vec!["privalloc".into()];
    argv.extend(args.iter().map(|a| a.replace("{dir}", &dir_str)));
    if let Some(n) = parallel {
        argv.push("--parallel".into());
        argv.push(n.to_string());
    }
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = crate::app::run(argv, &mut out, &mut err);
    for name in ["out", "out.json"] {
        let path = dir.join(name);
        if path.exists() {
            out.extend_from_slice(format!("--- {name}\n").as_bytes());
            out.extend(fs::read(&path).map_err(|source| CliError::Read { path: path.clone(), source })?);
        }
    }
    let _ = fs::remove_dir_all(&dir);
    if code == crate::app::EXIT_ERROR {
        return Err(CliError::config(format!("{} failed: {}", args.join(" "), String::from_utf8_lossy(&err))));
    }
    Ok((code, out))
}

fn determinism(golden: Option<&Path>) -> Verdict {
    let mut ok = true;
    let mut details = Vec::new();
    for (name, args) in DETERMINISM_COMMANDS {
        let (_, first) = command_artifact(args, None)?;
        let (_, second) = command_artifact(args, None)?;
        let parallel = if args[0] == "sweep" { Some(command_artifact(args, Some(3))?.1) } else { None };
        let repeat = first == second && parallel.as_ref().map_or(true, |p| *p == first);
        let (golden_state, golden_ok) = match golden {
            Some(dir) => match fs::read(dir.join(name)) {
                Ok(bytes) if bytes == first => ("golden match", true),
                Ok(_) => ("golden mismatch", false),
                Err(_) => ("golden missing", false),
            },
            None => ("no golden", true),
        };
        let pass = repeat && golden_ok;
        ok &= pass;
        details.push(format!(
            "{}: {} bytes, {}, {golden_state} {}",
            args.join(" "),
            first.len(),
            if repeat { "repeatable" } else { "NOT repeatable" },
            if pass { "ok" } else { "FAIL" }
        ));
    }
    Ok((ok, details))
}
