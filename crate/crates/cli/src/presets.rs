//! Built-in experiment configurations.

use crate::config::{parse, ExperimentConfig};
use crate::error::CliError;

pub const DEFAULT: &str = "\
# Private individual- and unit-level allocation on a moderately unequal population.
trials = 50
seed = 1

[population]
units = 20
unit_size = 50
delta_w = 0.5
generator = gini_target
gini = 0.3
rho_bar = 0.4

[strategy]
name = rand

[strategy]
name = ila
beta = 0.1

[strategy]
name = ula
beta = 0.05

[strategy]
name = ula-pm

[sweep]
psi = 0.1, 1
k = 100, 500
";

/// Which of ILA, ULA and random allocation wins once welfare must be paid for.
pub const REGIME_MAP: &str = "\
trials = 200
seed = 2

[population]
units = 40
unit_size = 50
delta_w = 1
binary = true
generator = gini_target
rho_bar = coupled

[strategy]
name = ila-sampling

[strategy]
name = ula-sampling

[strategy]
name = rand

[sweep]
lambda = 0.01, 0.05, 0.2, 0.5, 1, 2
G = 0, 0.16, 0.32, 0.48, 0.64, 0.8
k = 200
psi = inf
";

/// The private threshold allocation on i.i.d. uniform welfare.
pub const BOUND_CHECK_ILA: &str = "\
trials = 1000
seed = 3

[population]
units = 1
unit_size = 2000
delta_w = 0.1
generator = uniform

[strategy]
name = ila-iid
beta = 0.1

[sweep]
psi = 0.1, 1, 10
k = 500
";

/// Allocation by a privately trained predictor.
pub const LEARNING: &str = "\
trials = 100
seed = 4

[population]
units = 10
unit_size = 500

[strategy]
name = ila-learned
beta = 0.1

[strategy]
name = ula-learned

[sweep]
psi = inf
k = 500

[learning]
dim = 6
eta_low = 0.2
eta_high = 0.8
tilt = 1
train_size = 1000
cells = 10
learner_psi = 1
";

pub const NAMES: [&str; 4] = ["default", "regime-map", "bound-check-ila", "learning"];

pub fn text(name: &str) -> Option<&'static str> {
    match name {
        "default" => Some(DEFAULT),
        "regime-map" => Some(REGIME_MAP),
        "bound-check-ila" => Some(BOUND_CHECK_ILA),
        "learning" => Some(LEARNING),
        _ => None,
    }
}

pub fn load(name: &str) -> Result<ExperimentConfig, CliError> {
    let text = text(name)
        .ok_or_else(|| CliError::config(format!("unknown preset '{name}' (known: {})", NAMES.join(", "))))?;
    parse(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_parses() {
        for name in NAMES {
            load(name).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        assert_eq!(load("regime-map").unwrap().grid().len(), 36);
    }
}
