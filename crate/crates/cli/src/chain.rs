//! Continuous-time Markov chains driving regime-switching parameters.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use gbesq::adapters::RegimePath;
use gbesq::samplers::RngStream;
use gbesq::{GbesqError, Result};

/// Generator `G` (rows sum to zero, off-diagonal rates nonnegative), the
/// starting state (numbered from 1) and `(α, σ)` per state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkovChainSpec {
    pub generator: Vec<Vec<f64>>,
    pub initial_state: usize,
    pub alpha: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl MarkovChainSpec {
    pub fn check(&self) -> Result<()> {
        let k = self.generator.len();
        let bad = |reason: String| GbesqError::InvalidParameter {
            name: "generator",
            reason,
        };
        if k == 0 || self.generator.iter().any(|r| r.len() != k) {
            return Err(bad("must be a nonempty square matrix".into()));
        }
        for (i, row) in self.generator.iter().enumerate() {
            if row.iter().any(|g| !g.is_finite()) {
                return Err(bad(format!("row {} has a non-finite entry", i + 1)));
            }
            if row.iter().enumerate().any(|(j, &g)| j != i && g < 0.0) {
                return Err(bad(format!(
                    "row {} has a negative off-diagonal rate",
                    i + 1
                )));
            }
            let scale = row.iter().map(|g| g.abs()).fold(1.0, f64::max);
            if row.iter().sum::<f64>().abs() > 1e-9 * scale {
                return Err(bad(format!("row {} does not sum to zero", i + 1)));
            }
        }
        if !(1..=k).contains(&self.initial_state) {
            return Err(GbesqError::InvalidParameter {
                name: "initial_state",
                reason: format!("must be between 1 and {k}"),
            });
        }
        if self.alpha.len() != k || self.sigma.len() != k {
            return Err(GbesqError::InvalidParameter {
                name: "alpha",
                reason: format!("alpha and sigma need {k} entries"),
            });
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        self.generator.len()
    }
}

/// One path of the chain on `[0, horizon]`: exponential holding times and
/// jumps of the embedded chain.
pub fn simulate_regime_path(
    chain: &MarkovChainSpec,
    horizon: f64,
    rng: &mut RngStream,
) -> Result<RegimePath> {
    chain.check()?;
    let mut state = chain.initial_state - 1;
    let (mut times, mut states) = (vec![0.0], vec![state]);
    let mut t = 0.0;
    loop {
        let rate = -chain.generator[state][state];
        if rate <= 0.0 {
            break;
        }
        t += Exp::new(rate).expect("positive rate").sample(rng);
        if t >= horizon {
            break;
        }
        let mut u = rng.random::<f64>() * rate;
        let row = &chain.generator[state];
        // Last state with a positive rate absorbs rounding in `u`.
        let mut next = (0..row.len())
            .rev()
            .find(|&j| j != state && row[j] > 0.0)
            .expect("a positive rate");
        for (j, &g) in row.iter().enumerate() {
            if j == state || g <= 0.0 {
                continue;
            }
            if u < g {
                next = j;
                break;
            }
            u -= g;
        }
        state = next;
        times.push(t);
        states.push(state);
    }
    RegimePath::new(times, states, chain.alpha.clone(), chain.sigma.clone())
}

/// Number of jumps in a regime path.
pub fn jump_count(path: &RegimePath) -> usize {
    path.times().len() - 1
}
