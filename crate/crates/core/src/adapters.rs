//! Named short-rate and volatility models written as a time-changed,
//! space-transformed GBESQ.
//!
//! A [`ModelAdapter`] says that the model variable is
//! `V_t = space_map(t, X_{f(t)})` where `X` follows `gbesq` and `f` is the
//! time change. Regime paths are taken as given; simulating them is the
//! caller's business.

use serde::{Deserialize, Serialize};

use crate::error::{param, GbesqError, Result};
use crate::samplers::{sample_endpoint, RngStream, SamplerOptions};
use crate::time::{PiecewiseFn, TimeChange};
use crate::transforms::GbesqSpec;

/// `V = e^{growth·t} · X^{power}`, or the identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpaceMap {
    Identity,
    ExpPower { growth: f64, power: f64 },
}

impl SpaceMap {
    pub fn forward(&self, t: f64, x: f64) -> f64 {
        match *self {
            SpaceMap::Identity => x,
            SpaceMap::ExpPower { growth, power } => (growth * t).exp() * x.powf(power),
        }
    }

    pub fn inverse(&self, t: f64, v: f64) -> f64 {
        match *self {
            SpaceMap::Identity => v,
            SpaceMap::ExpPower { growth, power } => ((-growth * t).exp() * v).powf(1.0 / power),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelAdapter {
    pub gbesq: GbesqSpec,
    pub time_change: TimeChange,
    pub space_map: SpaceMap,
}

impl ModelAdapter {
    /// GBESQ clock time corresponding to model time `t`.
    pub fn gbesq_time(&self, t: f64) -> f64 {
        self.time_change.eval(t)
    }

    pub fn to_model(&self, t: f64, x: f64) -> f64 {
        self.space_map.forward(t, x)
    }

    pub fn to_gbesq(&self, t: f64, v: f64) -> f64 {
        self.space_map.inverse(t, v)
    }

    /// Exact draw of the model variable at time `t`.
    pub fn sample(&self, t: f64, rng: &mut RngStream, opts: &SamplerOptions) -> Result<f64> {
        let x = sample_endpoint(&self.gbesq, self.gbesq_time(t), rng, opts)?;
        Ok(self.to_model(t, x))
    }
}

/// Ornstein–Uhlenbeck `dV = μV dt + σ dW` from `V_0 = x`; the adapter
/// carries `|V|`.
pub fn adapt_ou(mu: f64, sigma: f64, x: f64) -> Result<ModelAdapter> {
    positive("sigma", sigma)?;
    finite("mu", mu)?;
    Ok(ModelAdapter {
        gbesq: GbesqSpec::constant(1.0, x * x)?,
        time_change: TimeChange::exponential(sigma * sigma, -2.0 * mu)?,
        space_map: SpaceMap::ExpPower {
            growth: mu,
            power: 0.5,
        },
    })
}

/// Square-root model `dV = (α − βV) dt + σ√V dW` from `V_0 = x`.
pub fn adapt_cir(alpha: f64, beta: f64, sigma: f64, x: f64) -> Result<ModelAdapter> {
    nonnegative("alpha", alpha)?;
    positive("sigma", sigma)?;
    finite("beta", beta)?;
    Ok(ModelAdapter {
        gbesq: GbesqSpec::constant(4.0 * alpha / (sigma * sigma), x)?,
        time_change: TimeChange::exponential(sigma * sigma / 4.0, beta)?,
        space_map: SpaceMap::ExpPower {
            growth: -beta,
            power: 1.0,
        },
    })
}

/// Constant elasticity of variance `dV = μV dt + σV^ρ dW` from `V_0 = x`.
///
/// The GBESQ dimension is `(2ρ−1)/(ρ−1)`, which is nonnegative only for
/// `ρ ≤ 1/2`. Larger elasticities are rejected.
pub fn adapt_cev(mu: f64, sigma: f64, rho: f64, x: f64) -> Result<ModelAdapter> {
    positive("sigma", sigma)?;
    finite("mu", mu)?;
    nonnegative("x", x)?;
    if !(0.0..1.0).contains(&rho) {
        return Err(param("rho", format!("{rho} is outside [0, 1)")));
    }
    let delta = (2.0 * rho - 1.0) / (rho - 1.0);
    if delta < 0.0 {
        return Err(param(
            "rho",
            format!("{rho} gives the negative dimension {delta}; need rho <= 1/2"),
        ));
    }
    let q = 1.0 - rho;
    Ok(ModelAdapter {
        gbesq: GbesqSpec::constant(delta, x.powf(2.0 * q))?,
        time_change: TimeChange::exponential(q * q * sigma * sigma, -2.0 * q * mu)?,
        space_map: SpaceMap::ExpPower {
            growth: mu,
            power: 1.0 / (2.0 * q),
        },
    })
}

/// A realized path of a finite-state regime chain with per-state
/// square-root parameters. States are zero-based indices into `alpha` and
/// `sigma`; `states[i]` is in force on `[times[i], times[i+1])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimePath {
    times: Vec<f64>,
    states: Vec<usize>,
    alpha: Vec<f64>,
    sigma: Vec<f64>,
}

impl RegimePath {
    /// Validates the path and merges zero-length regimes and repeated states.
    pub fn new(
        times: Vec<f64>,
        states: Vec<usize>,
        alpha: Vec<f64>,
        sigma: Vec<f64>,
    ) -> Result<Self> {
        if times.is_empty() || times.len() != states.len() || times[0] != 0.0 {
            return Err(param(
                "times",
                "need one state per regime, starting at time 0",
            ));
        }
        if alpha.len() != sigma.len() || alpha.is_empty() {
            return Err(param("alpha", "alpha and sigma need one entry per state"));
        }
        if let Some(a) = alpha.iter().find(|a| !(**a >= 0.0 && a.is_finite())) {
            return Err(param("alpha", format!("{a} is not a nonnegative number")));
        }
        if let Some(s) = sigma.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(param("sigma", format!("{s} is not a positive number")));
        }
        if states.iter().any(|&k| k >= alpha.len()) {
            return Err(param("states", "state index out of range"));
        }
        if times.windows(2).any(|w| !(w[1] >= w[0])) {
            return Err(param("times", "jump times must be nondecreasing"));
        }
        let (mut t2, mut s2): (Vec<f64>, Vec<usize>) = (Vec::new(), Vec::new());
        for (i, (&t, &k)) in times.iter().zip(&states).enumerate() {
            if times.get(i + 1) == Some(&t) {
                continue;
            }
            if s2.last() == Some(&k) {
                continue;
            }
            t2.push(t);
            s2.push(k);
        }
        // A zero-length first regime leaves the next one starting at zero.
        t2[0] = 0.0;
        Ok(Self {
            times: t2,
            states: s2,
            alpha,
            sigma,
        })
    }

    /// A single regime for all time.
    pub fn constant(alpha: f64, sigma: f64) -> Result<Self> {
        Self::new(vec![0.0], vec![0], vec![alpha], vec![sigma])
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    pub fn alpha(&self) -> PiecewiseFn {
        self.per_regime(|k| self.alpha[k])
    }

    pub fn sigma(&self) -> PiecewiseFn {
        self.per_regime(|k| self.sigma[k])
    }

    pub fn state_at(&self, t: f64) -> usize {
        let i = self.times.partition_point(|&s| s <= t).max(1) - 1;
        self.states[i]
    }

    fn per_regime(&self, f: impl Fn(usize) -> f64) -> PiecewiseFn {
        let values = self.states.iter().map(|&k| f(k)).collect();
        PiecewiseFn::step(self.times.clone(), values).expect("validated regime path")
    }
}

/// Regime-switching square-root short rate with no mean reversion,
/// `dr = α(S_t) dt + σ(S_t)√r dW`, on `[0, horizon]`.
///
/// The clock is `f(t) = ¼∫₀ᵗσ²`, and `r_t = X_{f(t)}` where `X` has the
/// piecewise-constant dimension `4α/σ²` on the image grid.
pub fn adapt_extended_cir(regimes: &RegimePath, r0: f64, horizon: f64) -> Result<ModelAdapter> {
    nonnegative("r0", r0)?;
    positive("horizon", horizon)?;
    let slopes = PiecewiseFn::step(
        regimes.times.clone(),
        regimes
            .states
            .iter()
            .map(|&k| regimes.sigma[k].powi(2) / 4.0)
            .collect(),
    )?;
    let time_change = TimeChange::piecewise_linear(slopes)?;
    let knots = regimes.times.iter().map(|&t| time_change.eval(t)).collect();
    let dims = regimes
        .states
        .iter()
        .map(|&k| 4.0 * regimes.alpha[k] / regimes.sigma[k].powi(2))
        .collect();
    let delta = PiecewiseFn::step(knots, dims)?;
    Ok(ModelAdapter {
        gbesq: GbesqSpec::driftless(delta, r0)?,
        time_change,
        space_map: SpaceMap::Identity,
    })
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(param(name, format!("{v} must be positive")))
    }
}

fn nonnegative(name: &'static str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(param(name, format!("{v} must be nonnegative")))
    }
}

fn finite(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(GbesqError::InvalidParameter {
            name,
            reason: "must be finite".into(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ou_small_rate_limit() {
        let a = adapt_ou(1e-12, 0.3, 1.0).unwrap();
        assert!((a.time_change.derivative(0.0) - 0.09).abs() < 1e-15);
        assert!((a.gbesq_time(2.0) - 0.18).abs() < 1e-12);
        assert_eq!(adapt_ou(0.5, 0.3, 0.0).unwrap().gbesq.x0(), 0.0);
    }

    #[test]
    fn cir_unit_dimension() {
        let a = adapt_cir(0.01, 0.7, 0.2, 0.05).unwrap();
        assert!((a.gbesq.delta().eval(0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cev_half_is_dimension_zero() {
        let a = adapt_cev(0.1, 0.4, 0.5, 2.0).unwrap();
        assert_eq!(a.gbesq.delta().eval(0.0), 0.0);
        assert!((a.gbesq.x0() - 2.0).abs() < 1e-15);
        assert!(adapt_cev(0.1, 0.4, 0.75, 2.0).is_err());
        assert!(adapt_cev(0.1, 0.4, 1.0, 2.0).is_err());
    }

    #[test]
    fn space_maps_round_trip() {
        let maps = [
            adapt_ou(-0.4, 0.3, 1.0).unwrap().space_map,
            adapt_cir(0.02, 1.5, 0.3, 0.1).unwrap().space_map,
            adapt_cev(0.2, 0.3, 0.25, 1.0).unwrap().space_map,
            SpaceMap::Identity,
        ];
        for m in maps {
            for &t in &[0.0, 0.5, 3.0] {
                for &v in &[1e-6, 0.3, 1.0, 7.5, 1e3] {
                    let back = m.forward(t, m.inverse(t, v));
                    assert!((back - v).abs() <= 1e-12 * v, "{m:?} {t} {v} {back}");
                }
            }
        }
    }

    #[test]
    fn single_regime_is_plain_cir() {
        let r = RegimePath::constant(0.04, 0.2).unwrap();
        let a = adapt_extended_cir(&r, 0.03, 2.0).unwrap();
        assert!((a.gbesq.delta().eval(0.1) - 4.0).abs() < 1e-12);
        assert!((a.gbesq_time(2.0) - 0.02).abs() < 1e-15);
    }

    #[test]
    fn two_regimes_break_on_the_image_grid() {
        let r =
            RegimePath::new(vec![0.0, 1.0], vec![0, 1], vec![0.04, 0.08], vec![0.2, 0.4]).unwrap();
        let a = adapt_extended_cir(&r, 0.03, 2.0).unwrap();
        let k = a.gbesq.delta().knots();
        assert_eq!(k.len(), 2);
        assert!((k[1] - 0.01).abs() < 1e-16);
        let v = a.gbesq.delta().values();
        assert!(
            (v[0] - 4.0).abs() < 1e-14 && (v[1] - 2.0).abs() < 1e-14,
            "{v:?}"
        );
        assert!((a.gbesq_time(2.0) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn degenerate_regimes_merged() {
        let r = RegimePath::new(
            vec![0.0, 0.0, 0.5, 1.0],
            vec![1, 0, 0, 1],
            vec![0.1, 0.2],
            vec![0.3, 0.3],
        )
        .unwrap();
        assert_eq!(r.times(), &[0.0, 1.0]);
        assert_eq!(r.states(), &[0, 1]);
        assert_eq!(r.state_at(0.99), 0);
        assert_eq!(r.state_at(1.0), 1);
        assert!(RegimePath::new(vec![0.0], vec![0], vec![0.1], vec![0.0]).is_err());
    }
}
