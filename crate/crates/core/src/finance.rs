//! Applications: an exact step of a stochastic-volatility model whose
//! variance is a GBESQ, zero-coupon bonds under a regime-switching
//! square-root short rate, and default-time survival curves.

use serde::{Deserialize, Serialize};

use crate::adapters::{adapt_extended_cir, RegimePath};
use crate::error::{param, Result};
use crate::samplers::{
    par_draws, sample_default_time, sample_skeleton, step_with_integral, RngStream, SamplerOptions,
    SkeletonIntegrals,
};
use crate::time::{pushforward_functional, PiecewiseFn, RadonMeasure};
use crate::transforms::{functional_laplace, GbesqSpec};

/// `dS/S = μ_t dt + √V (ρ dW¹ + √(1−ρ²) dW²)` with `V` the driftless GBESQ
/// `dV = δ dt + 2√V dW¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvModel {
    mu: PiecewiseFn,
    rho: f64,
    vol: GbesqSpec,
    s0: f64,
}

impl SvModel {
    pub fn new(mu: PiecewiseFn, rho: f64, vol: GbesqSpec, s0: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&rho) {
            return Err(param("rho", format!("{rho} is outside [-1, 1]")));
        }
        if !(s0 > 0.0 && s0.is_finite()) {
            return Err(param("s0", "spot must be positive"));
        }
        vol.require_driftless()?;
        Ok(Self { mu, rho, vol, s0 })
    }

    pub fn mu(&self) -> &PiecewiseFn {
        &self.mu
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn vol(&self) -> &GbesqSpec {
        &self.vol
    }

    pub fn s0(&self) -> f64 {
        self.s0
    }
}

/// State after one exact step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SvState {
    pub s: f64,
    pub v: f64,
    /// `∫₀ᵗ V ds`.
    pub integrated_variance: f64,
}

/// Exact draw of `(S_t, V_t, ∫₀ᵗV)`.
///
/// Given the variance path, `log(S_t/S_0)` is Gaussian with mean
/// `∫μ − I/2 + ρ·½(V_t − V_0 − ∫δ)` and variance `(1−ρ²)·I`.
pub fn sv_exact_step(
    model: &SvModel,
    t: f64,
    rng: &mut RngStream,
    opts: &SamplerOptions,
) -> Result<SvState> {
    if !(t > 0.0) {
        return Err(param("t", "must be positive"));
    }
    let v0 = model.vol.x0();
    let (v, i) = step_with_integral(&model.vol, 0.0, v0, t, None, rng, opts)?;
    let stoch = 0.5 * (v - v0 - model.vol.delta().integral(0.0, t));
    let mean = model.mu.integral(0.0, t) - 0.5 * i + model.rho * stoch;
    let sd = ((1.0 - model.rho * model.rho) * i).max(0.0).sqrt();
    let z: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng);
    Ok(SvState {
        s: model.s0 * (mean + sd * z).exp(),
        v,
        integrated_variance: i,
    })
}

/// Pricing route for a zero-coupon bond.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BondRoute {
    Ode,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BondQuote {
    pub price: f64,
    /// Zero on the deterministic route.
    pub stderr: f64,
    pub route: BondRoute,
}

/// Size and seed of a Monte Carlo run built on the exact samplers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub n_paths: usize,
    pub seed: u64,
    pub sampler: SamplerOptions,
}

impl McConfig {
    pub fn new(n_paths: usize, seed: u64) -> Self {
        Self {
            n_paths,
            seed,
            sampler: SamplerOptions::default(),
        }
    }
}

/// `E[exp(−∫₀ᵀ r)]` for the regime-switching square-root short rate of
/// [`adapt_extended_cir`], conditionally on the regime path.
pub fn price_bond(
    regimes: &RegimePath,
    r0: f64,
    horizon: f64,
    route: BondRoute,
    mc: &McConfig,
) -> Result<BondQuote> {
    let adapter = adapt_extended_cir(regimes, r0, horizon)?;
    let mu = pushforward_functional(&PiecewiseFn::constant(1.0), &adapter.time_change, horizon)?;
    match route {
        BondRoute::Ode => Ok(BondQuote {
            price: functional_laplace(&adapter.gbesq, &mu)?,
            stderr: 0.0,
            route,
        }),
        BondRoute::MonteCarlo => {
            if mc.n_paths < 2 {
                return Err(param("n_paths", "need at least two paths"));
            }
            let mut times = adapter.time_change.image_breakpoints(horizon);
            times.push(mu.horizon());
            let draws = par_draws(mc.n_paths, mc.seed, |rng| -> Result<f64> {
                let path = sample_skeleton(
                    &adapter.gbesq,
                    &times,
                    SkeletonIntegrals::Measure(&mu),
                    rng,
                    &mc.sampler,
                )?;
                let total: f64 = path.iter().filter_map(|p| p.integral).sum();
                Ok((-total).exp())
            });
            let draws = draws.into_iter().collect::<Result<Vec<f64>>>()?;
            let e = crate::oracle::Estimate::from_samples(&draws);
            Ok(BondQuote {
                price: e.value,
                stderr: e.stderr,
                route,
            })
        }
    }
}

/// Survival probabilities on a time grid, by transform and by simulation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurvivalCurve {
    pub times: Vec<f64>,
    pub analytic: Vec<f64>,
    pub empirical: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Simulated default times, `None` when beyond the last grid time.
    #[serde(skip)]
    pub defaults: Vec<Option<f64>>,
}

/// `P[τ > t]` for the Cox default time driven by `intensity`, on `grid`
/// (positive, increasing). The simulated route samples the integrated
/// intensity exactly on a mesh of width `h`.
pub fn default_curve(
    intensity: &GbesqSpec,
    grid: &[f64],
    h: f64,
    mc: &McConfig,
) -> Result<SurvivalCurve> {
    if grid.is_empty() || grid[0] <= 0.0 || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(param("grid", "must be positive and strictly increasing"));
    }
    let horizon = *grid.last().unwrap();
    let analytic = analytic_survival(intensity, grid)?;
    let defaults = par_draws(mc.n_paths, mc.seed, |rng| {
        sample_default_time(intensity, horizon, h, rng, &mc.sampler)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let n = defaults.len() as f64;
    let mut empirical = Vec::with_capacity(grid.len());
    let mut stderr = Vec::with_capacity(grid.len());
    for &t in grid {
        let p = defaults
            .iter()
            .filter(|d| d.is_none_or(|tau| tau > t))
            .count() as f64
            / n;
        empirical.push(p);
        stderr.push((p * (1.0 - p) / n).sqrt());
    }
    Ok(SurvivalCurve {
        times: grid.to_vec(),
        analytic,
        empirical,
        stderr,
        defaults,
    })
}

/// `P[τ > t] = E[exp(−∫₀ᵗ λ)]` for each `t`.
pub fn analytic_survival(intensity: &GbesqSpec, times: &[f64]) -> Result<Vec<f64>> {
    times
        .iter()
        .map(|&t| functional_laplace(intensity, &RadonMeasure::lebesgue(1.0, t)?))
        .collect()
}
