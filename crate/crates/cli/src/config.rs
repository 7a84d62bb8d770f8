//! JSON scenario schema. One file describes one task.
//!
//! Every optional field has its default filled in during parsing, so the
//! resolved config echoed into the manifest is the full set of inputs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use gbesq::adapters::{
    adapt_cev, adapt_cir, adapt_extended_cir, adapt_ou, ModelAdapter, RegimePath,
};
use gbesq::finance::BondRoute;
use gbesq::samplers::{RngStream, SamplerOptions};
use gbesq::time::{PiecewiseFn, RadonMeasure};
use gbesq::transforms::GbesqSpec;

use crate::chain::{simulate_regime_path, MarkovChainSpec};
use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub model: Option<ModelConfig>,
    pub task: TaskConfig,
    #[serde(default)]
    pub numeric: NumericConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    /// A GBESQ given directly.
    Gbesq {
        delta: PiecewiseFn,
        #[serde(default)]
        beta: Option<PiecewiseFn>,
        x0: f64,
    },
    /// `dV = μV dt + σ dW`.
    Ou { mu: f64, sigma: f64, x0: f64 },
    /// `dV = (α − βV) dt + σ√V dW`.
    Cir {
        alpha: f64,
        beta: f64,
        sigma: f64,
        x0: f64,
    },
    /// `dV = μV dt + σV^ρ dW`, `ρ ≤ 1/2`.
    Cev {
        mu: f64,
        sigma: f64,
        rho: f64,
        x0: f64,
    },
    /// Square-root short rate whose `(α, σ)` follow a regime path.
    ExtendedCir { regimes: RegimeSource, r0: f64 },
}

/// A fixed regime path, or a chain from which paths are drawn. States are
/// numbered from 1 in both forms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegimeSource {
    Path {
        times: Vec<f64>,
        states: Vec<usize>,
        alpha: Vec<f64>,
        sigma: Vec<f64>,
    },
    Chain(MarkovChainSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TaskConfig {
    /// `E[exp(−λV_t)]` on a grid of `λ`.
    Laplace { t: f64, lambda: Vec<f64> },
    /// Exact draws of the model variable at `t`.
    SampleEndpoint { t: f64 },
    /// Draws of `∫X dμ` for the GBESQ bridge from `x` to `y` over `[0, t]`.
    SampleBridgeIntegral {
        x: f64,
        y: f64,
        t: f64,
        mu: RadonMeasure,
    },
    /// Zero-coupon bond prices at each maturity.
    PriceBond {
        maturities: Vec<f64>,
        #[serde(default = "both_routes")]
        routes: Vec<BondRoute>,
    },
    /// Paths of the stochastic-volatility model on `n_steps` exact steps up
    /// to `t`; the model block is the variance.
    SimSv {
        mu: PiecewiseFn,
        rho: f64,
        s0: f64,
        t: f64,
    },
    /// Survival curve of the Cox default time; the model block is the
    /// intensity.
    SimDefault { grid: Vec<f64>, h: f64 },
    /// The acceptance criteria, all of them when `criteria` is empty.
    Validate {
        #[serde(default)]
        criteria: Vec<u8>,
    },
}

fn both_routes() -> Vec<BondRoute> {
    vec![BondRoute::Ode, BondRoute::MonteCarlo]
}

impl TaskConfig {
    /// Subcommand name.
    pub fn name(&self) -> &'static str {
        match self {
            TaskConfig::Laplace { .. } => "laplace",
            TaskConfig::SampleEndpoint { .. } => "sample-endpoint",
            TaskConfig::SampleBridgeIntegral { .. } => "sample-bridge-integral",
            TaskConfig::PriceBond { .. } => "price-bond",
            TaskConfig::SimSv { .. } => "sim-sv",
            TaskConfig::SimDefault { .. } => "sim-default",
            TaskConfig::Validate { .. } => "validate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericConfig {
    pub seed: u64,
    /// Monte Carlo paths (or draws).
    pub n_paths: usize,
    /// Regime paths drawn for the outer average when the model has a chain.
    pub n_chains: usize,
    /// Exact steps per simulated path.
    pub n_steps: usize,
    /// Largest mixture truncation index.
    pub n_max: usize,
    /// Dominating tail mass allowed beyond the mixture truncation.
    pub mixture_tol: f64,
    /// Tolerance of the quantile search in the samplers.
    pub quantile_tol: f64,
}

impl Default for NumericConfig {
    fn default() -> Self {
        let s = SamplerOptions::default();
        Self {
            seed: 1,
            n_paths: 10_000,
            n_chains: 100,
            n_steps: 1,
            n_max: s.n_max,
            mixture_tol: s.mixture_tol,
            quantile_tol: s.quantile.tol,
        }
    }
}

impl NumericConfig {
    pub fn sampler(&self) -> SamplerOptions {
        let mut s = SamplerOptions {
            n_max: self.n_max,
            mixture_tol: self.mixture_tol,
            ..SamplerOptions::default()
        };
        s.quantile.tol = self.quantile_tol;
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Defaults to `<task>.csv` in the working directory.
    pub csv: Option<PathBuf>,
    /// Significant digits of every number written.
    pub precision: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            csv: None,
            precision: 17,
        }
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let mut cfg: Self =
            serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.check()?;
        cfg.output
            .csv
            .get_or_insert_with(|| PathBuf::from(format!("{}.csv", cfg.task.name())));
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Checks that do not need any computation: versions, sizes and which
    /// model kinds a task accepts. Model parameters are validated by the
    /// library constructors in [`ScenarioConfig::model_check`].
    pub fn check(&self) -> CliResult<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let n = &self.numeric;
        if n.n_paths == 0 || n.n_chains == 0 || n.n_steps == 0 || n.n_max == 0 {
            return Err(config("numeric counts must be positive"));
        }
        if !(n.mixture_tol > 0.0 && n.quantile_tol > 0.0) {
            return Err(config("numeric tolerances must be positive"));
        }
        if !(1..=17).contains(&self.output.precision) {
            return Err(config("output.precision must be between 1 and 17"));
        }
        let model = self.model.as_ref();
        let kind = model.map(ModelConfig::kind);
        let need = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(config(format!("task {} needs {what}", self.task.name())))
            }
        };
        match &self.task {
            TaskConfig::Validate { criteria } => {
                need(model.is_none(), "no model block")?;
                if let Some(c) = criteria
                    .iter()
                    .find(|c| !gbesq::validation::ALL.contains(c))
                {
                    return Err(config(format!("unknown criterion {c}")));
                }
            }
            TaskConfig::Laplace { t, lambda } => {
                need(
                    matches!(kind, Some("gbesq" | "cir" | "extended_cir")),
                    "a gbesq, cir or extended_cir model",
                )?;
                positive("t", *t)?;
                if lambda.is_empty() || lambda.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
                    return Err(config(
                        "lambda must be a nonempty list of nonnegative numbers",
                    ));
                }
            }
            TaskConfig::SampleEndpoint { t } => {
                need(model.is_some(), "a model block")?;
                positive("t", *t)?;
            }
            TaskConfig::SampleBridgeIntegral { x, y, t, .. } => {
                need(kind == Some("gbesq"), "a gbesq model")?;
                positive("t", *t)?;
                if !(*x >= 0.0 && *y >= 0.0) {
                    return Err(config("bridge endpoints must be nonnegative"));
                }
            }
            TaskConfig::PriceBond { maturities, routes } => {
                need(kind == Some("extended_cir"), "an extended_cir model")?;
                increasing("maturities", maturities)?;
                if routes.is_empty() {
                    return Err(config("routes must not be empty"));
                }
            }
            TaskConfig::SimSv { rho, s0, t, .. } => {
                need(kind == Some("gbesq"), "a gbesq model for the variance")?;
                positive("t", *t)?;
                positive("s0", *s0)?;
                if !(-1.0..=1.0).contains(rho) {
                    return Err(config("rho must lie in [-1, 1]"));
                }
            }
            TaskConfig::SimDefault { grid, h } => {
                need(kind == Some("gbesq"), "a gbesq model for the intensity")?;
                increasing("grid", grid)?;
                positive("h", *h)?;
            }
        }
        self.model_check()
    }

    /// Builds the model once so that bad parameters are reported as config
    /// errors before any work starts.
    fn model_check(&self) -> CliResult<()> {
        let Some(model) = &self.model else {
            return Ok(());
        };
        let mut rng = RngStream::new(self.numeric.seed, 0);
        let horizon = self.horizon();
        model
            .adapter(horizon, &mut rng)
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }

    /// Longest model time the task looks at.
    pub fn horizon(&self) -> f64 {
        match &self.task {
            TaskConfig::Laplace { t, .. }
            | TaskConfig::SampleEndpoint { t }
            | TaskConfig::SampleBridgeIntegral { t, .. }
            | TaskConfig::SimSv { t, .. } => *t,
            TaskConfig::PriceBond { maturities, .. } => *maturities.last().unwrap_or(&1.0),
            TaskConfig::SimDefault { grid, .. } => *grid.last().unwrap_or(&1.0),
            TaskConfig::Validate { .. } => 1.0,
        }
    }
}

impl ModelConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelConfig::Gbesq { .. } => "gbesq",
            ModelConfig::Ou { .. } => "ou",
            ModelConfig::Cir { .. } => "cir",
            ModelConfig::Cev { .. } => "cev",
            ModelConfig::ExtendedCir { .. } => "extended_cir",
        }
    }

    /// True when each evaluation needs its own regime path.
    pub fn has_chain(&self) -> bool {
        matches!(
            self,
            ModelConfig::ExtendedCir {
                regimes: RegimeSource::Chain(_),
                ..
            }
        )
    }

    /// The GBESQ given directly.
    pub fn spec(&self) -> gbesq::Result<GbesqSpec> {
        match self {
            ModelConfig::Gbesq { delta, beta, x0 } => {
                GbesqSpec::new(delta.clone(), beta.clone(), *x0)
            }
            _ => unreachable!("checked at parse time"),
        }
    }

    /// The model as a time-changed GBESQ. A chain draws its regime path on
    /// `[0, horizon]` from `rng`; every other model ignores `rng`.
    pub fn adapter(&self, horizon: f64, rng: &mut RngStream) -> gbesq::Result<ModelAdapter> {
        match self {
            ModelConfig::Gbesq { .. } => Ok(ModelAdapter {
                gbesq: self.spec()?,
                time_change: gbesq::time::TimeChange::identity(),
                space_map: gbesq::adapters::SpaceMap::Identity,
            }),
            ModelConfig::Ou { mu, sigma, x0 } => adapt_ou(*mu, *sigma, *x0),
            ModelConfig::Cir {
                alpha,
                beta,
                sigma,
                x0,
            } => adapt_cir(*alpha, *beta, *sigma, *x0),
            ModelConfig::Cev { mu, sigma, rho, x0 } => adapt_cev(*mu, *sigma, *rho, *x0),
            ModelConfig::ExtendedCir { regimes, r0 } => {
                adapt_extended_cir(&self.regime_path(regimes, horizon, rng)?, *r0, horizon)
            }
        }
    }

    /// Regime path of an extended CIR model.
    pub fn regimes(&self, horizon: f64, rng: &mut RngStream) -> gbesq::Result<(RegimePath, f64)> {
        match self {
            ModelConfig::ExtendedCir { regimes, r0 } => {
                Ok((self.regime_path(regimes, horizon, rng)?, *r0))
            }
            _ => unreachable!("checked at parse time"),
        }
    }

    fn regime_path(
        &self,
        source: &RegimeSource,
        horizon: f64,
        rng: &mut RngStream,
    ) -> gbesq::Result<RegimePath> {
        match source {
            RegimeSource::Path {
                times,
                states,
                alpha,
                sigma,
            } => {
                if states.contains(&0) {
                    return Err(gbesq::GbesqError::InvalidParameter {
                        name: "states",
                        reason: "states are numbered from 1".into(),
                    });
                }
                RegimePath::new(
                    times.clone(),
                    states.iter().map(|k| k - 1).collect(),
                    alpha.clone(),
                    sigma.clone(),
                )
            }
            RegimeSource::Chain(chain) => {
                chain.check()?;
                simulate_regime_path(chain, horizon, rng)
            }
        }
    }
}

fn config(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn positive(name: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config(format!("{name} must be positive, got {v}")))
    }
}

fn increasing(name: &str, v: &[f64]) -> CliResult<()> {
    if v.is_empty()
        || !(v[0] > 0.0)
        || v.windows(2).any(|w| !(w[1] > w[0]))
        || !v.iter().all(|x| x.is_finite())
    {
        Err(config(format!(
            "{name} must be a nonempty, positive, strictly increasing list"
        )))
    } else {
        Ok(())
    }
}
