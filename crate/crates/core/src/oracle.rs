//! Brute-force Euler–Maruyama reference simulation.
//!
//! This is the independent check for the exact transforms and samplers, never
//! a production path. Square-root diffusions use full truncation: the drift and
//! the diffusion coefficient see `max(X, 0)`, the raw state may dip below zero,
//! and every state handed back to the caller is the truncated one.
//!
//! Each path draws from its own substream of the seed, so results depend only
//! on `(seed, n_paths, n_steps)` and never on the number of worker threads.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{param, GbesqError, Result};
use crate::samplers::{par_draws, RngStream};
use crate::time::{PiecewiseFn, RadonMeasure};
use crate::transforms::GbesqSpec;

/// Discretization and sample size of an Euler run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EulerConfig {
    pub n_steps: usize,
    pub n_paths: usize,
    pub seed: u64,
}

impl EulerConfig {
    pub fn new(n_steps: usize, n_paths: usize, seed: u64) -> Result<Self> {
        if n_steps == 0 {
            return Err(param("n_steps", "must be at least 1"));
        }
        if n_paths < 2 {
            return Err(param("n_paths", "need at least two paths for an error bar"));
        }
        Ok(Self {
            n_steps,
            n_paths,
            seed,
        })
    }
}

/// A Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let ss = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
        let var = ss / (n - 1.0).max(1.0);
        Self {
            value: mean,
            stderr: (var / n).sqrt(),
        }
    }

    /// Distance to `target` in units of the standard error. Exact agreement
    /// with zero error counts as zero.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = (self.value - target).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.stderr
        }
    }
}

/// What to average over the simulated paths.
#[derive(Debug, Clone)]
pub enum Payoff {
    /// `e^{−λ X_t}`.
    Terminal { lambda: f64 },
    /// `e^{−∫X dμ}` over `[0, t]`: trapezoid on the density, atoms picked up
    /// by linear interpolation inside their step.
    Functional { mu: RadonMeasure },
    /// `E[e^{−∫X dμ} | X_t = y]` estimated with a Gaussian kernel of width
    /// `eps` in the terminal value.
    KernelBridge { mu: RadonMeasure, y: f64, eps: f64 },
}

/// Per-step weights of `∫X dμ` on a uniform grid.
struct Quadrature {
    /// Coefficient of `X_k` in the integral.
    node: Vec<f64>,
}

impl Quadrature {
    fn new(mu: &RadonMeasure, t: f64, n: usize) -> Self {
        let dt = t / n as f64;
        let mut node = vec![0.0; n + 1];
        let end = mu.horizon().min(t);
        for k in 0..n {
            let a = k as f64 * dt;
            if a >= end {
                break;
            }
            let b = ((k + 1) as f64 * dt).min(end);
            let w = mu.density().integral(a, b);
            node[k] += 0.5 * w;
            node[k + 1] += 0.5 * w;
        }
        for &(at, w) in mu.atoms() {
            if at > t {
                continue;
            }
            let pos = at / dt;
            let k = (pos.floor() as usize).min(n - 1);
            let theta = pos - k as f64;
            node[k] += (1.0 - theta) * w;
            node[k + 1] += theta * w;
        }
        Self { node }
    }

    fn apply(&self, path: &[f64]) -> f64 {
        self.node.iter().zip(path).map(|(w, x)| w * x).sum()
    }
}

/// Step-averaged coefficients of the GBESQ on the grid.
struct Grid {
    dt: f64,
    delta: Vec<f64>,
    beta: Vec<f64>,
}

impl Grid {
    fn new(spec: &GbesqSpec, t: f64, n: usize) -> Self {
        let dt = t / n as f64;
        let avg = |f: &PiecewiseFn, k: usize| f.integral(k as f64 * dt, (k + 1) as f64 * dt) / dt;
        Self {
            dt,
            delta: (0..n).map(|k| avg(spec.delta(), k)).collect(),
            beta: (0..n)
                .map(|k| spec.beta().map_or(0.0, |b| avg(b, k)))
                .collect(),
        }
    }

    /// Fills `out` (length `n + 1`) with the truncated states of one path.
    fn run(&self, x0: f64, rng: &mut RngStream, out: &mut [f64]) {
        let sq = self.dt.sqrt();
        let mut x = x0;
        out[0] = x0.max(0.0);
        for k in 0..self.delta.len() {
            let xp = x.max(0.0);
            let z: f64 = StandardNormal.sample(rng);
            x += (2.0 * self.beta[k] * xp + self.delta[k]) * self.dt + 2.0 * xp.sqrt() * sq * z;
            out[k + 1] = x.max(0.0);
        }
    }
}

/// Runs `f` once per path on its own substream, in parallel, and returns the
/// results in path order.
pub fn per_path<T, F>(cfg: &EulerConfig, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut RngStream) -> T + Sync,
{
    par_draws(cfg.n_paths, cfg.seed, f)
}

/// One truncated Euler path of `spec` on `[0, t]` (`n_steps + 1` states).
pub fn simulate_path(spec: &GbesqSpec, t: f64, n_steps: usize, rng: &mut RngStream) -> Vec<f64> {
    let grid = Grid::new(spec, t, n_steps);
    let mut out = vec![0.0; n_steps + 1];
    grid.run(spec.x0(), rng, &mut out);
    out
}

/// Euler samples of `X_t`.
pub fn euler_terminal(spec: &GbesqSpec, t: f64, cfg: &EulerConfig) -> Result<Vec<f64>> {
    check_t(t)?;
    let grid = Grid::new(spec, t, cfg.n_steps);
    Ok(per_path(cfg, |rng| {
        let mut buf = vec![0.0; cfg.n_steps + 1];
        grid.run(spec.x0(), rng, &mut buf);
        buf[cfg.n_steps]
    }))
}

pub fn euler_estimate(
    spec: &GbesqSpec,
    payoff: &Payoff,
    t: f64,
    cfg: &EulerConfig,
) -> Result<Estimate> {
    Ok(euler_estimates(spec, std::slice::from_ref(payoff), t, cfg)?[0])
}

/// Several payoffs estimated on one common set of paths.
pub fn euler_estimates(
    spec: &GbesqSpec,
    payoffs: &[Payoff],
    t: f64,
    cfg: &EulerConfig,
) -> Result<Vec<Estimate>> {
    check_t(t)?;
    let n = cfg.n_steps;
    let mut quads = Vec::with_capacity(payoffs.len());
    for p in payoffs {
        quads.push(match p {
            Payoff::Terminal { lambda } => {
                if !(*lambda >= 0.0) {
                    return Err(param("lambda", "must be nonnegative"));
                }
                None
            }
            Payoff::Functional { mu } => Some(Quadrature::new(mu, t, n)),
            Payoff::KernelBridge { mu, eps, .. } => {
                if !(*eps > 0.0) {
                    return Err(param("eps", "kernel width must be positive"));
                }
                Some(Quadrature::new(mu, t, n))
            }
        });
    }
    let grid = Grid::new(spec, t, n);
    // Each path yields (kernel weight, value) per payoff; weight 1 when the
    // payoff is unconditioned.
    let rows: Vec<Vec<(f64, f64)>> = per_path(cfg, |rng| {
        let mut buf = vec![0.0; n + 1];
        grid.run(spec.x0(), rng, &mut buf);
        let xt = buf[n];
        payoffs
            .iter()
            .zip(&quads)
            .map(|(p, q)| match p {
                Payoff::Terminal { lambda } => (1.0, (-lambda * xt).exp()),
                Payoff::Functional { .. } => (1.0, (-q.as_ref().unwrap().apply(&buf)).exp()),
                Payoff::KernelBridge { y, eps, .. } => {
                    let u = (xt - y) / eps;
                    (
                        (-0.5 * u * u).exp(),
                        (-q.as_ref().unwrap().apply(&buf)).exp(),
                    )
                }
            })
            .collect()
    });
    let mut out = Vec::with_capacity(payoffs.len());
    for (j, p) in payoffs.iter().enumerate() {
        let col: Vec<(f64, f64)> = rows.iter().map(|r| r[j]).collect();
        out.push(match p {
            Payoff::KernelBridge { .. } => ratio_estimate(&col)?,
            _ => Estimate::from_samples(&col.iter().map(|c| c.1).collect::<Vec<_>>()),
        });
    }
    Ok(out)
}

/// `Σ w g / Σ w` with the delta-method standard error.
fn ratio_estimate(wg: &[(f64, f64)]) -> Result<Estimate> {
    let sw: f64 = wg.iter().map(|c| c.0).sum();
    if !(sw > 0.0) {
        return Err(GbesqError::NonConvergence(
            "no path ended inside the conditioning kernel".into(),
        ));
    }
    let r = wg.iter().map(|c| c.0 * c.1).sum::<f64>() / sw;
    let v: f64 = wg.iter().map(|c| (c.0 * (c.1 - r)).powi(2)).sum();
    Ok(Estimate {
        value: r,
        stderr: v.sqrt() / sw,
    })
}

/// Simulates two GBESQ laws driven by the same Gaussian increments and
/// returns the fraction of `(path, step)` pairs where the pathwise order
/// `X¹ ≤ X²` fails by more than `1e-12`.
pub fn coupled_monotonicity_check(
    lower: &GbesqSpec,
    upper: &GbesqSpec,
    t: f64,
    cfg: &EulerConfig,
) -> Result<f64> {
    check_t(t)?;
    if lower.x0() > upper.x0() {
        return Err(param("x0", "the lower law must start below the upper one"));
    }
    if lower.beta() != upper.beta() {
        return Err(GbesqError::InvalidDrift(
            "coupled laws need a common drift".into(),
        ));
    }
    let mut knots: Vec<f64> = lower
        .delta()
        .knots()
        .iter()
        .chain(upper.delta().knots())
        .copied()
        .collect();
    knots.push(t);
    if knots
        .iter()
        .filter(|&&k| k <= t)
        .any(|&k| lower.delta().eval(k) > upper.delta().eval(k))
    {
        return Err(GbesqError::InvalidFunction(
            "dimensions are not ordered".into(),
        ));
    }
    let n = cfg.n_steps;
    let (g1, g2) = (Grid::new(lower, t, n), Grid::new(upper, t, n));
    let counts = per_path(cfg, |rng| {
        // Replaying the same substream gives both laws identical increments.
        let mut a = vec![0.0; n + 1];
        let mut b = vec![0.0; n + 1];
        let mut r2 = rng.clone();
        g1.run(lower.x0(), rng, &mut a);
        g2.run(upper.x0(), &mut r2, &mut b);
        a.iter()
            .zip(&b)
            .skip(1)
            .filter(|(x1, x2)| **x2 < **x1 - 1e-12)
            .count()
    });
    let bad: usize = counts.iter().sum();
    Ok(bad as f64 / (cfg.n_paths * n) as f64)
}

/// Terminal values of a generic scalar SDE `dV = a(s, V)ds + b(s, V)dW` by
/// plain Euler. Any truncation is up to the coefficient closures; `floor`
/// clamps the reported value.
pub fn euler_scalar<A, B>(
    v0: f64,
    t: f64,
    cfg: &EulerConfig,
    drift: A,
    diffusion: B,
    floor: Option<f64>,
) -> Result<Vec<f64>>
where
    A: Fn(f64, f64) -> f64 + Sync,
    B: Fn(f64, f64) -> f64 + Sync,
{
    check_t(t)?;
    let dt = t / cfg.n_steps as f64;
    let sq = dt.sqrt();
    Ok(per_path(cfg, |rng| {
        let mut v = v0;
        for k in 0..cfg.n_steps {
            let s = k as f64 * dt;
            let z: f64 = StandardNormal.sample(rng);
            v += drift(s, v) * dt + diffusion(s, v) * sq * z;
        }
        floor.map_or(v, |f| v.max(f))
    }))
}

/// Euler samples of `(log(S_t/S_0), V_t)` for the joint system
/// `dS = μS dt + √V S (ρ dW¹ + √(1−ρ²) dW²)`, `dV = δ dt + 2√V dW¹`,
/// with full truncation in `V`. The log price is stepped exactly given the
/// current variance.
pub fn euler_sv(
    mu: &PiecewiseFn,
    delta: &PiecewiseFn,
    rho: f64,
    v0: f64,
    t: f64,
    cfg: &EulerConfig,
) -> Result<Vec<(f64, f64)>> {
    check_t(t)?;
    if !(-1.0..=1.0).contains(&rho) {
        return Err(param("rho", "correlation must lie in [-1, 1]"));
    }
    let n = cfg.n_steps;
    let dt = t / n as f64;
    let sq = dt.sqrt();
    let mus: Vec<f64> = (0..n)
        .map(|k| mu.integral(k as f64 * dt, (k + 1) as f64 * dt))
        .collect();
    let spec = GbesqSpec::driftless(delta.clone(), v0)?;
    let grid = Grid::new(&spec, t, n);
    let rho_bar = (1.0 - rho * rho).max(0.0).sqrt();
    Ok(per_path(cfg, |rng| {
        let (mut v, mut ls) = (v0, 0.0);
        for (k, &drift) in mus.iter().enumerate() {
            let vp = v.max(0.0);
            let z1: f64 = StandardNormal.sample(rng);
            let z2: f64 = StandardNormal.sample(rng);
            ls += drift - 0.5 * vp * dt + vp.sqrt() * sq * (rho * z1 + rho_bar * z2);
            v += grid.delta[k] * dt + 2.0 * vp.sqrt() * sq * z1;
        }
        (ls, v.max(0.0))
    }))
}

fn check_t(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(param("t", format!("{t} must be positive and finite")))
    }
}
