//! The acceptance suite: analytic identities and oracle comparisons, one
//! function per criterion. Each returns a [`CriterionReport`] whose `detail`
//! carries the measured numbers, so a failing run says by how much.

use std::fmt;
use std::time::Instant;

use serde::Serialize;
use statrs::distribution::{Continuous, ContinuousCDF, Gamma};
use statrs::function::gamma::ln_gamma;

use crate::adapters::{adapt_cir, RegimePath};
use crate::error::Result;
use crate::finance::{price_bond, sv_exact_step, BondRoute, McConfig, SvModel};
use crate::inversion::EulerParams;
use crate::mixture::{bessel_weights, mixture_by_inversion, mixture_coeffs, BridgeMixture};
use crate::oracle::{
    coupled_monotonicity_check, euler_estimates, euler_scalar, euler_sv, EulerConfig, Payoff,
};
use crate::propagator::full_propagator;
use crate::samplers::{
    bridge_mixture, par_draws, sample_default_time, sample_endpoint, SamplerOptions,
};
use crate::time::{PiecewiseFn, RadonMeasure};
use crate::transforms::{
    bridge_laplace, bridge_zero_laplace, functional_laplace, scaling_image, transition_laplace,
    transition_laplace_integral, GbesqSpec,
};

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionReport {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for CriterionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {:>2} [{}] {} ({:.2}s): {}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.seconds,
            self.detail
        )
    }
}

/// Runs `body` and checks both its verdict and a wall-clock budget.
fn timed(
    id: u8,
    name: &'static str,
    budget: f64,
    body: impl FnOnce() -> Result<(bool, String)>,
) -> CriterionReport {
    let start = Instant::now();
    let outcome = body();
    let seconds = start.elapsed().as_secs_f64();
    let (passed, mut detail) = match outcome {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    let in_time = seconds < budget;
    if !in_time {
        detail.push_str(&format!("; over the {budget}s budget"));
    }
    CriterionReport {
        id,
        name,
        passed: passed && in_time,
        detail,
        seconds,
    }
}

pub const ALL: [u8; 10] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10];

pub fn run(id: u8) -> Option<CriterionReport> {
    Some(match id {
        1 => criterion_1(),
        2 => criterion_2(),
        3 => criterion_3(),
        4 => criterion_4(),
        5 => criterion_5(),
        6 => criterion_6(),
        7 => criterion_7(),
        8 => criterion_8(),
        9 => criterion_9(),
        10 => criterion_10(),
        _ => return None,
    })
}

pub fn run_all() -> Vec<CriterionReport> {
    ALL.iter().filter_map(|&i| run(i)).collect()
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn dims() -> Vec<(&'static str, PiecewiseFn)> {
    vec![
        ("0", PiecewiseFn::constant(0.0)),
        ("1", PiecewiseFn::constant(1.0)),
        (
            "(1,2)",
            PiecewiseFn::step(vec![0.0, 0.5], vec![1.0, 2.0]).expect("valid"),
        ),
    ]
}

fn lambda_grid() -> Vec<f64> {
    (0..10)
        .map(|i| 10f64.powf(-2.0 + 4.0 * i as f64 / 9.0))
        .collect()
}

const HORIZONS: [f64; 3] = [0.5, 1.0, 3.0];

pub fn criterion_1() -> CriterionReport {
    timed(
        1,
        "transition transform: product form vs integral form",
        1.0,
        || {
            let mut worst = 0.0f64;
            for (_, d) in dims() {
                for x in [0.0, 1.0] {
                    let spec = GbesqSpec::driftless(d.clone(), x)?;
                    for t in HORIZONS {
                        for l in lambda_grid() {
                            let a = transition_laplace(&spec, t, l)?;
                            let b = transition_laplace_integral(&spec, t, l)?;
                            worst = worst.max(rel(a, b));
                        }
                    }
                }
            }
            let one = GbesqSpec::constant(1.0, 0.0)?;
            let mut exact_dev = 0.0f64;
            for t in HORIZONS {
                for l in lambda_grid() {
                    let got = transition_laplace(&one, t, l)?;
                    exact_dev = exact_dev.max(rel(got, (1.0 + 2.0 * l * t).powf(-0.5)));
                }
            }
            Ok((
                worst <= 1e-12 && exact_dev <= 2.0 * f64::EPSILON,
                format!("max rel diff {worst:.2e}; δ≡1, x=0 vs (1+2λt)^(-1/2): {exact_dev:.2e}"),
            ))
        },
    )
}

pub fn criterion_2() -> CriterionReport {
    timed(
        2,
        "Dirac functional equals transition transform",
        1.0,
        || {
            let mut worst = 0.0f64;
            for (_, d) in dims() {
                for x in [0.0, 1.0] {
                    let spec = GbesqSpec::driftless(d.clone(), x)?;
                    for t in HORIZONS {
                        for l in lambda_grid() {
                            let a = functional_laplace(&spec, &RadonMeasure::dirac(t, l)?)?;
                            let b = transition_laplace(&spec, t, l)?;
                            worst = worst.max(rel(a, b));
                        }
                    }
                }
            }
            Ok((worst <= 1e-10, format!("max rel diff {worst:.2e}")))
        },
    )
}

/// Closed form of the bridge transform for `μ = α·Lebesgue` and a step
/// dimension, given the mixture weights.
pub fn lebesgue_bridge_closed_form(
    delta: &PiecewiseFn,
    x: f64,
    y: f64,
    t: f64,
    alpha: f64,
    weights: &[f64],
) -> f64 {
    let k = (2.0 * alpha).sqrt();
    let b = k * t;
    let first = (x + y) / (2.0 * t) * (1.0 - b / b.tanh());
    // ∫(1/(2(t−u)) − (k/2)coth(k(t−u))) du has antiderivative ½ln(sinh(k(t−u))/(t−u)).
    let g = |u: f64| {
        let r = t - u;
        if r <= 0.0 {
            k.ln()
        } else {
            ((k * r).sinh() / r).ln()
        }
    };
    let second: f64 = delta
        .pieces(0.0, t)
        .iter()
        .map(|p| 0.5 * p.2 * (g(p.1) - g(p.0)))
        .sum();
    let ratio = (b / b.sinh()).powi(2);
    let third: f64 = weights.iter().rev().fold(0.0, |acc, w| acc * ratio + w);
    (first + second).exp() * third
}

pub fn criterion_3() -> CriterionReport {
    timed(3, "Lebesgue bridge closed forms", 1.0, || {
        let piecewise = PiecewiseFn::step(vec![0.0, 0.2, 0.45], vec![1.0, 2.5, 0.5])?;
        let constant = PiecewiseFn::constant(1.7);
        let (mut worst_a, mut worst_b) = (0.0f64, 0.0f64);
        // Full closed form: constant dimension, piecewise dimension into zero,
        // piecewise dimension into a positive endpoint.
        let mut worst_full = [0.0f64; 3];
        for alpha in [0.1, 0.5, 2.0] {
            for t in [0.5, 1.0] {
                let mu = RadonMeasure::lebesgue(alpha, t)?;
                let b = (2.0 * alpha).sqrt() * t;
                for x in [0.4, 1.3] {
                    let got = bridge_zero_laplace(&PiecewiseFn::constant(0.0), x, t, &mu)?;
                    let want = (x / (2.0 * t) * (1.0 - b / b.tanh())).exp();
                    worst_a = worst_a.max(rel(got, want));
                }
                let got = bridge_zero_laplace(&PiecewiseFn::constant(1.0), 0.0, t, &mu)?;
                worst_b = worst_b.max(rel(got, (b / b.sinh()).sqrt()));
                for (slot, delta) in [(0usize, &constant), (1, &piecewise)] {
                    for (x, y) in [(0.0, 0.0), (1.1, 0.0), (0.0, 0.8), (1.1, 0.7), (2.0, 3.0)] {
                        let mix = if x > 0.0 && y > 0.0 {
                            mixture_coeffs(delta, x, y, t, 2000, 1e-14)?
                        } else {
                            BridgeMixture::degenerate()
                        };
                        let got = if y == 0.0 {
                            bridge_zero_laplace(delta, x, t, &mu)?
                        } else {
                            bridge_laplace(
                                delta,
                                x,
                                y,
                                t,
                                &mu,
                                &bridge_mixture(delta, x, y, t, &SamplerOptions::default())?,
                            )?
                        };
                        let want =
                            lebesgue_bridge_closed_form(delta, x, y, t, alpha, mix.coefficients());
                        let k = if slot == 1 && y > 0.0 { 2 } else { slot };
                        worst_full[k] = worst_full[k].max(rel(got, want));
                    }
                }
            }
        }
        let worst = worst_a
            .max(worst_b)
            .max(worst_full.iter().copied().fold(0.0, f64::max));
        Ok((
            worst <= 1e-10,
            format!(
                "bridge to zero, δ≡0: {worst_a:.2e}; x=0, δ≡1: {worst_b:.2e}; full bridge, constant δ: {:.2e}; \
                 piecewise δ into zero: {:.2e}; piecewise δ into y>0: {:.2e} (closed form is not the bridge law here, \
                 see the kernel-conditioned oracle test)",
                worst_full[0], worst_full[1], worst_full[2]
            ),
        ))
    })
}

fn unit_step_dimension() -> PiecewiseFn {
    PiecewiseFn::step(vec![0.0, 0.5], vec![1.0, 2.0]).expect("valid")
}

pub fn criterion_4() -> CriterionReport {
    timed(4, "Euler oracle, unconditioned transforms", 60.0, || {
        let spec = GbesqSpec::driftless(unit_step_dimension(), 1.0)?;
        let mu = RadonMeasure::lebesgue(0.5, 1.0)?;
        let cfg = EulerConfig::new(2000, 200_000, 4)?;
        let est = euler_estimates(
            &spec,
            &[
                Payoff::Terminal { lambda: 0.7 },
                Payoff::Functional { mu: mu.clone() },
            ],
            1.0,
            &cfg,
        )?;
        let exact = [
            transition_laplace(&spec, 1.0, 0.7)?,
            functional_laplace(&spec, &mu)?,
        ];
        let z: Vec<f64> = est.iter().zip(&exact).map(|(e, x)| e.z_score(*x)).collect();
        Ok((
            z.iter().all(|&z| z < 3.0),
            format!(
                "E e^(-0.7 X_1): exact {:.6}, Euler {:.6} ± {:.1e} ({:.2} se); E e^(-0.5∫X): exact {:.6}, Euler {:.6} ± {:.1e} ({:.2} se)",
                exact[0], est[0].value, est[0].stderr, z[0], exact[1], est[1].value, est[1].stderr, z[1]
            ),
        ))
    })
}

pub fn criterion_5() -> CriterionReport {
    timed(5, "Euler oracle, kernel-conditioned bridge", 300.0, || {
        let delta = PiecewiseFn::constant(2.0);
        let spec = GbesqSpec::driftless(delta.clone(), 1.0)?;
        let mu = RadonMeasure::lebesgue(0.5, 1.0)?;
        let mix = mixture_coeffs(&delta, 1.0, 1.0, 1.0, 2000, 1e-14)?;
        let exact = bridge_laplace(&delta, 1.0, 1.0, 1.0, &mu, &mix)?;
        let cfg = EulerConfig::new(BRIDGE_ORACLE_STEPS, 1_000_000, 5)?;
        let payoff = Payoff::KernelBridge {
            mu,
            y: 1.0,
            eps: 0.02,
        };
        let est = euler_estimates(&spec, std::slice::from_ref(&payoff), 1.0, &cfg)?[0];
        let z = est.z_score(exact);
        Ok((
            z < 3.0,
            format!(
                "exact {exact:.6}, kernel Euler {:.6} ± {:.1e} ({z:.2} se, {BRIDGE_ORACLE_STEPS} steps)",
                est.value, est.stderr
            ),
        ))
    })
}

/// Time steps of the kernel-conditioned oracle.
pub const BRIDGE_ORACLE_STEPS: usize = 400;

pub fn criterion_6() -> CriterionReport {
    timed(6, "bridge mixture coefficients", 30.0, || {
        let (d, x, y, t) = (2.0, 1.0, 1.0, 1.0);
        let delta = PiecewiseFn::constant(d);
        let m = mixture_coeffs(&delta, x, y, t, 500, 1e-14)?;
        let n = m.coefficients().len();
        let brute = gamma_numerator_weights(d, x, y, t, n);
        let lemma = mixture_by_inversion(&delta, x, y, t, n - 1, EulerParams::PRECISE)?;
        let err_lemma = max_abs_diff(&lemma, &brute);
        let err_bessel = max_abs_diff(m.coefficients(), &brute);
        let (dom, _) = bessel_weights(m.nu(), m.z_dom())?;
        let mut dominated = true;
        let mut dom_text = Vec::new();
        for (name, f) in [
            ("k", (|k: usize| k as f64) as fn(usize) -> f64),
            ("k²", |k: usize| (k * k) as f64),
        ] {
            let lhs = m.expect(f);
            let rhs: f64 = dom.iter().enumerate().map(|(k, w)| w * f(k)).sum();
            dominated &= lhs <= rhs + 1e-12;
            dom_text.push(format!("Σb·{name} = {lhs:.6} ≤ {rhs:.6}"));
        }
        // Which Bessel parameter do the numerically inverted weights follow
        // when t ≠ 1?
        let (d2, x2, y2, t2) = (3.0, 1.5, 2.0, 2.0);
        let inv = mixture_by_inversion(
            &PiecewiseFn::constant(d2),
            x2,
            y2,
            t2,
            12,
            EulerParams::PRECISE,
        )?;
        let (scaled, _) = bessel_weights(d2 / 2.0 - 1.0, (x2 * y2).sqrt() / t2)?;
        let (plain, _) = bessel_weights(d2 / 2.0 - 1.0, (x2 * y2).sqrt())?;
        let (e_scaled, e_plain) = (max_abs_diff(&inv, &scaled), max_abs_diff(&inv, &plain));
        Ok((
            err_lemma <= 1e-6 && err_bessel <= 1e-6 && dominated && e_scaled < 1e-6 && e_plain > 1e-3,
            format!(
                "{n} terms; inversion vs Gamma numerators {err_lemma:.2e}, Bessel form vs Gamma numerators {err_bessel:.2e}; {}; \
                 z-parameter at t=2: |b − Bessel(ν, √(xy)/t)| = {e_scaled:.2e}, |b − Bessel(ν, √(xy))| = {e_plain:.2e}, so ζ = √(xy)/t",
                dom_text.join(", ")
            ),
        ))
    })
}

/// Normalised `(x/2t)^n/n! · Gamma(δ/2 + n, 2t)` densities at `y`.
pub fn gamma_numerator_weights(d: f64, x: f64, y: f64, t: f64, n: usize) -> Vec<f64> {
    let logs: Vec<f64> = (0..n)
        .map(|k| {
            let g = Gamma::new(d / 2.0 + k as f64, 1.0 / (2.0 * t)).expect("positive shape");
            k as f64 * (x / (2.0 * t)).ln() - ln_gamma(k as f64 + 1.0) + g.ln_pdf(y)
        })
        .collect();
    let best = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - best).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max)
}

/// One-sample Kolmogorov–Smirnov distance.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// 1% critical value of the one-sample test.
pub fn ks_critical(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

/// 1% critical value of the two-sample test.
pub fn ks_critical_two(n: usize, m: usize) -> f64 {
    1.628 * ((n + m) as f64 / (n * m) as f64).sqrt()
}

/// Parameters of the default-time check: intensity start, dimension,
/// horizon and the exact-sampling mesh.
pub const DEFAULT_TIME_CASE: (f64, f64, f64, f64) = (2.0, 0.5, 0.5, 0.125);

pub fn criterion_7() -> CriterionReport {
    timed(7, "sampler distributional tests (KS at 1%)", 180.0, || {
        let n = 100_000;
        let opts = SamplerOptions::default();

        let t = 1.0;
        let spec = GbesqSpec::constant(1.0, 0.0)?;
        let draws = par_draws(n, 71, |rng| sample_endpoint(&spec, t, rng, &opts))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let gamma = Gamma::new(0.5, 1.0 / (2.0 * t)).expect("valid");
        let d_a = ks_one_sample(&draws, |y| gamma.cdf(y));

        let (alpha, beta, sigma, v0, horizon) = (0.04, 0.5, 0.2, 0.05, 1.0);
        let cir = adapt_cir(alpha, beta, sigma, v0)?;
        let exact = par_draws(n, 72, |rng| cir.sample(horizon, rng, &opts))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let euler = euler_scalar(
            v0,
            horizon,
            &EulerConfig::new(500, n, 73)?,
            |_, v| alpha - beta * v.max(0.0),
            |_, v| sigma * v.max(0.0).sqrt(),
            Some(0.0),
        )?;
        let d_b = ks_two_sample(&exact, &euler);

        let (x, d, horizon, h) = DEFAULT_TIME_CASE;
        let intensity = GbesqSpec::constant(d, x)?;
        let taus = par_draws(n, 74, |rng| {
            sample_default_time(&intensity, horizon, h, rng, &opts)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let d_c = ks_censored(&intensity, &taus, horizon)?;

        let (ca, cb) = (ks_critical(n), ks_critical_two(n, n));
        Ok((
            d_a < ca && d_b < cb && d_c < ca,
            format!(
                "(a) endpoint vs Gamma(1/2, 2t): D = {d_a:.4} (crit {ca:.4}); (b) CIR adapter vs Euler CIR: D = {d_b:.4} (crit {cb:.4}); \
                 (c) default time vs analytic survival: D = {d_c:.4} (crit {ca:.4})"
            ),
        ))
    })
}

/// KS distance between simulated default times (censored at `horizon`) and
/// `1 − E[exp(−∫₀ᵗX)]`, taken over `[0, horizon]`.
pub fn ks_censored(intensity: &GbesqSpec, taus: &[Option<f64>], horizon: f64) -> Result<f64> {
    let mut hits: Vec<f64> = taus.iter().filter_map(|t| *t).collect();
    hits.sort_by(f64::total_cmp);
    let n = taus.len() as f64;
    let cdf = |t: f64| -> Result<f64> {
        Ok(1.0 - functional_laplace(intensity, &RadonMeasure::lebesgue(1.0, t)?)?)
    };
    let mut d = 0.0f64;
    for (i, &t) in hits.iter().enumerate() {
        let f = if t > 0.0 { cdf(t)? } else { 0.0 };
        d = d.max((f - i as f64 / n).max((i + 1) as f64 / n - f));
    }
    d = d.max((cdf(horizon)? - hits.len() as f64 / n).abs());
    Ok(d)
}

pub fn criterion_8() -> CriterionReport {
    timed(
        8,
        "regime-switching bond: ODE route vs Monte Carlo route",
        120.0,
        || {
            let regimes =
                RegimePath::new(vec![0.0, 1.0], vec![0, 1], vec![0.04, 0.08], vec![0.2, 0.4])?;
            let (r0, horizon) = (0.03, 2.0);
            let mc = McConfig::new(100_000, 8);
            let ode = price_bond(&regimes, r0, horizon, BondRoute::Ode, &mc)?;
            let sim = price_bond(&regimes, r0, horizon, BondRoute::MonteCarlo, &mc)?;
            let z = (sim.price - ode.price).abs() / sim.stderr;

            let (alpha, sigma) = (0.04, 0.2);
            let single = price_bond(
                &RegimePath::constant(alpha, sigma)?,
                r0,
                horizon,
                BondRoute::Ode,
                &mc,
            )?;
            let closed = square_root_bond(alpha, sigma, r0, horizon);
            let gap = (single.price - closed).abs();
            Ok((
            z < 3.0 && gap < 1e-8,
            format!(
                "two regimes: ODE {:.8}, MC {:.8} ± {:.1e} ({z:.2} se); one regime: ODE {:.12} vs closed form {closed:.12} (gap {gap:.1e})",
                ode.price, sim.price, sim.stderr, single.price
            ),
        ))
        },
    )
}

/// Zero-coupon price for `dr = α dt + σ√r dW`.
pub fn square_root_bond(alpha: f64, sigma: f64, r0: f64, t: f64) -> f64 {
    let g = 2f64.sqrt() * sigma;
    (g * t / 2.0).cosh().powf(-2.0 * alpha / (sigma * sigma))
        * (-r0 * (2.0 / g) * (g * t / 2.0).tanh()).exp()
}

/// Mean, variance, and their standard errors.
pub fn moments_with_errors(xs: &[f64]) -> (f64, f64, f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    (m, v, (v / n).sqrt(), ((m4 - v * v).max(0.0) / n).sqrt())
}

pub fn criterion_9() -> CriterionReport {
    timed(
        9,
        "exact SV step vs Euler of the joint system",
        300.0,
        || {
            let n = 100_000;
            let t = 1.0;
            let delta = PiecewiseFn::step(vec![0.0, 0.5], vec![2.0, 3.0])?;
            let mu = PiecewiseFn::constant(0.05);
            let vol = GbesqSpec::driftless(delta.clone(), 0.5)?;
            let opts = SamplerOptions::default();
            let mut ok = true;
            let mut parts = Vec::new();
            for (i, rho) in [-0.5, 0.0, 0.7].into_iter().enumerate() {
                let model = SvModel::new(mu.clone(), rho, vol.clone(), 1.0)?;
                let exact = par_draws(n, 90 + i as u64, |rng| sv_exact_step(&model, t, rng, &opts))
                    .into_iter()
                    .collect::<Result<Vec<_>>>()?;
                let log_s: Vec<f64> = exact.iter().map(|s| s.s.ln()).collect();
                let mean_i = exact.iter().map(|s| s.integrated_variance).sum::<f64>() / n as f64;
                let euler: Vec<f64> = euler_sv(
                    &mu,
                    &delta,
                    rho,
                    0.5,
                    t,
                    &EulerConfig::new(500, n, 95 + i as u64)?,
                )?
                .into_iter()
                .map(|p| p.0)
                .collect();
                let (m1, v1, sm1, sv1) = moments_with_errors(&log_s);
                let (m2, v2, sm2, sv2) = moments_with_errors(&euler);
                let zm = (m1 - m2).abs() / sm1.hypot(sm2);
                let zv = (v1 - v2).abs() / sv1.hypot(sv2);
                ok &= zm < 4.0 && zv < 4.0;
                // The squared factor would remove ρ²(1−ρ²)·E[I] of conditional variance.
                let alt = v1 - rho * rho * (1.0 - rho * rho) * mean_i;
                let z_alt = (alt - v2).abs() / sv1.hypot(sv2);
                parts.push(format!(
                "ρ={rho}: mean {m1:.5}/{m2:.5} ({zm:.2} se), var {v1:.5}/{v2:.5} ({zv:.2} se), (1−ρ²)² variant {alt:.5} ({z_alt:.1} se)"
            ));
            }
            Ok((ok, parts.join("; ")))
        },
    )
}

pub fn criterion_10() -> CriterionReport {
    timed(10, "structural properties", 60.0, || {
        let d1 = PiecewiseFn::step(vec![0.0, 0.3], vec![1.0, 2.5])?;
        let d2 = PiecewiseFn::step(vec![0.0, 0.7], vec![0.5, 0.0])?;
        let sum = d1.add(&d2)?;
        let mu = RadonMeasure::new(
            vec![(0.4, 0.8), (1.0, 0.3)],
            PiecewiseFn::step(vec![0.0, 0.6], vec![1.0, 0.2])?,
            1.2,
        )?;
        let mut additivity = 0.0f64;
        for (x1, x2) in [(0.0, 1.0), (0.7, 1.9)] {
            let a = GbesqSpec::driftless(d1.clone(), x1)?;
            let b = GbesqSpec::driftless(d2.clone(), x2)?;
            let c = GbesqSpec::driftless(sum.clone(), x1 + x2)?;
            for l in lambda_grid() {
                let lhs = transition_laplace(&c, 1.1, l)?;
                let rhs = transition_laplace(&a, 1.1, l)? * transition_laplace(&b, 1.1, l)?;
                additivity = additivity.max(rel(lhs, rhs));
            }
            let lhs = functional_laplace(&c, &mu)?;
            let rhs = functional_laplace(&a, &mu)? * functional_laplace(&b, &mu)?;
            additivity = additivity.max(rel(lhs, rhs));
        }

        let base = GbesqSpec::driftless(d1.clone(), 1.1)?;
        let mut scaling = 0.0f64;
        for c in [0.3, 1.0, 2.7] {
            let img = scaling_image(&base, c)?;
            for l in lambda_grid() {
                scaling = scaling.max(rel(
                    transition_laplace(&img, 0.9, l)?,
                    transition_laplace(&base, c * 0.9, l / c)?,
                ));
            }
        }

        let (mut det, mut reversal) = (0.0f64, 0.0f64);
        for t in [0.5, 1.0, 1.2] {
            let m = full_propagator(&mu, 0.0, t)?;
            det = det.max(m.det_defect());
            let local = mu.restrict_shift(0.0, t)?;
            let fwd = full_propagator(&local, 0.0, t)?;
            let back = full_propagator(&local.reverse(t)?, 0.0, t)?;
            reversal = reversal.max(rel(fwd.ln_m12().exp(), back.ln_m12().exp()));
        }

        let cfg = EulerConfig::new(2000, 1000, 10)?;
        let pairs = [
            (
                GbesqSpec::constant(0.0, 0.0)?,
                GbesqSpec::constant(1.0, 1.0)?,
            ),
            (
                GbesqSpec::constant(1.0, 0.5)?,
                GbesqSpec::constant(2.0, 0.5)?,
            ),
        ];
        let mut violation = 0.0f64;
        for (lo, hi) in &pairs {
            violation = violation.max(coupled_monotonicity_check(lo, hi, 1.0, &cfg)?);
        }
        Ok((
            additivity <= 1e-12 && scaling <= 1e-12 && det <= 1e-12 && reversal <= 1e-12 && violation < 1e-3,
            format!(
                "additivity {additivity:.1e}, scaling {scaling:.1e}, det {det:.1e}, ψ(t) reversal {reversal:.1e}, coupled violation rate {violation:.1e}"
            ),
        ))
    })
}
