//! Exact sampling by transform inversion: endpoints, conditional integrals,
//! skeletons with integral increments, and default times.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{param, Result};
use crate::inversion::{quantile, Hint, LaplaceTransform, QuantileOptions};
use crate::mixture::{mixture_coeffs, BridgeMixture};
use crate::time::{PiecewiseFn, RadonMeasure};
use crate::transforms::{BridgeTransform, GbesqSpec, TransitionTransform};

/// A reproducible random stream: one seed, many independent substreams.
#[derive(Debug, Clone)]
pub struct RngStream {
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }

    /// Uniform on the open interval `(0, 1)`.
    pub fn open01(&mut self) -> f64 {
        loop {
            let u: f64 = self.rng.random();
            if u > 0.0 {
                return u;
            }
        }
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Runs `f` once per draw, each on its own substream `i` of `seed`, in
/// parallel. Results come back in draw order and do not depend on the
/// number of worker threads.
pub fn par_draws<T, F>(n: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut RngStream) -> T + Sync,
{
    (0..n as u64)
        .into_par_iter()
        .map(|i| f(&mut RngStream::new(seed, i)))
        .collect()
}

/// Numerical settings shared by the samplers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerOptions {
    pub quantile: QuantileOptions,
    /// Largest admissible mixture truncation index.
    pub n_max: usize,
    /// Dominating tail mass allowed beyond the truncation index.
    pub mixture_tol: f64,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        Self {
            quantile: QuantileOptions::sampling(),
            n_max: 5000,
            mixture_tol: 1e-12,
        }
    }
}

/// Draw of `X_t` under the driftless law `spec`.
pub fn sample_endpoint(
    spec: &GbesqSpec,
    t: f64,
    rng: &mut RngStream,
    opts: &SamplerOptions,
) -> Result<f64> {
    spec.require_driftless()?;
    let u = rng.open01();
    if spec.is_trivial_on(t) {
        return Ok(0.0);
    }
    let f = TransitionTransform::new(spec, t)?;
    quantile(&f, u, opts.quantile)
}

/// The mixture for a bridge, degenerate when an endpoint is zero.
pub fn bridge_mixture(
    delta: &PiecewiseFn,
    x: f64,
    y: f64,
    t: f64,
    opts: &SamplerOptions,
) -> Result<BridgeMixture> {
    if x == 0.0 || y == 0.0 || !crate::transforms::bridge_has_mixture_form(delta, y, t) {
        Ok(BridgeMixture::degenerate())
    } else {
        mixture_coeffs(delta, x, y, t, opts.n_max, opts.mixture_tol)
    }
}

/// Draw of `∫X dμ` given `X_0 = x` and `X_t = y`.
pub fn sample_bridge_integral(
    delta: &PiecewiseFn,
    x: f64,
    y: f64,
    t: f64,
    mu: &RadonMeasure,
    rng: &mut RngStream,
    opts: &SamplerOptions,
) -> Result<f64> {
    let u = rng.open01();
    if mu.is_zero() || (x == 0.0 && y == 0.0 && delta.max_on(0.0, t) == 0.0) {
        return Ok(0.0);
    }
    let mix = bridge_mixture(delta, x, y, t, opts)?;
    let f = BridgeTransform::new(delta, x, y, t, mu, &mix)?;
    if let Hint::Degenerate(c) = f.hint() {
        return Ok(c);
    }
    quantile(&f, u, opts.quantile)
}

/// Which integrals to attach to a skeleton.
#[derive(Debug, Clone, Copy)]
pub enum SkeletonIntegrals<'a> {
    None,
    /// `∫ X ds` over each step.
    Lebesgue,
    /// `∫ X dμ` over each step `(t_{i−1}, t_i]`.
    Measure(&'a RadonMeasure),
}

/// One sampled skeleton time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkeletonPoint {
    pub t: f64,
    pub x: f64,
    /// Integral over the step ending at `t`.
    pub integral: Option<f64>,
}

/// Sequential exact sampling of `X` at increasing `times` (all positive),
/// starting from `x0` at time zero.
pub fn sample_skeleton(
    spec: &GbesqSpec,
    times: &[f64],
    integrals: SkeletonIntegrals<'_>,
    rng: &mut RngStream,
    opts: &SamplerOptions,
) -> Result<Vec<SkeletonPoint>> {
    spec.require_driftless()?;
    if times.first().is_some_and(|&t| !(t > 0.0)) || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(param("times", "must be positive and strictly increasing"));
    }
    let mut out = Vec::with_capacity(times.len());
    let (mut s, mut x) = (0.0, spec.x0());
    for &t in times {
        let (y, integral) = match integrals {
            SkeletonIntegrals::None => {
                let y = sample_endpoint(&spec.shifted(s, x)?, t - s, rng, opts)?;
                (y, None)
            }
            SkeletonIntegrals::Lebesgue => {
                let (y, i) = step_with_integral(spec, s, x, t, None, rng, opts)?;
                (y, Some(i))
            }
            SkeletonIntegrals::Measure(mu) => {
                let (y, inner) = step_with_integral(spec, s, x, t, Some(mu), rng, opts)?;
                let boundary_atom = if t <= mu.horizon() {
                    mu.atom_at(t)
                } else {
                    0.0
                };
                let origin_atom = if s == 0.0 { mu.atom_at(0.0) * x } else { 0.0 };
                (y, Some(inner + boundary_atom * y + origin_atom))
            }
        };
        out.push(SkeletonPoint { t, x: y, integral });
        s = t;
        x = y;
    }
    Ok(out)
}

/// Exact draw of `X_t` and `∫₍ₛ,ₜ₎ X dμ` from `X_s = x`, with `μ` on the
/// original clock (`None` for Lebesgue). Atoms at `s` and `t` are left to the
/// caller.
///
/// The step is cut at the dimension knots inside `(s, t)`. Each bridge then
/// has a constant dimension and takes the fast mixture route, and the law is
/// unchanged by the Markov property.
pub(crate) fn step_with_integral(
    spec: &GbesqSpec,
    s: f64,
    x: f64,
    t: f64,
    mu: Option<&RadonMeasure>,
    rng: &mut RngStream,
    opts: &SamplerOptions,
) -> Result<(f64, f64)> {
    let mut cuts = vec![s];
    cuts.extend(spec.delta().knots_between(s, t));
    cuts.push(t);
    let (mut xa, mut total) = (x, 0.0);
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let piece = spec.shifted(a, xa)?;
        let y = sample_endpoint(&piece, b - a, rng, opts)?;
        let local = match mu {
            None => Some(RadonMeasure::lebesgue(1.0, b - a)?),
            Some(m) if a < m.horizon() => Some(m.restrict_shift(a, b)?),
            Some(_) => None,
        };
        if let Some(local) = local {
            total += sample_bridge_integral(piece.delta(), xa, y, b - a, &local, rng, opts)?;
        }
        if b < t {
            if let Some(m) = mu.filter(|m| b <= m.horizon()) {
                total += m.atom_at(b) * y;
            }
        }
        xa = y;
    }
    Ok((xa, total))
}

/// First time the integrated intensity `∫₀ᵗ X ds` exceeds an independent
/// unit exponential, or `None` if that happens after `horizon`.
///
/// The integral is sampled exactly on a grid of step `h`; inside the
/// crossing step it is interpolated linearly.
pub fn sample_default_time(
    intensity: &GbesqSpec,
    horizon: f64,
    h: f64,
    rng: &mut RngStream,
    opts: &SamplerOptions,
) -> Result<Option<f64>> {
    intensity.require_driftless()?;
    if !(h > 0.0 && horizon > 0.0) {
        return Err(param("step", "horizon and step must be positive"));
    }
    let threshold = -rng.open01().ln();
    if intensity.is_trivial_on(horizon) {
        return Ok(None);
    }
    let n = (horizon / h - 1e-9).ceil().max(1.0) as usize;
    let (mut s, mut x, mut acc) = (0.0, intensity.x0(), 0.0);
    for k in 1..=n {
        let t = if k == n { horizon } else { k as f64 * h };
        let dt = t - s;
        let (y, inc) = step_with_integral(intensity, s, x, t, None, rng, opts)?;
        if acc + inc >= threshold {
            let frac = if inc > 0.0 {
                (threshold - acc) / inc
            } else {
                1.0
            };
            return Ok(Some(s + dt * frac.clamp(0.0, 1.0)));
        }
        acc += inc;
        s = t;
        x = y;
    }
    Ok(None)
}

/// Conditional mean of `∫X dμ` on the bridge, from the transform.
pub fn bridge_integral_mean(
    delta: &PiecewiseFn,
    x: f64,
    y: f64,
    t: f64,
    mu: &RadonMeasure,
    opts: &SamplerOptions,
) -> Result<f64> {
    let mix = bridge_mixture(delta, x, y, t, opts)?;
    Ok(BridgeTransform::new(delta, x, y, t, mu, &mix)?.mean())
}

/// Empirical Laplace transform `mean(e^{−λY})` and its standard error.
pub fn empirical_laplace(samples: &[f64], lambda: f64) -> (f64, f64) {
    let n = samples.len() as f64;
    let (mut s, mut s2) = (0.0, 0.0);
    for &y in samples {
        let v = (-lambda * y).exp();
        s += v;
        s2 += v * v;
    }
    let m = s / n;
    let var = (s2 / n - m * m).max(0.0) * n / (n - 1.0).max(1.0);
    (m, (var / n).sqrt())
}
