//! Bridge mixture coefficients.
//!
//! Given `X_0 = x` and `X_t = y`, the number `N` of excursions of the initial
//! mass that survive to time `t` has posterior weights
//!
//! ```text
//! b(n) ∝ (x/2t)ⁿ/n! · density at y of the law with transform F̃(λ)(1+2λt)^{−n}
//! ```
//!
//! where `F̃` is the transition transform started from zero. For a constant
//! dimension `d` this is exactly the Bessel law with index `d/2 − 1` and
//! parameter `√(xy)/t`.

use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{param, GbesqError, Result};
use crate::inversion::{invert_density, EulerParams};
use crate::time::PiecewiseFn;
use crate::transforms::TransitionTransform;

/// Truncated posterior weights of the surviving-excursion count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BridgeMixture {
    coefficients: Vec<f64>,
    nu: f64,
    z_dom: f64,
    tail_bound: f64,
}

impl BridgeMixture {
    /// All mass on `n = 0`: the case `x = 0` or `y = 0`.
    pub fn degenerate() -> Self {
        Self {
            coefficients: vec![1.0],
            nu: -1.0,
            z_dom: 0.0,
            tail_bound: 0.0,
        }
    }

    pub fn from_coefficients(coefficients: Vec<f64>, nu: f64, z_dom: f64, tail_bound: f64) -> Self {
        Self {
            coefficients,
            nu,
            z_dom,
            tail_bound,
        }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn z_dom(&self) -> f64 {
        self.z_dom
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    /// `Σ b(n)·f(n)`.
    pub fn expect(&self, f: impl Fn(usize) -> f64) -> f64 {
        self.coefficients
            .iter()
            .enumerate()
            .map(|(n, b)| b * f(n))
            .sum()
    }
}

/// Weights of the Bessel(`ν`, `z`) law on `0..` together with a bound on the
/// mass beyond the last returned index.
///
/// The series is summed directly until its terms fall below `1e−18` of the
/// largest one past the mode, so no modified Bessel function is needed for
/// the normalisation.
pub fn bessel_weights(nu: f64, z: f64) -> Result<(Vec<f64>, f64)> {
    if !(nu >= -1.0) || !(z >= 0.0) || !z.is_finite() {
        return Err(param("bessel", format!("ν = {nu}, z = {z}")));
    }
    if z == 0.0 {
        // Limit z → 0: all mass at the smallest admissible index.
        return Ok(if nu == -1.0 {
            (vec![0.0, 1.0], 0.0)
        } else {
            (vec![1.0], 0.0)
        });
    }
    let lz = (0.5 * z).ln();
    let log_w = |n: usize| -> f64 {
        let a = n as f64 + nu + 1.0;
        if a <= 0.0 {
            f64::NEG_INFINITY
        } else {
            (2.0 * n as f64 + nu) * lz - ln_gamma(a) - ln_gamma(n as f64 + 1.0)
        }
    };
    let mode = (0.5 * z) as usize;
    let mut logs = Vec::new();
    let mut best = f64::NEG_INFINITY;
    let mut n = 0;
    loop {
        let l = log_w(n);
        best = best.max(l);
        logs.push(l);
        if n > mode + 2 && l < best - 41.5 {
            break;
        }
        n += 1;
    }
    let w: Vec<f64> = logs.iter().map(|l| (l - best).exp()).collect();
    // Remainder beyond the last index: terms decrease at least geometrically
    // with the ratio at the last index.
    let last = w.len() - 1;
    let r = 0.25 * z * z / ((last as f64 + 1.0) * (last as f64 + nu + 2.0));
    let rest = if r < 1.0 {
        w[last] * r / (1.0 - r)
    } else {
        f64::INFINITY
    };
    let total: f64 = w.iter().sum::<f64>() + rest;
    Ok((w.iter().map(|v| v / total).collect(), rest / total))
}

/// Bessel(`ν`, `z`) mass strictly beyond index `n`.
pub fn bessel_tail(nu: f64, z: f64, n: usize) -> Result<f64> {
    let (w, rest) = bessel_weights(nu, z)?;
    Ok(w.iter().skip(n + 1).sum::<f64>() + rest)
}

/// Parameter of the dominating Bessel law; `√(xy)/t` for `t ≤ 1`, and
/// `√(xy)` beyond, which is conservative.
pub fn z_dom(x: f64, y: f64, t: f64) -> f64 {
    (x * y).sqrt() / t.min(1.0)
}

/// Posterior mixture weights for the bridge from `x` to `y > 0` over `[0, t]`.
///
/// Truncation keeps the dominating Bessel tail below `tol`.
pub fn mixture_coeffs(
    delta: &PiecewiseFn,
    x: f64,
    y: f64,
    t: f64,
    n_max: usize,
    tol: f64,
) -> Result<BridgeMixture> {
    validate(x, y, t)?;
    if x == 0.0 {
        return Ok(BridgeMixture::degenerate());
    }
    let d_min = delta.min_on(0.0, t);
    let d_max = delta.max_on(0.0, t);
    let nu = 0.5 * d_min - 1.0;
    let zd = z_dom(x, y, t);
    let (dom, rest) = bessel_weights(nu, zd)?;
    // tails[n] = mass strictly beyond n, summed from the far end.
    let mut tails = vec![0.0; dom.len()];
    let mut acc = rest;
    for n in (0..dom.len()).rev() {
        tails[n] = acc;
        acc += dom[n];
    }
    let big_n = tails
        .iter()
        .position(|&tb| tb <= tol)
        .map(|n| (n, tails[n]));
    let (n_trunc, tail_bound) = match big_n {
        Some((n, tb)) if n <= n_max => (n, tb),
        _ => {
            return Err(GbesqError::Truncation(format!(
                "Bessel({nu}, {zd}) tail above {tol} within {n_max} terms"
            )))
        }
    };
    let coeffs = if d_min == d_max {
        let zeta = (x * y).sqrt() / t;
        let (w, _) = bessel_weights(nu, zeta)?;
        let mut c: Vec<f64> = (0..=n_trunc)
            .map(|n| w.get(n).copied().unwrap_or(0.0))
            .collect();
        let s: f64 = c.iter().sum();
        c.iter_mut().for_each(|v| *v /= s);
        c
    } else {
        mixture_by_inversion(delta, x, y, t, n_trunc, EulerParams::PRECISE)?
    };
    Ok(BridgeMixture {
        coefficients: coeffs,
        nu,
        z_dom: zd,
        tail_bound,
    })
}

fn validate(x: f64, y: f64, t: f64) -> Result<()> {
    if !(t > 0.0) {
        return Err(param("t", "must be positive"));
    }
    if !(x >= 0.0 && x.is_finite()) {
        return Err(param("x", "must be finite and nonnegative"));
    }
    if y == 0.0 {
        return Err(param(
            "y",
            "the bridge to zero has no mixture; use the bridge-to-zero transform",
        ));
    }
    if !(y > 0.0 && y.is_finite()) {
        return Err(param("y", "must be finite and positive"));
    }
    Ok(())
}

/// Coefficients `0..=n` computed from numerically inverted numerator
/// densities, normalised to sum to one.
pub fn mixture_by_inversion(
    delta: &PiecewiseFn,
    x: f64,
    y: f64,
    t: f64,
    n: usize,
    params: EulerParams,
) -> Result<Vec<f64>> {
    validate(x, y, t)?;
    let mut logs = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let f = TransitionTransform::mixture_term(delta, t, k)?;
        let dens = invert_density(&f, y, params)?;
        let l = if dens > 0.0 {
            k as f64 * (x / (2.0 * t)).ln() - ln_gamma(k as f64 + 1.0) + dens.ln()
        } else {
            f64::NEG_INFINITY
        };
        logs.push(l);
    }
    normalise_logs(&logs)
}

pub(crate) fn normalise_logs(logs: &[f64]) -> Result<Vec<f64>> {
    let best = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !best.is_finite() {
        return Err(GbesqError::NonConvergence(
            "all mixture numerators vanished".into(),
        ));
    }
    let w: Vec<f64> = logs.iter().map(|l| (l - best).exp()).collect();
    let s: f64 = w.iter().sum();
    Ok(w.into_iter().map(|v| v / s).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{Continuous, Gamma};

    #[test]
    fn zero_start_is_degenerate() {
        let m = mixture_coeffs(&PiecewiseFn::constant(2.0), 0.0, 1.0, 1.0, 100, 1e-12).unwrap();
        assert_eq!(m.coefficients(), &[1.0]);
    }

    #[test]
    fn zero_end_is_rejected() {
        assert!(mixture_coeffs(&PiecewiseFn::constant(2.0), 1.0, 0.0, 1.0, 100, 1e-12).is_err());
    }

    #[test]
    fn constant_dimension_matches_gamma_numerators() {
        let (d, x, y, t) = (2.0, 1.0, 1.0, 1.0);
        let m = mixture_coeffs(&PiecewiseFn::constant(d), x, y, t, 200, 1e-14).unwrap();
        let n = m.coefficients().len();
        let logs: Vec<f64> = (0..n)
            .map(|k| {
                let g = Gamma::new(d / 2.0 + k as f64, 1.0 / (2.0 * t)).unwrap();
                k as f64 * (x / (2.0 * t)).ln() - ln_gamma(k as f64 + 1.0) + g.pdf(y).ln()
            })
            .collect();
        let brute = normalise_logs(&logs).unwrap();
        for (a, b) in m.coefficients().iter().zip(&brute) {
            assert!((a - b).abs() < 1e-12);
        }
        // The same numerators through the inversion route.
        let inv = mixture_by_inversion(
            &PiecewiseFn::constant(d),
            x,
            y,
            t,
            n - 1,
            EulerParams::PRECISE,
        )
        .unwrap();
        for (a, b) in inv.iter().zip(&brute) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn bessel_parameter_scales_with_horizon() {
        // With t = 2 the weights follow √(xy)/t, not √(xy).
        let (d, x, y, t) = (3.0, 1.5, 2.0, 2.0);
        let inv =
            mixture_by_inversion(&PiecewiseFn::constant(d), x, y, t, 12, EulerParams::PRECISE)
                .unwrap();
        let (scaled, _) = bessel_weights(d / 2.0 - 1.0, (x * y).sqrt() / t).unwrap();
        let (plain, _) = bessel_weights(d / 2.0 - 1.0, (x * y).sqrt()).unwrap();
        let err = |w: &[f64]| {
            inv.iter()
                .zip(w)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        assert!(err(&scaled) < 1e-6);
        assert!(err(&plain) > 1e-2);
    }

    #[test]
    fn bessel_weights_sum_to_one() {
        for &(nu, z) in &[(-1.0, 0.5), (0.0, 1.0), (2.5, 30.0), (-0.5, 400.0)] {
            let (w, rest) = bessel_weights(nu, z).unwrap();
            let s: f64 = w.iter().sum::<f64>() + rest;
            assert!((s - 1.0).abs() < 1e-12);
        }
        let (w, _) = bessel_weights(-1.0, 2.0).unwrap();
        assert_eq!(w[0], 0.0);
    }

    #[test]
    fn piecewise_dimension_is_dominated() {
        let delta = PiecewiseFn::step(vec![0.0, 0.4], vec![1.0, 3.0]).unwrap();
        let m = mixture_coeffs(&delta, 1.2, 0.8, 0.9, 200, 1e-10).unwrap();
        let s: f64 = m.coefficients().iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(m.tail_bound() <= 1e-10);
        let (dom, _) = bessel_weights(m.nu(), m.z_dom()).unwrap();
        for f in [|k: usize| k as f64, |k: usize| (k * k) as f64] {
            let lhs = m.expect(f);
            let rhs: f64 = dom.iter().enumerate().map(|(k, w)| w * f(k)).sum();
            assert!(lhs <= rhs + 1e-12, "{lhs} > {rhs}");
        }
    }

    #[test]
    fn truncation_budget_enforced() {
        assert!(matches!(
            mixture_coeffs(&PiecewiseFn::constant(2.0), 400.0, 400.0, 1.0, 10, 1e-12),
            Err(GbesqError::Truncation(_))
        ));
    }
}
