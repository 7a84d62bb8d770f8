//! Laplace transforms of GBESQ marginals and additive functionals.
//!
//! All transforms are evaluated through the propagator sweeps, so they are
//! exact for piecewise-constant dimensions and measures. The driftless ones
//! are generic over [`Scalar`] and can be evaluated on a complex contour.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{param, GbesqError, Result};
use crate::inversion::{euler_sum, EulerParams, Hint, LaplaceTransform};
use crate::mixture::BridgeMixture;
use crate::propagator::{backward_sweep, segments, sweep_iter, Boundary, Seg, SweepStart};
use crate::quad;
use crate::scalar::Scalar;
use crate::time::{Interp, PiecewiseFn, RadonMeasure};

/// A GBESQ law: dimension `δ`, optional drift `β`, starting point `x0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecRepr", into = "SpecRepr")]
pub struct GbesqSpec {
    delta: PiecewiseFn,
    beta: Option<PiecewiseFn>,
    x0: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecRepr {
    delta: PiecewiseFn,
    #[serde(default)]
    beta: Option<PiecewiseFn>,
    x0: f64,
}

impl TryFrom<SpecRepr> for GbesqSpec {
    type Error = GbesqError;
    fn try_from(r: SpecRepr) -> Result<Self> {
        GbesqSpec::new(r.delta, r.beta, r.x0)
    }
}

impl From<GbesqSpec> for SpecRepr {
    fn from(s: GbesqSpec) -> Self {
        SpecRepr {
            delta: s.delta,
            beta: s.beta,
            x0: s.x0,
        }
    }
}

impl GbesqSpec {
    pub fn new(delta: PiecewiseFn, beta: Option<PiecewiseFn>, x0: f64) -> Result<Self> {
        if !(x0 >= 0.0 && x0.is_finite()) {
            return Err(param(
                "x0",
                format!("{x0} is not a finite nonnegative value"),
            ));
        }
        if delta.mode() != Interp::Step {
            return Err(GbesqError::InvalidFunction(
                "dimension must be piecewise constant".into(),
            ));
        }
        if !delta.is_nonnegative() {
            return Err(GbesqError::InvalidFunction("negative dimension".into()));
        }
        if let Some(b) = &beta {
            check_drift(b)?;
        }
        Ok(Self { delta, beta, x0 })
    }

    pub fn driftless(delta: PiecewiseFn, x0: f64) -> Result<Self> {
        Self::new(delta, None, x0)
    }

    /// Constant dimension, no drift.
    pub fn constant(delta: f64, x0: f64) -> Result<Self> {
        Self::new(PiecewiseFn::constant(delta), None, x0)
    }

    pub fn delta(&self) -> &PiecewiseFn {
        &self.delta
    }

    pub fn beta(&self) -> Option<&PiecewiseFn> {
        self.beta.as_ref()
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn with_x0(&self, x0: f64) -> Result<Self> {
        Self::new(self.delta.clone(), self.beta.clone(), x0)
    }

    /// The law of `X_{s+·}` given `X_s = x`.
    pub fn shifted(&self, s: f64, x: f64) -> Result<Self> {
        Self::new(
            self.delta.shift(s),
            self.beta.as_ref().map(|b| b.shift(s)),
            x,
        )
    }

    /// True when a drift is present and not identically zero.
    pub fn has_drift(&self) -> bool {
        self.beta
            .as_ref()
            .is_some_and(|b| b.values().iter().any(|&v| v != 0.0))
    }

    pub fn require_driftless(&self) -> Result<()> {
        if self.has_drift() {
            Err(GbesqError::InvalidDrift(
                "this operation is defined for the driftless process".into(),
            ))
        } else {
            Ok(())
        }
    }

    /// `x0 = 0` and `δ ≡ 0` on `[0, t]`: the process never leaves zero.
    pub fn is_trivial_on(&self, t: f64) -> bool {
        self.x0 == 0.0 && self.delta.max_on(0.0, t) == 0.0
    }
}

fn check_drift(b: &PiecewiseFn) -> Result<()> {
    let knots = b.knots();
    for (i, &k) in knots.iter().enumerate() {
        let v = b.eval(k);
        if v < 0.0 {
            return Err(GbesqError::InvalidDrift(format!("β({k}) = {v} < 0")));
        }
        let slope = b.slope(k);
        let right = knots.get(i + 1).map_or(v, |&n| b.eval(n));
        // On a linear piece β′ + β² is smallest where β is smallest, which is
        // at one of the two ends because β ≥ 0.
        if slope + v.min(right).powi(2) < -1e-14 {
            return Err(GbesqError::InvalidDrift(format!(
                "β′ + β² < 0 on the piece starting at {k}"
            )));
        }
    }
    Ok(())
}

/// Pieces of a step function restricted to `[0, t]`: `(start, end, value)`.
pub(crate) fn step_pieces(f: &PiecewiseFn, t: f64) -> Vec<(f64, f64, f64)> {
    f.pieces(0.0, t)
        .into_iter()
        .map(|p| (p.0, p.1, p.2))
        .collect()
}

fn check_horizon(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(param("t", format!("{t} must be positive and finite")))
    }
}

/// `E[e^{−λX_t}]` in product form.
///
/// Accepts complex `λ` with `Re λ > −1/(2t)`; every factor `1 + 2λ(t − τ)`
/// then lies in the right half-plane, so principal logarithms are continuous.
pub fn transition_laplace<S: Scalar>(spec: &GbesqSpec, t: f64, lambda: S) -> Result<S> {
    spec.require_driftless()?;
    check_horizon(t)?;
    if !(lambda.re() > -0.5 / t) || !lambda.is_finite() {
        return Err(GbesqError::OutsideDomain(lambda.re()));
    }
    Ok(transition_log(spec.delta(), spec.x0, t, lambda).exp())
}

pub(crate) fn transition_log<S: Scalar>(delta: &PiecewiseFn, x: f64, t: f64, lambda: S) -> S {
    let two_l = lambda * 2.0;
    let mut log = -(lambda * x) / (two_l * t + 1.0);
    for (s, e, d) in step_pieces(delta, t) {
        if d != 0.0 {
            let num = (two_l * (t - e) + 1.0).ln();
            let den = (two_l * (t - s) + 1.0).ln();
            log += (num - den) * (0.5 * d);
        }
    }
    log
}

/// `E[e^{−λX_t}]` from the integral form, by quadrature. An independent
/// check of [`transition_laplace`].
pub fn transition_laplace_integral(spec: &GbesqSpec, t: f64, lambda: f64) -> Result<f64> {
    spec.require_driftless()?;
    check_horizon(t)?;
    if !(lambda >= 0.0) {
        return Err(GbesqError::OutsideDomain(lambda));
    }
    let mut integral = 0.0;
    for (s, e, d) in step_pieces(spec.delta(), t) {
        integral += quad::integrate(|u| lambda * d / (1.0 + 2.0 * lambda * (t - u)), s, e, 1e-16);
    }
    Ok((-lambda * spec.x0 / (1.0 + 2.0 * lambda * t) - integral).exp())
}

/// `P[X_t = 0]`.
pub fn transition_atom(spec: &GbesqSpec, t: f64) -> Result<f64> {
    spec.require_driftless()?;
    check_horizon(t)?;
    let pieces = step_pieces(spec.delta(), t);
    let (_, _, last) = *pieces.last().expect("at least one piece");
    if last > 0.0 {
        return Ok(0.0);
    }
    let mut log = -spec.x0 / (2.0 * t);
    for (s, e, d) in &pieces[..pieces.len() - 1] {
        if *d > 0.0 {
            log += 0.5 * d * ((t - e) / (t - s)).ln();
        }
    }
    Ok(log.exp())
}

/// Options for [`functional_laplace_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionalOptions {
    pub boundary: Boundary,
    /// Longest sub-piece over which a linear drift is frozen.
    pub max_drift_substep: f64,
}

impl Default for FunctionalOptions {
    fn default() -> Self {
        Self {
            boundary: Boundary::RightNeumann,
            max_drift_substep: 1e-3,
        }
    }
}

/// `E[exp(−∫X dμ)]`.
pub fn functional_laplace(spec: &GbesqSpec, mu: &RadonMeasure) -> Result<f64> {
    functional_laplace_with(spec, mu, FunctionalOptions::default())
}

pub fn functional_laplace_with(
    spec: &GbesqSpec,
    mu: &RadonMeasure,
    opts: FunctionalOptions,
) -> Result<f64> {
    let a = mu.horizon();
    if mu.is_zero() {
        return Ok(1.0);
    }
    let cuts: Vec<f64> = spec.delta.knots_between(0.0, a).collect();
    let (q0, marks) = match spec.beta.as_ref().filter(|_| spec.has_drift()) {
        None => {
            if opts.boundary != Boundary::RightNeumann {
                let d = crate::propagator::decaying_solution(mu, a, opts.boundary)?;
                let marks: Vec<(f64, f64)> = d
                    .times
                    .iter()
                    .zip(&d.phi)
                    .map(|(&t, &p)| (t, p.ln() - d.phi.last().unwrap().ln()))
                    .collect();
                return Ok(assemble(spec, d.dphi0(), &marks, a));
            }
            let segs = segments::<f64>(mu, 1.0, 0.0, a, &cuts);
            let mut marks = vec![(a, 0.0)];
            let end = backward_sweep(&segs, SweepStart::Ratio(0.0), |pos, st| {
                marks.push((pos, st.log))
            })
            .expect("nonempty");
            (-end.c, marks)
        }
        Some(beta) => crate::propagator::drifted_decaying(
            mu,
            beta,
            a,
            &cuts,
            opts.boundary,
            opts.max_drift_substep,
        )?,
    };
    Ok(assemble(spec, q0, &marks, a))
}

/// `exp{x·q(0)/2 + ½Σ δ_i [log Φ]_{τ_i}^{τ_{i+1}}}` from `q(0) = Φ′(0)/Φ(0)`
/// and marks `(position, log Φ(position) − log Φ(a))`.
fn assemble(spec: &GbesqSpec, q0: f64, marks: &[(f64, f64)], a: f64) -> f64 {
    let log_at = |p: f64| -> f64 {
        marks
            .iter()
            .find(|m| m.0 == p)
            .map(|m| m.1)
            .expect("every dimension knot is a sweep boundary")
    };
    let mut log = 0.5 * spec.x0 * q0;
    for (s, e, d) in step_pieces(&spec.delta, a) {
        if d != 0.0 {
            log += 0.5 * d * (log_at(e) - log_at(s));
        }
    }
    log.exp()
}

/// `E[exp(−α∫X dμ)]` for complex `α`, driftless case.
pub fn functional_laplace_scaled<S: Scalar>(
    spec: &GbesqSpec,
    mu: &RadonMeasure,
    alpha: S,
) -> Result<S> {
    spec.require_driftless()?;
    let a = mu.horizon();
    let cuts: Vec<f64> = spec.delta.knots_between(0.0, a).collect();
    let segs = segments(mu, alpha, 0.0, a, &cuts);
    let mut marks: Vec<(f64, S)> = vec![(a, S::from(0.0))];
    let end = backward_sweep(&segs, SweepStart::Ratio(S::from(0.0)), |pos, st| {
        marks.push((pos, st.log))
    })
    .expect("nonempty");
    let log_at = |p: f64| marks.iter().find(|m| m.0 == p).map(|m| m.1).unwrap();
    let mut log = end.c * (-0.5 * spec.x0);
    for (s, e, d) in step_pieces(&spec.delta, a) {
        if d != 0.0 {
            log += (log_at(e) - log_at(s)) * (0.5 * d);
        }
    }
    Ok(log.exp())
}

/// True when the bridge transform from `x` to `y` over `[0, t]` has the
/// closed mixture form: the dimension is constant on `[0, t]` or the bridge
/// ends at zero. Otherwise it is computed by inverting the joint transform of
/// `(∫X dμ, X_t)` in its second argument.
pub fn bridge_has_mixture_form(delta: &PiecewiseFn, y: f64, t: f64) -> bool {
    y == 0.0 || delta.min_on(0.0, t) == delta.max_on(0.0, t)
}

/// Conditional transform `α ↦ E[exp(−α∫X dμ) | X_0 = x, X_t = y]`.
///
/// With `y = 0` this is the bridge to zero and the mixture is irrelevant.
/// When the dimension varies on `[0, t]` and `y > 0` the mixture is not used
/// either: conditionally on the number of surviving clusters the bridge from
/// zero to `y` is no longer exponential in `y`, so the transform is taken as
/// a ratio of two numerical inversions in the terminal variable.
#[derive(Debug, Clone)]
pub struct BridgeTransform {
    t: f64,
    x: f64,
    y: f64,
    /// `(start, end, δ)` on `[0, t]`.
    delta: Vec<(f64, f64, f64)>,
    segs: Vec<Seg<f64>>,
    route: Route,
    atom: f64,
}

#[derive(Debug, Clone)]
enum Route {
    /// Mixture weights `b(n)`.
    Mixture(Vec<f64>),
    /// Transition density at `y`, the normaliser of the inverted joint
    /// transform.
    Joint { density: f64, params: EulerParams },
}

impl BridgeTransform {
    pub fn new(
        delta: &PiecewiseFn,
        x: f64,
        y: f64,
        t: f64,
        mu: &RadonMeasure,
        mix: &BridgeMixture,
    ) -> Result<Self> {
        check_horizon(t)?;
        if !(x >= 0.0 && y >= 0.0) {
            return Err(param("endpoints", "must be nonnegative"));
        }
        if mu.support_end() > t * (1.0 + 1e-14) {
            return Err(GbesqError::InvalidMeasure(format!(
                "support extends past the bridge horizon {t}"
            )));
        }
        if delta.mode() != Interp::Step || !delta.is_nonnegative() {
            return Err(GbesqError::InvalidFunction(
                "dimension must be a nonnegative step function".into(),
            ));
        }
        let cuts: Vec<f64> = delta.knots_between(0.0, t).collect();
        let mut out = Self {
            t,
            x,
            y,
            delta: step_pieces(delta, t),
            segs: segments::<f64>(mu, 1.0, 0.0, t, &cuts),
            route: Route::Mixture(vec![1.0]),
            atom: 0.0,
        };
        if !bridge_has_mixture_form(delta, y, t) {
            let params = EulerParams::PRECISE;
            let density = euler_sum(|l| out.joint(Complex64::new(0.0, 0.0), l).re, y, params);
            if !(density > 0.0 && density.is_finite()) {
                return Err(GbesqError::NonConvergence(format!(
                    "transition density at {y} is {density}"
                )));
            }
            out.route = Route::Joint { density, params };
        } else if x > 0.0 && y > 0.0 {
            out.route = Route::Mixture(mix.coefficients().to_vec());
        }
        // Mass at zero, read off the transform far out on the real axis.
        let far = out.eval_at(1e30f64);
        out.atom = if far > 1e-12 { far.min(1.0) } else { 0.0 };
        Ok(out)
    }

    /// `E_x[exp(−α∫X dμ − λX_t)]` over `[0, t]`.
    fn joint(&self, alpha: Complex64, lambda: Complex64) -> Complex64 {
        let zero = Complex64::new(0.0, 0.0);
        let scaled = self.segs.iter().rev().map(|s| match *s {
            Seg::Dens { start, end, m } => Seg::Dens {
                start,
                end,
                m: if m == 0.0 { zero } else { alpha * m },
            },
            Seg::Atom { at, w } => Seg::Atom { at, w: alpha * w },
        });
        let mut marks: Vec<(f64, Complex64)> = Vec::with_capacity(self.delta.len() + 1);
        marks.push((self.t, zero));
        let n_inner = self.delta.len() - 1;
        let end = sweep_iter(scaled, SweepStart::Ratio(lambda * 2.0), |pos, st| {
            if n_inner > 0 && self.delta[1..].iter().any(|d| d.0 == pos) {
                marks.push((pos, st.log));
            }
        })
        .expect("positive horizon");
        marks.push((0.0, end.log));
        let log_at = |p: f64| {
            marks
                .iter()
                .rev()
                .find(|m| m.0 == p)
                .map(|m| m.1)
                .expect("knot visited")
        };
        let mut log = end.c * (-0.5 * self.x);
        for &(s, e, d) in &self.delta {
            if d != 0.0 {
                log += (log_at(e) - log_at(s)) * (0.5 * d);
            }
        }
        log.exp()
    }

    pub fn eval_at<S: Scalar>(&self, alpha: S) -> S {
        match &self.route {
            Route::Mixture(mix) => self.mixture_eval(alpha, mix),
            Route::Joint { density, params } => {
                let a = alpha.to_complex();
                let v = if a.im == 0.0 {
                    euler_sum(
                        |l| Complex64::new(self.joint(a, l).re, 0.0),
                        self.y,
                        *params,
                    )
                } else {
                    euler_sum(
                        |l| (self.joint(a, l) + self.joint(a, l.conj())) * 0.5,
                        self.y,
                        *params,
                    )
                };
                S::from_complex(v / *density)
            }
        }
    }

    fn mixture_eval<S: Scalar>(&self, alpha: S, mix: &[f64]) -> S {
        let t = self.t;
        let scaled = self.segs.iter().map(|s| match *s {
            Seg::Dens { start, end, m } => Seg::Dens {
                start,
                end,
                m: if m == 0.0 { S::from(0.0) } else { alpha * m },
            },
            Seg::Atom { at, w } => Seg::Atom { at, w: alpha * w },
        });
        // g(u) = ln(ψ_u(t)/(t − u)) at the interior dimension knots.
        let mut knot_logs: Vec<(f64, S)> = Vec::with_capacity(self.delta.len());
        let n_inner = self.delta.len() - 1;
        let end = sweep_iter(scaled.clone().rev(), SweepStart::Psi, |pos, st| {
            if n_inner > 0 && self.delta[1..].iter().any(|d| d.0 == pos) {
                knot_logs.push((pos, st.log - (t - pos).ln()));
            }
        })
        .expect("positive horizon");
        let g0 = end.log - t.ln();
        let g = |p: f64| -> S {
            if p == 0.0 {
                g0
            } else if p == t {
                S::from(0.0)
            } else {
                knot_logs
                    .iter()
                    .find(|k| k.0 == p)
                    .map(|k| k.1)
                    .expect("dimension knot visited")
            }
        };
        let mut log = S::from(0.0);
        for &(s, e, d) in &self.delta {
            if d != 0.0 {
                log += (g(e) - g(s)) * (0.5 * d);
            }
        }
        if self.x > 0.0 {
            log += (-end.c + 1.0 / t) * (0.5 * self.x);
        }
        if self.y > 0.0 {
            let rev = sweep_iter(scaled, SweepStart::Psi, |_, _| {}).expect("positive horizon");
            log += (-rev.c + 1.0 / t) * (0.5 * self.y);
        }
        let value = log.exp();
        if mix.len() == 1 {
            return value * mix[0];
        }
        // (t/ψ)^2 = e^{−2 g0}
        let w = (g0 * -2.0).exp();
        let mut acc = S::from(0.0);
        for &b in mix.iter().rev() {
            acc = acc * w + b;
        }
        value * acc
    }

    /// `−d/dα` at zero by a centred difference: the conditional mean of the
    /// integral.
    pub fn mean(&self) -> f64 {
        // Second-order one-sided difference: α must stay nonnegative.
        let h = 1e-4 / (1.0 + self.scale_hint());
        (3.0 - 4.0 * self.eval_at(h) + self.eval_at(2.0 * h)) / (2.0 * h)
    }

    /// Rough magnitude of the integral, used to pick difference steps.
    fn scale_hint(&self) -> f64 {
        let mass: f64 = self
            .segs
            .iter()
            .map(|s| match *s {
                Seg::Dens { start, end, m } => m * (end - start),
                Seg::Atom { w, .. } => w,
            })
            .sum();
        let level =
            self.x.max(self.y) + self.delta.iter().map(|d| d.2).fold(0.0, f64::max) * self.t;
        mass * level.max(1e-3)
    }

    /// Mass of the conditional law at zero.
    pub fn atom_at_zero(&self) -> f64 {
        self.atom
    }
}

impl LaplaceTransform for BridgeTransform {
    fn eval(&self, s: Complex64) -> Complex64 {
        self.eval_at(s)
    }
    fn eval_real(&self, s: f64) -> f64 {
        self.eval_at(s)
    }
    fn hint(&self) -> Hint {
        let a = self.atom_at_zero();
        if a >= 1.0 - 1e-12 {
            Hint::Degenerate(0.0)
        } else if a > 0.0 {
            Hint::AtomAtZero(a)
        } else {
            Hint::Continuous
        }
    }
}

/// Bridge-to-zero transform `E[exp(−∫X dμ) | X_0 = x, X_t = 0]`.
pub fn bridge_zero_laplace(delta: &PiecewiseFn, x: f64, t: f64, mu: &RadonMeasure) -> Result<f64> {
    Ok(BridgeTransform::new(delta, x, 0.0, t, mu, &BridgeMixture::degenerate())?.eval_at(1.0))
}

/// Full bridge transform `E[exp(−∫X dμ) | X_0 = x, X_t = y]`.
pub fn bridge_laplace(
    delta: &PiecewiseFn,
    x: f64,
    y: f64,
    t: f64,
    mu: &RadonMeasure,
    mix: &BridgeMixture,
) -> Result<f64> {
    Ok(BridgeTransform::new(delta, x, y, t, mu, mix)?.eval_at(1.0))
}

/// Path data needed to reweight a driftless sample into the drifted law.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GirsanovPath {
    pub t: f64,
    pub x0: f64,
    pub xt: Option<f64>,
    /// `∫₀ᵗ (β′_s + β_s²) X_s ds` along the path.
    pub drift_integral: Option<f64>,
}

/// Log of the density of the drifted law with respect to the driftless one.
pub fn girsanov_log_weight(spec: &GbesqSpec, path: &GirsanovPath) -> Result<f64> {
    let Some(beta) = spec.beta.as_ref().filter(|_| spec.has_drift()) else {
        return Ok(0.0);
    };
    let xt = path
        .xt
        .ok_or(GbesqError::MissingPathData("terminal value"))?;
    let drift_int = path
        .drift_integral
        .ok_or(GbesqError::MissingPathData("∫(β′+β²)X ds"))?;
    let bd = beta.integral_product(&spec.delta, 0.0, path.t);
    Ok(0.5 * (beta.eval(path.t) * xt - beta.eval(0.0) * path.x0 - bd - drift_int))
}

/// The law of `(1/c)·X_{c·}`.
pub fn scaling_image(spec: &GbesqSpec, c: f64) -> Result<GbesqSpec> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(param("c", "must be positive"));
    }
    GbesqSpec::new(
        spec.delta.time_scale(c),
        spec.beta.as_ref().map(|b| b.time_scale(c).scale(c)),
        spec.x0 / c,
    )
}

/// The transition transform as an inversion target.
#[derive(Debug, Clone)]
pub struct TransitionTransform {
    delta: PiecewiseFn,
    x: f64,
    t: f64,
    /// Extra Gamma factor `(1 + 2λt)^{−n}`.
    extra_shape: f64,
    atom: f64,
}

impl TransitionTransform {
    pub fn new(spec: &GbesqSpec, t: f64) -> Result<Self> {
        let atom = transition_atom(spec, t)?;
        Ok(Self {
            delta: spec.delta.clone(),
            x: spec.x0,
            t,
            extra_shape: 0.0,
            atom,
        })
    }

    /// The `x = 0` transform multiplied by `(1 + 2λt)^{−n}`: the numerator
    /// law of the `n`-th mixture term.
    pub fn mixture_term(delta: &PiecewiseFn, t: f64, n: usize) -> Result<Self> {
        let spec = GbesqSpec::driftless(delta.clone(), 0.0)?;
        let atom = if n == 0 {
            transition_atom(&spec, t)?
        } else {
            0.0
        };
        Ok(Self {
            delta: delta.clone(),
            x: 0.0,
            t,
            extra_shape: n as f64,
            atom,
        })
    }

    fn log_at<S: Scalar>(&self, lambda: S) -> S {
        let mut l = transition_log(&self.delta, self.x, self.t, lambda);
        if self.extra_shape > 0.0 {
            l += (lambda * (2.0 * self.t) + 1.0).ln() * (-self.extra_shape);
        }
        l
    }
}

impl LaplaceTransform for TransitionTransform {
    fn eval(&self, s: Complex64) -> Complex64 {
        self.log_at(s).exp()
    }
    fn eval_real(&self, s: f64) -> f64 {
        self.log_at(s).exp()
    }
    fn hint(&self) -> Hint {
        if self.atom >= 1.0 {
            Hint::Degenerate(0.0)
        } else if self.atom > 0.0 {
            Hint::AtomAtZero(self.atom)
        } else {
            Hint::Continuous
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
    }

    fn piecewise(d0: f64, d1: f64, at: f64) -> PiecewiseFn {
        PiecewiseFn::step(vec![0.0, at], vec![d0, d1]).unwrap()
    }

    #[test]
    fn one_dimensional_transform_from_zero() {
        let s = GbesqSpec::constant(1.0, 0.0).unwrap();
        assert!(close(
            transition_laplace(&s, 1.0, 0.5).unwrap(),
            1.0 / 2f64.sqrt(),
            1e-15
        ));
    }

    #[test]
    fn zero_dimension_transform() {
        let s = GbesqSpec::constant(0.0, 1.0).unwrap();
        for &l in &[0.1, 1.0, 7.0] {
            let want = (-l / (1.0 + 2.0 * l * 0.8)).exp();
            assert!(close(transition_laplace(&s, 0.8, l).unwrap(), want, 1e-15));
        }
        assert_eq!(transition_laplace(&s, 0.8, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn product_form_equals_integral_form() {
        let s = GbesqSpec::driftless(piecewise(1.0, 2.0, 0.5), 1.0).unwrap();
        for &l in &[0.01, 0.3, 2.0, 40.0] {
            let a = transition_laplace(&s, 1.3, l).unwrap();
            let b = transition_laplace_integral(&s, 1.3, l).unwrap();
            assert!(close(a, b, 1e-13), "{a} {b}");
        }
    }

    #[test]
    fn outside_domain_rejected() {
        let s = GbesqSpec::constant(1.0, 0.0).unwrap();
        assert!(matches!(
            transition_laplace(&s, 1.0, -0.6),
            Err(GbesqError::OutsideDomain(_))
        ));
    }

    #[test]
    fn dirac_functional_matches_transition() {
        let s = GbesqSpec::driftless(piecewise(1.0, 2.0, 0.5), 0.7).unwrap();
        for &l in &[0.05, 0.5, 3.0] {
            let mu = RadonMeasure::dirac(1.2, l).unwrap();
            let a = functional_laplace(&s, &mu).unwrap();
            let b = transition_laplace(&s, 1.2, l).unwrap();
            assert!(close(a, b, 1e-13));
        }
    }

    #[test]
    fn lebesgue_functional_closed_form() {
        let (alpha, t, d, x) = (0.5f64, 1.0, 3.0, 0.4);
        let k = (2.0 * alpha).sqrt();
        let s = GbesqSpec::constant(d, x).unwrap();
        let mu = RadonMeasure::lebesgue(alpha, t).unwrap();
        let want = (k * t).cosh().powf(-d / 2.0) * (-(x / 2.0) * k * (k * t).tanh()).exp();
        assert!(close(functional_laplace(&s, &mu).unwrap(), want, 1e-14));
        let c = functional_laplace_scaled(&s, &mu, Complex64::new(1.0, 0.0)).unwrap();
        assert!(close(c.re, want, 1e-14) && c.im.abs() < 1e-15);
    }

    #[test]
    fn joint_inversion_route_matches_mixture_route() {
        // A jump of 1e-12 forces the inversion route with a law that is
        // indistinguishable from the constant one.
        let (x, y, t) = (0.8, 1.3, 0.7);
        let flat = PiecewiseFn::constant(1.5);
        let nudged = piecewise(1.5, 1.5 + 1e-12, 0.3);
        assert!(bridge_has_mixture_form(&flat, y, t));
        assert!(!bridge_has_mixture_form(&nudged, y, t));
        let mu = RadonMeasure::new(vec![(0.5, 0.4)], PiecewiseFn::constant(0.6), t).unwrap();
        let mix = crate::mixture::mixture_coeffs(&flat, x, y, t, 2000, 1e-15).unwrap();
        let a = BridgeTransform::new(&flat, x, y, t, &mu, &mix).unwrap();
        let b = BridgeTransform::new(&nudged, x, y, t, &mu, &BridgeMixture::degenerate()).unwrap();
        for alpha in [0.0, 0.3, 2.0, 9.0] {
            let (p, q): (f64, f64) = (a.eval_at(alpha), b.eval_at(alpha));
            assert!(close(p, q, 1e-8), "{alpha}: {p} {q}");
        }
        let s = Complex64::new(0.7, 2.5);
        assert!((a.eval_at(s) - b.eval_at(s)).norm() < 1e-8);
    }

    #[test]
    fn transition_atom_values() {
        let s = GbesqSpec::constant(0.0, 1.0).unwrap();
        assert!(close(
            transition_atom(&s, 2.0).unwrap(),
            (-0.25f64).exp(),
            1e-15
        ));
        let s = GbesqSpec::driftless(piecewise(1.0, 0.0, 0.5), 1.0).unwrap();
        let want = (-0.5f64).exp() * (0.5f64).sqrt();
        assert!(close(transition_atom(&s, 1.0).unwrap(), want, 1e-15));
        let s = GbesqSpec::driftless(piecewise(0.0, 1.0, 0.5), 1.0).unwrap();
        assert_eq!(transition_atom(&s, 1.0).unwrap(), 0.0);
        // The atom is the large-λ limit of the transform.
        let s = GbesqSpec::driftless(piecewise(1.0, 0.0, 0.5), 1.0).unwrap();
        let far = transition_laplace(&s, 1.0, 1e12).unwrap();
        assert!(close(far, transition_atom(&s, 1.0).unwrap(), 1e-6));
    }

    #[test]
    fn bridge_zero_lebesgue_closed_forms() {
        let (alpha, t) = (0.5f64, 1.0);
        let beta = (2.0 * alpha).sqrt() * t;
        let mu = RadonMeasure::lebesgue(alpha, t).unwrap();
        let a = bridge_zero_laplace(&PiecewiseFn::constant(0.0), 1.3, t, &mu).unwrap();
        let want = ((1.3 / (2.0 * t)) * (1.0 - beta / beta.tanh())).exp();
        assert!(close(a, want, 1e-13));
        let b = bridge_zero_laplace(&PiecewiseFn::constant(1.0), 0.0, t, &mu).unwrap();
        assert!(close(b, (beta / beta.sinh()).sqrt(), 1e-13));
    }

    #[test]
    fn bridge_zero_from_dirac_matches_brownian_bridge_argument() {
        // δ = 0: E[e^{−λX_s} | X_t = 0] = exp(−λx(1−s/t)²/(1+2λs(1−s/t))).
        let (x, s, t, l) = (1.7, 0.6, 1.5, 0.9);
        let mu = RadonMeasure::new(vec![(s, l)], PiecewiseFn::constant(0.0), t).unwrap();
        let got = bridge_zero_laplace(&PiecewiseFn::constant(0.0), x, t, &mu).unwrap();
        let r = 1.0 - s / t;
        let want = (-l * x * r * r / (1.0 + 2.0 * l * s * r)).exp();
        assert!(close(got, want, 1e-14), "{got} {want}");
    }

    #[test]
    fn bridge_transform_vanishes_at_zero_rate() {
        let mu = RadonMeasure::lebesgue(1.0, 1.0).unwrap();
        let mix = BridgeMixture::from_coefficients(vec![0.5, 0.3, 0.2], 0.0, 0.0, 0.0);
        let b = BridgeTransform::new(&piecewise(1.0, 3.0, 0.3), 1.0, 2.0, 1.0, &mu, &mix).unwrap();
        assert!((b.eval_at(0.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn girsanov_zero_for_no_drift() {
        let s = GbesqSpec::constant(1.0, 1.0).unwrap();
        assert_eq!(
            girsanov_log_weight(&s, &GirsanovPath::default()).unwrap(),
            0.0
        );
    }

    #[test]
    fn girsanov_requires_path_data() {
        let s = GbesqSpec::new(
            PiecewiseFn::constant(1.0),
            Some(PiecewiseFn::constant(0.2)),
            1.0,
        )
        .unwrap();
        let p = GirsanovPath {
            t: 1.0,
            x0: 1.0,
            xt: Some(1.0),
            drift_integral: None,
        };
        assert!(matches!(
            girsanov_log_weight(&s, &p),
            Err(GbesqError::MissingPathData(_))
        ));
    }

    #[test]
    fn drifted_dirac_matches_square_root_closed_form() {
        let (b, d, x, t) = (0.3f64, 1.5, 0.8, 1.2);
        let s =
            GbesqSpec::new(PiecewiseFn::constant(d), Some(PiecewiseFn::constant(b)), x).unwrap();
        for &l in &[0.2, 1.0, 4.0] {
            let mu = RadonMeasure::dirac(t, l).unwrap();
            let g = 1.0 + l * ((2.0 * b * t).exp() - 1.0) / b;
            let want = g.powf(-d / 2.0) * (-x * l * (2.0 * b * t).exp() / g).exp();
            let got = functional_laplace(&s, &mu).unwrap();
            assert!(close(got, want, 1e-12), "{got} {want}");
        }
    }

    #[test]
    fn principal_boundary_disagrees_under_drift() {
        let s = GbesqSpec::new(
            PiecewiseFn::constant(1.0),
            Some(PiecewiseFn::constant(0.3)),
            0.8,
        )
        .unwrap();
        let mu = RadonMeasure::dirac(1.0, 1.0).unwrap();
        let neumann = functional_laplace(&s, &mu).unwrap();
        let principal = functional_laplace_with(
            &s,
            &mu,
            FunctionalOptions {
                boundary: Boundary::Principal,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((neumann - principal).abs() > 1e-3);
    }

    #[test]
    fn invalid_drift_rejected() {
        // β′ + β² < 0 on [0, 1).
        let b = PiecewiseFn::linear(vec![0.0, 1.0], vec![0.5, 0.0]).unwrap();
        assert!(matches!(
            GbesqSpec::new(PiecewiseFn::constant(1.0), Some(b), 1.0),
            Err(GbesqError::InvalidDrift(_))
        ));
    }

    #[test]
    fn scaling_identity() {
        let s = GbesqSpec::driftless(piecewise(1.0, 2.5, 0.4), 1.1).unwrap();
        for &c in &[0.3, 1.0, 2.7] {
            let img = scaling_image(&s, c).unwrap();
            for &l in &[0.0, 0.2, 1.5, 9.0] {
                let a = transition_laplace(&img, 0.9, l).unwrap();
                let b = transition_laplace(&s, c * 0.9, l / c).unwrap();
                assert!(close(a, b, 1e-13));
            }
        }
        assert_eq!(scaling_image(&s, 1.0).unwrap(), s);
    }

    #[test]
    fn spec_json_round_trip_and_validation() {
        let s: GbesqSpec = serde_json::from_str(
            r#"{"delta": {"knots": [0.0, 0.5], "values": [1.0, 2.0]}, "x0": 1.0}"#,
        )
        .unwrap();
        assert_eq!(s.delta().eval(0.7), 2.0);
        let back: GbesqSpec = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
        assert!(serde_json::from_str::<GbesqSpec>(r#"{"delta": 1.0, "x0": -1.0}"#).is_err());
        assert!(serde_json::from_str::<GbesqSpec>(r#"{"delta": -1.0, "x0": 1.0}"#).is_err());
        assert!(
            serde_json::from_str::<GbesqSpec>(r#"{"delta": 1.0, "x0": 1.0, "bogus": 2}"#).is_err()
        );
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn delta() -> impl Strategy<Value = PiecewiseFn> {
            prop::collection::vec(0.0f64..4.0, 1..4).prop_map(|v| {
                let n = v.len();
                let knots = (0..n).map(|i| i as f64 * 0.7 / n as f64).collect();
                PiecewiseFn::step(knots, v).unwrap()
            })
        }

        proptest! {
            #[test]
            fn transform_in_unit_interval_and_decreasing(d in delta(), x in 0.0f64..3.0, l in 0.0f64..20.0) {
                let s = GbesqSpec::driftless(d, x).unwrap();
                let a = transition_laplace(&s, 1.0, l).unwrap();
                let b = transition_laplace(&s, 1.0, l + 0.1).unwrap();
                prop_assert!(a > 0.0 && a <= 1.0);
                prop_assert!(b <= a);
            }

            #[test]
            fn additivity_in_start_and_dimension(d1 in delta(), d2 in delta(), x1 in 0.0f64..2.0, x2 in 0.0f64..2.0, l in 0.0f64..10.0) {
                let s1 = GbesqSpec::driftless(d1.clone(), x1).unwrap();
                let s2 = GbesqSpec::driftless(d2.clone(), x2).unwrap();
                let s = GbesqSpec::driftless(d1.add(&d2).unwrap(), x1 + x2).unwrap();
                let mu = RadonMeasure::new(vec![(0.9, l)], PiecewiseFn::step(vec![0.0, 0.3], vec![l, 0.5 * l]).unwrap(), 1.0).unwrap();
                let lhs = functional_laplace(&s, &mu).unwrap();
                let rhs = functional_laplace(&s1, &mu).unwrap() * functional_laplace(&s2, &mu).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300));
            }

            #[test]
            fn dirac_consistency(d in delta(), x in 0.0f64..3.0, l in 0.0f64..30.0, t in 0.1f64..3.0) {
                let s = GbesqSpec::driftless(d, x).unwrap();
                let mu = RadonMeasure::dirac(t, l.max(1e-9)).unwrap();
                let a = functional_laplace(&s, &mu).unwrap();
                let b = transition_laplace(&s, t, l.max(1e-9)).unwrap();
                prop_assert!((a - b).abs() <= 1e-10 * b);
            }
        }
    }
}
