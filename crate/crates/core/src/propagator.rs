//! State-transition matrices of the characteristic equation `h″ = 2hμ`.
//!
//! A solution is tracked through its state `(h, h′)` with `h′` the right
//! derivative. Over a piece where `μ` has constant density `m` the state
//! evolves by the hyperbolic matrix with `k = √(2m)`; an atom of weight `w`
//! makes the derivative jump by `2w·h`. Everything is exact.
//!
//! Two backward Riccati sweeps sit on top of the matrices. They carry the
//! ratio `c = −h′/h` (or `m11/m12` for the canonical second solution) and
//! accumulate `log h` piece by piece. That keeps every logarithm on the
//! branch obtained by continuation from real arguments, which the inversion
//! contour relies on.

use serde::{Deserialize, Serialize};

use crate::error::{GbesqError, Result};
use crate::scalar::{sinhc, Scalar};
use crate::time::{PiecewiseFn, RadonMeasure};

/// Above this value of `Re(kΔ)` the growing exponential is factored out.
const SCALE_SWITCH: f64 = 30.0;
/// Below this modulus of `kΔ` the sweeps use the unfactored hyperbolic form.
const DIRECT_SWITCH: f64 = 0.5;

/// A 2×2 transition matrix `e^{log_scale}·m` from time `from` to time `to`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Propagator<S: Scalar = f64> {
    m: [[S; 2]; 2],
    log_scale: f64,
    pub from: f64,
    pub to: f64,
}

impl<S: Scalar> Propagator<S> {
    pub fn identity(at: f64) -> Self {
        Self {
            m: [[S::from(1.0), S::from(0.0)], [S::from(0.0), S::from(1.0)]],
            log_scale: 0.0,
            from: at,
            to: at,
        }
    }

    /// Piece of constant density `m` (possibly complex) over `[from, to]`.
    pub fn density_piece(m: S, from: f64, to: f64) -> Result<Self> {
        if !(to >= from) {
            return Err(GbesqError::MismatchedEndpoints {
                left: from,
                right: to,
            });
        }
        if m.re() < 0.0 {
            return Err(crate::error::param("density", "must be nonnegative"));
        }
        let dt = to - from;
        if m.is_zero() {
            return Ok(Self {
                m: [[S::from(1.0), S::from(dt)], [S::from(0.0), S::from(1.0)]],
                log_scale: 0.0,
                from,
                to,
            });
        }
        let k2 = m * 2.0;
        let k = k2.sqrt();
        let z = k * dt;
        if z.re() > SCALE_SWITCH {
            let shift = z.re();
            let ep = (z - shift).exp();
            let em = (-z - shift).exp();
            let c = (ep + em) * 0.5;
            let s = (ep - em) * 0.5;
            Ok(Self {
                m: [[c, s / k], [k * s, c]],
                log_scale: shift,
                from,
                to,
            })
        } else {
            let c = z.cosh();
            let sc = sinhc(z) * dt;
            Ok(Self {
                m: [[c, sc], [k2 * sc, c]],
                log_scale: 0.0,
                from,
                to,
            })
        }
    }

    /// Piece of `h″ + 2βh′ = 2mh` with constant `β` and density `m`.
    ///
    /// Its determinant is `e^{−2βΔ}` rather than one.
    pub fn drifted_piece(beta: f64, m: S, from: f64, to: f64) -> Result<Self> {
        if !(to >= from) {
            return Err(GbesqError::MismatchedEndpoints {
                left: from,
                right: to,
            });
        }
        let dt = to - from;
        let w2 = m * 2.0 + beta * beta;
        let w = w2.sqrt();
        let z = w * dt;
        let (c, s, shift) = if z.re() > SCALE_SWITCH {
            let shift = z.re();
            let ep = (z - shift).exp();
            let em = (-z - shift).exp();
            ((ep + em) * 0.5, (ep - em) * 0.5 / w, shift)
        } else {
            (z.cosh(), sinhc(z) * dt, 0.0)
        };
        Ok(Self {
            m: [[c + s * beta, s], [m * 2.0 * s, c - s * beta]],
            log_scale: shift - beta * dt,
            from,
            to,
        })
    }

    /// Derivative jump `h′ ↦ h′ + 2w·h` at `at`.
    pub fn atom(w: S, at: f64) -> Result<Self> {
        if w.re() < 0.0 {
            return Err(crate::error::param("atom weight", "must be nonnegative"));
        }
        Ok(Self {
            m: [[S::from(1.0), S::from(0.0)], [w * 2.0, S::from(1.0)]],
            log_scale: 0.0,
            from: at,
            to: at,
        })
    }

    /// `next ∘ self`: first `self`, then `next`.
    pub fn then(&self, next: &Propagator<S>) -> Result<Propagator<S>> {
        let tol = 1e-12 * (1.0 + self.to.abs());
        if (self.to - next.from).abs() > tol {
            return Err(GbesqError::MismatchedEndpoints {
                left: self.to,
                right: next.from,
            });
        }
        let (p, q) = (&self.m, &next.m);
        let mut m = [[S::from(0.0); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                m[i][j] = q[i][0] * p[0][j] + q[i][1] * p[1][j];
            }
        }
        let mut out = Propagator {
            m,
            log_scale: self.log_scale + next.log_scale,
            from: self.from,
            to: next.to,
        };
        out.renormalize();
        Ok(out)
    }

    fn renormalize(&mut self) {
        let big = self.m.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
        if big > 1e64 || (big > 0.0 && big < 1e-64) {
            let l = big.ln();
            for v in self.m.iter_mut().flatten() {
                *v = *v / big;
            }
            self.log_scale += l;
        }
    }

    /// Entries with the scale folded back in (may overflow for huge pieces).
    pub fn entries(&self) -> [[S; 2]; 2] {
        let f = self.log_scale.exp();
        let mut m = self.m;
        for v in m.iter_mut().flatten() {
            *v = *v * f;
        }
        m
    }

    /// Entries divided by `e^{log_scale}`; ratios of entries are exact.
    pub fn scaled_entries(&self) -> ([[S; 2]; 2], f64) {
        (self.m, self.log_scale)
    }

    pub fn det(&self) -> S {
        let m = &self.m;
        (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * (2.0 * self.log_scale).exp()
    }

    /// `|det − 1|` relative to the size of the two products forming the
    /// determinant; this is what floating point can certify when the entries
    /// are large.
    pub fn det_defect(&self) -> f64 {
        let m = &self.m;
        let a = m[0][0] * m[1][1];
        let b = m[0][1] * m[1][0];
        let scale = (2.0 * self.log_scale).exp();
        ((a - b) * scale - 1.0).abs() / ((a.abs() + b.abs()) * scale)
    }

    /// Matrix of the same operator on the reversed measure `s ↦ v − s`.
    pub fn reversed(&self) -> Propagator<S> {
        let m = &self.m;
        Propagator {
            m: [[m[1][1], m[0][1]], [m[1][0], m[0][0]]],
            log_scale: self.log_scale,
            from: self.from,
            to: self.to,
        }
    }

    pub fn m11_over_m12(&self) -> S {
        self.m[0][0] / self.m[0][1]
    }

    pub fn m22_over_m12(&self) -> S {
        self.m[1][1] / self.m[0][1]
    }

    /// `ln m12`, evaluated only for real propagators.
    pub fn ln_m12(&self) -> S {
        self.m[0][1].ln() + self.log_scale
    }
}

/// One element of the ordered decomposition of a measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Seg<S> {
    /// Constant density over `[start, end]` (density may be zero).
    Dens {
        start: f64,
        end: f64,
        m: S,
    },
    Atom {
        at: f64,
        w: S,
    },
}

/// Decomposes `scale·μ` restricted to `(u, v]` into ordered segments, cutting
/// additionally at `cuts`.
pub(crate) fn segments<S: Scalar>(
    mu: &RadonMeasure,
    scale: S,
    u: f64,
    v: f64,
    cuts: &[f64],
) -> Vec<Seg<S>> {
    let mut pts: Vec<f64> = mu
        .breakpoints(v)
        .into_iter()
        .chain(cuts.iter().copied())
        .filter(|&p| p > u && p < v)
        .collect();
    pts.push(u);
    pts.push(v);
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    let atoms = mu.atoms();
    let mut out = Vec::with_capacity(2 * pts.len());
    for w in pts.windows(2) {
        let (s, e) = (w[0], w[1]);
        if e > s {
            let d = mu.density_at(0.5 * (s + e));
            let m = if d == 0.0 { S::from(0.0) } else { scale * d };
            out.push(Seg::Dens {
                start: s,
                end: e,
                m,
            });
        }
        let a: f64 = atoms.iter().filter(|a| a.0 == e).map(|a| a.1).sum();
        if a > 0.0 {
            out.push(Seg::Atom {
                at: e,
                w: scale * a,
            });
        }
    }
    out
}

/// Right-end condition of a backward sweep.
#[derive(Debug, Clone, Copy)]
pub(crate) enum SweepStart<S> {
    /// `h(v) = 0, h′(v) = 1`: yields the canonical second solution `ψ_u(v)`
    /// as a function of the left end `u`.
    Psi,
    /// `h′(v)/h(v) = −c`.
    Ratio(S),
}

/// Result of a backward sweep: `ln h(u) − ln h(v)` in the decaying case, or
/// `ln ψ_u(v)` in the canonical case, together with the ratio `c` at `u`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SweepState<S> {
    pub log: S,
    pub c: S,
}

/// Runs the backward Riccati sweep over `segs` (forward order) from the right
/// end. `visit(position, state)` is called after each density segment at its
/// left end, and after each atom with the state to its left.
pub(crate) fn backward_sweep<S: Scalar>(
    segs: &[Seg<S>],
    start: SweepStart<S>,
    visit: impl FnMut(f64, SweepState<S>),
) -> Option<SweepState<S>> {
    sweep_iter(segs.iter().rev().copied(), start, visit)
}

/// As [`backward_sweep`], over segments supplied right-to-left. Feeding the
/// segments left-to-right sweeps the reversed measure, whose final ratio is
/// `m22/m12` of the forward propagator.
pub(crate) fn sweep_iter<S: Scalar>(
    segs: impl Iterator<Item = Seg<S>>,
    start: SweepStart<S>,
    mut visit: impl FnMut(f64, SweepState<S>),
) -> Option<SweepState<S>> {
    let mut state: Option<SweepState<S>> = match start {
        SweepStart::Psi => None,
        SweepStart::Ratio(c) => Some(SweepState {
            log: S::from(0.0),
            c,
        }),
    };
    for seg in segs {
        match seg {
            Seg::Atom { at, w } => {
                if let Some(st) = state.as_mut() {
                    st.c += w * 2.0;
                    visit(at, *st);
                }
            }
            Seg::Dens { start, end, m } => {
                let next = step_back(state, m, end - start);
                state = Some(next);
                visit(start, next);
            }
        }
    }
    state
}

fn step_back<S: Scalar>(state: Option<SweepState<S>>, m: S, dt: f64) -> SweepState<S> {
    if m.is_zero() {
        return match state {
            None => SweepState {
                log: S::from(dt.ln()),
                c: S::from(1.0 / dt),
            },
            Some(st) => {
                let r = st.c * dt + 1.0;
                SweepState {
                    log: st.log + r.ln(),
                    c: st.c / r,
                }
            }
        };
    }
    let k2 = m * 2.0;
    let k = k2.sqrt();
    let z = k * dt;
    if z.abs() <= DIRECT_SWITCH {
        let ch = z.cosh();
        let sc = sinhc(z) * dt;
        match state {
            None => SweepState {
                log: sc.ln(),
                c: ch / sc,
            },
            Some(st) => {
                let r = ch + st.c * sc;
                SweepState {
                    log: st.log + r.ln(),
                    c: (st.c * ch + k2 * sc) / r,
                }
            }
        }
    } else {
        // cosh z = e^z·cs, sinh z = e^z·ss.
        let e2 = (-z * 2.0).exp();
        let cs = (e2 + 1.0) * 0.5;
        let ss = (-e2 + 1.0) * 0.5;
        match state {
            None => SweepState {
                log: z + (ss / k).ln(),
                c: k * cs / ss,
            },
            Some(st) => {
                let rho = st.c / k;
                let r = cs + rho * ss;
                SweepState {
                    log: st.log + z + r.ln(),
                    c: k * (rho * cs + ss) / r,
                }
            }
        }
    }
}

/// Ordered composition of the piece propagators of `μ` over `(u, v]`.
///
/// Atoms located exactly at `v` are included; atoms at `u` are not (the
/// state at `u` is taken with the right derivative).
pub fn full_propagator(mu: &RadonMeasure, u: f64, v: f64) -> Result<Propagator<f64>> {
    full_propagator_scaled(mu, 1.0, u, v)
}

/// Propagator of `scale·μ` over `(u, v]`, with a possibly complex scale.
pub fn full_propagator_scaled<S: Scalar>(
    mu: &RadonMeasure,
    scale: S,
    u: f64,
    v: f64,
) -> Result<Propagator<S>> {
    if !(0.0 <= u && u <= v) {
        return Err(GbesqError::OutOfRange {
            start: u,
            end: v,
            horizon: mu.horizon(),
        });
    }
    let mut p = Propagator::identity(u);
    for seg in segments(mu, scale, u, v, &[]) {
        let q = match seg {
            Seg::Dens { start, end, m } => Propagator::density_piece(m, start, end)?,
            Seg::Atom { at, w } => Propagator::atom(w, at)?,
        };
        p = p.then(&q)?;
    }
    Ok(p)
}

/// Right-end condition for the decaying solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// `Φ′(a⁺) = 0`: the solution extends constantly past the support.
    RightNeumann,
    /// The exponentially decaying mode of the last piece continued past `a`.
    Principal,
}

/// Values of the decaying solution at the breakpoints of `μ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayingSolution {
    pub times: Vec<f64>,
    pub phi: Vec<f64>,
    pub dphi_left: Vec<f64>,
    pub dphi_right: Vec<f64>,
    pub boundary: Boundary,
}

impl DecayingSolution {
    pub fn dphi0(&self) -> f64 {
        self.dphi_right[0]
    }

    /// `Φ` between breakpoints, by propagating from the nearest one on the left.
    pub fn eval(&self, mu: &RadonMeasure, s: f64) -> Result<f64> {
        let i = match self.times.binary_search_by(|t| t.partial_cmp(&s).unwrap()) {
            Ok(i) => return Ok(self.phi[i]),
            Err(0) => 0,
            Err(i) => i - 1,
        };
        let from = self.times[i];
        if s > *self.times.last().unwrap() {
            return Ok(*self.phi.last().unwrap());
        }
        let m = mu.density_at(0.5 * (from + s));
        let p = Propagator::density_piece(m, from, s)?.entries();
        Ok(p[0][0] * self.phi[i] + p[0][1] * self.dphi_right[i])
    }
}

/// Decaying solution of `h″ = 2hμ` on `[0, a]` with `Φ(0) = 1`.
pub fn decaying_solution(
    mu: &RadonMeasure,
    a: f64,
    boundary: Boundary,
) -> Result<DecayingSolution> {
    if mu.support_end() > a {
        return Err(GbesqError::InvalidMeasure(format!(
            "support extends past {a}"
        )));
    }
    let segs = segments::<f64>(mu, 1.0, 0.0, a, &[]);
    let c_end = match boundary {
        Boundary::RightNeumann => 0.0,
        Boundary::Principal => match segs.iter().rev().find(|s| matches!(s, Seg::Dens { .. })) {
            Some(Seg::Dens { m, .. }) => (2.0 * m).sqrt(),
            _ => 0.0,
        },
    };
    // (position, log Φ up to a constant, c to the left, c to the right)
    let mut rec: Vec<(f64, f64, f64, f64)> = vec![(a, 0.0, c_end, c_end)];
    backward_sweep(&segs, SweepStart::Ratio(c_end), |pos, st| {
        match rec.last_mut() {
            Some(last) if last.0 == pos => {
                last.1 = st.log;
                last.2 = st.c;
            }
            _ => rec.push((pos, st.log, st.c, st.c)),
        }
    });
    rec.reverse();
    let l0 = rec[0].1;
    let mut out = DecayingSolution {
        times: Vec::with_capacity(rec.len()),
        phi: Vec::with_capacity(rec.len()),
        dphi_left: Vec::with_capacity(rec.len()),
        dphi_right: Vec::with_capacity(rec.len()),
        boundary,
    };
    for (pos, log, c_left, c_right) in rec {
        let phi = (log - l0).exp();
        assert!(phi > 0.0, "decaying solution must stay positive");
        out.times.push(pos);
        out.phi.push(phi);
        out.dphi_left.push(-c_left * phi);
        out.dphi_right.push(-c_right * phi);
    }
    Ok(out)
}

/// `Φ′(0)` and the log-increments of `Φ` across the pieces of `δ`, for the
/// drifted equation `Φ″ + 2βΦ′ = 2Φμ` with `β` approximated by its midpoint
/// value on sub-pieces no longer than `max_sub`.
pub(crate) fn drifted_decaying(
    mu: &RadonMeasure,
    beta: &PiecewiseFn,
    a: f64,
    cuts: &[f64],
    boundary: Boundary,
    max_sub: f64,
) -> Result<(f64, Vec<(f64, f64)>)> {
    let mut all_cuts: Vec<f64> = cuts.to_vec();
    all_cuts.extend(beta.knots_between(0.0, a));
    let segs = segments::<f64>(mu, 1.0, 0.0, a, &all_cuts);
    let mut q = match boundary {
        Boundary::RightNeumann => 0.0,
        Boundary::Principal => {
            let b = beta.eval(a);
            let m = mu.density_at(a - 1e-12 * a.max(1.0));
            -(b + (b * b + 2.0 * m).sqrt())
        }
    };
    let mut log = 0.0;
    let mut marks = vec![(a, 0.0)];
    for seg in segs.iter().rev() {
        match *seg {
            Seg::Atom { w, .. } => q -= 2.0 * w,
            Seg::Dens { start, end, m } => {
                let n = if beta.slope(0.5 * (start + end)) == 0.0 {
                    1
                } else {
                    ((end - start) / max_sub).ceil().max(1.0) as usize
                };
                let h = (end - start) / n as f64;
                for j in (0..n).rev() {
                    let mid = start + (j as f64 + 0.5) * h;
                    let b = beta.eval(mid);
                    let (dl, qn) = drifted_step_back(b, m, h, q);
                    log += dl;
                    q = qn;
                }
                marks.push((start, log));
            }
        }
    }
    Ok((q, marks))
}

fn drifted_step_back(beta: f64, m: f64, dt: f64, q: f64) -> (f64, f64) {
    let w = (beta * beta + 2.0 * m).sqrt();
    let z = w * dt;
    let (c, s, shift) = if z > SCALE_SWITCH {
        let e2 = (-2.0 * z).exp();
        (0.5 * (1.0 + e2), 0.5 * (1.0 - e2) / w, z)
    } else {
        (z.cosh(), sinhc(z) * dt, 0.0)
    };
    let den = c - (beta + q) * s;
    let qn = (q * c + (q * beta - 2.0 * m) * s) / den;
    (beta * dt + shift + den.ln(), qn)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn free_piece_gives_linear_psi() {
        let p = Propagator::density_piece(0.0, 0.0, 2.5).unwrap().entries();
        assert_eq!(p, [[1.0, 2.5], [0.0, 1.0]]);
    }

    #[test]
    fn hyperbolic_piece_closed_form() {
        let (alpha, t) = (0.5f64, 1.3);
        let k = (2.0 * alpha).sqrt();
        let p = Propagator::density_piece(alpha, 0.0, t).unwrap().entries();
        assert!(close(p[0][1], (k * t).sinh() / k, 1e-15));
        assert!(close(p[1][0], k * (k * t).sinh(), 1e-15));
        assert!(close(p[0][0], (k * t).cosh(), 1e-15));
    }

    #[test]
    fn scaled_piece_matches_direct_entries() {
        // kΔ = 40 takes the factored branch.
        let p = Propagator::density_piece(800.0, 0.0, 1.0).unwrap();
        let e = p.entries();
        let k = 40.0f64;
        assert!(close(e[0][0], k.cosh(), 1e-14));
        assert!(close(e[0][1], k.sinh() / k, 1e-14));
        assert!(p.det_defect() < 1e-12);
    }

    #[test]
    fn atom_after_free_piece_gives_dirac_decaying_solution() {
        let (lambda, t) = (0.8, 1.5);
        let mu = RadonMeasure::dirac(t, lambda).unwrap();
        let d = decaying_solution(&mu, t, Boundary::RightNeumann).unwrap();
        let last = d.phi.len() - 1;
        assert!(close(d.phi[last], 1.0 / (1.0 + 2.0 * lambda * t), 1e-15));
        assert!(close(
            d.dphi0(),
            -2.0 * lambda / (1.0 + 2.0 * lambda * t),
            1e-15
        ));
        // Derivative vanishes to the right of the atom.
        assert_eq!(d.dphi_right[last], 0.0);
    }

    #[test]
    fn lebesgue_decaying_solution() {
        let (alpha, t) = (0.7f64, 2.0);
        let k = (2.0 * alpha).sqrt();
        let mu = RadonMeasure::lebesgue(alpha, t).unwrap();
        let d = decaying_solution(&mu, t, Boundary::RightNeumann).unwrap();
        assert!(close(d.dphi0(), -k * (k * t).tanh(), 1e-14));
        for &s in &[0.3, 1.0, 1.7] {
            let want = (k * (t - s)).cosh() / (k * t).cosh();
            assert!(close(d.eval(&mu, s).unwrap(), want, 1e-13));
        }
    }

    #[test]
    fn zero_measure_decaying_solution_is_one() {
        let mu = RadonMeasure::zero(1.0).unwrap();
        let d = decaying_solution(&mu, 1.0, Boundary::RightNeumann).unwrap();
        assert!(d.phi.iter().all(|&p| p == 1.0));
        assert_eq!(d.dphi0(), 0.0);
    }

    #[test]
    fn composition_of_free_pieces() {
        let a = Propagator::density_piece(0.0, 0.0, 0.4).unwrap();
        let b = Propagator::density_piece(0.0, 0.4, 1.0).unwrap();
        let c = a.then(&b).unwrap().entries();
        assert!(close(c[0][1], 1.0, 1e-15));
    }

    #[test]
    fn mismatched_endpoints_rejected() {
        let a = Propagator::density_piece(0.0, 0.0, 0.4).unwrap();
        let b = Propagator::density_piece(0.0, 0.5, 1.0).unwrap();
        assert!(matches!(
            a.then(&b),
            Err(GbesqError::MismatchedEndpoints { .. })
        ));
    }

    #[test]
    fn negative_density_rejected() {
        assert!(Propagator::density_piece(-1.0, 0.0, 1.0).is_err());
        assert!(Propagator::atom(-1.0, 0.5).is_err());
    }

    #[test]
    fn dirac_propagator_entries() {
        let (lambda, t) = (0.3, 2.0);
        let mu = RadonMeasure::new(vec![(1.0, lambda)], PiecewiseFn::constant(0.0), t).unwrap();
        let p = full_propagator(&mu, 0.0, t).unwrap().entries();
        assert!(close(p[0][1], t + 2.0 * lambda, 1e-15));
        assert!(close(p[0][0], 1.0 + 2.0 * lambda, 1e-15));
        assert!(close(p[1][1], 1.0 + 2.0 * lambda, 1e-15));
    }

    fn sample_measure() -> RadonMeasure {
        RadonMeasure::new(
            vec![(0.3, 0.4), (1.1, 1.7)],
            PiecewiseFn::step(vec![0.0, 0.5, 0.9], vec![2.0, 0.0, 5.0]).unwrap(),
            1.6,
        )
        .unwrap()
    }

    #[test]
    fn reversal_transposes_diagonal() {
        let mu = sample_measure();
        let p = full_propagator(&mu, 0.0, 1.6).unwrap().entries();
        let r = full_propagator(&mu.reverse(1.6).unwrap(), 0.0, 1.6)
            .unwrap()
            .entries();
        assert!(close(p[0][1], r[0][1], 1e-12));
        assert!(close(p[0][0], r[1][1], 1e-12));
        assert!(close(p[1][1], r[0][0], 1e-12));
    }

    #[test]
    fn psi_sweep_matches_matrix_entries() {
        let mu = sample_measure();
        let t = 1.6;
        let segs = segments::<f64>(&mu, 1.0, 0.0, t, &[0.2, 0.7]);
        let mut seen = Vec::new();
        let end = backward_sweep(&segs, SweepStart::Psi, |pos, st| seen.push((pos, st))).unwrap();
        let p = full_propagator(&mu, 0.0, t).unwrap();
        assert!(close(end.log, p.entries()[0][1].ln(), 1e-13));
        assert!(close(end.c, p.m11_over_m12(), 1e-13));
        for (pos, st) in seen {
            let q = full_propagator(&mu, pos, t).unwrap();
            assert!(close(st.log, q.entries()[0][1].ln(), 1e-13), "at {pos}");
        }
    }

    /// Reference `ln ψ` along a ray in α, phase-unwrapped from the real axis.
    fn unwrapped_log_psi(mu: &RadonMeasure, t: f64, alpha: Complex64) -> Complex64 {
        let n = 4000;
        let mut prev = Complex64::new(0.0, 0.0);
        let mut first = true;
        for i in 0..=n {
            let s = alpha.re + (alpha.im * i as f64 / n as f64) * Complex64::i();
            let p = full_propagator_scaled(mu, s, 0.0, t).unwrap();
            let (m, l) = p.scaled_entries();
            let mut v = m[0][1].ln() + l;
            if !first {
                while v.im - prev.im > std::f64::consts::PI {
                    v.im -= 2.0 * std::f64::consts::PI;
                }
                while prev.im - v.im > std::f64::consts::PI {
                    v.im += 2.0 * std::f64::consts::PI;
                }
            }
            first = false;
            prev = v;
        }
        prev
    }

    #[test]
    fn complex_psi_sweep_is_branch_continuous() {
        let mu = sample_measure();
        let t = 1.6;
        for &alpha in &[
            Complex64::new(2.0, 35.0),
            Complex64::new(0.3, -80.0),
            Complex64::new(9.0, 400.0),
        ] {
            let segs = segments(&mu, alpha, 0.0, t, &[]);
            let got = backward_sweep(&segs, SweepStart::Psi, |_, _| {})
                .unwrap()
                .log;
            let want = unwrapped_log_psi(&mu, t, alpha);
            assert!((got - want).norm() < 1e-9, "{alpha}: {got} vs {want}");
        }
    }

    #[test]
    fn drifted_piece_has_exponential_determinant() {
        let p = Propagator::drifted_piece(0.4, 1.3, 0.0, 0.9).unwrap();
        assert!(close(p.det(), (-2.0f64 * 0.4 * 0.9).exp(), 1e-14));
    }

    #[test]
    fn drifted_sweep_without_drift_matches_plain_sweep() {
        let mu = sample_measure();
        let (q, marks) = drifted_decaying(
            &mu,
            &PiecewiseFn::constant(0.0),
            1.6,
            &[],
            Boundary::RightNeumann,
            0.01,
        )
        .unwrap();
        let d = decaying_solution(&mu, 1.6, Boundary::RightNeumann).unwrap();
        assert!(close(q, d.dphi0(), 1e-13));
        let l0 = marks.last().unwrap().1;
        assert!(close(-l0, d.phi.last().unwrap().ln(), 1e-13));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn measure() -> impl Strategy<Value = RadonMeasure> {
            (
                prop::collection::vec((0.01f64..1.99, 0.01f64..3.0), 0..4),
                prop::collection::vec(0.0f64..20.0, 1..6),
            )
                .prop_map(|(atoms, vals)| {
                    let n = vals.len();
                    let knots = (0..n).map(|i| 2.0 * i as f64 / n as f64).collect();
                    RadonMeasure::new(atoms, PiecewiseFn::step(knots, vals).unwrap(), 2.0).unwrap()
                })
        }

        proptest! {
            #[test]
            fn determinant_is_one(mu in measure()) {
                let p = full_propagator(&mu, 0.0, 2.0).unwrap();
                prop_assert!(p.det_defect() < 1e-12);
            }

            #[test]
            fn psi_invariant_under_reversal(mu in measure()) {
                prop_assume!(mu.atom_at(2.0) == 0.0);
                let a = full_propagator(&mu, 0.0, 2.0).unwrap();
                let b = full_propagator(&mu.reverse(2.0).unwrap(), 0.0, 2.0).unwrap();
                prop_assert!((a.ln_m12() - b.ln_m12()).abs() < 1e-12);
            }

            #[test]
            fn nonnegative_entries_and_increasing_psi(mu in measure(), v in 0.1f64..2.0) {
                let p = full_propagator(&mu, 0.0, v).unwrap().entries();
                prop_assert!(p.iter().flatten().all(|&e| e >= 0.0));
                prop_assert!(p[0][1] > 0.0);
                let q = full_propagator(&mu, 0.0, v + 0.05).unwrap().entries();
                prop_assert!(q[0][1] > p[0][1]);
            }

            #[test]
            fn refinement_leaves_propagator_unchanged(m in 0.0f64..30.0, len in 0.01f64..3.0, frac in 0.01f64..0.99) {
                let whole = Propagator::density_piece(m, 0.0, len).unwrap().entries();
                let cut = frac * len;
                let split = Propagator::density_piece(m, 0.0, cut).unwrap()
                    .then(&Propagator::density_piece(m, cut, len).unwrap()).unwrap().entries();
                for i in 0..2 { for j in 0..2 {
                    prop_assert!((whole[i][j] - split[i][j]).abs() <= 1e-13 * whole[i][j].abs().max(1e-300) + 1e-300);
                }}
            }

            #[test]
            fn decaying_solution_is_positive_nonincreasing(mu in measure()) {
                let d = decaying_solution(&mu, 2.0, Boundary::RightNeumann).unwrap();
                prop_assert_eq!(d.phi[0], 1.0);
                for w in d.phi.windows(2) {
                    prop_assert!(w[1] > 0.0 && w[1] <= w[0] * (1.0 + 1e-14));
                }
            }
        }
    }
}
