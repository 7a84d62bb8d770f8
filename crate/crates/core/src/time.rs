//! Time-indexed data: piecewise functions (dimensions, drifts), positive
//! Radon measures with compact support, and deterministic time changes.
//!
//! Everything here is exact: integrals of piecewise functions and masses of
//! intervals are sums over pieces, never quadratures.

use serde::{Deserialize, Serialize};

use crate::error::{GbesqError, Result};

/// Interpolation mode of a [`PiecewiseFn`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interp {
    /// Right-continuous, constant on `[knot_i, knot_{i+1})`.
    Step,
    /// Continuous, linear between knots.
    Linear,
}

/// A function on `[0, ∞)` given by knots `0 = τ₀ < τ₁ < … < τ_{n-1}` and one
/// value per knot.
///
/// In [`Interp::Step`] mode the value `v_i` holds on `[τ_i, τ_{i+1})`; in
/// [`Interp::Linear`] mode the function interpolates the points `(τ_i, v_i)`.
/// Either way the function is constant after the last knot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PiecewiseFn {
    knots: Vec<f64>,
    values: Vec<f64>,
    mode: Interp,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PiecewiseRepr {
    Constant(f64),
    Full {
        knots: Vec<f64>,
        values: Vec<f64>,
        #[serde(default = "default_interp")]
        mode: Interp,
    },
}

fn default_interp() -> Interp {
    Interp::Step
}

impl<'de> Deserialize<'de> for PiecewiseFn {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match PiecewiseRepr::deserialize(d)? {
            PiecewiseRepr::Constant(v) => {
                if v.is_finite() {
                    Ok(PiecewiseFn::constant(v))
                } else {
                    Err(serde::de::Error::custom("non-finite constant"))
                }
            }
            PiecewiseRepr::Full {
                knots,
                values,
                mode,
            } => PiecewiseFn::new(knots, values, mode).map_err(serde::de::Error::custom),
        }
    }
}

impl PiecewiseFn {
    pub fn new(knots: Vec<f64>, values: Vec<f64>, mode: Interp) -> Result<Self> {
        if knots.is_empty() {
            return Err(GbesqError::InvalidFunction("no knots".into()));
        }
        if knots.len() != values.len() {
            return Err(GbesqError::InvalidFunction(format!(
                "{} knots but {} values",
                knots.len(),
                values.len()
            )));
        }
        if knots[0] != 0.0 {
            return Err(GbesqError::InvalidFunction("first knot must be 0".into()));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) || knots.iter().any(|k| !k.is_finite()) {
            return Err(GbesqError::InvalidFunction(
                "knots must be finite and strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(GbesqError::InvalidFunction("non-finite value".into()));
        }
        Ok(Self {
            knots,
            values,
            mode,
        })
    }

    pub fn step(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::new(knots, values, Interp::Step)
    }

    pub fn linear(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::new(knots, values, Interp::Linear)
    }

    pub fn constant(value: f64) -> Self {
        Self {
            knots: vec![0.0],
            values: vec![value],
            mode: Interp::Step,
        }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mode(&self) -> Interp {
        self.mode
    }

    /// Index of the piece containing `t` (right-continuous convention).
    fn piece_index(&self, t: f64) -> usize {
        match self
            .knots
            .binary_search_by(|k| k.partial_cmp(&t).expect("finite knots"))
        {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        let i = self.piece_index(t);
        match self.mode {
            Interp::Step => self.values[i],
            Interp::Linear => {
                if i + 1 >= self.knots.len() {
                    self.values[i]
                } else {
                    let (a, b) = (self.knots[i], self.knots[i + 1]);
                    let w = (t - a) / (b - a);
                    self.values[i] + w * (self.values[i + 1] - self.values[i])
                }
            }
        }
    }

    /// Slope on the piece containing `t` (right derivative); zero for step mode.
    pub fn slope(&self, t: f64) -> f64 {
        match self.mode {
            Interp::Step => 0.0,
            Interp::Linear => {
                let i = self.piece_index(t.max(0.0));
                if i + 1 >= self.knots.len() {
                    0.0
                } else {
                    (self.values[i + 1] - self.values[i]) / (self.knots[i + 1] - self.knots[i])
                }
            }
        }
    }

    /// Knots lying strictly inside `(a, b)`.
    pub fn knots_between(&self, a: f64, b: f64) -> impl Iterator<Item = f64> + '_ {
        self.knots.iter().copied().filter(move |&k| k > a && k < b)
    }

    /// Pieces covering `[a, b]` as `(start, end, value at start, value at end⁻)`.
    ///
    /// For step mode both values coincide.
    pub fn pieces(&self, a: f64, b: f64) -> Vec<(f64, f64, f64, f64)> {
        let mut cuts = vec![a];
        cuts.extend(self.knots_between(a, b));
        cuts.push(b);
        cuts.windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                match self.mode {
                    Interp::Step => {
                        let v = self.eval(mid);
                        (w[0], w[1], v, v)
                    }
                    Interp::Linear => (w[0], w[1], self.eval(w[0]), self.eval(w[1])),
                }
            })
            .collect()
    }

    /// Exact integral over `[a, b]`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        self.pieces(a, b)
            .iter()
            .map(|&(s, e, vs, ve)| 0.5 * (vs + ve) * (e - s))
            .sum()
    }

    /// Exact integral of the product of two functions over `[a, b]`, where at
    /// most one of them is in linear mode.
    pub fn integral_product(&self, other: &PiecewiseFn, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let mut cuts = vec![a];
        cuts.extend(self.knots_between(a, b));
        cuts.extend(other.knots_between(a, b));
        cuts.push(b);
        cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        cuts.dedup();
        cuts.windows(2)
            .map(|w| {
                let (s, e) = (w[0], w[1]);
                let m = 0.5 * (s + e);
                // Simpson is exact for a product of degree ≤ 2.
                let f = |u: f64| self.eval_inside(u, s, e) * other.eval_inside(u, s, e);
                (e - s) / 6.0 * (f(s) + 4.0 * f(m) + f(e))
            })
            .sum()
    }

    /// Evaluation restricted to the piece `[s, e]` (left limit at `e`).
    fn eval_inside(&self, u: f64, s: f64, e: f64) -> f64 {
        match self.mode {
            Interp::Step => self.eval(0.5 * (s + e)),
            Interp::Linear => self.eval(u),
        }
    }

    pub fn min_on(&self, a: f64, b: f64) -> f64 {
        self.pieces(a, b)
            .iter()
            .map(|p| p.2.min(p.3))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_on(&self, a: f64, b: f64) -> f64 {
        self.pieces(a, b)
            .iter()
            .map(|p| p.2.max(p.3))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
    }

    /// `u ↦ f(u + s)`.
    pub fn shift(&self, s: f64) -> PiecewiseFn {
        if s <= 0.0 {
            return self.clone();
        }
        let mut knots = vec![0.0];
        let mut values = vec![self.eval(s)];
        for (&k, &v) in self.knots.iter().zip(&self.values) {
            if k > s {
                knots.push(k - s);
                values.push(v);
            }
        }
        Self {
            knots,
            values,
            mode: self.mode,
        }
    }

    /// `u ↦ f(c·u)`.
    pub fn time_scale(&self, c: f64) -> PiecewiseFn {
        Self {
            knots: self.knots.iter().map(|k| k / c).collect(),
            values: self.values.clone(),
            mode: self.mode,
        }
    }

    /// `u ↦ c·f(u)`.
    pub fn scale(&self, c: f64) -> PiecewiseFn {
        Self {
            knots: self.knots.clone(),
            values: self.values.iter().map(|v| c * v).collect(),
            mode: self.mode,
        }
    }

    /// `u ↦ f(t − u)` on `[0, t]`, continued by `f(0)` afterwards.
    pub fn reverse(&self, t: f64) -> PiecewiseFn {
        let inner: Vec<f64> = self.knots_between(0.0, t).collect();
        match self.mode {
            Interp::Step => {
                let mut knots = vec![0.0];
                let mut values =
                    vec![self.eval(t - 0.5 * (t - inner.last().copied().unwrap_or(0.0)))];
                for (j, &k) in inner.iter().enumerate().rev() {
                    let left = if j == 0 { 0.0 } else { inner[j - 1] };
                    knots.push(t - k);
                    values.push(self.eval(0.5 * (left + k)));
                }
                Self::step(knots, values)
                    .expect("reversal preserves ordering")
                    .merged()
            }
            Interp::Linear => {
                let mut knots = vec![0.0];
                let mut values = vec![self.eval(t)];
                for &k in inner.iter().rev() {
                    knots.push(t - k);
                    values.push(self.eval(k));
                }
                knots.push(t);
                values.push(self.eval(0.0));
                Self::linear(knots, values).expect("reversal preserves ordering")
            }
        }
    }

    /// Pointwise sum of two step functions.
    pub fn add(&self, other: &PiecewiseFn) -> Result<PiecewiseFn> {
        if self.mode != Interp::Step || other.mode != Interp::Step {
            return Err(GbesqError::InvalidFunction(
                "sum is only defined for step functions".into(),
            ));
        }
        let mut knots: Vec<f64> = self.knots.iter().chain(&other.knots).copied().collect();
        knots.sort_by(|a, b| a.partial_cmp(b).unwrap());
        knots.dedup();
        let values = knots
            .iter()
            .map(|&k| self.eval(k) + other.eval(k))
            .collect();
        Ok(Self::step(knots, values)?.merged())
    }

    /// Drops knots across which a step function does not change.
    pub fn merged(self) -> PiecewiseFn {
        if self.mode != Interp::Step {
            return self;
        }
        let mut knots = vec![self.knots[0]];
        let mut values = vec![self.values[0]];
        for (&k, &v) in self.knots.iter().zip(&self.values).skip(1) {
            if v != *values.last().unwrap() {
                knots.push(k);
                values.push(v);
            }
        }
        Self {
            knots,
            values,
            mode: Interp::Step,
        }
    }
}

/// A positive Radon measure on `[0, horizon]`: finitely many atoms plus a
/// piecewise-constant density that vanishes after the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureRepr", into = "MeasureRepr")]
pub struct RadonMeasure {
    atoms: Vec<(f64, f64)>,
    density: PiecewiseFn,
    horizon: f64,
}

#[derive(Serialize, Deserialize)]
struct MeasureRepr {
    #[serde(default)]
    atoms: Vec<(f64, f64)>,
    density: PiecewiseFn,
    horizon: f64,
}

impl TryFrom<MeasureRepr> for RadonMeasure {
    type Error = GbesqError;
    fn try_from(r: MeasureRepr) -> Result<Self> {
        RadonMeasure::new(r.atoms, r.density, r.horizon)
    }
}

impl From<RadonMeasure> for MeasureRepr {
    fn from(m: RadonMeasure) -> Self {
        MeasureRepr {
            atoms: m.atoms,
            density: m.density,
            horizon: m.horizon,
        }
    }
}

impl RadonMeasure {
    /// Builds a measure; atoms at equal locations are merged.
    pub fn new(mut atoms: Vec<(f64, f64)>, density: PiecewiseFn, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(GbesqError::InvalidMeasure(format!("horizon {horizon}")));
        }
        if density.mode() != Interp::Step {
            return Err(GbesqError::InvalidMeasure(
                "density must be piecewise constant".into(),
            ));
        }
        if !density.is_nonnegative() {
            return Err(GbesqError::InvalidMeasure("negative density".into()));
        }
        for &(t, w) in &atoms {
            if !(t > 0.0 && t <= horizon) {
                return Err(GbesqError::InvalidMeasure(format!(
                    "atom at {t} outside (0, {horizon}]"
                )));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(GbesqError::InvalidMeasure(format!("atom weight {w}")));
            }
        }
        atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (t, w) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == t => last.1 += w,
                _ => merged.push((t, w)),
            }
        }
        // Density after the horizon is irrelevant; cut it so the stored
        // representation is canonical.
        let mut knots: Vec<f64> = density.knots_between(-1.0, horizon).collect();
        let mut values: Vec<f64> = knots.iter().map(|&k| density.eval(k)).collect();
        knots.push(horizon);
        values.push(0.0);
        let density = PiecewiseFn::step(knots, values)?.merged();
        Ok(Self {
            atoms: merged,
            density,
            horizon,
        })
    }

    pub fn zero(horizon: f64) -> Result<Self> {
        Self::new(Vec::new(), PiecewiseFn::constant(0.0), horizon)
    }

    /// `rate · Lebesgue` on `[0, horizon]`.
    pub fn lebesgue(rate: f64, horizon: f64) -> Result<Self> {
        Self::new(Vec::new(), PiecewiseFn::constant(rate), horizon)
    }

    /// `weight · ε_at`, with horizon `at`.
    pub fn dirac(at: f64, weight: f64) -> Result<Self> {
        Self::new(vec![(at, weight)], PiecewiseFn::constant(0.0), at)
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn density(&self) -> &PiecewiseFn {
        &self.density
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Density value on the open piece starting at `t`.
    pub fn density_at(&self, t: f64) -> f64 {
        if t >= self.horizon {
            0.0
        } else {
            self.density.eval(t)
        }
    }

    /// Exact mass of the closed interval `[s, t]`.
    pub fn measure_of_interval(&self, s: f64, t: f64) -> Result<f64> {
        if !(0.0 <= s && s <= t && t <= self.horizon) {
            return Err(GbesqError::OutOfRange {
                start: s,
                end: t,
                horizon: self.horizon,
            });
        }
        let atoms: f64 = self
            .atoms
            .iter()
            .filter(|a| a.0 >= s && a.0 <= t)
            .map(|a| a.1)
            .sum();
        Ok(self.density.integral(s, t) + atoms)
    }

    pub fn total_mass(&self) -> f64 {
        self.density.integral(0.0, self.horizon) + self.atoms.iter().map(|a| a.1).sum::<f64>()
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty() && self.density.values().iter().all(|&v| v == 0.0)
    }

    /// `c · μ` for `c ≥ 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c >= 0.0) {
            return Err(crate::error::param("scale", "must be nonnegative"));
        }
        let atoms = if c == 0.0 {
            Vec::new()
        } else {
            self.atoms.iter().map(|&(t, w)| (t, c * w)).collect()
        };
        Self::new(atoms, self.density.scale(c), self.horizon)
    }

    /// The same measure viewed on a longer horizon.
    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        if horizon < self.support_end() {
            return Err(GbesqError::InvalidMeasure(format!(
                "horizon {horizon} cuts the support"
            )));
        }
        Self::new(self.atoms.clone(), self.density.clone(), horizon)
    }

    /// Right end of the support.
    pub fn support_end(&self) -> f64 {
        let atom_end = self.atoms.last().map_or(0.0, |a| a.0);
        let dens = self.density.knots();
        let vals = self.density.values();
        let mut dens_end = 0.0;
        for (i, &v) in vals.iter().enumerate() {
            if v > 0.0 {
                dens_end = dens.get(i + 1).copied().unwrap_or(self.horizon);
            }
        }
        atom_end.max(dens_end)
    }

    /// Image under `s ↦ t − s`.
    pub fn reverse(&self, t: f64) -> Result<Self> {
        if self.support_end() > t {
            return Err(GbesqError::InvalidMeasure(format!(
                "support extends past {t}; cannot reverse"
            )));
        }
        if self.atoms.iter().any(|a| a.0 == t) {
            return Err(GbesqError::InvalidMeasure(
                "atom at the reflection point would move to 0".into(),
            ));
        }
        let atoms = self.atoms.iter().map(|&(s, w)| (t - s, w)).collect();
        let d = self.density_up_to(t).reverse(t);
        Self::new(atoms, d, t)
    }

    fn density_up_to(&self, t: f64) -> PiecewiseFn {
        let mut knots: Vec<f64> = self.density.knots_between(-1.0, t).collect();
        let mut values: Vec<f64> = knots.iter().map(|&k| self.density_at(k)).collect();
        knots.push(t);
        values.push(0.0);
        PiecewiseFn::step(knots, values).expect("valid cut")
    }

    /// Restriction to `[s, e]`, shifted to start at 0 (horizon `e − s`).
    /// Atoms exactly at `s` or `e` are dropped; callers account for them.
    pub fn restrict_shift(&self, s: f64, e: f64) -> Result<Self> {
        if !(0.0 <= s && s < e) {
            return Err(GbesqError::OutOfRange {
                start: s,
                end: e,
                horizon: self.horizon,
            });
        }
        let atoms = self
            .atoms
            .iter()
            .filter(|a| a.0 > s && a.0 < e)
            .map(|&(t, w)| (t - s, w))
            .collect();
        let density = if s >= self.horizon {
            PiecewiseFn::constant(0.0)
        } else {
            self.density.shift(s)
        };
        Self::new(atoms, density, e - s)
    }

    /// Sorted breakpoints of the measure strictly inside `(0, t)`: density
    /// knots and atom locations.
    pub fn breakpoints(&self, t: f64) -> Vec<f64> {
        let mut pts: Vec<f64> = self.density.knots_between(0.0, t).collect();
        if self.horizon > 0.0 && self.horizon < t {
            pts.push(self.horizon);
        }
        pts.extend(self.atoms.iter().map(|a| a.0).filter(|&a| a > 0.0 && a < t));
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        pts
    }

    /// Total atom weight located exactly at `t`.
    pub fn atom_at(&self, t: f64) -> f64 {
        self.atoms.iter().filter(|a| a.0 == t).map(|a| a.1).sum()
    }
}

/// A deterministic, strictly increasing time change with `f(0) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeChange {
    /// `f(t) = ∫₀ᵗ slope(u) du` with a piecewise-constant positive slope.
    PiecewiseLinear { slopes: PiecewiseFn },
    /// `f(t) = scale · (e^{rate·t} − 1) / rate` (`scale · t` when `rate = 0`).
    Exponential { scale: f64, rate: f64 },
}

const SERIES_SWITCH: f64 = 1e-6;

impl TimeChange {
    pub fn identity() -> Self {
        TimeChange::PiecewiseLinear {
            slopes: PiecewiseFn::constant(1.0),
        }
    }

    pub fn linear(c: f64) -> Result<Self> {
        Self::piecewise_linear(PiecewiseFn::constant(c))
    }

    pub fn piecewise_linear(slopes: PiecewiseFn) -> Result<Self> {
        if slopes.mode() != Interp::Step || slopes.values().iter().any(|&v| !(v > 0.0)) {
            return Err(GbesqError::InvalidTimeChange(
                "slopes must be piecewise constant and positive".into(),
            ));
        }
        Ok(TimeChange::PiecewiseLinear { slopes })
    }

    pub fn exponential(scale: f64, rate: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite() && rate.is_finite()) {
            return Err(GbesqError::InvalidTimeChange(format!(
                "scale {scale}, rate {rate}"
            )));
        }
        Ok(TimeChange::Exponential { scale, rate })
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeChange::PiecewiseLinear { slopes } => slopes.integral(0.0, t),
            TimeChange::Exponential { scale, rate } => {
                let rt = rate * t;
                if rt.abs() < SERIES_SWITCH {
                    scale * t * (1.0 + 0.5 * rt + rt * rt / 6.0)
                } else {
                    scale * rt.exp_m1() / rate
                }
            }
        }
    }

    /// Right derivative `f'(t)`.
    pub fn derivative(&self, t: f64) -> f64 {
        match self {
            TimeChange::PiecewiseLinear { slopes } => slopes.eval(t),
            TimeChange::Exponential { scale, rate } => scale * (rate * t).exp(),
        }
    }

    pub fn inverse(&self, s: f64) -> Result<f64> {
        match self {
            TimeChange::PiecewiseLinear { slopes } => {
                let knots = slopes.knots();
                let mut acc = 0.0;
                for i in 0..knots.len() {
                    let v = slopes.values()[i];
                    match knots.get(i + 1) {
                        Some(&next) => {
                            let seg = v * (next - knots[i]);
                            if acc + seg >= s {
                                return Ok(knots[i] + (s - acc) / v);
                            }
                            acc += seg;
                        }
                        None => return Ok(knots[i] + (s - acc) / v),
                    }
                }
                unreachable!("last piece is unbounded")
            }
            TimeChange::Exponential { scale, rate } => {
                let u = rate * s / scale;
                if u <= -1.0 {
                    return Err(GbesqError::InvalidTimeChange(format!(
                        "{s} is beyond the range of the time change"
                    )));
                }
                if u.abs() < SERIES_SWITCH {
                    Ok(s / scale * (1.0 - 0.5 * u + u * u / 3.0))
                } else {
                    Ok(u.ln_1p() / rate)
                }
            }
        }
    }

    /// Images `f(k)` of the slope breakpoints inside `(0, t)`.
    pub fn image_breakpoints(&self, t: f64) -> Vec<f64> {
        match self {
            TimeChange::PiecewiseLinear { slopes } => {
                slopes.knots_between(0.0, t).map(|k| self.eval(k)).collect()
            }
            TimeChange::Exponential { .. } => Vec::new(),
        }
    }
}

/// The measure `μ̃` on `[0, f(T)]` such that `∫₀ᵀ g(s) X_{f(s)} ds = ∫ X dμ̃`.
///
/// Its density is `g(f⁻¹(s)) / f'(f⁻¹(s))`, piecewise constant whenever `g`
/// is a step function and `f` is piecewise linear.
pub fn pushforward_functional(
    g: &PiecewiseFn,
    f: &TimeChange,
    horizon: f64,
) -> Result<RadonMeasure> {
    if g.mode() != Interp::Step || !g.is_nonnegative() {
        return Err(GbesqError::InvalidFunction(
            "weight must be a nonnegative step function".into(),
        ));
    }
    let TimeChange::PiecewiseLinear { slopes } = f else {
        return Err(GbesqError::InvalidTimeChange(
            "exact pushforward needs a piecewise-linear time change".into(),
        ));
    };
    if !(horizon > 0.0) {
        return Err(crate::error::param("horizon", "must be positive"));
    }
    let mut cuts: Vec<f64> = vec![0.0];
    cuts.extend(g.knots_between(0.0, horizon));
    cuts.extend(slopes.knots_between(0.0, horizon));
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    let knots: Vec<f64> = cuts.iter().map(|&c| f.eval(c)).collect();
    let values: Vec<f64> = cuts.iter().map(|&c| g.eval(c) / slopes.eval(c)).collect();
    let density = PiecewiseFn::step(knots, values)?.merged();
    RadonMeasure::new(Vec::new(), density, f.eval(horizon))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_piece() -> RadonMeasure {
        RadonMeasure::new(
            Vec::new(),
            PiecewiseFn::step(vec![0.0, 0.4], vec![1.5, 0.5]).unwrap(),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn zero_measure_has_no_mass() {
        let m = RadonMeasure::zero(2.0).unwrap();
        assert_eq!(m.measure_of_interval(0.3, 1.7).unwrap(), 0.0);
        assert!(m.is_zero());
    }

    #[test]
    fn lebesgue_mass_scales() {
        let m = RadonMeasure::lebesgue(0.7, 3.0).unwrap();
        assert!((m.measure_of_interval(0.0, 3.0).unwrap() - 2.1).abs() < 1e-15);
    }

    #[test]
    fn atom_counted_on_closed_interval() {
        let m = RadonMeasure::dirac(0.8, 2.5).unwrap();
        assert_eq!(m.measure_of_interval(0.0, 0.8).unwrap(), 2.5);
        assert_eq!(m.measure_of_interval(0.0, 0.79).unwrap(), 0.0);
    }

    #[test]
    fn out_of_range_interval_is_rejected() {
        let m = RadonMeasure::lebesgue(1.0, 1.0).unwrap();
        assert!(matches!(
            m.measure_of_interval(0.5, 1.5),
            Err(GbesqError::OutOfRange { .. })
        ));
        assert!(m.measure_of_interval(0.6, 0.5).is_err());
    }

    #[test]
    fn equal_atoms_are_merged() {
        let m = RadonMeasure::new(
            vec![(0.5, 1.0), (0.2, 0.5), (0.5, 2.0)],
            PiecewiseFn::constant(0.0),
            1.0,
        )
        .unwrap();
        assert_eq!(m.atoms(), &[(0.2, 0.5), (0.5, 3.0)]);
    }

    #[test]
    fn reversal_of_lebesgue_is_lebesgue() {
        let m = RadonMeasure::lebesgue(1.3, 2.0).unwrap();
        assert_eq!(m.reverse(2.0).unwrap(), m);
    }

    #[test]
    fn reversal_moves_atoms() {
        let m = RadonMeasure::new(vec![(0.3, 2.0)], PiecewiseFn::constant(0.0), 1.0).unwrap();
        let r = m.reverse(1.0).unwrap();
        assert_eq!(r.atoms().len(), 1);
        assert!((r.atoms()[0].0 - 0.7).abs() < 1e-15);
        assert_eq!(r.atoms()[0].1, 2.0);
    }

    #[test]
    fn reversal_swaps_density_pieces() {
        let r = two_piece().reverse(1.0).unwrap();
        assert!((r.density_at(0.1) - 0.5).abs() < 1e-15);
        assert!((r.density_at(0.59) - 0.5).abs() < 1e-15);
        assert!((r.density_at(0.61) - 1.5).abs() < 1e-15);
        assert!((r.density.knots()[1] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn reversal_rejects_long_support() {
        assert!(two_piece().reverse(0.5).is_err());
    }

    #[test]
    fn linear_reverse_mirrors_values() {
        let f = PiecewiseFn::linear(vec![0.0, 1.0], vec![0.0, 2.0]).unwrap();
        let r = f.reverse(1.0);
        assert!((r.eval(0.25) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn step_eval_is_right_continuous() {
        let f = PiecewiseFn::step(vec![0.0, 0.5], vec![1.0, 2.0]).unwrap();
        assert_eq!(f.eval(0.5), 2.0);
        assert_eq!(f.eval(0.4999), 1.0);
        assert_eq!(f.eval(10.0), 2.0);
        assert!((f.integral(0.0, 1.0) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn invalid_knots_rejected() {
        assert!(PiecewiseFn::step(vec![0.0, 0.5, 0.5], vec![1.0, 2.0, 3.0]).is_err());
        assert!(PiecewiseFn::step(vec![0.1], vec![1.0]).is_err());
        assert!(PiecewiseFn::step(vec![0.0, 1.0], vec![1.0]).is_err());
    }

    #[test]
    fn integral_product_exact_for_linear_times_step() {
        let beta = PiecewiseFn::linear(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        let delta = PiecewiseFn::step(vec![0.0, 0.5], vec![2.0, 4.0]).unwrap();
        // ∫₀^{.5} 2u du + ∫_{.5}^1 4u du = 0.25 + 1.5
        assert!((beta.integral_product(&delta, 0.0, 1.0) - 1.75).abs() < 1e-14);
    }

    #[test]
    fn identity_pushforward_is_lebesgue() {
        let m = pushforward_functional(&PiecewiseFn::constant(1.0), &TimeChange::identity(), 2.0)
            .unwrap();
        assert_eq!(m, RadonMeasure::lebesgue(1.0, 2.0).unwrap());
    }

    #[test]
    fn linear_pushforward_has_reciprocal_density() {
        let m = pushforward_functional(
            &PiecewiseFn::constant(1.0),
            &TimeChange::linear(4.0).unwrap(),
            1.5,
        )
        .unwrap();
        assert!((m.horizon() - 6.0).abs() < 1e-15);
        assert!((m.density_at(3.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn two_regime_pushforward() {
        // σ = 0.2 on [0,1), 0.4 afterwards; f = ¼∫σ².
        let slopes = PiecewiseFn::step(vec![0.0, 1.0], vec![0.01, 0.04]).unwrap();
        let f = TimeChange::piecewise_linear(slopes).unwrap();
        let m = pushforward_functional(&PiecewiseFn::constant(1.0), &f, 2.0).unwrap();
        assert!((m.horizon() - 0.05).abs() < 1e-15);
        assert!((m.density_at(0.005) - 100.0).abs() < 1e-12);
        assert!((m.density_at(0.02) - 25.0).abs() < 1e-12);
        // Total mass is the model-time length.
        assert!((m.total_mass() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn time_change_inverse_round_trip() {
        let slopes = PiecewiseFn::step(vec![0.0, 1.0, 2.5], vec![0.5, 2.0, 0.1]).unwrap();
        let f = TimeChange::piecewise_linear(slopes).unwrap();
        let e = TimeChange::exponential(0.3, -0.7).unwrap();
        for &t in &[0.0, 0.3, 1.0, 1.7, 2.5, 4.0] {
            assert!((f.inverse(f.eval(t)).unwrap() - t).abs() < 1e-12);
            assert!((e.inverse(e.eval(t)).unwrap() - t).abs() < 1e-12);
        }
    }

    #[test]
    fn exponential_small_rate_uses_series() {
        let e = TimeChange::exponential(2.0, 1e-9).unwrap();
        assert!((e.eval(1.0) - 2.0).abs() < 1e-8);
        assert!((e.derivative(0.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn restrict_shift_drops_boundary_atoms() {
        let m = RadonMeasure::new(
            vec![(0.5, 1.0), (0.7, 2.0)],
            PiecewiseFn::step(vec![0.0, 0.6], vec![1.0, 3.0]).unwrap(),
            1.0,
        )
        .unwrap();
        let r = m.restrict_shift(0.5, 1.0).unwrap();
        assert_eq!(r.atoms(), &[(0.7 - 0.5, 2.0)]);
        assert!((r.measure_of_interval(0.0, 0.5).unwrap() - (0.1 + 1.2 + 2.0)).abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn measure() -> impl Strategy<Value = RadonMeasure> {
            (
                prop::collection::vec((0.01f64..0.99, 0.01f64..3.0), 0..4),
                prop::collection::vec(0.0f64..4.0, 1..5),
            )
                .prop_map(|(atoms, vals)| {
                    let n = vals.len();
                    let knots = (0..n).map(|i| i as f64 / n as f64).collect();
                    RadonMeasure::new(atoms, PiecewiseFn::step(knots, vals).unwrap(), 1.0).unwrap()
                })
        }

        proptest! {
            #[test]
            fn mass_is_additive(m in measure(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
                let (s, e) = if a < b { (a, b) } else { (b, a) };
                let mid = 0.5 * (s + e);
                let whole = m.measure_of_interval(s, e).unwrap();
                let left = m.measure_of_interval(s, mid).unwrap();
                let right = m.measure_of_interval(mid, e).unwrap();
                let at_mid = m.atom_at(mid);
                prop_assert!((whole - (left + right - at_mid)).abs() < 1e-12);
            }

            #[test]
            fn reverse_is_involution(m in measure()) {
                let r = m.reverse(1.0).unwrap().reverse(1.0).unwrap();
                prop_assert_eq!(r.atoms().len(), m.atoms().len());
                for (a, b) in r.atoms().iter().zip(m.atoms()) {
                    prop_assert!((a.0 - b.0).abs() < 1e-12 && a.1 == b.1);
                }
                for i in 0..50 {
                    let u = (i as f64 + 0.5) / 50.0;
                    prop_assert!((r.density_at(u) - m.density_at(u)).abs() < 1e-12);
                }
            }
        }
    }
}
