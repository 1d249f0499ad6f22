//! Higher-order variational calculus along numerically given curves:
//! action, first and second variation, Euler–Lagrange and D'Alembert
//! residuals, the momenta φ^j, du Bois-Reymond residuals and Noether
//! constants.
//!
//! Slot convention: `Slot::Jet(i)` is the partial derivative with respect to
//! `q^{(i)}`, `0 ≤ i ≤ m`; `Slot::Time` is the explicit time derivative.
//! Time derivatives of partials along a curve are taken by central
//! differences with spacing `1e−3·(t₂−t₁)`.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::quad::{integrate, QuadOptions};
use crate::{Error, Result};
#[cfg(not(feature = "std"))]
use num_traits::Float;

/// A curve `t ↦ q(t) ∈ R^d` with derivatives up to `max_order`.
pub trait Curve {
    fn dim(&self) -> usize;

    fn max_order(&self) -> usize;

    fn span(&self) -> (f64, f64);

    /// Writes `q_i^{(k)}(t)` to `out[k·dim + i]` for `k ≤ order`.
    fn jet(&self, t: f64, order: usize, out: &mut [f64]) -> Result<()>;

    /// Times where the curve or its coefficients change steeply; quadrature
    /// splits there.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }

    /// True when `[a, b]` touches an excluded neighbourhood of a singular layer.
    fn excluded(&self, _a: f64, _b: f64) -> bool {
        false
    }
}

impl<C: Curve + ?Sized> Curve for &C {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn max_order(&self) -> usize {
        (**self).max_order()
    }
    fn span(&self) -> (f64, f64) {
        (**self).span()
    }
    fn jet(&self, t: f64, order: usize, out: &mut [f64]) -> Result<()> {
        (**self).jet(t, order, out)
    }
    fn breakpoints(&self) -> Vec<f64> {
        (**self).breakpoints()
    }
    fn excluded(&self, a: f64, b: f64) -> bool {
        (**self).excluded(a, b)
    }
}

/// Curve given by a closure `f(t, order, out)` writing the jet.
pub struct FnCurve<F> {
    dim: usize,
    max_order: usize,
    span: (f64, f64),
    f: F,
}

impl<F: Fn(f64, usize, &mut [f64])> FnCurve<F> {
    pub fn new(dim: usize, max_order: usize, span: (f64, f64), f: F) -> Self {
        Self { dim, max_order, span, f }
    }
}

/// Scalar curve from `g(t, k) = q^{(k)}(t)`.
pub fn scalar_curve(
    span: (f64, f64),
    max_order: usize,
    g: impl Fn(f64, usize) -> f64,
) -> FnCurve<impl Fn(f64, usize, &mut [f64])> {
    FnCurve::new(1, max_order, span, move |t, order, out: &mut [f64]| {
        for (k, o) in out.iter_mut().enumerate().take(order + 1) {
            *o = g(t, k);
        }
    })
}

impl<F: Fn(f64, usize, &mut [f64])> Curve for FnCurve<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn max_order(&self) -> usize {
        self.max_order
    }
    fn span(&self) -> (f64, f64) {
        self.span
    }
    fn jet(&self, t: f64, order: usize, out: &mut [f64]) -> Result<()> {
        if order > self.max_order {
            return Err(Error::Capability {
                requested: order,
                available: self.max_order,
            });
        }
        (self.f)(t, order, out);
        Ok(())
    }
}

/// Test direction `h_k(t) = sin(kπ(t−t₁)/T)·w(t)^m` with
/// `w(t) = (t−t₁)(t₂−t)/T²`; `h_k` and its first `m` derivatives vanish at
/// both ends.
pub fn test_direction(span: (f64, f64), k: usize, m: usize, max_order: usize) -> FnCurve<impl Fn(f64, usize, &mut [f64])> {
    let (t1, t2) = span;
    let len = t2 - t1;
    let w = crate::poly::Poly::new(vec![0.0, 1.0, -1.0]).pow(m);
    let omega = k as f64 * core::f64::consts::PI;
    scalar_curve(span, max_order, move |t, n| {
        // s = (t−t₁)/T, h(t) = sin(ωs)·w(s); d/dt = (1/T) d/ds.
        let s = (t - t1) / len;
        let mut acc = 0.0;
        let mut binom = 1.0;
        for j in 0..=n {
            let sin_der = match (n - j) % 4 {
                0 => (omega * s).sin(),
                1 => (omega * s).cos(),
                2 => -(omega * s).sin(),
                _ => -(omega * s).cos(),
            } * crate::poly::pow_usize(omega, n - j);
            acc += binom * sin_der * w.eval_derivative(j, s);
            binom = binom * (n - j) as f64 / (j + 1) as f64;
        }
        acc / crate::poly::pow_usize(len, n)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Time,
    /// `∂/∂q^{(i)}`.
    Jet(usize),
}

/// An order-`m` Lagrangian `L(t, q, q′, …, q^{(m)})` on `R^d`.
pub trait Lagrangian {
    fn order(&self) -> usize;

    fn dim(&self) -> usize;

    fn autonomous(&self) -> bool {
        false
    }

    /// `jet` holds `q^{(k)}_i` at `k·dim + i`, `k ≤ m`.
    fn value(&self, t: f64, jet: &[f64]) -> Result<f64>;

    /// Writes the partial derivative for `slot` (`dim` entries, or one for
    /// [`Slot::Time`]).
    fn partial(&self, t: f64, jet: &[f64], slot: Slot, out: &mut [f64]) -> Result<()>;
}

impl<L: Lagrangian + ?Sized> Lagrangian for &L {
    fn order(&self) -> usize {
        (**self).order()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn autonomous(&self) -> bool {
        (**self).autonomous()
    }
    fn value(&self, t: f64, jet: &[f64]) -> Result<f64> {
        (**self).value(t, jet)
    }
    fn partial(&self, t: f64, jet: &[f64], slot: Slot, out: &mut [f64]) -> Result<()> {
        (**self).partial(t, jet, slot, out)
    }
}

type ValueFn = dyn Fn(f64, &[f64]) -> f64;
type PartialFn = dyn Fn(f64, &[f64], Slot, &mut [f64]);

/// Lagrangian assembled from closures.
pub struct FnLagrangian {
    order: usize,
    dim: usize,
    autonomous: bool,
    value: Box<ValueFn>,
    partial: Box<PartialFn>,
}

impl FnLagrangian {
    pub fn new(
        order: usize,
        dim: usize,
        autonomous: bool,
        value: impl Fn(f64, &[f64]) -> f64 + 'static,
        partial: impl Fn(f64, &[f64], Slot, &mut [f64]) + 'static,
    ) -> Self {
        Self {
            order,
            dim,
            autonomous,
            value: Box::new(value),
            partial: Box::new(partial),
        }
    }
}

impl Lagrangian for FnLagrangian {
    fn order(&self) -> usize {
        self.order
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn autonomous(&self) -> bool {
        self.autonomous
    }
    fn value(&self, t: f64, jet: &[f64]) -> Result<f64> {
        Ok((self.value)(t, jet))
    }
    fn partial(&self, t: f64, jet: &[f64], slot: Slot, out: &mut [f64]) -> Result<()> {
        (self.partial)(t, jet, slot, out);
        Ok(())
    }
}

/// Relative tolerance of the partial-derivative cross-check.
pub const PARTIAL_CHECK_TOL: f64 = 1e-5;

/// Cross-checks every supplied partial against central differences of the
/// value at `probes` seeded points drawn from `t ∈ [t_lo, t_hi]`,
/// `q^{(k)}_i ∈ [−radius, radius]`.
pub fn validate_partials<L: Lagrangian>(lag: &L, seed: u64, probes: usize, t_range: (f64, f64), radius: f64) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (m, d) = (lag.order(), lag.dim());
    let n = (m + 1) * d;
    let mut out = vec![0.0; d.max(1)];
    for _ in 0..probes {
        let t = rng.random_range(t_range.0..=t_range.1);
        let jet: Vec<f64> = (0..n).map(|_| rng.random_range(-radius..=radius)).collect();
        let v = lag.value(t, &jet)?;
        let scale = 1.0 + v.abs();
        let check = |slot: Slot, idx: Option<usize>, analytic: f64| -> Result<()> {
            let x0 = match idx {
                Some(i) => jet[i],
                None => t,
            };
            let h = 1e-6 * x0.abs().max(1.0);
            let eval = |x: f64| -> Result<f64> {
                match idx {
                    Some(i) => {
                        let mut j = jet.clone();
                        j[i] = x;
                        lag.value(t, &j)
                    }
                    None => lag.value(x, &jet),
                }
            };
            let fd = (eval(x0 + h)? - eval(x0 - h)?) / (2.0 * h);
            if (fd - analytic).abs() > PARTIAL_CHECK_TOL * analytic.abs().max(fd.abs()) + 1e-7 * scale {
                return Err(Error::validation(
                    "lagrangian partials",
                    alloc::format!("{slot:?} gives {analytic}, finite differences give {fd}"),
                ));
            }
            Ok(())
        };
        lag.partial(t, &jet, Slot::Time, &mut out[..1])?;
        check(Slot::Time, None, out[0])?;
        for k in 0..=m {
            lag.partial(t, &jet, Slot::Jet(k), &mut out[..d])?;
            for i in 0..d {
                check(Slot::Jet(k), Some(k * d + i), out[i])?;
            }
        }
    }
    Ok(())
}

fn jet_of<C: Curve>(curve: &C, t: f64, order: usize) -> Result<Vec<f64>> {
    let mut jet = vec![0.0; (order + 1) * curve.dim()];
    curve.jet(t, order, &mut jet)?;
    Ok(jet)
}

fn check_shapes<L: Lagrangian, C: Curve>(lag: &L, curve: &C) -> Result<()> {
    if lag.dim() != curve.dim() {
        return Err(Error::validation("curve", "dimension does not match the Lagrangian"));
    }
    if curve.max_order() < lag.order() {
        return Err(Error::Capability {
            requested: lag.order(),
            available: curve.max_order(),
        });
    }
    Ok(())
}

/// Integrates `g` over the curve span, splitting at the curve breakpoints.
/// Errors raised inside `g` abort the quadrature.
fn integrate_along<C: Curve>(curve: &C, tol: f64, mut g: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    let (a, b) = curve.span();
    let bp: Vec<f64> = curve.breakpoints().into_iter().filter(|&x| x > a && x < b).collect();
    let mut err = None;
    let q = integrate(
        |t| match g(t) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        },
        a,
        b,
        &bp,
        QuadOptions::with_tol(tol),
    );
    if let Some(e) = err {
        return Err(e);
    }
    Ok(q?.value)
}

/// `J[q] = ∫ L[q]^m dt`.
pub fn action<L: Lagrangian, C: Curve>(lag: &L, curve: &C, tol: f64) -> Result<f64> {
    check_shapes(lag, curve)?;
    let m = lag.order();
    integrate_along(curve, tol, |t| lag.value(t, &jet_of(curve, t, m)?))
}

/// First variation computed by the integral formula and by a central
/// difference of the action in direction `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstVariation {
    pub formula: f64,
    pub difference: f64,
}

/// Step of the central-difference surrogate for δJ.
pub const FIRST_VARIATION_STEP: f64 = 1e-5;
/// Step of the second difference for δ²J.
pub const SECOND_VARIATION_STEP: f64 = 1e-4;
/// Rounding noise of the difference integrands (relative to `L`) bounds the
/// achievable quadrature tolerance: about `ε_mach/s` and `ε_mach/s²`.
const FIRST_DIFFERENCE_TOL_FLOOR: f64 = 1e-10;
const SECOND_DIFFERENCE_TOL_FLOOR: f64 = 1e-7;
/// Bound on boundary values of admissible directions.
pub const BOUNDARY_TOL: f64 = 1e-10;

fn check_direction<L: Lagrangian, H: Curve>(lag: &L, h: &H) -> Result<()> {
    let m = lag.order();
    if h.max_order() < m || h.dim() != lag.dim() {
        return Err(Error::validation("direction", "needs the Lagrangian's dimension and order"));
    }
    let (a, b) = h.span();
    for t in [a, b] {
        let jet = jet_of(h, t, m.saturating_sub(1))?;
        if m > 0 && jet.iter().any(|v| v.abs() > BOUNDARY_TOL) {
            return Err(Error::validation(
                "direction",
                alloc::format!("h and its derivatives below order {m} must vanish at t = {t}"),
            ));
        }
    }
    Ok(())
}

fn shifted_value<L: Lagrangian>(lag: &L, t: f64, q: &[f64], h: &[f64], s: f64) -> Result<f64> {
    let jet: Vec<f64> = q.iter().zip(h).map(|(a, b)| a + s * b).collect();
    lag.value(t, &jet)
}

/// `δJ(q; h) = ∫ Σ_i ∂_{q^{(i)}}L[q] · h^{(i)} dt`, with the difference
/// quotient `(J(q+sh) − J(q−sh))/(2s)` for comparison.
pub fn first_variation<L: Lagrangian, C: Curve, H: Curve>(lag: &L, curve: &C, h: &H, tol: f64) -> Result<FirstVariation> {
    check_shapes(lag, curve)?;
    check_direction(lag, h)?;
    let (m, d) = (lag.order(), lag.dim());
    let mut p = vec![0.0; d];
    let formula = integrate_along(curve, tol, |t| {
        let q = jet_of(curve, t, m)?;
        let hv = jet_of(h, t, m)?;
        let mut acc = 0.0;
        for i in 0..=m {
            lag.partial(t, &q, Slot::Jet(i), &mut p)?;
            acc += (0..d).map(|c| p[c] * hv[i * d + c]).sum::<f64>();
        }
        Ok(acc)
    })?;
    let s = FIRST_VARIATION_STEP;
    let difference = integrate_along(curve, tol.max(FIRST_DIFFERENCE_TOL_FLOOR), |t| {
        let q = jet_of(curve, t, m)?;
        let hv = jet_of(h, t, m)?;
        Ok((shifted_value(lag, t, &q, &hv, s)? - shifted_value(lag, t, &q, &hv, -s)?) / (2.0 * s))
    })?;
    Ok(FirstVariation { formula, difference })
}

/// `δ²J(q; h)` by the second difference `(J(q+sh) − 2J(q) + J(q−sh))/s²`
/// applied under the integral. The quadrature tolerance is floored at the
/// rounding noise of the integrand.
pub fn second_variation<L: Lagrangian, C: Curve, H: Curve>(lag: &L, curve: &C, h: &H, tol: f64) -> Result<f64> {
    check_shapes(lag, curve)?;
    check_direction(lag, h)?;
    let m = lag.order();
    let s = SECOND_VARIATION_STEP;
    integrate_along(curve, tol.max(SECOND_DIFFERENCE_TOL_FLOOR), |t| {
        let q = jet_of(curve, t, m)?;
        let hv = jet_of(h, t, m)?;
        let v0 = lag.value(t, &q)?;
        Ok((shifted_value(lag, t, &q, &hv, s)? - 2.0 * v0 + shifted_value(lag, t, &q, &hv, -s)?) / (s * s))
    })
}

/// A residual vector with the largest magnitude among the terms that were
/// summed to produce it.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub value: Vec<f64>,
    pub magnitude: f64,
}

impl Residual {
    pub fn norm(&self) -> f64 {
        self.value.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// `q ↦ ∂σ/∂s(0, q)`.
pub type StateMap = dyn Fn(&[f64]) -> Vec<f64>;

/// Generalized force `Q(t, jet)`.
pub type Force<'f> = dyn Fn(f64, &[f64]) -> Result<Vec<f64>> + 'f;

/// Infinitesimal generators of a one-parameter family of time and state
/// reparametrizations: `∂τ/∂s(0,t)`, its time derivative, and `∂σ/∂s(0,q)`.
pub struct Symmetry {
    pub tau_s: Box<dyn Fn(f64) -> f64>,
    pub tau_s_dot: Box<dyn Fn(f64) -> f64>,
    pub sigma_s: Box<StateMap>,
}

impl Symmetry {
    pub fn time_translation(dim: usize) -> Self {
        Self {
            tau_s: Box::new(|_| 1.0),
            tau_s_dot: Box::new(|_| 0.0),
            sigma_s: Box::new(move |_| vec![0.0; dim]),
        }
    }

    pub fn space_translation(dim: usize) -> Self {
        Self {
            tau_s: Box::new(|_| 0.0),
            tau_s_dot: Box::new(|_| 0.0),
            sigma_s: Box::new(move |_| vec![1.0; dim]),
        }
    }
}

/// Evaluates variational identities along a curve.
pub struct Probe<'a, L: ?Sized, C: ?Sized> {
    pub lag: &'a L,
    pub curve: &'a C,
    /// Central-difference spacing in time.
    pub h: f64,
}

type VecFn<'f> = dyn Fn(f64) -> Result<Vec<f64>> + 'f;

impl<'a, L: Lagrangian + ?Sized, C: Curve + ?Sized> Probe<'a, L, C> {
    pub fn new(lag: &'a L, curve: &'a C) -> Result<Self> {
        if lag.dim() != curve.dim() {
            return Err(Error::validation("curve", "dimension does not match the Lagrangian"));
        }
        if curve.max_order() < lag.order() {
            return Err(Error::Capability {
                requested: lag.order(),
                available: curve.max_order(),
            });
        }
        let (a, b) = curve.span();
        Ok(Self {
            lag,
            curve,
            h: 1e-3 * (b - a),
        })
    }

    fn dim(&self) -> usize {
        self.lag.dim()
    }

    fn jet(&self, t: f64) -> Result<Vec<f64>> {
        let mut jet = vec![0.0; (self.lag.order() + 1) * self.dim()];
        self.curve.jet(t, self.lag.order(), &mut jet)?;
        Ok(jet)
    }

    /// Time extent on each side of `t` used by an identity of the given
    /// differentiation depth.
    pub fn stencil_radius(&self, depth: usize) -> f64 {
        2.0 * self.h * depth as f64
    }

    /// True when a stencil of the given depth around `t` stays inside the
    /// span and away from excluded layer neighbourhoods.
    pub fn usable(&self, t: f64, depth: usize) -> bool {
        let r = self.stencil_radius(depth);
        let (a, b) = self.curve.span();
        t - r >= a && t + r <= b && !self.curve.excluded(t - r, t + r)
    }

    /// `d^k/dt^k g(t)` by nested five-point central differences.
    pub fn dt(&self, g: &VecFn<'_>, t: f64, k: usize) -> Result<Vec<f64>> {
        if k == 0 {
            return g(t);
        }
        let h = self.h;
        let mut acc: Option<Vec<f64>> = None;
        for (c, off) in [(1.0, -2.0), (-8.0, -1.0), (8.0, 1.0), (-1.0, 2.0)] {
            let v = self.dt(g, t + off * h, k - 1)?;
            let a = acc.get_or_insert_with(|| vec![0.0; v.len()]);
            for (ai, vi) in a.iter_mut().zip(&v) {
                *ai += c * vi;
            }
        }
        let mut out = acc.unwrap();
        out.iter_mut().for_each(|v| *v /= 12.0 * h);
        Ok(out)
    }

    /// `∂_{slot}L[q](t)`.
    pub fn partial(&self, t: f64, slot: Slot) -> Result<Vec<f64>> {
        let jet = self.jet(t)?;
        let mut out = vec![0.0; if slot == Slot::Time { 1 } else { self.dim() }];
        self.lag.partial(t, &jet, slot, &mut out)?;
        Ok(out)
    }

    pub fn lagrangian(&self, t: f64) -> Result<f64> {
        self.lag.value(t, &self.jet(t)?)
    }

    /// `φ^j(q)(t) = Σ_{i=0}^{m−j} (−1)^i d^i/dt^i ∂_{q^{(i+j)}}L[q](t)`, `0 ≤ j ≤ m`;
    /// `φ^0` is the Euler–Lagrange expression.
    pub fn phi(&self, t: f64, j: usize) -> Result<Residual> {
        let m = self.lag.order();
        if j > m {
            return Err(Error::Capability { requested: j, available: m });
        }
        let mut value = vec![0.0; self.dim()];
        let mut magnitude = 0.0_f64;
        for i in 0..=(m - j) {
            let g = |s: f64| self.partial(s, Slot::Jet(i + j));
            let term = self.dt(&g, t, i)?;
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            for (v, x) in value.iter_mut().zip(&term) {
                *v += sign * x;
                magnitude = magnitude.max(x.abs());
            }
        }
        Ok(Residual { value, magnitude })
    }

    /// Left-hand side of the Euler–Lagrange equation in differential form.
    pub fn el_residual(&self, t: f64) -> Result<Residual> {
        self.phi(t, 0)
    }

    /// Residual of `Σ_i (−1)^{i+1} d^i/dt^i ∂_{q^{(i)}}L[q] = Q(t, jet)`, i.e.
    /// `d/dt ∂L/∂q̇ − ∂L/∂q = Q` for first-order Lagrangians, with `Q` the
    /// generalized force acting on the system.
    pub fn dalembert_residual(&self, t: f64, force: &Force<'_>) -> Result<Residual> {
        let mut r = self.el_residual(t)?;
        let q = force(t, &self.jet(t)?)?;
        for (v, f) in r.value.iter_mut().zip(&q) {
            *v = -*v - f;
            r.magnitude = r.magnitude.max(f.abs());
        }
        Ok(r)
    }

    /// `d/dt φ^j − ∂_{q^{(j−1)}}L + φ^{j−1}`, `1 ≤ j ≤ m`.
    pub fn phi_recurrence(&self, t: f64, j: usize) -> Result<Residual> {
        if j == 0 || j > self.lag.order() {
            return Err(Error::validation("φ index", "recurrence holds for 1 ≤ j ≤ m"));
        }
        let g = |s: f64| self.phi(s, j).map(|r| r.value);
        let d = self.dt(&g, t, 1)?;
        let p = self.partial(t, Slot::Jet(j - 1))?;
        let prev = self.phi(t, j - 1)?;
        let magnitude = d
            .iter()
            .chain(&p)
            .chain(&prev.value)
            .fold(prev.magnitude, |m, v| m.max(v.abs()));
        let value = (0..self.dim()).map(|i| d[i] - p[i] + prev.value[i]).collect();
        Ok(Residual { value, magnitude })
    }

    /// `L − Σ_{j=1}^m φ^j · q^{(j)}`.
    pub fn energy_like(&self, t: f64) -> Result<f64> {
        let jet = self.jet(t)?;
        let d = self.dim();
        let mut v = self.lag.value(t, &jet)?;
        for j in 1..=self.lag.order() {
            let phi = self.phi(t, j)?;
            v -= (0..d).map(|i| phi.value[i] * jet[j * d + i]).sum::<f64>();
        }
        Ok(v)
    }

    /// `d/dt(L − Σ φ^j·q^{(j)}) − ∂_t L`.
    pub fn dbr_residual(&self, t: f64) -> Result<Residual> {
        let g = |s: f64| self.energy_like(s).map(|v| vec![v]);
        let d = self.dt(&g, t, 1)?[0];
        let pt = self.partial(t, Slot::Time)?[0];
        let magnitude = d.abs().max(pt.abs()).max(self.energy_like(t)?.abs());
        Ok(Residual {
            value: vec![d - pt],
            magnitude,
        })
    }

    /// `η^0 = ∂σ/∂s(0, q)`, `η^i = d/dt η^{i−1} − q^{(i)}·d/dt ∂τ/∂s(0, t)`.
    fn eta(&self, sym: &Symmetry, t: f64, i: usize) -> Result<Vec<f64>> {
        let jet = self.jet(t)?;
        let d = self.dim();
        if i == 0 {
            return Ok((sym.sigma_s)(&jet[..d]));
        }
        let g = |s: f64| self.eta(sym, s, i - 1);
        let mut v = self.dt(&g, t, 1)?;
        let td = (sym.tau_s_dot)(t);
        for c in 0..d {
            v[c] -= jet[i * d + c] * td;
        }
        Ok(v)
    }

    /// `C[q](t) = Σ_{i=1}^m φ^i·η^{i−1} + (L − Σ φ^i·q^{(i)})·∂τ/∂s(0, t)`.
    pub fn noether_constant(&self, sym: &Symmetry, t: f64) -> Result<f64> {
        let d = self.dim();
        let mut c = self.energy_like(t)? * (sym.tau_s)(t);
        for i in 1..=self.lag.order() {
            let phi = self.phi(t, i)?;
            let eta = self.eta(sym, t, i - 1)?;
            c += (0..d).map(|k| phi.value[k] * eta[k]).sum::<f64>();
        }
        Ok(c)
    }
}
