//! Nets of smooth functions: evaluation, directional derivatives, 1-D
//! integration with declared singular layers, graded norms and Taylor
//! remainder checks.

use alloc::boxed::Box;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::gauge::{Gauge, GenNumber};
use crate::mollifier::EmbeddedField;
use crate::poly::{pow_usize, Poly};
use crate::quad::{integrate, QuadOptions, Quadrature};
use crate::{Error, Result};
#[cfg(not(feature = "std"))]
use num_traits::Float;

type Evaluator = dyn Fn(f64, &[f64]) -> f64 + Send + Sync;
type Partials = dyn Fn(f64, &[f64], &[f64], usize) -> Result<f64> + Send + Sync;
type LayerScale = dyn Fn(f64) -> f64 + Send + Sync;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeMode {
    /// Directional derivatives supplied by the caller.
    Analytic,
    /// Central differences of the evaluator.
    FiniteDifference,
}

/// Declared singular layers: points where mollified coefficients are steep,
/// with the per-ε scale `b_ε` fixing the layer half-width `1/b_ε`.
#[derive(Clone)]
pub struct Layers {
    pub points: Vec<f64>,
    scale: Arc<LayerScale>,
}

impl Layers {
    pub fn new(points: Vec<f64>, scale: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            points,
            scale: Arc::new(scale),
        }
    }

    pub fn half_width(&self, eps: f64) -> f64 {
        1.0 / (self.scale)(eps)
    }
}

/// A net `(f_ε)` of smooth scalar functions on `R^dim`.
#[derive(Clone)]
pub struct GsfField {
    dim: usize,
    eval: Arc<Evaluator>,
    partials: Option<Arc<Partials>>,
    max_order: usize,
    layers: Option<Layers>,
}

impl core::fmt::Debug for GsfField {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("GsfField")
            .field("dim", &self.dim)
            .field("max_order", &self.max_order)
            .field("mode", &self.mode())
            .finish()
    }
}

/// Per-ε maximum of `|f^{(n)}|`, `n ≤ l`, over a compact interval.
#[derive(Debug, Clone, PartialEq)]
pub struct GradedNorm {
    pub order: usize,
    pub value: GenNumber,
}

/// Taylor polynomial residual against the integral form of the remainder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaylorReport {
    /// `|f(a+k) − Σ_{j≤n} f^{(j)}(a) k^j / j!|`.
    pub residual: f64,
    /// `|k^{n+1}/n! ∫₀¹ (1−t)^n f^{(n+1)}(a+tk) dt|`.
    pub remainder: f64,
    pub ratio: f64,
}

/// Nodes used by [`GsfField::graded_norm`] before local refinement.
pub const NORM_SAMPLES: usize = 2048;

impl GsfField {
    /// Finite-difference field on `R^dim`.
    pub fn from_fn(dim: usize, max_order: usize, f: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            dim,
            eval: Arc::new(f),
            partials: None,
            max_order,
            layers: None,
        }
    }

    /// Finite-difference field of one variable.
    pub fn from_fn_1d(max_order: usize, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::from_fn(1, max_order, move |e, x| f(e, x[0]))
    }

    /// Field with caller-supplied directional derivatives
    /// `partials(ε, x, v, n) = d^n/ds^n f_ε(x + s v)|_{s=0}`.
    pub fn analytic(
        dim: usize,
        max_order: usize,
        f: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
        partials: impl Fn(f64, &[f64], &[f64], usize) -> Result<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            eval: Arc::new(f),
            partials: Some(Arc::new(partials)),
            max_order,
            layers: None,
        }
    }

    /// Analytic field of one variable from `d^n/dx^n f_ε(x)`.
    pub fn analytic_1d(max_order: usize, d: impl Fn(f64, f64, usize) -> Result<f64> + Send + Sync + 'static) -> Self {
        let d = Arc::new(d);
        let d2 = d.clone();
        Self::analytic(
            1,
            max_order,
            move |e, x| d(e, x[0], 0).unwrap_or(f64::NAN),
            move |e, x, v, n| Ok(d2(e, x[0], n)? * pow_usize(v[0], n)),
        )
    }

    /// ε-independent polynomial with exact derivatives of every order.
    pub fn from_poly(p: Poly) -> Self {
        let order = p.degree() + 1;
        Self::analytic_1d(order.max(8), move |_, x, n| Ok(p.eval_derivative(n, x)))
    }

    /// Embedded distribution; its layers are declared automatically.
    pub fn from_embedded(field: EmbeddedField) -> Self {
        let max = field.max_derivative_order();
        let points = field.layers();
        let scale_field = field.clone();
        let g = Self::analytic_1d(max, move |e, x, n| field.derivative(e, x, n));
        g.with_layers(Layers::new(points, move |e| scale_field.scale(e)))
    }

    pub fn with_layers(mut self, layers: Layers) -> Self {
        self.layers = Some(layers);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn mode(&self) -> DerivativeMode {
        if self.partials.is_some() {
            DerivativeMode::Analytic
        } else {
            DerivativeMode::FiniteDifference
        }
    }

    pub fn layers(&self) -> Option<&Layers> {
        self.layers.as_ref()
    }

    pub fn eval(&self, eps: f64, x: &[f64]) -> f64 {
        (self.eval)(eps, x)
    }

    pub fn eval_1d(&self, eps: f64, x: f64) -> f64 {
        (self.eval)(eps, &[x])
    }

    /// True when `x` lies within `2/b_ε` of a declared layer, where
    /// finite-difference derivatives lose accuracy.
    pub fn near_layer(&self, eps: f64, x: &[f64]) -> bool {
        match &self.layers {
            Some(l) => {
                let w = 2.0 * l.half_width(eps);
                l.points.iter().any(|&p| (x[0] - p).abs() < w)
            }
            None => false,
        }
    }

    /// `d^n/ds^n f_ε(x + s v)` at `s = 0`.
    pub fn derivative(&self, eps: f64, x: &[f64], v: &[f64], order: usize) -> Result<f64> {
        if order > self.max_order {
            return Err(Error::Capability {
                requested: order,
                available: self.max_order,
            });
        }
        if x.len() != self.dim || v.len() != self.dim {
            return Err(Error::validation("gsf point", "dimension does not match the field"));
        }
        if let Some(p) = &self.partials {
            return p(eps, x, v, order);
        }
        if order == 0 {
            return Ok(self.eval(eps, x));
        }
        let scale = x.iter().fold(1.0_f64, |m, xi| m.max(xi.abs()));
        let h = f64::EPSILON.powf(1.0 / (order as f64 + 2.0)) * scale;
        Ok(central_difference(|s| {
            let y: Vec<f64> = x.iter().zip(v).map(|(xi, vi)| xi + s * vi).collect();
            self.eval(eps, &y)
        }, order, h))
    }

    pub fn derivative_1d(&self, eps: f64, x: f64, order: usize) -> Result<f64> {
        self.derivative(eps, &[x], &[1.0], order)
    }

    /// Breakpoints for quadrature on `[a, b]`: each declared layer and its edges.
    pub fn breakpoints(&self, eps: f64, a: f64, b: f64) -> Vec<f64> {
        let mut out = Vec::new();
        if let Some(l) = &self.layers {
            let w = l.half_width(eps);
            for &p in &l.points {
                for c in [p - w, p, p + w] {
                    if c > a && c < b {
                        out.push(c);
                    }
                }
            }
        }
        out
    }

    /// `∫_a^b f_ε` to absolute tolerance `tol`.
    pub fn integrate_1d(&self, eps: f64, a: f64, b: f64, tol: f64) -> Result<Quadrature> {
        if !(a <= b) {
            return Err(Error::validation("integration bounds", "need a ≤ b"));
        }
        let bp = self.breakpoints(eps, a, b);
        integrate(|x| self.eval_1d(eps, x), a, b, &bp, QuadOptions::with_tol(tol))
    }

    /// `‖f‖_l` on `K_ε = [lo, hi]` for every grid ε: sampling on
    /// [`NORM_SAMPLES`] nodes plus golden-section refinement around the
    /// best node. A lower bound of the true maximum.
    pub fn graded_norm(
        &self,
        gauge: &Arc<Gauge>,
        l: usize,
        interval: impl Fn(f64) -> (f64, f64),
    ) -> Result<GradedNorm> {
        if l > self.max_order {
            return Err(Error::Capability {
                requested: l,
                available: self.max_order,
            });
        }
        let value = GenNumber::try_from_fn(gauge, |eps| {
            let (lo, hi) = interval(eps);
            let mut best = 0.0_f64;
            for n in 0..=l {
                let g = |x: f64| self.derivative_1d(eps, x, n).map(f64::abs);
                best = best.max(maximize(&g, lo, hi)?);
            }
            Ok(best)
        })?;
        Ok(GradedNorm { order: l, value })
    }

    /// Compares the Taylor polynomial of order `n` at `a` with `f(a+k)` and
    /// with the integral remainder.
    pub fn taylor_check(&self, eps: f64, a: f64, k: f64, n: usize) -> Result<TaylorReport> {
        if n + 1 > self.max_order {
            return Err(Error::Capability {
                requested: n + 1,
                available: self.max_order,
            });
        }
        let mut poly = 0.0;
        let mut fact = 1.0;
        for j in 0..=n {
            if j > 0 {
                fact *= j as f64;
            }
            poly += self.derivative_1d(eps, a, j)? * pow_usize(k, j) / fact;
        }
        let residual = (self.eval_1d(eps, a + k) - poly).abs();
        let mut err = None;
        let bp: Vec<f64> = self
            .breakpoints(eps, a.min(a + k), a.max(a + k))
            .into_iter()
            .map(|x| (x - a) / k)
            .collect();
        let q = integrate(
            |t| {
                let d = self.derivative_1d(eps, a + t * k, n + 1).unwrap_or_else(|e| {
                    err = Some(e);
                    0.0
                });
                pow_usize(1.0 - t, n) * d
            },
            0.0,
            1.0,
            &bp,
            QuadOptions::with_tol(1e-14),
        )?;
        if let Some(e) = err {
            return Err(e);
        }
        let remainder = (pow_usize(k, n + 1) / fact * q.value).abs();
        let ratio = if remainder > 0.0 { residual / remainder } else { f64::NAN };
        Ok(TaylorReport {
            residual,
            remainder,
            ratio,
        })
    }

    /// Pointwise sum `f + g`.
    pub fn add(&self, other: &GsfField) -> GsfField {
        self.combine(other, |a, b| a + b, |fs, gs| Ok(fs[fs.len() - 1] + gs[gs.len() - 1]))
    }

    /// Pointwise product `f · g` (Leibniz rule in analytic mode).
    pub fn mul(&self, other: &GsfField) -> GsfField {
        self.combine(other, |a, b| a * b, |fs, gs| {
            let n = fs.len() - 1;
            let mut binom = 1.0;
            let mut s = 0.0;
            for k in 0..=n {
                s += binom * fs[k] * gs[n - k];
                binom = binom * (n - k) as f64 / (k + 1) as f64;
            }
            Ok(s)
        })
    }

    fn combine(
        &self,
        other: &GsfField,
        op: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        rule: impl Fn(&[f64], &[f64]) -> Result<f64> + Send + Sync + 'static,
    ) -> GsfField {
        let (f, g) = (self.clone(), other.clone());
        let (f2, g2) = (self.clone(), other.clone());
        let eval = move |e: f64, x: &[f64]| op(f.eval(e, x), g.eval(e, x));
        let max_order = self.max_order.min(other.max_order);
        let layers = self.layers.clone().or_else(|| other.layers.clone());
        let out = if self.partials.is_some() && other.partials.is_some() {
            let partials: Box<Partials> = Box::new(move |e, x, v, n| {
                let fs = (0..=n).map(|k| f2.derivative(e, x, v, k)).collect::<Result<Vec<_>>>()?;
                let gs = (0..=n).map(|k| g2.derivative(e, x, v, k)).collect::<Result<Vec<_>>>()?;
                rule(&fs, &gs)
            });
            GsfField {
                dim: self.dim,
                eval: Arc::new(eval),
                partials: Some(Arc::from(partials)),
                max_order,
                layers: None,
            }
        } else {
            GsfField::from_fn(self.dim, max_order, eval)
        };
        GsfField { layers, ..out }
    }
}

/// `n`-th central difference `Σ_k (−1)^k C(n,k) g((n/2 − k)h) / h^n`.
pub fn central_difference(g: impl Fn(f64) -> f64, n: usize, h: f64) -> f64 {
    let mut binom = 1.0;
    let mut s = 0.0;
    for k in 0..=n {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        s += sign * binom * g((n as f64 / 2.0 - k as f64) * h);
        binom = binom * (n - k) as f64 / (k + 1) as f64;
    }
    s / pow_usize(h, n)
}

/// Maximum of `g` on `[lo, hi]` by sampling and golden-section refinement.
fn maximize(g: &impl Fn(f64) -> Result<f64>, lo: f64, hi: f64) -> Result<f64> {
    if hi <= lo {
        return g(lo);
    }
    let n = NORM_SAMPLES;
    let h = (hi - lo) / (n - 1) as f64;
    let mut best = (lo, g(lo)?);
    for i in 1..n {
        let x = lo + h * i as f64;
        let v = g(x)?;
        if v > best.1 {
            best = (x, v);
        }
    }
    let (mut a, mut b) = ((best.0 - h).max(lo), (best.0 + h).min(hi));
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut gc, mut gd) = (g(c)?, g(d)?);
    for _ in 0..60 {
        if gc > gd {
            b = d;
            d = c;
            gd = gc;
            c = b - r * (b - a);
            gc = g(c)?;
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + r * (b - a);
            gd = g(d)?;
        }
    }
    Ok(best.1.max(gc).max(gd))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauge::GaugeKind;
    use crate::mollifier::{MollifierSpec, Source};

    fn heaviside_field() -> (GsfField, Arc<MollifierSpec>) {
        let m = Arc::new(MollifierSpec::build(4).unwrap());
        let e = EmbeddedField::new(Source::Heaviside, m.clone(), Arc::new(Gauge::default_power()));
        (GsfField::from_embedded(e), m)
    }

    #[test]
    fn derivative_of_square() {
        let f = GsfField::from_fn_1d(3, |_, x| x * x);
        assert!((f.derivative_1d(0.1, 3.0, 1).unwrap() - 6.0).abs() <= 1e-7);
        assert!((f.derivative_1d(0.1, 3.0, 2).unwrap() - 2.0).abs() <= 1e-4);
        assert!(matches!(f.derivative_1d(0.1, 3.0, 4), Err(Error::Capability { .. })));
    }

    #[test]
    fn directional_derivative() {
        let f = GsfField::from_fn(2, 2, |_, x| x[0] * x[0] * x[1]);
        // ∂/∂v at (1,2) with v = (1,1): 2x y + x² = 5.
        assert!((f.derivative(0.1, &[1.0, 2.0], &[1.0, 1.0], 1).unwrap() - 5.0).abs() <= 1e-7);
    }

    #[test]
    fn embedded_heaviside_derivatives() {
        let (h, m) = heaviside_field();
        let eps = 2f64.powi(-10);
        assert!(h.derivative_1d(eps, 0.5, 1).unwrap().abs() <= 1e-8);
        let b = m.scale(GaugeKind::Power, eps);
        let d0 = h.derivative_1d(eps, 0.0, 1).unwrap();
        assert!((d0 - b * m.psi_at_zero()).abs() <= 1e-4 * b);
        assert!(h.near_layer(eps, &[0.5 / b]));
        assert!(!h.near_layer(eps, &[0.5]));
    }

    #[test]
    fn integration_examples() {
        let gauge = Arc::new(Gauge::default_power());
        let m = Arc::new(MollifierSpec::build(4).unwrap());
        let d = GsfField::from_embedded(EmbeddedField::new(Source::Dirac, m.clone(), gauge));
        let eps = 2f64.powi(-12);
        let w = 1.0 / m.scale(GaugeKind::Power, eps);
        assert!((d.integrate_1d(eps, -w, w, 1e-12).unwrap().value - 1.0).abs() <= 1e-8);
        assert!((d.integrate_1d(eps, -1.0, 1.0, 1e-12).unwrap().value - 1.0).abs() <= 1e-8);

        let cos = GsfField::from_fn_1d(2, |_, x| x.cos());
        let v = cos.integrate_1d(0.1, 0.3, 1.7, 1e-12).unwrap().value;
        assert!((v - (1.7f64.sin() - 0.3f64.sin())).abs() <= 1e-12);

        // ∫_1^4 t dt = ∫_1^2 s²·2s ds = 7.5
        let t = GsfField::from_fn_1d(2, |_, x| x);
        let sub = GsfField::from_fn_1d(2, |_, s| s * s * 2.0 * s);
        assert!((t.integrate_1d(0.1, 1.0, 4.0, 1e-12).unwrap().value - 7.5).abs() <= 1e-12);
        assert!((sub.integrate_1d(0.1, 1.0, 2.0, 1e-12).unwrap().value - 7.5).abs() <= 1e-12);
        assert!(t.integrate_1d(0.1, 1.0, 0.0, 1e-12).is_err());
    }

    #[test]
    fn graded_norm_examples() {
        let gauge = Arc::new(Gauge::default_power());
        let id = GsfField::from_poly(Poly::new(alloc::vec![0.0, 1.0]));
        let n = id.graded_norm(&gauge, 0, |_| (0.0, 1.0)).unwrap();
        assert!(n.value.values().iter().all(|&v| v == 1.0));

        let m = Arc::new(MollifierSpec::build(4).unwrap());
        let d = GsfField::from_embedded(EmbeddedField::new(Source::Dirac, m.clone(), gauge.clone()));
        let n = d.graded_norm(&gauge, 0, |_| (-1.0, 1.0)).unwrap();
        // ψ attains its maximum at 0 for j = 4 (p decreasing in x²).
        for (v, &e) in n.value.values().iter().zip(gauge.eps()) {
            let b = m.scale(GaugeKind::Power, e);
            assert!((v - b * m.psi_at_zero()).abs() <= 1e-9 * b);
        }
        assert!(n.value.values().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn taylor_examples() {
        let exp = GsfField::analytic_1d(8, |_, x, _| Ok(x.exp()));
        let r = exp.taylor_check(0.1, 0.0, 0.1, 3).unwrap();
        assert!(r.residual <= 5e-6);
        assert!((r.ratio - 1.0).abs() < 1e-8);

        let (h, _) = heaviside_field();
        let r = h.taylor_check(2f64.powi(-10), 0.5, 0.01, 2).unwrap();
        assert!(r.residual <= 1e-10);

        let r1 = exp.taylor_check(0.1, 0.0, 0.1, 3).unwrap().residual;
        let r2 = exp.taylor_check(0.1, 0.0, 0.05, 3).unwrap().residual;
        assert!(((r2 / r1).log2() + 4.0).abs() < 0.1);
    }

    #[test]
    fn central_difference_is_exact_on_low_degree() {
        let cube = |x: f64| 1.0 + x * x * x;
        assert!((central_difference(cube, 3, 0.1) - 6.0).abs() < 1e-10);
        assert!(central_difference(cube, 4, 0.1).abs() < 1e-8);
    }

    #[test]
    fn product_field_uses_leibniz() {
        let f = GsfField::from_poly(Poly::new(alloc::vec![1.0, 2.0, 3.0]));
        let g = GsfField::from_poly(Poly::new(alloc::vec![0.0, -1.0, 0.0, 4.0]));
        let fg = f.mul(&g);
        assert_eq!(fg.mode(), DerivativeMode::Analytic);
        let prod = Poly::new(alloc::vec![1.0, 2.0, 3.0]).mul(&Poly::new(alloc::vec![0.0, -1.0, 0.0, 4.0]));
        for n in 0..4 {
            let x = 0.7;
            assert!((fg.derivative_1d(0.1, x, n).unwrap() - prod.eval_derivative(n, x)).abs() < 1e-12);
        }
        let s = f.add(&g);
        assert!((s.derivative_1d(0.1, 0.7, 2).unwrap() - (6.0 + 24.0 * 0.7)).abs() < 1e-12);
    }
}
