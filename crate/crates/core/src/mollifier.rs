//! Vanishing-moment mollifiers and the embedding of Dirac, Heaviside and
//! piecewise-polynomial data as nets of smooth functions.
//!
//! The profile is `ψ(x) = p(x)·exp(−1/(1−x²))` on `(−1, 1)` with `p` an even
//! polynomial chosen so that `∫ψ = 1` and `∫x^k ψ = 0` for `1 ≤ k ≤ j`. The
//! same profile is used for every ε; the net enters only through the scale
//! `b_ε = ρ_ε^{−a}`.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::gauge::{Gauge, GaugeKind};
use crate::linalg::solve;
use crate::poly::Piecewise;
use crate::quad::{gauss7, integrate, QuadOptions};
use crate::{Error, Result};
#[cfg(not(feature = "std"))]
use num_traits::Float;

/// Cells of the precomputed primitive of ψ on `[−1, 1]`.
pub const PRIMITIVE_CELLS: usize = 4096;

/// Largest supported moment order.
pub const MAX_MOMENT_ORDER: usize = 12;

/// The bump weight `exp(−1/(1−x²))`, zero outside `(−1, 1)`.
pub fn bump(x: f64) -> f64 {
    let r = 1.0 - x * x;
    if r <= 0.0 {
        0.0
    } else {
        (-1.0 / r).exp()
    }
}

/// `∫_{−1}^{1} x^n bump(x) dx` by composite 7-point Gauss on `[0, 1]`,
/// doubled (zero for odd n). The bump is smooth, so 2048 cells are far
/// below rounding level.
fn bump_moment(n: usize) -> f64 {
    if n % 2 == 1 {
        return 0.0;
    }
    let cells = 2048;
    let h = 1.0 / cells as f64;
    let half: f64 = (0..cells)
        .map(|i| {
            let a = h * i as f64;
            gauss7(|x| crate::poly::pow_usize(x, n) * bump(x), a, a + h)
        })
        .sum();
    2.0 * half
}

#[derive(Debug, Clone, PartialEq)]
pub struct MollifierSpec {
    moment_order: usize,
    /// `c_k` of `p(x) = Σ c_k x^{2k}`.
    coeffs: Vec<f64>,
    scale_exponent: f64,
    /// `F_i = ∫_{−1}^{x_i} ψ` on the uniform nodes `x_i = −1 + 2i/PRIMITIVE_CELLS`.
    primitive: Arc<Vec<f64>>,
}

impl MollifierSpec {
    /// Mollifier with vanishing moments up to even order `j ∈ [2, 12]` and
    /// scale `b_ε = ρ_ε^{−1/2}`.
    pub fn build(j: usize) -> Result<Self> {
        if !(2..=MAX_MOMENT_ORDER).contains(&j) || !j.is_multiple_of(2) {
            return Err(Error::validation(
                "mollifier.moment_order",
                alloc::format!("must be even and in [2, {MAX_MOMENT_ORDER}], got {j}"),
            ));
        }
        Self::build_unchecked(j)
    }

    /// Solves the moment system for any even `j ≤ 12` without range
    /// validation. `j = 0` gives the normalized bump, which has non-vanishing
    /// second moment; used to exercise failure reporting.
    pub fn build_unchecked(j: usize) -> Result<Self> {
        if j > MAX_MOMENT_ORDER || !j.is_multiple_of(2) {
            return Err(Error::validation(
                "mollifier.moment_order",
                alloc::format!("must be even and at most {MAX_MOMENT_ORDER}, got {j}"),
            ));
        }
        let n = j / 2 + 1;
        let mu: Vec<f64> = (0..=4 * (n - 1)).map(bump_moment).collect();
        let mut a = alloc::vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                a[i * n + k] = mu[2 * i + 2 * k];
            }
        }
        let mut rhs = alloc::vec![0.0; n];
        rhs[0] = 1.0;
        let coeffs = solve(&a, &rhs).map_err(|_| Error::Construction(alloc::format!("singular moment matrix for j = {j}")))?;
        let mut spec = Self {
            moment_order: j,
            coeffs,
            scale_exponent: 0.5,
            primitive: Arc::new(Vec::new()),
        };
        spec.primitive = Arc::new(spec.tabulate_primitive());
        Ok(spec)
    }

    pub fn with_scale_exponent(mut self, a: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::validation("mollifier.scale_exponent", "must be positive"));
        }
        self.scale_exponent = a;
        Ok(self)
    }

    fn tabulate_primitive(&self) -> Vec<f64> {
        let h = 2.0 / PRIMITIVE_CELLS as f64;
        let mut table = Vec::with_capacity(PRIMITIVE_CELLS + 1);
        let mut acc = 0.0;
        table.push(0.0);
        for i in 0..PRIMITIVE_CELLS {
            let a = -1.0 + h * i as f64;
            acc += gauss7(|x| self.psi(x), a, a + h);
            table.push(acc);
        }
        table
    }

    pub fn moment_order(&self) -> usize {
        self.moment_order
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn scale_exponent(&self) -> f64 {
        self.scale_exponent
    }

    fn p(&self, x: f64) -> f64 {
        let x2 = x * x;
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x2 + c)
    }

    fn dp(&self, x: f64) -> f64 {
        let x2 = x * x;
        let mut acc = 0.0;
        for (k, &c) in self.coeffs.iter().enumerate().skip(1).rev() {
            acc = acc * x2 + 2.0 * k as f64 * c;
        }
        acc * x
    }

    fn d2p(&self, x: f64) -> f64 {
        let x2 = x * x;
        let mut acc = 0.0;
        for (k, &c) in self.coeffs.iter().enumerate().skip(1).rev() {
            acc = acc * x2 + (2 * k * (2 * k - 1)) as f64 * c;
        }
        acc
    }

    /// The profile ψ.
    pub fn psi(&self, x: f64) -> f64 {
        if x.abs() >= 1.0 {
            0.0
        } else {
            self.p(x) * bump(x)
        }
    }

    /// `ψ^{(n)}(x)` for `n ≤ 2`.
    pub fn psi_derivative(&self, x: f64, n: usize) -> Result<f64> {
        if n > 2 {
            return Err(Error::Capability { requested: n, available: 2 });
        }
        let r = 1.0 - x * x;
        if r <= 0.0 {
            return Ok(0.0);
        }
        let w = bump(x);
        if n == 0 {
            return Ok(self.p(x) * w);
        }
        // bump' = bump·g, g = −2x/r², g' = −2/r² − 8x²/r³.
        let g = -2.0 * x / (r * r);
        if n == 1 {
            return Ok(w * (self.dp(x) + self.p(x) * g));
        }
        let dg = -2.0 / (r * r) - 8.0 * x * x / (r * r * r);
        Ok(w * (self.d2p(x) + 2.0 * self.dp(x) * g + self.p(x) * (g * g + dg)))
    }

    /// `∫_{−1}^{s} ψ`, exactly 0 below −1 and exactly 1 above 1.
    pub fn primitive(&self, s: f64) -> f64 {
        if s <= -1.0 {
            return 0.0;
        }
        if s >= 1.0 {
            return 1.0;
        }
        let h = 2.0 / PRIMITIVE_CELLS as f64;
        let i = (((s + 1.0) / h) as usize).min(PRIMITIVE_CELLS - 1);
        let left = -1.0 + h * i as f64;
        self.primitive[i] + gauss7(|x| self.psi(x), left, s)
    }

    /// `ψ(0) = p(0)/e`; not normalized to any particular constant.
    pub fn psi_at_zero(&self) -> f64 {
        self.psi(0.0)
    }

    /// `∫x^k ψ` by adaptive quadrature.
    pub fn moment(&self, k: usize) -> Result<f64> {
        let opts = QuadOptions::with_tol(1e-14);
        Ok(integrate(|x| crate::poly::pow_usize(x, k) * self.psi(x), -1.0, 1.0, &[0.0], opts)?.value)
    }

    /// Overshoot `η = ∫|ψ| − 1` caused by the negative lobes of ψ.
    pub fn overshoot(&self) -> Result<f64> {
        let opts = QuadOptions::with_tol(1e-12);
        let roots = self.sign_changes();
        Ok(integrate(|x| self.psi(x).abs(), -1.0, 1.0, &roots, opts)?.value - 1.0)
    }

    /// Sign changes of ψ on `(−1, 1)`, located by scanning and bisection.
    pub fn sign_changes(&self) -> Vec<f64> {
        let n = 2000;
        let mut out = Vec::new();
        let mut prev = self.p(-1.0 + 1e-9);
        for i in 1..n {
            let x = -1.0 + 2.0 * i as f64 / n as f64;
            let v = self.p(x);
            if v == 0.0 || v.signum() != prev.signum() {
                let (mut a, mut b) = (x - 2.0 / n as f64, x);
                for _ in 0..60 {
                    let m = 0.5 * (a + b);
                    if self.p(m).signum() == self.p(a).signum() {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                out.push(0.5 * (a + b));
            }
            prev = v;
        }
        out
    }

    /// `b_ε = ρ_ε^{−a}`.
    pub fn scale(&self, kind: GaugeKind, eps: f64) -> f64 {
        match kind {
            GaugeKind::Power => eps.powf(-self.scale_exponent),
            GaugeKind::Exponential => (self.scale_exponent / eps).exp(),
        }
    }

    /// The mollifier at a fixed scale.
    pub fn at_scale(&self, b: f64) -> Scaled<'_> {
        Scaled { spec: self, b }
    }

    pub fn at(&self, kind: GaugeKind, eps: f64) -> Scaled<'_> {
        self.at_scale(self.scale(kind, eps))
    }
}

/// ψ scaled by a fixed `b`: `δ(x) = bψ(bx)`, `H(x) = ∫_{−1}^{bx} ψ`.
#[derive(Debug, Clone, Copy)]
pub struct Scaled<'a> {
    spec: &'a MollifierSpec,
    b: f64,
}

impl Scaled<'_> {
    pub fn b(&self) -> f64 {
        self.b
    }

    /// Half-width `1/b` of the layer on which δ is supported.
    pub fn half_width(&self) -> f64 {
        1.0 / self.b
    }

    pub fn delta(&self, x: f64) -> f64 {
        self.b * self.spec.psi(self.b * x)
    }

    /// `δ^{(n)}(x) = b^{n+1} ψ^{(n)}(bx)`, `n ≤ 2`.
    pub fn delta_derivative(&self, x: f64, n: usize) -> Result<f64> {
        Ok(crate::poly::pow_usize(self.b, n + 1) * self.spec.psi_derivative(self.b * x, n)?)
    }

    pub fn heaviside(&self, x: f64) -> f64 {
        self.spec.primitive(self.b * x)
    }

    /// `(δ∘δ)(x) = bψ(b²ψ(bx))`.
    pub fn delta_compose_delta(&self, x: f64) -> f64 {
        self.b * self.spec.psi(self.b * self.b * self.spec.psi(self.b * x))
    }

    /// `(f ∗ ψ_b)(x) = ∫_{−1}^{1} f(x − s/b) ψ(s) ds`.
    pub fn convolve(&self, f: &Piecewise, x: f64, tol: f64) -> Result<f64> {
        let breaks: Vec<f64> = f
            .breaks()
            .iter()
            .map(|&c| self.b * (x - c))
            .filter(|s| s.abs() < 1.0)
            .collect();
        let b = self.b;
        let q = integrate(
            |s| f.eval(x - s / b) * self.spec.psi(s),
            -1.0,
            1.0,
            &breaks,
            QuadOptions::with_tol(tol),
        )?;
        Ok(q.value)
    }

    /// `d^n/dx^n (f ∗ ψ_b)(x)` for `n ≤ 2`, with the jump terms of `f` and `f′`
    /// carried by δ and δ′.
    pub fn convolve_derivative(&self, f: &Piecewise, x: f64, n: usize, tol: f64) -> Result<f64> {
        match n {
            0 => self.convolve(f, x, tol),
            1 => {
                let mut v = self.convolve(&f.derivative(), x, tol)?;
                for (i, &c) in f.breaks().iter().enumerate() {
                    v += f.jump(i) * self.delta(x - c);
                }
                Ok(v)
            }
            2 => {
                let df = f.derivative();
                let mut v = self.convolve(&df.derivative(), x, tol)?;
                for (i, &c) in f.breaks().iter().enumerate() {
                    v += df.jump(i) * self.delta(x - c) + f.jump(i) * self.delta_derivative(x - c, 1)?;
                }
                Ok(v)
            }
            _ => Err(Error::Capability { requested: n, available: 2 }),
        }
    }
}

/// What an [`EmbeddedField`] embeds.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Dirac,
    Heaviside,
    Piecewise(Piecewise),
}

/// `ι^b(source)`: the embedding of a 1-D distribution as a net of smooth
/// functions, evaluable at any grid ε.
#[derive(Debug, Clone)]
pub struct EmbeddedField {
    pub source: Source,
    pub mollifier: Arc<MollifierSpec>,
    pub gauge: Arc<Gauge>,
    /// Absolute quadrature tolerance for piecewise sources.
    pub tol: f64,
}

impl EmbeddedField {
    pub fn new(source: Source, mollifier: Arc<MollifierSpec>, gauge: Arc<Gauge>) -> Self {
        Self {
            source,
            mollifier,
            gauge,
            tol: 1e-12,
        }
    }

    pub fn scale(&self, eps: f64) -> f64 {
        self.mollifier.scale(self.gauge.kind(), eps)
    }

    /// Locations of the singular layers of the embedded data.
    pub fn layers(&self) -> Vec<f64> {
        match &self.source {
            Source::Dirac | Source::Heaviside => alloc::vec![0.0],
            Source::Piecewise(f) => f.breaks().to_vec(),
        }
    }

    pub fn eval(&self, eps: f64, x: f64) -> Result<f64> {
        self.derivative(eps, x, 0)
    }

    /// `d^n/dx^n` of the ε-representative at `x`, `n ≤ 2`.
    pub fn derivative(&self, eps: f64, x: f64, n: usize) -> Result<f64> {
        let s = self.mollifier.at(self.gauge.kind(), eps);
        match &self.source {
            Source::Dirac => s.delta_derivative(x, n),
            Source::Heaviside if n == 0 => Ok(s.heaviside(x)),
            Source::Heaviside => s.delta_derivative(x, n - 1),
            Source::Piecewise(f) => s.convolve_derivative(f, x, n, self.tol),
        }
    }

    pub fn max_derivative_order(&self) -> usize {
        match self.source {
            Source::Heaviside => 3,
            _ => 2,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Poly;
    use proptest::prelude::*;

    fn spec(j: usize) -> MollifierSpec {
        MollifierSpec::build(j).unwrap()
    }

    #[test]
    fn moment_conditions_hold_for_all_orders() {
        for j in (2..=12).step_by(2) {
            let m = spec(j);
            assert!((m.moment(0).unwrap() - 1.0).abs() <= 1e-10, "j = {j}");
            for k in 1..=j {
                assert!(m.moment(k).unwrap().abs() <= 1e-8, "j = {j}, k = {k}");
            }
        }
    }

    #[test]
    fn j4_moments() {
        let m = spec(4);
        assert!((m.moment(0).unwrap() - 1.0).abs() <= 1e-10);
        assert!(m.moment(1).unwrap().abs() <= 1e-15);
        assert!(m.moment(2).unwrap().abs() <= 1e-8);
        assert!(m.moment(4).unwrap().abs() <= 1e-8);
        // Sixth moment is not constrained.
        assert!(m.moment(6).unwrap().abs() > 1e-6);
    }

    #[test]
    fn build_validates_order() {
        assert!(matches!(MollifierSpec::build(0), Err(Error::Validation { .. })));
        assert!(matches!(MollifierSpec::build(3), Err(Error::Validation { .. })));
        assert!(matches!(MollifierSpec::build(14), Err(Error::Validation { .. })));
        let plain = MollifierSpec::build_unchecked(0).unwrap();
        assert!((plain.moment(0).unwrap() - 1.0).abs() < 1e-10);
        assert!(plain.moment(2).unwrap() > 1e-3);
    }

    #[test]
    fn psi_at_zero_values() {
        // Reference values from an independent moment solve.
        let expected = [(2, 1.56884), (4, 2.27788), (6, 2.97172), (8, 3.65639), (12, 5.00872)];
        for (j, v) in expected {
            assert!((spec(j).psi_at_zero() - v).abs() < 1e-4, "j = {j}");
        }
    }

    #[test]
    fn overshoot_values() {
        let expected = [(2, 0.2471), (4, 0.3931), (6, 0.4979), (8, 0.5801)];
        for (j, v) in expected {
            let eta = spec(j).overshoot().unwrap();
            assert!((eta - v).abs() < 1e-3, "j = {j}: {eta}");
        }
        for j in [2, 4, 6] {
            assert!(spec(j).overshoot().unwrap() <= 0.5);
        }
    }

    #[test]
    fn support_and_evenness() {
        let m = spec(4);
        for i in 0..=1000 {
            let x = -1.5 + 3.0 * i as f64 / 1000.0;
            if x.abs() >= 1.0 {
                assert_eq!(m.psi(x), 0.0);
            }
            assert!((m.psi(x) - m.psi(-x)).abs() <= 1e-12);
        }
    }

    #[test]
    fn derivatives_of_psi_match_differences() {
        let m = spec(6);
        let h = 1e-5;
        for &x in &[-0.8, -0.3, 0.0, 0.1, 0.55, 0.9] {
            let d1 = (m.psi(x + h) - m.psi(x - h)) / (2.0 * h);
            let d2 = (m.psi(x + h) - 2.0 * m.psi(x) + m.psi(x - h)) / (h * h);
            let scale = 1.0 + m.psi_derivative(x, 1).unwrap().abs();
            assert!((m.psi_derivative(x, 1).unwrap() - d1).abs() <= 1e-7 * scale);
            let scale = 1.0 + m.psi_derivative(x, 2).unwrap().abs();
            assert!((m.psi_derivative(x, 2).unwrap() - d2).abs() <= 1e-3 * scale);
        }
        assert!(m.psi_derivative(0.0, 3).is_err());
    }

    #[test]
    fn heaviside_examples() {
        let m = spec(4);
        let s = m.at(GaugeKind::Power, 2f64.powi(-10));
        assert!((s.heaviside(0.0) - 0.5).abs() <= 1e-8);
        assert_eq!(s.heaviside(1.01 * s.half_width()), 1.0);
        assert_eq!(s.heaviside(-1.01 * s.half_width()), 0.0);
        // Table plus local rule against adaptive quadrature of ψ.
        for &x in &[-0.77, -0.2, 0.013, 0.4, 0.999] {
            let oracle = integrate(|t| m.psi(t), -1.0, x, &[], QuadOptions::with_tol(1e-14)).unwrap().value;
            assert!((m.primitive(x) - oracle).abs() <= 1e-12);
        }
    }

    #[test]
    fn delta_examples() {
        let m = spec(4);
        let s = m.at(GaugeKind::Power, 2f64.powi(-8));
        assert_eq!(s.b(), 16.0);
        assert_eq!(s.delta(1.0 / 16.0), 0.0);
        assert_eq!(s.delta(0.0), 16.0 * m.psi_at_zero());
        let finest = m.at(GaugeKind::Power, 2f64.powi(-15));
        let w = finest.half_width();
        let v = integrate(|x| finest.delta(x) * x.cos(), -w, w, &[0.0], QuadOptions::with_tol(1e-13)).unwrap().value;
        assert!((v - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn delta_compose_delta_examples() {
        let m = spec(4);
        let s = m.at(GaugeKind::Power, 2f64.powi(-8));
        assert_eq!(s.delta_compose_delta(2.0 * s.half_width()), s.b() * m.psi_at_zero());
        // b²ψ(0) > 1 so the outer ψ is evaluated outside its support.
        assert!(s.b() * s.b() * m.psi_at_zero() > 1.0);
        assert_eq!(s.delta_compose_delta(0.0), 0.0);
    }

    #[test]
    fn convolution_of_smooth_and_step_data() {
        let m = spec(4);
        let s = m.at(GaugeKind::Power, 2f64.powi(-8));
        let sq = Piecewise::smooth(Poly::new(alloc::vec![0.0, 0.0, 1.0]));
        for &x in &[-0.3, 0.0, 0.7] {
            assert!((s.convolve(&sq, x, 1e-13).unwrap() - x * x).abs() <= 1e-6);
        }
        let step = Piecewise::step();
        for &x in &[-0.05, -0.01, 0.0, 0.02, 0.3] {
            assert!((s.convolve(&step, x, 1e-13).unwrap() - s.heaviside(x)).abs() <= 1e-8);
        }
        for &x in &[-0.04, -0.01, 0.003, 0.03] {
            let d = s.convolve_derivative(&step, x, 1, 1e-13).unwrap();
            assert!((d - s.delta(x)).abs() <= 1e-9);
        }
    }

    #[test]
    fn embedded_field_derivatives() {
        let gauge = Arc::new(Gauge::default_power());
        let m = Arc::new(spec(4));
        let h = EmbeddedField::new(Source::Heaviside, m.clone(), gauge.clone());
        let eps = 2f64.powi(-10);
        let b = h.scale(eps);
        assert_eq!(h.derivative(eps, 0.0, 1).unwrap(), b * m.psi_at_zero());
        let ramp = Piecewise::new(
            alloc::vec![0.0, 1.0],
            alloc::vec![Poly::constant(0.0), Poly::new(alloc::vec![0.0, 1.0]), Poly::constant(0.0)],
        )
        .unwrap();
        let f = EmbeddedField::new(Source::Piecewise(ramp), m, gauge);
        let step = 1e-6;
        for &x in &[0.01, 0.5, 0.99, 1.02] {
            let fd = (f.eval(eps, x + step).unwrap() - f.eval(eps, x - step).unwrap()) / (2.0 * step);
            assert!((f.derivative(eps, x, 1).unwrap() - fd).abs() <= 1e-4 * (1.0 + fd.abs()), "x = {x}");
        }
    }

    proptest! {
        #[test]
        fn heaviside_is_antisymmetric(x in -0.1f64..0.1) {
            let m = spec(4);
            let s = m.at(GaugeKind::Power, 2f64.powi(-8));
            prop_assert!((s.heaviside(x) + s.heaviside(-x) - 1.0).abs() <= 1e-8);
        }

        #[test]
        fn delta_scaling_law(x in -0.2f64..0.2, k in 4i32..16) {
            let m = spec(6);
            let s = m.at(GaugeKind::Power, 2f64.powi(-k));
            prop_assert_eq!(s.delta(x), s.b() * m.psi(s.b() * x));
        }
    }
}
