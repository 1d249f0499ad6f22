//! Robinson–Colombeau generalized numbers sampled on a finite ε-grid.
//!
//! A generalized number is the class of a net `(x_ε)`; here it is stored as
//! its samples on a strictly decreasing grid of ε values. Every asymptotic
//! predicate ("for all sufficiently small ε", "for some m", "for all a > 0")
//! is decided on the grid tail with the thresholds in [`Thresholds`].

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::ops::Range;

use crate::linalg::least_squares;
#[cfg(not(feature = "std"))]
use num_traits::Float;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaugeKind {
    /// ρ_ε = ε
    Power,
    /// ρ_ε = e^{−1/ε}
    Exponential,
}

impl GaugeKind {
    pub fn log_rho(self, eps: f64) -> f64 {
        match self {
            GaugeKind::Power => eps.ln(),
            GaugeKind::Exponential => -1.0 / eps,
        }
    }

    pub fn rho(self, eps: f64) -> f64 {
        self.log_rho(eps).exp()
    }
}

/// Finite-sample surrogates for the quantifiers in the ring definitions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    /// Minimum |slope| for an infinitesimal/infinite classification.
    pub sigma_min: f64,
    /// Maximum asymptotic exponent of |x − y| for "x is far from y".
    pub sigma_far: f64,
    /// Largest exponent tried when looking for an invertibility witness.
    pub m_max: u32,
    /// Highest order used by negligibility tests.
    pub q_max: u32,
    /// Number of trailing grid points used by every asymptotic test.
    pub tail_len: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            sigma_min: 0.1,
            sigma_far: 0.05,
            m_max: 20,
            q_max: 5,
            tail_len: 8,
        }
    }
}

/// A gauge ρ together with the ε-grid its nets are sampled on.
#[derive(Debug, Clone, PartialEq)]
pub struct Gauge {
    kind: GaugeKind,
    eps: Vec<f64>,
    thresholds: Thresholds,
}

/// Classification needs a regression over at least this many points.
pub const MIN_CLASSIFY_POINTS: usize = 4;

impl Gauge {
    pub fn new(kind: GaugeKind, eps: Vec<f64>) -> Result<Self> {
        if eps.is_empty() {
            return Err(Error::validation("gauge", "empty ε-grid"));
        }
        if eps.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
            return Err(Error::validation("gauge", "ε values must lie in (0, 1]"));
        }
        if eps.windows(2).any(|w| !(w[0] > w[1])) {
            return Err(Error::validation("gauge", "ε-grid must be strictly decreasing"));
        }
        if eps.iter().any(|&e| !(kind.rho(e) > 0.0)) {
            return Err(Error::validation("gauge", "ρ_ε underflows on the grid"));
        }
        Ok(Self {
            kind,
            eps,
            thresholds: Thresholds::default(),
        })
    }

    /// `points` values from `eps_max` down to `eps_min`, equally spaced in log ε.
    pub fn geometric(kind: GaugeKind, eps_max: f64, eps_min: f64, points: usize) -> Result<Self> {
        if points == 0 {
            return Err(Error::validation("gauge.points", "must be positive"));
        }
        if !(eps_min > 0.0 && eps_max > 0.0) {
            return Err(Error::validation("gauge", "ε bounds must be positive"));
        }
        if points == 1 {
            return Self::new(kind, alloc::vec![eps_max]);
        }
        let (hi, lo) = (eps_max.log2(), eps_min.log2());
        let step = (lo - hi) / (points - 1) as f64;
        let eps = (0..points).map(|k| (hi + step * k as f64).exp2()).collect();
        Self::new(kind, eps)
    }

    /// Power gauge on ε_k = 2^{−(4+k)}, k = 0..11.
    pub fn default_power() -> Self {
        Self::geometric(GaugeKind::Power, 2f64.powi(-4), 2f64.powi(-15), 12).unwrap()
    }

    pub fn with_thresholds(mut self, thresholds: Thresholds) -> Self {
        self.thresholds = thresholds;
        self
    }

    pub fn kind(&self) -> GaugeKind {
        self.kind
    }

    pub fn eps(&self) -> &[f64] {
        &self.eps
    }

    pub fn len(&self) -> usize {
        self.eps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eps.is_empty()
    }

    pub fn thresholds(&self) -> &Thresholds {
        &self.thresholds
    }

    pub fn rho(&self, eps: f64) -> f64 {
        self.kind.rho(eps)
    }

    pub fn log_rho(&self, eps: f64) -> f64 {
        self.kind.log_rho(eps)
    }

    /// Smallest ε of the grid.
    pub fn finest(&self) -> f64 {
        *self.eps.last().unwrap()
    }

    /// Indices of the trailing grid points used by asymptotic tests.
    pub fn tail(&self) -> Range<usize> {
        self.eps.len().saturating_sub(self.thresholds.tail_len)..self.eps.len()
    }
}

/// A generalized number `[x_ε]`, one sample per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct GenNumber {
    values: Vec<f64>,
    gauge: Arc<Gauge>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassTag {
    Infinitesimal,
    Infinite,
    Finite,
    Unclassified,
}

/// Result of [`GenNumber::classify`]: `|x_ε| ≈ C · ρ_ε^slope` on the tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticClass {
    pub tag: ClassTag,
    /// Fitted exponent; `+∞` for the zero net.
    pub slope: f64,
    /// RMS residual of the log-log fit.
    pub confidence: f64,
}

/// Invertibility verdict with the smallest exponent `m` such that
/// `x_ε > ρ_ε^m` on the tail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Positivity {
    pub positive: bool,
    pub witness: Option<u32>,
}

impl GenNumber {
    pub fn new(gauge: Arc<Gauge>, values: Vec<f64>) -> Result<Self> {
        if values.len() != gauge.len() {
            return Err(Error::GridMismatch);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("generalized number samples"));
        }
        Ok(Self { values, gauge })
    }

    /// Samples `f(ε)` on the gauge grid.
    pub fn from_fn(gauge: &Arc<Gauge>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = gauge.eps().iter().map(|&e| f(e)).collect();
        Self::new(gauge.clone(), values)
    }

    /// Like [`GenNumber::from_fn`] for fallible per-ε computations.
    pub fn try_from_fn(gauge: &Arc<Gauge>, mut f: impl FnMut(f64) -> Result<f64>) -> Result<Self> {
        let values = gauge.eps().iter().map(|&e| f(e)).collect::<Result<Vec<_>>>()?;
        Self::new(gauge.clone(), values)
    }

    pub fn constant(gauge: &Arc<Gauge>, c: f64) -> Result<Self> {
        Self::from_fn(gauge, |_| c)
    }

    /// `dρ^n = [ρ_ε^n]`.
    pub fn rho_power(gauge: &Arc<Gauge>, n: f64) -> Result<Self> {
        let g = gauge.clone();
        Self::from_fn(gauge, move |e| (n * g.log_rho(e)).exp())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn gauge(&self) -> &Arc<Gauge> {
        &self.gauge
    }

    fn same_grid(&self, other: &GenNumber) -> Result<()> {
        if Arc::ptr_eq(&self.gauge, &other.gauge) || self.gauge == other.gauge {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    fn zip_with(&self, other: &GenNumber, f: impl Fn(f64, f64) -> f64) -> Result<GenNumber> {
        self.same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        GenNumber::new(self.gauge.clone(), values)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<GenNumber> {
        GenNumber::new(self.gauge.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn abs(&self) -> GenNumber {
        GenNumber {
            values: self.values.iter().map(|v| v.abs()).collect(),
            gauge: self.gauge.clone(),
        }
    }

    /// Componentwise ring operation; division requires an invertible divisor.
    pub fn arith(&self, other: &GenNumber, op: ArithOp) -> Result<GenNumber> {
        self.same_grid(other)?;
        match op {
            ArithOp::Add => self.zip_with(other, |a, b| a + b),
            ArithOp::Sub => self.zip_with(other, |a, b| a - b),
            ArithOp::Mul => self.zip_with(other, |a, b| a * b),
            ArithOp::Div => {
                if !other.abs().is_strictly_positive().positive {
                    return Err(Error::NotInvertible);
                }
                self.zip_with(other, |a, b| a / b).map_err(|_| Error::NotInvertible)
            }
        }
    }

    pub fn add(&self, other: &GenNumber) -> Result<GenNumber> {
        self.arith(other, ArithOp::Add)
    }

    pub fn sub(&self, other: &GenNumber) -> Result<GenNumber> {
        self.arith(other, ArithOp::Sub)
    }

    pub fn mul(&self, other: &GenNumber) -> Result<GenNumber> {
        self.arith(other, ArithOp::Mul)
    }

    pub fn div(&self, other: &GenNumber) -> Result<GenNumber> {
        self.arith(other, ArithOp::Div)
    }

    fn tail_values(&self) -> &[f64] {
        &self.values[self.gauge.tail()]
    }

    fn tail_log_rho(&self) -> Vec<f64> {
        self.gauge.eps()[self.gauge.tail()]
            .iter()
            .map(|&e| self.gauge.log_rho(e))
            .collect()
    }

    /// Least-squares slope of `log|x_ε|` against `log ρ_ε` over the tail.
    pub fn classify(&self) -> Result<AsymptoticClass> {
        let tail = self.tail_values();
        if tail.len() < MIN_CLASSIFY_POINTS {
            return Err(Error::InsufficientData {
                required: MIN_CLASSIFY_POINTS,
                available: tail.len(),
            });
        }
        let th = self.gauge.thresholds();
        if tail.iter().all(|&v| v == 0.0) {
            return Ok(AsymptoticClass {
                tag: ClassTag::Infinitesimal,
                slope: f64::INFINITY,
                confidence: 0.0,
            });
        }
        if tail.contains(&0.0) {
            return Ok(AsymptoticClass {
                tag: ClassTag::Unclassified,
                slope: f64::NAN,
                confidence: f64::INFINITY,
            });
        }
        let x = self.tail_log_rho();
        let y: Vec<f64> = tail.iter().map(|v| v.abs().ln()).collect();
        let (slope, confidence) = fit_line(&x, &y)?;
        let mags: Vec<f64> = tail.iter().map(|v| v.abs()).collect();
        let decreasing = mags.windows(2).all(|w| w[1] <= w[0]) && mags[mags.len() - 1] < mags[0];
        let increasing = mags.windows(2).all(|w| w[1] >= w[0]) && mags[mags.len() - 1] > mags[0];
        let tag = if slope >= th.sigma_min && decreasing {
            ClassTag::Infinitesimal
        } else if slope <= -th.sigma_min && increasing {
            ClassTag::Infinite
        } else if slope.abs() < th.sigma_min {
            ClassTag::Finite
        } else {
            ClassTag::Unclassified
        };
        Ok(AsymptoticClass {
            tag,
            slope,
            confidence,
        })
    }

    /// Power-law exponent of `|x_ε|` with a logarithmic correction separated
    /// out: fits `log|x| = c + s·log ρ + κ·log|log ρ|` and returns `s`.
    /// Nets like `−1/log ρ_ε` get `s = 0`, `ρ_ε^a` gets `s = a`.
    pub fn asymptotic_exponent(&self) -> Result<f64> {
        let tail = self.tail_values();
        if tail.len() < MIN_CLASSIFY_POINTS {
            return Err(Error::InsufficientData {
                required: MIN_CLASSIFY_POINTS,
                available: tail.len(),
            });
        }
        if tail.contains(&0.0) {
            return Ok(f64::INFINITY);
        }
        let x = self.tail_log_rho();
        let y: Vec<f64> = tail.iter().map(|v| v.abs().ln()).collect();
        if x.iter().any(|&v| v >= 0.0) {
            return fit_line(&x, &y).map(|(s, _)| s);
        }
        let ones = alloc::vec![1.0; x.len()];
        let loglog: Vec<f64> = x.iter().map(|v| (-v).ln()).collect();
        let beta = least_squares(&[&ones, &x, &loglog], &y)?;
        Ok(beta[1])
    }

    /// Invertibility test: smallest `m ≤ m_max` with `x_ε > ρ_ε^m` on the tail.
    pub fn is_strictly_positive(&self) -> Positivity {
        let th = self.gauge.thresholds();
        let tail = self.tail_values();
        let log_rho = self.tail_log_rho();
        for m in 0..=th.m_max {
            let ok = tail
                .iter()
                .zip(&log_rho)
                .all(|(&v, &lr)| v > 0.0 && v.ln() > m as f64 * lr);
            if ok {
                return Positivity {
                    positive: true,
                    witness: Some(m),
                };
            }
        }
        Positivity {
            positive: false,
            witness: None,
        }
    }

    /// `|x_ε| ≤ ρ_ε^q` on the tail, i.e. `x = 0` up to order `q`.
    pub fn is_negligible_to_order(&self, q: u32) -> bool {
        self.tail_values()
            .iter()
            .zip(self.tail_log_rho())
            .all(|(&v, lr)| v == 0.0 || v.abs().ln() <= q as f64 * lr)
    }

    /// Equality surrogate: `x − y` negligible to order `q`.
    pub fn approx_eq(&self, other: &GenNumber, q: u32) -> Result<bool> {
        Ok(self.sub(other)?.is_negligible_to_order(q))
    }

    /// `|x − y| ≥ ρ^a` for every `a > 0`: the distance decays slower than any
    /// power of the gauge.
    pub fn is_far_from(&self, other: &GenNumber) -> Result<bool> {
        let d = self.sub(other)?.abs();
        if d.tail_values().iter().all(|&v| v == 0.0) {
            return Ok(false);
        }
        Ok(d.asymptotic_exponent()? <= self.gauge.thresholds().sigma_far)
    }

    /// Componentwise `(x ∧ y, x ∨ y)`.
    pub fn inf_sup(&self, other: &GenNumber) -> Result<(GenNumber, GenNumber)> {
        Ok((self.zip_with(other, f64::min)?, self.zip_with(other, f64::max)?))
    }
}

/// Slope and RMS residual of a least-squares line.
fn fit_line(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    let ones = alloc::vec![1.0; x.len()];
    let beta = least_squares(&[&ones, x], y)?;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            let r = yi - beta[0] - beta[1] * xi;
            r * r
        })
        .sum();
    Ok((beta[1], (rss / x.len() as f64).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn g() -> Arc<Gauge> {
        Arc::new(Gauge::default_power())
    }

    #[test]
    fn default_grid_is_exact_powers_of_two() {
        let gauge = Gauge::default_power();
        assert_eq!(gauge.len(), 12);
        for (k, &e) in gauge.eps().iter().enumerate() {
            assert_eq!(e, 2f64.powi(-(4 + k as i32)));
        }
    }

    #[test]
    fn gauge_validation() {
        assert!(Gauge::new(GaugeKind::Power, alloc::vec![]).is_err());
        assert!(Gauge::new(GaugeKind::Power, alloc::vec![0.1, 0.2]).is_err());
        assert!(Gauge::new(GaugeKind::Power, alloc::vec![1.5]).is_err());
        // e^{-1/ε} underflows long before ε = 2^-15.
        assert!(Gauge::geometric(GaugeKind::Exponential, 0.5, 2f64.powi(-15), 12).is_err());
        assert!(Gauge::geometric(GaugeKind::Exponential, 0.5, 0.01, 8).is_ok());
    }

    #[test]
    fn ring_examples() {
        let g = g();
        let eps = GenNumber::from_fn(&g, |e| e).unwrap();
        let two_eps = eps.add(&eps).unwrap();
        assert!(two_eps.values().iter().zip(g.eps()).all(|(v, e)| *v == 2.0 * e));

        let rho = GenNumber::rho_power(&g, 1.0).unwrap();
        let inv = GenNumber::rho_power(&g, -1.0).unwrap();
        let one = rho.mul(&inv).unwrap();
        assert!(one.values().iter().all(|v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn division_on_short_grid() {
        let grid: Vec<f64> = (4..=14).map(|k| 2f64.powi(-k)).collect();
        let g = Arc::new(Gauge::new(GaugeKind::Power, grid).unwrap());
        let sq = GenNumber::from_fn(&g, |e| e * e).unwrap();
        let eps = GenNumber::from_fn(&g, |e| e).unwrap();
        let q = sq.div(&eps).unwrap();
        // Exact componentwise oracle: ε²/ε in floating point.
        for (v, e) in q.values().iter().zip(g.eps()) {
            assert_eq!(*v, (e * e) / e);
            assert_eq!(*v, *e);
        }
    }

    #[test]
    fn division_by_non_invertible_fails() {
        let g = g();
        let x = GenNumber::constant(&g, 1.0).unwrap();
        let zero = GenNumber::constant(&g, 0.0).unwrap();
        assert_eq!(x.div(&zero), Err(Error::NotInvertible));
        // Decays faster than any power up to m_max.
        let tiny = GenNumber::from_fn(&g, |e| e.powi(25)).unwrap();
        assert_eq!(x.div(&tiny), Err(Error::NotInvertible));
        // Sign changes do not matter, only |y| bounded below by a gauge power.
        let osc = GenNumber::from_fn(&g, |e| e * (1.0 / e).sin()).unwrap();
        assert!(x.div(&osc).is_ok());
    }

    #[test]
    fn grid_mismatch_is_structural() {
        let a = GenNumber::constant(&g(), 1.0).unwrap();
        let other = Arc::new(Gauge::geometric(GaugeKind::Power, 0.5, 0.01, 6).unwrap());
        let b = GenNumber::constant(&other, 1.0).unwrap();
        assert_eq!(a.add(&b), Err(Error::GridMismatch));
        assert_eq!(a.inf_sup(&b).unwrap_err(), Error::GridMismatch);
    }

    #[test]
    fn classify_examples() {
        let g = g();
        let c = GenNumber::from_fn(&g, |e| e * e).unwrap().classify().unwrap();
        assert_eq!(c.tag, ClassTag::Infinitesimal);
        assert!((c.slope - 2.0).abs() < 1e-12);

        let c = GenNumber::from_fn(&g, |e| (1.0 / e) * (1.0 / e).sin()).unwrap().classify().unwrap();
        assert_eq!(c.tag, ClassTag::Unclassified);

        let c = GenNumber::from_fn(&g, |e| 3.0 + e).unwrap().classify().unwrap();
        assert_eq!(c.tag, ClassTag::Finite);

        let c = GenNumber::from_fn(&g, |e| 1.0 / (e * e)).unwrap().classify().unwrap();
        assert_eq!(c.tag, ClassTag::Infinite);
        assert!((c.slope + 2.0).abs() < 1e-12);
    }

    #[test]
    fn classify_needs_four_points() {
        let short = Arc::new(Gauge::geometric(GaugeKind::Power, 0.5, 0.1, 3).unwrap());
        let x = GenNumber::from_fn(&short, |e| e).unwrap();
        assert_eq!(
            x.classify(),
            Err(Error::InsufficientData {
                required: 4,
                available: 3
            })
        );
        // Arithmetic on the short grid is still fine.
        assert!(x.mul(&x).is_ok());
    }

    #[test]
    fn classify_rho_powers() {
        let g = g();
        for n in 1..=3 {
            let c = GenNumber::rho_power(&g, n as f64).unwrap().classify().unwrap();
            assert_eq!(c.tag, ClassTag::Infinitesimal);
            assert!((c.slope - n as f64).abs() <= 0.05);
        }
    }

    #[test]
    fn positivity_examples() {
        let g = g();
        let p = GenNumber::from_fn(&g, |e| e).unwrap().is_strictly_positive();
        assert_eq!(
            p,
            Positivity {
                positive: true,
                witness: Some(2)
            }
        );
        assert!(!GenNumber::constant(&g, 0.0).unwrap().is_strictly_positive().positive);
        // ε sin(1/ε) changes sign on the tail (enumerated below).
        let osc = GenNumber::from_fn(&g, |e| e * (1.0 / e).sin()).unwrap();
        let tail = &osc.values()[g.tail()];
        assert!(tail.iter().any(|v| *v < 0.0) && tail.iter().any(|v| *v > 0.0));
        assert!(!osc.is_strictly_positive().positive);
    }

    #[test]
    fn negligibility_examples() {
        let g = g();
        assert!(GenNumber::from_fn(&g, |e| e.powi(10)).unwrap().is_negligible_to_order(5));
        assert!(!GenNumber::from_fn(&g, |e| e).unwrap().is_negligible_to_order(2));
        // e^{-1/ε} ≤ ε^5 on every tail point: checked by direct evaluation.
        let flat = GenNumber::from_fn(&g, |e| (-1.0 / e).exp()).unwrap();
        for &e in &g.eps()[g.tail()] {
            assert!((-1.0 / e).exp() <= e.powi(5));
        }
        assert!(flat.is_negligible_to_order(5));
    }

    #[test]
    fn far_from_examples() {
        let g = g();
        let one = GenNumber::constant(&g, 1.0).unwrap();
        let zero = GenNumber::constant(&g, 0.0).unwrap();
        assert!(one.is_far_from(&zero).unwrap());
        let large_inf = GenNumber::from_fn(&g, |e| -1.0 / e.ln()).unwrap();
        assert!(large_inf.is_far_from(&zero).unwrap());
        assert_eq!(large_inf.classify().unwrap().tag, ClassTag::Infinitesimal);
        let eps = GenNumber::from_fn(&g, |e| e).unwrap();
        assert!(!eps.is_far_from(&zero).unwrap());
        assert!(!one.is_far_from(&one).unwrap());
    }

    #[test]
    fn inf_sup_examples() {
        let g = g();
        let a = GenNumber::from_fn(&g, |e| e).unwrap();
        let b = GenNumber::from_fn(&g, |e| 2.0 * e).unwrap();
        let (lo, hi) = a.inf_sup(&b).unwrap();
        assert_eq!(lo, a);
        assert_eq!(hi, b);
        let (lo, hi) = a.inf_sup(&a).unwrap();
        assert_eq!((&lo, &hi), (&a, &a));
        let s = GenNumber::from_fn(&g, |e| (1.0 / e).sin()).unwrap();
        let zero = GenNumber::constant(&g, 0.0).unwrap();
        let (lo, _) = s.inf_sup(&zero).unwrap();
        for (v, e) in lo.values().iter().zip(g.eps()) {
            assert_eq!(*v, (1.0 / e).sin().min(0.0));
        }
    }

    fn net() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-10.0f64..10.0, 12)
    }

    proptest! {
        #[test]
        fn ring_axioms_hold_on_samples(a in net(), b in net(), c in net()) {
            let g = g();
            let x = GenNumber::new(g.clone(), a).unwrap();
            let y = GenNumber::new(g.clone(), b).unwrap();
            let z = GenNumber::new(g.clone(), c).unwrap();
            let lhs = x.add(&y).unwrap().add(&z).unwrap();
            let rhs = x.add(&y.add(&z).unwrap()).unwrap();
            for (l, r) in lhs.values().iter().zip(rhs.values()) {
                prop_assert!((l - r).abs() <= 1e-12 * (1.0 + l.abs()));
            }
            let lhs = x.mul(&y.add(&z).unwrap()).unwrap();
            let rhs = x.mul(&y).unwrap().add(&x.mul(&z).unwrap()).unwrap();
            for (l, r) in lhs.values().iter().zip(rhs.values()) {
                prop_assert!((l - r).abs() <= 1e-12 * (1.0 + l.abs()));
            }
        }

        #[test]
        fn positive_nets_divide_to_one(a in proptest::collection::vec(0.01f64..100.0, 12)) {
            let x = GenNumber::new(g(), a).unwrap();
            prop_assert!(x.is_strictly_positive().positive);
            let q = x.div(&x).unwrap();
            prop_assert!(q.values().iter().all(|v| *v == 1.0));
        }

        #[test]
        fn far_from_is_symmetric(a in net(), b in net()) {
            let x = GenNumber::new(g(), a).unwrap();
            let y = GenNumber::new(g(), b).unwrap();
            prop_assert_eq!(x.is_far_from(&y).unwrap(), y.is_far_from(&x).unwrap());
            prop_assert!(!x.is_far_from(&x).unwrap());
        }

        #[test]
        fn sup_bounded_by_sum_of_abs(a in net(), b in net()) {
            let x = GenNumber::new(g(), a).unwrap();
            let y = GenNumber::new(g(), b).unwrap();
            let (_, hi) = x.inf_sup(&y).unwrap();
            for ((s, u), v) in hi.values().iter().zip(x.values()).zip(y.values()) {
                prop_assert!(s.abs() <= u.abs() + v.abs());
            }
        }
    }
}
