//! Dense univariate polynomials and piecewise-polynomial functions.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// `Σ coeffs[k] · x^k`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Poly {
    coeffs: Vec<f64>,
}

impl Poly {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn constant(c: f64) -> Self {
        Self { coeffs: vec![c] }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() <= 1 {
            return Poly::constant(0.0);
        }
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect(),
        )
    }

    pub fn nth_derivative(&self, n: usize) -> Poly {
        (0..n).fold(self.clone(), |p, _| p.derivative())
    }

    /// Value of the `n`-th derivative at `x`.
    pub fn eval_derivative(&self, n: usize, x: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(n)
            .map(|(k, &c)| {
                let falling: f64 = ((k - n + 1)..=k).map(|j| j as f64).product();
                c * falling * pow_usize(x, k - n)
            })
            .sum()
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.coeffs.is_empty() || other.coeffs.is_empty() {
            return Poly::default();
        }
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        Poly::new(
            (0..n)
                .map(|k| self.coeffs.get(k).unwrap_or(&0.0) + other.coeffs.get(k).unwrap_or(&0.0))
                .collect(),
        )
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &Poly) -> Poly {
        self.coeffs
            .iter()
            .rev()
            .fold(Poly::default(), |acc, &c| acc.mul(inner).add(&Poly::constant(c)))
    }

    pub fn pow(&self, n: usize) -> Poly {
        (0..n).fold(Poly::constant(1.0), |acc, _| acc.mul(self))
    }
}

pub(crate) fn pow_usize(x: f64, n: usize) -> f64 {
    let mut r = 1.0;
    for _ in 0..n {
        r *= x;
    }
    r
}

/// A function that is polynomial between sorted breakpoints:
/// `pieces[0]` on `(−∞, breaks[0])`, `pieces[i]` on `[breaks[i−1], breaks[i])`,
/// the last piece on `[breaks[n−1], ∞)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Piecewise {
    breaks: Vec<f64>,
    pieces: Vec<Poly>,
}

impl Piecewise {
    pub fn new(breaks: Vec<f64>, pieces: Vec<Poly>) -> Result<Self> {
        if pieces.len() != breaks.len() + 1 {
            return Err(Error::validation("piecewise", "need one more piece than breakpoints"));
        }
        if breaks.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::validation("piecewise", "breakpoints must be strictly increasing"));
        }
        Ok(Self { breaks, pieces })
    }

    /// A single polynomial on the whole line.
    pub fn smooth(p: Poly) -> Self {
        Self {
            breaks: Vec::new(),
            pieces: vec![p],
        }
    }

    /// Indicator of `[0, ∞)`.
    pub fn step() -> Self {
        Self {
            breaks: vec![0.0],
            pieces: vec![Poly::constant(0.0), Poly::constant(1.0)],
        }
    }

    /// Indicator of `[a, b)` times the polynomial `p`.
    pub fn window(a: f64, b: f64, p: Poly) -> Result<Self> {
        Self::new(vec![a, b], vec![Poly::constant(0.0), p, Poly::constant(0.0)])
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn eval(&self, x: f64) -> f64 {
        let idx = self.breaks.partition_point(|&b| b <= x);
        self.pieces[idx].eval(x)
    }

    pub fn pieces(&self) -> &[Poly] {
        &self.pieces
    }

    /// Classical derivative away from the breakpoints.
    pub fn derivative(&self) -> Piecewise {
        Piecewise {
            breaks: self.breaks.clone(),
            pieces: self.pieces.iter().map(Poly::derivative).collect(),
        }
    }

    /// Jump `f(b⁺) − f(b⁻)` at breakpoint `i`.
    pub fn jump(&self, i: usize) -> f64 {
        let b = self.breaks[i];
        self.pieces[i + 1].eval(b) - self.pieces[i].eval(b)
    }

    /// Bounded support `[first break, last break]` when both outer pieces vanish.
    pub fn support(&self) -> Option<(f64, f64)> {
        let zero = |p: &Poly| p.coeffs().iter().all(|&c| c == 0.0);
        if !self.breaks.is_empty() && zero(&self.pieces[0]) && zero(self.pieces.last().unwrap()) {
            Some((self.breaks[0], *self.breaks.last().unwrap()))
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horner_and_derivatives() {
        let p = Poly::new(vec![1.0, -2.0, 3.0]); // 1 - 2x + 3x²
        assert_eq!(p.eval(2.0), 9.0);
        assert_eq!(p.derivative().eval(2.0), 10.0);
        assert_eq!(p.eval_derivative(1, 2.0), 10.0);
        assert_eq!(p.eval_derivative(2, 5.0), 6.0);
        assert_eq!(p.eval_derivative(3, 5.0), 0.0);
    }

    #[test]
    fn composition_matches_pointwise() {
        let f = Poly::new(vec![0.5, 0.0, 1.0]);
        let g = Poly::new(vec![-1.0, 2.0]);
        let h = f.compose(&g);
        for x in [-1.0, 0.0, 0.7, 3.0] {
            assert!((h.eval(x) - f.eval(g.eval(x))).abs() < 1e-12);
        }
    }

    #[test]
    fn step_is_right_continuous() {
        let h = Piecewise::step();
        assert_eq!(h.eval(-1e-300), 0.0);
        assert_eq!(h.eval(0.0), 1.0);
        assert_eq!(h.support(), None);
        let w = Piecewise::window(-1.0, 1.0, Poly::constant(2.0)).unwrap();
        assert_eq!(w.support(), Some((-1.0, 1.0)));
        assert_eq!(w.eval(1.0), 0.0);
    }

    #[test]
    fn unsorted_breaks_rejected() {
        let r = Piecewise::new(vec![1.0, 0.0], vec![Poly::default(); 3]);
        assert!(r.is_err());
    }
}
