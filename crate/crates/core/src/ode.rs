//! Dormand–Prince 5(4) integrator with PI step control, continuous output
//! of order 4, per-state step limits and sign-change events.
//!
//! A step that would cross an event is retaken so that it ends just past
//! the first root. Systems use this to land on the edge of a singular layer
//! before their [`OdeSystem::max_step`] clamp engages.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};
#[cfg(not(feature = "std"))]
use num_traits::Float;

/// A first-order system `y′ = f(t, y)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()>;

    /// Upper bound for the next step taken from `(t, y)`.
    fn max_step(&self, _t: f64, _y: &[f64]) -> Option<f64> {
        None
    }

    fn event_count(&self) -> usize {
        0
    }

    /// Event functions; a crossing is a sign change of `out[i]`.
    fn events(&self, _t: f64, _y: &[f64], _out: &mut [f64]) {}
}

impl<S: OdeSystem + ?Sized> OdeSystem for &S {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        (**self).rhs(t, y, dy)
    }
    fn max_step(&self, t: f64, y: &[f64]) -> Option<f64> {
        (**self).max_step(t, y)
    }
    fn event_count(&self) -> usize {
        (**self).event_count()
    }
    fn events(&self, t: f64, y: &[f64], out: &mut [f64]) {
        (**self).events(t, y, out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Global step bound, applied on top of [`OdeSystem::max_step`].
    pub h_max: f64,
    pub max_steps: usize,
    /// States with any component beyond this magnitude count as divergence.
    pub blowup: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-10,
            h_max: f64::INFINITY,
            max_steps: 5_000_000,
            blowup: 1e12,
        }
    }
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: tol,
            ..Self::default()
        }
    }
}

/// Event root located to [`EVENT_TOL`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub t: f64,
    pub event: usize,
    /// +1 when the event function goes from negative to positive.
    pub direction: i8,
}

/// Absolute time tolerance for event roots.
pub const EVENT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
struct DenseStep {
    t0: f64,
    h: f64,
    /// `[y0, y1−y0, h k1 − (y1−y0), (y1−y0) − h k7 − r3, r5]`, each of length `dim`.
    r: Vec<f64>,
}

impl DenseStep {
    fn eval(&self, t: f64, out: &mut [f64]) {
        let n = out.len();
        if self.h == 0.0 {
            out.copy_from_slice(&self.r[..n]);
            return;
        }
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        for i in 0..n {
            let r = |k: usize| self.r[k * n + i];
            out[i] = r(0) + th * (r(1) + th1 * (r(2) + th * (r(3) + th1 * r(4))));
        }
    }

    fn t1(&self) -> f64 {
        self.t0 + self.h
    }
}

/// Continuous solution on `[t_start, t_end]` (or reversed for backward runs).
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    dim: usize,
    t_start: f64,
    steps: Vec<DenseStep>,
    pub crossings: Vec<Crossing>,
    pub rejected: usize,
}

impl Solution {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.steps.last().map_or(self.t_start, DenseStep::t1)
    }

    pub fn step_count(&self) -> usize {
        self.steps.len()
    }

    /// Accepted step endpoints, including `t_start`.
    pub fn mesh(&self) -> Vec<f64> {
        let mut m = vec![self.t_start];
        m.extend(self.steps.iter().map(DenseStep::t1));
        m
    }

    /// State at `t`, clamped into the solution interval.
    pub fn eval(&self, t: f64, out: &mut [f64]) {
        let forward = self.t_end() >= self.t_start;
        let idx = if forward {
            self.steps.partition_point(|s| s.t1() < t)
        } else {
            self.steps.partition_point(|s| s.t1() > t)
        };
        let step = &self.steps[idx.min(self.steps.len() - 1)];
        let (lo, hi) = if forward {
            (self.t_start, self.t_end())
        } else {
            (self.t_end(), self.t_start)
        };
        step.eval(t.clamp(lo, hi), out);
    }

    pub fn state(&self, t: f64) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        self.eval(t, &mut y);
        y
    }
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

const SAFE: f64 = 0.9;
const BETA: f64 = 0.04;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

struct Work {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y1: Vec<f64>,
}

fn rms(v: impl Iterator<Item = f64>, n: usize) -> f64 {
    (v.map(|x| x * x).sum::<f64>() / n as f64).sqrt()
}

fn check_state(t: f64, y: &[f64], blowup: f64) -> Result<()> {
    if y.iter().any(|v| !v.is_finite() || v.abs() > blowup) {
        Err(Error::Divergence { t })
    } else {
        Ok(())
    }
}

/// Integrates `sys` from `(t0, y0)` to `t1`; `t1 < t0` integrates backward.
pub fn solve<S: OdeSystem>(sys: &S, t0: f64, y0: &[f64], t1: f64, opts: &OdeOptions) -> Result<Solution> {
    let n = sys.dim();
    if y0.len() != n {
        return Err(Error::validation("initial state", "length does not match the system"));
    }
    if !(opts.rtol > 0.0 && opts.atol > 0.0) {
        return Err(Error::validation("tol", "must be positive"));
    }
    check_state(t0, y0, opts.blowup)?;
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let mut sol = Solution {
        dim: n,
        t_start: t0,
        steps: Vec::new(),
        crossings: Vec::new(),
        rejected: 0,
    };
    if t1 == t0 {
        sol.steps.push(DenseStep {
            t0,
            h: 0.0,
            r: [y0, &vec![0.0; 4 * n]].concat(),
        });
        return Ok(sol);
    }
    let mut w = Work {
        k: core::array::from_fn(|_| vec![0.0; n]),
        tmp: vec![0.0; n],
        y1: vec![0.0; n],
    };
    let mut t = t0;
    let mut y = y0.to_vec();
    sys.rhs(t, &y, &mut w.k[0])?;
    let ne = sys.event_count();
    let mut g0 = vec![0.0; ne];
    let mut g1 = vec![0.0; ne];
    sys.events(t, &y, &mut g0);

    let span = (t1 - t0).abs();
    let mut h = initial_step(sys, t, &y, &w.k[0], dir, opts, span)?;
    let mut facold: f64 = 1e-4;
    let mut target: Option<f64> = None;
    let mut steps = 0usize;
    let mut last_rejected = false;

    loop {
        if steps >= opts.max_steps {
            return Err(Error::Stiffness { t, h });
        }
        let remaining = (t1 - t).abs();
        if remaining <= 1e-14 * t.abs().max(1.0) {
            break;
        }
        let mut hmax = opts.h_max;
        if let Some(m) = sys.max_step(t, &y) {
            hmax = hmax.min(m);
        }
        let mut habs = h.abs().min(hmax).min(remaining);
        let mut hit_end = habs >= remaining;
        if let Some(tt) = target {
            let to_target = (tt - t).abs();
            if habs >= to_target {
                habs = to_target;
                hit_end = false;
            }
        }
        if habs < 1e-14 * t.abs().max(1.0) {
            return Err(Error::Stiffness { t, h: habs });
        }
        let h_step = dir * habs;
        let t_new = if hit_end {
            t1
        } else if target.is_some() && habs == (target.unwrap() - t).abs() {
            target.unwrap()
        } else {
            t + h_step
        };
        let h_step = t_new - t;

        dopri_stages(sys, t, &y, h_step, &mut w)?;
        steps += 1;
        let err = rms(
            (0..n).map(|i| {
                let e: f64 = (0..7).map(|s| E[s] * w.k[s][i]).sum::<f64>() * h_step;
                e / (opts.atol + opts.rtol * y[i].abs().max(w.y1[i].abs()))
            }),
            n,
        );
        if !err.is_finite() {
            sol.rejected += 1;
            h = h_step * 0.1;
            last_rejected = true;
            continue;
        }
        let fac11 = err.powf(0.2 - 0.75 * BETA);
        if err > 1.0 {
            sol.rejected += 1;
            let fac = (fac11 / SAFE).min(1.0 / FAC_MIN);
            h = h_step / fac;
            last_rejected = true;
            continue;
        }

        // Accepted.
        check_state(t_new, &w.y1, opts.blowup)?;
        let step = dense_step(t, h_step, &y, &w);
        if ne > 0 {
            sys.events(t_new, &w.y1, &mut g1);
            let changed: Vec<usize> = (0..ne).filter(|&i| sign_change(g0[i], g1[i])).collect();
            if !changed.is_empty() {
                if target.is_none() {
                    // Retake the step so that it ends just past the first root.
                    let mut first = f64::INFINITY;
                    let mut far = t_new;
                    for &i in &changed {
                        let (root, beyond) = locate_root(sys, &step, i, g0[i], n, ne);
                        if (root - t).abs() < (first - t).abs() || first.is_infinite() {
                            first = root;
                            far = beyond;
                        }
                    }
                    if (far - t_new).abs() > EVENT_TOL && (far - t).abs() > EVENT_TOL {
                        target = Some(far);
                        h = h_step;
                        continue;
                    }
                }
                for &i in &changed {
                    let (root, _) = locate_root(sys, &step, i, g0[i], n, ne);
                    sol.crossings.push(Crossing {
                        t: root,
                        event: i,
                        direction: if g1[i] > g0[i] { 1 } else { -1 },
                    });
                }
                target = None;
            }
            if let Some(tt) = target {
                if t_new == tt {
                    target = None;
                }
            }
            g0.copy_from_slice(&g1);
        }
        sol.steps.push(step);
        t = t_new;
        y.copy_from_slice(&w.y1);
        let k7 = w.k[6].clone();
        w.k[0].copy_from_slice(&k7);

        let mut fac = fac11 / facold.powf(BETA);
        fac = (fac / SAFE).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
        let mut h_new = h_step / fac;
        if last_rejected && h_new.abs() > h_step.abs() {
            h_new = h_step;
        }
        facold = err.max(1e-4);
        last_rejected = false;
        h = h_new;
        if hit_end {
            break;
        }
    }
    Ok(sol)
}

fn sign_change(a: f64, b: f64) -> bool {
    (a < 0.0 && b >= 0.0) || (a > 0.0 && b <= 0.0)
}

/// Bisection on the dense output: returns the root estimate and the end of
/// the final bracket on the far side of the root.
fn locate_root<S: OdeSystem>(sys: &S, step: &DenseStep, event: usize, g_start: f64, n: usize, ne: usize) -> (f64, f64) {
    let mut y = vec![0.0; n];
    let mut g = vec![0.0; ne];
    let (mut a, mut b) = (step.t0, step.t1());
    let ga = g_start;
    while (b - a).abs() > EVENT_TOL {
        let m = 0.5 * (a + b);
        if m == a || m == b {
            break;
        }
        step.eval(m, &mut y);
        sys.events(m, &y, &mut g);
        if sign_change(ga, g[event]) {
            b = m;
        } else {
            a = m;
        }
    }
    (0.5 * (a + b), b)
}

fn dopri_stages<S: OdeSystem>(sys: &S, t: f64, y: &[f64], h: f64, w: &mut Work) -> Result<()> {
    let n = y.len();
    for s in 1..7 {
        for i in 0..n {
            let mut acc = 0.0;
            for (j, &a) in A[s].iter().enumerate().take(s) {
                acc += a * w.k[j][i];
            }
            w.tmp[i] = y[i] + h * acc;
        }
        if s == 6 {
            w.y1.copy_from_slice(&w.tmp);
        }
        sys.rhs(t + C[s] * h, &w.tmp, &mut w.k[s])?;
    }
    Ok(())
}

fn dense_step(t: f64, h: f64, y: &[f64], w: &Work) -> DenseStep {
    let n = y.len();
    let mut r = vec![0.0; 5 * n];
    for i in 0..n {
        let dy = w.y1[i] - y[i];
        let bspl = h * w.k[0][i] - dy;
        r[i] = y[i];
        r[n + i] = dy;
        r[2 * n + i] = bspl;
        r[3 * n + i] = dy - h * w.k[6][i] - bspl;
        r[4 * n + i] = h * (0..7).map(|s| D[s] * w.k[s][i]).sum::<f64>();
    }
    DenseStep { t0: t, h, r }
}

fn initial_step<S: OdeSystem>(sys: &S, t: f64, y: &[f64], f0: &[f64], dir: f64, opts: &OdeOptions, span: f64) -> Result<f64> {
    let n = y.len();
    let sk: Vec<f64> = y.iter().map(|v| opts.atol + opts.rtol * v.abs()).collect();
    let d0 = rms(y.iter().zip(&sk).map(|(v, s)| v / s), n);
    let d1 = rms(f0.iter().zip(&sk).map(|(v, s)| v / s), n);
    let mut hmax = opts.h_max.min(span);
    if let Some(m) = sys.max_step(t, y) {
        hmax = hmax.min(m);
    }
    let mut h0 = if d0 < 1e-10 || d1 < 1e-10 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(hmax);
    let y1: Vec<f64> = y.iter().zip(f0).map(|(v, f)| v + dir * h0 * f).collect();
    let mut f1 = vec![0.0; n];
    sys.rhs(t + dir * h0, &y1, &mut f1)?;
    let d2 = rms(f1.iter().zip(f0).zip(&sk).map(|((a, b), s)| (a - b) / s), n) / h0;
    let der12 = d1.max(d2);
    let h1 = if der12 <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / der12).powf(0.2)
    };
    Ok(dir * (100.0 * h0).min(h1).min(hmax))
}

/// Runs a system backward in its own time: `s ↦ t₀ + t₁ − s`.
pub struct Reversed<S> {
    pub inner: S,
    pub pivot: f64,
}

impl<S: OdeSystem> OdeSystem for Reversed<S> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn rhs(&self, s: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        self.inner.rhs(self.pivot - s, y, dy)?;
        dy.iter_mut().for_each(|v| *v = -*v);
        Ok(())
    }
    fn max_step(&self, s: f64, y: &[f64]) -> Option<f64> {
        self.inner.max_step(self.pivot - s, y)
    }
    fn event_count(&self) -> usize {
        self.inner.event_count()
    }
    fn events(&self, s: f64, y: &[f64], out: &mut [f64]) {
        self.inner.events(self.pivot - s, y, out)
    }
}
