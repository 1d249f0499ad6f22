//! Weak Pontryagin machinery for `min I[u] = ∫ L(t, q, u) dt` subject to
//! `q̇ = φ(t, q, u)`, `q(t₁) = q₁`: Hamiltonian, forward, adjoint and
//! linearized Cauchy problems, the first variation of `I` computed two ways,
//! a steepest-descent forward–backward sweep and empirical stability checks.
//!
//! Controls live on a uniform node grid and are interpolated by natural
//! cubic splines. All integrations go through [`crate::ode::solve`].

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::log_log_slope;
use crate::ode::{self, OdeOptions, OdeSystem, Solution};
use crate::{Error, Result};
#[cfg(not(feature = "std"))]
use num_traits::Float;

/// Default number of control nodes.
pub const DEFAULT_NODES: usize = 2001;
/// Integrator tolerance for all state, adjoint and linearized solves.
pub const SOLVE_TOL: f64 = 1e-10;
/// Relative tolerance of the construction-time partial derivative check.
pub const PARTIAL_CHECK_TOL: f64 = 1e-5;
/// Relative disagreement of the two δI paths that signals a broken partial.
pub const CONSISTENCY_TOL: f64 = 1e-4;
/// Consecutive non-decreasing cost evaluations tolerated by the sweep.
pub const MAX_STALLS: usize = 10;
/// Cost changes below `COST_NOISE·(1 + |I|)` are integration noise and do
/// not count as increases.
pub const COST_NOISE: f64 = 10.0 * SOLVE_TOL;

/// Running cost `L` and dynamics `φ` with their partial derivatives.
pub trait ControlModel {
    fn state_dim(&self) -> usize;

    fn control_dim(&self) -> usize;

    fn cost(&self, t: f64, q: &[f64], u: &[f64]) -> f64;

    fn cost_q(&self, t: f64, q: &[f64], u: &[f64], out: &mut [f64]);

    fn cost_u(&self, t: f64, q: &[f64], u: &[f64], out: &mut [f64]);

    fn dynamics(&self, t: f64, q: &[f64], u: &[f64], out: &mut [f64]);

    /// `out[i·n + j] = ∂φ_i/∂q_j`.
    fn dynamics_q(&self, t: f64, q: &[f64], u: &[f64], out: &mut [f64]);

    /// `out[i·k + j] = ∂φ_i/∂u_j`.
    fn dynamics_u(&self, t: f64, q: &[f64], u: &[f64], out: &mut [f64]);

    /// True when neither `L` nor `φ` depends explicitly on `t`.
    fn autonomous(&self) -> bool {
        false
    }
}

impl<M: ControlModel + ?Sized> ControlModel for &M {
    fn state_dim(&self) -> usize {
        (**self).state_dim()
    }
    fn control_dim(&self) -> usize {
        (**self).control_dim()
    }
    fn cost(&self, t: f64, q: &[f64], u: &[f64]) -> f64 {
        (**self).cost(t, q, u)
    }
    fn cost_q(&self, t: f64, q: &[f64], u: &[f64], out: &mut [f64]) {
        (**self).cost_q(t, q, u, out)
    }
    fn cost_u(&self, t: f64, q: &[f64], u: &[f64], out: &mut [f64]) {
        (**self).cost_u(t, q, u, out)
    }
    fn dynamics(&self, t: f64, q: &[f64], u: &[f64], out: &mut [f64]) {
        (**self).dynamics(t, q, u, out)
    }
    fn dynamics_q(&self, t: f64, q: &[f64], u: &[f64], out: &mut [f64]) {
        (**self).dynamics_q(t, q, u, out)
    }
    fn dynamics_u(&self, t: f64, q: &[f64], u: &[f64], out: &mut [f64]) {
        (**self).dynamics_u(t, q, u, out)
    }
    fn autonomous(&self) -> bool {
        (**self).autonomous()
    }
}

/// A validated control problem.
#[derive(Debug, Clone)]
pub struct ControlProblem<M> {
    model: M,
    q1: Vec<f64>,
    t_span: (f64, f64),
    control_box: Vec<(f64, f64)>,
}

impl<M: ControlModel> ControlProblem<M> {
    /// Validates dimensions and checks the partials of `L` and `φ` against
    /// central differences at `probes` seeded random points.
    pub fn new(model: M, q1: Vec<f64>, t_span: (f64, f64), control_box: Vec<(f64, f64)>, seed: u64, probes: usize) -> Result<Self> {
        let (n, k) = (model.state_dim(), model.control_dim());
        if n == 0 || k == 0 {
            return Err(Error::validation("control problem", "state and control dimensions must be positive"));
        }
        if q1.len() != n {
            return Err(Error::validation("initial state", "length does not match the state dimension"));
        }
        if control_box.len() != k || control_box.iter().any(|(lo, hi)| !(lo <= hi)) {
            return Err(Error::validation("control box", "need one ordered bound pair per control"));
        }
        if !(t_span.1 > t_span.0) || !t_span.0.is_finite() || !t_span.1.is_finite() {
            return Err(Error::validation("time span", "end must exceed start"));
        }
        let p = Self {
            model,
            q1,
            t_span,
            control_box,
        };
        p.check_partials(seed, probes)?;
        Ok(p)
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    pub fn q1(&self) -> &[f64] {
        &self.q1
    }

    pub fn t_span(&self) -> (f64, f64) {
        self.t_span
    }

    pub fn control_box(&self) -> &[(f64, f64)] {
        &self.control_box
    }

    fn dims(&self) -> (usize, usize) {
        (self.model.state_dim(), self.model.control_dim())
    }

    fn check_partials(&self, seed: u64, probes: usize) -> Result<()> {
        let (n, k) = self.dims();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let close = |a: f64, b: f64| (a - b).abs() <= PARTIAL_CHECK_TOL * a.abs().max(b.abs()).max(1.0);
        for _ in 0..probes {
            let t = rng.random_range(self.t_span.0..=self.t_span.1);
            let q: Vec<f64> = self.q1.iter().map(|v| v + rng.random_range(-1.0..=1.0)).collect();
            let u: Vec<f64> = self
                .control_box
                .iter()
                .map(|&(lo, hi)| rng.random_range(-1.0f64..=1.0).clamp(lo, hi))
                .collect();
            let mut lq = vec![0.0; n];
            let mut lu = vec![0.0; k];
            let mut fq = vec![0.0; n * n];
            let mut fu = vec![0.0; n * k];
            self.model.cost_q(t, &q, &u, &mut lq);
            self.model.cost_u(t, &q, &u, &mut lu);
            self.model.dynamics_q(t, &q, &u, &mut fq);
            self.model.dynamics_u(t, &q, &u, &mut fu);
            let mut fp = vec![0.0; n];
            let mut fm = vec![0.0; n];
            for j in 0..n {
                let h = 1e-6 * q[j].abs().max(1.0);
                let (mut qp, mut qm) = (q.clone(), q.clone());
                qp[j] += h;
                qm[j] -= h;
                let d = (self.model.cost(t, &qp, &u) - self.model.cost(t, &qm, &u)) / (2.0 * h);
                if !close(lq[j], d) {
                    return Err(Error::validation("∂L/∂q", alloc::format!("component {j}: {} vs difference {d}", lq[j])));
                }
                self.model.dynamics(t, &qp, &u, &mut fp);
                self.model.dynamics(t, &qm, &u, &mut fm);
                for i in 0..n {
                    let d = (fp[i] - fm[i]) / (2.0 * h);
                    if !close(fq[i * n + j], d) {
                        return Err(Error::validation("∂φ/∂q", alloc::format!("entry ({i}, {j}): {} vs difference {d}", fq[i * n + j])));
                    }
                }
            }
            for j in 0..k {
                let h = 1e-6 * u[j].abs().max(1.0);
                let (mut up, mut um) = (u.clone(), u.clone());
                up[j] += h;
                um[j] -= h;
                let d = (self.model.cost(t, &q, &up) - self.model.cost(t, &q, &um)) / (2.0 * h);
                if !close(lu[j], d) {
                    return Err(Error::validation("∂L/∂u", alloc::format!("component {j}: {} vs difference {d}", lu[j])));
                }
                self.model.dynamics(t, &q, &up, &mut fp);
                self.model.dynamics(t, &q, &um, &mut fm);
                for i in 0..n {
                    let d = (fp[i] - fm[i]) / (2.0 * h);
                    if !close(fu[i * k + j], d) {
                        return Err(Error::validation("∂φ/∂u", alloc::format!("entry ({i}, {j}): {} vs difference {d}", fu[i * k + j])));
                    }
                }
            }
        }
        Ok(())
    }

    /// `H = L + p·φ`.
    pub fn hamiltonian(&self, t: f64, q: &[f64], u: &[f64], p: &[f64]) -> f64 {
        let mut f = vec![0.0; q.len()];
        self.model.dynamics(t, q, u, &mut f);
        self.model.cost(t, q, u) + dot(p, &f)
    }

    /// `∂H/∂u = ∂L/∂u + (∂φ/∂u)ᵀ p`.
    pub fn hamiltonian_u(&self, t: f64, q: &[f64], u: &[f64], p: &[f64], out: &mut [f64]) {
        let (n, k) = self.dims();
        self.model.cost_u(t, q, u, out);
        let mut fu = vec![0.0; n * k];
        self.model.dynamics_u(t, q, u, &mut fu);
        for j in 0..k {
            out[j] += (0..n).map(|i| fu[i * k + j] * p[i]).sum::<f64>();
        }
    }

    /// `∂H/∂q = ∂L/∂q + (∂φ/∂q)ᵀ p`.
    pub fn hamiltonian_q(&self, t: f64, q: &[f64], u: &[f64], p: &[f64], out: &mut [f64]) {
        let n = q.len();
        self.model.cost_q(t, q, u, out);
        let mut fq = vec![0.0; n * n];
        self.model.dynamics_q(t, q, u, &mut fq);
        for j in 0..n {
            out[j] += (0..n).map(|i| fq[i * n + j] * p[i]).sum::<f64>();
        }
    }

    /// `∂H/∂t` by a central difference in the explicit time argument.
    pub fn hamiltonian_t(&self, t: f64, q: &[f64], u: &[f64], p: &[f64]) -> f64 {
        if self.model.autonomous() {
            return 0.0;
        }
        let h = 1e-5 * (1.0 + t.abs());
        (self.hamiltonian(t + h, q, u, p) - self.hamiltonian(t - h, q, u, p)) / (2.0 * h)
    }

    /// A control on the default node grid over the problem's span.
    pub fn control_from_fn(&self, f: impl Fn(f64, &mut [f64])) -> Result<Control> {
        Control::from_fn(self.t_span, DEFAULT_NODES, self.model.control_dim(), f)
    }

    pub fn zero_control(&self) -> Result<Control> {
        self.control_from_fn(|_, out| out.fill(0.0))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Control on a uniform node grid, interpolated by natural cubic splines.
#[derive(Debug, Clone, PartialEq)]
pub struct Control {
    t0: f64,
    step: f64,
    /// `values[c][i]`: component `c` at node `i`.
    values: Vec<Vec<f64>>,
    /// Spline second derivatives, same layout as `values`.
    curvature: Vec<Vec<f64>>,
}

impl Control {
    /// Samples `f(t, out)` on `nodes` uniform nodes over `span`.
    pub fn from_fn(span: (f64, f64), nodes: usize, dim: usize, f: impl Fn(f64, &mut [f64])) -> Result<Self> {
        if nodes < 3 {
            return Err(Error::validation("control nodes", "need at least 3"));
        }
        let step = (span.1 - span.0) / (nodes - 1) as f64;
        let mut values = vec![vec![0.0; nodes]; dim];
        let mut buf = vec![0.0; dim];
        for i in 0..nodes {
            f(span.0 + step * i as f64, &mut buf);
            for c in 0..dim {
                values[c][i] = buf[c];
            }
        }
        Self::from_values(span.0, step, values)
    }

    fn from_values(t0: f64, step: f64, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("control values"));
        }
        let curvature = values.iter().map(|v| natural_spline(v, step)).collect();
        Ok(Self {
            t0,
            step,
            values,
            curvature,
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn len(&self) -> usize {
        self.values[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn node(&self, i: usize) -> f64 {
        self.t0 + self.step * i as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    /// Values of component `c` at the nodes.
    pub fn component(&self, c: usize) -> &[f64] {
        &self.values[c]
    }

    /// Value at node `i`.
    pub fn at_node(&self, i: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[i]).collect()
    }

    pub fn eval(&self, t: f64, out: &mut [f64]) {
        let n = self.len();
        let s = ((t - self.t0) / self.step).clamp(0.0, (n - 1) as f64);
        let i = (s.floor() as usize).min(n - 2);
        let a = (i + 1) as f64 - s;
        let b = 1.0 - a;
        let h2 = self.step * self.step / 6.0;
        for (c, o) in out.iter_mut().enumerate() {
            let (y, m) = (&self.values[c], &self.curvature[c]);
            *o = a * y[i] + b * y[i + 1] + ((a * a * a - a) * m[i] + (b * b * b - b) * m[i + 1]) * h2;
        }
    }

    /// `self + s·other` on the same grid.
    pub fn axpy(&self, s: f64, other: &Control) -> Result<Control> {
        if other.len() != self.len() || other.dim() != self.dim() {
            return Err(Error::validation("control", "grids differ"));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + s * y).collect())
            .collect();
        Self::from_values(self.t0, self.step, values)
    }

    /// Same grid, values from `f(node index) → vector`.
    fn with_node_values(&self, f: impl Fn(usize) -> Vec<f64>) -> Result<Control> {
        let mut values = vec![vec![0.0; self.len()]; self.dim()];
        for i in 0..self.len() {
            for (c, v) in f(i).into_iter().enumerate() {
                values[c][i] = v;
            }
        }
        Self::from_values(self.t0, self.step, values)
    }
}

/// Second derivatives of the natural cubic spline through `y` on a uniform
/// grid (Thomas algorithm).
fn natural_spline(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    let inner = n - 2;
    let mut c = vec![0.0; inner];
    let mut d = vec![0.0; inner];
    for j in 0..inner {
        let i = j + 1;
        let rhs = 6.0 * (y[i + 1] - 2.0 * y[i] + y[i - 1]) / (h * h);
        let (cp, dp) = if j == 0 { (0.0, 0.0) } else { (c[j - 1], d[j - 1]) };
        let denom = 4.0 - cp;
        c[j] = 1.0 / denom;
        d[j] = (rhs - dp) / denom;
    }
    for j in (0..inner).rev() {
        let next = if j + 1 < inner { m[j + 2] } else { 0.0 };
        m[j + 1] = d[j] - c[j] * next;
    }
    m
}

/// Cost-accumulating state flow `(q̇, İ) = (φ, L)`.
struct StateFlow<'a, M> {
    problem: &'a ControlProblem<M>,
    control: &'a Control,
}

impl<M: ControlModel> OdeSystem for StateFlow<'_, M> {
    fn dim(&self) -> usize {
        self.problem.model.state_dim() + 1
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let n = y.len() - 1;
        let mut u = vec![0.0; self.control.dim()];
        self.control.eval(t, &mut u);
        self.problem.model.dynamics(t, &y[..n], &u, &mut dy[..n]);
        dy[n] = self.problem.model.cost(t, &y[..n], &u);
        Ok(())
    }
}

/// Forward solution `q^u` with the accumulated cost.
#[derive(Debug, Clone)]
pub struct StateTrajectory {
    solution: Solution,
    /// `I[u] = ∫ L(t, q^u, u) dt`.
    pub cost: f64,
}

impl StateTrajectory {
    pub fn state(&self, t: f64) -> Vec<f64> {
        let mut y = self.solution.state(t);
        y.pop();
        y
    }

    pub fn solution(&self) -> &Solution {
        &self.solution
    }
}

fn opts() -> OdeOptions {
    OdeOptions::with_tol(SOLVE_TOL)
}

/// Integrates `q̇ = φ(t, q, u(t))`, `q(t₁) = q₁`.
pub fn forward_state<M: ControlModel>(problem: &ControlProblem<M>, u: &Control) -> Result<StateTrajectory> {
    check_control(problem, u)?;
    let mut y0 = problem.q1.clone();
    y0.push(0.0);
    let flow = StateFlow { problem, control: u };
    let solution = ode::solve(&flow, problem.t_span.0, &y0, problem.t_span.1, &opts())?;
    let cost = *solution.state(problem.t_span.1).last().unwrap();
    Ok(StateTrajectory { solution, cost })
}

fn check_control<M: ControlModel>(problem: &ControlProblem<M>, u: &Control) -> Result<()> {
    if u.dim() != problem.model.control_dim() {
        return Err(Error::validation("control", "dimension does not match the problem"));
    }
    let end = u.node(u.len() - 1);
    let (a, b) = problem.t_span;
    if (u.t0 - a).abs() > 1e-12 * (1.0 + a.abs()) || (end - b).abs() > 1e-9 * (1.0 + b.abs()) {
        return Err(Error::validation("control", "node grid does not cover the time span"));
    }
    Ok(())
}

/// Adjoint flow `ṗ = −∂H/∂q` along a fixed forward solution.
struct AdjointFlow<'a, M> {
    problem: &'a ControlProblem<M>,
    control: &'a Control,
    forward: &'a StateTrajectory,
}

impl<M: ControlModel> OdeSystem for AdjointFlow<'_, M> {
    fn dim(&self) -> usize {
        self.problem.model.state_dim()
    }

    fn rhs(&self, t: f64, p: &[f64], dp: &mut [f64]) -> Result<()> {
        let q = self.forward.state(t);
        let mut u = vec![0.0; self.control.dim()];
        self.control.eval(t, &mut u);
        self.problem.hamiltonian_q(t, &q, &u, p, dp);
        dp.iter_mut().for_each(|v| *v = -*v);
        Ok(())
    }
}

/// Backward solution `p^u` with `p(t₂) = 0`.
#[derive(Debug, Clone)]
pub struct AdjointTrajectory {
    solution: Solution,
}

impl AdjointTrajectory {
    pub fn state(&self, t: f64) -> Vec<f64> {
        self.solution.state(t)
    }
}

/// Integrates `ṗ = −∂L/∂q − (∂φ/∂q)ᵀp` backward from `p(t₂) = 0`.
pub fn adjoint_state<M: ControlModel>(problem: &ControlProblem<M>, u: &Control, forward: &StateTrajectory) -> Result<AdjointTrajectory> {
    check_control(problem, u)?;
    let flow = AdjointFlow {
        problem,
        control: u,
        forward,
    };
    let p0 = vec![0.0; problem.model.state_dim()];
    let solution = ode::solve(&flow, problem.t_span.1, &p0, problem.t_span.0, &opts())?;
    Ok(AdjointTrajectory { solution })
}

/// Linearized flow `q̄̇ = φ_q q̄ + φ_u ū` with the accumulators
/// `∫(L_q·q̄ + L_u·ū)` and `∫(|L_q·q̄| + |L_u·ū|)`.
struct LinearFlow<'a, M> {
    problem: &'a ControlProblem<M>,
    control: &'a Control,
    direction: &'a Control,
    forward: &'a StateTrajectory,
}

impl<M: ControlModel> OdeSystem for LinearFlow<'_, M> {
    fn dim(&self) -> usize {
        self.problem.model.state_dim() + 2
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let (n, k) = self.problem.dims();
        let model = &self.problem.model;
        let q = self.forward.state(t);
        let mut u = vec![0.0; k];
        let mut ub = vec![0.0; k];
        self.control.eval(t, &mut u);
        self.direction.eval(t, &mut ub);
        let mut fq = vec![0.0; n * n];
        let mut fu = vec![0.0; n * k];
        model.dynamics_q(t, &q, &u, &mut fq);
        model.dynamics_u(t, &q, &u, &mut fu);
        for i in 0..n {
            dy[i] = (0..n).map(|j| fq[i * n + j] * y[j]).sum::<f64>() + (0..k).map(|j| fu[i * k + j] * ub[j]).sum::<f64>();
        }
        let mut lq = vec![0.0; n];
        let mut lu = vec![0.0; k];
        model.cost_q(t, &q, &u, &mut lq);
        model.cost_u(t, &q, &u, &mut lu);
        let a = dot(&lq, &y[..n]);
        let b = dot(&lu, &ub);
        dy[n] = a + b;
        dy[n + 1] = a.abs() + b.abs();
        Ok(())
    }
}

/// Linearized state `q̄` with `∫(L_q·q̄ + L_u·ū)`.
#[derive(Debug, Clone)]
pub struct LinearizedTrajectory {
    solution: Solution,
    /// `δI(u; ū)` through the linearized state.
    pub variation: f64,
    /// `∫(|L_q·q̄| + |L_u·ū|)`, the scale of `variation`.
    pub magnitude: f64,
}

impl LinearizedTrajectory {
    pub fn state(&self, t: f64) -> Vec<f64> {
        let mut y = self.solution.state(t);
        y.truncate(y.len() - 2);
        y
    }
}

/// Integrates `q̄̇ = ∂φ/∂q·q̄ + ∂φ/∂u·ū`, `q̄(t₁) = 0`.
pub fn linearized_state<M: ControlModel>(
    problem: &ControlProblem<M>,
    u: &Control,
    forward: &StateTrajectory,
    direction: &Control,
) -> Result<LinearizedTrajectory> {
    check_control(problem, u)?;
    check_control(problem, direction)?;
    let flow = LinearFlow {
        problem,
        control: u,
        direction,
        forward,
    };
    let n = problem.model.state_dim();
    let solution = ode::solve(&flow, problem.t_span.0, &vec![0.0; n + 2], problem.t_span.1, &opts())?;
    let end = solution.state(problem.t_span.1);
    Ok(LinearizedTrajectory {
        solution,
        variation: end[n],
        magnitude: end[n + 1],
    })
}

/// `∫ f(t) dt` over the span as a one-dimensional ODE.
struct Accumulate<F>(F);

impl<F: Fn(f64) -> (f64, f64)> OdeSystem for Accumulate<F> {
    fn dim(&self) -> usize {
        2
    }

    fn rhs(&self, t: f64, _y: &[f64], dy: &mut [f64]) -> Result<()> {
        let (v, m) = (self.0)(t);
        dy[0] = v;
        dy[1] = m;
        Ok(())
    }
}

/// `δI(u; ū)` computed through the linearized state and through `∂H/∂u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlVariation {
    /// `∫(∂L/∂q·q̄ + ∂L/∂u·ū)`.
    pub via_state: f64,
    /// `∫ ∂H/∂u·ū` with the adjoint `p^u`.
    pub via_hamiltonian: f64,
    /// Scale against which the two values are compared.
    pub magnitude: f64,
}

impl ControlVariation {
    /// `|via_state − via_hamiltonian| / magnitude`.
    pub fn relative_gap(&self) -> f64 {
        let d = (self.via_state - self.via_hamiltonian).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.magnitude
        }
    }
}

/// First variation of the cost in direction `ū`, both ways. Fails with
/// [`Error::InternalConsistency`] when they disagree by more than
/// [`CONSISTENCY_TOL`] relative.
pub fn control_first_variation<M: ControlModel>(problem: &ControlProblem<M>, u: &Control, direction: &Control) -> Result<ControlVariation> {
    let forward = forward_state(problem, u)?;
    let adjoint = adjoint_state(problem, u, &forward)?;
    let lin = linearized_state(problem, u, &forward, direction)?;
    let k = problem.model.control_dim();
    let acc = Accumulate(|t: f64| {
        let q = forward.state(t);
        let p = adjoint.state(t);
        let mut uu = vec![0.0; k];
        let mut ub = vec![0.0; k];
        u.eval(t, &mut uu);
        direction.eval(t, &mut ub);
        let mut hu = vec![0.0; k];
        problem.hamiltonian_u(t, &q, &uu, &p, &mut hu);
        let v = dot(&hu, &ub);
        (v, v.abs())
    });
    let sol = ode::solve(&acc, problem.t_span.0, &[0.0, 0.0], problem.t_span.1, &opts())?;
    let end = sol.state(problem.t_span.1);
    let out = ControlVariation {
        via_state: lin.variation,
        via_hamiltonian: end[0],
        magnitude: lin.magnitude.max(end[1]),
    };
    if out.relative_gap() > CONSISTENCY_TOL {
        return Err(Error::InternalConsistency {
            lhs: out.via_state,
            rhs: out.via_hamiltonian,
        });
    }
    Ok(out)
}

/// Iterate of the forward–backward sweep.
#[derive(Debug, Clone)]
pub struct SweepState {
    pub u: Control,
    pub forward: StateTrajectory,
    pub adjoint: AdjointTrajectory,
    /// `∂H/∂u` at the control nodes.
    pub gradient: Control,
    /// `max_t |∂H/∂u|` over the nodes.
    pub grad_norm: f64,
    pub iteration: usize,
    pub cost: f64,
}

impl SweepState {
    /// `q(t₁)`, `p(t₂)` as stored by the integrators.
    pub fn boundary_values(&self, t_span: (f64, f64)) -> (Vec<f64>, Vec<f64>) {
        (self.forward.state(t_span.0), self.adjoint.state(t_span.1))
    }
}

fn sweep_state<M: ControlModel>(problem: &ControlProblem<M>, u: Control, iteration: usize) -> Result<SweepState> {
    let forward = forward_state(problem, &u)?;
    let adjoint = adjoint_state(problem, &u, &forward)?;
    let k = problem.model.control_dim();
    let gradient = u.with_node_values(|i| {
        let t = u.node(i);
        let mut g = vec![0.0; k];
        problem.hamiltonian_u(t, &forward.state(t), &u.at_node(i), &adjoint.state(t), &mut g);
        g
    })?;
    let grad_norm = gradient.values.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
    let cost = forward.cost;
    Ok(SweepState {
        u,
        forward,
        adjoint,
        gradient,
        grad_norm,
        iteration,
        cost,
    })
}

/// Steepest descent `u ← u − α ∂H/∂u` with step halving on cost increase
/// beyond [`COST_NOISE`].
///
/// Stops when `‖∂H/∂u‖∞ ≤ grad_tol` or after `max_iter` sweeps. Returns
/// [`Error::StepSize`] after [`MAX_STALLS`] consecutive trial steps that do
/// not decrease the cost.
pub fn solve_wps<M: ControlModel>(problem: &ControlProblem<M>, u0: Control, alpha: f64, max_iter: usize, grad_tol: f64) -> Result<SweepState> {
    if !(alpha > 0.0) {
        return Err(Error::validation("step", "must be positive"));
    }
    let mut state = sweep_state(problem, u0, 0)?;
    let mut step = alpha;
    let mut stalls = 0;
    while state.grad_norm > grad_tol && state.iteration < max_iter {
        let trial_u = state.u.axpy(-step, &state.gradient)?;
        let trial = sweep_state(problem, trial_u, state.iteration + 1)?;
        if trial.cost < state.cost + COST_NOISE * (1.0 + state.cost.abs()) {
            state = trial;
            stalls = 0;
        } else {
            stalls += 1;
            if stalls >= MAX_STALLS {
                return Err(Error::StepSize { iterations: stalls });
            }
            step *= 0.5;
            state.iteration += 1;
        }
    }
    Ok(state)
}

/// Samples of `d/dt H − ∂H/∂t` along a sweep state.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianIdentity {
    pub t: Vec<f64>,
    pub hamiltonian: Vec<f64>,
    pub residual: Vec<f64>,
    /// Largest `|H|`, `|dH/dt|` or `|∂H/∂t|` seen.
    pub scale: f64,
}

impl HamiltonianIdentity {
    pub fn max_residual(&self) -> f64 {
        self.residual.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// `max |H(t) − H(t₁)| / scale`.
    pub fn drift(&self) -> f64 {
        let h0 = self.hamiltonian[0];
        self.hamiltonian.iter().fold(0.0_f64, |m, v| m.max((v - h0).abs())) / self.scale
    }
}

/// `H(t)` along the state, `dH/dt` by five-point central differences with
/// spacing `1e−3·(t₂−t₁)` on `samples` interior points.
pub fn hamiltonian_time_identity<M: ControlModel>(problem: &ControlProblem<M>, sweep: &SweepState, samples: usize) -> HamiltonianIdentity {
    let (a, b) = problem.t_span;
    let h = 1e-3 * (b - a);
    let k = problem.model.control_dim();
    let ham = |t: f64| {
        let mut u = vec![0.0; k];
        sweep.u.eval(t, &mut u);
        let q = sweep.forward.state(t);
        let p = sweep.adjoint.state(t);
        (problem.hamiltonian(t, &q, &u, &p), problem.hamiltonian_t(t, &q, &u, &p))
    };
    let mut out = HamiltonianIdentity {
        t: Vec::new(),
        hamiltonian: Vec::new(),
        residual: Vec::new(),
        scale: 0.0,
    };
    let lo = a + 2.0 * h;
    let hi = b - 2.0 * h;
    for i in 0..samples {
        let t = lo + (hi - lo) * i as f64 / (samples - 1).max(1) as f64;
        let d = (ham(t - 2.0 * h).0 - 8.0 * ham(t - h).0 + 8.0 * ham(t + h).0 - ham(t + 2.0 * h).0) / (12.0 * h);
        let (hv, ht) = ham(t);
        out.scale = out.scale.max(hv.abs()).max(d.abs()).max(ht.abs());
        out.t.push(t);
        out.hamiltonian.push(hv);
        out.residual.push(d - ht);
    }
    out
}

/// Residuals of the weak Pontryagin system at the control nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WpsResiduals {
    /// `max |q̇ − φ|`.
    pub state: f64,
    /// `max |ṗ + ∂H/∂q|`.
    pub adjoint: f64,
    /// `max |∂H/∂u|`.
    pub stationarity: f64,
    /// `max(|q(t₁) − q₁|, |p(t₂)|)`.
    pub boundary: f64,
    /// Largest `|φ|` or `|∂H/∂q|` seen.
    pub scale: f64,
}

/// Evaluates all four equations of the weak Pontryagin system, time
/// derivatives by five-point differences with spacing `5e−3·(t₂−t₁)`.
pub fn wps_residuals<M: ControlModel>(problem: &ControlProblem<M>, sweep: &SweepState) -> WpsResiduals {
    let (a, b) = problem.t_span;
    let h = 5e-3 * (b - a);
    let n = problem.model.state_dim();
    let d5 = |f: &dyn Fn(f64) -> Vec<f64>, t: f64| -> Vec<f64> {
        let (m2, m1, p1, p2) = (f(t - 2.0 * h), f(t - h), f(t + h), f(t + 2.0 * h));
        (0..n).map(|i| (m2[i] - 8.0 * m1[i] + 8.0 * p1[i] - p2[i]) / (12.0 * h)).collect()
    };
    let (q_start, p_end) = sweep.boundary_values(problem.t_span);
    let boundary = q_start
        .iter()
        .zip(&problem.q1)
        .map(|(x, y)| (x - y).abs())
        .chain(p_end.iter().map(|v| v.abs()))
        .fold(0.0, f64::max);
    let mut r = WpsResiduals {
        state: 0.0,
        adjoint: 0.0,
        stationarity: sweep.grad_norm,
        boundary,
        scale: 0.0,
    };
    for i in 0..sweep.u.len() {
        let t = sweep.u.node(i);
        if t - 2.0 * h < a || t + 2.0 * h > b {
            continue;
        }
        let q = sweep.forward.state(t);
        let p = sweep.adjoint.state(t);
        let u = sweep.u.at_node(i);
        let mut f = vec![0.0; n];
        problem.model.dynamics(t, &q, &u, &mut f);
        let mut hq = vec![0.0; n];
        problem.hamiltonian_q(t, &q, &u, &p, &mut hq);
        let dq = d5(&|s| sweep.forward.state(s), t);
        let dp = d5(&|s| sweep.adjoint.state(s), t);
        for j in 0..n {
            r.state = r.state.max((dq[j] - f[j]).abs());
            r.adjoint = r.adjoint.max((dp[j] + hq[j]).abs());
            r.scale = r.scale.max(f[j].abs()).max(hq[j].abs());
        }
    }
    r
}

/// Order-one and order-two stability of the control-to-state map in a
/// direction `ū`.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub h: Vec<f64>,
    /// `‖q^{u+hū} − q^u‖∞`.
    pub first: Vec<f64>,
    /// `‖q^{u+hū} − q^u − h q̄‖∞`.
    pub second: Vec<f64>,
}

impl StabilityReport {
    /// `first[i] / h[i]`.
    pub fn first_ratios(&self) -> Vec<f64> {
        self.first.iter().zip(&self.h).map(|(f, h)| f / h).collect()
    }

    /// `max/min` of [`Self::first_ratios`]; close to 1 for a stable constant.
    pub fn first_ratio_spread(&self) -> f64 {
        let r = self.first_ratios();
        let max = r.iter().fold(0.0_f64, |m, v| m.max(*v));
        let min = r.iter().fold(f64::INFINITY, |m, v| m.min(*v));
        max / min
    }

    /// Log-log slope of `second` against `h`.
    pub fn second_order_slope(&self) -> Result<f64> {
        log_log_slope(&self.h, &self.second)
    }
}

/// Compares perturbed forward solves with the linearization on the control
/// nodes for each `h`.
pub fn stability_orders<M: ControlModel>(problem: &ControlProblem<M>, u: &Control, direction: &Control, hs: &[f64]) -> Result<StabilityReport> {
    let base = forward_state(problem, u)?;
    let lin = linearized_state(problem, u, &base, direction)?;
    let nodes = u.nodes();
    let mut report = StabilityReport {
        h: hs.to_vec(),
        first: Vec::new(),
        second: Vec::new(),
    };
    for &h in hs {
        let pert = forward_state(problem, &u.axpy(h, direction)?)?;
        let (mut f, mut s) = (0.0_f64, 0.0_f64);
        for &t in &nodes {
            let (qp, q0, ql) = (pert.state(t), base.state(t), lin.state(t));
            for j in 0..q0.len() {
                let d = qp[j] - q0[j];
                f = f.max(d.abs());
                s = s.max((d - h * ql[j]).abs());
            }
        }
        report.first.push(f);
        report.second.push(s);
    }
    Ok(report)
}

/// Empirical Lipschitz constant `L_u = max |∂φ/∂q|` along `q^u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzEstimate {
    pub constant: f64,
    /// `(t₂ − t₁)·L_u`; the Grönwall bound is informative only below 1.
    pub product: f64,
}

impl LipschitzEstimate {
    pub fn warns(&self) -> bool {
        self.product >= 1.0
    }
}

/// Samples the operator ∞-norm of `∂φ/∂q` on the control nodes.
pub fn lipschitz_estimate<M: ControlModel>(problem: &ControlProblem<M>, u: &Control) -> Result<LipschitzEstimate> {
    let forward = forward_state(problem, u)?;
    let n = problem.model.state_dim();
    let mut fq = vec![0.0; n * n];
    let mut constant = 0.0_f64;
    for i in 0..u.len() {
        let t = u.node(i);
        problem.model.dynamics_q(t, &forward.state(t), &u.at_node(i), &mut fq);
        for row in fq.chunks(n) {
            constant = constant.max(row.iter().map(|v| v.abs()).sum());
        }
    }
    let (a, b) = problem.t_span;
    Ok(LipschitzEstimate {
        constant,
        product: (b - a) * constant,
    })
}

/// Scalar test problems with `φ = u` unless stated otherwise.
pub mod models {
    use super::ControlModel;
    #[cfg(not(feature = "std"))]
    use num_traits::Float;

    /// `L = ½(q² + u²)`, `φ = u`.
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
    pub struct Lqr;

    /// `L = ½(q − 1)² + ½u²`, `φ = u`.
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
    pub struct Tracking;

    /// `L = ½u² + t·q`, `φ = u`.
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
    pub struct TimeWeighted;

    /// `L = ½(q² + u²)`, `φ = sin q + u`.
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
    pub struct SineDrift;

    macro_rules! scalar_model {
        ($ty:ty, autonomous = $auto:expr,
         cost = |$t:ident, $q:ident, $u:ident| $cost:expr,
         cost_q = $cq:expr, cost_u = $cu:expr,
         dynamics = $f:expr, dynamics_q = $fq:expr) => {
            impl ControlModel for $ty {
                fn state_dim(&self) -> usize {
                    1
                }
                fn control_dim(&self) -> usize {
                    1
                }
                fn cost(&self, $t: f64, q: &[f64], u: &[f64]) -> f64 {
                    let ($q, $u) = (q[0], u[0]);
                    let _ = $t;
                    $cost
                }
                fn cost_q(&self, $t: f64, q: &[f64], u: &[f64], out: &mut [f64]) {
                    let ($q, $u) = (q[0], u[0]);
                    let _ = ($t, $q, $u);
                    out[0] = $cq;
                }
                fn cost_u(&self, $t: f64, q: &[f64], u: &[f64], out: &mut [f64]) {
                    let ($q, $u) = (q[0], u[0]);
                    let _ = ($t, $q, $u);
                    out[0] = $cu;
                }
                fn dynamics(&self, $t: f64, q: &[f64], u: &[f64], out: &mut [f64]) {
                    let ($q, $u) = (q[0], u[0]);
                    let _ = ($t, $q, $u);
                    out[0] = $f;
                }
                fn dynamics_q(&self, $t: f64, q: &[f64], u: &[f64], out: &mut [f64]) {
                    let ($q, $u) = (q[0], u[0]);
                    let _ = ($t, $q, $u);
                    out[0] = $fq;
                }
                fn dynamics_u(&self, _t: f64, _q: &[f64], _u: &[f64], out: &mut [f64]) {
                    out[0] = 1.0;
                }
                fn autonomous(&self) -> bool {
                    $auto
                }
            }
        };
    }

    scalar_model!(Lqr, autonomous = true,
        cost = |t, q, u| 0.5 * (q * q + u * u),
        cost_q = q, cost_u = u,
        dynamics = u, dynamics_q = 0.0);
    scalar_model!(Tracking, autonomous = true,
        cost = |t, q, u| 0.5 * (q - 1.0) * (q - 1.0) + 0.5 * u * u,
        cost_q = q - 1.0, cost_u = u,
        dynamics = u, dynamics_q = 0.0);
    scalar_model!(TimeWeighted, autonomous = false,
        cost = |t, q, u| 0.5 * u * u + t * q,
        cost_q = t, cost_u = u,
        dynamics = u, dynamics_q = 0.0);
    scalar_model!(SineDrift, autonomous = true,
        cost = |t, q, u| 0.5 * (q * q + u * u),
        cost_q = q, cost_u = u,
        dynamics = q.sin() + u, dynamics_q = q.cos());
}

#[cfg(test)]
mod tests {
    use super::models::*;
    use super::*;

    fn problem<M: ControlModel>(m: M, q1: f64) -> ControlProblem<M> {
        ControlProblem::new(m, vec![q1], (0.0, 1.0), vec![(-10.0, 10.0)], 3, 20).unwrap()
    }

    fn u_star(t: f64) -> f64 {
        (t - 1.0).sinh() / 1f64.cosh()
    }

    #[test]
    fn hamiltonian_examples() {
        let p = problem(Lqr, 1.0);
        assert_eq!(p.hamiltonian(0.3, &[2.0], &[3.0], &[0.5]), 0.5 * (4.0 + 9.0) + 1.5);
        assert_eq!(p.hamiltonian(0.3, &[2.0], &[3.0], &[0.0]), 6.5);
        let mut g = [0.0];
        p.hamiltonian_u(0.3, &[2.0], &[3.0], &[0.5], &mut g);
        assert_eq!(g[0], 3.5);
    }

    #[test]
    fn broken_partials_are_rejected() {
        struct Wrong;
        impl ControlModel for Wrong {
            fn state_dim(&self) -> usize {
                1
            }
            fn control_dim(&self) -> usize {
                1
            }
            fn cost(&self, _: f64, q: &[f64], _: &[f64]) -> f64 {
                q[0] * q[0]
            }
            fn cost_q(&self, _: f64, q: &[f64], _: &[f64], out: &mut [f64]) {
                out[0] = q[0];
            }
            fn cost_u(&self, _: f64, _: &[f64], _: &[f64], out: &mut [f64]) {
                out[0] = 0.0;
            }
            fn dynamics(&self, _: f64, _: &[f64], u: &[f64], out: &mut [f64]) {
                out[0] = u[0];
            }
            fn dynamics_q(&self, _: f64, _: &[f64], _: &[f64], out: &mut [f64]) {
                out[0] = 0.0;
            }
            fn dynamics_u(&self, _: f64, _: &[f64], _: &[f64], out: &mut [f64]) {
                out[0] = 1.0;
            }
        }
        let err = ControlProblem::new(Wrong, vec![0.0], (0.0, 1.0), vec![(-1.0, 1.0)], 1, 5).err().unwrap();
        assert!(matches!(err, Error::Validation { what: "∂L/∂q", .. }));
    }

    #[test]
    fn spline_reproduces_cubics() {
        let c = Control::from_fn((0.0, 2.0), 41, 1, |t, o| o[0] = (3.0 * t).sin()).unwrap();
        let mut v = [0.0];
        for t in [0.013, 0.77, 1.999] {
            c.eval(t, &mut v);
            assert!((v[0] - (3.0 * t).sin()).abs() < 1e-4);
        }
        c.eval(c.node(7), &mut v);
        assert_eq!(v[0], c.component(0)[7]);
    }

    #[test]
    fn forward_examples() {
        struct Growth;
        impl ControlModel for Growth {
            fn state_dim(&self) -> usize {
                1
            }
            fn control_dim(&self) -> usize {
                1
            }
            fn cost(&self, _: f64, _: &[f64], _: &[f64]) -> f64 {
                0.0
            }
            fn cost_q(&self, _: f64, _: &[f64], _: &[f64], out: &mut [f64]) {
                out[0] = 0.0;
            }
            fn cost_u(&self, _: f64, _: &[f64], _: &[f64], out: &mut [f64]) {
                out[0] = 0.0;
            }
            fn dynamics(&self, _: f64, q: &[f64], _: &[f64], out: &mut [f64]) {
                out[0] = q[0];
            }
            fn dynamics_q(&self, _: f64, _: &[f64], _: &[f64], out: &mut [f64]) {
                out[0] = 1.0;
            }
            fn dynamics_u(&self, _: f64, _: &[f64], _: &[f64], out: &mut [f64]) {
                out[0] = 0.0;
            }
        }
        let p = problem(Lqr, 0.0);
        let one = p.control_from_fn(|_, o| o[0] = 1.0).unwrap();
        let f = forward_state(&p, &one).unwrap();
        assert!((f.state(0.6)[0] - 0.6).abs() < 1e-12);

        let g = problem(Growth, 1.0);
        let f = forward_state(&g, &g.zero_control().unwrap()).unwrap();
        assert!((f.state(1.0)[0] - 1f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn lqr_optimum_forward_and_adjoint() {
        let p = problem(Lqr, 1.0);
        let u = p.control_from_fn(|t, o| o[0] = u_star(t)).unwrap();
        let f = forward_state(&p, &u).unwrap();
        let a = adjoint_state(&p, &u, &f).unwrap();
        for t in [0.0, 0.25, 0.5, 0.9, 1.0] {
            assert!((f.state(t)[0] - (t - 1.0).cosh() / 1f64.cosh()).abs() < 1e-8);
            assert!((a.state(t)[0] + u_star(t)).abs() < 1e-8);
        }
        assert_eq!(a.state(1.0)[0], 0.0);
    }

    #[test]
    fn adjoint_vanishes_without_state_dependence() {
        struct Free;
        impl ControlModel for Free {
            fn state_dim(&self) -> usize {
                1
            }
            fn control_dim(&self) -> usize {
                1
            }
            fn cost(&self, _: f64, _: &[f64], u: &[f64]) -> f64 {
                u[0] * u[0]
            }
            fn cost_q(&self, _: f64, _: &[f64], _: &[f64], out: &mut [f64]) {
                out[0] = 0.0;
            }
            fn cost_u(&self, _: f64, _: &[f64], u: &[f64], out: &mut [f64]) {
                out[0] = 2.0 * u[0];
            }
            fn dynamics(&self, _: f64, _: &[f64], u: &[f64], out: &mut [f64]) {
                out[0] = u[0];
            }
            fn dynamics_q(&self, _: f64, _: &[f64], _: &[f64], out: &mut [f64]) {
                out[0] = 0.0;
            }
            fn dynamics_u(&self, _: f64, _: &[f64], _: &[f64], out: &mut [f64]) {
                out[0] = 1.0;
            }
        }
        let p = problem(Free, 0.5);
        let u = p.control_from_fn(|t, o| o[0] = t.cos()).unwrap();
        let a = adjoint_state(&p, &u, &forward_state(&p, &u).unwrap()).unwrap();
        assert_eq!(a.state(0.3)[0], 0.0);
    }

    #[test]
    fn linearized_examples() {
        let p = problem(Lqr, 1.0);
        let u = p.zero_control().unwrap();
        let f = forward_state(&p, &u).unwrap();
        let ub = p.control_from_fn(|t, o| o[0] = t * t).unwrap();
        let lin = linearized_state(&p, &u, &f, &ub).unwrap();
        assert!((lin.state(0.7)[0] - 0.7f64.powi(3) / 3.0).abs() < 1e-9);
        let zero = linearized_state(&p, &u, &f, &p.zero_control().unwrap()).unwrap();
        assert_eq!(zero.state(0.7)[0], 0.0);
        assert_eq!(zero.variation, 0.0);
    }

    #[test]
    fn first_variation_two_ways() {
        let p = problem(SineDrift, 0.5);
        let u = p.control_from_fn(|t, o| o[0] = 0.3 * t - 0.2).unwrap();
        let ub = p.control_from_fn(|t, o| o[0] = (2.0 * t).cos()).unwrap();
        let v = control_first_variation(&p, &u, &ub).unwrap();
        assert!(v.relative_gap() <= 1e-6, "{v:?}");
        let h = 1e-5;
        let plus = forward_state(&p, &u.axpy(h, &ub).unwrap()).unwrap().cost;
        let minus = forward_state(&p, &u.axpy(-h, &ub).unwrap()).unwrap().cost;
        let fd = (plus - minus) / (2.0 * h);
        assert!((fd - v.via_state).abs() <= 1e-5 * v.via_state.abs(), "{fd} vs {v:?}");
        let zero = control_first_variation(&p, &u, &p.zero_control().unwrap()).unwrap();
        assert_eq!((zero.via_state, zero.via_hamiltonian), (0.0, 0.0));
        let opt = problem(Lqr, 1.0);
        let us = opt.control_from_fn(|t, o| o[0] = u_star(t)).unwrap();
        let v = control_first_variation(&opt, &us, &ub).unwrap();
        assert!(v.via_state.abs() <= 1e-7 && v.via_hamiltonian.abs() <= 1e-7);
    }

    #[test]
    fn lqr_sweep_converges() {
        let p = problem(Lqr, 1.0);
        let s = solve_wps(&p, p.zero_control().unwrap(), 0.5, 200, 1e-8).unwrap();
        let err = (0..s.u.len()).map(|i| (s.u.component(0)[i] - u_star(s.u.node(i))).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-5, "{err}");
        let ident = hamiltonian_time_identity(&p, &s, 101);
        assert!(ident.max_residual() <= 1e-5 * ident.scale);
        assert!(ident.drift() <= 1e-5);
        let r = wps_residuals(&p, &s);
        assert!(r.state.max(r.adjoint).max(r.stationarity) <= 10.0 * 1e-8 * r.scale.max(1.0), "{r:?}");
        assert!(r.boundary <= 1e-12);

        let again = solve_wps(&p, s.u.clone(), 0.5, 200, 1e-8).unwrap();
        assert_eq!(again.iteration, 0);
    }

    #[test]
    fn time_weighted_identity() {
        let p = problem(TimeWeighted, 0.0);
        let s = solve_wps(&p, p.zero_control().unwrap(), 0.5, 200, 1e-8).unwrap();
        // p = (1 − t²)/2 and u = −p.
        let t = 0.4;
        assert!((s.adjoint.state(t)[0] - 0.5 * (1.0 - t * t)).abs() < 1e-7);
        let ident = hamiltonian_time_identity(&p, &s, 101);
        assert!(ident.max_residual() <= 1e-5 * ident.scale);
    }

    #[test]
    fn stability_orders_and_lipschitz() {
        let p = problem(SineDrift, 0.5);
        let u = p.control_from_fn(|t, o| o[0] = 0.2 * t).unwrap();
        let ub = p.control_from_fn(|t, o| o[0] = (3.0 * t).sin()).unwrap();
        let r = stability_orders(&p, &u, &ub, &[1e-1, 1e-2, 1e-3, 1e-4]).unwrap();
        assert!(r.first_ratio_spread() < 1.5, "{r:?}");
        assert!(r.second_order_slope().unwrap() >= 1.9, "{r:?}");
        let l = lipschitz_estimate(&p, &u).unwrap();
        assert!(l.constant <= 1.0 && l.constant > 0.5);
    }

    #[test]
    fn step_size_error_on_stall() {
        let p = problem(Lqr, 1.0);
        // A huge step overshoots every time until the stall limit.
        let err = solve_wps(&p, p.zero_control().unwrap(), 1e6, 200, 1e-12).unwrap_err();
        assert!(matches!(err, Error::StepSize { .. }));
    }
}
