//! Per-ε integration of three singular mechanical systems whose
//! coefficients switch through mollified Heaviside and Dirac profiles:
//! a pendulum whose length drops from `L₁+L₂` to `L₂` when `θ` passes `θ₀`,
//! a pendulum whose damping changes inside `|θ| < θ₀`, and a
//! Pais–Uhlenbeck oscillator whose frequencies switch at `t = t_s`.
//!
//! Each system is an [`OdeSystem`] with events on the layer edges `±1/b` and
//! on the clamp-zone edges `±4/b`; steps are limited to `0.2/b` inside the
//! clamp zone. The result is a [`Trajectory`] with dense output, monitors on
//! a fixed stride and the time intervals spent near each layer.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::gauge::GaugeKind;
use crate::linalg::{least_squares, solve as linear_solve};
use crate::mollifier::{MollifierSpec, Scaled};
use crate::ode::{self, Crossing, OdeOptions, OdeSystem, Solution};
use crate::variational::{Curve, Lagrangian, Slot};
use crate::{Error, Result};
#[cfg(not(feature = "std"))]
use num_traits::Float;

/// Half-width of the clamp zone around a layer, in units of `1/b`.
pub const ZONE_WIDTH: f64 = 4.0;
/// Step bound inside the clamp zone, in units of `1/b`.
pub const ZONE_STEP: f64 = 0.2;
/// Monitor stride as a fraction of the time span.
pub const STRIDE_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendulumParams {
    pub l1: f64,
    pub l2: f64,
    pub g: f64,
    pub theta0: f64,
    pub m: f64,
}

impl Default for PendulumParams {
    fn default() -> Self {
        Self {
            l1: 0.4,
            l2: 0.2,
            g: 9.8,
            theta0: core::f64::consts::PI / 40.0,
            m: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampedParams {
    /// Damping outside `|θ| < θ₀`.
    pub beta1: f64,
    /// Damping inside `|θ| < θ₀`.
    pub beta2: f64,
    pub lambda: f64,
    pub g: f64,
    pub theta0: f64,
    pub m: f64,
}

impl Default for DampedParams {
    fn default() -> Self {
        Self {
            beta1: 0.0064,
            beta2: 0.3859,
            lambda: 0.6,
            g: 9.8,
            theta0: core::f64::consts::PI / 40.0,
            m: 1.0,
        }
    }
}

/// Frequencies `ω̂` apply for `t < t_s`, `ω′` for `t > t_s`:
/// `ω_i(t) = ω′_i + H(t_s − t)(ω̂_i − ω′_i)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PuParams {
    pub m: f64,
    pub ts: f64,
    pub w1: f64,
    pub w1hat: f64,
    pub w2: f64,
    pub w2hat: f64,
}

impl Default for PuParams {
    fn default() -> Self {
        Self {
            m: 1.0,
            ts: 15.0,
            w1: 0.5,
            w1hat: 0.7,
            w2: 1.0,
            w2hat: 1.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SystemSpec {
    Pendulum(PendulumParams),
    Damped(DampedParams),
    PaisUhlenbeck(PuParams),
}

impl SystemSpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Pendulum(_) => "pendulum",
            Self::Damped(_) => "damped_two_media",
            Self::PaisUhlenbeck(_) => "pais_uhlenbeck",
        }
    }

    /// Order of the equation of motion.
    pub fn order(&self) -> usize {
        match self {
            Self::PaisUhlenbeck(_) => 4,
            _ => 2,
        }
    }

    /// Singular locations: in `θ` for the pendula, in `t` for the oscillator.
    pub fn layers(&self) -> Vec<f64> {
        match self {
            Self::Pendulum(p) => vec![p.theta0],
            Self::Damped(p) => vec![-p.theta0, p.theta0],
            Self::PaisUhlenbeck(p) => vec![p.ts],
        }
    }

    /// True when the layers are located in time rather than in the state.
    pub fn layers_in_time(&self) -> bool {
        matches!(self, Self::PaisUhlenbeck(_))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |what: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::validation(what, "must be positive and finite"))
            }
        };
        match self {
            Self::Pendulum(p) => {
                positive("L1", p.l1)?;
                positive("L2", p.l2)?;
                positive("g", p.g)?;
                positive("m", p.m)?;
                positive("theta0", p.theta0)
            }
            Self::Damped(p) => {
                positive("Lambda", p.lambda)?;
                positive("g", p.g)?;
                positive("m", p.m)?;
                positive("theta0", p.theta0)?;
                if !(p.beta1.is_finite() && p.beta1 >= 0.0 && p.beta2.is_finite() && p.beta2 >= 0.0) {
                    return Err(Error::validation("beta", "damping rates must be non-negative"));
                }
                Ok(())
            }
            Self::PaisUhlenbeck(p) => {
                positive("m", p.m)?;
                positive("w1", p.w1)?;
                positive("w1hat", p.w1hat)?;
                positive("w2", p.w2)?;
                positive("w2hat", p.w2hat)?;
                if !p.ts.is_finite() {
                    return Err(Error::validation("ts", "must be finite"));
                }
                Ok(())
            }
        }
    }
}

/// A system description at one mollifier scale `b_ε`.
#[derive(Debug, Clone)]
pub struct SingularSystem {
    spec: SystemSpec,
    mollifier: Arc<MollifierSpec>,
    eps: f64,
    b: f64,
}

impl SingularSystem {
    pub fn new(spec: SystemSpec, mollifier: Arc<MollifierSpec>, kind: GaugeKind, eps: f64) -> Result<Self> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::validation("eps", "must be positive"));
        }
        let b = mollifier.scale(kind, eps);
        let mut sys = Self::at_scale(spec, mollifier, b)?;
        sys.eps = eps;
        Ok(sys)
    }

    /// System at an explicit scale `b`; `eps` is reported as NaN.
    pub fn at_scale(spec: SystemSpec, mollifier: Arc<MollifierSpec>, b: f64) -> Result<Self> {
        spec.validate()?;
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::validation("scale", "must be positive and finite"));
        }
        Ok(Self {
            spec,
            mollifier,
            eps: f64::NAN,
            b,
        })
    }

    pub fn spec(&self) -> &SystemSpec {
        &self.spec
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn mollifier(&self) -> &Arc<MollifierSpec> {
        &self.mollifier
    }

    fn scaled(&self) -> Scaled<'_> {
        self.mollifier.at_scale(self.b)
    }

    pub fn heaviside(&self, x: f64) -> f64 {
        self.scaled().heaviside(x)
    }

    pub fn delta(&self, x: f64) -> f64 {
        self.scaled().delta(x)
    }

    /// The coordinate in which the layers live.
    pub fn layer_coordinate(&self, t: f64, y: &[f64]) -> f64 {
        if self.spec.layers_in_time() {
            t
        } else {
            y[0]
        }
    }

    /// Distance from the nearest layer in the layer coordinate.
    pub fn layer_distance(&self, t: f64, y: &[f64]) -> f64 {
        let x = self.layer_coordinate(t, y);
        self.spec
            .layers()
            .iter()
            .fold(f64::INFINITY, |d, l| d.min((x - l).abs()))
    }

    /// `(Λ(θ), Λ′(θ))` for the variable-length pendulum.
    pub fn pendulum_length(&self, p: &PendulumParams, theta: f64) -> (f64, f64) {
        let x = p.theta0 - theta;
        (self.heaviside(x) * p.l1 + p.l2, -self.delta(x) * p.l1)
    }

    /// `β(θ) = β₁ + (H(θ+θ₀) − H(θ−θ₀))(β₂−β₁)`.
    pub fn damping(&self, p: &DampedParams, theta: f64) -> f64 {
        p.beta1 + (self.heaviside(theta + p.theta0) - self.heaviside(theta - p.theta0)) * (p.beta2 - p.beta1)
    }

    /// `([ω₁, ω₂], [ω̇₁, ω̇₂])` at time `t`.
    pub fn frequencies(&self, p: &PuParams, t: f64) -> ([f64; 2], [f64; 2]) {
        let h = self.heaviside(p.ts - t);
        let d = self.delta(p.ts - t);
        (
            [p.w1 + h * (p.w1hat - p.w1), p.w2 + h * (p.w2hat - p.w2)],
            [-d * (p.w1hat - p.w1), -d * (p.w2hat - p.w2)],
        )
    }

    /// `θ̈ = [−θ̇²ΛΛ′ + gΛ′(cosθ − cosθ₀) − gΛ sinθ] / Λ²`.
    pub fn pendulum_rhs(&self, p: &PendulumParams, t: f64, theta: f64, theta_dot: f64) -> Result<f64> {
        let (l, dl) = self.pendulum_length(p, theta);
        if !(l > 0.0) {
            return Err(Error::InvalidState {
                t,
                reason: alloc::format!("pendulum length {l} is not positive"),
            });
        }
        Ok((-theta_dot * theta_dot * l * dl + p.g * dl * (theta.cos() - p.theta0.cos()) - p.g * l * theta.sin()) / (l * l))
    }

    /// `θ̈ = −2β(θ)θ̇ − g sinθ/Λ`.
    pub fn damped_rhs(&self, p: &DampedParams, theta: f64, theta_dot: f64) -> f64 {
        -2.0 * self.damping(p, theta) * theta_dot - p.g * theta.sin() / p.lambda
    }

    /// `q⁗ = −Ωq̈ − Ω̇q̇ − Πq` with `Ω = ω₁²+ω₂²`, `Π = ω₁²ω₂²`.
    pub fn pu_rhs(&self, p: &PuParams, t: f64, q: f64, q1: f64, q2: f64) -> f64 {
        let ([w1, w2], [d1, d2]) = self.frequencies(p, t);
        let omega = w1 * w1 + w2 * w2;
        let omega_dot = 2.0 * (w1 * d1 + w2 * d2);
        -omega * q2 - omega_dot * q1 - w1 * w1 * w2 * w2 * q
    }

    /// Highest derivative from the equation of motion.
    pub fn acceleration(&self, t: f64, y: &[f64]) -> Result<f64> {
        match &self.spec {
            SystemSpec::Pendulum(p) => self.pendulum_rhs(p, t, y[0], y[1]),
            SystemSpec::Damped(p) => Ok(self.damped_rhs(p, y[0], y[1])),
            SystemSpec::PaisUhlenbeck(p) => Ok(self.pu_rhs(p, t, y[0], y[1], y[2])),
        }
    }

    /// Conserved (pendulum) or piecewise-conserved (oscillator) energy.
    /// The damped system is dissipative and has none.
    pub fn energy(&self, t: f64, y: &[f64]) -> Result<f64> {
        match &self.spec {
            SystemSpec::Pendulum(p) => {
                let (l, _) = self.pendulum_length(p, y[0]);
                let h = self.heaviside(p.theta0 - y[0]);
                Ok(0.5 * p.m * y[1] * y[1] * l * l - p.m * p.g * l * y[0].cos() - p.m * p.g * (1.0 - h) * p.l1 * p.theta0.cos())
            }
            SystemSpec::Damped(_) => Err(Error::Unsupported("energy monitor")),
            SystemSpec::PaisUhlenbeck(p) => {
                let ([w1, w2], _) = self.frequencies(p, t);
                let (q, q1, q2, q3) = (y[0], y[1], y[2], y[3]);
                Ok(0.5 * p.m * (2.0 * q1 * q3 - q2 * q2 + (w1 * w1 + w2 * w2) * q1 * q1 + w1 * w1 * w2 * w2 * q * q))
            }
        }
    }

    pub fn has_energy(&self) -> bool {
        !matches!(self.spec, SystemSpec::Damped(_))
    }

    /// Generalized force `Q = −2mβ(θ)Λ²θ̇` of the damped system, zero otherwise.
    pub fn force(&self, jet: &[f64]) -> f64 {
        match &self.spec {
            SystemSpec::Damped(p) => -2.0 * p.m * self.damping(p, jet[0]) * p.lambda * p.lambda * jet[1],
            _ => 0.0,
        }
    }
}

impl OdeSystem for SingularSystem {
    fn dim(&self) -> usize {
        self.spec.order()
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let n = y.len();
        dy[..n - 1].copy_from_slice(&y[1..]);
        dy[n - 1] = self.acceleration(t, y)?;
        Ok(())
    }

    fn max_step(&self, t: f64, y: &[f64]) -> Option<f64> {
        (self.layer_distance(t, y) < ZONE_WIDTH / self.b).then_some(ZONE_STEP / self.b)
    }

    fn event_count(&self) -> usize {
        4 * self.spec.layers().len()
    }

    /// Per layer: `x − l ∓ 1/b` then `x − l ∓ 4/b`.
    fn events(&self, t: f64, y: &[f64], out: &mut [f64]) {
        let x = self.layer_coordinate(t, y);
        let w = 1.0 / self.b;
        for (i, l) in self.spec.layers().iter().enumerate() {
            out[4 * i] = x - l + w;
            out[4 * i + 1] = x - l - w;
            out[4 * i + 2] = x - l + ZONE_WIDTH * w;
            out[4 * i + 3] = x - l - ZONE_WIDTH * w;
        }
    }
}

impl Lagrangian for SingularSystem {
    fn order(&self) -> usize {
        self.spec.order() / 2
    }

    fn dim(&self) -> usize {
        1
    }

    fn autonomous(&self) -> bool {
        !self.spec.layers_in_time()
    }

    fn value(&self, t: f64, jet: &[f64]) -> Result<f64> {
        Ok(match &self.spec {
            SystemSpec::Pendulum(p) => {
                let (l, _) = self.pendulum_length(p, jet[0]);
                let h = self.heaviside(p.theta0 - jet[0]);
                0.5 * p.m * jet[1] * jet[1] * l * l + p.m * p.g * l * jet[0].cos() + p.m * p.g * (1.0 - h) * p.l1 * p.theta0.cos()
            }
            SystemSpec::Damped(p) => {
                0.5 * p.m * p.lambda * p.lambda * jet[1] * jet[1] + p.m * p.g * p.lambda * jet[0].cos()
            }
            SystemSpec::PaisUhlenbeck(p) => {
                let ([w1, w2], _) = self.frequencies(p, t);
                let (q, q1, q2) = (jet[0], jet[1], jet[2]);
                0.5 * p.m * (q2 * q2 - (w1 * w1 + w2 * w2) * q1 * q1 + w1 * w1 * w2 * w2 * q * q)
            }
        })
    }

    fn partial(&self, t: f64, jet: &[f64], slot: Slot, out: &mut [f64]) -> Result<()> {
        out[0] = match (&self.spec, slot) {
            (SystemSpec::Pendulum(p), Slot::Jet(0)) => {
                let (l, dl) = self.pendulum_length(p, jet[0]);
                p.m * jet[1] * jet[1] * l * dl + p.m * p.g * dl * (jet[0].cos() - p.theta0.cos()) - p.m * p.g * l * jet[0].sin()
            }
            (SystemSpec::Pendulum(p), Slot::Jet(1)) => {
                let (l, _) = self.pendulum_length(p, jet[0]);
                p.m * jet[1] * l * l
            }
            (SystemSpec::Damped(p), Slot::Jet(0)) => -p.m * p.g * p.lambda * jet[0].sin(),
            (SystemSpec::Damped(p), Slot::Jet(1)) => p.m * p.lambda * p.lambda * jet[1],
            (SystemSpec::Pendulum(_) | SystemSpec::Damped(_), Slot::Time) => 0.0,
            (SystemSpec::PaisUhlenbeck(p), slot) => {
                let ([w1, w2], [d1, d2]) = self.frequencies(p, t);
                let omega = w1 * w1 + w2 * w2;
                let pi = w1 * w1 * w2 * w2;
                match slot {
                    Slot::Jet(0) => p.m * pi * jet[0],
                    Slot::Jet(1) => -p.m * omega * jet[1],
                    Slot::Jet(2) => p.m * jet[2],
                    Slot::Time => {
                        let omega_dot = 2.0 * (w1 * d1 + w2 * d2);
                        let pi_dot = 2.0 * w1 * d1 * w2 * w2 + 2.0 * w2 * d2 * w1 * w1;
                        0.5 * p.m * (-omega_dot * jet[1] * jet[1] + pi_dot * jet[0] * jet[0])
                    }
                    Slot::Jet(i) => {
                        return Err(Error::Capability {
                            requested: i,
                            available: 2,
                        })
                    }
                }
            }
            (_, Slot::Jet(i)) => {
                return Err(Error::Capability {
                    requested: i,
                    available: 1,
                })
            }
        };
        Ok(())
    }
}

/// Result of [`integrate`]: dense solution, stride samples and the time
/// intervals spent near the layers.
#[derive(Debug, Clone)]
pub struct Trajectory {
    system: SingularSystem,
    solution: Solution,
    /// Stride nodes, strictly increasing, ending at the final time.
    pub times: Vec<f64>,
    /// State `(q, …, q^{(n−1)})` at each node.
    pub states: Vec<Vec<f64>>,
    /// `q^{(n)}` from the equation of motion at each node.
    pub rhs_values: Vec<f64>,
    /// Energy at each node; `None` for the damped system.
    pub energy: Option<Vec<f64>>,
    zones: Vec<(f64, f64)>,
    passages: Vec<(f64, f64)>,
}

/// Integrates `sys` from `ic` at `t_span.0` to `t_span.1` with relative and
/// absolute tolerance `tol`.
pub fn integrate(sys: &SingularSystem, ic: &[f64], t_span: (f64, f64), tol: f64) -> Result<Trajectory> {
    let n = sys.spec.order();
    if ic.len() != n {
        return Err(Error::validation("initial conditions", alloc::format!("expected {n} values")));
    }
    if !(tol > 0.0) {
        return Err(Error::validation("tol", "must be positive"));
    }
    let (t0, t1) = t_span;
    if !(t1 > t0) {
        return Err(Error::validation("t_span", "end must exceed start"));
    }
    let solution = ode::solve(sys, t0, ic, t1, &OdeOptions::with_tol(tol))?;
    let t_end = solution.t_end();

    let stride = STRIDE_FRACTION * (t1 - t0);
    let count = ((t_end - t0) / stride).floor() as usize;
    let mut times: Vec<f64> = (0..=count).map(|k| t0 + k as f64 * stride).filter(|&t| t < t_end).collect();
    times.push(t_end);

    let mut states = Vec::with_capacity(times.len());
    let mut rhs_values = Vec::with_capacity(times.len());
    let mut energy = sys.has_energy().then(|| Vec::with_capacity(times.len()));
    for &t in &times {
        let y = solution.state(t);
        rhs_values.push(sys.acceleration(t, &y)?);
        if let Some(e) = energy.as_mut() {
            e.push(sys.energy(t, &y)?);
        }
        states.push(y);
    }

    let zones = near_intervals(sys, &solution, ZONE_WIDTH, |e| e % 4 >= 2);
    let passages = near_intervals(sys, &solution, 1.0, |e| e % 4 < 2);
    Ok(Trajectory {
        system: sys.clone(),
        solution,
        times,
        states,
        rhs_values,
        energy,
        zones,
        passages,
    })
}

/// Maximal time intervals on which the layer coordinate is within `width/b`
/// of some layer, reconstructed from the event crossings.
fn near_intervals(sys: &SingularSystem, sol: &Solution, width: f64, select: impl Fn(usize) -> bool) -> Vec<(f64, f64)> {
    let (t0, t1) = (sol.t_start(), sol.t_end());
    let mut cuts: Vec<f64> = sol
        .crossings
        .iter()
        .filter(|c: &&Crossing| select(c.event))
        .map(|c| c.t)
        .collect();
    cuts.sort_by(f64::total_cmp);
    let mut bounds = vec![t0];
    bounds.extend(cuts.into_iter().filter(|&t| t > t0 && t < t1));
    bounds.push(t1);
    let limit = width / sys.b;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for w in bounds.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        if sys.layer_distance(mid, &sol.state(mid)) < limit {
            match out.last_mut() {
                Some(last) if last.1 == w[0] => last.1 = w[1],
                _ => out.push((w[0], w[1])),
            }
        }
    }
    out
}

/// Velocity and acceleration just before and after a layer passage,
/// extrapolated to the time the layer centre is reached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerJump {
    /// Time at which the layer coordinate equals the layer location.
    pub t: f64,
    /// `q^{(n−1)}(t)`.
    pub rate: f64,
    /// Highest derivative extrapolated from before the passage.
    pub before: f64,
    /// Highest derivative extrapolated from after the passage.
    pub after: f64,
}

impl Trajectory {
    pub fn system(&self) -> &SingularSystem {
        &self.system
    }

    pub fn eps(&self) -> f64 {
        self.system.eps
    }

    pub fn b(&self) -> f64 {
        self.system.b
    }

    pub fn solution(&self) -> &Solution {
        &self.solution
    }

    pub fn t_start(&self) -> f64 {
        self.solution.t_start()
    }

    pub fn t_end(&self) -> f64 {
        self.solution.t_end()
    }

    pub fn state(&self, t: f64) -> Vec<f64> {
        self.solution.state(t)
    }

    pub fn acceleration(&self, t: f64) -> Result<f64> {
        self.system.acceleration(t, &self.state(t))
    }

    pub fn energy_at(&self, t: f64) -> Result<f64> {
        self.system.energy(t, &self.state(t))
    }

    /// Intervals within `4/b` of a layer, where steps are clamped.
    pub fn zones(&self) -> &[(f64, f64)] {
        &self.zones
    }

    /// Intervals within `1/b` of a layer, where the coefficients vary.
    pub fn passages(&self) -> &[(f64, f64)] {
        &self.passages
    }

    /// Complement of [`Self::zones`] in the time span.
    pub fn far_segments(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let mut start = self.t_start();
        for &(a, b) in &self.zones {
            if a > start {
                out.push((start, a));
            }
            start = b;
        }
        if self.t_end() > start {
            out.push((start, self.t_end()));
        }
        out
    }

    /// `max |E(t) − E(a)| / |E(a)|` over `[a, b]`, sampled on `samples` points.
    pub fn energy_drift(&self, a: f64, b: f64, samples: usize) -> Result<f64> {
        let e0 = self.energy_at(a)?;
        let mut worst = 0.0_f64;
        for k in 1..=samples.max(1) {
            let t = a + (b - a) * k as f64 / samples.max(1) as f64;
            worst = worst.max((self.energy_at(t)? - e0).abs());
        }
        Ok(worst / e0.abs())
    }

    /// `max |q^{(n)}|` over `[a, b]` from the equation of motion.
    pub fn max_abs_acceleration(&self, a: f64, b: f64, samples: usize) -> Result<f64> {
        let mut worst = 0.0_f64;
        for k in 0..=samples {
            let t = a + (b - a) * k as f64 / samples as f64;
            worst = worst.max(self.acceleration(t)?.abs());
        }
        Ok(worst)
    }

    /// Local extrema of `q` as `(t, q)`, located by bisection on `q̇`.
    pub fn turning_points(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for (k, w) in self.times.windows(2).enumerate() {
            let (v0, v1) = (self.states[k][1], self.states[k + 1][1]);
            if v0 == 0.0 || v0.signum() == v1.signum() {
                continue;
            }
            let (mut a, mut b) = (w[0], w[1]);
            for _ in 0..100 {
                let m = 0.5 * (a + b);
                if self.state(m)[1].signum() == v0.signum() {
                    a = m;
                } else {
                    b = m;
                }
                if b - a < 1e-13 {
                    break;
                }
            }
            let t = 0.5 * (a + b);
            out.push((t, self.state(t)[0]));
        }
        out
    }

    /// Jump of the highest derivative across the `index`-th passage.
    ///
    /// On each side the highest derivative is extrapolated quadratically to
    /// the layer centre from the passage edge and two points spaced one
    /// passage half-width further out.
    pub fn layer_jump(&self, index: usize) -> Result<LayerJump> {
        let &(a, b) = self
            .passages
            .get(index)
            .ok_or(Error::validation("passage index", "no such layer passage"))?;
        let w = 0.5 * (b - a);
        if !(w > 0.0) || a - 2.0 * w < self.t_start() || b + 2.0 * w > self.t_end() {
            return Err(Error::validation("passage", "too close to the ends of the span"));
        }
        let layers = self.system.spec.layers();
        let x_a = self.system.layer_coordinate(a, &self.state(a));
        let layer = layers
            .iter()
            .copied()
            .min_by(|p, q| (x_a - p).abs().total_cmp(&(x_a - q).abs()))
            .unwrap();
        let offset = |t: f64| self.system.layer_coordinate(t, &self.state(t)) - layer;
        let (mut lo, mut hi) = (a, b);
        let s_lo = offset(lo).signum();
        if s_lo == offset(hi).signum() {
            return Err(Error::validation("passage", "layer is touched but not crossed"));
        }
        while hi - lo > 1e-13 {
            let m = 0.5 * (lo + hi);
            if offset(m).signum() == s_lo {
                lo = m;
            } else {
                hi = m;
            }
        }
        let tc = 0.5 * (lo + hi);
        // Quadratic through the edge and two points further out, evaluated
        // `s` spacings inward from the edge.
        let extrapolate = |f: [f64; 3], s: f64| {
            f[0] * (s + 1.0) * (s + 2.0) / 2.0 - f[1] * s * (s + 2.0) + f[2] * s * (s + 1.0) / 2.0
        };
        let fa = [self.acceleration(a)?, self.acceleration(a - w)?, self.acceleration(a - 2.0 * w)?];
        let fb = [self.acceleration(b)?, self.acceleration(b + w)?, self.acceleration(b + 2.0 * w)?];
        let before = extrapolate(fa, (tc - a) / w);
        let after = extrapolate(fb, (b - tc) / w);
        let y = self.state(tc);
        Ok(LayerJump {
            t: tc,
            rate: y[y.len() - 1],
            before,
            after,
        })
    }
}

impl Curve for Trajectory {
    fn dim(&self) -> usize {
        1
    }

    fn max_order(&self) -> usize {
        self.system.spec.order()
    }

    fn span(&self) -> (f64, f64) {
        (self.t_start(), self.t_end())
    }

    fn jet(&self, t: f64, order: usize, out: &mut [f64]) -> Result<()> {
        let n = self.system.spec.order();
        if order > n {
            return Err(Error::Capability {
                requested: order,
                available: n,
            });
        }
        let y = self.state(t);
        let k = order.min(n - 1);
        out[..=k].copy_from_slice(&y[..=k]);
        if order == n {
            out[n] = self.system.acceleration(t, &y)?;
        }
        Ok(())
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.passages.iter().flat_map(|&(a, b)| [a, b]).collect()
    }

    fn excluded(&self, a: f64, b: f64) -> bool {
        self.zones.iter().any(|&(za, zb)| za <= b && a <= zb)
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InsufficientData {
            required: 2,
            available: x.len().min(y.len()),
        });
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::validation("log-log data", "values must be positive"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let ones = vec![1.0; lx.len()];
    Ok(least_squares(&[&ones, &lx], &ly)?[1])
}

/// Closed-form Pais–Uhlenbeck motion with constant frequencies,
/// `q(t) = Σ A_i sin(ω_i(t−t₀) + φ_i)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PuAnalytic {
    pub omega: [f64; 2],
    pub t0: f64,
    /// `A_i cos φ_i`, the coefficient of `sin(ω_i(t−t₀))`.
    sin_coeff: [f64; 2],
    /// `A_i sin φ_i`, the coefficient of `cos(ω_i(t−t₀))`.
    cos_coeff: [f64; 2],
}

impl PuAnalytic {
    /// Fits the solution through `(q, q̇, q̈, q‴)(t₀) = ic`.
    pub fn fit(omega: [f64; 2], t0: f64, ic: &[f64; 4]) -> Result<Self> {
        let [w1, w2] = omega;
        if !(w1 > 0.0 && w2 > 0.0 && w1.is_finite() && w2.is_finite()) {
            return Err(Error::validation("frequencies", "must be positive"));
        }
        if (w1 - w2).abs() <= 1e-12 * w1.max(w2) {
            return Err(Error::Degenerate("equal frequencies"));
        }
        // Unknowns (A₁cosφ₁, A₁sinφ₁, A₂cosφ₂, A₂sinφ₂).
        let a = [
            0.0, 1.0, 0.0, 1.0, //
            w1, 0.0, w2, 0.0, //
            0.0, -w1 * w1, 0.0, -w2 * w2, //
            -w1 * w1 * w1, 0.0, -w2 * w2 * w2, 0.0,
        ];
        let x = linear_solve(&a, ic)?;
        Ok(Self {
            omega,
            t0,
            sin_coeff: [x[0], x[2]],
            cos_coeff: [x[1], x[3]],
        })
    }

    /// `(A_i, φ_i)` with `A_i ≥ 0` and `φ_i ∈ (−π, π]`.
    pub fn amplitudes(&self) -> [(f64, f64); 2] {
        core::array::from_fn(|i| {
            let (s, c) = (self.sin_coeff[i], self.cos_coeff[i]);
            let a = s.hypot(c);
            let mut phi = if a == 0.0 { 0.0 } else { c.atan2(s) };
            if phi <= -core::f64::consts::PI {
                phi += 2.0 * core::f64::consts::PI;
            }
            (a, phi)
        })
    }

    /// `q^{(k)}(t)`.
    pub fn eval(&self, t: f64, k: usize) -> f64 {
        let s = t - self.t0;
        (0..2)
            .map(|i| {
                let w = self.omega[i];
                let (sn, cs) = (w * s).sin_cos();
                let wk = crate::poly::pow_usize(w, k);
                let (ds, dc) = match k % 4 {
                    0 => (sn, cs),
                    1 => (cs, -sn),
                    2 => (-sn, -cs),
                    _ => (-cs, sn),
                };
                wk * (self.sin_coeff[i] * ds + self.cos_coeff[i] * dc)
            })
            .sum()
    }

    /// `(q, q̇, q̈, q‴)(t)`.
    pub fn state(&self, t: f64) -> [f64; 4] {
        core::array::from_fn(|k| self.eval(t, k))
    }
}

/// Solution of the linearized pendulum `ϑ̈ + ω²ϑ = 0` through
/// `(ϑ, ϑ̇)(t_a) = (θ_a, θ̇_a)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearBranch {
    pub omega: f64,
    pub t_anchor: f64,
    pub theta: f64,
    pub theta_dot: f64,
}

impl LinearBranch {
    /// Branch below the layer (`Λ = L₁+L₂`), released from rest at `θ₁`.
    pub fn below(p: &PendulumParams, t1: f64, theta1: f64) -> Self {
        Self {
            omega: (p.g / (p.l1 + p.l2)).sqrt(),
            t_anchor: t1,
            theta: theta1,
            theta_dot: 0.0,
        }
    }

    /// Branch above the layer (`Λ = L₂`) through the observed state at `t₃`.
    pub fn above(p: &PendulumParams, t3: f64, theta3: f64, theta_dot3: f64) -> Self {
        Self {
            omega: (p.g / p.l2).sqrt(),
            t_anchor: t3,
            theta: theta3,
            theta_dot: theta_dot3,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let (s, c) = (self.omega * (t - self.t_anchor)).sin_cos();
        self.theta * c + self.theta_dot / self.omega * s
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let (s, c) = (self.omega * (t - self.t_anchor)).sin_cos();
        -self.theta * self.omega * s + self.theta_dot * c
    }
}

/// `ϑ₁(t) + H(t − t₂)(ϑ₃(t) − ϑ₁(t))`: the first branch before the join time
/// `t₂`, the second after it.
pub fn join_branches(first: &LinearBranch, second: &LinearBranch, t2: f64, step: &Scaled<'_>, t: f64) -> f64 {
    let a = first.eval(t);
    a + step.heaviside(t - t2) * (second.eval(t) - a)
}

/// `θ̈ = −(g/L) sinθ`: the pendulum of constant length `L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantPendulum {
    pub g: f64,
    pub length: f64,
}

impl OdeSystem for ConstantPendulum {
    fn dim(&self) -> usize {
        2
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        dy[0] = y[1];
        dy[1] = -self.g / self.length * y[0].sin();
        Ok(())
    }
}
