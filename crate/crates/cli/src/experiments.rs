//! Experiment runners. Each produces an in-memory [`Artifacts`] set so that
//! repeated runs can be compared byte for byte before anything is written.

use std::sync::Arc;

use gsf_core::dynamics::{integrate, SingularSystem, SystemSpec, Trajectory, ZONE_WIDTH};
use gsf_core::optctrl::models::{Lqr, SineDrift, TimeWeighted, Tracking};
use gsf_core::optctrl::{solve_wps, ControlModel, ControlProblem};
use gsf_core::variational::{Probe, Symmetry};
use gsf_core::{ClassTag, GenNumber};
use serde::Serialize;

use crate::config::{ControlConfig, Experiment, ExperimentConfig, ModelName};
use crate::error::{CliError, InModule};
use crate::output::{fmt_f64, Artifacts, Csv};

/// Samples per side of `x = 0` in the profile dumps.
pub const PROFILE_HALF_SAMPLES: usize = 200;
/// Profile window in units of the layer half-width `1/b_ε`.
pub const PROFILE_WINDOW: f64 = 1.5;
/// Time samples per trajectory in the variational residual series.
pub const RESIDUAL_SAMPLES: usize = 200;
/// Random probes for the partial-derivative checks of control models.
pub const CONTROL_PROBES: usize = 20;

/// Runs the configured experiment and seals the manifest.
pub fn run(cfg: &ExperimentConfig) -> Result<Artifacts, CliError> {
    let mut art = match cfg.experiment {
        Experiment::EmbedProfiles => embed_profiles(cfg)?,
        Experiment::Pendulum | Experiment::Damped | Experiment::Pu => trajectories(cfg)?,
        Experiment::VariationalChecks => variational_checks(cfg)?,
        Experiment::OptctrlLqr => optctrl(cfg)?,
        Experiment::RingSuite => ring_suite(cfg)?,
    };
    art.seal(cfg.experiment.name(), &cfg.source, cfg.seed)?;
    Ok(art)
}

fn embed_profiles(cfg: &ExperimentConfig) -> Result<Artifacts, CliError> {
    let mut delta = Csv::new(&["x", "eps", "value"]);
    let mut heaviside = Csv::new(&["x", "eps", "value"]);
    for &eps in cfg.gauge.eps() {
        let s = cfg.mollifier.at(cfg.gauge.kind(), eps);
        let n = PROFILE_HALF_SAMPLES as i64;
        for k in -n..=n {
            let x = k as f64 / n as f64 * PROFILE_WINDOW / s.b();
            delta.row(&[Some(x), Some(eps), Some(s.delta(x))]);
            heaviside.row(&[Some(x), Some(eps), Some(s.heaviside(x))]);
        }
    }
    let mut art = Artifacts::default();
    art.add_csv("delta.csv", delta);
    art.add_csv("heaviside.csv", heaviside);
    Ok(art)
}

fn system_of(cfg: &ExperimentConfig) -> Result<SystemSpec, CliError> {
    cfg.system.ok_or_else(|| {
        CliError::Config(crate::error::ConfigError::Invalid {
            field: "system".into(),
            line: None,
            reason: "required by this experiment".into(),
        })
    })
}

/// Integrates `spec` from the configured initial condition at one grid ε.
pub fn trajectory_at(cfg: &ExperimentConfig, spec: SystemSpec, eps: f64) -> Result<Trajectory, CliError> {
    let sys = SingularSystem::new(spec, Arc::clone(&cfg.mollifier), cfg.gauge.kind(), eps).in_module("dynamics")?;
    integrate(&sys, &cfg.ic, cfg.t_span, cfg.tol).in_module("dynamics")
}

fn trajectory_header(order: usize) -> Vec<&'static str> {
    let mut h = vec!["t", "eps", "q0", "q1"];
    if order == 4 {
        h.extend(["q2", "q3"]);
    }
    h.extend(["rhs", "energy"]);
    h
}

fn push_trajectory(csv: &mut Csv, traj: &Trajectory) {
    for (i, t) in traj.times.iter().enumerate() {
        let mut row = vec![Some(*t), Some(traj.eps())];
        row.extend(traj.states[i].iter().map(|v| Some(*v)));
        row.push(Some(traj.rhs_values[i]));
        row.push(traj.energy.as_ref().map(|e| e[i]));
        csv.row(&row);
    }
}

#[derive(Debug, Serialize)]
struct Mode {
    omega: f64,
    amplitude: f64,
    phase: f64,
}

#[derive(Debug, Serialize)]
struct SideFit {
    t0: f64,
    state: [f64; 4],
    modes: [Mode; 2],
    energy: f64,
}

#[derive(Debug, Serialize)]
struct PuFitReport {
    eps: f64,
    switch_time: f64,
    pre: SideFit,
    post: SideFit,
}

fn side_fit(omega: [f64; 2], t0: f64, state: [f64; 4], energy: f64) -> Result<SideFit, CliError> {
    let fit = gsf_core::dynamics::PuAnalytic::fit(omega, t0, &state).in_module("dynamics")?;
    let amp = fit.amplitudes();
    Ok(SideFit {
        t0,
        state,
        modes: [0, 1].map(|i| Mode {
            omega: omega[i],
            amplitude: amp[i].0,
            phase: amp[i].1,
        }),
        energy,
    })
}

fn trajectories(cfg: &ExperimentConfig) -> Result<Artifacts, CliError> {
    let spec = system_of(cfg)?;
    let header = trajectory_header(spec.order());
    let mut traj_csv = Csv::new(&header);
    let mut energy_csv = Csv::new(&["t", "eps", "energy", "relative_drift"]);
    let mut last = None;
    for &eps in cfg.gauge.eps() {
        let traj = trajectory_at(cfg, spec, eps)?;
        push_trajectory(&mut traj_csv, &traj);
        if let Some(e) = &traj.energy {
            let e0 = e[0];
            for (t, v) in traj.times.iter().zip(e) {
                energy_csv.row(&[Some(*t), Some(eps), Some(*v), Some((v - e0) / e0.abs())]);
            }
        }
        last = Some(traj);
    }
    let mut art = Artifacts::default();
    art.add_csv("trajectory.csv", traj_csv);
    match spec {
        SystemSpec::Damped(p) => {
            let reference = SystemSpec::Damped(gsf_core::dynamics::DampedParams { beta2: p.beta1, ..p });
            let mut csv = Csv::new(&header);
            for &eps in cfg.gauge.eps() {
                push_trajectory(&mut csv, &trajectory_at(cfg, reference, eps)?);
            }
            art.add_csv("reference.csv", csv);
        }
        SystemSpec::PaisUhlenbeck(p) => {
            art.add_csv("energy.csv", energy_csv);
            let traj = last.expect("grid is never empty");
            let start = traj.t_start();
            let y0 = traj.state(start);
            let pre = side_fit([p.w1hat, p.w2hat], start, [y0[0], y0[1], y0[2], y0[3]], traj.energy_at(start).in_module("dynamics")?)?;
            let t_post = p.ts + ZONE_WIDTH / traj.b();
            let post = if t_post < traj.t_end() {
                let y = traj.state(t_post);
                side_fit([p.w1, p.w2], t_post, [y[0], y[1], y[2], y[3]], traj.energy_at(t_post).in_module("dynamics")?)?
            } else {
                side_fit([p.w1, p.w2], start, [y0[0], y0[1], y0[2], y0[3]], f64::NAN)?
            };
            art.add_json(
                "analytic_fit.json",
                &PuFitReport {
                    eps: traj.eps(),
                    switch_time: p.ts,
                    pre,
                    post,
                },
            )?;
        }
        SystemSpec::Pendulum(_) => art.add_csv("energy.csv", energy_csv),
    }
    Ok(art)
}

fn variational_checks(cfg: &ExperimentConfig) -> Result<Artifacts, CliError> {
    let spec = system_of(cfg)?;
    let mut csv = Csv::new(&["t", "eps", "el_residual", "dbr_residual", "noether_C"]);
    for &eps in cfg.gauge.eps() {
        let traj = trajectory_at(cfg, spec, eps)?;
        for row in residual_series(&traj)? {
            csv.row(&[Some(row.t), Some(eps), Some(row.el), row.dbr, row.noether]);
        }
    }
    let mut art = Artifacts::default();
    art.add_csv("residuals.csv", csv);
    Ok(art)
}

/// One sample of the variational identities along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualSample {
    pub t: f64,
    /// Euler–Lagrange residual, or the D'Alembert residual for forced systems.
    pub el: f64,
    pub el_scale: f64,
    /// Largest φ-recurrence residual relative to its own scale.
    pub recurrence_relative: f64,
    pub dbr: Option<f64>,
    pub dbr_scale: Option<f64>,
    pub noether: Option<f64>,
}

/// Stencil depth needed by the deepest identity of an order-`m` Lagrangian.
fn probe_depth(traj: &Trajectory) -> usize {
    traj.system().spec().order() / 2 + 1
}

/// Residuals on [`RESIDUAL_SAMPLES`] equally spaced times, skipping those
/// whose stencil reaches a layer neighbourhood.
pub fn residual_series(traj: &Trajectory) -> Result<Vec<ResidualSample>, CliError> {
    let sys = traj.system();
    let probe = Probe::new(sys, traj).in_module("variational")?;
    let sym = Symmetry::time_translation(1);
    let m = sys.spec().order() / 2;
    let depth = probe_depth(traj);
    let forced = !sys.has_energy();
    let force = |_t: f64, jet: &[f64]| -> gsf_core::Result<Vec<f64>> { Ok(vec![sys.force(jet)]) };
    let (a, b) = (traj.t_start(), traj.t_end());
    let mut out = Vec::new();
    for k in 1..RESIDUAL_SAMPLES {
        let t = a + (b - a) * k as f64 / RESIDUAL_SAMPLES as f64;
        if !probe.usable(t, depth) {
            continue;
        }
        let el = if forced {
            probe.dalembert_residual(t, &force)
        } else {
            probe.el_residual(t)
        }
        .in_module("variational")?;
        let mut recurrence_relative = 0.0_f64;
        for j in 1..=m {
            let r = probe.phi_recurrence(t, j).in_module("variational")?;
            recurrence_relative = recurrence_relative.max(r.norm() / r.magnitude.max(f64::MIN_POSITIVE));
        }
        let (dbr, dbr_scale, noether) = if forced {
            (None, None, None)
        } else {
            let d = probe.dbr_residual(t).in_module("variational")?;
            let c = probe.noether_constant(&sym, t).in_module("variational")?;
            (Some(d.norm()), Some(d.magnitude), Some(c))
        };
        out.push(ResidualSample {
            t,
            el: el.norm(),
            el_scale: el.magnitude,
            recurrence_relative,
            dbr,
            dbr_scale,
            noether,
        });
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
struct SweepSummary {
    model: &'static str,
    iterations: usize,
    grad_norm: f64,
    cost: f64,
    lipschitz_product: f64,
    lipschitz_warning: bool,
}

fn optctrl(cfg: &ExperimentConfig) -> Result<Artifacts, CliError> {
    let cc = cfg.control.clone().ok_or_else(|| {
        CliError::Config(crate::error::ConfigError::Invalid {
            field: "control".into(),
            line: None,
            reason: "required by this experiment".into(),
        })
    })?;
    match cc.model {
        ModelName::Lqr => sweep_artifacts(cfg, &cc, Lqr, "lqr"),
        ModelName::Tracking => sweep_artifacts(cfg, &cc, Tracking, "tracking"),
        ModelName::TimeWeighted => sweep_artifacts(cfg, &cc, TimeWeighted, "time_weighted"),
        ModelName::SineDrift => sweep_artifacts(cfg, &cc, SineDrift, "sine_drift"),
    }
}

/// Builds the control problem of a control section.
pub fn control_problem<M: ControlModel>(cfg: &ExperimentConfig, cc: &ControlConfig, model: M) -> Result<ControlProblem<M>, CliError> {
    let k = model.control_dim();
    ControlProblem::new(model, vec![cc.q1], cfg.t_span, vec![(f64::MIN, f64::MAX); k], cfg.seed, CONTROL_PROBES).in_module("optctrl")
}

fn sweep_artifacts<M: ControlModel>(cfg: &ExperimentConfig, cc: &ControlConfig, model: M, name: &'static str) -> Result<Artifacts, CliError> {
    let problem = control_problem(cfg, cc, model)?;
    let u0 = gsf_core::optctrl::Control::from_fn(cfg.t_span, cc.nodes, problem.model().control_dim(), |_, o| o.fill(0.0)).in_module("optctrl")?;
    let sweep = solve_wps(&problem, u0, cc.alpha, cc.max_iter, cc.grad_tol).in_module("optctrl")?;
    let lip = gsf_core::optctrl::lipschitz_estimate(&problem, &sweep.u).in_module("optctrl")?;
    let mut csv = Csv::new(&["t", "q", "p", "u", "dHdu"]);
    for i in 0..sweep.u.len() {
        let t = sweep.u.node(i);
        let (q, p) = (sweep.forward.state(t), sweep.adjoint.state(t));
        csv.row(&[Some(t), Some(q[0]), Some(p[0]), Some(sweep.u.at_node(i)[0]), Some(sweep.gradient.at_node(i)[0])]);
    }
    let mut art = Artifacts::default();
    art.add_csv("sweep.csv", csv);
    art.add_json(
        "summary.json",
        &SweepSummary {
            model: name,
            iterations: sweep.iteration,
            grad_norm: sweep.grad_norm,
            cost: sweep.cost,
            lipschitz_product: lip.product,
            lipschitz_warning: lip.warns(),
        },
    )?;
    Ok(art)
}

fn tag_name(tag: ClassTag) -> &'static str {
    match tag {
        ClassTag::Infinitesimal => "infinitesimal",
        ClassTag::Infinite => "infinite",
        ClassTag::Finite => "finite",
        ClassTag::Unclassified => "unclassified",
    }
}

fn ring_suite(cfg: &ExperimentConfig) -> Result<Artifacts, CliError> {
    let g = &cfg.gauge;
    let kind = g.kind();
    let rho = move |e: f64| kind.rho(e);
    let moll = Arc::clone(&cfg.mollifier);
    let b = move |e: f64| moll.scale(kind, e);
    let psi0 = cfg.mollifier.psi_at_zero();
    type Net = Box<dyn Fn(f64) -> f64>;
    let nets: Vec<(&str, Net)> = vec![
        ("zero", Box::new(|_| 0.0)),
        ("one", Box::new(|_| 1.0)),
        ("rho", Box::new(rho)),
        ("rho_squared", Box::new(move |e| rho(e).powi(2))),
        ("inverse_rho", Box::new(move |e| 1.0 / rho(e))),
        ("neg_inverse_log_rho", Box::new(move |e| -1.0 / rho(e).ln())),
        ("eps_sin_inverse_eps", Box::new(|e: f64| e * (1.0 / e).sin())),
        ("mollifier_scale", Box::new(b.clone())),
        ("delta_at_zero", Box::new(move |e| b(e) * psi0)),
    ];
    let mut csv = Csv::new(&["name", "tag", "slope", "confidence"]);
    for (name, f) in nets {
        let x = GenNumber::from_fn(g, f).in_module("gauge")?;
        let c = x.classify().in_module("gauge")?;
        csv.text_row(&[name.to_string(), tag_name(c.tag).to_string(), fmt_f64(c.slope), fmt_f64(c.confidence)]);
    }
    let mut art = Artifacts::default();
    art.add_csv("ring.csv", csv);
    Ok(art)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{bundled, Overrides};

    fn cfg(name: &str, eps_points: usize) -> ExperimentConfig {
        let o = Overrides {
            eps_points: Some(eps_points),
            ..Overrides::default()
        };
        ExperimentConfig::parse(bundled(name).unwrap(), &o).unwrap()
    }

    fn lines(art: &Artifacts, file: &str) -> Vec<String> {
        String::from_utf8(art.files[file].clone()).unwrap().lines().map(String::from).collect()
    }

    #[test]
    fn profiles_contain_the_layer_centre() {
        let art = run(&cfg("embed_profiles", 4)).unwrap();
        let rows = lines(&art, "heaviside.csv");
        assert_eq!(rows[0], "x,eps,value");
        let centre: Vec<&String> = rows.iter().filter(|r| r.starts_with("0e0,")).collect();
        assert_eq!(centre.len(), 4);
        for r in centre {
            let v: f64 = r.rsplit(',').next().unwrap().parse().unwrap();
            assert!((v - 0.5).abs() < 1e-8, "{r}");
        }
        assert!(art.files.contains_key("manifest.json"));
    }

    #[test]
    fn damped_rows_leave_energy_empty() {
        let mut c = cfg("damped", 4);
        c.t_span = (0.0, 1.0);
        let art = run(&c).unwrap();
        let rows = lines(&art, "trajectory.csv");
        assert_eq!(rows[0], "t,eps,q0,q1,rhs,energy");
        assert!(rows[1].ends_with(','));
        assert!(art.files.contains_key("reference.csv"));
    }

    #[test]
    fn ring_suite_tags_the_canonical_nets() {
        let art = run(&cfg("ring_suite", 12)).unwrap();
        let rows = lines(&art, "ring.csv");
        let tag = |name: &str| rows.iter().find(|r| r.starts_with(&format!("{name},"))).unwrap().split(',').nth(1).unwrap().to_string();
        assert_eq!(tag("rho"), "infinitesimal");
        assert_eq!(tag("inverse_rho"), "infinite");
        assert_eq!(tag("one"), "finite");
        assert_eq!(tag("zero"), "infinitesimal");
    }
}
