use std::sync::Arc;

use gsf_core::dynamics::{
    integrate, log_log_slope, DampedParams, PendulumParams, PuAnalytic, PuParams, SingularSystem, SystemSpec, Trajectory, ZONE_WIDTH,
};
use gsf_core::variational::{Probe, Symmetry};
use gsf_core::{Gauge, GaugeKind, MollifierSpec};

fn mollifier() -> Arc<MollifierSpec> {
    Arc::new(MollifierSpec::build(4).unwrap())
}

fn system(spec: SystemSpec, eps: f64) -> SingularSystem {
    SingularSystem::new(spec, mollifier(), GaugeKind::Power, eps).unwrap()
}

fn pu_run(eps: f64) -> Trajectory {
    let sys = system(SystemSpec::PaisUhlenbeck(PuParams::default()), eps);
    integrate(&sys, &[1.0, 2.0, 0.0, 1.0], (0.0, 30.0), 1e-10).unwrap()
}

#[test]
fn pu_identities_hold_on_both_sides() {
    let traj = pu_run(Gauge::default_power().finest());
    let sys = traj.system().clone();
    let probe = Probe::new(&sys, &traj).unwrap();
    let sym = Symmetry::time_translation(1);
    let mut checked = 0;
    for k in 1..120 {
        let t = 30.0 * k as f64 / 120.0;
        if !probe.usable(t, 3) {
            continue;
        }
        checked += 1;
        let el = probe.el_residual(t).unwrap();
        assert!(el.norm() <= 1e-5 * el.magnitude, "EL at {t}: {el:?}");
        for j in 1..=2 {
            let r = probe.phi_recurrence(t, j).unwrap();
            assert!(r.norm() <= 1e-5 * r.magnitude, "recurrence {j} at {t}: {r:?}");
        }
        let dbr = probe.dbr_residual(t).unwrap();
        assert!(dbr.norm() <= 1e-5 * dbr.magnitude, "dBR at {t}: {dbr:?}");
        // For this Lagrangian the time-translation constant is +E.
        let c = probe.noether_constant(&sym, t).unwrap();
        let e = traj.energy_at(t).unwrap();
        assert!((c - e).abs() <= 1e-5 * e.abs(), "{c} vs {e}");
    }
    assert!(checked > 80);
}

#[test]
fn pu_post_switch_side_matches_refit() {
    let traj = pu_run(Gauge::default_power().finest());
    let p = PuParams::default();
    let start = p.ts + ZONE_WIDTH / traj.b();
    let y = traj.state(start);
    let fit = PuAnalytic::fit([p.w1, p.w2], start, &[y[0], y[1], y[2], y[3]]).unwrap();
    let err = (0..=2000)
        .map(|k| {
            let t = start + (30.0 - start) * k as f64 / 2000.0;
            (traj.state(t)[0] - fit.eval(t, 0)).abs()
        })
        .fold(0.0, f64::max);
    assert!(err <= 1e-4, "{err}");
}

#[test]
fn pendulum_corner_sharpens_across_the_tail() {
    let gauge = Gauge::default_power();
    let (mut bs, mut peaks) = (Vec::new(), Vec::new());
    for &eps in &gauge.eps()[gauge.tail()] {
        let sys = system(SystemSpec::Pendulum(PendulumParams::default()), eps);
        let traj = integrate(&sys, &[0.0, 1.0], (0.0, 2.0), 1e-10).unwrap();
        let (a, b) = traj.passages()[0];
        bs.push(traj.b());
        peaks.push(traj.max_abs_acceleration(a, b, 400).unwrap());
    }
    let slope = log_log_slope(&bs, &peaks).unwrap();
    assert!(slope >= 0.4, "{slope}");
}

#[test]
fn damped_envelope_stays_below_reference() {
    let eps = Gauge::default_power().finest();
    let p = DampedParams::default();
    let reference = DampedParams { beta2: p.beta1, ..p };
    let run = |q| integrate(&system(SystemSpec::Damped(q), eps), &[0.0, 1.0], (0.0, 10.0), 1e-10).unwrap();
    let (two, one) = (run(p), run(reference));
    let first_exit = two.passages()[0].1;
    let peaks = |t: &Trajectory| -> Vec<f64> {
        t.turning_points()
            .into_iter()
            .filter(|&(s, _)| s > first_exit)
            .map(|(_, q)| q.abs())
            .collect()
    };
    let (a, b) = (peaks(&two), peaks(&one));
    assert!(a.len() >= 5);
    for (x, y) in a.iter().zip(&b) {
        assert!(x < y, "{x} vs {y}");
    }
}

#[test]
fn integration_is_deterministic() {
    let eps = 2f64.powi(-10);
    let a = pu_run(eps);
    let b = pu_run(eps);
    assert_eq!(a.times, b.times);
    assert_eq!(a.states, b.states);
    assert_eq!(a.energy, b.energy);
}
