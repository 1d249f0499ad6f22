use gsf_core::optctrl::models::{Lqr, SineDrift, Tracking};
use gsf_core::optctrl::{control_first_variation, hamiltonian_time_identity, solve_wps, ControlProblem};
use proptest::prelude::*;

/// Classical RK4 for `q̈ = q − 1` from `(0, s)` to `t = 1`, returning the
/// sampled `q̇` on `steps + 1` points.
fn shoot(s: f64, steps: usize) -> Vec<(f64, f64, f64)> {
    let h = 1.0 / steps as f64;
    let f = |y: [f64; 2]| [y[1], y[0] - 1.0];
    let mut y = [0.0, s];
    let mut out = vec![(0.0, y[0], y[1])];
    for i in 0..steps {
        let k1 = f(y);
        let k2 = f([y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
        let k3 = f([y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
        let k4 = f([y[0] + h * k3[0], y[1] + h * k3[1]]);
        for c in 0..2 {
            y[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
        out.push(((i + 1) as f64 * h, y[0], y[1]));
    }
    out
}

/// Secant iteration on the initial slope until `q̇(1) = 0`.
fn shooting_oracle() -> Vec<(f64, f64, f64)> {
    let steps = 4000;
    let end = |s: f64| shoot(s, steps).last().unwrap().2;
    let (mut a, mut b) = (0.0, 1.0);
    for _ in 0..50 {
        let (fa, fb) = (end(a), end(b));
        if fb == fa {
            break;
        }
        let c = b - fb * (b - a) / (fb - fa);
        a = b;
        b = c;
        if end(b).abs() < 1e-14 {
            break;
        }
    }
    shoot(b, steps)
}

#[test]
fn tracking_matches_shooting_oracle() {
    let p = ControlProblem::new(Tracking, vec![0.0], (0.0, 1.0), vec![(-10.0, 10.0)], 11, 20).unwrap();
    let s = solve_wps(&p, p.zero_control().unwrap(), 0.5, 200, 1e-8).unwrap();
    let mut u = [0.0];
    let mut worst: f64 = 0.0;
    for (t, q, qdot) in shooting_oracle().into_iter().step_by(20) {
        s.u.eval(t, &mut u);
        worst = worst.max((u[0] - qdot).abs()).max((s.forward.state(t)[0] - q).abs());
    }
    assert!(worst <= 1e-5, "{worst}");
}

#[test]
fn identity_residual_tracks_gradient_tolerance() {
    let p = ControlProblem::new(SineDrift, vec![0.5], (0.0, 1.0), vec![(-10.0, 10.0)], 5, 20).unwrap();
    let residual = |tol: f64| {
        let s = solve_wps(&p, p.zero_control().unwrap(), 0.5, 400, tol).unwrap();
        hamiltonian_time_identity(&p, &s, 101).max_residual()
    };
    let (coarse, fine) = (residual(1e-4), residual(1e-6));
    assert!(fine < coarse / 10.0, "{coarse} vs {fine}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn first_variation_is_linear(a in -2.0f64..2.0, b in -2.0f64..2.0, w in 1.0f64..4.0) {
        let p = ControlProblem::new(Lqr, vec![1.0], (0.0, 1.0), vec![(-10.0, 10.0)], 2, 5).unwrap();
        let u = p.control_from_fn(|t, o| o[0] = 0.5 * t).unwrap();
        let x = p.control_from_fn(|t, o| o[0] = (w * t).sin()).unwrap();
        let y = p.control_from_fn(|t, o| o[0] = t * t - 0.3).unwrap();
        let combo = p.control_from_fn(|t, o| o[0] = a * (w * t).sin() + b * (t * t - 0.3)).unwrap();
        let dx = control_first_variation(&p, &u, &x).unwrap().via_state;
        let dy = control_first_variation(&p, &u, &y).unwrap().via_state;
        let dc = control_first_variation(&p, &u, &combo).unwrap().via_state;
        let expected = a * dx + b * dy;
        prop_assert!((dc - expected).abs() <= 1e-8 * (a * dx).abs().max((b * dy).abs()).max(1e-12));
    }
}
