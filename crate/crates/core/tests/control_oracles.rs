use std::f64::consts::{PI, TAU};

use flownav::control::{
    blend_heading, control_step, feedback_speed, feedforward, observer_step, ref_lemniscate,
    tracking_error, wrap_angle, ControlInput, Gains, ObserverState, Reference, RobotState,
};
use flownav::Vec2;
use nalgebra::Matrix2;
use proptest::prelude::*;

const A: f64 = 1.8e-3;
const B: f64 = 1.5e-3;
const PERIOD: f64 = 60.0;

#[test]
fn lemniscate_velocity_matches_central_differences() {
    for &t in &[0.0, 3.7, 14.0, 31.0, 52.5] {
        let h = 1e-4;
        let fd = (ref_lemniscate(t + h, PERIOD, A, B).x_d
            - ref_lemniscate(t - h, PERIOD, A, B).x_d)
            / (2.0 * h);
        let r = ref_lemniscate(t, PERIOD, A, B);
        assert!((fd - r.xdot_d).norm() <= 1e-6 * r.xdot_d.norm(), "t = {t}");
        assert!((r.phi_d - r.xdot_d.y.atan2(r.xdot_d.x)).abs() < 1e-15);
    }
}

#[test]
fn control_examples() {
    let g = Gains::default();
    let still = RobotState {
        x: Vec2::zeros(),
        t: 0.0,
    };

    let r = Reference::new(Vec2::zeros(), Vec2::new(2e-4, 0.0));
    let c = control_step(&still, &r, Vec2::zeros(), &g, 0.0, 0.01);
    assert_eq!((c.u, c.phi), (2e-4, 0.0));
    assert!((c.f_rot - 2.0).abs() < 1e-12);

    let c = control_step(&still, &r, Vec2::new(2e-4, 0.0), &g, 0.0, 0.01);
    assert_eq!(c.u, 0.0);

    let r = Reference::new(Vec2::new(0.1, 0.0), Vec2::zeros());
    let c = control_step(&still, &r, Vec2::zeros(), &g, 0.0, 0.01);
    assert_eq!(c.phi, 0.0);
    assert!((c.u - 0.1).abs() < 1e-15);
}

#[test]
fn speed_cap_and_reverse_clamp() {
    let g = Gains {
        u_max: Some(0.05),
        ..Gains::default()
    };
    let state = RobotState {
        x: Vec2::zeros(),
        t: 0.0,
    };
    let r = Reference::new(Vec2::new(0.1, 0.0), Vec2::zeros());
    assert_eq!(
        control_step(&state, &r, Vec2::zeros(), &g, 0.0, 0.01).u,
        0.05
    );
    assert_eq!(feedback_speed(Vec2::new(-1.0, 0.0), 0.0, 1.0), -1.0);
    // heading is along the error, so the feedback term cannot go negative here
    let r = Reference::new(Vec2::new(-0.1, 0.0), Vec2::zeros());
    let c = control_step(&state, &r, Vec2::zeros(), &Gains::default(), 0.0, 0.01);
    assert!(c.u >= 0.0);
}

#[test]
fn observer_fixed_point_and_zero_gain() {
    let v_true = Vec2::new(5e-4, -2e-4);
    let input = ControlInput {
        u: 3e-4,
        phi: 0.7,
        f_rot: 3.0,
    };
    let dt = 0.01;
    let mut obs = ObserverState::new(Vec2::new(1e-3, 2e-3), v_true, Matrix2::identity());
    let mut x = obs.x_hat;
    for _ in 0..1000 {
        x += (input.velocity() + v_true) * dt;
        obs = observer_step(&obs, x, &input, dt).unwrap();
    }
    assert!((obs.v_hat - v_true).norm() < 1e-12);

    let mut obs = ObserverState::new(Vec2::zeros(), Vec2::zeros(), Matrix2::zeros());
    let mut x = Vec2::zeros();
    for _ in 0..100 {
        x += (input.velocity() + v_true) * dt;
        obs = observer_step(&obs, x, &input, dt).unwrap();
    }
    assert_eq!(obs.v_hat, Vec2::zeros());
}

#[test]
fn unstable_observer_gain_is_reported() {
    let input = ControlInput {
        u: 0.0,
        phi: 0.0,
        f_rot: 0.0,
    };
    let mut obs = ObserverState::new(Vec2::zeros(), Vec2::zeros(), Matrix2::identity() * 1e3);
    let mut x = Vec2::zeros();
    let v = Vec2::new(1.0, 0.0);
    let mut failed = false;
    for _ in 0..400 {
        x += v * 0.01;
        match observer_step(&obs, x, &input, 0.01) {
            Ok(o) => obs = o,
            Err(e) => {
                assert_eq!(e.code(), "NON_FINITE");
                failed = true;
                break;
            }
        }
    }
    assert!(failed);
}

/// Runs the observer against a constant flow and returns the estimate error over time.
fn observer_error_history(l_p: Matrix2<f64>, v_true: Vec2, dt: f64, steps: usize) -> Vec<Vec2> {
    let input = ControlInput {
        u: 2e-4,
        phi: 1.0,
        f_rot: 2.0,
    };
    let mut obs = ObserverState::new(Vec2::zeros(), Vec2::zeros(), l_p);
    let mut x = Vec2::zeros();
    let mut out = vec![v_true - obs.v_hat];
    for _ in 0..steps {
        x += (input.velocity() + v_true) * dt;
        obs = observer_step(&obs, x, &input, dt).unwrap();
        out.push(v_true - obs.v_hat);
    }
    out
}

/// Classical RK4 on `e' = -L e`, the continuous error system of the observer.
fn rk4_error(l_p: Matrix2<f64>, e0: Vec2, t: f64, h: f64) -> Vec2 {
    let f = |e: Vec2| -(l_p * e);
    let mut e = e0;
    for _ in 0..(t / h).round() as usize {
        let k1 = f(e);
        let k2 = f(e + k1 * (h / 2.0));
        let k3 = f(e + k2 * (h / 2.0));
        let k4 = f(e + k3 * h);
        e += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    e
}

#[test]
fn observer_estimate_decays_to_five_percent_in_ten_seconds() {
    let v_true = Vec2::new(5e-4, 0.0);
    let hist = observer_error_history(Matrix2::identity(), v_true, 0.01, 1000);
    for w in hist.windows(2) {
        assert!(w[1].norm() <= w[0].norm());
    }
    assert!(hist[1000].norm() < 0.05 * hist[0].norm());
}

#[test]
fn observer_decay_rate_matches_error_system() {
    for l_p in [
        Matrix2::identity(),
        Matrix2::new(1.0, 0.3, 0.1, 0.6),
        Matrix2::new(2.0, 0.0, 0.0, 0.5),
    ] {
        let dt = 0.01;
        let v_true = Vec2::new(4e-4, -3e-4);
        let hist = observer_error_history(l_p, v_true, dt, 1000);
        let lambda_min = l_p
            .complex_eigenvalues()
            .iter()
            .map(|c| c.re)
            .fold(f64::INFINITY, f64::min);
        let rate = -(hist[1000].norm() / hist[500].norm()).ln() / 5.0;
        assert!(
            (rate - lambda_min).abs() < 0.1 * lambda_min,
            "{rate} vs {lambda_min}"
        );
        let ode = rk4_error(l_p, hist[0], 10.0, 1e-3);
        assert!((hist[1000] - ode).norm() < 0.1 * ode.norm());
    }
}

proptest! {
    #[test]
    fn local_error_is_a_rotation(ex in -1.0f64..1.0, ey in -1.0f64..1.0, phi in -PI..PI) {
        let (e, loc) = tracking_error(Vec2::new(ex, ey), Vec2::zeros(), Vec2::zeros(), 0.01, phi);
        prop_assert!((e.norm() - loc.norm()).abs() < 1e-12);
    }

    #[test]
    fn blend_lies_on_the_short_arc(a in -PI..PI, b in -PI..PI, lx in -1.0f64..1.0, ly in -1.0f64..1.0) {
        let loc = Vec2::new(lx, ly);
        prop_assume!(lx.abs() + ly.abs() > 1e-9);
        let phi = blend_heading(a, b, loc);
        let arc = wrap_angle(b - a);
        let from_a = wrap_angle(phi - a);
        prop_assert!(from_a * arc >= -1e-12);
        prop_assert!(from_a.abs() <= arc.abs() + 1e-12);
        let w = ly.abs() / (lx.abs() + ly.abs());
        prop_assert!((from_a - w * arc).abs() < 1e-9);
    }

    #[test]
    fn feedback_speed_is_linear_in_the_error(ex in -1.0f64..1.0, ey in -1.0f64..1.0, phi in -PI..PI, kp in 0.0f64..5.0) {
        let e = Vec2::new(ex, ey);
        prop_assert_eq!(feedback_speed(e * 2.0, phi, kp), 2.0 * feedback_speed(e, phi, kp));
    }

    #[test]
    fn lemniscate_is_periodic(t in 0.0f64..60.0) {
        let a = ref_lemniscate(t, TAU, A, B).x_d;
        let b = ref_lemniscate(t + TAU, TAU, A, B).x_d;
        prop_assert!((a - b).norm() < 1e-12);
    }

    #[test]
    fn feedforward_cancels_the_flow(dx in -1.0f64..1.0, dy in -1.0f64..1.0, vx in -1.0f64..1.0, vy in -1.0f64..1.0) {
        let (u, phi) = feedforward(Vec2::new(dx, dy), Vec2::new(vx, vy), 0.0);
        let got = Vec2::new(phi.cos(), phi.sin()) * u + Vec2::new(vx, vy);
        prop_assert!((got - Vec2::new(dx, dy)).norm() < 1e-12);
    }
}
