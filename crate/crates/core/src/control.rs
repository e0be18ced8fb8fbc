//! Feedforward-feedback tracking with flow compensation, and a flow observer.
//!
//! The robot is a kinematic point, `x' = u (cos phi, sin phi) + v(x)`, steered by a
//! forward speed `u >= 0` and a heading `phi`.

use std::f64::consts::{PI, TAU};

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Vec2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RobotState {
    pub x: Vec2,
    pub t: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlInput {
    /// Forward speed, m/s.
    pub u: f64,
    /// Heading in (-pi, pi].
    pub phi: f64,
    /// Field rotation frequency in Hz.
    pub f_rot: f64,
}

impl ControlInput {
    pub fn velocity(&self) -> Vec2 {
        Vec2::new(self.phi.cos(), self.phi.sin()) * self.u
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObserverState {
    pub v_hat: Vec2,
    pub x_hat: Vec2,
    pub l_p: Matrix2<f64>,
}

impl ObserverState {
    pub fn new(x0: Vec2, v_hat: Vec2, l_p: Matrix2<f64>) -> Self {
        if l_p.symmetric_eigenvalues().iter().any(|&e| e <= 0.0) {
            log::warn!("observer gain is not positive definite: {l_p:?}");
        }
        ObserverState {
            v_hat,
            x_hat: x0,
            l_p,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Gains {
    /// 1/s.
    pub k_p: f64,
    /// Row-major observer gain, 1/s.
    pub l_p: [[f64; 2]; 2],
    /// Speed per rotation frequency, m/s per Hz.
    pub k_f: f64,
    /// Optional saturation of the commanded speed.
    pub u_max: Option<f64>,
}

impl Default for Gains {
    fn default() -> Self {
        Gains {
            k_p: 1.0,
            l_p: [[1.0, 0.0], [0.0, 1.0]],
            k_f: 1e-4,
            u_max: None,
        }
    }
}

impl Gains {
    pub fn l_p_matrix(&self) -> Matrix2<f64> {
        Matrix2::new(
            self.l_p[0][0],
            self.l_p[0][1],
            self.l_p[1][0],
            self.l_p[1][1],
        )
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.k_p.is_finite() && self.l_p.iter().flatten().all(|v| v.is_finite());
        if !finite || self.k_p < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "k_p must be finite and >= 0, got {}",
                self.k_p
            )));
        }
        if !(self.k_f > 0.0 && self.k_f.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "k_f must be positive, got {}",
                self.k_f
            )));
        }
        if let Some(u) = self.u_max {
            if !(u > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "u_max must be positive, got {u}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Reference {
    pub x_d: Vec2,
    pub xdot_d: Vec2,
    pub phi_d: f64,
}

impl Reference {
    pub fn new(x_d: Vec2, xdot_d: Vec2) -> Self {
        Reference {
            x_d,
            xdot_d,
            phi_d: xdot_d.y.atan2(xdot_d.x),
        }
    }
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// Lemniscate `x = a cos t / (1 + sin^2 t)`, `y = b sin t cos t / (1 + sin^2 t)` traversed
/// once per `period` seconds.
pub fn ref_lemniscate(t: f64, period: f64, a: f64, b: f64) -> Reference {
    let theta = (TAU * t / period).rem_euclid(TAU);
    let rate = TAU / period;
    let (s, c) = theta.sin_cos();
    let d = 1.0 + s * s;
    let x_d = Vec2::new(a * c / d, b * s * c / d);
    let dx = -a * s * (3.0 - s * s) / (d * d);
    let dy = b * ((c * c - s * s) * d - 2.0 * s * s * c * c) / (d * d);
    Reference::new(x_d, Vec2::new(dx, dy) * rate)
}

/// Speed and heading that cancel the flow and follow the reference velocity. A zero
/// speed keeps `fallback` as the heading.
pub fn feedforward(xdot_d: Vec2, v: Vec2, fallback: f64) -> (f64, f64) {
    let d = xdot_d - v;
    let u = d.norm();
    if u == 0.0 {
        (0.0, fallback)
    } else {
        (u, d.y.atan2(d.x))
    }
}

/// Global error `x_d - x - v dt` and the same error in the reference frame.
pub fn tracking_error(x_d: Vec2, x: Vec2, v: Vec2, dt: f64, phi_d: f64) -> (Vec2, Vec2) {
    let e = x_d - x - v * dt;
    let (s, c) = phi_d.sin_cos();
    (e, Vec2::new(c * e.x + s * e.y, -s * e.x + c * e.y))
}

/// Heading between `phi_ff` and `phi_fb`, weighted by the along and across components of
/// the local error, interpolated on the shorter arc.
pub fn blend_heading(phi_ff: f64, phi_fb: f64, e_loc: Vec2) -> f64 {
    let total = e_loc.x.abs() + e_loc.y.abs();
    if total == 0.0 {
        return wrap_angle(phi_ff);
    }
    let w_fb = e_loc.y.abs() / total;
    wrap_angle(phi_ff + w_fb * wrap_angle(phi_fb - phi_ff))
}

pub fn feedback_speed(e: Vec2, phi: f64, k_p: f64) -> f64 {
    k_p * (e.x * phi.cos() + e.y * phi.sin())
}

/// One controller evaluation, using `v` as the controller's belief about the local flow.
pub fn control_step(
    state: &RobotState,
    reference: &Reference,
    v: Vec2,
    gains: &Gains,
    prev_phi: f64,
    dt: f64,
) -> ControlInput {
    let (u_ff, phi_ff) = feedforward(reference.xdot_d, v, prev_phi);
    let (e, e_loc) = tracking_error(reference.x_d, state.x, v, dt, reference.phi_d);
    let phi_fb = e.y.atan2(e.x);
    let phi = blend_heading(phi_ff, phi_fb, e_loc);
    let mut u = (u_ff + feedback_speed(e, phi, gains.k_p)).max(0.0);
    if let Some(cap) = gains.u_max {
        u = u.min(cap);
    }
    ControlInput {
        u,
        phi,
        f_rot: u / gains.k_f,
    }
}

/// Advances the observer over one step in which `input` was applied and the robot was
/// then measured at `x_meas`.
///
/// The position predicted from the model is compared with the measurement, the flow
/// estimate absorbs the mismatch through `L_p`, and the estimated position is re-anchored
/// on the measurement. The estimation error then obeys `e' = -L_p e` for a constant flow.
pub fn observer_step(
    obs: &ObserverState,
    x_meas: Vec2,
    input: &ControlInput,
    dt: f64,
) -> Result<ObserverState> {
    let x_pred = obs.x_hat + (input.velocity() + obs.v_hat) * dt;
    // L_p (x' - x_hat') dt with both rates taken as increments over dt
    let v_hat = obs.v_hat + obs.l_p * (x_meas - x_pred);
    if !(v_hat.iter().all(|c| c.is_finite()) && x_meas.iter().all(|c| c.is_finite())) {
        return Err(Error::NonFinite("observer state".into()));
    }
    Ok(ObserverState {
        v_hat,
        x_hat: x_meas,
        l_p: obs.l_p,
    })
}
