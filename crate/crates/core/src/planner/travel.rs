//! Timing a path with a point robot that follows it at full speed through the flow.

use crate::domain::{ChannelMask, FlowField};
use crate::error::{Error, Result};
use crate::planner::los::segment_clear;
use crate::Vec2;

/// Per-leg time allowance, in multiples of the still-fluid leg time.
const LEG_BUDGET_FACTOR: f64 = 10.0;
/// Extra per-leg allowance, in steps.
const LEG_BUDGET_STEPS: f64 = 100.0;

/// Simulates `x' = u_max * dir + v(x)` with explicit Euler, steering straight at the
/// next waypoint. Intermediate waypoints count as reached within one pixel; the final
/// one is reached at the sub-step instant of closest approach once it lies within a
/// single step.
///
/// Fails with `UNREACHABLE` (carrying the waypoint index) when a leg exceeds its time
/// budget or the robot leaves the field.
pub fn travel_time(path: &[Vec2], field: &FlowField, u_max: f64, dt: f64) -> Result<f64> {
    let radius = field.mask().pixel_size();
    travel_time_with(path, |x| field.sample_velocity(x), radius, u_max, dt)
}

pub fn travel_time_with(
    path: &[Vec2],
    flow: impl Fn(Vec2) -> Result<Vec2>,
    radius: f64,
    u_max: f64,
    dt: f64,
) -> Result<f64> {
    if !(u_max > 0.0 && dt > 0.0) {
        return Err(Error::InvalidConfig("u_max and dt must be positive".into()));
    }
    if path.len() < 2 {
        return Ok(0.0);
    }
    let mut x = path[0];
    let mut t = 0.0;
    for (k, &wp) in path.iter().enumerate().skip(1) {
        let last = k + 1 == path.len();
        let budget = LEG_BUDGET_FACTOR * (wp - x).norm() / u_max + LEG_BUDGET_STEPS * dt;
        let mut leg_t = 0.0;
        loop {
            let d = wp - x;
            let dist = d.norm();
            if !last && dist <= radius {
                break;
            }
            if dist == 0.0 {
                return Ok(t);
            }
            let v = flow(x).map_err(|_| Error::Unreachable(k))?;
            let step = (d / dist * u_max + v) * dt;
            let along = step.dot(&d);
            if last && along > 0.0 && dist <= step.norm() {
                return Ok(t + dt * along / step.norm_squared());
            }
            x += step;
            t += dt;
            leg_t += dt;
            if leg_t > budget || !x.iter().all(|c| c.is_finite()) {
                return Err(Error::Unreachable(k));
            }
        }
    }
    Ok(t)
}

/// Moves each interior waypoint halfway towards the chord joining its neighbors
/// (perpendicular projection), keeping endpoints fixed and rejecting any move whose new
/// segments would cross SOLID. Updates are applied in place, front to back.
pub fn smooth_path(path: &[Vec2], mask: &ChannelMask, iterations: usize) -> Vec<Vec2> {
    let mut out = path.to_vec();
    if out.len() < 3 {
        return out;
    }
    for _ in 0..iterations {
        let mut moved = false;
        for i in 1..out.len() - 1 {
            let (a, p, b) = (out[i - 1], out[i], out[i + 1]);
            let chord = b - a;
            let len2 = chord.norm_squared();
            if len2 == 0.0 {
                continue;
            }
            let foot = a + chord * ((p - a).dot(&chord) / len2);
            let offset = foot - p;
            if offset.norm() <= 1e-12 * chord.norm() {
                continue;
            }
            let cand = p + offset * 0.5;
            if segment_clear(mask, a, cand) && segment_clear(mask, cand, b) {
                out[i] = cand;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    out
}
