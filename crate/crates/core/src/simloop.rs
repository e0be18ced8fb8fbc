//! Closed-loop simulation of the robot under a flow field, and tracking metrics.

use std::cell::Cell;
use std::io::Write;

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::control::{
    control_step, observer_step, ControlInput, Gains, ObserverState, Reference, RobotState,
};
use crate::domain::FlowField;
use crate::error::{Error, Result};
use crate::planner::PlanResult;
use crate::Vec2;

/// Anything that reports the flow velocity at a position.
pub trait FlowSampler {
    fn velocity(&self, x: Vec2) -> Result<Vec2>;
}

impl<F: Fn(Vec2) -> Result<Vec2>> FlowSampler for F {
    fn velocity(&self, x: Vec2) -> Result<Vec2> {
        self(x)
    }
}

#[derive(Clone, Debug)]
pub enum FlowSource {
    /// `v = A x + c`.
    AnalyticLinear {
        a: Matrix2<f64>,
        c: Vec2,
    },
    Grid(FlowField),
}

impl FlowSource {
    pub fn still() -> Self {
        FlowSource::uniform(Vec2::zeros())
    }

    pub fn uniform(v: Vec2) -> Self {
        FlowSource::AnalyticLinear {
            a: Matrix2::zeros(),
            c: v,
        }
    }

    /// Rigid rotation `v = (-w y, w x)`.
    pub fn rotation(w: f64) -> Self {
        FlowSource::AnalyticLinear {
            a: Matrix2::new(0.0, -w, w, 0.0),
            c: Vec2::zeros(),
        }
    }
}

impl FlowSampler for FlowSource {
    fn velocity(&self, x: Vec2) -> Result<Vec2> {
        match self {
            FlowSource::AnalyticLinear { a, c } => Ok(a * x + c),
            FlowSource::Grid(f) => f.sample_velocity(x),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ControllerVariant {
    /// The controller sees the true local flow.
    FfFbFlowComp,
    /// The controller assumes still fluid.
    FfFbNoComp,
    /// The controller uses the observer's flow estimate.
    FfFbObserver,
}

impl ControllerVariant {
    pub const ALL: [ControllerVariant; 3] = [
        ControllerVariant::FfFbFlowComp,
        ControllerVariant::FfFbNoComp,
        ControllerVariant::FfFbObserver,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ControllerVariant::FfFbFlowComp => "FF_FB_FLOW_COMP",
            ControllerVariant::FfFbNoComp => "FF_FB_NO_COMP",
            ControllerVariant::FfFbObserver => "FF_FB_OBSERVER",
        }
    }
}

impl std::str::FromStr for ControllerVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "FF_FB_FLOW_COMP" | "FLOW_COMP" => Ok(ControllerVariant::FfFbFlowComp),
            "FF_FB_NO_COMP" | "NO_COMP" => Ok(ControllerVariant::FfFbNoComp),
            "FF_FB_OBSERVER" | "OBSERVER" => Ok(ControllerVariant::FfFbObserver),
            _ => Err(Error::InvalidConfig(format!(
                "unknown controller variant '{s}'"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub xd: f64,
    pub yd: f64,
    /// Tracking error `x_d - x`.
    pub ex: f64,
    pub ey: f64,
    pub u: f64,
    pub phi: f64,
    pub vtx: f64,
    pub vty: f64,
    /// Flow the controller used at this sample.
    pub vhx: f64,
    pub vhy: f64,
}

impl TraceSample {
    pub fn pos(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn error(&self) -> Vec2 {
        Vec2::new(self.ex, self.ey)
    }

    pub fn v_true(&self) -> Vec2 {
        Vec2::new(self.vtx, self.vty)
    }

    pub fn v_hat(&self) -> Vec2 {
        Vec2::new(self.vhx, self.vhy)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimTrace {
    pub dt: f64,
    pub samples: Vec<TraceSample>,
    /// First time the robot came within the goal radius (navigation only).
    pub arrival_time: Option<f64>,
}

impl SimTrace {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for s in &self.samples {
            w.serialize(s)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let samples = r
            .deserialize()
            .collect::<std::result::Result<Vec<TraceSample>, _>>()?;
        let dt = match samples.as_slice() {
            [a, b, ..] => b.t - a.t,
            _ => 0.0,
        };
        Ok(SimTrace {
            dt,
            samples,
            arrival_time: None,
        })
    }
}

fn validate_step(duration: f64, dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite() && duration.is_finite() && duration >= dt) {
        return Err(Error::InvalidConfig(format!(
            "need 0 < dt <= duration, got dt = {dt}, duration = {duration}"
        )));
    }
    Ok(())
}

fn finite(v: Vec2) -> bool {
    v.iter().all(|c| c.is_finite())
}

/// Runs the loop until `stop` returns true for a sample or `n` samples are taken.
#[allow(clippy::too_many_arguments)]
fn run_loop(
    variant: ControllerVariant,
    plant: &dyn FlowSampler,
    gains: &Gains,
    reference: &dyn Fn(f64) -> Reference,
    x0: Vec2,
    n: usize,
    dt: f64,
    mut stop: impl FnMut(&TraceSample) -> bool,
) -> Result<SimTrace> {
    gains.validate()?;
    let mut x = x0;
    let mut observer = ObserverState::new(x0, Vec2::zeros(), gains.l_p_matrix());
    let mut phi = 0.0;
    let mut samples = Vec::with_capacity(n.min(1 << 20));
    let mut arrival_time = None;
    for k in 0..n {
        let t = k as f64 * dt;
        let v_true = plant.velocity(x)?;
        let belief = match variant {
            ControllerVariant::FfFbFlowComp => plant.velocity(x)?,
            ControllerVariant::FfFbNoComp => Vec2::zeros(),
            ControllerVariant::FfFbObserver => observer.v_hat,
        };
        let r = reference(t);
        let input: ControlInput = control_step(&RobotState { x, t }, &r, belief, gains, phi, dt);
        phi = input.phi;
        let e = r.x_d - x;
        let sample = TraceSample {
            t,
            x: x.x,
            y: x.y,
            xd: r.x_d.x,
            yd: r.x_d.y,
            ex: e.x,
            ey: e.y,
            u: input.u,
            phi: input.phi,
            vtx: v_true.x,
            vty: v_true.y,
            vhx: belief.x,
            vhy: belief.y,
        };
        samples.push(sample);
        if stop(&sample) {
            arrival_time = Some(t);
            break;
        }
        if k + 1 == n {
            break;
        }
        x += (input.velocity() + v_true) * dt;
        if !finite(x) {
            return Err(Error::NonFinite(format!("robot position at t = {t}")));
        }
        if variant == ControllerVariant::FfFbObserver {
            observer = observer_step(&observer, x, &input, dt)?;
        }
    }
    Ok(SimTrace {
        dt,
        samples,
        arrival_time,
    })
}

/// Explicit-Euler closed loop. The plant always moves with the true flow; the controller
/// sees the flow named by `variant`. Samples are taken at `t = k dt` for
/// `k = 0..=round(duration / dt)`.
pub fn simulate_tracking(
    variant: ControllerVariant,
    flow: &dyn FlowSampler,
    gains: &Gains,
    reference: &dyn Fn(f64) -> Reference,
    x0: Vec2,
    duration: f64,
    dt: f64,
) -> Result<SimTrace> {
    validate_step(duration, dt)?;
    let n = (duration / dt).round() as usize + 1;
    run_loop(variant, flow, gains, reference, x0, n, dt, |_| false)
}

/// A path timed for a robot of self-speed `u_max`: the reference slides along each
/// segment at the ground speed reachable there after cancelling the cross-flow.
#[derive(Clone, Debug)]
pub struct TimedPath {
    points: Vec<Vec2>,
    times: Vec<f64>,
}

/// Ground speeds are floored at this fraction of `u_max` so the reference keeps moving
/// against an overpowering current.
pub const MIN_GROUND_SPEED_FRACTION: f64 = 0.05;

impl TimedPath {
    pub fn new(points: &[Vec2], flow: &dyn FlowSampler, u_max: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidConfig("empty path".into()));
        }
        let mut pts = vec![points[0]];
        let mut times = vec![0.0];
        for &p in &points[1..] {
            let a = *pts.last().unwrap();
            let d = p - a;
            let len = d.norm();
            if len == 0.0 {
                continue;
            }
            let tangent = d / len;
            let v = flow.velocity(a + d * 0.5)?;
            let along = v.dot(&tangent);
            let across = v.x * tangent.y - v.y * tangent.x;
            let reach = (u_max * u_max - across * across).max(0.0).sqrt();
            let speed = (along + reach).max(MIN_GROUND_SPEED_FRACTION * u_max);
            times.push(times.last().unwrap() + len / speed);
            pts.push(p);
        }
        Ok(TimedPath { points: pts, times })
    }

    pub fn duration(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn goal(&self) -> Vec2 {
        *self.points.last().unwrap()
    }

    pub fn at(&self, t: f64) -> Reference {
        if t >= self.duration() || self.points.len() == 1 {
            return Reference::new(self.goal(), Vec2::zeros());
        }
        let t = t.max(0.0);
        let i = self
            .times
            .partition_point(|&s| s <= t)
            .clamp(1, self.times.len() - 1);
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let (a, b) = (self.points[i - 1], self.points[i]);
        let s = (t - t0) / (t1 - t0);
        Reference::new(a + (b - a) * s, (b - a) / (t1 - t0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NavigationConfig {
    pub u_max: f64,
    pub dt: f64,
    /// Meters.
    pub goal_radius: f64,
}

/// Tracks the timed plan with speed saturated at `u_max` until the robot is within
/// `goal_radius` of the goal. Gives up after twice the reference duration plus 100 steps.
pub fn simulate_navigation(
    plan: &PlanResult,
    flow: &dyn FlowSampler,
    gains: &Gains,
    cfg: &NavigationConfig,
) -> Result<SimTrace> {
    if plan.path.is_empty() {
        return Err(Error::InvalidConfig("plan has an empty path".into()));
    }
    if !(cfg.u_max > 0.0 && cfg.goal_radius > 0.0) {
        return Err(Error::InvalidConfig(
            "u_max and goal_radius must be positive".into(),
        ));
    }
    let timed = TimedPath::new(&plan.positions(), flow, cfg.u_max)?;
    let budget = 2.0 * timed.duration() + 100.0 * cfg.dt;
    validate_step(budget, cfg.dt)?;
    let n = (budget / cfg.dt).ceil() as usize + 1;
    let gains = Gains {
        u_max: Some(gains.u_max.map_or(cfg.u_max, |u| u.min(cfg.u_max))),
        ..*gains
    };
    let goal = timed.goal();
    let x0 = plan.positions()[0];
    let last = Cell::new(f64::INFINITY);
    let trace = run_loop(
        ControllerVariant::FfFbFlowComp,
        flow,
        &gains,
        &|t| timed.at(t),
        x0,
        n,
        cfg.dt,
        |s| {
            let d = (s.pos() - goal).norm();
            last.set(d);
            d <= cfg.goal_radius
        },
    );
    let trace = match trace {
        Err(Error::OutOfBounds { .. }) => return Err(Error::NotArrived(last.get())),
        other => other?,
    };
    if trace.arrival_time.is_none() {
        return Err(Error::NotArrived(last.get()));
    }
    Ok(trace)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// RMS of the tracking error over the second half of the run.
    pub rms_error: f64,
    pub final_error: f64,
    pub settling_eps: f64,
    /// First time after which the error stays below `settling_eps`; `None` if it never
    /// settles.
    pub settling_time: Option<f64>,
    pub mean_speed: f64,
}

pub fn metrics(trace: &SimTrace, settling_eps: f64) -> Result<Metrics> {
    let s = &trace.samples;
    if s.is_empty() {
        return Err(Error::InvalidConfig("empty trace".into()));
    }
    let t_end = s.last().unwrap().t;
    let tail: Vec<f64> = s
        .iter()
        .filter(|x| x.t >= 0.5 * t_end)
        .map(|x| x.error().norm_squared())
        .collect();
    let rms_error = (tail.iter().sum::<f64>() / tail.len() as f64).sqrt();
    let settling_time = match s.iter().rposition(|x| x.error().norm() >= settling_eps) {
        None => Some(s[0].t),
        Some(i) if i + 1 < s.len() => Some(s[i + 1].t),
        Some(_) => None,
    };
    let mean_speed = if s.len() > 1 && t_end > 0.0 {
        s.windows(2)
            .map(|w| (w[1].pos() - w[0].pos()).norm())
            .sum::<f64>()
            / (t_end - s[0].t)
    } else {
        0.0
    };
    Ok(Metrics {
        rms_error,
        final_error: s.last().unwrap().error().norm(),
        settling_eps,
        settling_time,
        mean_speed,
    })
}
