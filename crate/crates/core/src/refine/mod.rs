//! Physics-informed refinement of a predicted flow field against sparse observations.
//!
//! The field pixels themselves are the optimization variables. The loss is the sum of
//! squared continuity and momentum residuals over the fluid interior; observed pixels
//! and a band along every wall and port are held fixed.

pub mod lbfgs;
pub mod residual;
pub mod stencil;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::domain::{ChannelMask, FlowField, FluidProps, Map2, ObservationSet};
use crate::error::{Error, Result};

pub use residual::{fluid_interior, pde_residuals, LossParts, ResidualMaps, ScaledResidual};
pub use stencil::{stencil_d1, stencil_d2, StencilAxis, D1_KERNEL, D2_KERNEL};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineConfig {
    pub max_iters: usize,
    /// Trial step of the first descent iteration.
    pub step_size: f64,
    /// Relative loss decrease below which the descent stops.
    pub tol_loss: f64,
    /// Width in pixels of the band along walls and ports held at the initial values.
    pub boundary_band: usize,
    /// Weights of the continuity, x-momentum and y-momentum terms.
    pub loss_weights: [f64; 3],
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            max_iters: 20000,
            step_size: 1e-2,
            tol_loss: 1e-10,
            boundary_band: 1,
            loss_weights: [1.0, 1.0, 1.0],
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        let w = self.loss_weights;
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::InvalidConfig("step_size must be positive".into()));
        }
        if self.boundary_band < 1 {
            return Err(Error::InvalidConfig(
                "boundary_band must be at least 1".into(),
            ));
        }
        if !(self.tol_loss >= 0.0) {
            return Err(Error::InvalidConfig("tol_loss must be non-negative".into()));
        }
        if w.iter().any(|&v| !(v >= 0.0 && v.is_finite())) || w.iter().all(|&v| v == 0.0) {
            return Err(Error::InvalidConfig(
                "loss weights must be non-negative and not all zero".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RefineStatus {
    Converged,
    MaxIters,
    /// The line search could not decrease the loss; the best iterate is returned.
    StepFailure,
}

/// One row of the loss history. Values are in the scaled units of [`ScaledResidual`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub iter: usize,
    pub loss: f64,
    pub r_cont: f64,
    pub r_momx: f64,
    pub r_momy: f64,
}

#[derive(Clone, Debug)]
pub struct RefineOutcome {
    pub field: FlowField,
    pub history: Vec<LossRecord>,
    pub status: RefineStatus,
    pub iters: usize,
}

pub fn write_loss_csv<W: Write>(history: &[LossRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["iter", "loss", "r_cont", "r_momx", "r_momy"])?;
    for h in history {
        w.write_record(&[
            h.iter.to_string(),
            format!("{:e}", h.loss),
            format!("{:e}", h.r_cont),
            format!("{:e}", h.r_momx),
            format!("{:e}", h.r_momy),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Anything that turns an initial field plus observations into a refined field.
pub trait FieldRefiner {
    fn refine(
        &self,
        initial: &FlowField,
        obs: &ObservationSet,
        props: FluidProps,
    ) -> Result<RefineOutcome>;
}

/// Residual descent on the field pixels.
#[derive(Clone, Debug, Default)]
pub struct ResidualDescent {
    pub config: RefineConfig,
}

impl FieldRefiner for ResidualDescent {
    fn refine(
        &self,
        initial: &FlowField,
        obs: &ObservationSet,
        props: FluidProps,
    ) -> Result<RefineOutcome> {
        refine_field(initial, obs, props, &self.config)
    }
}

/// Which velocity pixels are held fixed, and at which values.
#[derive(Clone, Debug)]
pub struct Clamps {
    /// Per pixel: `Some((vx, vy))` when the velocity is fixed.
    pub velocity: Vec<Option<(f64, f64)>>,
    /// Per pixel: whether the pressure is fixed at the initial value.
    pub pressure: Vec<bool>,
}

/// Fluid pixels within Chebyshev distance `band` of a SOLID pixel or the raster edge.
pub fn boundary_band(mask: &ChannelMask, band: usize) -> Vec<bool> {
    let (w, h) = mask.dims();
    let b = band as isize;
    let mut out = vec![false; w * h];
    for r in 0..h {
        for c in 0..w {
            if !mask.is_fluid(r, c) {
                continue;
            }
            'search: for dr in -b..=b {
                for dc in -b..=b {
                    if !mask.is_fluid_at(r as isize + dr, c as isize + dc) {
                        out[r * w + c] = true;
                        break 'search;
                    }
                }
            }
        }
    }
    out
}

/// Builds the clamp set: SOLID pixels and the boundary band keep their initial velocity,
/// observed pixels take the mean of the observations assigned to them, and pressure is
/// fixed only on SOLID pixels and at the pin.
pub fn build_clamps(initial: &FlowField, obs: &ObservationSet, band: usize) -> Result<Clamps> {
    let mask = initial.mask();
    obs.validate(mask)?;
    let (w, h) = mask.dims();
    let in_band = boundary_band(mask, band);
    let mut velocity: Vec<Option<(f64, f64)>> = (0..w * h)
        .map(|i| {
            let (r, c) = (i / w, i % w);
            (!mask.is_fluid(r, c) || in_band[i])
                .then(|| (initial.vx().get(r, c), initial.vy().get(r, c)))
        })
        .collect();
    let mut sums: Vec<(f64, f64, usize)> = vec![(0.0, 0.0, 0); w * h];
    for o in &obs.entries {
        let (r, c) = mask.pixel_at(o.pos).ok_or(Error::ObsOutsideFluid {
            x: o.pos.x,
            y: o.pos.y,
        })?;
        let s = &mut sums[r * w + c];
        s.0 += o.vel.x;
        s.1 += o.vel.y;
        s.2 += 1;
    }
    for (i, s) in sums.iter().enumerate() {
        if s.2 > 0 {
            velocity[i] = Some((s.0 / s.2 as f64, s.1 / s.2 as f64));
        }
    }
    let (pr, pc) = mask.pressure_pin();
    let mut pressure: Vec<bool> = (0..w * h).map(|i| !mask.is_fluid(i / w, i % w)).collect();
    pressure[pr * w + pc] = true;
    Ok(Clamps { velocity, pressure })
}

/// Minimizes the residual loss over the free pixels of `initial` under the observation
/// and boundary-band clamps.
///
/// Velocities are scaled by the largest initial speed and pressure by the matching
/// viscous scale before descent; see [`ScaledResidual`]. A line-search failure still
/// returns the best iterate, flagged [`RefineStatus::StepFailure`].
pub fn refine_field(
    initial: &FlowField,
    obs: &ObservationSet,
    props: FluidProps,
    cfg: &RefineConfig,
) -> Result<RefineOutcome> {
    cfg.validate()?;
    props.validate()?;
    let mask = initial.mask();
    let clamps = build_clamps(initial, obs, cfg.boundary_band)?;
    let (w, h) = mask.dims();
    let n = w * h;
    let pixel = mask.pixel_size();
    let mu = props.mu();

    let mut u_ref = initial.vx().max_abs().max(initial.vy().max_abs());
    if !(u_ref > 0.0) {
        u_ref = mask.v_inlet().abs();
    }
    if !(u_ref > 0.0) {
        u_ref = 1.0;
    }
    let p_ref = mu * u_ref / pixel;
    let re_h = props.rho * u_ref * pixel / mu;

    let mut x = vec![0.0; 3 * n];
    for i in 0..n {
        let (vx, vy) =
            clamps.velocity[i].unwrap_or((initial.vx().as_slice()[i], initial.vy().as_slice()[i]));
        x[i] = vx / u_ref;
        x[n + i] = vy / u_ref;
        x[2 * n + i] = initial.p().as_slice()[i] / p_ref;
    }
    let mut free = Vec::new();
    for plane in 0..2 {
        free.extend(
            (0..n)
                .filter(|&i| clamps.velocity[i].is_none())
                .map(|i| plane * n + i),
        );
    }
    free.extend((0..n).filter(|&i| !clamps.pressure[i]).map(|i| 2 * n + i));

    let problem = ScaledResidual::new(mask, re_h, cfg.loss_weights);
    let settings = lbfgs::Settings {
        max_iters: cfg.max_iters,
        tol_rel: cfg.tol_loss,
        first_step: cfg.step_size,
        ..lbfgs::Settings::default()
    };
    let mut history = Vec::new();
    let (reason, iters) = lbfgs::minimize(
        &mut x,
        &free,
        &settings,
        |x, g| problem.loss_and_grad(x, g),
        |iter, loss, parts: &LossParts| {
            history.push(LossRecord {
                iter,
                loss,
                r_cont: parts.cont,
                r_momx: parts.momx,
                r_momy: parts.momy,
            })
        },
    );
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("refined field".into()));
    }
    let status = match reason {
        lbfgs::StopReason::Converged => RefineStatus::Converged,
        lbfgs::StopReason::MaxIters => RefineStatus::MaxIters,
        lbfgs::StopReason::StepFailure => RefineStatus::StepFailure,
    };
    log::debug!("refine: {status:?} after {iters} steps, re_h = {re_h:.3e}");

    let untouched = iters == 0;
    let plane = |k: usize, scale: f64, src: &Map2, keep: &dyn Fn(usize) -> Option<f64>| {
        let data = (0..n)
            .map(|i| {
                keep(i).unwrap_or(if untouched {
                    src.as_slice()[i]
                } else {
                    x[k * n + i] * scale
                })
            })
            .collect();
        Map2::from_vec(w, h, data)
    };
    let vx = plane(0, u_ref, initial.vx(), &|i| clamps.velocity[i].map(|v| v.0));
    let vy = plane(1, u_ref, initial.vy(), &|i| clamps.velocity[i].map(|v| v.1));
    let p = plane(2, p_ref, initial.p(), &|i| {
        clamps.pressure[i].then(|| initial.p().as_slice()[i])
    });
    let field = FlowField::new(initial.mask_arc().clone(), props, vx, vy, p)?;
    Ok(RefineOutcome {
        field,
        history,
        status,
        iters,
    })
}
