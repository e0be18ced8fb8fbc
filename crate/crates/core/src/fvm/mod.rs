//! Steady incompressible Navier-Stokes on the masked pixel grid.
//!
//! SIMPLE pressure-velocity coupling on a staggered (MAC) grid: upwind convection (or
//! central through deferred correction), central diffusion, no-slip walls, a parabolic
//! inlet and a zero-gradient outlet with the pressure pinned to zero in one outlet cell.
//! The staggered result is averaged onto pixel centers.

pub mod linsolve;
pub mod staggered;

use std::io::Write;
use std::sync::Arc;

use log::debug;
use serde::{Deserialize, Serialize};

use crate::domain::{ChannelMask, FlowField, FluidProps, Map2, Port};
use crate::error::{Error, Result};
use staggered::{Axis, FaceKind, Staggered};

/// A residual this many times its first-iteration value counts as divergence.
const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ConvectionScheme {
    #[default]
    Upwind,
    /// Central differences through deferred correction on top of upwind.
    Central,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_outer_iters: usize,
    /// Threshold on the continuity residual (see [`ResidualReport`]).
    pub tol_continuity: f64,
    pub relax_u: f64,
    pub relax_p: f64,
    pub convection_scheme: ConvectionScheme,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_outer_iters: 5000,
            tol_continuity: 1e-6,
            relax_u: 0.7,
            relax_p: 0.3,
            convection_scheme: ConvectionScheme::Upwind,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |x: f64| x > 0.0 && x <= 1.0;
        if !in_unit(self.relax_u) || !in_unit(self.relax_p) {
            return Err(Error::InvalidConfig(format!(
                "relaxation factors must lie in (0, 1], got u = {}, p = {}",
                self.relax_u, self.relax_p
            )));
        }
        if !(self.tol_continuity > 0.0) {
            return Err(Error::InvalidConfig(
                "tol_continuity must be positive".into(),
            ));
        }
        if self.max_outer_iters == 0 {
            return Err(Error::InvalidConfig(
                "max_outer_iters must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Per-iteration residual history.
///
/// Continuity is the L2 norm of the cell mass imbalances divided by the inflow.
/// Momentum entries are the RMS equation residual over active faces divided by
/// `mu * v_inlet`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub continuity_l2: Vec<f64>,
    pub momentum_x_l2: Vec<f64>,
    pub momentum_y_l2: Vec<f64>,
    pub iters_used: usize,
    pub converged: bool,
}

impl ResidualReport {
    pub fn final_continuity(&self) -> f64 {
        self.continuity_l2.last().copied().unwrap_or(0.0)
    }

    pub fn final_momentum(&self) -> (f64, f64) {
        (
            self.momentum_x_l2.last().copied().unwrap_or(0.0),
            self.momentum_y_l2.last().copied().unwrap_or(0.0),
        )
    }

    /// `iter,continuity,momx,momy`, one row per iteration.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "iter,continuity,momx,momy")?;
        for (k, ((c, x), y)) in self
            .continuity_l2
            .iter()
            .zip(&self.momentum_x_l2)
            .zip(&self.momentum_y_l2)
            .enumerate()
        {
            writeln!(out, "{},{c:e},{x:e},{y:e}", k + 1)?;
        }
        Ok(())
    }
}

fn rms(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
    }
}

/// Solves for the steady flow through `mask`.
///
/// Reaching `max_outer_iters` is not an error; check `ResidualReport::converged`.
pub fn solve_steady(
    mask: &Arc<ChannelMask>,
    props: FluidProps,
    cfg: &SolverConfig,
) -> Result<(FlowField, ResidualReport)> {
    props.validate()?;
    cfg.validate()?;
    let mut st = Staggered::new(mask);
    let mut report = ResidualReport::default();
    if st.inflow == 0.0 {
        report.continuity_l2.push(0.0);
        report.momentum_x_l2.push(0.0);
        report.momentum_y_l2.push(0.0);
        report.iters_used = 1;
        report.converged = true;
        return Ok((FlowField::zeros(mask.clone(), props), report));
    }

    let (rho, mu, h) = (props.rho, props.mu(), st.h);
    let force_ref = mu * mask.v_inlet();
    let (w, hgt) = mask.dims();
    let mut d_u = vec![0.0; st.u.len()];
    let mut d_v = vec![0.0; st.v.len()];
    let mut initial: Option<[f64; 3]> = None;
    let central = cfg.convection_scheme == ConvectionScheme::Central;

    for iter in 1..=cfg.max_outer_iters {
        report.iters_used = iter;
        st.update_outlets();

        let mut res = [0.0; 3];
        for (k, axis) in [Axis::X, Axis::Y].into_iter().enumerate() {
            let ms = st.assemble_momentum(mask, axis, rho, mu, cfg.relax_u, central);
            res[k + 1] = rms(&ms.residual) / force_ref;
            let mut x: Vec<f64> = ms.faces.iter().map(|&f| st.value(axis, f)).collect();
            ms.system.solve_bicgstab(&mut x, 1e-6, 500);
            let d = match axis {
                Axis::X => &mut d_u,
                Axis::Y => &mut d_v,
            };
            for ((&f, xv), a_p) in ms.faces.iter().zip(x).zip(&ms.a_p) {
                *st.value_mut(axis, f) = xv;
                d[f] = h * cfg.relax_u / a_p;
            }
        }
        st.update_outlets();

        let mut imb_sq = 0.0;
        for r in 0..hgt {
            for c in 0..w {
                if mask.is_fluid(r, c) {
                    imb_sq += st.imbalance(r, c).powi(2);
                }
            }
        }
        res[0] = imb_sq.sqrt() / st.inflow;
        report.continuity_l2.push(res[0]);
        report.momentum_x_l2.push(res[1]);
        report.momentum_y_l2.push(res[2]);

        let names = ["continuity", "momentum_x", "momentum_y"];
        let init = *initial.get_or_insert(res);
        for k in 0..3 {
            let blown = init[k] > 0.0 && res[k] > DIVERGENCE_FACTOR * init[k];
            if !res[k].is_finite() || blown {
                return Err(Error::Diverged(names[k], iter));
            }
        }
        if iter % 100 == 0 {
            debug!(
                "SIMPLE iter {iter}: cont {:.3e} momx {:.3e} momy {:.3e}",
                res[0], res[1], res[2]
            );
        }
        if res[0] <= cfg.tol_continuity {
            report.converged = true;
            break;
        }

        let (sys, cells, unknown_of) = st.assemble_pressure_correction(mask, &d_u, &d_v);
        let mut pc = vec![0.0; cells.len()];
        sys.solve_cg(&mut pc, 1e-8, 4 * (cells.len() + 10));
        let p_corr = |cell: usize| match unknown_of[cell] {
            usize::MAX => 0.0,
            k => pc[k],
        };
        for r in 0..hgt {
            for c in 1..w {
                let f = r * (w + 1) + c;
                if st.ukind[f] == FaceKind::Active {
                    st.u[f] += d_u[f] * (p_corr(r * w + c - 1) - p_corr(r * w + c));
                }
            }
        }
        for r in 1..hgt {
            for c in 0..w {
                let f = r * w + c;
                if st.vkind[f] == FaceKind::Active {
                    st.v[f] += d_v[f] * (p_corr((r - 1) * w + c) - p_corr(r * w + c));
                }
            }
        }
        for (k, &cell) in cells.iter().enumerate() {
            st.p[cell] += cfg.relax_p * pc[k];
        }
    }

    let field = collocate(&st, mask, props)?;
    Ok((field, report))
}

/// Averages the staggered velocities onto pixel centers.
fn collocate(st: &Staggered, mask: &Arc<ChannelMask>, props: FluidProps) -> Result<FlowField> {
    let (w, hgt) = mask.dims();
    let mut vx = Map2::zeros(w, hgt);
    let mut vy = Map2::zeros(w, hgt);
    for r in 0..hgt {
        for c in 0..w {
            if mask.is_fluid(r, c) {
                vx.set(
                    r,
                    c,
                    0.5 * (st.u[r * (w + 1) + c] + st.u[r * (w + 1) + c + 1]),
                );
                vy.set(r, c, 0.5 * (st.v[r * w + c] + st.v[(r + 1) * w + c]));
            }
        }
    }
    let p = Map2::from_vec(w, hgt, st.p.clone());
    FlowField::new(mask.clone(), props, vx, vy, p)
        .map_err(|_| Error::Diverged("collocated field", 0))
}

/// Recovers MAC face velocities from a collocated field by inverting the face
/// averaging along each fluid run, starting from a face whose value the boundary fixes.
fn reconstruct(field: &FlowField, mask: &ChannelMask) -> Staggered {
    let mut st = Staggered::new(mask);
    st.p.copy_from_slice(field.p().as_slice());
    for axis in [Axis::X, Axis::Y] {
        let g = st.grid(axis);
        let comp = match axis {
            Axis::X => field.vx(),
            Axis::Y => field.vy(),
        };
        let cell_val = |i: usize, j: usize| {
            let (r, c) = g.cell(i, j);
            comp.get(r, c)
        };
        for i in 0..g.ni {
            let mut j = 0;
            while j < g.nj {
                if !g.fluid(mask, i as isize, j as isize) {
                    j += 1;
                    continue;
                }
                let j0 = j;
                while j < g.nj && g.fluid(mask, i as isize, j as isize) {
                    j += 1;
                }
                let j1 = j - 1;
                let start = g.normal(i, j0);
                let end = g.normal(i, j1 + 1);
                let start_known = st.kind(axis, start) != FaceKind::Outlet;
                let end_known = st.kind(axis, end) != FaceKind::Outlet;
                if start_known || !end_known {
                    if !start_known {
                        *st.value_mut(axis, start) = cell_val(i, j0);
                    }
                    let mut cur = st.value(axis, start);
                    for jj in j0..=j1 {
                        cur = 2.0 * cell_val(i, jj) - cur;
                        let f = g.normal(i, jj + 1);
                        if jj < j1 || !end_known {
                            *st.value_mut(axis, f) = cur;
                        }
                    }
                } else {
                    let mut cur = st.value(axis, end);
                    for jj in (j0..=j1).rev() {
                        cur = 2.0 * cell_val(i, jj) - cur;
                        if jj > j0 {
                            *st.value_mut(axis, g.normal(i, jj)) = cur;
                        } else {
                            *st.value_mut(axis, start) = cur;
                        }
                    }
                }
            }
        }
    }
    st
}

/// Evaluates the discrete finite-volume equations at a given collocated field.
///
/// The report holds a single entry per residual; `converged` compares continuity
/// against the default tolerance.
pub fn algebraic_residual(
    field: &FlowField,
    mask: &ChannelMask,
    props: FluidProps,
) -> Result<ResidualReport> {
    if field.mask().dims() != mask.dims() {
        return Err(Error::DimensionMismatch {
            expected: mask.dims(),
            got: field.mask().dims(),
        });
    }
    props.validate()?;
    let st = reconstruct(field, mask);
    let force_ref = (props.mu() * mask.v_inlet()).max(f64::MIN_POSITIVE);
    let mx = st.assemble_momentum(mask, Axis::X, props.rho, props.mu(), 1.0, false);
    let my = st.assemble_momentum(mask, Axis::Y, props.rho, props.mu(), 1.0, false);
    let mut imb_sq = 0.0;
    for r in 0..mask.height() {
        for c in 0..mask.width() {
            if mask.is_fluid(r, c) {
                imb_sq += st.imbalance(r, c).powi(2);
            }
        }
    }
    let cont = imb_sq.sqrt() / st.inflow.max(f64::MIN_POSITIVE);
    Ok(ResidualReport {
        continuity_l2: vec![cont],
        momentum_x_l2: vec![rms(&mx.residual) / force_ref],
        momentum_y_l2: vec![rms(&my.residual) / force_ref],
        iters_used: 0,
        converged: cont <= SolverConfig::default().tol_continuity,
    })
}

/// Volumetric flux per unit depth through a port, from the collocated field: positive
/// into the domain for the inlet convention, i.e. along the edge's inward normal.
pub fn port_flux_inward(field: &FlowField, port: &Port) -> f64 {
    let n = port.edge.inward();
    let h = field.mask().pixel_size();
    port.pixels
        .iter()
        .map(|&(r, c)| field.velocity_at_pixel(r, c).dot(&n) * h)
        .sum()
}

/// Inflow through the inlet and outflow through each outlet, per unit depth.
pub fn port_fluxes(field: &FlowField) -> (f64, Vec<f64>) {
    let mask = field.mask();
    let inflow = port_flux_inward(field, mask.inlet());
    let outs = mask
        .outlets()
        .iter()
        .map(|p| -port_flux_inward(field, p))
        .collect();
    (inflow, outs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{BorderSegment, Cell, Edge, InletSpec};

    fn channel(w: usize, h: usize, pixel: f64, v_in: f64) -> Arc<ChannelMask> {
        Arc::new(
            ChannelMask::new(
                w,
                h,
                vec![Cell::Fluid; w * h],
                pixel,
                InletSpec {
                    edge: Edge::Left,
                    from: 0,
                    to: h - 1,
                    v_inlet_mps: v_in,
                },
                &[BorderSegment::new(Edge::Right, 0, h - 1)],
            )
            .unwrap(),
        )
    }

    #[test]
    fn rejects_bad_relaxation() {
        let cfg = SolverConfig {
            relax_u: 0.0,
            ..Default::default()
        };
        let m = channel(16, 8, 1e-4, 1e-3);
        assert!(matches!(
            solve_steady(&m, FluidProps::default(), &cfg),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn short_channel_converges_and_conserves_mass() {
        let m = channel(24, 8, 1e-4, 1e-3);
        let (f, rep) = solve_steady(&m, FluidProps::default(), &SolverConfig::default()).unwrap();
        assert!(rep.converged, "{:?}", rep.continuity_l2.last());
        let (qin, qout) = port_fluxes(&f);
        assert!(((qin - qout[0]) / qin).abs() < 1e-3);
        // every cross-section carries the inflow
        for c in 0..24 {
            let q: f64 = (0..8).map(|r| f.vx().get(r, c) * 1e-4).sum();
            assert!(((q - qin) / qin).abs() < 1e-3, "column {c}: {q} vs {qin}");
        }
    }

    #[test]
    fn zero_inlet_gives_still_fluid() {
        let m = channel(16, 8, 1e-4, 0.0);
        let (f, rep) = solve_steady(&m, FluidProps::default(), &SolverConfig::default()).unwrap();
        assert!(rep.converged);
        assert_eq!(f.vx().max_abs(), 0.0);
    }

    #[test]
    fn residual_of_converged_solution_is_small() {
        let m = channel(24, 8, 1e-4, 1e-3);
        let cfg = SolverConfig::default();
        let (f, _) = solve_steady(&m, FluidProps::default(), &cfg).unwrap();
        let rep = algebraic_residual(&f, &m, FluidProps::default()).unwrap();
        assert!(rep.final_continuity() <= cfg.tol_continuity, "{rep:?}");
        assert!(rep.converged);
    }

    #[test]
    fn zero_field_with_inflow_has_continuity_residual() {
        let m = channel(16, 8, 1e-4, 1e-3);
        let f = FlowField::zeros(m.clone(), FluidProps::default());
        let rep = algebraic_residual(&f, &m, FluidProps::default()).unwrap();
        assert!(rep.final_continuity() > 0.0);
    }

    #[test]
    fn residual_rejects_other_mask() {
        let f = FlowField::zeros(channel(16, 8, 1e-4, 1e-3), FluidProps::default());
        let other = channel(12, 8, 1e-4, 1e-3);
        assert!(matches!(
            algebraic_residual(&f, &other, FluidProps::default()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn residual_csv_has_one_row_per_iteration() {
        let rep = ResidualReport {
            continuity_l2: vec![1.0, 0.5],
            momentum_x_l2: vec![2.0, 1.0],
            momentum_y_l2: vec![0.1, 0.05],
            iters_used: 2,
            converged: false,
        };
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("iter,continuity,momx,momy\n1,"));
    }
}
