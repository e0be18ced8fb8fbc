//! Residuals of the steady incompressible Navier-Stokes equations on the pixel grid.

use crate::domain::{ChannelMask, FlowField, FluidProps, Map2};
use crate::error::{Error, Result};
use crate::refine::stencil::{stencil_d1, stencil_d2, StencilAxis};

/// Per-pixel residuals of continuity and the two momentum equations, zero outside the
/// fluid interior.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualMaps {
    pub r_cont: Map2,
    pub r_momx: Map2,
    pub r_momy: Map2,
}

/// Fluid pixels whose four neighbors are all inside the raster and fluid.
pub fn fluid_interior(mask: &ChannelMask) -> Vec<bool> {
    let (w, h) = mask.dims();
    let mut out = vec![false; w * h];
    for r in 1..h.saturating_sub(1) {
        for c in 1..w.saturating_sub(1) {
            out[r * w + c] = mask.is_fluid(r, c)
                && mask.is_fluid(r - 1, c)
                && mask.is_fluid(r + 1, c)
                && mask.is_fluid(r, c - 1)
                && mask.is_fluid(r, c + 1);
        }
    }
    out
}

/// Residual maps in physical units.
///
/// Stencil derivatives are divided by the pixel size (first order) or its square
/// (second order); the second-order kernel output is multiplied by `-4` to recover the
/// Laplacian. Viscous stresses use the dynamic viscosity `rho * nu`.
pub fn pde_residuals(field: &FlowField, props: FluidProps) -> Result<ResidualMaps> {
    let mask = field.mask();
    for m in [field.vx(), field.vy(), field.p()] {
        if m.dims() != mask.dims() {
            return Err(Error::DimensionMismatch {
                expected: mask.dims(),
                got: m.dims(),
            });
        }
    }
    let h = mask.pixel_size();
    let (rho, mu) = (props.rho, props.mu());
    let (vx, vy, p) = (field.vx(), field.vy(), field.p());
    let dvx_dx = stencil_d1(vx, StencilAxis::X);
    let dvx_dy = stencil_d1(vx, StencilAxis::Y);
    let dvy_dx = stencil_d1(vy, StencilAxis::X);
    let dvy_dy = stencil_d1(vy, StencilAxis::Y);
    let dp_dx = stencil_d1(p, StencilAxis::X);
    let dp_dy = stencil_d1(p, StencilAxis::Y);
    let k2_vx = stencil_d2(vx);
    let k2_vy = stencil_d2(vy);
    let lap_scale = -4.0 / (h * h);

    let interior = fluid_interior(mask);
    let (w, ht) = mask.dims();
    let mut maps = ResidualMaps {
        r_cont: Map2::zeros(w, ht),
        r_momx: Map2::zeros(w, ht),
        r_momy: Map2::zeros(w, ht),
    };
    for r in 0..ht {
        for c in 0..w {
            if !interior[r * w + c] {
                continue;
            }
            let (a, b) = (vx.get(r, c), vy.get(r, c));
            maps.r_cont
                .set(r, c, (dvx_dx.get(r, c) + dvy_dy.get(r, c)) / h);
            let conv_x = rho * (a * dvx_dx.get(r, c) + b * dvx_dy.get(r, c)) / h;
            let conv_y = rho * (a * dvy_dx.get(r, c) + b * dvy_dy.get(r, c)) / h;
            maps.r_momx.set(
                r,
                c,
                conv_x + dp_dx.get(r, c) / h - mu * lap_scale * k2_vx.get(r, c),
            );
            maps.r_momy.set(
                r,
                c,
                conv_y + dp_dy.get(r, c) / h - mu * lap_scale * k2_vy.get(r, c),
            );
        }
    }
    Ok(maps)
}

/// Sums of squared residuals, unweighted.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossParts {
    pub cont: f64,
    pub momx: f64,
    pub momy: f64,
}

impl LossParts {
    pub fn weighted(&self, w: [f64; 3]) -> f64 {
        w[0] * self.cont + w[1] * self.momx + w[2] * self.momy
    }
}

/// Residual loss in scaled variables, with its exact gradient.
///
/// Velocities are divided by `u_ref`, pressure by the viscous scale `mu u_ref / h`, and
/// lengths measured in pixels, so the momentum residual reads
/// `re_h (a d_x a + b d_y a) + d_x q - lap a` with `re_h = rho u_ref h / mu`.
/// The state vector stacks the `a`, `b` and `q` planes.
pub struct ScaledResidual {
    pub width: usize,
    pub height: usize,
    pub re_h: f64,
    pub weights: [f64; 3],
    interior: Vec<usize>,
}

impl ScaledResidual {
    pub fn new(mask: &ChannelMask, re_h: f64, weights: [f64; 3]) -> Self {
        let interior = fluid_interior(mask)
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect();
        ScaledResidual {
            width: mask.width(),
            height: mask.height(),
            re_h,
            weights,
            interior,
        }
    }

    pub fn n_pixels(&self) -> usize {
        self.width * self.height
    }

    /// Residuals at interior pixels, in `interior` order.
    fn residuals(&self, x: &[f64], out: &mut [[f64; 3]]) {
        let n = self.n_pixels();
        let w = self.width;
        let (a, rest) = x.split_at(n);
        let (b, q) = rest.split_at(n);
        for (slot, &i) in out.iter_mut().zip(&self.interior) {
            let dx = |f: &[f64]| 0.5 * (f[i + 1] - f[i - 1]);
            let dy = |f: &[f64]| 0.5 * (f[i + w] - f[i - w]);
            let lap = |f: &[f64]| f[i + 1] + f[i - 1] + f[i + w] + f[i - w] - 4.0 * f[i];
            let (ai, bi) = (a[i], b[i]);
            let (ax, ay, bx, by) = (dx(a), dy(a), dx(b), dy(b));
            slot[0] = ax + by;
            slot[1] = self.re_h * (ai * ax + bi * ay) + dx(q) - lap(a);
            slot[2] = self.re_h * (ai * bx + bi * by) + dy(q) - lap(b);
        }
    }

    pub fn loss(&self, x: &[f64]) -> (f64, LossParts) {
        let mut res = vec![[0.0; 3]; self.interior.len()];
        self.residuals(x, &mut res);
        let mut parts = LossParts::default();
        for r in &res {
            parts.cont += r[0] * r[0];
            parts.momx += r[1] * r[1];
            parts.momy += r[2] * r[2];
        }
        (parts.weighted(self.weights), parts)
    }

    /// Loss and its gradient with respect to every entry of `x`; transposed stencils are
    /// applied by scattering each interior residual onto its neighbors.
    pub fn loss_and_grad(&self, x: &[f64], grad: &mut [f64]) -> (f64, LossParts) {
        let n = self.n_pixels();
        let w = self.width;
        let mut res = vec![[0.0; 3]; self.interior.len()];
        self.residuals(x, &mut res);
        grad.iter_mut().for_each(|g| *g = 0.0);
        let (a, rest) = x.split_at(n);
        let (b, _) = rest.split_at(n);
        let (ga, grest) = grad.split_at_mut(n);
        let (gb, gq) = grest.split_at_mut(n);
        let [wc, wx, wy] = self.weights;
        let re = self.re_h;
        let mut parts = LossParts::default();

        // scatter helpers for D_x^T, D_y^T and Lap^T (Lap is symmetric)
        fn dxt(g: &mut [f64], i: usize, s: f64) {
            g[i + 1] += 0.5 * s;
            g[i - 1] -= 0.5 * s;
        }
        fn dyt(g: &mut [f64], i: usize, w: usize, s: f64) {
            g[i + w] += 0.5 * s;
            g[i - w] -= 0.5 * s;
        }
        fn lapt(g: &mut [f64], i: usize, w: usize, s: f64) {
            g[i + 1] += s;
            g[i - 1] += s;
            g[i + w] += s;
            g[i - w] += s;
            g[i] -= 4.0 * s;
        }

        for (r, &i) in res.iter().zip(&self.interior) {
            parts.cont += r[0] * r[0];
            parts.momx += r[1] * r[1];
            parts.momy += r[2] * r[2];

            let sc = 2.0 * wc * r[0];
            dxt(ga, i, sc);
            dyt(gb, i, w, sc);

            let ax = 0.5 * (a[i + 1] - a[i - 1]);
            let ay = 0.5 * (a[i + w] - a[i - w]);
            let bx = 0.5 * (b[i + 1] - b[i - 1]);
            let by = 0.5 * (b[i + w] - b[i - w]);

            let sx = 2.0 * wx * r[1];
            ga[i] += re * sx * ax;
            dxt(ga, i, re * sx * a[i]);
            dyt(ga, i, w, re * sx * b[i]);
            gb[i] += re * sx * ay;
            lapt(ga, i, w, -sx);
            dxt(gq, i, sx);

            let sy = 2.0 * wy * r[2];
            gb[i] += re * sy * by;
            dxt(gb, i, re * sy * a[i]);
            dyt(gb, i, w, re * sy * b[i]);
            ga[i] += re * sy * bx;
            lapt(gb, i, w, -sy);
            dyt(gq, i, w, sy);
        }
        (parts.weighted(self.weights), parts)
    }
}
