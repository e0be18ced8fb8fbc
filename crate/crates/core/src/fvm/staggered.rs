//! MAC-grid state and the finite-volume assembly shared by the solver and the residual check.
//!
//! `u` lives on vertical faces (`height x (width + 1)`), `v` on horizontal faces
//! (`(height + 1) x width`), pressure at pixel centers. Both momentum equations are
//! assembled by one routine through [`AxisGrid`], which presents either velocity
//! component as the "normal" one on a possibly transposed grid.

use crate::domain::mask::{ChannelMask, Edge};
use crate::fvm::linsolve::FivePoint;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FaceKind {
    Active,
    Wall,
    Inlet,
    Outlet,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// Logical view of one velocity component: `i` runs across the flow direction of the
/// component, `j` along it. Normal faces are `(i, j)` with `j` in `0..=nj`; tangential
/// faces of the other component are `(i_f, j)` with `i_f` in `0..=ni`.
#[derive(Clone, Copy, Debug)]
pub struct AxisGrid {
    pub axis: Axis,
    pub ni: usize,
    pub nj: usize,
    width: usize,
}

impl AxisGrid {
    pub fn new(axis: Axis, width: usize, height: usize) -> Self {
        let (ni, nj) = match axis {
            Axis::X => (height, width),
            Axis::Y => (width, height),
        };
        AxisGrid {
            axis,
            ni,
            nj,
            width,
        }
    }

    #[inline]
    pub fn normal(&self, i: usize, j: usize) -> usize {
        match self.axis {
            Axis::X => i * (self.width + 1) + j,
            Axis::Y => j * self.width + i,
        }
    }

    #[inline]
    pub fn tangent(&self, i_f: usize, j: usize) -> usize {
        match self.axis {
            Axis::X => i_f * self.width + j,
            Axis::Y => j * (self.width + 1) + i_f,
        }
    }

    /// Pixel `(row, col)` of logical cell `(i, j)`.
    #[inline]
    pub fn cell(&self, i: usize, j: usize) -> (usize, usize) {
        match self.axis {
            Axis::X => (i, j),
            Axis::Y => (j, i),
        }
    }

    #[inline]
    pub fn fluid(&self, mask: &ChannelMask, i: isize, j: isize) -> bool {
        match self.axis {
            Axis::X => mask.is_fluid_at(i, j),
            Axis::Y => mask.is_fluid_at(j, i),
        }
    }
}

/// Face index, axis and outward sign of the border face of a boundary pixel.
pub fn border_face(edge: Edge, r: usize, c: usize, w: usize) -> (Axis, usize, f64) {
    match edge {
        Edge::Left => (Axis::X, r * (w + 1), -1.0),
        Edge::Right => (Axis::X, r * (w + 1) + w, 1.0),
        Edge::Top => (Axis::Y, c, -1.0),
        Edge::Bottom => (Axis::Y, (r + 1) * w + c, 1.0),
    }
}

#[derive(Clone, Debug)]
pub struct Staggered {
    pub width: usize,
    pub height: usize,
    pub h: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub p: Vec<f64>,
    pub ukind: Vec<FaceKind>,
    pub vkind: Vec<FaceKind>,
    /// `(axis, face index, outward sign)` of every outlet face.
    pub outlet_faces: Vec<(Axis, usize, f64)>,
    /// Volumetric inflow per unit depth, m^2/s.
    pub inflow: f64,
}

/// Momentum equations of one velocity component over its active faces.
pub struct MomentumSystem {
    pub faces: Vec<usize>,
    /// Unrelaxed central coefficient of each unknown.
    pub a_p: Vec<f64>,
    /// Under-relaxed system, ready to solve.
    pub system: FivePoint,
    /// Unrelaxed residual `a_p n - sum(a_nb n_nb) - b` at the current state.
    pub residual: Vec<f64>,
}

impl Staggered {
    pub fn new(mask: &ChannelMask) -> Self {
        let (w, h) = mask.dims();
        let mut st = Staggered {
            width: w,
            height: h,
            h: mask.pixel_size(),
            u: vec![0.0; h * (w + 1)],
            v: vec![0.0; (h + 1) * w],
            p: vec![0.0; h * w],
            ukind: vec![FaceKind::Wall; h * (w + 1)],
            vkind: vec![FaceKind::Wall; (h + 1) * w],
            outlet_faces: Vec::new(),
            inflow: 0.0,
        };
        for axis in [Axis::X, Axis::Y] {
            let g = AxisGrid::new(axis, w, h);
            for i in 0..g.ni {
                for j in 1..g.nj {
                    let (ii, jj) = (i as isize, j as isize);
                    if g.fluid(mask, ii, jj - 1) && g.fluid(mask, ii, jj) {
                        *st.kind_mut(axis, g.normal(i, j)) = FaceKind::Active;
                    }
                }
            }
        }
        for (&(r, c), speed) in mask.inlet().pixels.iter().zip(mask.inlet_profile()) {
            let (axis, face, sign) = border_face(mask.inlet().edge, r, c, w);
            *st.kind_mut(axis, face) = FaceKind::Inlet;
            *st.value_mut(axis, face) = -sign * speed;
            st.inflow += speed * st.h;
        }
        for port in mask.outlets() {
            for &(r, c) in &port.pixels {
                let (axis, face, sign) = border_face(port.edge, r, c, w);
                *st.kind_mut(axis, face) = FaceKind::Outlet;
                st.outlet_faces.push((axis, face, sign));
            }
        }
        st
    }

    pub fn grid(&self, axis: Axis) -> AxisGrid {
        AxisGrid::new(axis, self.width, self.height)
    }

    #[inline]
    pub fn kind(&self, axis: Axis, face: usize) -> FaceKind {
        match axis {
            Axis::X => self.ukind[face],
            Axis::Y => self.vkind[face],
        }
    }

    fn kind_mut(&mut self, axis: Axis, face: usize) -> &mut FaceKind {
        match axis {
            Axis::X => &mut self.ukind[face],
            Axis::Y => &mut self.vkind[face],
        }
    }

    #[inline]
    pub fn value(&self, axis: Axis, face: usize) -> f64 {
        match axis {
            Axis::X => self.u[face],
            Axis::Y => self.v[face],
        }
    }

    #[inline]
    pub fn value_mut(&mut self, axis: Axis, face: usize) -> &mut f64 {
        match axis {
            Axis::X => &mut self.u[face],
            Axis::Y => &mut self.v[face],
        }
    }

    /// Index offset between consecutive normal faces along the component direction.
    fn along_stride(&self, axis: Axis) -> usize {
        match axis {
            Axis::X => 1,
            Axis::Y => self.width,
        }
    }

    /// Zero-gradient extrapolation onto the outlet faces followed by a uniform rescale
    /// that makes the total outflow equal the inflow.
    pub fn update_outlets(&mut self) {
        let mut outflow = 0.0;
        for k in 0..self.outlet_faces.len() {
            let (axis, face, sign) = self.outlet_faces[k];
            let step = self.along_stride(axis);
            let inner = if sign > 0.0 { face - step } else { face + step };
            let val = match self.kind(axis, inner) {
                FaceKind::Wall => 0.0,
                _ => self.value(axis, inner),
            };
            *self.value_mut(axis, face) = val;
            outflow += sign * val * self.h;
        }
        let uniform = outflow <= 1e-12 * self.inflow;
        let n_out = self.outlet_faces.len() as f64;
        let (inflow, h) = (self.inflow, self.h);
        for k in 0..self.outlet_faces.len() {
            let (axis, face, sign) = self.outlet_faces[k];
            let val = self.value_mut(axis, face);
            *val = if uniform {
                sign * inflow / (n_out * h)
            } else {
                *val * inflow / outflow
            };
        }
    }

    /// Net volumetric outflow of pixel `(r, c)` per unit depth.
    #[inline]
    pub fn imbalance(&self, r: usize, c: usize) -> f64 {
        let w = self.width;
        self.h
            * (self.u[r * (w + 1) + c + 1] - self.u[r * (w + 1) + c] + self.v[(r + 1) * w + c]
                - self.v[r * w + c])
    }

    /// Assembles the momentum equations of `axis` with first-order upwind convection,
    /// central diffusion and the staggered pressure gradient. `relax` under-relaxes the
    /// returned system; the residual is always reported unrelaxed.
    pub fn assemble_momentum(
        &self,
        mask: &ChannelMask,
        axis: Axis,
        rho: f64,
        mu: f64,
        relax: f64,
        central: bool,
    ) -> MomentumSystem {
        let g = self.grid(axis);
        let (n, t) = match axis {
            Axis::X => (&self.u, &self.v),
            Axis::Y => (&self.v, &self.u),
        };
        let kinds = match axis {
            Axis::X => &self.ukind,
            Axis::Y => &self.vkind,
        };
        let h = self.h;

        let mut faces = Vec::new();
        let mut unknown_of = vec![usize::MAX; n.len()];
        for i in 0..g.ni {
            for j in 1..g.nj {
                let f = g.normal(i, j);
                if kinds[f] == FaceKind::Active {
                    unknown_of[f] = faces.len();
                    faces.push(f);
                }
            }
        }

        let mut a_p_all = Vec::with_capacity(faces.len());
        let mut system = FivePoint::with_capacity(faces.len());
        let mut residual = Vec::with_capacity(faces.len());
        for i in 0..g.ni {
            for j in 1..g.nj {
                let f = g.normal(i, j);
                if kinds[f] != FaceKind::Active {
                    continue;
                }
                let nc = n[f];
                let fe = g.normal(i, j + 1);
                let fw = g.normal(i, j - 1);
                let flux_e = rho * h * 0.5 * (nc + n[fe]);
                let flux_w = rho * h * 0.5 * (n[fw] + nc);
                let flux_lo = rho * h * 0.5 * (t[g.tangent(i, j - 1)] + t[g.tangent(i, j)]);
                let flux_hi = rho * h * 0.5 * (t[g.tangent(i + 1, j - 1)] + t[g.tangent(i + 1, j)]);

                // across-flow neighbors: a parallel face, or a wall at h/2 or h
                let across = |di: isize| -> (Option<usize>, f64) {
                    let ii = i as isize + di;
                    let (jj, jm) = (j as isize, j as isize - 1);
                    let a = g.fluid(mask, ii, jm);
                    let b = g.fluid(mask, ii, jj);
                    match (a, b) {
                        (true, true) => (Some(g.normal(ii as usize, j)), mu),
                        (false, false) => (None, 2.0 * mu),
                        _ => (None, mu),
                    }
                };
                let (lo_face, d_lo) = across(-1);
                let (hi_face, d_hi) = across(1);

                let a_e = mu + (-flux_e).max(0.0);
                let a_w = mu + flux_w.max(0.0);
                let a_lo = d_lo + flux_lo.max(0.0);
                let a_hi = d_hi + (-flux_hi).max(0.0);
                let net_out = flux_e - flux_w + flux_hi - flux_lo;
                let a_p = a_e + a_w + a_lo + a_hi + net_out.max(0.0);

                let (r0, c0) = g.cell(i, j - 1);
                let (r1, c1) = g.cell(i, j);
                let b_press = h * (self.p[r0 * self.width + c0] - self.p[r1 * self.width + c1]);

                // deferred correction: upwind implicitly, central minus upwind explicitly
                let mut b_dc = 0.0;
                if central {
                    for (face, out_flux) in [
                        (Some(fe), flux_e),
                        (Some(fw), -flux_w),
                        (lo_face, -flux_lo),
                        (hi_face, flux_hi),
                    ] {
                        if let Some(ff) = face {
                            let upwind = if out_flux > 0.0 { nc } else { n[ff] };
                            b_dc -= out_flux * (0.5 * (nc + n[ff]) - upwind);
                        }
                    }
                }

                let mut nbrs: [(usize, f64); 4] = [(0, 0.0); 4];
                let mut count = 0;
                let mut b_fixed = 0.0;
                let mut sum_nb = 0.0;
                for (face, a) in [
                    (Some(fe), a_e),
                    (Some(fw), a_w),
                    (lo_face, a_lo),
                    (hi_face, a_hi),
                ] {
                    let val = face.map_or(0.0, |ff| n[ff]);
                    sum_nb += a * val;
                    match face {
                        Some(ff) if kinds[ff] == FaceKind::Active => {
                            nbrs[count] = (unknown_of[ff], a);
                            count += 1;
                        }
                        _ => b_fixed += a * val,
                    }
                }
                residual.push(a_p * nc - sum_nb - b_press - b_dc);

                let a_p_relaxed = a_p / relax;
                let rhs = b_fixed + b_press + b_dc + (1.0 - relax) * a_p_relaxed * nc;
                system.push_row(a_p_relaxed, &nbrs[..count], rhs);
                a_p_all.push(a_p);
            }
        }
        MomentumSystem {
            faces,
            a_p: a_p_all,
            system,
            residual,
        }
    }

    /// Pressure-correction system over fluid cells. `d_u`, `d_v` hold the face
    /// coefficients `h / a_p` (zero on non-active faces). Returns the system, the cell of
    /// each unknown and the unknown index of each cell (`usize::MAX` when held at zero).
    pub fn assemble_pressure_correction(
        &self,
        mask: &ChannelMask,
        d_u: &[f64],
        d_v: &[f64],
    ) -> (FivePoint, Vec<usize>, Vec<usize>) {
        let (w, hgt) = (self.width, self.height);
        let pin = mask.pressure_pin();
        let h = self.h;
        let mut unknown_of = vec![usize::MAX; w * hgt];
        let mut cells = Vec::new();
        for r in 0..hgt {
            for c in 0..w {
                if !mask.is_fluid(r, c) || (r, c) == pin {
                    continue;
                }
                let has_active = self.ukind[r * (w + 1) + c] == FaceKind::Active
                    || self.ukind[r * (w + 1) + c + 1] == FaceKind::Active
                    || self.vkind[r * w + c] == FaceKind::Active
                    || self.vkind[(r + 1) * w + c] == FaceKind::Active;
                if has_active {
                    unknown_of[r * w + c] = cells.len();
                    cells.push(r * w + c);
                }
            }
        }
        let mut sys = FivePoint::with_capacity(cells.len());
        for &cell in &cells {
            let (r, c) = (cell / w, cell % w);
            let links = [
                (
                    self.ukind[r * (w + 1) + c],
                    d_u[r * (w + 1) + c],
                    r as isize,
                    c as isize - 1,
                ),
                (
                    self.ukind[r * (w + 1) + c + 1],
                    d_u[r * (w + 1) + c + 1],
                    r as isize,
                    c as isize + 1,
                ),
                (
                    self.vkind[r * w + c],
                    d_v[r * w + c],
                    r as isize - 1,
                    c as isize,
                ),
                (
                    self.vkind[(r + 1) * w + c],
                    d_v[(r + 1) * w + c],
                    r as isize + 1,
                    c as isize,
                ),
            ];
            let mut diag = 0.0;
            let mut nbrs: [(usize, f64); 4] = [(0, 0.0); 4];
            let mut count = 0;
            for (kind, d, nr, nc) in links {
                if kind != FaceKind::Active {
                    continue;
                }
                let a = h * d;
                diag += a;
                let k = unknown_of[nr as usize * w + nc as usize];
                if k != usize::MAX {
                    nbrs[count] = (k, a);
                    count += 1;
                }
            }
            sys.push_row(diag, &nbrs[..count], -self.imbalance(r, c));
        }
        (sys, cells, unknown_of)
    }
}
