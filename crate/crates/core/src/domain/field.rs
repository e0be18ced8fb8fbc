use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::grid::Map2;
use crate::domain::mask::ChannelMask;
use crate::error::{Error, Result};
use crate::Vec2;

const MAGIC: &[u8; 4] = b"MFN1";

/// Density and kinematic viscosity of the working fluid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluidProps {
    /// kg/m^3
    pub rho: f64,
    /// m^2/s
    pub nu: f64,
}

impl FluidProps {
    pub fn new(rho: f64, nu: f64) -> Result<Self> {
        let props = FluidProps { rho, nu };
        props.validate()?;
        Ok(props)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho.is_finite() && self.rho > 0.0 && self.nu.is_finite() && self.nu > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "fluid properties must be positive (rho = {}, nu = {})",
                self.rho, self.nu
            )));
        }
        Ok(())
    }

    /// Dynamic viscosity `rho * nu` in Pa s.
    pub fn mu(&self) -> f64 {
        self.rho * self.nu
    }
}

impl Default for FluidProps {
    /// Water at room temperature.
    fn default() -> Self {
        FluidProps {
            rho: 1000.0,
            nu: 1e-6,
        }
    }
}

/// Collocated per-pixel velocity (m/s) and pressure (Pa) over a channel mask.
#[derive(Clone, Debug)]
pub struct FlowField {
    vx: Map2,
    vy: Map2,
    p: Map2,
    mask: Arc<ChannelMask>,
    props: FluidProps,
}

impl FlowField {
    /// Velocities on SOLID pixels are forced to zero.
    pub fn new(
        mask: Arc<ChannelMask>,
        props: FluidProps,
        mut vx: Map2,
        mut vy: Map2,
        p: Map2,
    ) -> Result<Self> {
        let want = mask.dims();
        for m in [&vx, &vy, &p] {
            if m.dims() != want {
                return Err(Error::DimensionMismatch {
                    expected: want,
                    got: m.dims(),
                });
            }
        }
        if !(vx.all_finite() && vy.all_finite() && p.all_finite()) {
            return Err(Error::NonFinite(
                "flow field contains non-finite values".into(),
            ));
        }
        for r in 0..mask.height() {
            for c in 0..mask.width() {
                if !mask.is_fluid(r, c) {
                    vx.set(r, c, 0.0);
                    vy.set(r, c, 0.0);
                }
            }
        }
        Ok(FlowField {
            vx,
            vy,
            p,
            mask,
            props,
        })
    }

    /// Still fluid at zero pressure.
    pub fn zeros(mask: Arc<ChannelMask>, props: FluidProps) -> Self {
        let (w, h) = mask.dims();
        FlowField {
            vx: Map2::zeros(w, h),
            vy: Map2::zeros(w, h),
            p: Map2::zeros(w, h),
            mask,
            props,
        }
    }

    /// Field sampled from a closure `(x, y) -> (vx, vy, p)` at pixel centers.
    pub fn from_fn(
        mask: Arc<ChannelMask>,
        props: FluidProps,
        f: impl Fn(f64, f64) -> (f64, f64, f64),
    ) -> Result<Self> {
        let (w, h) = mask.dims();
        let mut vx = Map2::zeros(w, h);
        let mut vy = Map2::zeros(w, h);
        let mut p = Map2::zeros(w, h);
        for r in 0..h {
            for c in 0..w {
                let pos = mask.pixel_center(r, c);
                let (a, b, q) = f(pos.x, pos.y);
                vx.set(r, c, a);
                vy.set(r, c, b);
                p.set(r, c, q);
            }
        }
        FlowField::new(mask, props, vx, vy, p)
    }

    pub fn vx(&self) -> &Map2 {
        &self.vx
    }

    pub fn vy(&self) -> &Map2 {
        &self.vy
    }

    pub fn p(&self) -> &Map2 {
        &self.p
    }

    pub fn mask(&self) -> &ChannelMask {
        &self.mask
    }

    pub fn mask_arc(&self) -> &Arc<ChannelMask> {
        &self.mask
    }

    pub fn props(&self) -> FluidProps {
        self.props
    }

    pub fn with_props(mut self, props: FluidProps) -> Self {
        self.props = props;
        self
    }

    pub fn into_maps(self) -> (Map2, Map2, Map2) {
        (self.vx, self.vy, self.p)
    }

    pub fn velocity_at_pixel(&self, r: usize, c: usize) -> Vec2 {
        Vec2::new(self.vx.get(r, c), self.vy.get(r, c))
    }

    /// Bilinear interpolation of the velocity over the four enclosing pixel centers.
    ///
    /// Solid pixels hold zero velocity and contribute it. Within half a pixel of the
    /// raster border the nearest row/column of centers is used.
    pub fn sample_velocity(&self, pos: Vec2) -> Result<Vec2> {
        let (ex, ey) = self.mask.extent();
        if !(pos.x >= 0.0 && pos.y >= 0.0 && pos.x <= ex && pos.y <= ey) {
            return Err(Error::OutOfBounds { x: pos.x, y: pos.y });
        }
        let h = self.mask.pixel_size();
        let (w, ht) = self.mask.dims();
        let gx = (pos.x / h - 0.5).clamp(0.0, (w - 1) as f64);
        let gy = (pos.y / h - 0.5).clamp(0.0, (ht - 1) as f64);
        let c0 = (gx.floor() as usize).min(w - 2);
        let r0 = (gy.floor() as usize).min(ht - 2);
        let tx = gx - c0 as f64;
        let ty = gy - r0 as f64;
        let lerp = |m: &Map2| {
            let top = m.get(r0, c0) * (1.0 - tx) + m.get(r0, c0 + 1) * tx;
            let bot = m.get(r0 + 1, c0) * (1.0 - tx) + m.get(r0 + 1, c0 + 1) * tx;
            top * (1.0 - ty) + bot * ty
        };
        Ok(Vec2::new(lerp(&self.vx), lerp(&self.vy)))
    }

    /// Serializes into the MFN1 layout: magic, LE u32 width and height, the vx, vy
    /// and p planes row-major as LE f64, then the pixel size as LE f64.
    pub fn to_bytes(&self) -> Vec<u8> {
        let (w, h) = self.mask.dims();
        let mut out = Vec::with_capacity(4 + 8 + 3 * 8 * w * h + 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(w as u32).to_le_bytes());
        out.extend_from_slice(&(h as u32).to_le_bytes());
        for plane in [&self.vx, &self.vy, &self.p] {
            for v in plane.as_slice() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out.extend_from_slice(&self.mask.pixel_size().to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8], mask: Arc<ChannelMask>, props: FluidProps) -> Result<Self> {
        if bytes.len() < 12 || &bytes[..4] != MAGIC {
            return Err(Error::BadFormat("missing MFN1 header".into()));
        }
        let w = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let h = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let n = w
            .checked_mul(h)
            .ok_or_else(|| Error::BadFormat("dimensions overflow".into()))?;
        let expected_len = 12 + 3 * 8 * n + 8;
        if bytes.len() != expected_len {
            return Err(Error::BadFormat(format!(
                "expected {expected_len} bytes for a {w}x{h} field, got {}",
                bytes.len()
            )));
        }
        if (w, h) != mask.dims() {
            return Err(Error::DimensionMismatch {
                expected: mask.dims(),
                got: (w, h),
            });
        }
        let read_f64 = |off: usize| f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
        let plane = |k: usize| {
            let base = 12 + k * 8 * n;
            Map2::from_vec(w, h, (0..n).map(|i| read_f64(base + 8 * i)).collect())
        };
        let pixel_size = read_f64(12 + 3 * 8 * n);
        if pixel_size.to_bits() != mask.pixel_size().to_bits() {
            return Err(Error::BadFormat(format!(
                "field pixel size {pixel_size} does not match mask pixel size {}",
                mask.pixel_size()
            )));
        }
        let (vx, vy, p) = (plane(0), plane(1), plane(2));
        for r in 0..h {
            for c in 0..w {
                if !mask.is_fluid(r, c) && (vx.get(r, c) != 0.0 || vy.get(r, c) != 0.0) {
                    return Err(Error::BadFormat(format!(
                        "nonzero velocity on solid pixel (row {r}, col {c})"
                    )));
                }
            }
        }
        FlowField::new(mask, props, vx, vy, p)
    }

    pub fn export(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn import(
        path: impl AsRef<Path>,
        mask: Arc<ChannelMask>,
        props: FluidProps,
    ) -> Result<Self> {
        let bytes = fs::read(path)?;
        FlowField::from_bytes(&bytes, mask, props)
    }

    /// Bitwise equality of the three maps.
    pub fn maps_bitwise_eq(&self, other: &FlowField) -> bool {
        self.vx.bitwise_eq(&other.vx)
            && self.vy.bitwise_eq(&other.vy)
            && self.p.bitwise_eq(&other.p)
    }

    /// Root-mean-square velocity-vector difference over FLUID pixels.
    pub fn velocity_rmse(&self, other: &FlowField) -> f64 {
        let mut sum = 0.0;
        let mut n = 0usize;
        for r in 0..self.mask.height() {
            for c in 0..self.mask.width() {
                if self.mask.is_fluid(r, c) {
                    let d = self.velocity_at_pixel(r, c) - other.velocity_at_pixel(r, c);
                    sum += d.norm_squared();
                    n += 1;
                }
            }
        }
        if n == 0 {
            0.0
        } else {
            (sum / n as f64).sqrt()
        }
    }
}
