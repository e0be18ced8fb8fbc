use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::domain::pgm;
use crate::error::{Error, Result};
use crate::Vec2;

/// Smallest raster accepted along either axis.
pub const MIN_DIM: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Cell {
    Fluid,
    Solid,
}

/// Raster border. `Top` is row 0; rows grow toward `Bottom` and so does `y`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Edge {
    Left,
    Right,
    Top,
    Bottom,
}

impl Edge {
    /// Unit vector pointing from this border into the domain.
    pub fn inward(self) -> Vec2 {
        match self {
            Edge::Left => Vec2::new(1.0, 0.0),
            Edge::Right => Vec2::new(-1.0, 0.0),
            Edge::Top => Vec2::new(0.0, 1.0),
            Edge::Bottom => Vec2::new(0.0, -1.0),
        }
    }
}

/// Inclusive run of pixels along one border.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BorderSegment {
    pub edge: Edge,
    pub from: usize,
    pub to: usize,
}

impl BorderSegment {
    pub fn new(edge: Edge, from: usize, to: usize) -> Self {
        BorderSegment { edge, from, to }
    }
}

/// An annotated inlet or outlet: the border it sits on and its pixels, ordered along the edge.
#[derive(Clone, Debug, PartialEq)]
pub struct Port {
    pub edge: Edge,
    pub pixels: Vec<(usize, usize)>,
}

/// Binary fluid/solid raster with inlet and outlet annotations.
///
/// Pixel `(r, c)` has its center at `((c + 0.5) * pixel_size, (r + 0.5) * pixel_size)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelMask {
    width: usize,
    height: usize,
    cells: Vec<Cell>,
    inlet: Port,
    v_inlet: f64,
    outlets: Vec<Port>,
    pixel_size: f64,
}

/// JSON sidecar accompanying a PGM mask.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub pixel_size_m: f64,
    pub inlet: InletSpec,
    pub outlet: OutletSpec,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InletSpec {
    pub edge: Edge,
    pub from: usize,
    pub to: usize,
    pub v_inlet_mps: f64,
}

impl InletSpec {
    pub fn segment(&self) -> BorderSegment {
        BorderSegment::new(self.edge, self.from, self.to)
    }
}

/// One outlet segment or several (branched channels).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OutletSpec {
    One(BorderSegment),
    Many(Vec<BorderSegment>),
}

impl OutletSpec {
    pub fn segments(&self) -> Vec<BorderSegment> {
        match self {
            OutletSpec::One(s) => vec![*s],
            OutletSpec::Many(v) => v.clone(),
        }
    }
}

impl ChannelMask {
    /// Validates geometry and annotations, including inlet-to-outlet connectivity.
    pub fn new(
        width: usize,
        height: usize,
        cells: Vec<Cell>,
        pixel_size: f64,
        inlet: InletSpec,
        outlets: &[BorderSegment],
    ) -> Result<Self> {
        if width < MIN_DIM || height < MIN_DIM {
            return Err(Error::BadFormat(format!(
                "raster {width}x{height} is smaller than {MIN_DIM}x{MIN_DIM}"
            )));
        }
        if cells.len() != width * height {
            return Err(Error::BadFormat(format!(
                "expected {} cells, got {}",
                width * height,
                cells.len()
            )));
        }
        if !(pixel_size.is_finite() && pixel_size > 0.0) {
            return Err(Error::BadAnnotation(format!(
                "pixel size must be positive, got {pixel_size}"
            )));
        }
        if !(inlet.v_inlet_mps.is_finite() && inlet.v_inlet_mps >= 0.0) {
            return Err(Error::BadAnnotation(format!(
                "inlet speed must be finite and nonnegative, got {}",
                inlet.v_inlet_mps
            )));
        }
        if outlets.is_empty() {
            return Err(Error::BadAnnotation(
                "at least one outlet is required".into(),
            ));
        }

        let mut mask = ChannelMask {
            width,
            height,
            cells,
            inlet: Port {
                edge: inlet.edge,
                pixels: Vec::new(),
            },
            v_inlet: inlet.v_inlet_mps,
            outlets: Vec::new(),
            pixel_size,
        };
        mask.inlet = mask.port_from(inlet.segment(), "inlet")?;
        let mut taken: Vec<(usize, usize)> = mask.inlet.pixels.clone();
        for seg in outlets {
            let port = mask.port_from(*seg, "outlet")?;
            if port.pixels.iter().any(|p| taken.contains(p)) {
                return Err(Error::BadAnnotation(
                    "inlet and outlet segments overlap".into(),
                ));
            }
            taken.extend_from_slice(&port.pixels);
            mask.outlets.push(port);
        }

        let reach = mask.flood_from_inlet();
        for port in &mask.outlets {
            let connected = port.pixels.iter().any(|&(r, c)| reach[r * width + c]);
            if !connected {
                return Err(Error::NotConnected);
            }
        }
        Ok(mask)
    }

    /// Parses a binary PGM raster plus its JSON sidecar.
    pub fn load(pgm_bytes: &[u8], sidecar: &Sidecar) -> Result<Self> {
        let (width, height, cells) = pgm::decode_mask(pgm_bytes)?;
        ChannelMask::new(
            width,
            height,
            cells,
            sidecar.pixel_size_m,
            sidecar.inlet,
            &sidecar.outlet.segments(),
        )
    }

    /// Sidecar describing this mask's annotations, so that `load(to_pgm(), sidecar())`
    /// rebuilds it.
    pub fn sidecar(&self) -> Sidecar {
        let seg = |p: &Port| {
            let along = |&(r, c): &(usize, usize)| match p.edge {
                Edge::Left | Edge::Right => r,
                Edge::Top | Edge::Bottom => c,
            };
            BorderSegment::new(p.edge, along(&p.pixels[0]), along(p.pixels.last().unwrap()))
        };
        let inlet = seg(&self.inlet);
        let outlets: Vec<_> = self.outlets.iter().map(seg).collect();
        Sidecar {
            pixel_size_m: self.pixel_size,
            inlet: InletSpec {
                edge: inlet.edge,
                from: inlet.from,
                to: inlet.to,
                v_inlet_mps: self.v_inlet,
            },
            outlet: if outlets.len() == 1 {
                OutletSpec::One(outlets[0])
            } else {
                OutletSpec::Many(outlets)
            },
        }
    }

    fn port_from(&self, seg: BorderSegment, what: &str) -> Result<Port> {
        let len = match seg.edge {
            Edge::Left | Edge::Right => self.height,
            Edge::Top | Edge::Bottom => self.width,
        };
        if seg.from > seg.to || seg.to >= len {
            return Err(Error::BadAnnotation(format!(
                "{what} segment {}..={} does not fit an edge of length {len}",
                seg.from, seg.to
            )));
        }
        let pixels: Vec<_> = (seg.from..=seg.to)
            .map(|k| match seg.edge {
                Edge::Left => (k, 0),
                Edge::Right => (k, self.width - 1),
                Edge::Top => (0, k),
                Edge::Bottom => (self.height - 1, k),
            })
            .collect();
        if let Some(&(r, c)) = pixels.iter().find(|&&(r, c)| !self.is_fluid(r, c)) {
            return Err(Error::BadAnnotation(format!(
                "{what} pixel (row {r}, col {c}) is SOLID"
            )));
        }
        Ok(Port {
            edge: seg.edge,
            pixels,
        })
    }

    /// 4-connected flood fill over FLUID starting at the inlet pixels.
    pub fn flood_from_inlet(&self) -> Vec<bool> {
        let mut seen = vec![false; self.width * self.height];
        let mut queue = VecDeque::new();
        for &(r, c) in &self.inlet.pixels {
            if !seen[r * self.width + c] {
                seen[r * self.width + c] = true;
                queue.push_back((r, c));
            }
        }
        while let Some((r, c)) = queue.pop_front() {
            for (nr, nc) in self.neighbors4(r, c) {
                let i = nr * self.width + nc;
                if !seen[i] && self.cells[i] == Cell::Fluid {
                    seen[i] = true;
                    queue.push_back((nr, nc));
                }
            }
        }
        seen
    }

    pub fn neighbors4(&self, r: usize, c: usize) -> impl Iterator<Item = (usize, usize)> {
        let (w, h) = (self.width, self.height);
        [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)]
            .into_iter()
            .filter_map(move |(dr, dc)| {
                let nr = r as isize + dr;
                let nc = c as isize + dc;
                (nr >= 0 && nc >= 0 && (nr as usize) < h && (nc as usize) < w)
                    .then_some((nr as usize, nc as usize))
            })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn pixel_size(&self) -> f64 {
        self.pixel_size
    }

    #[inline]
    pub fn v_inlet(&self) -> f64 {
        self.v_inlet
    }

    pub fn inlet(&self) -> &Port {
        &self.inlet
    }

    pub fn outlets(&self) -> &[Port] {
        &self.outlets
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    #[inline]
    pub fn cell(&self, r: usize, c: usize) -> Cell {
        self.cells[r * self.width + c]
    }

    #[inline]
    pub fn is_fluid(&self, r: usize, c: usize) -> bool {
        self.cells[r * self.width + c] == Cell::Fluid
    }

    /// Like [`is_fluid`](Self::is_fluid) but treats anything outside the raster as solid.
    #[inline]
    pub fn is_fluid_at(&self, r: isize, c: isize) -> bool {
        r >= 0
            && c >= 0
            && (r as usize) < self.height
            && (c as usize) < self.width
            && self.is_fluid(r as usize, c as usize)
    }

    pub fn fluid_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c == Cell::Fluid).count()
    }

    pub fn pixel_center(&self, r: usize, c: usize) -> Vec2 {
        Vec2::new(
            (c as f64 + 0.5) * self.pixel_size,
            (r as f64 + 0.5) * self.pixel_size,
        )
    }

    /// Pixel containing `pos`, or `None` outside the raster.
    pub fn pixel_at(&self, pos: Vec2) -> Option<(usize, usize)> {
        let gx = pos.x / self.pixel_size;
        let gy = pos.y / self.pixel_size;
        if !(gx >= 0.0 && gy >= 0.0 && gx < self.width as f64 && gy < self.height as f64) {
            return None;
        }
        Some((gy as usize, gx as usize))
    }

    pub fn is_fluid_pos(&self, pos: Vec2) -> bool {
        self.pixel_at(pos)
            .map(|(r, c)| self.is_fluid(r, c))
            .unwrap_or(false)
    }

    /// Physical extent `(width, height)` in meters.
    pub fn extent(&self) -> (f64, f64) {
        (
            self.width as f64 * self.pixel_size,
            self.height as f64 * self.pixel_size,
        )
    }

    /// Outlet cell whose pressure is held at the reference value 0.
    pub fn pressure_pin(&self) -> (usize, usize) {
        let port = &self.outlets[0];
        port.pixels[port.pixels.len() / 2]
    }

    /// Inward normal speeds over the inlet pixels: a parabola vanishing at the segment
    /// ends, scaled so the discrete mean equals `v_inlet`.
    pub fn inlet_profile(&self) -> Vec<f64> {
        let n = self.inlet.pixels.len();
        let raw: Vec<f64> = (0..n)
            .map(|k| {
                let s = (k as f64 + 0.5) / n as f64;
                s * (1.0 - s)
            })
            .collect();
        let mean = raw.iter().sum::<f64>() / n as f64;
        raw.into_iter().map(|w| w / mean * self.v_inlet).collect()
    }

    /// Writes the raster as binary PGM (0 = solid, 255 = fluid).
    pub fn to_pgm(&self) -> Vec<u8> {
        pgm::encode_mask(self.width, self.height, &self.cells)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn open_box(w: usize, h: usize) -> ChannelMask {
        ChannelMask::new(
            w,
            h,
            vec![Cell::Fluid; w * h],
            1e-5,
            InletSpec {
                edge: Edge::Left,
                from: 0,
                to: h - 1,
                v_inlet_mps: 1e-3,
            },
            &[BorderSegment::new(Edge::Right, 0, h - 1)],
        )
        .unwrap()
    }

    #[test]
    fn open_box_is_valid() {
        let m = open_box(128, 128);
        assert_eq!(m.fluid_count(), 16384);
        assert_eq!(m.inlet().pixels.len(), 128);
    }

    #[test]
    fn separating_band_is_not_connected() {
        let (w, h) = (32, 16);
        let mut cells = vec![Cell::Fluid; w * h];
        for r in 0..h {
            cells[r * w + 15] = Cell::Solid;
        }
        let err = ChannelMask::new(
            w,
            h,
            cells,
            1e-5,
            InletSpec {
                edge: Edge::Left,
                from: 0,
                to: h - 1,
                v_inlet_mps: 1e-3,
            },
            &[BorderSegment::new(Edge::Right, 0, h - 1)],
        )
        .unwrap_err();
        assert!(matches!(err, Error::NotConnected));
    }

    #[test]
    fn solid_inlet_pixel_is_bad_annotation() {
        let (w, h) = (16, 16);
        let mut cells = vec![Cell::Fluid; w * h];
        cells[0] = Cell::Solid;
        let err = ChannelMask::new(
            w,
            h,
            cells,
            1e-5,
            InletSpec {
                edge: Edge::Left,
                from: 0,
                to: 3,
                v_inlet_mps: 1e-3,
            },
            &[BorderSegment::new(Edge::Right, 0, 3)],
        )
        .unwrap_err();
        assert!(matches!(err, Error::BadAnnotation(_)));
    }

    #[test]
    fn tiny_raster_is_rejected() {
        let err = ChannelMask::new(
            7,
            16,
            vec![Cell::Fluid; 7 * 16],
            1e-5,
            InletSpec {
                edge: Edge::Left,
                from: 0,
                to: 3,
                v_inlet_mps: 1e-3,
            },
            &[BorderSegment::new(Edge::Right, 0, 3)],
        )
        .unwrap_err();
        assert!(matches!(err, Error::BadFormat(_)));
    }

    #[test]
    fn inlet_profile_has_requested_mean() {
        let m = open_box(16, 12);
        let prof = m.inlet_profile();
        let mean = prof.iter().sum::<f64>() / prof.len() as f64;
        assert!((mean - 1e-3).abs() < 1e-15);
        assert!(prof[0] < prof[6] && prof[11] < prof[6]);
    }

    #[test]
    fn pixel_lookup_round_trips_centers() {
        let m = open_box(16, 12);
        assert_eq!(m.pixel_at(m.pixel_center(3, 7)), Some((3, 7)));
        assert_eq!(m.pixel_at(Vec2::new(-1e-9, 0.0)), None);
    }
}
