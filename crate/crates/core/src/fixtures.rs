//! Synthetic channel geometries used by tests, benchmarks and the CLI `fixture` command.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::{
    BorderSegment, Cell, ChannelMask, Edge, FlowField, InletSpec, Observation, ObservationSet,
    ObservationSource,
};
use crate::error::{Error, Result};
use crate::Vec2;

/// Full-height straight channel: fluid everywhere, walls are the top and bottom borders.
pub fn straight_channel(
    width: usize,
    height: usize,
    pixel_size: f64,
    v_inlet: f64,
) -> Result<ChannelMask> {
    ChannelMask::new(
        width,
        height,
        vec![Cell::Fluid; width * height],
        pixel_size,
        InletSpec {
            edge: Edge::Left,
            from: 0,
            to: height - 1,
            v_inlet_mps: v_inlet,
        },
        &[BorderSegment::new(Edge::Right, 0, height - 1)],
    )
}

/// Rasterizes thick polylines (pixel units, `x` = column, `y` = row, measured at pixel
/// centers) into a mask.
pub fn rasterize_polylines(
    width: usize,
    height: usize,
    lines: &[Vec<Vec2>],
    half_width: f64,
) -> Vec<Cell> {
    let mut cells = vec![Cell::Solid; width * height];
    for r in 0..height {
        for c in 0..width {
            let p = Vec2::new(c as f64 + 0.5, r as f64 + 0.5);
            let inside = lines.iter().any(|line| {
                line.windows(2)
                    .any(|seg| point_segment_distance(p, seg[0], seg[1]) <= half_width)
            });
            if inside {
                cells[r * width + c] = Cell::Fluid;
            }
        }
    }
    cells
}

pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 == 0.0 {
        0.0
    } else {
        ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
    };
    (p - (a + ab * t)).norm()
}

/// Maximal fluid runs along a border, as segments.
pub fn fluid_runs(width: usize, height: usize, cells: &[Cell], edge: Edge) -> Vec<BorderSegment> {
    let len = match edge {
        Edge::Left | Edge::Right => height,
        Edge::Top | Edge::Bottom => width,
    };
    let at = |k: usize| {
        let (r, c) = match edge {
            Edge::Left => (k, 0),
            Edge::Right => (k, width - 1),
            Edge::Top => (0, k),
            Edge::Bottom => (height - 1, k),
        };
        cells[r * width + c] == Cell::Fluid
    };
    let mut runs = Vec::new();
    let mut k = 0;
    while k < len {
        if at(k) {
            let start = k;
            while k < len && at(k) {
                k += 1;
            }
            runs.push(BorderSegment::new(edge, start, k - 1));
        } else {
            k += 1;
        }
    }
    runs
}

/// Builds a mask whose inlet is the single fluid run on `inlet_edge` and whose outlets
/// are all fluid runs on `outlet_edge`.
pub fn mask_from_cells(
    width: usize,
    height: usize,
    cells: Vec<Cell>,
    pixel_size: f64,
    v_inlet: f64,
    inlet_edge: Edge,
    outlet_edge: Edge,
) -> Result<ChannelMask> {
    let inlets = fluid_runs(width, height, &cells, inlet_edge);
    let inlet = match inlets.as_slice() {
        [one] => *one,
        _ => {
            return Err(Error::BadAnnotation(format!(
                "expected one fluid run on the {inlet_edge:?} edge, found {}",
                inlets.len()
            )))
        }
    };
    let outlets = fluid_runs(width, height, &cells, outlet_edge);
    ChannelMask::new(
        width,
        height,
        cells,
        pixel_size,
        InletSpec {
            edge: inlet.edge,
            from: inlet.from,
            to: inlet.to,
            v_inlet_mps: v_inlet,
        },
        &outlets,
    )
}

/// Mirror-symmetric Y-bifurcation: a trunk entering on the left splits into two equal
/// branches leaving on the right. `height` should be even so the mirror maps pixels to
/// pixels.
pub fn y_bifurcation(
    width: usize,
    height: usize,
    pixel_size: f64,
    v_inlet: f64,
) -> Result<ChannelMask> {
    let half_width = height as f64 / 8.0;
    let cells = rasterize_polylines(
        width,
        height,
        &y_bifurcation_centerlines(width, height),
        half_width,
    );
    mask_from_cells(
        width,
        height,
        cells,
        pixel_size,
        v_inlet,
        Edge::Left,
        Edge::Right,
    )
}

/// Upper and lower centerlines of [`y_bifurcation`], in pixel units.
pub fn y_bifurcation_centerlines(width: usize, height: usize) -> Vec<Vec<Vec2>> {
    let (w, h) = (width as f64, height as f64);
    let mid = h / 2.0;
    let branch_y = h * 0.22;
    let upper = vec![
        Vec2::new(0.0, mid),
        Vec2::new(0.375 * w, mid),
        Vec2::new(0.625 * w, branch_y),
        Vec2::new(w, branch_y),
    ];
    let lower = upper.iter().map(|p| Vec2::new(p.x, h - p.y)).collect();
    vec![upper, lower]
}

/// Observations of `field` at the FLUID pixels crossed by `lines` (pixel units), one per
/// pixel, at pixel centers.
pub fn centerline_observations(field: &FlowField, lines: &[Vec<Vec2>]) -> ObservationSet {
    let mask = field.mask();
    let px = mask.pixel_size();
    let mut seen = std::collections::BTreeSet::new();
    let mut entries = Vec::new();
    for line in lines {
        for seg in line.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let n = (b - a).norm().ceil().max(1.0) as usize;
            for k in 0..n {
                let q = (a + (b - a) * (k as f64 / n as f64)) * px;
                let Some((r, c)) = mask.pixel_at(q) else {
                    continue;
                };
                if mask.is_fluid(r, c) && seen.insert((r, c)) {
                    entries.push(Observation {
                        pos: mask.pixel_center(r, c),
                        vel: field.velocity_at_pixel(r, c),
                    });
                }
            }
        }
    }
    ObservationSet {
        entries,
        source: ObservationSource::File,
    }
}

/// A seeded random channel network with its centerlines (pixel units).
#[derive(Clone, Debug)]
pub struct Network {
    pub mask: ChannelMask,
    pub centerlines: Vec<Vec<Vec2>>,
}

impl Network {
    /// Point on the trunk centerline at fraction `s` of its x-extent, in meters.
    pub fn trunk_point(&self, s: f64) -> Vec2 {
        let line = &self.centerlines[0];
        let x = s * self.mask.width() as f64;
        let seg = line
            .windows(2)
            .find(|p| p[0].x <= x && x <= p[1].x)
            .unwrap_or(&line[line.len() - 2..]);
        let t = ((x - seg[0].x) / (seg[1].x - seg[0].x)).clamp(0.0, 1.0);
        let p = seg[0] + (seg[1] - seg[0]) * t;
        let r = (p.y as usize).min(self.mask.height() - 1);
        let c = (p.x as usize).min(self.mask.width() - 1);
        self.mask.pixel_center(r, c)
    }
}

/// Random channel network: a trunk crossing the raster left to right through random
/// interior waypoints, plus one or two bypass loops that leave and rejoin the trunk.
/// The inlet is the trunk's run on the left edge; outlets are the fluid runs on the
/// right edge.
pub fn random_network(
    seed: u64,
    width: usize,
    height: usize,
    pixel_size: f64,
    v_inlet: f64,
) -> Result<Network> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (width as f64, height as f64);
    let half_width = rng.gen_range(0.05..0.08) * h;
    let margin = half_width + 2.0;
    let y = |rng: &mut ChaCha8Rng| rng.gen_range(margin..h - margin);
    let n_mid = rng.gen_range(2..=3);
    let mut trunk = vec![Vec2::new(0.0, y(&mut rng))];
    for k in 0..n_mid {
        let x = w * (k as f64 + 1.0) / (n_mid as f64 + 1.0);
        trunk.push(Vec2::new(x, y(&mut rng)));
    }
    trunk.push(Vec2::new(w, y(&mut rng)));
    let mut lines = vec![trunk.clone()];
    let n_loops = rng.gen_range(1..=2);
    for _ in 0..n_loops {
        let x0 = rng.gen_range(0.15..0.45) * w;
        let x1 = x0 + rng.gen_range(0.25..0.4) * w;
        let at = |x: f64| {
            let seg = trunk
                .windows(2)
                .find(|p| p[0].x <= x && x <= p[1].x)
                .unwrap();
            let t = (x - seg[0].x) / (seg[1].x - seg[0].x);
            seg[0] + (seg[1] - seg[0]) * t
        };
        let (a, b) = (at(x0), at(x1));
        let detour = y(&mut rng);
        lines.push(vec![
            a,
            Vec2::new(x0 + 0.25 * (x1 - x0), detour),
            Vec2::new(x0 + 0.75 * (x1 - x0), detour),
            b,
        ]);
    }
    let cells = rasterize_polylines(width, height, &lines, half_width);
    let mask = mask_from_cells(
        width,
        height,
        cells,
        pixel_size,
        v_inlet,
        Edge::Left,
        Edge::Right,
    )?;
    Ok(Network {
        mask,
        centerlines: lines,
    })
}

pub fn arc(mask: ChannelMask) -> Arc<ChannelMask> {
    Arc::new(mask)
}
