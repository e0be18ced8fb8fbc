use std::sync::Arc;

use flownav::domain::{preprocess_observations, InletSpec};
use flownav::fixtures::y_bifurcation;
use flownav::{
    BorderSegment, Cell, ChannelMask, Edge, Error, FlowField, FluidProps, RawSample, Vec2,
};
use proptest::prelude::*;

fn open_box(w: usize, h: usize, cells: Vec<Cell>) -> Result<ChannelMask, Error> {
    ChannelMask::new(
        w,
        h,
        cells,
        1e-4,
        InletSpec {
            edge: Edge::Left,
            from: 0,
            to: h - 1,
            v_inlet_mps: 1e-3,
        },
        &[BorderSegment::new(Edge::Right, 0, h - 1)],
    )
}

#[test]
fn branched_crop_is_a_valid_mask() {
    let m = y_bifurcation(128, 128, 1e-4, 1e-3).unwrap();
    assert_eq!(m.dims(), (128, 128));
    assert_eq!(m.outlets().len(), 2);
    let back = ChannelMask::load(&m.to_pgm(), &m.sidecar()).unwrap();
    assert_eq!(back.cells(), m.cells());
}

/// Fixed-point label propagation, no queue: a pixel is reachable if it is FLUID and a
/// 4-neighbor is reachable.
fn reachable_oracle(w: usize, h: usize, cells: &[Cell]) -> Vec<bool> {
    let mut reach: Vec<bool> = (0..w * h)
        .map(|i| i % w == 0 && cells[i] == Cell::Fluid)
        .collect();
    loop {
        let mut changed = false;
        for r in 0..h {
            for c in 0..w {
                let i = r * w + c;
                if reach[i] || cells[i] == Cell::Solid {
                    continue;
                }
                let near = (r > 0 && reach[i - w])
                    || (r + 1 < h && reach[i + w])
                    || (c > 0 && reach[i - 1])
                    || (c + 1 < w && reach[i + 1]);
                if near {
                    reach[i] = true;
                    changed = true;
                }
            }
        }
        if !changed {
            return reach;
        }
    }
}

fn linear_field(a: [f64; 3], b: [f64; 3]) -> FlowField {
    let m = Arc::new(open_box(16, 12, vec![Cell::Fluid; 16 * 12]).unwrap());
    FlowField::from_fn(m, FluidProps::default(), move |x, y| {
        (a[0] + a[1] * x + a[2] * y, b[0] + b[1] * x + b[2] * y, 0.0)
    })
    .unwrap()
}

fn raw_series(vels: &[Vec2]) -> Vec<RawSample> {
    vels.iter()
        .enumerate()
        .map(|(i, &vel)| RawSample {
            t: i as f64,
            pos: Vec2::new(i as f64 * 1e-5, 2e-4),
            vel,
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flood_fill_matches_label_propagation(bits in prop::collection::vec(prop::bool::weighted(0.6), 32 * 32)) {
        let (w, h) = (32, 32);
        let mut cells: Vec<Cell> = bits.iter().map(|&b| if b { Cell::Fluid } else { Cell::Solid }).collect();
        for r in 0..h {
            cells[r * w] = Cell::Fluid;
            cells[r * w + w - 1] = Cell::Fluid;
        }
        let oracle = reachable_oracle(w, h, &cells);
        let connected = (0..h).any(|r| oracle[r * w + w - 1]);
        match open_box(w, h, cells) {
            Ok(m) => {
                prop_assert!(connected);
                prop_assert_eq!(m.flood_from_inlet(), oracle);
            }
            Err(e) => {
                prop_assert!(!connected);
                prop_assert!(matches!(e, Error::NotConnected));
            }
        }
    }

    #[test]
    fn bilinear_is_exact_on_affine_fields(
        a in prop::array::uniform3(-1.0f64..1.0),
        b in prop::array::uniform3(-1.0f64..1.0),
        px in 0.5f64..15.5, py in 0.5f64..11.5,
    ) {
        let scale = [1.0, 1e3, 1e3];
        let a = [a[0] * scale[0], a[1] * scale[1], a[2] * scale[2]];
        let b = [b[0] * scale[0], b[1] * scale[1], b[2] * scale[2]];
        let f = linear_field(a, b);
        let (x, y) = (px * 1e-4, py * 1e-4);
        let got = f.sample_velocity(Vec2::new(x, y)).unwrap();
        let want = Vec2::new(a[0] + a[1] * x + a[2] * y, b[0] + b[1] * x + b[2] * y);
        let size = 1.0 + a.iter().chain(&b).map(|v| v.abs()).sum::<f64>() * 1e-3;
        prop_assert!((got - want).norm() <= 1e-12 * size);
    }

    #[test]
    fn field_file_round_trip_is_bitwise(vals in prop::collection::vec(-1e3f64..1e3, 3 * 16 * 12)) {
        let m = Arc::new(open_box(16, 12, vec![Cell::Fluid; 16 * 12]).unwrap());
        let n = 16 * 12;
        let at = |k: usize, x: f64, y: f64| vals[k * n + ((y / 1e-4) as usize) * 16 + (x / 1e-4) as usize];
        let f = FlowField::from_fn(m.clone(), FluidProps::default(), |x, y| (at(0, x, y), at(1, x, y), at(2, x, y))).unwrap();
        let g = FlowField::from_bytes(&f.to_bytes(), m, f.props()).unwrap();
        prop_assert!(f.maps_bitwise_eq(&g));
    }

    #[test]
    fn trimming_keeps_sixty_percent(speeds in prop::collection::btree_set(1u32..1_000_000, 17..200)) {
        let vels: Vec<Vec2> = speeds.iter().map(|&s| Vec2::new(s as f64 * 1e-9, 0.0)).collect();
        let out = preprocess_observations(&raw_series(&vels), 3).unwrap();
        let expect = (0.6 * vels.len() as f64).ceil();
        prop_assert!((out.len() as f64 - expect).abs() <= 1.0);
    }
}
