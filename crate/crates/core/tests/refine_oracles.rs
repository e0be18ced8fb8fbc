use std::f64::consts::PI;
use std::sync::Arc;

use flownav::fixtures::{straight_channel, y_bifurcation};
use flownav::refine::{
    boundary_band, pde_residuals, refine_field, stencil_d1, stencil_d2, RefineConfig, RefineStatus,
    ScaledResidual, StencilAxis, D1_KERNEL, D2_KERNEL,
};
use flownav::{
    Error, FlowField, FluidProps, Map2, Observation, ObservationSet, ObservationSource, Vec2,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn no_obs() -> ObservationSet {
    ObservationSet::empty(ObservationSource::File)
}

fn poiseuille(w: usize, h: usize, pixel: f64, v: f64, props: FluidProps) -> FlowField {
    let m = Arc::new(straight_channel(w, h, pixel, v).unwrap());
    let big_h = h as f64 * pixel;
    let len = w as f64 * pixel;
    let dpdx = -12.0 * props.mu() * v / (big_h * big_h);
    FlowField::from_fn(m, props, |x, y| {
        (
            6.0 * v * (y / big_h) * (1.0 - y / big_h),
            0.0,
            dpdx * (x - len),
        )
    })
    .unwrap()
}

#[test]
fn loss_gradient_matches_central_differences() {
    let m = Arc::new(y_bifurcation(48, 32, 1e-4, 1e-3).unwrap());
    let sr = ScaledResidual::new(&m, 2.5, [1.0, 0.7, 1.3]);
    let n = 48 * 32;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x: Vec<f64> = (0..3 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut g = vec![0.0; 3 * n];
    sr.loss_and_grad(&x, &mut g);
    let mut checked = 0;
    while checked < 20 {
        let i = rng.gen_range(0..3 * n);
        if g[i] == 0.0 {
            continue;
        }
        let eps = 1e-5;
        let mut xp = x.clone();
        xp[i] += eps;
        let mut xm = x.clone();
        xm[i] -= eps;
        let fd = (sr.loss(&xp).0 - sr.loss(&xm).0) / (2.0 * eps);
        let rel = (fd - g[i]).abs() / g[i].abs().max(1e-3);
        assert!(rel < 1e-5, "entry {i}: analytic {} fd {fd} rel {rel}", g[i]);
        checked += 1;
    }
}

#[test]
fn impulse_responses_reproduce_kernels() {
    let (w, h) = (9, 9);
    let (r0, c0) = (4, 4);
    for (m, &k) in D1_KERNEL.iter().enumerate() {
        let off = m as isize - 1;
        let impulse = Map2::from_fn(w, h, |r, c| {
            (r == r0 && c as isize == c0 as isize + off) as u8 as f64
        });
        assert_eq!(stencil_d1(&impulse, StencilAxis::X).get(r0, c0), k);
        let impulse_y = Map2::from_fn(w, h, |r, c| {
            (c == c0 && r as isize == r0 as isize + off) as u8 as f64
        });
        assert_eq!(stencil_d1(&impulse_y, StencilAxis::Y).get(r0, c0), k);
    }
    for (dr, row) in D2_KERNEL.iter().enumerate() {
        for (dc, &k) in row.iter().enumerate() {
            let impulse = Map2::from_fn(w, h, |r, c| {
                (r + 1 == r0 + dr && c + 1 == c0 + dc) as u8 as f64
            });
            assert_eq!(stencil_d2(&impulse).get(r0, c0), k);
        }
    }
}

#[test]
fn rigid_rotation_is_divergence_free() {
    let m = Arc::new(straight_channel(24, 24, 1e-4, 1e-3).unwrap());
    let props = FluidProps::default();
    let omega = 3.0;
    let (cx, cy) = (1.2e-3, 1.2e-3);
    let f = FlowField::from_fn(m, props, |x, y| {
        let (dx, dy) = (x - cx, y - cy);
        (
            -omega * dy,
            omega * dx,
            0.5 * props.rho * omega * omega * (dx * dx + dy * dy),
        )
    })
    .unwrap();
    let r = pde_residuals(&f, props).unwrap();
    assert_eq!(r.r_cont.max_abs(), 0.0);
    let scale = props.rho * omega * omega * 1.2e-3;
    assert!(r.r_momx.max_abs() < 1e-9 * scale);
    assert!(r.r_momy.max_abs() < 1e-9 * scale);
}

#[test]
fn poiseuille_residual_vanishes_to_round_off() {
    let props = FluidProps::default();
    for (w, h, pixel) in [(32, 8, 4e-5), (64, 16, 2e-5), (128, 32, 1e-5)] {
        let f = poiseuille(w, h, pixel, 1e-3, props);
        let r = pde_residuals(&f, props).unwrap();
        let force = 12.0 * props.mu() * 1e-3 / (h as f64 * pixel).powi(2);
        assert!(
            r.r_momx.max_abs() < 1e-9 * force,
            "{w}: {}",
            r.r_momx.max_abs()
        );
        assert!(r.r_momy.max_abs() < 1e-9 * force);
        assert!(r.r_cont.max_abs() < 1e-9 * 1e-3 / (h as f64 * pixel));
    }
}

/// Kovasznay flow on the unit square with `rho = 1` and `nu = 1 / re`.
fn kovasznay(n: usize, re: f64) -> (FlowField, FluidProps) {
    let props = FluidProps::new(1.0, 1.0 / re).unwrap();
    let lambda = re / 2.0 - (re * re / 4.0 + 4.0 * PI * PI).sqrt();
    let m = Arc::new(straight_channel(n, n, 1.0 / n as f64, 1.0).unwrap());
    let f = FlowField::from_fn(m, props, |x, y| {
        let e = (lambda * x).exp();
        (
            1.0 - e * (2.0 * PI * y).cos(),
            lambda / (2.0 * PI) * e * (2.0 * PI * y).sin(),
            0.5 * (1.0 - (2.0 * lambda * x).exp()),
        )
    })
    .unwrap();
    (f, props)
}

#[test]
fn momentum_residual_is_second_order_on_kovasznay_flow() {
    let errs: Vec<f64> = [32, 64, 128]
        .into_iter()
        .map(|n| {
            let (f, props) = kovasznay(n, 20.0);
            let r = pde_residuals(&f, props).unwrap();
            r.r_momx.max_abs().max(r.r_momy.max_abs())
        })
        .collect();
    for pair in errs.windows(2) {
        let order = (pair[0] / pair[1]).log2();
        assert!(order >= 1.8, "order {order} from {errs:?}");
    }
}

#[test]
fn observation_outside_fluid_is_rejected() {
    let m = Arc::new(y_bifurcation(48, 32, 1e-4, 1e-3).unwrap());
    let f = FlowField::zeros(m.clone(), FluidProps::default());
    let solid = (0..32)
        .flat_map(|r| (0..48).map(move |c| (r, c)))
        .find(|&(r, c)| !m.is_fluid(r, c))
        .unwrap();
    let obs = ObservationSet {
        entries: vec![Observation {
            pos: m.pixel_center(solid.0, solid.1),
            vel: Vec2::zeros(),
        }],
        source: ObservationSource::File,
    };
    let err = refine_field(&f, &obs, FluidProps::default(), &RefineConfig::default()).unwrap_err();
    assert!(matches!(err, Error::ObsOutsideFluid { .. }));
}

#[test]
fn consistent_clamps_on_a_stationary_field_are_a_fixed_point() {
    let props = FluidProps::default();
    let f = poiseuille(48, 16, 2e-5, 1e-3, props);
    let m = f.mask_arc().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let entries = (0..50)
        .map(|_| {
            let (r, c) = (rng.gen_range(0..16), rng.gen_range(0..48));
            Observation {
                pos: m.pixel_center(r, c),
                vel: f.velocity_at_pixel(r, c),
            }
        })
        .collect();
    let obs = ObservationSet {
        entries,
        source: ObservationSource::File,
    };
    let out = refine_field(&f, &obs, props, &RefineConfig::default()).unwrap();
    let first = out.history.first().unwrap().loss;
    let last = out.history.last().unwrap().loss;
    assert!((first - last).abs() < 1e-12);
    assert!(out.field.velocity_rmse(&f) < 1e-12);
}

fn perturbed_bifurcation(seed: u64) -> (FlowField, ObservationSet) {
    let m = Arc::new(y_bifurcation(40, 24, 1e-4, 1e-3).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = m.dims();
    let vx = Map2::from_fn(w, h, |_, _| 1e-3 + rng.gen_range(-2e-4..2e-4));
    let vy = Map2::from_fn(w, h, |_, _| rng.gen_range(-2e-4..2e-4));
    let p = Map2::from_fn(w, h, |_, _| rng.gen_range(-1e-2..1e-2));
    let f = FlowField::new(m.clone(), FluidProps::default(), vx, vy, p).unwrap();
    let entries = (0..40)
        .filter(|&c| m.is_fluid(12, c))
        .step_by(3)
        .map(|c| Observation {
            pos: m.pixel_center(12, c),
            vel: Vec2::new(1.2e-3, 0.0),
        })
        .collect();
    (
        f,
        ObservationSet {
            entries,
            source: ObservationSource::File,
        },
    )
}

#[test]
fn clamped_pixels_keep_their_source_values_bitwise() {
    let (f, obs) = perturbed_bifurcation(11);
    let cfg = RefineConfig {
        max_iters: 200,
        ..RefineConfig::default()
    };
    let out = refine_field(&f, &obs, FluidProps::default(), &cfg).unwrap();
    assert!(out.iters > 0);
    let m = f.mask();
    let band = boundary_band(m, 1);
    let w = m.width();
    let observed: Vec<(usize, usize)> = obs
        .entries
        .iter()
        .map(|o| m.pixel_at(o.pos).unwrap())
        .collect();
    for r in 0..m.height() {
        for c in 0..w {
            if (band[r * w + c] || !m.is_fluid(r, c)) && !observed.contains(&(r, c)) {
                assert_eq!(
                    out.field.vx().get(r, c).to_bits(),
                    f.vx().get(r, c).to_bits()
                );
                assert_eq!(
                    out.field.vy().get(r, c).to_bits(),
                    f.vy().get(r, c).to_bits()
                );
            }
        }
    }
    for o in &obs.entries {
        let (r, c) = m.pixel_at(o.pos).unwrap();
        assert_eq!(out.field.vx().get(r, c).to_bits(), o.vel.x.to_bits());
        assert_eq!(out.field.vy().get(r, c).to_bits(), o.vel.y.to_bits());
    }
    let (pr, pc) = m.pressure_pin();
    assert_eq!(
        out.field.p().get(pr, pc).to_bits(),
        f.p().get(pr, pc).to_bits()
    );
}

#[test]
fn empty_observations_still_clamp_the_band() {
    let (f, _) = perturbed_bifurcation(5);
    let cfg = RefineConfig {
        max_iters: 100,
        ..RefineConfig::default()
    };
    let out = refine_field(&f, &no_obs(), FluidProps::default(), &cfg).unwrap();
    assert!(!out.field.maps_bitwise_eq(&f));
    let m = f.mask();
    let band = boundary_band(m, 1);
    for (i, &b) in band.iter().enumerate() {
        if b {
            assert_eq!(out.field.vx().as_slice()[i], f.vx().as_slice()[i]);
        }
    }
    let last = out.history.last().unwrap().loss;
    assert!(last < out.history[0].loss);
}

#[test]
fn loss_csv_has_the_documented_header() {
    let (f, obs) = perturbed_bifurcation(2);
    let cfg = RefineConfig {
        max_iters: 5,
        ..RefineConfig::default()
    };
    let out = refine_field(&f, &obs, FluidProps::default(), &cfg).unwrap();
    let mut buf = Vec::new();
    flownav::refine::write_loss_csv(&out.history, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("iter,loss,r_cont,r_momx,r_momy\n"));
    assert_eq!(text.lines().count(), out.history.len() + 1);
    assert_eq!(out.status, RefineStatus::MaxIters);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn loss_history_never_increases(seed in 0u64..1000, iters in 1usize..60) {
        let (f, obs) = perturbed_bifurcation(seed);
        let cfg = RefineConfig { max_iters: iters, ..RefineConfig::default() };
        let out = refine_field(&f, &obs, FluidProps::default(), &cfg).unwrap();
        prop_assert_eq!(out.history.len(), out.iters + 1);
        for pair in out.history.windows(2) {
            prop_assert!(pair[1].loss <= pair[0].loss);
        }
    }
}
