//! Shared inputs for the criterion benches.

use std::sync::Arc;

use flownav::fixtures::{
    centerline_observations, random_network, straight_channel, y_bifurcation,
    y_bifurcation_centerlines,
};
use flownav::fvm::{solve_steady, SolverConfig};
use flownav::{ChannelMask, FlowField, FluidProps, ObservationSet, Vec2};

pub fn straight(width: usize, height: usize) -> Arc<ChannelMask> {
    Arc::new(straight_channel(width, height, 1e-4, 1e-3).expect("valid fixture"))
}

pub fn solved(mask: &Arc<ChannelMask>, props: FluidProps) -> FlowField {
    solve_steady(mask, props, &SolverConfig::default())
        .expect("fixture solves")
        .0
}

/// Seeded network with its solved field and two trunk points for planning.
pub fn network(seed: u64) -> (FlowField, Vec2, Vec2) {
    let net = random_network(seed, 128, 64, 1e-4, 1e-3).expect("valid fixture");
    let (start, goal) = (net.trunk_point(0.05), net.trunk_point(0.95));
    (
        solved(&Arc::new(net.mask), FluidProps::default()),
        start,
        goal,
    )
}

/// Y-bifurcation truth observations and an initial field solved at 1.3 times the viscosity.
pub fn assimilation_case() -> (FlowField, ObservationSet) {
    let (w, h) = (64, 32);
    let mask = Arc::new(y_bifurcation(w, h, 1e-4, 1e-3).expect("valid fixture"));
    let truth = solved(&mask, FluidProps::default());
    let guess = solved(
        &mask,
        FluidProps {
            rho: 1000.0,
            nu: 1.3e-6,
        },
    );
    (
        guess,
        centerline_observations(&truth, &y_bifurcation_centerlines(w, h)),
    )
}
