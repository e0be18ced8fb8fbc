//! One JSON file holding every pipeline parameter, overridable from the command line.

use std::fs;
use std::path::{Path, PathBuf};

use flownav::control::Gains;
use flownav::fvm::SolverConfig;
use flownav::refine::RefineConfig;
use flownav::FluidProps;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult, IoContext};

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub mask: Option<PathBuf>,
    /// Defaults to the mask path with a `.json` extension.
    pub sidecar: Option<PathBuf>,
    pub observations: Option<PathBuf>,
    /// Previously solved MFN1 field to start from instead of solving.
    pub field: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub start: Option<[f64; 2]>,
    pub goal: Option<[f64; 2]>,
    pub fluid: FluidProps,
    pub solver: SolverConfig,
    pub refine: RefineConfig,
    pub planner: PlannerParams,
    pub gains: Gains,
    pub sim: SimParams,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerParams {
    pub stride: usize,
    pub k: usize,
    /// Defaults to `u_max`.
    pub v_max: Option<f64>,
    /// Robot self-speed, m/s. Defaults to twice the peak flow speed.
    pub u_max: Option<f64>,
    /// Passes of waypoint smoothing applied before timing; 0 keeps raw graph paths.
    pub smooth_iterations: usize,
    /// Step of the travel-time and navigation simulations, s.
    pub dt: f64,
    /// Navigation arrival radius in meters. Defaults to one pixel.
    pub goal_radius: Option<f64>,
}

impl Default for PlannerParams {
    fn default() -> Self {
        PlannerParams {
            stride: 2,
            k: flownav::planner::DEFAULT_K,
            v_max: None,
            u_max: None,
            smooth_iterations: 0,
            dt: 0.01,
            goal_radius: None,
        }
    }
}

/// Lemniscate tracking run in an analytic flow `v = (-w y, w x) + c`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    pub dt: f64,
    pub duration: f64,
    pub period: f64,
    /// Lemniscate half-extents, m.
    pub a: f64,
    pub b: f64,
    /// Offset of the start from the reference's initial point, m.
    pub start_offset: [f64; 2],
    /// Rotation rate `w` of the flow, 1/s.
    pub flow_rotation: f64,
    pub flow_uniform: [f64; 2],
    pub settling_eps: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            dt: 0.01,
            duration: 120.0,
            period: 60.0,
            a: 1.8e-3,
            b: 1.5e-3,
            start_offset: [3e-4, 3e-4],
            flow_rotation: 0.2,
            flow_uniform: [0.0, 0.0],
            settling_eps: 1e-5,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).at(path)?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Input(format!("config {}: {e}", path.display())))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn mask_paths(&self) -> CliResult<(PathBuf, PathBuf)> {
        let mask = self.mask.clone().ok_or_else(|| {
            CliError::Input("no mask given (--mask or \"mask\" in the config)".into())
        })?;
        let sidecar = self
            .sidecar
            .clone()
            .unwrap_or_else(|| mask.with_extension("json"));
        Ok((mask, sidecar))
    }

    pub fn endpoints(&self) -> CliResult<([f64; 2], [f64; 2])> {
        match (self.start, self.goal) {
            (Some(s), Some(g)) => Ok((s, g)),
            _ => Err(CliError::Input(
                "both --start and --goal are required".into(),
            )),
        }
    }
}

/// Parses `x,y` in meters.
pub fn parse_point(s: &str) -> Result<[f64; 2], String> {
    let mut it = s.split(',').map(|p| p.trim().parse::<f64>());
    match (it.next(), it.next(), it.next()) {
        (Some(Ok(x)), Some(Ok(y)), None) if x.is_finite() && y.is_finite() => Ok([x, y]),
        _ => Err(format!("expected two finite numbers as x,y, got '{s}'")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points() {
        assert_eq!(parse_point("1e-3, 2").unwrap(), [1e-3, 2.0]);
        assert!(parse_point("1").is_err());
        assert!(parse_point("1,2,3").is_err());
        assert!(parse_point("nan,0").is_err());
    }

    #[test]
    fn partial_config_keeps_defaults() {
        let c: PipelineConfig =
            serde_json::from_str(r#"{"sim": {"dt": 0.02}, "planner": {"stride": 3}}"#).unwrap();
        assert_eq!(c.sim.dt, 0.02);
        assert_eq!(c.sim.period, 60.0);
        assert_eq!(c.planner.stride, 3);
        assert_eq!(c.solver, SolverConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"planer": {}}"#).is_err());
    }
}
