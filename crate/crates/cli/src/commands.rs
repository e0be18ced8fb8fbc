use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use flownav::control::ref_lemniscate;
use flownav::fixtures::{self, centerline_observations};
use flownav::fvm::{port_fluxes, solve_steady, ResidualReport};
use flownav::planner::{astar_with, build_graph, smooth_path, travel_time, CostModel, PlanResult};
use flownav::refine::{refine_field, write_loss_csv, RefineStatus};
use flownav::simloop::{
    metrics, simulate_navigation, simulate_tracking, ControllerVariant, FlowSource, Metrics,
    NavigationConfig, SimTrace,
};
use flownav::{ChannelMask, FlowField, ObservationSet, Sidecar, Vec2};
use log::{info, warn};
use nalgebra::Matrix2;
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult, IoContext};
use crate::svg::{plan_svg, track_svg, Layer};

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).at(dir)
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).at(path)
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(flownav::Error::from)?;
    fs::write(path, text + "\n").at(path)
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).at(path)
}

pub fn load_mask(cfg: &PipelineConfig) -> CliResult<Arc<ChannelMask>> {
    let (mask_path, sidecar_path) = cfg.mask_paths()?;
    let pgm = fs::read(&mask_path).at(&mask_path)?;
    let text = fs::read_to_string(&sidecar_path).at(&sidecar_path)?;
    let sidecar: Sidecar = serde_json::from_str(&text)
        .map_err(|e| flownav::Error::BadAnnotation(format!("{}: {e}", sidecar_path.display())))?;
    Ok(Arc::new(ChannelMask::load(&pgm, &sidecar)?))
}

fn load_observations(path: &Path) -> CliResult<ObservationSet> {
    let file = File::open(path).at(path)?;
    Ok(ObservationSet::read_csv(file)?)
}

#[derive(Serialize)]
struct SolveSummary {
    converged: bool,
    iters_used: usize,
    final_continuity: f64,
    final_momentum: (f64, f64),
    inlet_flux: f64,
    outlet_flux: f64,
}

/// Solves and writes `field.mfn`, `residuals.csv` and `solve.json` whether or not the
/// solver converged.
fn solve_stage(
    cfg: &PipelineConfig,
    mask: &Arc<ChannelMask>,
    out: &Path,
) -> CliResult<(FlowField, ResidualReport)> {
    let (field, report) = solve_steady(mask, cfg.fluid, &cfg.solver)?;
    field.export(out.join("field.mfn"))?;
    report.write_csv(create(&out.join("residuals.csv"))?)?;
    let (inlet_flux, outlets) = port_fluxes(&field);
    write_json(
        &out.join("solve.json"),
        &SolveSummary {
            converged: report.converged,
            iters_used: report.iters_used,
            final_continuity: report.final_continuity(),
            final_momentum: report.final_momentum(),
            inlet_flux,
            outlet_flux: outlets.iter().sum(),
        },
    )?;
    info!(
        "solve: {} after {} outer iterations, continuity {:.3e}",
        if report.converged {
            "converged"
        } else {
            "not converged"
        },
        report.iters_used,
        report.final_continuity()
    );
    Ok((field, report))
}

fn not_converged(report: &ResidualReport) -> CliError {
    CliError::NotConverged(format!(
        "continuity residual {:.3e} after {} outer iterations",
        report.final_continuity(),
        report.iters_used
    ))
}

pub fn solve(cfg: &PipelineConfig) -> CliResult<()> {
    let mask = load_mask(cfg)?;
    let out = cfg.out_dir();
    create_dir(&out)?;
    let (_, report) = solve_stage(cfg, &mask, &out)?;
    if !report.converged {
        return Err(not_converged(&report));
    }
    Ok(())
}

/// The configured field file, or a fresh solve when there is none.
fn initial_field(
    cfg: &PipelineConfig,
    mask: &Arc<ChannelMask>,
    out: &Path,
) -> CliResult<FlowField> {
    if let Some(path) = &cfg.field {
        return Ok(FlowField::import(path, mask.clone(), cfg.fluid)?);
    }
    let (field, report) = solve_stage(cfg, mask, out)?;
    if !report.converged {
        return Err(not_converged(&report));
    }
    Ok(field)
}

#[derive(Serialize)]
struct RefineSummary {
    observations: usize,
    status: RefineStatus,
    iters: usize,
    initial_loss: Option<f64>,
    final_loss: Option<f64>,
}

fn refine_stage(
    cfg: &PipelineConfig,
    initial: &FlowField,
    obs: &ObservationSet,
    out: &Path,
) -> CliResult<FlowField> {
    if obs.is_empty() {
        warn!("NO_OBSERVATIONS: refining on the residual loss alone");
    }
    let outcome = refine_field(initial, obs, cfg.fluid, &cfg.refine)?;
    outcome.field.export(out.join("refined.mfn"))?;
    write_loss_csv(&outcome.history, create(&out.join("loss.csv"))?)?;
    write_json(
        &out.join("refine.json"),
        &RefineSummary {
            observations: obs.len(),
            status: outcome.status,
            iters: outcome.iters,
            initial_loss: outcome.history.first().map(|h| h.loss),
            final_loss: outcome.history.last().map(|h| h.loss),
        },
    )?;
    info!(
        "refine: {:?} after {} iterations",
        outcome.status, outcome.iters
    );
    Ok(outcome.field)
}

pub fn refine(cfg: &PipelineConfig) -> CliResult<()> {
    let mask = load_mask(cfg)?;
    let obs_path = cfg
        .observations
        .as_ref()
        .ok_or_else(|| CliError::Input("no observations given (--obs)".into()))?;
    let obs = load_observations(obs_path)?;
    let out = cfg.out_dir();
    create_dir(&out)?;
    let initial = initial_field(cfg, &mask, &out)?;
    refine_stage(cfg, &initial, &obs, &out)?;
    Ok(())
}

fn peak_speed(field: &FlowField) -> f64 {
    let m = field.mask();
    let (w, h) = m.dims();
    let mut peak = 0.0f64;
    for r in 0..h {
        for c in 0..w {
            if m.is_fluid(r, c) {
                peak = peak.max(field.velocity_at_pixel(r, c).norm());
            }
        }
    }
    peak
}

struct Speeds {
    u_max: f64,
    v_max: f64,
}

fn speeds(cfg: &PipelineConfig, field: &FlowField) -> CliResult<Speeds> {
    let u_max = match cfg.planner.u_max {
        Some(u) => u,
        None => 2.0 * peak_speed(field),
    };
    if !(u_max > 0.0 && u_max.is_finite()) {
        return Err(CliError::Input(format!(
            "robot speed must be positive, got {u_max}; set planner.u_max for a still field"
        )));
    }
    Ok(Speeds {
        u_max,
        v_max: cfg.planner.v_max.unwrap_or(u_max),
    })
}

#[derive(Serialize)]
struct PlanEntry {
    #[serde(flatten)]
    plan: PlanResult,
    length_m: f64,
    /// Set when the path could not be timed.
    travel_time_error: Option<String>,
}

#[derive(Serialize)]
struct PlanReport {
    start: [f64; 2],
    goal: [f64; 2],
    u_max: f64,
    v_max: f64,
    stride: usize,
    k: usize,
    graph_nodes: usize,
    flow_aware: PlanEntry,
    euclidean: Option<PlanEntry>,
}

fn plan_one(
    cfg: &PipelineConfig,
    field: &FlowField,
    graph: &flownav::planner::FlowGraph,
    endpoints: (Vec2, Vec2),
    model: CostModel,
    u_max: f64,
) -> CliResult<PlanEntry> {
    let mut plan = astar_with(graph, endpoints.0, endpoints.1, model)?;
    if cfg.planner.smooth_iterations > 0 {
        let smoothed = smooth_path(
            &plan.positions(),
            field.mask(),
            cfg.planner.smooth_iterations,
        );
        plan.path = smoothed.iter().map(|p| [p.x, p.y]).collect();
    }
    let (travel, err) = match travel_time(&plan.positions(), field, u_max, cfg.planner.dt) {
        Ok(t) => (Some(t), None),
        Err(e) => {
            warn!("{model:?} plan could not be timed: {e}");
            (None, Some(e.to_string()))
        }
    };
    plan.travel_time_s = travel;
    Ok(PlanEntry {
        length_m: plan.length(),
        plan,
        travel_time_error: err,
    })
}

fn plan_stage(
    cfg: &PipelineConfig,
    field: &FlowField,
    euclidean: bool,
    out: &Path,
) -> CliResult<PlanResult> {
    let (s, g) = cfg.endpoints()?;
    let (start, goal) = (Vec2::new(s[0], s[1]), Vec2::new(g[0], g[1]));
    let sp = speeds(cfg, field)?;
    let graph = build_graph(field, cfg.planner.stride, cfg.planner.k, sp.v_max)?;
    let flow_aware = plan_one(
        cfg,
        field,
        &graph,
        (start, goal),
        CostModel::FlowAware,
        sp.u_max,
    )?;
    let euclid = if euclidean {
        Some(plan_one(
            cfg,
            field,
            &graph,
            (start, goal),
            CostModel::Euclidean,
            sp.u_max,
        )?)
    } else {
        None
    };
    let fa_pts = flow_aware.plan.positions();
    let eu_pts = euclid.as_ref().map(|e| e.plan.positions());
    let mut layers = vec![Layer {
        label: "flow_aware",
        points: &fa_pts,
    }];
    if let Some(p) = &eu_pts {
        layers.push(Layer {
            label: "euclidean",
            points: p,
        });
    }
    write_text(
        &out.join("plan.svg"),
        &plan_svg(field.mask(), &layers, start, goal),
    )?;
    let plan = flow_aware.plan.clone();
    info!(
        "plan: {} waypoints, travel time {:?} s (euclidean {:?} s)",
        plan.path.len(),
        plan.travel_time_s,
        euclid.as_ref().and_then(|e| e.plan.travel_time_s)
    );
    write_json(
        &out.join("plan.json"),
        &PlanReport {
            start: s,
            goal: g,
            u_max: sp.u_max,
            v_max: sp.v_max,
            stride: cfg.planner.stride,
            k: cfg.planner.k,
            graph_nodes: graph.len(),
            flow_aware,
            euclidean: euclid,
        },
    )?;
    Ok(plan)
}

pub fn plan(cfg: &PipelineConfig, euclidean: bool) -> CliResult<()> {
    let mask = load_mask(cfg)?;
    let out = cfg.out_dir();
    create_dir(&out)?;
    let field = initial_field(cfg, &mask, &out)?;
    plan_stage(cfg, &field, euclidean, &out)?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VariantSelection {
    One(ControllerVariant),
    All,
}

pub fn parse_variant(s: &str) -> Result<VariantSelection, String> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(VariantSelection::All);
    }
    s.parse().map(VariantSelection::One).map_err(|_| {
        format!("unknown controller variant '{s}' (expected FLOW_COMP, NO_COMP, OBSERVER or all)")
    })
}

fn sim_flow(cfg: &PipelineConfig) -> FlowSource {
    let w = cfg.sim.flow_rotation;
    let [cx, cy] = cfg.sim.flow_uniform;
    FlowSource::AnalyticLinear {
        a: Matrix2::new(0.0, -w, w, 0.0),
        c: Vec2::new(cx, cy),
    }
}

#[derive(Serialize)]
struct TrackReport {
    variant: &'static str,
    #[serde(flatten)]
    metrics: Metrics,
}

fn write_run(
    trace: &SimTrace,
    m: Metrics,
    variant: ControllerVariant,
    dir: &Path,
) -> CliResult<TrackReport> {
    create_dir(dir)?;
    trace.write_csv(create(&dir.join("trace.csv"))?)?;
    let report = TrackReport {
        variant: variant.name(),
        metrics: m,
    };
    write_json(&dir.join("metrics.json"), &report)?;
    write_text(&dir.join("track.svg"), &track_svg(trace, variant.name()))?;
    Ok(report)
}

fn track_one(cfg: &PipelineConfig, variant: ControllerVariant) -> CliResult<(SimTrace, Metrics)> {
    let sim = &cfg.sim;
    let reference = |t: f64| ref_lemniscate(t, sim.period, sim.a, sim.b);
    let x0 = reference(0.0).x_d + Vec2::new(sim.start_offset[0], sim.start_offset[1]);
    let trace = simulate_tracking(
        variant,
        &sim_flow(cfg),
        &cfg.gains,
        &reference,
        x0,
        sim.duration,
        sim.dt,
    )?;
    let m = metrics(&trace, sim.settling_eps)?;
    if !(m.rms_error.is_finite() && m.final_error.is_finite()) {
        return Err(flownav::Error::NonFinite(format!("{} tracking error", variant.name())).into());
    }
    Ok((trace, m))
}

/// Maps `f` over `items` on at most `jobs` threads, keeping input order.
fn parallel_map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let jobs = jobs.clamp(1, items.len().max(1));
    if jobs == 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(jobs);
    std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| scope.spawn(|| part.iter().map(&f).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker thread panicked"))
            .collect()
    })
}

pub fn track(cfg: &PipelineConfig, selection: VariantSelection, jobs: usize) -> CliResult<()> {
    let out = cfg.out_dir();
    create_dir(&out)?;
    match selection {
        VariantSelection::One(v) => {
            let (trace, m) = track_one(cfg, v)?;
            write_run(&trace, m, v, &out)?;
            info!("track {}: rms error {:.3e} m", v.name(), m.rms_error);
        }
        VariantSelection::All => {
            let runs = parallel_map(&ControllerVariant::ALL, jobs, |&v| track_one(cfg, v));
            let mut reports = Vec::new();
            for (v, run) in ControllerVariant::ALL.into_iter().zip(runs) {
                let (trace, m) = run?;
                info!("track {}: rms error {:.3e} m", v.name(), m.rms_error);
                reports.push(write_run(&trace, m, v, &out.join(v.name()))?);
            }
            write_json(&out.join("metrics.json"), &reports)?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct StageRecord {
    stage: &'static str,
    status: String,
    outputs: Vec<PathBuf>,
    detail: Option<String>,
}

#[derive(Serialize)]
struct PipelineSummary {
    unrefined: bool,
    exit_code: u8,
    stages: Vec<StageRecord>,
}

#[derive(Serialize)]
struct NavigationReport {
    arrival_time: Option<f64>,
    #[serde(flatten)]
    metrics: Metrics,
}

struct Stages {
    out: PathBuf,
    records: Vec<StageRecord>,
}

impl Stages {
    fn run<T>(
        &mut self,
        stage: &'static str,
        outputs: &[&str],
        f: impl FnOnce() -> CliResult<T>,
    ) -> CliResult<T> {
        let result = f();
        let existing = outputs
            .iter()
            .map(|name| self.out.join(name))
            .filter(|p| p.exists())
            .collect();
        self.records.push(StageRecord {
            stage,
            status: if result.is_ok() {
                "ok".into()
            } else {
                "failed".into()
            },
            outputs: existing,
            detail: result.as_ref().err().map(|e| e.to_string()),
        });
        result
    }
}

/// solve, refine, plan and a closed-loop run along the plan, with `summary.json` listing
/// every stage attempted. Artifacts of completed stages are kept when a later one fails.
pub fn pipeline(cfg: &PipelineConfig, euclidean: bool) -> CliResult<()> {
    let out = cfg.out_dir();
    create_dir(&out)?;
    let mut stages = Stages {
        out: out.clone(),
        records: Vec::new(),
    };
    let obs_path = cfg.observations.as_ref().filter(|p| p.exists());
    if let (Some(p), None) = (&cfg.observations, obs_path) {
        warn!(
            "observation file {} not found; continuing with the unrefined field",
            p.display()
        );
    }
    let unrefined = obs_path.is_none();
    let result = run_pipeline(cfg, euclidean, obs_path.map(PathBuf::as_path), &mut stages);
    let summary = PipelineSummary {
        unrefined,
        exit_code: result.as_ref().err().map_or(0, CliError::exit_code),
        stages: stages.records,
    };
    write_json(&out.join("summary.json"), &summary)?;
    result
}

fn run_pipeline(
    cfg: &PipelineConfig,
    euclidean: bool,
    obs: Option<&Path>,
    stages: &mut Stages,
) -> CliResult<()> {
    let out = stages.out.clone();
    let mask = load_mask(cfg)?;
    let field = stages.run(
        "solve",
        &["field.mfn", "residuals.csv", "solve.json"],
        || {
            let (field, report) = solve_stage(cfg, &mask, &out)?;
            if !report.converged {
                return Err(not_converged(&report));
            }
            Ok(field)
        },
    )?;
    let field = match obs {
        Some(path) => stages.run(
            "refine",
            &["refined.mfn", "loss.csv", "refine.json"],
            || refine_stage(cfg, &field, &load_observations(path)?, &out),
        )?,
        None => {
            stages.records.push(StageRecord {
                stage: "refine",
                status: "skipped".into(),
                outputs: Vec::new(),
                detail: Some("no observations; using the unrefined field".into()),
            });
            field
        }
    };
    let plan = stages.run("plan", &["plan.json", "plan.svg"], || {
        plan_stage(cfg, &field, euclidean, &out)
    })?;
    stages.run(
        "navigate",
        &["navigation.csv", "navigation.json", "navigation.svg"],
        || {
            let sp = speeds(cfg, &field)?;
            let nav = NavigationConfig {
                u_max: sp.u_max,
                dt: cfg.planner.dt,
                goal_radius: cfg.planner.goal_radius.unwrap_or(field.mask().pixel_size()),
            };
            let trace =
                simulate_navigation(&plan, &FlowSource::Grid(field.clone()), &cfg.gains, &nav)?;
            let m = metrics(&trace, nav.goal_radius)?;
            trace.write_csv(create(&out.join("navigation.csv"))?)?;
            write_json(
                &out.join("navigation.json"),
                &NavigationReport {
                    arrival_time: trace.arrival_time,
                    metrics: m,
                },
            )?;
            write_text(
                &out.join("navigation.svg"),
                &track_svg(&trace, "navigation"),
            )?;
            info!("navigate: arrived after {:?} s", trace.arrival_time);
            Ok(())
        },
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum FixtureKind {
    Straight,
    YBifurcation,
    Network,
}

pub struct FixtureArgs {
    pub kind: FixtureKind,
    pub width: usize,
    pub height: usize,
    pub pixel_size: f64,
    pub v_inlet: f64,
    pub seed: u64,
    pub observations: bool,
}

/// Writes `mask.pgm`, `mask.json`, a ready-to-run `config.json` with start and goal on
/// the main centerline, and with `observations` set, `observations.csv` sampled from a
/// solve of the fixture along its centerlines.
pub fn fixture(cfg: &PipelineConfig, args: &FixtureArgs) -> CliResult<()> {
    let (w, h, px, v) = (args.width, args.height, args.pixel_size, args.v_inlet);
    let (mask, lines) = match args.kind {
        FixtureKind::Straight => {
            let mid = h as f64 / 2.0;
            let line = vec![Vec2::new(0.0, mid), Vec2::new(w as f64, mid)];
            (fixtures::straight_channel(w, h, px, v)?, vec![line])
        }
        FixtureKind::YBifurcation => (
            fixtures::y_bifurcation(w, h, px, v)?,
            fixtures::y_bifurcation_centerlines(w, h),
        ),
        FixtureKind::Network => {
            let net = fixtures::random_network(args.seed, w, h, px, v)?;
            (net.mask, net.centerlines)
        }
    };
    let out = cfg.out_dir();
    create_dir(&out)?;
    fs::write(out.join("mask.pgm"), mask.to_pgm()).at(out.join("mask.pgm"))?;
    write_json(&out.join("mask.json"), &mask.sidecar())?;

    let along = |s: f64| {
        let line = &lines[0];
        let x = s * w as f64;
        let seg = line
            .windows(2)
            .find(|p| p[0].x <= x && x <= p[1].x)
            .unwrap_or(&line[line.len() - 2..]);
        let t = ((x - seg[0].x) / (seg[1].x - seg[0].x)).clamp(0.0, 1.0);
        let p = seg[0] + (seg[1] - seg[0]) * t;
        let r = (p.y as usize).min(h - 1);
        let c = (p.x as usize).min(w - 1);
        mask.pixel_center(r, c)
    };
    let (start, goal) = (along(0.1), along(0.9));

    let mut run = PipelineConfig {
        mask: Some(out.join("mask.pgm")),
        sidecar: Some(out.join("mask.json")),
        start: Some([start.x, start.y]),
        goal: Some([goal.x, goal.y]),
        fluid: cfg.fluid,
        solver: cfg.solver.clone(),
        ..PipelineConfig::default()
    };
    if args.observations {
        let (truth, report) = solve_steady(&Arc::new(mask), cfg.fluid, &cfg.solver)?;
        if !report.converged {
            warn!("fixture truth solve did not converge; observations may be inaccurate");
        }
        let obs = centerline_observations(&truth, &lines);
        obs.write_csv(create(&out.join("observations.csv"))?)?;
        run.observations = Some(out.join("observations.csv"));
        info!("fixture: {} observations", obs.len());
    }
    write_json(&out.join("config.json"), &run)?;
    Ok(())
}
