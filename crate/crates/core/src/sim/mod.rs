//! Closed-loop scenario runner.
//!
//! Each control tick holds or resamples the disturbance, selects a virtual
//! target, evaluates the look-ahead geometry and LOS rates, computes the
//! command for the chosen controller variant and advances the kinematics.

pub mod config;
pub mod expr;
pub mod log;
pub mod metrics;
pub mod pathgen;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::guidance::{
    base_law, base_law_raw, clip_and_assemble, decremental_kq_search, typical_compensation,
    CompensationGains, GuidanceConfig, GuidanceError,
};
use crate::kinematics::{
    sample_disturbance, step, AccelCommand, DisturbanceMode, DisturbanceSample, KinematicsError,
    UavState,
};
use crate::path::{
    compute_geometry, select_target_constrained, LookaheadGeometry, LosDifferentiator, PathError,
    TargetSelection, WaypointPath,
};
use crate::qp::{build_problem, solve, CommandMap, QpStatus, DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE};

pub use metrics::{compute_metrics, compute_metrics_window, RunMetrics};

pub const DEFAULT_DT: f64 = 0.1;
pub const DEFAULT_HOLD: usize = 5;
pub const DEFAULT_SPEED: f64 = 25.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Controller {
    /// Pursuit law only.
    #[default]
    Rllp,
    /// Pursuit law plus typical compensation with constant gains.
    RllpFixedComp,
    /// Pursuit law plus compensation with gains from the per-tick program.
    RllpOptimal,
}

impl Controller {
    pub const ALL: [Controller; 3] = [Controller::Rllp, Controller::RllpFixedComp, Controller::RllpOptimal];

    pub fn name(self) -> &'static str {
        match self {
            Controller::Rllp => "rllp",
            Controller::RllpFixedComp => "rllp_fixed_comp",
            Controller::RllpOptimal => "rllp_optimal",
        }
    }
}

impl fmt::Display for Controller {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Controller {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "rllp" => Ok(Controller::Rllp),
            "rllp_fixed_comp" | "fixed" | "fixed_comp" => Ok(Controller::RllpFixedComp),
            "rllp_optimal" | "optimal" => Ok(Controller::RllpOptimal),
            other => Err(format!(
                "unknown controller '{other}' (expected rllp, rllp_fixed_comp or rllp_optimal)"
            )),
        }
    }
}

/// How the compensation gains of a tick were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainSource {
    /// No compensation layer (plain pursuit, or the fixed-gain variant).
    #[default]
    None,
    Optimal,
    /// Program solved after lowering `k_q`.
    KqSearch,
    FallbackFixed,
    /// Compensation undefined at this geometry; pursuit law only.
    FallbackBase,
}

impl GainSource {
    pub fn as_str(self) -> &'static str {
        match self {
            GainSource::None => "none",
            GainSource::Optimal => "optimal",
            GainSource::KqSearch => "kq_search",
            GainSource::FallbackFixed => "fallback_fixed",
            GainSource::FallbackBase => "fallback_base",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub path: WaypointPath,
    /// Guidance tunables. `cfg.l_d` is also the disturbance bound used by the simulator.
    pub cfg: GuidanceConfig,
    pub controller: Controller,
    pub seed: u64,
    pub dt: f64,
    /// Ticks between disturbance resamples.
    pub disturbance_hold: usize,
    pub disturbance_mode: DisturbanceMode,
    pub duration: f64,
    pub initial_state: UavState,
}

impl Scenario {
    /// Scenario with default timing that starts on the first waypoint, aligned with the first segment.
    pub fn new(path: WaypointPath, cfg: GuidanceConfig, controller: Controller) -> Self {
        let initial_state = aligned_start(&path, DEFAULT_SPEED);
        Self {
            path,
            cfg,
            controller,
            seed: 0,
            dt: DEFAULT_DT,
            disturbance_hold: DEFAULT_HOLD,
            disturbance_mode: DisturbanceMode::Box,
            duration: 600.0,
            initial_state,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.cfg.validate()?;
        let bad = |m: &str| Err(SimError::InvalidScenario(m.to_string()));
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad("dt must be positive");
        }
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return bad("duration must be positive");
        }
        if self.disturbance_hold == 0 {
            return bad("disturbance_hold must be at least one tick");
        }
        let s = &self.initial_state;
        if !(s.v_g > 0.0) {
            return bad("initial speed must be positive");
        }
        if !(s.gamma.abs() < std::f64::consts::FRAC_PI_2) {
            return bad("initial path angle must lie in (-pi/2, pi/2)");
        }
        if [s.x, s.y, s.z, s.chi].iter().any(|v| !v.is_finite()) {
            return bad("initial state must be finite");
        }
        Ok(())
    }
}

/// State on the first waypoint flying along the first segment.
pub fn aligned_start(path: &WaypointPath, v_g: f64) -> UavState {
    let p = path.points();
    let d = [p[1][0] - p[0][0], p[1][1] - p[0][1], p[1][2] - p[0][2]];
    let chi = d[1].atan2(d[0]);
    let gamma = d[2].atan2(d[0].hypot(d[1]));
    UavState::new(p[0], chi, gamma, v_g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub t: f64,
    pub state: UavState,
    pub target: TargetSelection,
    pub eta_lat: f64,
    pub eta_lon: f64,
    pub a_yc: f64,
    pub a_zc: f64,
    /// Distance to the virtual target, m.
    pub e_d: f64,
    pub k1: f64,
    pub k2: f64,
    pub gain_source: GainSource,
    pub clipped: bool,
    pub disturbance: DisturbanceSample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    PathExhausted,
    DurationElapsed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub records: Vec<TickRecord>,
    pub metrics: RunMetrics,
    pub termination: Termination,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error(transparent)]
    Guidance(#[from] GuidanceError),
    #[error("kinematics failed at t = {t:.3} s: {source}")]
    Kinematics { t: f64, source: KinematicsError },
    #[error("path geometry failed at t = {t:.3} s: {source}")]
    Path { t: f64, source: PathError },
    #[error("run produced no ticks")]
    EmptyRun,
}

/// Outcome of the command computation for one tick.
struct TickCommand {
    cmd: AccelCommand,
    gains: CompensationGains,
    source: GainSource,
    clipped: bool,
}

/// Per-run controller memory.
#[derive(Default)]
struct ControllerState {
    /// Command map of the previous tick, tagged with its target index.
    prev_map: Option<(usize, CommandMap)>,
}

fn compensated(
    geom: &LookaheadGeometry,
    state: &UavState,
    cfg: &GuidanceConfig,
    c_dots: (f64, f64),
    gains: CompensationGains,
    source: GainSource,
) -> TickCommand {
    let comp = typical_compensation(geom, gains);
    let (cmd, terms) = clip_and_assemble(
        base_law_raw(geom, state, cfg),
        comp.f_chi,
        comp.f_gamma,
        c_dots,
        state,
        cfg,
    );
    TickCommand {
        cmd,
        gains,
        source,
        clipped: terms.clipped,
    }
}

fn fixed_fallback_gain(cfg: &GuidanceConfig) -> f64 {
    cfg.fixed_gain.max((1.0 + cfg.epsilon) * cfg.l_d / 2.0)
}

fn optimal_command(
    mem: &mut ControllerState,
    index: usize,
    geom: &LookaheadGeometry,
    state: &UavState,
    cfg: &GuidanceConfig,
    c_dots: (f64, f64),
    dt: f64,
) -> TickCommand {
    if geom.theta.is_none() {
        mem.prev_map = None;
        return TickCommand {
            cmd: base_law(geom, state, cfg),
            gains: CompensationGains { k1: 0.0, k2: 0.0 },
            source: GainSource::FallbackBase,
            clipped: false,
        };
    }
    let prev = mem
        .prev_map
        .filter(|(i, _)| *i == index)
        .map(|(_, m)| m);
    let attempt = |trial: &GuidanceConfig| {
        build_problem(geom, state, trial, c_dots, prev.as_ref(), dt).map(|(problem, map)| {
            let sol = solve(&problem, DEFAULT_TOLERANCE, DEFAULT_MAX_ITERATIONS);
            (sol, map)
        })
    };
    match attempt(cfg) {
        Ok((sol, map)) => {
            mem.prev_map = Some((index, map));
            if sol.status == QpStatus::Optimal {
                let gains = CompensationGains { k1: sol.k[0], k2: sol.k[1] };
                return compensated(geom, state, cfg, c_dots, gains, GainSource::Optimal);
            }
            let search = decremental_kq_search(geom, state, cfg, c_dots);
            if search.feasible && search.steps > 0 {
                let trial = GuidanceConfig { k_q: search.k_q, ..cfg.clone() };
                if let Ok((sol, map)) = attempt(&trial) {
                    if sol.status == QpStatus::Optimal {
                        mem.prev_map = Some((index, map));
                        let gains = CompensationGains { k1: sol.k[0], k2: sol.k[1] };
                        return compensated(geom, state, &trial, c_dots, gains, GainSource::KqSearch);
                    }
                }
            }
        }
        Err(_) => mem.prev_map = None,
    }
    let k = fixed_fallback_gain(cfg);
    compensated(
        geom,
        state,
        cfg,
        c_dots,
        CompensationGains { k1: k, k2: k },
        GainSource::FallbackFixed,
    )
}

fn tick_command(
    controller: Controller,
    mem: &mut ControllerState,
    index: usize,
    geom: &LookaheadGeometry,
    state: &UavState,
    cfg: &GuidanceConfig,
    c_dots: (f64, f64),
    dt: f64,
) -> TickCommand {
    match controller {
        Controller::Rllp => TickCommand {
            cmd: base_law(geom, state, cfg),
            gains: CompensationGains { k1: 0.0, k2: 0.0 },
            source: GainSource::None,
            clipped: false,
        },
        Controller::RllpFixedComp => {
            let k = cfg.fixed_gain;
            compensated(geom, state, cfg, c_dots, CompensationGains { k1: k, k2: k }, GainSource::None)
        }
        Controller::RllpOptimal => optimal_command(mem, index, geom, state, cfg, c_dots, dt),
    }
}

/// Runs the scenario to path exhaustion or `duration`, whichever comes first.
pub fn run(scenario: &Scenario) -> Result<RunOutput, SimError> {
    scenario.validate()?;
    let cfg = &scenario.cfg;
    let dt = scenario.dt;
    let ticks = (scenario.duration / dt).round().max(1.0) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut state = scenario.initial_state;
    let mut disturbance = DisturbanceSample::default();
    let mut differentiator = LosDifferentiator::new();
    let mut mem = ControllerState::default();
    let mut prev_index = 0;
    let mut records = Vec::with_capacity(ticks.min(1 << 20));
    let mut termination = Termination::DurationElapsed;

    for tick in 0..ticks {
        let t = tick as f64 * dt;
        if tick % scenario.disturbance_hold == 0 {
            disturbance = sample_disturbance(&mut rng, cfg.l_d, scenario.disturbance_mode);
        }
        let target = match select_target_constrained(&state, &scenario.path, cfg, prev_index) {
            Ok(target) => target,
            Err(PathError::PathExhausted) => {
                termination = Termination::PathExhausted;
                break;
            }
            Err(source) => return Err(SimError::Path { t, source }),
        };
        prev_index = target.index;
        let geom = compute_geometry(&state, target.point).map_err(|source| SimError::Path { t, source })?;
        let c_dots = differentiator.update(target.index, &geom, dt);
        let out = tick_command(scenario.controller, &mut mem, target.index, &geom, &state, cfg, c_dots, dt);
        records.push(TickRecord {
            t,
            state,
            target,
            eta_lat: geom.eta_lat,
            eta_lon: geom.eta_lon,
            a_yc: out.cmd.a_yc,
            a_zc: out.cmd.a_zc,
            e_d: geom.los_distance,
            k1: out.gains.k1,
            k2: out.gains.k2,
            gain_source: out.source,
            clipped: out.clipped,
            disturbance,
        });
        state = step(&state, out.cmd, disturbance, dt).map_err(|source| SimError::Kinematics { t, source })?;
    }
    let metrics = compute_metrics(&records).map_err(|_| SimError::EmptyRun)?;
    Ok(RunOutput {
        records,
        metrics,
        termination,
    })
}

/// `L_d` levels of the disturbance sweep, rad/s.
pub fn sweep_levels() -> [f64; 6] {
    use std::f64::consts::PI;
    [0.0, PI / 40.0, PI / 30.0, PI / 20.0, PI / 15.0, PI / 10.0]
}
