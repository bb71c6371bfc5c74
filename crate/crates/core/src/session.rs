//! Scenario loading, the fixed-tick simulation loop, trajectory logs and
//! bit-exact replay.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::haptic::{coupling_force, CouplingParams, HapticError, ProxyState, ScriptedDevice};
use crate::physics::{self, BlockState, Bounds, ContactMode, ForceBreakdown, ParamError, ParamWarning, SceneParams};
use crate::pulley::PulleyProblem;
use crate::Scalar;

pub const CSV_HEADER: &str = "t,s,v,mode,applied,friction,normal,gravity_t,net,proxy_s,contact";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("malformed document: {0}")]
    Parse(String),
    #[error("invalid value for `{field}`: {reason}")]
    Validation { field: &'static str, reason: String },
    #[error(transparent)]
    Script(#[from] HapticError),
}

impl From<ParamError> for ScenarioError {
    fn from(err: ParamError) -> Self {
        match err {
            ParamError::Invalid { field, reason } => ScenarioError::Validation { field, reason },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error("scenario has no duration; pass one explicitly")]
    UnboundedDuration,
    #[error("duration must be finite and non-negative")]
    InvalidDuration,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReplayError {
    #[error("trajectory diverges at t = {t} (sample {index})")]
    MismatchAt { index: usize, t: f64 },
    #[error("trajectory has {actual} samples, re-run produced {expected}")]
    LengthMismatch { expected: usize, actual: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    #[default]
    Incline,
    Pulley,
}

// ---------------------------------------------------------------------------
// Scenario documents

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsConfig {
    pub min_m: f64,
    pub max_m: f64,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        BoundsConfig { min_m: 0.0, max_m: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CouplingConfig {
    pub stiffness_n_per_m: f64,
    pub damping: f64,
    pub max_force_n: f64,
    pub block_half_length_m: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workspace_scale_m: Option<f64>,
}

impl Default for CouplingConfig {
    fn default() -> Self {
        let d = CouplingParams::<f64>::default();
        CouplingConfig {
            stiffness_n_per_m: d.stiffness,
            damping: d.damping,
            max_force_n: d.max_force,
            block_half_length_m: d.block_half_length,
            workspace_scale_m: d.workspace_scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PulleyConfig {
    pub m1_kg: f64,
    pub m2_kg: f64,
}

impl Default for PulleyConfig {
    fn default() -> Self {
        PulleyConfig { m1_kg: 1.0, m2_kg: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialConfig {
    /// Start position; a quarter of the way up the bounds when omitted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_m: Option<f64>,
    pub v_mps: f64,
}

/// Scenario file contents. Every key is optional; angles are in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    pub mass_kg: f64,
    pub angle_deg: f64,
    pub mu_static: f64,
    pub mu_kinetic: f64,
    pub gravity: f64,
    pub bounds: BoundsConfig,
    pub dt_s: f64,
    pub stick_velocity_epsilon: f64,
    pub coupling: CouplingConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pulley: Option<PulleyConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
    pub initial: InitialConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            scenario: ScenarioKind::Incline,
            mass_kg: 1.0,
            angle_deg: 20.0,
            mu_static: 0.5,
            mu_kinetic: 0.3,
            gravity: physics::STANDARD_GRAVITY,
            bounds: BoundsConfig::default(),
            dt_s: 0.001,
            stick_velocity_epsilon: 1e-6,
            coupling: CouplingConfig::default(),
            pulley: None,
            duration_s: None,
            initial: InitialConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        if text.trim().is_empty() {
            return Ok(ScenarioConfig::default());
        }
        serde_json::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self, ScenarioError> {
        serde_json::from_value(value).map_err(|e| ScenarioError::Parse(e.to_string()))
    }

    /// Validates the document and builds the typed scenario.
    pub fn build<T: Scalar>(&self) -> Result<Scenario<T>, ScenarioError> {
        Scenario::from_config(self)
    }
}

/// A validated simulation setup.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario<T> {
    pub kind: ScenarioKind,
    /// Parameters the block is simulated with. For a pulley scenario the
    /// block mass is `m1` and `hanging_mass` is `m2`.
    pub scene: SceneParams<T>,
    pub coupling: CouplingParams<T>,
    pub pulley: Option<PulleyProblem<T>>,
    pub initial: BlockState<T>,
    /// Simulated time span, s. `None` for open-ended interactive runs.
    pub duration: Option<T>,
    pub warnings: Vec<ParamWarning>,
}

impl<T: Scalar> Default for Scenario<T> {
    fn default() -> Self {
        Scenario::from_config(&ScenarioConfig::default()).expect("defaults are valid")
    }
}

impl<T: Scalar> Scenario<T> {
    pub fn incline(scene: SceneParams<T>, initial: BlockState<T>) -> Result<Self, ScenarioError> {
        let warnings = scene.validate()?;
        let scenario = Scenario {
            kind: ScenarioKind::Incline,
            scene,
            coupling: CouplingParams::default(),
            pulley: None,
            initial,
            duration: None,
            warnings,
        };
        scenario.check_initial()?;
        Ok(scenario)
    }

    pub fn with_duration(mut self, duration: T) -> Self {
        self.duration = Some(duration);
        self
    }

    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self, ScenarioError> {
        let lit = T::lit;
        let mut scene = SceneParams {
            mass: lit(cfg.mass_kg),
            angle: lit(cfg.angle_deg.to_radians()),
            mu_static: lit(cfg.mu_static),
            mu_kinetic: lit(cfg.mu_kinetic),
            gravity: lit(cfg.gravity),
            bounds: Bounds::new(lit(cfg.bounds.min_m), lit(cfg.bounds.max_m)),
            dt: lit(cfg.dt_s),
            stick_velocity_epsilon: lit(cfg.stick_velocity_epsilon),
            hanging_mass: T::zero(),
        };
        // angle is checked in degrees so 90 is rejected exactly
        if !(cfg.angle_deg >= 0.0 && cfg.angle_deg < 90.0) {
            return Err(ParamError::invalid("angle_deg", "must lie in [0, 90) degrees").into());
        }
        let mut warnings = scene.validate()?;

        let pulley = match (cfg.scenario, &cfg.pulley) {
            (ScenarioKind::Pulley, None) => {
                return Err(ParamError::invalid("pulley", "a pulley scenario needs m1_kg and m2_kg").into())
            }
            (ScenarioKind::Pulley, Some(p)) => {
                let problem = PulleyProblem {
                    m1: lit(p.m1_kg),
                    m2: lit(p.m2_kg),
                    angle: scene.angle,
                    mu_static: scene.mu_static,
                    mu_kinetic: scene.mu_kinetic,
                    gravity: scene.gravity,
                };
                problem.validate()?;
                scene.mass = problem.m1;
                scene.hanging_mass = problem.m2;
                Some(problem)
            }
            (ScenarioKind::Incline, _) => None,
        };

        let coupling = CouplingParams {
            stiffness: lit(cfg.coupling.stiffness_n_per_m),
            damping: lit(cfg.coupling.damping),
            max_force: lit(cfg.coupling.max_force_n),
            block_half_length: lit(cfg.coupling.block_half_length_m),
            workspace_scale: cfg.coupling.workspace_scale_m.map(lit),
        };
        coupling.validate()?;

        let s0 = match cfg.initial.s_m {
            Some(s) => lit(s),
            None => scene.bounds.min + (scene.bounds.max - scene.bounds.min) * lit(0.25),
        };
        let v0 = lit(cfg.initial.v_mps);
        if !v0.is_finite() {
            return Err(ParamError::invalid("initial.v_mps", "must be finite").into());
        }
        let initial = if v0 == T::zero() {
            BlockState::at_rest(s0)
        } else {
            BlockState::sliding(s0, v0)
        };

        let duration = match cfg.duration_s {
            Some(d) if d.is_finite() && d >= 0.0 => Some(lit(d)),
            Some(_) => return Err(ParamError::invalid("duration_s", "must be finite and non-negative").into()),
            None => None,
        };

        warnings.dedup();
        let scenario = Scenario {
            kind: cfg.scenario,
            scene,
            coupling,
            pulley,
            initial,
            duration,
            warnings,
        };
        scenario.check_initial()?;
        Ok(scenario)
    }

    fn check_initial(&self) -> Result<(), ParamError> {
        if self.initial.s.is_finite() && self.scene.bounds.contains(self.initial.s) {
            Ok(())
        } else {
            Err(ParamError::invalid("initial.s_m", "must lie within bounds"))
        }
    }
}

/// Parses and validates a scenario document (JSON, snake_case keys).
/// Blank input yields the defaults.
pub fn load_scenario<T: Scalar>(text: &str) -> Result<Scenario<T>, ScenarioError> {
    ScenarioConfig::parse(text)?.build()
}

/// Parses a device script: a JSON array of `[t_seconds, device_coord]`.
pub fn load_script<T: Scalar>(text: &str) -> Result<ScriptedDevice<T>, ScenarioError> {
    let frames: Vec<(f64, f64)> =
        serde_json::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    let frames = frames.into_iter().map(|(t, c)| (T::lit(t), T::lit(c))).collect();
    Ok(ScriptedDevice::new(frames)?)
}

// ---------------------------------------------------------------------------
// Inputs

/// What drives the block during a tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Drive<T> {
    /// Pointer position in device units; force comes from the coupling.
    Device(T),
    /// Tangential force applied directly, N.
    Force(T),
}

/// Per-tick input, pulled by the loop at each tick's timestamp.
pub trait InputSource<T>: Send {
    fn drive(&mut self, t: T) -> Drive<T>;
}

impl<T: Scalar> InputSource<T> for ScriptedDevice<T> {
    fn drive(&mut self, t: T) -> Drive<T> {
        Drive::Device(self.sample(t))
    }
}

impl<T, F> InputSource<T> for F
where
    F: FnMut(T) -> Drive<T> + Send,
{
    fn drive(&mut self, t: T) -> Drive<T> {
        self(t)
    }
}

/// `applied(t) = initial + rate · t`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceRamp<T> {
    pub initial: T,
    pub rate: T,
}

impl<T: Scalar> ForceRamp<T> {
    pub fn constant(force: T) -> Self {
        ForceRamp {
            initial: force,
            rate: T::zero(),
        }
    }
}

impl<T: Scalar> InputSource<T> for ForceRamp<T> {
    fn drive(&mut self, t: T) -> Drive<T> {
        Drive::Force(self.initial + self.rate * t)
    }
}

// ---------------------------------------------------------------------------
// Records

/// One row of a trajectory log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample<T> {
    pub t: T,
    pub s: T,
    pub v: T,
    pub mode: ContactMode,
    pub applied: T,
    pub friction: T,
    pub normal: T,
    pub gravity_t: T,
    pub net: T,
    /// Proxy position, NaN when the block is driven by a direct force.
    pub proxy_s: T,
    pub contact: bool,
}

impl<T: Scalar> TrajectorySample<T> {
    fn fields(&self) -> [T; 9] {
        [
            self.t,
            self.s,
            self.v,
            self.applied,
            self.friction,
            self.normal,
            self.gravity_t,
            self.net,
            self.proxy_s,
        ]
    }

    /// Exact equality down to the bit pattern (NaN equals itself).
    pub fn bit_eq(&self, other: &Self) -> bool {
        self.mode == other.mode
            && self.contact == other.contact
            && self
                .fields()
                .iter()
                .zip(other.fields().iter())
                .all(|(a, b)| a.integer_decode() == b.integer_decode() && a.is_nan() == b.is_nan())
    }

    pub fn write_csv_row<W: Write>(&self, out: &mut W) -> io::Result<()> {
        let g = |x: T| format_sig9(x.to_f64_lossy());
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            g(self.t),
            g(self.s),
            g(self.v),
            self.mode.as_str(),
            g(self.applied),
            g(self.friction),
            g(self.normal),
            g(self.gravity_t),
            g(self.net),
            g(self.proxy_s),
            self.contact,
        )
    }
}

/// Everything known about one completed tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickRecord<T> {
    pub t: T,
    pub state: BlockState<T>,
    pub forces: ForceBreakdown<T>,
    pub proxy_s: T,
    pub contact: bool,
    /// Reaction force sent back to the device, N.
    pub rendered: T,
}

impl<T: Scalar> TickRecord<T> {
    pub fn sample(&self) -> TrajectorySample<T> {
        TrajectorySample {
            t: self.t,
            s: self.state.s,
            v: self.state.v,
            mode: self.state.mode,
            applied: self.forces.applied,
            friction: self.forces.friction,
            normal: self.forces.normal,
            gravity_t: self.forces.gravity_tangential,
            net: self.forces.net,
            proxy_s: self.proxy_s,
            contact: self.contact,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub initial: BlockState<T>,
    pub samples: Vec<TrajectorySample<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary<T> {
    pub final_s: T,
    pub final_v: T,
    pub final_mode: ContactMode,
    pub breakaway_t: Option<T>,
}

impl<T: Scalar> std::fmt::Display for RunSummary<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "final s={} m v={} m/s mode={} breakaway=",
            format_sig9(self.final_s.to_f64_lossy()),
            format_sig9(self.final_v.to_f64_lossy()),
            self.final_mode.as_str()
        )?;
        match self.breakaway_t {
            Some(t) => write!(f, "{} s", format_sig9(t.to_f64_lossy())),
            None => f.write_str("none"),
        }
    }
}

impl<T: Scalar> Trajectory<T> {
    /// Time of the first static→kinetic transition. A block that is
    /// already slipping in the first sample breaks away at that sample.
    pub fn breakaway_time(&self) -> Option<T> {
        let mut previous = self.initial.mode;
        for sample in &self.samples {
            if previous == ContactMode::Static && sample.mode == ContactMode::Kinetic {
                return Some(sample.t);
            }
            previous = sample.mode;
        }
        None
    }

    pub fn breakaway_sample(&self) -> Option<&TrajectorySample<T>> {
        let t = self.breakaway_time()?;
        self.samples.iter().find(|s| s.t == t)
    }

    pub fn summary(&self) -> Option<RunSummary<T>> {
        let last = self.samples.last()?;
        Some(RunSummary {
            final_s: last.s,
            final_v: last.v,
            final_mode: last.mode,
            breakaway_t: self.breakaway_time(),
        })
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for sample in &self.samples {
            sample.write_csv_row(out)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::with_capacity(96 * (self.samples.len() + 1));
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is ascii")
    }
}

/// Formats like C's `%.9g`: nine significant digits, trailing zeros trimmed,
/// exponent form outside `[1e-5, 1e9)`.
pub fn format_sig9(x: f64) -> String {
    if x.is_nan() {
        return "NaN".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0" } else { "0" }.to_string();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..9).contains(&exp) {
        return format!("{}e{}", trim_zeros(mantissa), exp);
    }
    let decimals = (8 - exp) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

// ---------------------------------------------------------------------------
// Loop

/// Number of whole ticks of `dt` in `duration`, tolerant of the rounding in
/// decimal timesteps (1000 s at 1 ms is 10⁶ ticks, not 999 999).
pub fn tick_count<T: Scalar>(duration: T, dt: T) -> u64 {
    let ratio = (duration / dt).to_f64_lossy();
    let nearest = ratio.round();
    let slack = 64.0 * T::epsilon().to_f64_lossy() * nearest.max(1.0);
    let n = if (ratio - nearest).abs() <= slack {
        nearest
    } else {
        ratio.floor()
    };
    n.max(0.0) as u64
}

/// Stateful simulation loop for one block. Parameters may be swapped between
/// ticks; the block state carries over.
#[derive(Debug, Clone)]
pub struct Session<T> {
    scenario: Scenario<T>,
    scene: SceneParams<T>,
    coupling: CouplingParams<T>,
    state: BlockState<T>,
    last_proxy: Option<T>,
    time_origin: T,
    ticks: u64,
    last: Option<TickRecord<T>>,
}

impl<T: Scalar> Session<T> {
    pub fn new(scenario: Scenario<T>) -> Self {
        Session {
            scene: scenario.scene,
            coupling: scenario.coupling,
            state: scenario.initial,
            scenario,
            last_proxy: None,
            time_origin: T::zero(),
            ticks: 0,
            last: None,
        }
    }

    pub fn scenario(&self) -> &Scenario<T> {
        &self.scenario
    }

    pub fn scene(&self) -> &SceneParams<T> {
        &self.scene
    }

    pub fn coupling(&self) -> &CouplingParams<T> {
        &self.coupling
    }

    pub fn state(&self) -> BlockState<T> {
        self.state
    }

    pub fn last(&self) -> Option<&TickRecord<T>> {
        self.last.as_ref()
    }

    /// Current simulated time.
    pub fn time(&self) -> T {
        self.time_origin + T::from_u64(self.ticks).expect("tick count fits scalar") * self.scene.dt
    }

    fn next_time(&self) -> T {
        self.time_origin + T::from_u64(self.ticks + 1).expect("tick count fits scalar") * self.scene.dt
    }

    /// Replaces the physical parameters between ticks. A block left outside
    /// new bounds is placed on the nearest bound at rest.
    pub fn set_params(&mut self, scene: SceneParams<T>, coupling: CouplingParams<T>) {
        if scene.dt != self.scene.dt {
            self.time_origin = self.time();
            self.ticks = 0;
        }
        if !scene.bounds.contains(self.state.s) {
            self.state = BlockState::at_rest(scene.bounds.clamp(self.state.s));
        }
        self.scene = scene;
        self.coupling = coupling;
    }

    /// Swaps the whole scenario, restarting the block from its initial
    /// state. Simulated time keeps running.
    pub fn load(&mut self, scenario: Scenario<T>) {
        self.set_params(scenario.scene, scenario.coupling);
        self.scenario = scenario;
        self.reset();
    }

    /// Returns the block and the pointer history to the scenario's initial
    /// state. Parameters and simulated time are kept.
    pub fn reset(&mut self) {
        self.state = self.scenario.initial;
        if !self.scene.bounds.contains(self.state.s) {
            self.state = BlockState::at_rest(self.scene.bounds.clamp(self.state.s));
        }
        self.last_proxy = None;
        self.last = None;
    }

    fn resolve(&mut self, drive: Drive<T>) -> (T, T, bool, T) {
        match drive {
            Drive::Force(force) => {
                self.last_proxy = None;
                (force, T::nan(), false, T::zero())
            }
            Drive::Device(coord) => {
                let s_proxy = self.coupling.map_workspace(coord, &self.scene.bounds);
                let v_proxy = match self.last_proxy {
                    Some(previous) => (s_proxy - previous) / self.scene.dt,
                    None => T::zero(),
                };
                self.last_proxy = Some(s_proxy);
                let force = coupling_force(ProxyState { s_proxy, v_proxy }, self.state, &self.coupling);
                (force.applied_to_block, s_proxy, force.in_contact(), force.rendered_to_device)
            }
        }
    }

    /// Records the present instant without advancing time.
    pub fn observe(&mut self, drive: Drive<T>) -> TrajectorySample<T> {
        let (applied, proxy_s, contact, rendered) = self.resolve(drive);
        let (state, forces) = physics::evaluate(self.state, &self.scene, applied);
        self.state = state;
        self.record(self.time(), forces, proxy_s, contact, rendered)
    }

    /// Advances one tick. `drive` is the input at the end of the tick.
    pub fn advance(&mut self, drive: Drive<T>) -> TrajectorySample<T> {
        let t = self.next_time();
        let (applied, proxy_s, contact, rendered) = self.resolve(drive);
        let (state, forces) = physics::step(self.state, &self.scene, applied);
        self.state = state;
        self.ticks += 1;
        self.record(t, forces, proxy_s, contact, rendered)
    }

    /// Advances one tick, pulling the input from `source`.
    pub fn advance_from<S: InputSource<T> + ?Sized>(&mut self, source: &mut S) -> TrajectorySample<T> {
        let drive = source.drive(self.next_time());
        self.advance(drive)
    }

    fn record(&mut self, t: T, forces: ForceBreakdown<T>, proxy_s: T, contact: bool, rendered: T) -> TrajectorySample<T> {
        let record = TickRecord {
            t,
            state: self.state,
            forces,
            proxy_s,
            contact,
            rendered,
        };
        self.last = Some(record);
        record.sample()
    }
}

/// Runs `scenario` for its configured duration.
pub fn run<T: Scalar, S: InputSource<T> + ?Sized>(
    scenario: &Scenario<T>,
    source: &mut S,
) -> Result<Trajectory<T>, SessionError> {
    let duration = scenario.duration.ok_or(SessionError::UnboundedDuration)?;
    run_for(scenario, source, duration)
}

/// Runs `scenario` from t = 0 to `duration`, one sample per tick plus the
/// initial sample.
pub fn run_for<T: Scalar, S: InputSource<T> + ?Sized>(
    scenario: &Scenario<T>,
    source: &mut S,
    duration: T,
) -> Result<Trajectory<T>, SessionError> {
    if !(duration.is_finite() && duration >= T::zero()) {
        return Err(SessionError::InvalidDuration);
    }
    let ticks = tick_count(duration, scenario.scene.dt);
    let mut session = Session::new(scenario.clone());
    let mut samples = Vec::with_capacity(ticks as usize + 1);
    samples.push(session.observe(source.drive(T::zero())));
    for _ in 0..ticks {
        samples.push(session.advance_from(source));
    }
    Ok(Trajectory {
        initial: scenario.initial,
        samples,
    })
}

/// Re-executes `scenario` with `source` and checks `trajectory` sample by
/// sample, bit for bit.
pub fn replay<T: Scalar, S: InputSource<T> + ?Sized>(
    trajectory: &Trajectory<T>,
    scenario: &Scenario<T>,
    source: &mut S,
) -> Result<(), ReplayError> {
    let expected_len = scenario
        .duration
        .map(|d| tick_count(d, scenario.scene.dt) as usize + 1)
        .unwrap_or(trajectory.samples.len());
    let mut session = Session::new(scenario.clone());
    for (index, recorded) in trajectory.samples.iter().enumerate().take(expected_len) {
        let fresh = if index == 0 {
            session.observe(source.drive(T::zero()))
        } else {
            session.advance_from(source)
        };
        if !fresh.bit_eq(recorded) {
            return Err(ReplayError::MismatchAt {
                index,
                t: recorded.t.to_f64_lossy(),
            });
        }
    }
    if trajectory.samples.len() != expected_len {
        return Err(ReplayError::LengthMismatch {
            expected: expected_len,
            actual: trajectory.samples.len(),
        });
    }
    Ok(())
}
