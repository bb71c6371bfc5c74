//! The simulation side of the service: one session, the commands that
//! reconfigure it, and decimation of the 1 kHz loop down to the broadcast
//! rate. Nothing here knows about sockets or wall-clock time.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use frictionlab_core::pulley;
use frictionlab_core::session::{ScenarioConfig, TickRecord, CSV_HEADER};
use frictionlab_core::{Drive, ParamWarning, ScenarioError, ScenarioKind, Session};
use thiserror::Error;

use crate::protocol::{Ack, Command, ErrorKind, ErrorReply, PulleyReadout, StateSnapshot};

pub const DEFAULT_BROADCAST_HZ: f64 = 60.0;

/// Keys accepted by `set_param`.
pub const PARAM_KEYS: &[&str] = &[
    "mass_kg",
    "angle_deg",
    "mu_static",
    "mu_kinetic",
    "gravity",
    "dt_s",
    "stick_velocity_epsilon",
    "bounds.min_m",
    "bounds.max_m",
    "m1_kg",
    "m2_kg",
    "coupling.stiffness_n_per_m",
    "coupling.damping",
    "coupling.max_force_n",
    "coupling.block_half_length_m",
    "coupling.workspace_scale_m",
];

#[derive(Debug, Error)]
pub enum CommandError {
    #[error("unknown parameter `{0}`")]
    UnknownKey(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("recording failed: {0}")]
    Io(#[from] io::Error),
}

impl CommandError {
    pub fn reply(&self, cmd: &str) -> ErrorReply {
        let (error, field) = match self {
            CommandError::UnknownKey(key) => (ErrorKind::UnknownKey, Some(key.clone())),
            CommandError::Scenario(ScenarioError::Validation { field, .. }) => {
                (ErrorKind::Validation, Some(field.to_string()))
            }
            CommandError::Scenario(ScenarioError::Parse(_)) => (ErrorKind::Malformed, None),
            CommandError::Scenario(ScenarioError::Script(_)) => (ErrorKind::Validation, None),
            CommandError::Io(_) => (ErrorKind::Io, None),
        };
        ErrorReply {
            error,
            cmd: Some(cmd.to_string()),
            field,
            message: self.to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EngineOptions {
    pub broadcast_hz: f64,
    /// Where `record` commands write their CSV files.
    pub record_dir: PathBuf,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions {
            broadcast_hz: DEFAULT_BROADCAST_HZ,
            record_dir: PathBuf::from("."),
        }
    }
}

struct Recorder {
    path: PathBuf,
    out: BufWriter<File>,
    rows: u64,
}

impl Recorder {
    fn create(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        let mut n = 1u32;
        let (path, file) = loop {
            let path = dir.join(format!("recording-{n:03}.csv"));
            match File::options().write(true).create_new(true).open(&path) {
                Ok(file) => break (path, file),
                Err(e) if e.kind() == io::ErrorKind::AlreadyExists => n += 1,
                Err(e) => return Err(e),
            }
        };
        let mut out = BufWriter::new(file);
        writeln!(out, "{CSV_HEADER}")?;
        Ok(Recorder { path, out, rows: 0 })
    }

    fn write(&mut self, record: &TickRecord<f64>) -> io::Result<()> {
        record.sample().write_csv_row(&mut self.out)?;
        self.rows += 1;
        Ok(())
    }

    fn finish(mut self) -> io::Result<(PathBuf, u64)> {
        self.out.flush()?;
        Ok((self.path, self.rows))
    }
}

pub struct Engine {
    config: ScenarioConfig,
    session: Session,
    /// `None` until a client moves the pointer.
    device: Option<f64>,
    tick: u64,
    broadcast_hz: f64,
    last_slot: u64,
    record_dir: PathBuf,
    recorder: Option<Recorder>,
    pulley: Option<PulleyReadout>,
    warnings: Vec<String>,
}

impl Engine {
    pub fn new(config: ScenarioConfig, options: EngineOptions) -> Result<Self, ScenarioError> {
        let scenario = config.build::<f64>()?;
        let mut engine = Engine {
            session: Session::new(scenario),
            config,
            device: None,
            tick: 0,
            broadcast_hz: options.broadcast_hz,
            last_slot: 0,
            record_dir: options.record_dir,
            recorder: None,
            pulley: None,
            warnings: Vec::new(),
        };
        engine.refresh_readouts();
        engine.session.observe(engine.drive());
        Ok(engine)
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    pub fn time(&self) -> f64 {
        self.session.time()
    }

    pub fn dt(&self) -> f64 {
        self.session.scene().dt
    }

    pub fn is_recording(&self) -> bool {
        self.recorder.is_some()
    }

    fn drive(&self) -> Drive<f64> {
        match self.device {
            Some(coord) => Drive::Device(coord),
            None => Drive::Force(0.0),
        }
    }

    /// Advances one physics tick. Returns a snapshot when the tick opens a
    /// new broadcast interval.
    pub fn tick(&mut self) -> Option<StateSnapshot> {
        self.session.advance(self.drive());
        self.tick += 1;
        if let (Some(recorder), Some(record)) = (self.recorder.as_mut(), self.session.last()) {
            if let Err(e) = recorder.write(record) {
                tracing::error!("recording stopped: {e}");
                self.recorder = None;
            }
        }
        let slot = (self.time() * self.broadcast_hz + 1e-9).floor() as u64;
        if slot > self.last_slot {
            self.last_slot = slot;
            Some(self.snapshot())
        } else {
            None
        }
    }

    /// State after the most recent tick.
    pub fn snapshot(&self) -> StateSnapshot {
        let record = self.session.last().expect("engine always holds a record");
        let f = &record.forces;
        StateSnapshot {
            tick: self.tick,
            t: record.t,
            s: record.state.s,
            v: record.state.v,
            mode: record.state.mode,
            gravity_total: f.gravity_total,
            gravity_tangential: f.gravity_tangential,
            normal: f.normal,
            applied: f.applied,
            friction: f.friction,
            net: f.net,
            tension: f.tension,
            proxy_s: record.proxy_s.is_finite().then_some(record.proxy_s),
            contact: record.contact,
            rendered: record.rendered,
            scenario: self.config.scenario,
            params: self.config.clone(),
            recording: self.is_recording(),
            pulley: self.pulley.clone(),
            warnings: self.warnings.clone(),
        }
    }

    pub fn apply(&mut self, command: Command) -> Result<Ack, CommandError> {
        let name = command.name();
        match command {
            Command::SetParam { key, value } => {
                let mut next = self.config.clone();
                assign(&mut next, &key, value)?;
                self.reconfigure(next, false, name)
            }
            Command::ProxyInput { device_coord } => {
                if !device_coord.is_finite() {
                    return Err(ScenarioError::Validation {
                        field: "device_coord",
                        reason: "must be finite".into(),
                    }
                    .into());
                }
                self.device = Some(device_coord);
                Ok(Ack::new(name))
            }
            Command::Reset => {
                self.device = None;
                self.session.reset();
                self.session.observe(self.drive());
                Ok(Ack::new(name))
            }
            Command::Record { on } => self.record(on),
            Command::SetScenario { kind } => {
                let mut next = self.config.clone();
                next.scenario = kind;
                if kind == ScenarioKind::Pulley && next.pulley.is_none() {
                    next.pulley = Some(Default::default());
                }
                self.reconfigure(next, true, name)
            }
            Command::LoadScenario { document } => {
                let next = ScenarioConfig::from_value(document)?;
                self.reconfigure(next, true, name)
            }
        }
    }

    fn reconfigure(&mut self, next: ScenarioConfig, reload: bool, name: &str) -> Result<Ack, CommandError> {
        let scenario = next.build::<f64>()?;
        if reload {
            self.device = None;
            self.session.load(scenario);
            self.session.observe(self.drive());
        } else {
            self.session.set_params(scenario.scene, scenario.coupling);
        }
        self.config = next;
        self.refresh_readouts();
        let mut ack = Ack::new(name);
        ack.warnings = self.warnings.clone();
        Ok(ack)
    }

    fn refresh_readouts(&mut self) {
        let scenario = self.config.build::<f64>().expect("config validated before use");
        self.pulley = scenario.pulley.as_ref().map(|problem| {
            let sol = pulley::solve(problem);
            PulleyReadout {
                regime: sol.regime,
                acceleration: sol.acceleration,
                tension: sol.tension,
                friction: sol.friction,
                kinetic_stall: sol.kinetic_stall,
            }
        });
        self.warnings = scenario
            .warnings
            .iter()
            .map(|w| match w {
                ParamWarning::KineticExceedsStatic => "mu_kinetic_exceeds_mu_static".to_string(),
            })
            .collect();
    }

    fn record(&mut self, on: bool) -> Result<Ack, CommandError> {
        let mut ack = Ack::new("record");
        if on {
            if self.recorder.is_none() {
                let mut recorder = Recorder::create(&self.record_dir)?;
                if let Some(record) = self.session.last() {
                    recorder.write(record)?;
                }
                self.recorder = Some(recorder);
            }
            ack.path = self.recorder.as_ref().map(|r| r.path.display().to_string());
        } else if let Some(recorder) = self.recorder.take() {
            let (path, rows) = recorder.finish()?;
            ack.path = Some(path.display().to_string());
            ack.samples = Some(rows);
        }
        Ok(ack)
    }
}

fn assign(config: &mut ScenarioConfig, key: &str, value: f64) -> Result<(), CommandError> {
    let pulley_scene = config.scenario == ScenarioKind::Pulley;
    match key {
        "mass_kg" => {
            config.mass_kg = value;
            if pulley_scene {
                config.pulley.get_or_insert_with(Default::default).m1_kg = value;
            }
        }
        "angle_deg" => config.angle_deg = value,
        "mu_static" => config.mu_static = value,
        "mu_kinetic" => config.mu_kinetic = value,
        "gravity" => config.gravity = value,
        "dt_s" => config.dt_s = value,
        "stick_velocity_epsilon" => config.stick_velocity_epsilon = value,
        "bounds.min_m" => config.bounds.min_m = value,
        "bounds.max_m" => config.bounds.max_m = value,
        "m1_kg" => {
            config.pulley.get_or_insert_with(Default::default).m1_kg = value;
            if pulley_scene {
                config.mass_kg = value;
            }
        }
        "m2_kg" => config.pulley.get_or_insert_with(Default::default).m2_kg = value,
        "coupling.stiffness_n_per_m" => config.coupling.stiffness_n_per_m = value,
        "coupling.damping" => config.coupling.damping = value,
        "coupling.max_force_n" => config.coupling.max_force_n = value,
        "coupling.block_half_length_m" => config.coupling.block_half_length_m = value,
        "coupling.workspace_scale_m" => config.coupling.workspace_scale_m = Some(value),
        _ => return Err(CommandError::UnknownKey(key.to_string())),
    }
    Ok(())
}
