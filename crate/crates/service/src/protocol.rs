//! Wire messages. Every message is a JSON text frame tagged by `"type"`;
//! angles travel in degrees, everything else in SI units.

use frictionlab_core::session::ScenarioConfig;
use frictionlab_core::{ContactMode, PulleyRegime, ScenarioKind};
use serde::{Deserialize, Serialize};

/// Messages a client may send.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Cmd(Command),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "snake_case")]
pub enum Command {
    /// Changes one scenario key between ticks, e.g. `angle_deg` or
    /// `coupling.stiffness_n_per_m`.
    SetParam { key: String, value: f64 },
    /// Latest pointer position in device units; the last one per tick wins.
    ProxyInput { device_coord: f64 },
    Reset,
    Record { on: bool },
    SetScenario { kind: ScenarioKind },
    LoadScenario { document: serde_json::Value },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::SetParam { .. } => "set_param",
            Command::ProxyInput { .. } => "proxy_input",
            Command::Reset => "reset",
            Command::Record { .. } => "record",
            Command::SetScenario { .. } => "set_scenario",
            Command::LoadScenario { .. } => "load_scenario",
        }
    }
}

/// Messages the server sends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    State(StateSnapshot),
    Ack(Ack),
    Error(ErrorReply),
}

impl ServerMessage {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSnapshot {
    /// Ticks since the service started.
    pub tick: u64,
    pub t: f64,
    pub s: f64,
    pub v: f64,
    pub mode: ContactMode,
    pub gravity_total: f64,
    pub gravity_tangential: f64,
    pub normal: f64,
    pub applied: f64,
    pub friction: f64,
    pub net: f64,
    pub tension: f64,
    /// Proxy position on the incline axis, m.
    pub proxy_s: Option<f64>,
    pub contact: bool,
    /// Force sent back to the device, N.
    pub rendered: f64,
    pub scenario: ScenarioKind,
    pub params: ScenarioConfig,
    pub recording: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pulley: Option<PulleyReadout>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Released-from-rest solution shown alongside a pulley scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulleyReadout {
    pub regime: PulleyRegime,
    pub acceleration: f64,
    pub tension: f64,
    pub friction: f64,
    pub kinetic_stall: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ack {
    pub cmd: String,
    /// Recording file, on `record` commands.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    /// Rows written, when a recording stops.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl Ack {
    pub fn new(cmd: &str) -> Self {
        Ack {
            cmd: cmd.to_string(),
            path: None,
            samples: None,
            warnings: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    /// Not JSON, or not a known message.
    Malformed,
    /// Well-formed command with an unacceptable value.
    Validation,
    UnknownKey,
    Io,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReply {
    pub error: ErrorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cmd: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    pub message: String,
}
