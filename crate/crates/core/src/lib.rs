//! Stick-slip friction engine for a block constrained to one axis of an
//! inclined plane, with proxy-based haptic coupling, a two-body pulley
//! solver, trajectory recording and the learning-gain statistics used to
//! evaluate the simulator in class.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`). The
//! aliases at the crate root pin the common `f64` instantiation.

pub mod assessment;
pub mod haptic;
pub mod physics;
pub mod pulley;
pub mod scalar;
pub mod session;
pub mod sweep;

pub use scalar::Scalar;

pub use physics::{ContactMode, ParamError, ParamWarning};
pub use pulley::PulleyRegime;
pub use session::{Drive, InputSource, ScenarioError, ScenarioKind};

pub type Bounds = physics::Bounds<f64>;
pub type SceneParams = physics::SceneParams<f64>;
pub type BlockState = physics::BlockState<f64>;
pub type ForceBreakdown = physics::ForceBreakdown<f64>;

pub type PulleyProblem = pulley::PulleyProblem<f64>;
pub type PulleySolution = pulley::PulleySolution<f64>;

pub type ProxyState = haptic::ProxyState<f64>;
pub type CouplingParams = haptic::CouplingParams<f64>;
pub type ScriptedDevice = haptic::ScriptedDevice<f64>;

pub type Scenario = session::Scenario<f64>;
pub type Session = session::Session<f64>;
pub type Trajectory = session::Trajectory<f64>;
pub type TrajectorySample = session::TrajectorySample<f64>;

pub type ScorePair = assessment::ScorePair<f64>;
pub type TTestResult = assessment::TTestResult<f64>;

/// Single-precision instantiation of the physics types.
pub mod f32 {
    pub type SceneParams = crate::physics::SceneParams<f32>;
    pub type BlockState = crate::physics::BlockState<f32>;
    pub type ForceBreakdown = crate::physics::ForceBreakdown<f32>;
    pub type PulleyProblem = crate::pulley::PulleyProblem<f32>;
    pub type CouplingParams = crate::haptic::CouplingParams<f32>;
    pub type Scenario = crate::session::Scenario<f32>;
}
