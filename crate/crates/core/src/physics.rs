//! Coulomb stick-slip dynamics of a block on an inclined plane.
//!
//! The block moves along a single axis `s` that points up the slope. Each
//! call to [`step`] advances the block by one fixed timestep with
//! semi-implicit Euler and a two-state contact machine (static/kinetic).
//! Travel is limited to [`Bounds`]; a block pushed against a bound while at
//! rest is held there with zero net force, and a block that overshoots a
//! bound is mirrored back with its momentum inverted.
//!
//! An optional hanging mass pulling up the slope through an ideal pulley is
//! folded into the same state machine (see [`SceneParams::hanging_mass`]).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Scalar;

/// Standard gravity, m/s².
pub const STANDARD_GRAVITY: f64 = 9.80665;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("invalid value for `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
}

impl ParamError {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        ParamError::Invalid {
            field,
            reason: reason.into(),
        }
    }

    /// Name of the offending configuration key.
    pub fn field(&self) -> &'static str {
        match self {
            ParamError::Invalid { field, .. } => field,
        }
    }
}

/// Well-defined but physically unusual configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamWarning {
    /// μk > μs: a block released past the breakaway threshold may be unable
    /// to keep sliding.
    KineticExceedsStatic,
}

impl std::fmt::Display for ParamWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParamWarning::KineticExceedsStatic => {
                f.write_str("mu_kinetic exceeds mu_static")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhysicsError {
    /// Static friction was requested for a load outside the static cone.
    #[error("driving force {driving} exceeds the static friction limit {limit}")]
    StaticConeViolation { driving: f64, limit: f64 },
}

/// Admissible positions along the incline axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds<T> {
    pub min: T,
    pub max: T,
}

impl<T: Scalar> Bounds<T> {
    pub fn new(min: T, max: T) -> Self {
        Bounds { min, max }
    }

    pub fn midpoint(&self) -> T {
        (self.min + self.max) / T::lit(2.0)
    }

    pub fn half_width(&self) -> T {
        (self.max - self.min) / T::lit(2.0)
    }

    pub fn contains(&self, s: T) -> bool {
        s >= self.min && s <= self.max
    }

    pub fn clamp(&self, s: T) -> T {
        s.max(self.min).min(self.max)
    }
}

/// Physical configuration of the incline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneParams<T> {
    /// Block mass, kg.
    pub mass: T,
    /// Incline angle from horizontal, radians.
    pub angle: T,
    pub mu_static: T,
    pub mu_kinetic: T,
    /// Gravitational acceleration magnitude, m/s².
    pub gravity: T,
    pub bounds: Bounds<T>,
    /// Fixed timestep, s.
    pub dt: T,
    /// Speed below which a sliding block may re-stick, m/s.
    pub stick_velocity_epsilon: T,
    /// Mass hanging from a string over a pulley at the top of the incline,
    /// kg. Zero for a lone block.
    pub hanging_mass: T,
}

impl<T: Scalar> Default for SceneParams<T> {
    fn default() -> Self {
        SceneParams {
            mass: T::one(),
            angle: T::lit(20.0).to_radians(),
            mu_static: T::lit(0.5),
            mu_kinetic: T::lit(0.3),
            gravity: T::lit(STANDARD_GRAVITY),
            bounds: Bounds::new(T::zero(), T::one()),
            dt: T::lit(0.001),
            stick_velocity_epsilon: T::lit(1e-6),
            hanging_mass: T::zero(),
        }
    }
}

impl<T: Scalar> SceneParams<T> {
    /// Checks every invariant; returns the warnings of a valid configuration.
    ///
    /// Errors name the configuration key of the first violated invariant.
    pub fn validate(&self) -> Result<Vec<ParamWarning>, ParamError> {
        let zero = T::zero();
        positive(self.mass, "mass_kg")?;
        if !(self.angle >= zero && self.angle < T::FRAC_PI_2()) {
            return Err(ParamError::invalid(
                "angle_deg",
                "must lie in [0, 90) degrees",
            ));
        }
        non_negative(self.mu_static, "mu_static")?;
        non_negative(self.mu_kinetic, "mu_kinetic")?;
        positive(self.gravity, "gravity")?;
        if !(self.bounds.min.is_finite()
            && self.bounds.max.is_finite()
            && self.bounds.min < self.bounds.max)
        {
            return Err(ParamError::invalid("bounds", "min_m must be below max_m"));
        }
        positive(self.dt, "dt_s")?;
        positive(self.stick_velocity_epsilon, "stick_velocity_epsilon")?;
        non_negative(self.hanging_mass, "m2_kg")?;

        let mut warnings = Vec::new();
        if self.mu_kinetic > self.mu_static {
            warnings.push(ParamWarning::KineticExceedsStatic);
        }
        Ok(warnings)
    }

    fn total_mass(&self) -> T {
        self.mass + self.hanging_mass
    }

    /// Largest friction magnitude the contact can ever produce.
    pub fn friction_ceiling(&self) -> T {
        self.mu_static.max(self.mu_kinetic) * normal_force(self)
    }
}

pub(crate) fn positive<T: Scalar>(x: T, field: &'static str) -> Result<(), ParamError> {
    if x.is_finite() && x > T::zero() {
        Ok(())
    } else {
        Err(ParamError::invalid(field, "must be a finite positive number"))
    }
}

pub(crate) fn non_negative<T: Scalar>(x: T, field: &'static str) -> Result<(), ParamError> {
    if x.is_finite() && x >= T::zero() {
        Ok(())
    } else {
        Err(ParamError::invalid(field, "must be a finite non-negative number"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactMode {
    Static,
    Kinetic,
}

impl ContactMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ContactMode::Static => "static",
            ContactMode::Kinetic => "kinetic",
        }
    }
}

/// Dynamic state of the block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockState<T> {
    /// Position along the incline, m (+ is up-slope).
    pub s: T,
    /// Velocity along the incline, m/s.
    pub v: T,
    pub mode: ContactMode,
}

impl<T: Scalar> BlockState<T> {
    pub fn at_rest(s: T) -> Self {
        BlockState {
            s,
            v: T::zero(),
            mode: ContactMode::Static,
        }
    }

    pub fn sliding(s: T, v: T) -> Self {
        BlockState {
            s,
            v,
            mode: ContactMode::Kinetic,
        }
    }
}

/// Forces acting on the block during one tick, signed along +s unless noted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceBreakdown<T> {
    /// Weight magnitude m·g.
    pub gravity_total: T,
    /// Weight component along the incline, −m·g·sinθ.
    pub gravity_tangential: T,
    /// Normal force magnitude.
    pub normal: T,
    /// User force along the incline.
    pub applied: T,
    pub friction: T,
    /// Resultant force on the block.
    pub net: T,
    /// String tension pulling up-slope; zero without a hanging mass.
    pub tension: T,
}

pub fn normal_force<T: Scalar>(params: &SceneParams<T>) -> T {
    params.mass * params.gravity * params.angle.cos()
}

pub fn gravity_tangential<T: Scalar>(params: &SceneParams<T>) -> T {
    -(params.mass * params.gravity * params.angle.sin())
}

/// Upper limit μs·N of the static friction force.
pub fn max_static_friction<T: Scalar>(params: &SceneParams<T>) -> T {
    params.mu_static * normal_force(params)
}

/// Net non-friction force along +s on the whole (block + hanging mass)
/// system: applied force plus the tangential weight of the block plus the
/// weight of the hanging mass.
pub fn driving_force<T: Scalar>(params: &SceneParams<T>, applied: T) -> T {
    let load = applied + gravity_tangential(params);
    if params.hanging_mass > T::zero() {
        load + params.hanging_mass * params.gravity
    } else {
        load
    }
}

/// Whether a block at rest breaks loose under `applied`.
pub fn will_slip<T: Scalar>(params: &SceneParams<T>, applied: T) -> bool {
    driving_force(params, applied).abs() > max_static_friction(params)
}

/// The friction force that exactly balances `applied` on a block at rest.
pub fn static_friction<T: Scalar>(params: &SceneParams<T>, applied: T) -> Result<T, PhysicsError> {
    let driving = driving_force(params, applied);
    let limit = max_static_friction(params);
    if driving.abs() > limit {
        return Err(PhysicsError::StaticConeViolation {
            driving: driving.to_f64_lossy(),
            limit: limit.to_f64_lossy(),
        });
    }
    Ok(-driving)
}

/// Sliding friction μk·N opposing the velocity, or opposing the driving
/// force when slip has just started from `v = 0`.
pub fn kinetic_friction<T: Scalar>(params: &SceneParams<T>, v: T, driving: T) -> T {
    let direction = if v != T::zero() {
        v.sign_or_zero()
    } else {
        driving.sign_or_zero()
    };
    -direction * params.mu_kinetic * normal_force(params)
}

fn base_breakdown<T: Scalar>(params: &SceneParams<T>, applied: T) -> ForceBreakdown<T> {
    ForceBreakdown {
        gravity_total: params.mass * params.gravity,
        gravity_tangential: gravity_tangential(params),
        normal: normal_force(params),
        applied,
        friction: T::zero(),
        net: T::zero(),
        tension: params.hanging_mass * params.gravity,
    }
}

/// Breakdown of a block held at rest: friction balances the drive up to
/// the static limit, any remainder is taken by a bound, and nothing moves.
fn resting_breakdown<T: Scalar>(params: &SceneParams<T>, applied: T, driving: T) -> ForceBreakdown<T> {
    let limit = max_static_friction(params);
    ForceBreakdown {
        friction: -driving.max(-limit).min(limit),
        ..base_breakdown(params, applied)
    }
}

fn pressed_against_bound<T: Scalar>(params: &SceneParams<T>, s: T, push: T) -> bool {
    (s >= params.bounds.max && push > T::zero()) || (s <= params.bounds.min && push < T::zero())
}

/// Resolves the contact mode and forces at the current instant without
/// advancing time. A static block loaded past its static limit is
/// reported as having started to slip.
pub fn evaluate<T: Scalar>(
    state: BlockState<T>,
    params: &SceneParams<T>,
    applied: T,
) -> (BlockState<T>, ForceBreakdown<T>) {
    let driving = driving_force(params, applied);
    let limit = max_static_friction(params);
    let holds = driving.abs() <= limit || pressed_against_bound(params, state.s, driving);
    if state.mode == ContactMode::Static && holds {
        return (state, resting_breakdown(params, applied, driving));
    }
    let friction = sliding_friction(params, state.v, driving);
    let system_net = driving + friction;
    let accel = system_net / params.total_mass();
    let state = BlockState {
        mode: ContactMode::Kinetic,
        ..state
    };
    (
        state,
        ForceBreakdown {
            friction,
            net: block_net(params, system_net, accel),
            tension: params.hanging_mass * (params.gravity - accel),
            ..base_breakdown(params, applied)
        },
    )
}

/// Kinetic friction, except that a block at `v = 0` is never pushed
/// backwards by it (only reachable when μk exceeds the breakaway load).
fn sliding_friction<T: Scalar>(params: &SceneParams<T>, v: T, driving: T) -> T {
    let friction = kinetic_friction(params, v, driving);
    if v == T::zero() && friction.abs() > driving.abs() {
        -driving
    } else {
        friction
    }
}

/// Resultant on the block alone; the system resultant when nothing hangs.
fn block_net<T: Scalar>(params: &SceneParams<T>, system_net: T, accel: T) -> T {
    if params.hanging_mass > T::zero() {
        params.mass * accel
    } else {
        system_net
    }
}

/// Rebound speed, in ticks of acceleration, below which the block is
/// captured by the wall it hit.
const REST_TICKS: f64 = 4.0;

/// Advances the block by one timestep under a tangential `applied` force.
///
/// The returned breakdown lists the forces acting during the tick. A block
/// that comes to rest within the tick reports the static balance that holds
/// it at the end of the tick, so every static sample has zero net force.
pub fn step<T: Scalar>(
    state: BlockState<T>,
    params: &SceneParams<T>,
    applied: T,
) -> (BlockState<T>, ForceBreakdown<T>) {
    let zero = T::zero();
    let driving = driving_force(params, applied);
    let limit = max_static_friction(params);

    if state.mode == ContactMode::Static {
        if driving.abs() <= limit {
            return (state, resting_breakdown(params, applied, driving));
        }
        if pressed_against_bound(params, state.s, driving) {
            let held = enforce_bounds(state, params, true);
            return (held, resting_breakdown(params, applied, driving));
        }
    }

    let friction = sliding_friction(params, state.v, driving);
    let system_net = driving + friction;
    let accel = system_net / params.total_mass();
    let mut v = state.v + accel * params.dt;
    let mut mode = ContactMode::Kinetic;

    let reversed = v * state.v < zero;
    let creeping = v.abs() < params.stick_velocity_epsilon && driving.abs() <= limit;
    if reversed || creeping {
        v = zero;
        if driving.abs() <= limit {
            mode = ContactMode::Static;
        }
    }
    if mode == ContactMode::Static {
        return (
            BlockState { s: state.s, v, mode },
            resting_breakdown(params, applied, driving),
        );
    }

    let mut moved = BlockState {
        s: state.s + v * params.dt,
        v,
        mode,
    };
    let outward = (moved.s > params.bounds.max && system_net > zero)
        || (moved.s < params.bounds.min && system_net < zero);
    let overshot = !params.bounds.contains(moved.s);
    let wall = if moved.s > params.bounds.max {
        params.bounds.max
    } else {
        params.bounds.min
    };
    if overshot {
        // speed at the moment of impact, not at the end of the tick
        let tau = ((wall - state.s) / (v * params.dt)).max(zero).min(T::one());
        moved.v = state.v + accel * params.dt * tau;
    }
    let bounded = enforce_bounds(moved, params, outward);

    // Rebounds slower than a few ticks of acceleration are not resolvable
    // at this timestep and would chatter forever: treat them as inelastic.
    if overshot && outward && bounded.v.abs() <= T::lit(REST_TICKS) * accel.abs() * params.dt {
        return (
            BlockState::at_rest(wall),
            resting_breakdown(params, applied, driving),
        );
    }

    (
        bounded,
        ForceBreakdown {
            friction,
            net: block_net(params, system_net, accel),
            tension: params.hanging_mass * (params.gravity - accel),
            ..base_breakdown(params, applied)
        },
    )
}

/// Keeps the block inside its bounds.
///
/// A block sitting on a bound while pushed outward (`outward_push`) is held
/// motionless. A block past a bound is mirrored back inside and its velocity
/// negated.
pub fn enforce_bounds<T: Scalar>(
    state: BlockState<T>,
    params: &SceneParams<T>,
    outward_push: bool,
) -> BlockState<T> {
    let two = T::lit(2.0);
    let Bounds { min, max } = params.bounds;
    let reflected = |s: T| -> BlockState<T> {
        let v = -state.v;
        BlockState {
            s: params.bounds.clamp(s),
            v,
            mode: if v != T::zero() {
                ContactMode::Kinetic
            } else {
                state.mode
            },
        }
    };
    if state.s > max {
        reflected(two * max - state.s)
    } else if state.s < min {
        reflected(two * min - state.s)
    } else if outward_push
        && ((state.s == max && state.v >= T::zero()) || (state.s == min && state.v <= T::zero()))
    {
        BlockState::at_rest(state.s)
    } else {
        state
    }
}
