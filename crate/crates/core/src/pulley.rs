//! Released-from-rest outcome of a block on an incline tied over an ideal
//! pulley to a hanging mass.

use serde::{Deserialize, Serialize};

use crate::physics::{non_negative, positive, ParamError, ParamWarning};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulleyProblem<T> {
    /// Block on the incline, kg.
    pub m1: T,
    /// Hanging mass, kg.
    pub m2: T,
    /// Incline angle, radians.
    pub angle: T,
    pub mu_static: T,
    pub mu_kinetic: T,
    pub gravity: T,
}

impl<T: Scalar> PulleyProblem<T> {
    pub fn validate(&self) -> Result<Vec<ParamWarning>, ParamError> {
        positive(self.m1, "m1_kg")?;
        positive(self.m2, "m2_kg")?;
        if !(self.angle >= T::zero() && self.angle < T::FRAC_PI_2()) {
            return Err(ParamError::invalid("angle_deg", "must lie in [0, 90) degrees"));
        }
        non_negative(self.mu_static, "mu_static")?;
        non_negative(self.mu_kinetic, "mu_kinetic")?;
        positive(self.gravity, "gravity")?;
        Ok(if self.mu_kinetic > self.mu_static {
            vec![ParamWarning::KineticExceedsStatic]
        } else {
            Vec::new()
        })
    }

    /// Net pull on the block along +s (up-slope) with friction ignored.
    pub fn driving_force(&self) -> T {
        self.m2 * self.gravity - self.m1 * self.gravity * self.angle.sin()
    }

    pub fn normal_force(&self) -> T {
        self.m1 * self.gravity * self.angle.cos()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulleyRegime {
    Equilibrium,
    /// Block moves up the slope, hanging mass descends.
    SlidesUpIncline,
    /// Block moves down the slope, hanging mass rises.
    SlidesDownIncline,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulleySolution<T> {
    pub regime: PulleyRegime,
    /// Acceleration magnitude, m/s².
    pub acceleration: T,
    pub tension: T,
    /// Friction on the block, signed along +s.
    pub friction: T,
    /// Set when μk > μs leaves a released system unable to keep moving.
    pub kinetic_stall: bool,
}

/// Classifies the motion of the released system and solves for its
/// acceleration and string tension.
pub fn solve<T: Scalar>(problem: &PulleyProblem<T>) -> PulleySolution<T> {
    let drive = problem.driving_force();
    let normal = problem.normal_force();
    // rounding slack so that an exact textbook balance (e.g. m2 = m1·sinθ)
    // is not reported as motion because sin(π/6) ≠ 0.5 in floating point
    let slack = T::lit(8.0) * T::epsilon() * (problem.m1 + problem.m2) * problem.gravity;
    let static_limit = problem.mu_static * normal + slack;
    let equilibrium = |friction: T, kinetic_stall: bool| PulleySolution {
        regime: PulleyRegime::Equilibrium,
        acceleration: T::zero(),
        tension: problem.m2 * problem.gravity,
        friction,
        kinetic_stall,
    };

    if drive.abs() <= static_limit {
        return equilibrium(-drive, false);
    }
    let kinetic = problem.mu_kinetic * normal;
    let excess = drive.abs() - kinetic;
    if excess <= T::zero() {
        return equilibrium(-drive, true);
    }
    let acceleration = excess / (problem.m1 + problem.m2);
    if drive > T::zero() {
        PulleySolution {
            regime: PulleyRegime::SlidesUpIncline,
            acceleration,
            tension: problem.m2 * (problem.gravity - acceleration),
            friction: -kinetic,
            kinetic_stall: false,
        }
    } else {
        PulleySolution {
            regime: PulleyRegime::SlidesDownIncline,
            acceleration,
            tension: problem.m2 * (problem.gravity + acceleration),
            friction: kinetic,
            kinetic_stall: false,
        }
    }
}
