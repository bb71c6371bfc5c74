//! Breakaway experiments: ramp a push up the slope from rest and record the
//! force at which the block lets go, across a grid of one parameter.

use std::str::FromStr;

use thiserror::Error;

use crate::physics::{ContactMode, SceneParams};
use crate::session::{Drive, Scenario, Session};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SweepError {
    #[error("sweep spec `{0}` is not of the form name=start:end:count")]
    Syntax(String),
    #[error("unknown sweep parameter `{0}` (expected mu_s or angle_deg)")]
    UnknownParam(String),
    #[error("sweep needs at least one point")]
    Empty,
    #[error("sweep point {value} for {param} is invalid: {reason}")]
    InvalidPoint { param: &'static str, value: f64, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    MuStatic,
    AngleDeg,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::MuStatic => "mu_s",
            SweepParam::AngleDeg => "angle_deg",
        }
    }
}

/// `param=start:end:count`, `count` points evenly spaced with both ends
/// included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

impl FromStr for SweepSpec {
    type Err = SweepError;

    fn from_str(spec: &str) -> Result<Self, Self::Err> {
        let syntax = || SweepError::Syntax(spec.to_string());
        let (name, range) = spec.split_once('=').ok_or_else(syntax)?;
        let param = match name.trim() {
            "mu_s" | "mu_static" => SweepParam::MuStatic,
            "angle_deg" | "angle" => SweepParam::AngleDeg,
            other => return Err(SweepError::UnknownParam(other.to_string())),
        };
        let parts: Vec<&str> = range.split(':').map(str::trim).collect();
        let [start, end, count] = parts.as_slice() else {
            return Err(syntax());
        };
        let start: f64 = start.parse().map_err(|_| syntax())?;
        let end: f64 = end.parse().map_err(|_| syntax())?;
        let count: usize = count.parse().map_err(|_| syntax())?;
        if !(start.is_finite() && end.is_finite()) {
            return Err(syntax());
        }
        if count == 0 {
            return Err(SweepError::Empty);
        }
        Ok(SweepSpec { param, start, end, count })
    }
}

impl SweepSpec {
    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let span = self.end - self.start;
        let last = (self.count - 1) as f64;
        (0..self.count)
            .map(|i| self.start + span * i as f64 / last)
            .collect()
    }
}

/// Force ramp used to find the breakaway point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BreakawayRamp<T> {
    /// N/s.
    pub rate: T,
    /// Give up once the ramp exceeds this force, N.
    pub max_force: T,
}

impl<T: Scalar> Default for BreakawayRamp<T> {
    fn default() -> Self {
        BreakawayRamp {
            rate: T::one(),
            max_force: T::lit(1000.0),
        }
    }
}

/// Closed-form up-slope push at which a resting block starts to move; zero
/// when the block cannot rest unaided.
pub fn analytic_breakaway<T: Scalar>(scene: &SceneParams<T>) -> T {
    let weight = scene.mass * scene.gravity;
    let along = weight * scene.angle.sin() - scene.hanging_mass * scene.gravity;
    let grip = scene.mu_static * weight * scene.angle.cos();
    if along.abs() > grip {
        T::zero()
    } else {
        along + grip
    }
}

/// Ramps the applied force from zero on a block at rest at `s` and returns
/// the force of the first kinetic tick.
pub fn measure_breakaway<T: Scalar>(scenario: &Scenario<T>, ramp: &BreakawayRamp<T>) -> Option<T> {
    let mut scenario = scenario.clone();
    scenario.initial.v = T::zero();
    scenario.initial.mode = ContactMode::Static;
    let dt = scenario.scene.dt;
    let mut session = Session::new(scenario);
    let first = session.observe(Drive::Force(T::zero()));
    if first.mode == ContactMode::Kinetic {
        return Some(first.applied);
    }
    let mut tick = 0u64;
    loop {
        tick += 1;
        let force = ramp.rate * T::from_u64(tick)? * dt;
        if force > ramp.max_force {
            return None;
        }
        let sample = session.advance(Drive::Force(force));
        if sample.mode == ContactMode::Kinetic {
            return Some(sample.applied);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BreakawayRow {
    pub param: f64,
    pub measured: Option<f64>,
    pub analytic: f64,
    pub rel_err: f64,
}

impl BreakawayRow {
    pub const CSV_HEADER: &'static str = "param,measured,analytic,rel_err";

    pub fn csv_line(&self) -> String {
        use crate::session::format_sig9;
        format!(
            "{},{},{},{}",
            format_sig9(self.param),
            self.measured.map(format_sig9).unwrap_or_else(|| "NaN".to_string()),
            format_sig9(self.analytic),
            format_sig9(self.rel_err)
        )
    }
}

fn relative_error(measured: f64, analytic: f64) -> f64 {
    if measured == analytic {
        0.0
    } else {
        (measured - analytic).abs() / analytic.abs()
    }
}

/// Measures the breakaway force at every point of `spec`, starting from
/// `base`.
pub fn breakaway_sweep(
    base: &Scenario<f64>,
    spec: &SweepSpec,
    ramp: &BreakawayRamp<f64>,
) -> Result<Vec<BreakawayRow>, SweepError> {
    spec.points()
        .into_iter()
        .map(|value| {
            let mut scenario = base.clone();
            match spec.param {
                SweepParam::MuStatic => scenario.scene.mu_static = value,
                SweepParam::AngleDeg => {
                    if !(0.0..90.0).contains(&value) {
                        return Err(SweepError::InvalidPoint {
                            param: spec.param.name(),
                            value,
                            reason: "must lie in [0, 90) degrees".to_string(),
                        });
                    }
                    scenario.scene.angle = value.to_radians();
                }
            }
            scenario.scene.validate().map_err(|e| SweepError::InvalidPoint {
                param: spec.param.name(),
                value,
                reason: e.to_string(),
            })?;
            let measured = measure_breakaway(&scenario, ramp);
            let analytic = analytic_breakaway(&scenario.scene);
            Ok(BreakawayRow {
                param: value,
                measured,
                analytic,
                rel_err: measured.map_or(f64::NAN, |m| relative_error(m, analytic)),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;
    use crate::physics::BlockState;

    fn flat() -> Scenario<f64> {
        let scene = SceneParams {
            angle: 0.0,
            gravity: 9.8,
            ..SceneParams::default()
        };
        Scenario::incline(scene, BlockState::at_rest(0.5)).unwrap()
    }

    #[test]
    fn parses_specs() {
        let spec: SweepSpec = "mu_s=0.1:0.9:5".parse().unwrap();
        assert_eq!(spec.param, SweepParam::MuStatic);
        let pts = spec.points();
        assert_eq!(pts.len(), 5);
        assert_relative_eq!(pts[2], 0.5, max_relative = 1e-15);
        assert_eq!(pts[4], 0.9);
        assert_eq!("angle_deg=10:40:1".parse::<SweepSpec>().unwrap().points(), vec![10.0]);
        assert!(matches!("mass=1:2:3".parse::<SweepSpec>(), Err(SweepError::UnknownParam(_))));
        assert!(matches!("mu_s=1:2".parse::<SweepSpec>(), Err(SweepError::Syntax(_))));
        assert!(matches!("mu_s=1:2:0".parse::<SweepSpec>(), Err(SweepError::Empty)));
    }

    #[test]
    fn flat_mu_sweep_tracks_mu_m_g() {
        let rows = breakaway_sweep(&flat(), &"mu_s=0.1:0.9:5".parse().unwrap(), &BreakawayRamp::default()).unwrap();
        let expected = [0.98, 2.94, 4.9, 6.86, 8.82];
        for (row, want) in rows.iter().zip(expected) {
            assert_relative_eq!(row.analytic, want, max_relative = 1e-12);
            assert!(row.rel_err < 0.01, "{row:?}");
        }
    }

    #[test]
    fn past_the_angle_of_repose_the_block_slips_unaided() {
        let rows = breakaway_sweep(&flat(), &"angle_deg=20:35:4".parse().unwrap(), &BreakawayRamp::default()).unwrap();
        for row in rows {
            let self_slips = row.param.to_radians().tan() > 0.5;
            assert_eq!(row.measured == Some(0.0), self_slips, "{row:?}");
            assert_eq!(row.analytic == 0.0, self_slips);
        }
    }

    #[test]
    fn ramp_cap_gives_up() {
        let ramp = BreakawayRamp { rate: 1.0, max_force: 0.5 };
        assert_eq!(measure_breakaway(&flat(), &ramp), None);
    }
}
