//! Device side of the simulator: workspace mapping, the spring-damper
//! coupling between the pointer proxy and the block, and a scripted device
//! that stands in for real hardware.

use thiserror::Error;

use crate::physics::{positive, BlockState, Bounds, ParamError};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HapticError {
    #[error("script keyframe {index} does not advance in time")]
    NonMonotonicScript { index: usize },
    #[error("script keyframe {index} is not finite")]
    NonFiniteScript { index: usize },
}

/// Pointer position projected onto the incline axis.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ProxyState<T> {
    pub s_proxy: T,
    pub v_proxy: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingParams<T> {
    /// Spring constant, N/m.
    pub stiffness: T,
    /// Damping on closing speed, N·s/m.
    pub damping: T,
    /// Force limit of the device, N.
    pub max_force: T,
    /// Distance from block center to either face, m.
    pub block_half_length: T,
    /// Metres of travel per device unit. `None` spans the block bounds.
    pub workspace_scale: Option<T>,
}

impl<T: Scalar> Default for CouplingParams<T> {
    fn default() -> Self {
        CouplingParams {
            stiffness: T::lit(500.0),
            damping: T::lit(5.0),
            max_force: T::lit(9.0),
            block_half_length: T::lit(0.05),
            workspace_scale: None,
        }
    }
}

impl<T: Scalar> CouplingParams<T> {
    pub fn validate(&self) -> Result<(), ParamError> {
        positive(self.stiffness, "coupling.stiffness_n_per_m")?;
        if !(self.damping.is_finite() && self.damping >= T::zero()) {
            return Err(ParamError::invalid("coupling.damping", "must be a finite non-negative number"));
        }
        positive(self.max_force, "coupling.max_force_n")?;
        positive(self.block_half_length, "coupling.block_half_length_m")?;
        if let Some(scale) = self.workspace_scale {
            positive(scale, "coupling.workspace_scale_m")?;
        }
        Ok(())
    }

    /// Maps a device coordinate in `[-1, 1]` onto the incline axis. The
    /// device center lands on the middle of `bounds`; coordinates outside
    /// the unit range extrapolate linearly.
    pub fn map_workspace(&self, device_coord: T, bounds: &Bounds<T>) -> T {
        map_workspace(device_coord, bounds, self.workspace_scale)
    }
}

/// Affine device→axis map. Without an explicit scale, `±1` reaches the bounds.
pub fn map_workspace<T: Scalar>(device_coord: T, bounds: &Bounds<T>, scale: Option<T>) -> T {
    let scale = scale.unwrap_or_else(|| bounds.half_width());
    bounds.midpoint() + device_coord * scale
}

/// Result of one coupling evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingForce<T> {
    pub applied_to_block: T,
    pub rendered_to_device: T,
    /// Depth of the proxy inside the block, m (≤ 0 means no contact).
    pub penetration: T,
}

impl<T: Scalar> CouplingForce<T> {
    pub fn in_contact(&self) -> bool {
        self.penetration > T::zero()
    }
}

/// Spring-damper force between the proxy and the nearest face of the block.
///
/// A proxy below the block center pushes up-slope through the lower face; a
/// proxy above it pushes down-slope through the upper face. The damper only
/// resists closing motion, so it never pulls the faces together.
pub fn coupling_force<T: Scalar>(
    proxy: ProxyState<T>,
    block: BlockState<T>,
    params: &CouplingParams<T>,
) -> CouplingForce<T> {
    let zero = T::zero();
    let offset = proxy.s_proxy - block.s;
    // +1: pushing the lower face up-slope, −1: pushing the upper face down
    let direction = if offset <= zero { T::one() } else { -T::one() };
    let penetration = params.block_half_length - offset.abs();
    if !(penetration > zero) {
        return CouplingForce {
            applied_to_block: zero,
            rendered_to_device: zero,
            penetration,
        };
    }
    let closing_speed = direction * (proxy.v_proxy - block.v);
    let magnitude = params.stiffness * penetration + params.damping * closing_speed.max(zero);
    let applied = direction * magnitude.min(params.max_force);
    CouplingForce {
        applied_to_block: applied,
        rendered_to_device: -applied,
        penetration,
    }
}

/// Device that replays a piecewise-linear script of `(t, device_coord)`
/// keyframes. Holds the first value before the script starts and the last
/// value after it ends; an empty script rests at 0.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScriptedDevice<T> {
    keyframes: Vec<(T, T)>,
}

impl<T: Scalar> ScriptedDevice<T> {
    pub fn new(keyframes: Vec<(T, T)>) -> Result<Self, HapticError> {
        for (index, &(t, c)) in keyframes.iter().enumerate() {
            if !(t.is_finite() && c.is_finite()) {
                return Err(HapticError::NonFiniteScript { index });
            }
            if index > 0 && t <= keyframes[index - 1].0 {
                return Err(HapticError::NonMonotonicScript { index });
            }
        }
        Ok(ScriptedDevice { keyframes })
    }

    pub fn keyframes(&self) -> &[(T, T)] {
        &self.keyframes
    }

    pub fn sample(&self, t: T) -> T {
        let frames = &self.keyframes;
        let Some(&(t_first, c_first)) = frames.first() else {
            return T::zero();
        };
        if t <= t_first {
            return c_first;
        }
        let next = frames.partition_point(|&(tk, _)| tk <= t);
        if next == frames.len() {
            return frames[next - 1].1;
        }
        let (t0, c0) = frames[next - 1];
        let (t1, c1) = frames[next];
        c0 + (c1 - c0) * (t - t0) / (t1 - t0)
    }
}
