use std::f64::consts::PI;

use super::Oracle;
use crate::physics::PrimitiveState;

pub const SMOOTH_U: f64 = 0.7;
pub const SMOOTH_V: f64 = 0.3;

/// Advected density wave on (-1, 1)^2 with constant velocity and pressure.
pub fn smooth_exact(x: f64, y: f64, t: f64) -> PrimitiveState {
    let phase = PI * (x + y - (SMOOTH_U + SMOOTH_V) * t);
    PrimitiveState::new(1.0 + 0.2 * phase.sin(), SMOOTH_U, SMOOTH_V, 1.0)
}

/// Closed-form (d/dx, d/dy) of the smooth density.
pub fn smooth_density_gradient(x: f64, y: f64, t: f64) -> [f64; 2] {
    let g = 0.2 * PI * (PI * (x + y - (SMOOTH_U + SMOOTH_V) * t)).cos();
    [g, g]
}

/// The smooth wave as an [`Oracle`].
#[derive(Clone, Copy, Debug, Default)]
pub struct SmoothWave;

impl Oracle for SmoothWave {
    fn state(&self, p: [f64; 3]) -> crate::Result<PrimitiveState> {
        Ok(smooth_exact(p[0], p[1], p[2]))
    }

    fn density_gradient(&self, p: [f64; 3]) -> Option<[f64; 2]> {
        Some(smooth_density_gradient(p[0], p[1], p[2]))
    }
}
