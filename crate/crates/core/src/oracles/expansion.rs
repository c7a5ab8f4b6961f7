use serde::{Deserialize, Serialize};

use super::Oracle;
use crate::error::{Error, Result};
use crate::geometry::Polygon;
use crate::physics::PrimitiveState;

/// Prandtl-Meyer function in radians.
pub fn prandtl_meyer_nu(mach: f64, gamma: f64) -> Result<f64> {
    if !(mach >= 1.0) {
        return Err(Error::domain(format!("Prandtl-Meyer function needs M >= 1, got {mach}")));
    }
    let k = ((gamma + 1.0) / (gamma - 1.0)).sqrt();
    let m2 = mach * mach - 1.0;
    Ok(k * (m2 / (k * k)).sqrt().atan() - m2.sqrt().atan())
}

/// Largest attainable Prandtl-Meyer angle (M -> infinity).
pub fn nu_max(gamma: f64) -> f64 {
    let k = ((gamma + 1.0) / (gamma - 1.0)).sqrt();
    std::f64::consts::FRAC_PI_2 * (k - 1.0)
}

/// Mach number with `prandtl_meyer_nu(M) = nu`, by bisection on ln M.
pub fn inverse_nu(nu: f64, gamma: f64) -> Result<f64> {
    if nu < 0.0 || nu >= nu_max(gamma) {
        return Err(Error::domain(format!(
            "Prandtl-Meyer angle {nu} outside [0, {})",
            nu_max(gamma)
        )));
    }
    if nu == 0.0 {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while prandtl_meyer_nu(hi.exp(), gamma)? < nu {
        hi *= 2.0;
        if hi > 700.0 {
            return Err(Error::domain("Prandtl-Meyer inversion did not bracket"));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if prandtl_meyer_nu(mid.exp(), gamma)? < nu {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// Wall shape downstream of the corner.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WallCurve {
    /// Physical wedge, slope tan(theta).
    Tan,
    /// Slope tanh(theta), as printed.
    Tanh,
}

/// Convex corner at `corner` turning the wall down by `theta` (radians).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WedgeGeometry {
    pub corner: [f64; 2],
    pub theta: f64,
    pub wall: WallCurve,
    /// Domain extent as (x_max, y_max); the domain starts at the corner.
    pub extent: [f64; 2],
}

impl WedgeGeometry {
    pub fn new(theta: f64, wall: WallCurve) -> Result<Self> {
        if !(theta > 0.0 && theta < std::f64::consts::FRAC_PI_4) {
            return Err(Error::config(format!(
                "turn angle must lie in (0, 45) degrees, got {}",
                theta.to_degrees()
            )));
        }
        Ok(Self {
            corner: [0.0, 0.0],
            theta,
            wall,
            extent: [1.0, 1.0],
        })
    }

    pub fn slope(&self) -> f64 {
        match self.wall {
            WallCurve::Tan => self.theta.tan(),
            WallCurve::Tanh => self.theta.tanh(),
        }
    }

    /// Flow turn actually imposed by the wall.
    pub fn turn(&self) -> f64 {
        self.slope().atan()
    }

    pub fn wall_y(&self, x: f64) -> f64 {
        self.corner[1] - self.slope() * (x - self.corner[0])
    }

    /// Outward (into the wall) unit normal.
    pub fn wall_normal(&self) -> [f64; 2] {
        let t = self.turn();
        [-t.sin(), -t.cos()]
    }

    pub fn domain(&self) -> Polygon {
        let [cx, cy] = self.corner;
        let [xm, ym] = self.extent;
        Polygon::new(vec![
            [cx, cy],
            [cx + xm, self.wall_y(cx + xm)],
            [cx + xm, cy + ym],
            [cx, cy + ym],
        ])
        .expect("wedge domain")
    }
}

/// Centered Prandtl-Meyer fan around the corner of a wedge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpansionCase {
    pub geometry: WedgeGeometry,
    pub inlet: PrimitiveState,
    pub gamma: f64,
    mach_in: f64,
    nu_in: f64,
    mach_out: f64,
}

impl ExpansionCase {
    /// `inlet` must be a supersonic state moving along +x.
    pub fn new(geometry: WedgeGeometry, inlet: PrimitiveState, gamma: f64) -> Result<Self> {
        if !inlet.is_admissible() || inlet.v != 0.0 || inlet.u <= 0.0 {
            return Err(Error::config("inlet must be admissible and aligned with +x"));
        }
        let mach_in = inlet.mach(gamma);
        let nu_in = prandtl_meyer_nu(mach_in, gamma)?;
        let mach_out = inverse_nu(nu_in + geometry.turn(), gamma)?;
        Ok(Self {
            geometry,
            inlet,
            gamma,
            mach_in,
            nu_in,
            mach_out,
        })
    }

    pub fn mach_in(&self) -> f64 {
        self.mach_in
    }

    pub fn mach_out(&self) -> f64 {
        self.mach_out
    }

    /// Angle of the leading Mach line above the x axis.
    pub fn lead_angle(&self) -> f64 {
        (1.0 / self.mach_in).asin()
    }

    /// Angle of the trailing Mach line above the x axis.
    pub fn tail_angle(&self) -> f64 {
        (1.0 / self.mach_out).asin() - self.geometry.turn()
    }

    /// Isentropic state at Mach `m`, flow turned down by `delta`.
    fn isentropic(&self, m: f64, delta: f64) -> PrimitiveState {
        let g = self.gamma;
        let ratio = (1.0 + 0.5 * (g - 1.0) * self.mach_in.powi(2)) / (1.0 + 0.5 * (g - 1.0) * m * m);
        let p = self.inlet.p * ratio.powf(g / (g - 1.0));
        let rho = self.inlet.rho * ratio.powf(1.0 / (g - 1.0));
        let speed = m * (g * p / rho).sqrt();
        PrimitiveState::new(rho, speed * delta.cos(), -speed * delta.sin(), p)
    }

    pub fn downstream(&self) -> PrimitiveState {
        self.isentropic(self.mach_out, self.geometry.turn())
    }

    /// Flow deflection on the fan ray at angle `phi`.
    fn fan_deflection(&self, phi: f64) -> Result<f64> {
        let f = |delta: f64| -> Result<f64> {
            let m = inverse_nu(self.nu_in + delta, self.gamma)?;
            Ok((1.0 / m).asin() - delta - phi)
        };
        let (mut lo, mut hi) = (0.0, self.geometry.turn());
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if f(mid)? > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Exact state; the domain check uses a small tolerance.
    pub fn exact(&self, p: [f64; 2]) -> Result<PrimitiveState> {
        let dom = self.geometry.domain();
        if !dom.contains(p) && dom.boundary_distance(p) > 1e-9 {
            return Err(Error::domain(format!("point {p:?} is outside the expansion domain")));
        }
        let (dx, dy) = (p[0] - self.geometry.corner[0], p[1] - self.geometry.corner[1]);
        if dx == 0.0 && dy == 0.0 {
            return Ok(self.inlet);
        }
        let phi = dy.atan2(dx);
        if phi >= self.lead_angle() {
            Ok(self.inlet)
        } else if phi <= self.tail_angle() {
            Ok(self.downstream())
        } else {
            let delta = self.fan_deflection(phi)?;
            let m = inverse_nu(self.nu_in + delta, self.gamma)?;
            Ok(self.isentropic(m, delta))
        }
    }

    /// Angular distance of `p` from the nearest Mach line bounding the fan.
    pub fn mach_line_distance(&self, p: [f64; 2]) -> f64 {
        let phi = (p[1] - self.geometry.corner[1]).atan2(p[0] - self.geometry.corner[0]);
        (phi - self.lead_angle()).abs().min((phi - self.tail_angle()).abs())
    }
}

impl Oracle for ExpansionCase {
    fn state(&self, p: [f64; 3]) -> Result<PrimitiveState> {
        self.exact([p[0], p[1]])
    }
}
