use serde::{Deserialize, Serialize};

use super::Oracle;
use crate::error::{Error, Result};
use crate::physics::PrimitiveState;

/// Weak-branch oblique-shock solution for a given upstream Mach number.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObliqueShockRelations {
    /// Shock angle (radians) from the upstream flow direction.
    pub beta: f64,
    pub density_ratio: f64,
    pub pressure_ratio: f64,
    /// Downstream Mach number.
    pub mach2: f64,
}

fn deflection(m1: f64, beta: f64, gamma: f64) -> f64 {
    let s2 = (m1 * beta.sin()).powi(2) - 1.0;
    let num = 2.0 * s2 / beta.tan();
    let den = m1 * m1 * (gamma + (2.0 * beta).cos()) + 2.0;
    (num / den).atan()
}

fn normal_ratios(mn: f64, gamma: f64) -> (f64, f64) {
    let mn2 = mn * mn;
    let density = (gamma + 1.0) * mn2 / ((gamma - 1.0) * mn2 + 2.0);
    let pressure = 1.0 + 2.0 * gamma / (gamma + 1.0) * (mn2 - 1.0);
    (density, pressure)
}

/// Solves the theta-beta-Mach relation on the weak branch.
pub fn oblique_shock_relations(m1: f64, theta: f64, gamma: f64) -> Result<ObliqueShockRelations> {
    if !(m1 > 1.0) {
        return Err(Error::domain(format!("oblique shock needs supersonic inflow, M = {m1}")));
    }
    if theta < 0.0 {
        return Err(Error::domain("negative deflection angle"));
    }
    let mu = (1.0 / m1).asin();
    // golden-section search for the detachment angle
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (mu, std::f64::consts::FRAC_PI_2);
    for _ in 0..200 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if deflection(m1, c, gamma) < deflection(m1, d, gamma) {
            a = c;
        } else {
            b = d;
        }
    }
    let beta_max = 0.5 * (a + b);
    let theta_max = deflection(m1, beta_max, gamma);
    if theta > theta_max {
        return Err(Error::domain(format!(
            "deflection {:.3} deg exceeds the detachment angle {:.3} deg at M = {m1:.4}; \
             the shock detaches, use the bow-shock case",
            theta.to_degrees(),
            theta_max.to_degrees()
        )));
    }
    let beta = if theta == 0.0 {
        mu
    } else {
        let (mut lo, mut hi) = (mu, beta_max);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if deflection(m1, mid, gamma) < theta {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let mn1 = m1 * beta.sin();
    let (density_ratio, pressure_ratio) = if theta == 0.0 { (1.0, 1.0) } else { normal_ratios(mn1, gamma) };
    let mn2 = if theta == 0.0 {
        mn1
    } else {
        ((1.0 + 0.5 * (gamma - 1.0) * mn1 * mn1) / (gamma * mn1 * mn1 - 0.5 * (gamma - 1.0))).sqrt()
    };
    let mach2 = mn2 / (beta - theta).sin();
    Ok(ObliqueShockRelations {
        beta,
        density_ratio,
        pressure_ratio,
        mach2,
    })
}

/// Downstream state for an upstream state moving along +x, shock angle
/// `beta`, with the flow turned counter-clockwise by `theta`.
pub fn post_shock_state(pre: &PrimitiveState, rel: &ObliqueShockRelations, theta: f64) -> PrimitiveState {
    let speed = pre.speed();
    let vt = speed * rel.beta.cos();
    let vn = speed * rel.beta.sin() / rel.density_ratio;
    let v2 = vt.hypot(vn);
    PrimitiveState::new(
        pre.rho * rel.density_ratio,
        v2 * theta.cos(),
        v2 * theta.sin(),
        pre.p * rel.pressure_ratio,
    )
}

/// How a printed post-shock velocity magnitude is split into (u, v).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VelocityOrdering {
    /// (|V| sin(theta), |V| cos(theta)), as printed.
    SinCos,
    /// (|V| cos(theta), |V| sin(theta)), a flow turned by theta.
    CosSin,
}

/// Relative jump residuals of the conservation laws across a shock line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RhResidual {
    pub mass: f64,
    pub normal_momentum: f64,
    pub tangential_momentum: f64,
    pub energy: f64,
}

impl RhResidual {
    pub fn max(&self) -> f64 {
        self.mass
            .max(self.normal_momentum)
            .max(self.tangential_momentum)
            .max(self.energy)
    }
}

/// Compares the normal fluxes of mass, momentum and total enthalpy on both
/// sides of a line at angle `beta` through the origin. Each residual is
/// `|F_post - F_pre| / |F_pre|`.
pub fn verify_rankine_hugoniot(pre: &PrimitiveState, post: &PrimitiveState, beta: f64, gamma: f64) -> RhResidual {
    let n = [beta.sin(), -beta.cos()];
    let t = [beta.cos(), beta.sin()];
    let fluxes = |s: &PrimitiveState| {
        let vn = s.u * n[0] + s.v * n[1];
        let vt = s.u * t[0] + s.v * t[1];
        let h = gamma / (gamma - 1.0) * s.p / s.rho + 0.5 * (s.u * s.u + s.v * s.v);
        [s.rho * vn, s.rho * vn * vn + s.p, s.rho * vn * vt, s.rho * vn * h]
    };
    let (a, b) = (fluxes(pre), fluxes(post));
    let rel = |k: usize| (b[k] - a[k]).abs() / a[k].abs().max(f64::MIN_POSITIVE);
    RhResidual {
        mass: rel(0),
        normal_momentum: rel(1),
        tangential_momentum: rel(2),
        energy: rel(3),
    }
}

/// Piecewise-constant oblique-shock field with the shock through the origin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObliqueShockCase {
    pub pre: PrimitiveState,
    pub post: PrimitiveState,
    pub beta: f64,
    pub theta: f64,
}

impl ObliqueShockCase {
    /// Post state and shock angle computed from the jump relations.
    pub fn from_relations(pre: PrimitiveState, theta: f64, gamma: f64) -> Result<Self> {
        let rel = oblique_shock_relations(pre.mach(gamma), theta, gamma)?;
        Ok(Self {
            pre,
            post: post_shock_state(&pre, &rel, theta),
            beta: rel.beta,
            theta,
        })
    }

    /// Post state given explicitly; the shock angle is still computed.
    pub fn with_post(pre: PrimitiveState, post: PrimitiveState, theta: f64, gamma: f64) -> Result<Self> {
        let rel = oblique_shock_relations(pre.mach(gamma), theta, gamma)?;
        Ok(Self {
            pre,
            post,
            beta: rel.beta,
            theta,
        })
    }

    /// Printed states in SI units.
    pub fn printed_states(ordering: VelocityOrdering) -> (PrimitiveState, PrimitiveState) {
        let theta = 10f64.to_radians();
        let (u, v) = match ordering {
            VelocityOrdering::SinCos => (635.9 * theta.sin(), 635.9 * theta.cos()),
            VelocityOrdering::CosSin => (635.9 * theta.cos(), 635.9 * theta.sin()),
        };
        (
            PrimitiveState::new(0.06688, 738.2, 0.0, 9485.0),
            PrimitiveState::new(0.09515, u, v, 1.5e4),
        )
    }

    /// Shock height at abscissa `x`.
    pub fn shock_y(&self, x: f64) -> f64 {
        x * self.beta.tan()
    }

    /// Signed distance to the shock line, positive upstream (above).
    pub fn shock_distance(&self, p: [f64; 2]) -> f64 {
        p[1] * self.beta.cos() - p[0] * self.beta.sin()
    }

    pub fn exact(&self, p: [f64; 2]) -> PrimitiveState {
        if self.shock_distance(p) >= 0.0 {
            self.pre
        } else {
            self.post
        }
    }
}

impl Oracle for ObliqueShockCase {
    fn state(&self, p: [f64; 3]) -> Result<PrimitiveState> {
        Ok(self.exact([p[0], p[1]]))
    }

    fn side(&self, p: [f64; 3]) -> i8 {
        if self.shock_distance([p[0], p[1]]) >= 0.0 {
            1
        } else {
            -1
        }
    }
}
