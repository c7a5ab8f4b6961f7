//! Compressible Euler algebra for a polytropic gas.
//!
//! Residuals are written against [`Real`] so the same code evaluates plain
//! numbers, per-point Jacobians (via [`Jet`](crate::autodiff::Jet)) and taped
//! expressions for nested parameter gradients.

use std::ops::{Add, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::autodiff::{DualPoint, Real, MAX_DIRS};
use crate::error::{Error, Result};

/// Ratio of specific heats for air.
pub const GAMMA: f64 = 1.4;

/// Density, velocity components and pressure at a point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveState {
    pub rho: f64,
    pub u: f64,
    pub v: f64,
    pub p: f64,
}

/// Conserved variables (rho, rho u, rho v, rho E).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConservedState {
    pub mass: f64,
    pub mom_x: f64,
    pub mom_y: f64,
    pub energy: f64,
}

impl PrimitiveState {
    pub const fn new(rho: f64, u: f64, v: f64, p: f64) -> Self {
        Self { rho, u, v, p }
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.rho, self.u, self.v, self.p]
    }

    pub fn is_admissible(&self) -> bool {
        self.rho > 0.0
            && self.p > 0.0
            && self.rho.is_finite()
            && self.p.is_finite()
            && self.u.is_finite()
            && self.v.is_finite()
    }

    pub fn speed(&self) -> f64 {
        self.u.hypot(self.v)
    }

    pub fn sound_speed(&self, gamma: f64) -> f64 {
        (gamma * self.p / self.rho).sqrt()
    }

    pub fn mach(&self, gamma: f64) -> f64 {
        self.speed() / self.sound_speed(gamma)
    }

    /// Specific entropy `log(p / rho^gamma)`.
    pub fn specific_entropy(&self, gamma: f64) -> f64 {
        (self.p / self.rho.powf(gamma)).ln()
    }

    pub fn to_conserved(&self, gamma: f64) -> Result<ConservedState> {
        Ok(ConservedState {
            mass: self.rho,
            mom_x: self.rho * self.u,
            mom_y: self.rho * self.v,
            energy: eos_energy(self, gamma)?,
        })
    }
}

impl ConservedState {
    pub fn to_array(self) -> [f64; 4] {
        [self.mass, self.mom_x, self.mom_y, self.energy]
    }

    pub fn to_primitive(&self, gamma: f64) -> Result<PrimitiveState> {
        let p = eos_pressure(self, gamma)?;
        Ok(PrimitiveState::new(
            self.mass,
            self.mom_x / self.mass,
            self.mom_y / self.mass,
            p,
        ))
    }
}

/// `p = (gamma - 1)(rho E - rho |u|^2 / 2)`.
pub fn eos_pressure(state: &ConservedState, gamma: f64) -> Result<f64> {
    if state.mass <= 0.0 {
        return Err(Error::domain(format!("non-positive density {}", state.mass)));
    }
    let kinetic = 0.5 * (state.mom_x * state.mom_x + state.mom_y * state.mom_y) / state.mass;
    Ok((gamma - 1.0) * (state.energy - kinetic))
}

/// `rho E = p / (gamma - 1) + rho |u|^2 / 2`.
pub fn eos_energy(state: &PrimitiveState, gamma: f64) -> Result<f64> {
    if state.rho <= 0.0 {
        return Err(Error::domain(format!("non-positive density {}", state.rho)));
    }
    Ok(state.p / (gamma - 1.0) + 0.5 * state.rho * (state.u * state.u + state.v * state.v))
}

/// Conserved variables from primitives, generic over the scalar.
pub fn conserved<S: Real>(w: &[S; 4], gamma: f64) -> [S; 4] {
    let [rho, u, v, p] = *w;
    let rho_e = p / (gamma - 1.0) + rho * (u * u + v * v) * 0.5;
    [rho, rho * u, rho * v, rho_e]
}

/// Flux vectors `(G1, G2)` from primitives, generic over the scalar.
pub fn flux_generic<S: Real>(w: &[S; 4], gamma: f64) -> ([S; 4], [S; 4]) {
    let [rho, u, v, p] = *w;
    let rho_e = p / (gamma - 1.0) + rho * (u * u + v * v) * 0.5;
    let h = rho_e + p;
    let ru = rho * u;
    let rv = rho * v;
    let ruv = ru * v;
    (
        [ru, p + ru * u, ruv, u * h],
        [rv, ruv, p + rv * v, v * h],
    )
}

/// Flux vectors `(G1, G2)` of an admissible state.
pub fn flux(state: &PrimitiveState, gamma: f64) -> Result<([f64; 4], [f64; 4])> {
    if !state.is_admissible() {
        return Err(Error::domain(format!("inadmissible state {state:?}")));
    }
    Ok(flux_generic(&state.to_array(), gamma))
}

/// Flux through a surface with unit normal `n`: `G1 n_x + G2 n_y`.
pub fn normal_flux<S: Real>(w: &[S; 4], normal: [f64; 2], gamma: f64) -> [S; 4] {
    let (g1, g2) = flux_generic(w, gamma);
    std::array::from_fn(|k| g1[k] * normal[0] + g2[k] * normal[1])
}

/// Convex entropy `eta = -rho s / (gamma - 1)` with `s = log(p / rho^gamma)`.
pub fn entropy<S: Real>(w: &[S; 4], gamma: f64) -> S {
    let [rho, _, _, p] = *w;
    let s = p.ln() - rho.ln() * gamma;
    -(rho * s) / (gamma - 1.0)
}

/// Entropy and its flux `phi = u eta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntropyPair {
    pub eta: f64,
    pub phi: [f64; 2],
}

pub fn entropy_pair(state: &PrimitiveState, gamma: f64) -> Result<EntropyPair> {
    if !state.is_admissible() {
        return Err(Error::domain(format!("inadmissible state {state:?}")));
    }
    let eta = entropy(&state.to_array(), gamma);
    Ok(EntropyPair {
        eta,
        phi: [state.u * eta, state.v * eta],
    })
}

/// How the entropy inequality enters the residual.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntropyMode {
    /// One-sided penalty `max(0, eta_t + div phi)`.
    Relu,
    /// `-(eta_t + div phi) + epsilon`, squared by the loss.
    TwoSided,
}

/// Primitive values and their derivatives along the input directions.
///
/// `grad[dir][var]` with directions ordered (x, y, t).
#[derive(Clone, Copy, Debug)]
pub struct FieldPoint<S> {
    pub prim: [S; 4],
    pub grad: [[S; 4]; MAX_DIRS],
    pub dirs: usize,
}

impl FieldPoint<f64> {
    pub fn from_duals(w: &[DualPoint; 4]) -> Self {
        let dirs = w.iter().map(DualPoint::dirs).max().unwrap_or(0);
        Self {
            prim: std::array::from_fn(|k| w[k].value()),
            grad: std::array::from_fn(|d| std::array::from_fn(|k| w[k].tangent(d))),
            dirs,
        }
    }

    pub fn constant(state: &PrimitiveState, dirs: usize) -> Self {
        Self {
            prim: state.to_array(),
            grad: [[0.0; 4]; MAX_DIRS],
            dirs,
        }
    }
}

/// Scalar paired with its (x, y, t) derivatives, used to differentiate the
/// flux functions by the chain rule.
#[derive(Clone, Copy, Debug)]
struct Spatial<S> {
    v: S,
    d: [S; MAX_DIRS],
}

impl<S: Real> Spatial<S> {
    fn map(self, value: S, slope: S) -> Self {
        Self {
            v: value,
            d: self.d.map(|x| x * slope),
        }
    }
}

impl<S: Real> Add for Spatial<S> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            v: self.v + o.v,
            d: std::array::from_fn(|k| self.d[k] + o.d[k]),
        }
    }
}

impl<S: Real> Sub for Spatial<S> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self {
            v: self.v - o.v,
            d: std::array::from_fn(|k| self.d[k] - o.d[k]),
        }
    }
}

impl<S: Real> Mul for Spatial<S> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self {
            v: self.v * o.v,
            d: std::array::from_fn(|k| self.d[k] * o.v + o.d[k] * self.v),
        }
    }
}

impl<S: Real> Div for Spatial<S> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let q = self.v / o.v;
        Self {
            v: q,
            d: std::array::from_fn(|k| (self.d[k] - o.d[k] * q) / o.v),
        }
    }
}

impl<S: Real> Neg for Spatial<S> {
    type Output = Self;
    fn neg(self) -> Self {
        Self {
            v: -self.v,
            d: self.d.map(|x| -x),
        }
    }
}

impl<S: Real> Add<f64> for Spatial<S> {
    type Output = Self;
    fn add(self, c: f64) -> Self {
        Self {
            v: self.v + c,
            d: self.d,
        }
    }
}

impl<S: Real> Sub<f64> for Spatial<S> {
    type Output = Self;
    fn sub(self, c: f64) -> Self {
        Self {
            v: self.v - c,
            d: self.d,
        }
    }
}

impl<S: Real> Mul<f64> for Spatial<S> {
    type Output = Self;
    fn mul(self, c: f64) -> Self {
        Self {
            v: self.v * c,
            d: self.d.map(|x| x * c),
        }
    }
}

impl<S: Real> Div<f64> for Spatial<S> {
    type Output = Self;
    fn div(self, c: f64) -> Self {
        Self {
            v: self.v / c,
            d: self.d.map(|x| x / c),
        }
    }
}

impl<S: Real> Real for Spatial<S> {
    fn value(&self) -> f64 {
        self.v.value()
    }
    fn lift(&self, c: f64) -> Self {
        let zero = self.v.lift(0.0);
        Self {
            v: self.v.lift(c),
            d: [zero; MAX_DIRS],
        }
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        self.map(e, e)
    }
    fn ln(self) -> Self {
        let inv = self.v.lift(1.0) / self.v;
        self.map(self.v.ln(), inv)
    }
    fn tanh(self) -> Self {
        let t = self.v.tanh();
        self.map(t, -(t * t) + 1.0)
    }
    fn sin(self) -> Self {
        self.map(self.v.sin(), self.v.cos())
    }
    fn cos(self) -> Self {
        self.map(self.v.cos(), -self.v.sin())
    }
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.map(s, self.v.lift(0.5) / s)
    }
    fn powi(self, n: i32) -> Self {
        if n == 0 {
            return self.lift(1.0);
        }
        self.map(self.v.powi(n), self.v.powi(n - 1) * f64::from(n))
    }
    fn max_const(self, c: f64) -> Self {
        if self.v.value() >= c {
            self
        } else {
            self.lift(c)
        }
    }
}

fn spatial<S: Real>(fp: &FieldPoint<S>) -> [Spatial<S>; 4] {
    std::array::from_fn(|k| Spatial {
        v: fp.prim[k],
        d: std::array::from_fn(|dir| fp.grad[dir][k]),
    })
}

fn require_dirs<S>(fp: &FieldPoint<S>, needed: usize) -> Result<()> {
    if fp.dirs < needed {
        return Err(Error::config(format!(
            "residual needs {needed} tangent directions, point carries {}",
            fp.dirs
        )));
    }
    Ok(())
}

/// `d_x G1 + d_y G2` for (mass, x-momentum, y-momentum, energy).
pub fn steady_residual<S: Real>(fp: &FieldPoint<S>, gamma: f64) -> Result<[S; 4]> {
    require_dirs(fp, 2)?;
    let w = spatial(fp);
    let (g1, g2) = flux_generic(&w, gamma);
    Ok(std::array::from_fn(|k| g1[k].d[0] + g2[k].d[1]))
}

/// `d_t U + d_x G1 + d_y G2`; time is input direction 2.
pub fn unsteady_residual<S: Real>(fp: &FieldPoint<S>, gamma: f64) -> Result<[S; 4]> {
    require_dirs(fp, 3)?;
    let w = spatial(fp);
    let (g1, g2) = flux_generic(&w, gamma);
    let u = conserved(&w, gamma);
    Ok(std::array::from_fn(|k| u[k].d[2] + g1[k].d[0] + g2[k].d[1]))
}

/// Entropy-inequality residual built from `eta_t + d_x phi1 + d_y phi2`.
pub fn entropy_residual<S: Real>(
    fp: &FieldPoint<S>,
    mode: EntropyMode,
    epsilon: f64,
    unsteady: bool,
    gamma: f64,
) -> Result<S> {
    require_dirs(fp, if unsteady { 3 } else { 2 })?;
    let w = spatial(fp);
    let eta = entropy(&w, gamma);
    let phi1 = w[1] * eta;
    let phi2 = w[2] * eta;
    let mut production = phi1.d[0] + phi2.d[1];
    if unsteady {
        production = production + eta.d[2];
    }
    Ok(match mode {
        EntropyMode::Relu => production.relu(),
        EntropyMode::TwoSided => -production + epsilon,
    })
}

/// Characteristic scales used to nondimensionalize states and coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceScales {
    pub rho_ref: f64,
    pub velocity_ref: f64,
    pub pressure_ref: f64,
    pub length_ref: f64,
}

impl ReferenceScales {
    /// Pressure scale is tied to the dynamic pressure `rho_ref velocity_ref^2`.
    pub fn new(rho_ref: f64, velocity_ref: f64, length_ref: f64) -> Result<Self> {
        if !(rho_ref > 0.0 && velocity_ref > 0.0 && length_ref > 0.0) {
            return Err(Error::config("reference scales must be positive"));
        }
        Ok(Self {
            rho_ref,
            velocity_ref,
            pressure_ref: rho_ref * velocity_ref * velocity_ref,
            length_ref,
        })
    }

    pub fn identity() -> Self {
        Self {
            rho_ref: 1.0,
            velocity_ref: 1.0,
            pressure_ref: 1.0,
            length_ref: 1.0,
        }
    }

    /// Freestream normalization: density and speed of the given state.
    pub fn freestream(state: &PrimitiveState, length_ref: f64) -> Result<Self> {
        Self::new(state.rho, state.speed(), length_ref)
    }

    pub fn nondimensionalize(&self, s: &PrimitiveState) -> PrimitiveState {
        PrimitiveState::new(
            s.rho / self.rho_ref,
            s.u / self.velocity_ref,
            s.v / self.velocity_ref,
            s.p / self.pressure_ref,
        )
    }

    pub fn redimensionalize(&self, s: &PrimitiveState) -> PrimitiveState {
        PrimitiveState::new(
            s.rho * self.rho_ref,
            s.u * self.velocity_ref,
            s.v * self.velocity_ref,
            s.p * self.pressure_ref,
        )
    }

    /// Physical scale of each primitive channel, in (rho, u, v, p) order.
    pub fn channel_scales(&self) -> [f64; 4] {
        [
            self.rho_ref,
            self.velocity_ref,
            self.velocity_ref,
            self.pressure_ref,
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Jet;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn pressure_from_energy() {
        let u = ConservedState {
            mass: 1.0,
            mom_x: 0.0,
            mom_y: 0.0,
            energy: 2.5,
        };
        assert!(close(eos_pressure(&u, GAMMA).unwrap(), 1.0, 1e-15));
    }

    #[test]
    fn energy_from_pressure() {
        let w = PrimitiveState::new(1.0, 0.7, 0.3, 1.0);
        assert!(close(eos_energy(&w, GAMMA).unwrap(), 2.79, 1e-15));
    }

    #[test]
    fn pressure_at_rest_is_proportional_to_energy() {
        for rho in [0.1, 1.0, 7.0] {
            let u = ConservedState {
                mass: rho,
                mom_x: 0.0,
                mom_y: 0.0,
                energy: 3.0,
            };
            assert!(close(eos_pressure(&u, GAMMA).unwrap(), 0.4 * 3.0, 1e-15));
        }
    }

    #[test]
    fn non_positive_density_rejected() {
        let u = ConservedState {
            mass: 0.0,
            mom_x: 0.0,
            mom_y: 0.0,
            energy: 1.0,
        };
        assert!(matches!(eos_pressure(&u, GAMMA), Err(Error::Domain(_))));
    }

    #[test]
    fn flux_examples() {
        let (g1, _) = flux(&PrimitiveState::new(1.0, 0.7, 0.3, 1.0), GAMMA).unwrap();
        let expected = [0.7, 1.49, 0.21, 2.653];
        for k in 0..4 {
            assert!(close(g1[k], expected[k], 1e-14), "{k}: {}", g1[k]);
        }
        let (_, g2) = flux(&PrimitiveState::new(1.3, 0.4, 0.0, 2.0), GAMMA).unwrap();
        assert_eq!(g2, [0.0, 0.0, 2.0, 0.0]);
        let (g1, _) = flux(&PrimitiveState::new(0.8, 0.0, 0.0, 1.7), GAMMA).unwrap();
        assert_eq!(g1, [0.0, 1.7, 0.0, 0.0]);
    }

    #[test]
    fn constant_state_has_zero_residuals() {
        let fp = FieldPoint::constant(&PrimitiveState::new(1.2, 0.5, -0.1, 0.9), 3);
        assert_eq!(steady_residual(&fp, GAMMA).unwrap(), [0.0; 4]);
        assert_eq!(unsteady_residual(&fp, GAMMA).unwrap(), [0.0; 4]);
        assert_eq!(
            entropy_residual(&fp, EntropyMode::Relu, 1e-4, false, GAMMA).unwrap(),
            0.0
        );
        assert_eq!(
            entropy_residual(&fp, EntropyMode::TwoSided, 1e-4, false, GAMMA).unwrap(),
            1e-4
        );
    }

    #[test]
    fn linear_density_mass_residual() {
        // rho = 1 + 0.1 x, u = 1, v = 0, p = 1
        let mut fp = FieldPoint::constant(&PrimitiveState::new(1.05, 1.0, 0.0, 1.0), 2);
        fp.grad[0][0] = 0.1;
        let r = steady_residual(&fp, GAMMA).unwrap();
        assert!(close(r[0], 0.1, 1e-15));
    }

    #[test]
    fn missing_tangents_is_contract_error() {
        let fp = FieldPoint::constant(&PrimitiveState::new(1.0, 1.0, 0.0, 1.0), 1);
        assert!(steady_residual(&fp, GAMMA).is_err());
        let fp = FieldPoint::constant(&PrimitiveState::new(1.0, 1.0, 0.0, 1.0), 2);
        assert!(unsteady_residual(&fp, GAMMA).is_err());
    }

    #[test]
    fn chain_rule_residual_matches_direct_flux_difference() {
        // compare d/dx G1 by central differences of flux along a fabricated field
        let field = |x: f64, y: f64| {
            [
                1.0 + 0.3 * x - 0.2 * y * y,
                0.8 + 0.1 * x * y,
                -0.2 + 0.4 * y,
                1.1 + 0.05 * x * x,
            ]
        };
        let (x, y) = (0.3, -0.4);
        let h = 1e-6;
        let mut fp = FieldPoint {
            prim: field(x, y),
            grad: [[0.0; 4]; MAX_DIRS],
            dirs: 2,
        };
        for k in 0..4 {
            fp.grad[0][k] = (field(x + h, y)[k] - field(x - h, y)[k]) / (2.0 * h);
            fp.grad[1][k] = (field(x, y + h)[k] - field(x, y - h)[k]) / (2.0 * h);
        }
        let r = steady_residual(&fp, GAMMA).unwrap();
        for k in 0..4 {
            let g1p = flux_generic(&field(x + h, y), GAMMA).0[k];
            let g1m = flux_generic(&field(x - h, y), GAMMA).0[k];
            let g2p = flux_generic(&field(x, y + h), GAMMA).1[k];
            let g2m = flux_generic(&field(x, y - h), GAMMA).1[k];
            let fd = (g1p - g1m + g2p - g2m) / (2.0 * h);
            assert!((r[k] - fd).abs() < 1e-7, "{k}: {} vs {}", r[k], fd);
        }
    }

    #[test]
    fn nondimensional_expansion_inlet() {
        let inlet = PrimitiveState::new(1.23, 678.1, 0.0, 1.01e5);
        let scales = ReferenceScales::new(1.23, 678.1, 1.0).unwrap();
        let s = scales.nondimensionalize(&inlet);
        assert_eq!((s.rho, s.u, s.v), (1.0, 1.0, 0.0));
        assert!(close(s.p, 1.01e5 / (1.23 * 678.1 * 678.1), 1e-15));
        assert!((s.p - 0.1786).abs() < 5e-5);
        let back = scales.redimensionalize(&s);
        for (a, b) in back.to_array().iter().zip(inlet.to_array()) {
            assert!((a - b).abs() <= 1e-14 * b.abs().max(1.0));
        }
        let id = ReferenceScales::identity();
        assert_eq!(id.nondimensionalize(&inlet), inlet);
    }

    #[test]
    fn rest_state_has_zero_mass_flux() {
        let (g1, g2) = flux(&PrimitiveState::new(2.0, 0.0, 0.0, 3.0), GAMMA).unwrap();
        assert_eq!(g1[0], 0.0);
        assert_eq!(g2[0], 0.0);
    }

    fn entropy_in_conserved<S: Real>(u: &[S; 4]) -> (S, S, S, [S; 4], [S; 4]) {
        let rho = u[0];
        let vx = u[1] / rho;
        let vy = u[2] / rho;
        let p = (u[3] - (u[1] * u[1] + u[2] * u[2]) / rho * 0.5) * (GAMMA - 1.0);
        let w = [rho, vx, vy, p];
        let eta = entropy(&w, GAMMA);
        let (g1, g2) = flux_generic(&w, GAMMA);
        (eta, vx * eta, vy * eta, g1, g2)
    }

    proptest! {
        #[test]
        fn entropy_pair_compatibility(
            rho in 0.1f64..5.0, u in -2.0f64..2.0, v in -2.0f64..2.0, p in 0.1f64..5.0
        ) {
            let cons = PrimitiveState::new(rho, u, v, p).to_conserved(GAMMA).unwrap().to_array();
            let jets: [Jet<4>; 4] = std::array::from_fn(|k| Jet::variable(cons[k], k));
            let (eta, phi1, phi2, g1, g2) = entropy_in_conserved(&jets);
            for j in 0..4 {
                let lhs1: f64 = (0..4).map(|k| eta.grad[k] * g1[k].grad[j]).sum();
                let lhs2: f64 = (0..4).map(|k| eta.grad[k] * g2[k].grad[j]).sum();
                let scale1 = phi1.grad[j].abs().max(1e-3);
                let scale2 = phi2.grad[j].abs().max(1e-3);
                prop_assert!((lhs1 - phi1.grad[j]).abs() / scale1 < 1e-7);
                prop_assert!((lhs2 - phi2.grad[j]).abs() / scale2 < 1e-7);
            }
        }

        #[test]
        fn conserved_round_trip(
            rho in 0.01f64..10.0, u in -3.0f64..3.0, v in -3.0f64..3.0, p in 0.01f64..10.0
        ) {
            let w = PrimitiveState::new(rho, u, v, p);
            let back = w.to_conserved(GAMMA).unwrap().to_primitive(GAMMA).unwrap();
            for (a, b) in back.to_array().iter().zip(w.to_array()) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
        }

        #[test]
        fn residual_linear_in_tangents(
            rho in 0.2f64..3.0, u in -1.0f64..1.0, v in -1.0f64..1.0, p in 0.2f64..3.0,
            a in proptest::array::uniform8(-1.0f64..1.0),
            b in proptest::array::uniform8(-1.0f64..1.0),
            alpha in -2.0f64..2.0,
        ) {
            let mk = |t: &[f64; 8]| FieldPoint {
                prim: [rho, u, v, p],
                grad: [
                    [t[0], t[1], t[2], t[3]],
                    [t[4], t[5], t[6], t[7]],
                    [0.0; 4],
                ],
                dirs: 2,
            };
            let combo: [f64; 8] = std::array::from_fn(|k| a[k] + alpha * b[k]);
            let ra = steady_residual(&mk(&a), GAMMA).unwrap();
            let rb = steady_residual(&mk(&b), GAMMA).unwrap();
            let rc = steady_residual(&mk(&combo), GAMMA).unwrap();
            for k in 0..4 {
                prop_assert!((rc[k] - (ra[k] + alpha * rb[k])).abs() < 1e-12 * (1.0 + rc[k].abs()));
            }
        }

        #[test]
        fn entropy_is_convex_in_conserved_variables(
            rho in 0.2f64..3.0, u in -1.5f64..1.5, v in -1.5f64..1.5, p in 0.2f64..3.0,
            dir in proptest::array::uniform4(-1.0f64..1.0),
        ) {
            let cons = PrimitiveState::new(rho, u, v, p).to_conserved(GAMMA).unwrap().to_array();
            let eta = |t: f64| {
                let c: [f64; 4] = std::array::from_fn(|k| cons[k] + t * dir[k]);
                entropy_in_conserved(&c).0
            };
            let h = 1e-4;
            let second = (eta(h) - 2.0 * eta(0.0) + eta(-h)) / (h * h);
            prop_assert!(second > -1e-5, "second directional derivative {second}");
        }
    }
}
