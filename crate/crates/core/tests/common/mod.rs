#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shockpinn::geometry::Polygon;
use shockpinn::loss::{LossProblem, LossSettings, SubdomainData};
use shockpinn::network::{xavier_init_with, NetworkParams};
use shockpinn::physics::EntropyMode;
use shockpinn::sampling::{PointSet, Role};

/// Random steady single-domain problem with every point role but interfaces.
pub fn random_problem(seed: u64, entropy: bool, global: bool) -> (NetworkParams, LossProblem) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hidden = rng.random_range(1..=3);
    let width = rng.random_range(3..=12);
    let mut sizes = vec![2];
    sizes.extend(std::iter::repeat_n(width, hidden));
    sizes.push(4);
    let mut net = xavier_init_with(&sizes, rng.random(), 10.0, 1e-6).unwrap();
    let last = net.layer_count() - 1;
    let b = net.slots()[last].bias;
    net.values_mut()[b] = 1.5;
    net.values_mut()[b + 3] = 1.5;

    let square = Polygon::rectangle(0.0, 1.0, 0.0, 1.0);
    let mut sets = Vec::new();
    let mut residual = PointSet::new(Role::Residual, 0);
    let n = rng.random_range(5..40);
    for p in square.sample_uniform(&mut rng, n) {
        residual.push([p[0], p[1], 0.0], &[]);
    }
    sets.push(residual);
    let mut gradient = PointSet::new(Role::GradientData, 0);
    let mut inflow = PointSet::new(Role::Inflow, 0);
    let mut pressure = PointSet::new(Role::WallPressure, 0);
    let mut slip = PointSet::new(Role::WallSlip, 0);
    for _ in 0..rng.random_range(1..6) {
        let (x, y) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
        gradient.push([x, y, 0.0], &[rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
        inflow.push([0.0, y, 0.0], &[1.0, 1.0, 0.0, rng.random_range(0.2..1.0)]);
        pressure.push([x, 0.0, 0.0], &[rng.random_range(0.5..1.5)]);
        slip.push([x, 1.0, 0.0], &[0.0, 1.0]);
    }
    sets.extend([gradient, inflow, pressure, slip]);
    let quadrature = if global { square.boundary_quadrature(3, 4.0) } else { Vec::new() };
    let settings = LossSettings {
        gamma: 1.4,
        entropy: entropy.then_some(EntropyMode::Relu),
        epsilon: 1e-4,
        unsteady: false,
    };
    let problem = LossProblem::new(vec![SubdomainData { sets, quadrature }], Vec::new(), settings).unwrap();
    (net, problem)
}

/// Run directory inside a fresh temporary directory.
pub fn temp_run() -> tempfile::TempDir {
    tempfile::tempdir().unwrap()
}

/// Synthetic bow-shock field in SI units for pipeline tests.
///
/// The shock follows Billig's correlation for a cylinder of radius `r` at
/// Mach 4. Behind it each horizontal row takes the normal-shock state for
/// the local shock slope, with the velocity turned toward the wall tangent
/// as the row approaches the body. Grid nodes inside the body are omitted.
/// This is a stand-in for CFD, not a solution of the Euler equations.
pub fn bow_fixture_csv(path: &std::path::Path, r: f64, spacing: f64) {
    use std::fmt::Write as _;
    let gamma: f64 = 1.4;
    let (rho1, u1, p1) = (1.225, 1360.6963, 101253.6);
    let mach = u1 / (gamma * p1 / rho1).sqrt();
    let standoff = r * 0.386 * (4.67 / (mach * mach)).exp();
    let rc = r * 1.386 * (1.8 / (mach - 1.0).powf(0.75)).exp();
    let beta = (1.0 / mach).asin();
    let cot2 = 1.0 / beta.tan().powi(2);
    let tan2 = beta.tan().powi(2);
    let shock_x = |y: f64| -(r + standoff) + rc * cot2 * ((1.0 + y * y * tan2 / (rc * rc)).sqrt() - 1.0);
    let shock_slope = |y: f64| y / (rc * (1.0 + y * y * tan2 / (rc * rc)).sqrt());

    let mut out = String::from("# units: SI\nx,y,rho,u,v,p\n");
    let nx = (1.0 / spacing).round() as usize;
    let ny = (3.0 / spacing).round() as usize;
    for j in 0..=ny {
        let y = -1.5 + 3.0 * j as f64 / ny as f64;
        for i in 0..=nx {
            let x = -1.0 + i as f64 / nx as f64;
            if x.hypot(y) <= r {
                continue;
            }
            let xs = shock_x(y);
            let (rho, u, v, p) = if x < xs {
                (rho1, u1, 0.0, p1)
            } else {
                let d = shock_slope(y);
                let norm = d.hypot(1.0);
                let n = [1.0 / norm, -d / norm];
                let t = [d / norm, 1.0 / norm];
                let mn = (mach * n[0]).max(1.0);
                let ratio = (gamma + 1.0) * mn * mn / ((gamma - 1.0) * mn * mn + 2.0);
                let p2 = p1 * (1.0 + 2.0 * gamma / (gamma + 1.0) * (mn * mn - 1.0));
                let (vn, vt) = (u1 * n[0] / ratio, u1 * t[0]);
                let mut w = [vn * n[0] + vt * t[0], vn * n[1] + vt * t[1]];
                if y.abs() < r {
                    let xb = -(r * r - y * y).sqrt();
                    let s = ((x - xs) / (xb - xs)).clamp(0.0, 1.0);
                    let nb = [xb / r, y / r];
                    let dot = w[0] * nb[0] + w[1] * nb[1];
                    let k = s * s;
                    w = [w[0] - k * dot * nb[0], w[1] - k * dot * nb[1]];
                }
                (rho1 * ratio, w[0], w[1], p2)
            };
            let _ = writeln!(out, "{x:?},{y:?},{rho:?},{u:?},{v:?},{p:?}");
        }
    }
    std::fs::write(path, out).unwrap();
}
