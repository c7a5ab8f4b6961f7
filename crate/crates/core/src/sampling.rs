//! Collocation points, synthetic measurements and their CSV form.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Polygon, Polyline};
use crate::oracles::Oracle;

/// What a point set is used for in the loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Residual,
    GradientData,
    Inflow,
    WallPressure,
    Interface,
    WallSlip,
}

impl Role {
    /// Number of target values attached to each point.
    pub fn target_width(self) -> usize {
        match self {
            Role::Residual => 0,
            Role::GradientData => 2,
            Role::Inflow => 4,
            Role::WallPressure => 1,
            // unit normal used by the flux-continuity and no-penetration terms
            Role::Interface | Role::WallSlip => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Role::Residual => "residual",
            Role::GradientData => "gradient-data",
            Role::Inflow => "inflow",
            Role::WallPressure => "wall-pressure",
            Role::Interface => "interface",
            Role::WallSlip => "wall-slip",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        [
            Role::Residual,
            Role::GradientData,
            Role::Inflow,
            Role::WallPressure,
            Role::Interface,
            Role::WallSlip,
        ]
        .into_iter()
        .find(|r| r.name() == s)
        .ok_or_else(|| Error::ingestion(format!("unknown point role '{s}'")))
    }
}

/// Points of one role with flat targets, `role.target_width()` per point.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    pub role: Role,
    pub points: Vec<[f64; 3]>,
    pub targets: Vec<f64>,
    pub seed: u64,
}

impl PointSet {
    pub fn new(role: Role, seed: u64) -> Self {
        Self {
            role,
            points: Vec::new(),
            targets: Vec::new(),
            seed,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn push(&mut self, point: [f64; 3], target: &[f64]) {
        assert_eq!(target.len(), self.role.target_width(), "target width for {:?}", self.role);
        self.points.push(point);
        self.targets.extend_from_slice(target);
    }

    pub fn target(&self, i: usize) -> &[f64] {
        let w = self.role.target_width();
        &self.targets[i * w..(i + 1) * w]
    }

    pub fn extend(&mut self, other: &PointSet) {
        assert_eq!(self.role, other.role);
        self.points.extend_from_slice(&other.points);
        self.targets.extend_from_slice(&other.targets);
    }

    /// Keeps points for which `keep` holds.
    pub fn filter(&self, keep: impl Fn([f64; 3]) -> bool) -> PointSet {
        let mut out = PointSet::new(self.role, self.seed);
        for i in 0..self.len() {
            if keep(self.points[i]) {
                out.push(self.points[i], self.target(i));
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Random,
    Grid,
}

/// Time window for unsteady problems; `None` for steady ones.
pub type TimeSpan = Option<[f64; 2]>;

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn draw_time<R: Rng>(rng: &mut R, time: TimeSpan) -> f64 {
    match time {
        Some([t0, t1]) if t1 > t0 => rng.random_range(t0..=t1),
        Some([t0, _]) => t0,
        None => 0.0,
    }
}

/// Residual points strictly inside `region`.
pub fn sample_domain(region: &Polygon, count: usize, seed: u64, strategy: Strategy, time: TimeSpan) -> Result<PointSet> {
    if count == 0 {
        return Err(Error::config("residual point count must be positive"));
    }
    if region.area() <= 0.0 {
        return Err(Error::config("empty sampling region"));
    }
    let mut rng = rng_for(seed);
    let xy = match strategy {
        Strategy::Random => region.sample_uniform(&mut rng, count),
        Strategy::Grid => region.grid_points(count),
    };
    let mut set = PointSet::new(Role::Residual, seed);
    for p in xy {
        let t = draw_time(&mut rng, time);
        set.push([p[0], p[1], t], &[]);
    }
    Ok(set)
}

/// How synthetic density-gradient targets are produced.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum GradientMethod {
    /// Closed-form gradient supplied by the oracle.
    Analytic,
    /// Central differences with spacing `h`, regardless of discontinuities.
    Central { h: f64 },
    /// Central differences, replaced by a one-sided difference on the
    /// point's own side whenever the stencil crosses a known discontinuity.
    OneSided { h: f64 },
}

/// Where gradient data are taken.
#[derive(Clone, Debug, PartialEq)]
pub enum GradientRegion {
    Area(Polygon),
    Curve(Polyline),
}

fn rho_at(oracle: &dyn Oracle, p: [f64; 3]) -> Result<f64> {
    Ok(oracle.state(p)?.rho)
}

/// Density gradient of `oracle` at `p` by the chosen method.
pub fn density_gradient(oracle: &dyn Oracle, p: [f64; 3], method: GradientMethod) -> Result<[f64; 2]> {
    match method {
        GradientMethod::Analytic => oracle
            .density_gradient(p)
            .ok_or_else(|| Error::config("oracle has no closed-form density gradient")),
        GradientMethod::Central { h } | GradientMethod::OneSided { h } => {
            if !(h > 0.0) {
                return Err(Error::config("finite-difference spacing must be positive"));
            }
            let one_sided = matches!(method, GradientMethod::OneSided { .. });
            let here = oracle.side(p);
            let mut g = [0.0; 2];
            for (d, gd) in g.iter_mut().enumerate() {
                let mut fwd = p;
                fwd[d] += h;
                let mut back = p;
                back[d] -= h;
                let (sf, sb) = (oracle.side(fwd), oracle.side(back));
                *gd = if !one_sided || (sf == here && sb == here) {
                    (rho_at(oracle, fwd)? - rho_at(oracle, back)?) / (2.0 * h)
                } else if sf == here {
                    (rho_at(oracle, fwd)? - rho_at(oracle, p)?) / h
                } else if sb == here {
                    (rho_at(oracle, p)? - rho_at(oracle, back)?) / h
                } else {
                    // both neighbours across the discontinuity; no smooth stencil
                    0.0
                };
            }
            Ok(g)
        }
    }
}

/// Synthetic Schlieren data: density gradients over `region`.
///
/// Area regions are sampled uniformly at random, curves evenly by arclength.
/// `noise` is the standard deviation of additive Gaussian noise.
pub fn synth_schlieren(
    oracle: &dyn Oracle,
    region: &GradientRegion,
    count: usize,
    seed: u64,
    method: GradientMethod,
    time: TimeSpan,
    noise: f64,
) -> Result<PointSet> {
    let mut rng = rng_for(seed);
    let xy: Vec<[f64; 2]> = match region {
        GradientRegion::Area(poly) => poly.sample_uniform(&mut rng, count),
        GradientRegion::Curve(line) => line.even_points(count).into_iter().map(|(p, _)| p).collect(),
    };
    let normal = Normal::new(0.0, noise.max(0.0)).map_err(|e| Error::config(e.to_string()))?;
    let mut set = PointSet::new(Role::GradientData, seed);
    for p in xy {
        let t = draw_time(&mut rng, time);
        let pt = [p[0], p[1], t];
        let mut g = density_gradient(oracle, pt, method)?;
        if !g.iter().all(|v| v.is_finite()) {
            return Err(Error::domain(format!("density gradient undefined at {p:?}")));
        }
        if noise > 0.0 {
            for v in &mut g {
                *v += normal.sample(&mut rng);
            }
        }
        set.push(pt, &g);
    }
    Ok(set)
}

/// Boundary piece with its outward (into-the-wall) normal.
#[derive(Clone, Debug, PartialEq)]
pub enum BoundaryCurve {
    /// Normals from the polyline's right-hand side, flipped when `flip`.
    Line { line: Polyline, flip: bool },
    /// Circular arc from `phi0` to `phi1` (radians); normals are radial
    /// `(cos phi, sin phi)`.
    Arc { center: [f64; 2], radius: f64, phi0: f64, phi1: f64 },
}

impl BoundaryCurve {
    fn point(&self, s: f64) -> ([f64; 2], [f64; 2]) {
        match self {
            BoundaryCurve::Line { line, flip } => {
                let (p, n) = line.point_at(s);
                (p, if *flip { [-n[0], -n[1]] } else { n })
            }
            BoundaryCurve::Arc { center, radius, phi0, phi1 } => {
                let phi = phi0 + s * (phi1 - phi0);
                let n = [phi.cos(), phi.sin()];
                ([center[0] + radius * n[0], center[1] + radius * n[1]], n)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Placement {
    Random,
    Even,
}

/// Points on a boundary piece with role-appropriate targets: the full state
/// for inflow, pressure for wall-pressure, the normal for wall-slip.
pub fn sample_boundary(
    curve: &BoundaryCurve,
    count: usize,
    seed: u64,
    placement: Placement,
    role: Role,
    oracle: Option<&dyn Oracle>,
    time: TimeSpan,
) -> Result<PointSet> {
    let mut rng = rng_for(seed);
    let mut set = PointSet::new(role, seed);
    for i in 0..count {
        let s = match placement {
            Placement::Random => rng.random_range(0.0..=1.0),
            Placement::Even if count == 1 => 0.5,
            Placement::Even => i as f64 / (count - 1) as f64,
        };
        let (p, n) = curve.point(s);
        let pt = [p[0], p[1], draw_time(&mut rng, time)];
        let need = || oracle.ok_or_else(|| Error::config(format!("{} targets need an oracle", role.name())));
        match role {
            Role::Inflow => set.push(pt, &need()?.state(pt)?.to_array()),
            Role::WallPressure => set.push(pt, &[need()?.state(pt)?.p]),
            Role::WallSlip | Role::Interface => set.push(pt, &n),
            Role::Residual => set.push(pt, &[]),
            Role::GradientData => return Err(Error::config("use synth_schlieren for gradient data")),
        }
    }
    Ok(set)
}

/// Pressure (or full-state) data at explicit locations.
pub fn point_data(points: &[[f64; 3]], role: Role, oracle: &dyn Oracle, seed: u64) -> Result<PointSet> {
    let mut set = PointSet::new(role, seed);
    for &pt in points {
        let s = oracle.state(pt)?;
        match role {
            Role::WallPressure => set.push(pt, &[s.p]),
            Role::Inflow => set.push(pt, &s.to_array()),
            _ => return Err(Error::config(format!("point data not supported for {}", role.name()))),
        }
    }
    Ok(set)
}

/// Evenly spaced interface points (ends included) carrying the curve normal;
/// each spatial point is repeated at every time level.
pub fn sample_interface(curve: &Polyline, count: usize, time_levels: &[f64]) -> Result<PointSet> {
    if curve.length() <= 0.0 {
        return Err(Error::config("degenerate interface curve"));
    }
    let levels: &[f64] = if time_levels.is_empty() { &[0.0] } else { time_levels };
    let mut set = PointSet::new(Role::Interface, 0);
    for &t in levels {
        for (p, n) in curve.even_points(count) {
            set.push([p[0], p[1], t], &n);
        }
    }
    Ok(set)
}

/// Writes point sets as `role,x,y,t,target0..target3` rows.
pub fn export_point_sets(sets: &[&PointSet], path: &Path) -> Result<()> {
    let mut out = String::from("role,x,y,t,target0,target1,target2,target3\n");
    for set in sets {
        for i in 0..set.len() {
            let p = set.points[i];
            let _ = write!(out, "{},{:?},{:?},{:?}", set.role.name(), p[0], p[1], p[2]);
            let tg = set.target(i);
            for k in 0..4 {
                match tg.get(k) {
                    Some(v) => {
                        let _ = write!(out, ",{v:?}");
                    }
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads point sets written by [`export_point_sets`], grouped by role in
/// order of first appearance.
pub fn import_point_sets(path: &Path) -> Result<Vec<PointSet>> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::ingestion(format!("{}: {e}", path.display())))?;
    let mut sets: Vec<PointSet> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::ingestion(format!("{}: row {}: {e}", path.display(), i + 1)))?;
        let bad = |what: &str| Error::ingestion(format!("{}: row {}: {what}", path.display(), i + 1));
        let role = Role::parse(rec.get(0).ok_or_else(|| bad("missing role"))?)?;
        let num = |k: usize| -> Result<f64> {
            rec.get(k)
                .ok_or_else(|| bad("missing column"))?
                .trim()
                .parse()
                .map_err(|_| bad("not a number"))
        };
        let pt = [num(1)?, num(2)?, num(3)?];
        let targets = (0..role.target_width()).map(|k| num(4 + k)).collect::<Result<Vec<_>>>()?;
        let idx = match sets.iter().position(|s| s.role == role) {
            Some(i) => i,
            None => {
                sets.push(PointSet::new(role, 0));
                sets.len() - 1
            }
        };
        sets[idx].push(pt, &targets);
    }
    Ok(sets)
}
