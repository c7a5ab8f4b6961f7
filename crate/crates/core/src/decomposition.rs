//! Subdomains, interfaces and point location for XPINN runs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Membership, Polygon, Polyline, TAU};
use crate::network::Indicator;
use crate::oracles::WedgeGeometry;

/// The four built-in experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Smooth,
    Expansion,
    Oblique,
    Bow,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Smooth => "smooth",
            Experiment::Expansion => "expansion",
            Experiment::Oblique => "oblique",
            Experiment::Bow => "bow",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "smooth" => Ok(Experiment::Smooth),
            "expansion" => Ok(Experiment::Expansion),
            "oblique" => Ok(Experiment::Oblique),
            "bow" => Ok(Experiment::Bow),
            other => Err(Error::config(format!("unknown experiment '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubdomainSpec {
    pub id: usize,
    pub region: Polygon,
    /// Architecture override; `None` uses the run default.
    pub sizes: Option<Vec<usize>>,
    /// Residual-point override; `None` splits the run total by area.
    pub residual_points: Option<usize>,
}

/// Which continuity penalties an interface carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterfaceTerms {
    pub average: bool,
    pub residual: bool,
    pub flux: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InterfaceSpec {
    pub pair: (usize, usize),
    pub curve: Polyline,
    pub points: usize,
    pub terms: InterfaceTerms,
}

/// Where a point falls in a partition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Location {
    Subdomain(usize),
    Interface(usize, usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    pub domain: Polygon,
    pub subdomains: Vec<SubdomainSpec>,
    pub interfaces: Vec<InterfaceSpec>,
}

impl Decomposition {
    pub fn single(domain: Polygon) -> Self {
        Self {
            subdomains: vec![SubdomainSpec {
                id: 0,
                region: domain.clone(),
                sizes: None,
                residual_points: None,
            }],
            domain,
            interfaces: Vec::new(),
        }
    }

    pub fn is_xpinn(&self) -> bool {
        self.subdomains.len() > 1
    }

    /// Owning subdomain, or the adjacent pair for points on an interface.
    pub fn locate(&self, p: [f64; 2]) -> Result<Location> {
        let mut touching = Vec::new();
        for s in &self.subdomains {
            match s.region.classify(p, TAU) {
                Membership::Inside => return Ok(Location::Subdomain(s.id)),
                Membership::Boundary => touching.push(s.id),
                Membership::Outside => {}
            }
        }
        match touching.as_slice() {
            [] => Err(Error::domain(format!("point {p:?} is outside the domain"))),
            [only] => Ok(Location::Subdomain(*only)),
            [a, b, ..] => Ok(Location::Interface(*a, *b)),
        }
    }

    pub fn indicators(&self) -> Vec<&dyn Indicator> {
        self.subdomains.iter().map(|s| &s.region as &dyn Indicator).collect()
    }

    /// Checks that the subdomains tile the domain and that every interface
    /// lies on both of its subdomains' boundaries.
    pub fn validate(&self) -> Result<()> {
        let total: f64 = self.subdomains.iter().map(|s| s.region.area()).sum();
        if (total - self.domain.area()).abs() > 1e-9 * self.domain.area().max(1.0) {
            return Err(Error::config(format!(
                "subdomain areas sum to {total}, domain area is {}",
                self.domain.area()
            )));
        }
        for (i, s) in self.subdomains.iter().enumerate() {
            if s.id != i {
                return Err(Error::config("subdomain ids must be 0..n in order"));
            }
        }
        for itf in &self.interfaces {
            let (a, b) = itf.pair;
            if a == b || a >= self.subdomains.len() || b >= self.subdomains.len() {
                return Err(Error::config(format!("interface references invalid pair ({a}, {b})")));
            }
            for (p, _) in itf.curve.even_points(9) {
                for id in [a, b] {
                    if self.subdomains[id].region.boundary_distance(p) > 1e-9 {
                        return Err(Error::config(format!(
                            "interface point {p:?} is not on the boundary of subdomain {id}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Resolved geometry of one experiment.
#[derive(Clone, Debug, PartialEq)]
pub enum ExperimentGeometry {
    /// Square (-h, h)^2 split at x = 0.
    Smooth { half_width: f64 },
    /// Wedge domain split along the ray at `split_angle` from the corner.
    Expansion { wedge: WedgeGeometry, split_angle: f64 },
    /// Unit square with shock line `y = x tan(beta)`, split by lines parallel
    /// to it at vertical offsets `offsets` (upper first).
    Oblique { beta: f64, offsets: [f64; 2] },
    /// Box `[x0, x1] x [y0, y1]` minus a disk of `radius` at the origin; the
    /// curved interface is `x = a + b y^2`.
    Bow { radius: f64, bounds: [f64; 4], interface: [f64; 2], arc_segments: usize },
}

impl ExperimentGeometry {
    pub fn domain(&self) -> Polygon {
        match self {
            ExperimentGeometry::Smooth { half_width: h } => Polygon::rectangle(-h, *h, -h, *h),
            ExperimentGeometry::Expansion { wedge, .. } => wedge.domain(),
            ExperimentGeometry::Oblique { .. } => Polygon::rectangle(0.0, 1.0, 0.0, 1.0),
            ExperimentGeometry::Bow { radius, bounds, arc_segments, .. } => {
                let mut v = vec![[bounds[0], bounds[2]], [bounds[1], bounds[2]]];
                v.extend(body_arc(*radius, *arc_segments));
                v.push([bounds[1], bounds[3]]);
                v.push([bounds[0], bounds[3]]);
                Polygon::new(v).expect("bow domain")
            }
        }
    }
}

/// Upstream half of the body boundary, from (0, -r) round to (0, r).
pub fn body_arc(radius: f64, segments: usize) -> Vec<[f64; 2]> {
    use std::f64::consts::PI;
    (0..=segments)
        .map(|k| {
            let phi = -0.5 * PI - PI * k as f64 / segments as f64;
            [radius * phi.cos(), radius * phi.sin()]
        })
        .collect()
}

fn split_by_line(domain: &Polygon, n: [f64; 2], c: f64) -> Result<(Polygon, Polygon, Polyline)> {
    let lower = domain.clip_halfplane(n, c)?;
    let upper = domain.clip_halfplane([-n[0], -n[1]], -c)?;
    let mut on: Vec<[f64; 2]> = lower
        .vertices()
        .iter()
        .copied()
        .filter(|p| (n[0] * p[0] + n[1] * p[1] - c).abs() < 1e-12)
        .collect();
    let dir = [-n[1], n[0]];
    on.sort_by(|a, b| (dir[0] * a[0] + dir[1] * a[1]).total_cmp(&(dir[0] * b[0] + dir[1] * b[1])));
    let ends = match (on.first(), on.last()) {
        (Some(a), Some(b)) if a != b => (*a, *b),
        _ => return Err(Error::config("split line does not cross the domain")),
    };
    Ok((upper, lower, Polyline::segment(ends.0, ends.1)?))
}

/// The standard partition of each experiment, or one subdomain when
/// `xpinn` is false. `interface_points` overrides the per-interface count.
pub fn build_decomposition(
    geometry: &ExperimentGeometry,
    xpinn: bool,
    interface_points: Option<usize>,
) -> Result<Decomposition> {
    let domain = geometry.domain();
    if !xpinn {
        return Ok(Decomposition::single(domain));
    }
    let sub = |id: usize, region: Polygon| SubdomainSpec {
        id,
        region,
        sizes: None,
        residual_points: None,
    };
    let plain = InterfaceTerms {
        average: true,
        residual: true,
        flux: false,
    };
    let dec = match geometry {
        ExperimentGeometry::Smooth { .. } => {
            let (right, left, line) = split_by_line(&domain, [1.0, 0.0], 0.0)?;
            Decomposition {
                subdomains: vec![sub(0, left), sub(1, right)],
                interfaces: vec![InterfaceSpec {
                    pair: (0, 1),
                    curve: line,
                    points: interface_points.unwrap_or(100),
                    terms: plain,
                }],
                domain,
            }
        }
        ExperimentGeometry::Expansion { split_angle, wedge } => {
            let n = [split_angle.sin(), -split_angle.cos()];
            let c = n[0] * wedge.corner[0] + n[1] * wedge.corner[1];
            // `lower` keeps n.x <= c, the side above the ray
            let (below, above, line) = split_by_line(&domain, n, c)?;
            Decomposition {
                subdomains: vec![sub(0, above), sub(1, below)],
                interfaces: vec![InterfaceSpec {
                    pair: (0, 1),
                    curve: line,
                    points: interface_points.unwrap_or(300),
                    terms: plain,
                }],
                domain,
            }
        }
        ExperimentGeometry::Oblique { beta, offsets } => {
            let slope = beta.tan();
            // y - slope x = c: above is n.x >= c with n = (-slope, 1)
            let n = [slope, -1.0];
            let (mid_low, top, upper_line) = split_by_line(&domain, n, -offsets[0])?;
            let (bottom, middle, lower_line) = split_by_line(&mid_low, n, -offsets[1])?;
            let terms = InterfaceTerms { flux: true, ..plain };
            let count = interface_points.unwrap_or(200);
            Decomposition {
                subdomains: vec![sub(0, top), sub(1, middle), sub(2, bottom)],
                interfaces: vec![
                    InterfaceSpec {
                        pair: (0, 1),
                        curve: upper_line,
                        points: count,
                        terms,
                    },
                    InterfaceSpec {
                        pair: (1, 2),
                        curve: lower_line,
                        points: count,
                        terms,
                    },
                ],
                domain,
            }
        }
        ExperimentGeometry::Bow { radius, bounds, interface, arc_segments } => {
            let [x0, x1, y0, y1] = *bounds;
            let [a, b] = *interface;
            let steps = 60;
            let curve: Vec<[f64; 2]> = (0..=steps)
                .map(|k| {
                    let y = y0 + (y1 - y0) * k as f64 / steps as f64;
                    [a + b * y * y, y]
                })
                .collect();
            if curve.iter().any(|p| p[0] <= x0 || p[0] >= x1 || p[0].hypot(p[1]) <= *radius) {
                return Err(Error::config("bow interface leaves the fluid region"));
            }
            let mut left = vec![[x0, y0]];
            left.extend(curve.iter().copied());
            left.push([x0, y1]);
            let mut right = vec![[x1, y0]];
            right.extend(body_arc(*radius, *arc_segments));
            right.push([x1, y1]);
            right.extend(curve.iter().rev().copied());
            Decomposition {
                subdomains: vec![sub(0, Polygon::new(left)?), sub(1, Polygon::new(right)?)],
                interfaces: vec![InterfaceSpec {
                    pair: (0, 1),
                    curve: Polyline::new(curve)?,
                    points: interface_points.unwrap_or(200),
                    terms: plain,
                }],
                domain,
            }
        }
    };
    dec.validate()?;
    Ok(dec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::WallCurve;
    use rand::{Rng, SeedableRng};

    fn all_geometries() -> Vec<ExperimentGeometry> {
        let wedge = WedgeGeometry::new(10f64.to_radians(), WallCurve::Tan).unwrap();
        vec![
            ExperimentGeometry::Smooth { half_width: 1.0 },
            ExperimentGeometry::Expansion { wedge, split_angle: 30f64.to_radians() },
            ExperimentGeometry::Oblique { beta: 48.75f64.to_radians(), offsets: [0.2, -0.25] },
            ExperimentGeometry::Bow {
                radius: 0.5,
                bounds: [-1.0, 0.0, -1.5, 1.5],
                interface: [-0.9, 0.35],
                arc_segments: 48,
            },
        ]
    }

    #[test]
    fn preset_partitions() {
        let counts: Vec<(usize, usize, bool)> = all_geometries()
            .iter()
            .map(|g| {
                let d = build_decomposition(g, true, None).unwrap();
                (d.subdomains.len(), d.interfaces[0].points, d.interfaces[0].terms.flux)
            })
            .collect();
        assert_eq!(counts, vec![(2, 100, false), (2, 300, false), (3, 200, true), (2, 200, false)]);
    }

    #[test]
    fn single_subdomain_always_zero() {
        let d = build_decomposition(&all_geometries()[2], false, None).unwrap();
        assert_eq!(d.locate([0.3, 0.9]).unwrap(), Location::Subdomain(0));
        assert_eq!(d.locate([1.0, 0.5]).unwrap(), Location::Subdomain(0));
    }

    #[test]
    fn vertical_split_locate() {
        let domain = Polygon::rectangle(0.0, 1.0, 0.0, 1.0);
        let (right, left, line) = split_by_line(&domain, [1.0, 0.0], 0.5).unwrap();
        let d = Decomposition {
            subdomains: vec![
                SubdomainSpec { id: 0, region: left, sizes: None, residual_points: None },
                SubdomainSpec { id: 1, region: right, sizes: None, residual_points: None },
            ],
            interfaces: vec![InterfaceSpec {
                pair: (0, 1),
                curve: line,
                points: 10,
                terms: InterfaceTerms { average: true, residual: true, flux: false },
            }],
            domain,
        };
        d.validate().unwrap();
        assert_eq!(d.locate([0.25, 0.9]).unwrap(), Location::Subdomain(0));
        assert_eq!(d.locate([0.5 + 5e-13, 0.3]).unwrap(), Location::Interface(0, 1));
        assert!(d.locate([1.5, 0.3]).is_err());
    }

    #[test]
    fn partition_property() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for g in all_geometries() {
            let d = build_decomposition(&g, true, None).unwrap();
            let b = d.domain.bbox();
            let mut checked = 0;
            while checked < 20_000 {
                let p = [rng.random_range(b[0]..b[1]), rng.random_range(b[2]..b[3])];
                if !d.domain.contains(p) || d.domain.boundary_distance(p) < 1e-9 {
                    continue;
                }
                let claims = d
                    .subdomains
                    .iter()
                    .filter(|s| s.region.classify(p, TAU) == Membership::Inside)
                    .count();
                let on_interface = matches!(d.locate(p).unwrap(), Location::Interface(..));
                assert!(claims == 1 || (claims == 0 && on_interface), "{p:?} {claims}");
                checked += 1;
            }
        }
    }
}
