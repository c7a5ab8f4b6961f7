//! Planar regions, curves and boundary quadrature.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Indicator;

/// Interface tolerance in nondimensional coordinates.
pub const TAU: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Membership {
    Inside,
    Boundary,
    Outside,
}

/// Straight segment from `a` to `b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: [f64; 2],
    pub b: [f64; 2],
}

impl Segment {
    pub fn new(a: [f64; 2], b: [f64; 2]) -> Self {
        Self { a, b }
    }

    pub fn length(&self) -> f64 {
        (self.b[0] - self.a[0]).hypot(self.b[1] - self.a[1])
    }

    pub fn point_at(&self, t: f64) -> [f64; 2] {
        [
            self.a[0] + t * (self.b[0] - self.a[0]),
            self.a[1] + t * (self.b[1] - self.a[1]),
        ]
    }

    /// Unit normal pointing to the right of the direction a -> b, which is
    /// outward for counter-clockwise polygons.
    pub fn right_normal(&self) -> [f64; 2] {
        let l = self.length();
        [(self.b[1] - self.a[1]) / l, -(self.b[0] - self.a[0]) / l]
    }

    pub fn distance(&self, p: [f64; 2]) -> f64 {
        let d = [self.b[0] - self.a[0], self.b[1] - self.a[1]];
        let l2 = d[0] * d[0] + d[1] * d[1];
        let t = if l2 == 0.0 {
            0.0
        } else {
            (((p[0] - self.a[0]) * d[0] + (p[1] - self.a[1]) * d[1]) / l2).clamp(0.0, 1.0)
        };
        let q = self.point_at(t);
        (p[0] - q[0]).hypot(p[1] - q[1])
    }
}

/// Open polyline, used for interfaces and boundary pieces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub points: Vec<[f64; 2]>,
}

impl Polyline {
    pub fn new(points: Vec<[f64; 2]>) -> Result<Self> {
        let line = Self { points };
        if line.points.len() < 2 || line.length() <= 0.0 {
            return Err(Error::config("degenerate curve: needs two distinct points"));
        }
        Ok(line)
    }

    pub fn segment(a: [f64; 2], b: [f64; 2]) -> Result<Self> {
        Self::new(vec![a, b])
    }

    pub fn segments(&self) -> impl Iterator<Item = Segment> + '_ {
        self.points.windows(2).map(|w| Segment::new(w[0], w[1]))
    }

    pub fn length(&self) -> f64 {
        self.segments().map(|s| s.length()).sum()
    }

    /// Point at arclength fraction `t` in [0, 1], with the local right normal.
    pub fn point_at(&self, t: f64) -> ([f64; 2], [f64; 2]) {
        let target = t.clamp(0.0, 1.0) * self.length();
        let mut walked = 0.0;
        let mut last = None;
        for s in self.segments() {
            let l = s.length();
            if l == 0.0 {
                continue;
            }
            if walked + l >= target {
                return (s.point_at((target - walked) / l), s.right_normal());
            }
            walked += l;
            last = Some(s);
        }
        let s = last.expect("non-degenerate polyline");
        (s.b, s.right_normal())
    }

    /// `count` points evenly spaced by arclength, ends included.
    pub fn even_points(&self, count: usize) -> Vec<([f64; 2], [f64; 2])> {
        match count {
            0 => Vec::new(),
            1 => vec![self.point_at(0.5)],
            _ => (0..count)
                .map(|i| self.point_at(i as f64 / (count - 1) as f64))
                .collect(),
        }
    }

    pub fn distance(&self, p: [f64; 2]) -> f64 {
        self.segments().map(|s| s.distance(p)).fold(f64::INFINITY, f64::min)
    }
}

/// Simple polygon stored counter-clockwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    vertices: Vec<[f64; 2]>,
}

fn signed_area(v: &[[f64; 2]]) -> f64 {
    let n = v.len();
    (0..n)
        .map(|i| {
            let (a, b) = (v[i], v[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        / 2.0
}

impl Polygon {
    pub fn new(mut vertices: Vec<[f64; 2]>) -> Result<Self> {
        if vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        if vertices.len() < 3 {
            return Err(Error::config("polygon needs at least three vertices"));
        }
        let area = signed_area(&vertices);
        if area.abs() < 1e-14 {
            return Err(Error::config("empty region: polygon has zero area"));
        }
        if area < 0.0 {
            vertices.reverse();
        }
        Ok(Self { vertices })
    }

    pub fn rectangle(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self::new(vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]]).expect("non-degenerate rectangle")
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn edges(&self) -> impl Iterator<Item = Segment> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| Segment::new(self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|e| e.length()).sum()
    }

    pub fn bbox(&self) -> [f64; 4] {
        let mut b = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
        for v in &self.vertices {
            b[0] = b[0].min(v[0]);
            b[1] = b[1].max(v[0]);
            b[2] = b[2].min(v[1]);
            b[3] = b[3].max(v[1]);
        }
        b
    }

    /// Even-odd crossing test; boundary points may go either way.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let n = self.vertices.len();
        let mut inside = false;
        let mut j = n - 1;
        for i in 0..n {
            let (a, b) = (self.vertices[i], self.vertices[j]);
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
                if p[0] < x {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }

    pub fn boundary_distance(&self, p: [f64; 2]) -> f64 {
        self.edges().map(|e| e.distance(p)).fold(f64::INFINITY, f64::min)
    }

    pub fn classify(&self, p: [f64; 2], tol: f64) -> Membership {
        if self.boundary_distance(p) <= tol {
            Membership::Boundary
        } else if self.contains(p) {
            Membership::Inside
        } else {
            Membership::Outside
        }
    }

    /// Keeps the part where `n . x <= c`.
    pub fn clip_halfplane(&self, n: [f64; 2], c: f64) -> Result<Polygon> {
        let side = |p: [f64; 2]| n[0] * p[0] + n[1] * p[1] - c;
        let mut out = Vec::new();
        let m = self.vertices.len();
        for i in 0..m {
            let (a, b) = (self.vertices[i], self.vertices[(i + 1) % m]);
            let (sa, sb) = (side(a), side(b));
            if sa <= 0.0 {
                out.push(a);
            }
            if (sa < 0.0 && sb > 0.0) || (sa > 0.0 && sb < 0.0) {
                let t = sa / (sa - sb);
                out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
            }
        }
        Polygon::new(out)
    }

    /// Uniform random interior points by rejection from the bounding box.
    pub fn sample_uniform<R: Rng>(&self, rng: &mut R, count: usize) -> Vec<[f64; 2]> {
        let b = self.bbox();
        let mut pts = Vec::with_capacity(count);
        while pts.len() < count {
            let p = [rng.random_range(b[0]..b[1]), rng.random_range(b[2]..b[3])];
            if self.contains(p) && self.boundary_distance(p) > TAU {
                pts.push(p);
            }
        }
        pts
    }

    /// Cell centres of a regular grid over the bounding box that fall inside.
    /// The grid side is chosen so that at least `count` cells exist in the box.
    pub fn grid_points(&self, count: usize) -> Vec<[f64; 2]> {
        let b = self.bbox();
        let side = (count as f64).sqrt().ceil() as usize;
        let (hx, hy) = ((b[1] - b[0]) / side as f64, (b[3] - b[2]) / side as f64);
        let mut pts = Vec::new();
        for j in 0..side {
            for i in 0..side {
                let p = [b[0] + (i as f64 + 0.5) * hx, b[2] + (j as f64 + 0.5) * hy];
                if self.contains(p) {
                    pts.push(p);
                }
            }
        }
        pts
    }

    /// Composite Gauss-Legendre rule over the closed boundary with outward
    /// normals; `panels_per_unit` panels per unit length, at least one per edge.
    pub fn boundary_quadrature(&self, order: usize, panels_per_unit: f64) -> Vec<QuadraturePoint> {
        let (nodes, weights) = gauss_legendre(order);
        let mut q = Vec::new();
        for e in self.edges() {
            let len = e.length();
            if len == 0.0 {
                continue;
            }
            let panels = ((len * panels_per_unit).ceil() as usize).max(1);
            let normal = e.right_normal();
            let h = 1.0 / panels as f64;
            for k in 0..panels {
                for (x, w) in nodes.iter().zip(&weights) {
                    let t = (k as f64 + 0.5 * (x + 1.0)) * h;
                    q.push(QuadraturePoint {
                        point: e.point_at(t),
                        normal,
                        weight: 0.5 * w * h * len,
                    });
                }
            }
        }
        q
    }
}

impl Indicator for Polygon {
    fn membership(&self, point: [f64; 2]) -> Membership {
        self.classify(point, TAU)
    }
}

/// Node of a boundary quadrature rule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadraturePoint {
    pub point: [f64; 2],
    pub normal: [f64; 2],
    pub weight: f64,
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1);
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for order in 1..=8 {
            let (x, w) = gauss_legendre(order);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
            let deg = 2 * order - 1;
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg + 1) as f64 };
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
            assert!((q - exact).abs() < 1e-13, "order {order}");
            let even = 2 * order - 2;
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(even as i32)).sum();
            assert!((q - 2.0 / (even + 1) as f64).abs() < 1e-13, "order {order}");
        }
    }

    #[test]
    fn polygon_orientation_and_area() {
        let p = Polygon::new(vec![[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]]).unwrap();
        assert!((p.area() - 1.0).abs() < 1e-15);
        let q = p.boundary_quadrature(3, 4.0);
        // outward normals: integral of x n_x over the boundary equals the area
        let flux: f64 = q.iter().map(|q| q.point[0] * q.normal[0] * q.weight).sum();
        assert!((flux - 1.0).abs() < 1e-14);
        let len: f64 = q.iter().map(|q| q.weight).sum();
        assert!((len - 4.0).abs() < 1e-14);
    }

    #[test]
    fn classification() {
        let p = Polygon::rectangle(0.0, 0.5, 0.0, 1.0);
        assert_eq!(p.classify([0.25, 0.9], TAU), Membership::Inside);
        assert_eq!(p.classify([0.5, 0.3], TAU), Membership::Boundary);
        assert_eq!(p.classify([0.5 + 1e-13, 0.3], TAU), Membership::Boundary);
        assert_eq!(p.classify([0.75, 0.3], TAU), Membership::Outside);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(Polygon::new(vec![[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]).is_err());
        assert!(Polyline::new(vec![[0.0, 0.0], [0.0, 0.0]]).is_err());
    }

    #[test]
    fn even_points_on_unit_segment() {
        let l = Polyline::segment([0.0, 0.0], [1.0, 0.0]).unwrap();
        let pts: Vec<f64> = l.even_points(3).iter().map(|p| p.0[0]).collect();
        assert_eq!(pts, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn grid_on_unit_square() {
        let p = Polygon::rectangle(0.0, 1.0, 0.0, 1.0);
        let g = p.grid_points(4);
        assert_eq!(g, vec![[0.25, 0.25], [0.75, 0.25], [0.25, 0.75], [0.75, 0.75]]);
    }

    #[test]
    fn clipping_splits_area() {
        let sq = Polygon::rectangle(0.0, 1.0, 0.0, 1.0);
        let left = sq.clip_halfplane([1.0, 0.0], 0.3).unwrap();
        let right = sq.clip_halfplane([-1.0, 0.0], -0.3).unwrap();
        assert!((left.area() - 0.3).abs() < 1e-15);
        assert!((right.area() - 0.7).abs() < 1e-15);
        let diag = sq.clip_halfplane([-1.0, 1.0], 0.0).unwrap();
        assert!((diag.area() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn uniform_samples_are_inside() {
        let tri = Polygon::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for p in tri.sample_uniform(&mut rng, 500) {
            assert!(p[0] + p[1] < 1.0 && p[0] > 0.0 && p[1] > 0.0);
        }
    }
}
