use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Oracle;
use crate::error::{Error, Result};
use crate::geometry::Polygon;
use crate::physics::PrimitiveState;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldFormat {
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Units {
    Si,
    Nondim,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Analytic,
    ExternalFile(String),
}

/// Scattered samples of a flow field.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceField {
    pub points: Vec<[f64; 2]>,
    pub states: Vec<PrimitiveState>,
    pub units: Units,
    pub provenance: Provenance,
}

#[derive(Debug, Deserialize)]
struct Row {
    x: f64,
    y: f64,
    rho: f64,
    u: f64,
    v: f64,
    p: f64,
}

/// Reads `x,y,rho,u,v,p` rows. A comment line `# units: SI` or
/// `# units: nondim` declares the units; SI is assumed when absent.
pub fn load_reference_field(path: &Path, format: FieldFormat) -> Result<ReferenceField> {
    let FieldFormat::Csv = format;
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut units = Units::Si;
    for line in text.lines().filter(|l| l.trim_start().starts_with('#')) {
        let body = line.trim_start().trim_start_matches('#').trim();
        if let Some(u) = body.strip_prefix("units:") {
            units = match u.trim().to_ascii_lowercase().as_str() {
                "si" => Units::Si,
                "nondim" => Units::Nondim,
                other => return Err(Error::ingestion(format!("{name}: unknown units '{other}'"))),
            };
        }
    }
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut field = ReferenceField {
        points: Vec::new(),
        states: Vec::new(),
        units,
        provenance: Provenance::ExternalFile(name.clone()),
    };
    for (i, row) in reader.deserialize::<Row>().enumerate() {
        let row = row.map_err(|e| Error::ingestion(format!("{name}: row {}: {e}", i + 1)))?;
        let state = PrimitiveState::new(row.rho, row.u, row.v, row.p);
        if ![row.x, row.y].iter().all(|c| c.is_finite()) || !state.is_admissible() {
            return Err(Error::ingestion(format!(
                "{name}: row {}: inadmissible state (rho = {}, p = {})",
                i + 1,
                row.rho,
                row.p
            )));
        }
        field.points.push([row.x, row.y]);
        field.states.push(state);
    }
    if field.points.is_empty() {
        return Err(Error::ingestion(format!("{name}: no data rows")));
    }
    Ok(field)
}

pub fn export_reference_field(field: &ReferenceField, path: &Path) -> Result<()> {
    let mut out = String::new();
    let units = match field.units {
        Units::Si => "SI",
        Units::Nondim => "nondim",
    };
    let _ = writeln!(out, "# units: {units}");
    out.push_str("x,y,rho,u,v,p\n");
    for (p, s) in field.points.iter().zip(&field.states) {
        let _ = writeln!(out, "{:?},{:?},{:?},{:?},{:?},{:?}", p[0], p[1], s.rho, s.u, s.v, s.p);
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

impl ReferenceField {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Fails on the first sample that lies outside `domain` (beyond `tol`).
    pub fn check_domain(&self, domain: &Polygon, tol: f64) -> Result<()> {
        for (i, p) in self.points.iter().enumerate() {
            if !domain.contains(*p) && domain.boundary_distance(*p) > tol {
                return Err(Error::ingestion(format!(
                    "reference sample {} at {p:?} lies outside the domain",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    /// Applies `f` to every state and returns the converted field.
    pub fn map_states(&self, units: Units, f: impl Fn(&PrimitiveState) -> PrimitiveState) -> Self {
        Self {
            points: self.points.clone(),
            states: self.states.iter().map(f).collect(),
            units,
            provenance: self.provenance.clone(),
        }
    }

    pub fn map_points(&self, f: impl Fn([f64; 2]) -> [f64; 2]) -> Self {
        Self {
            points: self.points.iter().map(|&p| f(p)).collect(),
            ..self.clone()
        }
    }
}

/// Rectilinear view of a reference field with bilinear interpolation.
/// Grid nodes may be missing (e.g. inside a body).
#[derive(Clone, Debug)]
pub struct ReferenceGrid {
    xs: Vec<f64>,
    ys: Vec<f64>,
    nodes: Vec<Option<[f64; 4]>>,
}

fn unique_sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
    v
}

fn locate(axis: &[f64], x: f64) -> Option<(usize, f64)> {
    let n = axis.len();
    if n < 2 || x < axis[0] - 1e-12 || x > axis[n - 1] + 1e-12 {
        return None;
    }
    let i = axis.partition_point(|&a| a <= x).clamp(1, n - 1) - 1;
    let t = ((x - axis[i]) / (axis[i + 1] - axis[i])).clamp(0.0, 1.0);
    Some((i, t))
}

impl ReferenceGrid {
    pub fn from_field(field: &ReferenceField) -> Result<Self> {
        let xs = unique_sorted(field.points.iter().map(|p| p[0]).collect());
        let ys = unique_sorted(field.points.iter().map(|p| p[1]).collect());
        if xs.len() < 2 || ys.len() < 2 || xs.len() * ys.len() > 4 * field.len() {
            return Err(Error::ingestion(
                "reference samples do not form a rectilinear grid",
            ));
        }
        let mut nodes = vec![None; xs.len() * ys.len()];
        let find = |axis: &[f64], v: f64| {
            axis.iter()
                .position(|&a| (a - v).abs() <= 1e-12 * (1.0 + v.abs()))
                .expect("value from axis")
        };
        for (p, s) in field.points.iter().zip(&field.states) {
            let (i, j) = (find(&xs, p[0]), find(&ys, p[1]));
            nodes[j * xs.len() + i] = Some(s.to_array());
        }
        Ok(Self { xs, ys, nodes })
    }

    pub fn bounds(&self) -> [f64; 4] {
        [self.xs[0], *self.xs.last().unwrap(), self.ys[0], *self.ys.last().unwrap()]
    }

    pub fn spacing(&self) -> [f64; 2] {
        let b = self.bounds();
        [(b[1] - b[0]) / (self.xs.len() - 1) as f64, (b[3] - b[2]) / (self.ys.len() - 1) as f64]
    }

    /// Bilinear interpolant; `None` when a surrounding node is missing.
    pub fn sample(&self, p: [f64; 2]) -> Option<PrimitiveState> {
        let (i, tx) = locate(&self.xs, p[0])?;
        let (j, ty) = locate(&self.ys, p[1])?;
        let nx = self.xs.len();
        let c00 = self.nodes[j * nx + i]?;
        let c10 = self.nodes[j * nx + i + 1]?;
        let c01 = self.nodes[(j + 1) * nx + i]?;
        let c11 = self.nodes[(j + 1) * nx + i + 1]?;
        let v: [f64; 4] = std::array::from_fn(|k| {
            (1.0 - tx) * (1.0 - ty) * c00[k] + tx * (1.0 - ty) * c10[k] + (1.0 - tx) * ty * c01[k] + tx * ty * c11[k]
        });
        Some(PrimitiveState::from_array(v))
    }

    /// Closest present node within `radius`, for points next to missing
    /// nodes such as body surfaces.
    pub fn nearest(&self, p: [f64; 2], radius: f64) -> Option<PrimitiveState> {
        let nx = self.xs.len();
        let mut best: Option<(f64, [f64; 4])> = None;
        for (k, node) in self.nodes.iter().enumerate() {
            if let Some(s) = node {
                let d = (self.xs[k % nx] - p[0]).hypot(self.ys[k / nx] - p[1]);
                if d <= radius && best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, *s));
                }
            }
        }
        best.map(|(_, s)| PrimitiveState::from_array(s))
    }
}

impl Oracle for ReferenceGrid {
    fn state(&self, p: [f64; 3]) -> Result<PrimitiveState> {
        let [hx, hy] = self.spacing();
        self.sample([p[0], p[1]])
            .or_else(|| self.nearest([p[0], p[1]], 1.5 * hx.max(hy)))
            .ok_or_else(|| Error::domain(format!("no reference data around {:?}", [p[0], p[1]])))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &tempfile::TempDir, text: &str) -> std::path::PathBuf {
        let path = dir.path().join("ref.csv");
        std::fs::write(&path, text).unwrap();
        path
    }

    #[test]
    fn three_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(
            &dir,
            "# units: nondim\nx,y,rho,u,v,p\n0,0,1,1,0,0.2\n0.5,0,1.1,0.9,0.1,0.3\n1,0,1.2,0.8,0,0.4\n",
        );
        let f = load_reference_field(&path, FieldFormat::Csv).unwrap();
        assert_eq!(f.len(), 3);
        assert_eq!(f.units, Units::Nondim);
    }

    #[test]
    fn negative_density_names_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(&dir, "x,y,rho,u,v,p\n0,0,1,1,0,1\n1,0,-1,1,0,1\n");
        let e = load_reference_field(&path, FieldFormat::Csv).unwrap_err();
        assert!(matches!(e, Error::Ingestion(_)));
        assert!(e.to_string().contains("row 2"), "{e}");
    }

    #[test]
    fn export_import_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let field = ReferenceField {
            points: vec![[0.1, 0.2], [0.3, 1.0 / 3.0]],
            states: vec![
                PrimitiveState::new(1.225, 1360.6963, 0.0, 101253.6),
                PrimitiveState::new(2.0 / 3.0, 0.1, -0.2, 0.7),
            ],
            units: Units::Si,
            provenance: Provenance::Analytic,
        };
        let path = dir.path().join("out.csv");
        export_reference_field(&field, &path).unwrap();
        let back = load_reference_field(&path, FieldFormat::Csv).unwrap();
        assert_eq!(back.points, field.points);
        assert_eq!(back.states, field.states);
    }

    #[test]
    fn bilinear_grid_is_exact_on_bilinear_data() {
        let mut field = ReferenceField {
            points: vec![],
            states: vec![],
            units: Units::Nondim,
            provenance: Provenance::Analytic,
        };
        for j in 0..5 {
            for i in 0..4 {
                let (x, y) = (i as f64 * 0.5, j as f64 * 0.25);
                field.points.push([x, y]);
                field.states.push(PrimitiveState::new(1.0 + x + 2.0 * y + x * y, x, y, 1.0));
            }
        }
        let g = ReferenceGrid::from_field(&field).unwrap();
        let s = g.sample([0.7, 0.3]).unwrap();
        assert!((s.rho - (1.0 + 0.7 + 0.6 + 0.21)).abs() < 1e-14);
        assert!(g.sample([5.0, 0.3]).is_none());
    }
}
