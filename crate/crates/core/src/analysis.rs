//! Error metrics, interface diagnostics, norm-based complexity and exports.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::decomposition::{Decomposition, Location};
use crate::error::{Error, Result};
use crate::network::{BatchForward, NetworkParams};
use crate::sampling::PointSet;

pub const VARIABLES: [&str; 4] = ["rho", "u", "v", "p"];

/// `|pred - ref|_2 / |ref|_2`.
pub fn relative_l2(pred: &[f64], reference: &[f64]) -> Result<f64> {
    if pred.len() != reference.len() {
        return Err(Error::Analysis(format!(
            "{} predictions for {} reference values",
            pred.len(),
            reference.len()
        )));
    }
    let den: f64 = reference.iter().map(|r| r * r).sum();
    if !(den > 0.0) {
        return Err(Error::Analysis("reference field has zero norm".into()));
    }
    let num: f64 = pred.iter().zip(reference).map(|(p, r)| (p - r) * (p - r)).sum();
    Ok((num / den).sqrt())
}

/// Relative L2 error per primitive variable.
pub fn relative_l2_fields(pred: &[[f64; 4]], reference: &[[f64; 4]]) -> Result<[f64; 4]> {
    let mut out = [0.0; 4];
    for (c, o) in out.iter_mut().enumerate() {
        let p: Vec<f64> = pred.iter().map(|s| s[c]).collect();
        let r: Vec<f64> = reference.iter().map(|s| s[c]).collect();
        *o = relative_l2(&p, &r).map_err(|e| Error::Analysis(format!("{}: {e}", VARIABLES[c])))?;
    }
    Ok(out)
}

/// Primitive outputs of one network at many points.
pub fn predict(net: &NetworkParams, points: &[[f64; 3]]) -> Vec<[f64; 4]> {
    let fwd = BatchForward::compute(net, points);
    (0..points.len())
        .map(|p| std::array::from_fn(|c| fwd.value(p, c)))
        .collect()
}

/// Stitched prediction: the owning subnet inside a subdomain, the average of
/// the adjacent subnets on an interface.
pub fn predict_stitched(nets: &[NetworkParams], dec: &Decomposition, points: &[[f64; 3]]) -> Result<Vec<[f64; 4]>> {
    if nets.len() != dec.subdomains.len() {
        return Err(Error::config("one network per subdomain required"));
    }
    if nets.len() == 1 {
        return Ok(predict(&nets[0], points));
    }
    let owners: Vec<Vec<usize>> = points
        .iter()
        .map(|p| {
            let mut v: Vec<usize> = dec
                .subdomains
                .iter()
                .enumerate()
                .filter(|(_, s)| s.region.classify([p[0], p[1]], crate::geometry::TAU) != crate::geometry::Membership::Outside)
                .map(|(i, _)| i)
                .collect();
            if let Ok(Location::Subdomain(i)) = dec.locate([p[0], p[1]]) {
                v = vec![i];
            }
            v
        })
        .collect();
    let per_net: Vec<Vec<[f64; 4]>> = nets.iter().map(|n| predict(n, points)).collect();
    owners
        .iter()
        .enumerate()
        .map(|(k, own)| {
            if own.is_empty() {
                return Err(Error::domain(format!("point {:?} lies outside every subdomain", points[k])));
            }
            let mut acc = [0.0; 4];
            for &i in own {
                for c in 0..4 {
                    acc[c] += per_net[i][k][c];
                }
            }
            Ok(acc.map(|v| v / own.len() as f64))
        })
        .collect()
}

/// Max over interface points of `|xi_a - xi_b|` per primitive.
pub fn interface_jump(nets: &[NetworkParams], interfaces: &[((usize, usize), &PointSet)]) -> Result<[f64; 4]> {
    if nets.len() < 2 || interfaces.is_empty() {
        return Err(Error::Analysis("interface jumps need an XPINN run".into()));
    }
    let mut out = [0.0f64; 4];
    for ((a, b), set) in interfaces {
        let pa = predict(&nets[*a], &set.points);
        let pb = predict(&nets[*b], &set.points);
        for (x, y) in pa.iter().zip(&pb) {
            for c in 0..4 {
                out[c] = out[c].max((x[c] - y[c]).abs());
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormMeasure {
    Spectral,
    Frobenius,
}

/// Largest singular value of a row-major `rows x cols` matrix by power
/// iteration on `W^T W`.
pub fn spectral_norm(w: &[f64], rows: usize, cols: usize) -> f64 {
    let mut x = vec![1.0 / (cols as f64).sqrt(); cols];
    let mut y = vec![0.0; rows];
    let mut sigma = 0.0;
    for _ in 0..2000 {
        for r in 0..rows {
            y[r] = (0..cols).map(|c| w[r * cols + c] * x[c]).sum();
        }
        let mut z = vec![0.0; cols];
        for r in 0..rows {
            for c in 0..cols {
                z[c] += w[r * cols + c] * y[r];
            }
        }
        let nz = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nz == 0.0 {
            return 0.0;
        }
        let next = nz.sqrt();
        x = z.into_iter().map(|v| v / nz).collect();
        if (next - sigma).abs() <= 1e-13 * next {
            return next;
        }
        sigma = next;
    }
    sigma
}

/// Product over layers of the chosen norm of the weight matrices.
pub fn network_norm(net: &NetworkParams, measure: NormMeasure) -> f64 {
    (0..net.layer_count())
        .map(|k| {
            let s = &net.slots()[k];
            let w = net.weights(k);
            match measure {
                NormMeasure::Spectral => spectral_norm(w, s.rows, s.cols),
                NormMeasure::Frobenius => w.iter().map(|v| v * v).sum::<f64>().sqrt(),
            }
        })
        .product()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexityRow {
    pub label: String,
    pub measure: f64,
    pub percent: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub measure: NormMeasure,
    pub rows: Vec<ComplexityRow>,
}

/// Norm measure of each network as a percentage of `baseline` (the PINN
/// run's measure); without a baseline the first network is 100%.
pub fn complexity_norms(nets: &[(String, &NetworkParams)], measure: NormMeasure, baseline: Option<f64>) -> Result<ComplexityReport> {
    let values: Vec<f64> = nets.iter().map(|(_, n)| network_norm(n, measure)).collect();
    let base = baseline.or_else(|| values.first().copied()).unwrap_or(1.0);
    if !(base > 0.0) {
        return Err(Error::Analysis("baseline norm must be positive".into()));
    }
    Ok(ComplexityReport {
        measure,
        rows: nets
            .iter()
            .zip(values)
            .map(|((label, _), m)| ComplexityRow {
                label: label.clone(),
                measure: m,
                percent: 100.0 * m / base,
            })
            .collect(),
    })
}

/// Writes `x,y,var,predicted,reference,abs_error,rel_error` rows.
pub fn export_field_csv(points: &[[f64; 3]], pred: &[[f64; 4]], reference: &[[f64; 4]], path: &Path) -> Result<()> {
    let mut s = String::from("x,y,var,predicted,reference,abs_error,rel_error\n");
    for ((p, a), r) in points.iter().zip(pred).zip(reference) {
        for c in 0..4 {
            let err = (a[c] - r[c]).abs();
            let rel = if r[c] != 0.0 { err / r[c].abs() } else { err };
            let _ = writeln!(s, "{:?},{:?},{},{:e},{:e},{:e},{:e}", p[0], p[1], VARIABLES[c], a[c], r[c], err, rel);
        }
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// One parsed row of a field export.
#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct FieldRow {
    pub x: f64,
    pub y: f64,
    pub var: String,
    pub predicted: f64,
    pub reference: f64,
    pub abs_error: f64,
    pub rel_error: f64,
}

pub fn load_field_csv(path: &Path) -> Result<Vec<FieldRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::ingestion(format!("{}: {e}", path.display())))?;
    rdr.deserialize()
        .map(|r| r.map_err(|e| Error::ingestion(format!("{}: {e}", path.display()))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::xavier_init;

    #[test]
    fn relative_l2_examples() {
        let r = vec![2.0; 17];
        assert_eq!(relative_l2(&r, &r).unwrap(), 0.0);
        let p = vec![2.2; 17];
        assert!((relative_l2(&p, &r).unwrap() - 0.1).abs() < 1e-14);
        assert!(relative_l2(&p, &[0.0; 17]).is_err());
        let scaled: (Vec<f64>, Vec<f64>) = (p.iter().map(|v| -3.0 * v).collect(), r.iter().map(|v| -3.0 * v).collect());
        assert!((relative_l2(&scaled.0, &scaled.1).unwrap() - 0.1).abs() < 1e-14);
    }

    #[test]
    fn spectral_norm_of_known_matrix() {
        // W^T W = [[25, 20], [20, 25]] has eigenvalues 45 and 5
        let s = spectral_norm(&[3.0, 0.0, 4.0, 5.0], 2, 2);
        assert!((s - 45f64.sqrt()).abs() < 1e-10);
        assert_eq!(spectral_norm(&[0.0; 6], 2, 3), 0.0);
    }

    #[test]
    fn complexity_percentages() {
        let a = xavier_init(&[2, 6, 6, 4], 3).unwrap();
        let mut b = a.clone();
        b.weights_mut(1).iter_mut().for_each(|v| *v *= 2.0);
        let rep = complexity_norms(&[("pinn".into(), &a), ("same".into(), &a), ("scaled".into(), &b)], NormMeasure::Spectral, None).unwrap();
        assert_eq!(rep.rows[0].percent, 100.0);
        assert_eq!(rep.rows[1].percent, 100.0);
        assert!((rep.rows[2].percent - 200.0).abs() < 1e-8);
        let f = complexity_norms(&[("scaled".into(), &b)], NormMeasure::Frobenius, Some(network_norm(&a, NormMeasure::Frobenius))).unwrap();
        assert!((f.rows[0].percent - 200.0).abs() < 1e-8);
    }

    #[test]
    fn jumps_of_identical_and_offset_nets() {
        let a = xavier_init(&[2, 5, 4], 1).unwrap();
        let mut set = PointSet::new(crate::sampling::Role::Interface, 0);
        for i in 0..10 {
            set.push([0.0, i as f64 / 10.0, 0.0], &[1.0, 0.0]);
        }
        let j = interface_jump(&[a.clone(), a.clone()], &[((0, 1), &set)]).unwrap();
        assert_eq!(j, [0.0; 4]);
        // shift the density bias so rho stays above the clamp on both nets
        let mut b = a.clone();
        let mut c = a.clone();
        let off = a.slots()[1].bias;
        b.values_mut()[off] = 2.0;
        c.values_mut()[off] = 2.5;
        let j = interface_jump(&[b, c], &[((0, 1), &set)]).unwrap();
        assert!((j[0] - 0.5).abs() < 1e-12 && j[1] == 0.0);
        assert!(interface_jump(&[a], &[]).is_err());
    }

    #[test]
    fn field_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        export_field_csv(&[[0.5, 0.25, 0.0]], &[[1.0, 2.0, 3.0, 4.0]], &[[1.0, 2.5, 3.0, 2.0]], &path).unwrap();
        let rows = load_field_csv(&path).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[1].var, "u");
        assert_eq!(rows[1].abs_error, 0.5);
        assert_eq!(rows[3].rel_error, 1.0);
        assert!(rows.iter().all(|r| r.abs_error >= 0.0));
    }
}
