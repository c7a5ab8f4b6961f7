//! Static PNG images of field exports and loss histories.

use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};

use crate::analysis::{load_field_csv, FieldRow, VARIABLES};
use crate::error::{Error, Result};

const PANEL: u32 = 160;
const GAP: u32 = 8;
const WHITE: Rgb<u8> = Rgb([255, 255, 255]);

/// Piecewise-linear approximation of the viridis map on [0, 1].
fn colormap(t: f64) -> Rgb<u8> {
    const STOPS: [[f64; 3]; 5] = [
        [68.0, 1.0, 84.0],
        [59.0, 82.0, 139.0],
        [33.0, 145.0, 140.0],
        [94.0, 201.0, 98.0],
        [253.0, 231.0, 37.0],
    ];
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let x = t * (STOPS.len() - 1) as f64;
    let i = (x.floor() as usize).min(STOPS.len() - 2);
    let f = x - i as f64;
    let c: [u8; 3] = std::array::from_fn(|k| (STOPS[i][k] + f * (STOPS[i + 1][k] - STOPS[i][k])).round() as u8);
    Rgb(c)
}

/// Paints scattered values into a `PANEL`-square tile at (`ox`, `oy`),
/// scaled to their own range; each point fills the cell it falls in.
fn paint(img: &mut RgbImage, ox: u32, oy: u32, xy: &[[f64; 2]], vals: &[f64], bbox: [f64; 4]) {
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let [x0, x1, y0, y1] = bbox;
    let cells = (xy.len() as f64).sqrt().ceil().max(1.0);
    let r = ((PANEL as f64 / cells).ceil() as i64 / 2).max(1);
    for (p, v) in xy.iter().zip(vals) {
        let px = ((p[0] - x0) / (x1 - x0).max(1e-300) * (PANEL - 1) as f64).round() as i64;
        let py = ((y1 - p[1]) / (y1 - y0).max(1e-300) * (PANEL - 1) as f64).round() as i64;
        let c = colormap((v - lo) / span);
        for dy in -r..=r {
            for dx in -r..=r {
                let (qx, qy) = (px + dx, py + dy);
                if (0..PANEL as i64).contains(&qx) && (0..PANEL as i64).contains(&qy) {
                    img.put_pixel(ox + qx as u32, oy + qy as u32, c);
                }
            }
        }
    }
}

/// Four rows (rho, u, v, p) by three columns (predicted, reference,
/// pointwise absolute error).
pub fn field_image(rows: &[FieldRow]) -> Result<RgbImage> {
    if rows.is_empty() {
        return Err(Error::Analysis("field export is empty".into()));
    }
    let mut bbox = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
    for r in rows {
        bbox[0] = bbox[0].min(r.x);
        bbox[1] = bbox[1].max(r.x);
        bbox[2] = bbox[2].min(r.y);
        bbox[3] = bbox[3].max(r.y);
    }
    let w = 3 * PANEL + 4 * GAP;
    let h = 4 * PANEL + 5 * GAP;
    let mut img = RgbImage::from_pixel(w, h, WHITE);
    for (k, var) in VARIABLES.iter().enumerate() {
        let sel: Vec<&FieldRow> = rows.iter().filter(|r| r.var == *var).collect();
        let xy: Vec<[f64; 2]> = sel.iter().map(|r| [r.x, r.y]).collect();
        let columns: [Vec<f64>; 3] = [
            sel.iter().map(|r| r.predicted).collect(),
            sel.iter().map(|r| r.reference).collect(),
            sel.iter().map(|r| r.abs_error).collect(),
        ];
        let oy = GAP + k as u32 * (PANEL + GAP);
        for (j, vals) in columns.iter().enumerate() {
            paint(&mut img, GAP + j as u32 * (PANEL + GAP), oy, &xy, vals, bbox);
        }
    }
    Ok(img)
}

/// log10 of every positive loss column against iteration, one colour per
/// column, with the weighted total drawn last in black.
pub fn loss_image(csv_text: &str) -> Result<RgbImage> {
    let mut lines = csv_text.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::Analysis("empty loss history".into()))?
        .split(',')
        .collect();
    let rows: Vec<Vec<&str>> = lines.filter(|l| !l.is_empty()).map(|l| l.split(',').collect()).collect();
    if rows.is_empty() {
        return Err(Error::Analysis("loss history has no rows".into()));
    }
    let cols: Vec<usize> = header
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with("mse_") || **h == "total")
        .map(|(i, _)| i)
        .collect();
    let parse = |s: &str| s.parse::<f64>().ok().filter(|v| *v > 0.0).map(f64::log10);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for r in &rows {
        for &c in &cols {
            if let Some(v) = r.get(c).and_then(|s| parse(s)) {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
    }
    if !lo.is_finite() {
        return Err(Error::Analysis("loss history has no positive values".into()));
    }
    let (w, h) = (640u32, 400u32);
    let mut img = RgbImage::from_pixel(w, h, WHITE);
    let span = (hi - lo).max(1e-12);
    let n = rows.len().max(2) - 1;
    for (k, &c) in cols.iter().enumerate() {
        let colour = if header[c] == "total" {
            Rgb([0, 0, 0])
        } else {
            colormap(k as f64 / cols.len().max(1) as f64)
        };
        for (i, r) in rows.iter().enumerate() {
            if let Some(v) = r.get(c).and_then(|s| parse(s)) {
                let x = (i as f64 / n as f64 * (w - 1) as f64) as u32;
                let y = ((hi - v) / span * (h - 1) as f64) as u32;
                img.put_pixel(x, y.min(h - 1), colour);
            }
        }
    }
    Ok(img)
}

fn save(img: &RgbImage, path: &Path) -> Result<()> {
    img.save(path)
        .map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))
}

/// Writes `<field>.png` next to every field CSV and `loss.png` for the
/// history of a run directory. Returns the written paths.
pub fn plot_run(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut fields: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("field") && n.ends_with(".csv"))
        })
        .collect();
    fields.sort();
    for f in fields {
        let out = f.with_extension("png");
        save(&field_image(&load_field_csv(&f)?)?, &out)?;
        written.push(out);
    }
    let history = dir.join("loss_history.csv");
    if history.exists() {
        let text = std::fs::read_to_string(&history).map_err(|e| Error::io(&history, e))?;
        let out = dir.join("loss.png");
        save(&loss_image(&text)?, &out)?;
        written.push(out);
    }
    if written.is_empty() {
        return Err(Error::ingestion(format!("{} holds no field or loss exports", dir.display())));
    }
    Ok(written)
}
