use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::NetworkParams;
use crate::error::{Error, Result};

/// First line of a checkpoint file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub sizes: Vec<usize>,
    pub scale_n: f64,
    pub alpha_clamp: f64,
    pub seed: u64,
    pub count: usize,
}

/// Writes a JSON header line followed by one parameter per line.
///
/// Values use shortest round-trip formatting, so reloading is exact.
pub fn save_checkpoint(params: &NetworkParams, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let header = CheckpointHeader {
        sizes: params.sizes().to_vec(),
        scale_n: params.scale_n(),
        alpha_clamp: params.alpha_clamp(),
        seed: params.seed(),
        count: params.len(),
    };
    let line = serde_json::to_string(&header).map_err(|e| Error::config(e.to_string()))?;
    let write = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(w, "{line}")?;
        for v in params.values() {
            writeln!(w, "{v:?}")?;
        }
        w.flush()
    };
    write(&mut w).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<NetworkParams> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let bad = |msg: String| Error::ingestion(format!("{}: {msg}", path.display()));
    let first = lines
        .next()
        .ok_or_else(|| bad("empty checkpoint".into()))?
        .map_err(|e| Error::io(path, e))?;
    let header: CheckpointHeader =
        serde_json::from_str(&first).map_err(|e| bad(format!("bad header: {e}")))?;
    let mut values = Vec::with_capacity(header.count);
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let v: f64 = line
            .trim()
            .parse()
            .map_err(|_| bad(format!("line {}: not a number", i + 2)))?;
        values.push(v);
    }
    if values.len() != header.count {
        return Err(bad(format!(
            "header declares {} values, found {}",
            header.count,
            values.len()
        )));
    }
    NetworkParams::from_values(
        &header.sizes,
        values,
        header.scale_n,
        header.alpha_clamp,
        header.seed,
    )
    .map_err(|e| bad(e.to_string()))
}
