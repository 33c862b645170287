//! Snapshot export: a CSV of samples plus a JSON sidecar with the grid.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use super::grid::Wavefunction2D;
use crate::error::Result;

/// Doubles are written with 17 significant digits so they round-trip.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `<stem>.csv` (`x1,x2,re,im`) and `<stem>.json` into `dir`.
/// `extra` is merged into the sidecar object; its string entries (e.g. a
/// config hash) also head the CSV as `# key: value` comment lines.
pub fn write_snapshot(psi: &Wavefunction2D, dir: &Path, stem: &str, extra: &Value) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let mut out = BufWriter::new(fs::File::create(&csv_path)?);
    write_provenance(&mut out, extra)?;
    writeln!(out, "x1,x2,re,im")?;
    for (idx, v) in psi.values.iter().enumerate() {
        let (x1, x2) = psi.grid.coords(idx);
        writeln!(out, "{},{},{},{}", format_f64(x1), format_f64(x2), format_f64(v.re), format_f64(v.im))?;
    }
    out.flush()?;

    let mut meta = json!({
        "grid": psi.grid,
        "time": psi.time,
        "norm": psi.norm(),
        "samples": csv_path.file_name().and_then(|s| s.to_str()),
    });
    if let (Some(m), Some(e)) = (meta.as_object_mut(), extra.as_object()) {
        for (k, v) in e {
            m.insert(k.clone(), v.clone());
        }
    }
    let json_path = dir.join(format!("{stem}.json"));
    fs::write(&json_path, serde_json::to_string_pretty(&meta).expect("serialisable") + "\n")?;
    Ok((csv_path, json_path))
}

/// `# key: value` lines for the string entries of `extra`.
pub fn write_provenance(out: &mut impl Write, extra: &Value) -> Result<()> {
    if let Some(map) = extra.as_object() {
        for (k, v) in map {
            if let Some(s) = v.as_str() {
                writeln!(out, "# {k}: {s}")?;
            }
        }
    }
    Ok(())
}
