//! Plain-text table output. Every float goes through [`fmt_float`] so that
//! files are byte-identical across runs and platforms.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{PapaError, Result};
use crate::scalar::Real;
use crate::types::PointCloud;

/// 17 significant digits in scientific notation (round-trips an `f64`).
pub fn fmt_float<T: Real>(x: T) -> String {
    format!("{:.16e}", x.as_f64())
}

pub fn join_floats<T: Real>(values: &[T], delimiter: char) -> String {
    let mut out = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(delimiter);
        }
        out.push_str(&fmt_float(*v));
    }
    out
}

/// Opens `path` for buffered writing, creating parent directories.
pub fn create_file(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| PapaError::io(parent, e))?;
        }
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| PapaError::io(path, e))
}

/// Runs `body` against a buffered file and maps write errors to the path.
pub fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let mut out = create_file(path)?;
    body(&mut out)
        .and_then(|_| out.flush())
        .map_err(|e| PapaError::io(path, e))
}

/// Header `x1,…,xD` (plus `label` when the cloud carries labels).
pub fn write_cloud_csv<T: Real, W: Write>(cloud: &PointCloud<T>, mut out: W) -> std::io::Result<()> {
    let mut header: Vec<String> = (1..=cloud.dim()).map(|k| format!("x{k}")).collect();
    if cloud.labels().is_some() {
        header.push("label".into());
    }
    writeln!(out, "{}", header.join(","))?;
    for (i, p) in cloud.points().enumerate() {
        write!(out, "{}", join_floats(p, ','))?;
        if let Some(labels) = cloud.labels() {
            write!(out, ",{}", labels[i])?;
        }
        writeln!(out)?;
    }
    Ok(())
}
