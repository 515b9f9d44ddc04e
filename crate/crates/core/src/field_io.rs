//! Field dumps.
//!
//! Binary layout (little-endian): a 32-byte header
//! `b"PSLB" | u32 reserved (0) | u64 nx | u64 ny | f64 h` followed by
//! `nx·ny` `f64` values in row-major order, index `j·nx + i`. A JSON sidecar
//! `<path>.json` carries `{eps, p, domain, x0, y0}` so the grid can be
//! rebuilt. The CSV form has header `x,y,v`.

use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use thiserror::Error;

use crate::grid::{GridDomain, Shape};
use crate::solver::GridSolution;

pub const MAGIC: &[u8; 4] = b"PSLB";
pub const HEADER_LEN: usize = 32;

#[derive(Debug, Error)]
pub enum FieldIoError {
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("bad field file {path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("bad sidecar {path}: {source}")]
    Sidecar { path: PathBuf, source: serde_json::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub eps: f64,
    pub p: f64,
    pub domain: Shape,
    pub x0: f64,
    pub y0: f64,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> FieldIoError + '_ {
    move |source| FieldIoError::Io { path: path.to_path_buf(), source }
}

/// Writes the binary dump and its sidecar.
pub fn write_binary(sol: &GridSolution, path: &Path) -> Result<(), FieldIoError> {
    let d = &sol.domain;
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    let mut header = Vec::with_capacity(HEADER_LEN);
    header.extend_from_slice(MAGIC);
    header.extend_from_slice(&0u32.to_le_bytes());
    header.extend_from_slice(&(d.nx as u64).to_le_bytes());
    header.extend_from_slice(&(d.ny as u64).to_le_bytes());
    header.extend_from_slice(&d.h.to_le_bytes());
    w.write_all(&header).map_err(io_err(path))?;
    for v in &sol.v {
        w.write_all(&v.to_le_bytes()).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))?;
    let side = Sidecar { eps: sol.eps, p: sol.p, domain: d.shape, x0: d.x0, y0: d.y0 };
    let sp = sidecar_path(path);
    let text =
        serde_json::to_string_pretty(&side).map_err(|source| FieldIoError::Sidecar { path: sp.clone(), source })?;
    std::fs::write(&sp, text).map_err(io_err(&sp))?;
    Ok(())
}

/// Raw contents of a binary dump.
#[derive(Debug, Clone, PartialEq)]
pub struct RawField {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub values: Vec<f64>,
}

pub fn read_raw(path: &Path) -> Result<RawField, FieldIoError> {
    let mut r = BufReader::new(File::open(path).map_err(io_err(path))?);
    let mut header = [0u8; HEADER_LEN];
    r.read_exact(&mut header).map_err(io_err(path))?;
    let bad = |reason: String| FieldIoError::Format { path: path.to_path_buf(), reason };
    if &header[0..4] != MAGIC {
        return Err(bad("missing PSLB magic".into()));
    }
    let nx = u64::from_le_bytes(header[8..16].try_into().expect("8 bytes")) as usize;
    let ny = u64::from_le_bytes(header[16..24].try_into().expect("8 bytes")) as usize;
    let h = f64::from_le_bytes(header[24..32].try_into().expect("8 bytes"));
    let count = nx.checked_mul(ny).ok_or_else(|| bad("grid size overflows".into()))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(io_err(path))?;
    if bytes.len() != count * 8 {
        return Err(bad(format!("expected {} data bytes, found {}", count * 8, bytes.len())));
    }
    let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Ok(RawField { nx, ny, h, values })
}

/// Reads a dump plus sidecar back into a [`GridSolution`]. Solver
/// diagnostics are not stored, so the residual is recomputed and the
/// solution is marked converged.
pub fn read_binary(path: &Path) -> Result<GridSolution, FieldIoError> {
    let raw = read_raw(path)?;
    let sp = sidecar_path(path);
    let text = std::fs::read_to_string(&sp).map_err(io_err(&sp))?;
    let side: Sidecar =
        serde_json::from_str(&text).map_err(|source| FieldIoError::Sidecar { path: sp.clone(), source })?;
    let bad = |reason: String| FieldIoError::Format { path: path.to_path_buf(), reason };
    let n = (side.domain.reference_length() / raw.h).round() as usize;
    let domain = GridDomain::new(side.domain, n).map_err(|e| bad(e.to_string()))?;
    if domain.nx != raw.nx || domain.ny != raw.ny || (domain.h - raw.h).abs() > 1e-12 * raw.h {
        return Err(bad(format!(
            "header grid {}x{} (h = {}) does not match the {:?} domain",
            raw.nx, raw.ny, raw.h, side.domain
        )));
    }
    let mut sol = GridSolution {
        domain: Arc::new(domain),
        p: side.p,
        eps: side.eps,
        v: raw.values,
        residual: 0.0,
        iterations: 0,
        converged: true,
        picard_steps: 0,
        stall: None,
    };
    sol.residual = sol.discrete_residual();
    Ok(sol)
}

/// Writes interior and boundary nodes as CSV `x,y,v`.
pub fn write_csv(sol: &GridSolution, path: &Path) -> Result<(), FieldIoError> {
    let d = &sol.domain;
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    writeln!(w, "x,y,v").map_err(io_err(path))?;
    for k in 0..d.len() {
        if d.kind[k] == crate::grid::NodeKind::Exterior {
            continue;
        }
        let [x, y] = d.coords(k);
        writeln!(w, "{x},{y},{}", sol.v[k]).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}
