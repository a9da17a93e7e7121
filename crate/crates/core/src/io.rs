//! CSV, JSON and raw binary artifacts.
//!
//! Raw grids are little-endian complex64 (re f32, im f32), row-major with the
//! last axis fastest, next to a JSON header `<name>.json` describing the grid.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::affine::{GridFunction1G, GroupGrid};
use crate::besov::{BoxGrid, Domain, GridFunctionN};
use crate::cone::{ConePoint, IwasawaCoords, WhitneyCover};
use crate::error::{Error, Result};

pub fn write_group_grid_csv<W: Write>(grid: &GroupGrid, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["a", "b", "weight"])?;
    for (g, wt) in grid.nodes().iter().zip(grid.weights()) {
        w.serialize((g.a(), g.b(), wt))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_grid_function_csv<W: Write>(f: &GridFunction1G, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["a", "b", "re", "im"])?;
    for (g, v) in f.grid().nodes().iter().zip(f.values()) {
        w.serialize((g.a(), g.b(), v.re, v.im))?;
    }
    w.flush()?;
    Ok(())
}

/// `iter,residual`, iterations counted from 1.
pub fn write_residuals_csv<W: Write>(residuals: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iter", "residual"])?;
    for (i, r) in residuals.iter().enumerate() {
        w.serialize((i + 1, r))?;
    }
    w.flush()?;
    Ok(())
}

/// Probes farther than `δ` from every cover centre, as `gamma,t,c...`.
pub fn write_uncovered_probes_csv<W: Write>(cover: &WhitneyCover, probes: &[IwasawaCoords], out: W) -> Result<usize> {
    let mut w = csv::Writer::from_writer(out);
    let dim = cover.region.dim();
    let mut header = vec!["gamma".to_string(), "t".to_string()];
    header.extend((1..dim - 1).map(|k| if dim == 3 { "c".to_string() } else { format!("c{k}") }));
    w.write_record(&header)?;
    let mut count = 0;
    for co in probes {
        let p: ConePoint = crate::cone::point_from_coords(co);
        let d = (0..cover.len()).map(|j| cover.distance_to(j, &p)).fold(f64::INFINITY, f64::min);
        if d >= cover.delta {
            let mut row = vec![co.gamma, co.t];
            row.extend(&co.c);
            w.serialize(row)?;
            count += 1;
        }
    }
    w.flush()?;
    Ok(count)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

pub fn write_csv_file(path: &Path, f: impl FnOnce(BufWriter<File>) -> Result<()>) -> Result<()> {
    f(BufWriter::new(File::create(path)?))
}

/// Sidecar header of a raw grid dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawHeader {
    pub dtype: String,
    pub order: String,
    pub domain: Domain,
    pub grid: BoxGrid,
}

pub const RAW_DTYPE: &str = "complex64-le";
pub const RAW_ORDER: &str = "row-major";

fn sidecar(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Writes `path` (binary) and `path` with extension `.json` (header).
pub fn write_raw(path: &Path, f: &GridFunctionN) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for v in f.values() {
        w.write_all(&(v.re as f32).to_le_bytes())?;
        w.write_all(&(v.im as f32).to_le_bytes())?;
    }
    w.flush()?;
    let header = RawHeader {
        dtype: RAW_DTYPE.into(),
        order: RAW_ORDER.into(),
        domain: f.domain(),
        grid: (**f.grid()).clone(),
    };
    write_json(&sidecar(path), &header)
}

pub fn read_raw(path: &Path) -> Result<GridFunctionN> {
    let header: RawHeader = read_json(&sidecar(path))?;
    if header.dtype != RAW_DTYPE || header.order != RAW_ORDER {
        return Err(Error::Io(format!("unsupported raw layout {} / {}", header.dtype, header.order)));
    }
    let g = &header.grid;
    let grid = Arc::new(BoxGrid::new(g.sizes.clone(), g.x0.clone(), g.dx.clone(), g.w0.clone(), g.dw.clone())?);
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    if bytes.len() != 8 * grid.len() {
        return Err(Error::Io(format!("{} bytes for {} complex64 values", bytes.len(), grid.len())));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
            Complex64::new(re as f64, im as f64)
        })
        .collect();
    GridFunctionN::new(grid, header.domain, values)
}
