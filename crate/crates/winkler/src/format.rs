//! CSV layouts shared by every subcommand.
//!
//! | file kind | header |
//! |-----------|--------|
//! | field     | `i,j,x,y,value` (interior nodes, row-major) |
//! | series    | `idx,value` |
//! | report    | `iter,theta,resid_mean,dev_mean,theta_min,theta_max` |
//! | matrix    | `row,col,value` |
//!
//! Floating-point values are written with 17 significant digits, so every
//! file reads back to the exact bits that were written.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use winkler_core::eki::ReportRow;
use winkler_core::{Grid, ScalarField};

use crate::error::{Error, Result};

pub const FIELD_HEADER: [&str; 5] = ["i", "j", "x", "y", "value"];
pub const SERIES_HEADER: [&str; 2] = ["idx", "value"];
pub const REPORT_HEADER: [&str; 6] = [
    "iter",
    "theta",
    "resid_mean",
    "dev_mean",
    "theta_min",
    "theta_max",
];
pub const MATRIX_HEADER: [&str; 3] = ["row", "col", "value"];

/// `v` with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(Error::io(path))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(file)))
}

fn finish(path: &Path, mut w: csv::Writer<BufWriter<File>>) -> Result<()> {
    w.flush().map_err(Error::io(path))?;
    let inner = w
        .into_inner()
        .map_err(|e| Error::io(path)(e.into_error()))?;
    inner
        .into_inner()
        .map_err(|e| Error::io(path)(e.into_error()))?
        .sync_all()
        .map_err(Error::io(path))
}

fn reader(path: &Path, header: &[&str]) -> Result<csv::Reader<File>> {
    let mut r = csv::Reader::from_path(path).map_err(Error::csv(path))?;
    let found = r.headers().map_err(Error::csv(path))?;
    if found.iter().ne(header.iter().copied()) {
        return Err(Error::format(
            path,
            format!(
                "expected header `{}`, found `{}`",
                header.join(","),
                found.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    Ok(r)
}

pub fn write_field(path: &Path, field: &ScalarField) -> Result<()> {
    let grid = field.grid();
    let mut w = writer(path)?;
    w.write_record(FIELD_HEADER).map_err(Error::csv(path))?;
    for (idx, (i, j)) in grid.nodes().enumerate() {
        let (x, y) = grid.coords(idx);
        let row = [
            i.to_string(),
            j.to_string(),
            fmt_f64(x),
            fmt_f64(y),
            fmt_f64(field.values()[idx]),
        ];
        w.write_record(&row).map_err(Error::csv(path))?;
    }
    finish(path, w)
}

/// Read a field written for `grid`; node indices and coordinates must match.
pub fn read_field(path: &Path, grid: &Grid) -> Result<ScalarField> {
    let mut r = reader(path, &FIELD_HEADER)?;
    let mut values = Vec::with_capacity(grid.len());
    let mut nodes = grid.nodes().enumerate();
    for rec in r.deserialize::<(usize, usize, f64, f64, f64)>() {
        let (i, j, x, y, v) = rec.map_err(Error::csv(path))?;
        let Some((idx, expected)) = nodes.next() else {
            return Err(Error::format(
                path,
                format!("more than {} rows", grid.len()),
            ));
        };
        let (gx, gy) = grid.coords(idx);
        if (i, j) != expected || (x - gx).abs() > 1e-12 || (y - gy).abs() > 1e-12 {
            return Err(Error::format(
                path,
                format!("row {} is node ({i},{j}), expected {expected:?}", idx + 1),
            ));
        }
        values.push(v);
    }
    if values.len() != grid.len() {
        return Err(Error::format(
            path,
            format!("{} rows, expected {}", values.len(), grid.len()),
        ));
    }
    Ok(ScalarField::new(*grid, values)?)
}

/// Read a field on the unit square, inferring `n` from the row count.
pub fn read_unit_field(path: &Path) -> Result<ScalarField> {
    let rows = reader(path, &FIELD_HEADER)?.records().count();
    let side = (rows as f64).sqrt().round() as usize;
    if side * side != rows || rows == 0 {
        return Err(Error::format(
            path,
            format!("{rows} rows is not a square interior"),
        ));
    }
    read_field(path, &Grid::unit(side + 1)?)
}

pub fn write_series(path: &Path, values: &[f64]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(SERIES_HEADER).map_err(Error::csv(path))?;
    for (idx, v) in values.iter().enumerate() {
        w.write_record([idx.to_string(), fmt_f64(*v)])
            .map_err(Error::csv(path))?;
    }
    finish(path, w)
}

pub fn read_series(path: &Path) -> Result<Vec<f64>> {
    let mut r = reader(path, &SERIES_HEADER)?;
    let mut out = Vec::new();
    for rec in r.deserialize::<(usize, f64)>() {
        let (idx, v) = rec.map_err(Error::csv(path))?;
        if idx != out.len() {
            return Err(Error::format(path, format!("index {idx} out of sequence")));
        }
        out.push(v);
    }
    Ok(out)
}

pub fn write_report(path: &Path, rows: &[ReportRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(REPORT_HEADER).map_err(Error::csv(path))?;
    for r in rows {
        let resid = r.resid_mean.map(fmt_f64).unwrap_or_default();
        let rec = [
            r.iter.to_string(),
            fmt_f64(r.theta),
            resid,
            fmt_f64(r.dev_mean),
            fmt_f64(r.theta_min),
            fmt_f64(r.theta_max),
        ];
        w.write_record(&rec).map_err(Error::csv(path))?;
    }
    finish(path, w)
}

pub fn read_report(path: &Path) -> Result<Vec<ReportRow>> {
    let mut r = reader(path, &REPORT_HEADER)?;
    r.deserialize::<(usize, f64, Option<f64>, f64, f64, f64)>()
        .map(|rec| {
            let (iter, theta, resid_mean, dev_mean, theta_min, theta_max) =
                rec.map_err(Error::csv(path))?;
            Ok(ReportRow {
                iter,
                theta,
                resid_mean,
                dev_mean,
                theta_min,
                theta_max,
            })
        })
        .collect()
}

pub fn write_triplets(path: &Path, triplets: &[(usize, usize, f64)]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(MATRIX_HEADER).map_err(Error::csv(path))?;
    for (r, c, v) in triplets {
        w.write_record([r.to_string(), c.to_string(), fmt_f64(*v)])
            .map_err(Error::csv(path))?;
    }
    finish(path, w)
}

pub fn read_triplets(path: &Path) -> Result<Vec<(usize, usize, f64)>> {
    let mut r = reader(path, &MATRIX_HEADER)?;
    r.deserialize()
        .map(|rec| rec.map_err(Error::csv(path)))
        .collect()
}

/// Write `text` to `path` and flush it to disk.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = File::create(path).map_err(Error::io(path))?;
    f.write_all(text.as_bytes()).map_err(Error::io(path))?;
    f.sync_all().map_err(Error::io(path))
}
