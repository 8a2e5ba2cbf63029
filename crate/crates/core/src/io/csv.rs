//! Plain CSV for spectra, A-scans, roll-off curves and B-scans.
//!
//! Every file may start with `# key=value` metadata lines. Numbers use the
//! shortest representation that round-trips.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::reconstruct::{AScan, BScan, RolloffCurve};
use crate::spectral::{ComplexSpectrum, JointSpectrum, SpectralGrid, SpectrumKind};

const UM: f64 = 1e-6;

fn parse_err<T>(line: usize, msg: impl Into<String>) -> Result<T> {
    Err(Error::Parse { line, msg: msg.into() })
}

pub fn write_metadata<W: Write>(w: &mut W, meta: &BTreeMap<String, String>) -> Result<()> {
    for (k, v) in meta {
        writeln!(w, "# {k}={}", v.replace('\n', " "))?;
    }
    Ok(())
}

type Lines = (BTreeMap<String, String>, Vec<(usize, String)>);

/// Splits a file into metadata and numbered data lines.
fn read_lines<R: BufRead>(r: R) -> Result<Lines> {
    let mut meta = BTreeMap::new();
    let mut data = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if let Some(rest) = t.strip_prefix('#') {
            if let Some((k, v)) = rest.trim().split_once('=') {
                meta.insert(k.trim().to_string(), v.trim().to_string());
            }
            continue;
        }
        data.push((i + 1, t.to_string()));
    }
    Ok((meta, data))
}

fn parse_row(line: usize, text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|f| match f.trim().parse::<f64>() {
            Ok(v) => Ok(v),
            Err(_) => parse_err(line, format!("bad number '{f}'")),
        })
        .collect()
}

/// Rebuilds a uniform grid from listed sample frequencies.
pub fn grid_from_omegas(omegas: &[f64], line: usize) -> Result<SpectralGrid> {
    let n = omegas.len();
    if n < 2 {
        return parse_err(line, "need at least 2 frequencies");
    }
    let (first, last) = (omegas[0], omegas[n - 1]);
    let grid = SpectralGrid::new((first + last) / 2.0, last - first, n)
        .or_else(|e| parse_err(line, e.to_string()))?;
    for (k, &w) in omegas.iter().enumerate() {
        if (w - grid.omega_at(k)).abs() > 1e-9 * grid.spacing().max(w.abs() * 1e-6) {
            return parse_err(line, format!("frequency axis is not uniform at index {k}"));
        }
    }
    Ok(grid)
}

pub fn write_joint<W: Write>(w: &mut W, js: &JointSpectrum, extra: &BTreeMap<String, String>) -> Result<()> {
    let mut meta = js.metadata.clone();
    meta.extend(extra.iter().map(|(k, v)| (k.clone(), v.clone())));
    meta.insert("kind".into(), js.kind().as_str().into());
    write_metadata(w, &meta)?;
    write!(w, "omega_a\\omega_b")?;
    for wb in js.grid_b().omegas() {
        write!(w, ",{wb}")?;
    }
    writeln!(w)?;
    for (i, wa) in js.grid_a().omegas().into_iter().enumerate() {
        write!(w, "{wa}")?;
        for v in js.row(i) {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_joint<R: BufRead>(r: R) -> Result<JointSpectrum> {
    let (mut meta, data) = read_lines(r)?;
    let Some(((hline, header), rows)) = data.split_first() else {
        return parse_err(0, "empty joint spectrum file");
    };
    let Some((_, cols)) = header.split_once(',') else {
        return parse_err(*hline, "header needs frequency columns");
    };
    let grid_b = grid_from_omegas(&parse_row(*hline, cols)?, *hline)?;
    let mut omegas_a = Vec::with_capacity(rows.len());
    let mut values = Vec::with_capacity(rows.len() * grid_b.len());
    for (line, text) in rows {
        let row = parse_row(*line, text)?;
        if row.len() != grid_b.len() + 1 {
            return parse_err(*line, format!("expected {} fields, got {}", grid_b.len() + 1, row.len()));
        }
        omegas_a.push(row[0]);
        values.extend_from_slice(&row[1..]);
    }
    let grid_a = grid_from_omegas(&omegas_a, rows.first().map_or(*hline, |r| r.0))?;
    let kind = match meta.remove("kind") {
        Some(k) => SpectrumKind::parse(&k).ok_or_else(|| Error::Parse { line: 0, msg: format!("unknown kind '{k}'") })?,
        None => return parse_err(0, "missing '# kind=' metadata"),
    };
    let mut js = JointSpectrum::new(grid_a, grid_b, values, kind)?;
    js.metadata = meta;
    Ok(js)
}

pub fn write_complex<W: Write>(w: &mut W, s: &ComplexSpectrum, meta: &BTreeMap<String, String>) -> Result<()> {
    write_metadata(w, meta)?;
    writeln!(w, "omega_rad_per_s,re,im")?;
    for (omega, v) in s.grid().omegas().into_iter().zip(s.values()) {
        writeln!(w, "{omega},{},{}", v.re, v.im)?;
    }
    Ok(())
}

pub fn read_complex<R: BufRead>(r: R) -> Result<ComplexSpectrum> {
    let (_, data) = read_lines(r)?;
    let Some(((hline, header), rows)) = data.split_first() else {
        return parse_err(0, "empty spectrum file");
    };
    if header != "omega_rad_per_s,re,im" {
        return parse_err(*hline, "expected header 'omega_rad_per_s,re,im'");
    }
    let mut omegas = Vec::new();
    let mut values = Vec::new();
    for (line, text) in rows {
        let row = parse_row(*line, text)?;
        if row.len() != 3 {
            return parse_err(*line, "expected 3 fields");
        }
        omegas.push(row[0]);
        values.push(Complex64::new(row[1], row[2]));
    }
    let grid = grid_from_omegas(&omegas, *hline + 1)?;
    ComplexSpectrum::new(grid, values)
}

pub fn write_ascan<W: Write>(w: &mut W, a: &AScan, meta: &BTreeMap<String, String>) -> Result<()> {
    write_metadata(w, meta)?;
    writeln!(w, "depth_um,magnitude")?;
    for (d, m) in a.depth.iter().zip(&a.magnitude) {
        writeln!(w, "{},{m}", d / UM)?;
    }
    Ok(())
}

pub fn write_rolloff<W: Write>(w: &mut W, r: &RolloffCurve, meta: &BTreeMap<String, String>) -> Result<()> {
    let mut meta = meta.clone();
    meta.insert(
        "six_db_range_um".into(),
        r.six_db_range.map_or("not-reached".to_string(), |x| (x / UM).to_string()),
    );
    write_metadata(w, &meta)?;
    writeln!(w, "depth_um,peak_height,sensitivity_db")?;
    for ((d, h), s) in r.depths.iter().zip(&r.heights).zip(&r.sensitivity_db) {
        writeln!(w, "{},{h},{s}", d / UM)?;
    }
    Ok(())
}

/// Linear B-scan magnitudes: one row per depth, one column per lateral position.
pub fn write_bscan<W: Write>(w: &mut W, b: &BScan, meta: &BTreeMap<String, String>) -> Result<()> {
    write_metadata(w, meta)?;
    write!(w, "depth_um")?;
    for c in 0..b.columns.len() {
        write!(w, ",x{c}")?;
    }
    writeln!(w)?;
    for (r, d) in b.depth.iter().enumerate() {
        write!(w, "{}", d / UM)?;
        for col in &b.columns {
            write!(w, ",{}", col[r])?;
        }
        writeln!(w)?;
    }
    Ok(())
}
