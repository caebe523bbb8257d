//! Binary snapshot format for grid fields: a one-line ASCII header
//! `scatterwave-field v1 L=<..> N=<..> side=<..> prec=<..> name=<..>`
//! followed by the raw little-endian complex payload.

use super::{BoxGrid, GridField, Side};
use crate::error::{Error, Result};
use num_complex::Complex64;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    Complex64,
    Complex128,
}

pub fn write_snapshot(path: &Path, f: &GridField, name: &str, prec: Precision) -> Result<()> {
    if name.contains(char::is_whitespace) {
        return Err(Error::InvalidParameter(
            "snapshot name must not contain whitespace".into(),
        ));
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let side = match f.side() {
        Side::Physical => "physical",
        Side::Fourier => "fourier",
    };
    let prec_tag = match prec {
        Precision::Complex64 => "c64",
        Precision::Complex128 => "c128",
    };
    writeln!(
        out,
        "scatterwave-field v1 L={} N={} side={} prec={} name={}",
        f.grid().len(),
        f.grid().n(),
        side,
        prec_tag,
        name
    )?;
    match prec {
        Precision::Complex128 => {
            for v in f.data() {
                out.write_all(&v.re.to_le_bytes())?;
                out.write_all(&v.im.to_le_bytes())?;
            }
        }
        Precision::Complex64 => {
            for v in f.data() {
                out.write_all(&(v.re as f32).to_le_bytes())?;
                out.write_all(&(v.im as f32).to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<(GridField, String)> {
    let mut reader = BufReader::new(std::fs::File::open(path)?);
    let mut header = String::new();
    reader.read_line(&mut header)?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 7 || fields[0] != "scatterwave-field" || fields[1] != "v1" {
        return Err(Error::SnapshotFormat("bad header".into()));
    }
    let mut l = None;
    let mut n = None;
    let mut side = None;
    let mut prec = None;
    let mut name = String::new();
    for kv in &fields[2..] {
        let (key, value) = kv
            .split_once('=')
            .ok_or_else(|| Error::SnapshotFormat(format!("bad header field {kv}")))?;
        match key {
            "L" => l = value.parse::<f64>().ok(),
            "N" => n = value.parse::<usize>().ok(),
            "side" => {
                side = match value {
                    "physical" => Some(Side::Physical),
                    "fourier" => Some(Side::Fourier),
                    _ => None,
                }
            }
            "prec" => {
                prec = match value {
                    "c64" => Some(Precision::Complex64),
                    "c128" => Some(Precision::Complex128),
                    _ => None,
                }
            }
            "name" => name = value.to_string(),
            _ => return Err(Error::SnapshotFormat(format!("unknown header key {key}"))),
        }
    }
    let (l, n, side, prec) = match (l, n, side, prec) {
        (Some(l), Some(n), Some(s), Some(p)) => (l, n, s, p),
        _ => return Err(Error::SnapshotFormat("incomplete header".into())),
    };
    let grid = BoxGrid::new(n, l)?;
    let mut data = Vec::with_capacity(grid.cells());
    match prec {
        Precision::Complex128 => {
            let mut buf = [0u8; 16];
            for _ in 0..grid.cells() {
                reader.read_exact(&mut buf)?;
                data.push(Complex64::new(
                    f64::from_le_bytes(buf[0..8].try_into().unwrap()),
                    f64::from_le_bytes(buf[8..16].try_into().unwrap()),
                ));
            }
        }
        Precision::Complex64 => {
            let mut buf = [0u8; 8];
            for _ in 0..grid.cells() {
                reader.read_exact(&mut buf)?;
                data.push(Complex64::new(
                    f32::from_le_bytes(buf[0..4].try_into().unwrap()) as f64,
                    f32::from_le_bytes(buf[4..8].try_into().unwrap()) as f64,
                ));
            }
        }
    }
    Ok((GridField::from_data(grid, side, data)?, name))
}
