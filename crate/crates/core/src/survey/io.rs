//! Dataset files: one line of JSON header followed by the data blocks.
//!
//! Travel time and difference blocks are rows of `m` reals, one function
//! per row. Broken scattering blocks list the directions as `(θ, μ)` rows
//! and then the upper-triangle entries as `(i, j, T)` triples. With the
//! text encoding every real is written with six significant digits; the
//! binary encoding writes little-endian `f64` (and `u32` indices) and
//! round-trips bit for bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::bsr::{BrokenScatteringTable, DirectionGrid, Entry};
use super::{
    BoundaryGrid, DifferencePotential, SealedSources, TravelTimeData, TravelTimeDifferenceData,
    TravelTimeFunction,
};
use crate::error::{Error, Result};
use crate::geodesic::BoundaryVector;
use crate::metric::MetricModel;

pub const FORMAT_VERSION: u32 = 1;
const FORMAT_NAME: &str = "ttlab-dataset";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    TravelTime,
    TravelTimeDifference,
    BrokenScattering,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    Text,
    #[default]
    Binary,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Dataset {
    TravelTime(TravelTimeData),
    TravelTimeDifference(TravelTimeDifferenceData),
    BrokenScattering(BrokenScatteringTable),
}

impl Dataset {
    pub fn kind(&self) -> DatasetKind {
        match self {
            Dataset::TravelTime(_) => DatasetKind::TravelTime,
            Dataset::TravelTimeDifference(_) => DatasetKind::TravelTimeDifference,
            Dataset::BrokenScattering(_) => DatasetKind::BrokenScattering,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    format_version: u32,
    kind: DatasetKind,
    encoding: Encoding,
    #[serde(default)]
    metric: Option<MetricModel>,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    boundary_grid: Option<BoundaryGrid>,
    #[serde(default)]
    direction_grid: Option<DirectionGrid>,
    #[serde(default)]
    tol: Option<f64>,
    /// Functions, or directions for a broken scattering table.
    count: usize,
    #[serde(default)]
    entries: usize,
}

fn sci(x: f64) -> String {
    format!("{x:.5e}")
}

fn write_row<W: Write>(w: &mut W, values: &[f64], enc: Encoding) -> std::io::Result<()> {
    match enc {
        Encoding::Text => {
            let line: Vec<String> = values.iter().map(|&v| sci(v)).collect();
            writeln!(w, "{}", line.join(" "))
        }
        Encoding::Binary => values
            .iter()
            .try_for_each(|v| w.write_all(&v.to_le_bytes())),
    }
}

/// Writes a dataset to any sink.
pub fn write_dataset<W: Write>(data: &Dataset, mut w: W, enc: Encoding) -> Result<()> {
    let mut header = Header {
        format: FORMAT_NAME.into(),
        format_version: FORMAT_VERSION,
        kind: data.kind(),
        encoding: enc,
        metric: None,
        seed: 0,
        boundary_grid: None,
        direction_grid: None,
        tol: None,
        count: 0,
        entries: 0,
    };
    match data {
        Dataset::TravelTime(d) => {
            header.metric = d.metric.clone();
            header.seed = d.seed;
            header.boundary_grid = Some(d.grid);
            header.count = d.functions.len();
        }
        Dataset::TravelTimeDifference(d) => {
            header.metric = d.metric.clone();
            header.seed = d.seed;
            header.boundary_grid = Some(d.grid);
            header.count = d.functions.len();
        }
        Dataset::BrokenScattering(t) => {
            header.metric = t.metric.clone();
            header.direction_grid = Some(t.grid);
            header.tol = Some(t.tol);
            header.count = t.len();
            header.entries = t.entry_count();
        }
    }
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    match data {
        Dataset::TravelTime(d) => {
            for f in &d.functions {
                write_row(&mut w, &f.values, enc)?;
            }
        }
        Dataset::TravelTimeDifference(d) => {
            for f in &d.functions {
                write_row(&mut w, &f.values, enc)?;
            }
        }
        Dataset::BrokenScattering(t) => {
            for bv in &t.directions {
                write_row(&mut w, &[bv.theta, bv.mu], enc)?;
            }
            for e in t.entries() {
                match enc {
                    Encoding::Text => writeln!(w, "{} {} {}", e.i, e.j, sci(e.t))?,
                    Encoding::Binary => {
                        w.write_all(&e.i.to_le_bytes())?;
                        w.write_all(&e.j.to_le_bytes())?;
                        w.write_all(&e.t.to_le_bytes())?;
                    }
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_dataset(data: &Dataset, path: impl AsRef<Path>, enc: Encoding) -> Result<()> {
    write_dataset(data, BufWriter::new(File::create(path)?), enc)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    read_dataset(BufReader::new(File::open(path)?))
}

/// Record reader that reports positions as text lines, or as record numbers
/// within the binary section (which counts as line 2).
struct Records<R> {
    r: R,
    enc: Encoding,
    line: usize,
    record: usize,
    buf: String,
}

impl<R: BufRead> Records<R> {
    fn position(&self) -> (usize, String) {
        match self.enc {
            Encoding::Text => (self.line, String::new()),
            Encoding::Binary => (2, format!("record {} ", self.record)),
        }
    }

    fn fail(&self, field: &str, message: impl Into<String>) -> Error {
        let (line, prefix) = self.position();
        Error::parse(line, format!("{prefix}{field}"), message)
    }

    /// Next text line split into fields.
    fn text_fields(&mut self, what: &str) -> Result<Vec<String>> {
        self.buf.clear();
        self.line += 1;
        if self.r.read_line(&mut self.buf)? == 0 {
            return Err(self.fail(what, "unexpected end of file"));
        }
        Ok(self.buf.split_whitespace().map(String::from).collect())
    }

    fn bytes<const N: usize>(&mut self, field: &str) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.r
            .read_exact(&mut b)
            .map_err(|_| self.fail(field, "unexpected end of binary data"))?;
        Ok(b)
    }

    fn reals(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        self.record += 1;
        match self.enc {
            Encoding::Text => {
                let fields = self.text_fields(what)?;
                if fields.len() != n {
                    return Err(
                        self.fail(what, format!("expected {n} values, found {}", fields.len()))
                    );
                }
                fields
                    .iter()
                    .enumerate()
                    .map(|(k, s)| {
                        s.parse::<f64>()
                            .map_err(|e| self.fail(&format!("{what}[{k}]"), format!("`{s}`: {e}")))
                    })
                    .collect()
            }
            Encoding::Binary => (0..n)
                .map(|k| {
                    Ok(f64::from_le_bytes(
                        self.bytes::<8>(&format!("{what}[{k}]"))?,
                    ))
                })
                .collect(),
        }
    }

    fn entry(&mut self) -> Result<Entry> {
        self.record += 1;
        match self.enc {
            Encoding::Text => {
                let f = self.text_fields("entry")?;
                if f.len() != 3 {
                    return Err(self.fail(
                        "entry",
                        format!("expected `i j T`, found {} fields", f.len()),
                    ));
                }
                let idx = |s: &str, name: &str| {
                    s.parse::<u32>()
                        .map_err(|e| self.fail(name, format!("`{s}`: {e}")))
                };
                Ok(Entry {
                    i: idx(&f[0], "i")?,
                    j: idx(&f[1], "j")?,
                    t: f[2]
                        .parse()
                        .map_err(|e| self.fail("T", format!("`{}`: {e}", f[2])))?,
                })
            }
            Encoding::Binary => Ok(Entry {
                i: u32::from_le_bytes(self.bytes::<4>("i")?),
                j: u32::from_le_bytes(self.bytes::<4>("j")?),
                t: f64::from_le_bytes(self.bytes::<8>("T")?),
            }),
        }
    }
}

/// Reads a dataset written by [`write_dataset`], enforcing the data
/// invariants: travel times are non-negative and finite, difference
/// potentials vanish at `θ_0`, and every broken scattering time is positive.
pub fn read_dataset<R: BufRead>(mut r: R) -> Result<Dataset> {
    let mut first = String::new();
    r.read_line(&mut first)?;
    let header: Header = serde_json::from_str(first.trim_end())
        .map_err(|e| Error::parse(1, "header", e.to_string()))?;
    if header.format != FORMAT_NAME {
        return Err(Error::parse(
            1,
            "format",
            format!("expected `{FORMAT_NAME}`, found `{}`", header.format),
        ));
    }
    if header.format_version != FORMAT_VERSION {
        return Err(Error::parse(
            1,
            "format_version",
            format!("unsupported version {}", header.format_version),
        ));
    }
    let mut rec = Records {
        r,
        enc: header.encoding,
        line: 1,
        record: 0,
        buf: String::new(),
    };
    let boundary_grid = |h: &Header| -> Result<BoundaryGrid> {
        let g = h
            .boundary_grid
            .ok_or_else(|| Error::parse(1, "boundary_grid", "missing"))?;
        g.validate()
            .map_err(|e| Error::parse(1, "boundary_grid", e.to_string()))?;
        Ok(g)
    };
    let data = match header.kind {
        DatasetKind::TravelTime => {
            let grid = boundary_grid(&header)?;
            let mut functions = Vec::with_capacity(header.count);
            for _ in 0..header.count {
                let values = rec.reals(grid.m, "r")?;
                if let Some(k) = values.iter().position(|v| !(*v >= 0.0 && v.is_finite())) {
                    return Err(rec.fail(
                        &format!("r[{k}]"),
                        format!(
                            "travel time {} is not a finite non-negative value",
                            values[k]
                        ),
                    ));
                }
                functions.push(TravelTimeFunction { values });
            }
            Dataset::TravelTime(TravelTimeData {
                grid,
                functions,
                seed: header.seed,
                metric: header.metric,
            })
        }
        DatasetKind::TravelTimeDifference => {
            let grid = boundary_grid(&header)?;
            let mut functions = Vec::with_capacity(header.count);
            for _ in 0..header.count {
                let values = rec.reals(grid.m, "u")?;
                if let Some(k) = values.iter().position(|v| !v.is_finite()) {
                    return Err(rec.fail(&format!("u[{k}]"), "non-finite value"));
                }
                if values[0] != 0.0 {
                    return Err(rec.fail(
                        "u[0]",
                        format!(
                            "potential must vanish at the first angle, found {}",
                            values[0]
                        ),
                    ));
                }
                functions.push(DifferencePotential { values });
            }
            Dataset::TravelTimeDifference(TravelTimeDifferenceData {
                grid,
                functions,
                seed: header.seed,
                metric: header.metric,
            })
        }
        DatasetKind::BrokenScattering => {
            let grid = header
                .direction_grid
                .ok_or_else(|| Error::parse(1, "direction_grid", "missing"))?;
            let mut directions = Vec::with_capacity(header.count);
            for _ in 0..header.count {
                let v = rec.reals(2, "direction")?;
                directions.push(BoundaryVector {
                    theta: v[0],
                    mu: v[1],
                });
            }
            let mut entries = Vec::with_capacity(header.entries);
            for _ in 0..header.entries {
                let e = rec.entry()?;
                if !(e.t > 0.0 && e.t.is_finite()) {
                    return Err(rec.fail("T", format!("total time {} is not positive", e.t)));
                }
                if e.i > e.j || e.j as usize >= header.count {
                    return Err(rec.fail(
                        "i",
                        format!("pair ({}, {}) outside the upper triangle", e.i, e.j),
                    ));
                }
                entries.push(e);
            }
            let table = BrokenScatteringTable::from_entries(
                grid,
                directions,
                &entries,
                header
                    .tol
                    .unwrap_or(crate::geodesic::DEFAULT_INTERSECTION_TOL),
                header.metric,
            )
            .map_err(|e| Error::parse(1, "entries", e.to_string()))?;
            Dataset::BrokenScattering(table)
        }
    };
    Ok(data)
}

pub fn save_sealed(sealed: &SealedSources, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, sealed)?;
    w.flush()?;
    Ok(())
}

pub fn load_sealed(path: impl AsRef<Path>) -> Result<SealedSources> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}
