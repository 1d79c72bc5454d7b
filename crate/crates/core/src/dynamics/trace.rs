//! Decimated time series and their CSV form.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::error::{Error, Result};

pub const TRACE_HEADER: &str =
    "t_s,x_m,y_m,z_m,alpha_rad,beta_rad,gamma_rad,wx,wy,wz,re_a,im_a,re_b,im_b,det_split1,det_split2,det_pbs";

pub const NCOLS: usize = 17;

/// Column indices into a trace row.
pub mod col {
    pub const T: usize = 0;
    pub const X: usize = 1;
    pub const Y: usize = 2;
    pub const Z: usize = 3;
    pub const ALPHA: usize = 4;
    pub const BETA: usize = 5;
    pub const GAMMA: usize = 6;
    pub const WX: usize = 7;
    pub const WY: usize = 8;
    pub const WZ: usize = 9;
    pub const RE_A: usize = 10;
    pub const IM_A: usize = 11;
    pub const RE_B: usize = 12;
    pub const IM_B: usize = 13;
    pub const SPLIT1: usize = 14;
    pub const SPLIT2: usize = 15;
    pub const PBS: usize = 16;
}

/// Uniformly sampled trace. Angles are unwrapped; angular velocity is in
/// body axes.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub fs: f64,
    /// `key = value` pairs written as comment lines (config hash, seed, ...).
    pub provenance: Vec<(String, String)>,
    pub rows: Vec<[f64; NCOLS]>,
}

impl TraceRecord {
    pub fn new(fs: f64) -> Self {
        Self {
            fs,
            provenance: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, index: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[index]).collect()
    }

    pub fn column_by_name(&self, name: &str) -> Option<Vec<f64>> {
        TRACE_HEADER.split(',').position(|c| c == name).map(|i| self.column(i))
    }

    pub fn duration(&self) -> f64 {
        self.rows.len() as f64 / self.fs
    }
}

fn is_gz(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

/// Writes the trace as CSV, gzip-compressed when the path ends in `.gz`.
pub fn write_trace(trace: &TraceRecord, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let res = if is_gz(path) {
        let mut enc = GzEncoder::new(BufWriter::new(file), Compression::default());
        write_body(trace, &mut enc).and_then(|_| enc.finish().map(|_| ()))
    } else {
        let mut w = BufWriter::new(file);
        write_body(trace, &mut w).and_then(|_| w.flush())
    };
    res.map_err(|e| Error::io(path, e))
}

fn write_body<W: Write>(trace: &TraceRecord, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "# fs_hz = {:e}", trace.fs)?;
    for (k, v) in &trace.provenance {
        writeln!(w, "# {k} = {v}")?;
    }
    writeln!(w, "{TRACE_HEADER}")?;
    let mut line = String::with_capacity(NCOLS * 24);
    for row in &trace.rows {
        line.clear();
        for (i, x) in row.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&format!("{x:e}"));
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    Ok(())
}

pub fn read_trace(path: &Path) -> Result<TraceRecord> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader: Box<dyn Read> = if is_gz(path) {
        Box::new(GzDecoder::new(file))
    } else {
        Box::new(file)
    };
    let reader = BufReader::new(reader);
    let mut fs = None;
    let mut provenance = Vec::new();
    let mut rows = Vec::new();
    let mut seen_header = false;
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let lineno = n + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(c) = line.strip_prefix('#') {
            if let Some((k, v)) = c.split_once('=') {
                let (k, v) = (k.trim(), v.trim());
                if k == "fs_hz" {
                    fs = Some(v.parse::<f64>().map_err(|_| bad(lineno, "invalid fs_hz"))?);
                } else {
                    provenance.push((k.to_string(), v.to_string()));
                }
            }
            continue;
        }
        if !seen_header {
            if line != TRACE_HEADER {
                return Err(bad(lineno, "unexpected trace header"));
            }
            seen_header = true;
            continue;
        }
        let mut row = [0.0; NCOLS];
        let mut count = 0;
        for (i, field) in line.split(',').enumerate() {
            if i >= NCOLS {
                return Err(bad(lineno, "too many columns"));
            }
            row[i] = field.trim().parse().map_err(|_| bad(lineno, "invalid number"))?;
            count += 1;
        }
        if count != NCOLS {
            return Err(bad(lineno, "too few columns"));
        }
        rows.push(row);
    }
    if !seen_header {
        return Err(Error::InvalidInput(format!("{}: missing trace header", path.display())));
    }
    let fs = match fs {
        Some(f) => f,
        None if rows.len() >= 2 => 1.0 / (rows[1][col::T] - rows[0][col::T]),
        None => return Err(Error::InvalidInput(format!("{}: sample rate unknown", path.display()))),
    };
    Ok(TraceRecord { fs, provenance, rows })
}

fn bad(line: usize, message: &str) -> Error {
    Error::InvalidInput(format!("trace line {line}: {message}"))
}
