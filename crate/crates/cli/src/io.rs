//! CSV formats.
//!
//! * driving function: header `t,u`
//! * trace: header `t,re,im`
//! * curve: columns `re,im` with an optional `t` anywhere
//!
//! Numbers are written with 17 significant digits so a read-then-write
//! cycle reproduces a file byte for byte.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use loewner_core::{Complex64, DrivingPath, Trace};

use crate::error::{CliError, Result};

/// `x` in the exact-round-trip format.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_driving<W: Write>(out: W, path: &DrivingPath, name: &str) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let wrap = |source| CliError::Csv {
        path: name.to_string(),
        source,
    };
    w.write_record(["t", "u"]).map_err(wrap)?;
    for (&t, &u) in path.times().iter().zip(path.values()) {
        w.write_record([num(t), num(u)]).map_err(wrap)?;
    }
    w.flush().map_err(|source| CliError::Io {
        path: name.to_string(),
        source,
    })
}

pub fn write_trace<W: Write>(out: W, trace: &Trace, name: &str) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let wrap = |source| CliError::Csv {
        path: name.to_string(),
        source,
    };
    w.write_record(["t", "re", "im"]).map_err(wrap)?;
    for (&t, z) in trace.times.iter().zip(&trace.points) {
        w.write_record([num(t), num(z.re), num(z.im)]).map_err(wrap)?;
    }
    w.flush().map_err(|source| CliError::Io {
        path: name.to_string(),
        source,
    })
}

/// Rows of a CSV file as numbers, keyed by the requested header names.
///
/// Missing optional columns come back as `None`.
fn read_columns<R: Read>(input: R, name: &str, want: &[(&str, bool)]) -> Result<Vec<Option<Vec<f64>>>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let wrap = |source| CliError::Csv {
        path: name.to_string(),
        source,
    };
    let headers = r.headers().map_err(wrap)?.clone();
    let mut index = Vec::with_capacity(want.len());
    for &(col, required) in want {
        let at = headers.iter().position(|h| h == col);
        if at.is_none() && required {
            return Err(CliError::Format {
                path: name.to_string(),
                line: 1,
                message: format!("missing column `{col}`"),
            });
        }
        index.push(at);
    }
    let mut cols: Vec<Option<Vec<f64>>> = index.iter().map(|i| i.map(|_| Vec::new())).collect();
    for rec in r.records() {
        let rec = rec.map_err(wrap)?;
        let line = rec.position().map_or(0, |p| p.line());
        for (slot, at) in cols.iter_mut().zip(&index) {
            if let (Some(v), Some(i)) = (slot.as_mut(), at) {
                let field = rec.get(*i).unwrap_or("");
                let x: f64 = field.parse().map_err(|_| CliError::Format {
                    path: name.to_string(),
                    line,
                    message: format!("not a number: `{field}`"),
                })?;
                v.push(x);
            }
        }
    }
    Ok(cols)
}

pub fn read_driving<R: Read>(input: R, name: &str) -> Result<DrivingPath> {
    let mut cols = read_columns(input, name, &[("t", true), ("u", true)])?;
    let values = cols.pop().flatten().unwrap_or_default();
    let times = cols.pop().flatten().unwrap_or_default();
    Ok(DrivingPath::new(times, values, None)?)
}

/// A curve: points plus the times column when the file has one.
pub fn read_curve<R: Read>(input: R, name: &str) -> Result<(Vec<Complex64>, Option<Vec<f64>>)> {
    let mut cols = read_columns(input, name, &[("re", true), ("im", true), ("t", false)])?;
    let times = cols.pop().flatten();
    let im = cols.pop().flatten().unwrap_or_default();
    let re = cols.pop().flatten().unwrap_or_default();
    let points = re.into_iter().zip(im).map(|(x, y)| Complex64::new(x, y)).collect();
    Ok((points, times))
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })
}
