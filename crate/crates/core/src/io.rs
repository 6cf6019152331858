//! CSV formats.
//!
//! Paths: header `t,v1,...,vd`, or `t,a1..ad,A11..Add` for step-2 group
//! paths with the level-2 matrix row-major; one row per grid point, sorted
//! by `t`. Control tables: header `s,t,omega`.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::embedding::ControlTable;
use crate::error::{Error, Result};
use crate::path::{MetricSpec, SampledPath, TimeGrid};

fn parse_err(line: u64, reason: impl Into<String>) -> Error {
    Error::Parse {
        line: line as usize,
        reason: reason.into(),
    }
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.kind() {
        csv::ErrorKind::Io(io) => Error::Io(io.to_string()),
        _ => parse_err(line, e.to_string()),
    }
}

/// Works out the metric from the header row.
fn metric_from_header(h: &csv::StringRecord) -> Result<MetricSpec> {
    let cols: Vec<&str> = h.iter().map(str::trim).collect();
    if cols.first() != Some(&"t") || cols.len() < 2 {
        return Err(parse_err(1, "header must start with t followed by value columns"));
    }
    let rest = &cols[1..];
    if rest.iter().enumerate().all(|(i, c)| *c == format!("v{}", i + 1)) {
        return Ok(MetricSpec::Euclidean(rest.len()));
    }
    let d = (1..=rest.len()).find(|d| d + d * d == rest.len());
    if let Some(d) = d {
        let expected: Vec<String> = (1..=d)
            .map(|i| format!("a{i}"))
            .chain((1..=d).flat_map(|i| (1..=d).map(move |j| format!("A{i}{j}"))))
            .collect();
        if rest.iter().zip(&expected).all(|(c, e)| c == e) {
            return Ok(MetricSpec::StepTwoGroup(d));
        }
    }
    Err(parse_err(1, format!("unrecognised header {}", cols.join(","))))
}

fn header_for(metric: MetricSpec) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    match metric {
        MetricSpec::Euclidean(d) => h.extend((1..=d).map(|i| format!("v{i}"))),
        MetricSpec::StepTwoGroup(d) => {
            h.extend((1..=d).map(|i| format!("a{i}")));
            h.extend((1..=d).flat_map(|i| (1..=d).map(move |j| format!("A{i}{j}"))));
        }
    }
    h
}

fn parse_field(field: &str, line: u64, name: &str) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| parse_err(line, format!("{name}: cannot parse {field:?} as a number")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("{name}: non-finite value {field:?}")));
    }
    Ok(v)
}

pub fn read_path<R: Read>(reader: R) -> Result<SampledPath> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers().map_err(csv_err)?.clone();
    let metric = metric_from_header(&header)?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        for (k, field) in rec.iter().enumerate() {
            let v = parse_field(field, line, &header[k])?;
            if k == 0 {
                if let Some(&prev) = times.last() {
                    if !(v > prev) {
                        return Err(parse_err(line, format!("t={v} does not increase")));
                    }
                }
                times.push(v);
            } else {
                values.push(v);
            }
        }
    }
    let grid = TimeGrid::new(times).map_err(|e| parse_err(0, e.to_string()))?;
    SampledPath::new(grid, metric, values)
}

pub fn write_path<W: Write>(writer: W, path: &SampledPath) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header_for(path.metric())).map_err(csv_err)?;
    for (i, &t) in path.grid().points().iter().enumerate() {
        let row = std::iter::once(t).chain(path.point(i).iter().copied()).map(|v| format!("{v}"));
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_path_file(p: &Path) -> Result<SampledPath> {
    let f = File::open(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
    read_path(f)
}

pub fn write_path_file(p: &Path, path: &SampledPath) -> Result<()> {
    let f = File::create(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
    write_path(f, path)
}

/// Reads `s,t,omega` rows. The grid is the set of times that appear.
pub fn read_control<R: Read>(reader: R) -> Result<ControlTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(|s| s.trim().to_string()).collect();
    if header != ["s", "t", "omega"] {
        return Err(parse_err(1, "control header must be s,t,omega"));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        let s = parse_field(&rec[0], line, "s")?;
        let t = parse_field(&rec[1], line, "t")?;
        let w = parse_field(&rec[2], line, "omega")?;
        rows.push((s, t, w));
    }
    let mut times: Vec<f64> = rows.iter().flat_map(|r| [r.0, r.1]).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let grid = TimeGrid::new(times).map_err(|e| parse_err(0, e.to_string()))?;
    ControlTable::from_triples(grid, &rows)
}

pub fn read_control_file(p: &Path) -> Result<ControlTable> {
    let f = File::open(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
    read_control(f)
}
