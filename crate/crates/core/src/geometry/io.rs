//! Point cloud files.
//!
//! CSV: header `x_1,…,x_d` plus an optional trailing `weight` column.
//!
//! Text: a `pifm-cloud v1` line, then `dim <d>`, `count <n>`, `weighted <0|1>`,
//! then one whitespace-separated row per point (weight last when weighted).
//! Floats are written in shortest round-trip form, so both formats are lossless.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use super::PointCloud;
use crate::error::{Error, Result};

const TEXT_MAGIC: &str = "pifm-cloud v1";

pub fn write_csv<W: Write>(cloud: &PointCloud, with_weights: bool, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=cloud.dim()).map(|i| format!("x_{i}")).collect();
    if with_weights {
        header.push("weight".into());
    }
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(header.len());
    for (p, wt) in cloud.points().zip(cloud.weights()) {
        row.clear();
        row.extend(p.iter().map(|v| v.to_string()));
        if with_weights {
            row.push(wt.to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<PointCloud> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = r.headers()?.clone();
    let weighted = header.iter().next_back() == Some("weight");
    let dim = header.len() - usize::from(weighted);
    for (i, name) in header.iter().take(dim).enumerate() {
        if name != format!("x_{}", i + 1) {
            return Err(Error::Parse(format!("unexpected CSV column `{name}`")));
        }
    }
    let mut coords = Vec::new();
    let mut weights = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        for (col, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                Error::Parse(format!("row {}: `{field}` is not a number", line + 1))
            })?;
            if weighted && col == dim {
                weights.push(v);
            } else {
                coords.push(v);
            }
        }
    }
    if coords.is_empty() {
        return Err(Error::Parse("CSV cloud has no rows".into()));
    }
    if weighted {
        PointCloud::with_weights(dim, coords, weights)
    } else {
        PointCloud::new(dim, coords)
    }
}

pub fn to_text(cloud: &PointCloud, with_weights: bool) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{TEXT_MAGIC}");
    let _ = writeln!(s, "dim {}", cloud.dim());
    let _ = writeln!(s, "count {}", cloud.len());
    let _ = writeln!(s, "weighted {}", u8::from(with_weights));
    for (p, w) in cloud.points().zip(cloud.weights()) {
        let mut first = true;
        for v in p {
            if !first {
                s.push(' ');
            }
            first = false;
            let _ = write!(s, "{v}");
        }
        if with_weights {
            let _ = write!(s, " {w}");
        }
        s.push('\n');
    }
    s
}

pub fn from_text(text: &str) -> Result<PointCloud> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(TEXT_MAGIC) {
        return Err(Error::Parse(format!("missing `{TEXT_MAGIC}` header")));
    }
    let mut field = |key: &str| -> Result<usize> {
        let line = lines
            .next()
            .ok_or_else(|| Error::Parse(format!("missing `{key}` line")))?;
        line.strip_prefix(key)
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad `{key}` line: `{line}`")))
    };
    let dim = field("dim")?;
    let count = field("count")?;
    let weighted = field("weighted")? == 1;
    let width = dim + usize::from(weighted);
    let mut coords = Vec::with_capacity(count * dim);
    let mut weights = Vec::with_capacity(count);
    let mut rows = 0;
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|v| v.parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Parse(format!("row {}: not numeric", rows + 1)))?;
        if vals.len() != width {
            return Err(Error::Parse(format!(
                "row {}: expected {width} values, got {}",
                rows + 1,
                vals.len()
            )));
        }
        coords.extend_from_slice(&vals[..dim]);
        if weighted {
            weights.push(vals[dim]);
        }
        rows += 1;
    }
    if rows != count {
        return Err(Error::Parse(format!("header says {count} points, found {rows}")));
    }
    if weighted {
        PointCloud::with_weights(dim, coords, weights)
    } else {
        PointCloud::new(dim, coords)
    }
}

pub fn save_csv(cloud: &PointCloud, with_weights: bool, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(cloud, with_weights, std::io::BufWriter::new(file))
}

pub fn load_csv(path: &Path) -> Result<PointCloud> {
    read_csv(std::fs::File::open(path)?)
}
