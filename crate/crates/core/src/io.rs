//! CSV localization files.
//!
//! Header `x_nm,y_nm[,frame,cluster_id,class_id,coarse_id]`. Optional columns may
//! be omitted but keep this relative order. `cluster_id`/`coarse_id` use -1 for
//! noise, `class_id` uses 0 for background. LF and CRLF line endings are accepted.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::cloud::{LabeledCloud, Localization, Partition, PointCloud};
use crate::error::{file_err, Error, Result};
use crate::real::Real;

const OPTIONAL: [&str; 4] = ["frame", "cluster_id", "class_id", "coarse_id"];

#[derive(Clone, Copy, Default)]
struct Columns {
    frame: Option<usize>,
    cluster: Option<usize>,
    class: Option<usize>,
    coarse: Option<usize>,
}

fn parse_header(fields: &csv::StringRecord) -> Result<Columns> {
    let names: Vec<&str> = fields.iter().map(str::trim).collect();
    if names.len() < 2 || names[0] != "x_nm" || names[1] != "y_nm" {
        return Err(Error::Header(format!(
            "expected leading columns x_nm,y_nm, found {}",
            names.join(",")
        )));
    }
    let mut cols = Columns::default();
    let mut last_rank = None;
    for (pos, name) in names.iter().enumerate().skip(2) {
        let rank = OPTIONAL
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Header(format!("unknown column `{name}`")))?;
        if last_rank.is_some_and(|r| rank <= r) {
            return Err(Error::Header(format!("column `{name}` out of order")));
        }
        last_rank = Some(rank);
        match rank {
            0 => cols.frame = Some(pos),
            1 => cols.cluster = Some(pos),
            2 => cols.class = Some(pos),
            _ => cols.coarse = Some(pos),
        }
    }
    Ok(cols)
}

fn field<V: std::str::FromStr>(rec: &csv::StringRecord, idx: usize, name: &str, line: u64) -> Result<V> {
    let raw = rec[idx].trim();
    raw.parse().map_err(|_| Error::Parse {
        line,
        message: format!("invalid {name} `{raw}`"),
    })
}

/// Reads a labeled cloud from any reader.
pub fn read_cloud_from<T: Real, R: Read>(reader: R) -> Result<LabeledCloud<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| csv_error(e, 1))?.clone();
    let cols = parse_header(&header)?;
    let width = header.len();

    let mut points = Vec::new();
    let mut truth = cols.cluster.map(|_| Vec::new());
    let mut classes = cols.class.map(|_| Vec::new());
    let mut coarse = cols.coarse.map(|_| Vec::new());

    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(e, 0))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != width {
            return Err(Error::ColumnCount {
                line,
                expected: width,
                found: rec.len(),
            });
        }
        let x: T = field(&rec, 0, "x_nm", line)?;
        let y: T = field(&rec, 1, "y_nm", line)?;
        if !(x.is_finite() && y.is_finite()) {
            return Err(Error::Parse {
                line,
                message: "non-finite coordinate".into(),
            });
        }
        let frame = match cols.frame {
            Some(c) if !rec[c].trim().is_empty() => Some(field::<u64>(&rec, c, "frame", line)?),
            _ => None,
        };
        points.push(Localization { x, y, frame });
        if let (Some(c), Some(v)) = (cols.cluster, truth.as_mut()) {
            v.push(label_field(&rec, c, "cluster_id", line)?);
        }
        if let (Some(c), Some(v)) = (cols.class, classes.as_mut()) {
            v.push(field::<u32>(&rec, c, "class_id", line)?);
        }
        if let (Some(c), Some(v)) = (cols.coarse, coarse.as_mut()) {
            v.push(label_field(&rec, c, "coarse_id", line)?);
        }
    }

    let cloud = PointCloud::new(points)?;
    LabeledCloud::from_parts(
        cloud,
        truth.map(Partition::new).transpose()?,
        classes,
        coarse.map(Partition::new).transpose()?,
    )
}

fn label_field(rec: &csv::StringRecord, idx: usize, name: &str, line: u64) -> Result<i64> {
    let v: i64 = field(rec, idx, name, line)?;
    if v < -1 {
        return Err(Error::Parse {
            line,
            message: format!("{name} {v} below -1"),
        });
    }
    Ok(v)
}

fn csv_error(e: csv::Error, fallback_line: u64) -> Error {
    let line = e.position().map_or(fallback_line, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse {
            line,
            message: format!("{other:?}"),
        },
    }
}

pub fn read_cloud<T: Real>(path: impl AsRef<Path>) -> Result<LabeledCloud<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(file_err(path))?;
    read_cloud_from(BufReader::new(file))
}

/// Writes a labeled cloud. Columns are emitted only for the annotations present.
///
/// Coordinates use the shortest decimal form that parses back to the same bits.
pub fn write_cloud_to<T: Real, W: Write>(writer: W, cloud: &LabeledCloud<T>) -> Result<()> {
    let mut w = BufWriter::new(writer);
    let pts = cloud.cloud().points();
    let with_frame = pts.iter().any(|p| p.frame.is_some());
    let truth = cloud.truth();
    let classes = cloud.shape_class();
    let coarse = cloud.coarse_truth();

    let mut header = String::from("x_nm,y_nm");
    for (present, name) in [
        (with_frame, "frame"),
        (truth.is_some(), "cluster_id"),
        (classes.is_some(), "class_id"),
        (coarse.is_some(), "coarse_id"),
    ] {
        if present {
            header.push(',');
            header.push_str(name);
        }
    }
    writeln!(w, "{header}")?;

    for (i, p) in pts.iter().enumerate() {
        write!(w, "{},{}", p.x, p.y)?;
        if with_frame {
            match p.frame {
                Some(f) => write!(w, ",{f}")?,
                None => write!(w, ",")?,
            }
        }
        if let Some(t) = truth {
            write!(w, ",{}", t.labels()[i])?;
        }
        if let Some(c) = classes {
            write!(w, ",{}", c[i])?;
        }
        if let Some(c) = coarse {
            write!(w, ",{}", c.labels()[i])?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_cloud<T: Real>(path: impl AsRef<Path>, cloud: &LabeledCloud<T>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(file_err(path))?;
    write_cloud_to(file, cloud)
}
