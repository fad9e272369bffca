//! On-disk formats: drop lists and path tables as CSV, point clouds as ASCII
//! PLY, tradeoff and CIR tables as CSV.

use std::io::{BufRead, Read, Write};

use num_complex::Complex64;
use thiserror::Error;

use crate::channel::CirTap;
use crate::cloud::{CloudPoint, PointCloud, TradeoffRow};
use crate::geom::{AnglePair, Vec3};
use crate::pathgen::{Drop, PathComponent};

pub const DROPS_HEADER: [&str; 6] = ["tx_x", "tx_y", "tx_z", "rx_x", "rx_y", "rx_z"];

pub const PATHS_HEADER: [&str; 14] = [
    "drop_id",
    "path_id",
    "bounces",
    "is_los",
    "aod_az",
    "aod_zen",
    "aoa_az",
    "aoa_zen",
    "toa_s",
    "gain_db",
    "phase_rad",
    "gt_x",
    "gt_y",
    "gt_z",
];

pub const TRADEOFF_HEADER: [&str; 3] = ["num_pairs", "chamfer_m", "points_kept"];

pub const CIR_HEADER: [&str; 7] = ["drop_id", "tap", "delay_s", "rx", "tx", "re", "im"];

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {msg}")]
    Row { line: u64, msg: String },
    #[error("unexpected header {found:?}, expected {expected:?}")]
    Header { found: Vec<String>, expected: Vec<String> },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("ply: {0}")]
    Ply(String),
}

fn row_err(line: u64, msg: impl Into<String>) -> FormatError {
    FormatError::Row { line, msg: msg.into() }
}

fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str]) -> Result<(), FormatError> {
    let found: Vec<String> = rdr.headers()?.iter().map(|s| s.trim().to_string()).collect();
    if found != expected {
        return Err(FormatError::Header {
            found,
            expected: expected.iter().map(|s| s.to_string()).collect(),
        });
    }
    Ok(())
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(r)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, name: &str, line: u64) -> Result<T, FormatError> {
    let raw = rec
        .get(i)
        .ok_or_else(|| row_err(line, format!("missing column {name}")))?;
    raw.parse()
        .map_err(|_| row_err(line, format!("column {name}: cannot parse {raw:?}")))
}

fn finite(rec: &csv::StringRecord, i: usize, name: &str, line: u64) -> Result<f64, FormatError> {
    let v: f64 = field(rec, i, name, line)?;
    if !v.is_finite() {
        return Err(row_err(line, format!("column {name} is not finite")));
    }
    Ok(v)
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

/// TX/RX placements; the `i`-th row (0-based) becomes drop `i + 1`.
pub fn read_drops<R: Read>(r: R) -> Result<Vec<(Vec3, Vec3)>, FormatError> {
    let mut rdr = reader(r);
    check_header(&mut rdr, &DROPS_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        if rec.len() != 6 {
            return Err(row_err(line, format!("expected 6 columns, got {}", rec.len())));
        }
        let mut v = [0.0; 6];
        for (i, slot) in v.iter_mut().enumerate() {
            *slot = finite(&rec, i, DROPS_HEADER[i], line)?;
        }
        let tx = Vec3::new(v[0], v[1], v[2]);
        let rx = Vec3::new(v[3], v[4], v[5]);
        if tx == rx {
            return Err(row_err(line, "tx and rx coincide"));
        }
        out.push((tx, rx));
    }
    Ok(out)
}

pub fn write_drops<W: Write>(w: W, drops: &[(Vec3, Vec3)]) -> Result<(), FormatError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(DROPS_HEADER)?;
    for (tx, rx) in drops {
        wtr.write_record([tx.x, tx.y, tx.z, rx.x, rx.y, rx.z].map(sci))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_paths<W: Write>(w: W, drops: &[Drop]) -> Result<(), FormatError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(PATHS_HEADER)?;
    for d in drops {
        for (i, p) in d.paths.iter().enumerate() {
            let (gx, gy, gz) = match p.interaction {
                Some(g) => (sci(g.x), sci(g.y), sci(g.z)),
                None => (String::new(), String::new(), String::new()),
            };
            wtr.write_record([
                d.drop_id.to_string(),
                i.to_string(),
                p.bounce_count.to_string(),
                u8::from(p.is_los).to_string(),
                sci(p.aod.azimuth),
                sci(p.aod.zenith),
                sci(p.aoa.azimuth),
                sci(p.aoa.zenith),
                sci(p.delay),
                sci(p.gain_db()),
                sci(p.gain.arg()),
                gx,
                gy,
                gz,
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// One row of a path table.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub drop_id: u32,
    pub path_id: u32,
    pub path: PathComponent,
}

pub fn read_paths<R: Read>(r: R) -> Result<Vec<PathRecord>, FormatError> {
    let mut rdr = reader(r);
    check_header(&mut rdr, &PATHS_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        if rec.len() != PATHS_HEADER.len() {
            return Err(row_err(line, format!("expected 14 columns, got {}", rec.len())));
        }
        let f = |i: usize| finite(&rec, i, PATHS_HEADER[i], line);
        let is_los = match rec.get(3).unwrap_or("") {
            "0" => false,
            "1" => true,
            other => return Err(row_err(line, format!("is_los must be 0 or 1, got {other:?}"))),
        };
        let gt_raw: Vec<&str> = (11..14).map(|i| rec.get(i).unwrap_or("")).collect();
        let interaction = if gt_raw.iter().all(|s| s.is_empty()) {
            None
        } else {
            Some(Vec3::new(f(11)?, f(12)?, f(13)?))
        };
        let gain_db = f(9)?;
        let phase = f(10)?;
        out.push(PathRecord {
            drop_id: field(&rec, 0, "drop_id", line)?,
            path_id: field(&rec, 1, "path_id", line)?,
            path: PathComponent {
                aod: AnglePair {
                    azimuth: f(4)?,
                    zenith: f(5)?,
                },
                aoa: AnglePair {
                    azimuth: f(6)?,
                    zenith: f(7)?,
                },
                delay: f(8)?,
                gain: Complex64::from_polar(10f64.powf(gain_db / 20.0), phase),
                bounce_count: field(&rec, 2, "bounces", line)?,
                is_los,
                interaction,
            },
        });
    }
    Ok(out)
}

/// Groups path records under their drops (`drop_id` = 1-based row of
/// `placements`). Path ids must run 0, 1, 2, … within each drop.
pub fn assemble_drops(placements: &[(Vec3, Vec3)], records: Vec<PathRecord>) -> Result<Vec<Drop>, FormatError> {
    let mut drops: Vec<Drop> = placements
        .iter()
        .enumerate()
        .map(|(i, &(tx, rx))| Drop {
            drop_id: i as u32 + 1,
            tx,
            rx,
            paths: Vec::new(),
        })
        .collect();
    for (row, rec) in records.into_iter().enumerate() {
        let line = row as u64 + 2;
        let idx = (rec.drop_id as usize)
            .checked_sub(1)
            .filter(|&i| i < drops.len())
            .ok_or_else(|| row_err(line, format!("drop_id {} has no placement", rec.drop_id)))?;
        let d = &mut drops[idx];
        if rec.path_id as usize != d.paths.len() {
            return Err(row_err(
                line,
                format!(
                    "drop {} expected path_id {}, got {}",
                    rec.drop_id,
                    d.paths.len(),
                    rec.path_id
                ),
            ));
        }
        d.paths.push(rec.path);
    }
    Ok(drops)
}

pub fn write_ply<W: Write>(mut w: W, cloud: &PointCloud) -> Result<(), FormatError> {
    writeln!(w, "ply")?;
    writeln!(w, "format ascii 1.0")?;
    writeln!(w, "element vertex {}", cloud.len())?;
    for p in ["x", "y", "z", "gain_db", "residual"] {
        writeln!(w, "property double {p}")?;
    }
    writeln!(w, "property int drop_id")?;
    writeln!(w, "property int path_id")?;
    writeln!(w, "end_header")?;
    for p in cloud.points() {
        writeln!(
            w,
            "{} {} {} {} {} {} {}",
            sci(p.position.x),
            sci(p.position.y),
            sci(p.position.z),
            sci(p.gain_db),
            sci(p.residual),
            p.drop_id,
            p.path_id
        )?;
    }
    Ok(())
}

/// Reads clouds written by [`write_ply`].
pub fn read_ply<R: BufRead>(r: R) -> Result<PointCloud, FormatError> {
    let ply = |m: String| FormatError::Ply(m);
    let mut lines = r.lines().enumerate();
    let mut next = || -> Result<(usize, String), FormatError> {
        match lines.next() {
            Some((i, l)) => Ok((i + 1, l?.trim().to_string())),
            None => Err(FormatError::Ply("unexpected end of file".into())),
        }
    };
    if next()?.1 != "ply" {
        return Err(ply("missing 'ply' magic".into()));
    }
    if next()?.1 != "format ascii 1.0" {
        return Err(ply("only 'format ascii 1.0' is supported".into()));
    }
    let mut count: Option<usize> = None;
    let mut props = Vec::new();
    loop {
        let (n, l) = next()?;
        let tok: Vec<&str> = l.split_whitespace().collect();
        match tok.as_slice() {
            ["end_header"] => break,
            ["comment", ..] => {}
            ["element", "vertex", c] => {
                count = Some(c.parse().map_err(|_| ply(format!("line {n}: bad vertex count")))?);
            }
            ["property", _, name] => props.push(name.to_string()),
            _ => return Err(ply(format!("line {n}: unsupported header line {l:?}"))),
        }
    }
    let expected = ["x", "y", "z", "gain_db", "residual", "drop_id", "path_id"];
    if props != expected {
        return Err(ply(format!("properties {props:?}, expected {expected:?}")));
    }
    let count = count.ok_or_else(|| ply("missing vertex element".into()))?;
    let mut points = Vec::with_capacity(count);
    for _ in 0..count {
        let (n, l) = next()?;
        let tok: Vec<&str> = l.split_whitespace().collect();
        if tok.len() != 7 {
            return Err(row_err(n as u64, format!("expected 7 values, got {}", tok.len())));
        }
        let num = |i: usize| -> Result<f64, FormatError> {
            tok[i]
                .parse()
                .map_err(|_| row_err(n as u64, format!("cannot parse {:?}", tok[i])))
        };
        let int = |i: usize| -> Result<u32, FormatError> {
            tok[i]
                .parse()
                .map_err(|_| row_err(n as u64, format!("cannot parse {:?}", tok[i])))
        };
        points.push(CloudPoint {
            position: Vec3::new(num(0)?, num(1)?, num(2)?),
            gain_db: num(3)?,
            residual: num(4)?,
            drop_id: int(5)?,
            path_id: int(6)?,
        });
    }
    PointCloud::new(points).map_err(|e| ply(e.to_string()))
}

pub fn write_tradeoff<W: Write>(w: W, rows: &[TradeoffRow]) -> Result<(), FormatError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(TRADEOFF_HEADER)?;
    for r in rows {
        let cd = if r.chamfer_m.is_nan() {
            "nan".to_string()
        } else {
            sci(r.chamfer_m)
        };
        wtr.write_record([r.num_pairs.to_string(), cd, r.points_kept.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_tradeoff<R: Read>(r: R) -> Result<Vec<TradeoffRow>, FormatError> {
    let mut rdr = reader(r);
    check_header(&mut rdr, &TRADEOFF_HEADER)?;
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            let line = line_of(&rec);
            Ok(TradeoffRow {
                num_pairs: field(&rec, 0, "num_pairs", line)?,
                chamfer_m: field(&rec, 1, "chamfer_m", line)?,
                points_kept: field(&rec, 2, "points_kept", line)?,
            })
        })
        .collect()
}

/// One row per matrix entry of every tap: `(drop_id, tap, delay, rx, tx, re, im)`.
pub fn write_cir<W: Write>(w: W, taps: &[(u32, Vec<CirTap>)]) -> Result<(), FormatError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(CIR_HEADER)?;
    for (drop_id, drop_taps) in taps {
        for (k, tap) in drop_taps.iter().enumerate() {
            for r in 0..tap.matrix.rows {
                for c in 0..tap.matrix.cols {
                    let z = tap.matrix.get(r, c);
                    wtr.write_record([
                        drop_id.to_string(),
                        k.to_string(),
                        sci(tap.delay),
                        r.to_string(),
                        c.to_string(),
                        sci(z.re),
                        sci(z.im),
                    ])?;
                }
            }
        }
    }
    wtr.flush()?;
    Ok(())
}
