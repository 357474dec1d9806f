//! CSV readers for fields and measures, and 16-bit PGM heatmaps.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{LatticeDomain, Site};
use crate::error::{Error, Result};
use crate::sampler::{Field, SeedTag};

/// Scattered `(x1, x2, value)` rows of a CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct PointTable {
    pub value_column: String,
    pub rows: Vec<([f64; 2], f64)>,
}

/// Value columns tried in order when reading a table for rendering.
pub const VALUE_COLUMNS: [&str; 3] = ["value", "mass", "overshoot"];

/// Reads columns `x1`, `x2` and the first of [`VALUE_COLUMNS`] present.
pub fn read_point_table<R: Read>(reader: R) -> Result<PointTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers().map_err(|e| csv_error(e, 1))?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::Parse { line: 1, msg: "empty file".into() });
    }
    let find = |name: &str| header.iter().position(|c| c == name);
    let (ix, iy) = match (find("x1"), find("x2")) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::Parse { line: 1, msg: "header lacks x1,x2".into() }),
    };
    let (iv, vname) = VALUE_COLUMNS
        .iter()
        .find_map(|n| find(n).map(|i| (i, n.to_string())))
        .ok_or(Error::Parse { line: 1, msg: format!("header lacks a value column ({})", VALUE_COLUMNS.join("|")) })?;
    let mut rows = vec![];
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(e, k + 2))?;
        let lineno = rec.position().map_or(k + 2, |p| p.line() as usize);
        let num = |i: usize| {
            let s = &rec[i];
            s.trim().parse::<f64>().map_err(|e| Error::Parse { line: lineno, msg: format!("{s:?}: {e}") })
        };
        rows.push(([num(ix)?, num(iy)?], num(iv)?));
    }
    Ok(PointTable { value_column: vname, rows })
}

/// Maps a CSV error to a parse error, preferring the reader's line number.
pub fn csv_error(e: csv::Error, fallback: usize) -> Error {
    let line = e.position().map_or(fallback, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            Error::Parse { line, msg: format!("expected {expected_len} fields, got {len}") }
        }
        k => Error::Parse { line, msg: format!("{k:?}") },
    }
}

/// Reads a field written by [`Field::write_csv`]; the lattice domain is
/// rebuilt from the listed sites.
pub fn read_field_csv<R: Read>(reader: R, n: u32) -> Result<Field> {
    let t = read_point_table(reader)?;
    if t.value_column != "value" {
        return Err(Error::Parse { line: 1, msg: "field CSV needs a value column".into() });
    }
    let mut rows: Vec<(Site, f64)> = vec![];
    for (k, (p, v)) in t.rows.iter().enumerate() {
        if p[0].fract() != 0.0 || p[1].fract() != 0.0 {
            return Err(Error::Parse { line: k + 2, msg: "site coordinates must be integers".into() });
        }
        rows.push(([p[0] as i64, p[1] as i64], *v));
    }
    rows.sort_by_key(|r| r.0);
    let sites: Vec<Site> = rows.iter().map(|r| r.0).collect();
    let domain = LatticeDomain::from_sites(n, sites, None)?;
    Ok(Field::new(domain, rows.into_iter().map(|r| r.1).collect(), SeedTag::deterministic("csv")))
}

/// Row-major 16-bit grayscale image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub data: Vec<u16>,
}

/// Binary `P5` with big-endian samples.
pub fn write_pgm<W: Write>(mut w: W, img: &Pgm) -> Result<()> {
    write!(w, "P5\n{} {}\n{}\n", img.width, img.height, img.maxval)?;
    let mut bytes = Vec::with_capacity(img.data.len() * 2);
    for v in &img.data {
        bytes.extend_from_slice(&v.to_be_bytes());
    }
    w.write_all(&bytes)?;
    Ok(())
}

pub fn read_pgm<R: Read>(mut r: R) -> Result<Pgm> {
    let mut bytes = vec![];
    r.read_to_end(&mut bytes)?;
    let mut pos = 0;
    let token = |pos: &mut usize| -> Result<String> {
        while *pos < bytes.len() && (bytes[*pos].is_ascii_whitespace() || bytes[*pos] == b'#') {
            if bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
            } else {
                *pos += 1;
            }
        }
        let s = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        Ok(String::from_utf8_lossy(&bytes[s..*pos]).into_owned())
    };
    let bad = |m: &str| Error::Parse { line: 1, msg: m.to_string() };
    if token(&mut pos)? != "P5" {
        return Err(bad("not a binary PGM"));
    }
    let width: usize = token(&mut pos)?.parse().map_err(|_| bad("bad width"))?;
    let height: usize = token(&mut pos)?.parse().map_err(|_| bad("bad height"))?;
    let maxval: u16 = token(&mut pos)?.parse().map_err(|_| bad("bad maxval"))?;
    pos += 1;
    let need = width * height * if maxval > 255 { 2 } else { 1 };
    if bytes.len() < pos + need {
        return Err(bad("truncated raster"));
    }
    let raster = &bytes[pos..pos + need];
    let data = if maxval > 255 {
        raster.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
    } else {
        raster.iter().map(|b| *b as u16).collect()
    };
    Ok(Pgm { width, height, maxval, data })
}

/// Linear map recorded next to a rendered image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapMeta {
    pub min: f64,
    pub max: f64,
    pub width: usize,
    pub height: usize,
    pub x0: f64,
    pub y0: f64,
    pub dx: f64,
    pub dy: f64,
}

fn spacing(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v.dedup();
    let span = v.last().unwrap() - v[0];
    let tol = 1e-9 * span.abs().max(1.0);
    v.windows(2).map(|w| w[1] - w[0]).filter(|d| *d > tol).fold(f64::INFINITY, f64::min)
}

/// Rasterizes scattered points onto the lattice implied by their smallest
/// coordinate gaps. Row 0 is the top (largest `x2`); cells without a point
/// are black, values map linearly from `[min, max]` to `[0, 65535]`, and a
/// constant table renders mid-gray.
pub fn render_heatmap(table: &PointTable) -> Result<(Pgm, HeatmapMeta)> {
    if table.rows.is_empty() {
        return Err(Error::InsufficientData("nothing to render".into()));
    }
    let xs: Vec<f64> = table.rows.iter().map(|r| r.0[0]).collect();
    let ys: Vec<f64> = table.rows.iter().map(|r| r.0[1]).collect();
    let (x0, x1) = (xs.iter().copied().fold(f64::INFINITY, f64::min), xs.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    let (y0, y1) = (ys.iter().copied().fold(f64::INFINITY, f64::min), ys.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    let dx = match spacing(xs) {
        d if d.is_finite() => d,
        _ => 1.0,
    };
    let dy = match spacing(ys) {
        d if d.is_finite() => d,
        _ => 1.0,
    };
    let width = ((x1 - x0) / dx).round() as usize + 1;
    let height = ((y1 - y0) / dy).round() as usize + 1;
    if width.saturating_mul(height) > 1 << 28 {
        return Err(Error::Resource(format!("inferred raster {width}x{height} is too large")));
    }
    let min = table.rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let max = table.rows.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    let mut data = vec![0u16; width * height];
    for (p, v) in &table.rows {
        let col = ((p[0] - x0) / dx).round() as usize;
        let row = height - 1 - ((p[1] - y0) / dy).round() as usize;
        let g = if max > min { ((v - min) / (max - min) * 65535.0).round() } else { 32768.0 };
        data[row * width + col] = g as u16;
    }
    Ok((Pgm { width, height, maxval: 65535, data }, HeatmapMeta { min, max, width, height, x0, y0, dx, dy }))
}

/// Renders `csv` to `pgm` and writes the mapping to `<pgm>.json`.
pub fn render_file(csv: &Path, pgm: &Path) -> Result<HeatmapMeta> {
    let f = std::io::BufReader::new(std::fs::File::open(csv)?);
    // csv buffers internally; the BufReader only matters for tiny reads
    let table = read_point_table(f)?;
    let (img, meta) = render_heatmap(&table)?;
    write_pgm(std::io::BufWriter::new(std::fs::File::create(pgm)?), &img)?;
    let mut side = pgm.as_os_str().to_owned();
    side.push(".json");
    std::fs::write(side, serde_json::to_string_pretty(&meta)?)?;
    Ok(meta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: Vec<([f64; 2], f64)>) -> PointTable {
        PointTable { value_column: "value".into(), rows }
    }

    #[test]
    fn constant_field_is_uniform_gray() {
        let rows = (0..4).flat_map(|i| (0..3).map(move |j| ([i as f64, j as f64], 2.5))).collect();
        let (img, meta) = render_heatmap(&table(rows)).unwrap();
        assert_eq!((img.width, img.height), (4, 3));
        assert!(img.data.iter().all(|v| *v == img.data[0]));
        assert_eq!((meta.min, meta.max), (2.5, 2.5));
    }

    #[test]
    fn single_bright_pixel_lands_in_place() {
        let mut rows: Vec<([f64; 2], f64)> =
            (0..5).flat_map(|i| (0..5).map(move |j| ([0.1 * i as f64, 0.1 * j as f64], 0.0))).collect();
        rows[2 * 5 + 4].1 = 7.0; // x1 = 0.2, x2 = 0.4: column 2, top row
        let (img, _) = render_heatmap(&table(rows)).unwrap();
        let bright: Vec<usize> = (0..25).filter(|k| img.data[*k] > 0).collect();
        assert_eq!(bright, vec![2]);
        assert_eq!(img.data[2], 65535);
    }

    #[test]
    fn pgm_round_trip() {
        let img = Pgm { width: 3, height: 2, maxval: 65535, data: vec![0, 1, 256, 65535, 300, 7] };
        let mut buf = vec![];
        write_pgm(&mut buf, &img).unwrap();
        assert!(buf.starts_with(b"P5\n3 2\n65535\n"));
        assert_eq!(buf.len(), 13 + 12);
        assert_eq!(read_pgm(&buf[..]).unwrap(), img);
    }

    #[test]
    fn malformed_csv_reports_line() {
        let bad = "x1,x2,value\n1,2,3\n1,oops,3\n";
        assert!(matches!(read_point_table(bad.as_bytes()), Err(Error::Parse { line: 3, .. })));
        let short = "x1,x2,value\n1,2\n";
        assert!(matches!(read_point_table(short.as_bytes()), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(read_point_table("a,b\n".as_bytes()), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn field_csv_round_trip() {
        let d = LatticeDomain::lattice_box(32, 3, 4, 5, 2).unwrap();
        let f = Field::new(d, (0..10).map(|k| k as f64 * 0.37 - 1.0).collect(), SeedTag::deterministic("t"));
        let mut buf = vec![];
        f.write_csv(&mut buf).unwrap();
        let g = read_field_csv(&buf[..], 32).unwrap();
        assert_eq!(g.values, f.values);
        assert_eq!(g.domain.sites(), f.domain.sites());
    }
}
