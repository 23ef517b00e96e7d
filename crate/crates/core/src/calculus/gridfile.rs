//! Plain-text grid field format.
//!
//! ```text
//! # dim=2
//! # lower=0,0
//! # upper=1,1
//! # levels=3,3
//! # shape=1,1
//! # exponent=0.8
//! x0,x1,v0
//! ...
//! ```
//! One row per grid node in row-major order (axis 0 slowest): the node
//! coordinates followed by the `rows * cols` values. `exponent` is optional.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::calculus::field::Field;
use crate::calculus::geometry::{Domain, Grid};
use crate::error::{Error, Result};
use crate::scalar::Real;

fn join<T: Real>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Writes a grid-sampled field. Closed-form fields must be sampled first.
pub fn write_grid_csv<T: Real, W: Write>(field: &Field<T>, mut w: W) -> Result<()> {
    let s = field
        .samples()
        .ok_or_else(|| Error::Format("only grid-sampled fields can be written".into()))?;
    let grid = s.grid();
    let d = grid.domain();
    writeln!(w, "# dim={}", d.dim())?;
    writeln!(w, "# lower={}", join(d.lower()))?;
    writeln!(w, "# upper={}", join(d.upper()))?;
    let levels: Vec<String> = grid.levels().iter().map(|l| l.to_string()).collect();
    writeln!(w, "# levels={}", levels.join(","))?;
    writeln!(w, "# shape={},{}", field.rows(), field.cols())?;
    writeln!(w, "# exponent={}", field.exponent())?;
    let mut line = String::new();
    for flat in 0..grid.len() {
        line.clear();
        let p = grid.point_flat(flat);
        for x in p.iter().chain(s.at_flat(flat)) {
            if !line.is_empty() {
                line.push(',');
            }
            line.push_str(&x.to_string());
        }
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_grid_file<T: Real>(field: &Field<T>, path: impl AsRef<Path>) -> Result<()> {
    write_grid_csv(field, BufWriter::new(File::create(path)?))
}

fn parse_list<T: Real>(key: &str, s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map(T::lit)
                .map_err(|e| Error::Format(format!("bad {key} entry {t:?}: {e}")))
        })
        .collect()
}

fn parse_usizes(key: &str, s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|e| Error::Format(format!("bad {key} entry {t:?}: {e}")))
        })
        .collect()
}

/// Reads a grid field, rejecting any mismatch between header and body.
pub fn read_grid_csv<T: Real, R: BufRead>(r: R) -> Result<Field<T>> {
    let mut dim = None;
    let mut lower = None;
    let mut upper = None;
    let mut levels = None;
    let mut shape = None;
    let mut exponent = T::one();
    let mut values = Vec::new();
    let mut rows = 0usize;
    let mut width = None;
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(h) = line.strip_prefix('#') {
            let Some((k, v)) = h.split_once('=') else { continue };
            match k.trim() {
                "dim" => dim = Some(parse_usizes("dim", v)?[0]),
                "lower" => lower = Some(parse_list::<T>("lower", v)?),
                "upper" => upper = Some(parse_list::<T>("upper", v)?),
                "levels" => {
                    levels = Some(
                        parse_usizes("levels", v)?
                            .into_iter()
                            .map(|l| l as u32)
                            .collect::<Vec<_>>(),
                    )
                }
                "shape" => shape = Some(parse_usizes("shape", v)?),
                "exponent" => exponent = parse_list::<T>("exponent", v)?[0],
                _ => {}
            }
            continue;
        }
        let dim = dim.ok_or_else(|| Error::Format("missing dim header".into()))?;
        let shape = shape.as_ref().ok_or_else(|| Error::Format("missing shape header".into()))?;
        if shape.len() != 2 {
            return Err(Error::Format("shape must be rows,cols".into()));
        }
        let w = *width.get_or_insert(dim + shape[0] * shape[1]);
        let entries = parse_list::<T>("sample", line)?;
        if entries.len() != w {
            return Err(Error::Format(format!(
                "line {}: expected {w} columns, found {}",
                lineno + 1,
                entries.len()
            )));
        }
        values.extend_from_slice(&entries[dim..]);
        rows += 1;
    }
    let dim = dim.ok_or_else(|| Error::Format("missing dim header".into()))?;
    let lower = lower.ok_or_else(|| Error::Format("missing lower header".into()))?;
    let upper = upper.ok_or_else(|| Error::Format("missing upper header".into()))?;
    let levels = levels.ok_or_else(|| Error::Format("missing levels header".into()))?;
    let shape = shape.ok_or_else(|| Error::Format("missing shape header".into()))?;
    if lower.len() != dim || upper.len() != dim || levels.len() != dim {
        return Err(Error::Format("header lists disagree with dim".into()));
    }
    let grid = Grid::new(Domain::new(lower, upper)?, levels)?;
    if rows != grid.len() {
        return Err(Error::Format(format!(
            "expected {} sample rows, found {rows}",
            grid.len()
        )));
    }
    Field::from_grid(grid, (shape[0], shape[1]), values, exponent, "file")
}

pub fn read_grid_file<T: Real>(path: impl AsRef<Path>) -> Result<Field<T>> {
    read_grid_csv(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sampled() -> Field<f64> {
        let grid = Grid::new(Domain::unit(2), vec![2, 3]).unwrap();
        Field::closed(Domain::unit(2), (2, 1), 0.7, "f", |p: &[f64], out: &mut [f64]| {
            out[0] = (p[0] * 10.0).sin() / 3.0;
            out[1] = p[1].sqrt();
        })
        .unwrap()
        .sample(&grid)
        .unwrap()
    }

    #[test]
    fn round_trip_is_bitwise() {
        let f = sampled();
        let mut buf = Vec::new();
        write_grid_csv(&f, &mut buf).unwrap();
        let g: Field<f64> = read_grid_csv(&buf[..]).unwrap();
        assert_eq!(g.shape(), (2, 1));
        assert_eq!(g.exponent(), 0.7);
        assert_eq!(g.samples().unwrap().values(), f.samples().unwrap().values());
    }

    #[test]
    fn rejects_missing_rows() {
        let f = sampled();
        let mut buf = Vec::new();
        write_grid_csv(&f, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut: Vec<&str> = text.lines().collect();
        let truncated = cut[..cut.len() - 1].join("\n");
        assert!(matches!(read_grid_csv::<f64, _>(truncated.as_bytes()), Err(Error::Format(_))));
    }

    #[test]
    fn rejects_ragged_rows() {
        let text = "# dim=1\n# lower=0\n# upper=1\n# levels=0\n# shape=1,1\n0,1\n1\n";
        assert!(matches!(read_grid_csv::<f64, _>(text.as_bytes()), Err(Error::Format(_))));
    }
}
