//! CSV and binary path containers.
//!
//! Binary layout (little endian): magic `FBMLPATH`, version `u32`, model
//! kind `u32`, `H: f64`, `d: u32`, `seed: u64`, points per path `n: u64`,
//! horizon `T: f64`, path count `u64`, then the `n` times, then each path's
//! `n·d` values in row-major order.

use std::io::{BufRead, Read, Write};

use super::{CovKind, CovModel, GridPath};
use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::report::format_float;

const MAGIC: &[u8; 8] = b"FBMLPATH";
const VERSION: u32 = 1;

fn csv_header(dim: usize, with_replica: bool) -> String {
    let mut cols: Vec<String> = Vec::with_capacity(dim + 2);
    if with_replica {
        cols.push("replica".into());
    }
    cols.push("t".into());
    cols.extend((1..=dim).map(|k| format!("x_{k}")));
    cols.join(",")
}

/// One path with columns `t, x_1..x_d`.
pub fn write_csv<W: Write>(mut w: W, path: &GridPath) -> Result<()> {
    writeln!(w, "{}", csv_header(path.dim, false))?;
    for i in 0..path.len() {
        let mut line = format_float(path.times[i]);
        for x in path.point(i) {
            line.push(',');
            line.push_str(&format_float(*x));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Several paths, with a leading `replica` column.
pub fn write_csv_many<W: Write>(mut w: W, paths: &[GridPath]) -> Result<()> {
    let Some(first) = paths.first() else {
        return Ok(());
    };
    writeln!(w, "{}", csv_header(first.dim, true))?;
    for (r, path) in paths.iter().enumerate() {
        for i in 0..path.len() {
            let mut line = format!("{r},{}", format_float(path.times[i]));
            for x in path.point(i) {
                line.push(',');
                line.push_str(&format_float(*x));
            }
            writeln!(w, "{line}")?;
        }
    }
    Ok(())
}

/// Reads either CSV layout. The file carries no model, so the caller
/// supplies it.
pub fn read_csv<R: BufRead>(r: R, model: CovModel, seed: u64) -> Result<Vec<GridPath>> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty CSV".into()))??;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let with_replica = cols.first() == Some(&"replica");
    let offset = usize::from(with_replica);
    if cols.get(offset) != Some(&"t") {
        return Err(Error::Format("missing t column".into()));
    }
    let dim = cols.len() - offset - 1;
    if dim == 0 {
        return Err(Error::Format("no coordinate columns".into()));
    }
    let mut groups: Vec<(i64, Vec<f64>, Vec<f64>)> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != cols.len() {
            return Err(Error::Format(format!(
                "line {} has {} fields",
                lineno + 2,
                fields.len()
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| Error::Format(format!("line {}: {e}", lineno + 2)))
        };
        let rep = if with_replica {
            fields[0]
                .parse::<i64>()
                .map_err(|e| Error::Format(format!("line {}: {e}", lineno + 2)))?
        } else {
            0
        };
        if groups.last().map(|g| g.0) != Some(rep) {
            groups.push((rep, Vec::new(), Vec::new()));
        }
        let g = groups.last_mut().expect("group exists");
        g.1.push(parse(fields[offset])?);
        for f in &fields[offset + 1..] {
            g.2.push(parse(f)?);
        }
    }
    groups
        .into_iter()
        .map(|(_, times, values)| GridPath::new(times, values, dim, model, seed))
        .collect()
}

/// Writes paths sharing one grid and model.
pub fn write_binary<W: Write>(mut w: W, paths: &[GridPath]) -> Result<()> {
    let Some(first) = paths.first() else {
        return Err(Error::Format("no paths to write".into()));
    };
    if paths
        .iter()
        .any(|p| p.times != first.times || p.dim != first.dim || p.model != first.model)
    {
        return Err(Error::Format(
            "paths must share grid, dimension and model".into(),
        ));
    }
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&first.model.kind.code().to_le_bytes())?;
    w.write_all(&first.model.params.h.to_le_bytes())?;
    w.write_all(&(first.dim as u32).to_le_bytes())?;
    w.write_all(&first.seed.to_le_bytes())?;
    w.write_all(&(first.len() as u64).to_le_bytes())?;
    w.write_all(&first.horizon().to_le_bytes())?;
    w.write_all(&(paths.len() as u64).to_le_bytes())?;
    for t in &first.times {
        w.write_all(&t.to_le_bytes())?;
    }
    for p in paths {
        for x in &p.values {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

fn take<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)?;
    Ok(b)
}

pub fn read_binary<R: Read>(mut r: R) -> Result<Vec<GridPath>> {
    if &take::<8, _>(&mut r)? != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = u32::from_le_bytes(take(&mut r)?);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let kind = CovKind::from_code(u32::from_le_bytes(take(&mut r)?))
        .ok_or_else(|| Error::Format("unknown model kind".into()))?;
    let h = f64::from_le_bytes(take(&mut r)?);
    let d = u32::from_le_bytes(take(&mut r)?) as usize;
    let seed = u64::from_le_bytes(take(&mut r)?);
    let n = u64::from_le_bytes(take(&mut r)?) as usize;
    let horizon = f64::from_le_bytes(take(&mut r)?);
    let count = u64::from_le_bytes(take(&mut r)?) as usize;
    let model = CovModel {
        kind,
        params: ModelParams::new(h, d),
    };
    let mut times = Vec::with_capacity(n);
    for _ in 0..n {
        times.push(f64::from_le_bytes(take(&mut r)?));
    }
    if times.last().copied() != Some(horizon) {
        return Err(Error::Format("horizon does not match the time grid".into()));
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut values = Vec::with_capacity(n * d);
        for _ in 0..n * d {
            values.push(f64::from_le_bytes(take(&mut r)?));
        }
        out.push(GridPath::new(times.clone(), values, d, model, seed)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process_sim::{sample_paths, uniform_grid};

    fn paths() -> Vec<GridPath> {
        let m = CovModel::fbm(0.3, 2).unwrap();
        sample_paths(&m, &uniform_grid(8, 2.0), 5, 3).unwrap()
    }

    #[test]
    fn binary_round_trip() {
        let ps = paths();
        let mut buf = Vec::new();
        write_binary(&mut buf, &ps).unwrap();
        assert_eq!(&buf[..8], b"FBMLPATH");
        let back = read_binary(&buf[..]).unwrap();
        assert_eq!(back, ps);
    }

    #[test]
    fn csv_round_trip() {
        let ps = paths();
        let model = ps[0].model;
        let mut one = Vec::new();
        write_csv(&mut one, &ps[0]).unwrap();
        let text = String::from_utf8(one.clone()).unwrap();
        assert!(text.starts_with("t,x_1,x_2\n"));
        let back = read_csv(&one[..], model, 5).unwrap();
        assert_eq!(back, vec![ps[0].clone()]);

        let mut many = Vec::new();
        write_csv_many(&mut many, &ps).unwrap();
        let back = read_csv(&many[..], model, 5).unwrap();
        assert_eq!(back, ps);
    }

    #[test]
    fn truncated_binary_fails() {
        let ps = paths();
        let mut buf = Vec::new();
        write_binary(&mut buf, &ps).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(read_binary(&buf[..]).is_err());
    }
}
