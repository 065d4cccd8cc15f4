//! Text formats: CSV bodies with JSON headers.
//!
//! * Paths: a `t,x0,x1,…` header row, then one row per grid point.
//! * 2-increments: rows `i,j,v0,v1,…` for `i > j`, plus a JSON sidecar
//!   with the grid, dimension and optional Hölder exponent.
//! * Branched rough paths: one JSON header line, then for every tree a line
//!   `@tree <tree json>` followed by `i,j,value` rows.
//!
//! Floats are written in shortest round-trip form. Lines starting with `#`
//! are comments on read.

use std::collections::BTreeMap;
use std::io::{BufRead, Read, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::brp::BranchedRoughPath;
use crate::error::{Error, Result};
use crate::forest::Tree;
use crate::increments::{Grid, GridPath, Increment2};

pub const SCHEMA_VERSION: u32 = 1;

/// Shortest round-trip text for `v`; exponent form outside `[1e-4, 1e15)`.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Parse(format!("line {line}: {s:?} is not a number")))
}

fn parse_usize(s: &str, line: usize) -> Result<usize> {
    s.trim().parse().map_err(|_| Error::Parse(format!("line {line}: {s:?} is not an index")))
}

fn join(vals: impl IntoIterator<Item = f64>) -> String {
    vals.into_iter().map(fmt_f64).collect::<Vec<_>>().join(",")
}

fn check_schema(v: u32) -> Result<()> {
    if v != SCHEMA_VERSION {
        return Err(Error::Parse(format!("schema version {v} is not supported (expected {SCHEMA_VERSION})")));
    }
    Ok(())
}

pub fn write_path_csv<W: Write + ?Sized>(p: &GridPath, w: &mut W) -> Result<()> {
    let cols: Vec<String> = (0..p.dim()).map(|k| format!("x{k}")).collect();
    writeln!(w, "t,{}", cols.join(","))?;
    for i in 0..p.grid().len() {
        writeln!(w, "{},{}", fmt_f64(p.grid().t(i)), join(p.at(i).iter().copied()))?;
    }
    Ok(())
}

/// Reads a path written by [`write_path_csv`]. A first row that does not
/// start with a number is taken as a header; `#` lines are skipped.
pub fn read_path_csv(r: impl BufRead) -> Result<GridPath> {
    let mut times = Vec::new();
    let mut vals = Vec::new();
    let mut dim = None;
    for (ln, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if times.is_empty() && dim.is_none() && fields[0].trim().parse::<f64>().is_err() {
            dim = Some(fields.len() - 1);
            continue;
        }
        let k = fields.len() - 1;
        if *dim.get_or_insert(k) != k || k == 0 {
            return Err(Error::Parse(format!("line {}: expected {} values", ln + 1, dim.unwrap_or(1))));
        }
        times.push(parse_f64(fields[0], ln + 1)?);
        for f in &fields[1..] {
            vals.push(parse_f64(f, ln + 1)?);
        }
    }
    let grid = Arc::new(Grid::from_times(times)?);
    GridPath::new(grid, dim.unwrap_or(1), vals)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncrementHeader {
    pub schema_version: u32,
    pub grid: Vec<f64>,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
}

/// Writes `g` as CSV rows to `csv` and its header to `sidecar`.
pub fn write_increment<W: Write + ?Sized, S: Write + ?Sized>(
    g: &Increment2,
    mu: Option<f64>,
    csv: &mut W,
    sidecar: &mut S,
) -> Result<()> {
    let header = IncrementHeader { schema_version: SCHEMA_VERSION, grid: g.grid().times().to_vec(), dim: g.dim(), mu };
    writeln!(sidecar, "{}", serde_json::to_string_pretty(&header)?)?;
    write_increment_rows(g, csv)
}

fn write_increment_rows<W: Write + ?Sized>(g: &Increment2, w: &mut W) -> Result<()> {
    for i in 1..g.grid().len() {
        for j in 0..i {
            writeln!(w, "{i},{j},{}", join(g.get(i, j).iter().copied()))?;
        }
    }
    Ok(())
}

/// Reads rows `i,j,v…` into a zero-initialised 2-increment; rows may come
/// in any order and missing pairs stay zero.
fn read_increment_rows<'a>(
    lines: impl Iterator<Item = (usize, &'a str)>,
    grid: Arc<Grid>,
    dim: usize,
) -> Result<Increment2> {
    let n = grid.len();
    let mut g = Increment2::zeros(grid, dim);
    for (ln, line) in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim + 2 {
            return Err(Error::Parse(format!("line {ln}: expected {} fields, found {}", dim + 2, fields.len())));
        }
        let i = parse_usize(fields[0], ln)?;
        let j = parse_usize(fields[1], ln)?;
        if i >= n || j >= i {
            return Err(Error::Parse(format!("line {ln}: pair ({i}, {j}) is not an ordered grid pair")));
        }
        for (o, f) in g.get_mut(i, j).iter_mut().zip(&fields[2..]) {
            *o = parse_f64(f, ln)?;
        }
    }
    Ok(g)
}

/// Reads an increment and its sidecar; returns the exponent stored there.
pub fn read_increment(csv: impl BufRead, sidecar: impl Read) -> Result<(Increment2, Option<f64>)> {
    let header: IncrementHeader = serde_json::from_reader(sidecar)?;
    check_schema(header.schema_version)?;
    let grid = Arc::new(Grid::from_times(header.grid)?);
    let lines: Vec<String> = csv.lines().collect::<std::io::Result<_>>()?;
    let body =
        lines.iter().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    Ok((read_increment_rows(body, grid, header.dim)?, header.mu))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrpHeader {
    pub schema_version: u32,
    pub gamma: f64,
    pub grid: Vec<f64>,
    pub d: usize,
    pub level: usize,
}

pub fn write_brp<W: Write + ?Sized>(x: &BranchedRoughPath, w: &mut W) -> Result<()> {
    let header = BrpHeader {
        schema_version: SCHEMA_VERSION,
        gamma: x.gamma(),
        grid: x.grid().times().to_vec(),
        d: x.alphabet(),
        level: x.level(),
    };
    writeln!(w, "{}", serde_json::to_string(&header)?)?;
    for (t, v) in x.iter() {
        writeln!(w, "@tree {}", serde_json::to_string(t)?)?;
        write_increment_rows(v, w)?;
    }
    Ok(())
}

pub fn read_brp(r: impl BufRead) -> Result<BranchedRoughPath> {
    let lines: Vec<String> = r.lines().collect::<std::io::Result<_>>()?;
    let mut it =
        lines.iter().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (_, first) = it.next().ok_or_else(|| Error::Parse("empty rough path file".into()))?;
    let header: BrpHeader = serde_json::from_str(first)?;
    check_schema(header.schema_version)?;
    let grid = Arc::new(Grid::from_times(header.grid)?);
    let mut blocks: Vec<(Tree, Vec<(usize, &str)>)> = Vec::new();
    for (ln, line) in it {
        if let Some(rest) = line.strip_prefix("@tree") {
            let t: Tree = serde_json::from_str(rest.trim()).map_err(|e| Error::Parse(format!("line {ln}: {e}")))?;
            blocks.push((t, Vec::new()));
        } else {
            let block =
                blocks.last_mut().ok_or_else(|| Error::Parse(format!("line {ln}: values before any @tree line")))?;
            block.1.push((ln, line));
        }
    }
    let mut map = BTreeMap::new();
    for (t, rows) in blocks {
        let v = read_increment_rows(rows.into_iter(), grid.clone(), 1)?;
        if map.insert(t.clone(), v).is_some() {
            return Err(Error::Parse(format!("tree {t} appears twice")));
        }
    }
    BranchedRoughPath::from_trees(header.gamma, header.d, grid, header.level, map)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_text_round_trips() {
        for v in [0.0, 1.0, -0.1, 1e-7, 123456.789, 1e300, -2.5e-12, 1.0 / 3.0] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(0.5), "0.5");
        assert_eq!(fmt_f64(1e-7), "1e-7");
    }

    #[test]
    fn path_csv_round_trip() {
        let grid = Arc::new(Grid::uniform(1.0, 5).unwrap());
        let p = GridPath::from_fn(grid, 2, |t| vec![t.sin(), t * t]);
        let mut buf = Vec::new();
        write_path_csv(&p, &mut buf).unwrap();
        let q = read_path_csv(buf.as_slice()).unwrap();
        assert_eq!(p.values(), q.values());
        assert_eq!(p.grid().times(), q.grid().times());
    }
}
