//! Grid-sampled increments and the coboundary `δ`.
//!
//! A 2-increment stores one vector per ordered pair `(t, s) = (tᵢ, tⱼ)` with
//! `i > j`; the diagonal is implicitly zero. A 3-increment is evaluated
//! lazily on triples `i > k > j` since dense storage would be cubic.

mod holder;
mod sewing;

pub use holder::{holder_norm2, holder_norm3, holder_norm3_sampled, HolderReport, HolderReport3};
pub use sewing::{lambda_map, riemann_sum, sew, sew_with_report, SewReport, Sewn};

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Largest number of grid intervals accepted for dense 2-increment storage.
pub const MAX_GRID_INTERVALS: usize = 4096;

/// Strictly increasing sample times `t₀ < … < t_M` with `M ≥ 2`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    times: Vec<f64>,
    uniform: bool,
}

impl Grid {
    /// `M` equal intervals on `[0, t_end]`.
    pub fn uniform(t_end: f64, m: usize) -> Result<Grid> {
        Grid::uniform_on(0.0, t_end, m)
    }

    pub fn uniform_on(t_start: f64, t_end: f64, m: usize) -> Result<Grid> {
        if !(t_end > t_start) || !t_start.is_finite() || !t_end.is_finite() {
            return Err(Error::InvalidInput(format!("bad interval [{t_start}, {t_end}]")));
        }
        check_size(m)?;
        let h = (t_end - t_start) / m as f64;
        let mut times: Vec<f64> = (0..=m).map(|i| t_start + i as f64 * h).collect();
        times[m] = t_end;
        Ok(Grid { times, uniform: true })
    }

    /// `2^level` equal intervals on `[0, t_end]`.
    pub fn dyadic(t_end: f64, level: u32) -> Result<Grid> {
        Grid::uniform(t_end, 1usize << level)
    }

    pub fn from_times(times: Vec<f64>) -> Result<Grid> {
        check_size(times.len().saturating_sub(1))?;
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("grid times must be finite and strictly increasing".into()));
        }
        let h = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
        let uniform = times.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-12 * h.max(1.0));
        Ok(Grid { times, uniform })
    }

    /// Number of sample points `M + 1`.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Number of intervals `M`.
    pub fn intervals(&self) -> usize {
        self.times.len() - 1
    }

    pub fn t(&self, i: usize) -> f64 {
        self.times[i]
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    /// Largest interval length.
    pub fn mesh(&self) -> f64 {
        self.times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// Inserts all interval midpoints.
    pub fn refine(&self) -> Result<Grid> {
        let mut times = Vec::with_capacity(2 * self.len() - 1);
        for w in self.times.windows(2) {
            times.push(w[0]);
            times.push(0.5 * (w[0] + w[1]));
        }
        times.push(self.end());
        check_size(times.len() - 1)?;
        Ok(Grid { times, uniform: self.uniform })
    }

    /// Sub-grid of the points `lo..=hi`. Windows of a single interval are
    /// allowed here because they only serve as building blocks.
    pub fn window(&self, lo: usize, hi: usize) -> Result<Grid> {
        if hi <= lo || hi >= self.len() {
            return Err(Error::InvalidInput(format!("bad window {lo}..={hi}")));
        }
        Ok(Grid { times: self.times[lo..=hi].to_vec(), uniform: self.uniform })
    }
}

fn check_size(m: usize) -> Result<()> {
    if m < 2 {
        return Err(Error::InvalidInput("a grid needs at least two intervals".into()));
    }
    if m > MAX_GRID_INTERVALS {
        return Err(Error::ResourceLimit {
            what: "grid intervals",
            needed: m as u128,
            cap: MAX_GRID_INTERVALS as u128,
        });
    }
    Ok(())
}

pub(crate) fn same_grid(a: &Grid, b: &Grid) -> Result<()> {
    if std::ptr::eq(a, b) || a.times == b.times {
        Ok(())
    } else {
        Err(Error::GridMismatch(format!("{} vs {} points", a.len(), b.len())))
    }
}

/// A path sampled at the grid points, with values in `R^dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridPath {
    grid: Arc<Grid>,
    dim: usize,
    values: Vec<f64>,
}

impl GridPath {
    pub fn new(grid: Arc<Grid>, dim: usize, values: Vec<f64>) -> Result<GridPath> {
        if values.len() != grid.len() * dim {
            return Err(Error::DimensionMismatch { left: values.len(), right: grid.len() * dim });
        }
        Ok(GridPath { grid, dim, values })
    }

    pub fn zeros(grid: Arc<Grid>, dim: usize) -> GridPath {
        let n = grid.len() * dim;
        GridPath { grid, dim, values: vec![0.0; n] }
    }

    pub fn constant(grid: Arc<Grid>, value: &[f64]) -> GridPath {
        let values = value.repeat(grid.len());
        GridPath { grid, dim: value.len(), values }
    }

    pub fn from_fn(grid: Arc<Grid>, dim: usize, f: impl Fn(f64) -> Vec<f64>) -> GridPath {
        let mut values = Vec::with_capacity(grid.len() * dim);
        for &t in grid.times() {
            let v = f(t);
            assert_eq!(v.len(), dim, "path callback returned the wrong dimension");
            values.extend(v);
        }
        GridPath { grid, dim, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn at(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn at_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn component(&self, k: usize) -> Vec<f64> {
        (0..self.grid.len()).map(|i| self.values[i * self.dim + k]).collect()
    }

    pub fn scale(&self, c: f64) -> GridPath {
        GridPath { grid: self.grid.clone(), dim: self.dim, values: self.values.iter().map(|v| c * v).collect() }
    }

    pub fn add(&self, other: &GridPath) -> Result<GridPath> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridPath) -> Result<GridPath> {
        self.zip(other, |a, b| a - b)
    }

    fn zip(&self, other: &GridPath, op: impl Fn(f64, f64) -> f64) -> Result<GridPath> {
        same_grid(&self.grid, &other.grid)?;
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { left: self.dim, right: other.dim });
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| op(*a, *b)).collect();
        Ok(GridPath { grid: self.grid.clone(), dim: self.dim, values })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Dense 2-increment over the ordered grid pairs `i > j`.
#[derive(Clone, Debug, PartialEq)]
pub struct Increment2 {
    grid: Arc<Grid>,
    dim: usize,
    data: Vec<f64>,
}

#[inline]
fn pair_offset(i: usize, j: usize) -> usize {
    i * (i - 1) / 2 + j
}

impl Increment2 {
    pub fn zeros(grid: Arc<Grid>, dim: usize) -> Increment2 {
        let n = grid.len();
        Increment2 { grid, dim, data: vec![0.0; n * (n - 1) / 2 * dim] }
    }

    /// The unit `e`, equal to one on every off-diagonal pair.
    pub fn ones(grid: Arc<Grid>, dim: usize) -> Increment2 {
        let mut e = Increment2::zeros(grid, dim);
        e.data.iter_mut().for_each(|v| *v = 1.0);
        e
    }

    /// Fills every pair `(i, j)`, `i > j`, from a callback. Rows are computed
    /// in parallel.
    pub fn from_fn<F>(grid: Arc<Grid>, dim: usize, f: F) -> Increment2
    where
        F: Fn(usize, usize, &mut [f64]) + Sync,
    {
        let n = grid.len();
        let mut data = vec![0.0; n * (n - 1) / 2 * dim];
        let rows = split_rows(&mut data, n, dim);
        rows.into_par_iter().for_each(|(i, row)| {
            for j in 0..i {
                f(i, j, &mut row[j * dim..(j + 1) * dim]);
            }
        });
        Increment2 { grid, dim, data }
    }

    pub fn from_fn_scalar<F>(grid: Arc<Grid>, f: F) -> Increment2
    where
        F: Fn(usize, usize) -> f64 + Sync,
    {
        Increment2::from_fn(grid, 1, |i, j, out| out[0] = f(i, j))
    }

    /// Builds a 2-increment from a function of the two times.
    pub fn from_times_fn<F>(grid: Arc<Grid>, dim: usize, f: F) -> Increment2
    where
        F: Fn(f64, f64, &mut [f64]) + Sync,
    {
        let g = grid.clone();
        Increment2::from_fn(grid, dim, move |i, j, out| f(g.t(i), g.t(j), out))
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Value at `(i, j)` with `i > j`.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> &[f64] {
        debug_assert!(i > j);
        let o = pair_offset(i, j) * self.dim;
        &self.data[o..o + self.dim]
    }

    #[inline]
    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        debug_assert!(i > j);
        let o = pair_offset(i, j) * self.dim;
        &mut self.data[o..o + self.dim]
    }

    /// Component `k` at `(i, j)`; zero on the diagonal.
    #[inline]
    pub fn value(&self, i: usize, j: usize, k: usize) -> f64 {
        if i == j {
            0.0
        } else {
            self.data[pair_offset(i, j) * self.dim + k]
        }
    }

    /// Scalar value at `(i, j)`; zero on the diagonal.
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.value(i, j, 0)
    }

    /// All values of row `i` (pairs `(i, 0..i)`), flattened.
    pub fn row(&self, i: usize) -> &[f64] {
        let o = pair_offset(i.max(1), 0) * self.dim;
        &self.data[o..o + i * self.dim]
    }

    pub(crate) fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let o = pair_offset(i.max(1), 0) * self.dim;
        &mut self.data[o..o + i * self.dim]
    }

    pub fn raw(&self) -> &[f64] {
        &self.data
    }

    pub fn component(&self, k: usize) -> Increment2 {
        let data = self.data.chunks(self.dim).map(|c| c[k]).collect();
        Increment2 { grid: self.grid.clone(), dim: 1, data }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync) -> Increment2 {
        Increment2 { grid: self.grid.clone(), dim: self.dim, data: self.data.par_iter().map(|v| f(*v)).collect() }
    }

    pub fn scale(&self, c: f64) -> Increment2 {
        self.map(|v| c * v)
    }

    pub fn add(&self, other: &Increment2) -> Result<Increment2> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Increment2) -> Result<Increment2> {
        self.zip(other, |a, b| a - b)
    }

    /// `self += c·other`.
    pub fn axpy(&mut self, c: f64, other: &Increment2) -> Result<()> {
        self.check_same(other)?;
        self.data.par_iter_mut().zip(other.data.par_iter()).for_each(|(a, b)| *a += c * b);
        Ok(())
    }

    fn check_same(&self, other: &Increment2) -> Result<()> {
        same_grid(&self.grid, &other.grid)?;
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { left: self.dim, right: other.dim });
        }
        Ok(())
    }

    fn zip(&self, other: &Increment2, op: impl Fn(f64, f64) -> f64 + Sync) -> Result<Increment2> {
        self.check_same(other)?;
        let data = self.data.par_iter().zip(other.data.par_iter()).map(|(a, b)| op(*a, *b)).collect();
        Ok(Increment2 { grid: self.grid.clone(), dim: self.dim, data })
    }

    /// Pointwise product `(a∘b)_{ts} = a_{ts} b_{ts}`; a scalar factor is
    /// broadcast over the other's components.
    pub fn circle(&self, other: &Increment2) -> Result<Increment2> {
        same_grid(&self.grid, &other.grid)?;
        let dim = broadcast_dim(self.dim, other.dim)?;
        let (a, b) = (self, other);
        Ok(Increment2::from_fn(self.grid.clone(), dim, |i, j, out| {
            let (x, y) = (a.get(i, j), b.get(i, j));
            for (k, o) in out.iter_mut().enumerate() {
                *o = x[k % a.dim] * y[k % b.dim];
            }
        }))
    }

    /// `(f h)_{ts} = f_t h_{ts}` for a path `f`.
    pub fn left_path_mul(&self, f: &GridPath) -> Result<Increment2> {
        self.path_mul(f, true)
    }

    /// `(h f)_{ts} = h_{ts} f_s` for a path `f`.
    pub fn right_path_mul(&self, f: &GridPath) -> Result<Increment2> {
        self.path_mul(f, false)
    }

    fn path_mul(&self, f: &GridPath, left: bool) -> Result<Increment2> {
        same_grid(&self.grid, f.grid())?;
        let dim = broadcast_dim(self.dim, f.dim())?;
        Ok(Increment2::from_fn(self.grid.clone(), dim, |i, j, out| {
            let h = self.get(i, j);
            let p = f.at(if left { i } else { j });
            for (k, o) in out.iter_mut().enumerate() {
                *o = h[k % self.dim] * p[k % f.dim()];
            }
        }))
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.par_iter().map(|v| v.abs()).reduce(|| 0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Increment2) -> Result<f64> {
        self.check_same(other)?;
        Ok(self.data.par_iter().zip(other.data.par_iter()).map(|(a, b)| (a - b).abs()).reduce(|| 0.0, f64::max))
    }

    /// `max |self − other| / max |other|` (absolute when `other` vanishes).
    pub fn sup_relative_diff(&self, reference: &Increment2) -> Result<f64> {
        let d = self.max_abs_diff(reference)?;
        let s = reference.max_abs();
        Ok(if s > 0.0 { d / s } else { d })
    }
}

fn broadcast_dim(a: usize, b: usize) -> Result<usize> {
    if a == b || b == 1 {
        Ok(a)
    } else if a == 1 {
        Ok(b)
    } else {
        Err(Error::DimensionMismatch { left: a, right: b })
    }
}

fn split_rows(data: &mut [f64], n: usize, dim: usize) -> Vec<(usize, &mut [f64])> {
    let mut rows = Vec::with_capacity(n);
    let mut rest = data;
    for i in 1..n {
        let (row, tail) = rest.split_at_mut(i * dim);
        rows.push((i, row));
        rest = tail;
    }
    rows
}

type Eval3<'a> = Box<dyn Fn(usize, usize, usize, &mut [f64]) + Send + Sync + 'a>;

/// Lazily evaluated 3-increment on triples `t > u > s` (grid indices).
pub struct Increment3<'a> {
    grid: Arc<Grid>,
    dim: usize,
    eval: Eval3<'a>,
}

impl<'a> Increment3<'a> {
    pub fn new<F>(grid: Arc<Grid>, dim: usize, f: F) -> Self
    where
        F: Fn(usize, usize, usize, &mut [f64]) + Send + Sync + 'a,
    {
        Increment3 { grid, dim, eval: Box::new(f) }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Writes `h_{tus}` into `out`.
    #[inline]
    pub fn eval_into(&self, t: usize, u: usize, s: usize, out: &mut [f64]) {
        (self.eval)(t, u, s, out)
    }

    pub fn eval(&self, t: usize, u: usize, s: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, u, s, &mut out);
        out
    }

    /// Scalar value (first component).
    pub fn at(&self, t: usize, u: usize, s: usize) -> f64 {
        self.eval(t, u, s)[0]
    }

    /// `self + c·other`.
    pub fn add_scaled(self, c: f64, other: Increment3<'a>) -> Result<Increment3<'a>> {
        same_grid(&self.grid, &other.grid)?;
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { left: self.dim, right: other.dim });
        }
        let dim = self.dim;
        Ok(Increment3::new(self.grid.clone(), dim, move |t, u, s, out| {
            let mut tmp = vec![0.0; dim];
            self.eval_into(t, u, s, out);
            other.eval_into(t, u, s, &mut tmp);
            for (o, v) in out.iter_mut().zip(tmp) {
                *o += c * v;
            }
        }))
    }

    /// Largest absolute component over triples with indices on a stride
    /// (stride 1 visits every triple).
    pub fn max_abs(&self, stride: usize) -> f64 {
        let idx = strided_indices(self.grid.len(), stride);
        let dim = self.dim;
        idx.par_iter()
            .enumerate()
            .map(|(a, &t)| {
                let mut buf = vec![0.0; dim];
                let mut m = 0.0f64;
                for (b, &u) in idx[..a].iter().enumerate() {
                    for &s in &idx[..b] {
                        self.eval_into(t, u, s, &mut buf);
                        m = buf.iter().fold(m, |m, v| m.max(v.abs()));
                    }
                }
                m
            })
            .reduce(|| 0.0, f64::max)
    }
}

/// Grid indices `0, stride, 2·stride, …` plus the last index.
pub fn strided_indices(n: usize, stride: usize) -> Vec<usize> {
    let stride = stride.max(1);
    let mut idx: Vec<usize> = (0..n).step_by(stride).collect();
    if *idx.last().unwrap() != n - 1 {
        idx.push(n - 1);
    }
    idx
}

/// `(δf)_{ts} = f_t − f_s`.
pub fn coboundary1(f: &GridPath) -> Increment2 {
    let dim = f.dim();
    Increment2::from_fn(f.grid().clone(), dim, |i, j, out| {
        for ((o, a), b) in out.iter_mut().zip(f.at(i)).zip(f.at(j)) {
            *o = a - b;
        }
    })
}

/// `(δg)_{tus} = g_{ts} − g_{tu} − g_{us}`.
pub fn coboundary2(g: &Increment2) -> Increment3<'_> {
    Increment3::new(g.grid().clone(), g.dim(), move |t, u, s, out| {
        let (ts, tu, us) = (g.get(t, s), g.get(t, u), g.get(u, s));
        for k in 0..out.len() {
            out[k] = ts[k] - tu[k] - us[k];
        }
    })
}

/// `(gh)_{tus} = g_{tu} h_{us}`; scalar factors broadcast.
pub fn exterior_product<'a>(g: &'a Increment2, h: &'a Increment2) -> Result<Increment3<'a>> {
    same_grid(g.grid(), h.grid())?;
    let dim = broadcast_dim(g.dim(), h.dim())?;
    Ok(Increment3::new(g.grid().clone(), dim, move |t, u, s, out| {
        let (a, b) = (g.get(t, u), h.get(u, s));
        for (k, o) in out.iter_mut().enumerate() {
            *o = a[k % g.dim()] * b[k % h.dim()];
        }
    }))
}
