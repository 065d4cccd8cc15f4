//! Discrete sewing.
//!
//! On a grid every 2-increment splits as `g = δf + λ` where `δf` is the
//! Riemann sum of `g` over the finest partition between the two endpoints
//! and `λ` vanishes on adjacent grid pairs. Then `δλ = δg`, so `λ` is the
//! grid version of `Λδg`.
//!
//! [`lambda_map`] computes the same object directly from a closed
//! 3-increment: `(Λh)_{t_j t_i} = Σ_{i<k<j} h_{t_{k+1} t_k t_i}`. This is the
//! unique 2-increment with `δΛh = h` that vanishes on adjacent pairs.

use rayon::prelude::*;

use super::{coboundary2, HolderReport, HolderReport3};
use super::{holder_norm2, holder_norm3_sampled, Increment2, Increment3};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct Sewn {
    /// `δf`, the finest-partition Riemann sum of `g`.
    pub path_increment: Increment2,
    /// `g − δf`.
    pub lambda_part: Increment2,
}

#[derive(Clone, Debug)]
pub struct SewReport {
    pub sewn: Sewn,
    pub delta_g: HolderReport3,
    pub lambda: HolderReport,
    /// `‖δg‖_μ / (2^μ − 2)`.
    pub bound: f64,
    /// Index stride used for the triple sup.
    pub stride: usize,
}

/// `(i, j) ↦ Σ_{j ≤ k < i} g_{k+1,k}`.
pub fn riemann_sum(g: &Increment2) -> Increment2 {
    let n = g.grid().len();
    let dim = g.dim();
    let mut out = Increment2::zeros(g.grid().clone(), dim);
    for i in 1..n {
        let step = g.get(i, i - 1).to_vec();
        for j in 0..i {
            for k in 0..dim {
                let prev = if j + 1 == i { 0.0 } else { out.get(i - 1, j)[k] };
                out.get_mut(i, j)[k] = prev + step[k];
            }
        }
    }
    out
}

fn check_mu(mu: f64) -> Result<()> {
    if mu > 1.0 && mu.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidExponent { value: mu, reason: "sewing needs an exponent above 1" })
    }
}

/// Decomposes `g = δf + Λδg`.
pub fn sew(g: &Increment2, mu: f64) -> Result<Sewn> {
    check_mu(mu)?;
    let path_increment = riemann_sum(g);
    let lambda_part = g.sub(&path_increment)?;
    Ok(Sewn { path_increment, lambda_part })
}

/// [`sew`] plus the measured norms entering the bound
/// `‖Λδg‖_μ ≤ ‖δg‖_μ / (2^μ − 2)`. Grids finer than 256 intervals are
/// sampled on a stride for the triple sup.
pub fn sew_with_report(g: &Increment2, mu: f64) -> Result<SewReport> {
    let sewn = sew(g, mu)?;
    let m = g.grid().intervals();
    let stride = m.div_ceil(256);
    let delta_g = holder_norm3_sampled(&coboundary2(g), mu, stride)?;
    if !delta_g.norm.is_finite() {
        log::warn!("δg has no finite μ = {mu} norm on this grid; the sewing bound is void");
    }
    let lambda = holder_norm2(&sewn.lambda_part, mu)?;
    let bound = delta_g.norm / (mu.exp2() - 2.0);
    Ok(SewReport { sewn, delta_g, lambda, bound, stride })
}

/// Discrete `Λ` of a closed 3-increment.
pub fn lambda_map(h: &Increment3<'_>) -> Increment2 {
    let grid = h.grid().clone();
    let n = grid.len();
    let dim = h.dim();
    let mut out = Increment2::from_fn(grid, dim, |j, i, o| {
        if i + 1 < j {
            h.eval_into(j, j - 1, i, o);
        } else {
            o.iter_mut().for_each(|v| *v = 0.0);
        }
    });
    for j in 2..n {
        let prev: Vec<f64> = out.row(j - 1).to_vec();
        let row_len = (j - 1) * dim;
        let cur = out.row_mut(j);
        cur[..row_len].par_iter_mut().zip(prev.par_iter()).for_each(|(c, p)| *c += p);
    }
    out
}
