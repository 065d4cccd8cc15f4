use rayon::prelude::*;

use super::{strided_indices, Increment2, Increment3};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct HolderReport {
    pub mu: f64,
    pub norm: f64,
    /// Pair `(t, s)` of grid indices attaining the sup, if any value is
    /// nonzero.
    pub argmax: Option<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HolderReport3 {
    pub mu: f64,
    pub norm: f64,
    /// Split exponent `ρ` of the winning `‖h‖_{ρ, μ−ρ}` term.
    pub rho: f64,
    /// Triple `(t, u, s)` attaining the sup for that `ρ`.
    pub argmax: Option<(usize, usize, usize)>,
}

fn check_mu(mu: f64) -> Result<()> {
    if mu > 0.0 && mu.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidExponent { value: mu, reason: "Hölder exponent must be positive" })
    }
}

fn euclid(v: &[f64]) -> f64 {
    if v.len() == 1 {
        v[0].abs()
    } else {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

// Deterministic maximum: larger value wins, ties go to the smaller witness.
fn better<W: Ord + Copy>(a: (f64, Option<W>), b: (f64, Option<W>)) -> (f64, Option<W>) {
    if b.0 > a.0 || (b.0 == a.0 && b.1.is_some() && (a.1.is_none() || b.1 < a.1)) {
        b
    } else {
        a
    }
}

/// `sup |g_{ts}| / (t−s)^μ` over grid pairs, Euclidean norm on values.
pub fn holder_norm2(g: &Increment2, mu: f64) -> Result<HolderReport> {
    check_mu(mu)?;
    let grid = g.grid();
    let (norm, argmax) = (1..grid.len())
        .into_par_iter()
        .map(|i| {
            let mut best: (f64, Option<(usize, usize)>) = (0.0, None);
            for j in 0..i {
                let v = euclid(g.get(i, j));
                if v > 0.0 {
                    let r = v / (grid.t(i) - grid.t(j)).powf(mu);
                    best = better(best, (r, Some((i, j))));
                }
            }
            best
        })
        .reduce(|| (0.0, None), better);
    Ok(HolderReport { mu, norm, argmax })
}

/// Surrogate 3-increment norm: the minimum over `ρ ∈ {μ/8, …, 7μ/8}` of
/// `sup |h_{tus}| / (|u−s|^ρ |t−u|^{μ−ρ})`, over all grid triples.
pub fn holder_norm3(h: &Increment3<'_>, mu: f64) -> Result<HolderReport3> {
    holder_norm3_sampled(h, mu, 1)
}

/// As [`holder_norm3`] but only over triples of grid indices on a stride
/// (plus the last point). Gives a lower estimate of the full-grid value and
/// keeps the cubic cost manageable on fine grids.
pub fn holder_norm3_sampled(h: &Increment3<'_>, mu: f64, stride: usize) -> Result<HolderReport3> {
    check_mu(mu)?;
    const SPLITS: usize = 7;
    let rhos: Vec<f64> = (1..=SPLITS).map(|k| k as f64 * mu / 8.0).collect();
    let grid = h.grid();
    let idx = strided_indices(grid.len(), stride);
    let logt: Vec<f64> = idx.iter().map(|&i| grid.t(i)).collect();
    type Best = Vec<(f64, Option<(usize, usize, usize)>)>;
    let merge = |a: Best, b: Best| -> Best { a.into_iter().zip(b).map(|(x, y)| better(x, y)).collect() };
    let best: Best = (2..idx.len())
        .into_par_iter()
        .map(|a| {
            let mut buf = vec![0.0; h.dim()];
            let mut best: Best = vec![(f64::NEG_INFINITY, None); SPLITS];
            let t = idx[a];
            for b in 1..a {
                let u = idx[b];
                let l2 = (logt[a] - logt[b]).ln();
                for c in 0..b {
                    let s = idx[c];
                    h.eval_into(t, u, s, &mut buf);
                    let v = euclid(&buf);
                    if v == 0.0 {
                        continue;
                    }
                    let lv = v.ln();
                    let l1 = (logt[b] - logt[c]).ln();
                    for (k, &rho) in rhos.iter().enumerate() {
                        let score = lv - rho * l1 - (mu - rho) * l2;
                        best[k] = better(best[k], (score, Some((t, u, s))));
                    }
                }
            }
            best
        })
        .reduce(|| vec![(f64::NEG_INFINITY, None); SPLITS], merge);
    let (k, &(score, argmax)) = best
        .iter()
        .enumerate()
        .min_by(|x, y| x.1 .0.partial_cmp(&y.1 .0).unwrap_or(std::cmp::Ordering::Equal))
        .expect("nonempty exponent grid");
    let norm = if argmax.is_none() { 0.0 } else { score.exp() };
    Ok(HolderReport3 { mu, norm, rho: rhos[k], argmax })
}
