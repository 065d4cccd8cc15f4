use std::sync::Arc;

use super::{
    compose_smooth, controlled_norm_with_coefficients, rough_integrate, ControlledPath, Layout, VectorFieldFamily,
};
use crate::brp::BranchedRoughPath;
use crate::error::{Error, Result};
use crate::increments::{GridPath, Increment2};

#[derive(Clone, Debug)]
pub struct RdeOptions {
    /// Convergence threshold on the distance of successive iterates, see
    /// [`controlled_norm_with_coefficients`](super::controlled_norm_with_coefficients).
    pub tol: f64,
    /// Iteration cap per window.
    pub max_iter: usize,
    /// How many times the window length may be halved in total.
    pub max_splits: usize,
    /// Require derivatives of order `n+1` instead of `n`.
    pub uniqueness: bool,
}

impl Default for RdeOptions {
    fn default() -> Self {
        RdeOptions { tol: 1e-10, max_iter: 100, max_splits: 12, uniqueness: false }
    }
}

#[derive(Clone, Debug)]
pub struct WindowReport {
    /// Grid indices of the window ends.
    pub lo: usize,
    pub hi: usize,
    pub iterations: usize,
    /// `‖y_{k+1} − y_k‖` per iteration.
    pub differences: Vec<f64>,
    /// Ratios of successive differences.
    pub ratios: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct RdeSolution {
    pub path: ControlledPath,
    pub windows: Vec<WindowReport>,
    pub splits: usize,
}

enum Outcome {
    Converged(ControlledPath, WindowReport),
    Diverging,
    Capped,
}

fn picard_map(f: &VectorFieldFamily, eta: &[f64], y: &ControlledPath) -> Result<ControlledPath> {
    let x = y.rough().clone();
    let mut acc: Option<ControlledPath> = None;
    let mut shared: Option<ControlledPath> = None;
    for a in 0..f.len() {
        let fy = if f.all_equal() {
            if shared.is_none() {
                shared = Some(compose_smooth(f.field(a).as_ref(), y)?);
            }
            shared.clone().expect("just set")
        } else {
            compose_smooth(f.field(a).as_ref(), y)?
        };
        let z = rough_integrate(&x, a, &fy)?;
        acc = Some(match acc {
            None => z,
            Some(s) => s.add(&z)?,
        });
    }
    acc.expect("at least one field").add_constant(eta)
}

fn picard(
    f: &VectorFieldFamily,
    x: Arc<BranchedRoughPath>,
    layout: Arc<Layout>,
    eta: &[f64],
    lo: usize,
    hi: usize,
    opts: &RdeOptions,
) -> Result<Outcome> {
    let base = GridPath::constant(x.grid().clone(), eta);
    let k = eta.len();
    let zeros = vec![GridPath::zeros(x.grid().clone(), k); layout.forests().len()];
    let gamma = x.gamma();
    let n = layout.n;
    let mut y = ControlledPath::from_coeffs(x, layout, gamma, base, zeros);
    let mut differences = Vec::new();
    let mut ratios = Vec::new();
    for iter in 1..=opts.max_iter {
        let next = picard_map(f, eta, &y)?;
        let diff = controlled_norm_with_coefficients(&next.sub(&y)?)?;
        if let Some(&prev) = differences.last() {
            ratios.push(if prev > 0.0 { diff / prev } else { 0.0 });
        }
        differences.push(diff);
        y = next;
        log::debug!("window [{lo}, {hi}] iteration {iter}: difference {diff:e}");
        if diff < opts.tol {
            let report = WindowReport { lo, hi, iterations: iter, differences, ratios };
            return Ok(Outcome::Converged(y, report));
        }
        // Iteration k settles the coefficients of degree < k at the window
        // start, so differences need not shrink before that.
        if iter > n + 1 && ratios.last().is_some_and(|&r| r >= 1.0) {
            return Ok(Outcome::Diverging);
        }
    }
    Ok(Outcome::Capped)
}

/// Solves `dy = Σ_a f_a(y) dX^a`, `y₀ = η`, by Picard iteration of
/// `Γ(y) = η + Σ_a I^a(f_a(y))` with `κ = γ`.
///
/// Iteration starts on the whole grid. When successive differences stop
/// shrinking, or the iteration cap is hit, the window length is halved;
/// solved windows are chained, each starting from the end value of the
/// previous one.
pub fn solve_rde(
    f: &VectorFieldFamily,
    x: Arc<BranchedRoughPath>,
    eta: &[f64],
    opts: &RdeOptions,
) -> Result<RdeSolution> {
    if f.len() != x.alphabet() {
        return Err(Error::DimensionMismatch { left: f.len(), right: x.alphabet() });
    }
    if eta.len() != f.dim() {
        return Err(Error::DimensionMismatch { left: eta.len(), right: f.dim() });
    }
    let layout = Arc::new(Layout::new(&x)?);
    let need = layout.n + usize::from(opts.uniqueness);
    if f.max_order() < need {
        return Err(Error::MissingDerivative { order: need });
    }
    let m = x.grid().intervals();
    let mut len = m;
    let mut lo = 0;
    let mut start = eta.to_vec();
    let mut splits = 0;
    let mut pieces: Vec<(ControlledPath, WindowReport)> = Vec::new();
    while lo < m {
        let mut hi = (lo + len).min(m);
        if m - hi == 1 {
            hi = m;
        }
        let sub = Arc::new(x.window(lo, hi)?);
        match picard(f, sub, layout.clone(), &start, lo, hi, opts)? {
            Outcome::Converged(y, report) => {
                start = y.base().at(hi - lo).to_vec();
                pieces.push((y, report));
                lo = hi;
            }
            outcome => {
                splits += 1;
                if splits > opts.max_splits || len < 4 {
                    let grid = x.grid();
                    return Err(match outcome {
                        Outcome::Capped => Error::IterationCap { cap: opts.max_iter, from: grid.t(lo), to: grid.t(hi) },
                        _ => Error::NonContraction { splits },
                    });
                }
                len = (hi - lo) / 2;
                log::info!("halving Picard window to {len} intervals at t = {}", x.grid().t(lo));
            }
        }
    }
    let windows = pieces.iter().map(|(_, r)| r.clone()).collect();
    let path = merge(x, layout, pieces)?;
    Ok(RdeSolution { path, windows, splits })
}

/// Joins window solutions. Values at a shared end point come from the left
/// window; remainders across windows are computed from their definitions.
fn merge(
    x: Arc<BranchedRoughPath>,
    layout: Arc<Layout>,
    pieces: Vec<(ControlledPath, WindowReport)>,
) -> Result<ControlledPath> {
    let kappa = x.gamma();
    if pieces.len() == 1 {
        let (y, _) = pieces.into_iter().next().expect("one piece");
        return Ok(ControlledPath::from_raw(x, layout, kappa, y.base, y.coeffs, y.sharp, y.coeff_sharp));
    }
    let grid = x.grid().clone();
    let k = pieces[0].0.dim();
    // owner[i] = window whose left end is ≤ i and right end > i.
    let mut owner = vec![0; grid.len()];
    let mut bounds = Vec::new();
    for (w, (_, r)) in pieces.iter().enumerate() {
        for o in &mut owner[r.lo..=r.hi] {
            *o = w;
        }
        bounds.push((r.lo, r.hi));
    }
    let last = pieces.len() - 1;
    let pick = |i: usize| -> (usize, usize) {
        let mut w = owner[i];
        if w > 0 && bounds[w].0 == i {
            w -= 1;
        }
        (w.min(last), i - bounds[w.min(last)].0)
    };
    let gather = |get: &dyn Fn(&ControlledPath) -> &GridPath| -> Result<GridPath> {
        let mut vals = Vec::with_capacity(grid.len() * k);
        for i in 0..grid.len() {
            let (w, j) = pick(i);
            vals.extend_from_slice(get(&pieces[w].0).at(j));
        }
        GridPath::new(grid.clone(), k, vals)
    };
    let base = gather(&|y| y.base())?;
    let coeffs = (0..layout.forests().len()).map(|c| gather(&|y| &y.coeffs()[c])).collect::<Result<Vec<_>>>()?;

    let full = super::control_remainder(&x, &layout, &base, &coeffs);
    let within = |t: usize, s: usize| -> Option<(usize, usize)> {
        bounds.iter().position(|&(lo, hi)| lo <= s && t <= hi).map(|w| (w, bounds[w].0))
    };
    let splice = |full: Increment2, get: &(dyn Fn(&ControlledPath) -> &Increment2 + Sync)| {
        Increment2::from_fn(grid.clone(), k, |t, s, out| match within(t, s) {
            Some((w, lo)) => out.copy_from_slice(get(&pieces[w].0).get(t - lo, s - lo)),
            None => out.copy_from_slice(full.get(t, s)),
        })
    };
    let sharp = splice(full, &|y| y.sharp());
    let coeff_sharp = (0..coeffs.len())
        .map(|c| splice(super::coefficient_remainder(&x, &layout, &coeffs, c), &|y| &y.coeff_sharps()[c]))
        .collect();
    Ok(ControlledPath::from_raw(x, layout, kappa, base, coeffs, sharp, coeff_sharp))
}
