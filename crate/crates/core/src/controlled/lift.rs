use std::collections::BTreeMap;

use rayon::prelude::*;

use super::ControlledPath;
use crate::brp::{check_capacity, delta_plan, BranchedRoughPath, DeltaTerm};
use crate::error::{Error, Result};
use crate::forest::{enumerate_trees, graft, Forest, Label, Tree};
use crate::hopf::ReducedTable;
use crate::increments::Increment2;

/// Truncated forest series with `f64` coefficients.
type Series = BTreeMap<Forest, f64>;

fn mul(a: &Series, b: &Series, max_degree: usize) -> Series {
    let mut out = Series::new();
    for (fa, ca) in a {
        for (fb, cb) in b {
            if fa.degree() + fb.degree() <= max_degree {
                *out.entry(fa.product(fb)).or_insert(0.0) += ca * cb;
            }
        }
    }
    out
}

/// Lifts a controlled path with values in `R^{k×d}` (entry `(b, a)` at
/// index `b·d + a`) to the branched rough path over `k` labels given by
/// `Y^{•_b} = Σ_a I^a(y^{ba})` and
/// `Y^{[τ¹⋯τᵐ]_b} = Σ_a I^a(y^{ba} Y^{τ¹}⋯Y^{τᵐ})`.
///
/// One-step values come from the local expansion of these integrals in
/// the trees of `X`; longer increments follow by Chen's relation with the
/// full coproduct, so the result is multiplicative by construction.
pub fn lift_controlled(y: &ControlledPath) -> Result<BranchedRoughPath> {
    let x = y.rough();
    let d = x.alphabet();
    if y.dim() % d != 0 || y.dim() == 0 {
        return Err(Error::InvalidInput(format!(
            "a controlled path of dimension {} is not a k×{d} matrix path",
            y.dim()
        )));
    }
    let k = y.dim() / d;
    let level = x.level();
    let trees = enumerate_trees(level, k)?;
    check_capacity(x.grid(), trees.len() as u128)?;
    let index: BTreeMap<&Tree, usize> = trees.iter().enumerate().map(|(i, t)| (t, i)).collect();
    let children: Vec<Vec<usize>> = trees.iter().map(|t| t.children().iter().map(|c| index[c]).collect()).collect();
    let forests = y.forests();
    let vals = x.values();
    let grid = x.grid().clone();
    let m = grid.intervals();

    let steps: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            // S^{ba} = y^{ba}_i + Σ_σ y^{ba,σ}_i X^σ
            let s: Vec<Series> = (0..k * d)
                .map(|e| {
                    let mut ser = Series::new();
                    ser.insert(Forest::empty(), y.base().at(i)[e]);
                    for (f, c) in forests.iter().zip(y.coeffs()) {
                        let v = c.at(i)[e];
                        if v != 0.0 {
                            ser.insert(f.clone(), v);
                        }
                    }
                    ser
                })
                .collect();
            let mut germs: Vec<Series> = Vec::with_capacity(trees.len());
            let mut out = Vec::with_capacity(trees.len());
            for (ti, t) in trees.iter().enumerate() {
                let b = t.label().index();
                let mut prod = Series::from([(Forest::empty(), 1.0)]);
                for &c in &children[ti] {
                    prod = mul(&prod, &germs[c], level - 1);
                }
                let mut germ = Series::new();
                for a in 0..d {
                    for (f, c) in mul(&s[b * d + a], &prod, level - 1) {
                        let tree = graft(&f, Label(a as u16));
                        *germ.entry(Forest::from(tree)).or_insert(0.0) += c;
                    }
                }
                let mut v = 0.0;
                for (f, c) in &germ {
                    let tree = f.as_tree().expect("grafted series holds trees");
                    let idx = x.index_of(tree).ok_or(Error::MissingLevel { have: level, need: tree.degree() })?;
                    v += c * vals[idx].at(i + 1, i);
                }
                out.push(v);
                germs.push(germ);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let mut table = ReducedTable::new();
    let plans: Vec<Vec<DeltaTerm>> =
        trees.iter().map(|t| delta_plan(&mut table, t, &|s| index.get(s).copied())).collect::<Result<_>>()?;

    // cols[i][τ][r] = Y^τ_{t_{i+r+1}, t_i}
    let cols: Vec<Vec<Vec<f64>>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut cols = vec![Vec::with_capacity(m - i); trees.len()];
            let mut cur = steps[i].clone();
            for (c, v) in cols.iter_mut().zip(&cur) {
                c.push(*v);
            }
            let mut next = vec![0.0; trees.len()];
            for step in &steps[i + 1..] {
                for (ti, terms) in plans.iter().enumerate() {
                    let mut v = step[ti] + cur[ti];
                    for term in terms {
                        let l: f64 = term.left.iter().map(|&q| step[q]).product();
                        let r: f64 = term.right.iter().map(|&q| cur[q]).product();
                        v += term.coeff * l * r;
                    }
                    next[ti] = v;
                }
                std::mem::swap(&mut cur, &mut next);
                for (c, v) in cols.iter_mut().zip(&cur) {
                    c.push(*v);
                }
            }
            cols
        })
        .collect();
    let values: Vec<Increment2> =
        (0..trees.len()).map(|ti| Increment2::from_fn_scalar(grid.clone(), |t, s| cols[s][ti][t - s - 1])).collect();
    Ok(BranchedRoughPath::from_sorted(y.kappa(), level, k, grid, trees, values))
}
