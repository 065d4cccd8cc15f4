use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{check_capacity, delta_plan, eval_delta, BranchedRoughPath, DeltaTerm};
use crate::error::{Error, Result};
use crate::forest::{enumerate_trees, Tree};
use crate::hopf::ReducedTable;
use crate::increments::{holder_norm2, holder_norm3_sampled, lambda_map, strided_indices, Increment2, Increment3};

#[derive(Clone, Debug)]
pub struct MultiplicativityReport {
    /// `max |δX^τ_{tus} − X^{Δ′τ}_{tus}|` over stored trees and checked triples.
    pub max_defect: f64,
    /// Tree and triple `(t, u, s)` attaining the maximum.
    pub worst: Option<(Tree, (usize, usize, usize))>,
    pub per_tree: Vec<(Tree, f64)>,
    /// Index stride of the checked triples (1 = all triples).
    pub stride: usize,
}

fn plans(x: &BranchedRoughPath) -> Result<Vec<Vec<DeltaTerm>>> {
    let mut table = ReducedTable::new();
    x.trees().iter().map(|t| delta_plan(&mut table, t, &|s| x.index_of(s))).collect()
}

/// Defect of `δX^τ = X^{Δ′τ}` over every grid triple.
pub fn check_multiplicativity(x: &BranchedRoughPath) -> Result<MultiplicativityReport> {
    check_multiplicativity_sampled(x, 1)
}

/// As [`check_multiplicativity`], on triples of grid indices taken on a
/// stride (plus the last point).
pub fn check_multiplicativity_sampled(x: &BranchedRoughPath, stride: usize) -> Result<MultiplicativityReport> {
    let plans = plans(x)?;
    let vals: Vec<&Increment2> = x.values().iter().collect();
    let idx = strided_indices(x.grid().len(), stride);
    let per: Vec<(f64, Option<(usize, usize, usize)>)> = x
        .trees()
        .par_iter()
        .enumerate()
        .map(|(k, _)| {
            let v = vals[k];
            let terms = &plans[k];
            (2..idx.len())
                .into_par_iter()
                .map(|a| {
                    let t = idx[a];
                    let mut best = (0.0, None);
                    for b in 1..a {
                        let u = idx[b];
                        for &s in &idx[..b] {
                            let lhs = v.at(t, s) - v.at(t, u) - v.at(u, s);
                            let e = (lhs - eval_delta(terms, &vals, t, u, s)).abs();
                            if e > best.0 {
                                best = (e, Some((t, u, s)));
                            }
                        }
                    }
                    best
                })
                .reduce(|| (0.0, None), |p, q| if q.0 > p.0 { q } else { p })
        })
        .collect();
    let mut max_defect = 0.0;
    let mut worst = None;
    let mut per_tree = Vec::with_capacity(per.len());
    for (t, (e, w)) in x.trees().iter().zip(per) {
        if e > max_defect {
            max_defect = e;
            worst = w.map(|w| (t.clone(), w));
        }
        per_tree.push((t.clone(), e));
    }
    Ok(MultiplicativityReport { max_defect, worst, per_tree, stride: stride.max(1) })
}

/// Measured norm of a newly built tree against the norm propagated from
/// its reduced coproduct, `Σ′ |c| ‖X^{τ(1)}‖ ‖X^{τ(2)}‖ / (2^{γ|τ|} − 2)`.
#[derive(Clone, Debug)]
pub struct BoundPropagation {
    pub tree: Tree,
    pub norm: f64,
    pub predicted: f64,
}

#[derive(Clone, Debug)]
pub struct ExtensionReport {
    pub defect: MultiplicativityReport,
    pub bounds: Vec<BoundPropagation>,
}

/// Unique extension to degree `target`: `X^τ = Λ[X^{Δ′τ}]` degree by degree.
/// Needs `γ(n+1) > 1` where `n` is the current level.
pub fn extend(x: &BranchedRoughPath, target: usize) -> Result<BranchedRoughPath> {
    extend_inner(x, target).map(|(p, _)| p)
}

/// [`extend`] plus the multiplicativity defect of the result (checked on an
/// index stride) and the propagated norm bounds of the new trees.
pub fn extend_with_report(
    x: &BranchedRoughPath,
    target: usize,
    stride: usize,
) -> Result<(BranchedRoughPath, ExtensionReport)> {
    let (path, norms) = extend_inner(x, target)?;
    let defect = check_multiplicativity_sampled(&path, stride)?;
    let gamma = path.gamma();
    let mut bounds = Vec::new();
    let mut table = ReducedTable::new();
    for t in path.trees().iter().filter(|t| t.degree() > x.level()) {
        let norm = norms[t];
        let mut sum = 0.0;
        for term in delta_plan(&mut table, t, &|s| path.index_of(s))? {
            let f = |ks: &[usize]| -> f64 { ks.iter().map(|&k| norms_at(&path, &norms, k)).product() };
            sum += term.coeff.abs() * f(&term.left) * f(&term.right);
        }
        let predicted = sum / ((gamma * t.degree() as f64).exp2() - 2.0);
        bounds.push(BoundPropagation { tree: t.clone(), norm, predicted });
    }
    Ok((path, ExtensionReport { defect, bounds }))
}

fn norms_at(path: &BranchedRoughPath, norms: &BTreeMap<Tree, f64>, k: usize) -> f64 {
    norms[&path.trees()[k]]
}

fn extend_inner(x: &BranchedRoughPath, target: usize) -> Result<(BranchedRoughPath, BTreeMap<Tree, f64>)> {
    let n = x.level();
    let gamma = x.gamma();
    if gamma * (n as f64 + 1.0) <= 1.0 {
        return Err(Error::Hypothesis(format!("extension needs γ(n+1) > 1, got γ = {gamma}, n = {n}")));
    }
    if target < n {
        return Err(Error::InvalidInput(format!("target degree {target} below current level {n}")));
    }
    let all = enumerate_trees(target, x.alphabet())?;
    check_capacity(x.grid(), all.len() as u128)?;
    let mut trees: Vec<Tree> = x.trees().to_vec();
    let mut values: Vec<Increment2> = x.values().to_vec();
    let mut table = ReducedTable::new();
    for m in n + 1..=target {
        let index: BTreeMap<Tree, usize> = trees.iter().cloned().enumerate().map(|(i, t)| (t, i)).collect();
        let new: Vec<&Tree> = all.iter().filter(|t| t.degree() == m).collect();
        let plans: Vec<Vec<DeltaTerm>> =
            new.iter().map(|t| delta_plan(&mut table, t, &|s| index.get(s).copied())).collect::<Result<_>>()?;
        let vals: Vec<&Increment2> = values.iter().collect();
        let grid = x.grid().clone();
        let built: Vec<Increment2> = plans
            .par_iter()
            .map(|terms| {
                let h = Increment3::new(grid.clone(), 1, |t, u, s, o| o[0] = eval_delta(terms, &vals, t, u, s));
                lambda_map(&h)
            })
            .collect();
        log::debug!("extended {} trees of degree {m}", built.len());
        trees.extend(new.into_iter().cloned());
        values.extend(built);
    }
    let mut norms = BTreeMap::new();
    for (t, v) in trees.iter().zip(&values) {
        norms.insert(t.clone(), holder_norm2(v, gamma * t.degree() as f64)?.norm);
    }
    let path = BranchedRoughPath::from_sorted(gamma, target, x.alphabet(), x.grid().clone(), trees, values);
    Ok((path, norms))
}

#[derive(Clone, Debug)]
pub struct Correction {
    pub path: BranchedRoughPath,
    /// `‖R^τ‖` of the input defects at the requested exponent (surrogate
    /// 3-increment norm, index-strided on fine grids).
    pub defect_norms: Vec<(Tree, f64)>,
    /// `‖X^τ − X̃^τ‖_{(n+1)γ}`.
    pub correction_norms: Vec<(Tree, f64)>,
    /// Index stride used for the 3-increment norms.
    pub stride: usize,
}

/// Turns an almost rough path into the unique rough path close to it.
///
/// With `R^τ = δX̃^τ − X̃^{Δ′τ}` of Hölder order `z > 1`, the correction is
/// `Q^τ = Λ[X^{Δ′τ} − δX̃^τ]` degree by degree, where `X^{Δ′τ}` already
/// uses the corrected lower degrees. On degree one this is `Q = −ΛR`.
pub fn correct_almost(xt: &BranchedRoughPath, z: f64) -> Result<Correction> {
    if !(z > 1.0 && z.is_finite()) {
        return Err(Error::InvalidExponent { value: z, reason: "defects must have Hölder order above 1" });
    }
    let n = xt.level();
    let gamma = xt.gamma();
    if gamma * (n as f64 + 1.0) <= 1.0 {
        return Err(Error::Hypothesis(format!("an almost rough path needs γ > 1/(n+1), got γ = {gamma}, n = {n}")));
    }
    let grid = xt.grid().clone();
    let stride = grid.intervals().div_ceil(256);
    let plans = plans(xt)?;
    let orig: Vec<&Increment2> = xt.values().iter().collect();

    let mut defect_norms = Vec::with_capacity(plans.len());
    for (k, t) in xt.trees().iter().enumerate() {
        let v = orig[k];
        let terms = &plans[k];
        let vals = &orig;
        let r = Increment3::new(grid.clone(), 1, move |a, b, c, o| {
            o[0] = v.at(a, c) - v.at(a, b) - v.at(b, c) - eval_delta(terms, vals, a, b, c);
        });
        let norm = holder_norm3_sampled(&r, z, stride)?.norm;
        if !norm.is_finite() {
            return Err(Error::Hypothesis(format!("defect of tree {t} has no finite order-{z} norm")));
        }
        defect_norms.push((t.clone(), norm));
    }

    let mut corrected: Vec<Increment2> = Vec::with_capacity(plans.len());
    for (k, terms) in plans.iter().enumerate() {
        let v = orig[k];
        let q = {
            let lower: Vec<&Increment2> = corrected.iter().collect();
            let h = Increment3::new(grid.clone(), 1, |a, b, c, o| {
                o[0] = eval_delta(terms, &lower, a, b, c) - (v.at(a, c) - v.at(a, b) - v.at(b, c));
            });
            lambda_map(&h)
        };
        corrected.push(v.add(&q)?);
    }

    let mut correction_norms = Vec::with_capacity(plans.len());
    for (k, t) in xt.trees().iter().enumerate() {
        let q = corrected[k].sub(orig[k])?;
        correction_norms.push((t.clone(), holder_norm2(&q, (n as f64 + 1.0) * gamma)?.norm));
    }
    let path = BranchedRoughPath::from_sorted(gamma, n, xt.alphabet(), grid, xt.trees().to_vec(), corrected);
    Ok(Correction { path, defect_norms, correction_norms, stride })
}
