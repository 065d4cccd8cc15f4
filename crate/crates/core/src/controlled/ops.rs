use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{ControlledPath, Layout, SmoothMap};
use crate::brp::BranchedRoughPath;
use crate::error::{Error, Result};
use crate::forest::{graft, Forest, Label, Tree};
use crate::increments::{same_grid, GridPath, Increment2};

/// Ordered tuples `(τ₁, …, τ_m)` of nonempty forests with `τ₁⋯τ_m = τ`.
fn ordered_factorisations(f: &Forest, memo: &mut BTreeMap<Forest, Vec<Vec<Forest>>>) -> Vec<Vec<Forest>> {
    if let Some(v) = memo.get(f) {
        return v.clone();
    }
    let mut groups: Vec<(Tree, usize)> = Vec::new();
    for t in f.trees() {
        match groups.last_mut() {
            Some((g, c)) if g == t => *c += 1,
            _ => groups.push((t.clone(), 1)),
        }
    }
    let mut out = Vec::new();
    let mut pick = vec![0usize; groups.len()];
    loop {
        // Next sub-multiset in mixed radix.
        let mut i = 0;
        while i < groups.len() && pick[i] == groups[i].1 {
            pick[i] = 0;
            i += 1;
        }
        if i == groups.len() {
            break;
        }
        pick[i] += 1;
        let mut head = Vec::new();
        let mut rest = Vec::new();
        for ((t, c), &p) in groups.iter().zip(&pick) {
            head.extend(std::iter::repeat(t.clone()).take(p));
            rest.extend(std::iter::repeat(t.clone()).take(c - p));
        }
        let head = Forest::from_trees(head);
        if rest.is_empty() {
            out.push(vec![head]);
        } else {
            for mut tail in ordered_factorisations(&Forest::from_trees(rest), memo) {
                tail.insert(0, head.clone());
                out.push(tail);
            }
        }
    }
    memo.insert(f.clone(), out.clone());
    out
}

/// `z = φ(y)` with coefficients
/// `z^τ = Σ_m 1/m! Σ_{b̄ ∈ [k]^m} φ_{b̄}(y) Σ_{τ₁⋯τ_m = τ} y^{τ₁,b₁}⋯y^{τ_m,b_m}`.
/// Needs derivatives of `φ` up to order `n−1`.
pub fn compose_smooth(phi: &dyn SmoothMap, y: &ControlledPath) -> Result<ControlledPath> {
    let n = y.n();
    let need = n.saturating_sub(1);
    if phi.max_order() < need {
        return Err(Error::MissingDerivative { order: need });
    }
    let k = y.dim();
    if phi.input_dim() != k {
        return Err(Error::DimensionMismatch { left: phi.input_dim(), right: k });
    }
    let out_dim = phi.output_dim();
    let layout = y.layout().clone();
    let mut memo = BTreeMap::new();
    let tuples: Vec<Vec<(f64, Vec<usize>)>> = layout
        .forests()
        .iter()
        .map(|f| {
            ordered_factorisations(f, &mut memo)
                .into_iter()
                .map(|tup| {
                    let m = tup.len();
                    let inv_fact = 1.0 / (1..=m).map(|v| v as f64).product::<f64>();
                    (inv_fact, tup.iter().map(|g| layout.index_of(g).expect("factor is a coefficient index")).collect())
                })
                .collect()
        })
        .collect();
    let max_m = tuples.iter().flatten().map(|(_, t)| t.len()).max().unwrap_or(0);

    let grid = y.grid().clone();
    let per_point: Vec<(Vec<f64>, Vec<Vec<f64>>)> = (0..grid.len())
        .into_par_iter()
        .map(|s| -> Result<_> {
            let ys = y.base().at(s);
            let mut value = vec![0.0; out_dim];
            phi.derivative(ys, &[], &mut value)?;
            // derivs[m][flat b̄] = φ_{b̄}(y_s), with b₁ the fastest digit.
            let mut derivs: Vec<Vec<Vec<f64>>> = vec![Vec::new()];
            let mut idx = Vec::new();
            for m in 1..=max_m {
                let count = k.pow(m as u32);
                let mut level = Vec::with_capacity(count);
                for flat in 0..count {
                    idx.clear();
                    idx.extend((0..m).map(|i| flat / k.pow(i as u32) % k));
                    let mut o = vec![0.0; out_dim];
                    phi.derivative(ys, &idx, &mut o)?;
                    level.push(o);
                }
                derivs.push(level);
            }
            let coeffs = tuples
                .iter()
                .map(|list| {
                    let mut z = vec![0.0; out_dim];
                    for (w, tup) in list {
                        let m = tup.len();
                        for (flat, d) in derivs[m].iter().enumerate() {
                            let mut prod = *w;
                            for (i, &f) in tup.iter().enumerate() {
                                prod *= y.coeffs()[f].at(s)[flat / k.pow(i as u32) % k];
                            }
                            if prod != 0.0 {
                                for (zv, dv) in z.iter_mut().zip(d) {
                                    *zv += prod * dv;
                                }
                            }
                        }
                    }
                    z
                })
                .collect();
            Ok((value, coeffs))
        })
        .collect::<Result<_>>()?;

    let base = GridPath::new(grid.clone(), out_dim, per_point.iter().flat_map(|(v, _)| v.iter().copied()).collect())?;
    let coeffs = (0..layout.forests().len())
        .map(|i| {
            GridPath::new(grid.clone(), out_dim, per_point.iter().flat_map(|(_, c)| c[i].iter().copied()).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ControlledPath::from_coeffs(y.rough().clone(), layout, y.kappa(), base, coeffs))
}

/// Rough integral `z = I^a(y)` with `z₀ = 0`.
///
/// `z` is the finest-partition sum of the germ
/// `g = X^{•_a} y + Σ_τ X^{[τ]_a} y^τ`, so `δz = g + z♭` with `z♭` the sewn
/// remainder. Coefficients are `z^{•_a} = y`, `z^{[τ]_a} = y^τ` and zero
/// otherwise; their remainders are assembled from those of `y`.
pub fn rough_integrate(x: &BranchedRoughPath, a: usize, y: &ControlledPath) -> Result<ControlledPath> {
    same_grid(x.grid(), y.grid())?;
    if x.trees() != y.rough().trees() {
        return Err(Error::InvalidInput("controlled path refers to a different rough path".into()));
    }
    if a >= x.alphabet() {
        return Err(Error::InvalidInput(format!("label {a} outside alphabet of size {}", x.alphabet())));
    }
    let n = y.n();
    let kappa = y.kappa();
    if kappa * (n as f64 + 1.0) <= 1.0 {
        return Err(Error::Hypothesis(format!("rough integration needs κ(n+1) > 1, got κ = {kappa}, n = {n}")));
    }
    let layout = y.layout().clone();
    let rough = y.rough();
    let vals = rough.values();
    let label = Label(a as u16);
    let need = |t: &Tree| rough.index_of(t).ok_or(Error::MissingLevel { have: rough.level(), need: t.degree() });
    let leaf = need(&Tree::leaf(label))?;
    let grafted: Vec<usize> = layout.forests().iter().map(|f| need(&graft(f, label))).collect::<Result<_>>()?;
    let k = y.dim();
    let grid = y.grid().clone();

    let germ = |t: usize, s: usize, out: &mut [f64]| {
        let xa = vals[leaf].at(t, s);
        for (o, v) in out.iter_mut().zip(y.base().at(s)) {
            *o = xa * v;
        }
        for (ti, &g) in grafted.iter().enumerate() {
            let xv = vals[g].at(t, s);
            for (o, v) in out.iter_mut().zip(y.coeffs()[ti].at(s)) {
                *o += xv * v;
            }
        }
    };

    let mut base = GridPath::zeros(grid.clone(), k);
    let mut step = vec![0.0; k];
    for i in 1..grid.len() {
        germ(i, i - 1, &mut step);
        let prev = base.at(i - 1).to_vec();
        for ((b, p), g) in base.at_mut(i).iter_mut().zip(prev).zip(&step) {
            *b = p + g;
        }
    }

    // Which germ terms have a matching coefficient of z.
    let top = n.saturating_sub(1);
    let leaf_forest = Forest::from(Tree::leaf(label));
    let leaf_slot = layout.index_of(&leaf_forest);
    let graft_slot: Vec<Option<usize>> =
        layout.forests().iter().map(|f| layout.index_of(&Forest::from(graft(f, label)))).collect();

    let mut coeffs = vec![GridPath::zeros(grid.clone(), k); layout.forests().len()];
    let mut coeff_sharp = vec![Increment2::zeros(grid.clone(), k); layout.forests().len()];
    if let Some(i) = leaf_slot {
        coeffs[i] = y.base().clone();
        // y♯ + Σ_{|ρ|=n−1} X^ρ y^ρ
        let tops: Vec<usize> = (0..layout.forests().len()).filter(|&r| layout.forests()[r].degree() == top).collect();
        coeff_sharp[i] = Increment2::from_fn(grid.clone(), k, |t, s, out| {
            out.copy_from_slice(y.sharp().get(t, s));
            for &r in &tops {
                let xv = Layout::x_at(vals, &layout.xf[r], t, s);
                for (o, v) in out.iter_mut().zip(y.coeffs()[r].at(s)) {
                    *o += xv * v;
                }
            }
        });
    }
    for (ti, slot) in graft_slot.iter().enumerate() {
        let Some(i) = *slot else { continue };
        coeffs[i] = y.coeffs()[ti].clone();
        // y^{τ,♯} + Σ_{|υ|=n−1} c′(υ,τ,ρ) X^ρ y^υ
        let terms: Vec<&(f64, usize, Vec<usize>)> =
            layout.plan[ti].iter().filter(|(_, s, _)| layout.forests()[*s].degree() == top).collect();
        let own = &y.coeff_sharps()[ti];
        coeff_sharp[i] = Increment2::from_fn(grid.clone(), k, |t, s, out| {
            out.copy_from_slice(own.get(t, s));
            for (c, sigma, rho) in &terms {
                let xv = c * Layout::x_at(vals, rho, t, s);
                for (o, v) in out.iter_mut().zip(y.coeffs()[*sigma].at(s)) {
                    *o += xv * v;
                }
            }
        });
    }

    // z♯ = z♭ + germ terms without a coefficient of z.
    let sharp = Increment2::from_fn(grid.clone(), k, |t, s, out| {
        germ(t, s, out);
        for (j, o) in out.iter_mut().enumerate() {
            *o = base.at(t)[j] - base.at(s)[j] - *o;
        }
        if leaf_slot.is_none() {
            let xa = vals[leaf].at(t, s);
            for (o, v) in out.iter_mut().zip(y.base().at(s)) {
                *o += xa * v;
            }
        }
        for (ti, slot) in graft_slot.iter().enumerate() {
            if slot.is_none() {
                let xv = vals[grafted[ti]].at(t, s);
                for (o, v) in out.iter_mut().zip(y.coeffs()[ti].at(s)) {
                    *o += xv * v;
                }
            }
        }
    });
    Ok(ControlledPath::from_raw(rough.clone(), layout, kappa, base, coeffs, sharp, coeff_sharp))
}
