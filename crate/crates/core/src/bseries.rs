//! Tree series for driven and autonomous ODEs.
//!
//! For `dy = Σ_a f_a(y) dx^a` the elementary differentials are
//! `φ(•_a)(ξ) = f_a(ξ)` and
//! `φ([τ¹⋯τᵏ]_a)(ξ) = Σ_{b̄ ∈ [n]^k} f_{a;b̄}(ξ) Π_i φ(τⁱ)(ξ)^{b_i}`.
//! Locally `δy_{ts} = Σ_τ φ(τ)(y_s) X^τ_{ts} / σ(τ)`, and with a single
//! field and `x_t = t` this is the classical series
//! `y_t = η + Σ_τ φ(τ)(η) t^{|τ|} / (σ(τ) τ!)`.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::brp::{truncation_degree, BranchedRoughPath};
use crate::controlled::{ControlledPath, Scalar, SmoothMap, VectorFieldFamily};
use crate::error::{Error, Result};
use crate::forest::{enumerate_trees, Forest, Tree};
use crate::increments::GridPath;

fn to_scalar<T: Scalar>(b: &BigUint) -> Result<T> {
    b.to_u64()
        .and_then(T::from_u64)
        .ok_or_else(|| Error::InvalidInput(format!("combinatorial factor {b} does not fit the scalar type")))
}

/// The tree with every label replaced by `0`.
fn shape(t: &Tree) -> Tree {
    Tree::new(0u16, t.children().iter().map(shape).collect())
}

/// Elementary differentials at one point, computed on demand and memoised.
///
/// When all fields of the family are the same map, `φ(τ)` does not depend
/// on the labels of `τ` and entries are shared between labelings.
pub struct ElementaryDifferentialTable<'a, T: Scalar = f64> {
    fields: Vec<&'a dyn SmoothMap<T>>,
    xi: Vec<T>,
    collapse: bool,
    memo: BTreeMap<Tree, Vec<T>>,
}

impl<'a, T: Scalar> ElementaryDifferentialTable<'a, T> {
    pub fn new(family: &'a VectorFieldFamily<T>, xi: &[T]) -> Result<Self> {
        if xi.len() != family.dim() {
            return Err(Error::DimensionMismatch { left: xi.len(), right: family.dim() });
        }
        Ok(ElementaryDifferentialTable {
            fields: family.fields().iter().map(|f| f.as_ref()).collect(),
            xi: xi.to_vec(),
            collapse: family.all_equal(),
            memo: BTreeMap::new(),
        })
    }

    /// Table for a single field; every tree is read as unlabelled.
    pub fn single(field: &'a dyn SmoothMap<T>, xi: &[T]) -> Result<Self> {
        if field.input_dim() != field.output_dim() {
            return Err(Error::DimensionMismatch { left: field.input_dim(), right: field.output_dim() });
        }
        if xi.len() != field.input_dim() {
            return Err(Error::DimensionMismatch { left: xi.len(), right: field.input_dim() });
        }
        Ok(ElementaryDifferentialTable { fields: vec![field], xi: xi.to_vec(), collapse: true, memo: BTreeMap::new() })
    }

    pub fn point(&self) -> &[T] {
        &self.xi
    }

    /// Number of memoised entries.
    pub fn len(&self) -> usize {
        self.memo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.memo.is_empty()
    }

    pub fn get(&mut self, t: &Tree) -> Result<&[T]> {
        let key = if self.collapse { shape(t) } else { t.clone() };
        if !self.memo.contains_key(&key) {
            let v = self.compute(&key)?;
            self.memo.insert(key.clone(), v);
        }
        Ok(&self.memo[&key])
    }

    fn compute(&mut self, t: &Tree) -> Result<Vec<T>> {
        let a = t.label().index();
        let field = *self.fields.get(a).ok_or_else(|| {
            Error::InvalidInput(format!("label {a} outside a family of {} fields", self.fields.len()))
        })?;
        let k = t.children().len();
        if field.max_order() < k {
            return Err(Error::MissingDerivative { order: k });
        }
        let n = self.xi.len();
        let kids: Vec<Vec<T>> = t.children().iter().map(|c| self.get(c).map(|v| v.to_vec())).collect::<Result<_>>()?;
        let mut out = vec![T::zero(); n];
        let mut d = vec![T::zero(); n];
        let mut idx = vec![0usize; k];
        let total = n.pow(k as u32);
        for flat in 0..total {
            let mut w = T::one();
            for (i, slot) in idx.iter_mut().enumerate() {
                *slot = flat / n.pow(i as u32) % n;
                w = w * kids[i][*slot].clone();
            }
            if w.is_zero() {
                continue;
            }
            field.derivative(&self.xi, &idx, &mut d)?;
            for (o, v) in out.iter_mut().zip(&d) {
                *o = o.clone() + w.clone() * v.clone();
            }
        }
        Ok(out)
    }
}

/// `φ^f(t)(ξ)`.
pub fn elementary_differential<T: Scalar>(f: &VectorFieldFamily<T>, t: &Tree, xi: &[T]) -> Result<Vec<T>> {
    Ok(ElementaryDifferentialTable::new(f, xi)?.get(t)?.to_vec())
}

#[derive(Clone, Debug)]
pub struct SeriesStepConfig {
    /// Truncation degree `N`.
    pub max_degree: usize,
    /// Steps longer than this trigger a warning; see [`convergence_radius`].
    pub radius: Option<f64>,
}

impl SeriesStepConfig {
    pub fn new(max_degree: usize) -> Result<Self> {
        let cfg = SeriesStepConfig { max_degree, radius: None };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = Some(radius);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_degree == 0 {
            return Err(Error::InvalidInput("series truncation degree must be at least 1".into()));
        }
        Ok(())
    }

    fn check_step(&self, h: f64) {
        if let Some(r) = self.radius {
            if h.abs() >= r {
                log::warn!("step {h} is outside the estimated convergence radius {r}");
            }
        }
    }
}

/// `η + Σ_{|τ|≤N} ψ^f(τ)(η) t^{|τ|} / (σ(τ) τ!)` for a single field.
pub fn bseries_autonomous<T: Scalar>(f: &dyn SmoothMap<T>, eta: &[T], t: T, n: usize) -> Result<Vec<T>> {
    let mut table = ElementaryDifferentialTable::single(f, eta)?;
    let mut out = eta.to_vec();
    let mut powers = vec![T::one()];
    for _ in 0..n {
        let next = powers.last().expect("nonempty").clone() * t.clone();
        powers.push(next);
    }
    for tree in enumerate_trees(n, 1)? {
        let w = powers[tree.degree()].clone() / to_scalar::<T>(&(tree.symmetry() * tree.factorial()))?;
        for (o, v) in out.iter_mut().zip(table.get(&tree)?) {
            *o = o.clone() + w.clone() * v.clone();
        }
    }
    Ok(out)
}

/// [`bseries_autonomous`] with the step checked against `cfg.radius`.
pub fn bseries_autonomous_checked(f: &dyn SmoothMap, eta: &[f64], t: f64, cfg: &SeriesStepConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    cfg.check_step(t);
    bseries_autonomous(f, eta, t, cfg.max_degree)
}

/// `Σ_{|τ|≤N} φ^f(τ)(y_s) X^τ / σ(τ)` with `X^τ` supplied by `increment`.
/// Trees run over the labels `0..f.len()`.
pub fn bseries_step<T: Scalar>(
    f: &VectorFieldFamily<T>,
    y_s: &[T],
    n: usize,
    increment: impl Fn(&Tree) -> Result<T>,
) -> Result<Vec<T>> {
    if n == 0 {
        return Err(Error::InvalidInput("series truncation degree must be at least 1".into()));
    }
    let mut table = ElementaryDifferentialTable::new(f, y_s)?;
    let mut out = vec![T::zero(); y_s.len()];
    for tree in enumerate_trees(n, f.len())? {
        let x = increment(&tree)?;
        if x.is_zero() {
            continue;
        }
        let w = x / to_scalar::<T>(&tree.symmetry())?;
        for (o, v) in out.iter_mut().zip(table.get(&tree)?) {
            *o = o.clone() + w.clone() * v.clone();
        }
    }
    Ok(out)
}

/// One tree-series step `δy_{ts}` from grid point `s` to grid point `t`.
pub fn bseries_driven_step(
    f: &VectorFieldFamily,
    x: &BranchedRoughPath,
    y_s: &[f64],
    s: usize,
    t: usize,
    n: usize,
) -> Result<Vec<f64>> {
    if f.len() != x.alphabet() {
        return Err(Error::DimensionMismatch { left: f.len(), right: x.alphabet() });
    }
    if x.level() < n {
        return Err(Error::MissingLevel { have: x.level(), need: n });
    }
    if t < s || t >= x.grid().len() {
        return Err(Error::InvalidInput(format!("step from grid point {s} to {t} is not forward on the grid")));
    }
    if t == s {
        return Ok(vec![0.0; y_s.len()]);
    }
    bseries_step(f, y_s, n, |tree| {
        x.tree(tree).map(|v| v.at(t, s)).ok_or(Error::MissingLevel { have: x.level(), need: tree.degree() })
    })
}

/// `(t−s)^{|τ|} / τ!`, the tree increments of `x^a_t = t` for every label.
pub fn identity_increment<T: Scalar>(tree: &Tree, h: &T) -> Result<T> {
    let mut p = T::one();
    for _ in 0..tree.degree() {
        p = p * h.clone();
    }
    Ok(p / to_scalar::<T>(&tree.factorial())?)
}

/// `y^τ_s = φ^f(τ)(y_s) / σ(τ)` along a solution, for trees of degree
/// `≤ max_degree` over the labels of `f`.
pub fn coefficient_paths(f: &VectorFieldFamily, y: &GridPath, max_degree: usize) -> Result<BTreeMap<Tree, GridPath>> {
    if y.dim() != f.dim() {
        return Err(Error::DimensionMismatch { left: y.dim(), right: f.dim() });
    }
    let trees = enumerate_trees(max_degree, f.len())?;
    let inv_sigma: Vec<f64> = trees.iter().map(|t| 1.0 / t.symmetry().to_f64().unwrap_or(f64::INFINITY)).collect();
    let grid = y.grid().clone();
    let k = y.dim();
    let rows: Vec<Vec<Vec<f64>>> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let mut table = ElementaryDifferentialTable::new(f, y.at(i))?;
            trees
                .iter()
                .zip(&inv_sigma)
                .map(|(t, w)| Ok(table.get(t)?.iter().map(|v| v * w).collect()))
                .collect::<Result<Vec<Vec<f64>>>>()
        })
        .collect::<Result<_>>()?;
    trees
        .into_iter()
        .enumerate()
        .map(|(ti, t)| {
            let vals = rows.iter().flat_map(|r| r[ti].iter().copied()).collect();
            Ok((t, GridPath::new(grid.clone(), k, vals)?))
        })
        .collect()
}

/// The solution `y` as a path controlled by `x` with `κ = γ`, tree
/// coefficients from [`coefficient_paths`] and zero coefficients on
/// products of trees.
pub fn controlled_solution(f: &VectorFieldFamily, x: Arc<BranchedRoughPath>, y: &GridPath) -> Result<ControlledPath> {
    let n = truncation_degree(x.gamma());
    let coeffs = coefficient_paths(f, y, n.saturating_sub(1))?;
    let coeffs = coeffs.into_iter().map(|(t, p)| (Forest::from(t), p)).collect();
    let gamma = x.gamma();
    ControlledPath::new(x, gamma, y.clone(), coeffs)
}

/// Measured decay of one remainder of a controlled path.
#[derive(Clone, Debug)]
pub struct DefectOrder {
    /// `None` for the remainder of the path itself.
    pub tree: Option<Tree>,
    pub degree: usize,
    pub scales: Vec<f64>,
    /// `max_s |R_{s+h,s}|` per scale.
    pub defects: Vec<f64>,
    pub slope: f64,
    /// `(n − |τ|) γ`.
    pub predicted: f64,
}

/// Log-log slopes of `h ↦ max_s |y^{τ,♯}_{s+h,s}|` for the path remainder
/// and every tree coefficient, with `h` running over `strides` grid steps.
pub fn defect_orders(y: &ControlledPath, strides: &[usize]) -> Result<Vec<DefectOrder>> {
    let grid = y.grid();
    if !grid.is_uniform() {
        return Err(Error::InvalidInput("defect orders need a uniform grid".into()));
    }
    if strides.len() < 2 || strides.iter().any(|&j| j == 0 || j >= grid.len()) {
        return Err(Error::InvalidInput("need at least two strides inside the grid".into()));
    }
    let n = y.n() as f64;
    let gamma = y.rough().gamma();
    let scales: Vec<f64> = strides.iter().map(|&j| j as f64 * grid.mesh()).collect();
    let measure = |r: &crate::increments::Increment2| -> Vec<f64> {
        strides
            .iter()
            .map(|&j| {
                (0..grid.len() - j)
                    .map(|s| r.get(s + j, s).iter().fold(0.0f64, |m, v| m.max(v.abs())))
                    .fold(0.0, f64::max)
            })
            .collect()
    };
    let mut out = Vec::new();
    let mut push = |tree: Option<Tree>, degree: usize, defects: Vec<f64>| {
        // an identically vanishing remainder is exact to every order
        let slope = if defects.iter().all(|&d| d == 0.0) { f64::INFINITY } else { loglog_slope(&scales, &defects) };
        out.push(DefectOrder {
            tree,
            degree,
            scales: scales.clone(),
            defects,
            slope,
            predicted: (n - degree as f64) * gamma,
        });
    };
    push(None, 0, measure(y.sharp()));
    for (f, r) in y.forests().iter().zip(y.coeff_sharps()) {
        if let Some(t) = f.as_tree() {
            push(Some(t.clone()), t.degree(), measure(r));
        }
    }
    Ok(out)
}

/// Least-squares slope of `log y` against `log x`; pairs with a
/// nonpositive entry are skipped.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> =
        x.iter().zip(y).filter(|(a, b)| **a > 0.0 && **b > 0.0).map(|(a, b)| (a.ln(), b.ln())).collect();
    let m = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// `t_* = R / (2 d A M)`, below which the driven series is summable.
pub fn convergence_radius(a: f64, m: f64, r: f64, d: usize) -> Result<f64> {
    for (name, v) in [("A", a), ("M", m), ("R", r), ("d", d as f64)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidInput(format!("{name} must be positive and finite, got {v}")));
        }
    }
    Ok(r / (2.0 * d as f64 * a * m))
}

/// `Σ 1/(σ(τ) τ!)` over unlabelled trees with `m` vertices.
///
/// `m!/(σ(τ) τ!)` counts the increasing labelings of `τ`, and there are
/// `(m−1)!` increasing trees on `m` vertices, so the sum is `1/m`. The
/// weighted sum `Σ φ(τ)/(σ(τ) τ!)` for `f(y) = y` is `1/m!` instead, because
/// only the ladder has a nonzero elementary differential.
pub fn sigma_collapse(m: usize) -> Result<BigRational> {
    let mut sum = BigRational::zero();
    for t in enumerate_trees(m, 1)?.into_iter().filter(|t| t.degree() == m) {
        let den = t.symmetry() * t.factorial();
        sum += BigRational::new(One::one(), den.into());
    }
    Ok(sum)
}

/// One row of a local-order study.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderRow {
    pub order: usize,
    pub h: f64,
    pub error: f64,
    /// Slope of the log-log regression over all rows of this order.
    pub slope: f64,
}

/// One-step errors of [`bseries_driven_step`] from grid point `0` to each
/// of `steps`, against `reference(t)`, for every truncation order.
pub fn local_order_study(
    f: &VectorFieldFamily,
    x: &BranchedRoughPath,
    eta: &[f64],
    orders: &[usize],
    steps: &[usize],
    reference: impl Fn(usize) -> Vec<f64>,
) -> Result<Vec<OrderRow>> {
    let grid = x.grid();
    let refs: Vec<Vec<f64>> = steps.iter().map(|&j| reference(j)).collect();
    let mut rows = Vec::new();
    for &order in orders {
        let mut hs = Vec::new();
        let mut errs = Vec::new();
        for (&j, want) in steps.iter().zip(&refs) {
            let inc = bseries_driven_step(f, x, eta, 0, j, order)?;
            let err = inc.iter().zip(eta).zip(want).map(|((d, e), w)| (e + d - w).abs()).fold(0.0, f64::max);
            hs.push(grid.t(j) - grid.t(0));
            errs.push(err);
        }
        let slope = loglog_slope(&hs, &errs);
        rows.extend(hs.into_iter().zip(errs).map(|(h, error)| OrderRow { order, h, error, slope }));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controlled::PolynomialMap;

    #[test]
    fn radius_examples() {
        assert_eq!(convergence_radius(1.0, 1.0, 1.0, 1).unwrap(), 0.5);
        assert_eq!(convergence_radius(1.0, 1.0, 1.0, 2).unwrap(), 0.25);
        assert!(convergence_radius(0.0, 1.0, 1.0, 1).is_err());
        assert!(convergence_radius(1.0, 1.0, 1.0, 0).is_err());
    }

    #[test]
    fn collapse_small_degrees() {
        for (m, want) in [(1u64, 1u64), (2, 2), (3, 3), (4, 4)] {
            assert_eq!(sigma_collapse(m as usize).unwrap(), BigRational::new(1.into(), want.into()));
        }
    }

    #[test]
    fn shapes_share_memo_entries() {
        let f: Arc<dyn SmoothMap> = Arc::new(PolynomialMap::univariate(&[1.0, 2.0]));
        let fam = VectorFieldFamily::repeated(f, 2).unwrap();
        let mut table = ElementaryDifferentialTable::new(&fam, &[0.5]).unwrap();
        table.get(&"1[0]".parse().unwrap()).unwrap();
        table.get(&"0[1]".parse().unwrap()).unwrap();
        assert_eq!(table.len(), 2);
    }
}
