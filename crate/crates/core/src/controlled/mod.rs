//! Weakly controlled paths.
//!
//! A controlled path `y` over a rough path `X` with `n = ⌊1/γ⌋` carries one
//! coefficient path `y^τ` per nonempty forest of degree `≤ n−1` and the two
//! families of remainders
//!
//! ```text
//! y♯      = δy   − Σ_τ X^τ y^τ
//! y^{τ,♯} = δy^τ − Σ_{σ,ρ} c′(σ,τ,ρ) X^ρ y^σ
//! ```
//!
//! where `c′(σ,τ,ρ)` counts `τ ⊗ ρ` in `Δ′σ` and `(X^τ y^τ)_{ts} = X^τ_{ts} y^τ_s`.
//! Remainders are stored, not recomputed, so that [`check_remainders`]
//! audits them against the definitions.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;

use crate::brp::{truncation_degree, BranchedRoughPath};
use crate::error::{Error, Result};
use crate::forest::{enumerate_forests, Forest};
use crate::hopf::ReducedTable;
use crate::increments::{holder_norm2, same_grid, strided_indices, Grid, GridPath, Increment2};

mod fields;
mod lift;
mod ops;
mod rde;

pub use fields::{
    ClosureMap, FieldSpec, FiniteDifference, Monomial, PolynomialMap, Scalar, SmoothMap, VectorFieldFamily,
};
pub use lift::lift_controlled;
pub use ops::{compose_smooth, rough_integrate};
pub use rde::{solve_rde, RdeOptions, RdeSolution, WindowReport};

/// Forest index set and compiled expansion plans, shared by all controlled
/// paths over the same tree set.
#[derive(Debug)]
pub(crate) struct Layout {
    n: usize,
    forests: Vec<Forest>,
    index: BTreeMap<Forest, usize>,
    /// Rough-path tree indices whose product is `X^τ`.
    xf: Vec<Vec<usize>>,
    /// Per `τ`: terms `(c, σ, ρ)` with `c = c′(σ,τ,ρ)`, `ρ` as tree indices.
    plan: Vec<Vec<(f64, usize, Vec<usize>)>>,
}

impl Layout {
    pub(crate) fn new(x: &BranchedRoughPath) -> Result<Layout> {
        let n = x.truncation_degree();
        if x.level() < n {
            return Err(Error::MissingLevel { have: x.level(), need: n });
        }
        let forests = enumerate_forests(n.saturating_sub(1), x.alphabet(), false)?;
        let index: BTreeMap<Forest, usize> = forests.iter().cloned().enumerate().map(|(i, f)| (f, i)).collect();
        let trees_of = |f: &Forest| -> Result<Vec<usize>> {
            f.trees()
                .iter()
                .map(|t| x.index_of(t).ok_or(Error::MissingLevel { have: x.level(), need: t.degree() }))
                .collect()
        };
        let xf = forests.iter().map(trees_of).collect::<Result<Vec<_>>>()?;
        let mut plan = vec![Vec::new(); forests.len()];
        let mut table = ReducedTable::new();
        for (si, sigma) in forests.iter().enumerate() {
            for (l, r, c) in table.terms(sigma) {
                if let Some(&ti) = index.get(l) {
                    plan[ti].push((*c, si, trees_of(r)?));
                }
            }
        }
        Ok(Layout { n, forests, index, xf, plan })
    }

    pub(crate) fn forests(&self) -> &[Forest] {
        &self.forests
    }

    pub(crate) fn index_of(&self, f: &Forest) -> Option<usize> {
        self.index.get(f).copied()
    }

    #[inline]
    fn x_at(vals: &[Increment2], trees: &[usize], t: usize, s: usize) -> f64 {
        trees.iter().map(|&k| vals[k].at(t, s)).product()
    }
}

#[derive(Clone, Debug)]
pub struct ControlledPath {
    rough: Arc<BranchedRoughPath>,
    layout: Arc<Layout>,
    kappa: f64,
    base: GridPath,
    coeffs: Vec<GridPath>,
    sharp: Increment2,
    coeff_sharp: Vec<Increment2>,
}

fn check_kappa(kappa: f64, x: &BranchedRoughPath) -> Result<()> {
    let n = truncation_degree(x.gamma()) as f64;
    if kappa > 1.0 / (n + 1.0) && kappa <= x.gamma() + 1e-12 {
        Ok(())
    } else {
        Err(Error::InvalidExponent { value: kappa, reason: "κ must lie in (1/(n+1), γ]" })
    }
}

impl ControlledPath {
    /// Builds a controlled path from its base and coefficients; forests not
    /// listed get zero coefficients. Remainders are computed from their
    /// definitions.
    pub fn new(
        rough: Arc<BranchedRoughPath>,
        kappa: f64,
        base: GridPath,
        coeffs: BTreeMap<Forest, GridPath>,
    ) -> Result<ControlledPath> {
        let layout = Arc::new(Layout::new(&rough)?);
        check_kappa(kappa, &rough)?;
        same_grid(rough.grid(), base.grid())?;
        let k = base.dim();
        let mut list = vec![GridPath::zeros(rough.grid().clone(), k); layout.forests.len()];
        for (f, p) in coeffs {
            let i = layout
                .index_of(&f)
                .ok_or_else(|| Error::InvalidInput(format!("forest {f} is not a coefficient index")))?;
            same_grid(rough.grid(), p.grid())?;
            if p.dim() != k {
                return Err(Error::DimensionMismatch { left: p.dim(), right: k });
            }
            list[i] = p;
        }
        Ok(Self::from_coeffs(rough, layout, kappa, base, list))
    }

    /// Builds a controlled path with an explicit remainder ledger; entries
    /// follow [`ControlledPath::forests`].
    pub fn from_parts(
        rough: Arc<BranchedRoughPath>,
        kappa: f64,
        base: GridPath,
        coeffs: Vec<GridPath>,
        sharp: Increment2,
        coeff_sharp: Vec<Increment2>,
    ) -> Result<ControlledPath> {
        let layout = Arc::new(Layout::new(&rough)?);
        check_kappa(kappa, &rough)?;
        let m = layout.forests.len();
        if coeffs.len() != m || coeff_sharp.len() != m {
            return Err(Error::DimensionMismatch { left: coeffs.len().max(coeff_sharp.len()), right: m });
        }
        let k = base.dim();
        same_grid(rough.grid(), base.grid())?;
        for p in &coeffs {
            same_grid(rough.grid(), p.grid())?;
            if p.dim() != k {
                return Err(Error::DimensionMismatch { left: p.dim(), right: k });
            }
        }
        for r in std::iter::once(&sharp).chain(&coeff_sharp) {
            same_grid(rough.grid(), r.grid())?;
            if r.dim() != k {
                return Err(Error::DimensionMismatch { left: r.dim(), right: k });
            }
        }
        Ok(ControlledPath { rough, layout, kappa, base, coeffs, sharp, coeff_sharp })
    }

    /// The constant path `η` with zero coefficients.
    pub fn constant(rough: Arc<BranchedRoughPath>, kappa: f64, eta: &[f64]) -> Result<ControlledPath> {
        let base = GridPath::constant(rough.grid().clone(), eta);
        ControlledPath::new(rough, kappa, base, BTreeMap::new())
    }

    /// The driver itself: `y = x` with `y^{•_a} = e_a`, `κ = γ`.
    pub fn driver(rough: Arc<BranchedRoughPath>) -> Result<ControlledPath> {
        let d = rough.alphabet();
        let grid = rough.grid().clone();
        let mut base = GridPath::zeros(grid.clone(), d);
        for a in 0..d {
            let leaf = rough
                .tree(&crate::forest::Tree::leaf(a as u16))
                .ok_or(Error::MissingLevel { have: rough.level(), need: 1 })?;
            for i in 0..grid.len() {
                base.at_mut(i)[a] = if i == 0 { 0.0 } else { leaf.at(i, 0) };
            }
        }
        let mut coeffs = BTreeMap::new();
        if truncation_degree(rough.gamma()) >= 2 {
            for a in 0..d {
                let mut e = vec![0.0; d];
                e[a] = 1.0;
                coeffs.insert(Forest::from(crate::forest::Tree::leaf(a as u16)), GridPath::constant(grid.clone(), &e));
            }
        }
        let gamma = rough.gamma();
        ControlledPath::new(rough, gamma, base, coeffs)
    }

    pub(crate) fn from_coeffs(
        rough: Arc<BranchedRoughPath>,
        layout: Arc<Layout>,
        kappa: f64,
        base: GridPath,
        coeffs: Vec<GridPath>,
    ) -> ControlledPath {
        let sharp = control_remainder(&rough, &layout, &base, &coeffs);
        let coeff_sharp = (0..coeffs.len()).map(|i| coefficient_remainder(&rough, &layout, &coeffs, i)).collect();
        ControlledPath { rough, layout, kappa, base, coeffs, sharp, coeff_sharp }
    }

    pub(crate) fn from_raw(
        rough: Arc<BranchedRoughPath>,
        layout: Arc<Layout>,
        kappa: f64,
        base: GridPath,
        coeffs: Vec<GridPath>,
        sharp: Increment2,
        coeff_sharp: Vec<Increment2>,
    ) -> ControlledPath {
        ControlledPath { rough, layout, kappa, base, coeffs, sharp, coeff_sharp }
    }

    pub(crate) fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn rough(&self) -> &Arc<BranchedRoughPath> {
        &self.rough
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.base.grid()
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// `n = ⌊1/γ⌋` of the reference path.
    pub fn n(&self) -> usize {
        self.layout.n
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    /// Coefficient index set: nonempty forests of degree `≤ n−1`.
    pub fn forests(&self) -> &[Forest] {
        &self.layout.forests
    }

    pub fn base(&self) -> &GridPath {
        &self.base
    }

    /// `y^τ`; the empty forest gives the base path.
    pub fn coeff(&self, f: &Forest) -> Option<&GridPath> {
        if f.is_empty() {
            return Some(&self.base);
        }
        self.layout.index_of(f).map(|i| &self.coeffs[i])
    }

    pub fn coeffs(&self) -> &[GridPath] {
        &self.coeffs
    }

    pub fn sharp(&self) -> &Increment2 {
        &self.sharp
    }

    pub fn coeff_sharp(&self, f: &Forest) -> Option<&Increment2> {
        self.layout.index_of(f).map(|i| &self.coeff_sharp[i])
    }

    pub fn coeff_sharps(&self) -> &[Increment2] {
        &self.coeff_sharp
    }

    fn check_compatible(&self, other: &ControlledPath) -> Result<()> {
        same_grid(self.grid(), other.grid())?;
        if !Arc::ptr_eq(&self.rough, &other.rough) && self.rough.trees() != other.rough.trees() {
            return Err(Error::InvalidInput("controlled paths refer to different rough paths".into()));
        }
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { left: self.dim(), right: other.dim() });
        }
        Ok(())
    }

    fn combine(&self, other: &ControlledPath, c: f64) -> Result<ControlledPath> {
        self.check_compatible(other)?;
        let lin = |a: &GridPath, b: &GridPath| a.add(&b.scale(c));
        let mut sharp = self.sharp.clone();
        sharp.axpy(c, &other.sharp)?;
        let mut coeff_sharp = self.coeff_sharp.clone();
        for (a, b) in coeff_sharp.iter_mut().zip(&other.coeff_sharp) {
            a.axpy(c, b)?;
        }
        Ok(ControlledPath {
            rough: self.rough.clone(),
            layout: self.layout.clone(),
            kappa: self.kappa.min(other.kappa),
            base: lin(&self.base, &other.base)?,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| lin(a, b)).collect::<Result<_>>()?,
            sharp,
            coeff_sharp,
        })
    }

    pub fn add(&self, other: &ControlledPath) -> Result<ControlledPath> {
        self.combine(other, 1.0)
    }

    pub fn sub(&self, other: &ControlledPath) -> Result<ControlledPath> {
        self.combine(other, -1.0)
    }

    pub fn scale(&self, c: f64) -> ControlledPath {
        ControlledPath {
            rough: self.rough.clone(),
            layout: self.layout.clone(),
            kappa: self.kappa,
            base: self.base.scale(c),
            coeffs: self.coeffs.iter().map(|p| p.scale(c)).collect(),
            sharp: self.sharp.scale(c),
            coeff_sharp: self.coeff_sharp.iter().map(|p| p.scale(c)).collect(),
        }
    }

    /// Shifts the base path by a constant vector; remainders are unchanged.
    pub fn add_constant(&self, eta: &[f64]) -> Result<ControlledPath> {
        if eta.len() != self.dim() {
            return Err(Error::DimensionMismatch { left: eta.len(), right: self.dim() });
        }
        let mut out = self.clone();
        out.base = self.base.add(&GridPath::constant(self.grid().clone(), eta))?;
        Ok(out)
    }
}

/// `δy − Σ_τ X^τ y^τ` from the definitions.
pub(crate) fn control_remainder(
    x: &BranchedRoughPath,
    layout: &Layout,
    base: &GridPath,
    coeffs: &[GridPath],
) -> Increment2 {
    let vals = x.values();
    Increment2::from_fn(x.grid().clone(), base.dim(), |t, s, out| {
        for (k, o) in out.iter_mut().enumerate() {
            *o = base.at(t)[k] - base.at(s)[k];
        }
        for (trees, c) in layout.xf.iter().zip(coeffs) {
            let xv = Layout::x_at(vals, trees, t, s);
            for (o, v) in out.iter_mut().zip(c.at(s)) {
                *o -= xv * v;
            }
        }
    })
}

/// `δy^τ − Σ c′(σ,τ,ρ) X^ρ y^σ` from the definitions.
pub(crate) fn coefficient_remainder(
    x: &BranchedRoughPath,
    layout: &Layout,
    coeffs: &[GridPath],
    tau: usize,
) -> Increment2 {
    let vals = x.values();
    let y = &coeffs[tau];
    let plan = &layout.plan[tau];
    Increment2::from_fn(x.grid().clone(), y.dim(), |t, s, out| {
        for (k, o) in out.iter_mut().enumerate() {
            *o = y.at(t)[k] - y.at(s)[k];
        }
        for (c, sigma, rho) in plan {
            let xv = c * Layout::x_at(vals, rho, t, s);
            for (o, v) in out.iter_mut().zip(coeffs[*sigma].at(s)) {
                *o -= xv * v;
            }
        }
    })
}

/// `|y₀| + ‖y♯‖_{nκ} + Σ_τ ‖y^{τ,♯}‖_{(n−|τ|)κ}` with grid Hölder norms.
pub fn controlled_norm(y: &ControlledPath) -> Result<f64> {
    let n = y.n() as f64;
    let y0 = y.base.at(0).iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut total = y0;
    if y.n() > 0 {
        total += holder_norm2(&y.sharp, n * y.kappa)?.norm;
    }
    let parts: Vec<f64> = y
        .layout
        .forests
        .par_iter()
        .zip(&y.coeff_sharp)
        .map(|(f, r)| holder_norm2(r, (n - f.degree() as f64) * y.kappa).map(|h| h.norm))
        .collect::<Result<_>>()?;
    Ok(total + parts.iter().sum::<f64>())
}

/// [`controlled_norm`] plus `Σ_τ |y^τ_0|`. The former does not see the
/// starting values of the coefficients, so two paths differing only there
/// are at distance zero; Picard iteration uses this one instead.
pub fn controlled_norm_with_coefficients(y: &ControlledPath) -> Result<f64> {
    let starts: f64 = y.coeffs.iter().map(|c| c.at(0).iter().map(|v| v * v).sum::<f64>().sqrt()).sum();
    Ok(controlled_norm(y)? + starts)
}

#[derive(Clone, Debug)]
pub struct RemainderReport {
    /// `max |y♯ − (δy − Σ X^τ y^τ)|` over grid pairs.
    pub control_defect: f64,
    /// Same for each coefficient ledger entry.
    pub coefficient_defects: Vec<(Forest, f64)>,
    /// `max |δy♯_{tus} − Σ_τ X^τ_{tu} y^{τ,♯}_{us}|` over checked triples.
    pub triple_defect: f64,
    /// Largest `|δy♯_{tus}|` over the same triples, for relative reading.
    pub triple_scale: f64,
    pub stride: usize,
}

impl RemainderReport {
    pub fn max_defect(&self) -> f64 {
        self.coefficient_defects.iter().map(|(_, e)| *e).fold(self.control_defect.max(self.triple_defect), f64::max)
    }

    /// Triple-identity defect relative to the size of `δy♯`.
    pub fn triple_relative(&self) -> f64 {
        if self.triple_scale > 0.0 {
            self.triple_defect / self.triple_scale
        } else {
            self.triple_defect
        }
    }
}

/// Audits the stored remainders against their definitions on every grid
/// pair, and the identity `δy♯ = Σ_τ X^τ y^{τ,♯}` on every grid triple.
pub fn check_remainders(y: &ControlledPath) -> Result<RemainderReport> {
    check_remainders_sampled(y, 1)
}

/// As [`check_remainders`] with the triple identity checked on an index
/// stride (plus the last point).
pub fn check_remainders_sampled(y: &ControlledPath, stride: usize) -> Result<RemainderReport> {
    let x = &*y.rough;
    let layout = &*y.layout;
    let control_defect = control_remainder(x, layout, &y.base, &y.coeffs).max_abs_diff(&y.sharp)?;
    let coefficient_defects = (0..y.coeffs.len())
        .into_par_iter()
        .map(|i| {
            let e = coefficient_remainder(x, layout, &y.coeffs, i).max_abs_diff(&y.coeff_sharp[i])?;
            Ok((layout.forests[i].clone(), e))
        })
        .collect::<Result<Vec<_>>>()?;

    let vals = x.values();
    let idx = strided_indices(y.grid().len(), stride);
    let k = y.dim();
    let (triple_defect, triple_scale) = (2..idx.len())
        .into_par_iter()
        .map(|a| {
            let t = idx[a];
            let mut best = (0.0f64, 0.0f64);
            let mut acc = vec![0.0; k];
            for b in 1..a {
                let u = idx[b];
                for &s in &idx[..b] {
                    for (j, v) in acc.iter_mut().enumerate() {
                        *v = y.sharp.value(t, s, j) - y.sharp.value(t, u, j) - y.sharp.value(u, s, j);
                    }
                    let lhs_max = acc.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    for (trees, r) in layout.xf.iter().zip(&y.coeff_sharp) {
                        let xv = Layout::x_at(vals, trees, t, u);
                        for (j, v) in acc.iter_mut().enumerate() {
                            *v -= xv * r.value(u, s, j);
                        }
                    }
                    let e = acc.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    best = (best.0.max(e), best.1.max(lhs_max));
                }
            }
            best
        })
        .reduce(|| (0.0, 0.0), |p, q| (p.0.max(q.0), p.1.max(q.1)));
    Ok(RemainderReport { control_defect, coefficient_defects, triple_defect, triple_scale, stride: stride.max(1) })
}
