//! Branched rough paths on a grid.
//!
//! A [`BranchedRoughPath`] stores one scalar 2-increment per tree of degree
//! at most `level`. Forest values are products of tree values and are never
//! stored. The empty forest evaluates to the unit `e`.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::forest::{enumerate_trees, Forest, Tree};
use crate::hopf::ReducedTable;
use crate::increments::{same_grid, Grid, Increment2};

mod algebra;
mod lift;
mod metric;

pub use algebra::{
    check_multiplicativity, check_multiplicativity_sampled, correct_almost, extend, extend_with_report,
    BoundPropagation, Correction, ExtensionReport, MultiplicativityReport,
};
pub use lift::{ito_level2, ito_level2_with_gamma, lift_smooth, lift_smooth_with_gamma, SmoothDriver};
pub use metric::{check_holder_budget, distance, minimal_budget_constant, BudgetEntry, BudgetReport};

/// Upper bound on stored doubles (trees × grid pairs).
pub const MAX_STORED_VALUES: u128 = 1 << 26;

#[derive(Clone, Debug)]
pub struct BranchedRoughPath {
    gamma: f64,
    level: usize,
    alphabet: usize,
    grid: Arc<Grid>,
    // Sorted by (degree, canonical order).
    trees: Vec<Tree>,
    values: Vec<Increment2>,
    index: BTreeMap<Tree, usize>,
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidGamma(gamma))
    }
}

/// Largest `n` with `nγ ≤ 1`.
pub fn truncation_degree(gamma: f64) -> usize {
    (1.0 / gamma + 1e-9).floor() as usize
}

pub(crate) fn check_capacity(grid: &Grid, trees: u128) -> Result<()> {
    let n = grid.len() as u128;
    let needed = trees.saturating_mul(n * (n - 1) / 2);
    if needed > MAX_STORED_VALUES {
        return Err(Error::ResourceLimit { what: "stored tree increments", needed, cap: MAX_STORED_VALUES });
    }
    Ok(())
}

impl BranchedRoughPath {
    /// Assembles a path from tree values. Every tree of degree `≤ level` over
    /// labels `0..alphabet` must be present, each value scalar and on `grid`.
    pub fn from_trees(
        gamma: f64,
        alphabet: usize,
        grid: Arc<Grid>,
        level: usize,
        mut map: BTreeMap<Tree, Increment2>,
    ) -> Result<BranchedRoughPath> {
        check_gamma(gamma)?;
        if alphabet == 0 {
            return Err(Error::InvalidInput("alphabet must be nonempty".into()));
        }
        let trees = enumerate_trees(level, alphabet)?;
        if map.len() != trees.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} trees of degree ≤ {level}, got {}",
                trees.len(),
                map.len()
            )));
        }
        let mut values = Vec::with_capacity(trees.len());
        for t in &trees {
            let v = map.remove(t).ok_or_else(|| Error::InvalidInput(format!("missing value for tree {t}")))?;
            same_grid(&grid, v.grid())?;
            if v.dim() != 1 {
                return Err(Error::DimensionMismatch { left: v.dim(), right: 1 });
            }
            values.push(v);
        }
        Ok(Self::from_sorted(gamma, level, alphabet, grid, trees, values))
    }

    pub(crate) fn from_sorted(
        gamma: f64,
        level: usize,
        alphabet: usize,
        grid: Arc<Grid>,
        trees: Vec<Tree>,
        values: Vec<Increment2>,
    ) -> BranchedRoughPath {
        let index = trees.iter().cloned().enumerate().map(|(i, t)| (t, i)).collect();
        BranchedRoughPath { gamma, level, alphabet, grid, trees, values, index }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Stored trees in `(degree, canonical)` order.
    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Tree, &Increment2)> {
        self.trees.iter().zip(&self.values)
    }

    pub fn tree(&self, t: &Tree) -> Option<&Increment2> {
        self.index.get(t).map(|&i| &self.values[i])
    }

    pub(crate) fn values(&self) -> &[Increment2] {
        &self.values
    }

    pub(crate) fn index_of(&self, t: &Tree) -> Option<usize> {
        self.index.get(t).copied()
    }

    /// The same path with a different declared roughness.
    pub fn with_gamma(mut self, gamma: f64) -> Result<BranchedRoughPath> {
        check_gamma(gamma)?;
        self.gamma = gamma;
        Ok(self)
    }

    /// Largest `n` with `nγ ≤ 1`.
    pub fn truncation_degree(&self) -> usize {
        truncation_degree(self.gamma)
    }

    /// Drops every tree of degree above `level`.
    pub fn restrict(&self, level: usize) -> BranchedRoughPath {
        let level = level.min(self.level);
        let keep = self.trees.iter().take_while(|t| t.degree() <= level).count();
        Self::from_sorted(
            self.gamma,
            level,
            self.alphabet,
            self.grid.clone(),
            self.trees[..keep].to_vec(),
            self.values[..keep].to_vec(),
        )
    }

    /// The path restricted to the grid points `lo..=hi`.
    pub fn window(&self, lo: usize, hi: usize) -> Result<BranchedRoughPath> {
        let grid = Arc::new(self.grid.window(lo, hi)?);
        let values =
            self.values.iter().map(|v| Increment2::from_fn_scalar(grid.clone(), |i, j| v.at(lo + i, lo + j))).collect();
        Ok(Self::from_sorted(self.gamma, self.level, self.alphabet, grid, self.trees.clone(), values))
    }

    /// Replaces the value of one stored tree.
    pub fn set_tree(&mut self, t: &Tree, value: Increment2) -> Result<()> {
        let i = self.index_of(t).ok_or_else(|| Error::InvalidInput(format!("tree {t} is not stored")))?;
        same_grid(&self.grid, value.grid())?;
        if value.dim() != 1 {
            return Err(Error::DimensionMismatch { left: value.dim(), right: 1 });
        }
        self.values[i] = value;
        Ok(())
    }

    fn forest_indices(&self, f: &Forest) -> Result<Vec<usize>> {
        f.trees()
            .iter()
            .map(|t| {
                self.index_of(t).ok_or_else(|| {
                    if t.degree() > self.level {
                        Error::MissingLevel { have: self.level, need: t.degree() }
                    } else {
                        Error::InvalidInput(format!("tree {t} uses a label outside the alphabet"))
                    }
                })
            })
            .collect()
    }

    /// `X^f` as a 2-increment: the `∘` product of the tree values.
    pub fn forest(&self, f: &Forest) -> Result<Increment2> {
        let idx = self.forest_indices(f)?;
        let vals = &self.values;
        Ok(Increment2::from_fn_scalar(self.grid.clone(), |i, j| idx.iter().map(|&k| vals[k].at(i, j)).product()))
    }

    /// `X^f_{t_i t_j}` for a single pair.
    pub fn forest_at(&self, f: &Forest, i: usize, j: usize) -> Result<f64> {
        let idx = self.forest_indices(f)?;
        Ok(idx.iter().map(|&k| self.values[k].at(i, j)).product())
    }

    /// `X^f` for a labelled forest given in text form, for quick inspection.
    pub fn forest_str(&self, f: &str) -> Result<Increment2> {
        self.forest(&f.parse()?)
    }
}

/// One term `c · Π X^{left}_{tu} · Π X^{right}_{us}` of `X^{Δ′τ}`, with
/// tree indices into a value table.
#[derive(Clone, Debug)]
pub(crate) struct DeltaTerm {
    pub coeff: f64,
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

/// Compiles `Δ′τ` against an index of available trees.
pub(crate) fn delta_plan(
    table: &mut ReducedTable,
    tau: &Tree,
    index: &dyn Fn(&Tree) -> Option<usize>,
) -> Result<Vec<DeltaTerm>> {
    let lookup = |f: &Forest| -> Result<Vec<usize>> {
        f.trees()
            .iter()
            .map(|t| index(t).ok_or(Error::MissingLevel { have: t.degree() - 1, need: t.degree() }))
            .collect()
    };
    table
        .terms(&Forest::from(tau.clone()))
        .iter()
        .map(|(l, r, c)| Ok(DeltaTerm { coeff: *c, left: lookup(l)?, right: lookup(r)? }))
        .collect()
}

#[inline]
pub(crate) fn eval_delta(terms: &[DeltaTerm], vals: &[&Increment2], t: usize, u: usize, s: usize) -> f64 {
    terms
        .iter()
        .map(|term| {
            let l: f64 = term.left.iter().map(|&k| vals[k].at(t, u)).product();
            let r: f64 = term.right.iter().map(|&k| vals[k].at(u, s)).product();
            term.coeff * l * r
        })
        .sum()
}
