use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;

use super::{check_capacity, check_gamma, BranchedRoughPath};
use crate::error::{Error, Result};
use crate::forest::{enumerate_trees, tree_and_forest_counts, Label, Tree};
use crate::increments::{Grid, GridPath, Increment2};
use crate::quadrature::{QuadratureRule, Stieltjes};

/// A `d`-dimensional driver sampled on a grid, with the quadrature rule used
/// for its iterated integrals.
#[derive(Clone, Debug)]
pub struct SmoothDriver {
    path: GridPath,
    rule: QuadratureRule,
}

impl SmoothDriver {
    pub fn new(path: GridPath, rule: QuadratureRule) -> Result<SmoothDriver> {
        if path.dim() == 0 {
            return Err(Error::InvalidInput("driver needs at least one component".into()));
        }
        Ok(SmoothDriver { path, rule })
    }

    pub fn from_fn(
        grid: Arc<Grid>,
        dim: usize,
        rule: QuadratureRule,
        f: impl Fn(f64) -> Vec<f64>,
    ) -> Result<SmoothDriver> {
        SmoothDriver::new(GridPath::from_fn(grid, dim, f), rule)
    }

    /// `x_t = t`.
    pub fn identity(grid: Arc<Grid>, rule: QuadratureRule) -> SmoothDriver {
        SmoothDriver { path: GridPath::from_fn(grid, 1, |t| vec![t]), rule }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.path.grid()
    }

    pub fn dim(&self) -> usize {
        self.path.dim()
    }

    pub fn rule(&self) -> QuadratureRule {
        self.rule
    }

    pub fn path(&self) -> &GridPath {
        &self.path
    }

    pub fn scale(&self, c: f64) -> SmoothDriver {
        SmoothDriver { path: self.path.scale(c), rule: self.rule }
    }

    pub fn with_rule(&self, rule: QuadratureRule) -> SmoothDriver {
        SmoothDriver { path: self.path.clone(), rule }
    }
}

/// Iterated integrals of a smooth driver for every tree of degree `≤ n`,
/// with roughness `1/n`.
pub fn lift_smooth(x: &SmoothDriver, n: usize) -> Result<BranchedRoughPath> {
    if n == 0 {
        return Err(Error::InvalidInput("lift degree must be at least 1".into()));
    }
    lift_smooth_with_gamma(x, n, 1.0 / n as f64)
}

/// As [`lift_smooth`] with an explicit roughness exponent.
pub fn lift_smooth_with_gamma(x: &SmoothDriver, n: usize, gamma: f64) -> Result<BranchedRoughPath> {
    check_gamma(gamma)?;
    if n == 0 {
        return Err(Error::InvalidInput("lift degree must be at least 1".into()));
    }
    let d = x.dim();
    let grid = x.grid().clone();
    let (tc, _) = tree_and_forest_counts(n, d);
    let total = tc.iter().fold(0u128, |a, &b| a.saturating_add(b));
    check_capacity(&grid, total)?;
    let trees = enumerate_trees(n, d)?;
    let index: BTreeMap<&Tree, usize> = trees.iter().enumerate().map(|(i, t)| (t, i)).collect();
    let children: Vec<Vec<usize>> = trees.iter().map(|t| t.children().iter().map(|c| index[c]).collect()).collect();
    let comps: Vec<Vec<f64>> = (0..d).map(|a| x.path.component(a)).collect();
    let quad = Stieltjes::new(&grid, x.rule);
    let m = grid.intervals();
    log::debug!("lifting {} trees on {} grid points", trees.len(), grid.len());

    // cols[s][k][r] = X^{τ_k}_{t_{s+r}, t_s}. Near the right end the
    // integrals are also run backwards from s, so that every base point sees
    // a full four-point stencil.
    let cols: Vec<Vec<Vec<f64>>> = (0..m)
        .into_par_iter()
        .map(|s| {
            let lo = s.min(m.saturating_sub(3));
            let off = s - lo;
            let len = m - lo + 1;
            let mut vals: Vec<Vec<f64>> = Vec::with_capacity(trees.len());
            let mut f = vec![0.0; len];
            for (k, t) in trees.iter().enumerate() {
                let xa = &comps[t.label().index()];
                let mut out = vec![0.0; len];
                if children[k].is_empty() {
                    for (r, o) in out.iter_mut().enumerate() {
                        *o = xa[lo + r] - xa[s];
                    }
                } else {
                    f.iter_mut().for_each(|v| *v = 1.0);
                    for &c in &children[k] {
                        for (fv, cv) in f.iter_mut().zip(&vals[c]) {
                            *fv *= cv;
                        }
                    }
                    quad.cumulative(lo, &f, xa, &mut out);
                    if off > 0 {
                        let anchor = out[off];
                        out.iter_mut().for_each(|v| *v -= anchor);
                    }
                }
                vals.push(out);
            }
            vals.into_iter().map(|mut v| v.split_off(off)).collect()
        })
        .collect();

    let values: Vec<Increment2> =
        (0..trees.len()).map(|k| Increment2::from_fn_scalar(grid.clone(), |i, j| cols[j][k][i - j])).collect();
    Ok(BranchedRoughPath::from_sorted(gamma, n, d, grid, trees, values))
}

/// Level-2 non-geometric path: the smooth lift with `c(t−s)` added to every
/// `X^{[•_a]_a}`. Roughness `1/2`.
pub fn ito_level2(x: &SmoothDriver, c: f64) -> Result<BranchedRoughPath> {
    ito_level2_with_gamma(x, c, 0.5)
}

pub fn ito_level2_with_gamma(x: &SmoothDriver, c: f64, gamma: f64) -> Result<BranchedRoughPath> {
    if gamma > 0.5 {
        return Err(Error::Hypothesis(format!("the Itô-type correction needs γ ≤ 1/2, got {gamma}")));
    }
    let mut out = lift_smooth_with_gamma(x, 2, gamma)?;
    let grid = out.grid().clone();
    for a in 0..x.dim() {
        let label = Label(a as u16);
        let tree = Tree::new(label, vec![Tree::leaf(label)]);
        let k = out.index_of(&tree).expect("level-2 tree stored");
        let bump = Increment2::from_times_fn(grid.clone(), 1, |t, s, o| o[0] = c * (t - s));
        out.values[k].axpy(1.0, &bump)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_lift_matches_factorial_formula() {
        let grid = Arc::new(Grid::uniform(1.0, 24).unwrap());
        let x = lift_smooth(&SmoothDriver::identity(grid.clone(), QuadratureRule::Simpson), 3).unwrap();
        for (t, v) in x.iter() {
            let fact = num_traits::ToPrimitive::to_f64(&t.factorial()).unwrap();
            let want =
                Increment2::from_times_fn(grid.clone(), 1, |a, b, o| o[0] = (a - b).powi(t.degree() as i32) / fact);
            let e = v.max_abs_diff(&want).unwrap();
            assert!(e < 1e-14, "{t}: {e}");
        }
    }

    #[test]
    fn leaves_are_exact_increments() {
        let grid = Arc::new(Grid::uniform(1.0, 10).unwrap());
        let x = SmoothDriver::from_fn(grid, 2, QuadratureRule::Simpson, |t| vec![t.sin(), t.exp()]).unwrap();
        let b = lift_smooth(&x, 2).unwrap();
        let v = b.tree(&Tree::leaf(1u16)).unwrap();
        assert_eq!(v.at(7, 3), 0.7f64.exp() - 0.3f64.exp());
    }

    #[test]
    fn capacity_is_enforced() {
        let grid = Arc::new(Grid::uniform(1.0, 4096).unwrap());
        let x = SmoothDriver::identity(grid, QuadratureRule::Trapezoid);
        assert!(matches!(lift_smooth(&x, 6), Err(Error::ResourceLimit { .. })));
    }
}
