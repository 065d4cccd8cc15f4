//! Shared oracles for the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use branched::brp::{lift_smooth, BranchedRoughPath, SmoothDriver};
use branched::controlled::{Monomial, PolynomialMap, SmoothMap, VectorFieldFamily};
use branched::hopf::TensorSeries;
use branched::increments::Grid;
use branched::quadrature::QuadratureRule;
use branched::{Forest, Tree};
use num_bigint::BigInt;
use proptest::prelude::*;

pub fn mono(c: f64, e: &[u32]) -> Monomial<f64> {
    Monomial { coeff: c, exponents: e.to_vec() }
}

/// `x_t = (sin 2t, t²/2 + 0.3t)`.
pub fn wave(t: f64) -> Vec<f64> {
    vec![(2.0 * t).sin(), 0.5 * t * t + 0.3 * t]
}

pub fn wave_velocity(t: f64) -> Vec<f64> {
    vec![2.0 * (2.0 * t).cos(), t + 0.3]
}

/// Two polynomial fields on `R²`: a rotation and a quadratic drift.
pub fn planar_family() -> VectorFieldFamily {
    let rot = PolynomialMap::new(2, vec![vec![mono(1.0, &[0, 1])], vec![mono(-1.0, &[1, 0])]]).unwrap();
    let drift =
        PolynomialMap::new(2, vec![vec![mono(0.5, &[1, 1])], vec![mono(0.3, &[0, 0]), mono(0.2, &[2, 0])]]).unwrap();
    let fields: Vec<Arc<dyn SmoothMap>> = vec![Arc::new(rot), Arc::new(drift)];
    VectorFieldFamily::new(fields).unwrap()
}

pub fn wave_lift(t_end: f64, m: usize, n: usize) -> Arc<BranchedRoughPath> {
    let grid = Arc::new(Grid::uniform(t_end, m).unwrap());
    let drv = SmoothDriver::from_fn(grid, 2, QuadratureRule::Simpson, wave).unwrap();
    Arc::new(lift_smooth(&drv, n).unwrap())
}

fn rhs(f: &VectorFieldFamily, v: &dyn Fn(f64) -> Vec<f64>, t: f64, y: &[f64]) -> Vec<f64> {
    let dx = v(t);
    let mut out = vec![0.0; y.len()];
    for (a, field) in f.fields().iter().enumerate() {
        let fa = field.eval(y).unwrap();
        for (o, w) in out.iter_mut().zip(fa) {
            *o += w * dx[a];
        }
    }
    out
}

/// Classical RK4 for `y' = Σ_a f_a(y) v_a(t)` with `steps` equal steps.
pub fn rk4(
    f: &VectorFieldFamily,
    v: &dyn Fn(f64) -> Vec<f64>,
    eta: &[f64],
    t0: f64,
    t1: f64,
    steps: usize,
) -> Vec<f64> {
    let h = (t1 - t0) / steps as f64;
    let mut y = eta.to_vec();
    let axpy = |y: &[f64], c: f64, k: &[f64]| -> Vec<f64> { y.iter().zip(k).map(|(a, b)| a + c * b).collect() };
    for i in 0..steps {
        let t = t0 + i as f64 * h;
        let k1 = rhs(f, v, t, &y);
        let k2 = rhs(f, v, t + h / 2.0, &axpy(&y, h / 2.0, &k1));
        let k3 = rhs(f, v, t + h / 2.0, &axpy(&y, h / 2.0, &k2));
        let k4 = rhs(f, v, t + h, &axpy(&y, h, &k3));
        for j in 0..y.len() {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
    }
    y
}

/// Parses `forest = c L ⊗ R + …` lines; `#` lines are comments.
pub fn parse_coproduct_table(text: &str) -> Vec<(Forest, TensorSeries)> {
    let mut out = Vec::new();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
        let (lhs, rhs) = line.split_once(" = ").expect("`=` separates the sides");
        let mut series = TensorSeries::new();
        for term in rhs.split(" + ") {
            let (coef, rest) = match term.split_once(' ') {
                Some((c, rest)) if c.parse::<i64>().is_ok() => (c.parse::<i64>().unwrap(), rest),
                _ => (1, term),
            };
            let (l, r) = rest.split_once(" ⊗ ").expect("`⊗` separates the factors");
            series.add_term(l.parse().unwrap(), r.parse().unwrap(), BigInt::from(coef));
        }
        out.push((lhs.parse().unwrap(), series));
    }
    out
}

pub const DEGREE_THREE_COPRODUCTS: &str = include_str!("../golden/coproducts_degree3.txt");

/// Tree with vertex `i > 0` attached to `parents[i-1] < i`.
pub fn tree_from_parents(parents: &[usize], labels: &[u16]) -> Tree {
    fn build(v: usize, parents: &[usize], labels: &[u16]) -> Tree {
        let kids = (1..=parents.len()).filter(|&w| parents[w - 1] == v).map(|w| build(w, parents, labels)).collect();
        Tree::new(labels[v], kids)
    }
    build(0, parents, labels)
}

/// Random labelled trees with between 1 and `max_degree` vertices.
pub fn arb_tree(max_degree: usize, labels: u16) -> impl Strategy<Value = Tree> {
    (1..=max_degree).prop_flat_map(move |n| {
        let parents = (1..n).map(|i| 0..i).collect::<Vec<_>>();
        (parents, prop::collection::vec(0..labels, n)).prop_map(|(p, l)| tree_from_parents(&p, &l))
    })
}

type Scalar1 = fn(f64) -> f64;

/// Ten pairs `(F, G)`; each gives the germ `g_{ts} = F(s)(G(t) − G(s))`.
pub const SEWING_CORPUS: [(Scalar1, Scalar1); 10] = [
    (|s| s, |t| t),
    (|s| s * s, |t| t),
    (f64::sin, f64::cos),
    (f64::cos, |t| t * t * t),
    (f64::exp, f64::sin),
    (|s| 1.0 / (1.0 + s), f64::exp),
    (|s| (3.0 * s).sin(), |t| (2.0 * t).cos()),
    (|s| s.powi(4) - s, |t| t * t),
    (|s| (s - 0.4).abs().powf(1.5), |t| t),
    (|s| (5.0 * s).cos() + s, |t| (t + 1.0).ln()),
];

pub fn germ(grid: &Arc<Grid>, (f, g): (Scalar1, Scalar1)) -> branched::increments::Increment2 {
    branched::increments::Increment2::from_times_fn(grid.clone(), 1, move |t, s, o| o[0] = f(s) * (g(t) - g(s)))
}
