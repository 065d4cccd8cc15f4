use std::sync::Arc;

use branched::brp::*;
use branched::hopf::{chen_tree, Word};
use branched::increments::{riemann_sum, Grid, Increment2};
use branched::quadrature::QuadratureRule;
use branched::{Forest, Tree};

fn tr(s: &str) -> Tree {
    s.parse().unwrap()
}

fn poly_driver(m: usize) -> SmoothDriver {
    let grid = Arc::new(Grid::uniform(1.0, m).unwrap());
    SmoothDriver::from_fn(grid, 2, QuadratureRule::Simpson, |t| vec![t, 0.5 * t * t]).unwrap()
}

fn smooth_driver(m: usize) -> SmoothDriver {
    let grid = Arc::new(Grid::uniform(1.0, m).unwrap());
    SmoothDriver::from_fn(grid, 2, QuadratureRule::Simpson, |t| vec![(2.0 * t).sin(), t.exp() - 1.0]).unwrap()
}

#[test]
fn mixed_level_two_integral() {
    // ∫₀^t u²/2 du = t³/6 for the tree with root label 0 over a leaf labelled 1.
    let x = lift_smooth(&poly_driver(32), 2).unwrap();
    let v = x.tree(&Tree::new(0u16, vec![Tree::leaf(1u16)])).unwrap();
    for i in 1..=32 {
        let t = x.grid().t(i);
        assert!((v.at(i, 0) - t.powi(3) / 6.0).abs() < 1e-14);
    }
}

#[test]
fn degree_one_defect_is_zero_and_cherry_relation_holds() {
    let x = lift_smooth(&poly_driver(24), 3).unwrap();
    let rep = check_multiplicativity(&x).unwrap();
    for (t, e) in &rep.per_tree {
        if t.degree() == 1 {
            // δδx = 0 up to the rounding of three subtractions.
            assert!(*e <= 4.0 * f64::EPSILON, "{t}: {e}");
        }
    }
    assert!(rep.max_defect < 1e-6, "{}", rep.max_defect);

    // δX^{[••]} = X^• X^{••} + 2 X^{[•]} X^•, unlabelled identity path.
    let grid = Arc::new(Grid::uniform(1.0, 20).unwrap());
    let y = lift_smooth(&SmoothDriver::identity(grid, QuadratureRule::Simpson), 3).unwrap();
    let big = y.tree(&tr("[•,•]")).unwrap();
    let dot = y.tree(&tr("•")).unwrap();
    let lad = y.tree(&tr("[•]")).unwrap();
    let (t, u, s) = (17, 9, 2);
    let lhs = big.at(t, s) - big.at(t, u) - big.at(u, s);
    let rhs = dot.at(t, u) * dot.at(u, s).powi(2) + 2.0 * lad.at(t, u) * dot.at(u, s);
    assert!((lhs - rhs).abs() < 1e-14);
}

#[test]
fn polynomial_subalgebra_is_exact() {
    let x = lift_smooth(&smooth_driver(16), 2).unwrap();
    let f: Forest = "0 1 1".parse().unwrap();
    let p = x.forest(&f).unwrap();
    let path = |a: usize, i: usize| x.tree(&Tree::leaf(a as u16)).unwrap().at(i, 0);
    assert_eq!(p.at(11, 0), path(0, 11) * path(1, 11) * path(1, 11));
    assert_eq!(x.forest(&Forest::empty()).unwrap().at(3, 1), 1.0);
}

#[test]
fn chen_trees_follow_chen_relation() {
    // For a ladder tree the reduced coproduct is a sum of word splittings.
    let x = lift_smooth(&smooth_driver(64), 3).unwrap();
    let w = Word::new([0u16, 1, 1]);
    let t = chen_tree(&w).unwrap();
    let rep = check_multiplicativity(&x).unwrap();
    let e = rep.per_tree.iter().find(|(s, _)| *s == t).unwrap().1;
    assert!(e < 1e-7, "{e}");
}

#[test]
fn extension_recovers_discarded_levels() {
    let x = lift_smooth_with_gamma(&smooth_driver(128), 4, 0.45).unwrap();
    let ext = extend(&x.restrict(2), 4).unwrap();
    for t in ext.trees().iter().filter(|t| t.degree() > 2) {
        let r = ext.tree(t).unwrap().sup_relative_diff(x.tree(t).unwrap()).unwrap();
        assert!(r < 1e-3, "{t}: {r}");
    }
}

#[test]
fn extension_of_identity_path_and_of_zero() {
    let grid = Arc::new(Grid::uniform(2.0, 64).unwrap());
    let id = lift_smooth_with_gamma(&SmoothDriver::identity(grid.clone(), QuadratureRule::Simpson), 2, 0.5).unwrap();
    let (ext, rep) = extend_with_report(&id, 4, 4).unwrap();
    let t = tr("[•,[•]]");
    let want = Increment2::from_times_fn(grid.clone(), 1, |a, b, o| o[0] = (a - b).powi(4) / 8.0);
    assert!(ext.tree(&t).unwrap().sup_relative_diff(&want).unwrap() < 1e-3);
    assert!(rep.defect.max_defect < 1e-10);
    assert_eq!(rep.bounds.len(), 2 + 4);

    let zero = lift_smooth_with_gamma(
        &SmoothDriver::from_fn(grid, 1, QuadratureRule::Simpson, |_| vec![0.0]).unwrap(),
        2,
        0.5,
    )
    .unwrap();
    let ez = extend(&zero, 5).unwrap();
    assert!(ez.iter().all(|(_, v)| v.max_abs() == 0.0));
}

#[test]
fn extension_hypothesis_is_checked() {
    let x = lift_smooth_with_gamma(&smooth_driver(8), 2, 0.3).unwrap();
    assert!(matches!(extend(&x, 3), Err(branched::Error::Hypothesis(_))));
}

fn perturbed(x: &BranchedRoughPath, t: &Tree, eps: f64) -> BranchedRoughPath {
    let mut xt = x.clone();
    let p = Increment2::from_times_fn(x.grid().clone(), 1, |a, b, o| o[0] = eps * (a - b).powi(2));
    xt.set_tree(t, x.tree(t).unwrap().add(&p).unwrap()).unwrap();
    xt
}

#[test]
fn correction_of_a_rough_path_is_trivial() {
    let x = lift_smooth_with_gamma(&poly_driver(40), 2, 0.4).unwrap();
    let c = correct_almost(&x, 1.2).unwrap();
    for (t, v) in c.path.iter() {
        assert!(v.max_abs_diff(x.tree(t).unwrap()).unwrap() < 1e-13);
    }
}

#[test]
fn correction_removes_a_smooth_perturbation() {
    let x = lift_smooth_with_gamma(&poly_driver(64), 2, 0.4).unwrap();
    let t = tr("0[1]");
    let eps = 0.25;
    let c = correct_almost(&perturbed(&x, &t, eps), 1.2).unwrap();
    let p = Increment2::from_times_fn(x.grid().clone(), 1, |a, b, o| o[0] = eps * (a - b).powi(2));
    let left = riemann_sum(&p);
    let oracle = x.tree(&t).unwrap().add(&left).unwrap();
    assert!(c.path.tree(&t).unwrap().sup_relative_diff(&oracle).unwrap() < 1e-12);
    assert!(check_multiplicativity(&c.path).unwrap().max_defect < 1e-12);

    // A different perturbation of the same path gives the same correction
    // up to the finest-partition residue.
    let c2 = correct_almost(&perturbed(&x, &t, -0.5), 1.2).unwrap();
    let d = c.path.tree(&t).unwrap().max_abs_diff(c2.path.tree(&t).unwrap()).unwrap();
    assert!(d <= 0.75 * x.grid().mesh() * 1.0001, "{d}");
}

#[test]
fn ito_example_is_non_geometric() {
    let x = poly_driver(32);
    let c = 0.3;
    let ito = ito_level2(&x, c).unwrap();
    let geo = ito_level2(&x, 0.0).unwrap();
    let grid = x.grid().clone();
    for a in 0..2u16 {
        let aa: Forest = Forest::from_trees(vec![Tree::leaf(a), Tree::leaf(a)]);
        let lad = Tree::new(a, vec![Tree::leaf(a)]);
        let diff = ito.forest(&aa).unwrap().sub(&ito.tree(&lad).unwrap().scale(2.0)).unwrap();
        let want = Increment2::from_times_fn(grid.clone(), 1, |t, s, o| o[0] = -2.0 * c * (t - s));
        assert!(diff.max_abs_diff(&want).unwrap() < 1e-12);
    }
    // Shuffle identity for the smooth lift.
    let ab: Forest = "0 1".parse().unwrap();
    let sh = geo.tree(&tr("0[1]")).unwrap().add(geo.tree(&tr("1[0]")).unwrap()).unwrap();
    assert!(geo.forest(&ab).unwrap().max_abs_diff(&sh).unwrap() < 1e-13);
    let d0 = check_multiplicativity(&geo).unwrap().max_defect;
    let d1 = check_multiplicativity(&ito).unwrap().max_defect;
    assert!((d0 - d1).abs() < 1e-12);
}

#[test]
fn distance_properties() {
    let x = poly_driver(32);
    let geo = ito_level2(&x, 0.0).unwrap();
    let ito = ito_level2(&x, 0.3).unwrap();
    assert_eq!(distance(&geo, &geo).unwrap(), 0.0);
    let d = distance(&geo, &ito).unwrap();
    assert_eq!(d, distance(&ito, &geo).unwrap());
    // Two labels, each perturbed by 0.3(t−s), measured at exponent 1.
    assert!((d - 2.0 * 0.3).abs() < 1e-12, "{d}");
    let other = lift_smooth(&smooth_driver(32), 3).unwrap();
    assert!(distance(&geo, &other).is_err());
}

#[test]
fn holder_budget() {
    let grid = Arc::new(Grid::uniform(1.0, 32).unwrap());
    let id = lift_smooth_with_gamma(&SmoothDriver::identity(grid.clone(), QuadratureRule::Simpson), 4, 1.0).unwrap();
    let rep = check_holder_budget(&id, 1.0, 1.0).unwrap();
    assert!(rep.holds, "{:?}", rep.violations);
    assert!(!check_holder_budget(&id, 1.0, 0.0).unwrap().holds);

    let x = lift_smooth(&smooth_driver(32), 3).unwrap();
    let a = minimal_budget_constant(&x, 1.0).unwrap();
    assert!(check_holder_budget(&x, a, 1.0).unwrap().holds);
    assert!(!check_holder_budget(&x, 0.99 * a, 1.0).unwrap().holds);
    let x3 = lift_smooth(&smooth_driver(32).scale(3.0), 3).unwrap();
    assert!(check_holder_budget(&x3, 3.0 * a, 1.0).unwrap().holds);
}
