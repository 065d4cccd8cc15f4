mod common;

use std::sync::Arc;

use branched::brp::{lift_smooth, SmoothDriver};
use branched::bseries::*;
use branched::controlled::{
    check_remainders_sampled, solve_rde, PolynomialMap, RdeOptions, SmoothMap, VectorFieldFamily,
};
use branched::increments::Grid;
use branched::quadrature::QuadratureRule;
use branched::{Error, Forest, Tree};
use common::*;
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;

fn tr(s: &str) -> Tree {
    s.parse().unwrap()
}

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn rational_poly(coeffs: &[BigRational]) -> Arc<dyn SmoothMap<BigRational>> {
    Arc::new(PolynomialMap::univariate(coeffs))
}

fn scalar_family(fields: &[&[f64]]) -> VectorFieldFamily {
    VectorFieldFamily::new(
        fields.iter().map(|c| Arc::new(PolynomialMap::univariate(c)) as Arc<dyn SmoothMap>).collect(),
    )
    .unwrap()
}

#[test]
fn leaves_and_single_edges() {
    // f_0 = 1 + ξ², f_1 = 3ξ
    let fam = scalar_family(&[&[1.0, 0.0, 1.0], &[0.0, 3.0]]);
    let xi = [0.7];
    assert!((elementary_differential(&fam, &tr("0"), &xi).unwrap()[0] - 1.49).abs() < 1e-15);
    assert!((elementary_differential(&fam, &tr("1"), &xi).unwrap()[0] - 2.1).abs() < 1e-15);
    // [•_1]_0 = f_0′ f_1, [•_0]_1 = f_1′ f_0
    assert!((elementary_differential(&fam, &tr("0[1]"), &xi).unwrap()[0] - 1.4 * 2.1).abs() < 1e-15);
    assert!((elementary_differential(&fam, &tr("1[0]"), &xi).unwrap()[0] - 3.0 * 1.49).abs() < 1e-15);
    // [•_0, •_1]_0 = f_0″ f_0 f_1
    assert!((elementary_differential(&fam, &tr("0[0,1]"), &xi).unwrap()[0] - 2.0 * 1.49 * 2.1).abs() < 1e-14);
    assert!(matches!(elementary_differential(&fam, &tr("2"), &xi), Err(Error::InvalidInput(_))));
}

#[test]
fn hand_recursion_for_linear_and_quadratic_fields() {
    let lin = scalar_family(&[&[0.0, 1.0]]);
    for (t, want) in [("•", 1.3), ("[•]", 1.3), ("[[•]]", 1.3), ("[•,•]", 0.0)] {
        assert_eq!(elementary_differential(&lin, &tr(t), &[1.3]).unwrap(), vec![want], "{t}");
    }
    let sq = scalar_family(&[&[0.0, 0.0, 1.0]]);
    let x = 0.9f64;
    for (t, want) in [("•", x * x), ("[•]", 2.0 * x.powi(3)), ("[[•]]", 4.0 * x.powi(4)), ("[•,•]", 2.0 * x.powi(4))]
    {
        let got = elementary_differential(&sq, &tr(t), &[x]).unwrap()[0];
        assert!((got - want).abs() < 1e-14, "{t}: {got} vs {want}");
    }
    // rotation in the plane: φ([•]) = A²ξ = −ξ
    let rot = PolynomialMap::affine(&[vec![0.0, 1.0], vec![-1.0, 0.0]], &[0.0, 0.0]).unwrap();
    let fam = VectorFieldFamily::new(vec![Arc::new(rot) as Arc<dyn SmoothMap>]).unwrap();
    assert_eq!(elementary_differential(&fam, &tr("[•]"), &[0.4, -2.0]).unwrap(), vec![-0.4, 2.0]);
}

#[test]
fn missing_derivatives_are_reported() {
    let f = branched::controlled::ClosureMap::new(1, 1, 1, |xi, idx, out| {
        out[0] = if idx.is_empty() { xi[0].sin() } else { xi[0].cos() };
        Ok(())
    });
    let fam = VectorFieldFamily::new(vec![Arc::new(f) as Arc<dyn SmoothMap>]).unwrap();
    assert!(elementary_differential(&fam, &tr("[[•]]"), &[0.1]).is_ok());
    assert!(matches!(elementary_differential(&fam, &tr("[•,•]"), &[0.1]), Err(Error::MissingDerivative { order: 2 })));
}

#[test]
fn autonomous_series_examples() {
    let zero = PolynomialMap::univariate(&[0.0]);
    for n in 1..6 {
        assert_eq!(bseries_autonomous(&zero, &[2.5], 0.8, n).unwrap(), vec![2.5]);
    }
    // f(y) = y: truncated exponential, exactly
    let lin = rational_poly(&[q(0, 1), q(1, 1)]);
    let t = q(1, 3);
    let mut partial = BigRational::one();
    let mut term = BigRational::one();
    for m in 1..=6 {
        term = term * &t / BigRational::from_integer(m.into());
        partial += &term;
        assert_eq!(bseries_autonomous(lin.as_ref(), &[BigRational::one()], t.clone(), m as usize).unwrap()[0], partial);
    }
    // f(y) = y², η = 1: Taylor polynomial of 1/(1 − t)
    let sq = rational_poly(&[q(0, 1), q(0, 1), q(1, 1)]);
    let t = q(2, 7);
    let mut partial = BigRational::one();
    for m in 1..=6 {
        partial += num_traits::pow(t.clone(), m);
        assert_eq!(bseries_autonomous(sq.as_ref(), &[BigRational::one()], t.clone(), m).unwrap()[0], partial);
    }
}

#[test]
fn linear_field_collapses_to_the_exponential() {
    // Only ladders survive, so the degree-m tree sum is 1/m! even though
    // Σ 1/(σ τ!) over all m-vertex trees is 1/m.
    for m in 1..=6usize {
        let mut weighted = BigRational::zero();
        let lin = VectorFieldFamily::new(vec![rational_poly(&[q(0, 1), q(1, 1)])]).unwrap();
        for t in branched::forest::enumerate_trees(m, 1).unwrap().into_iter().filter(|t| t.degree() == m) {
            let phi = elementary_differential(&lin, &t, &[BigRational::one()]).unwrap()[0].clone();
            weighted += phi / BigRational::from_integer((t.symmetry() * t.factorial()).into());
        }
        let fact: u64 = (1..=m as u64).product();
        assert_eq!(weighted, q(1, fact as i64));
        assert_eq!(sigma_collapse(m).unwrap(), q(1, m as i64));
    }
}

#[test]
fn identity_driver_matches_autonomous_series_exactly() {
    // d equal fields driven by x^a_t = t solve y' = d f(y)
    let c = [q(1, 2), q(-1, 3), q(1, 5), q(1, 7)];
    let f = rational_poly(&c);
    let d = 2;
    let fam = VectorFieldFamily::repeated(f, d).unwrap();
    let scaled: Vec<BigRational> = c.iter().map(|v| v * BigRational::from_integer(d.into())).collect();
    let g = PolynomialMap::univariate(&scaled);
    let eta = [q(3, 4)];
    let h = q(1, 5);
    for n in 1..=4 {
        let step = bseries_step(&fam, &eta, n, |t| identity_increment(t, &h)).unwrap();
        let auto = bseries_autonomous(&g, &eta, h.clone(), n).unwrap();
        assert_eq!(&eta[0] + &step[0], auto[0], "N = {n}");
    }
}

#[test]
fn lifted_identity_driver_reproduces_the_series() {
    let grid = Arc::new(Grid::uniform(0.5, 64).unwrap());
    let x = lift_smooth(&SmoothDriver::identity(grid, QuadratureRule::Simpson), 4).unwrap();
    let f: Arc<dyn SmoothMap> = Arc::new(PolynomialMap::univariate(&[0.3, 1.0, -0.4]));
    let fam = VectorFieldFamily::new(vec![f.clone()]).unwrap();
    for (s, t) in [(0, 64), (10, 30), (5, 6)] {
        let ys = [0.2 + 0.01 * s as f64];
        let step = bseries_driven_step(&fam, &x, &ys, s, t, 4).unwrap();
        let h = x.grid().t(t) - x.grid().t(s);
        let auto = bseries_autonomous(f.as_ref(), &ys, h, 4).unwrap();
        assert!((ys[0] + step[0] - auto[0]).abs() < 1e-12);
    }
    assert!(matches!(bseries_driven_step(&fam, &x, &[0.2], 0, 3, 5), Err(Error::MissingLevel { .. })));
}

#[test]
fn degree_one_step_is_euler() {
    let x = wave_lift(1.0, 32, 3);
    let fam = planar_family();
    let ys = [0.4, -0.1];
    let step = bseries_driven_step(&fam, &x, &ys, 3, 11, 1).unwrap();
    let (a, b) = (wave(x.grid().t(11)), wave(x.grid().t(3)));
    let mut want = [0.0; 2];
    for (i, field) in fam.fields().iter().enumerate() {
        let v = field.eval(&ys).unwrap();
        for j in 0..2 {
            want[j] += v[j] * (a[i] - b[i]);
        }
    }
    for j in 0..2 {
        assert!((step[j] - want[j]).abs() < 1e-14);
    }
}

#[test]
fn local_error_order_on_a_smooth_driver() {
    let x = wave_lift(0.25, 256, 3);
    let fam = planar_family();
    let eta = [0.5, -0.2];
    let steps: Vec<usize> = (2..=7).map(|k| 256 >> k).collect();
    let grid = x.grid().clone();
    let rows = local_order_study(&fam, &x, &eta, &[1, 2, 3], &steps, |j| {
        rk4(&fam, &wave_velocity, &eta, 0.0, grid.t(j), 2000)
    })
    .unwrap();
    for n in 1..=3 {
        let slope = rows.iter().find(|r| r.order == n).unwrap().slope;
        assert!((slope - (n + 1) as f64).abs() <= 0.3, "N = {n}: slope {slope}");
    }
}

#[test]
fn coefficient_paths_follow_the_recursion() {
    let x = wave_lift(1.0, 16, 3);
    let fam = planar_family();
    let y = branched::increments::GridPath::from_fn(x.grid().clone(), 2, |t| vec![t.cos(), 0.5 * t]);
    let coeffs = coefficient_paths(&fam, &y, 3).unwrap();
    for i in 0..y.grid().len() {
        for a in 0..2 {
            let leaf = Tree::leaf(a as u16);
            assert_eq!(coeffs[&leaf].at(i), fam.field(a).eval(y.at(i)).unwrap().as_slice());
        }
        // y^{[•_0,•_0]_1} = φ/2
        let t = tr("1[0,0]");
        let phi = elementary_differential(&fam, &t, y.at(i)).unwrap();
        for j in 0..2 {
            assert!((coeffs[&t].at(i)[j] - phi[j] / 2.0).abs() < 1e-15);
        }
    }
    // linear scalar field: y^τ = y on ladders, 0 on the cherry
    let lin = scalar_family(&[&[0.0, 1.0]]);
    let yl = branched::increments::GridPath::from_fn(x.grid().clone(), 1, |t| vec![t.exp()]);
    let c = coefficient_paths(&lin, &yl, 3).unwrap();
    for i in 0..yl.grid().len() {
        assert_eq!(c[&tr("[[•]]")].at(i), yl.at(i));
        assert_eq!(c[&tr("[•,•]")].at(i), &[0.0]);
    }
}

#[test]
fn rde_solution_carries_the_tree_coefficients() {
    let x = wave_lift(1.0, 128, 3);
    let fam = planar_family();
    let sol = solve_rde(&fam, x.clone(), &[0.5, -0.2], &RdeOptions::default()).unwrap();
    let from_series = controlled_solution(&fam, x.clone(), sol.path.base()).unwrap();
    for (f, c) in sol.path.forests().iter().zip(sol.path.coeffs()) {
        let d = from_series.coeff(f).unwrap().sub(c).unwrap().max_abs();
        assert!(d < 1e-12, "{f}: {d}");
    }
    let rep = check_remainders_sampled(&from_series, 4).unwrap();
    assert!(rep.triple_relative() < 1e-9, "{rep:?}");
    // classical reference
    let want = rk4(&fam, &wave_velocity, &[0.5, -0.2], 0.0, 1.0, 4000);
    let got = sol.path.base().at(128);
    assert!((got[0] - want[0]).abs() + (got[1] - want[1]).abs() < 1e-5);
}

#[test]
fn remainder_orders_decrease_with_degree() {
    let x = wave_lift(1.0, 256, 4);
    let fam = planar_family();
    let sol = solve_rde(&fam, x.clone(), &[0.5, -0.2], &RdeOptions::default()).unwrap();
    let y = controlled_solution(&fam, x, sol.path.base()).unwrap();
    let orders = defect_orders(&y, &[4, 8, 16, 32, 64]).unwrap();
    for o in &orders {
        assert!(o.slope >= 0.8 * o.predicted, "{:?}: {}", o.tree, o.slope);
    }
    let mean = |deg: usize| {
        let v: Vec<f64> = orders.iter().filter(|o| o.degree == deg && o.slope.is_finite()).map(|o| o.slope).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    for deg in 1..4 {
        assert!(mean(deg) < mean(deg - 1), "degree {deg}");
    }
}

#[test]
fn partial_sums_settle_inside_the_radius() {
    // f(y) = y² around η = 1 with R = 1/2: M = sup |f| = 9/4, A = d = 1
    let t_star = convergence_radius(1.0, 2.25, 0.5, 1).unwrap();
    assert!((t_star - 1.0 / 9.0).abs() < 1e-15);
    let f = PolynomialMap::univariate(&[0.0, 0.0, 1.0]);
    let t = 0.9 * t_star;
    let sums: Vec<f64> = (1..=8).map(|n| bseries_autonomous(&f, &[1.0], t, n).unwrap()[0]).collect();
    for w in sums.windows(3) {
        assert!((w[2] - w[1]).abs() < (w[1] - w[0]).abs());
    }
    assert!((sums[7] - 1.0 / (1.0 - t)).abs() < t.powi(9) * 2.0);
    let cfg = SeriesStepConfig::new(8).unwrap().with_radius(t_star);
    assert!(bseries_autonomous_checked(&f, &[1.0], 2.0 * t_star, &cfg).is_ok());
    assert!(SeriesStepConfig::new(0).is_err());
}

#[test]
fn solution_coefficients_of_products_vanish() {
    let x = wave_lift(1.0, 16, 3);
    let fam = planar_family();
    let y = branched::increments::GridPath::from_fn(x.grid().clone(), 2, |t| vec![t, 1.0 - t]);
    let c = controlled_solution(&fam, x, &y).unwrap();
    let pair: Forest = "0 1".parse().unwrap();
    assert_eq!(c.coeff(&pair).unwrap().max_abs(), 0.0);
}

proptest! {
    #[test]
    fn repeated_fields_collapse_labels(c in prop::collection::vec(-2i64..=2, 4), d in 1usize..=3, e in -3i64..=3) {
        let coeffs: Vec<BigRational> = c.iter().map(|&v| q(v, 3)).collect();
        let fam = VectorFieldFamily::repeated(rational_poly(&coeffs), d).unwrap();
        let g: Vec<BigRational> = coeffs.iter().map(|v| v * BigRational::from_integer((d as i64).into())).collect();
        let eta = [q(e, 4)];
        let h = q(1, 3);
        let step = bseries_step(&fam, &eta, 3, |t| identity_increment(t, &h)).unwrap();
        let auto = bseries_autonomous(&PolynomialMap::univariate(&g), &eta, h, 3).unwrap();
        prop_assert_eq!(&eta[0] + &step[0], auto[0].clone());
    }

    #[test]
    fn scaling_the_field_scales_by_degree(c in prop::collection::vec(-3.0f64..3.0, 3), lam in -2.0f64..2.0, xi in -1.0f64..1.0) {
        let f = PolynomialMap::univariate(&c);
        let g = PolynomialMap::univariate(&c.iter().map(|v| v * lam).collect::<Vec<_>>());
        let fam_f = VectorFieldFamily::new(vec![Arc::new(f) as Arc<dyn SmoothMap>]).unwrap();
        let fam_g = VectorFieldFamily::new(vec![Arc::new(g) as Arc<dyn SmoothMap>]).unwrap();
        for t in branched::forest::enumerate_trees(4, 1).unwrap() {
            let a = elementary_differential(&fam_f, &t, &[xi]).unwrap()[0];
            let b = elementary_differential(&fam_g, &t, &[xi]).unwrap()[0];
            let want = a * lam.powi(t.degree() as i32);
            prop_assert!((b - want).abs() <= 1e-10 * (1.0 + want.abs()));
        }
    }
}
