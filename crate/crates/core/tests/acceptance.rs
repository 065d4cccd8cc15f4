//! Acceptance run: one PASS/FAIL line per criterion. Run with
//! `cargo test --test acceptance -- --nocapture` to see the table when
//! everything passes.

mod common;

use std::sync::Arc;
use std::time::Instant;

use branched::brp::*;
use branched::bseries::{controlled_solution, defect_orders, local_order_study, loglog_slope, sigma_collapse};
use branched::controlled::{solve_rde, PolynomialMap, RdeOptions, SmoothMap, VectorFieldFamily};
use branched::forest::{enumerate_forests, enumerate_trees};
use branched::hopf::*;
use branched::increments::*;
use branched::quadrature::QuadratureRule;
use branched::{Forest, Tree};
use common::*;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn hopf_exactness() -> Verdict {
    let mut failures = Vec::new();
    let mut checked = 0usize;
    for (deg, labels) in [(6, 1), (4, 2)] {
        let forests = enumerate_forests(deg, labels, false).unwrap();
        for f in &forests {
            checked += 1;
            let (l, r) = coassociativity_sides(f);
            let (rl, rr) = reduced_coassociativity_sides(f).unwrap();
            if !(counit_holds(f) && grading_holds(f) && l == r && rl == rr) {
                failures.push(f.to_string());
            }
            if let Some(t) = f.as_tree() {
                if coproduct(t) != coproduct_recursive(t)
                    || reduced_coproduct(f).unwrap() != reduced_coproduct_recursive(t)
                {
                    failures.push(format!("cuts {t}"));
                }
            }
        }
        for f in &forests {
            for g in forests.iter().filter(|g| f.degree() + g.degree() <= deg && *g >= f) {
                checked += 1;
                if forest_coproduct(&f.product(g)) != forest_coproduct(f).mul(&forest_coproduct(g)) {
                    failures.push(format!("{f} · {g}"));
                }
            }
        }
    }
    verdict(failures.is_empty(), format!("{checked} identities, failures {failures:?}"))
}

fn golden_coproducts() -> Verdict {
    let table = parse_coproduct_table(DEGREE_THREE_COPRODUCTS);
    let bad: Vec<String> =
        table.iter().filter(|(f, want)| &reduced_coproduct(f).unwrap() != want).map(|(f, _)| f.to_string()).collect();
    verdict(table.len() == 6 && bad.is_empty(), format!("{} lines, mismatches {bad:?}", table.len()))
}

fn tree_binomial() -> Verdict {
    let mut rng = StdRng::seed_from_u64(7);
    let pairs: Vec<(BigRational, BigRational)> = (0..20)
        .map(|_| {
            let a = BigRational::new(rng.gen_range(-50i64..=50).into(), rng.gen_range(1i64..=30).into());
            let b = BigRational::new(rng.gen_range(-50i64..=50).into(), rng.gen_range(1i64..=30).into());
            (a, b)
        })
        .collect();
    let trees = enumerate_trees(7, 1).unwrap();
    let mut bad = 0;
    for t in &trees {
        for (a, b) in &pairs {
            if !tree_binomial_check(t, a, b) {
                bad += 1;
            }
        }
    }
    verdict(bad == 0, format!("{} trees × 20 pairs, {bad} failures", trees.len()))
}

fn identity_oracle() -> Verdict {
    let grid = Arc::new(Grid::uniform(1.0, 256).unwrap());
    let x = lift_smooth(&SmoothDriver::identity(grid.clone(), QuadratureRule::Simpson), 4).unwrap();
    let mut worst = 0.0f64;
    for (t, v) in x.iter() {
        let fact = t.factorial().to_f64().unwrap();
        for i in 1..grid.len() {
            for j in 0..i {
                let want = (grid.t(i) - grid.t(j)).powi(t.degree() as i32) / fact;
                worst = worst.max((v.at(i, j) - want).abs() / want);
            }
        }
    }
    verdict(worst <= 1e-6, format!("max relative error {worst:.3e}"))
}

fn multiplicativity() -> Verdict {
    let grid = Arc::new(Grid::uniform(1.0, 256).unwrap());
    let drv = SmoothDriver::from_fn(grid, 2, QuadratureRule::Simpson, |t| vec![t, t * t / 2.0]).unwrap();
    let x = lift_smooth(&drv, 4).unwrap();
    let d = check_multiplicativity(&x).unwrap().max_defect;
    verdict(d <= 1e-6, format!("max defect {d:.3e} over all triples"))
}

fn lambda_contract() -> Verdict {
    let grid = Arc::new(Grid::uniform(1.0, 128).unwrap());
    let mut algebra = 0.0f64;
    let mut slack = 0.0f64;
    for case in SEWING_CORPUS {
        let g = germ(&grid, case);
        let rep = sew_with_report(&g, 2.0).unwrap();
        let d = coboundary2(&rep.sewn.lambda_part).add_scaled(-1.0, coboundary2(&g)).unwrap();
        algebra = algebra.max(d.max_abs(1));
        slack = slack.max(rep.lambda.norm / rep.bound);
    }
    // Riemann sums of δf on dyadic refinements, compared on the coarse pairs.
    let coarse = 16;
    let target = 0.5; // 2^{−(μ−1)} with μ = 2
    let mut rates = Vec::new();
    for case in SEWING_CORPUS {
        let sums: Vec<(usize, Increment2)> = (0..5)
            .map(|k| {
                let m = coarse << k;
                let g = Arc::new(Grid::uniform(1.0, m).unwrap());
                (1 << k, riemann_sum(&germ(&g, case)))
            })
            .collect();
        let diffs: Vec<f64> = sums
            .windows(2)
            .map(|w| {
                let (ra, a) = (&w[0].0, &w[0].1);
                let (rb, b) = (&w[1].0, &w[1].1);
                let mut m = 0.0f64;
                for i in 1..=coarse {
                    for j in 0..i {
                        m = m.max((a.at(i * ra, j * ra) - b.at(i * rb, j * rb)).abs());
                    }
                }
                m
            })
            .collect();
        rates.extend(diffs.windows(2).map(|w| w[1] / w[0]));
    }
    let (lo, hi) = rates.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &r| (l.min(r), h.max(r)));
    let pass = algebra <= 1e-10 && slack <= 1.05 && lo >= 0.85 * target && hi <= 1.15 * target;
    verdict(
        pass,
        format!("δΛ defect {algebra:.2e}, norm ratio {slack:.3} (≤ 1.05), refinement rates in [{lo:.3}, {hi:.3}] vs {target}"),
    )
}

fn extension() -> Verdict {
    let grid = Arc::new(Grid::uniform(1.0, 512).unwrap());
    let drv = SmoothDriver::from_fn(grid, 2, QuadratureRule::Simpson, wave).unwrap();
    let direct = lift_smooth_with_gamma(&drv, 4, 0.45).unwrap();
    let mut worst = 0.0f64;
    for target in [3, 4] {
        let ext = extend(&direct.restrict(2), target).unwrap();
        for t in ext.trees().iter().filter(|t| t.degree() > 2) {
            worst = worst.max(ext.tree(t).unwrap().sup_relative_diff(direct.tree(t).unwrap()).unwrap());
        }
    }
    verdict(worst <= 1e-4, format!("sup relative difference {worst:.3e}"))
}

fn correction() -> Verdict {
    let grid = Arc::new(Grid::uniform(1.0, 128).unwrap());
    let drv = SmoothDriver::from_fn(grid.clone(), 2, QuadratureRule::Simpson, |t| vec![t, t * t / 2.0]).unwrap();
    let clean = lift_smooth_with_gamma(&drv, 2, 0.4).unwrap();
    let mut almost = clean.clone();
    let mut oracle = clean.clone();
    for (k, t) in clean.trees().iter().filter(|t| t.degree() == 2).enumerate() {
        let eps = 0.2 * (k as f64 + 1.0) * if k % 2 == 0 { 1.0 } else { -1.0 };
        let p = Increment2::from_times_fn(grid.clone(), 1, |a, b, o| o[0] = eps * (a - b).powi(2) * (1.0 + b));
        almost.set_tree(t, clean.tree(t).unwrap().add(&p).unwrap()).unwrap();
        // Only the Λ-part of the perturbation is removable; its Riemann sum stays.
        oracle.set_tree(t, clean.tree(t).unwrap().add(&riemann_sum(&p)).unwrap()).unwrap();
    }
    let c = correct_almost(&almost, 1.2).unwrap();
    let mut worst = 0.0f64;
    for (t, v) in c.path.iter() {
        worst = worst.max(v.sup_relative_diff(oracle.tree(t).unwrap()).unwrap());
    }
    let defect = check_multiplicativity(&c.path).unwrap().max_defect;
    verdict(worst <= 1e-6 && defect <= 1e-8, format!("sup relative error {worst:.3e}, defect {defect:.3e}"))
}

fn non_geometric() -> Verdict {
    let grid = Arc::new(Grid::uniform(1.0, 64).unwrap());
    let drv = SmoothDriver::from_fn(grid.clone(), 2, QuadratureRule::Simpson, |t| vec![t, t * t / 2.0]).unwrap();
    let c = 0.3;
    let ito = ito_level2(&drv, c).unwrap();
    let geo = ito_level2(&drv, 0.0).unwrap();
    let want = Increment2::from_times_fn(grid, 1, |t, s, o| o[0] = -2.0 * c * (t - s));
    let mut err = 0.0f64;
    for a in 0..2u16 {
        let aa = Forest::from_trees(vec![Tree::leaf(a), Tree::leaf(a)]);
        let lad = Tree::new(a, vec![Tree::leaf(a)]);
        let diff = ito.forest(&aa).unwrap().sub(&ito.tree(&lad).unwrap().scale(2.0)).unwrap();
        err = err.max(diff.max_abs_diff(&want).unwrap());
    }
    let d0 = check_multiplicativity(&geo).unwrap().max_defect;
    let d1 = check_multiplicativity(&ito).unwrap().max_defect;
    verdict(err <= 1e-10 && (d0 - d1).abs() <= 1e-12, format!("relation error {err:.2e}, defects {d0:.2e} vs {d1:.2e}"))
}

fn rde_vs_classical() -> Verdict {
    let grid = Arc::new(Grid::uniform(1.0, 1024).unwrap());
    let x = Arc::new(lift_smooth(&SmoothDriver::identity(grid.clone(), QuadratureRule::Simpson), 3).unwrap());
    let lin: Arc<dyn SmoothMap> = Arc::new(PolynomialMap::univariate(&[0.0, 1.0]));
    let fam = VectorFieldFamily::new(vec![lin]).unwrap();
    let eta = 0.7;
    let sol = solve_rde(&fam, x, &[eta], &RdeOptions::default()).unwrap();
    let base = sol.path.base();
    let exp_err = (0..grid.len()).map(|i| (base.at(i)[0] - eta * grid.t(i).exp()).abs()).fold(0.0, f64::max);

    let fam = planar_family();
    let eta = [0.5, -0.2];
    let coarse = 16;
    let reference: Vec<Vec<f64>> =
        (0..=coarse).map(|i| rk4(&fam, &wave_velocity, &eta, 0.0, i as f64 / coarse as f64, 64 * i.max(1))).collect();
    let ms = [32, 64, 128, 256];
    let errs: Vec<f64> = ms
        .iter()
        .map(|&m| {
            let sol = solve_rde(&fam, wave_lift(1.0, m, 3), &eta, &RdeOptions::default()).unwrap();
            let stride = m / coarse;
            (0..=coarse)
                .flat_map(|i| {
                    let y = sol.path.base().at(i * stride).to_vec();
                    y.into_iter().zip(reference[i].clone()).map(|(a, b)| (a - b).abs())
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let h: Vec<f64> = ms.iter().map(|&m| 1.0 / m as f64).collect();
    let order = loglog_slope(&h, &errs);
    let decreasing = errs.windows(2).all(|w| w[1] < w[0]);
    verdict(
        exp_err <= 1e-6 && decreasing && order >= 1.0,
        format!(
            "|y − ηe^t| = {exp_err:.2e}; planar errors [{}], order {order:.2}",
            errs.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn bseries_order() -> Verdict {
    let x = wave_lift(0.25, 256, 3);
    let fam = planar_family();
    let eta = [0.5, -0.2];
    let steps: Vec<usize> = (2..=7).map(|k| 256 >> k).collect();
    let grid = x.grid().clone();
    let rows = local_order_study(&fam, &x, &eta, &[1, 2, 3], &steps, |j| {
        rk4(&fam, &wave_velocity, &eta, 0.0, grid.t(j), 2000)
    })
    .unwrap();
    let slopes: Vec<f64> = (1..=3).map(|n| rows.iter().find(|r| r.order == n).unwrap().slope).collect();
    let slopes_ok = slopes.iter().enumerate().all(|(i, s)| (s - (i + 2) as f64).abs() <= 0.3);

    // Σ_{|τ|=m} 1/(σ(τ)τ!) against 1/m!, summed here from the enumeration.
    let mut collapse = Vec::new();
    let mut fact = BigInt::one();
    for m in 1..=6usize {
        fact *= BigInt::from(m);
        let mut sum = BigRational::zero();
        for t in enumerate_trees(m, 1).unwrap().into_iter().filter(|t| t.degree() == m) {
            sum += BigRational::new(BigInt::one(), BigInt::from(t.symmetry() * t.factorial()));
        }
        assert_eq!(sum, sigma_collapse(m).unwrap());
        collapse.push((m, sum.clone(), sum == BigRational::new(BigInt::one(), fact.clone())));
    }
    let off: Vec<String> = collapse.iter().filter(|c| !c.2).map(|(m, s, _)| format!("m={m}: {s}")).collect();
    verdict(
        slopes_ok && off.is_empty(),
        format!("slopes {slopes:.2?} for N = 1, 2, 3; σ-collapse differs from 1/m! at [{}]", off.join(", ")),
    )
}

fn defect_ordering() -> Verdict {
    let x = wave_lift(1.0, 256, 4);
    let fam = planar_family();
    let sol = solve_rde(&fam, x.clone(), &[0.5, -0.2], &RdeOptions::default()).unwrap();
    let y = controlled_solution(&fam, x, sol.path.base()).unwrap();
    let orders = defect_orders(&y, &[4, 8, 16, 32, 64]).unwrap();
    let bound_ok = orders.iter().all(|o| o.slope >= 0.8 * o.predicted);
    let range = |deg: usize| {
        orders
            .iter()
            .filter(|o| o.degree == deg && o.slope.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), o| (l.min(o.slope), h.max(o.slope)))
    };
    let ranges: Vec<(f64, f64)> = (0..4).map(range).collect();
    let monotone = ranges.windows(2).all(|w| w[1].1 < w[0].0);
    verdict(bound_ok && monotone, format!("slope ranges by degree 0..3: {ranges:.2?}"))
}

fn neoclassical() -> Verdict {
    let exact = (1..=40).all(|n| neoclassical_ratio(n, 1.0, 0.75, 1.0).unwrap() == 1.0);
    let ratios = [0.1, 0.5, 1.0, 2.0, 10.0];
    let mut notes = Vec::new();
    let mut pass = exact;
    for gamma in [0.3, 0.5, 0.7] {
        let rows = neoclassical_sweep(&[gamma], 200, &ratios).unwrap();
        let sup = |lo: usize, hi: usize| {
            rows.iter().filter(|r| (lo..=hi).contains(&r.n)).map(|r| r.value).fold(0.0f64, f64::max)
        };
        let (all, early, late) = (sup(1, 200), sup(50, 100), sup(100, 200));
        let ok = all.is_finite() && late <= 1.05 * early;
        pass &= ok;
        notes.push(format!("γ={gamma}: sup {all:.3}, late/early {:.3}", late / early));
    }
    verdict(pass, format!("γ=1 exact: {exact}; {}", notes.join("; ")))
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Verdict); 13] = [
        ("Hopf exactness", hopf_exactness),
        ("Golden coproduct table", golden_coproducts),
        ("Tree binomial", tree_binomial),
        ("Identity-path oracle", identity_oracle),
        ("Tree multiplicativity", multiplicativity),
        ("Λ contract", lambda_contract),
        ("Extension", extension),
        ("Almost rough path correction", correction),
        ("Non-geometricity", non_geometric),
        ("RDE vs classical", rde_vs_classical),
        ("B-series order", bseries_order),
        ("Remainder ordering", defect_ordering),
        ("Neo-classical variant", neoclassical),
    ];
    let mut failed = Vec::new();
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = run();
        let secs = start.elapsed().as_secs_f64();
        println!("{:>2} {} {name}: {} [{secs:.1} s]", k + 1, if v.pass { "PASS" } else { "FAIL" }, v.detail);
        if !v.pass {
            failed.push(k + 1);
        }
    }
    assert!(failed.is_empty(), "criteria failed: {failed:?}");
}
