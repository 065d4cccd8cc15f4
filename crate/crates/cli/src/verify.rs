use std::sync::Arc;

use anyhow::Result;
use branched::brp::{check_multiplicativity_sampled, lift_smooth, SmoothDriver};
use branched::forest::{enumerate_forests, enumerate_trees};
use branched::hopf::{
    coassociativity_sides, coproduct, coproduct_recursive, counit_holds, forest_coproduct, grading_holds,
    reduced_coassociativity_sides, reduced_coproduct, reduced_coproduct_recursive, tree_binomial_check,
};
use branched::increments::Grid;
use branched::quadrature::QuadratureRule;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde_json::{json, Value};

use crate::{usage, Sink, Suite, VerifyArgs};

struct Check {
    suite: &'static str,
    name: &'static str,
    cases: usize,
    failures: Vec<String>,
}

impl Check {
    fn new(suite: &'static str, name: &'static str) -> Check {
        Check { suite, name, cases: 0, failures: Vec::new() }
    }

    fn record(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok && self.failures.len() < 10 {
            self.failures.push(what());
        }
    }

    fn to_json(&self) -> Value {
        json!({"suite": self.suite, "name": self.name, "cases": self.cases, "passed": self.failures.is_empty(), "failures": self.failures})
    }
}

fn hopf(max_degree: usize, labels: usize) -> Result<Vec<Check>> {
    let forests = enumerate_forests(max_degree, labels, false)?;
    let mut counit = Check::new("hopf", "counit");
    let mut grading = Check::new("hopf", "grading");
    let mut coassoc = Check::new("hopf", "coassociativity");
    let mut reduced = Check::new("hopf", "reduced coassociativity");
    let mut cuts = Check::new("hopf", "cuts equal recursion");
    let mut hom = Check::new("hopf", "homomorphism");
    for f in &forests {
        counit.record(counit_holds(f), || f.to_string());
        grading.record(grading_holds(f), || f.to_string());
        let (l, r) = coassociativity_sides(f);
        coassoc.record(l == r, || f.to_string());
        let (l, r) = reduced_coassociativity_sides(f)?;
        reduced.record(l == r, || f.to_string());
        if let Some(t) = f.as_tree() {
            let ok = coproduct(t) == coproduct_recursive(t) && reduced_coproduct(f)? == reduced_coproduct_recursive(t);
            cuts.record(ok, || t.to_string());
        }
    }
    for f in &forests {
        for g in forests.iter().filter(|g| f.degree() + g.degree() <= max_degree && *g >= f) {
            let ok = forest_coproduct(&f.product(g)) == forest_coproduct(f).mul(&forest_coproduct(g));
            hom.record(ok, || format!("{f} · {g}"));
        }
    }
    Ok(vec![counit, grading, coassoc, reduced, cuts, hom])
}

fn binomial(max_degree: usize, labels: usize) -> Result<Vec<Check>> {
    let mut c = Check::new("binomial", "tree binomial");
    let pairs: Vec<(BigRational, BigRational)> = (0..20i64)
        .map(|i| {
            let a = BigRational::new((2 * i - 7).into(), (i + 3).into());
            let b = BigRational::new((i * i % 11 + 1).into(), (2 * i + 5).into());
            (a, b)
        })
        .collect();
    for t in enumerate_trees(max_degree, labels)? {
        for (a, b) in &pairs {
            c.record(tree_binomial_check(&t, a, b), || format!("{t} at ({a}, {b})"));
        }
    }
    Ok(vec![c])
}

fn lift(max_degree: usize) -> Result<Vec<Check>> {
    let n = max_degree.min(4);
    let grid = Arc::new(Grid::uniform(1.0, 64)?);
    let x = lift_smooth(&SmoothDriver::identity(grid.clone(), QuadratureRule::Simpson), n)?;
    let mut ident = Check::new("lift", "identity path (t−s)^|τ|/τ!");
    for (t, v) in x.iter() {
        let fact = t.factorial().to_f64().unwrap_or(f64::INFINITY);
        let mut worst = 0.0f64;
        for i in 1..grid.len() {
            for j in 0..i {
                let want = (grid.t(i) - grid.t(j)).powi(t.degree() as i32) / fact;
                worst = worst.max((v.at(i, j) - want).abs() / want.abs());
            }
        }
        ident.record(worst <= 1e-6, || format!("{t}: relative error {worst:e}"));
    }
    let drv = SmoothDriver::from_fn(grid, 2, QuadratureRule::Simpson, |t| vec![t, t * t / 2.0])?;
    let y = lift_smooth(&drv, n)?;
    let rep = check_multiplicativity_sampled(&y, 1)?;
    let mut mult = Check::new("lift", "multiplicativity");
    mult.record(rep.max_defect <= 1e-6, || format!("defect {:e}", rep.max_defect));
    Ok(vec![ident, mult])
}

pub fn run(a: &VerifyArgs, sink: &mut Sink) -> Result<bool> {
    if a.labels == 0 {
        return Err(usage("--labels must be positive"));
    }
    let mut checks = Vec::new();
    let all = matches!(a.suite, Suite::All);
    if all || matches!(a.suite, Suite::Hopf) {
        checks.extend(hopf(a.max_degree, a.labels)?);
    }
    if all || matches!(a.suite, Suite::Binomial) {
        checks.extend(binomial(a.max_degree, a.labels)?);
    }
    if all || matches!(a.suite, Suite::Lift) {
        checks.extend(lift(a.max_degree)?);
    }
    let passed = checks.iter().all(|c| c.failures.is_empty());
    sink.json(&json!({
        "schema_version": branched::io::SCHEMA_VERSION,
        "command": "verify",
        "suite": a.suite,
        "max_degree": a.max_degree,
        "labels": a.labels,
        "passed": passed,
        "checks": checks.iter().map(Check::to_json).collect::<Vec<_>>(),
    }))?;
    Ok(passed)
}
