use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{Context, Result};
use branched::brp::{
    check_multiplicativity_sampled, correct_almost, extend_with_report, lift_smooth_with_gamma, SmoothDriver,
};
use branched::bseries::{local_order_study, OrderRow};
use branched::controlled::{check_remainders_sampled, solve_rde as solve, FieldSpec, RdeOptions, VectorFieldFamily};
use branched::forest::enumerate_forests;
use branched::hopf::{forest_coproduct, neoclassical_sweep as sweep, reduced_coproduct};
use branched::increments::{sew_with_report, Grid};
use branched::io::{fmt_f64, read_brp, read_increment, read_path_csv, write_brp, write_increment};
use branched::quadrature::QuadratureRule;
use serde_json::{json, Value};

use crate::{
    create, open_read, usage, BseriesArgs, CorrectArgs, DriverKind, ExtendArgs, HopfTableArgs, LiftArgs, SewArgs, Sink,
    SolveRdeArgs, SweepArgs,
};

fn csv_quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

fn stride_for(intervals: usize) -> usize {
    intervals.div_ceil(256)
}

fn grid_meta(g: &Grid) -> Value {
    json!({"start": g.start(), "end": g.end(), "intervals": g.intervals(), "uniform": g.is_uniform()})
}

pub fn hopf_table(a: &HopfTableArgs, sink: &mut Sink) -> Result<bool> {
    if a.labels == 0 {
        return Err(usage("--labels must be positive"));
    }
    let forests = enumerate_forests(a.max_degree, a.labels, false)?;
    sink.header(
        "hopf-table",
        json!({"max_degree": a.max_degree, "labels": a.labels, "coproduct": if a.full { "full" } else { "reduced" }}),
    )?;
    let w = sink.writer();
    writeln!(w, "forest,degree,tree_factorial,symmetry,coproduct")?;
    for f in &forests {
        let cop = if a.full { forest_coproduct(f) } else { reduced_coproduct(f)? };
        let terms: Vec<Value> =
            cop.iter().map(|(l, r, c)| Ok(json!([c.to_string().parse::<i64>()?, l, r]))).collect::<Result<_>>()?;
        writeln!(
            w,
            "{},{},{},{},{}",
            csv_quote(&serde_json::to_string(f)?),
            f.degree(),
            f.factorial(),
            f.symmetry(),
            csv_quote(&serde_json::to_string(&terms)?)
        )?;
    }
    Ok(true)
}

pub fn lift(a: &LiftArgs, sink: &mut Sink) -> Result<bool> {
    let rule: QuadratureRule = a.rule.parse().map_err(|e| usage(format!("--rule: {e}")))?;
    if a.degree == 0 {
        return Err(usage("--degree must be at least 1"));
    }
    let path = read_path_csv(open_read(&a.driver)?).with_context(|| format!("reading {}", a.driver.display()))?;
    let drv = SmoothDriver::new(path, rule)?;
    let gamma = a.gamma.unwrap_or(1.0 / a.degree as f64);
    let x = lift_smooth_with_gamma(&drv, a.degree, gamma)?;
    sink.header(
        "lift",
        json!({"rule": rule.to_string(), "degree": a.degree, "gamma": gamma, "grid": grid_meta(x.grid())}),
    )?;
    write_brp(&x, sink.writer())?;
    Ok(true)
}

pub fn extend(a: &ExtendArgs, sink: &mut Sink) -> Result<bool> {
    let x = read_brp(open_read(&a.brp)?).with_context(|| format!("reading {}", a.brp.display()))?;
    let stride = stride_for(x.grid().intervals());
    let (y, report) = extend_with_report(&x, a.degree, stride)?;
    log::info!("extension multiplicativity defect {:e} (stride {stride})", report.defect.max_defect);
    sink.header(
        "extend",
        json!({"from_level": x.level(), "to_level": a.degree, "gamma": x.gamma(), "grid": grid_meta(x.grid()),
               "multiplicativity_defect": report.defect.max_defect, "stride": stride}),
    )?;
    write_brp(&y, sink.writer())?;
    Ok(true)
}

pub fn correct(a: &CorrectArgs, sink: &mut Sink) -> Result<bool> {
    let x = read_brp(open_read(&a.brp)?).with_context(|| format!("reading {}", a.brp.display()))?;
    let c = correct_almost(&x, a.z)?;
    let stride = stride_for(x.grid().intervals());
    let defect = check_multiplicativity_sampled(&c.path, stride)?;
    let norms: Vec<Value> = c.correction_norms.iter().map(|(t, v)| json!({"tree": t, "norm": v})).collect();
    sink.header(
        "correct",
        json!({"z": a.z, "gamma": x.gamma(), "level": x.level(), "grid": grid_meta(x.grid()),
               "multiplicativity_defect": defect.max_defect, "stride": stride, "correction_norms": norms}),
    )?;
    write_brp(&c.path, sink.writer())?;
    Ok(true)
}

pub fn sew(a: &SewArgs, sink: &mut Sink) -> Result<bool> {
    let header = a.header.clone().unwrap_or_else(|| a.input.with_extension("json"));
    let (g, _) = read_increment(open_read(&a.input)?, open_read(&header)?)
        .with_context(|| format!("reading {} with {}", a.input.display(), header.display()))?;
    let rep = sew_with_report(&g, a.mu)?;
    if let Some(prefix) = &a.prefix {
        let with = |ext: &str| -> PathBuf {
            let mut s = prefix.clone().into_os_string();
            s.push(ext);
            PathBuf::from(s)
        };
        for (name, inc, mu) in [("path", &rep.sewn.path_increment, None), ("lambda", &rep.sewn.lambda_part, Some(a.mu))]
        {
            let mut csv = create(&with(&format!(".{name}.csv")))?;
            let mut side = create(&with(&format!(".{name}.json")))?;
            write_increment(inc, mu, &mut csv, &mut side)?;
            csv.flush()?;
            side.flush()?;
        }
    }
    sink.json(&json!({
        "schema_version": branched::io::SCHEMA_VERSION,
        "command": "sew",
        "mu": a.mu,
        "grid": grid_meta(g.grid()),
        "delta_g_norm": rep.delta_g.norm,
        "lambda_norm": rep.lambda.norm,
        "bound": rep.bound,
        "stride": rep.stride,
    }))?;
    Ok(true)
}

fn read_family(p: &std::path::Path) -> Result<VectorFieldFamily> {
    let spec: FieldSpec = serde_json::from_reader(open_read(p)?).with_context(|| format!("parsing {}", p.display()))?;
    Ok(spec.into_family()?)
}

pub fn solve_rde(a: &SolveRdeArgs, sink: &mut Sink) -> Result<bool> {
    let x = Arc::new(read_brp(open_read(&a.brp)?).with_context(|| format!("reading {}", a.brp.display()))?);
    let fam = read_family(&a.field)?;
    if a.eta.len() != fam.dim() {
        return Err(usage(format!("--eta has {} entries, the field lives in R^{}", a.eta.len(), fam.dim())));
    }
    let opts = RdeOptions { tol: a.tol, max_iter: a.max_iter, max_splits: a.max_splits, uniqueness: false };
    let sol = solve(&fam, x.clone(), &a.eta, &opts)?;
    let y = &sol.path;
    let k = y.dim();
    let names: Vec<String> = y.forests().iter().map(|f| f.to_string()).collect();
    sink.header(
        "solve-rde",
        json!({"tol": a.tol, "gamma": x.gamma(), "n": y.n(), "grid": grid_meta(x.grid()), "coefficients": names,
               "windows": sol.windows.len(), "splits": sol.splits}),
    )?;
    let w = sink.writer();
    let mut cols = vec!["t".to_string()];
    cols.extend((0..k).map(|j| format!("y{j}")));
    for c in 0..names.len() {
        cols.extend((0..k).map(|j| format!("c{c}_{j}")));
    }
    writeln!(w, "{}", cols.join(","))?;
    for i in 0..x.grid().len() {
        let mut row = vec![fmt_f64(x.grid().t(i))];
        row.extend(y.base().at(i).iter().map(|v| fmt_f64(*v)));
        for c in y.coeffs() {
            row.extend(c.at(i).iter().map(|v| fmt_f64(*v)));
        }
        writeln!(w, "{}", row.join(","))?;
    }
    if let Some(p) = &a.report {
        let stride = stride_for(x.grid().intervals());
        let rep = check_remainders_sampled(y, stride)?;
        let windows: Vec<Value> = sol
            .windows
            .iter()
            .map(|r| json!({"lo": r.lo, "hi": r.hi, "iterations": r.iterations, "differences": r.differences}))
            .collect();
        let doc = json!({
            "schema_version": branched::io::SCHEMA_VERSION,
            "command": "solve-rde",
            "tol": a.tol,
            "grid": grid_meta(x.grid()),
            "control_defect": rep.control_defect,
            "coefficient_defects": names.iter().zip(&rep.coefficient_defects).map(|(n, d)| json!({"forest": n, "defect": d})).collect::<Vec<_>>(),
            "triple_defect": rep.triple_defect,
            "triple_relative": rep.triple_relative(),
            "stride": rep.stride,
            "windows": windows,
        });
        let mut f = create(p)?;
        serde_json::to_writer_pretty(&mut f, &doc)?;
        writeln!(f)?;
        f.flush()?;
    }
    Ok(true)
}

fn driver_value(kind: DriverKind, d: usize, t: f64) -> Vec<f64> {
    (0..d)
        .map(|a| match kind {
            DriverKind::Identity => t,
            DriverKind::Trig => ((a + 1) as f64 * t).sin() / (a + 1) as f64,
        })
        .collect()
}

fn driver_velocity(kind: DriverKind, d: usize, t: f64) -> Vec<f64> {
    (0..d)
        .map(|a| match kind {
            DriverKind::Identity => 1.0,
            DriverKind::Trig => ((a + 1) as f64 * t).cos(),
        })
        .collect()
}

/// Classical RK4 for `y' = Σ_a f_a(y) v_a(t)`.
fn rk4(f: &VectorFieldFamily, kind: DriverKind, eta: &[f64], t1: f64, steps: usize) -> Result<Vec<f64>> {
    let d = f.len();
    let rhs = |t: f64, y: &[f64]| -> Result<Vec<f64>> {
        let v = driver_velocity(kind, d, t);
        let mut out = vec![0.0; y.len()];
        for (a, field) in f.fields().iter().enumerate() {
            for (o, w) in out.iter_mut().zip(field.eval(y)?) {
                *o += w * v[a];
            }
        }
        Ok(out)
    };
    let h = t1 / steps as f64;
    let mut y = eta.to_vec();
    let shift = |y: &[f64], c: f64, k: &[f64]| -> Vec<f64> { y.iter().zip(k).map(|(a, b)| a + c * b).collect() };
    for i in 0..steps {
        let t = i as f64 * h;
        let k1 = rhs(t, &y)?;
        let k2 = rhs(t + h / 2.0, &shift(&y, h / 2.0, &k1))?;
        let k3 = rhs(t + h / 2.0, &shift(&y, h / 2.0, &k2))?;
        let k4 = rhs(t + h, &shift(&y, h, &k3))?;
        for j in 0..y.len() {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
    }
    Ok(y)
}

pub fn bseries_compare(a: &BseriesArgs, sink: &mut Sink) -> Result<bool> {
    let fam = read_family(&a.field)?;
    if a.orders.is_empty() || a.orders.contains(&0) {
        return Err(usage("--orders must list positive truncation degrees"));
    }
    if a.refinements < 2 || a.refinements > 12 {
        return Err(usage("--refinements must lie in 2..=12"));
    }
    if !(a.h_max > 0.0) {
        return Err(usage("--h-max must be positive"));
    }
    let eta = if a.eta.is_empty() { vec![0.5; fam.dim()] } else { a.eta.clone() };
    if eta.len() != fam.dim() {
        return Err(usage(format!("--eta has {} entries, the field lives in R^{}", eta.len(), fam.dim())));
    }
    let d = fam.len();
    let m = 1usize << (a.refinements + 1);
    let grid = Arc::new(Grid::uniform(a.h_max, m)?);
    let kind = a.driver;
    let drv = SmoothDriver::from_fn(grid.clone(), d, QuadratureRule::Simpson, |t| driver_value(kind, d, t))?;
    let degree = *a.orders.iter().max().expect("nonempty");
    let x = lift_smooth_with_gamma(&drv, degree, 1.0 / degree as f64)?;
    let steps: Vec<usize> = (0..a.refinements).map(|k| m >> k).collect();
    let refs: Vec<Result<Vec<f64>>> = steps.iter().map(|&j| rk4(&fam, kind, &eta, grid.t(j), 4096)).collect();
    let refs: Vec<Vec<f64>> = refs.into_iter().collect::<Result<_>>()?;
    let rows = local_order_study(&fam, &x, &eta, &a.orders, &steps, |j| {
        refs[steps.iter().position(|&s| s == j).expect("known step")].clone()
    })?;
    sink.header(
        "bseries-compare",
        json!({"driver": kind, "orders": a.orders, "eta": eta, "grid": grid_meta(&grid), "reference": "rk4, 4096 steps"}),
    )?;
    let w = sink.writer();
    writeln!(w, "order,h,error,order_estimate,regression_slope")?;
    let mut prev: Option<&OrderRow> = None;
    for r in &rows {
        let est = match prev {
            Some(p) if p.order == r.order && p.error > 0.0 && r.error > 0.0 => {
                fmt_f64((p.error / r.error).ln() / (p.h / r.h).ln())
            }
            _ => String::new(),
        };
        writeln!(w, "{},{},{},{},{}", r.order, fmt_f64(r.h), fmt_f64(r.error), est, fmt_f64(r.slope))?;
        prev = Some(r);
    }
    Ok(true)
}

pub fn neoclassical_sweep(a: &SweepArgs, sink: &mut Sink) -> Result<bool> {
    if a.n_max == 0 {
        return Err(usage("--n-max must be positive"));
    }
    let rows = sweep(&a.gamma_grid, a.n_max, &a.ratio_grid)?;
    sink.header(
        "neoclassical-sweep",
        json!({"gamma_grid": a.gamma_grid, "n_max": a.n_max, "ratio_grid": a.ratio_grid, "b": 1.0}),
    )?;
    let w = sink.writer();
    writeln!(w, "gamma,n,ratio_ab,value")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", fmt_f64(r.gamma), r.n, fmt_f64(r.ratio_ab), fmt_f64(r.value))?;
    }
    Ok(true)
}
