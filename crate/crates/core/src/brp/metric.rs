use super::{truncation_degree, BranchedRoughPath};
use crate::error::{Error, Result};
use crate::forest::{enumerate_forests, Forest};
use crate::hopf::QGamma;
use crate::increments::{holder_norm2, same_grid};

/// Relative slack allowed when comparing a measured norm with its budget.
const BUDGET_SLACK: f64 = 1e-9;

/// `d_γ(X, Y) = Σ_{|f| ≤ n} ‖X^f − Y^f‖_{γ|f|}` over nonempty forests, with
/// `n` the largest integer such that `nγ ≤ 1`.
pub fn distance(x: &BranchedRoughPath, y: &BranchedRoughPath) -> Result<f64> {
    same_grid(x.grid(), y.grid())?;
    if (x.gamma() - y.gamma()).abs() > 1e-15 {
        return Err(Error::InvalidInput(format!("roughness differs: {} vs {}", x.gamma(), y.gamma())));
    }
    if x.alphabet() != y.alphabet() {
        return Err(Error::DimensionMismatch { left: x.alphabet(), right: y.alphabet() });
    }
    let n = truncation_degree(x.gamma());
    for p in [x, y] {
        if p.level() < n {
            return Err(Error::MissingLevel { have: p.level(), need: n });
        }
    }
    let mut total = 0.0;
    for f in enumerate_forests(n, x.alphabet(), false)? {
        let diff = x.forest(&f)?.sub(&y.forest(&f)?)?;
        total += holder_norm2(&diff, x.gamma() * f.degree() as f64)?.norm;
    }
    Ok(total)
}

#[derive(Clone, Debug)]
pub struct BudgetEntry {
    pub forest: Forest,
    /// `‖X^f‖_{γ|f|}`.
    pub norm: f64,
    /// `B A^{|f|} q_γ(f)`.
    pub bound: f64,
}

#[derive(Clone, Debug)]
pub struct BudgetReport {
    pub holds: bool,
    pub entries: Vec<BudgetEntry>,
    pub violations: Vec<BudgetEntry>,
}

fn forest_norms(x: &BranchedRoughPath) -> Result<Vec<(Forest, f64, f64)>> {
    let mut q = QGamma::new(x.gamma())?;
    let mut out = Vec::new();
    for f in enumerate_forests(x.level(), x.alphabet(), false)? {
        let norm = holder_norm2(&x.forest(&f)?, x.gamma() * f.degree() as f64)?.norm;
        let qf = q.forest(&f);
        out.push((f, norm, qf));
    }
    Ok(out)
}

/// Checks `‖X^f‖_{γ|f|} ≤ B A^{|f|} q_γ(f)` for every nonempty forest of
/// degree up to the stored level.
pub fn check_holder_budget(x: &BranchedRoughPath, a: f64, b: f64) -> Result<BudgetReport> {
    if !(0.0..=1.0).contains(&b) || a.is_nan() || a < 0.0 {
        return Err(Error::InvalidInput(format!("need B ∈ [0,1] and A ≥ 0, got A = {a}, B = {b}")));
    }
    let mut entries = Vec::new();
    let mut violations = Vec::new();
    for (forest, norm, qf) in forest_norms(x)? {
        let bound = b * a.powi(forest.degree() as i32) * qf;
        let entry = BudgetEntry { forest, norm, bound };
        if norm > bound * (1.0 + BUDGET_SLACK) {
            violations.push(entry.clone());
        }
        entries.push(entry);
    }
    Ok(BudgetReport { holds: violations.is_empty(), entries, violations })
}

/// Smallest `A` for which the budget holds with the given `B > 0`:
/// `max_f (‖X^f‖ / (B q_γ(f)))^{1/|f|}`.
pub fn minimal_budget_constant(x: &BranchedRoughPath, b: f64) -> Result<f64> {
    if !(b > 0.0 && b <= 1.0) {
        return Err(Error::InvalidInput(format!("need B ∈ (0,1], got {b}")));
    }
    let mut a: f64 = 0.0;
    for (f, norm, qf) in forest_norms(x)? {
        a = a.max((norm / (b * qf)).powf(1.0 / f.degree() as f64));
    }
    Ok(a)
}
