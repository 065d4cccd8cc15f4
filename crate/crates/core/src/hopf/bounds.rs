use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Pow, ToPrimitive, Zero};

use super::{coproduct, reduced_coproduct};
use crate::error::{Error, Result};
use crate::forest::{Forest, Tree};

/// Exact check of the tree binomial formula
/// `(a+b)^{|τ|} = Σ_{Δτ} τ!/(τ(1)! τ(2)!) a^{|τ(1)|} b^{|τ(2)|}`.
pub fn tree_binomial_check(t: &Tree, a: &BigRational, b: &BigRational) -> bool {
    let n = t.degree();
    let fact = BigRational::from_integer(BigInt::from(t.factorial()));
    let mut rhs = BigRational::zero();
    for (l, r, c) in coproduct(t).iter() {
        let denom = BigInt::from(l.factorial() * r.factorial());
        let w = &fact / BigRational::from_integer(denom) * BigRational::from_integer(c.clone());
        rhs += w * Pow::pow(a, l.degree() as u32) * Pow::pow(b, r.degree() as u32);
    }
    rhs == Pow::pow(&(a + b), n as u32)
}

/// Memoised evaluation of `q_γ`.
#[derive(Clone, Debug)]
pub struct QGamma {
    gamma: f64,
    cache: HashMap<Tree, f64>,
}

impl QGamma {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidGamma(gamma));
        }
        Ok(QGamma { gamma, cache: HashMap::new() })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Multiplicative over forests, `1` on the empty forest.
    pub fn forest(&mut self, f: &Forest) -> f64 {
        f.trees().iter().map(|t| self.tree(t)).product()
    }

    pub fn tree(&mut self, t: &Tree) -> f64 {
        if let Some(&v) = self.cache.get(t) {
            return v;
        }
        let n = t.degree() as f64;
        let v = if n * self.gamma <= 1.0 + 1e-12 {
            1.0
        } else {
            let d = reduced_coproduct(&Forest::from(t.clone())).expect("tree");
            let mut sum = 0.0;
            for (l, r, c) in d.iter() {
                sum += c.to_f64().unwrap() * self.forest(l) * self.forest(r);
            }
            sum / ((self.gamma * n).exp2() - 2.0)
        };
        self.cache.insert(t.clone(), v);
        v
    }

    /// Right-hand side of the full-coproduct form
    /// `2^{-γ|τ|} Σ_{Δτ} q(τ(1)) q(τ(2))`, built from the cached values. It
    /// reproduces `q_γ(τ)` whenever `γ|τ| > 1`.
    pub fn full_form(&mut self, t: &Tree) -> f64 {
        let n = t.degree() as f64;
        let mut sum = 0.0;
        for (l, r, c) in coproduct(t).iter() {
            sum += c.to_f64().unwrap() * self.forest(l) * self.forest(r);
        }
        sum / (self.gamma * n).exp2()
    }
}

/// `q_γ` of a forest.
pub fn q_gamma(f: &Forest, gamma: f64) -> Result<f64> {
    Ok(QGamma::new(gamma)?.forest(f))
}

/// `q_γ(τ)·(τ!)^γ`, the quantity conjectured to stay bounded above and below.
pub fn q_conjecture_ratio(t: &Tree, gamma: f64) -> Result<f64> {
    let q = QGamma::new(gamma)?.tree(t);
    Ok(q * t.factorial().to_f64().unwrap_or(f64::INFINITY).powf(gamma))
}

const NEOCLASSICAL_MAX_N: usize = 10_000;

/// Ratio of the two sides of the variant neo-classical inequality
/// `Σ_k a^{γk} b^{γ(n−k)} / (k!(n−k)!)^γ  ÷  (a+b)^{γn} / (n!)^γ`.
///
/// For `γ = 1` the sum is evaluated exactly in rationals, so the binomial
/// theorem gives exactly `1`. Otherwise the sum is taken in log space.
pub fn neoclassical_ratio(n: usize, gamma: f64, a: f64, b: f64) -> Result<f64> {
    if n > NEOCLASSICAL_MAX_N {
        return Err(Error::ResourceLimit {
            what: "neo-classical sum length",
            needed: n as u128,
            cap: NEOCLASSICAL_MAX_N as u128,
        });
    }
    if n < 1 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidGamma(gamma));
    }
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidInput("a and b must be positive".into()));
    }
    if gamma == 1.0 {
        return Ok(exact_binomial_ratio(n, a, b));
    }
    let mut lf = vec![0.0f64; n + 1];
    for k in 1..=n {
        lf[k] = lf[k - 1] + (k as f64).ln();
    }
    let (la, lb) = (a.ln(), b.ln());
    let logs: Vec<f64> = (0..=n).map(|k| gamma * (k as f64 * la + (n - k) as f64 * lb - lf[k] - lf[n - k])).collect();
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lhs = m + logs.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
    let rhs = gamma * (n as f64 * (a + b).ln() - lf[n]);
    Ok((lhs - rhs).exp())
}

fn exact_binomial_ratio(n: usize, a: f64, b: f64) -> f64 {
    let a = BigRational::from_float(a).expect("finite");
    let b = BigRational::from_float(b).expect("finite");
    let mut fact = vec![BigInt::one()];
    for k in 1..=n {
        let next = &fact[k - 1] * BigInt::from(k);
        fact.push(next);
    }
    let mut lhs = BigRational::zero();
    for k in 0..=n {
        let denom = BigRational::from_integer(&fact[k] * &fact[n - k]);
        lhs += Pow::pow(&a, k as u32) * Pow::pow(&b, (n - k) as u32) / denom;
    }
    let rhs = Pow::pow(&(&a + &b), n as u32) / BigRational::from_integer(fact[n].clone());
    (lhs / rhs).to_f64().unwrap_or(f64::NAN)
}

#[derive(Clone, Debug, PartialEq)]
pub struct NeoclassicalRow {
    pub gamma: f64,
    pub n: usize,
    /// `a/b` with `b = 1`.
    pub ratio_ab: f64,
    pub value: f64,
}

/// Evaluates the neo-classical ratio on `gammas × {1..=n_max} × ratios`
/// with `b = 1` and `a` drawn from `ratios`.
pub fn neoclassical_sweep(gammas: &[f64], n_max: usize, ratios: &[f64]) -> Result<Vec<NeoclassicalRow>> {
    let mut out = Vec::with_capacity(gammas.len() * n_max * ratios.len());
    for &gamma in gammas {
        for n in 1..=n_max {
            for &r in ratios {
                let value = neoclassical_ratio(n, gamma, r, 1.0)?;
                out.push(NeoclassicalRow { gamma, n, ratio_ab: r, value });
            }
        }
    }
    Ok(out)
}

/// Tree analogue of the neo-classical ratio: the full-coproduct sum of
/// `(a^{|τ(1)|} b^{|τ(2)|} / (τ(1)! τ(2)!))^γ` divided by
/// `((a+b)^{|τ|}/τ!)^γ`. Only probed numerically.
pub fn tree_neoclassical_ratio(t: &Tree, gamma: f64, a: f64, b: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidGamma(gamma));
    }
    let ln_fact = |f: &Forest| f.trees().iter().map(|t| t.factorial().to_f64().unwrap().ln()).sum::<f64>();
    let mut lhs = 0.0;
    for (l, r, c) in coproduct(t).iter() {
        let lg = l.degree() as f64 * a.ln() + r.degree() as f64 * b.ln() - ln_fact(l) - ln_fact(r);
        lhs += c.to_f64().unwrap() * (gamma * lg).exp();
    }
    let rhs = (gamma * (t.degree() as f64 * (a + b).ln() - ln_fact(&Forest::from(t.clone())))).exp();
    Ok(lhs / rhs)
}
