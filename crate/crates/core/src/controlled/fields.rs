//! Smooth maps with derivative callbacks, and families of vector fields.

use std::fmt::Debug;
use std::sync::Arc;

use num_traits::{FromPrimitive, Num};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scalars the tree-series machinery can run on: `f64` for numerics and
/// `BigRational` for exact identities.
pub trait Scalar: Clone + Debug + Num + FromPrimitive + Send + Sync + 'static {}

impl<T: Clone + Debug + Num + FromPrimitive + Send + Sync + 'static> Scalar for T {}

/// A map `R^k → R^m` with mixed partial derivatives up to `max_order`.
pub trait SmoothMap<T: Scalar = f64>: Send + Sync {
    fn input_dim(&self) -> usize;

    fn output_dim(&self) -> usize;

    /// Highest derivative order the map can supply.
    fn max_order(&self) -> usize;

    /// Writes `∂_{idx[0]} ⋯ ∂_{idx[m−1]} φ(ξ)` into `out`; an empty `idx`
    /// gives `φ(ξ)`.
    fn derivative(&self, xi: &[T], idx: &[usize], out: &mut [T]) -> Result<()>;

    fn eval(&self, xi: &[T]) -> Result<Vec<T>> {
        let mut out = vec![T::zero(); self.output_dim()];
        self.derivative(xi, &[], &mut out)?;
        Ok(out)
    }
}

fn check_order(order: usize, max: usize) -> Result<()> {
    if order > max {
        Err(Error::MissingDerivative { order })
    } else {
        Ok(())
    }
}

/// One monomial `c · Π ξ_i^{e_i}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monomial<T> {
    #[serde(rename = "c")]
    pub coeff: T,
    #[serde(rename = "e")]
    pub exponents: Vec<u32>,
}

/// Polynomial map; every component is a sum of monomials. Derivatives of
/// all orders are exact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolynomialMap<T = f64> {
    pub input_dim: usize,
    pub components: Vec<Vec<Monomial<T>>>,
}

impl<T: Scalar> PolynomialMap<T> {
    pub fn new(input_dim: usize, components: Vec<Vec<Monomial<T>>>) -> Result<Self> {
        for m in components.iter().flatten() {
            if m.exponents.len() != input_dim {
                return Err(Error::DimensionMismatch { left: m.exponents.len(), right: input_dim });
            }
        }
        Ok(PolynomialMap { input_dim, components })
    }

    /// `ξ ↦ Aξ + b` with `A` given row by row.
    pub fn affine(matrix: &[Vec<T>], offset: &[T]) -> Result<Self> {
        let k = matrix.first().map_or(offset.len(), |r| r.len());
        if matrix.len() != offset.len() {
            return Err(Error::DimensionMismatch { left: matrix.len(), right: offset.len() });
        }
        let mut components = Vec::with_capacity(matrix.len());
        for (row, b) in matrix.iter().zip(offset) {
            if row.len() != k {
                return Err(Error::DimensionMismatch { left: row.len(), right: k });
            }
            let mut c = vec![Monomial { coeff: b.clone(), exponents: vec![0; k] }];
            for (j, a) in row.iter().enumerate() {
                let mut e = vec![0; k];
                e[j] = 1;
                c.push(Monomial { coeff: a.clone(), exponents: e });
            }
            components.push(c);
        }
        PolynomialMap::new(k, components)
    }

    /// Scalar polynomial `Σ c_j ξ^j` in one variable.
    pub fn univariate(coeffs: &[T]) -> Self {
        let c =
            coeffs.iter().enumerate().map(|(j, c)| Monomial { coeff: c.clone(), exponents: vec![j as u32] }).collect();
        PolynomialMap { input_dim: 1, components: vec![c] }
    }

    fn monomial_derivative(m: &Monomial<T>, xi: &[T], counts: &[u32]) -> T {
        let mut v = m.coeff.clone();
        for (i, (&e, &c)) in m.exponents.iter().zip(counts).enumerate() {
            if c > e {
                return T::zero();
            }
            for j in 0..c {
                v = v * T::from_u32(e - j).expect("small integer");
            }
            for _ in 0..e - c {
                v = v * xi[i].clone();
            }
        }
        v
    }
}

impl<T: Scalar> SmoothMap<T> for PolynomialMap<T> {
    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn output_dim(&self) -> usize {
        self.components.len()
    }

    fn max_order(&self) -> usize {
        usize::MAX
    }

    fn derivative(&self, xi: &[T], idx: &[usize], out: &mut [T]) -> Result<()> {
        if xi.len() != self.input_dim {
            return Err(Error::DimensionMismatch { left: xi.len(), right: self.input_dim });
        }
        let mut counts = vec![0u32; self.input_dim];
        for &b in idx {
            if b >= self.input_dim {
                return Err(Error::InvalidInput(format!("derivative index {b} out of range")));
            }
            counts[b] += 1;
        }
        for (o, comp) in out.iter_mut().zip(&self.components) {
            *o = comp.iter().fold(T::zero(), |acc, m| acc + Self::monomial_derivative(m, xi, &counts));
        }
        Ok(())
    }
}

type DerivFn = dyn Fn(&[f64], &[usize], &mut [f64]) -> Result<()> + Send + Sync;

/// A map given by a callback that handles derivatives up to `max_order`.
#[derive(Clone)]
pub struct ClosureMap {
    input_dim: usize,
    output_dim: usize,
    max_order: usize,
    f: Arc<DerivFn>,
}

impl ClosureMap {
    pub fn new<F>(input_dim: usize, output_dim: usize, max_order: usize, f: F) -> ClosureMap
    where
        F: Fn(&[f64], &[usize], &mut [f64]) -> Result<()> + Send + Sync + 'static,
    {
        ClosureMap { input_dim, output_dim, max_order, f: Arc::new(f) }
    }
}

impl SmoothMap for ClosureMap {
    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn output_dim(&self) -> usize {
        self.output_dim
    }

    fn max_order(&self) -> usize {
        self.max_order
    }

    fn derivative(&self, xi: &[f64], idx: &[usize], out: &mut [f64]) -> Result<()> {
        check_order(idx.len(), self.max_order)?;
        (self.f)(xi, idx, out)
    }
}

/// Central finite differences (step `1e−5`) on top of a map that only
/// supplies values. Meant for exploration; derivative noise grows quickly
/// with the order.
pub struct FiniteDifference<M> {
    inner: M,
    max_order: usize,
    step: f64,
}

impl<M: SmoothMap> FiniteDifference<M> {
    pub fn new(inner: M, max_order: usize) -> Self {
        FiniteDifference { inner, max_order, step: 1e-5 }
    }

    fn diff(&self, xi: &mut Vec<f64>, idx: &[usize], out: &mut [f64]) -> Result<()> {
        let Some((&b, rest)) = idx.split_first() else {
            return self.inner.derivative(xi, &[], out);
        };
        let h = self.step;
        let mut lo = vec![0.0; out.len()];
        let orig = xi[b];
        xi[b] = orig + h;
        self.diff(xi, rest, out)?;
        xi[b] = orig - h;
        self.diff(xi, rest, &mut lo)?;
        xi[b] = orig;
        for (o, l) in out.iter_mut().zip(lo) {
            *o = (*o - l) / (2.0 * h);
        }
        Ok(())
    }
}

impl<M: SmoothMap> SmoothMap for FiniteDifference<M> {
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    fn output_dim(&self) -> usize {
        self.inner.output_dim()
    }

    fn max_order(&self) -> usize {
        self.max_order
    }

    fn derivative(&self, xi: &[f64], idx: &[usize], out: &mut [f64]) -> Result<()> {
        check_order(idx.len(), self.max_order)?;
        self.diff(&mut xi.to_vec(), idx, out)
    }
}

/// Vector fields `f_a: R^k → R^k`, one per driver component.
#[derive(Clone)]
pub struct VectorFieldFamily<T: Scalar = f64> {
    dim: usize,
    fields: Vec<Arc<dyn SmoothMap<T>>>,
}

impl<T: Scalar> VectorFieldFamily<T> {
    pub fn new(fields: Vec<Arc<dyn SmoothMap<T>>>) -> Result<Self> {
        let first = fields.first().ok_or_else(|| Error::InvalidInput("empty vector field family".into()))?;
        let dim = first.input_dim();
        for f in &fields {
            if f.input_dim() != dim || f.output_dim() != dim {
                return Err(Error::DimensionMismatch { left: f.output_dim(), right: dim });
            }
        }
        Ok(VectorFieldFamily { dim, fields })
    }

    /// The same field for each of `d` driver components.
    pub fn repeated(field: Arc<dyn SmoothMap<T>>, d: usize) -> Result<Self> {
        Self::new(vec![field; d])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn field(&self, a: usize) -> &Arc<dyn SmoothMap<T>> {
        &self.fields[a]
    }

    pub fn fields(&self) -> &[Arc<dyn SmoothMap<T>>] {
        &self.fields
    }

    pub fn max_order(&self) -> usize {
        self.fields.iter().map(|f| f.max_order()).min().unwrap_or(0)
    }

    /// `true` when every field is the same object, so label sums collapse.
    pub fn all_equal(&self) -> bool {
        self.fields.windows(2).all(|w| Arc::ptr_eq(&w[0], &w[1]))
    }
}

impl VectorFieldFamily<f64> {
    /// Largest difference between `∂_{b̄}` and `∂_{π b̄}` over all
    /// multi-indices of the given order and all permutations `π` that
    /// reverse or rotate them, at `xi`.
    pub fn symmetry_defect(&self, xi: &[f64], order: usize) -> Result<f64> {
        let k = self.dim;
        let mut worst: f64 = 0.0;
        let mut a = vec![0.0; k];
        let mut b = vec![0.0; k];
        for f in &self.fields {
            for flat in 0..k.pow(order as u32) {
                let idx: Vec<usize> = (0..order).map(|i| flat / k.pow(i as u32) % k).collect();
                f.derivative(xi, &idx, &mut a)?;
                let mut rev = idx.clone();
                rev.reverse();
                let mut rot = idx.clone();
                rot.rotate_left(1);
                for p in [rev, rot] {
                    f.derivative(xi, &p, &mut b)?;
                    for (x, y) in a.iter().zip(&b) {
                        worst = worst.max((x - y).abs());
                    }
                }
            }
        }
        Ok(worst)
    }
}

/// Serialized family of polynomial vector fields.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FieldSpec {
    pub fields: Vec<PolynomialMap<f64>>,
}

impl FieldSpec {
    pub fn into_family(self) -> Result<VectorFieldFamily<f64>> {
        let fields = self
            .fields
            .into_iter()
            .map(|p| PolynomialMap::new(p.input_dim, p.components).map(|p| Arc::new(p) as Arc<dyn SmoothMap>))
            .collect::<Result<Vec<_>>>()?;
        VectorFieldFamily::new(fields)
    }
}
