//! Coalgebra structure on forests.
//!
//! Coproduct terms are written trunk first: in `L ⊗ R` the left forest is
//! the part containing the root and the right forest is what was cut away.
//! This is the ordering under which `δX^τ_{tus} = X^{τ(1)}_{tu} X^{τ(2)}_{us}`.

mod bounds;
mod words;

pub use bounds::{
    neoclassical_ratio, neoclassical_sweep, q_conjecture_ratio, q_gamma, tree_binomial_check, tree_neoclassical_ratio,
    NeoclassicalRow, QGamma,
};
pub use words::{chen_tree, geometric_reduce, shuffle, shuffle_series, Word};

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::forest::{graft, Forest, Label, Tree};

/// Integer combination of `forest ⊗ forest` terms.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TensorSeries {
    terms: BTreeMap<(Forest, Forest), BigInt>,
}

impl TensorSeries {
    pub fn new() -> Self {
        Self::default()
    }

    /// `1 ⊗ 1`.
    pub fn unit() -> Self {
        let mut s = Self::new();
        s.add_term(Forest::empty(), Forest::empty(), BigInt::one());
        s
    }

    pub fn add_term(&mut self, left: Forest, right: Forest, c: BigInt) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry((left, right)) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn coefficient(&self, left: &Forest, right: &Forest) -> BigInt {
        self.terms.get(&(left.clone(), right.clone())).cloned().unwrap_or_else(BigInt::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Forest, &Forest, &BigInt)> {
        self.terms.iter().map(|((l, r), c)| (l, r, c))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &TensorSeries) -> TensorSeries {
        let mut out = self.clone();
        for (l, r, c) in other.iter() {
            out.add_term(l.clone(), r.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &TensorSeries) -> TensorSeries {
        let mut out = self.clone();
        for (l, r, c) in other.iter() {
            out.add_term(l.clone(), r.clone(), -c.clone());
        }
        out
    }

    /// Product in the tensor square of the forest algebra:
    /// `(a⊗b)(c⊗d) = ac ⊗ bd`.
    pub fn mul(&self, other: &TensorSeries) -> TensorSeries {
        let mut out = TensorSeries::new();
        for (a, b, x) in self.iter() {
            for (c, d, y) in other.iter() {
                out.add_term(a.product(c), b.product(d), x * y);
            }
        }
        out
    }

    /// Applies `B₊^a ⊗ id`. A `1` in the left slot becomes `•_a`.
    pub fn graft_left(&self, a: Label) -> TensorSeries {
        let mut out = TensorSeries::new();
        for (l, r, c) in self.iter() {
            out.add_term(Forest::from(graft(l, a)), r.clone(), c.clone());
        }
        out
    }

    /// Terms with `f64` coefficients, for numerical evaluation.
    pub fn float_terms(&self) -> Vec<(Forest, Forest, f64)> {
        self.iter().map(|(l, r, c)| (l.clone(), r.clone(), c.to_f64().unwrap_or(f64::NAN))).collect()
    }
}

impl fmt::Display for TensorSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (l, r, c)) in self.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            if !c.is_one() {
                write!(f, "{c} ")?;
            }
            write!(f, "{l} ⊗ {r}")?;
        }
        Ok(())
    }
}

/// Full coproduct of a tree by enumerating admissible cuts.
pub fn coproduct(t: &Tree) -> TensorSeries {
    let mut out = TensorSeries::new();
    out.add_term(Forest::empty(), Forest::from(t.clone()), BigInt::one());
    out.add_term(Forest::from(t.clone()), Forest::empty(), BigInt::one());
    for (trunk, pruned) in admissible_cuts(t) {
        out.add_term(Forest::from(trunk), pruned, BigInt::one());
    }
    out
}

/// Every nonempty admissible cut of `t` as `(trunk, pruned forest)`, one
/// entry per edge subset (so equal pairs may repeat).
pub fn admissible_cuts(t: &Tree) -> Vec<(Tree, Forest)> {
    let mut nodes: Vec<&Tree> = Vec::new();
    let mut parent: Vec<usize> = Vec::new();
    flatten(t, usize::MAX, &mut nodes, &mut parent);
    let n = nodes.len();
    assert!(n <= 31, "cut enumeration is limited to trees of degree ≤ 31");
    let mut out = Vec::new();
    // Bit v-1 set means the edge above vertex v (v ≥ 1) is cut.
    for mask in 1u32..(1u32 << (n - 1)) {
        let cut = |v: usize| v > 0 && mask & (1 << (v - 1)) != 0;
        let admissible = (1..n).filter(|&v| cut(v)).all(|v| {
            let mut p = parent[v];
            while p != 0 {
                if cut(p) {
                    return false;
                }
                p = parent[p];
            }
            true
        });
        if !admissible {
            continue;
        }
        let pruned: Vec<Tree> = (1..n).filter(|&v| cut(v)).map(|v| nodes[v].clone()).collect();
        let trunk = trunk_of(t, 0, &mut 0, &cut);
        out.push((trunk, Forest::from_trees(pruned)));
    }
    out
}

fn flatten<'a>(t: &'a Tree, p: usize, nodes: &mut Vec<&'a Tree>, parent: &mut Vec<usize>) {
    let me = nodes.len();
    nodes.push(t);
    parent.push(p);
    for c in t.children() {
        flatten(c, me, nodes, parent);
    }
}

// Rebuilds the tree without the cut subtrees. `next` walks the same
// preorder numbering as `flatten`.
fn trunk_of(t: &Tree, me: usize, next: &mut usize, cut: &dyn Fn(usize) -> bool) -> Tree {
    *next = me + 1;
    let mut kids = Vec::new();
    for c in t.children() {
        let id = *next;
        if cut(id) {
            *next = id + c.degree();
        } else {
            kids.push(trunk_of(c, id, next, cut));
        }
    }
    Tree::new(t.label(), kids)
}

/// Full coproduct of a tree through `Δτ = 1⊗τ + (B₊^a⊗id)Δ(B₋^a τ)`.
pub fn coproduct_recursive(t: &Tree) -> TensorSeries {
    let mut out = TensorSeries::new();
    out.add_term(Forest::empty(), Forest::from(t.clone()), BigInt::one());
    let inner = forest_coproduct_with(&t.children_forest(), &coproduct_recursive);
    out.add(&inner.graft_left(t.label()))
}

/// Coproduct of a forest as the product of its trees' coproducts.
pub fn forest_coproduct(f: &Forest) -> TensorSeries {
    forest_coproduct_with(f, &coproduct)
}

fn forest_coproduct_with(f: &Forest, tree_coproduct: &dyn Fn(&Tree) -> TensorSeries) -> TensorSeries {
    f.trees().iter().fold(TensorSeries::unit(), |acc, t| acc.mul(&tree_coproduct(t)))
}

fn primitive_part(f: &Forest) -> TensorSeries {
    let mut p = TensorSeries::new();
    p.add_term(Forest::empty(), f.clone(), BigInt::one());
    p.add_term(f.clone(), Forest::empty(), BigInt::one());
    p
}

/// Reduced coproduct `Δ′`. Trees drop the two primitive terms; products are
/// expanded with the Leibniz-type rule
/// `Δ′(ρσ) = Δ′σΔ′ρ + (1⊗σ+σ⊗1)Δ′ρ + (1⊗ρ+ρ⊗1)Δ′σ + ρ⊗σ + σ⊗ρ`.
pub fn reduced_coproduct(f: &Forest) -> Result<TensorSeries> {
    reduced_with(f, &|t| coproduct(t).sub(&primitive_part(&Forest::from(t.clone()))))
}

/// `Δ′` of a tree from the recursion
/// `Δ′τ = •_a ⊗ B₋τ + (B₊^a⊗id)Δ′(B₋τ)` (zero for a single vertex).
pub fn reduced_coproduct_recursive(t: &Tree) -> TensorSeries {
    let children = t.children_forest();
    if children.is_empty() {
        return TensorSeries::new();
    }
    let mut out = TensorSeries::new();
    out.add_term(Forest::from(Tree::leaf(t.label())), children.clone(), BigInt::one());
    let inner = reduced_with(&children, &reduced_coproduct_recursive).expect("nonempty");
    out.add(&inner.graft_left(t.label()))
}

fn reduced_with(f: &Forest, tree_reduced: &dyn Fn(&Tree) -> TensorSeries) -> Result<TensorSeries> {
    let trees = f.trees();
    let (first, rest) = trees.split_first().ok_or(Error::EmptyForest)?;
    let rho = Forest::from(first.clone());
    let d_rho = tree_reduced(first);
    if rest.is_empty() {
        return Ok(d_rho);
    }
    let sigma = Forest::from_trees(rest.to_vec());
    let d_sigma = reduced_with(&sigma, tree_reduced)?;
    let mut out = d_sigma.mul(&d_rho);
    out = out.add(&primitive_part(&sigma).mul(&d_rho));
    out = out.add(&primitive_part(&rho).mul(&d_sigma));
    out.add_term(rho.clone(), sigma.clone(), BigInt::one());
    out.add_term(sigma, rho, BigInt::one());
    Ok(out)
}

/// `c′(σ, τ, ρ)`: coefficient of `τ ⊗ ρ` in `Δ′σ`.
pub fn count_c_prime(sigma: &Tree, tau: &Tree, rho: &Forest) -> BigInt {
    reduced_coproduct(&Forest::from(sigma.clone()))
        .expect("tree is nonempty")
        .coefficient(&Forest::from(tau.clone()), rho)
}

/// `c′` for forest arguments, as needed when coefficient paths are indexed
/// by forests.
pub fn count_c_prime_forest(sigma: &Forest, tau: &Forest, rho: &Forest) -> BigInt {
    match reduced_coproduct(sigma) {
        Ok(d) => d.coefficient(tau, rho),
        Err(_) => BigInt::zero(),
    }
}

/// `c̃(κ₁, κ₂, κ₃)`: equals `c′` when `κ₃` is nonempty and the Kronecker
/// delta of `κ₁, κ₂` otherwise.
pub fn count_c_tilde(k1: &Tree, k2: &Tree, k3: &Forest) -> BigInt {
    if k3.is_empty() {
        BigInt::from((k1 == k2) as u8)
    } else {
        count_c_prime(k1, k2, k3)
    }
}

/// Counit: `1` on the empty forest, `0` elsewhere.
pub fn counit(f: &Forest) -> BigInt {
    BigInt::from(f.is_empty() as u8)
}

/// Threefold tensor terms, used to compare the two sides of
/// coassociativity.
pub type Tensor3 = BTreeMap<(Forest, Forest, Forest), BigInt>;

fn add3(out: &mut Tensor3, key: (Forest, Forest, Forest), c: BigInt) {
    let e = out.entry(key).or_insert_with(BigInt::zero);
    *e += c;
}

fn strip_zeros(mut t: Tensor3) -> Tensor3 {
    t.retain(|_, c| !c.is_zero());
    t
}

/// `((Δ⊗id)Δ f, (id⊗Δ)Δ f)`.
pub fn coassociativity_sides(f: &Forest) -> (Tensor3, Tensor3) {
    let d = forest_coproduct(f);
    let mut left = Tensor3::new();
    let mut right = Tensor3::new();
    for (a, b, c) in d.iter() {
        for (a1, a2, c1) in forest_coproduct(a).iter() {
            add3(&mut left, (a1.clone(), a2.clone(), b.clone()), c * c1);
        }
        for (b1, b2, c2) in forest_coproduct(b).iter() {
            add3(&mut right, (a.clone(), b1.clone(), b2.clone()), c * c2);
        }
    }
    (strip_zeros(left), strip_zeros(right))
}

/// `((Δ′⊗id)Δ′ f, (id⊗Δ′)Δ′ f)`.
pub fn reduced_coassociativity_sides(f: &Forest) -> Result<(Tensor3, Tensor3)> {
    let d = reduced_coproduct(f)?;
    let mut left = Tensor3::new();
    let mut right = Tensor3::new();
    for (a, b, c) in d.iter() {
        for (a1, a2, c1) in reduced_coproduct(a)?.iter() {
            add3(&mut left, (a1.clone(), a2.clone(), b.clone()), c * c1);
        }
        for (b1, b2, c2) in reduced_coproduct(b)?.iter() {
            add3(&mut right, (a.clone(), b1.clone(), b2.clone()), c * c2);
        }
    }
    Ok((strip_zeros(left), strip_zeros(right)))
}

/// Checks the counit identities `(ε⊗id)Δ = id = (id⊗ε)Δ` on `f`.
pub fn counit_holds(f: &Forest) -> bool {
    let d = forest_coproduct(f);
    let mut left = TensorSeries::new();
    let mut right = TensorSeries::new();
    for (a, b, c) in d.iter() {
        left.add_term(Forest::empty(), b.clone(), counit(a) * c);
        right.add_term(a.clone(), Forest::empty(), counit(b) * c);
    }
    let mut expect_l = TensorSeries::new();
    expect_l.add_term(Forest::empty(), f.clone(), BigInt::one());
    let mut expect_r = TensorSeries::new();
    expect_r.add_term(f.clone(), Forest::empty(), BigInt::one());
    left == expect_l && right == expect_r
}

/// Every term of `Δf` splits the degree of `f`.
pub fn grading_holds(f: &Forest) -> bool {
    let n = f.degree();
    forest_coproduct(f).iter().all(|(l, r, _)| l.degree() + r.degree() == n)
}

/// Reduced-coproduct terms of a tree with `f64` coefficients, cached per
/// tree. Shared by the numerical modules.
#[derive(Clone, Debug, Default)]
pub struct ReducedTable {
    table: BTreeMap<Forest, Vec<(Forest, Forest, f64)>>,
}

impl ReducedTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn terms(&mut self, f: &Forest) -> &[(Forest, Forest, f64)] {
        self.table.entry(f.clone()).or_insert_with(|| match reduced_coproduct(f) {
            Ok(d) => d.float_terms(),
            Err(_) => Vec::new(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> Tree {
        s.parse().unwrap()
    }

    fn f(s: &str) -> Forest {
        s.parse().unwrap()
    }

    #[test]
    fn small_coproducts() {
        let d = coproduct(&t("[•]"));
        assert_eq!(d.len(), 3);
        assert_eq!(d.coefficient(&f("•"), &f("•")), BigInt::one());
        let d = coproduct(&t("[•,•]"));
        assert_eq!(d.coefficient(&f("[•]"), &f("•")), BigInt::from(2));
        assert_eq!(d.coefficient(&f("•"), &f("• •")), BigInt::one());
        assert_eq!(coproduct(&t("3")).len(), 2);
    }

    #[test]
    fn recursion_matches_cuts_on_labeled_trees() {
        for s in ["0[1,1[0]]", "2[1[0,0],1]", "0[0[0[1]],1]"] {
            assert_eq!(coproduct(&t(s)), coproduct_recursive(&t(s)), "{s}");
        }
    }

    #[test]
    fn counting_functions() {
        assert_eq!(count_c_prime(&t("[•,•]"), &t("[•]"), &f("•")), BigInt::from(2));
        assert_eq!(count_c_prime(&t("•"), &t("•"), &Forest::empty()), BigInt::zero());
        assert_eq!(count_c_prime(&t("1[0[0]]"), &t("1"), &f("0[0]")), BigInt::one());
        assert_eq!(count_c_tilde(&t("[•]"), &t("[•]"), &Forest::empty()), BigInt::one());
        assert_eq!(count_c_tilde(&t("[•]"), &t("•"), &Forest::empty()), BigInt::zero());
        assert_eq!(count_c_tilde(&t("[•,•]"), &t("[•]"), &f("•")), BigInt::from(2));
    }

    #[test]
    fn empty_forest_has_no_reduced_coproduct() {
        assert!(matches!(reduced_coproduct(&Forest::empty()), Err(Error::EmptyForest)));
    }
}
