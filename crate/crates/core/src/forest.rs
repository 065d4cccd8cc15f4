//! Labeled rooted trees and forests in canonical form.
//!
//! A tree is stored with its children sorted by the derived total order on
//! `(label, children)`, which compares recursively and lexicographically.
//! Equal trees therefore have equal representations, and a forest (a
//! multiset of trees) is just a sorted vector.
//!
//! Text syntax used by `Display` and `FromStr`: a leaf is its label (`0`),
//! an inner node is `label[child,child,...]`, a forest is a space separated
//! list of trees and the empty forest prints as `∅`. `•` may be used as a
//! shorthand for label 0, and a bare `[...]` has root label 0, so
//! `[•,[•]]` parses to `0[0,0[0]]`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Default cap on the number of forests `enumerate_forests` may produce.
pub const ENUMERATION_CAP: u128 = 5_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Label(pub u16);

impl Label {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u16> for Label {
    fn from(v: u16) -> Self {
        Label(v)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tree {
    label: Label,
    children: Vec<Tree>,
}

impl Tree {
    /// The single vertex tree `•_a`.
    pub fn leaf(a: impl Into<Label>) -> Tree {
        Tree { label: a.into(), children: Vec::new() }
    }

    /// Builds `[children]_a`, sorting the children into canonical order.
    pub fn new(a: impl Into<Label>, mut children: Vec<Tree>) -> Tree {
        children.sort();
        Tree { label: a.into(), children }
    }

    pub fn label(&self) -> Label {
        self.label
    }

    pub fn children(&self) -> &[Tree] {
        &self.children
    }

    /// The forest of children, i.e. `B₋` applied with the root label.
    pub fn children_forest(&self) -> Forest {
        Forest { trees: self.children.clone() }
    }

    /// `B₋^a`: the children forest if the root carries `a`, `None` otherwise.
    pub fn ungraft(&self, a: impl Into<Label>) -> Option<Forest> {
        if self.label == a.into() {
            Some(self.children_forest())
        } else {
            None
        }
    }

    pub fn degree(&self) -> usize {
        1 + self.children.iter().map(Tree::degree).sum::<usize>()
    }

    /// Largest number of children of any vertex.
    pub fn max_branching(&self) -> usize {
        self.children.iter().map(Tree::max_branching).max().unwrap_or(0).max(self.children.len())
    }

    /// Tree factorial: `τ! = |τ| · Π τᵢ!`.
    pub fn factorial(&self) -> BigUint {
        let mut acc = BigUint::from(self.degree());
        for c in &self.children {
            acc *= c.factorial();
        }
        acc
    }

    /// Symmetry factor in the multiplicity form `Π nᵢ! σ(τᵢ)^{nᵢ}` over the
    /// distinct children `τᵢ` occurring `nᵢ` times.
    pub fn symmetry(&self) -> BigUint {
        let mut acc = BigUint::one();
        for (child, n) in multiplicities(&self.children) {
            acc *= factorial(n) * child.symmetry().pow(n as u32);
        }
        acc
    }

    /// Symmetry factor through `k!/δ(τ¹..τᵏ) · Π σ(τⁱ)`.
    pub fn symmetry_via_tuples(&self) -> BigUint {
        let k = self.children.len();
        let mut acc = factorial(k) / tuple_multiplicity(&self.children);
        for c in &self.children {
            acc *= c.symmetry_via_tuples();
        }
        acc
    }

    /// True for ladder (linear) trees, the image of `chen_tree`.
    pub fn is_ladder(&self) -> bool {
        match self.children.as_slice() {
            [] => true,
            [c] => c.is_ladder(),
            _ => false,
        }
    }

    /// Largest label occurring in the tree.
    pub fn max_label(&self) -> Label {
        self.children.iter().map(Tree::max_label).max().unwrap_or(self.label).max(self.label)
    }

    /// Re-sorts every level. Trees built through the public API are already
    /// canonical, so this is the identity on them.
    pub fn canonicalize(&self) -> Tree {
        Tree::new(self.label, self.children.iter().map(Tree::canonicalize).collect())
    }

    /// Labels of all vertices in depth-first order, root first.
    pub fn vertex_labels(&self) -> Vec<Label> {
        let mut out = vec![self.label];
        for c in &self.children {
            out.extend(c.vertex_labels());
        }
        out
    }
}

/// `B₊^a`: grafts a forest onto a new root labelled `a`.
pub fn graft(children: &Forest, a: impl Into<Label>) -> Tree {
    Tree { label: a.into(), children: children.trees.clone() }
}

/// Number of distinct ordered tuples with the same underlying multiset:
/// `k! / Π nᵢ!`.
pub fn tuple_multiplicity(ts: &[Tree]) -> BigUint {
    let mut sorted = ts.to_vec();
    sorted.sort();
    let mut acc = factorial(ts.len());
    for (_, n) in multiplicities(&sorted) {
        acc /= factorial(n);
    }
    acc
}

fn multiplicities(sorted: &[Tree]) -> Vec<(&Tree, usize)> {
    let mut out: Vec<(&Tree, usize)> = Vec::new();
    for t in sorted {
        match out.last_mut() {
            Some((last, n)) if *last == t => *n += 1,
            _ => out.push((t, 1)),
        }
    }
    out
}

pub(crate) fn factorial(n: usize) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, k| acc * BigUint::from(k))
}

/// A multiset of trees; the empty forest is the unit `1`.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Forest {
    trees: Vec<Tree>,
}

impl Forest {
    pub fn empty() -> Forest {
        Forest { trees: Vec::new() }
    }

    pub fn from_trees(mut trees: Vec<Tree>) -> Forest {
        trees.sort();
        Forest { trees }
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn into_trees(self) -> Vec<Tree> {
        self.trees
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    /// The single tree of a one-tree forest.
    pub fn as_tree(&self) -> Option<&Tree> {
        match self.trees.as_slice() {
            [t] => Some(t),
            _ => None,
        }
    }

    pub fn degree(&self) -> usize {
        self.trees.iter().map(Tree::degree).sum()
    }

    /// Disjoint union (the algebra product).
    pub fn product(&self, other: &Forest) -> Forest {
        let mut trees = Vec::with_capacity(self.len() + other.len());
        trees.extend_from_slice(&self.trees);
        trees.extend_from_slice(&other.trees);
        Forest::from_trees(trees)
    }

    /// Product of tree factorials; `1` for the empty forest.
    pub fn factorial(&self) -> BigUint {
        self.trees.iter().fold(BigUint::one(), |acc, t| acc * t.factorial())
    }

    /// Product of the symmetry factors of the component trees.
    pub fn symmetry(&self) -> BigUint {
        self.trees.iter().fold(BigUint::one(), |acc, t| acc * t.symmetry())
    }

    pub fn max_label(&self) -> Option<Label> {
        self.trees.iter().map(Tree::max_label).max()
    }
}

impl From<Tree> for Forest {
    fn from(t: Tree) -> Forest {
        Forest { trees: vec![t] }
    }
}

impl FromIterator<Tree> for Forest {
    fn from_iter<I: IntoIterator<Item = Tree>>(iter: I) -> Self {
        Forest::from_trees(iter.into_iter().collect())
    }
}

/// Finitely supported rational combination of forests.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ForestSeries {
    terms: BTreeMap<Forest, BigRational>,
}

impl ForestSeries {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn monomial(f: Forest, c: BigRational) -> Self {
        let mut s = Self::new();
        s.add_term(f, c);
        s
    }

    pub fn add_term(&mut self, f: Forest, c: BigRational) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(f);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn coefficient(&self, f: &Forest) -> BigRational {
        self.terms.get(f).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Forest, &BigRational)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &ForestSeries) -> ForestSeries {
        let mut out = self.clone();
        for (f, c) in &other.terms {
            out.add_term(f.clone(), c.clone());
        }
        out
    }

    pub fn scale(&self, c: &BigRational) -> ForestSeries {
        let mut out = ForestSeries::new();
        for (f, v) in &self.terms {
            out.add_term(f.clone(), v * c);
        }
        out
    }

    pub fn mul(&self, other: &ForestSeries) -> ForestSeries {
        let mut out = ForestSeries::new();
        for (f, a) in &self.terms {
            for (g, b) in &other.terms {
                out.add_term(f.product(g), a * b);
            }
        }
        out
    }

    /// Integer view used by the exact coalgebra tests.
    pub fn from_integer_terms(terms: impl IntoIterator<Item = (Forest, BigInt)>) -> Self {
        let mut s = Self::new();
        for (f, c) in terms {
            s.add_term(f, BigRational::from_integer(c));
        }
        s
    }
}

/// Number of trees of each degree `0..=max_degree` (index 0 is unused) and
/// forests of each degree, over an alphabet of size `d`. Saturates at
/// `u128::MAX`.
pub fn tree_and_forest_counts(max_degree: usize, d: usize) -> (Vec<u128>, Vec<u128>) {
    let mut t = vec![0u128; max_degree + 1];
    let mut f = vec![0u128; max_degree + 1];
    f[0] = 1;
    for n in 1..=max_degree {
        t[n] = f[n - 1].saturating_mul(d as u128);
        // Euler transform: n f_n = Σ_k c_k f_{n-k}, c_k = Σ_{j|k} j t_j.
        let mut acc: u128 = 0;
        for k in 1..=n {
            let mut c: u128 = 0;
            for j in 1..=k {
                if k % j == 0 {
                    c = c.saturating_add((j as u128).saturating_mul(t[j]));
                }
            }
            acc = acc.saturating_add(c.saturating_mul(f[n - k]));
        }
        f[n] = if acc == u128::MAX { acc } else { acc / n as u128 };
    }
    (t, f)
}

/// All trees of degree `1..=max_degree` over labels `0..d`, sorted by
/// `(degree, canonical order)`.
pub fn enumerate_trees(max_degree: usize, d: usize) -> Result<Vec<Tree>> {
    let (_, by_degree) = enumerate_by_degree(max_degree, d, ENUMERATION_CAP)?;
    Ok(by_degree.into_iter().flatten().collect())
}

/// All forests of degree `≤ max_degree` over labels `0..d`, each exactly
/// once, sorted by `(degree, canonical order)`.
pub fn enumerate_forests(max_degree: usize, d: usize, include_empty: bool) -> Result<Vec<Forest>> {
    enumerate_forests_capped(max_degree, d, include_empty, ENUMERATION_CAP)
}

pub fn enumerate_forests_capped(max_degree: usize, d: usize, include_empty: bool, cap: u128) -> Result<Vec<Forest>> {
    let (forests, _) = enumerate_by_degree(max_degree, d, cap)?;
    let mut out: Vec<Forest> = forests.into_iter().flatten().collect();
    if !include_empty {
        out.retain(|f| !f.is_empty());
    }
    Ok(out)
}

type ByDegree = (Vec<Vec<Forest>>, Vec<Vec<Tree>>);

fn enumerate_by_degree(max_degree: usize, d: usize, cap: u128) -> Result<ByDegree> {
    let (_, fc) = tree_and_forest_counts(max_degree, d);
    let total = fc.iter().fold(0u128, |a, &b| a.saturating_add(b));
    if total > cap {
        return Err(Error::ResourceLimit { what: "forest enumeration", needed: total, cap });
    }
    let mut trees: Vec<Vec<Tree>> = vec![Vec::new(); max_degree + 1];
    let mut forests: Vec<Vec<Forest>> = vec![Vec::new(); max_degree + 1];
    forests[0].push(Forest::empty());
    for n in 1..=max_degree {
        let mut level: Vec<Tree> = Vec::new();
        for f in &forests[n - 1] {
            for a in 0..d {
                level.push(graft(f, Label(a as u16)));
            }
        }
        level.sort();
        trees[n] = level;
        // Forests of degree n: multisets of trees drawn in non-decreasing
        // order of a flat index over trees of degree ≤ n.
        let pool: Vec<&Tree> = trees[1..=n].iter().flatten().collect();
        let degrees: Vec<usize> = pool.iter().map(|t| t.degree()).collect();
        let mut found = Vec::new();
        let mut stack = Vec::new();
        multisets(&pool, &degrees, 0, n, &mut stack, &mut found);
        found.sort();
        forests[n] = found;
    }
    Ok((forests, trees))
}

fn multisets(
    pool: &[&Tree],
    degrees: &[usize],
    start: usize,
    remaining: usize,
    stack: &mut Vec<usize>,
    out: &mut Vec<Forest>,
) {
    if remaining == 0 {
        out.push(Forest::from_trees(stack.iter().map(|&i| pool[i].clone()).collect()));
        return;
    }
    for i in start..pool.len() {
        if degrees[i] <= remaining {
            stack.push(i);
            multisets(pool, degrees, i, remaining - degrees[i], stack, out);
            stack.pop();
        }
    }
}

impl fmt::Display for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label)?;
        if !self.children.is_empty() {
            write!(f, "[")?;
            for (i, c) in self.children.iter().enumerate() {
                if i > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{c}")?;
            }
            write!(f, "]")?;
        }
        Ok(())
    }
}

impl fmt::Display for Forest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.trees.is_empty() {
            return write!(f, "∅");
        }
        for (i, t) in self.trees.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

struct Parser<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while matches!(self.chars.peek(), Some(c) if c.is_whitespace()) {
            self.chars.next();
        }
    }

    fn tree(&mut self) -> Result<Tree> {
        self.skip_ws();
        let label = match self.chars.peek() {
            Some('•') => {
                self.chars.next();
                Label(0)
            }
            Some(c) if c.is_ascii_digit() => {
                let mut v: u32 = 0;
                while let Some(c) = self.chars.peek().copied().filter(char::is_ascii_digit) {
                    self.chars.next();
                    v = v * 10 + c.to_digit(10).unwrap();
                    if v > u16::MAX as u32 {
                        return Err(Error::Parse("label too large".into()));
                    }
                }
                Label(v as u16)
            }
            Some('[') => Label(0),
            other => return Err(Error::Parse(format!("unexpected {other:?} at start of tree"))),
        };
        let mut children = Vec::new();
        if self.chars.peek() == Some(&'[') {
            self.chars.next();
            loop {
                children.push(self.tree()?);
                self.skip_ws();
                match self.chars.next() {
                    Some(',') => continue,
                    Some(']') => break,
                    other => return Err(Error::Parse(format!("expected ',' or ']', found {other:?}"))),
                }
            }
        }
        Ok(Tree::new(label, children))
    }
}

impl FromStr for Tree {
    type Err = Error;

    fn from_str(s: &str) -> Result<Tree> {
        let mut p = Parser { chars: s.chars().peekable() };
        let t = p.tree()?;
        p.skip_ws();
        if p.chars.next().is_some() {
            return Err(Error::Parse(format!("trailing input in tree {s:?}")));
        }
        Ok(t)
    }
}

impl FromStr for Forest {
    type Err = Error;

    fn from_str(s: &str) -> Result<Forest> {
        let s = s.trim();
        if s.is_empty() || s == "∅" {
            return Ok(Forest::empty());
        }
        let mut p = Parser { chars: s.chars().peekable() };
        let mut trees = Vec::new();
        loop {
            p.skip_ws();
            if p.chars.peek().is_none() {
                break;
            }
            trees.push(p.tree()?);
        }
        Ok(Forest::from_trees(trees))
    }
}

#[derive(Serialize, Deserialize)]
struct TreeJson {
    l: u16,
    c: Vec<TreeJson>,
}

impl From<&Tree> for TreeJson {
    fn from(t: &Tree) -> Self {
        TreeJson { l: t.label.0, c: t.children.iter().map(TreeJson::from).collect() }
    }
}

impl From<TreeJson> for Tree {
    fn from(j: TreeJson) -> Self {
        Tree::new(Label(j.l), j.c.into_iter().map(Tree::from).collect())
    }
}

impl Serialize for Tree {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TreeJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Tree {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        TreeJson::deserialize(d).map(Tree::from)
    }
}

impl Serialize for Forest {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.trees.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Forest {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Vec::<Tree>::deserialize(d).map(Forest::from_trees)
    }
}
