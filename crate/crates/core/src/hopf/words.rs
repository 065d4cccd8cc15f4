use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::forest::{Label, Tree};

/// A word over the label alphabet, indexing Chen iterated integrals.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Word(pub Vec<Label>);

impl Word {
    pub fn new(letters: impl IntoIterator<Item = u16>) -> Word {
        Word(letters.into_iter().map(Label).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

/// All interleavings of `a` and `b` keeping the internal order of each,
/// listed with multiplicity.
pub fn shuffle(a: &Word, b: &Word) -> Vec<Word> {
    let mut out = Vec::new();
    let mut buf = Vec::with_capacity(a.len() + b.len());
    interleave(&a.0, &b.0, &mut buf, &mut out);
    out
}

fn interleave(a: &[Label], b: &[Label], buf: &mut Vec<Label>, out: &mut Vec<Word>) {
    if a.is_empty() || b.is_empty() {
        let mut w = buf.clone();
        w.extend_from_slice(a);
        w.extend_from_slice(b);
        out.push(Word(w));
        return;
    }
    buf.push(a[0]);
    interleave(&a[1..], b, buf, out);
    buf.pop();
    buf.push(b[0]);
    interleave(a, &b[1..], buf, out);
    buf.pop();
}

/// Bilinear extension of the shuffle to integer combinations of words.
pub fn shuffle_series(x: &BTreeMap<Word, BigInt>, y: &BTreeMap<Word, BigInt>) -> BTreeMap<Word, BigInt> {
    let mut out: BTreeMap<Word, BigInt> = BTreeMap::new();
    for (u, cu) in x {
        for (v, cv) in y {
            for w in shuffle(u, v) {
                *out.entry(w).or_insert_with(BigInt::zero) += cu * cv;
            }
        }
    }
    out.retain(|_, c| !c.is_zero());
    out
}

/// The ladder tree `[⋯[•_{aₙ}]_{aₙ₋₁}⋯]_{a₁}`; the root carries the first
/// letter.
pub fn chen_tree(w: &Word) -> Result<Tree> {
    let (last, init) = w.0.split_last().ok_or(Error::EmptyWord)?;
    Ok(init.iter().rev().fold(Tree::leaf(*last), |acc, &a| Tree::new(a, vec![acc])))
}

/// Expansion of a tree over Chen words, valid for geometric drivers:
/// the root letter prefixes the shuffle of the children's expansions.
pub fn geometric_reduce(t: &Tree) -> BTreeMap<Word, BigInt> {
    let mut inner: BTreeMap<Word, BigInt> = BTreeMap::new();
    inner.insert(Word::default(), BigInt::one());
    for c in t.children() {
        inner = shuffle_series(&inner, &geometric_reduce(c));
    }
    inner
        .into_iter()
        .map(|(w, c)| {
            let mut letters = Vec::with_capacity(w.len() + 1);
            letters.push(t.label());
            letters.extend(w.0);
            (Word(letters), c)
        })
        .collect()
}
