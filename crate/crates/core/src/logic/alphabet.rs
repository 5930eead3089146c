//! Propositions, truth assignments and explicit sets of assignments.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on the number of atomic propositions.
pub const MAX_PROPS: usize = 16;

/// Ordered, duplicate-free list of proposition names. Bit `i` of an
/// [`Assignment`] refers to `names[i]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Alphabet {
    names: Vec<String>,
}

impl Alphabet {
    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.len() > MAX_PROPS {
            return Err(Error::AlphabetTooLarge(names.len()));
        }
        for (i, n) in names.iter().enumerate() {
            if !is_identifier(n) {
                return Err(Error::InvalidProposition(n.clone()));
            }
            if names[..i].contains(n) {
                return Err(Error::DuplicateProposition(n.clone()));
            }
        }
        Ok(Alphabet { names })
    }

    /// Alphabet `p0, p1, ...` used by generators and tests.
    pub fn indexed(n: usize) -> Self {
        Alphabet::new((0..n).map(|i| format!("p{i}"))).expect("indexed alphabet is valid")
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Number of distinct assignments, `2^|AP|`.
    pub fn num_assignments(&self) -> usize {
        1usize << self.names.len()
    }

    pub fn assignments(&self) -> impl Iterator<Item = Assignment> {
        (0..self.num_assignments() as u32).map(Assignment)
    }

    /// Builds an assignment from proposition names.
    pub fn assignment<S: AsRef<str>>(&self, props: &[S]) -> Result<Assignment> {
        let mut bits = 0u32;
        for p in props {
            let i = self
                .index_of(p.as_ref())
                .ok_or_else(|| Error::UnknownProposition(p.as_ref().to_string()))?;
            bits |= 1 << i;
        }
        Ok(Assignment(bits))
    }

    pub fn format_assignment(&self, a: Assignment) -> String {
        let props: Vec<&str> = (0..self.len())
            .filter(|&i| a.contains(i))
            .map(|i| self.name(i))
            .collect();
        format!("{{{}}}", props.join(","))
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// A truth assignment: the set of propositions that hold, as a bitmask.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Assignment(pub u32);

impl Assignment {
    pub const EMPTY: Assignment = Assignment(0);

    pub fn contains(self, prop: usize) -> bool {
        self.0 >> prop & 1 == 1
    }

    pub fn with(self, prop: usize) -> Assignment {
        Assignment(self.0 | 1 << prop)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn count(self) -> u32 {
        self.0.count_ones()
    }
}

/// Explicit set of assignments over an alphabet of `num_props` propositions,
/// stored as a bitset over all `2^num_props` assignments.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AssignmentSet {
    num_props: u8,
    words: Vec<u64>,
}

impl AssignmentSet {
    pub fn empty(num_props: usize) -> Self {
        let universe = 1usize << num_props;
        AssignmentSet {
            num_props: num_props as u8,
            words: vec![0; universe.div_ceil(64)],
        }
    }

    pub fn full(num_props: usize) -> Self {
        let mut s = Self::empty(num_props);
        let universe = s.universe();
        for i in 0..universe {
            s.words[i / 64] |= 1 << (i % 64);
        }
        s
    }

    pub fn from_fn(num_props: usize, mut f: impl FnMut(Assignment) -> bool) -> Self {
        let mut s = Self::empty(num_props);
        for i in 0..s.universe() {
            if f(Assignment(i as u32)) {
                s.words[i / 64] |= 1 << (i % 64);
            }
        }
        s
    }

    pub fn from_assignments(num_props: usize, items: impl IntoIterator<Item = Assignment>) -> Self {
        let mut s = Self::empty(num_props);
        for a in items {
            s.insert(a);
        }
        s
    }

    pub fn num_props(&self) -> usize {
        self.num_props as usize
    }

    pub fn universe(&self) -> usize {
        1usize << self.num_props
    }

    pub fn contains(&self, a: Assignment) -> bool {
        let i = a.index();
        i < self.universe() && self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn insert(&mut self, a: Assignment) {
        let i = a.index();
        assert!(i < self.universe(), "assignment outside alphabet");
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn remove(&mut self, a: Assignment) {
        let i = a.index();
        if i < self.universe() {
            self.words[i / 64] &= !(1 << (i % 64));
        }
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn is_full(&self) -> bool {
        self.len() == self.universe()
    }

    pub fn union(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a | b)
    }

    pub fn intersection(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a & b)
    }

    pub fn difference(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a & !b)
    }

    pub fn complement(&self) -> Self {
        Self::full(self.num_props()).difference(self)
    }

    pub fn is_disjoint(&self, other: &Self) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & b == 0)
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    fn zip(&self, other: &Self, f: impl Fn(u64, u64) -> u64) -> Self {
        assert_eq!(self.num_props, other.num_props, "assignment sets over different alphabets");
        AssignmentSet {
            num_props: self.num_props,
            words: self.words.iter().zip(&other.words).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// Members in increasing bitmask order.
    pub fn iter(&self) -> impl Iterator<Item = Assignment> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut rest = w;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let b = rest.trailing_zeros();
                rest &= rest - 1;
                Some(Assignment((wi * 64) as u32 + b))
            })
        })
    }

    pub fn to_vec(&self) -> Vec<Assignment> {
        self.iter().collect()
    }

    pub fn display<'a>(&'a self, alphabet: &'a Alphabet) -> impl fmt::Display + 'a {
        DisplaySet { set: self, alphabet }
    }
}

impl fmt::Debug for AssignmentSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter().map(|a| a.0)).finish()
    }
}

struct DisplaySet<'a> {
    set: &'a AssignmentSet,
    alphabet: &'a Alphabet,
}

impl fmt::Display for DisplaySet<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = self.set.iter().map(|a| self.alphabet.format_assignment(a)).collect();
        write!(f, "{{{}}}", items.join(", "))
    }
}
