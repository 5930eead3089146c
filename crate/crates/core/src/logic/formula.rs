use std::fmt;

use super::Alphabet;

/// LTL syntax tree. `False` and `Release` exist so that negation normal form
/// is closed under negation; the parser also accepts `false` and `R`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    True,
    False,
    Prop(usize),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Next(Box<Formula>),
    Until(Box<Formula>, Box<Formula>),
    Release(Box<Formula>, Box<Formula>),
    Eventually(Box<Formula>),
    Always(Box<Formula>),
}

use Formula::*;

impl Formula {
    pub fn prop(i: usize) -> Self {
        Prop(i)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Self {
        And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Self {
        Or(Box::new(a), Box::new(b))
    }

    pub fn next(f: Formula) -> Self {
        Next(Box::new(f))
    }

    pub fn until(a: Formula, b: Formula) -> Self {
        Until(Box::new(a), Box::new(b))
    }

    pub fn release(a: Formula, b: Formula) -> Self {
        Release(Box::new(a), Box::new(b))
    }

    pub fn eventually(f: Formula) -> Self {
        Eventually(Box::new(f))
    }

    pub fn always(f: Formula) -> Self {
        Always(Box::new(f))
    }

    pub fn implies(a: Formula, b: Formula) -> Self {
        Formula::or(Formula::not(a), b)
    }

    /// Conjunction of all items, `true` when empty.
    pub fn conj(items: impl IntoIterator<Item = Formula>) -> Self {
        items.into_iter().reduce(Formula::and).unwrap_or(True)
    }

    /// Disjunction of all items, `false` when empty.
    pub fn disj(items: impl IntoIterator<Item = Formula>) -> Self {
        items.into_iter().reduce(Formula::or).unwrap_or(False)
    }

    pub fn children(&self) -> Vec<&Formula> {
        match self {
            True | False | Prop(_) => vec![],
            Not(a) | Next(a) | Eventually(a) | Always(a) => vec![a],
            And(a, b) | Or(a, b) | Until(a, b) | Release(a, b) => vec![a, b],
        }
    }

    pub fn depth(&self) -> usize {
        1 + self.children().iter().map(|c| c.depth()).max().unwrap_or(0)
    }

    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }

    /// Largest proposition index plus one, or 0 if the formula has none.
    pub fn num_props(&self) -> usize {
        match self {
            Prop(i) => i + 1,
            _ => self.children().iter().map(|c| c.num_props()).max().unwrap_or(0),
        }
    }

    /// Pushes negations down to propositions.
    pub fn to_nnf(&self) -> Formula {
        nnf(self, false)
    }

    pub fn is_nnf(&self) -> bool {
        match self {
            Not(a) => matches!(**a, Prop(_)),
            _ => self.children().iter().all(|c| c.is_nnf()),
        }
    }

    pub fn display<'a>(&'a self, alphabet: &'a Alphabet) -> impl fmt::Display + 'a {
        Printer { f: self, alphabet }
    }
}

pub fn to_nnf(f: &Formula) -> Formula {
    f.to_nnf()
}

fn nnf(f: &Formula, neg: bool) -> Formula {
    match (f, neg) {
        (True, false) | (False, true) => True,
        (True, true) | (False, false) => False,
        (Prop(i), false) => Prop(*i),
        (Prop(i), true) => Formula::not(Prop(*i)),
        (Not(a), _) => nnf(a, !neg),
        (And(a, b), false) => Formula::and(nnf(a, false), nnf(b, false)),
        (And(a, b), true) => Formula::or(nnf(a, true), nnf(b, true)),
        (Or(a, b), false) => Formula::or(nnf(a, false), nnf(b, false)),
        (Or(a, b), true) => Formula::and(nnf(a, true), nnf(b, true)),
        (Next(a), _) => Formula::next(nnf(a, neg)),
        (Until(a, b), false) => Formula::until(nnf(a, false), nnf(b, false)),
        (Until(a, b), true) => Formula::release(nnf(a, true), nnf(b, true)),
        (Release(a, b), false) => Formula::release(nnf(a, false), nnf(b, false)),
        (Release(a, b), true) => Formula::until(nnf(a, true), nnf(b, true)),
        (Eventually(a), false) => Formula::eventually(nnf(a, false)),
        (Eventually(a), true) => Formula::always(nnf(a, true)),
        (Always(a), false) => Formula::always(nnf(a, false)),
        (Always(a), true) => Formula::eventually(nnf(a, true)),
    }
}

struct Printer<'a> {
    f: &'a Formula,
    alphabet: &'a Alphabet,
}

impl Printer<'_> {
    fn write(&self, f: &Formula, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match f {
            True => write!(out, "true"),
            False => write!(out, "false"),
            Prop(i) => match self.alphabet.names().get(*i) {
                Some(name) => write!(out, "{name}"),
                None => write!(out, "p{i}"),
            },
            Not(a) => self.unary("!", a, out),
            Next(a) => self.unary("X ", a, out),
            Eventually(a) => self.unary("F ", a, out),
            Always(a) => self.unary("G ", a, out),
            And(a, b) => self.binary(a, " & ", b, out),
            Or(a, b) => self.binary(a, " | ", b, out),
            Until(a, b) => self.binary(a, " U ", b, out),
            Release(a, b) => self.binary(a, " R ", b, out),
        }
    }

    fn operand(&self, f: &Formula, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        if matches!(f, And(..) | Or(..) | Until(..) | Release(..)) {
            write!(out, "(")?;
            self.write(f, out)?;
            write!(out, ")")
        } else {
            self.write(f, out)
        }
    }

    fn unary(&self, op: &str, a: &Formula, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(out, "{op}")?;
        self.operand(a, out)
    }

    fn binary(&self, a: &Formula, op: &str, b: &Formula, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.operand(a, out)?;
        write!(out, "{op}")?;
        self.operand(b, out)
    }
}

impl fmt::Display for Printer<'_> {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(self.f, out)
    }
}
