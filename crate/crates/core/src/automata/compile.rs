//! Formula-progression construction of an LDBA.
//!
//! N-states are formulas in canonical disjunctive normal form over temporal
//! atoms, advanced by the after-function `af`. An ε-jump guesses the set 𝒢 of
//! G-subformulas that hold from now on; the D-state then checks the guess
//! with a breakpoint over co-safety obligations, which are G-free once every
//! G-subformula is replaced by its guessed truth value.

use std::collections::{BTreeSet, HashMap};

use super::ldba::{LdbaBuilder, StateKind};
use super::nba::{ltl_to_nba, nba_to_ldba};
use super::{Ldba, DEFAULT_STATE_LIMIT};
use crate::error::{Error, Result};
use crate::logic::{Alphabet, Formula};

#[derive(Clone, Debug)]
pub struct CompileOptions {
    pub state_limit: usize,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions { state_limit: DEFAULT_STATE_LIMIT }
    }
}

pub fn compile(f: &Formula, alphabet: &Alphabet) -> Result<Ldba> {
    compile_with(f, alphabet, &CompileOptions::default())
}

/// Tableau NBA followed by subset + breakpoint limit-determinization.
pub fn compile_via_nba(f: &Formula, alphabet: &Alphabet, opts: &CompileOptions) -> Result<Ldba> {
    let nba = ltl_to_nba(&f.to_nnf(), alphabet.len(), opts.state_limit)?;
    Ok(nba_to_ldba(&nba, alphabet, opts.state_limit)?.reachable())
}

pub fn compile_with(f: &Formula, alphabet: &Alphabet, opts: &CompileOptions) -> Result<Ldba> {
    if f.num_props() > alphabet.len() {
        return Err(Error::Mismatch("formula uses propositions outside the alphabet".into()));
    }
    let pre = simplify(&remove_release(&f.to_nnf()));
    let mut c = Ctx::new(alphabet.len());
    c.build(&pre, alphabet, opts.state_limit)
}

type AtomId = u32;

/// Disjunction of conjunctions of atoms; empty = false, `[[]]` = true.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Dnf(Vec<Vec<AtomId>>);

impl Dnf {
    fn t() -> Dnf {
        Dnf(vec![vec![]])
    }

    fn f() -> Dnf {
        Dnf(vec![])
    }

    fn is_true(&self) -> bool {
        self.0.len() == 1 && self.0[0].is_empty()
    }

    fn is_false(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Key {
    N(Dnf),
    D(usize, Dnf, Dnf),
    Sink,
}

struct Guess {
    gs: Vec<Formula>,
    star: Dnf,
}

struct Ctx {
    num_props: usize,
    atoms: Vec<Formula>,
    masks: Vec<u32>,
    index: HashMap<Formula, AtomId>,
    dnf_cache: HashMap<Formula, Dnf>,
    af_cache: HashMap<(AtomId, u32), Dnf>,
    imp_cache: HashMap<(AtomId, AtomId), bool>,
    guesses: Vec<Guess>,
    guess_index: HashMap<Vec<Formula>, usize>,
}

impl Ctx {
    fn new(num_props: usize) -> Self {
        let mut c = Ctx {
            num_props,
            atoms: Vec::new(),
            masks: Vec::new(),
            index: HashMap::new(),
            dnf_cache: HashMap::new(),
            af_cache: HashMap::new(),
            imp_cache: HashMap::new(),
            guesses: Vec::new(),
            guess_index: HashMap::new(),
        };
        c.guess(Vec::new());
        c
    }

    fn atom(&mut self, f: &Formula) -> AtomId {
        if let Some(&id) = self.index.get(f) {
            return id;
        }
        let id = self.atoms.len() as AtomId;
        self.atoms.push(f.clone());
        self.masks.push(prop_mask(f));
        self.index.insert(f.clone(), id);
        id
    }

    fn to_dnf(&mut self, f: &Formula) -> Dnf {
        if let Some(d) = self.dnf_cache.get(f) {
            return d.clone();
        }
        let d = match f {
            Formula::True => Dnf::t(),
            Formula::False => Dnf::f(),
            Formula::And(a, b) => {
                let (x, y) = (self.to_dnf(a), self.to_dnf(b));
                self.and(&x, &y)
            }
            Formula::Or(a, b) => {
                let (x, y) = (self.to_dnf(a), self.to_dnf(b));
                self.or(&x, &y)
            }
            Formula::Release(..) => unreachable!("release is removed before construction"),
            _ => Dnf(vec![vec![self.atom(f)]]),
        };
        self.dnf_cache.insert(f.clone(), d.clone());
        d
    }

    fn and(&mut self, x: &Dnf, y: &Dnf) -> Dnf {
        if x.is_false() || y.is_false() {
            return Dnf::f();
        }
        if x.is_true() {
            return y.clone();
        }
        if y.is_true() {
            return x.clone();
        }
        let mut clauses = Vec::with_capacity(x.0.len() * y.0.len());
        for a in &x.0 {
            for b in &y.0 {
                let mut c: Vec<AtomId> = a.iter().chain(b).copied().collect();
                c.sort_unstable();
                c.dedup();
                if !self.contradictory(&c) {
                    clauses.push(c);
                }
            }
        }
        self.normalize(clauses)
    }

    fn or(&mut self, x: &Dnf, y: &Dnf) -> Dnf {
        if x.is_true() || y.is_true() {
            return Dnf::t();
        }
        let clauses = x.0.iter().chain(&y.0).cloned().collect();
        self.normalize(clauses)
    }

    fn contradictory(&self, clause: &[AtomId]) -> bool {
        clause.iter().any(|&a| match &self.atoms[a as usize] {
            Formula::Not(p) => self.index.get(p).is_some_and(|id| clause.binary_search(id).is_ok()),
            _ => false,
        })
    }

    /// Drops atoms implied by another atom of the same conjunction.
    fn reduce_clause(&mut self, c: &mut Vec<AtomId>) {
        let mut i = 0;
        while i < c.len() {
            let a = c[i];
            if c.iter().any(|&b| b != a && self.atom_implies(b, a)) {
                c.remove(i);
            } else {
                i += 1;
            }
        }
    }

    /// Sorted antichain: a clause is dropped when it implies a kept clause.
    fn normalize(&mut self, mut clauses: Vec<Vec<AtomId>>) -> Dnf {
        for c in &mut clauses {
            self.reduce_clause(c);
        }
        clauses.sort_unstable_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        clauses.dedup();
        if clauses.first().is_some_and(|c| c.is_empty()) {
            return Dnf::t();
        }
        let mut kept: Vec<Vec<AtomId>> = Vec::with_capacity(clauses.len());
        for c in clauses {
            if kept.iter().any(|k| self.clause_implies(&c, k)) {
                continue;
            }
            let mut i = 0;
            while i < kept.len() {
                if self.clause_implies(&kept[i], &c) {
                    kept.remove(i);
                } else {
                    i += 1;
                }
            }
            kept.push(c);
        }
        kept.sort_unstable();
        Dnf(kept)
    }

    fn clause_implies(&mut self, c: &[AtomId], k: &[AtomId]) -> bool {
        k.iter().all(|&b| c.iter().any(|&a| self.atom_implies(a, b)))
    }

    fn atom_implies(&mut self, a: AtomId, b: AtomId) -> bool {
        if a == b {
            return true;
        }
        if let Some(&r) = self.imp_cache.get(&(a, b)) {
            return r;
        }
        let r = formula_implies(&self.atoms[a as usize], &self.atoms[b as usize]);
        self.imp_cache.insert((a, b), r);
        r
    }

    fn af_atom(&mut self, id: AtomId, sigma: u32) -> Dnf {
        let sigma = sigma & self.masks[id as usize];
        if let Some(d) = self.af_cache.get(&(id, sigma)) {
            return d.clone();
        }
        let f = self.atoms[id as usize].clone();
        let d = match &f {
            Formula::Prop(p) => bool_dnf(sigma >> p & 1 == 1),
            Formula::Not(inner) => match **inner {
                Formula::Prop(p) => bool_dnf(sigma >> p & 1 == 0),
                _ => unreachable!("negation outside NNF"),
            },
            Formula::Next(a) => self.to_dnf(a),
            Formula::Until(a, b) => {
                let now = self.af_formula(b, sigma);
                let hold = self.af_formula(a, sigma);
                let keep = Dnf(vec![vec![id]]);
                let later = self.and(&hold, &keep);
                self.or(&now, &later)
            }
            Formula::Eventually(a) => {
                let now = self.af_formula(a, sigma);
                self.or(&now, &Dnf(vec![vec![id]]))
            }
            Formula::Always(a) => {
                let now = self.af_formula(a, sigma);
                self.and(&now, &Dnf(vec![vec![id]]))
            }
            other => unreachable!("not an atom: {other:?}"),
        };
        self.af_cache.insert((id, sigma), d.clone());
        d
    }

    fn af_formula(&mut self, f: &Formula, sigma: u32) -> Dnf {
        let d = self.to_dnf(f);
        self.af(&d, sigma)
    }

    fn af(&mut self, d: &Dnf, sigma: u32) -> Dnf {
        let mut acc = Dnf::f();
        for clause in &d.0 {
            let mut c = Dnf::t();
            for &a in clause {
                let x = self.af_atom(a, sigma);
                c = self.and(&c, &x);
                if c.is_false() {
                    break;
                }
            }
            acc = self.or(&acc, &c);
            if acc.is_true() {
                break;
            }
        }
        acc
    }

    fn dnf_formula(&self, d: &Dnf) -> Formula {
        Formula::disj(
            d.0.iter()
                .map(|c| Formula::conj(c.iter().map(|&a| self.atoms[a as usize].clone()))),
        )
    }

    fn dnf_mask(&self, d: &Dnf) -> u32 {
        d.0.iter().flatten().fold(0, |m, &a| m | self.masks[a as usize])
    }

    fn guess(&mut self, mut gs: Vec<Formula>) -> Option<usize> {
        gs.sort();
        if let Some(&i) = self.guess_index.get(&gs) {
            return Some(i);
        }
        let set: BTreeSet<Formula> = gs.iter().cloned().collect();
        let star = Formula::conj(gs.iter().map(|g| match g {
            Formula::Always(inner) => substitute(inner, &set),
            _ => unreachable!(),
        }));
        let star = self.to_dnf(&simplify(&star));
        if star.is_false() {
            return None;
        }
        let i = self.guesses.len();
        self.guesses.push(Guess { gs: gs.clone(), star });
        self.guess_index.insert(gs, i);
        Some(i)
    }

    fn n_key(d: Dnf) -> Key {
        if d.is_true() {
            Key::D(0, Dnf::t(), Dnf::t())
        } else if d.is_false() {
            Key::Sink
        } else {
            Key::N(d)
        }
    }

    fn d_key(g: usize, c: Dnf, n: Dnf) -> Key {
        if c.is_false() || n.is_false() {
            Key::Sink
        } else {
            Key::D(g, c, n)
        }
    }

    fn step(&mut self, key: &Key, sigma: u32) -> Key {
        match key {
            Key::Sink => Key::Sink,
            Key::N(d) => {
                let next = self.af(d, sigma);
                Self::n_key(next)
            }
            Key::D(g, c, n) => {
                let star = self.guesses[*g].star.clone();
                let star_next = self.af(&star, sigma);
                if c.is_true() {
                    let c2 = self.af(n, sigma);
                    Self::d_key(*g, c2, star_next)
                } else {
                    let c2 = self.af(c, sigma);
                    let n_next = self.af(n, sigma);
                    let n2 = self.and(&n_next, &star_next);
                    Self::d_key(*g, c2, n2)
                }
            }
        }
    }

    fn key_mask(&self, key: &Key) -> u32 {
        match key {
            Key::Sink => 0,
            Key::N(d) => self.dnf_mask(d),
            Key::D(g, c, n) => self.dnf_mask(c) | self.dnf_mask(n) | self.dnf_mask(&self.guesses[*g].star),
        }
    }

    fn jumps(&mut self, d: &Dnf) -> Result<Vec<Key>> {
        let psi = self.dnf_formula(d);
        let mut gsubs = BTreeSet::new();
        collect_always(&psi, &mut gsubs);
        let gsubs: Vec<Formula> = gsubs.into_iter().collect();
        if gsubs.len() > 16 {
            return Err(Error::StateLimit(1 << 16));
        }
        let mut out = Vec::new();
        for bits in 1u32..(1 << gsubs.len()) {
            let chosen: Vec<Formula> = (0..gsubs.len()).filter(|i| bits >> i & 1 == 1).map(|i| gsubs[i].clone()).collect();
            let set: BTreeSet<Formula> = chosen.iter().cloned().collect();
            let seed = simplify(&substitute(&psi, &set));
            let c = self.to_dnf(&seed);
            if c.is_false() {
                continue;
            }
            let Some(g) = self.guess(chosen) else { continue };
            out.push(Self::d_key(g, c, Dnf::t()));
        }
        Ok(out)
    }

    fn describe(&self, key: &Key, alphabet: &Alphabet) -> String {
        match key {
            Key::Sink => "sink".into(),
            Key::N(d) => self.dnf_formula(d).display(alphabet).to_string(),
            Key::D(g, c, n) => {
                let gs: Vec<String> = self.guesses[*g].gs.iter().map(|f| f.display(alphabet).to_string()).collect();
                format!(
                    "[{}] {} ; {}",
                    gs.join(", "),
                    self.dnf_formula(c).display(alphabet),
                    self.dnf_formula(n).display(alphabet)
                )
            }
        }
    }

    fn build(&mut self, f: &Formula, alphabet: &Alphabet, limit: usize) -> Result<Ldba> {
        let mut ids: HashMap<Key, usize> = HashMap::new();
        let mut keys: Vec<Key> = Vec::new();
        let mut b = LdbaBuilder::new(alphabet.clone());
        let start = self.to_dnf(f);
        let init = Self::n_key(start);
        let mut intern = |key: Key, ctx: &Ctx, b: &mut LdbaBuilder, keys: &mut Vec<Key>| -> Result<usize> {
            if let Some(&id) = ids.get(&key) {
                return Ok(id);
            }
            if keys.len() >= limit {
                return Err(Error::StateLimit(limit));
            }
            let (kind, acc) = match &key {
                Key::N(_) => (StateKind::N, false),
                Key::D(_, c, _) => (StateKind::D, c.is_true()),
                Key::Sink => (StateKind::D, false),
            };
            let id = b.add_state(kind, acc, ctx.describe(&key, alphabet));
            ids.insert(key.clone(), id);
            keys.push(key);
            Ok(id)
        };
        let q0 = intern(init, self, &mut b, &mut keys)?;
        let full = (1u32 << self.num_props) - 1;
        let mut next = 0;
        while next < keys.len() {
            let key = keys[next].clone();
            let q = next;
            next += 1;
            let mask = self.key_mask(&key) & full;
            let mut table: HashMap<u32, usize> = HashMap::new();
            let mut sub = mask;
            loop {
                let succ = self.step(&key, sub);
                let t = intern(succ, self, &mut b, &mut keys)?;
                table.insert(sub, t);
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & mask;
            }
            for a in alphabet.assignments() {
                b.set(q, a, table[&(a.0 & mask)]);
            }
            if let Key::N(d) = &key {
                for j in self.jumps(d)? {
                    let t = intern(j, self, &mut b, &mut keys)?;
                    b.add_epsilon(q, t);
                }
            }
        }
        let ldba = b.finish(q0).map_err(|e| Error::Mismatch(format!("internal automaton invariant: {e}")))?;
        Ok(ldba.minimize())
    }
}

fn bool_dnf(b: bool) -> Dnf {
    if b {
        Dnf::t()
    } else {
        Dnf::f()
    }
}

fn prop_mask(f: &Formula) -> u32 {
    match f {
        Formula::Prop(p) => 1 << p,
        _ => f.children().iter().fold(0, |m, c| m | prop_mask(c)),
    }
}

/// Sound structural implication between atoms: `x ⇒ F x`, `y ⇒ x U y`,
/// `G x ⇒ x`, closed under composition.
fn formula_implies(a: &Formula, b: &Formula) -> bool {
    if a == b {
        return true;
    }
    match b {
        Formula::Eventually(x) if formula_implies(a, x) => return true,
        Formula::Until(_, y) if formula_implies(a, y) => return true,
        _ => {}
    }
    match a {
        Formula::Always(x) => formula_implies(x, b),
        _ => false,
    }
}

fn collect_always(f: &Formula, out: &mut BTreeSet<Formula>) {
    if let Formula::Always(_) = f {
        out.insert(f.clone());
    }
    for c in f.children() {
        collect_always(c, out);
    }
}

/// Replaces every G-subformula by `true` if it is in `gs`, `false` otherwise.
fn substitute(f: &Formula, gs: &BTreeSet<Formula>) -> Formula {
    use Formula::*;
    match f {
        Always(_) => {
            if gs.contains(f) {
                True
            } else {
                False
            }
        }
        True | False | Prop(_) => f.clone(),
        Not(a) => Formula::not(substitute(a, gs)),
        And(a, b) => Formula::and(substitute(a, gs), substitute(b, gs)),
        Or(a, b) => Formula::or(substitute(a, gs), substitute(b, gs)),
        Next(a) => Formula::next(substitute(a, gs)),
        Until(a, b) => Formula::until(substitute(a, gs), substitute(b, gs)),
        Release(a, b) => Formula::release(substitute(a, gs), substitute(b, gs)),
        Eventually(a) => Formula::eventually(substitute(a, gs)),
    }
}

/// `a R b ≡ G b ∨ b U (a ∧ b)`.
fn remove_release(f: &Formula) -> Formula {
    use Formula::*;
    match f {
        Release(a, b) => {
            let (a, b) = (remove_release(a), remove_release(b));
            Formula::or(Formula::always(b.clone()), Formula::until(b.clone(), Formula::and(a, b)))
        }
        True | False | Prop(_) => f.clone(),
        Not(a) => Formula::not(remove_release(a)),
        And(a, b) => Formula::and(remove_release(a), remove_release(b)),
        Or(a, b) => Formula::or(remove_release(a), remove_release(b)),
        Next(a) => Formula::next(remove_release(a)),
        Until(a, b) => Formula::until(remove_release(a), remove_release(b)),
        Eventually(a) => Formula::eventually(remove_release(a)),
        Always(a) => Formula::always(remove_release(a)),
    }
}

/// Constant folding and a few equivalences on NNF formulas.
fn simplify(f: &Formula) -> Formula {
    use Formula::*;
    match f {
        True | False | Prop(_) | Not(_) => f.clone(),
        And(a, b) => match (simplify(a), simplify(b)) {
            (False, _) | (_, False) => False,
            (True, x) | (x, True) => x,
            (x, y) if x == y => x,
            (x, y) => Formula::and(x, y),
        },
        Or(a, b) => match (simplify(a), simplify(b)) {
            (True, _) | (_, True) => True,
            (False, x) | (x, False) => x,
            (x, y) if x == y => x,
            (x, y) => Formula::or(x, y),
        },
        Next(a) => match simplify(a) {
            x @ (True | False) => x,
            x => Formula::next(x),
        },
        Until(a, b) => match (simplify(a), simplify(b)) {
            (_, x @ (True | False)) => x,
            (False, y) => y,
            (True, y) => simplify(&Formula::eventually(y)),
            (x, y) => Formula::until(x, y),
        },
        Eventually(a) => match simplify(a) {
            x @ (True | False) => x,
            Eventually(x) => Eventually(x),
            x => Formula::eventually(x),
        },
        Always(a) => match simplify(a) {
            x @ (True | False) => x,
            Always(x) => Always(x),
            x => Formula::always(x),
        },
        Release(a, b) => match (simplify(a), simplify(b)) {
            (_, x @ (True | False)) => x,
            (True, y) => y,
            (False, y) => simplify(&Formula::always(y)),
            (x, y) => Formula::release(x, y),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parse;

    fn ab() -> Alphabet {
        Alphabet::new(["a", "b"]).unwrap()
    }

    fn build(text: &str) -> Ldba {
        compile(&parse(text, &ab()).unwrap(), &ab()).unwrap()
    }

    #[test]
    fn fig2_shape() {
        let b = build("(F G a) | F b");
        assert_eq!(b.num_states(), 4);
        assert_eq!(b.num_accepting(), 2);
        assert_eq!(b.num_epsilon(), 1);
        assert_eq!(b.sinks().len(), 1);
        let q0 = b.initial();
        assert_eq!(b.kind(q0), StateKind::N);
        let alpha = ab();
        let none = alpha.assignment::<&str>(&[]).unwrap();
        let only_a = alpha.assignment(&["a"]).unwrap();
        let only_b = alpha.assignment(&["b"]).unwrap();
        assert_eq!(b.delta(q0, none), q0);
        assert_eq!(b.delta(q0, only_a), q0);
        let q1 = b.delta(q0, only_b);
        assert!(b.is_trivially_accepting(q1));
        let q2 = b.epsilon(q0)[0];
        assert!(b.is_accepting(q2));
        assert_eq!(b.delta(q2, only_a), q2);
        assert!(b.is_sink(b.delta(q2, none)));
    }

    #[test]
    fn small_shapes() {
        let fa = build("F a");
        assert_eq!((fa.num_states(), fa.num_epsilon()), (2, 0));
        let f = build("false");
        assert_eq!(f.num_states(), 1);
        assert!(f.is_sink(0));
        let t = build("true");
        assert_eq!(t.num_states(), 1);
        assert!(t.is_trivially_accepting(0));
        let ga = build("G a");
        assert_eq!((ga.num_states(), ga.num_epsilon(), ga.num_accepting()), (3, 1, 1));
    }

    #[test]
    fn implication_rules() {
        let a = Formula::prop(0);
        let ga = Formula::always(a.clone());
        assert!(formula_implies(&ga, &Formula::eventually(ga.clone())));
        assert!(formula_implies(&ga, &a));
        assert!(formula_implies(&ga, &Formula::eventually(a.clone())));
        assert!(!formula_implies(&Formula::eventually(a.clone()), &a));
    }
}
