use serde::{Deserialize, Serialize};

use super::{Assignment, Formula};

/// Ultimately periodic word `prefix · cycle^ω`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LassoWord {
    pub prefix: Vec<Assignment>,
    pub cycle: Vec<Assignment>,
}

impl LassoWord {
    pub fn new(prefix: Vec<Assignment>, cycle: Vec<Assignment>) -> Self {
        assert!(!cycle.is_empty(), "lasso cycle must be nonempty");
        LassoWord { prefix, cycle }
    }

    pub fn len(&self) -> usize {
        self.prefix.len() + self.cycle.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Position after `i`; the last position wraps to the start of the cycle.
    pub fn succ(&self, i: usize) -> usize {
        if i + 1 < self.len() {
            i + 1
        } else {
            self.prefix.len()
        }
    }

    pub fn at(&self, i: usize) -> Assignment {
        if i < self.prefix.len() {
            self.prefix[i]
        } else {
            self.cycle[i - self.prefix.len()]
        }
    }

    /// Letter at step `t` of the infinite word.
    pub fn letter(&self, t: usize) -> Assignment {
        if t < self.prefix.len() {
            self.prefix[t]
        } else {
            self.cycle[(t - self.prefix.len()) % self.cycle.len()]
        }
    }
}

/// Decides `w ⊨ f` exactly.
pub fn satisfies(w: &LassoWord, f: &Formula) -> bool {
    eval(w, f)[0]
}

/// Truth value of `f` at every position of `w`.
pub(crate) fn eval(w: &LassoWord, f: &Formula) -> Vec<bool> {
    let n = w.len();
    match f {
        Formula::True => vec![true; n],
        Formula::False => vec![false; n],
        Formula::Prop(p) => (0..n).map(|i| w.at(i).contains(*p)).collect(),
        Formula::Not(a) => eval(w, a).into_iter().map(|x| !x).collect(),
        Formula::And(a, b) => zip(eval(w, a), eval(w, b), |x, y| x && y),
        Formula::Or(a, b) => zip(eval(w, a), eval(w, b), |x, y| x || y),
        Formula::Next(a) => {
            let t = eval(w, a);
            (0..n).map(|i| t[w.succ(i)]).collect()
        }
        Formula::Until(a, b) => fixpoint(w, &eval(w, a), &eval(w, b), false),
        Formula::Eventually(a) => fixpoint(w, &vec![true; n], &eval(w, a), false),
        Formula::Release(a, b) => {
            // a R b  ≡  b ∧ (a ∨ X(a R b)), greatest fixpoint
            let ta = eval(w, a);
            let tb = eval(w, b);
            let mut v = vec![true; n];
            iterate(w, &mut v, |i, next| tb[i] && (ta[i] || next));
            v
        }
        Formula::Always(a) => {
            let t = eval(w, a);
            let mut v = vec![true; n];
            iterate(w, &mut v, |i, next| t[i] && next);
            v
        }
    }
}

fn zip(a: Vec<bool>, b: Vec<bool>, f: impl Fn(bool, bool) -> bool) -> Vec<bool> {
    a.into_iter().zip(b).map(|(x, y)| f(x, y)).collect()
}

// a U b ≡ b ∨ (a ∧ X(a U b)), least fixpoint
fn fixpoint(w: &LassoWord, ta: &[bool], tb: &[bool], init: bool) -> Vec<bool> {
    let mut v = vec![init; w.len()];
    iterate(w, &mut v, |i, next| tb[i] || (ta[i] && next));
    v
}

// Backward sweeps until stable; the lasso has one back edge so two passes over
// the cycle suffice, the loop bound is only a guard.
fn iterate(w: &LassoWord, v: &mut [bool], step: impl Fn(usize, bool) -> bool) {
    let n = w.len();
    for _ in 0..=n + 1 {
        let mut changed = false;
        for i in (0..n).rev() {
            let nv = step(i, v[w.succ(i)]);
            if nv != v[i] {
                v[i] = nv;
                changed = true;
            }
        }
        if !changed {
            return;
        }
    }
}

/// All lasso words over `num_props` propositions with `|prefix| + |cycle| <= max_len`.
pub fn enumerate_lassos(num_props: usize, max_len: usize) -> Vec<LassoWord> {
    let k = 1usize << num_props;
    let mut out = Vec::new();
    for total in 1..=max_len {
        let count = k.pow(total as u32);
        for cycle_len in 1..=total {
            for code in 0..count {
                let mut c = code;
                let letters: Vec<Assignment> = (0..total)
                    .map(|_| {
                        let a = Assignment((c % k) as u32);
                        c /= k;
                        a
                    })
                    .collect();
                let split = total - cycle_len;
                out.push(LassoWord::new(letters[..split].to_vec(), letters[split..].to_vec()));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{parse, Alphabet};

    fn ab() -> Alphabet {
        Alphabet::new(["a", "b"]).unwrap()
    }

    fn word(prefix: &[&[&str]], cycle: &[&[&str]]) -> LassoWord {
        let alpha = ab();
        let conv = |xs: &[&[&str]]| xs.iter().map(|s| alpha.assignment(s).unwrap()).collect();
        LassoWord::new(conv(prefix), conv(cycle))
    }

    fn sat(w: &LassoWord, text: &str) -> bool {
        satisfies(w, &parse(text, &ab()).unwrap())
    }

    #[test]
    fn basic_examples() {
        assert!(sat(&word(&[], &[&["a"]]), "G a"));
        assert!(sat(&word(&[&[], &["b"]], &[&[]]), "F b"));
        assert!(sat(&word(&[], &[&["a"], &["b"]]), "G F a & G F b"));
        assert!(!sat(&word(&[&["a"]], &[&[]]), "G F a"));
        assert!(sat(&word(&[&["a"]], &[&[]]), "F G !a"));
        assert!(sat(&word(&[&["a"], &["a"]], &[&["b"]]), "a U b"));
        assert!(!sat(&word(&[], &[&["a"]]), "a U b"));
        assert!(sat(&word(&[], &[&["a"]]), "b R a"));
        assert!(sat(&word(&[&["a"]], &[&["b"]]), "X b & X X b"));
    }

    #[test]
    fn enumeration_count() {
        // sum over total length t of t * 4^t for t = 1..=6
        let expect: usize = (1..=6).map(|t| t * 4usize.pow(t as u32)).sum();
        assert_eq!(enumerate_lassos(2, 6).len(), expect);
        assert_eq!(expect, 30948);
    }
}
