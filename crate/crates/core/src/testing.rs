//! Random instances and fixtures shared by tests, benches and the CLI.

use rand::{Rng, RngCore};

use crate::automata::{Ldba, LdbaBuilder, StateKind};
use crate::envs::ProductAction;
use crate::logic::{Alphabet, Formula};
use crate::oracle::{Choice, ProductMdp, ProductState};

/// Random formula of depth at most `depth` over `num_props` propositions.
pub fn random_formula(rng: &mut impl Rng, num_props: usize, depth: usize) -> Formula {
    if depth <= 1 || rng.random_bool(0.2) {
        return match rng.random_range(0..10) {
            0 => Formula::True,
            1 => Formula::False,
            _ => Formula::Prop(rng.random_range(0..num_props)),
        };
    }
    let d = depth - 1;
    match rng.random_range(0..9) {
        0 => Formula::not(random_formula(rng, num_props, d)),
        1 => Formula::and(random_formula(rng, num_props, d), random_formula(rng, num_props, d)),
        2 => Formula::or(random_formula(rng, num_props, d), random_formula(rng, num_props, d)),
        3 => Formula::next(random_formula(rng, num_props, d)),
        4 => Formula::until(random_formula(rng, num_props, d), random_formula(rng, num_props, d)),
        5 => Formula::release(random_formula(rng, num_props, d), random_formula(rng, num_props, d)),
        6 => Formula::eventually(random_formula(rng, num_props, d)),
        7 => Formula::always(random_formula(rng, num_props, d)),
        _ => Formula::implies(random_formula(rng, num_props, d), random_formula(rng, num_props, d)),
    }
}

/// Random structurally valid LDBA with `n` states (at least 2) over
/// `num_props` propositions. Roughly a third of the states form the N-part.
pub fn random_ldba(rng: &mut impl RngCore, n: usize, num_props: usize) -> Ldba {
    assert!(n >= 2);
    let alphabet = Alphabet::indexed(num_props);
    let n_count = rng.random_range(0..=n / 3);
    let mut b = LdbaBuilder::new(alphabet.clone());
    for q in 0..n {
        let kind = if q < n_count { StateKind::N } else { StateKind::D };
        let acc = kind == StateKind::D && rng.random_bool(0.35);
        b.add_state(kind, acc, format!("r{q}"));
    }
    for q in 0..n {
        let lo = if q < n_count { 0 } else { n_count };
        for a in alphabet.assignments() {
            let t = rng.random_range(lo..n);
            b.set(q, a, t);
        }
        if q < n_count {
            for t in n_count..n {
                if rng.random_bool(0.3) {
                    b.add_epsilon(q, t);
                }
            }
        }
    }
    b.finish(0).expect("random LDBA is well formed")
}

/// Random product MDP with at most `max_states` states, one to three
/// choices per state and random successor distributions.
pub fn random_product(rng: &mut impl RngCore, max_states: usize) -> ProductMdp {
    let n = rng.random_range(2..=max_states);
    let choices = (0..n)
        .map(|_| {
            (0..rng.random_range(1..=3))
                .map(|a| {
                    let k = rng.random_range(1..=3);
                    let mut next: Vec<(usize, f64)> = Vec::new();
                    for _ in 0..k {
                        let t = rng.random_range(0..n);
                        let w = rng.random_range(0.05..1.0);
                        match next.iter_mut().find(|(x, _)| *x == t) {
                            Some(e) => e.1 += w,
                            None => next.push((t, w)),
                        }
                    }
                    let total: f64 = next.iter().map(|&(_, w)| w).sum();
                    for e in &mut next {
                        e.1 /= total;
                    }
                    Choice { action: ProductAction::Env(a), next }
                })
                .collect()
        })
        .collect();
    ProductMdp {
        states: (0..n).map(|s| ProductState::Pair { s, q: 0 }).collect(),
        choices,
        accepting: (0..n).map(|_| rng.random_bool(0.3)).collect(),
        initial: vec![(0, 1.0)],
    }
}

/// FlatWorld layout with a green core enclosed by a ring of blue disks and a
/// small yellow region in the far corner.
pub fn guarded_flat_world() -> crate::envs::FlatWorldConfig {
    use crate::envs::{FlatWorldConfig, RegionSpec};
    let (cx, cy) = (0.5, 0.5);
    let mut regions = vec![RegionSpec { color: "green".into(), center: [cx, cy], radius: 0.45 }];
    for i in 0..16 {
        let th = i as f64 * std::f64::consts::TAU / 16.0;
        regions.push(RegionSpec { color: "blue".into(), center: [cx + 0.75 * th.cos(), cy + 0.75 * th.sin()], radius: 0.25 });
    }
    regions.push(RegionSpec { color: "yellow".into(), center: [-1.6, -1.6], radius: 0.3 });
    FlatWorldConfig { resolution: 40, regions, boundary_penalty: 1.0 }
}

/// Finite-horizon benchmark tasks, per environment.
pub const LETTER_WORLD_TASKS: &[&str] = &[
    "F (a & (!b U c)) & F d",
    "F d & (!f U (d & F b))",
    "F ((a | c | j) & F b) & F (c & F d) & F k",
    "!a U (b & (!c U (d & (!e U f))))",
    "((a | b | c | d) -> F (e & (F (f & F g)))) U (h & F i)",
];

pub const ZONE_TASKS: &[&str] = &[
    "F (green & (!blue U yellow)) & F magenta",
    "F blue & (!blue U (green & F yellow))",
    "F (blue | green) & F yellow & F magenta",
    "!(magenta | yellow) U (blue & F green)",
    "!green U ((blue | magenta) & (!green U yellow))",
    "((green | blue) -> (!yellow U magenta)) U yellow",
];

pub const FLAT_WORLD_TASKS: &[&str] = &[
    "F ((red & magenta) & F ((blue & green) & F yellow))",
    "F (orange & (!red U magenta))",
    "(!red U (green & blue & aqua)) & F (orange & (F (red & magenta)))",
    "((!yellow & !orange) U (green & blue)) & (!green U magenta)",
    "(blue -> F magenta) U (yellow | ((green & blue) & F orange))",
];

/// Infinite-horizon benchmark tasks.
pub const INFINITE_TASKS: &[&str] = &[
    "G F (e & (!a U f))",
    "G F a & G F b & G F c & G F d & G (!e & !f)",
    "G F blue & G F green",
    "G F blue & G F green & G F yellow & G !magenta",
    "G F (blue & green) & G F (red & magenta)",
    "F G a",
    "G F a & G F b",
    "(F G a) | F b",
];

/// Renames the propositions of `text` onto `a` and `b`, alternating in
/// order of first appearance.
pub fn project_onto_two(text: &str) -> String {
    let mut seen: Vec<String> = Vec::new();
    let mut out = String::new();
    let mut word = String::new();
    let keywords = ["F", "G", "X", "U", "R", "true", "false"];
    let mut flush = |word: &mut String, out: &mut String| {
        if word.is_empty() {
            return;
        }
        if keywords.contains(&word.as_str()) {
            out.push_str(word);
        } else {
            let i = seen.iter().position(|w| w == word).unwrap_or_else(|| {
                seen.push(word.clone());
                seen.len() - 1
            });
            out.push(if i % 2 == 0 { 'a' } else { 'b' });
        }
        word.clear();
    };
    for c in text.chars() {
        if c.is_alphanumeric() || c == '_' {
            word.push(c);
        } else {
            flush(&mut word, &mut out);
            out.push(c);
        }
    }
    flush(&mut word, &mut out);
    out
}
