//! Independent brute-force references used by the property and acceptance
//! suites. Nothing here calls into the code it checks.
#![allow(dead_code)]

use ltlseq::automata::Ldba;
use ltlseq::oracle::{PolicyTable, ProductMdp};
use ltlseq::sequences::{CyclePath, EdgeKind};

/// Every edge `from → to` with its kind, read straight off the transition
/// table and ε-lists.
fn edge_kinds(b: &Ldba, from: usize, to: usize) -> Vec<EdgeKind> {
    let mut kinds = Vec::new();
    if b.alphabet().assignments().any(|a| b.delta(from, a) == to) {
        kinds.push(EdgeKind::Delta);
    }
    if b.epsilon(from).contains(&to) {
        kinds.push(EdgeKind::Epsilon);
    }
    kinds
}

/// All simple state sequences from `q`, generated without looking at edges.
fn injective_sequences(n: usize, q: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![q]];
    let mut frontier = vec![vec![q]];
    while let Some(seq) = frontier.pop() {
        for s in 0..n {
            if !seq.contains(&s) {
                let mut next = seq.clone();
                next.push(s);
                out.push(next.clone());
                frontier.push(next);
            }
        }
    }
    out
}

/// Exhaustive enumeration of simple paths from `q` closed by one edge back
/// into the path, keeping those whose cycle holds an accepting state.
pub fn brute_force_cycle_paths(b: &Ldba, q: usize) -> Vec<CyclePath> {
    let mut out = Vec::new();
    for states in injective_sequences(b.num_states(), q) {
        let m = states.len();
        // edge kind choices along the open path
        let mut prefixes: Vec<Vec<EdgeKind>> = vec![Vec::new()];
        for w in states.windows(2) {
            let kinds = edge_kinds(b, w[0], w[1]);
            prefixes = prefixes
                .into_iter()
                .flat_map(|p| {
                    kinds.iter().map(move |&k| {
                        let mut p = p.clone();
                        p.push(k);
                        p
                    })
                })
                .collect();
        }
        if prefixes.is_empty() {
            continue;
        }
        for loop_start in 0..m {
            if !states[loop_start..].iter().any(|&s| b.is_accepting(s)) {
                continue;
            }
            for k in edge_kinds(b, states[m - 1], states[loop_start]) {
                for p in &prefixes {
                    let mut edges = p.clone();
                    edges.push(k);
                    out.push(CyclePath { states: states.clone(), edges, loop_start });
                }
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Rows of the chain induced by `pi`, and for each state whether it lies
/// in a bottom SCC with (`Some(true)`) or without (`Some(false)`) an
/// accepting state. Bottom SCCs come from the transitive closure.
pub fn bottom_classes(p: &ProductMdp, pi: &PolicyTable) -> (Vec<Vec<(usize, f64)>>, Vec<Option<bool>>) {
    let n = p.num_states();
    let rows: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|x| {
            let probs = pi.probs(x, p.choices[x].len());
            let mut row: Vec<(usize, f64)> = Vec::new();
            for (c, w) in p.choices[x].iter().zip(probs) {
                for &(t, pr) in &c.next {
                    if w * pr > 0.0 {
                        row.push((t, w * pr));
                    }
                }
            }
            row
        })
        .collect();
    let mut reach = vec![vec![false; n]; n];
    for (x, row) in rows.iter().enumerate() {
        reach[x][x] = true;
        for &(t, _) in row {
            reach[x][t] = true;
        }
    }
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                for j in 0..n {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    let class = (0..n)
        .map(|x| {
            let bottom = (0..n).all(|y| !reach[x][y] || reach[y][x]);
            bottom.then(|| (0..n).any(|y| reach[x][y] && p.accepting[y]))
        })
        .collect();
    (rows, class)
}

/// Probability of ending in a bottom SCC whose acceptance equals
/// `accepting_bottom`, by plain iteration of the absorption equations.
pub fn absorption_probability(p: &ProductMdp, pi: &PolicyTable, accepting_bottom: bool) -> Vec<f64> {
    let n = p.num_states();
    let (rows, class) = bottom_classes(p, pi);
    let good: Vec<Option<bool>> = class.iter().map(|c| c.map(|acc| acc == accepting_bottom)).collect();
    let mut f: Vec<f64> = good.iter().map(|g| if *g == Some(true) { 1.0 } else { 0.0 }).collect();
    for _ in 0..200_000 {
        let next: Vec<f64> = (0..n)
            .map(|x| match good[x] {
                Some(g) => f64::from(u8::from(g)),
                None => rows[x].iter().map(|&(t, pr)| pr * f[t]).sum(),
            })
            .collect();
        let delta = (0..n).map(|x| (next[x] - f[x]).abs()).fold(0.0, f64::max);
        f = next;
        if delta < 1e-15 {
            break;
        }
    }
    f
}

/// Simulated runs until absorption; mean and standard error of the number
/// of accepting arrivals over the runs that end in a rejecting bottom SCC,
/// plus the number of such runs.
pub fn sampled_failure_visits(p: &ProductMdp, pi: &PolicyTable, runs: usize, rng: &mut impl rand::Rng) -> (f64, f64, usize) {
    let (rows, class) = bottom_classes(p, pi);
    let draw = |dist: &[(usize, f64)], rng: &mut dyn rand::RngCore| -> usize {
        let u: f64 = rand::Rng::random(rng);
        let mut acc = 0.0;
        for &(t, pr) in dist {
            acc += pr;
            if u < acc {
                return t;
            }
        }
        dist.last().unwrap().0
    };
    let mut counts = Vec::new();
    for _ in 0..runs {
        let mut x = draw(&p.initial, rng);
        let mut visits = 0.0;
        while class[x].is_none() {
            x = draw(&rows[x], rng);
            if p.accepting[x] {
                visits += 1.0;
            }
        }
        if class[x] == Some(false) {
            counts.push(visits);
        }
    }
    let k = counts.len() as f64;
    if counts.len() < 2 {
        return (counts.first().copied().unwrap_or(0.0), 0.0, counts.len());
    }
    let mean = counts.iter().sum::<f64>() / k;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt(), counts.len())
}
