use crate::error::{Error, Result};
use crate::graph::scc;

use super::mdp::{PolicyTable, ProductMdp};

/// Bottom SCC classification of an induced chain.
pub(crate) struct ChainInfo {
    pub chain: Vec<Vec<(usize, f64)>>,
    /// `Some(true)` for states in accepting bottom SCCs, `Some(false)` for
    /// rejecting ones, `None` for transient states.
    pub bottom: Vec<Option<bool>>,
}

pub(crate) fn analyse(p: &ProductMdp, pi: &PolicyTable) -> ChainInfo {
    let chain = p.chain(pi);
    let adj: Vec<Vec<usize>> =
        chain.iter().map(|row| row.iter().filter(|&&(_, pr)| pr > 0.0).map(|&(t, _)| t).collect()).collect();
    let sccs = scc(&adj);
    let is_bottom = sccs.bottom(&adj);
    let mut bottom = vec![None; chain.len()];
    for (c, members) in sccs.members.iter().enumerate() {
        if is_bottom[c] {
            let acc = members.iter().any(|&x| p.accepting[x]);
            for &x in members {
                bottom[x] = Some(acc);
            }
        }
    }
    ChainInfo { chain, bottom }
}

/// Solves `x = M x + r` where rows of `M` are sparse. Rows in `fixed` are
/// pinned to the given value.
pub(crate) fn solve(rows: &[Vec<(usize, f64)>], r: &[f64], fixed: &[Option<f64>]) -> Result<Vec<f64>> {
    let n = rows.len();
    if n <= 4000 {
        let mut a = nalgebra::DMatrix::<f64>::identity(n, n);
        let mut b = nalgebra::DVector::<f64>::zeros(n);
        for x in 0..n {
            if let Some(v) = fixed[x] {
                b[x] = v;
                continue;
            }
            b[x] = r[x];
            for &(t, m) in &rows[x] {
                a[(x, t)] -= m;
            }
        }
        let sol = a.lu().solve(&b).ok_or_else(|| Error::NonFinite("singular linear system".into()))?;
        if sol.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("linear solve produced non-finite values".into()));
        }
        return Ok(sol.iter().copied().collect());
    }
    // Gauss-Seidel for large chains
    let mut x: Vec<f64> = fixed.iter().map(|f| f.unwrap_or(0.0)).collect();
    let max_iter = 1_000_000;
    for _ in 0..max_iter {
        let mut delta: f64 = 0.0;
        for i in 0..n {
            if fixed[i].is_some() {
                continue;
            }
            let mut diag = 0.0;
            let mut acc = r[i];
            for &(t, m) in &rows[i] {
                if t == i {
                    diag += m;
                } else {
                    acc += m * x[t];
                }
            }
            let v = acc / (1.0 - diag);
            delta = delta.max((v - x[i]).abs());
            x[i] = v;
        }
        if delta < 1e-13 {
            return Ok(x);
        }
    }
    Err(Error::NoConvergence(max_iter))
}

/// Probability of satisfying the Büchi condition from every state.
pub fn satisfaction_by_state(p: &ProductMdp, pi: &PolicyTable) -> Result<Vec<f64>> {
    let info = analyse(p, pi);
    let fixed: Vec<Option<f64>> = info.bottom.iter().map(|b| b.map(|acc| if acc { 1.0 } else { 0.0 })).collect();
    solve(&info.chain, &vec![0.0; p.num_states()], &fixed)
}

/// Probability that the induced run visits accepting states infinitely
/// often, from the initial distribution.
pub fn satisfaction_probability(p: &ProductMdp, pi: &PolicyTable) -> Result<f64> {
    let v = satisfaction_by_state(p, pi)?;
    Ok(initial_value(p, &v))
}

/// Expected `Σ_j γ^j` over accepting arrivals, per state: every accepting
/// visit advances the discount, other steps are free.
pub fn eventual_discounted_value(p: &ProductMdp, pi: &PolicyTable, gamma: f64) -> Result<Vec<f64>> {
    let info = analyse(p, pi);
    let n = p.num_states();
    let mut rows = Vec::with_capacity(n);
    let mut r = vec![0.0; n];
    for (x, row) in info.chain.iter().enumerate() {
        let mut m = Vec::with_capacity(row.len());
        for &(t, pr) in row {
            if p.accepting[t] {
                r[x] += pr;
                m.push((t, gamma * pr));
            } else {
                m.push((t, pr));
            }
        }
        rows.push(m);
    }
    // rejecting bottom SCCs never see another accepting state
    let fixed: Vec<Option<f64>> = info.bottom.iter().map(|b| if *b == Some(false) { Some(0.0) } else { None }).collect();
    solve(&rows, &r, &fixed)
}

/// Weighted average of a per-state quantity over the initial distribution.
/// Only arrivals count as visits, the start state itself does not.
pub fn initial_value(p: &ProductMdp, v: &[f64]) -> f64 {
    p.initial.iter().map(|&(x, w)| w * v[x]).sum()
}
