use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::Exec;

use super::chain::{analyse, eventual_discounted_value, initial_value, satisfaction_by_state, solve};
use super::mdp::{PolicyTable, ProductMdp};

/// Failure probability and expected number of accepting arrivals on
/// failing runs, `O_π`.
pub fn failure_visits(p: &ProductMdp, pi: &PolicyTable) -> Result<(f64, f64)> {
    let sat = satisfaction_by_state(p, pi)?;
    let fail: Vec<f64> = sat.iter().map(|s| (1.0 - s).clamp(0.0, 1.0)).collect();
    let info = analyse(p, pi);
    // W(x) = E[#accepting arrivals · 1[fail] | x]
    let n = p.num_states();
    let mut r = vec![0.0; n];
    for (x, row) in info.chain.iter().enumerate() {
        for &(t, pr) in row {
            if p.accepting[t] {
                r[x] += pr * fail[t];
            }
        }
    }
    let fixed: Vec<Option<f64>> = info.bottom.iter().map(|b| b.map(|_| 0.0)).collect();
    let w = solve(&info.chain, &r, &fixed)?;
    let p_fail = initial_value(p, &fail);
    let o = if p_fail > 1e-12 { initial_value(p, &w) / p_fail } else { 0.0 };
    Ok((p_fail, o))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct McEstimate {
    pub runs: usize,
    pub failures: usize,
    /// Mean accepting arrivals over failing runs.
    pub mean: f64,
    pub std_error: f64,
}

/// Samples runs until they enter a bottom SCC and averages the accepting
/// arrivals of those that fail.
pub fn monte_carlo_failure_visits(p: &ProductMdp, pi: &PolicyTable, runs: usize, rng: &mut impl Rng) -> McEstimate {
    let info = analyse(p, pi);
    let sample = |dist: &[(usize, f64)], rng: &mut dyn rand::RngCore| -> usize {
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
        let mut x = sample(&p.initial, rng);
        let mut visits = 0usize;
        while info.bottom[x].is_none() {
            x = sample(&info.chain[x], rng);
            if p.accepting[x] {
                visits += 1;
            }
        }
        if info.bottom[x] == Some(false) {
            counts.push(visits as f64);
        }
    }
    let k = counts.len();
    let mean = if k > 0 { counts.iter().sum::<f64>() / k as f64 } else { 0.0 };
    let std_error = if k > 1 {
        let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
        (var / k as f64).sqrt()
    } else {
        0.0
    };
    McEstimate { runs, failures: k, mean, std_error }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolicyReport {
    pub choices: Vec<usize>,
    pub satisfaction: f64,
    pub eventual_value: f64,
    pub failure_probability: f64,
    pub failure_visits: f64,
    /// `|(1-γ)·V - Pr| ≤ log(1/γ)·O_π`.
    pub lemma_holds: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TheoremReport {
    pub gamma: f64,
    pub policies: Vec<PolicyReport>,
    /// Index of the eventual-discounting optimum; ties go to the one with
    /// the lowest satisfaction probability.
    pub rl_optimal: usize,
    pub best_satisfaction: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

fn decode(mut i: u128, radix: &[usize]) -> Vec<usize> {
    radix
        .iter()
        .map(|&r| {
            let d = (i % r as u128) as usize;
            i /= r as u128;
            d
        })
        .collect()
}

/// Enumerates every deterministic memoryless policy and checks
/// `Pr(π*) - Pr(π*_RL) ≤ 2·log(1/γ)·sup_π O_π`.
pub fn theorem1_check(p: &ProductMdp, gamma: f64, limit: usize, exec: Exec) -> Result<TheoremReport> {
    assert!(gamma > 0.0 && gamma < 1.0);
    let count = p.policy_count();
    if count > limit as u128 {
        return Err(Error::EnumerationLimit(limit));
    }
    let radix: Vec<usize> = p.choices.iter().map(Vec::len).collect();
    let log = (1.0 / gamma).ln();
    let policies = exec.map_range(count as usize, |i| -> Result<PolicyReport> {
        let choices = decode(i as u128, &radix);
        let pi = PolicyTable::Deterministic(choices.clone());
        let sat = initial_value(p, &satisfaction_by_state(p, &pi)?);
        let v = initial_value(p, &eventual_discounted_value(p, &pi, gamma)?);
        let (pf, o) = failure_visits(p, &pi)?;
        let lemma_holds = ((1.0 - gamma) * v - sat).abs() <= log * o + 1e-9;
        Ok(PolicyReport {
            choices,
            satisfaction: sat,
            eventual_value: v,
            failure_probability: pf,
            failure_visits: o,
            lemma_holds,
        })
    });
    let policies: Vec<PolicyReport> = policies.into_iter().collect::<Result<_>>()?;
    let best_v = policies.iter().map(|r| r.eventual_value).fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-9 * best_v.abs().max(1.0);
    let rl_optimal = (0..policies.len())
        .filter(|&i| policies[i].eventual_value >= best_v - tol)
        .min_by(|&a, &b| policies[a].satisfaction.total_cmp(&policies[b].satisfaction))
        .unwrap();
    let best_satisfaction = policies.iter().map(|r| r.satisfaction).fold(f64::NEG_INFINITY, f64::max);
    let sup_o = policies.iter().map(|r| r.failure_visits).fold(0.0, f64::max);
    let lhs = best_satisfaction - policies[rl_optimal].satisfaction;
    let rhs = 2.0 * log * sup_o;
    Ok(TheoremReport {
        gamma,
        rl_optimal,
        best_satisfaction,
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-9,
        policies,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{build_product, fig6};
    use rand::SeedableRng;

    #[test]
    fn fig6_bound() {
        let (m, b) = fig6();
        let p = build_product(&m, &b, 100).unwrap();
        let rep = theorem1_check(&p, 0.99, 1000, Exec::Sequential).unwrap();
        assert_eq!(rep.policies.len(), 2);
        let s0 = p.initial[0].0;
        assert_eq!(rep.policies[rep.rl_optimal].choices[s0], 0);
        assert!(rep.lhs.abs() < 1e-12);
        assert!(rep.holds);
        for r in &rep.policies {
            assert_eq!(r.failure_visits, 0.0);
        }
    }

    #[test]
    fn failure_visits_match_sampling() {
        // 0 -> 1 (accepting) -> {0: 0.5, 2 (rejecting sink): 0.5}; failing runs
        // make a geometric number of accepting arrivals with mean 2.
        use crate::envs::ProductAction;
        use crate::oracle::{Choice, ProductState};
        let ch = |next: Vec<(usize, f64)>| vec![Choice { action: ProductAction::Env(0), next }];
        let p = ProductMdp {
            states: (0..3).map(|s| ProductState::Pair { s, q: 0 }).collect(),
            choices: vec![ch(vec![(1, 1.0)]), ch(vec![(0, 0.5), (2, 0.5)]), ch(vec![(2, 1.0)])],
            accepting: vec![false, true, false],
            initial: vec![(0, 1.0)],
        };
        let pi = PolicyTable::Deterministic(vec![0; 3]);
        let (pf, o) = failure_visits(&p, &pi).unwrap();
        assert!((pf - 1.0).abs() < 1e-12);
        assert!((o - 2.0).abs() < 1e-10);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mc = monte_carlo_failure_visits(&p, &pi, 20_000, &mut rng);
        assert!((mc.mean - o).abs() <= 3.0 * mc.std_error);
    }
}
