use std::sync::Arc;

use ltlseq::automata::{compile, Ldba};
use ltlseq::envs::{FlatWorld, GridEnv, LetterPlacement, LetterWorld, LetterWorldConfig, ProductAction};
use ltlseq::executor::{
    evaluate, run_episode, select_sequence, Agent, AgentAction, ExecutionConfig, OracleAgent, Outcome,
};
use ltlseq::logic::parse;
use ltlseq::par::Exec;
use ltlseq::sequences::TruncatedSequence;
use ltlseq::testing::guarded_flat_world;
use ltlseq::Error;

fn letters(placements: &[(&str, usize, usize)], num_letters: usize) -> GridEnv {
    let cfg = LetterWorldConfig {
        size: 5,
        num_letters,
        copies_per_letter: 1,
        layout: Some(placements.iter().map(|&(l, row, col)| LetterPlacement { letter: l.into(), row, col }).collect()),
        ..Default::default()
    };
    GridEnv::Letter(LetterWorld::new(cfg).unwrap())
}

fn ldba(text: &str, env: &GridEnv) -> Arc<Ldba> {
    let ab = env.alphabet().clone();
    Arc::new(compile(&parse(text, &ab).unwrap(), &ab).unwrap())
}

#[test]
fn reach_task_succeeds_at_first_b() {
    let env = letters(&[("a", 0, 0), ("b", 2, 2)], 2);
    let b = ldba("F b", &env);
    let cfg = ExecutionConfig { gamma: 0.94, ..Default::default() };
    for seed in 0..10 {
        let r = run_episode(&b, env.clone(), &mut OracleAgent::new(0.94), &cfg, seed).unwrap();
        assert!(r.success && r.certified);
        let first_b = r.trajectory.iter().position(|rec| rec.label == ["b"]).unwrap();
        assert_eq!(r.steps_to_satisfaction, Some(first_b));
        assert_eq!(r.outcome, Outcome::Success);
    }
}

#[test]
fn infeasible_task() {
    let env = letters(&[("a", 0, 0)], 1);
    let b = ldba("a & !a", &env);
    let mut agent = OracleAgent::new(0.9);
    let cfg = ExecutionConfig::default();
    assert_eq!(select_sequence(&env, &b, b.initial(), &mut agent, &cfg).unwrap_err(), Error::Infeasible(b.initial()));
    let reports = evaluate(&b, &env, &agent, &cfg, &[1, 2], Exec::Sequential).unwrap();
    assert!(reports.iter().all(|r| r.outcome == Outcome::Infeasible && !r.success));
}

#[test]
fn singleton_candidate_is_selected_regardless_of_value() {
    struct Zero;
    impl Agent for Zero {
        fn value(&mut self, _: &GridEnv, _: &TruncatedSequence) -> f64 {
            0.0
        }
        fn act(&mut self, _: &GridEnv, _: &TruncatedSequence, _: bool) -> ltlseq::Result<AgentAction> {
            Ok(AgentAction::Env(0))
        }
    }
    let env = letters(&[("a", 0, 0)], 1);
    let b = ldba("F a", &env);
    let sel = select_sequence(&env, &b, b.initial(), &mut Zero, &ExecutionConfig::default()).unwrap();
    assert_eq!(sel.index, 0);
}

/// Prefers sequences that start with ε.
struct EpsFirst;

impl Agent for EpsFirst {
    fn value(&mut self, _: &GridEnv, seq: &TruncatedSequence) -> f64 {
        if seq.steps[0].reach.is_epsilon() {
            1.0
        } else {
            0.0
        }
    }
    fn act(&mut self, _: &GridEnv, _: &TruncatedSequence, allowed: bool) -> ltlseq::Result<AgentAction> {
        Ok(if allowed { AgentAction::Epsilon } else { AgentAction::Env(1) })
    }
}

#[test]
fn epsilon_gate_requires_a() {
    // a two cells right of the start column; moving right reaches it
    let env = letters(&[("a", 2, 3), ("b", 4, 4)], 2);
    let b = ldba("(F G a) | F b", &env);
        let cfg = ExecutionConfig { max_steps: 3, ..Default::default() };
    let mut penv = ltlseq::envs::ProductEnv::new(env, b.clone());
    penv.reset_to_cell(2 * 5 + 1);
    let sel = select_sequence(&penv.env, &b, penv.q(), &mut EpsFirst, &cfg).unwrap();
    assert!(sel.truncated.steps[0].reach.is_epsilon());
    // off a: masked, on a: allowed
    let l = penv.env.label();
    assert!(sel.truncated.steps[1].avoid.contains(l));
    penv.step(ProductAction::Env(1)).unwrap();
    penv.step(ProductAction::Env(1)).unwrap();
    assert!(!sel.truncated.steps[1].avoid.contains(penv.env.label()));
}

#[test]
fn guarded_green_is_skipped_for_yellow() {
    let env = GridEnv::Flat(FlatWorld::new(guarded_flat_world()).unwrap());
    let b = ldba("(F green | F yellow) & G !blue", &env);
    let agent = OracleAgent::new(0.98);
    let cfg = ExecutionConfig { gamma: 0.98, max_steps: 200, ..Default::default() };
    let seeds: Vec<u64> = (0..20).collect();
    let reports = evaluate(&b, &env, &agent, &cfg, &seeds, Exec::Parallel).unwrap();
    for r in &reports {
        assert!(r.success, "seed {} failed: {:?}", r.seed, r.outcome);
        assert!(r.certified);
        assert!(r.trajectory.iter().any(|rec| rec.label == ["yellow"]));
        assert!(r.trajectory.iter().all(|rec| !rec.label.iter().any(|l| l == "blue")));
    }
}
