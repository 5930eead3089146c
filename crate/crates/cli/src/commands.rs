use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::Args;
use ltlseq::automata::{compile as compile_ldba, compile_via_nba, export_hoa, CompileOptions, Ldba};
use ltlseq::envs::GridEnv;
use ltlseq::executor::{evaluate, EpisodeReport, ExecutionConfig, OracleAgent};
use ltlseq::learn::{self, Checkpoint, LearnedAgent};
use ltlseq::logic::{parse, parse_inferring, Alphabet, Assignment, AssignmentSet, Formula};
use ltlseq::oracle::{
    build_product, failure_visits, fig6, monte_carlo_failure_visits, optimal_value_iteration, satisfaction_probability,
    theorem1_check, ExplicitMdp, ProductMdp, DEFAULT_PRODUCT_LIMIT,
};
use ltlseq::par::Exec;
use ltlseq::sequences::{candidates, EdgeKind, Reach, DEFAULT_PATH_LIMIT};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RootConfig;
use crate::failure::Failure;
use crate::manifest::{hash, RunManifest};
use crate::render::{render_svg, TrajectoryLine};
use crate::Common;

type CmdResult = Result<ExitCode, Failure>;

struct Context {
    config: Option<RootConfig>,
    out: PathBuf,
    seed: u64,
    exec: Exec,
    manifest: RunManifest,
}

impl Context {
    fn new(command: &str, common: &Common, args: &impl std::fmt::Debug) -> Result<Self, Failure> {
        let config = common.config.as_deref().map(RootConfig::load).transpose()?;
        let seed = common.seed.or(config.as_ref().map(|c| c.seed)).unwrap_or(0);
        let out = common
            .out
            .clone()
            .or_else(|| config.as_ref().and_then(|c| c.output_dir.clone()))
            .unwrap_or_else(|| PathBuf::from("ltlseq-out"));
        std::fs::create_dir_all(&out)?;
        let cfg_text = config.as_ref().map(serde_json::to_string).transpose()?.unwrap_or_default();
        // the output location does not change results
        let mut stripped = common.clone();
        stripped.out = None;
        let hash = hash(&[command, &cfg_text, &format!("{stripped:?}"), &format!("{args:?}")]);
        let exec = if common.sequential { Exec::Sequential } else { Exec::Parallel };
        Ok(Context { config, out, seed, exec, manifest: RunManifest::new(command, hash, seed) })
    }

    fn require_config(&self) -> Result<&RootConfig, Failure> {
        self.config.as_ref().ok_or_else(|| Failure::Usage("this command needs --config".into()))
    }

    fn env(&self) -> Result<GridEnv, Failure> {
        Ok(self.require_config()?.env.build()?)
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.manifest.files.push(PathBuf::from(name));
        self.out.join(name)
    }

    fn write(&mut self, name: &str, text: &str) -> Result<(), Failure> {
        let p = self.path(name);
        std::fs::write(p, text)?;
        Ok(())
    }

    fn finish(self) -> CmdResult {
        self.manifest.write(&self.out)?;
        Ok(ExitCode::SUCCESS)
    }
}

fn props_of(a: Assignment, ab: &Alphabet) -> Vec<String> {
    (0..ab.len()).filter(|&i| a.contains(i)).map(|i| ab.name(i).to_string()).collect()
}

fn set_json(s: &AssignmentSet, ab: &Alphabet) -> Value {
    json!(s.iter().map(|a| props_of(a, ab)).collect::<Vec<_>>())
}

/// Alphabet from the config env, an explicit list, or the formula itself.
fn formula_with_alphabet(text: &str, props: &Option<String>, config: Option<&RootConfig>) -> Result<(Formula, Alphabet), Failure> {
    if let Some(list) = props {
        let ab = Alphabet::new(list.split(',').map(str::trim).filter(|s| !s.is_empty()))?;
        return Ok((parse(text, &ab)?, ab));
    }
    if let Some(cfg) = config {
        let env = cfg.env.build()?;
        let ab = env.alphabet().clone();
        return Ok((parse(text, &ab)?, ab));
    }
    Ok(parse_inferring(text)?)
}

#[derive(Args, Debug)]
pub struct CompileArgs {
    pub formula: String,
    /// Comma-separated propositions; inferred from the formula by default.
    #[arg(long)]
    pub props: Option<String>,
    /// Also write a Graphviz description.
    #[arg(long)]
    pub dot: bool,
    /// Build through the tableau NBA and breakpoint construction.
    #[arg(long)]
    pub via_nba: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Serialize)]
struct Stats {
    states: usize,
    accepting: usize,
    epsilon_edges: usize,
    sinks: usize,
    nondeterministic_states: usize,
    initial: usize,
}

fn stats(b: &Ldba) -> Stats {
    Stats {
        states: b.num_states(),
        accepting: b.num_accepting(),
        epsilon_edges: b.num_epsilon(),
        sinks: b.sinks().len(),
        nondeterministic_states: b.n_states().len(),
        initial: b.initial(),
    }
}

pub fn compile(a: CompileArgs) -> CmdResult {
    let mut ctx = Context::new("compile", &a.common, &a)?;
    let (f, ab) = formula_with_alphabet(&a.formula, &a.props, ctx.config.as_ref())?;
    let b = if a.via_nba { compile_via_nba(&f, &ab, &CompileOptions::default())? } else { compile_ldba(&f, &ab)? };
    ctx.write("automaton.hoa", &export_hoa(&b))?;
    if a.dot {
        ctx.write("automaton.dot", &b.to_dot())?;
    }
    let s = serde_json::to_string(&stats(&b))?;
    ctx.write("stats.json", &(s.clone() + "\n"))?;
    println!("{s}");
    ctx.finish()
}

#[derive(Args, Debug)]
pub struct PathsArgs {
    pub formula: String,
    #[arg(long)]
    pub props: Option<String>,
    /// Only paths from this automaton state; all states by default.
    #[arg(long)]
    pub state: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_PATH_LIMIT)]
    pub limit: usize,
    /// Keep paths that induce the same reach-avoid sequence.
    #[arg(long)]
    pub keep_duplicates: bool,
    #[command(flatten)]
    pub common: Common,
}

pub fn paths(a: PathsArgs) -> CmdResult {
    let mut ctx = Context::new("paths", &a.common, &a)?;
    let (f, ab) = formula_with_alphabet(&a.formula, &a.props, ctx.config.as_ref())?;
    let b = compile_ldba(&f, &ab)?;
    let sources: Vec<usize> = match a.state {
        Some(q) if q >= b.num_states() => {
            return Err(Failure::Usage(format!("state {q} does not exist ({} states)", b.num_states())))
        }
        Some(q) => vec![q],
        None => (0..b.num_states()).collect(),
    };
    let mut per_state = Vec::new();
    for q in sources {
        let cands = candidates(&b, q, a.limit, !a.keep_duplicates)?;
        let list: Vec<Value> = cands
            .iter()
            .map(|c| {
                let p = &c.path;
                let edges: Vec<&str> =
                    p.edges.iter().map(|e| if *e == EdgeKind::Delta { "delta" } else { "epsilon" }).collect();
                let guards: Vec<Value> = (0..p.len())
                    .map(|j| match p.edges[j] {
                        EdgeKind::Delta => set_json(&b.guard(p.states[j], p.target(j)), &ab),
                        EdgeKind::Epsilon => json!("epsilon"),
                    })
                    .collect();
                let steps: Vec<Value> = c
                    .sequence
                    .steps
                    .iter()
                    .map(|s| {
                        let reach = match &s.reach {
                            Reach::Set(r) => set_json(r, &ab),
                            Reach::Epsilon => json!("epsilon"),
                        };
                        json!({ "reach": reach, "avoid": set_json(&s.avoid, &ab) })
                    })
                    .collect();
                json!({
                    "states": p.states,
                    "edges": edges,
                    "guards": guards,
                    "loop_start": p.loop_start,
                    "sequence": steps,
                })
            })
            .collect();
        per_state.push(json!({ "state": q, "name": b.name(q), "paths": list }));
    }
    let text = serde_json::to_string_pretty(&json!({ "propositions": ab.names(), "states": per_state }))? + "\n";
    ctx.write("paths.json", &text)?;
    print!("{text}");
    ctx.finish()
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Parallel environment copies; the configured value by default.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Total environment steps; the configured value by default.
    #[arg(long)]
    pub steps: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

pub fn train(a: TrainArgs) -> CmdResult {
    let mut ctx = Context::new("train", &a.common, &a)?;
    let root = ctx.require_config()?.clone();
    let mut cfg = root.train_config();
    cfg.seed = ctx.seed;
    cfg.exec = ctx.exec;
    if let Some(w) = a.workers {
        cfg.ppo.workers = w;
    }
    if let Some(s) = a.steps {
        cfg.total_steps = s;
    }
    cfg.check()?;
    let log_path = ctx.path("train_log.csv");
    let mut log = csv::Writer::from_path(&log_path)?;
    let mut io_error = None;
    let trained = learn::train(&cfg, |row| {
        if io_error.is_none() {
            io_error = log.serialize(row).and_then(|_| log.flush().map_err(csv::Error::from)).err();
        }
    })?;
    if let Some(e) = io_error {
        return Err(e.into());
    }
    log.flush()?;
    let env = cfg.env.build()?;
    let ck = trained.checkpoint(env.obs_spec());
    ctx.write("checkpoint.json", &(serde_json::to_string(&ck)? + "\n"))?;
    let last = trained.log.last();
    println!(
        "{}",
        json!({
            "updates": trained.log.len(),
            "steps": last.map_or(0, |r| r.steps),
            "stage": trained.stage,
            "success_rate": last.map_or(0.0, |r| r.success_rate),
        })
    );
    ctx.finish()
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Task formula; may be repeated.
    #[arg(long)]
    pub formula: Vec<String>,
    /// File with one formula per line; `#` starts a comment.
    #[arg(long)]
    pub tasks: Option<PathBuf>,
    /// Trained policy; the tabular oracle agent is used without one.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Episodes per task, with seeds counting up from the run seed.
    #[arg(long, default_value_t = 10)]
    pub seeds: usize,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Take the first candidate sequence instead of the highest-valued one.
    #[arg(long)]
    pub no_value_selection: bool,
    /// Sample learned actions instead of taking the argmax.
    #[arg(long)]
    pub sample: bool,
    /// Also write trajectories as JSON lines.
    #[arg(long)]
    pub trajectories: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Serialize)]
struct EvalRow<'a> {
    task: usize,
    formula: &'a str,
    seed: u64,
    success: bool,
    outcome: ltlseq::executor::Outcome,
    steps_to_satisfaction: Option<usize>,
    steps: usize,
    accepting_visits: usize,
    discounted_return: f64,
    certified: bool,
}

fn read_tasks(path: &Path) -> Result<Vec<String>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    Ok(text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

pub fn eval(a: EvalArgs) -> CmdResult {
    let mut ctx = Context::new("eval", &a.common, &a)?;
    let root = ctx.require_config()?.clone();
    let env = ctx.env()?;
    let mut tasks = a.formula.clone();
    if let Some(p) = &a.tasks {
        tasks.extend(read_tasks(p)?);
    }
    if tasks.is_empty() {
        return Err(Failure::Usage("give at least one --formula or a --tasks file".into()));
    }
    let mut exec_cfg: ExecutionConfig = root.execution.clone();
    if let Some(l) = a.lambda {
        exec_cfg.lambda = l;
    }
    if let Some(k) = a.k {
        exec_cfg.k = k;
    }
    if let Some(m) = a.max_steps {
        exec_cfg.max_steps = m;
    }
    if let Some(g) = a.gamma {
        exec_cfg.gamma = g;
    }
    if a.no_value_selection {
        exec_cfg.value_selection = false;
    }
    exec_cfg.check()?;
    let automata: Vec<Arc<Ldba>> = tasks
        .iter()
        .map(|t| -> Result<Arc<Ldba>, Failure> {
            let f = parse(t, env.alphabet()).map_err(|e| Failure::from(e).context(&format!("task `{t}`")))?;
            Ok(Arc::new(compile_ldba(&f, env.alphabet())?))
        })
        .collect::<Result<_, _>>()?;
    let seeds: Vec<u64> = (0..a.seeds as u64).map(|i| ctx.seed.wrapping_add(i)).collect();

    let learned = match &a.checkpoint {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", p.display())))?;
            let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("bad checkpoint: {e}")))?;
            let model = ck.model()?;
            if ck.obs != env.obs_spec() || ck.num_props != env.alphabet().len() || ck.num_actions != env.num_actions() {
                return Err(Failure::Usage("checkpoint does not match the environment".into()));
            }
            Some(LearnedAgent::new(Arc::new(model), Arc::new(ck.params), !a.sample, ctx.seed))
        }
        None => None,
    };
    let oracle = OracleAgent::new(exec_cfg.gamma);

    let mut reports: Vec<Vec<EpisodeReport>> = Vec::new();
    for b in &automata {
        let r = match &learned {
            Some(agent) => evaluate(b, &env, agent, &exec_cfg, &seeds, ctx.exec)?,
            None => evaluate(b, &env, &oracle, &exec_cfg, &seeds, ctx.exec)?,
        };
        reports.push(r);
    }

    let csv_path = ctx.path("eval.csv");
    let mut w = csv::Writer::from_path(csv_path)?;
    let mut summary = Vec::new();
    let mut total_ok = 0;
    for (i, (t, reps)) in tasks.iter().zip(&reports).enumerate() {
        let ok = reps.iter().filter(|r| r.success).count();
        total_ok += ok;
        summary.push(json!({ "task": i, "formula": t, "episodes": reps.len(), "success_rate": ok as f64 / reps.len().max(1) as f64 }));
        for r in reps {
            w.serialize(EvalRow {
                task: i,
                formula: t,
                seed: r.seed,
                success: r.success,
                outcome: r.outcome,
                steps_to_satisfaction: r.steps_to_satisfaction,
                steps: r.steps,
                accepting_visits: r.accepting_visits,
                discounted_return: r.discounted_return,
                certified: r.certified,
            })?;
        }
    }
    w.flush()?;
    if a.trajectories {
        let p = ctx.path("trajectories.jsonl");
        let mut f = std::io::BufWriter::new(std::fs::File::create(p)?);
        for (i, reps) in reports.iter().enumerate() {
            for r in reps {
                for rec in &r.trajectory {
                    let line = TrajectoryLine { task: i, seed: r.seed, record: rec.clone() };
                    writeln!(f, "{}", serde_json::to_string(&line)?)?;
                }
            }
        }
        f.flush()?;
    }
    let episodes = reports.iter().map(Vec::len).sum::<usize>();
    println!(
        "{}",
        json!({ "episodes": episodes, "success_rate": total_ok as f64 / episodes.max(1) as f64, "tasks": summary })
    );
    ctx.finish()
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    /// Task formula over the configured environment.
    #[arg(long)]
    pub formula: Option<String>,
    /// Bundled product instead of env + formula; only `fig6` exists.
    #[arg(long)]
    pub fixture: Option<String>,
    /// Discount factors; may be repeated.
    #[arg(long, default_values_t = vec![0.99])]
    pub gamma: Vec<f64>,
    /// Enumerate policies and check the eventual-discounting bound.
    #[arg(long)]
    pub check_theorem1: bool,
    #[arg(long, default_value_t = 100_000)]
    pub policy_limit: usize,
    /// Monte Carlo runs for the failure-visit estimate of the greedy policy.
    #[arg(long, default_value_t = 0)]
    pub monte_carlo: usize,
    #[command(flatten)]
    pub common: Common,
}

pub fn oracle(a: OracleArgs) -> CmdResult {
    let mut ctx = Context::new("oracle", &a.common, &a)?;
    let product: ProductMdp = match (&a.fixture, &a.formula) {
        (Some(name), None) if name == "fig6" => {
            let (m, b) = fig6();
            build_product(&m, &b, DEFAULT_PRODUCT_LIMIT)?
        }
        (Some(name), None) => return Err(Failure::Usage(format!("unknown fixture `{name}`"))),
        (None, Some(text)) => {
            let env = ctx.env()?;
            let f = parse(text, env.alphabet())?;
            let b = compile_ldba(&f, env.alphabet())?;
            build_product(&ExplicitMdp::from_tabular(&env.tabular()), &b, DEFAULT_PRODUCT_LIMIT)?
        }
        _ => return Err(Failure::Usage("give exactly one of --formula and --fixture".into())),
    };
    for &g in &a.gamma {
        if !(g > 0.0 && g < 1.0) {
            return Err(Failure::Usage(format!("gamma {g} must lie in (0, 1)")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut all_hold = true;
    let mut per_gamma = Vec::new();
    for &g in &a.gamma {
        let vi = optimal_value_iteration(&product, g)?;
        let pi = vi.policy.clone();
        let sat = satisfaction_probability(&product, &pi)?;
        let (p_fail, visits) = failure_visits(&product, &pi)?;
        let mut entry = json!({
            "gamma": g,
            "optimal_value": vi.initial_value(&product),
            "iterations": vi.iterations,
            "greedy_satisfaction": sat,
            "greedy_failure_probability": p_fail,
            "greedy_failure_visits": visits,
        });
        if a.monte_carlo > 0 {
            entry["monte_carlo"] = serde_json::to_value(monte_carlo_failure_visits(&product, &pi, a.monte_carlo, &mut rng))?;
        }
        if a.check_theorem1 {
            let report = theorem1_check(&product, g, a.policy_limit, ctx.exec)?;
            let verdict = if report.holds { "PASS" } else { "FAIL" };
            println!("theorem1 gamma={g} lhs={:.6e} rhs={:.6e} {verdict}", report.lhs, report.rhs);
            all_hold &= report.holds && report.policies.iter().all(|p| p.lemma_holds);
            entry["theorem1"] = serde_json::to_value(&report)?;
        }
        per_gamma.push(entry);
    }
    let report = json!({
        "product_states": product.num_states(),
        "initial": product.initial,
        "results": per_gamma,
    });
    ctx.write("oracle.json", &(serde_json::to_string_pretty(&report)? + "\n"))?;
    if !a.check_theorem1 {
        println!("{}", serde_json::to_string(&report)?);
    }
    let code = if all_hold { ExitCode::SUCCESS } else { ExitCode::from(1) };
    ctx.finish()?;
    Ok(code)
}

#[derive(Args, Debug)]
pub struct RenderArgs {
    /// Trajectory dump written by `eval --trajectories`.
    #[arg(long)]
    pub trajectory: PathBuf,
    /// Task index to draw; the first one in the file by default.
    #[arg(long)]
    pub task: Option<usize>,
    /// Episode seed to draw; the first one of the task by default.
    #[arg(long)]
    pub episode: Option<u64>,
    /// SVG file name inside the output directory.
    #[arg(long, default_value = "trajectory.svg")]
    pub output: String,
    #[command(flatten)]
    pub common: Common,
}

pub fn render(a: RenderArgs) -> CmdResult {
    let mut ctx = Context::new("render", &a.common, &a)?;
    let mut env = ctx.env()?;
    let text = std::fs::read_to_string(&a.trajectory)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", a.trajectory.display())))?;
    let mut lines = Vec::new();
    for (n, l) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let line: TrajectoryLine =
            serde_json::from_str(l).map_err(|e| Failure::Usage(format!("trajectory line {}: {e}", n + 1)))?;
        lines.push(line);
    }
    let task = a.task.or(lines.first().map(|l| l.task));
    let episode = a.episode.or(lines.iter().find(|l| Some(l.task) == task).map(|l| l.seed));
    let records: Vec<_> =
        lines.into_iter().filter(|l| Some(l.task) == task && Some(l.seed) == episode).map(|l| l.record).collect();
    // the layout of a resampling world depends on the episode seed
    env.reset(episode.unwrap_or(ctx.seed));
    let svg = render_svg(&env, &records)?;
    ctx.write(&a.output, &svg)?;
    println!("{}", ctx.out.join(&a.output).display());
    ctx.finish()
}
