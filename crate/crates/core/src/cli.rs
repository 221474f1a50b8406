//! Command-line front end. Every command reads one TOML run configuration,
//! lets flags override it, and writes line-delimited JSON records into the
//! output directory. Wall-clock timings go to separate `*_timing.json` files
//! so the main records are byte-identical across runs.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 domain failure.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::llm_client::{build_client, ChatService, ClientConfig};
use crate::pddl::{self, parse_literal, Domain, GroundingOptions};
use crate::pipeline::{self, OutputError, PipelineError, PipelineOptions};
use crate::planner::{Algorithm, SearchConfig, DEFAULT_NODE_CAP, DEFAULT_TIME_CAP};
use crate::reward::{self, CompletionLabel, GroundTruthReviewer, RewardBreakdown, TaskTruth};
use crate::scene_graph::{self, SceneGraph};
use crate::synth::{self, Abstractness, Annotation, AnnotateContext, CandidateSets, CanonicalAnnotator, SceneTaskGenerator, Tier};
use crate::tgpo::micro::{self, MicroEnv, Services};
use crate::tgpo::{AdvantageScheme, RatioMode, TgpoConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Domain(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Domain(_) => 2,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn domain_err(e: impl std::fmt::Display) -> CliError {
    CliError::Domain(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "houseplan", version, about = "Hierarchical household task planning")]
pub struct Cli {
    /// Run configuration file (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for commands that process several tasks.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Log more (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a policy output against a scene and write the composed plan.
    Plan(PlanArgs),
    /// Evaluate a manifest of tasks and report the success rate.
    Eval(EvalArgs),
    /// Train the toy policy on the scripted kitchen environment.
    TgpoSim(TgpoArgs),
    /// Sample personas, generate instructions and annotate them.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[arg(long)]
    pub scene: Option<PathBuf>,
    /// Policy output file (trace and subgoal blocks).
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub algorithm: Option<String>,
    /// Build every subtask against the original scene.
    #[arg(long)]
    pub no_thread: bool,
    /// Use the whole scene for every subtask.
    #[arg(long)]
    pub no_prune: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TgpoArgs {
    #[arg(long)]
    pub steps: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub tasks: Option<usize>,
    #[arg(long)]
    pub budget: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSection {
    pub algorithm: Algorithm,
    pub node_cap: usize,
    pub time_cap_secs: f64,
    pub prune_unreachable: bool,
    pub grounding_cap: usize,
}

impl Default for SearchSection {
    fn default() -> Self {
        let g = GroundingOptions::default();
        SearchSection {
            algorithm: Algorithm::AstarHadd,
            node_cap: DEFAULT_NODE_CAP,
            time_cap_secs: DEFAULT_TIME_CAP.as_secs_f64(),
            prune_unreachable: g.prune_unreachable,
            grounding_cap: g.cap,
        }
    }
}

impl SearchSection {
    fn to_config(&self) -> Result<SearchConfig, CliError> {
        if !(self.time_cap_secs > 0.0 && self.time_cap_secs.is_finite()) {
            return Err(usage("search.time_cap_secs must be positive"));
        }
        Ok(SearchConfig {
            algorithm: self.algorithm,
            node_cap: self.node_cap,
            time_cap: Duration::from_secs_f64(self.time_cap_secs),
            grounding: GroundingOptions {
                prune_unreachable: self.prune_unreachable,
                cap: self.grounding_cap,
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanSection {
    pub scene: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub prune: bool,
    pub thread_scene: bool,
}

impl Default for PlanSection {
    fn default() -> Self {
        PlanSection {
            scene: None,
            output: None,
            prune: true,
            thread_scene: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TgpoSection {
    pub steps: usize,
    pub group_size: usize,
    pub tau: f64,
    pub epsilon: f64,
    pub beta: f64,
    pub advantage: AdvantageScheme,
    pub ratio: RatioMode,
    pub learning_rate: f64,
}

impl Default for TgpoSection {
    fn default() -> Self {
        let c = micro::micro_config();
        TgpoSection {
            steps: 50,
            group_size: c.group_size,
            tau: c.tau,
            epsilon: c.epsilon,
            beta: c.beta,
            advantage: c.advantage,
            ratio: c.ratio,
            learning_rate: c.learning_rate,
        }
    }
}

impl TgpoSection {
    fn to_config(&self) -> TgpoConfig {
        TgpoConfig {
            group_size: self.group_size,
            tau: self.tau,
            epsilon: self.epsilon,
            beta: self.beta,
            advantage: self.advantage,
            ratio: self.ratio,
            learning_rate: self.learning_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub scenes: Vec<PathBuf>,
    pub tasks: usize,
    pub budget: usize,
    /// Persona candidate sets (TOML); built-in sets when absent.
    pub personas: Option<PathBuf>,
    pub tiers: Vec<Abstractness>,
}

impl Default for SynthSection {
    fn default() -> Self {
        SynthSection {
            scenes: Vec::new(),
            tasks: 3,
            budget: 3,
            personas: None,
            tiers: Abstractness::ALL.to_vec(),
        }
    }
}

/// The run configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub jobs: usize,
    /// Domain file; the built-in household domain when absent.
    pub domain: Option<PathBuf>,
    pub search: SearchSection,
    pub plan: PlanSection,
    pub eval: EvalSection,
    pub tgpo: TgpoSection,
    pub synth: SynthSection,
    pub reviewer: ClientConfig,
    pub improver: ClientConfig,
    pub generator: ClientConfig,
    pub annotator: ClientConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out: PathBuf::from("out"),
            jobs: 1,
            domain: None,
            search: SearchSection::default(),
            plan: PlanSection::default(),
            eval: EvalSection::default(),
            tgpo: TgpoSection::default(),
            synth: SynthSection::default(),
            reviewer: ClientConfig::default(),
            improver: ClientConfig::default(),
            generator: ClientConfig::default(),
            annotator: ClientConfig::default(),
        }
    }
}

fn rebase(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

fn rebase_opt(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(p) = p {
        rebase(base, p);
    }
}

impl RunConfig {
    /// Reads a configuration file. Relative paths inside it are taken
    /// relative to the file's directory.
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        rebase(&base, &mut cfg.out);
        rebase_opt(&base, &mut cfg.domain);
        rebase_opt(&base, &mut cfg.plan.scene);
        rebase_opt(&base, &mut cfg.plan.output);
        rebase_opt(&base, &mut cfg.eval.manifest);
        rebase_opt(&base, &mut cfg.synth.personas);
        for s in &mut cfg.synth.scenes {
            rebase(&base, s);
        }
        for c in [&mut cfg.reviewer, &mut cfg.improver, &mut cfg.generator, &mut cfg.annotator] {
            rebase_opt(&base, &mut c.cassette);
        }
        Ok(cfg)
    }

    fn domain(&self) -> Result<Domain, CliError> {
        match &self.domain {
            None => Ok(Domain::household()),
            Some(p) => pddl::parse_domain(&read(p)?).map_err(|e| usage(format!("{}: {e}", p.display()))),
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn load_scene(path: &Path) -> Result<SceneGraph, CliError> {
    scene_graph::parse_scene_graph(&read(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn required<'a>(value: &'a Option<PathBuf>, what: &str) -> Result<&'a Path, CliError> {
    value.as_deref().ok_or_else(|| usage(format!("no {what} given")))
}

struct OutDir(PathBuf);

impl OutDir {
    fn create(path: &Path) -> Result<OutDir, CliError> {
        fs::create_dir_all(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        Ok(OutDir(path.to_path_buf()))
    }

    fn write(&self, name: &str, contents: &str) -> Result<(), CliError> {
        let p = self.0.join(name);
        fs::write(&p, contents).map_err(|e| usage(format!("{}: {e}", p.display())))
    }

    fn write_json(&self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(value).map_err(usage)?;
        s.push('\n');
        self.write(name, &s)
    }

    fn write_lines<T: Serialize>(&self, name: &str, rows: &[T]) -> Result<(), CliError> {
        let mut s = String::new();
        for r in rows {
            s.push_str(&serde_json::to_string(r).map_err(usage)?);
            s.push('\n');
        }
        self.write(name, &s)
    }
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(usage)
}

fn client(cfg: &ClientConfig, mock: Arc<dyn ChatService>) -> Result<Arc<dyn ChatService>, CliError> {
    build_client(cfg, mock, false).map_err(usage)
}

/// Parses arguments and runs the command. Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(j) = cli.jobs {
        cfg.jobs = j;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if cfg.jobs == 0 {
        return Err(usage("jobs must be at least 1"));
    }
    match &cli.command {
        Command::Plan(a) => cmd_plan(&cfg, a),
        Command::Eval(a) => cmd_eval(&cfg, a),
        Command::TgpoSim(a) => cmd_tgpo_sim(&cfg, a),
        Command::Synth(a) => cmd_synth(&cfg, a),
    }
}

fn error_kind(e: &PipelineError) -> &'static str {
    match e {
        PipelineError::Output(OutputError::Misaligned { .. }) => "misaligned_output",
        PipelineError::Output(OutputError::Grammar { .. }) => "output_grammar",
        PipelineError::Output(OutputError::EmptySubgoal(_)) => "empty_subgoal",
        PipelineError::Construct { .. } => "construct",
        PipelineError::Planner { .. } => "planner",
        PipelineError::Execute { .. } => "execute",
    }
}

pub fn cmd_plan(cfg: &RunConfig, args: &PlanArgs) -> Result<(), CliError> {
    let scene_path = args.scene.clone().or_else(|| cfg.plan.scene.clone());
    let output_path = args.output.clone().or_else(|| cfg.plan.output.clone());
    let sg = load_scene(required(&scene_path, "scene")?)?;
    let text = read(required(&output_path, "policy output")?)?;
    let domain = cfg.domain()?;
    let mut search = cfg.search.to_config()?;
    if let Some(a) = &args.algorithm {
        search.algorithm = a.parse().map_err(usage)?;
    }
    let opts = PipelineOptions {
        search,
        prune: cfg.plan.prune && !args.no_prune,
        thread_scene: cfg.plan.thread_scene && !args.no_thread,
    };
    let out = OutDir::create(&cfg.out)?;
    let started = Instant::now();
    let result = pipeline::parse_output(&text)
        .map_err(PipelineError::Output)
        .and_then(|o| pipeline::solve_sequence(&sg, &o, &domain, &opts));
    let wall = started.elapsed().as_secs_f64();
    match result {
        Err(e) => {
            out.write_json(
                "plan_record.json",
                &json!({"status": "error", "error": {"kind": error_kind(&e), "subtask": e.subtask(), "message": e.to_string()}}),
            )?;
            out.write_json("plan_timing.json", &json!({"wall_secs": wall}))?;
            Err(domain_err(e))
        }
        Ok(r) => {
            let subtasks: Vec<_> = r
                .subtasks
                .iter()
                .map(|s| {
                    json!({
                        "k": s.k,
                        "status": s.result.status(),
                        "plan_length": s.result.plan().map(|p| p.len()),
                        "expanded": s.result.stats().expanded,
                        "generated": s.result.stats().generated,
                    })
                })
                .collect();
            let timings: Vec<_> = r
                .subtasks
                .iter()
                .map(|s| json!({"k": s.k, "wall_secs": s.result.stats().wall.as_secs_f64()}))
                .collect();
            out.write_json("plan_timing.json", &json!({"wall_secs": wall, "subtasks": timings}))?;
            out.write("plan.txt", &pipeline::write_composed(&r))?;
            let feasible = r.feasible();
            out.write_json(
                "plan_record.json",
                &json!({
                    "status": if feasible { "solved" } else { "failed" },
                    "failure": r.failure.as_ref().map(|f| json!({"k": f.k, "reason": f.reason})),
                    "plan_length": r.plan.as_ref().map(|p| p.len()),
                    "subtasks": subtasks,
                }),
            )?;
            if feasible {
                Ok(())
            } else {
                Err(domain_err(format!(
                    "subtask {} failed",
                    r.failure.as_ref().map_or(0, |f| f.k)
                )))
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestTask {
    id: String,
    instruction: String,
    scene: PathBuf,
    output: PathBuf,
    #[serde(default)]
    goals: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    #[serde(default)]
    task: Vec<ManifestTask>,
}

#[derive(Debug, Clone, Serialize)]
struct EvalRecord {
    id: String,
    instruction: String,
    status: String,
    feasible: u8,
    label: CompletionLabel,
    reward: f64,
    plan_length: Option<usize>,
    expanded: usize,
}

pub fn cmd_eval(cfg: &RunConfig, args: &EvalArgs) -> Result<(), CliError> {
    let manifest_path = args.manifest.clone().or_else(|| cfg.eval.manifest.clone());
    let manifest_path = required(&manifest_path, "manifest")?;
    let manifest: Manifest = toml::from_str(&read(manifest_path)?).map_err(|e| usage(format!("{}: {e}", manifest_path.display())))?;
    if manifest.task.is_empty() {
        return Err(usage("manifest has no tasks"));
    }
    let base = manifest_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let domain = cfg.domain()?;
    let opts = PipelineOptions {
        search: cfg.search.to_config()?,
        prune: cfg.plan.prune,
        thread_scene: cfg.plan.thread_scene,
    };
    let mut mock = GroundTruthReviewer::new(domain.clone());
    let mut inputs = Vec::new();
    for t in &manifest.task {
        let goals = t
            .goals
            .iter()
            .map(|g| parse_literal(g))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| usage(format!("task {}: {e}", t.id)))?;
        mock = mock.with_task(
            &t.instruction,
            TaskTruth {
                goals,
                requires: Vec::new(),
            },
        );
        let sg = load_scene(&base.join(&t.scene))?;
        let text = read(&base.join(&t.output))?;
        inputs.push((t, sg, text));
    }
    let reviewer = client(&cfg.reviewer, Arc::new(mock))?;
    let out = OutDir::create(&cfg.out)?;
    let pool = thread_pool(cfg.jobs)?;
    let rows: Vec<(EvalRecord, f64)> = pool.install(|| {
        inputs
            .par_iter()
            .map(|(t, sg, text)| -> Result<(EvalRecord, f64), CliError> {
                let started = Instant::now();
                let outcome = pipeline::parse_output(text)
                    .map_err(PipelineError::Output)
                    .and_then(|o| pipeline::solve_sequence(sg, &o, &domain, &opts));
                let (status, feasible, partial, plan_length, expanded) = match &outcome {
                    Ok(r) => {
                        let plans: Vec<_> = r.subplans().into_iter().cloned().collect();
                        let status = match &r.failure {
                            None => "solved".to_string(),
                            Some(f) => format!("subtask {}: {}", f.k, f.reason),
                        };
                        (status, r.feasible(), pipeline::compose(&plans), r.plan.as_ref().map(|p| p.len()), r.expanded())
                    }
                    Err(e) => (format!("{}: {e}", error_kind(e)), false, Default::default(), None, 0),
                };
                let verdict = reward::review(reviewer.as_ref(), &cfg.reviewer.model, &t.instruction, sg, &partial)
                    .map_err(|e| domain_err(format!("task {}: {e}", t.id)))?;
                let b = RewardBreakdown::new(feasible, verdict.label);
                let wall = started.elapsed().as_secs_f64();
                Ok((
                    EvalRecord {
                        id: t.id.clone(),
                        instruction: t.instruction.clone(),
                        status,
                        feasible: b.feasible,
                        label: verdict.label,
                        reward: b.reward,
                        plan_length,
                        expanded,
                    },
                    wall,
                ))
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    let breakdowns: Vec<RewardBreakdown> = rows
        .iter()
        .map(|(r, _)| RewardBreakdown::new(r.feasible == 1, r.label))
        .collect();
    let sr = reward::success_rate(&breakdowns).map_err(domain_err)?;
    let records: Vec<&EvalRecord> = rows.iter().map(|(r, _)| r).collect();
    out.write_lines("eval.jsonl", &records)?;
    out.write_json(
        "eval_summary.json",
        &json!({
            "tasks": rows.len(),
            "success_rate": sr,
            "feasible": rows.iter().filter(|(r, _)| r.feasible == 1).count(),
        }),
    )?;
    let walls: Vec<_> = rows.iter().map(|(r, w)| json!({"id": r.id, "wall_secs": w})).collect();
    let mean = rows.iter().map(|(_, w)| w).sum::<f64>() / rows.len() as f64;
    out.write_json("eval_timing.json", &json!({"tasks": walls, "mean_wall_secs": mean}))?;
    Ok(())
}

pub fn cmd_tgpo_sim(cfg: &RunConfig, args: &TgpoArgs) -> Result<(), CliError> {
    let steps = args.steps.unwrap_or(cfg.tgpo.steps);
    if steps == 0 {
        return Err(usage("step count must be positive"));
    }
    let tcfg = cfg.tgpo.to_config();
    tcfg.validate().map_err(usage)?;
    let env = MicroEnv::new();
    let mocks = MicroEnv::new();
    let reviewer = client(&cfg.reviewer, Arc::new(mocks.reviewer))?;
    let improver = client(&cfg.improver, Arc::new(mocks.improver))?;
    let services = Services {
        reviewer: reviewer.as_ref(),
        improver: improver.as_ref(),
    };
    let out = OutDir::create(&cfg.out)?;
    let pool = thread_pool(cfg.jobs)?;
    let (_, records, summary) = pool
        .install(|| micro::simulate(&env, services, &env.warm_start(), &tcfg, steps, cfg.seed))
        .map_err(domain_err)?;
    out.write_lines("tgpo_steps.jsonl", &records)?;
    out.write_json("tgpo_summary.json", &summary)?;
    if summary.final_expected_reward >= summary.initial_expected_reward {
        Ok(())
    } else {
        Err(domain_err(format!(
            "expected reward fell from {} to {}",
            summary.initial_expected_reward, summary.final_expected_reward
        )))
    }
}

#[derive(Debug, Serialize)]
struct SynthRecord<'a> {
    task: usize,
    persona: &'a synth::PersonaSkeleton,
    tier: Tier,
    #[serde(flatten)]
    annotation: Annotation,
}

pub fn cmd_synth(cfg: &RunConfig, args: &SynthArgs) -> Result<(), CliError> {
    let n = args.tasks.unwrap_or(cfg.synth.tasks);
    let budget = args.budget.unwrap_or(cfg.synth.budget);
    if n == 0 || budget == 0 {
        return Err(usage("tasks and budget must be positive"));
    }
    if cfg.synth.scenes.is_empty() {
        return Err(usage("synth.scenes is empty"));
    }
    if cfg.synth.tiers.is_empty() {
        return Err(usage("synth.tiers is empty"));
    }
    let sets: CandidateSets = match &cfg.synth.personas {
        Some(p) => toml::from_str(&read(p)?).map_err(|e| usage(format!("{}: {e}", p.display())))?,
        None => CandidateSets::default(),
    };
    let scenes: Vec<(String, SceneGraph)> = cfg
        .synth
        .scenes
        .iter()
        .map(|p| {
            let id = p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned());
            load_scene(p).map(|sg| (id, sg))
        })
        .collect::<Result<_, _>>()?;
    let domain = cfg.domain()?;
    let generator = client(&cfg.generator, Arc::new(SceneTaskGenerator::default()))?;
    let annotator = client(&cfg.annotator, Arc::new(CanonicalAnnotator))?;

    let mut jobs = Vec::with_capacity(n);
    for i in 0..n {
        let persona = synth::sample_persona(cfg.seed.wrapping_add(i as u64), &sets).map_err(usage)?;
        let tiers = &cfg.synth.tiers;
        let tier = Tier::new(tiers[i % tiers.len()], i / tiers.len());
        let (scene_id, sg) = &scenes[i % scenes.len()];
        let generated = synth::generate_tasks(generator.as_ref(), &cfg.generator.model, sg, &persona, tier);
        let instruction = match generated {
            Ok(list) => Ok(list[0].clone()),
            Err(synth::SynthError::EmptyGeneration) => Err("generator returned no usable instructions".to_string()),
            Err(e) => return Err(domain_err(e)),
        };
        jobs.push((i, persona, tier, scene_id.clone(), sg, instruction));
    }
    let mut mock_reviewer = GroundTruthReviewer::new(domain.clone());
    for (.., instruction) in &jobs {
        if let Ok(q) = instruction {
            if let Some(truth) = synth::canonical_truth(q) {
                mock_reviewer = mock_reviewer.with_task(q, truth);
            }
        }
    }
    let reviewer = client(&cfg.reviewer, Arc::new(mock_reviewer))?;
    let ctx = AnnotateContext {
        domain: &domain,
        pipeline: PipelineOptions {
            search: cfg.search.to_config()?,
            ..PipelineOptions::default()
        },
        reviewer: reviewer.as_ref(),
        reviewer_model: &cfg.reviewer.model,
        annotator_model: &cfg.annotator.model,
    };
    let out = OutDir::create(&cfg.out)?;
    let pool = thread_pool(cfg.jobs)?;
    let annotations: Vec<Annotation> = pool.install(|| {
        jobs.par_iter()
            .map(|(_, _, _, scene_id, sg, instruction)| match instruction {
                Ok(q) => synth::hi_pddl_annotate(annotator.as_ref(), &ctx, q, scene_id, sg, budget).map_err(domain_err),
                Err(reason) => Ok(Annotation::Rejected {
                    instruction: String::new(),
                    scene_id: scene_id.clone(),
                    reason: reason.clone(),
                    attempts: 0,
                }),
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    let records: Vec<SynthRecord<'_>> = jobs
        .iter()
        .zip(annotations)
        .map(|((i, persona, tier, ..), annotation)| {
            let key = match annotation {
                Annotation::Accepted(_) => "accepted",
                Annotation::Rejected { .. } => "rejected",
            };
            *counts.entry(key).or_default() += 1;
            SynthRecord {
                task: *i,
                persona,
                tier: *tier,
                annotation,
            }
        })
        .collect();
    out.write_lines("annotations.jsonl", &records)?;
    out.write_json(
        "synth_summary.json",
        &json!({
            "tasks": n,
            "accepted": counts.get("accepted").copied().unwrap_or(0),
            "rejected": counts.get("rejected").copied().unwrap_or(0),
        }),
    )?;
    Ok(())
}
