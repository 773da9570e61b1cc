//! Benchmark harness: per-primitive and long-horizon success rates of the
//! three method arms over seeded, perturbed episodes.
//!
//! Every episode owns its world and its random stream, so results do not
//! depend on scheduling. Arms are paired: for a given row and episode index
//! all arms start from the same perturbed scene.

pub mod report;

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::exec::{
    raw_rollout, task_goal, ConditionSource, ExecConfig, ExecTrace, Executor, FromEnvSource, LlmSource, Terminal,
};
use crate::library::{
    ground_truth, rename_condition, scene, to_novel, DemoLibrary, LibraryError, LhtScript, DEMO_OBJECT, LHT_SCRIPTS,
    NOVEL_OBJECT, SCENES,
};
use crate::llm::{
    BackendError, ChatBackend, GenOptions, MockTable, RemoteEndpoint, ReplayLog, Throttled, Verdict,
    DEFAULT_PARALLEL_REQUESTS,
};
use crate::percept::atoms_satisfied;
use crate::types::{ObjectId, Pose, PrimitiveTaskName, TaskCondition, Vec3, Verb};
use crate::world::{SceneObject, World};

pub use report::{parse_json, render, report, Cell, Format, ResultTable, TableRow, LHT_HEADER, PT_HEADER};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Library(#[from] LibraryError),
    #[error("invalid bench configuration: {0}")]
    Config(String),
    #[error("cannot read or write `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Arm {
    NoCond,
    CondFromEnv,
    #[serde(rename = "CondFromLLM")]
    CondFromLlm,
}

impl Arm {
    pub const ALL: [Arm; 3] = [Arm::NoCond, Arm::CondFromEnv, Arm::CondFromLlm];

    /// Column of the arm in result tables.
    pub fn index(self) -> usize {
        match self {
            Arm::NoCond => 0,
            Arm::CondFromEnv => 1,
            Arm::CondFromLlm => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReport {
    pub task: String,
    pub arm: Arm,
    pub seed: u64,
    pub success: bool,
    /// Simulated seconds, so that reports are reproducible.
    pub runtime_s: f64,
    pub n_goal_adjustments: usize,
    pub generation_verdict: Option<Verdict>,
}

/// Where condition answers for the LLM arm come from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BackendChoice {
    /// Canned answers built from the hand-labelled conditions.
    Mock,
    /// A transcript recorded earlier.
    Replay { path: PathBuf },
    /// An OpenAI-compatible endpoint configured through the environment.
    Remote,
}

impl BackendChoice {
    pub fn build(&self) -> Result<Box<dyn ChatBackend>, BenchError> {
        Ok(match self {
            BackendChoice::Mock => Box::new(mock_backend()),
            BackendChoice::Replay { path } => Box::new(ReplayLog::load(path)?),
            BackendChoice::Remote => Box::new(Throttled::new(RemoteEndpoint::from_env()?, DEFAULT_PARALLEL_REQUESTS)),
        })
    }
}

/// Mock answers for every hand-labelled condition and its novel-object twin.
pub fn mock_backend() -> MockTable {
    let (from, to) = (ObjectId::new(DEMO_OBJECT).unwrap(), ObjectId::new(NOVEL_OBJECT).unwrap());
    let gt = ground_truth();
    let novel: Vec<TaskCondition> = gt.iter().map(|c| rename_condition(c, &from, &to)).collect();
    MockTable::from_conditions(gt.iter().chain(&novel))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    /// Built-in scenes the long-horizon suite may use; a script runs only
    /// when its scene is listed.
    pub scenes: Vec<String>,
    pub episodes_per_cell: usize,
    /// Metres of Gaussian noise on the x/y position of loose objects.
    pub jitter_sigma: f64,
    /// Chance that a primitive episode gets an obstacle on the gripper's path.
    pub distractor_probability: f64,
    pub arms: BTreeSet<Arm>,
    pub backend: BackendChoice,
    pub out: PathBuf,
    pub seed: u64,
    pub exec: ExecConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            scenes: SCENES.iter().map(|s| s.to_string()).collect(),
            episodes_per_cell: 50,
            jitter_sigma: 0.005,
            distractor_probability: 0.5,
            arms: Arm::ALL.into_iter().collect(),
            backend: BackendChoice::Mock,
            out: PathBuf::from("bench-out"),
            seed: 0,
            exec: ExecConfig::default(),
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::Config(m));
        if self.episodes_per_cell < 1 {
            return bad("episodes_per_cell must be at least 1".into());
        }
        if !(self.jitter_sigma >= 0.0 && self.jitter_sigma.is_finite()) {
            return bad(format!("jitter_sigma must be a finite non-negative length, got {}", self.jitter_sigma));
        }
        if !(0.0..=1.0).contains(&self.distractor_probability) {
            return bad(format!("distractor_probability must lie in [0, 1], got {}", self.distractor_probability));
        }
        for s in &self.scenes {
            scene(s)?;
        }
        self.exec.validate().map_err(|e| BenchError::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self, BenchError> {
        let cfg: Self = toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BenchError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| BenchError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// No jitter and no obstacles.
    pub fn clean(&self) -> Self {
        Self {
            jitter_sigma: 0.0,
            distractor_probability: 0.0,
            ..self.clone()
        }
    }
}

/// Seed of episode `episode` in row `row`, shared by all arms.
pub fn episode_seed(base: u64, row: usize, episode: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(row as u64 + 1);
    rng.set_word_pos(2 * episode as u128);
    rng.random()
}

/// Hand-labelled condition of `task`, also for the novel-object variant.
pub fn truth_for(task: &PrimitiveTaskName) -> Option<TaskCondition> {
    let name = task.to_string();
    let (from, to) = (ObjectId::new(DEMO_OBJECT).unwrap(), ObjectId::new(NOVEL_OBJECT).unwrap());
    ground_truth()
        .into_iter()
        .flat_map(|c| {
            let novel = rename_condition(&c, &from, &to);
            [c, novel]
        })
        .find(|c| c.task_name == name)
}

fn post_holds(world: &World, truth: &Option<TaskCondition>) -> bool {
    truth
        .as_ref()
        .is_some_and(|c| atoms_satisfied(world, &c.post_conditions).is_ok_and(|(ok, _)| ok))
}

pub const DISTRACTOR: &str = "distractor";
const DISTRACTOR_SIDE: f64 = 0.03;

/// Jitters loose objects and, with the configured probability, drops a
/// small loose block somewhere on the straight line from the gripper to
/// the task goal.
pub fn perturb(world: &mut World, task: &PrimitiveTaskName, library: &DemoLibrary, cfg: &BenchConfig, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    world.jitter(&mut rng, cfg.jitter_sigma);
    let place = rng.random_bool(cfg.distractor_probability);
    let u: f64 = rng.random_range(0.35..0.65);
    if !place {
        return;
    }
    let Ok(record) = library.record_for(task.verb()) else {
        return;
    };
    let Ok((goal, _)) = task_goal(world, task, record) else {
        return;
    };
    let here = world.gripper_position();
    let at: Vec3 = here + u * (goal - here);
    let block = SceneObject::cuboid(
        ObjectId::new(DISTRACTOR).expect("valid id"),
        Vec3::repeat(DISTRACTOR_SIDE),
        Pose::from_position(at),
        true,
    )
    .expect("finite block");
    world.insert_object(block).expect("distractor id is unused");
}

/// Builds the condition source of a conditioned arm.
struct Sources<'a> {
    env: FromEnvSource<'a>,
    llm: LlmSource<Box<dyn ChatBackend>>,
}

impl<'a> Sources<'a> {
    fn new(library: &'a DemoLibrary, backend: Box<dyn ChatBackend>, opts: GenOptions) -> Self {
        Self {
            env: FromEnvSource { library },
            llm: LlmSource::new(backend, ground_truth(), opts),
        }
    }

    fn get(&self, arm: Arm) -> Option<&dyn ConditionSource> {
        match arm {
            Arm::NoCond => None,
            Arm::CondFromEnv => Some(&self.env),
            Arm::CondFromLlm => Some(&self.llm),
        }
    }

    fn verdict(&self, arm: Arm, task: &PrimitiveTaskName) -> Option<Verdict> {
        (arm == Arm::CondFromLlm).then(|| self.llm.verdict(task)).flatten()
    }
}

/// One episode with its execution trace, kept for the trace files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub report: EpisodeReport,
    /// Whether each top-level step met its post-conditions.
    pub steps: Vec<bool>,
    pub traces: Vec<ExecTrace>,
}

/// Runs `tasks` in order under one arm; stops at the first failed step.
fn run_steps(
    world: &mut World,
    tasks: &[PrimitiveTaskName],
    arm: Arm,
    library: &DemoLibrary,
    sources: &Sources,
    cfg: &ExecConfig,
) -> (Vec<bool>, Vec<ExecTrace>) {
    let mut steps = Vec::new();
    let mut traces = Vec::new();
    for task in tasks {
        let truth = truth_for(task);
        let ok = match sources.get(arm) {
            None => {
                let ran = library
                    .record_for(task.verb())
                    .map_err(Into::into)
                    .and_then(|rec| raw_rollout(world, task, rec, cfg));
                ran.is_ok() && post_holds(world, &truth)
            }
            Some(src) => {
                let exec = Executor::new(library, src, *cfg);
                let (trace, terminal) = exec.run_task(world, task);
                traces.push(trace);
                terminal == Terminal::PostCondMet && post_holds(world, &truth)
            }
        };
        steps.push(ok);
        if !ok {
            break;
        }
    }
    (steps, traces)
}

/// What every episode of a suite shares.
struct Harness<'a> {
    library: &'a DemoLibrary,
    sources: &'a Sources<'a>,
    cfg: &'a ExecConfig,
}

fn episode(h: &Harness, label: &str, mut world: World, tasks: &[PrimitiveTaskName], arm: Arm, seed: u64) -> EpisodeRecord {
    let t0 = world.sim_time();
    let (steps, traces) = run_steps(&mut world, tasks, arm, h.library, h.sources, h.cfg);
    let success = steps.len() == tasks.len() && steps.iter().all(|s| *s);
    EpisodeRecord {
        report: EpisodeReport {
            task: label.to_string(),
            arm,
            seed,
            success,
            runtime_s: world.sim_time() - t0,
            n_goal_adjustments: traces.iter().map(ExecTrace::goal_adjustments).sum(),
            generation_verdict: tasks.last().and_then(|t| h.sources.verdict(arm, t)),
        },
        steps,
        traces,
    }
}

fn rate(episodes: &[EpisodeRecord], label: &str, arm: Arm) -> Cell {
    let runs: Vec<_> = episodes
        .iter()
        .filter(|e| e.report.task == label && e.report.arm == arm)
        .collect();
    if runs.is_empty() {
        return Cell::NotRun;
    }
    Cell::Rate(runs.iter().filter(|e| e.report.success).count() as f64 / runs.len() as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteResult {
    pub table: ResultTable,
    pub episodes: Vec<EpisodeRecord>,
}

/// Every verb under every selected arm, from the scene its demonstration
/// started in, perturbed per episode.
pub fn run_primitive_suite(cfg: &BenchConfig, library: &DemoLibrary) -> Result<SuiteResult, BenchError> {
    cfg.validate()?;
    let backend = cfg.backend.build()?;
    let sources = Sources::new(library, backend, GenOptions::default());
    let mut jobs = Vec::new();
    for (row, verb) in Verb::ALL.into_iter().enumerate() {
        let entry = library.get(verb)?;
        let task = entry.record.task();
        for ep in 0..cfg.episodes_per_cell {
            let seed = episode_seed(cfg.seed, row, ep);
            let mut world = entry.pre_world.clone();
            perturb(&mut world, &task, library, cfg, seed);
            for &arm in &cfg.arms {
                jobs.push((verb, task.clone(), world.clone(), arm, seed));
            }
        }
    }
    let episodes: Vec<EpisodeRecord> = jobs
        .into_par_iter()
        .map(|(verb, task, world, arm, seed)| {
            let h = Harness {
                library,
                sources: &sources,
                cfg: &cfg.exec,
            };
            episode(&h, verb.label(), world, &[task], arm, seed)
        })
        .collect();
    let mut table = ResultTable::new(PT_HEADER);
    for verb in Verb::ALL {
        table.rows.push(TableRow {
            name: verb.label().into(),
            cells: Arm::ALL.map(|arm| rate(&episodes, verb.label(), arm)),
        });
    }
    Ok(SuiteResult { table, episodes })
}

/// Long-horizon generalisation cases.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LhtCase {
    /// The scripts as demonstrated.
    SameAsDemo,
    /// The demonstrated object swapped for one never demonstrated.
    NovelObjects,
    /// Each step's condition generated without examples of its verb.
    NovelPrimitive,
}

impl LhtCase {
    pub const ALL: [LhtCase; 3] = [LhtCase::SameAsDemo, LhtCase::NovelObjects, LhtCase::NovelPrimitive];

    /// Row label for `script` under this case.
    pub fn row_name(self, script: &LhtScript) -> String {
        match self {
            LhtCase::SameAsDemo => script.name.to_string(),
            LhtCase::NovelObjects => format!("{}*", script.name),
            LhtCase::NovelPrimitive => format!("{} novel PT", script.name),
        }
    }

    /// Only conditions generated from examples carry over to objects and
    /// verbs that were never demonstrated.
    pub fn feasible(self, arm: Arm) -> bool {
        self == LhtCase::SameAsDemo || arm == Arm::CondFromLlm
    }

    fn setup(self, script: &LhtScript) -> Result<(World, Vec<PrimitiveTaskName>), BenchError> {
        Ok(match self {
            LhtCase::NovelObjects => (scene(script.novel_scene)?, script.tasks().iter().map(to_novel).collect()),
            _ => (scene(script.scene)?, script.tasks()),
        })
    }
}

/// The shipped long-horizon scripts under each requested case.
pub fn run_lht_suite(cfg: &BenchConfig, library: &DemoLibrary, cases: &[LhtCase]) -> Result<SuiteResult, BenchError> {
    cfg.validate()?;
    for verb in Verb::ALL {
        library.get(verb)?;
    }
    let scripts: Vec<&LhtScript> = LHT_SCRIPTS.iter().filter(|s| cfg.scenes.iter().any(|n| n == s.scene)).collect();
    let same = Sources::new(library, cfg.backend.build()?, GenOptions::default());
    let withheld = Sources::new(
        library,
        cfg.backend.build()?,
        GenOptions {
            exclude_same_verb: true,
            ..GenOptions::default()
        },
    );
    let mut jobs = Vec::new();
    let mut table = ResultTable::new(LHT_HEADER);
    let mut row = 0;
    for &case in cases {
        for script in &scripts {
            let label = case.row_name(script);
            let (base, tasks) = case.setup(script)?;
            let mut cells = [Cell::NotRun; 3];
            for arm in Arm::ALL {
                if !case.feasible(arm) {
                    cells[arm.index()] = Cell::Infeasible;
                }
            }
            for ep in 0..cfg.episodes_per_cell {
                let seed = episode_seed(cfg.seed, 100 + row, ep);
                let mut world = base.clone();
                world.jitter(&mut ChaCha8Rng::seed_from_u64(seed), cfg.jitter_sigma);
                for &arm in cfg.arms.iter().filter(|a| case.feasible(**a)) {
                    jobs.push((label.clone(), case, tasks.clone(), world.clone(), arm, seed));
                }
            }
            table.rows.push(TableRow { name: label, cells });
            row += 1;
        }
    }
    let episodes: Vec<EpisodeRecord> = jobs
        .into_par_iter()
        .map(|(label, case, tasks, world, arm, seed)| {
            let h = Harness {
                library,
                sources: if case == LhtCase::NovelPrimitive { &withheld } else { &same },
                cfg: &cfg.exec,
            };
            episode(&h, &label, world, &tasks, arm, seed)
        })
        .collect();
    for row in &mut table.rows {
        for arm in Arm::ALL {
            if row.cells[arm.index()] != Cell::Infeasible {
                row.cells[arm.index()] = rate(&episodes, &row.name, arm);
            }
        }
    }
    Ok(SuiteResult { table, episodes })
}

/// Everything a full benchmark run produces.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchOutput {
    pub primitive: SuiteResult,
    pub primitive_clean: SuiteResult,
    pub lht: SuiteResult,
}

/// Runs all suites and writes tables, per-episode reports and traces under
/// `cfg.out`.
pub fn run_bench(cfg: &BenchConfig, library: &DemoLibrary) -> Result<BenchOutput, BenchError> {
    let out = BenchOutput {
        primitive: run_primitive_suite(cfg, library)?,
        primitive_clean: run_primitive_suite(&cfg.clean(), library)?,
        lht: run_lht_suite(cfg, library, &LhtCase::ALL)?,
    };
    write_outputs(&out, &cfg.out)?;
    Ok(out)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BenchError + '_ {
    move |source| BenchError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<(), BenchError> {
    let mut buf = Vec::new();
    for item in items {
        serde_json::to_writer(&mut buf, &item)?;
        buf.push(b'\n');
    }
    let mut f = std::fs::File::create(path).map_err(io_err(path))?;
    f.write_all(&buf).map_err(io_err(path))
}

pub fn write_outputs(out: &BenchOutput, dir: &Path) -> Result<(), BenchError> {
    let traces = dir.join("traces");
    std::fs::create_dir_all(&traces).map_err(io_err(&traces))?;
    let suites = [
        ("primitive", &out.primitive),
        ("primitive_clean", &out.primitive_clean),
        ("lht", &out.lht),
    ];
    for (name, suite) in suites {
        for format in Format::ALL {
            report(&suite.table, format, dir.join(format!("{name}.{}", format.extension())))?;
        }
        write_jsonl(&traces.join(format!("{name}.jsonl")), &suite.episodes)?;
    }
    let all = suites.iter().flat_map(|(_, s)| s.episodes.iter().map(|e| &e.report));
    write_jsonl(&dir.join("episodes.jsonl"), all)
}
