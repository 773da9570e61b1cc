//! Condition-guided execution.
//!
//! [`Executor::satisfy_pre_cond`] makes a task's pre-conditions true by
//! spawning the primitive that establishes each unmet atom, recursively.
//! [`Executor::control_with_cond`] rolls out the task's movement primitive
//! toward a goal read off the scene, stops as soon as the post-conditions
//! hold, and when an unexpected contact appears rewinds a few waypoints and
//! reflects the goal away from the contact.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Mutex;

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::cond::{CondError, Cond2Task, DemoRecord};
use crate::dmp::{sample_count, DmpError, DmpState};
use crate::library::{DemoLibrary, LibraryError};
use crate::llm::{generate_for_task, ChatBackend, GenOptions, LlmError, Verdict};
use crate::percept::{atom_holds, atoms_satisfied, PerceptError};
use crate::types::{
    parse_task_name, CollisionPair, ConditionAtom, ObjectId, Pose, PrimitiveTaskName, TaskCondition, Vec3, Verb,
};
use crate::world::{targets, World, WorldError, TILT_ANGLE};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExecConfig {
    /// Simulated seconds a task frame may run.
    pub time_budget: f64,
    /// Waypoints to rewind after an unexpected contact.
    pub backup_steps: usize,
    pub recursion_limit: usize,
    /// Hz.
    pub rollout_rate: f64,
}

impl Default for ExecConfig {
    fn default() -> Self {
        Self {
            time_budget: 60.0,
            backup_steps: 10,
            recursion_limit: 5,
            rollout_rate: 100.0,
        }
    }
}

impl ExecConfig {
    pub fn validate(&self) -> Result<(), ExecError> {
        let ok = self.time_budget > 0.0
            && self.time_budget.is_finite()
            && self.backup_steps > 0
            && self.recursion_limit > 0
            && self.rollout_rate > 0.0
            && self.rollout_rate.is_finite();
        if ok {
            Ok(())
        } else {
            Err(ExecError::BadConfig(format!("{self:?}")))
        }
    }
}

#[derive(Debug, PartialEq, thiserror::Error)]
pub enum ExecError {
    #[error("recursion limit {limit} exceeded while spawning `{task}`")]
    RecursionLimit { limit: usize, task: String },
    #[error("no primitive task establishes `{0}`")]
    UnmappableAtom(ConditionAtom),
    #[error("could not obtain a condition for `{task}`: {reason}")]
    ConditionGenerationFailed {
        task: String,
        reason: String,
        verdict: Option<Verdict>,
    },
    #[error("no demonstration for `{0}`")]
    MissingDemo(Verb),
    #[error("`{0}` is not a task name")]
    BadTask(String),
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Dmp(#[from] DmpError),
    #[error(transparent)]
    Percept(#[from] PerceptError),
}

impl From<CondError> for ExecError {
    fn from(e: CondError) -> Self {
        match e {
            CondError::UnmappableAtom(a) => ExecError::UnmappableAtom(a),
            other => ExecError::BadTask(other.to_string()),
        }
    }
}

impl From<LibraryError> for ExecError {
    fn from(e: LibraryError) -> Self {
        match e {
            LibraryError::MissingDemo(v) => ExecError::MissingDemo(v),
            other => ExecError::BadTask(other.to_string()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum ExecEvent {
    TaskStarted {
        task: String,
        depth: usize,
    },
    PreCondUnmet {
        task: String,
        atom: ConditionAtom,
    },
    SubtaskSpawned {
        parent: String,
        task: String,
    },
    WaypointsStarted {
        task: String,
        time: f64,
    },
    GoalAdjusted {
        task: String,
        pair: CollisionPair,
        old: [f64; 3],
        new: [f64; 3],
        coll_pos: [f64; 3],
        index_before: usize,
        index_after: usize,
    },
    PostCondMet {
        task: String,
        time: f64,
    },
    TimedOut {
        task: String,
        time: f64,
    },
    Failed {
        task: String,
        reason: String,
    },
}

impl ExecEvent {
    pub fn task(&self) -> &str {
        match self {
            ExecEvent::TaskStarted { task, .. }
            | ExecEvent::PreCondUnmet { task, .. }
            | ExecEvent::SubtaskSpawned { task, .. }
            | ExecEvent::WaypointsStarted { task, .. }
            | ExecEvent::GoalAdjusted { task, .. }
            | ExecEvent::PostCondMet { task, .. }
            | ExecEvent::TimedOut { task, .. }
            | ExecEvent::Failed { task, .. } => task,
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(
            self,
            ExecEvent::PostCondMet { .. } | ExecEvent::TimedOut { .. } | ExecEvent::Failed { .. }
        )
    }
}

/// How a task frame ended.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Terminal {
    PostCondMet,
    TimedOut,
    Failed(String),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExecTrace {
    pub events: Vec<ExecEvent>,
}

impl ExecTrace {
    fn push(&mut self, e: ExecEvent) {
        self.events.push(e);
    }

    /// Terminal event of the outermost frame.
    pub fn terminal(&self) -> Option<&ExecEvent> {
        let mut depth = 0usize;
        for e in &self.events {
            match e {
                ExecEvent::TaskStarted { .. } => depth += 1,
                e if e.is_terminal() => {
                    depth = depth.saturating_sub(1);
                    if depth == 0 {
                        return Some(e);
                    }
                }
                _ => {}
            }
        }
        None
    }

    pub fn succeeded(&self) -> bool {
        matches!(self.terminal(), Some(ExecEvent::PostCondMet { .. }))
    }

    pub fn goal_adjustments(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e, ExecEvent::GoalAdjusted { .. }))
            .count()
    }
}

/// The reflection applied to a goal after an unexpected contact at
/// `coll_pos`.
pub fn adjust_goal(goal: Vec3, coll_pos: Vec3) -> Vec3 {
    goal + (goal - coll_pos)
}

/// Where a condition comes from when a task needs one.
pub trait ConditionSource: Send + Sync {
    fn condition(&self, task: &PrimitiveTaskName) -> Result<TaskCondition, ExecError>;
}

/// Conditions extracted from the demonstrations, looked up by exact task
/// name: a task never demonstrated has none.
pub struct FromEnvSource<'a> {
    pub library: &'a DemoLibrary,
}

impl ConditionSource for FromEnvSource<'_> {
    fn condition(&self, task: &PrimitiveTaskName) -> Result<TaskCondition, ExecError> {
        let fail = |reason: &str| ExecError::ConditionGenerationFailed {
            task: task.to_string(),
            reason: reason.to_string(),
            verdict: None,
        };
        let rec = self.library.record_for(task.verb()).map_err(|_| fail("no demonstration of this verb"))?;
        if rec.condition.task_name != task.to_string() {
            return Err(fail("only demonstrated with other objects"));
        }
        Ok(rec.condition.clone())
    }
}

/// A generated condition, or why generation failed.
type CachedCondition = Result<TaskCondition, (String, Option<Verdict>)>;

/// Conditions generated by a chat model from example conditions. Answers
/// are cached per task name.
pub struct LlmSource<B> {
    backend: B,
    examples: Vec<TaskCondition>,
    opts: GenOptions,
    cache: Mutex<BTreeMap<String, CachedCondition>>,
}

impl<B: ChatBackend> LlmSource<B> {
    pub fn new(backend: B, examples: Vec<TaskCondition>, opts: GenOptions) -> Self {
        Self {
            backend,
            examples,
            opts,
            cache: Mutex::new(BTreeMap::new()),
        }
    }

    /// Verdict of the generation for `task`, if it was attempted.
    pub fn verdict(&self, task: &PrimitiveTaskName) -> Option<Verdict> {
        match self.cache.lock().expect("cache lock poisoned").get(&task.to_string())? {
            Ok(_) => Some(Verdict::Success),
            Err((_, v)) => *v,
        }
    }
}

impl<B: ChatBackend> ConditionSource for LlmSource<B> {
    fn condition(&self, task: &PrimitiveTaskName) -> Result<TaskCondition, ExecError> {
        let key = task.to_string();
        if let Some(hit) = self.cache.lock().expect("cache lock poisoned").get(&key) {
            return hit.clone().map_err(|(reason, verdict)| ExecError::ConditionGenerationFailed {
                task: key.clone(),
                reason,
                verdict,
            });
        }
        let result = match generate_for_task(&self.backend, task, &self.examples, self.opts) {
            Ok(out) => match out.condition {
                Some(c) => Ok(c),
                None => Err((out.reason.unwrap_or_default(), Some(out.verdict))),
            },
            Err(e @ LlmError::BackendUnavailable { .. }) => Err((e.to_string(), None)),
            Err(e) => Err((e.to_string(), None)),
        };
        self.cache
            .lock()
            .expect("cache lock poisoned")
            .insert(key.clone(), result.clone());
        result.map_err(|(reason, verdict)| ExecError::ConditionGenerationFailed {
            task: key,
            reason,
            verdict,
        })
    }
}

/// A fixed map from task name to condition.
#[derive(Clone, Debug, Default)]
pub struct FixedSource {
    pub conditions: BTreeMap<String, TaskCondition>,
}

impl FixedSource {
    pub fn new(conds: impl IntoIterator<Item = TaskCondition>) -> Self {
        Self {
            conditions: conds.into_iter().map(|c| (c.task_name.clone(), c)).collect(),
        }
    }
}

impl ConditionSource for FixedSource {
    fn condition(&self, task: &PrimitiveTaskName) -> Result<TaskCondition, ExecError> {
        self.conditions
            .get(&task.to_string())
            .cloned()
            .ok_or_else(|| ExecError::ConditionGenerationFailed {
                task: task.to_string(),
                reason: "no condition listed".into(),
                verdict: None,
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Grip {
    Open,
    Closed,
    CloseAtEnd,
}

fn grip_for(verb: Verb) -> Grip {
    match verb {
        Verb::Grasp => Grip::CloseAtEnd,
        Verb::Release | Verb::Open | Verb::Close | Verb::Fold => Grip::Open,
        Verb::Tilt | Verb::Move | Verb::MoveInTo | Verb::MoveOnTop | Verb::MoveInFront => Grip::Closed,
    }
}

/// Goal position and orientation of `task` in the current scene.
pub fn task_goal(
    world: &World,
    task: &PrimitiveTaskName,
    record: &DemoRecord,
) -> Result<(Vec3, UnitQuaternion<f64>), ExecError> {
    let here = world.gripper_position();
    let q = world.gripper_pose().orientation;
    let x = task.subject();
    let goal = match task.verb() {
        Verb::Grasp => targets::grasp_point(world, x)?,
        Verb::Release | Verb::Move | Verb::Tilt => {
            world.get(x)?;
            here + record.dmp.displacement()
        }
        Verb::Open => targets::handle_front(world, x)?,
        Verb::Close => targets::handle_back(world, x)?,
        Verb::Fold => targets::flap_end(world, x)?,
        Verb::MoveInTo => targets::carry_goal(world, x, targets::into_center(world, x, task.target())?)?,
        Verb::MoveOnTop => targets::carry_goal(world, x, targets::on_top_center(world, x, task.target())?)?,
        Verb::MoveInFront => targets::carry_goal(world, x, targets::in_front_center(world, x, task.target())?)?,
    };
    let orientation = if task.verb() == Verb::Tilt {
        UnitQuaternion::from_axis_angle(&Vector3::x_axis(), TILT_ANGLE) * q
    } else {
        q
    };
    Ok((goal, orientation))
}

/// A rollout that can be cut and continued toward a new goal.
struct Rollout<'a> {
    record: &'a DemoRecord,
    states: Vec<DmpState>,
    y0: Vec3,
    goal: Vec3,
    start_q: UnitQuaternion<f64>,
    goal_q: UnitQuaternion<f64>,
    nominal: usize,
    grip: Grip,
    rate: f64,
}

impl<'a> Rollout<'a> {
    fn new(world: &World, task: &PrimitiveTaskName, record: &'a DemoRecord, rate: f64) -> Result<Self, ExecError> {
        let (goal, goal_q) = task_goal(world, task, record)?;
        let start = *world.gripper_pose();
        let tau = record.demo_duration;
        let nominal = sample_count(tau, rate).max(2);
        let states = record
            .dmp
            .integrate(DmpState::at_rest(start.position), start.position, goal, tau, rate, nominal - 1)?;
        Ok(Self {
            record,
            states,
            y0: start.position,
            goal,
            start_q: start.orientation,
            goal_q,
            nominal,
            grip: grip_for(task.verb()),
            rate,
        })
    }

    fn len(&self) -> usize {
        self.states.len()
    }

    fn pose(&self, i: usize) -> Pose {
        let s = (i as f64 / (self.nominal - 1) as f64).min(1.0);
        Pose::new(self.states[i].y, self.start_q.slerp(&self.goal_q, s))
    }

    fn closed(&self, i: usize) -> bool {
        match self.grip {
            Grip::Open => false,
            Grip::Closed => true,
            Grip::CloseAtEnd => i + 1 == self.len(),
        }
    }

    /// Keeps waypoints up to `i` and continues from there toward `goal` for
    /// one demonstration duration.
    fn retarget(&mut self, i: usize, goal: Vec3) -> Result<(), ExecError> {
        self.states.truncate(i + 1);
        let cont = self.record.dmp.integrate(
            self.states[i],
            self.y0,
            goal,
            self.record.demo_duration,
            self.rate,
            self.nominal - 1,
        )?;
        self.states.extend_from_slice(&cont[1..]);
        self.goal = goal;
        Ok(())
    }
}

/// Runs primitives against one world under a condition source.
pub struct Executor<'a> {
    pub library: &'a DemoLibrary,
    pub source: &'a dyn ConditionSource,
    pub table: Cond2Task,
    pub cfg: ExecConfig,
}

impl<'a> Executor<'a> {
    pub fn new(library: &'a DemoLibrary, source: &'a dyn ConditionSource, cfg: ExecConfig) -> Self {
        Self {
            library,
            source,
            table: Cond2Task::builtin(),
            cfg,
        }
    }

    /// Makes every pre-condition of `cond` true, in order, by spawning the
    /// task that establishes each unmet atom. Stops early once the frame's
    /// budget is spent.
    pub fn satisfy_pre_cond(
        &self,
        world: &mut World,
        cond: &TaskCondition,
        depth: usize,
        trace: &mut ExecTrace,
    ) -> Result<(), ExecError> {
        if depth > self.cfg.recursion_limit {
            return Err(ExecError::RecursionLimit {
                limit: self.cfg.recursion_limit,
                task: cond.task_name.clone(),
            });
        }
        let start = world.sim_time();
        for atom in &cond.pre_conditions {
            if world.sim_time() - start > self.cfg.time_budget {
                break;
            }
            if atom_holds(world, atom)? {
                continue;
            }
            trace.push(ExecEvent::PreCondUnmet {
                task: cond.task_name.clone(),
                atom: atom.clone(),
            });
            let sub = self.table.map(atom)?;
            trace.push(ExecEvent::SubtaskSpawned {
                parent: cond.task_name.clone(),
                task: sub.to_string(),
            });
            self.run_frame(world, &sub, depth + 1, trace)?;
        }
        Ok(())
    }

    /// One task frame: obtain the condition, satisfy pre-conditions, run.
    fn run_frame(
        &self,
        world: &mut World,
        task: &PrimitiveTaskName,
        depth: usize,
        trace: &mut ExecTrace,
    ) -> Result<Terminal, ExecError> {
        let name = task.to_string();
        trace.push(ExecEvent::TaskStarted {
            task: name.clone(),
            depth,
        });
        let result = (|| {
            if depth > self.cfg.recursion_limit {
                return Err(ExecError::RecursionLimit {
                    limit: self.cfg.recursion_limit,
                    task: name.clone(),
                });
            }
            let cond = self.source.condition(task)?;
            let record = self.library.record_for(task.verb())?;
            self.satisfy_pre_cond(world, &cond, depth, trace)?;
            Ok(self.control_inner(world, task, &cond, record, trace))
        })();
        match result {
            Ok(t) => Ok(t),
            Err(e) => {
                trace.push(ExecEvent::Failed {
                    task: name,
                    reason: e.to_string(),
                });
                Err(e)
            }
        }
    }

    /// Obtains the condition of `task`, satisfies its pre-conditions and runs
    /// it. Errors end the frame with a `Failed` event.
    pub fn run_task(&self, world: &mut World, task: &PrimitiveTaskName) -> (ExecTrace, Terminal) {
        let mut trace = ExecTrace::default();
        let terminal = match self.run_frame(world, task, 0, &mut trace) {
            Ok(t) => t,
            Err(e) => Terminal::Failed(e.to_string()),
        };
        (trace, terminal)
    }

    /// Rolls out `record` under `cond`, emitting exactly one terminal event.
    pub fn control_with_cond(
        &self,
        world: &mut World,
        cond: &TaskCondition,
        record: &DemoRecord,
        trace: &mut ExecTrace,
    ) -> Terminal {
        match parse_task_name(&cond.task_name) {
            Ok(task) => self.control_inner(world, &task, cond, record, trace),
            Err(e) => {
                let reason = e.to_string();
                trace.push(ExecEvent::Failed {
                    task: cond.task_name.clone(),
                    reason: reason.clone(),
                });
                Terminal::Failed(reason)
            }
        }
    }

    fn control_inner(
        &self,
        world: &mut World,
        task: &PrimitiveTaskName,
        cond: &TaskCondition,
        record: &DemoRecord,
        trace: &mut ExecTrace,
    ) -> Terminal {
        let name = cond.task_name.clone();
        let terminal = match self.drive(world, task, cond, record, trace) {
            Ok(t) => t,
            Err(e) => Terminal::Failed(e.to_string()),
        };
        let time = world.sim_time();
        trace.push(match &terminal {
            Terminal::PostCondMet => ExecEvent::PostCondMet { task: name, time },
            Terminal::TimedOut => ExecEvent::TimedOut { task: name, time },
            Terminal::Failed(reason) => ExecEvent::Failed {
                task: name,
                reason: reason.clone(),
            },
        });
        terminal
    }

    fn drive(
        &self,
        world: &mut World,
        task: &PrimitiveTaskName,
        cond: &TaskCondition,
        record: &DemoRecord,
        trace: &mut ExecTrace,
    ) -> Result<Terminal, ExecError> {
        let dt = 1.0 / self.cfg.rollout_rate;
        let start = world.sim_time();
        let mut plan = Rollout::new(world, task, record, self.cfg.rollout_rate)?;
        let mut previous: BTreeSet<CollisionPair> = world.collisions().pairs;
        let mut index = 0usize;
        let mut started = false;
        loop {
            if atoms_satisfied(world, &cond.post_conditions)?.0 {
                return Ok(Terminal::PostCondMet);
            }
            if world.sim_time() - start > self.cfg.time_budget {
                return Ok(Terminal::TimedOut);
            }
            if index + 1 >= plan.len() {
                return Ok(Terminal::Failed("trajectory exhausted before the post-conditions held".into()));
            }
            if !started {
                trace.push(ExecEvent::WaypointsStarted {
                    task: cond.task_name.clone(),
                    time: world.sim_time(),
                });
                started = true;
            }
            index += 1;
            world.step_to(plan.pose(index), plan.closed(index), dt)?;
            let now = world.collisions().pairs;
            let unexpected = first_unexpected(world, cond, &now, &previous);
            previous = now;
            let Some(pair) = unexpected else {
                continue;
            };
            let coll_pos = world.overlap_center(&pair)?.unwrap_or_else(|| world.gripper_position());
            let old = plan.goal;
            let new = adjust_goal(old, coll_pos);
            let before = index;
            index = index.saturating_sub(self.cfg.backup_steps);
            world.step_to(plan.pose(index), plan.closed(index), dt)?;
            plan.retarget(index, new)?;
            previous = world.collisions().pairs;
            trace.push(ExecEvent::GoalAdjusted {
                task: cond.task_name.clone(),
                pair,
                old: old.into(),
                new: new.into(),
                coll_pos: coll_pos.into(),
                index_before: before,
                index_after: index,
            });
        }
    }
}

/// A contact that just began, involves the gripper or what it carries, and
/// is not expected by the condition.
fn first_unexpected(
    world: &World,
    cond: &TaskCondition,
    now: &BTreeSet<CollisionPair>,
    previous: &BTreeSet<CollisionPair>,
) -> Option<CollisionPair> {
    let gripper = ObjectId::gripper();
    let held = world.attached();
    now.iter()
        .filter(|p| !previous.contains(p))
        .filter(|p| p.involves(&gripper) || held.is_some_and(|h| p.involves(h)))
        .find(|p| !cond.allows(p))
        .cloned()
}

/// Rolls the task's movement primitive out to the end with no condition
/// checks, as a plain learned-trajectory baseline.
pub fn raw_rollout(world: &mut World, task: &PrimitiveTaskName, record: &DemoRecord, cfg: &ExecConfig) -> Result<(), ExecError> {
    let plan = Rollout::new(world, task, record, cfg.rollout_rate)?;
    let dt = 1.0 / cfg.rollout_rate;
    for i in 1..plan.len() {
        world.step_to(plan.pose(i), plan.closed(i), dt)?;
    }
    Ok(())
}

/// Outcome of a long-horizon run: one trace per top-level task.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LongHorizonReport {
    pub success: bool,
    pub traces: Vec<ExecTrace>,
}

/// Runs the tasks in order, stopping at the first that does not reach its
/// post-conditions.
pub fn run_long_horizon(
    world: &mut World,
    tasks: &[PrimitiveTaskName],
    library: &DemoLibrary,
    source: &dyn ConditionSource,
    cfg: ExecConfig,
) -> LongHorizonReport {
    let exec = Executor::new(library, source, cfg);
    let mut report = LongHorizonReport {
        success: !tasks.is_empty(),
        traces: Vec::new(),
    };
    for task in tasks {
        let (trace, terminal) = exec.run_task(world, task);
        report.traces.push(trace);
        if terminal != Terminal::PostCondMet {
            report.success = false;
            break;
        }
    }
    report
}

/// As [`run_long_horizon`], from task-name strings; a step that does not
/// parse ends the run with a `Failed` trace.
pub fn run_long_horizon_steps(
    world: &mut World,
    steps: &[&str],
    library: &DemoLibrary,
    source: &dyn ConditionSource,
    cfg: ExecConfig,
) -> LongHorizonReport {
    let mut tasks = Vec::new();
    for s in steps {
        match parse_task_name(s) {
            Ok(t) => tasks.push(t),
            Err(e) => {
                let mut report = run_long_horizon(world, &tasks, library, source, cfg);
                report.success = false;
                report.traces.push(ExecTrace {
                    events: vec![
                        ExecEvent::TaskStarted {
                            task: s.to_string(),
                            depth: 0,
                        },
                        ExecEvent::Failed {
                            task: s.to_string(),
                            reason: e.to_string(),
                        },
                    ],
                });
                return report;
            }
        }
    }
    run_long_horizon(world, &tasks, library, source, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::vec3;

    #[test]
    fn reflection_example() {
        assert_eq!(adjust_goal(vec3(1.0, 0.0, 0.0), vec3(0.9, 0.0, 0.0)), vec3(1.1, 0.0, 0.0));
    }

    #[test]
    fn default_config() {
        let c = ExecConfig::default();
        assert_eq!((c.time_budget, c.backup_steps, c.recursion_limit, c.rollout_rate), (60.0, 10, 5, 100.0));
        assert!(c.validate().is_ok());
        assert!(ExecConfig { backup_steps: 0, ..c }.validate().is_err());
    }

    #[test]
    fn terminal_of_nested_trace() {
        let t = |s: &str| s.to_string();
        let trace = ExecTrace {
            events: vec![
                ExecEvent::TaskStarted { task: t("a"), depth: 0 },
                ExecEvent::TaskStarted { task: t("b"), depth: 1 },
                ExecEvent::PostCondMet { task: t("b"), time: 1.0 },
                ExecEvent::TimedOut { task: t("a"), time: 2.0 },
            ],
        };
        assert_eq!(trace.terminal(), Some(&ExecEvent::TimedOut { task: t("a"), time: 2.0 }));
        assert!(!trace.succeeded());
    }
}
