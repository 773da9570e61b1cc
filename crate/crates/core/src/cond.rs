//! Conditions read off the environment around a demonstration, the
//! condition-to-task table, and demo-data files.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dmp::{self, DmpError, DmpModel, DEFAULT_N_BASIS};
use crate::percept::current_conditions;
use crate::types::{
    parse_task_name, CollisionPair, ConditionAtom, ObjectId, ObjectStatePredicate, PrimitiveTaskName, SpatialRelation,
    TaskCondition, TypeError,
};
use crate::world::{CollisionReport, ScriptedDemo, World};

const BUILTIN_TABLE: &str = include_str!("../data/cond2task.json");

#[derive(Debug, PartialEq, thiserror::Error)]
pub enum CondError {
    #[error("unknown object `{0}`")]
    UnknownObject(ObjectId),
    #[error("no primitive task establishes `{0}`")]
    UnmappableAtom(ConditionAtom),
    #[error("io error: {0}")]
    Io(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error(transparent)]
    Dmp(#[from] DmpError),
    #[error(transparent)]
    Type(#[from] TypeError),
}

/// Rewrites `a below b` as `b above a` so each relation has one spelling.
pub fn canonical_atom(atom: ConditionAtom) -> ConditionAtom {
    match atom {
        ConditionAtom::Relation {
            subject,
            relation: SpatialRelation::Below,
            object,
        } => ConditionAtom::Relation {
            subject: object,
            relation: SpatialRelation::Above,
            object: subject,
        },
        ConditionAtom::Not(inner) => ConditionAtom::Not(Box::new(canonical_atom(*inner))),
        other => other,
    }
}

fn canonical_set(world: &World) -> Vec<ConditionAtom> {
    let mut seen = BTreeSet::new();
    current_conditions(world)
        .into_iter()
        .map(canonical_atom)
        .filter(|a| seen.insert(a.clone()))
        .collect()
}

fn only_mentions(atom: &ConditionAtom, allowed: &BTreeSet<&ObjectId>) -> bool {
    atom.objects().into_iter().all(|o| o.is_gripper() || allowed.contains(o))
}

/// Builds the condition of `task` from the scene before and after its
/// demonstration and the contacts logged in between.
///
/// Pre-conditions are the atoms that held before and mention only the task's
/// arguments (and the gripper). Post-conditions are the change: atoms that
/// became true, plus the negation of atoms that stopped holding, under the
/// same restriction. When that leaves nothing (a plain `move` changes only
/// relations to bystanders), the change restricted to atoms mentioning any
/// argument is used and the bystanders become relevant objects.
pub fn gen_cond_from_env(
    pre_world: &World,
    post_world: &World,
    collision_log: &[CollisionReport],
    task: &PrimitiveTaskName,
) -> Result<TaskCondition, CondError> {
    for id in task.args() {
        if !pre_world.contains(id) {
            return Err(CondError::UnknownObject(id.clone()));
        }
    }
    let pre_ids: BTreeSet<_> = pre_world.object_ids().collect();
    let post_ids: BTreeSet<_> = post_world.object_ids().collect();
    if let Some(missing) = pre_ids.symmetric_difference(&post_ids).next() {
        return Err(CondError::UnknownObject((*missing).clone()));
    }

    let before = canonical_set(pre_world);
    let after = canonical_set(post_world);
    let before_set: BTreeSet<_> = before.iter().collect();
    let after_set: BTreeSet<_> = after.iter().collect();
    let delta: Vec<ConditionAtom> = after
        .iter()
        .filter(|a| !before_set.contains(a))
        .cloned()
        .chain(before.iter().filter(|a| !after_set.contains(a)).map(|a| a.clone().negate()))
        .collect();

    let args: BTreeSet<&ObjectId> = task.args().iter().collect();
    let pre: Vec<_> = before.iter().filter(|a| only_mentions(a, &args)).cloned().collect();
    let mut post: Vec<_> = delta.iter().filter(|a| only_mentions(a, &args)).cloned().collect();
    let mut relevant: Vec<ObjectId> = task.args().to_vec();
    if post.is_empty() {
        post = delta
            .iter()
            .filter(|a| task.args().iter().any(|x| a.mentions(x)))
            .cloned()
            .collect();
        for atom in &post {
            for o in atom.objects() {
                if !o.is_gripper() && !relevant.contains(o) {
                    relevant.push(o.clone());
                }
            }
        }
    }
    relevant.push(ObjectId::gripper());

    let allowed: BTreeSet<CollisionPair> = collision_log.iter().flat_map(|r| r.iter().cloned()).collect();
    Ok(TaskCondition::new(
        task.to_string(),
        relevant,
        pre,
        post,
        allowed.into_iter().collect(),
    )?)
}

/// Placeholder form of an atom (`X inside Y`) and the objects it abstracts.
fn pattern_of(atom: &ConditionAtom) -> (String, Vec<&ObjectId>) {
    match atom {
        ConditionAtom::Relation {
            subject,
            relation,
            object,
        } => (format!("X {} Y", relation.phrase()), vec![subject, object]),
        ConditionAtom::State(p) => match p {
            ObjectStatePredicate::Grasping { gripper, obj } if gripper.is_gripper() => {
                ("gripper grasping X".into(), vec![obj])
            }
            ObjectStatePredicate::Grasping { gripper, obj } => ("G grasping X".into(), vec![obj, gripper]),
            ObjectStatePredicate::Open(o) => ("X is open".into(), vec![o]),
            ObjectStatePredicate::Closed(o) => ("X is closed".into(), vec![o]),
            ObjectStatePredicate::Tilted(o) => ("X is tilted".into(), vec![o]),
            ObjectStatePredicate::Folded(o) => ("X is folded".into(), vec![o]),
        },
        ConditionAtom::Not(inner) => {
            let (p, objs) = pattern_of(inner);
            (format!("not {p}"), objs)
        }
    }
}

fn fill(template: &str, objs: &[&ObjectId]) -> Result<PrimitiveTaskName, TypeError> {
    let words: Vec<&str> = template
        .split_whitespace()
        .map(|w| match w {
            "X" => objs.first().map_or(w, |o| o.as_str()),
            "Y" => objs.get(1).map_or(w, |o| o.as_str()),
            _ => w,
        })
        .collect();
    parse_task_name(&words.join(" "))
}

/// The table from an unmet atom to the primitive task that establishes it.
/// Keys are atom patterns over the placeholders `X` and `Y`; values are task
/// names over the same placeholders.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cond2Task {
    rows: BTreeMap<String, String>,
}

impl Default for Cond2Task {
    fn default() -> Self {
        Self::builtin()
    }
}

impl Cond2Task {
    pub fn builtin() -> Self {
        Self::from_json(BUILTIN_TABLE).expect("shipped table is valid")
    }

    pub fn from_rows(rows: BTreeMap<String, String>) -> Result<Self, CondError> {
        let (x, y) = (ObjectId::new("x")?, ObjectId::new("y")?);
        for (key, template) in &rows {
            let arity = key.split_whitespace().filter(|w| matches!(*w, "X" | "Y")).count();
            let used = template.split_whitespace().filter(|w| matches!(*w, "X" | "Y")).count();
            if used > arity {
                return Err(CondError::Schema(format!("`{template}` uses placeholders missing from `{key}`")));
            }
            fill(template, &[&x, &y]).map_err(|e| CondError::Schema(format!("`{template}`: {e}")))?;
        }
        Ok(Self { rows })
    }

    pub fn from_json(text: &str) -> Result<Self, CondError> {
        let rows: BTreeMap<String, String> =
            serde_json::from_str(text).map_err(|e| CondError::Schema(e.to_string()))?;
        Self::from_rows(rows)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CondError> {
        let text = std::fs::read_to_string(path).map_err(|e| CondError::Io(e.to_string()))?;
        Self::from_json(&text)
    }

    pub fn rows(&self) -> &BTreeMap<String, String> {
        &self.rows
    }

    pub fn map(&self, atom: &ConditionAtom) -> Result<PrimitiveTaskName, CondError> {
        let (pattern, objs) = pattern_of(atom);
        let template = self
            .rows
            .get(&pattern)
            .ok_or_else(|| CondError::UnmappableAtom(atom.clone()))?;
        Ok(fill(template, &objs)?)
    }
}

/// Maps an atom through the shipped table.
pub fn cond_to_task(atom: &ConditionAtom) -> Result<PrimitiveTaskName, CondError> {
    Cond2Task::builtin().map(atom)
}

/// A learned primitive: its condition and its movement primitive.
#[derive(Clone, Debug, PartialEq)]
pub struct DemoRecord {
    pub condition: TaskCondition,
    pub dmp: DmpModel,
    /// Seconds.
    pub demo_duration: f64,
}

impl DemoRecord {
    /// Fits a movement primitive to a scripted demonstration and extracts its
    /// condition from the scenes around it.
    pub fn from_demo(demo: &ScriptedDemo) -> Result<Self, CondError> {
        let log: Vec<CollisionReport> = demo.collision_log.iter().map(|c| c.report.clone()).collect();
        let condition = gen_cond_from_env(&demo.pre_world, &demo.post_world, &log, &demo.task)?;
        let dmp = dmp::fit(&demo.trajectory, DEFAULT_N_BASIS)?;
        Ok(Self {
            condition,
            demo_duration: dmp.demo_duration_s,
            dmp,
        })
    }

    pub fn task(&self) -> PrimitiveTaskName {
        parse_task_name(&self.condition.task_name).expect("validated on construction")
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DemoFile {
    task_name: String,
    condition: TaskCondition,
    dmp: DmpModel,
    demo_duration_s: f64,
}

impl Serialize for DemoRecord {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        DemoFile {
            task_name: self.condition.task_name.clone(),
            condition: self.condition.clone(),
            dmp: self.dmp.clone(),
            demo_duration_s: self.demo_duration,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DemoRecord {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let f = DemoFile::deserialize(deserializer)?;
        parse_task_name(&f.task_name).map_err(D::Error::custom)?;
        if f.task_name != f.condition.task_name {
            return Err(D::Error::custom(format!(
                "task_name `{}` disagrees with condition `{}`",
                f.task_name, f.condition.task_name
            )));
        }
        if !(f.demo_duration_s.is_finite() && f.demo_duration_s > 0.0) {
            return Err(D::Error::custom("demo_duration_s must be positive"));
        }
        Ok(DemoRecord {
            condition: f.condition,
            dmp: f.dmp,
            demo_duration: f.demo_duration_s,
        })
    }
}

pub fn save_demo(record: &DemoRecord, path: impl AsRef<Path>) -> Result<(), CondError> {
    let text = serde_json::to_string_pretty(record).map_err(|e| CondError::Schema(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| CondError::Io(e.to_string()))
}

pub fn load_demo(path: impl AsRef<Path>) -> Result<DemoRecord, CondError> {
    let text = std::fs::read_to_string(path).map_err(|e| CondError::Io(e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| CondError::Schema(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atom(s: &str) -> ConditionAtom {
        s.parse().unwrap()
    }

    #[test]
    fn table_rows() {
        assert_eq!(cond_to_task(&atom("gripper grasping bottle")).unwrap().to_string(), "grasp bottle");
        assert_eq!(
            cond_to_task(&atom("not gripper grasping bottle")).unwrap().to_string(),
            "release bottle"
        );
        assert_eq!(
            cond_to_task(&atom("bottle inside microwave")).unwrap().to_string(),
            "moveinto bottle microwave"
        );
        assert_eq!(
            cond_to_task(&atom("bottle in front of microwave")).unwrap().to_string(),
            "moveinfront bottle microwave"
        );
        assert_eq!(cond_to_task(&atom("towel is folded")).unwrap().to_string(), "fold towel");
    }

    #[test]
    fn below_and_outside_are_unmappable() {
        for s in ["a below b", "a outside b", "not microwave is open"] {
            assert_eq!(cond_to_task(&atom(s)), Err(CondError::UnmappableAtom(atom(s))));
        }
    }

    #[test]
    fn custom_table_overrides() {
        let t = Cond2Task::from_json(r#"{"X below Y": "moveontop Y X"}"#).unwrap();
        assert_eq!(t.map(&atom("a below b")).unwrap().to_string(), "moveontop b a");
        assert!(t.map(&atom("gripper grasping a")).is_err());
    }

    #[test]
    fn bad_tables_are_rejected() {
        assert!(matches!(Cond2Task::from_json(r#"{"X is open": "fly X"}"#), Err(CondError::Schema(_))));
        assert!(matches!(Cond2Task::from_json(r#"{"X is open": "moveinto X Y"}"#), Err(CondError::Schema(_))));
        assert!(matches!(Cond2Task::from_json("[1]"), Err(CondError::Schema(_))));
    }

    #[test]
    fn below_is_rewritten_as_above() {
        assert_eq!(canonical_atom(atom("a below b")), atom("b above a"));
        assert_eq!(canonical_atom(atom("not a below b")), atom("not b above a"));
        assert_eq!(canonical_atom(atom("a inside b")), atom("a inside b"));
    }
}
