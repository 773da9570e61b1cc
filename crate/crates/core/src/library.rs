//! Shipped fixtures: kitchen scenes, the four long-horizon scripts, the
//! hand-labelled conditions, and the demo library recorded from the scripts.

use std::collections::BTreeMap;

use crate::cond::{CondError, DemoRecord};
use crate::types::{canonical_collision, parse_task_name, ObjectId, PrimitiveTaskName, TaskCondition, Verb};
use crate::world::{scripted_demo, SceneFile, World, WorldError};

const KITCHEN: &str = include_str!("../data/scenes/kitchen.json");
const KITCHEN_OPEN: &str = include_str!("../data/scenes/kitchen_open.json");
const KITCHEN_MUG: &str = include_str!("../data/scenes/kitchen_mug.json");
const KITCHEN_MUG_OPEN: &str = include_str!("../data/scenes/kitchen_mug_open.json");
const GROUND_TRUTH: &str = include_str!("../data/ground_truth.json");

#[derive(Debug, PartialEq, thiserror::Error)]
pub enum LibraryError {
    #[error("no demonstration for `{0}`")]
    MissingDemo(Verb),
    #[error("unknown scene `{0}`")]
    UnknownScene(String),
    #[error("demonstration of `{task}` failed: {source}")]
    Demo { task: String, source: WorldError },
    #[error(transparent)]
    Cond(#[from] CondError),
    #[error(transparent)]
    World(#[from] WorldError),
}

/// Names of the shipped scenes.
pub const SCENES: [&str; 4] = ["kitchen", "kitchen_open", "kitchen_mug", "kitchen_mug_open"];

pub fn scene_text(name: &str) -> Option<&'static str> {
    match name {
        "kitchen" => Some(KITCHEN),
        "kitchen_open" => Some(KITCHEN_OPEN),
        "kitchen_mug" => Some(KITCHEN_MUG),
        "kitchen_mug_open" => Some(KITCHEN_MUG_OPEN),
        _ => None,
    }
}

/// Builds a shipped scene by name.
pub fn scene(name: &str) -> Result<World, LibraryError> {
    let text = scene_text(name).ok_or_else(|| LibraryError::UnknownScene(name.to_string()))?;
    Ok(SceneFile::parse(text)?.build()?)
}

/// A long-horizon task: a scene and the primitives to run in it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LhtScript {
    pub name: &'static str,
    pub scene: &'static str,
    /// Scene used when the bottle is swapped for a mug.
    pub novel_scene: &'static str,
    pub steps: &'static [&'static str],
}

impl LhtScript {
    pub fn tasks(&self) -> Vec<PrimitiveTaskName> {
        self.steps
            .iter()
            .map(|s| parse_task_name(s).expect("shipped scripts parse"))
            .collect()
    }
}

pub const LHT_SCRIPTS: [LhtScript; 4] = [
    LhtScript {
        name: "LHT1",
        scene: "kitchen_open",
        novel_scene: "kitchen_mug_open",
        steps: &["grasp bottle", "moveinto bottle microwave", "release bottle", "close microwave"],
    },
    LhtScript {
        name: "LHT2",
        scene: "kitchen",
        novel_scene: "kitchen_mug",
        steps: &["open microwave", "grasp bottle", "move bottle", "release bottle"],
    },
    LhtScript {
        name: "LHT3",
        scene: "kitchen",
        novel_scene: "kitchen_mug",
        steps: &["fold towel", "grasp bottle", "moveontop bottle box", "release bottle"],
    },
    LhtScript {
        name: "LHT4",
        scene: "kitchen",
        novel_scene: "kitchen_mug",
        steps: &["grasp bottle", "moveinfront bottle microwave", "tilt bottle", "release bottle"],
    },
];

/// Object swapped in the novel-object case.
pub const DEMO_OBJECT: &str = "bottle";
pub const NOVEL_OBJECT: &str = "mug";

/// Replaces the demonstrated object with the novel one in a task name.
pub fn to_novel(task: &PrimitiveTaskName) -> PrimitiveTaskName {
    let (from, to) = (ObjectId::new(DEMO_OBJECT).unwrap(), ObjectId::new(NOVEL_OBJECT).unwrap());
    task.rename(|o| if *o == from { to.clone() } else { o.clone() })
}

/// Hand-labelled condition of every demonstrated primitive, in verb order.
pub fn ground_truth() -> Vec<TaskCondition> {
    serde_json::from_str(GROUND_TRUTH).expect("shipped ground truth is valid")
}

/// Ground truth with the demonstrated object renamed, for novel-object runs.
pub fn rename_condition(cond: &TaskCondition, from: &ObjectId, to: &ObjectId) -> TaskCondition {
    let swap = |o: &ObjectId| if o == from { to.clone() } else { o.clone() };
    let atoms = |v: &[crate::types::ConditionAtom]| {
        v.iter()
            .map(|a| a.to_string())
            .map(|s| {
                s.split(' ')
                    .map(|w| if w == from.as_str() { to.as_str() } else { w })
                    .collect::<Vec<_>>()
                    .join(" ")
                    .parse()
                    .expect("renaming keeps atoms well formed")
            })
            .collect()
    };
    TaskCondition {
        task_name: parse_task_name(&cond.task_name)
            .map(|t| t.rename(swap).to_string())
            .unwrap_or_else(|_| cond.task_name.clone()),
        relevant_objects: cond.relevant_objects.iter().map(swap).collect(),
        pre_conditions: atoms(&cond.pre_conditions),
        post_conditions: atoms(&cond.post_conditions),
        allowed_collisions: cond
            .allowed_collisions
            .iter()
            .map(|p| canonical_collision(swap(p.first()), swap(p.second())).expect("distinct ids stay distinct"))
            .collect(),
    }
}

/// One recorded primitive: the learned record and the scene it started from.
#[derive(Clone, Debug)]
pub struct LibraryEntry {
    pub record: DemoRecord,
    pub pre_world: World,
    pub post_world: World,
}

/// Demonstrations of all ten verbs, keyed by verb.
#[derive(Clone, Debug, Default)]
pub struct DemoLibrary {
    entries: BTreeMap<Verb, LibraryEntry>,
}

impl DemoLibrary {
    /// Replays the four scripts in their scenes and keeps the first
    /// demonstration of each verb.
    pub fn record() -> Result<Self, LibraryError> {
        let mut entries = BTreeMap::new();
        for script in &LHT_SCRIPTS {
            let mut world = scene(script.scene)?;
            for task in script.tasks() {
                let demo = scripted_demo(&world, &task).map_err(|source| LibraryError::Demo {
                    task: task.to_string(),
                    source,
                })?;
                world = demo.post_world.clone();
                if let std::collections::btree_map::Entry::Vacant(slot) = entries.entry(task.verb()) {
                    slot.insert(LibraryEntry {
                        record: DemoRecord::from_demo(&demo)?,
                        pre_world: demo.pre_world,
                        post_world: demo.post_world,
                    });
                }
            }
        }
        Ok(Self { entries })
    }

    pub fn from_records(records: impl IntoIterator<Item = DemoRecord>) -> Self {
        Self {
            entries: records
                .into_iter()
                .map(|r| {
                    let world = World::new(crate::types::Pose::identity(), 0);
                    (
                        r.task().verb(),
                        LibraryEntry {
                            record: r,
                            pre_world: world.clone(),
                            post_world: world,
                        },
                    )
                })
                .collect(),
        }
    }

    pub fn get(&self, verb: Verb) -> Result<&LibraryEntry, LibraryError> {
        self.entries.get(&verb).ok_or(LibraryError::MissingDemo(verb))
    }

    pub fn record_for(&self, verb: Verb) -> Result<&DemoRecord, LibraryError> {
        Ok(&self.get(verb)?.record)
    }

    pub fn insert(&mut self, record: DemoRecord) {
        let verb = record.task().verb();
        match self.entries.get_mut(&verb) {
            Some(e) => e.record = record,
            None => {
                let world = World::new(crate::types::Pose::identity(), 0);
                self.entries.insert(
                    verb,
                    LibraryEntry {
                        record,
                        pre_world: world.clone(),
                        post_world: world,
                    },
                );
            }
        }
    }

    pub fn records(&self) -> impl Iterator<Item = &DemoRecord> {
        self.entries.values().map(|e| &e.record)
    }

    pub fn verbs(&self) -> impl Iterator<Item = Verb> + '_ {
        self.entries.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenes_and_truth_load() {
        for s in SCENES {
            scene(s).unwrap();
        }
        assert!(matches!(scene("attic"), Err(LibraryError::UnknownScene(_))));
        let gt = ground_truth();
        assert_eq!(gt.len(), 10);
        let verbs: Vec<Verb> = gt.iter().map(|c| parse_task_name(&c.task_name).unwrap().verb()).collect();
        assert_eq!(verbs, Verb::ALL.to_vec());
    }

    #[test]
    fn renaming_swaps_every_mention() {
        let gt = ground_truth();
        let r = rename_condition(&gt[7], &ObjectId::new("bottle").unwrap(), &ObjectId::new("mug").unwrap());
        assert_eq!(r.task_name, "moveinto mug microwave");
        assert!(r.validate().is_ok());
        assert!(!serde_json::to_string(&r).unwrap().contains("bottle"));
    }
}
