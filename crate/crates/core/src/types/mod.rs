//! Shared domain vocabulary: geometry, trajectories, condition atoms and
//! primitive task names.

mod condition;
mod geometry;
mod task;
mod trajectory;

pub use condition::{
    canonical_collision, oid, AtomParseError, CollisionPair, ConditionAtom, ObjectId,
    ObjectStatePredicate, SpatialRelation, TaskCondition, GRIPPER,
};
pub use geometry::{is_finite, vec3, Aabb, Pose, Vec3};
pub use task::{parse_task_name, PrimitiveTaskName, Verb};
pub use trajectory::{Trajectory, TrajectorySample};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum TypeError {
    #[error("non-finite value")]
    NonFinite,
    #[error("quaternion norm {0} is not within 1e-6 of 1")]
    NotUnitQuaternion(f64),
    #[error("box min exceeds max")]
    InvertedBox,
    #[error("trajectory needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("invalid sample rate {0}")]
    BadSampleRate(f64),
    #[error("sample {0} does not follow its predecessor in time")]
    NonMonotoneTime(usize),
    #[error("sample {0} breaks uniform spacing")]
    NonUniformSpacing(usize),
    #[error("invalid object id `{0}`")]
    BadObjectId(String),
    #[error("relation between `{0}` and itself")]
    ReflexiveRelation(String),
    #[error("`{0}` cannot collide with itself")]
    SelfCollision(String),
    #[error("empty task name")]
    EmptyTaskName,
    #[error("unknown verb `{0}`")]
    UnknownVerb(String),
    #[error("`{verb}` takes {expected} object(s), got {found}")]
    ArityMismatch {
        verb: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("task condition has no post-conditions")]
    EmptyPostConditions,
    #[error("atom refers to `{0}`, which is not a relevant object")]
    IrrelevantObject(String),
}
