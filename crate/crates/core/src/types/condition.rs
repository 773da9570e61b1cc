use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::TypeError;

/// Name of the end effector in conditions and collision reports.
pub const GRIPPER: &str = "gripper";

/// Object label. Lowercase, no whitespace or commas, so it survives the
/// one-atom-per-line text format.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ObjectId(String);

impl ObjectId {
    pub fn new(name: impl Into<String>) -> Result<Self, TypeError> {
        let name = name.into();
        let valid = !name.is_empty()
            && name
                .chars()
                .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' || c == '-');
        if valid {
            Ok(Self(name))
        } else {
            Err(TypeError::BadObjectId(name))
        }
    }

    pub fn gripper() -> Self {
        Self(GRIPPER.to_string())
    }

    pub fn is_gripper(&self) -> bool {
        self.0 == GRIPPER
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

/// Shorthand for ids known to be valid at the call site.
///
/// Panics on an invalid name; use [`ObjectId::new`] for untrusted input.
pub fn oid(name: &str) -> ObjectId {
    ObjectId::new(name).expect("valid object id")
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for ObjectId {
    type Err = TypeError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s)
    }
}

impl Serialize for ObjectId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for ObjectId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        ObjectId::new(s).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SpatialRelation {
    Above,
    Below,
    Inside,
    Outside,
    InFrontOf,
}

impl SpatialRelation {
    pub const ALL: [SpatialRelation; 5] = [
        SpatialRelation::Above,
        SpatialRelation::Below,
        SpatialRelation::Inside,
        SpatialRelation::Outside,
        SpatialRelation::InFrontOf,
    ];

    pub fn phrase(self) -> &'static str {
        match self {
            SpatialRelation::Above => "above",
            SpatialRelation::Below => "below",
            SpatialRelation::Inside => "inside",
            SpatialRelation::Outside => "outside",
            SpatialRelation::InFrontOf => "in front of",
        }
    }

    pub fn from_phrase(phrase: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.phrase() == phrase)
    }
}

impl fmt::Display for SpatialRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.phrase())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ObjectStatePredicate {
    Grasping { gripper: ObjectId, obj: ObjectId },
    Open(ObjectId),
    Closed(ObjectId),
    Tilted(ObjectId),
    Folded(ObjectId),
}

impl ObjectStatePredicate {
    pub fn objects(&self) -> Vec<&ObjectId> {
        match self {
            ObjectStatePredicate::Grasping { gripper, obj } => vec![gripper, obj],
            ObjectStatePredicate::Open(o)
            | ObjectStatePredicate::Closed(o)
            | ObjectStatePredicate::Tilted(o)
            | ObjectStatePredicate::Folded(o) => vec![o],
        }
    }
}

/// One satisfiability unit of a task condition.
///
/// `Not` wraps a positive atom and holds when the inner atom does not. Only
/// one level of negation is representable.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConditionAtom {
    Relation {
        subject: ObjectId,
        relation: SpatialRelation,
        object: ObjectId,
    },
    State(ObjectStatePredicate),
    Not(Box<ConditionAtom>),
}

impl ConditionAtom {
    pub fn relation(
        subject: ObjectId,
        relation: SpatialRelation,
        object: ObjectId,
    ) -> Result<Self, TypeError> {
        if subject == object {
            return Err(TypeError::ReflexiveRelation(subject.to_string()));
        }
        Ok(ConditionAtom::Relation {
            subject,
            relation,
            object,
        })
    }

    pub fn grasping(obj: ObjectId) -> Self {
        ConditionAtom::State(ObjectStatePredicate::Grasping {
            gripper: ObjectId::gripper(),
            obj,
        })
    }

    pub fn state(p: ObjectStatePredicate) -> Self {
        ConditionAtom::State(p)
    }

    pub fn negate(self) -> Self {
        match self {
            ConditionAtom::Not(inner) => *inner,
            other => ConditionAtom::Not(Box::new(other)),
        }
    }

    pub fn is_negated(&self) -> bool {
        matches!(self, ConditionAtom::Not(_))
    }

    pub fn objects(&self) -> Vec<&ObjectId> {
        match self {
            ConditionAtom::Relation {
                subject, object, ..
            } => vec![subject, object],
            ConditionAtom::State(p) => p.objects(),
            ConditionAtom::Not(inner) => inner.objects(),
        }
    }

    pub fn mentions(&self, id: &ObjectId) -> bool {
        self.objects().into_iter().any(|o| o == id)
    }
}

impl fmt::Display for ConditionAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConditionAtom::Relation {
                subject,
                relation,
                object,
            } => write!(f, "{subject} {relation} {object}"),
            ConditionAtom::State(p) => match p {
                ObjectStatePredicate::Grasping { gripper, obj } => {
                    write!(f, "{gripper} grasping {obj}")
                }
                ObjectStatePredicate::Open(o) => write!(f, "{o} is open"),
                ObjectStatePredicate::Closed(o) => write!(f, "{o} is closed"),
                ObjectStatePredicate::Tilted(o) => write!(f, "{o} is tilted"),
                ObjectStatePredicate::Folded(o) => write!(f, "{o} is folded"),
            },
            ConditionAtom::Not(inner) => write!(f, "not {inner}"),
        }
    }
}

/// Why an atom phrase failed to parse. `UnknownRelation` and `UnknownState`
/// mean the line was structurally an atom but used a word outside the
/// vocabulary.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum AtomParseError {
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("unknown object state `{0}`")]
    UnknownState(String),
    #[error("malformed atom `{0}`")]
    Malformed(String),
    #[error(transparent)]
    Type(#[from] TypeError),
}

impl FromStr for ConditionAtom {
    type Err = AtomParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lowered = s.trim().to_ascii_lowercase();
        let tokens: Vec<&str> = lowered.split_whitespace().collect();
        if tokens.first() == Some(&"not") {
            let inner: ConditionAtom = tokens[1..].join(" ").parse()?;
            if inner.is_negated() {
                return Err(AtomParseError::Malformed(s.to_string()));
            }
            return Ok(inner.negate());
        }
        if tokens.len() < 3 {
            return Err(AtomParseError::Malformed(s.to_string()));
        }
        if tokens.len() == 3 && tokens[1] == "grasping" {
            return Ok(ConditionAtom::State(ObjectStatePredicate::Grasping {
                gripper: ObjectId::new(tokens[0])?,
                obj: ObjectId::new(tokens[2])?,
            }));
        }
        if tokens.len() == 3 && tokens[1] == "is" {
            let o = ObjectId::new(tokens[0])?;
            let p = match tokens[2] {
                "open" => ObjectStatePredicate::Open(o),
                "closed" => ObjectStatePredicate::Closed(o),
                "tilted" => ObjectStatePredicate::Tilted(o),
                "folded" => ObjectStatePredicate::Folded(o),
                other => return Err(AtomParseError::UnknownState(other.to_string())),
            };
            return Ok(ConditionAtom::State(p));
        }
        let phrase = tokens[1..tokens.len() - 1].join(" ");
        let relation = SpatialRelation::from_phrase(&phrase)
            .ok_or_else(|| AtomParseError::UnknownRelation(phrase.clone()))?;
        let subject = ObjectId::new(tokens[0])?;
        let object = ObjectId::new(tokens[tokens.len() - 1])?;
        Ok(ConditionAtom::relation(subject, relation, object)?)
    }
}

impl Serialize for ConditionAtom {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ConditionAtom {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Unordered pair of distinct objects, stored with the lexicographically
/// smaller id first.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CollisionPair {
    a: ObjectId,
    b: ObjectId,
}

pub fn canonical_collision(a: ObjectId, b: ObjectId) -> Result<CollisionPair, TypeError> {
    use std::cmp::Ordering;
    match a.cmp(&b) {
        Ordering::Less => Ok(CollisionPair { a, b }),
        Ordering::Greater => Ok(CollisionPair { a: b, b: a }),
        Ordering::Equal => Err(TypeError::SelfCollision(a.to_string())),
    }
}

impl CollisionPair {
    pub fn first(&self) -> &ObjectId {
        &self.a
    }

    pub fn second(&self) -> &ObjectId {
        &self.b
    }

    pub fn involves(&self, id: &ObjectId) -> bool {
        &self.a == id || &self.b == id
    }
}

impl fmt::Display for CollisionPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}, {}", self.a, self.b)
    }
}

impl Serialize for CollisionPair {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        [&self.a, &self.b].serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CollisionPair {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let [a, b] = <[ObjectId; 2]>::deserialize(deserializer)?;
        canonical_collision(a, b).map_err(serde::de::Error::custom)
    }
}

/// Pre-conditions, post-conditions and expected contacts of one primitive
/// task.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TaskCondition {
    pub task_name: String,
    pub relevant_objects: Vec<ObjectId>,
    pub pre_conditions: Vec<ConditionAtom>,
    pub post_conditions: Vec<ConditionAtom>,
    pub allowed_collisions: Vec<CollisionPair>,
}

impl TaskCondition {
    pub fn new(
        task_name: impl Into<String>,
        relevant_objects: Vec<ObjectId>,
        pre_conditions: Vec<ConditionAtom>,
        post_conditions: Vec<ConditionAtom>,
        allowed_collisions: Vec<CollisionPair>,
    ) -> Result<Self, TypeError> {
        let cond = Self {
            task_name: task_name.into(),
            relevant_objects,
            pre_conditions,
            post_conditions,
            allowed_collisions,
        };
        cond.validate()?;
        Ok(cond)
    }

    pub fn validate(&self) -> Result<(), TypeError> {
        if self.post_conditions.is_empty() {
            return Err(TypeError::EmptyPostConditions);
        }
        let relevant: BTreeSet<&ObjectId> = self.relevant_objects.iter().collect();
        for atom in self.pre_conditions.iter().chain(&self.post_conditions) {
            for o in atom.objects() {
                if !o.is_gripper() && !relevant.contains(o) {
                    return Err(TypeError::IrrelevantObject(o.to_string()));
                }
            }
        }
        Ok(())
    }

    pub fn allows(&self, pair: &CollisionPair) -> bool {
        self.allowed_collisions.contains(pair)
    }
}

impl<'de> Deserialize<'de> for TaskCondition {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            task_name: String,
            relevant_objects: Vec<ObjectId>,
            pre_conditions: Vec<ConditionAtom>,
            post_conditions: Vec<ConditionAtom>,
            allowed_collisions: Vec<CollisionPair>,
        }
        let r = Raw::deserialize(deserializer)?;
        TaskCondition::new(
            r.task_name,
            r.relevant_objects,
            r.pre_conditions,
            r.post_conditions,
            r.allowed_collisions,
        )
        .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_collision_orders_ids() {
        let p = canonical_collision(oid("mug"), oid("bottle")).unwrap();
        assert_eq!((p.first().as_str(), p.second().as_str()), ("bottle", "mug"));
        let q = canonical_collision(oid("bottle"), oid("mug")).unwrap();
        assert_eq!(p, q);
        assert_eq!(
            canonical_collision(oid("x"), oid("x")).unwrap_err(),
            TypeError::SelfCollision("x".into())
        );
    }

    #[test]
    fn atom_phrases_parse() {
        let a: ConditionAtom = "bottle in front of microwave".parse().unwrap();
        assert_eq!(
            a,
            ConditionAtom::relation(oid("bottle"), SpatialRelation::InFrontOf, oid("microwave"))
                .unwrap()
        );
        let g: ConditionAtom = "not gripper grasping bottle".parse().unwrap();
        assert_eq!(g, ConditionAtom::grasping(oid("bottle")).negate());
        assert_eq!(g.to_string(), "not gripper grasping bottle");
        assert!(matches!(
            "bottle behind box".parse::<ConditionAtom>(),
            Err(AtomParseError::UnknownRelation(r)) if r == "behind"
        ));
        assert!(matches!(
            "towel is wet".parse::<ConditionAtom>(),
            Err(AtomParseError::UnknownState(_))
        ));
        assert!("not not box is open".parse::<ConditionAtom>().is_err());
        assert!("bottle above bottle".parse::<ConditionAtom>().is_err());
    }

    #[test]
    fn condition_requires_post_and_relevance() {
        let post = vec![ConditionAtom::grasping(oid("bottle"))];
        assert!(TaskCondition::new("grasp bottle", vec![oid("bottle")], vec![], post.clone(), vec![]).is_ok());
        assert_eq!(
            TaskCondition::new("grasp bottle", vec![], vec![], post, vec![]).unwrap_err(),
            TypeError::IrrelevantObject("bottle".into())
        );
        assert_eq!(
            TaskCondition::new("grasp bottle", vec![oid("bottle")], vec![], vec![], vec![])
                .unwrap_err(),
            TypeError::EmptyPostConditions
        );
    }

    #[test]
    fn object_ids_reject_whitespace() {
        assert!(ObjectId::new("").is_err());
        assert!(ObjectId::new("red mug").is_err());
        assert!(ObjectId::new("Mug").is_err());
        assert!(ObjectId::new("mug_2").is_ok());
    }
}
