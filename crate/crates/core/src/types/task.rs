use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{ObjectId, TypeError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Verb {
    Grasp,
    Release,
    Open,
    Close,
    Tilt,
    Fold,
    Move,
    MoveInTo,
    MoveOnTop,
    MoveInFront,
}

impl Verb {
    /// Table order used by every report.
    pub const ALL: [Verb; 10] = [
        Verb::Grasp,
        Verb::Release,
        Verb::Open,
        Verb::Close,
        Verb::Tilt,
        Verb::Fold,
        Verb::Move,
        Verb::MoveInTo,
        Verb::MoveOnTop,
        Verb::MoveInFront,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            Verb::Grasp => "grasp",
            Verb::Release => "release",
            Verb::Open => "open",
            Verb::Close => "close",
            Verb::Tilt => "tilt",
            Verb::Fold => "fold",
            Verb::Move => "move",
            Verb::MoveInTo => "moveinto",
            Verb::MoveOnTop => "moveontop",
            Verb::MoveInFront => "moveinfront",
        }
    }

    /// Display label as used in result tables.
    pub fn label(self) -> &'static str {
        match self {
            Verb::Grasp => "Grasp",
            Verb::Release => "Release",
            Verb::Open => "Open",
            Verb::Close => "Close",
            Verb::Tilt => "Tilt",
            Verb::Fold => "Fold",
            Verb::Move => "Move",
            Verb::MoveInTo => "MoveInTo",
            Verb::MoveOnTop => "MoveOnTop",
            Verb::MoveInFront => "MoveInFront",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Verb::MoveInTo | Verb::MoveOnTop | Verb::MoveInFront => 2,
            _ => 1,
        }
    }

    pub fn from_keyword(word: &str) -> Option<Verb> {
        Self::ALL.into_iter().find(|v| v.keyword() == word)
    }

    /// Verbs that carry a grasped object for their whole duration.
    pub fn carries_object(self) -> bool {
        matches!(
            self,
            Verb::Move | Verb::MoveInTo | Verb::MoveOnTop | Verb::MoveInFront | Verb::Tilt
        )
    }
}

impl fmt::Display for Verb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// A primitive task such as `grasp bottle` or `moveinto bottle microwave`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PrimitiveTaskName {
    verb: Verb,
    args: Vec<ObjectId>,
}

impl PrimitiveTaskName {
    pub fn new(verb: Verb, args: Vec<ObjectId>) -> Result<Self, TypeError> {
        if args.len() != verb.arity() {
            return Err(TypeError::ArityMismatch {
                verb: verb.keyword(),
                expected: verb.arity(),
                found: args.len(),
            });
        }
        Ok(Self { verb, args })
    }

    pub fn verb(&self) -> Verb {
        self.verb
    }

    pub fn args(&self) -> &[ObjectId] {
        &self.args
    }

    /// The object acted upon (first argument).
    pub fn subject(&self) -> &ObjectId {
        &self.args[0]
    }

    /// The reference object of a two-argument task, or the subject otherwise.
    pub fn target(&self) -> &ObjectId {
        self.args.last().expect("arity >= 1")
    }

    /// Same verb with every argument renamed through `map`.
    pub fn rename(&self, map: impl Fn(&ObjectId) -> ObjectId) -> Self {
        Self {
            verb: self.verb,
            args: self.args.iter().map(map).collect(),
        }
    }
}

pub fn parse_task_name(text: &str) -> Result<PrimitiveTaskName, TypeError> {
    let lowered = text.trim().to_ascii_lowercase();
    let mut tokens = lowered.split_whitespace();
    let word = tokens.next().ok_or(TypeError::EmptyTaskName)?;
    let verb = Verb::from_keyword(word).ok_or_else(|| TypeError::UnknownVerb(word.to_string()))?;
    let args = tokens.map(ObjectId::new).collect::<Result<Vec<_>, _>>()?;
    PrimitiveTaskName::new(verb, args)
}

impl FromStr for PrimitiveTaskName {
    type Err = TypeError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_task_name(s)
    }
}

impl fmt::Display for PrimitiveTaskName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.verb.keyword())?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        Ok(())
    }
}

impl Serialize for PrimitiveTaskName {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PrimitiveTaskName {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        parse_task_name(&s).map_err(serde::de::Error::custom)
    }
}
