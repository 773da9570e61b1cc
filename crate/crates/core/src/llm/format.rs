//! The plain-text condition layout shared by prompt examples and model
//! answers:
//!
//! ```text
//! Task name: grasp bottle
//! Relevant objects: bottle, gripper
//! Pre-conditions:
//! - none
//! Post-conditions:
//! - gripper grasping bottle
//! Collisions:
//! - bottle, gripper
//! ```

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::types::{
    canonical_collision, AtomParseError, CollisionPair, ConditionAtom, ObjectId, PrimitiveTaskName, SpatialRelation,
    TaskCondition,
};

/// Relation words offered to the model.
pub const RELATION_VOCABULARY: [&str; 4] = ["above", "below", "inside", "in front of"];

/// Object-state phrases offered to the model.
pub const STATE_VOCABULARY: [&str; 6] = [
    "gripper grasping <object>",
    "not gripper grasping <object>",
    "<object> is open",
    "<object> is closed",
    "<object> is tilted",
    "<object> is folded",
];

const NONE_ITEM: &str = "none";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Success,
    ParseFailure,
    SemanticFailure,
}

/// Which atoms a chat is allowed to produce.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChatKind {
    /// Relations, states and collisions in one answer.
    Combined,
    /// Relations and collisions only.
    Spatial,
    /// Object states only.
    States,
}

impl ChatKind {
    fn allows(self, atom: &ConditionAtom) -> bool {
        let relational = matches!(atom, ConditionAtom::Relation { .. })
            || matches!(atom, ConditionAtom::Not(inner) if matches!(**inner, ConditionAtom::Relation { .. }));
        match self {
            ChatKind::Combined => true,
            ChatKind::Spatial => relational,
            ChatKind::States => !relational,
        }
    }
}

/// Keeps the atoms a chat of `kind` would produce.
pub fn restrict(cond: &TaskCondition, kind: ChatKind) -> TaskCondition {
    let keep = |v: &[ConditionAtom]| v.iter().filter(|a| kind.allows(a)).cloned().collect();
    TaskCondition {
        task_name: cond.task_name.clone(),
        relevant_objects: cond.relevant_objects.clone(),
        pre_conditions: keep(&cond.pre_conditions),
        post_conditions: keep(&cond.post_conditions),
        allowed_collisions: if kind == ChatKind::States {
            Vec::new()
        } else {
            cond.allowed_collisions.clone()
        },
    }
}

fn push_items<T: ToString>(out: &mut String, items: &[T]) {
    if items.is_empty() {
        out.push_str("- none\n");
    }
    for i in items {
        out.push_str("- ");
        out.push_str(&i.to_string());
        out.push('\n');
    }
}

pub fn render_condition(cond: &TaskCondition) -> String {
    let mut out = format!("Task name: {}\nRelevant objects: ", cond.task_name);
    let names: Vec<&str> = cond.relevant_objects.iter().map(ObjectId::as_str).collect();
    out.push_str(&names.join(", "));
    out.push_str("\nPre-conditions:\n");
    push_items(&mut out, &cond.pre_conditions);
    out.push_str("Post-conditions:\n");
    push_items(&mut out, &cond.post_conditions);
    out.push_str("Collisions:\n");
    let pairs: Vec<String> = cond
        .allowed_collisions
        .iter()
        .map(|p| format!("{}, {}", p.first(), p.second()))
        .collect();
    push_items(&mut out, &pairs);
    out
}

/// Result of one generation: the parsed condition when usable, and why not
/// otherwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationOutcome {
    pub condition: Option<TaskCondition>,
    pub raw_text: String,
    pub attempts: u32,
    pub verdict: Verdict,
    pub reason: Option<String>,
}

impl GenerationOutcome {
    fn failed(text: &str, verdict: Verdict, reason: String) -> Self {
        Self {
            condition: None,
            raw_text: text.to_string(),
            attempts: 1,
            verdict,
            reason: Some(reason),
        }
    }

    pub fn is_success(&self) -> bool {
        self.verdict == Verdict::Success
    }
}

enum Fail {
    Parse(String),
    Semantic(String),
}

const SECTIONS: [&str; 5] = [
    "Task name:",
    "Relevant objects:",
    "Pre-conditions:",
    "Post-conditions:",
    "Collisions:",
];

fn split_sections(text: &str) -> Result<[(String, Vec<String>); 5], Fail> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .peekable();
    let mut out: [(String, Vec<String>); 5] = Default::default();
    for (i, header) in SECTIONS.iter().enumerate() {
        let line = lines
            .next()
            .ok_or_else(|| Fail::Parse(format!("missing section `{header}`")))?;
        let line = if i == 0 { line.strip_prefix("A:").map_or(line, str::trim) } else { line };
        let rest = line
            .strip_prefix(header)
            .ok_or_else(|| Fail::Parse(format!("expected `{header}`, found `{line}`")))?;
        out[i].0 = rest.trim().to_string();
        while let Some(item) = lines.peek().and_then(|l| l.strip_prefix('-')) {
            out[i].1.push(item.trim().to_string());
            lines.next();
        }
        if i >= 2 && !out[i].0.is_empty() {
            return Err(Fail::Parse(format!("`{header}` must be followed by `- ` items")));
        }
        if i < 2 && !out[i].1.is_empty() {
            return Err(Fail::Parse(format!("`{header}` takes its value on the same line")));
        }
    }
    if let Some(extra) = lines.next() {
        return Err(Fail::Parse(format!("unexpected line `{extra}`")));
    }
    Ok(out)
}

fn items(raw: &[String]) -> Vec<&str> {
    if raw.len() == 1 && raw[0].eq_ignore_ascii_case(NONE_ITEM) {
        Vec::new()
    } else {
        raw.iter().map(String::as_str).collect()
    }
}

fn parse_atom(text: &str, kind: ChatKind) -> Result<ConditionAtom, Fail> {
    let atom: ConditionAtom = text.parse().map_err(|e| match e {
        AtomParseError::UnknownRelation(_) | AtomParseError::UnknownState(_) => Fail::Semantic(e.to_string()),
        other => Fail::Parse(other.to_string()),
    })?;
    let base = match &atom {
        ConditionAtom::Not(inner) => inner.as_ref(),
        a => a,
    };
    if let ConditionAtom::Relation { relation, .. } = base {
        if !RELATION_VOCABULARY.contains(&relation.phrase()) || *relation == SpatialRelation::Outside {
            return Err(Fail::Semantic(format!("relation `{}` is not in the vocabulary", relation.phrase())));
        }
    }
    if let ConditionAtom::State(crate::types::ObjectStatePredicate::Grasping { gripper, .. }) = base {
        if !gripper.is_gripper() {
            return Err(Fail::Semantic(format!("`{gripper}` is not the gripper")));
        }
    }
    if !kind.allows(&atom) {
        return Err(Fail::Semantic(format!("`{atom}` does not belong in this answer")));
    }
    Ok(atom)
}

fn parse_inner(text: &str, task: &PrimitiveTaskName, kind: ChatKind) -> Result<TaskCondition, Fail> {
    if text.trim().is_empty() {
        return Err(Fail::Parse("empty answer".into()));
    }
    let [name, relevant, pre, post, coll] = split_sections(text)?;
    if name.0.to_ascii_lowercase() != task.to_string() {
        return Err(Fail::Semantic(format!("answer is for `{}`, expected `{task}`", name.0)));
    }
    let mut objects = Vec::new();
    for word in relevant.0.split(',').map(str::trim).filter(|w| !w.is_empty()) {
        let id: ObjectId = word
            .to_ascii_lowercase()
            .parse()
            .map_err(|e| Fail::Parse(format!("bad object `{word}`: {e}")))?;
        if !objects.contains(&id) {
            objects.push(id);
        }
    }
    for arg in task.args() {
        if !objects.contains(arg) {
            return Err(Fail::Semantic(format!("task object `{arg}` is missing from the relevant objects")));
        }
    }
    let relevant_set: BTreeSet<&ObjectId> = objects.iter().collect();
    let check = |atom: &ConditionAtom| -> Result<(), Fail> {
        match atom.objects().into_iter().find(|o| !o.is_gripper() && !relevant_set.contains(o)) {
            Some(o) => Err(Fail::Semantic(format!("`{o}` is not a relevant object"))),
            None => Ok(()),
        }
    };
    let atoms = |raw: &[String]| -> Result<Vec<ConditionAtom>, Fail> {
        let mut v = Vec::new();
        for t in items(raw) {
            let a = parse_atom(t, kind)?;
            check(&a)?;
            v.push(a);
        }
        Ok(v)
    };
    let pre = atoms(&pre.1)?;
    let post = atoms(&post.1)?;
    let mut pairs: Vec<CollisionPair> = Vec::new();
    for t in items(&coll.1) {
        let parts: Vec<&str> = t.split(',').map(str::trim).collect();
        let [a, b] = parts[..] else {
            return Err(Fail::Parse(format!("collision `{t}` is not `a, b`")));
        };
        let a: ObjectId = a.parse().map_err(|e| Fail::Parse(format!("{e}")))?;
        let b: ObjectId = b.parse().map_err(|e| Fail::Parse(format!("{e}")))?;
        let relevant = |o: &ObjectId| o.is_gripper() || relevant_set.contains(o);
        if !relevant(&a) && !relevant(&b) {
            return Err(Fail::Semantic(format!("collision `{t}` involves no relevant object")));
        }
        let pair = canonical_collision(a, b).map_err(|e| Fail::Semantic(e.to_string()))?;
        if !pairs.contains(&pair) {
            pairs.push(pair);
        }
    }
    if post.is_empty() && kind == ChatKind::Combined {
        return Err(Fail::Semantic("no post-conditions".into()));
    }
    Ok(TaskCondition {
        task_name: task.to_string(),
        relevant_objects: objects,
        pre_conditions: pre,
        post_conditions: post,
        allowed_collisions: pairs,
    })
}

/// Parses one answer for `task`. Failures are verdicts, never errors.
pub fn parse_condition(text: &str, task: &PrimitiveTaskName) -> GenerationOutcome {
    parse_for(text, task, ChatKind::Combined)
}

/// As [`parse_condition`], for an answer from a chat of the given kind. Split
/// chats may return an empty post-condition list; their merge may not.
pub fn parse_for(text: &str, task: &PrimitiveTaskName, kind: ChatKind) -> GenerationOutcome {
    match parse_inner(text, task, kind) {
        Ok(condition) => GenerationOutcome {
            condition: Some(condition),
            raw_text: text.to_string(),
            attempts: 1,
            verdict: Verdict::Success,
            reason: None,
        },
        Err(Fail::Parse(r)) => GenerationOutcome::failed(text, Verdict::ParseFailure, r),
        Err(Fail::Semantic(r)) => GenerationOutcome::failed(text, Verdict::SemanticFailure, r),
    }
}
