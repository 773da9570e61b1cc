use serde::{Deserialize, Serialize};

use super::format::{render_condition, restrict, ChatKind, RELATION_VOCABULARY, STATE_VOCABULARY};
use crate::cond::DemoRecord;
use crate::types::{parse_task_name, PrimitiveTaskName, TaskCondition};

const SPATIAL_PRIMING: &str = "I wish you to be a spatial relations and collisions judgment machine.";
const STATES_PRIMING: &str = "I wish you to be an object states judgment machine.";
const TASK_INTRO: &str =
    "I will give you a task name describing a manipulator task. The end effector of the manipulator is a gripper.";
const RELEVANT_INSTRUCTION: &str = "First, you should determine what are the relevant objects in this task.";
const RELATION_VOCAB_HEADER: &str = "Here are the spatial relations you can choose from:";
const STATE_VOCAB_HEADER: &str = "Here are the object states you can choose from:";
const COLLISION_INSTRUCTION: &str = "At last, you should present what collisions there might occur during the \
                                     completion of the task. You must only generate collisions that includes the \
                                     relevant objects.";
const EXAMPLES_HEADER: &str = "Here are some examples:";
const QUERY_PREFIX: &str = "Q: Task name: ";

fn pre_post_instruction(what: &str) -> String {
    format!(
        "Then, you should present what {what} these objects should have before (pre-conditions) and after \
         (post-conditions) the task is processed.\nKeep in mind that before the task is processed, the task itself \
         is not satisfied.\nAfter the task is processed, the task is satisfied."
    )
}

fn format_rule(what: &str) -> String {
    format!(
        "Remember to strictly follow the examples' format, and do not generate any pre/post conditions except {what} \
         I gave you to choose from."
    )
}

/// Everything needed to ask for one task condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub kind: ChatKind,
    pub system_priming: String,
    pub relation_vocabulary: Vec<String>,
    pub state_vocabulary: Vec<String>,
    /// Task name and the rendered condition text.
    pub examples: Vec<(String, String)>,
    pub format_rule: String,
    pub query: String,
}

/// Builds the prompt asking for the condition of `task`, using learned
/// records as examples. With `exclude_same_verb`, examples of the query's
/// verb are withheld.
pub fn build_generalization_prompt(
    task: &PrimitiveTaskName,
    examples: &[DemoRecord],
    exclude_same_verb: bool,
) -> PromptBundle {
    let conds: Vec<TaskCondition> = examples.iter().map(|r| r.condition.clone()).collect();
    build_prompt(task, &conds, exclude_same_verb, ChatKind::Combined)
}

/// As [`build_generalization_prompt`], over bare conditions and for a chosen
/// chat kind.
pub fn build_prompt(
    task: &PrimitiveTaskName,
    examples: &[TaskCondition],
    exclude_same_verb: bool,
    kind: ChatKind,
) -> PromptBundle {
    let examples = examples
        .iter()
        .filter(|c| {
            !exclude_same_verb || parse_task_name(&c.task_name).map_or(true, |t| t.verb() != task.verb())
        })
        .map(|c| (c.task_name.clone(), render_condition(&restrict(c, kind))))
        .collect();
    let (priming, relations, states, allowed) = match kind {
        ChatKind::Combined => (SPATIAL_PRIMING, true, true, "spatial relations and object states"),
        ChatKind::Spatial => (SPATIAL_PRIMING, true, false, "spatial relations"),
        ChatKind::States => (STATES_PRIMING, false, true, "object states"),
    };
    let words = |on: bool, v: &[&str]| if on { v.iter().map(|s| s.to_string()).collect() } else { Vec::new() };
    PromptBundle {
        kind,
        system_priming: priming.to_string(),
        relation_vocabulary: words(relations, &RELATION_VOCABULARY),
        state_vocabulary: words(states, &STATE_VOCABULARY),
        examples,
        format_rule: format_rule(allowed),
        query: task.to_string(),
    }
}

impl PromptBundle {
    /// The single user message sent to the model.
    pub fn render(&self) -> String {
        let what = match self.kind {
            ChatKind::Combined => "spatial relations and object states",
            ChatKind::Spatial => "spatial relations",
            ChatKind::States => "object states",
        };
        let mut lines = vec![
            self.system_priming.clone(),
            TASK_INTRO.to_string(),
            RELEVANT_INSTRUCTION.to_string(),
            pre_post_instruction(what),
        ];
        if !self.relation_vocabulary.is_empty() {
            lines.push(RELATION_VOCAB_HEADER.to_string());
            lines.push(self.relation_vocabulary.join(", "));
        }
        if !self.state_vocabulary.is_empty() {
            lines.push(STATE_VOCAB_HEADER.to_string());
            lines.push(self.state_vocabulary.join(", "));
        }
        lines.push(COLLISION_INSTRUCTION.to_string());
        lines.push(EXAMPLES_HEADER.to_string());
        for (_, text) in &self.examples {
            lines.push(text.trim_end().to_string());
            lines.push(String::new());
        }
        lines.push(self.format_rule.clone());
        lines.push(format!("{QUERY_PREFIX}{}", self.query));
        lines.join("\n")
    }
}

/// Reads the queried task name back out of a rendered prompt.
pub fn query_of(prompt: &str) -> Option<&str> {
    prompt.lines().rev().find_map(|l| l.strip_prefix(QUERY_PREFIX)).map(str::trim)
}

/// Reads the chat kind back out of a rendered prompt.
pub fn kind_of(prompt: &str) -> ChatKind {
    match (prompt.contains(RELATION_VOCAB_HEADER), prompt.contains(STATE_VOCAB_HEADER)) {
        (true, true) => ChatKind::Combined,
        (true, false) => ChatKind::Spatial,
        _ => ChatKind::States,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library::ground_truth;

    fn task(s: &str) -> PrimitiveTaskName {
        parse_task_name(s).unwrap()
    }

    #[test]
    fn same_verb_examples_kept_or_dropped() {
        let gt = ground_truth();
        let kept = build_prompt(&task("grasp mug"), &gt, false, ChatKind::Combined);
        assert!(kept.examples.iter().any(|(n, _)| n == "grasp bottle"));
        let dropped = build_prompt(&task("grasp mug"), &gt, true, ChatKind::Combined);
        assert!(dropped.examples.iter().all(|(n, _)| !n.starts_with("grasp ")));
        assert_eq!(dropped.examples.len(), 9);
    }

    #[test]
    fn empty_examples() {
        let b = build_prompt(&task("grasp mug"), &[], false, ChatKind::Combined);
        assert!(b.examples.is_empty());
        let text = b.render();
        assert!(text.contains("Here are some examples:\nRemember to strictly follow"));
    }

    #[test]
    fn query_and_kind_round_trip() {
        for kind in [ChatKind::Combined, ChatKind::Spatial, ChatKind::States] {
            let text = build_prompt(&task("moveinto mug microwave"), &ground_truth(), false, kind).render();
            assert_eq!(query_of(&text), Some("moveinto mug microwave"));
            assert_eq!(kind_of(&text), kind);
        }
    }

    #[test]
    fn spatial_prompt_lists_the_four_relations() {
        let text = build_prompt(&task("grasp mug"), &[], false, ChatKind::Spatial).render();
        assert!(text.contains("Here are the spatial relations you can choose from:\nabove, below, inside, in front of"));
        assert!(text.starts_with("I wish you to be a spatial relations and collisions judgment machine."));
        assert!(!text.contains("object states you can choose"));
    }
}
