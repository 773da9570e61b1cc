//! Task conditions generated by a chat model from example conditions.

pub mod backend;
pub mod format;
pub mod prompt;

use crate::types::{parse_task_name, PrimitiveTaskName, TaskCondition};

pub use backend::{
    BackendError, ChatBackend, ChatMessage, MockTable, Recording, ReplayLog, RemoteEndpoint, Role, Scripted,
    Throttled, TranscriptEntry, DEFAULT_PARALLEL_REQUESTS,
};
pub use format::{parse_condition, parse_for, render_condition, ChatKind, GenerationOutcome, Verdict};
pub use prompt::{build_generalization_prompt, build_prompt, PromptBundle};

pub const DEFAULT_TEMPERATURE: f64 = 0.0;
pub const DEFAULT_MAX_RETRIES: u32 = 3;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum LlmError {
    #[error("backend unavailable after {attempts} attempts: {last}")]
    BackendUnavailable { attempts: u32, last: BackendError },
    #[error("max_retries must be at least 1")]
    NoAttempts,
    #[error("query `{0}` is not a task name")]
    BadQuery(String),
}

fn retry_note(outcome: &GenerationOutcome) -> String {
    format!(
        "Your answer could not be used: {}. Answer again for the same task and strictly follow the examples' format.",
        outcome.reason.as_deref().unwrap_or("invalid answer")
    )
}

/// Sends the prompt at temperature 0. An unusable answer is sent back with
/// the reason appended, up to `max_retries` attempts in total.
pub fn generate_condition(
    backend: &dyn ChatBackend,
    bundle: &PromptBundle,
    max_retries: u32,
) -> Result<GenerationOutcome, LlmError> {
    if max_retries == 0 {
        return Err(LlmError::NoAttempts);
    }
    let task = parse_task_name(&bundle.query).map_err(|_| LlmError::BadQuery(bundle.query.clone()))?;
    let mut messages = vec![ChatMessage::user(bundle.render())];
    let mut last: Option<GenerationOutcome> = None;
    let mut transport: Option<BackendError> = None;
    for attempt in 1..=max_retries {
        let text = match backend.send(&messages, DEFAULT_TEMPERATURE) {
            Ok(t) => t,
            Err(e) => {
                transport = Some(e);
                continue;
            }
        };
        let mut outcome = parse_for(&text, &task, bundle.kind);
        outcome.attempts = attempt;
        if outcome.is_success() {
            return Ok(outcome);
        }
        messages.push(ChatMessage::assistant(text));
        messages.push(ChatMessage::user(retry_note(&outcome)));
        last = Some(outcome);
    }
    match (last, transport) {
        (Some(mut outcome), _) => {
            outcome.attempts = max_retries;
            Ok(outcome)
        }
        (None, Some(e)) => Err(LlmError::BackendUnavailable {
            attempts: max_retries,
            last: e,
        }),
        (None, None) => unreachable!("at least one attempt is made"),
    }
}

/// How conditions are requested for a task.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GenOptions {
    /// Ask spatial relations and object states in two separate chats.
    pub two_chat: bool,
    /// Withhold examples of the queried verb.
    pub exclude_same_verb: bool,
    pub max_retries: u32,
}

impl Default for GenOptions {
    fn default() -> Self {
        Self {
            two_chat: false,
            exclude_same_verb: false,
            max_retries: DEFAULT_MAX_RETRIES,
        }
    }
}

fn merge(task: &PrimitiveTaskName, spatial: TaskCondition, states: TaskCondition) -> TaskCondition {
    let mut relevant = spatial.relevant_objects;
    for o in states.relevant_objects {
        if !relevant.contains(&o) {
            relevant.push(o);
        }
    }
    let mut collisions = spatial.allowed_collisions;
    for p in states.allowed_collisions {
        if !collisions.contains(&p) {
            collisions.push(p);
        }
    }
    TaskCondition {
        task_name: task.to_string(),
        relevant_objects: relevant,
        pre_conditions: spatial.pre_conditions.into_iter().chain(states.pre_conditions).collect(),
        post_conditions: spatial.post_conditions.into_iter().chain(states.post_conditions).collect(),
        allowed_collisions: collisions,
    }
}

/// Generates the condition of `task` from example conditions, in one chat or
/// in a spatial chat followed by an object-states chat.
pub fn generate_for_task(
    backend: &dyn ChatBackend,
    task: &PrimitiveTaskName,
    examples: &[TaskCondition],
    opts: GenOptions,
) -> Result<GenerationOutcome, LlmError> {
    if !opts.two_chat {
        let bundle = build_prompt(task, examples, opts.exclude_same_verb, ChatKind::Combined);
        return generate_condition(backend, &bundle, opts.max_retries);
    }
    let spatial = generate_condition(
        backend,
        &build_prompt(task, examples, opts.exclude_same_verb, ChatKind::Spatial),
        opts.max_retries,
    )?;
    let Some(sc) = spatial.condition.clone() else {
        return Ok(spatial);
    };
    let states = generate_condition(
        backend,
        &build_prompt(task, examples, opts.exclude_same_verb, ChatKind::States),
        opts.max_retries,
    )?;
    let raw_text = format!("{}\n{}", spatial.raw_text, states.raw_text);
    let attempts = spatial.attempts + states.attempts;
    let Some(st) = states.condition else {
        return Ok(GenerationOutcome {
            raw_text,
            attempts,
            ..states
        });
    };
    let merged = merge(task, sc, st);
    let (verdict, reason, condition) = match merged.validate() {
        Ok(()) => (Verdict::Success, None, Some(merged)),
        Err(e) => (Verdict::SemanticFailure, Some(e.to_string()), None),
    };
    Ok(GenerationOutcome {
        condition,
        raw_text,
        attempts,
        verdict,
        reason,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library::ground_truth;

    fn task(s: &str) -> PrimitiveTaskName {
        parse_task_name(s).unwrap()
    }

    #[test]
    fn mock_answers_every_verb_first_time() {
        let gt = ground_truth();
        let mock = MockTable::from_conditions(&gt);
        for truth in &gt {
            let out = generate_for_task(&mock, &task(&truth.task_name), &gt, GenOptions::default()).unwrap();
            assert_eq!(out.verdict, Verdict::Success, "{}", truth.task_name);
            assert_eq!(out.attempts, 1);
            assert_eq!(out.condition.as_ref(), Some(truth));
        }
    }

    #[test]
    fn two_chat_merge_recovers_the_condition() {
        let gt = ground_truth();
        let mock = MockTable::from_conditions(&gt);
        let opts = GenOptions {
            two_chat: true,
            ..GenOptions::default()
        };
        for truth in &gt {
            let out = generate_for_task(&mock, &task(&truth.task_name), &gt, opts).unwrap();
            let got = out.condition.unwrap();
            let sorted = |v: &[crate::types::ConditionAtom]| {
                let mut v = v.to_vec();
                v.sort();
                v
            };
            assert_eq!(sorted(&got.post_conditions), sorted(&truth.post_conditions));
            assert_eq!(sorted(&got.pre_conditions), sorted(&truth.pre_conditions));
            assert_eq!(out.attempts, 2);
        }
    }

    #[test]
    fn malformed_then_valid() {
        let gt = ground_truth();
        let good = render_condition(&gt[0]);
        let backend = Scripted::new([Ok("no idea".to_string()), Ok(good)]);
        let out = generate_for_task(&backend, &task("grasp bottle"), &gt, GenOptions::default()).unwrap();
        assert_eq!((out.verdict, out.attempts), (Verdict::Success, 2));
    }

    #[test]
    fn persistent_garbage_is_a_verdict() {
        let backend = Scripted::new([Ok("no idea".to_string())]);
        let out = generate_for_task(&backend, &task("grasp bottle"), &[], GenOptions::default()).unwrap();
        assert_eq!((out.verdict, out.attempts), (Verdict::ParseFailure, 3));
    }

    #[test]
    fn network_failures_exhaust_retries() {
        let backend = Scripted::new([Err(BackendError::Transport("refused".into()))]);
        let err = generate_for_task(&backend, &task("grasp bottle"), &[], GenOptions::default()).unwrap_err();
        assert_eq!(
            err,
            LlmError::BackendUnavailable {
                attempts: 3,
                last: BackendError::Transport("refused".into())
            }
        );
    }

    #[test]
    fn zero_retries_rejected() {
        let b = build_prompt(&task("grasp bottle"), &[], false, ChatKind::Combined);
        assert_eq!(generate_condition(&MockTable::new(), &b, 0), Err(LlmError::NoAttempts));
    }
}
