//! Prompt templates for the eleven-task battery.
//!
//! A template is a plain-text skeleton with named slots; rendering fills
//! them from the task definition. The built-in skeleton uses a deliberately
//! neutral cover story (Cause A, Cause B, the effect) — real studies should
//! supply their own story via a template file, because the content of the
//! cover story is part of the stimulus.

use collider_core::data::PromptStyle;
use collider_core::inference::Node;
use collider_core::tasks::{task_definition, TaskId};
use std::path::Path;
use thiserror::Error;

/// Slot markers a skeleton may contain. `{evidence}` and `{query}` are
/// mandatory; the others are replaced when present.
pub const SLOT_COVER_STORY: &str = "{cover_story}";
pub const SLOT_EVIDENCE: &str = "{evidence}";
pub const SLOT_QUERY: &str = "{query}";
pub const SLOT_FORMAT: &str = "{format_instructions}";

const DEFAULT_COVER_STORY: &str = "Consider two causes, Cause A and Cause B, and one effect. \
Either cause, when present, can produce the effect on its own. The effect can also occur by \
itself, without either cause. The two causes occur independently of each other.";

const DEFAULT_SKELETON: &str = "{cover_story}\n\n{evidence}\n\n{query}\n\n{format_instructions}";

const DIRECT_FORMAT: &str = "Answer with a single number from 0 (definitely not) to 100 \
(definitely), and nothing else.";

const COT_FORMAT: &str = "Think through the problem step by step. Then give your final answer \
on its own last line, in exactly the form \"ANSWER: <number>\", where <number> is a number \
from 0 (definitely not) to 100 (definitely).";

/// A renderable prompt skeleton bound to one elicitation style.
#[derive(Debug, Clone)]
pub struct PromptTemplate {
    pub style: PromptStyle,
    skeleton: String,
}

/// A skeleton that cannot elicit the battery.
#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("template is missing the required slot {0}")]
    MissingSlot(&'static str),
    #[error("cannot read template {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl PromptTemplate {
    /// The built-in skeleton for the given style.
    pub fn default_for(style: PromptStyle) -> Self {
        Self {
            style,
            skeleton: DEFAULT_SKELETON.to_string(),
        }
    }

    /// Wraps a user-provided skeleton; it must contain the evidence and
    /// query slots, or every task would render to the same text.
    pub fn from_skeleton(style: PromptStyle, skeleton: String) -> Result<Self, TemplateError> {
        for slot in [SLOT_EVIDENCE, SLOT_QUERY] {
            if !skeleton.contains(slot) {
                return Err(TemplateError::MissingSlot(slot));
            }
        }
        Ok(Self { style, skeleton })
    }

    /// Reads a skeleton from a plain-text file.
    pub fn from_file(style: PromptStyle, path: impl AsRef<Path>) -> Result<Self, TemplateError> {
        let path = path.as_ref();
        let skeleton = std::fs::read_to_string(path).map_err(|source| TemplateError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_skeleton(style, skeleton)
    }

    /// The full prompt text for one task.
    pub fn render(&self, task: TaskId) -> String {
        let def = task_definition(task);
        let format_instructions = match self.style {
            PromptStyle::Direct => DIRECT_FORMAT,
            PromptStyle::Cot => COT_FORMAT,
        };
        self.skeleton
            .replace(SLOT_COVER_STORY, DEFAULT_COVER_STORY)
            .replace(SLOT_EVIDENCE, &evidence_text(def.target, def.evidence))
            .replace(SLOT_QUERY, &query_text(def.target))
            .replace(SLOT_FORMAT, format_instructions)
    }
}

fn node_label(node: Node) -> &'static str {
    match node {
        Node::C1 => "Cause A",
        Node::C2 => "Cause B",
        Node::E => "the effect",
    }
}

fn capitalized(label: &str) -> String {
    let mut chars = label.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// One sentence per non-query node, in graph order: observed nodes get their
/// value, unobserved ones an explicit "no information" statement so the
/// model cannot mistake silence for absence.
fn evidence_text(target: Node, evidence: &[(Node, bool)]) -> String {
    let mut sentences = Vec::new();
    for node in [Node::C1, Node::C2, Node::E] {
        if node == target {
            continue;
        }
        let sentence = match evidence.iter().find(|(n, _)| *n == node) {
            Some(&(_, value)) => format!(
                "{} is {}.",
                capitalized(node_label(node)),
                if value { "present" } else { "absent" }
            ),
            None => format!("You have no information about {}.", node_label(node)),
        };
        sentences.push(sentence);
    }
    sentences.join(" ")
}

fn query_text(target: Node) -> String {
    format!(
        "How likely is it that {} is present?",
        node_label(target)
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_evidence_query_and_format() {
        let t = PromptTemplate::default_for(PromptStyle::Direct);
        let p = t.render(TaskId::VIII);
        assert!(p.contains("Cause B is absent."));
        assert!(p.contains("The effect is present."));
        assert!(p.contains("How likely is it that Cause A is present?"));
        assert!(p.contains("single number"));
        assert!(!p.contains('{'), "unfilled slot in: {p}");
    }

    #[test]
    fn unobserved_nodes_are_named_explicitly() {
        let t = PromptTemplate::default_for(PromptStyle::Direct);
        let p = t.render(TaskId::II);
        assert!(p.contains("Cause A is present."));
        assert!(p.contains("You have no information about Cause B."));
        assert!(p.contains("How likely is it that the effect is present?"));
        // The queried node must never leak into the evidence.
        assert!(!p.contains("The effect is present."));
        assert!(!p.contains("The effect is absent."));

        let marginal = t.render(TaskId::IV);
        assert!(marginal.contains("Cause B is present."));
        assert!(marginal.contains("You have no information about the effect."));
    }

    #[test]
    fn cot_template_demands_the_answer_line() {
        let t = PromptTemplate::default_for(PromptStyle::Cot);
        let p = t.render(TaskId::I);
        assert!(p.contains("ANSWER:"));
        assert!(p.contains("step by step"));
    }

    #[test]
    fn custom_skeletons_need_evidence_and_query_slots() {
        let ok = PromptTemplate::from_skeleton(
            PromptStyle::Direct,
            "My own story. {evidence} {query}".to_string(),
        );
        assert!(ok.is_ok());
        // A skeleton without the format slot keeps its own instructions.
        let p = ok.unwrap().render(TaskId::V);
        assert!(p.starts_with("My own story."));

        let missing = PromptTemplate::from_skeleton(
            PromptStyle::Direct,
            "{evidence} but no question".to_string(),
        );
        assert!(matches!(
            missing,
            Err(TemplateError::MissingSlot(SLOT_QUERY))
        ));
    }

    #[test]
    fn all_eleven_prompts_are_distinct() {
        let t = PromptTemplate::default_for(PromptStyle::Direct);
        let mut prompts: Vec<String> = TaskId::ALL.into_iter().map(|id| t.render(id)).collect();
        prompts.sort();
        prompts.dedup();
        assert_eq!(prompts.len(), 11);
    }
}
