use serde::{Deserialize, Serialize};

use crate::types::ModelFamily;

/// System turn used for the Llama-2 chat envelope.
pub const LLAMA2_SYSTEM_PROMPT: &str = "You are a helpful, respectful and honest assistant. Always answer as \
helpfully as possible, while being safe.  Your answers should not include any harmful, unethical, racist, sexist, \
toxic, dangerous, or illegal content. Please ensure that your responses are socially unbiased and positive in \
nature.\n\nIf a question does not make any sense, or is not factually coherent, explain why instead of answering \
something not correct. If you don't know the answer to a question, please don't share false information.";

/// A worked example placed between the instruction and the query.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shot {
    pub input: String,
    pub response: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        ChatMessage { role, content: content.into() }
    }
}

/// `### Instruction / ### Input / ### Response` body, with optional worked
/// examples before the query.
pub fn render_body(instruction: &str, shots: &[Shot], input: &str) -> String {
    let mut out = format!("### Instruction:\n{instruction}\n");
    for shot in shots {
        out.push_str(&format!("### Input:\n{}\n### Response:\n{}\n", shot.input, shot.response));
    }
    out.push_str(&format!("### Input:\n{input}\n### Response:\n"));
    out
}

/// Wraps a rendered body in the envelope the model family was tuned on.
pub fn envelope(family: ModelFamily, body: &str) -> String {
    match family {
        ModelFamily::Generic => body.to_string(),
        ModelFamily::TuluWrap => format!("<|user|>\n{body}\n<|assistant|>\n"),
        ModelFamily::Llama2Wrap => {
            format!("<s>[INST] <<SYS>>\n{LLAMA2_SYSTEM_PROMPT}\n<</SYS>>\n\n{body} [/INST]")
        }
    }
}

pub fn wrap_prompt(family: ModelFamily, instruction: &str, input: &str) -> String {
    envelope(family, &render_body(instruction, &[], input))
}

/// Flat transcript of a chat, used for cache keys and mock matching.
pub fn render_chat(messages: &[ChatMessage]) -> String {
    messages
        .iter()
        .map(|m| {
            let role = match m.role {
                Role::System => "System",
                Role::User => "User",
                Role::Assistant => "Assistant",
            };
            format!("{role}: {}", m.content)
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generic_layout() {
        assert_eq!(
            wrap_prompt(ModelFamily::Generic, "I", "X"),
            "### Instruction:\nI\n### Input:\nX\n### Response:\n"
        );
        assert_eq!(wrap_prompt(ModelFamily::Generic, "", ""), "### Instruction:\n\n### Input:\n\n### Response:\n");
    }

    #[test]
    fn tulu_envelope() {
        assert_eq!(
            wrap_prompt(ModelFamily::TuluWrap, "I", "X"),
            "<|user|>\n### Instruction:\nI\n### Input:\nX\n### Response:\n\n<|assistant|>\n"
        );
    }

    #[test]
    fn llama2_envelope() {
        let p = wrap_prompt(ModelFamily::Llama2Wrap, "I", "X");
        assert!(p.starts_with("<s>[INST] <<SYS>>\nYou are a helpful, respectful and honest assistant."));
        assert!(p.ends_with("<</SYS>>\n\n### Instruction:\nI\n### Input:\nX\n### Response:\n [/INST]"));
    }

    #[test]
    fn shots_precede_query() {
        let body = render_body("I", &[Shot { input: "E".into(), response: "R".into() }], "Q");
        assert_eq!(body, "### Instruction:\nI\n### Input:\nE\n### Response:\nR\n### Input:\nQ\n### Response:\n");
    }
}
