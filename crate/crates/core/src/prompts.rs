//! Prompt templates for every LLM call the pipeline, the baselines and the
//! writing assistant make.
//!
//! Templates use `{name}` placeholders. The defaults reproduce the published
//! prompts; a catalog can be loaded from JSON to experiment with wording.

use serde::{Deserialize, Serialize};

use crate::backends::{ChatMessage, GenerationRequest, Role, Shot};
use crate::error::{CasaError, Result};
use crate::textproc::as_sentence;
use crate::types::{Label, ModelFamily};

fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (name, value) in vars {
        out = out.replace(&format!("{{{name}}}"), value);
    }
    out
}

/// Which condition lines appear in a sampling prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplingLines {
    pub premise: bool,
    pub conclusion: bool,
}

impl SamplingLines {
    pub const BOTH: SamplingLines = SamplingLines { premise: true, conclusion: true };
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptCatalog {
    pub extraction_instruction: String,
    pub sampling_instruction: String,
    /// Inserted after the first sentence of the sampling instruction when other
    /// premises must hold in every context.
    pub sampling_pinned_clause: String,
    pub revision_instruction: String,
    pub negation_instruction: String,
}

impl Default for PromptCatalog {
    fn default() -> Self {
        PromptCatalog {
            extraction_instruction: "Determine which part of the text is the conclusion.\n\
                Output the number of the conclusion part first, and give an explanation.\n\
                Format:\nConclusion: [number]\nExplanation: ..."
                .into(),
            sampling_instruction: "Generate {n} detailed contexts.{pinned} Each context is consistent with both the \
                premise and the conclusion. Each context is in one line."
                .into(),
            sampling_pinned_clause: " Each context contains \"{premises}\"".into(),
            revision_instruction: "Revise the text to contain the provided statement.".into(),
            negation_instruction: "Negate the following statement. Output only the negated statement.".into(),
        }
    }
}

impl PromptCatalog {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Claim extraction: the raw argument followed by numbered choices.
    pub fn extraction(&self, family: ModelFamily, text: &str, claims: &[String]) -> GenerationRequest {
        let mut input = format!("{}\nChoices:", text.trim());
        for (i, claim) in claims.iter().enumerate() {
            input.push_str(&format!("\n{}. {}", i + 1, claim));
        }
        GenerationRequest::new(family, self.extraction_instruction.clone(), input)
    }

    /// Context sampling. Claims are rendered as sentences; `others` are pinned
    /// into the instruction.
    pub fn sampling(
        &self,
        family: ModelFamily,
        n: usize,
        premise: &str,
        conclusion: &str,
        others: &[String],
        lines: SamplingLines,
    ) -> GenerationRequest {
        let pinned = if others.is_empty() {
            String::new()
        } else {
            let joined = others.iter().map(|o| as_sentence(o)).collect::<Vec<_>>().join(" ");
            fill(&self.sampling_pinned_clause, &[("premises", &joined)])
        };
        let instruction = fill(&self.sampling_instruction, &[("n", &n.to_string()), ("pinned", &pinned)]);
        let mut input = Vec::new();
        if lines.premise {
            input.push(format!("Premise: {}", as_sentence(premise)));
        }
        if lines.conclusion {
            input.push(format!("Conclusion: {}", as_sentence(conclusion)));
        }
        GenerationRequest::new(family, instruction, input.join("\n"))
    }

    pub fn revision(&self, family: ModelFamily, context: &str, statement: &str) -> GenerationRequest {
        GenerationRequest::new(
            family,
            self.revision_instruction.clone(),
            format!("Text: {}\nStatement: {}", context.trim(), statement.trim()),
        )
    }

    pub fn negation(&self, family: ModelFamily, claim: &str) -> GenerationRequest {
        GenerationRequest::new(family, self.negation_instruction.clone(), claim.trim())
    }
}

/// The four zero-shot classification prompt forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BaselinePrompt(u8);

impl BaselinePrompt {
    pub const ALL: [BaselinePrompt; 4] = [BaselinePrompt(1), BaselinePrompt(2), BaselinePrompt(3), BaselinePrompt(4)];

    pub fn new(id: u8) -> Result<Self> {
        if (1..=4).contains(&id) {
            Ok(BaselinePrompt(id))
        } else {
            Err(CasaError::InvalidInput(format!("prompt id must be 1-4, got {id}")))
        }
    }

    pub fn id(self) -> u8 {
        self.0
    }

    pub fn instruction(self) -> &'static str {
        match self.0 {
            1 => "This AI is identifying whether statements contain fallacies. The AI responds with 'Valid' or \
                  'Invalid' as appropriate.",
            2 => "Do you think the following argument is 'Valid' or 'Invalid'?",
            3 => "This AI is identifying whether arguments are sufficient. The AI responds with 'Sufficient' or \
                  'Insufficient' as appropriate.",
            _ => "Do you think the following argument is 'Sufficient' or 'Insufficient'?",
        }
    }

    /// Answer words for (sufficient, insufficient).
    pub fn answers(self) -> (&'static str, &'static str) {
        if self.0 <= 2 {
            ("Valid", "Invalid")
        } else {
            ("Sufficient", "Insufficient")
        }
    }

    pub fn answer(self, label: Label) -> &'static str {
        match label {
            Label::Sufficient => self.answers().0,
            Label::Insufficient => self.answers().1,
        }
    }

    /// Zero-shot prompt when `example` is `None`, one-shot otherwise.
    pub fn request(self, family: ModelFamily, text: &str, example: Option<(&str, Label)>) -> GenerationRequest {
        let shots = example
            .map(|(t, label)| vec![Shot { input: t.trim().to_string(), response: self.answer(label).to_string() }])
            .unwrap_or_default();
        GenerationRequest::new(family, self.instruction(), text.trim()).with_shots(shots)
    }
}

pub const REVISION_SYSTEM: &str = "You are a helpful and educated assistant.";

pub const REVISION_TASK: &str = "In each case, we will give you an argument and a model generated objection \
situation.\nYour task is to revise the argument to address the concern raised in the objection situation. Please \
keep the conclusion and reasonable premises of the original argument unchanged.";

/// Two-turn chat asking for an argument revision that answers an objection.
pub fn argument_revision(argument: &str, objection: &str) -> GenerationRequest {
    GenerationRequest::chat(vec![
        ChatMessage::new(Role::System, REVISION_SYSTEM),
        ChatMessage::new(Role::User, REVISION_TASK),
        ChatMessage::new(
            Role::User,
            format!("Argument:\n{}\nObjection situation:\n{}\nRevised argument:", argument.trim(), objection.trim()),
        ),
    ])
}

pub const OBJECTION_INSTRUCTION: &str = "This AI is identifying whether arguments are sufficient, capturing whether \
an argument's premises together make it rationally worthy of drawing its conclusion. The AI responds with \
'Sufficient' or 'Insufficient' as appropriate. If the argument is insufficient, the AI also generates an objection \
situation to show the insufficiency.\nFormat:\nJudgement: Sufficient or Insufficient\nObjection Situation (if \
insufficient): Describe a specific situation that challenges the sufficiency of the argument. Do not include any \
explanation.";

pub const OBJECTION_EXAMPLE_INPUT: &str = "In a positive point of view, when people without jobs have hand phones \
that have access to the Internet, they will be able to browse the net for more job opportunities. For example, they \
can surf the The Star Online's work section to find a job that is suitable for them. With the help of the net, they \
can also do more research on the work that they have found apart from looking up on how they can prepare themselves \
for the job. Not only that, the mobile phones can also be used to make calls with the companies in which they would \
like to work with. In short, if the government provides those without work with a mobile phone, they will be able \
to find themselves an occupation in order to live and survive.";

pub const OBJECTION_EXAMPLE_RESPONSE: &str = "Judgement: Insufficient\nObjection Situation: However, having a mobile \
phone with internet access does not guarantee that they will find a job, as there may be other factors such as a \
lack of available positions, a mismatch in skills, or a highly competitive job market.";

/// One-shot prompt asking for a judgement and, if insufficient, an objection.
pub fn direct_objection(family: ModelFamily, argument: &str) -> GenerationRequest {
    GenerationRequest::new(family, OBJECTION_INSTRUCTION, argument.trim()).with_shots(vec![Shot {
        input: OBJECTION_EXAMPLE_INPUT.into(),
        response: OBJECTION_EXAMPLE_RESPONSE.into(),
    }])
}
