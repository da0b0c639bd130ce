//! Rendered prompts compared byte-for-byte with the published prompt texts.

use casa_core::backends::Role;
use casa_core::prompts::{argument_revision, direct_objection, BaselinePrompt, PromptCatalog, SamplingLines};
use casa_core::textproc::{negate, segment_argument, NegationRuleSet, SegmentationRules};
use casa_core::ModelFamily;

const DONALD: &str = "You shouldn't trust Donald's views about politics. He's an alcoholic.";
const DRUG: &str = "My drug test was positive, and positive things are good. So my test result was good.";
const COEDUCATION: &str = "Co-education helps both genders to gel well with each other. It helps them how to behave \
and cooperate and work together. For example, students studying in boy's colleges do not generally know how to talk \
to a female or behave in front of them. On the other hand, females studying in girl's colleges are too shy to face \
boys. Co-education will help to eradicate this kind of demerit in both. Universities giving both genders equal \
opportunities, will prepare them for future challenges and will help in the long run.";

fn rendered(req: &casa_core::backends::GenerationRequest) -> String {
    req.prompt().rendered()
}

#[test]
pub fn claim_extraction_prompt() {
    let claims = segment_argument(DONALD, &SegmentationRules::default()).unwrap();
    let req = PromptCatalog::default().extraction(ModelFamily::Generic, DONALD, &claims);
    let expected = "### Instruction:\n\
Determine which part of the text is the conclusion.\n\
Output the number of the conclusion part first, and give an explanation.\n\
Format:\n\
Conclusion: [number]\n\
Explanation: ...\n\
### Input:\n\
You shouldn't trust Donald's views about politics. He's an alcoholic.\n\
Choices:\n\
1. You shouldn't trust Donald's views about politics.\n\
2. He's an alcoholic.\n\
### Response:\n";
    assert_eq!(rendered(&req), expected);
}

#[test]
pub fn single_premise_sampling_prompt() {
    let rules = NegationRuleSet::default();
    let premise = negate("He's an alcoholic.", &rules).unwrap();
    let conclusion = negate("You shouldn't trust Donald's views about politics.", &rules).unwrap();
    let req = PromptCatalog::default().sampling(ModelFamily::Generic, 3, &premise, &conclusion, &[], SamplingLines::BOTH);
    let expected = "### Instruction:\n\
Generate 3 detailed contexts. Each context is consistent with both the premise and the conclusion. Each context is in one line.\n\
### Input:\n\
Premise: He isn't an alcoholic.\n\
Conclusion: You should trust Donald's views about politics.\n\
### Response:\n";
    assert_eq!(rendered(&req), expected);
}

#[test]
pub fn multi_premise_sampling_prompt() {
    let claims = segment_argument(DRUG, &SegmentationRules::default()).unwrap();
    let rules = NegationRuleSet::default();
    let premise = negate(&claims[0], &rules).unwrap();
    let conclusion = negate(&claims[2], &rules).unwrap();
    let req = PromptCatalog::default().sampling(
        ModelFamily::Generic,
        3,
        &premise,
        &conclusion,
        &[claims[1].clone()],
        SamplingLines::BOTH,
    );
    let expected = "### Instruction:\n\
Generate 3 detailed contexts. Each context contains \"Positive things are good.\" Each context is consistent with both the premise and the conclusion. Each context is in one line.\n\
### Input:\n\
Premise: My drug test wasn't positive.\n\
Conclusion: My test result wasn't good.\n\
### Response:\n";
    assert_eq!(rendered(&req), expected);
}

#[test]
pub fn revision_prompt() {
    let context = "Donald's political views are based on his own personal experiences and observations, which have \
been shaped by his sober perspective.";
    let req = PromptCatalog::default().revision(ModelFamily::Generic, context, "He's an alcoholic.");
    let expected = "### Instruction:\n\
Revise the text to contain the provided statement.\n\
### Input:\n\
Text: Donald's political views are based on his own personal experiences and observations, which have been shaped by his sober perspective.\n\
Statement: He's an alcoholic.\n\
### Response:\n";
    assert_eq!(rendered(&req), expected);
}

#[test]
pub fn four_baseline_prompts() {
    let expected = [
        "### Instruction:\nThis AI is identifying whether statements contain fallacies. The AI responds with 'Valid' or 'Invalid' as appropriate.\n### Input:\nYou shouldn't trust Donald's views about politics. He's an alcoholic.\n### Response:\n",
        "### Instruction:\nDo you think the following argument is 'Valid' or 'Invalid'?\n### Input:\nYou shouldn't trust Donald's views about politics. He's an alcoholic.\n### Response:\n",
        "### Instruction:\nThis AI is identifying whether arguments are sufficient. The AI responds with 'Sufficient' or 'Insufficient' as appropriate.\n### Input:\nYou shouldn't trust Donald's views about politics. He's an alcoholic.\n### Response:\n",
        "### Instruction:\nDo you think the following argument is 'Sufficient' or 'Insufficient'?\n### Input:\nYou shouldn't trust Donald's views about politics. He's an alcoholic.\n### Response:\n",
    ];
    for (prompt, want) in BaselinePrompt::ALL.iter().zip(expected) {
        assert_eq!(rendered(&prompt.request(ModelFamily::Generic, DONALD, None)), want, "prompt {}", prompt.id());
    }
    assert!(rendered(&BaselinePrompt::ALL[0].request(ModelFamily::Generic, DONALD, None))
        .contains("identifying whether statements contain fallacies"));
}

#[test]
pub fn argument_revision_chat() {
    let objection = "However, in single-sex institutions, girls may feel more comfortable expressing themselves and \
participating in class discussions.";
    let req = argument_revision(COEDUCATION, objection);
    let messages = req.messages.as_ref().unwrap();
    assert_eq!(messages.len(), 3);
    assert_eq!(messages[0].role, Role::System);
    assert_eq!(messages[0].content, "You are a helpful and educated assistant.");
    assert_eq!(messages[1].role, Role::User);
    assert_eq!(
        messages[1].content,
        "In each case, we will give you an argument and a model generated objection situation.\n\
Your task is to revise the argument to address the concern raised in the objection situation. Please keep the conclusion and reasonable premises of the original argument unchanged."
    );
    assert_eq!(messages[2].role, Role::User);
    assert_eq!(
        messages[2].content,
        "Argument:\n\
Co-education helps both genders to gel well with each other. It helps them how to behave and cooperate and work together. For example, students studying in boy's colleges do not generally know how to talk to a female or behave in front of them. On the other hand, females studying in girl's colleges are too shy to face boys. Co-education will help to eradicate this kind of demerit in both. Universities giving both genders equal opportunities, will prepare them for future challenges and will help in the long run.\n\
Objection situation:\n\
However, in single-sex institutions, girls may feel more comfortable expressing themselves and participating in class discussions.\n\
Revised argument:"
    );
}

#[test]
pub fn direct_objection_prompt() {
    let req = direct_objection(ModelFamily::Generic, COEDUCATION);
    let expected = "### Instruction:\n\
This AI is identifying whether arguments are sufficient, capturing whether an argument's premises together make it rationally worthy of drawing its conclusion. The AI responds with 'Sufficient' or 'Insufficient' as appropriate. If the argument is insufficient, the AI also generates an objection situation to show the insufficiency.\n\
Format:\n\
Judgement: Sufficient or Insufficient\n\
Objection Situation (if insufficient): Describe a specific situation that challenges the sufficiency of the argument. Do not include any explanation.\n\
### Input:\n\
In a positive point of view, when people without jobs have hand phones that have access to the Internet, they will be able to browse the net for more job opportunities. For example, they can surf the The Star Online's work section to find a job that is suitable for them. With the help of the net, they can also do more research on the work that they have found apart from looking up on how they can prepare themselves for the job. Not only that, the mobile phones can also be used to make calls with the companies in which they would like to work with. In short, if the government provides those without work with a mobile phone, they will be able to find themselves an occupation in order to live and survive.\n\
### Response:\n\
Judgement: Insufficient\n\
Objection Situation: However, having a mobile phone with internet access does not guarantee that they will find a job, as there may be other factors such as a lack of available positions, a mismatch in skills, or a highly competitive job market.\n\
### Input:\n\
Co-education helps both genders to gel well with each other. It helps them how to behave and cooperate and work together. For example, students studying in boy's colleges do not generally know how to talk to a female or behave in front of them. On the other hand, females studying in girl's colleges are too shy to face boys. Co-education will help to eradicate this kind of demerit in both. Universities giving both genders equal opportunities, will prepare them for future challenges and will help in the long run.\n\
### Response:\n";
    let got = rendered(&req);
    assert_eq!(got, expected);
    assert!(got.contains("they will be able to browse the net"));
}

#[test]
fn envelopes() {
    let body = "### Instruction:\nI\n### Input:\nX\n### Response:\n";
    let tulu = casa_core::backends::wrap_prompt(ModelFamily::TuluWrap, "I", "X");
    assert_eq!(tulu, format!("<|user|>\n{body}\n<|assistant|>\n"));
    let llama = casa_core::backends::wrap_prompt(ModelFamily::Llama2Wrap, "I", "X");
    assert!(llama.starts_with("<s>[INST] <<SYS>>\n"));
    assert!(llama.ends_with(&format!("<</SYS>>\n\n{body} [/INST]")));
    assert_eq!(casa_core::backends::wrap_prompt(ModelFamily::Generic, "I", "X"), body);
}

#[test]
pub fn ablation_lines_differ_by_one_line() {
    let cat = PromptCatalog::default();
    let full = rendered(&cat.sampling(ModelFamily::Generic, 3, "p0", "c0", &[], SamplingLines::BOTH));
    let no_x = rendered(&cat.sampling(
        ModelFamily::Generic,
        3,
        "p0",
        "c0",
        &[],
        SamplingLines { premise: false, conclusion: true },
    ));
    let no_y = rendered(&cat.sampling(
        ModelFamily::Generic,
        3,
        "p0",
        "c0",
        &[],
        SamplingLines { premise: true, conclusion: false },
    ));
    fn without<'a>(s: &'a str, prefix: &str) -> Vec<&'a str> {
        s.lines().filter(|l| !l.starts_with(prefix)).collect()
    }
    assert_eq!(no_x.lines().collect::<Vec<_>>(), without(&full, "Premise:"));
    assert_eq!(no_y.lines().collect::<Vec<_>>(), without(&full, "Conclusion:"));
    assert_eq!(full.lines().count(), no_x.lines().count() + 1);
}
