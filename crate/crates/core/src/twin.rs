//! Digital-twin state and the conversation update loop.

use serde::{Deserialize, Serialize};

use crate::condition::{Condition, ConditionPlan};
use crate::error::TwinError;
use crate::mapping::TemplateMapping;
use crate::persona::{PersonaRecord, QuestionDimension};
use crate::template::{
    compose_prompt, render_behavioral_template, render_demographic_template, render_psychological_template,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Provenance {
    RealUser,
    Generated,
}

/// Marker on a turn that a later turn for the same question superseded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StalenessTag {
    #[serde(rename = "possible past data")]
    PossiblePastData,
}

impl StalenessTag {
    pub fn as_str(self) -> &'static str {
        "possible past data"
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversationTurn {
    pub question: QuestionDimension,
    pub response: String,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub staleness_tag: Option<StalenessTag>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TierPrompts {
    pub demographic: Option<String>,
    pub behavioral: Option<String>,
    pub psychological: Option<String>,
}

impl TierPrompts {
    pub fn compose(&self) -> String {
        compose_prompt(self.demographic.as_deref(), self.behavioral.as_deref(), self.psychological.as_deref())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwinState {
    pub persona_id: String,
    pub condition: Condition,
    pub tier_prompts: TierPrompts,
    pub history: Vec<ConversationTurn>,
    /// Number of updates applied since initialization.
    pub iteration: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

/// One wire-level chat message.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::Assistant, content: content.into() }
    }
}

/// Fresh twin: tier prompts rendered when the plan includes tiers, empty history.
pub fn init_twin(plan: &ConditionPlan, record: &PersonaRecord, mapping: &TemplateMapping) -> TwinState {
    let tier_prompts = if plan.include_tiers {
        TierPrompts {
            demographic: Some(render_demographic_template(&record.demographic, mapping)),
            behavioral: Some(render_behavioral_template(&record.behavioral, mapping)),
            psychological: Some(render_psychological_template(&record.psychological, mapping)),
        }
    } else {
        TierPrompts::default()
    };
    TwinState {
        persona_id: record.id.clone(),
        condition: plan.condition,
        tier_prompts,
        history: Vec::new(),
        iteration: 0,
    }
}

/// Appends one answered question. Earlier turns for the same question stay in
/// the history but are tagged as possible past data.
pub fn update_twin(
    state: &TwinState,
    question: QuestionDimension,
    response: &str,
    provenance: Provenance,
) -> Result<TwinState, TwinError> {
    if response.trim().is_empty() {
        return Err(TwinError::EmptyResponse);
    }
    let mut next = state.clone();
    for turn in next.history.iter_mut().filter(|t| t.question == question) {
        turn.staleness_tag = Some(StalenessTag::PossiblePastData);
    }
    next.history.push(ConversationTurn { question, response: response.to_string(), provenance, staleness_tag: None });
    next.iteration += 1;
    Ok(next)
}

/// Initializes the twin and feeds it every revealed gold answer in order.
pub fn materialize_twin(
    plan: &ConditionPlan,
    record: &PersonaRecord,
    mapping: &TemplateMapping,
) -> Result<TwinState, TwinError> {
    let mut state = init_twin(plan, record, mapping);
    for q in &plan.revealed {
        let answer = record
            .gold_response(*q)
            .ok_or_else(|| TwinError::MissingGoldResponse { persona_id: record.id.clone(), question: *q })?;
        state = update_twin(&state, *q, answer, Provenance::RealUser)?;
    }
    Ok(state)
}

/// Serializes the twin into a chat transcript ending with the target question.
///
/// Layout: one system message (composed tier prompt plus role framing), one
/// user/assistant pair per history turn, then the target prompt verbatim.
pub fn build_chat_messages(
    state: &TwinState,
    target: QuestionDimension,
    mapping: &TemplateMapping,
) -> Result<Vec<ChatMessage>, TwinError> {
    if !state.condition.targets().contains(&target) {
        return Err(TwinError::TargetNotPlanned { condition: state.condition.slug(), target });
    }
    let persona = state.tier_prompts.compose();
    let system = if persona.is_empty() {
        mapping.minimal_framing.clone()
    } else {
        format!("{persona}\n\n{}", mapping.persona_framing)
    };

    let mut messages = Vec::with_capacity(2 + 2 * state.history.len());
    messages.push(ChatMessage::system(system));
    for turn in &state.history {
        messages.push(ChatMessage::user(turn.question.prompt()));
        let answer = match turn.staleness_tag {
            Some(_) => format!("{} {}", mapping.stale_marker, turn.response),
            None => turn.response.clone(),
        };
        messages.push(ChatMessage::assistant(answer));
    }
    messages.push(ChatMessage::user(target.prompt()));
    Ok(messages)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::condition::plan_condition;
    use crate::persona::normalize_record;
    use crate::persona::tests::table7_raw;
    use QuestionDimension::*;

    fn record() -> PersonaRecord {
        normalize_record(&table7_raw()).unwrap()
    }

    fn twin(c: Condition) -> TwinState {
        let r = record();
        materialize_twin(&plan_condition(c, &r).unwrap(), &r, &TemplateMapping::builtin()).unwrap()
    }

    #[test]
    fn init_respects_tier_flag() {
        let r = record();
        let m = TemplateMapping::builtin();
        let oracle = init_twin(&plan_condition(Condition::PersonaOracle, &r).unwrap(), &r, &m);
        assert!(oracle.tier_prompts.demographic.is_some());
        assert!(oracle.tier_prompts.behavioral.is_some());
        assert!(oracle.tier_prompts.psychological.is_some());
        assert!(oracle.history.is_empty());
        assert_eq!(oracle.iteration, 0);

        let zero = init_twin(&plan_condition(Condition::ZeroShot, &r).unwrap(), &r, &m);
        assert_eq!(zero.tier_prompts, TierPrompts::default());

        let again = init_twin(&plan_condition(Condition::PersonaOracle, &r).unwrap(), &r, &m);
        assert_eq!(oracle, again);
    }

    #[test]
    fn first_update_has_no_tags() {
        let s = twin(Condition::ZeroShot);
        let s = update_twin(&s, Anxiety, "Needles.", Provenance::RealUser).unwrap();
        assert_eq!(s.history.len(), 1);
        assert!(s.history[0].staleness_tag.is_none());
    }

    #[test]
    fn later_turn_marks_earlier_one_stale() {
        let s = twin(Condition::ZeroShot);
        let s = update_twin(&s, Numeracy, "I don't smoke", Provenance::RealUser).unwrap();
        let s = update_twin(&s, Numeracy, "I smoke occasionally", Provenance::RealUser).unwrap();
        assert_eq!(s.history.len(), 2);
        assert_eq!(s.history[0].response, "I don't smoke");
        assert_eq!(s.history[0].staleness_tag, Some(StalenessTag::PossiblePastData));
        assert_eq!(s.history[1].staleness_tag, None);

        let msgs = build_chat_messages(&s, Anxiety, &TemplateMapping::builtin()).unwrap();
        assert_eq!(msgs[2].content, "[possible past data] I don't smoke");
        assert_eq!(msgs[4].content, "I smoke occasionally");
    }

    #[test]
    fn sequential_updates_keep_call_order() {
        let s0 = twin(Condition::ZeroShot);
        let calls = [(TrustPhys, "t"), (Numeracy, "n"), (Anxiety, "a")];
        let mut s = s0;
        for (q, r) in calls {
            let prev = s.history.clone();
            s = update_twin(&s, q, r, Provenance::Generated).unwrap();
            assert_eq!(&s.history[..prev.len()], &prev[..]);
        }
        assert_eq!(s.iteration, 3);
        let order: Vec<_> = s.history.iter().map(|t| (t.question, t.response.as_str())).collect();
        assert_eq!(order, calls.to_vec());
    }

    #[test]
    fn empty_response_rejected() {
        let s = twin(Condition::ZeroShot);
        assert_eq!(update_twin(&s, Anxiety, "  ", Provenance::RealUser), Err(TwinError::EmptyResponse));
    }

    #[test]
    fn zero_shot_messages() {
        let m = TemplateMapping::builtin();
        let msgs = build_chat_messages(&twin(Condition::ZeroShot), Anxiety, &m).unwrap();
        assert_eq!(msgs.len(), 2);
        assert_eq!(msgs[0], ChatMessage::system(m.minimal_framing.clone()));
        assert_eq!(msgs[1].role, Role::User);
        assert_eq!(
            msgs[1].content,
            "In a few sentences, please describe what makes you feel most anxious or worried when visiting the doctor's office."
        );
    }

    #[test]
    fn few_shot_messages_exclude_withheld_answer() {
        let r = record();
        let m = TemplateMapping::builtin();
        let msgs = build_chat_messages(&twin(Condition::PersonaFewShot(Anxiety)), Anxiety, &m).unwrap();
        assert_eq!(msgs.len(), 8);
        assert!(msgs[0].content.starts_with("You are 25 years old"));
        assert!(msgs[0].content.ends_with(&m.persona_framing));
        let revealed: Vec<_> = msgs[1..7].chunks(2).map(|p| p[0].content.as_str()).collect();
        assert_eq!(revealed, vec![Numeracy.prompt(), TrustPhys.prompt(), SubjectiveLit.prompt()]);
        assert_eq!(msgs[7].content, Anxiety.prompt());
        let gold = r.gold_response(Anxiety).unwrap();
        assert!(msgs.iter().all(|msg| !msg.content.contains(gold)));
    }

    #[test]
    fn untargeted_question_is_rejected() {
        let m = TemplateMapping::builtin();
        assert!(matches!(
            build_chat_messages(&twin(Condition::PersonaFewShot(Anxiety)), Numeracy, &m),
            Err(TwinError::TargetNotPlanned { .. })
        ));
    }

    #[test]
    fn role_serializes_lowercase() {
        let json = serde_json::to_string(&ChatMessage::assistant("x")).unwrap();
        assert_eq!(json, r#"{"role":"assistant","content":"x"}"#);
    }
}
