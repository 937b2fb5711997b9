//! The eight information-availability conditions and their plans.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::TwinError;
use crate::persona::{PersonaRecord, QuestionDimension};

/// Which tiers and gold answers a twin receives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Condition {
    /// Tiers plus all four gold answers.
    PersonaOracle,
    /// Tiers plus three gold answers; the named one is withheld and asked.
    PersonaFewShot(QuestionDimension),
    /// Tiers only.
    PersonaZeroShot,
    /// All four gold answers, no tiers.
    FewShotOracle,
    /// Nothing.
    ZeroShot,
}

impl Condition {
    pub const ALL: [Condition; 8] = [
        Condition::PersonaOracle,
        Condition::PersonaFewShot(QuestionDimension::Numeracy),
        Condition::PersonaFewShot(QuestionDimension::Anxiety),
        Condition::PersonaFewShot(QuestionDimension::TrustPhys),
        Condition::PersonaFewShot(QuestionDimension::SubjectiveLit),
        Condition::PersonaZeroShot,
        Condition::FewShotOracle,
        Condition::ZeroShot,
    ];

    pub fn slug(self) -> String {
        match self {
            Condition::PersonaOracle => "persona-oracle".into(),
            Condition::PersonaFewShot(q) => format!("persona-few-shot-{}", q.slug()),
            Condition::PersonaZeroShot => "persona-zero-shot".into(),
            Condition::FewShotOracle => "few-shot-oracle".into(),
            Condition::ZeroShot => "zero-shot".into(),
        }
    }

    pub fn group(self) -> ConditionGroup {
        match self {
            Condition::PersonaOracle => ConditionGroup::PersonaOracle,
            Condition::PersonaFewShot(_) => ConditionGroup::PersonaFewShot,
            Condition::PersonaZeroShot => ConditionGroup::PersonaZeroShot,
            Condition::FewShotOracle => ConditionGroup::FewShotOracle,
            Condition::ZeroShot => ConditionGroup::ZeroShot,
        }
    }

    pub fn includes_tiers(self) -> bool {
        matches!(self, Condition::PersonaOracle | Condition::PersonaFewShot(_) | Condition::PersonaZeroShot)
    }

    /// Gold answers fed to the twin, in question order.
    pub fn revealed(self) -> Vec<QuestionDimension> {
        match self {
            Condition::PersonaOracle | Condition::FewShotOracle => QuestionDimension::ALL.to_vec(),
            Condition::PersonaFewShot(withheld) => {
                QuestionDimension::ALL.into_iter().filter(|q| *q != withheld).collect()
            }
            Condition::PersonaZeroShot | Condition::ZeroShot => Vec::new(),
        }
    }

    /// Questions the twin is asked to answer.
    pub fn targets(self) -> Vec<QuestionDimension> {
        match self {
            Condition::PersonaFewShot(withheld) => vec![withheld],
            _ => QuestionDimension::ALL.to_vec(),
        }
    }

    /// The dimension whose gold answer must never reach the prompt.
    pub fn withheld(self) -> Option<QuestionDimension> {
        match self {
            Condition::PersonaFewShot(q) => Some(q),
            _ => None,
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.slug())
    }
}

impl FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let needle = s.trim().to_ascii_lowercase().replace('_', "-");
        Condition::ALL.into_iter().find(|c| c.slug() == needle).ok_or_else(|| {
            let known: Vec<_> = Condition::ALL.iter().map(|c| c.slug()).collect();
            format!("unknown condition `{s}` (expected one of: {})", known.join(", "))
        })
    }
}

impl TryFrom<String> for Condition {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Condition> for String {
    fn from(c: Condition) -> String {
        c.slug()
    }
}

/// Report rows: the four few-shot variants collapse into one row whose cell
/// for question `q` comes from the variant that withheld `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConditionGroup {
    PersonaOracle,
    FewShotOracle,
    PersonaFewShot,
    PersonaZeroShot,
    ZeroShot,
}

impl ConditionGroup {
    /// Row order of the report tables.
    pub const ALL: [ConditionGroup; 5] = [
        ConditionGroup::PersonaOracle,
        ConditionGroup::FewShotOracle,
        ConditionGroup::PersonaFewShot,
        ConditionGroup::PersonaZeroShot,
        ConditionGroup::ZeroShot,
    ];

    pub fn display_name(self) -> &'static str {
        match self {
            ConditionGroup::PersonaOracle => "Persona Oracle",
            ConditionGroup::FewShotOracle => "Few-shot Oracle",
            ConditionGroup::PersonaFewShot => "Persona Few-shot",
            ConditionGroup::PersonaZeroShot => "Persona Zero-shot",
            ConditionGroup::ZeroShot => "Zero-shot",
        }
    }

    /// The condition that answers question `q` on behalf of this group.
    pub fn condition_for(self, q: QuestionDimension) -> Condition {
        match self {
            ConditionGroup::PersonaOracle => Condition::PersonaOracle,
            ConditionGroup::FewShotOracle => Condition::FewShotOracle,
            ConditionGroup::PersonaFewShot => Condition::PersonaFewShot(q),
            ConditionGroup::PersonaZeroShot => Condition::PersonaZeroShot,
            ConditionGroup::ZeroShot => Condition::ZeroShot,
        }
    }
}

impl fmt::Display for ConditionGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConditionPlan {
    pub condition: Condition,
    pub include_tiers: bool,
    pub revealed: Vec<QuestionDimension>,
    pub targets: Vec<QuestionDimension>,
}

/// Resolves a condition against one persona, checking that every gold answer
/// the condition reveals is actually on record.
pub fn plan_condition(condition: Condition, record: &PersonaRecord) -> Result<ConditionPlan, TwinError> {
    let revealed = condition.revealed();
    if let Some(q) = revealed.iter().find(|q| record.gold_response(**q).is_none()) {
        return Err(TwinError::MissingGoldResponse { persona_id: record.id.clone(), question: *q });
    }
    Ok(ConditionPlan { condition, include_tiers: condition.includes_tiers(), revealed, targets: condition.targets() })
}
