//! Phrase tables that drive the tier templates.
//!
//! The tables live in a TOML document (see `mappings/default.toml`). Loading
//! validates that every Likert level and enum variant has a phrase, so the
//! renderers can index without fallbacks.

use std::collections::BTreeMap;

use serde::Deserialize;

use crate::error::MappingError;
use crate::persona::{BigFiveTrait, Education, Frequency, IncomeBracket, Likert, Race, Sex};

/// The mapping file shipped with the crate.
pub const BUILTIN_MAPPING: &str = include_str!("../mappings/default.toml");

type Table = BTreeMap<String, String>;

#[derive(Debug, Deserialize)]
struct RawMapping {
    version: String,
    framing: RawFraming,
    demographic: RawDemographic,
    behavioral: RawBehavioral,
    psychological: RawPsychological,
    trait_estimation: RawTraitEstimation,
}

#[derive(Debug, Deserialize)]
struct RawFraming {
    persona: String,
    minimal: String,
    stale_marker: String,
}

#[derive(Debug, Deserialize)]
struct RawDemographic {
    age: String,
    income: String,
    sex: Table,
    race: Table,
    education: Table,
    income_brackets: Table,
}

#[derive(Debug, Deserialize)]
struct RawBehavioral {
    health_consciousness: Table,
    overall_health: Table,
    eating_habits: Table,
    activity_hours: Table,
    prescription_count: Table,
    primary_physician: Table,
    physician_visits: Table,
    smoking: Table,
    drinking: Table,
}

#[derive(Debug, Deserialize)]
struct RawPsychological {
    sentence: String,
    agreement: Table,
    traits: Table,
}

#[derive(Debug, Deserialize)]
struct RawTraitEstimation {
    system: String,
    instruction: String,
}

/// Singular/plural phrasing for a count-valued field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountPhrases {
    pub zero: String,
    pub one: String,
    /// Contains `{count}`.
    pub many: String,
}

impl CountPhrases {
    pub fn render(&self, count: f64) -> String {
        if count == 0.0 {
            self.zero.clone()
        } else if count == 1.0 {
            self.one.clone()
        } else {
            self.many.replace("{count}", &format_count(count))
        }
    }
}

fn format_count(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{}", v as i64)
    } else {
        let s = format!("{v:.2}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Validated phrase tables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateMapping {
    pub version: String,
    pub persona_framing: String,
    pub minimal_framing: String,
    pub stale_marker: String,

    /// Contains `{age}`.
    pub age_clause: String,
    /// Contains `{income}`.
    pub income_clause: String,
    sex: Vec<String>,
    race: BTreeMap<Race, String>,
    education: Vec<String>,
    income_brackets: BTreeMap<IncomeBracket, String>,

    health_consciousness: [String; 5],
    overall_health: [String; 5],
    eating_habits: [String; 5],
    pub activity_hours: CountPhrases,
    pub prescription_count: CountPhrases,
    physician_yes: String,
    physician_no: String,
    pub physician_visits: CountPhrases,
    smoking: Vec<String>,
    drinking: Vec<String>,

    /// Contains `{agreement}` and `{trait}`.
    pub trait_sentence: String,
    agreement: [String; 5],
    traits: Vec<String>,

    pub trait_system: String,
    /// Contains `{transcript}`.
    pub trait_instruction: String,
}

fn take(table: &Table, section: &str, key: &str) -> Result<String, MappingError> {
    table.get(key).cloned().ok_or_else(|| MappingError::MissingEntry(format!("{section}.{key}")))
}

fn likert_table(table: &Table, section: &str) -> Result<[String; 5], MappingError> {
    let mut out: [String; 5] = Default::default();
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = take(table, section, &(i + 1).to_string())?;
    }
    Ok(out)
}

fn count_table(table: &Table, section: &str) -> Result<CountPhrases, MappingError> {
    let many = take(table, section, "many")?;
    require_placeholder(&many, &format!("{section}.many"), "{count}")?;
    Ok(CountPhrases { zero: take(table, section, "zero")?, one: take(table, section, "one")?, many })
}

fn require_placeholder(text: &str, entry: &str, placeholder: &str) -> Result<(), MappingError> {
    if text.contains(placeholder) {
        Ok(())
    } else {
        Err(MappingError::MissingPlaceholder { entry: entry.to_string(), placeholder: placeholder.to_string() })
    }
}

impl TemplateMapping {
    /// The mapping compiled into the crate.
    pub fn builtin() -> Self {
        Self::from_toml_str(BUILTIN_MAPPING).expect("builtin mapping is valid")
    }

    pub fn from_toml_str(text: &str) -> Result<Self, MappingError> {
        let raw: RawMapping = toml::from_str(text).map_err(|e| MappingError::Parse(e.to_string()))?;
        let d = &raw.demographic;
        require_placeholder(&d.age, "demographic.age", "{age}")?;
        require_placeholder(&d.income, "demographic.income", "{income}")?;

        let sex = Sex::ALL.iter().map(|s| take(&d.sex, "demographic.sex", s.key())).collect::<Result<_, _>>()?;
        let mut race = BTreeMap::new();
        for r in Race::ALL.iter().filter(|r| **r != Race::PreferNotToAnswer) {
            race.insert(*r, take(&d.race, "demographic.race", r.key())?);
        }
        let education = Education::ALL
            .iter()
            .map(|e| take(&d.education, "demographic.education", e.key()))
            .collect::<Result<_, _>>()?;
        let mut income_brackets = BTreeMap::new();
        for b in IncomeBracket::ALL.iter().filter(|b| b.is_bracket()) {
            income_brackets.insert(*b, take(&d.income_brackets, "demographic.income_brackets", b.key())?);
        }

        let b = &raw.behavioral;
        let freq = |t: &Table, section: &str| -> Result<Vec<String>, MappingError> {
            Frequency::ALL.iter().map(|f| take(t, section, f.key())).collect()
        };

        let p = &raw.psychological;
        require_placeholder(&p.sentence, "psychological.sentence", "{agreement}")?;
        require_placeholder(&p.sentence, "psychological.sentence", "{trait}")?;
        let traits = BigFiveTrait::ALL
            .iter()
            .map(|t| take(&p.traits, "psychological.traits", t.key()))
            .collect::<Result<_, _>>()?;
        require_placeholder(&raw.trait_estimation.instruction, "trait_estimation.instruction", "{transcript}")?;

        Ok(TemplateMapping {
            version: raw.version,
            persona_framing: raw.framing.persona,
            minimal_framing: raw.framing.minimal,
            stale_marker: raw.framing.stale_marker,
            age_clause: d.age.clone(),
            income_clause: d.income.clone(),
            sex,
            race,
            education,
            income_brackets,
            health_consciousness: likert_table(&b.health_consciousness, "behavioral.health_consciousness")?,
            overall_health: likert_table(&b.overall_health, "behavioral.overall_health")?,
            eating_habits: likert_table(&b.eating_habits, "behavioral.eating_habits")?,
            activity_hours: count_table(&b.activity_hours, "behavioral.activity_hours")?,
            prescription_count: count_table(&b.prescription_count, "behavioral.prescription_count")?,
            physician_yes: take(&b.primary_physician, "behavioral.primary_physician", "yes")?,
            physician_no: take(&b.primary_physician, "behavioral.primary_physician", "no")?,
            physician_visits: count_table(&b.physician_visits, "behavioral.physician_visits")?,
            smoking: freq(&b.smoking, "behavioral.smoking")?,
            drinking: freq(&b.drinking, "behavioral.drinking")?,
            trait_sentence: p.sentence.clone(),
            agreement: likert_table(&p.agreement, "psychological.agreement")?,
            traits,
            trait_system: raw.trait_estimation.system,
            trait_instruction: raw.trait_estimation.instruction,
        })
    }

    pub fn sex(&self, s: Sex) -> &str {
        &self.sex[s as usize]
    }

    /// `None` for `PreferNotToAnswer`.
    pub fn race(&self, r: Race) -> Option<&str> {
        self.race.get(&r).map(String::as_str)
    }

    pub fn education(&self, e: Education) -> &str {
        &self.education[e as usize]
    }

    /// `None` for `Unsure` and `PreferNotToAnswer`.
    pub fn income_bracket(&self, b: IncomeBracket) -> Option<&str> {
        self.income_brackets.get(&b).map(String::as_str)
    }

    pub fn health_consciousness(&self, l: Likert) -> &str {
        &self.health_consciousness[l.index()]
    }

    pub fn overall_health(&self, l: Likert) -> &str {
        &self.overall_health[l.index()]
    }

    pub fn eating_habits(&self, l: Likert) -> &str {
        &self.eating_habits[l.index()]
    }

    pub fn primary_physician(&self, has: bool) -> &str {
        if has {
            &self.physician_yes
        } else {
            &self.physician_no
        }
    }

    pub fn smoking(&self, f: Frequency) -> &str {
        &self.smoking[f as usize]
    }

    pub fn drinking(&self, f: Frequency) -> &str {
        &self.drinking[f as usize]
    }

    pub fn agreement(&self, l: Likert) -> &str {
        &self.agreement[l.index()]
    }

    pub fn trait_description(&self, t: BigFiveTrait) -> &str {
        &self.traits[t as usize]
    }
}

impl Default for TemplateMapping {
    fn default() -> Self {
        Self::builtin()
    }
}
