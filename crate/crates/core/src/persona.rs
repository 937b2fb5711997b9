//! Persona records and their three attribute tiers.
//!
//! Raw corpus rows arrive as `field name -> string` maps. [`normalize_record`]
//! parses them into a [`PersonaRecord`], rejecting (never clamping) values that
//! fall outside the declared ranges.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::PersonaError;

/// Raw corpus row: column name to raw cell text.
pub type RawRecord = BTreeMap<String, String>;

/// Column names of the corpus schema.
pub mod fields {
    pub const ID: &str = "id";
    pub const AGE: &str = "age";
    pub const SEX: &str = "sex";
    pub const RACE: &str = "race";
    pub const EDUCATION: &str = "education";
    pub const INCOME: &str = "income";

    pub const PRESCRIPTION_COUNT: &str = "prescription_count";
    pub const HAS_PRIMARY_PHYSICIAN: &str = "has_primary_physician";
    pub const PHYSICIAN_VISITS_2YR: &str = "physician_visits_2yr";
    pub const ACTIVITY_HOURS_PER_WEEK: &str = "activity_hours_per_week";
    pub const EATING_HABITS: &str = "eating_habits";
    pub const SMOKING_FREQUENCY: &str = "smoking_frequency";
    pub const DRINKING_FREQUENCY: &str = "drinking_frequency";
    pub const HEALTH_CONSCIOUSNESS: &str = "health_consciousness";
    pub const OVERALL_HEALTH: &str = "overall_health";

    pub const BIG5_EXTRAVERTED: &str = "big5_extraverted";
    pub const BIG5_AGREEABLE: &str = "big5_agreeable";
    pub const BIG5_CONSCIENTIOUS: &str = "big5_conscientious";
    pub const BIG5_STABLE: &str = "big5_stable";
    pub const BIG5_OPEN: &str = "big5_open";

    pub const TEXT_NUMERACY: &str = "text_numeracy";
    pub const TEXT_ANXIETY: &str = "text_anxiety";
    pub const TEXT_TRUSTPHYS: &str = "text_trustphys";
    pub const TEXT_SUBJECTIVELIT: &str = "text_subjectivelit";

    /// Prefix of gold psychometric score columns, e.g. `score_numeracy`.
    pub const SCORE_PREFIX: &str = "score_";

    /// Every fixed column, in canonical export order.
    pub const FIXED: [&str; 24] = [
        ID,
        AGE,
        SEX,
        RACE,
        EDUCATION,
        INCOME,
        PRESCRIPTION_COUNT,
        HAS_PRIMARY_PHYSICIAN,
        PHYSICIAN_VISITS_2YR,
        ACTIVITY_HOURS_PER_WEEK,
        EATING_HABITS,
        SMOKING_FREQUENCY,
        DRINKING_FREQUENCY,
        HEALTH_CONSCIOUSNESS,
        OVERALL_HEALTH,
        BIG5_EXTRAVERTED,
        BIG5_AGREEABLE,
        BIG5_CONSCIENTIOUS,
        BIG5_STABLE,
        BIG5_OPEN,
        TEXT_NUMERACY,
        TEXT_ANXIETY,
        TEXT_TRUSTPHYS,
        TEXT_SUBJECTIVELIT,
    ];

    /// Columns a corpus header must carry.
    pub const REQUIRED_COLUMNS: [&str; 4] = [ID, AGE, SEX, EDUCATION];
}

fn fold(s: &str) -> String {
    s.chars().filter(|c| !c.is_whitespace()).flat_map(char::to_lowercase).collect()
}

macro_rules! labeled_enum {
    (
        $(#[$meta:meta])*
        $name:ident {
            $( $variant:ident => $label:literal $(| $alias:literal)* ),+ $(,)?
        }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $( $variant ),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$( $name::$variant ),+];

            /// Canonical corpus label.
            pub fn label(self) -> &'static str {
                match self {
                    $( $name::$variant => $label ),+
                }
            }

            /// Variant name, used as the key in mapping tables.
            pub fn key(self) -> &'static str {
                match self {
                    $( $name::$variant => stringify!($variant) ),+
                }
            }

            /// Case- and whitespace-insensitive parse of a label, alias or variant name.
            pub fn parse_label(raw: &str) -> Option<Self> {
                let needle = fold(raw);
                $(
                    if needle == fold($label)
                        || needle == fold(stringify!($variant))
                        $( || needle == fold($alias) )*
                    {
                        return Some($name::$variant);
                    }
                )+
                None
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.label())
            }
        }
    };
}

labeled_enum! {
    Sex {
        Male => "Male" | "m" | "man",
        Female => "Female" | "f" | "woman",
    }
}

labeled_enum! {
    Race {
        White => "White",
        BlackOrAfricanAmerican => "Black or African American" | "black",
        Asian => "Asian",
        NativeAmerican => "Native American or American Indian" | "native american" | "american indian",
        PacificIslander => "Native Hawaiian or Pacific Islander" | "pacific islander",
        Multiracial => "Multiracial or Biracial" | "multiracial" | "biracial",
        Other => "Other",
        PreferNotToAnswer => "Prefer not to answer",
    }
}

labeled_enum! {
    /// Highest completed education, ordered from lowest to highest.
    Education {
        BelowCollege => "Less than college" | "high school or less" | "below college",
        SomeCollege => "Some college",
        CollegeGraduate => "College graduate" | "bachelor's degree",
        Graduate => "Graduate degree" | "postgraduate" | "graduate",
    }
}

labeled_enum! {
    /// Annual household income bracket. The six brackets are ordered; `Unsure`
    /// and `PreferNotToAnswer` sort after them and carry no magnitude.
    IncomeBracket {
        Under20k => "Less than $20,000" | "<$20,000" | "under $20,000",
        From20kTo35k => "$20,000-$34,999",
        From35kTo50k => "$35,000-$49,999",
        From50kTo75k => "$50,000-$74,999",
        From75kTo90k => "$75,000-$89,999",
        Over90k => "$90,000 or more" | ">=$90,000" | "$90,000+",
        Unsure => "Unsure" | "not sure",
        PreferNotToAnswer => "Prefer not to answer",
    }
}

impl IncomeBracket {
    /// Whether the value names an actual income bracket.
    pub fn is_bracket(self) -> bool {
        !matches!(self, IncomeBracket::Unsure | IncomeBracket::PreferNotToAnswer)
    }
}

labeled_enum! {
    /// Frequency scale shared by smoking and drinking.
    Frequency {
        Never => "Never",
        Rarely => "Rarely",
        Occasionally => "Occasionally" | "sometimes",
        Frequently => "Frequently" | "often",
        Daily => "Daily" | "every day",
    }
}

labeled_enum! {
    /// The five personality dimensions, in rendering order.
    BigFiveTrait {
        Extraverted => "Extraverted" | "extraversion",
        Agreeable => "Agreeable" | "agreeableness",
        Conscientious => "Conscientious" | "conscientiousness" | "dependable",
        Stable => "Stable" | "emotional stability" | "emotionallystable",
        Open => "Open" | "openness",
    }
}

impl BigFiveTrait {
    pub fn column(self) -> &'static str {
        match self {
            BigFiveTrait::Extraverted => fields::BIG5_EXTRAVERTED,
            BigFiveTrait::Agreeable => fields::BIG5_AGREEABLE,
            BigFiveTrait::Conscientious => fields::BIG5_CONSCIENTIOUS,
            BigFiveTrait::Stable => fields::BIG5_STABLE,
            BigFiveTrait::Open => fields::BIG5_OPEN,
        }
    }
}

/// Response on a five-point agreement or rating scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Likert(u8);

impl Likert {
    pub const MIN: u8 = 1;
    pub const MAX: u8 = 5;

    pub fn new(value: u8) -> Option<Self> {
        (Self::MIN..=Self::MAX).contains(&value).then_some(Likert(value))
    }

    pub fn value(self) -> u8 {
        self.0
    }

    /// Zero-based position on the scale.
    pub fn index(self) -> usize {
        usize::from(self.0 - 1)
    }
}

impl TryFrom<u8> for Likert {
    type Error = String;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        Likert::new(value).ok_or_else(|| format!("Likert value {value} outside 1..=5"))
    }
}

impl From<Likert> for u8 {
    fn from(l: Likert) -> u8 {
        l.0
    }
}

/// The four free-text psychometric prompts, in question order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QuestionDimension {
    Numeracy,
    Anxiety,
    TrustPhys,
    SubjectiveLit,
}

impl QuestionDimension {
    pub const ALL: [QuestionDimension; 4] = [
        QuestionDimension::Numeracy,
        QuestionDimension::Anxiety,
        QuestionDimension::TrustPhys,
        QuestionDimension::SubjectiveLit,
    ];

    /// Column order used by the report tables (A, N, SL, TP).
    pub const REPORT_ORDER: [QuestionDimension; 4] = [
        QuestionDimension::Anxiety,
        QuestionDimension::Numeracy,
        QuestionDimension::SubjectiveLit,
        QuestionDimension::TrustPhys,
    ];

    /// The question text put to the respondent and to the twin, verbatim.
    pub fn prompt(self) -> &'static str {
        match self {
            QuestionDimension::Numeracy => {
                "In a few sentences, please describe an experience in your life that demonstrated your knowledge of health or medical issues."
            }
            QuestionDimension::Anxiety => {
                "In a few sentences, please describe what makes you feel most anxious or worried when visiting the doctor's office."
            }
            QuestionDimension::TrustPhys => {
                "In a few sentences, please explain the reasons why you trust or distrust your primary care physician. If you do not have a primary care physician, please answer in regard to doctors in general."
            }
            QuestionDimension::SubjectiveLit => {
                "In a few sentences, please describe to what degree do you feel you have the capacity to obtain, process, and understand basic health information and services needed to make appropriate health decisions?"
            }
        }
    }

    /// Short column label used in report tables.
    pub fn abbreviation(self) -> &'static str {
        match self {
            QuestionDimension::Numeracy => "N",
            QuestionDimension::Anxiety => "A",
            QuestionDimension::TrustPhys => "TP",
            QuestionDimension::SubjectiveLit => "SL",
        }
    }

    /// Lowercase identifier used in slugs and corpus columns.
    pub fn slug(self) -> &'static str {
        match self {
            QuestionDimension::Numeracy => "numeracy",
            QuestionDimension::Anxiety => "anxiety",
            QuestionDimension::TrustPhys => "trustphys",
            QuestionDimension::SubjectiveLit => "subjectivelit",
        }
    }

    pub fn from_slug(s: &str) -> Option<Self> {
        let s = s.trim().to_ascii_lowercase();
        QuestionDimension::ALL.into_iter().find(|q| {
            q.slug() == s || q.abbreviation().eq_ignore_ascii_case(&s) || format!("{q:?}").eq_ignore_ascii_case(&s)
        })
    }

    /// Corpus column carrying the gold response.
    pub fn text_column(self) -> &'static str {
        match self {
            QuestionDimension::Numeracy => fields::TEXT_NUMERACY,
            QuestionDimension::Anxiety => fields::TEXT_ANXIETY,
            QuestionDimension::TrustPhys => fields::TEXT_TRUSTPHYS,
            QuestionDimension::SubjectiveLit => fields::TEXT_SUBJECTIVELIT,
        }
    }
}

impl fmt::Display for QuestionDimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemographicTier {
    pub age: u8,
    pub sex: Sex,
    pub race: Race,
    pub education: Education,
    pub income: IncomeBracket,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehavioralTier {
    pub prescription_count: u32,
    pub has_primary_physician: bool,
    pub physician_visits_2yr: u32,
    pub activity_hours_per_week: f64,
    pub eating_habits: Likert,
    pub smoking_frequency: Frequency,
    pub drinking_frequency: Frequency,
    pub health_consciousness: Likert,
    pub overall_health: Likert,
}

/// Self-rated Big Five profile. All five traits are always present.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<BigFiveTrait, Likert>", into = "BTreeMap<BigFiveTrait, Likert>")]
pub struct PsychologicalTier {
    big_five: BTreeMap<BigFiveTrait, Likert>,
}

impl PsychologicalTier {
    pub fn new(big_five: BTreeMap<BigFiveTrait, Likert>) -> Result<Self, PersonaError> {
        for t in BigFiveTrait::ALL {
            if !big_five.contains_key(t) {
                return Err(PersonaError::MissingRequiredField(t.column().to_string()));
            }
        }
        Ok(PsychologicalTier { big_five })
    }

    pub fn from_levels(levels: [Likert; 5]) -> Self {
        PsychologicalTier { big_five: BigFiveTrait::ALL.iter().copied().zip(levels).collect() }
    }

    pub fn get(&self, t: BigFiveTrait) -> Likert {
        self.big_five[&t]
    }

    pub fn traits(&self) -> &BTreeMap<BigFiveTrait, Likert> {
        &self.big_five
    }
}

impl TryFrom<BTreeMap<BigFiveTrait, Likert>> for PsychologicalTier {
    type Error = PersonaError;

    fn try_from(value: BTreeMap<BigFiveTrait, Likert>) -> Result<Self, Self::Error> {
        PsychologicalTier::new(value)
    }
}

impl From<PsychologicalTier> for BTreeMap<BigFiveTrait, Likert> {
    fn from(p: PsychologicalTier) -> Self {
        p.big_five
    }
}

/// One respondent, fully normalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonaRecord {
    pub id: String,
    pub demographic: DemographicTier,
    pub behavioral: BehavioralTier,
    pub psychological: PsychologicalTier,
    #[serde(default)]
    pub gold_responses: BTreeMap<QuestionDimension, String>,
    #[serde(default)]
    pub gold_scores: BTreeMap<String, f64>,
    /// Optional columns that were absent or blank in the raw row.
    #[serde(default)]
    pub missing_fields: BTreeSet<String>,
}

impl PersonaRecord {
    pub fn gold_response(&self, q: QuestionDimension) -> Option<&str> {
        self.gold_responses.get(&q).map(String::as_str)
    }

    /// Inverse of [`normalize_record`]: the canonical raw row for this record.
    /// Fields recorded as missing are written blank.
    pub fn to_raw(&self) -> RawRecord {
        let mut raw = RawRecord::new();
        let mut put = |k: &str, v: String| {
            raw.insert(k.to_string(), v);
        };
        let d = &self.demographic;
        put(fields::ID, self.id.clone());
        put(fields::AGE, d.age.to_string());
        put(fields::SEX, d.sex.label().to_string());
        put(fields::RACE, d.race.label().to_string());
        put(fields::EDUCATION, d.education.label().to_string());
        put(fields::INCOME, d.income.label().to_string());
        let b = &self.behavioral;
        put(fields::PRESCRIPTION_COUNT, b.prescription_count.to_string());
        put(fields::HAS_PRIMARY_PHYSICIAN, if b.has_primary_physician { "yes" } else { "no" }.to_string());
        put(fields::PHYSICIAN_VISITS_2YR, b.physician_visits_2yr.to_string());
        put(fields::ACTIVITY_HOURS_PER_WEEK, b.activity_hours_per_week.to_string());
        put(fields::EATING_HABITS, b.eating_habits.value().to_string());
        put(fields::SMOKING_FREQUENCY, b.smoking_frequency.label().to_string());
        put(fields::DRINKING_FREQUENCY, b.drinking_frequency.label().to_string());
        put(fields::HEALTH_CONSCIOUSNESS, b.health_consciousness.value().to_string());
        put(fields::OVERALL_HEALTH, b.overall_health.value().to_string());
        for t in BigFiveTrait::ALL {
            put(t.column(), self.psychological.get(*t).value().to_string());
        }
        for q in QuestionDimension::ALL {
            put(q.text_column(), self.gold_response(q).unwrap_or("").to_string());
        }
        for (label, score) in &self.gold_scores {
            put(&format!("{}{label}", fields::SCORE_PREFIX), score.to_string());
        }
        for m in &self.missing_fields {
            put(m, String::new());
        }
        raw
    }
}

fn cell<'a>(raw: &'a RawRecord, field: &str) -> Option<&'a str> {
    raw.get(field).map(|s| s.trim()).filter(|s| !s.is_empty())
}

fn required<'a>(raw: &'a RawRecord, field: &str) -> Result<&'a str, PersonaError> {
    cell(raw, field).ok_or_else(|| PersonaError::MissingRequiredField(field.to_string()))
}

fn parse_int(field: &str, value: &str) -> Result<i64, PersonaError> {
    value.parse::<i64>().map_err(|_| PersonaError::InvalidValue { field: field.to_string(), value: value.to_string() })
}

fn parse_count(field: &str, value: &str) -> Result<u32, PersonaError> {
    let n = parse_int(field, value)?;
    u32::try_from(n).map_err(|_| PersonaError::OutOfRange {
        field: field.to_string(),
        value: value.to_string(),
        range: "0..".to_string(),
    })
}

fn parse_likert(field: &str, value: &str) -> Result<Likert, PersonaError> {
    // "3" and "3/5" are both accepted
    let head = match value.split_once('/') {
        Some((n, scale)) if scale.trim() == "5" => n.trim(),
        Some(_) => return Err(PersonaError::InvalidValue { field: field.to_string(), value: value.to_string() }),
        None => value,
    };
    let n = parse_int(field, head)?;
    u8::try_from(n).ok().and_then(Likert::new).ok_or_else(|| PersonaError::OutOfRange {
        field: field.to_string(),
        value: value.to_string(),
        range: "1..=5".to_string(),
    })
}

fn parse_bool(field: &str, value: &str) -> Result<bool, PersonaError> {
    match value.to_ascii_lowercase().as_str() {
        "yes" | "y" | "true" | "1" => Ok(true),
        "no" | "n" | "false" | "0" => Ok(false),
        _ => Err(PersonaError::UnknownEnumValue { field: field.to_string(), value: value.to_string() }),
    }
}

fn parse_enum<T>(field: &str, value: &str, parse: fn(&str) -> Option<T>) -> Result<T, PersonaError> {
    parse(value).ok_or_else(|| PersonaError::UnknownEnumValue { field: field.to_string(), value: value.to_string() })
}

/// Parses and validates one raw corpus row.
///
/// `income` and `race` are optional; when blank they default to
/// `PreferNotToAnswer` and are listed in `missing_fields`. Gold texts and
/// scores are optional. Every other field is required.
pub fn normalize_record(raw: &RawRecord) -> Result<PersonaRecord, PersonaError> {
    let id = required(raw, fields::ID)?.to_string();
    let mut missing = BTreeSet::new();

    let age_raw = required(raw, fields::AGE)?;
    let age = parse_int(fields::AGE, age_raw)?;
    if !(18..=99).contains(&age) {
        return Err(PersonaError::OutOfRange {
            field: fields::AGE.to_string(),
            value: age_raw.to_string(),
            range: "18..=99".to_string(),
        });
    }
    let sex = parse_enum(fields::SEX, required(raw, fields::SEX)?, Sex::parse_label)?;
    let race = match cell(raw, fields::RACE) {
        Some(v) => parse_enum(fields::RACE, v, Race::parse_label)?,
        None => {
            missing.insert(fields::RACE.to_string());
            Race::PreferNotToAnswer
        }
    };
    let education = parse_enum(fields::EDUCATION, required(raw, fields::EDUCATION)?, Education::parse_label)?;
    let income = match cell(raw, fields::INCOME) {
        Some(v) => parse_enum(fields::INCOME, v, IncomeBracket::parse_label)?,
        None => {
            missing.insert(fields::INCOME.to_string());
            IncomeBracket::PreferNotToAnswer
        }
    };
    let demographic = DemographicTier { age: age as u8, sex, race, education, income };

    let hours_raw = required(raw, fields::ACTIVITY_HOURS_PER_WEEK)?;
    let activity_hours_per_week: f64 = hours_raw.parse().map_err(|_| PersonaError::InvalidValue {
        field: fields::ACTIVITY_HOURS_PER_WEEK.to_string(),
        value: hours_raw.to_string(),
    })?;
    if !activity_hours_per_week.is_finite() || activity_hours_per_week < 0.0 {
        return Err(PersonaError::OutOfRange {
            field: fields::ACTIVITY_HOURS_PER_WEEK.to_string(),
            value: hours_raw.to_string(),
            range: "0..".to_string(),
        });
    }
    let likert = |f: &str| required(raw, f).and_then(|v| parse_likert(f, v));
    let freq = |f: &str| required(raw, f).and_then(|v| parse_enum(f, v, Frequency::parse_label));
    let behavioral = BehavioralTier {
        prescription_count: parse_count(fields::PRESCRIPTION_COUNT, required(raw, fields::PRESCRIPTION_COUNT)?)?,
        has_primary_physician: parse_bool(
            fields::HAS_PRIMARY_PHYSICIAN,
            required(raw, fields::HAS_PRIMARY_PHYSICIAN)?,
        )?,
        physician_visits_2yr: parse_count(fields::PHYSICIAN_VISITS_2YR, required(raw, fields::PHYSICIAN_VISITS_2YR)?)?,
        activity_hours_per_week,
        eating_habits: likert(fields::EATING_HABITS)?,
        smoking_frequency: freq(fields::SMOKING_FREQUENCY)?,
        drinking_frequency: freq(fields::DRINKING_FREQUENCY)?,
        health_consciousness: likert(fields::HEALTH_CONSCIOUSNESS)?,
        overall_health: likert(fields::OVERALL_HEALTH)?,
    };

    let mut big_five = BTreeMap::new();
    for t in BigFiveTrait::ALL {
        big_five.insert(*t, likert(t.column())?);
    }
    let psychological = PsychologicalTier::new(big_five)?;

    let mut gold_responses = BTreeMap::new();
    for q in QuestionDimension::ALL {
        match cell(raw, q.text_column()) {
            Some(text) => {
                gold_responses.insert(q, text.to_string());
            }
            None => {
                missing.insert(q.text_column().to_string());
            }
        }
    }

    let mut gold_scores = BTreeMap::new();
    for (k, v) in raw {
        let Some(label) = k.strip_prefix(fields::SCORE_PREFIX) else {
            continue;
        };
        let v = v.trim();
        if v.is_empty() {
            missing.insert(k.clone());
            continue;
        }
        let score: f64 =
            v.parse().map_err(|_| PersonaError::InvalidValue { field: k.clone(), value: v.to_string() })?;
        if !score.is_finite() {
            return Err(PersonaError::InvalidValue { field: k.clone(), value: v.to_string() });
        }
        gold_scores.insert(label.to_string(), score);
    }

    Ok(PersonaRecord {
        id,
        demographic,
        behavioral,
        psychological,
        gold_responses,
        gold_scores,
        missing_fields: missing,
    })
}
