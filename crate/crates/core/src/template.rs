//! Tier templates: deterministic second-person text for each attribute tier.

use crate::mapping::TemplateMapping;
use crate::persona::{BehavioralTier, BigFiveTrait, DemographicTier, Likert, PsychologicalTier};

/// Age, sex and race in one sentence; education and income in a second.
/// `PreferNotToAnswer` race and non-bracket income values are left out.
pub fn render_demographic_template(d: &DemographicTier, m: &TemplateMapping) -> String {
    let mut first = m.age_clause.replace("{age}", &d.age.to_string());
    first.push_str(", ");
    first.push_str(m.sex(d.sex));
    if let Some(race) = m.race(d.race) {
        first.push_str(", ");
        first.push_str(race);
    }
    first.push('.');

    let mut second = m.education(d.education).to_string();
    if let Some(bracket) = m.income_bracket(d.income) {
        second.push_str(" and ");
        second.push_str(&m.income_clause.replace("{income}", bracket));
    }
    second.push('.');

    format!("{first} {second}")
}

/// Attitudes first, then habits, then care utilization, then substance use.
pub fn render_behavioral_template(b: &BehavioralTier, m: &TemplateMapping) -> String {
    let sentences = [
        m.health_consciousness(b.health_consciousness).to_string(),
        m.overall_health(b.overall_health).to_string(),
        m.eating_habits(b.eating_habits).to_string(),
        m.activity_hours.render(b.activity_hours_per_week),
        m.prescription_count.render(f64::from(b.prescription_count)),
        m.primary_physician(b.has_primary_physician).to_string(),
        m.physician_visits.render(f64::from(b.physician_visits_2yr)),
        m.smoking(b.smoking_frequency).to_string(),
        m.drinking(b.drinking_frequency).to_string(),
    ];
    sentences.join(" ")
}

/// One agreement sentence per trait, always in Big Five order.
pub fn render_psychological_template(p: &PsychologicalTier, m: &TemplateMapping) -> String {
    let levels: Vec<_> = BigFiveTrait::ALL.iter().map(|t| (*t, p.get(*t))).collect();
    render_trait_sentences(&levels, m)
}

/// Renders the given trait levels in the order supplied.
pub fn render_trait_sentences(levels: &[(BigFiveTrait, Likert)], m: &TemplateMapping) -> String {
    levels
        .iter()
        .map(|(t, l)| {
            m.trait_sentence.replace("{agreement}", m.agreement(*l)).replace("{trait}", m.trait_description(*t))
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Joins the present tier texts (demographic, behavioral, psychological
/// order) with one blank line between them. Absent or empty tiers add nothing.
pub fn compose_prompt(dem: Option<&str>, beh: Option<&str>, psy: Option<&str>) -> String {
    [dem, beh, psy].into_iter().flatten().filter(|t| !t.is_empty()).collect::<Vec<_>>().join("\n\n")
}
