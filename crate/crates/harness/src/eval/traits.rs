//! Big Five estimation from a twin's generated answers.

use std::collections::BTreeMap;

use twinsim_core::persona::BigFiveTrait;
use twinsim_core::{ChatMessage, ConditionGroup, QuestionDimension, TemplateMapping};
use twinsim_gateway::{ChatGateway, GenerationConfig, GenerationRequest};

use crate::error::Result;
use crate::report::{Cell, Table};
use crate::store::{
    append_evaluations, load_generations, Corpus, EvalRecord, GenerationFilter, TraitRating, Workspace,
};

/// Rating prompt for one transcript of (question, generated answer) pairs.
pub fn trait_messages(transcript: &[(QuestionDimension, &str)], mapping: &TemplateMapping) -> Vec<ChatMessage> {
    let body: Vec<String> = transcript.iter().map(|(q, a)| format!("Q: {}\nA: {}", q.prompt(), a.trim())).collect();
    vec![
        ChatMessage::system(mapping.trait_system.clone()),
        ChatMessage::user(mapping.trait_instruction.replace("{transcript}", &body.join("\n\n"))),
    ]
}

/// Reads `Trait: N` lines (1..=5) for all five traits. Markdown emphasis and
/// extra lines are tolerated; the first line naming a trait wins.
pub fn parse_trait_ratings(text: &str) -> std::result::Result<BTreeMap<BigFiveTrait, u8>, String> {
    let mut out = BTreeMap::new();
    for line in text.lines() {
        let line = line.replace(['*', '_', '#'], "");
        let Some((name, rest)) = line.split_once([':', '=']) else { continue };
        let name = name.trim().trim_start_matches(['-', ' ']).trim();
        let Some(t) = BigFiveTrait::parse_label(name) else { continue };
        if out.contains_key(&t) {
            continue;
        }
        let digits: String = rest.trim_start().chars().take_while(char::is_ascii_digit).collect();
        match digits.parse::<u8>() {
            Ok(v @ 1..=5) => {
                out.insert(t, v);
            }
            _ => return Err(format!("rating for {} is not an integer in 1..=5: `{}`", t.label(), rest.trim())),
        }
    }
    let missing: Vec<&str> = BigFiveTrait::ALL.iter().filter(|t| !out.contains_key(t)).map(|t| t.label()).collect();
    if missing.is_empty() {
        Ok(out)
    } else {
        Err(format!("no rating for {}", missing.join(", ")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TraitOutcome {
    pub rated: usize,
    /// Responses without five usable ratings; stored, skipped in the MSE.
    pub unparsable: usize,
    pub failed: usize,
    /// (persona, condition) pairs lacking one of the four generated answers.
    pub incomplete: usize,
}

/// Asks the model to rate each twin's traits from its four generated answers.
pub fn eval_traits(
    ws: &Workspace,
    run_id: &str,
    corpus: &Corpus,
    config: &GenerationConfig,
    mapping: &TemplateMapping,
    gateway: &ChatGateway,
    parallelism: usize,
) -> Result<TraitOutcome> {
    let filter = GenerationFilter { only_done: true, ..Default::default() };
    let gens: BTreeMap<_, _> =
        load_generations(ws, run_id, &filter)?.into_iter().map(|r| (r.cell.clone(), r)).collect();

    let mut outcome = TraitOutcome::default();
    let mut jobs = Vec::new();
    for persona in &corpus.records {
        for group in ConditionGroup::ALL {
            let transcript: Option<Vec<(QuestionDimension, &str)>> = QuestionDimension::ALL
                .iter()
                .map(|&q| {
                    let cell = crate::store::CellId {
                        persona_id: persona.id.clone(),
                        condition: group.condition_for(q),
                        question: q,
                    };
                    gens.get(&cell).and_then(|r| r.text()).map(|t| (q, t))
                })
                .collect();
            let Some(transcript) = transcript else {
                if QuestionDimension::ALL
                    .iter()
                    .any(|&q| gens.keys().any(|c| c.persona_id == persona.id && c.condition == group.condition_for(q)))
                {
                    outcome.incomplete += 1;
                }
                continue;
            };
            let mut cfg = config.clone();
            cfg.seed_note = Some(format!("traits/{}/{group:?}", persona.id));
            jobs.push((
                persona,
                group,
                GenerationRequest { messages: trait_messages(&transcript, mapping), config: cfg },
            ));
        }
    }

    let requests: Vec<GenerationRequest> = jobs.iter().map(|j| j.2.clone()).collect();
    let results = gateway.complete_batch(&requests, parallelism, |_, _| {});
    let mut records = Vec::new();
    for ((persona, group, _), result) in jobs.iter().zip(results) {
        let gold = persona.psychological.traits().iter().map(|(t, l)| (*t, l.value())).collect();
        let (ratings, error) = match result {
            Ok(rec) => match parse_trait_ratings(&rec.response_text) {
                Ok(r) => {
                    outcome.rated += 1;
                    (Some(r), None)
                }
                Err(e) => {
                    outcome.unparsable += 1;
                    log::warn!("{} / {}: UnparsableRating: {e}", persona.id, group.display_name());
                    (None, Some(format!("UnparsableRating: {e}")))
                }
            },
            Err(e) => {
                outcome.failed += 1;
                (None, Some(format!("{}: {e}", e.kind())))
            }
        };
        records.push(EvalRecord::Trait(TraitRating {
            persona_id: persona.id.clone(),
            group: *group,
            model_id: config.model_id.clone(),
            gold,
            ratings,
            error,
        }));
    }
    append_evaluations(ws, run_id, &records)?;
    Ok(outcome)
}

/// Per-trait MSE of estimated against self-reported levels, one row per
/// (model, condition); rows with errors are counted in `skipped`.
pub fn trait_table(records: &[EvalRecord]) -> Option<Table> {
    type Acc = (BTreeMap<BigFiveTrait, f64>, usize, usize);
    let mut acc: BTreeMap<(String, ConditionGroup), Acc> = BTreeMap::new();
    for r in records {
        let EvalRecord::Trait(t) = r else { continue };
        let e = acc.entry((t.model_id.clone(), t.group)).or_default();
        match &t.ratings {
            Some(ratings) => {
                e.1 += 1;
                for trait_ in BigFiveTrait::ALL {
                    let (Some(p), Some(g)) = (ratings.get(trait_), t.gold.get(trait_)) else { continue };
                    *e.0.entry(*trait_).or_default() += (f64::from(*p) - f64::from(*g)).powi(2);
                }
            }
            None => e.2 += 1,
        }
    }
    if acc.is_empty() {
        return None;
    }
    let mut header = vec!["Model".to_string(), "Condition".to_string()];
    header.extend(BigFiveTrait::ALL.iter().map(|t| t.label().to_string()));
    header.extend(["n".to_string(), "skipped".to_string()]);
    let mut table = Table::new("traits", "MSE of Big Five estimates (lower is better)", header);
    for ((model, group), (sq, n, skipped)) in &acc {
        let mut row = vec![Cell::text(model.clone()), Cell::text(group.display_name())];
        for t in BigFiveTrait::ALL {
            row.push(Cell::num((*n > 0).then(|| sq.get(t).copied().unwrap_or(0.0) / *n as f64)));
        }
        row.extend([Cell::text(n.to_string()), Cell::text(skipped.to_string())]);
        table.rows.push(row);
    }
    Some(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_plain_and_decorated_lines() {
        let r = parse_trait_ratings("Extraverted: 4\nAgreeable: 5\nConscientious: 3\nStable: 2\nOpen: 1").unwrap();
        assert_eq!(r.values().copied().collect::<Vec<_>>(), vec![4, 5, 3, 2, 1]);
        let r = parse_trait_ratings(
            "Sure!\n- **Extraverted**: 2/5\n- Agreeable = 3\nConscientious: 3\nStable: 4 (calm)\nOpen: 5\n",
        )
        .unwrap();
        assert_eq!(r[&BigFiveTrait::Extraverted], 2);
        assert_eq!(r[&BigFiveTrait::Stable], 4);
    }

    #[test]
    fn rejects_missing_or_out_of_range() {
        assert!(parse_trait_ratings("Extraverted: 4\nAgreeable: 5").unwrap_err().contains("Conscientious"));
        assert!(parse_trait_ratings("Extraverted: 7\nAgreeable: 5\nConscientious: 3\nStable: 2\nOpen: 1").is_err());
        assert!(parse_trait_ratings("Extraverted: high\nAgreeable: 5\nConscientious: 3\nStable: 2\nOpen: 1").is_err());
        assert!(parse_trait_ratings("").is_err());
    }

    #[test]
    fn prompt_embeds_transcript() {
        let m = TemplateMapping::builtin();
        let msgs = trait_messages(&[(QuestionDimension::Anxiety, " Needles. ")], &m);
        assert_eq!(msgs.len(), 2);
        assert!(msgs[1].content.contains(&format!("Q: {}\nA: Needles.", QuestionDimension::Anxiety.prompt())));
        assert!(!msgs[1].content.contains("{transcript}"));
    }
}
