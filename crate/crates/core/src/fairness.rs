//! Disparate impact over demographic groups, single-attribute and
//! intersectional, plus the downstream prediction metrics reported with it.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::FairnessError;
use crate::metrics::{auc_roc, f1_binary, median_binarize, mse, pearson_r};
use crate::persona::{DemographicTier, Education, IncomeBracket, Race, Sex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Attribute {
    Age,
    Gender,
    Race,
    Education,
    Income,
}

impl Attribute {
    pub const ALL: [Attribute; 5] =
        [Attribute::Age, Attribute::Gender, Attribute::Race, Attribute::Education, Attribute::Income];

    pub fn name(self) -> &'static str {
        match self {
            Attribute::Age => "Age",
            Attribute::Gender => "Gender",
            Attribute::Race => "Race",
            Attribute::Education => "Education",
            Attribute::Income => "Income",
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Membership {
    Privileged,
    Unprivileged,
    /// Not assignable (e.g. declined to answer); left out of this attribute only.
    Excluded,
}

impl Membership {
    pub fn swapped(self) -> Self {
        match self {
            Membership::Privileged => Membership::Unprivileged,
            Membership::Unprivileged => Membership::Privileged,
            Membership::Excluded => Membership::Excluded,
        }
    }
}

/// Group membership for all five attributes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinarizedAttributes(BTreeMap<Attribute, Membership>);

impl BinarizedAttributes {
    pub fn new(memberships: [Membership; 5]) -> Self {
        BinarizedAttributes(Attribute::ALL.into_iter().zip(memberships).collect())
    }

    pub fn get(&self, attr: Attribute) -> Membership {
        self.0[&attr]
    }

    /// Same assignment with the two groups of `attr` exchanged.
    pub fn relabeled(&self, attr: Attribute) -> Self {
        let mut out = self.clone();
        out.0.insert(attr, self.get(attr).swapped());
        out
    }
}

/// Declared group split per attribute.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BinarizationPolicy {
    /// Ages at or above this are privileged.
    pub age_threshold: u8,
    pub privileged_sex: Sex,
    pub privileged_races: Vec<Race>,
    pub unprivileged_races: Vec<Race>,
    /// This level and above are privileged.
    pub education_threshold: Education,
    /// This bracket and above are privileged.
    pub income_threshold: IncomeBracket,
}

impl Default for BinarizationPolicy {
    fn default() -> Self {
        BinarizationPolicy {
            age_threshold: 45,
            privileged_sex: Sex::Male,
            privileged_races: vec![Race::White],
            unprivileged_races: vec![
                Race::BlackOrAfricanAmerican,
                Race::Asian,
                Race::NativeAmerican,
                Race::PacificIslander,
                Race::Multiracial,
                Race::Other,
            ],
            education_threshold: Education::CollegeGraduate,
            income_threshold: IncomeBracket::From50kTo75k,
        }
    }
}

fn split(privileged: bool) -> Membership {
    if privileged {
        Membership::Privileged
    } else {
        Membership::Unprivileged
    }
}

pub fn binarize(d: &DemographicTier, policy: &BinarizationPolicy) -> Result<BinarizedAttributes, FairnessError> {
    let age = split(d.age >= policy.age_threshold);
    let gender = split(d.sex == policy.privileged_sex);
    let race = if d.race == Race::PreferNotToAnswer {
        Membership::Excluded
    } else if policy.privileged_races.contains(&d.race) {
        Membership::Privileged
    } else if policy.unprivileged_races.contains(&d.race) {
        Membership::Unprivileged
    } else {
        return Err(FairnessError::UnmappableValue {
            attribute: Attribute::Race.name().to_string(),
            value: d.race.label().to_string(),
        });
    };
    let education = split(d.education >= policy.education_threshold);
    let income = if d.income.is_bracket() {
        if !policy.income_threshold.is_bracket() {
            return Err(FairnessError::UnmappableValue {
                attribute: Attribute::Income.name().to_string(),
                value: d.income.label().to_string(),
            });
        }
        split(d.income >= policy.income_threshold)
    } else {
        Membership::Excluded
    };
    Ok(BinarizedAttributes::new([age, gender, race, education, income]))
}

/// One binary decision with its subject's group memberships.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupedOutcome {
    pub predicted_positive: bool,
    pub attributes: BinarizedAttributes,
}

fn positive_rate<'a>(outcomes: impl Iterator<Item = &'a GroupedOutcome>) -> Option<f64> {
    let (mut n, mut pos) = (0usize, 0usize);
    for o in outcomes {
        n += 1;
        pos += usize::from(o.predicted_positive);
    }
    (n > 0).then(|| pos as f64 / n as f64)
}

fn rate_ratio(unprivileged: Option<f64>, privileged: Option<f64>) -> Result<f64, FairnessError> {
    let privileged = privileged.ok_or_else(|| FairnessError::EmptyGroup("privileged".into()))?;
    let unprivileged = unprivileged.ok_or_else(|| FairnessError::EmptyGroup("unprivileged".into()))?;
    if privileged == 0.0 {
        return Err(FairnessError::ZeroPrivilegedRate);
    }
    Ok(unprivileged / privileged)
}

/// Positive-prediction rate of the unprivileged group over that of the
/// privileged group. Not folded: values above 1 favour the unprivileged group.
pub fn di_single(outcomes: &[GroupedOutcome], attr: Attribute) -> Result<f64, FairnessError> {
    let unpriv = positive_rate(outcomes.iter().filter(|o| o.attributes.get(attr) == Membership::Unprivileged));
    let priv_ = positive_rate(outcomes.iter().filter(|o| o.attributes.get(attr) == Membership::Privileged));
    rate_ratio(unpriv, priv_)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionDi {
    /// Unweighted mean over the usable combinations.
    pub value: f64,
    pub combinations_used: usize,
    pub combinations_skipped: usize,
}

fn combinations(items: &[Attribute], k: usize) -> Vec<Vec<Attribute>> {
    fn go(items: &[Attribute], k: usize, start: usize, cur: &mut Vec<Attribute>, out: &mut Vec<Vec<Attribute>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..items.len() {
            cur.push(items[i]);
            go(items, k, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(items, k, 0, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Mean DI over every `arity`-way combination of `attrs`, each comparing the
/// all-unprivileged intersection with the all-privileged intersection.
/// Combinations with an empty cell or a zero privileged rate are skipped.
pub fn di_interaction(
    outcomes: &[GroupedOutcome],
    attrs: &[Attribute],
    arity: usize,
) -> Result<InteractionDi, FairnessError> {
    if !(2..=3).contains(&arity) {
        return Err(FairnessError::InvalidArity(arity));
    }
    let usable: Vec<Attribute> = attrs
        .iter()
        .copied()
        .filter(|a| {
            outcomes.iter().any(|o| o.attributes.get(*a) == Membership::Privileged)
                && outcomes.iter().any(|o| o.attributes.get(*a) == Membership::Unprivileged)
        })
        .collect();
    if usable.len() < arity {
        return Err(FairnessError::NoValidCombination(arity));
    }

    let mut ratios = Vec::new();
    let mut skipped = 0;
    for combo in combinations(&usable, arity) {
        let in_cell = |o: &&GroupedOutcome, m: Membership| combo.iter().all(|a| o.attributes.get(*a) == m);
        let unpriv = positive_rate(outcomes.iter().filter(|o| in_cell(o, Membership::Unprivileged)));
        let priv_ = positive_rate(outcomes.iter().filter(|o| in_cell(o, Membership::Privileged)));
        match rate_ratio(unpriv, priv_) {
            Ok(r) => ratios.push(r),
            Err(_) => skipped += 1,
        }
    }
    if ratios.is_empty() {
        return Err(FairnessError::NoValidCombination(arity));
    }
    Ok(InteractionDi {
        value: ratios.iter().sum::<f64>() / ratios.len() as f64,
        combinations_used: ratios.len(),
        combinations_skipped: skipped,
    })
}

/// One downstream prediction joined with its subject's demographics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPrediction {
    pub persona_id: String,
    pub score: f64,
    pub predicted_positive: bool,
    pub gold: f64,
    pub demographics: DemographicTier,
}

/// Regression, classification and fairness metrics for one prediction set.
/// A metric that is undefined on the data (e.g. one-class gold labels) is `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessMetrics {
    pub n: usize,
    pub mse: Option<f64>,
    pub pearson_r: Option<f64>,
    pub f1: Option<f64>,
    pub auc: Option<f64>,
    pub di: BTreeMap<Attribute, Option<f64>>,
    pub di_plus: Option<f64>,
    pub di_plus_plus: Option<f64>,
}

impl FairnessMetrics {
    /// Column headers in report order.
    pub const COLUMNS: [&'static str; 11] = [
        "MSE",
        "Pearson's r",
        "F1",
        "AUC",
        "DI_Age",
        "DI_Gender",
        "DI_Race",
        "DI_Education",
        "DI_Income",
        "DI+",
        "DI++",
    ];

    /// Values aligned with [`FairnessMetrics::COLUMNS`].
    pub fn values(&self) -> [Option<f64>; 11] {
        let di = |a| self.di.get(&a).copied().flatten();
        [
            self.mse,
            self.pearson_r,
            self.f1,
            self.auc,
            di(Attribute::Age),
            di(Attribute::Gender),
            di(Attribute::Race),
            di(Attribute::Education),
            di(Attribute::Income),
            self.di_plus,
            self.di_plus_plus,
        ]
    }
}

/// Scores regress against the raw gold values; gold values are split at
/// their median for F1 and AUC; DI uses the binary predictions.
pub fn fairness_metrics(
    preds: &[LabeledPrediction],
    policy: &BinarizationPolicy,
) -> Result<FairnessMetrics, FairnessError> {
    if preds.is_empty() {
        return Err(FairnessError::Metric(crate::error::MetricError::Empty));
    }
    let scores: Vec<f64> = preds.iter().map(|p| p.score).collect();
    let gold: Vec<f64> = preds.iter().map(|p| p.gold).collect();
    let predicted: Vec<bool> = preds.iter().map(|p| p.predicted_positive).collect();
    let gold_pos = median_binarize(&gold);

    let outcomes = preds
        .iter()
        .map(|p| {
            Ok(GroupedOutcome {
                predicted_positive: p.predicted_positive,
                attributes: binarize(&p.demographics, policy)?,
            })
        })
        .collect::<Result<Vec<_>, FairnessError>>()?;

    Ok(FairnessMetrics {
        n: preds.len(),
        mse: mse(&scores, &gold).ok(),
        pearson_r: pearson_r(&scores, &gold).ok(),
        f1: f1_binary(&predicted, &gold_pos).ok(),
        auc: auc_roc(&scores, &gold_pos).ok(),
        di: Attribute::ALL.into_iter().map(|a| (a, di_single(&outcomes, a).ok())).collect(),
        di_plus: di_interaction(&outcomes, &Attribute::ALL, 2).ok().map(|d| d.value),
        di_plus_plus: di_interaction(&outcomes, &Attribute::ALL, 3).ok().map(|d| d.value),
    })
}

/// Downstream metrics that can be compared against a baseline row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LiftMetric {
    Mse,
    PearsonR,
    F1,
    Auc,
}

impl LiftMetric {
    pub const ALL: [LiftMetric; 4] = [LiftMetric::Mse, LiftMetric::PearsonR, LiftMetric::F1, LiftMetric::Auc];

    pub fn name(self) -> &'static str {
        match self {
            LiftMetric::Mse => "MSE",
            LiftMetric::PearsonR => "Pearson's r",
            LiftMetric::F1 => "F1",
            LiftMetric::Auc => "AUC",
        }
    }

    pub fn lower_is_better(self) -> bool {
        matches!(self, LiftMetric::Mse)
    }
}

/// Relative improvement over the baseline, in percent. For error metrics a
/// drop counts as a positive lift. `None` when the baseline is zero.
pub fn lift_percent(metric: LiftMetric, value: f64, baseline: f64) -> Option<f64> {
    if baseline == 0.0 {
        return None;
    }
    let gain = if metric.lower_is_better() { baseline - value } else { value - baseline };
    Some(100.0 * gain / baseline)
}
