use serde::{Deserialize, Serialize};

use crate::condition::Condition;
use crate::error::MetricError;
use crate::persona::QuestionDimension;

/// Embedding of one text under one model. Never empty, always finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawVector")]
pub struct EmbeddingVector {
    model_id: String,
    values: Vec<f64>,
}

#[derive(Deserialize)]
struct RawVector {
    model_id: String,
    values: Vec<f64>,
}

impl TryFrom<RawVector> for EmbeddingVector {
    type Error = MetricError;

    fn try_from(raw: RawVector) -> Result<Self, Self::Error> {
        EmbeddingVector::new(raw.model_id, raw.values)
    }
}

impl EmbeddingVector {
    pub fn new(model_id: impl Into<String>, values: Vec<f64>) -> Result<Self, MetricError> {
        if values.is_empty() {
            return Err(MetricError::InvalidVector("no dimensions".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(MetricError::InvalidVector(format!("non-finite value at {i}")));
        }
        Ok(EmbeddingVector { model_id: model_id.into(), values })
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn dims(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Cosine similarity of one generated answer against its gold answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityScore {
    pub value: f64,
    pub question: QuestionDimension,
    pub condition: Condition,
    pub embedding_model: String,
    pub persona_id: String,
}

/// `<a,b> / (|a| |b|)`, clamped into [-1, 1] against rounding.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, MetricError> {
    if a.model_id != b.model_id {
        return Err(MetricError::ModelMismatch(a.model_id.clone(), b.model_id.clone()));
    }
    if a.dims() != b.dims() {
        return Err(MetricError::DimensionMismatch(a.dims(), b.dims()));
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.values.iter().zip(&b.values) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(MetricError::ZeroVector);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn v(values: &[f64]) -> EmbeddingVector {
        EmbeddingVector::new("m", values.to_vec()).unwrap()
    }

    #[test]
    fn known_values() {
        assert_eq!(cosine_similarity(&v(&[3.0, -1.0, 2.0]), &v(&[3.0, -1.0, 2.0])).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(), 0.0);
        // 32 / (sqrt(14) * sqrt(77))
        let s = cosine_similarity(&v(&[1.0, 2.0, 3.0]), &v(&[4.0, 5.0, 6.0])).unwrap();
        assert!((s - 0.974_631_846_197_076_2).abs() < 1e-12, "{s}");
    }

    #[test]
    fn errors() {
        assert_eq!(cosine_similarity(&v(&[0.0, 0.0]), &v(&[1.0, 0.0])), Err(MetricError::ZeroVector));
        let other = EmbeddingVector::new("other", vec![1.0, 0.0]).unwrap();
        assert!(matches!(cosine_similarity(&v(&[1.0, 0.0]), &other), Err(MetricError::ModelMismatch(..))));
        assert!(EmbeddingVector::new("m", vec![]).is_err());
        assert!(EmbeddingVector::new("m", vec![f64::NAN]).is_err());
        assert!(serde_json::from_str::<EmbeddingVector>(r#"{"model_id":"m","values":[]}"#).is_err());
    }

    proptest! {
        #[test]
        fn symmetric_and_scale_invariant(
            a in prop::collection::vec(-10.0f64..10.0, 4),
            b in prop::collection::vec(-10.0f64..10.0, 4),
            alpha in 0.01f64..100.0,
        ) {
            let (va, vb) = (v(&a), v(&b));
            let scaled = v(&a.iter().map(|x| x * alpha).collect::<Vec<_>>());
            if let (Ok(ab), Ok(ba), Ok(sb)) = (
                cosine_similarity(&va, &vb),
                cosine_similarity(&vb, &va),
                cosine_similarity(&scaled, &vb),
            ) {
                prop_assert!((ab - ba).abs() < 1e-12);
                prop_assert!((ab - sb).abs() < 1e-9);
                prop_assert!((-1.0..=1.0).contains(&ab));
            }
        }
    }
}
