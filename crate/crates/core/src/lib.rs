//! Core domain for persona-conditioned digital twins.
//!
//! * [`persona`]: tiered persona records and raw-row normalization
//! * [`mapping`] and [`template`]: phrase tables and tier text rendering
//! * [`condition`]: the eight information-availability conditions
//! * [`twin`]: twin state, the update loop and chat transcript assembly
//! * [`metrics`]: similarity, ROUGE, paired t-test and prediction metrics
//! * [`fairness`]: disparate impact, single and intersectional

pub mod condition;
pub mod error;
pub mod fairness;
pub mod mapping;
pub mod metrics;
pub mod persona;
pub mod template;
pub mod twin;

pub use condition::{plan_condition, Condition, ConditionGroup, ConditionPlan};
pub use error::{FairnessError, MappingError, MetricError, PersonaError, TwinError};
pub use mapping::TemplateMapping;
pub use persona::{normalize_record, PersonaRecord, QuestionDimension, RawRecord};
pub use twin::{
    build_chat_messages, init_twin, materialize_twin, update_twin, ChatMessage, ConversationTurn, Provenance, Role,
    TwinState,
};
