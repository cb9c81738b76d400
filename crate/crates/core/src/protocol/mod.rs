//! Session state machine for the two-stage protocol.
//!
//! Stages run strictly forward:
//! `writing_1 -> writing_2 -> pre_prefs -> distraction -> offer_view -> choice -> post_prefs -> complete`.

mod assets;
mod engine;
mod record;
mod store;

use std::fmt;

use chrono::{DateTime, Utc};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scoring::{DecisionOutcome, Offer, OfferConfiguration, PreferenceSnapshot};

pub use assets::{
    ItemScoring, Level, ProtocolAssets, QuestionItem, WritingPrompt, DEFAULT_ASSETS_JSON,
};
pub use engine::{ExportFilter, OfferPresentation, ProtocolEngine, Questionnaire};
pub use record::{
    audit_record, read_ndjson, record_schema, write_ndjson, NdjsonRow, ParticipantRecord,
};
pub use store::SessionLog;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema,
)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    #[serde(rename = "writing_1")]
    Writing1,
    #[serde(rename = "writing_2")]
    Writing2,
    PrePrefs,
    Distraction,
    OfferView,
    Choice,
    PostPrefs,
    Complete,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Writing1 => "writing_1",
            Stage::Writing2 => "writing_2",
            Stage::PrePrefs => "pre_prefs",
            Stage::Distraction => "distraction",
            Stage::OfferView => "offer_view",
            Stage::Choice => "choice",
            Stage::PostPrefs => "post_prefs",
            Stage::Complete => "complete",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema,
)]
pub enum WritingStage {
    #[serde(rename = "writing_1")]
    First,
    #[serde(rename = "writing_2")]
    Second,
}

impl WritingStage {
    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(WritingStage::First),
            2 => Ok(WritingStage::Second),
            _ => Err(Error::validation("writing stage", format!("{n} is not 1 or 2"))),
        }
    }

    pub fn stage(self) -> Stage {
        match self {
            WritingStage::First => Stage::Writing1,
            WritingStage::Second => Stage::Writing2,
        }
    }
}

/// Whitespace-token count after trimming. Hyphenated words count once.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct WritingResponse {
    pub stage: WritingStage,
    pub text: String,
    pub word_count: usize,
}

impl WritingResponse {
    pub fn new(stage: WritingStage, text: impl Into<String>) -> Self {
        let text = text.into();
        WritingResponse {
            stage,
            word_count: word_count(&text),
            text,
        }
    }
}

/// Public view of a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub session_id: String,
    pub stage: Stage,
    pub config: OfferConfiguration,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
}

/// Everything stored about one session. This is what the session log persists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub stage: Stage,
    pub config: OfferConfiguration,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
    pub writings: Vec<WritingResponse>,
    pub pre: Option<PreferenceSnapshot>,
    pub distraction_score: Option<i32>,
    pub choice: Option<Offer>,
    pub post: Option<PreferenceSnapshot>,
    pub outcome: Option<DecisionOutcome>,
}

impl Session {
    pub fn new(id: String, config: OfferConfiguration, now: DateTime<Utc>) -> Self {
        Session {
            id,
            stage: Stage::Writing1,
            config,
            created_at: now,
            updated_at: now,
            writings: Vec::new(),
            pre: None,
            distraction_score: None,
            choice: None,
            post: None,
            outcome: None,
        }
    }

    pub fn state(&self) -> SessionState {
        SessionState {
            session_id: self.id.clone(),
            stage: self.stage,
            config: self.config.clone(),
            created_at: self.created_at,
            updated_at: self.updated_at,
        }
    }

    /// The two essays joined, as used for feature extraction.
    pub fn essay(&self) -> String {
        self.writings
            .iter()
            .map(|w| w.text.trim())
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn require(&self, operation: &str, allowed: &[Stage]) -> Result<()> {
        if allowed.contains(&self.stage) {
            Ok(())
        } else {
            Err(Error::State {
                operation: operation.into(),
                actual: self.stage,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn word_count_rule() {
        assert_eq!(word_count(""), 0);
        assert_eq!(word_count("   "), 0);
        assert_eq!(word_count("  well-known  decision\ttoday\n"), 3);
        assert_eq!(word_count("a b c"), 3);
    }

    #[test]
    fn stages_are_ordered() {
        assert!(Stage::Writing1 < Stage::Writing2);
        assert!(Stage::PostPrefs < Stage::Complete);
        assert_eq!(
            serde_json::to_string(&Stage::Writing1).unwrap(),
            "\"writing_1\""
        );
        assert_eq!(
            serde_json::to_string(&Stage::OfferView).unwrap(),
            "\"offer_view\""
        );
    }
}
