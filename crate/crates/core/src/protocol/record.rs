use std::io::{BufRead, Write};

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scoring::{
    compute_outcome, DecisionOutcome, Offer, OfferConfiguration, Phase, PreferenceSnapshot,
};

use super::{word_count, Session, Stage, WritingResponse, WritingStage};

/// One participant's session as exported. Field order is the on-disk order.
///
/// In-progress sessions export with the not-yet-collected fields set to `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ParticipantRecord {
    pub participant_id: String,
    pub stage: Stage,
    pub config: OfferConfiguration,
    pub writings: Vec<WritingResponse>,
    pub pre: Option<PreferenceSnapshot>,
    pub post: Option<PreferenceSnapshot>,
    pub choice: Option<Offer>,
    pub outcome: Option<DecisionOutcome>,
    pub distraction_score: Option<i32>,
}

impl From<&Session> for ParticipantRecord {
    fn from(s: &Session) -> Self {
        ParticipantRecord {
            participant_id: s.id.clone(),
            stage: s.stage,
            config: s.config.clone(),
            writings: s.writings.clone(),
            pre: s.pre.clone(),
            post: s.post.clone(),
            choice: s.choice,
            outcome: s.outcome,
            distraction_score: s.distraction_score,
        }
    }
}

impl ParticipantRecord {
    pub fn is_complete(&self) -> bool {
        self.stage == Stage::Complete
    }

    /// Concatenated essays.
    pub fn essay(&self) -> String {
        self.writings
            .iter()
            .map(|w| w.text.trim())
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Structural checks that do not depend on protocol assets.
    pub fn validate(&self) -> Result<()> {
        if self.participant_id.trim().is_empty() {
            return Err(Error::validation("participant_id", "empty"));
        }
        for (i, w) in self.writings.iter().enumerate() {
            let expected = [WritingStage::First, WritingStage::Second];
            if expected.get(i) != Some(&w.stage) {
                return Err(Error::validation(
                    format!("writings[{i}].stage"),
                    "writings out of order",
                ));
            }
            if word_count(&w.text) != w.word_count {
                return Err(Error::validation(
                    format!("writings[{i}].word_count"),
                    format!("stored {} but text has {}", w.word_count, word_count(&w.text)),
                ));
            }
        }
        if self.writings.len() > 2 {
            return Err(Error::validation("writings", "more than two writing responses"));
        }
        if let Some(pre) = &self.pre {
            if pre.phase != Phase::Pre {
                return Err(Error::validation("pre.phase", "expected pre"));
            }
        }
        if let Some(post) = &self.post {
            if post.phase != Phase::Post {
                return Err(Error::validation("post.phase", "expected post"));
            }
            if !post.filler_responses.is_empty() {
                return Err(Error::validation(
                    "post.filler_responses",
                    "post-decision questionnaire has no filler items",
                ));
            }
        }
        if self.is_complete() {
            if self.writings.len() != 2 {
                return Err(Error::validation("writings", "complete record needs both essays"));
            }
            for (name, missing) in [
                ("pre", self.pre.is_none()),
                ("post", self.post.is_none()),
                ("choice", self.choice.is_none()),
                ("outcome", self.outcome.is_none()),
            ] {
                if missing {
                    return Err(Error::validation(name, "missing on complete record"));
                }
            }
        } else if self.outcome.is_some() {
            return Err(Error::validation("outcome", "present on incomplete record"));
        }
        Ok(())
    }
}

/// Recomputes the outcome of a completed record and compares it with the
/// stored one.
pub fn audit_record(record: &ParticipantRecord) -> Result<DecisionOutcome> {
    record.validate()?;
    let (Some(pre), Some(post), Some(choice), Some(stored)) =
        (&record.pre, &record.post, record.choice, record.outcome)
    else {
        return Err(Error::Integrity(format!(
            "{}: record is not complete",
            record.participant_id
        )));
    };
    let fresh = compute_outcome(pre, post, choice, &record.config)?;
    if fresh != stored {
        return Err(Error::Integrity(format!(
            "{}: stored outcome {stored:?} differs from recomputed {fresh:?}",
            record.participant_id
        )));
    }
    Ok(fresh)
}

/// Writes one compact JSON object per line.
pub fn write_ndjson<'a, W: Write>(
    mut out: W,
    records: impl IntoIterator<Item = &'a ParticipantRecord>,
) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// One parsed line: its 1-based line number and the record or the reason it
/// was rejected.
pub type NdjsonRow = (usize, std::result::Result<ParticipantRecord, String>);

/// Reads newline-delimited records. Blank lines are skipped.
pub fn read_ndjson<R: BufRead>(input: R) -> Result<Vec<NdjsonRow>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<ParticipantRecord>(&line)
            .map_err(|e| e.to_string())
            .and_then(|r| r.validate().map(|_| r).map_err(|e| e.to_string()));
        out.push((i + 1, parsed));
    }
    Ok(out)
}

/// Machine-readable JSON schema of the export record.
pub fn record_schema() -> serde_json::Value {
    let schema = schemars::schema_for!(ParticipantRecord);
    serde_json::to_value(schema).expect("schema serializes")
}
