//! Zero-/few-shot chat-model baseline: prompt, parse the two scores, map
//! them to class probabilities and evaluate like any other feature set.

use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Mutex, OnceLock};

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::ParticipantRecord;
use crate::scoring::CognitiveStyleClass;

use super::auc::{macro_ovr_auc, ovr_aucs};
use super::cv::{confusion_matrix, EvaluationReport, LlmRunStats, AGGREGATION};

pub const ZERO_SHOT_PROMPT: &str = include_str!("../../assets/prompt_zero_shot.txt");
pub const FOUR_SHOT_PROMPT: &str = include_str!("../../assets/prompt_four_shot.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    ZeroShot,
    FourShot,
}

impl PromptMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PromptMode::ZeroShot => "zero_shot",
            PromptMode::FourShot => "four_shot",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "zero_shot" | "zero-shot" | "0-shot" => Ok(PromptMode::ZeroShot),
            "four_shot" | "four-shot" | "4-shot" => Ok(PromptMode::FourShot),
            other => Err(Error::Config(format!("unknown prompt mode {other:?}"))),
        }
    }

    pub fn system_text(self) -> &'static str {
        match self {
            PromptMode::ZeroShot => ZERO_SHOT_PROMPT,
            PromptMode::FourShot => FOUR_SHOT_PROMPT,
        }
    }
}

impl fmt::Display for PromptMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

pub fn build_prompt(essay: &str, mode: PromptMode) -> Result<Vec<ChatMessage>> {
    if essay.trim().is_empty() {
        return Err(Error::validation("essay", "empty"));
    }
    Ok(vec![
        ChatMessage {
            role: Role::System,
            content: mode.system_text().to_string(),
        },
        ChatMessage {
            role: Role::User,
            content: essay.to_string(),
        },
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LlmScorePair {
    pub coherence_shift_score: f64,
    pub influence_score: f64,
}

impl LlmScorePair {
    pub fn new(coherence_shift_score: f64, influence_score: f64) -> Result<Self> {
        for (name, v) in [
            ("coherence_shift_score", coherence_shift_score),
            ("influence_score", influence_score),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::validation(name, format!("{v} is outside [0, 1]")));
            }
        }
        Ok(LlmScorePair {
            coherence_shift_score,
            influence_score,
        })
    }
}

/// How far outside [0, 1] a parsed score may stray and still be clamped.
pub const CLAMP_MARGIN: f64 = 0.05;

const NUMBER: &str = r"([-+]?(?:\d+(?:\.\d+)?|\.\d+)(?:[eE][-+]?\d+)?)";

fn patterns() -> &'static (Regex, Regex) {
    static RE: OnceLock<(Regex, Regex)> = OnceLock::new();
    RE.get_or_init(|| {
        let cis = format!(
            r"(?i)coherence\s+shift\s+towards\s+(?:preferring\s+)?the\s+chosen\s+job\s+offer\s+is\s*:?\s*\**\s*{NUMBER}"
        );
        let inf = format!(r"(?i)influenced\s+by\s+minor\s+incentives\s+is\s*:?\s*\**\s*{NUMBER}");
        (
            Regex::new(&cis).expect("valid regex"),
            Regex::new(&inf).expect("valid regex"),
        )
    })
}

fn score_after(re: &Regex, text: &str, what: &str) -> Result<f64> {
    let caps = re.captures(text).ok_or_else(|| Error::Parse {
        reason: format!("no {what} score found"),
        raw: text.to_string(),
    })?;
    let v: f64 = caps[1].parse().map_err(|_| Error::Parse {
        reason: format!("{what} score {:?} is not a number", &caps[1]),
        raw: text.to_string(),
    })?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else if (-CLAMP_MARGIN..=1.0 + CLAMP_MARGIN).contains(&v) {
        log::warn!("{what} score {v} clamped to [0, 1]");
        Ok(v.clamp(0.0, 1.0))
    } else {
        Err(Error::Parse {
            reason: format!("{what} score {v} is outside [0, 1]"),
            raw: text.to_string(),
        })
    }
}

/// Extracts the two scores from a model reply. Matching is case-insensitive
/// and tolerant of extra whitespace; the first occurrence of each phrase wins.
pub fn parse_scores(response: &str) -> Result<LlmScorePair> {
    let (cis, inf) = patterns();
    let s1 = score_after(cis, response, "coherence shift")?;
    let s2 = score_after(inf, response, "influence")?;
    LlmScorePair::new(s1, s2)
}

/// Product mapping to class probabilities, in class-index order.
pub fn scores_to_class_probs(pair: LlmScorePair) -> [f64; 4] {
    let (s1, s2) = (pair.coherence_shift_score, pair.influence_score);
    let mut p = [0.0; 4];
    for class in CognitiveStyleClass::ALL {
        let a = if class.cis_up() { s1 } else { 1.0 - s1 };
        let b = if class.influenced() { s2 } else { 1.0 - s2 };
        p[class.index()] = a * b;
    }
    p
}

/// Messages in, reply text out. Implementations report network and HTTP
/// failures as [`Error::Transport`].
pub trait ChatClient: Sync {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmRunConfig {
    pub mode: PromptMode,
    pub max_in_flight: usize,
    /// Where completed results go if the run aborts.
    pub partial_results: Option<PathBuf>,
}

impl LlmRunConfig {
    pub fn new(mode: PromptMode) -> Self {
        LlmRunConfig {
            mode,
            max_in_flight: 4,
            partial_results: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmRecordResult {
    pub participant_id: String,
    pub label: CognitiveStyleClass,
    pub attempts: usize,
    pub scores: Option<LlmScorePair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmBaselineOutput {
    pub report: EvaluationReport,
    pub results: Vec<LlmRecordResult>,
}

fn score_record(
    client: &dyn ChatClient,
    id: &str,
    essay: &str,
    label: CognitiveStyleClass,
    mode: PromptMode,
) -> Result<LlmRecordResult> {
    let messages = build_prompt(essay, mode)?;
    let mut last_err = None;
    for attempt in 1..=2 {
        let reply = client.complete(&messages)?;
        match parse_scores(&reply) {
            Ok(pair) => {
                return Ok(LlmRecordResult {
                    participant_id: id.to_string(),
                    label,
                    attempts: attempt,
                    scores: Some(pair),
                    error: None,
                })
            }
            Err(e) => {
                log::debug!("{id}: attempt {attempt} unparseable: {e}");
                last_err = Some(e.to_string());
            }
        }
    }
    Ok(LlmRecordResult {
        participant_id: id.to_string(),
        label,
        attempts: 2,
        scores: None,
        error: last_err,
    })
}

fn write_partial(path: &PathBuf, results: &[LlmRecordResult]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in results {
        serde_json::to_writer(&mut f, r)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

/// Scores every complete record with an essay, then evaluates the mapped
/// class probabilities with macro one-vs-rest AUC.
///
/// A reply that cannot be parsed is retried once, then the record is
/// excluded and counted. A transport error stops the run; results gathered
/// so far are written to `partial_results` (when set) before returning it.
pub fn run_llm_baseline(
    records: &[ParticipantRecord],
    client: &dyn ChatClient,
    config: &LlmRunConfig,
) -> Result<LlmBaselineOutput> {
    let items: Vec<(&str, String, CognitiveStyleClass)> = records
        .iter()
        .filter_map(|r| {
            let style = r.outcome?.style;
            let essay = r.essay();
            if essay.trim().is_empty() {
                log::warn!("{}: no essay; skipped", r.participant_id);
                return None;
            }
            Some((r.participant_id.as_str(), essay, style))
        })
        .collect();
    let skipped = records.len() - items.len();

    let slots: Vec<Mutex<Option<LlmRecordResult>>> = items.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let failure: Mutex<Option<Error>> = Mutex::new(None);
    let workers = config.max_in_flight.max(1).min(items.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                if abort.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some((id, essay, label)) = items.get(i) else {
                    break;
                };
                match score_record(client, id, essay, *label, config.mode) {
                    Ok(r) => *slots[i].lock().expect("slot lock") = Some(r),
                    Err(e) => {
                        abort.store(true, Ordering::SeqCst);
                        failure.lock().expect("failure lock").get_or_insert(e);
                        break;
                    }
                }
            });
        }
    });

    let results: Vec<LlmRecordResult> = slots
        .into_iter()
        .filter_map(|m| m.into_inner().expect("slot lock"))
        .collect();
    if let Some(e) = failure.into_inner().expect("failure lock") {
        if let Some(path) = &config.partial_results {
            write_partial(path, &results)?;
            log::error!(
                "run aborted after {} of {} records; partial results in {}",
                results.len(),
                items.len(),
                path.display()
            );
        }
        return Err(e);
    }

    let scored: Vec<&LlmRecordResult> = results.iter().filter(|r| r.scores.is_some()).collect();
    let retried = results.iter().filter(|r| r.attempts > 1).count();
    let excluded = results.len() - scored.len();
    let probs: Vec<Vec<f64>> = scored
        .iter()
        .map(|r| scores_to_class_probs(r.scores.expect("filtered")).to_vec())
        .collect();
    let labels: Vec<usize> = scored.iter().map(|r| r.label.index()).collect();
    let mut warnings = Vec::new();
    if skipped > 0 {
        warnings.push(format!("{skipped} incomplete record(s) skipped"));
    }
    if excluded > 0 {
        warnings.push(format!("{excluded} record(s) excluded after an unparseable retry"));
    }
    let n = CognitiveStyleClass::COUNT;
    let (mean_auc, per_class_auc) = match (macro_ovr_auc(&probs, &labels, n), ovr_aucs(&probs, &labels, n)) {
        (Ok(m), Ok(per)) => (m, CognitiveStyleClass::ALL.into_iter().zip(per).collect()),
        (Err(e), _) | (_, Err(e)) => {
            warnings.push(format!("AUC undefined: {e}"));
            (f64::NAN, Default::default())
        }
    };
    let rate = if results.is_empty() {
        0.0
    } else {
        excluded as f64 / results.len() as f64
    };
    let report = EvaluationReport {
        feature_set_name: format!("llm_{}", config.mode),
        per_fold_auc: if mean_auc.is_nan() { vec![] } else { vec![mean_auc] },
        mean_auc,
        per_class_auc,
        confusion: confusion_matrix(&probs, &labels),
        k_features: 2,
        n_participants: scored.len(),
        aggregation: AGGREGATION.into(),
        folds: 0,
        seed: 0,
        lambda: 0.0,
        reduction: None,
        fold_details: vec![],
        llm: Some(LlmRunStats {
            mode: config.mode.to_string(),
            records: results.len(),
            scored: scored.len(),
            retried,
            excluded,
            parse_failure_rate: rate,
        }),
        warnings,
    };
    Ok(LlmBaselineOutput { report, results })
}
