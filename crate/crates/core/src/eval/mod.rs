//! Cross-validated evaluation of feature sets against cognitive-style
//! labels, effect sizes, the chat-model baseline and synthetic data.

mod auc;
mod cv;
mod effects;
mod folds;
mod llm;
mod logistic;
mod synth;

pub use auc::{binary_auc, macro_ovr_auc, ovr_aucs};
pub use cv::{
    cross_validate, write_summary_csv, CvConfig, EvaluationReport, FoldSummary, LlmRunStats,
    AGGREGATION,
};
pub use effects::{cohens_d, effect_size_table, EffectSizeTable};
pub use folds::{stratified_folds, FoldAssignment};
pub use llm::{
    build_prompt, parse_scores, run_llm_baseline, scores_to_class_probs, ChatClient, ChatMessage,
    LlmBaselineOutput, LlmRecordResult, LlmRunConfig, LlmScorePair, PromptMode, Role,
    CLAMP_MARGIN, FOUR_SHOT_PROMPT, ZERO_SHOT_PROMPT,
};
pub use logistic::{fit_logistic, fit_logistic_with, objective, FitOptions, LogisticModel, TrainingMeta};
pub use synth::{
    generate_synthetic, synthetic_id, synthetic_record, synthetic_records, EffectSpec, PlantedShift,
};
