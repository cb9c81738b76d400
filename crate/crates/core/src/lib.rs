//! Decision-experiment toolkit: scoring of the job-offer preference
//! questionnaire, the two-stage session protocol, participant-by-feature
//! tables, and the cross-validated evaluation of language features as
//! predictors of decision-making style.

pub mod error;
pub mod eval;
pub mod features;
pub mod protocol;
pub mod scoring;

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use error::{Error, Result};
pub use features::{join_features, Column, FeatureTable};
pub use scoring::{
    classify_style, compute_cis, compute_inf, compute_outcome, compute_psi, compute_rho,
    Attribute, AttributeWeight, CisScale, CognitiveStyleClass, DecisionOutcome, Offer,
    OfferConfiguration, Phase, PreferenceSnapshot, PreferenceValue,
};
pub use eval::{
    cross_validate, effect_size_table, fit_logistic, generate_synthetic, CvConfig,
    EffectSizeTable, EvaluationReport, FoldAssignment, LogisticModel,
};
