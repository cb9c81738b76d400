//! Operator commands for the decision-experiment toolkit: the session
//! server, scoring of exported records, evaluation, effect sizes, synthetic
//! data and the chat-model baseline.

pub mod commands;
pub mod llm_client;
pub mod manifest;
pub mod server;

/// Failures that are the operator's to fix, as opposed to bad data or I/O.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{count} row(s) failed validation; see {report}")]
    RowErrors { count: usize, report: String },
}

pub const EXIT_OK: i32 = 0;
/// I/O, network or internal failure.
pub const EXIT_FAILURE: i32 = 1;
/// Bad arguments or configuration (clap uses the same code).
pub const EXIT_USAGE: i32 = 2;
/// Input data failed validation or an integrity check.
pub const EXIT_DATA: i32 = 3;

pub fn exit_code(err: &anyhow::Error) -> i32 {
    use cogstyle_core::Error as E;
    for cause in err.chain() {
        if let Some(c) = cause.downcast_ref::<CliError>() {
            return match c {
                CliError::Usage(_) => EXIT_USAGE,
                CliError::RowErrors { .. } => EXIT_DATA,
            };
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Config(_) => EXIT_USAGE,
                E::Storage(_) | E::Transport(_) => EXIT_FAILURE,
                _ => EXIT_DATA,
            };
        }
    }
    EXIT_FAILURE
}
