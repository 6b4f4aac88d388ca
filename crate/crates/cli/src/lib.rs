//! Command-line front end: CSV panels in, JSON reports and TSV tables out.

pub mod commands;
pub mod csv_io;
pub mod report;

use factor_order::Error as CoreError;

pub use commands::{run, Cli};
pub use csv_io::InputError;

/// Exit status for a successful run.
pub const EXIT_OK: i32 = 0;
/// Unclassified failure.
pub const EXIT_INTERNAL: i32 = 1;
/// File could not be read or a cell could not be parsed.
pub const EXIT_IO: i32 = 2;
/// Bad flags or environment.
pub const EXIT_USAGE: i32 = 64;

/// Exit status and diagnostic name of a library error.
pub fn core_status(err: &CoreError) -> (i32, &'static str) {
    match err {
        CoreError::AspectRatioOne => (3, "AspectRatioOne"),
        CoreError::InsideSupport { .. } => (4, "InsideSupport"),
        CoreError::ConvergenceFailure => (5, "ConvergenceFailure"),
        CoreError::EmptyWindow { .. } => (6, "EmptyWindow"),
        CoreError::InsufficientColumns { .. } => (7, "InsufficientColumns"),
        CoreError::CEqualsOne => (8, "CEqualsOne"),
        CoreError::NonPositiveLambda(_) => (9, "NonPositiveLambda"),
        CoreError::InvalidArgument(_) => (10, "InvalidArgument"),
        CoreError::EmptyInput => (11, "EmptyInput"),
        CoreError::RaggedRows { .. } => (12, "RaggedRows"),
        CoreError::NonFinite { .. } => (13, "NonFinite"),
    }
}

/// Exit status and diagnostic name for any error a command can return.
pub fn status(err: &anyhow::Error) -> (i32, &'static str) {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<InputError>() {
            return match e {
                InputError::Invalid { source, .. } => core_status(source),
                InputError::Parse { .. } => (EXIT_IO, "Parse"),
                InputError::Io(_) | InputError::Csv(_) => (EXIT_IO, "Io"),
            };
        }
        if let Some(e) = cause.downcast_ref::<CoreError>() {
            return core_status(e);
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return (EXIT_IO, "Io");
        }
    }
    (EXIT_INTERNAL, "Internal")
}

/// One-line diagnostic: `error[Name]: message: cause: ...`.
pub fn diagnostic(err: &anyhow::Error) -> String {
    let (_, name) = status(err);
    let msg = err
        .chain()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(": ")
        .replace('\n', " ");
    format!("error[{name}]: {msg}")
}
