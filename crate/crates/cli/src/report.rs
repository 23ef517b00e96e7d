//! Exit codes and machine-readable error records.

use roughfrob::Error;
use serde_json::{json, Value};

pub const EXIT_OK: i32 = 0;
/// A panic inside the library; always a bug.
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_CHECK_FAILED: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;

/// Failed checks and rejected inputs of a theorem exit 2, iterations that
/// do not settle exit 3, and everything the user can fix in the config
/// exits 4.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Jet(_)
        | Error::Involutivity { .. }
        | Error::Degeneracy(_)
        | Error::Corrector(_)
        | Error::Precondition(_) => EXIT_CHECK_FAILED,
        Error::Nonconvergence { .. } => EXIT_NONCONVERGENCE,
        Error::Domain { .. }
        | Error::Config(_)
        | Error::Regularity(_)
        | Error::Shape(_)
        | Error::Size(_)
        | Error::Format(_)
        | Error::Io(_) => EXIT_CONFIG,
    }
}

pub fn kind(e: &Error) -> &'static str {
    match e {
        Error::Domain { .. } => "domain",
        Error::Config(_) => "config",
        Error::Regularity(_) => "regularity",
        Error::Shape(_) => "shape",
        Error::Jet(_) => "jet",
        Error::Involutivity { .. } => "involutivity",
        Error::Degeneracy(_) => "degeneracy",
        Error::Nonconvergence { .. } => "nonconvergence",
        Error::Corrector(_) => "corrector",
        Error::Precondition(_) => "precondition",
        Error::Size(_) => "size",
        Error::Format(_) => "format",
        Error::Io(_) => "io",
    }
}

fn details(e: &Error) -> Value {
    match e {
        Error::Domain { point } => json!({ "point": point }),
        Error::Involutivity { sample, .. } => json!({ "sample": sample }),
        Error::Nonconvergence { residuals, .. } => json!({ "residuals": residuals }),
        _ => Value::Null,
    }
}

pub fn error_record(e: &Error, command: Option<&str>) -> Value {
    record("error", exit_code(e), command, json!({
        "kind": kind(e),
        "message": e.to_string(),
        "details": details(e),
    }))
}

/// Record for failures outside the library: usage errors and panics.
pub fn plain_error(kind: &str, message: &str, code: i32, command: Option<&str>) -> Value {
    record("error", code, command, json!({ "kind": kind, "message": message, "details": Value::Null }))
}

fn record(status: &str, code: i32, command: Option<&str>, error: Value) -> Value {
    json!({
        "status": status,
        "exit_code": code,
        "command": command,
        "error": error,
    })
}
