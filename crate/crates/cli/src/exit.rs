//! Process exit codes and the mapping from library errors onto them.

use std::fmt;

use affect_core::Error;

pub const OK: u8 = 0;
pub const IO: u8 = 2;
pub const FIT: u8 = 3;
pub const SCHEMA: u8 = 4;
pub const CHECKPOINT: u8 = 5;
pub const MODEL: u8 = 6;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Default exit code for a library error.
pub fn code_of(e: &Error) -> u8 {
    match e {
        Error::Io(_)
        | Error::MalformedContainer(_)
        | Error::UnsupportedEncoding(_)
        | Error::InvalidClip(_)
        | Error::SilentClip
        | Error::ClipTooShort { .. }
        | Error::WindowTooShort { .. } => IO,
        Error::Csv(c) if c.is_io_error() => IO,
        Error::Parse { .. }
        | Error::Range { .. }
        | Error::DuplicatePath(_)
        | Error::SchemaMismatch(_)
        | Error::SchemaVersionMismatch { .. }
        | Error::CorruptDocument(_)
        | Error::DimensionMismatch { .. }
        | Error::Csv(_)
        | Error::Json(_) => SCHEMA,
        Error::CheckpointMismatch(_) => CHECKPOINT,
        Error::EmptySpectrum
        | Error::LengthMismatch { .. }
        | Error::InvalidArgument(_)
        | Error::DegenerateMatrix
        | Error::ConstantTarget
        | Error::ConstantInput
        | Error::BadK { .. }
        | Error::UnknownHyperparameter { .. }
        | Error::InvalidHyperparameter { .. }
        | Error::DivergedLoss { .. } => FIT,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure { code: code_of(&e), message: e.to_string() }
    }
}

/// Attaches context and keeps the default code.
pub trait Context<T> {
    fn context(self, what: impl fmt::Display) -> Result<T, Failure>;
    /// Attaches context and forces `code` unless the error is plain I/O.
    fn with_code(self, code: u8, what: impl fmt::Display) -> Result<T, Failure>;
}

impl<T> Context<T> for Result<T, Error> {
    fn context(self, what: impl fmt::Display) -> Result<T, Failure> {
        self.map_err(|e| Failure { code: code_of(&e), message: format!("{what}: {e}") })
    }

    fn with_code(self, code: u8, what: impl fmt::Display) -> Result<T, Failure> {
        self.map_err(|e| {
            let code = if code_of(&e) == IO { IO } else { code };
            Failure { code, message: format!("{what}: {e}") }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes() {
        assert_eq!(code_of(&Error::Io(std::io::Error::other("x"))), IO);
        assert_eq!(code_of(&Error::SchemaMismatch("x".into())), SCHEMA);
        assert_eq!(code_of(&Error::CheckpointMismatch("x".into())), CHECKPOINT);
        assert_eq!(code_of(&Error::ConstantTarget), FIT);
        let forced: Result<(), Error> = Err(Error::CorruptDocument("x".into()));
        assert_eq!(forced.with_code(MODEL, "model").unwrap_err().code, MODEL);
        let io: Result<(), Error> = Err(Error::Io(std::io::Error::other("x")));
        assert_eq!(io.with_code(MODEL, "model").unwrap_err().code, IO);
    }
}
