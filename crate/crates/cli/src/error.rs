use std::fmt;
use std::process::ExitCode;

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self { code: EXIT_DATA, message: message.into() }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        Self { code: EXIT_NUMERIC, message: message.into() }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<agn::Error> for CliError {
    fn from(e: agn::Error) -> Self {
        use agn::Error::*;
        let code = match e {
            Config(_) => EXIT_USAGE,
            Numeric(_) | Contract(_) => EXIT_NUMERIC,
            Shape { .. } | Input(_) | Parse { .. } | CorruptCheckpoint { .. } | CorruptMotion { .. } | Io(_) => EXIT_DATA,
        };
        Self { code, message: e.to_string() }
    }
}
