use clipgeom_core::{Error, ErrorKind};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            kind: "usage",
            message: message.into(),
        }
    }

    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            kind: "input",
            message: message.into(),
        }
    }

    /// The single stderr line: `{"code":…,"error":…,"message":…}`.
    pub fn to_json_line(&self) -> String {
        let one_line = self.message.split_whitespace().collect::<Vec<_>>().join(" ");
        serde_json::json!({"code": self.code, "error": self.kind, "message": one_line}).to_string()
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let (code, kind) = match e.kind() {
            ErrorKind::Input => (EXIT_INPUT, "input"),
            ErrorKind::Numerical => (EXIT_NUMERICAL, "numerical"),
            ErrorKind::Usage => (EXIT_USAGE, "usage"),
        };
        Self {
            code,
            kind,
            message: e.to_string(),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
