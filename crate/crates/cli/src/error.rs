use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("config: {0}")]
    Config(#[from] toml::de::Error),

    #[error(transparent)]
    Core(#[from] freshcrawl::Error),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    /// 1 usage, 2 data, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        use freshcrawl::Error as E;
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Core(e) => match e {
                E::InvalidArgument(_) | E::UnsupportedAnalysis(_) => 1,
                E::Numerical(_) => 3,
                E::InsufficientData(_)
                | E::Parse { .. }
                | E::EmptyEnsemble(_)
                | E::Io(_)
                | E::Csv(_)
                | E::Json(_) => 2,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        use freshcrawl::Error as E;
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::Core(e) => match e {
                E::InvalidArgument(_) => "invalid_argument",
                E::InsufficientData(_) => "insufficient_data",
                E::UnsupportedAnalysis(_) => "unsupported_analysis",
                E::Numerical(_) => "numerical",
                E::Parse { .. } => "parse",
                E::EmptyEnsemble(_) => "empty_ensemble",
                E::Io(_) => "io",
                E::Csv(_) => "csv",
                E::Json(_) => "json",
            },
        }
    }

    /// Single-line JSON for stderr.
    pub fn to_json_line(&self) -> String {
        let mut v = json!({ "error": self.kind(), "message": self.to_string(), "exit_code": self.exit_code() });
        if let CliError::Core(freshcrawl::Error::Parse { line, .. }) = self {
            v["line"] = json!(line);
        }
        v.to_string()
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
