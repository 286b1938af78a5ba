use offerner::Tag;

/// Failures of a command, each mapped to a stable exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("lexicon has no values for slot {0}")]
    MissingLexicon(Tag),
    #[error("training failed: {0}")]
    Training(String),
    #[error("cannot load model {0}")]
    ModelLoad(String),
    #[error("cannot load dataset {0}")]
    DatasetLoad(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::MissingLexicon(_) => 3,
            CliError::Training(_) => 4,
            CliError::ModelLoad(_) => 5,
            CliError::DatasetLoad(_) => 6,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
