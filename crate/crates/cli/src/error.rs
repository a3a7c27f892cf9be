use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numeric divergence: {0}")]
    Divergence(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("{0}")]
    Runtime(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Divergence(_) => 3,
            CliError::Verification(_) => 4,
            CliError::Runtime(_) | CliError::Io(_) | CliError::Csv(_) => 1,
        }
    }
}

impl From<hebbian_kuramoto::Error> for CliError {
    fn from(e: hebbian_kuramoto::Error) -> Self {
        use hebbian_kuramoto::Error as E;
        match e {
            E::InvalidArgument(_) | E::PreconditionViolation(_) => CliError::Config(e.to_string()),
            E::IntegrationDiverged { .. } => CliError::Divergence(e.to_string()),
            E::InternalConsistency(_) => CliError::Verification(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}
