use immerflow_gateway::ServeError;
use immerflow_sim::SimError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, missing files, unknown workspaces, invalid scenarios.
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Serve(#[from] ServeError),
    #[error(transparent)]
    Sim(SimError),
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidScenario(m) => CliError::Config(format!("invalid scenario: {m}")),
            other => CliError::Sim(other),
        }
    }
}

impl CliError {
    /// 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Serve(_) => 2,
            CliError::Sim(_) => 1,
        }
    }
}
