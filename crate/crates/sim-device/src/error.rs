use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("server {0} unreachable")]
    ServerUnreachable(String),
    #[error("handshake failed: {0}")]
    HandshakeFailed(String),
    #[error("t = {t} outside track domain [{start}, {end}]")]
    OutOfTrackRange { t: f64, start: f64, end: f64 },
    #[error("malformed spec: {0}")]
    MalformedSpec(String),
    #[error("dangling link: {0}")]
    DanglingLink(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    /// The gateway answered with an error body.
    #[error("{status} {code}: {message}")]
    Server {
        status: u16,
        code: String,
        message: String,
    },
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for SimError {
    fn from(e: std::io::Error) -> Self {
        SimError::Io(e.to_string())
    }
}
