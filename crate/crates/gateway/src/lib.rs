//! Service boundary for immersive analytics workflows: REST API for
//! workspaces and node execution, device credentialing, per-device task
//! queues drained by polling, and TCP sensor ingestion.

pub mod api;
pub mod error;
pub mod remote;
pub mod server;
pub mod sessions;
pub mod state;
pub mod streams;
pub mod workspaces;

pub use api::{router, StreamDescriptor};
pub use error::{ErrorBody, GatewayError};
pub use server::{serve, start, GatewayConfig, RunningGateway, ServeError};
pub use sessions::{Credentials, Task, TaskKind};
pub use state::{GatewayState, ServerEvent};
