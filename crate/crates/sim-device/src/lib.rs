//! A headless stand-in for an XR headset.
//!
//! It requests credentials, polls the gateway's scheduler, applies received
//! visualization specs to an in-memory scene, streams scripted sensor data
//! over the TCP channel and injects air taps as pinches in the hand stream.

pub mod client;
pub mod device;
pub mod error;
pub mod log;
pub mod scenario;
pub mod scene;
pub mod track;

pub use client::{Credentials, GatewayClient, PollResult};
pub use device::{run_device, run_lockstep, DeviceOptions, DeviceOutcome, ExpectationResult, SimDevice};
pub use error::SimError;
pub use log::{protocol_prefix, Event, EventLog, LogRecord};
pub use scenario::{Action, Scenario, SpecExpectation, Step};
pub use scene::{Applied, PlacedSpec, SimScene, Task, TaskKind};
pub use track::{emit_tracking, DepthSource, Keyframe, PoseTrack};
