//! Quantum communication metadata (QCM) carried over OpenFlow multipart
//! messages.
//!
//! The crate is layered bottom-up:
//!
//! * [`metadata`]: the six-field record, validation and diffing.
//! * [`wire`]: byte layout of the stats record and multipart framing.
//! * [`agent`]: the switch-side state machine answering requests and pushing
//!   async updates.
//! * [`controller`]: the controller's view of every device plus the
//!   QCM-aware flow table.
//! * [`devices`]: quantum memory and repeater node models that produce
//!   metadata mutations.
//! * [`sim`]: a deterministic discrete-event engine wiring it all together.
//! * [`scenario`]: JSON scenario files for the engine.

pub mod agent;
pub mod controller;
pub mod devices;
pub mod metadata;
pub mod scenario;
pub mod sim;
pub mod time;
pub mod wire;

pub use agent::AgentState;
pub use controller::{ControllerView, QcmFlowEntry, QcmFlowTable, QcmMatch};
pub use metadata::{ChannelSpec, ComProtocolId, ComSpec, EcSpec, Field, FieldValue, QcmRecord};
pub use scenario::Scenario;
pub use sim::{Simulation, Topology, Trace, TraceMode};
pub use time::SimTime;
pub use wire::{DecodeMode, Direction, QcmMultipart};
