//! Deterministic multi-chain simulator of an omnichain messaging protocol.

pub mod codec;
pub mod endpoint;
pub mod events;
pub mod harness;
pub mod ids;
pub mod msglib;
pub mod oapps;
pub mod simchain;
pub mod workers;

pub use codec::{Address, CodecError, EndpointId, Guid, Hash32, MessageOptions, Packet, PacketHeader, Path, PayloadHash};
pub use endpoint::{Endpoint, EndpointError, SecurityStack, StackSetting};
pub use events::LedgerEvent;
pub use ids::{LibVersion, WorkerId};
