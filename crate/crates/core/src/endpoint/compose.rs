use crate::codec::{Address, EndpointId, Guid, Hash32};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ComposeKey {
    pub from: Address,
    pub to: Address,
    pub guid: Guid,
    pub index: u16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComposeStatus {
    Stored,
    Executed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComposeEntry {
    pub hash: Hash32,
    pub status: ComposeStatus,
}

/// Raised by an application callback; rolls back the delivery or compose.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AppAbort(pub String);

impl AppAbort {
    pub fn new(reason: impl Into<String>) -> Self {
        AppAbort(reason.into())
    }
}

/// Where a delivered message came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Origin {
    pub src_eid: EndpointId,
    pub sender: Address,
    pub nonce: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct Delivery<'a> {
    pub origin: Origin,
    pub receiver: Address,
    pub guid: Guid,
    pub message: &'a [u8],
    pub extra_data: &'a [u8],
}

#[derive(Debug, Clone, Copy)]
pub struct ComposeCall<'a> {
    pub from: Address,
    pub to: Address,
    pub guid: Guid,
    pub index: u16,
    pub message: &'a [u8],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComposeRequest {
    pub to: Address,
    pub index: u16,
    pub message: Vec<u8>,
}

/// `sendCompose` calls made by a callback; stored only if the callback succeeds.
#[derive(Debug, Default)]
pub struct ComposeOutbox {
    pub(crate) requests: Vec<ComposeRequest>,
}

impl ComposeOutbox {
    pub fn send_compose(&mut self, to: Address, index: u16, message: Vec<u8>) {
        self.requests.push(ComposeRequest { to, index, message });
    }

    pub fn requests(&self) -> &[ComposeRequest] {
        &self.requests
    }
}

/// Receiver side of `lzReceive`.
pub trait MessageReceiver {
    fn lz_receive(&mut self, delivery: &Delivery<'_>, outbox: &mut ComposeOutbox) -> Result<(), AppAbort>;
}

/// Composed contract invoked by `lzCompose`.
pub trait ComposeReceiver {
    fn lz_compose(&mut self, call: &ComposeCall<'_>, outbox: &mut ComposeOutbox) -> Result<(), AppAbort>;
}

/// Accepts everything; handy for channel-level tests.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct AcceptAll {
    pub received: Vec<(u64, Vec<u8>)>,
}

impl MessageReceiver for AcceptAll {
    fn lz_receive(&mut self, delivery: &Delivery<'_>, _outbox: &mut ComposeOutbox) -> Result<(), AppAbort> {
        self.received.push((delivery.origin.nonce, delivery.message.to_vec()));
        Ok(())
    }
}
