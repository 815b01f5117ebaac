//! The immutable per-chain endpoint.
//!
//! Owns the lossless channels (one per [`Path`]), the Security Stack
//! registry and the compose queue. Guarantees:
//!
//! - nonces are assigned gaplessly on send;
//! - a nonce is deliverable only once every lower nonce since the lazy
//!   inbound nonce holds a live verified hash;
//! - a delivered hash is deleted, and nothing at or below the lazy inbound
//!   nonce may be (re)verified, so each nonce executes at most once.

mod channel;
mod compose;
mod stack;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::codec::{payload_hash, Address, EndpointId, Guid, Hash32, Packet, PacketHeader, Path};
use crate::events::LedgerEvent;
use crate::ids::LibVersion;

pub use channel::{BudgetExceeded, ChannelState, Meter, NIL_PAYLOAD_HASH};
pub use compose::{
    AcceptAll, AppAbort, ComposeCall, ComposeEntry, ComposeKey, ComposeOutbox, ComposeReceiver, ComposeRequest,
    ComposeStatus, Delivery, MessageReceiver, Origin,
};
pub use stack::{SecurityStack, StackSetting, MAX_DVNS};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EndpointError {
    #[error("no send library resolved for this path")]
    NoSendLibrary,
    #[error("payload of {len} bytes exceeds the {max}-byte limit")]
    PayloadTooLarge { len: usize, max: usize },
    #[error("caller is not the path sender")]
    NotSender,
    #[error("path does not originate at this endpoint")]
    WrongSource,
    #[error("packet is not addressed to this endpoint")]
    WrongDestination,
    #[error("library {0} is not authorized to commit for this receiver")]
    NotReceiveLibrary(LibVersion),
    #[error("nonce {nonce} is at or below the lazy inbound nonce {lazy}")]
    StalePacket { nonce: u64, lazy: u64 },
    #[error("receiver has no Security Stack for this source")]
    NoReceiveStack,
    #[error("nonce {nonce} blocked: nonce {missing} is not verified")]
    Censorship { nonce: u64, missing: u64 },
    #[error("payload hash mismatch")]
    HashMismatch,
    #[error("nonce {0} was already delivered, cleared, skipped or burnt")]
    AlreadyDelivered(u64),
    #[error("nonce {0} is nilified")]
    Nilified(u64),
    #[error("caller is not the path receiver")]
    NotReceiver,
    #[error("nonce {0} is not the inbound nonce + 1")]
    WrongNonce(u64),
    #[error("no verified entry at nonce {0}")]
    NoEntry(u64),
    #[error("nonce {nonce} is above the lazy inbound nonce {lazy}")]
    NonceAhead { nonce: u64, lazy: u64 },
    #[error("caller does not own this configuration")]
    NotOwner,
    #[error("invalid security stack: {0}")]
    InvalidStack(String),
    #[error("library {0} is not registered")]
    UnknownLibrary(LibVersion),
    #[error("compose entry already exists")]
    DuplicateCompose,
    #[error("no such compose entry")]
    NoSuchCompose,
    #[error("compose entry already executed")]
    AlreadyExecuted,
    #[error("iteration budget of {limit} exhausted")]
    OutOfBudget { limit: u64 },
}

impl EndpointError {
    /// Stable variant name, used in traces and scenario expectations.
    pub fn code(&self) -> &'static str {
        match self {
            EndpointError::NoSendLibrary => "NoSendLibrary",
            EndpointError::PayloadTooLarge { .. } => "PayloadTooLarge",
            EndpointError::NotSender => "NotSender",
            EndpointError::WrongSource => "WrongSource",
            EndpointError::WrongDestination => "WrongDestination",
            EndpointError::NotReceiveLibrary(_) => "NotReceiveLibrary",
            EndpointError::StalePacket { .. } => "StalePacket",
            EndpointError::NoReceiveStack => "NoReceiveStack",
            EndpointError::Censorship { .. } => "Censorship",
            EndpointError::HashMismatch => "HashMismatch",
            EndpointError::AlreadyDelivered(_) => "AlreadyDelivered",
            EndpointError::Nilified(_) => "Nilified",
            EndpointError::NotReceiver => "NotReceiver",
            EndpointError::WrongNonce(_) => "WrongNonce",
            EndpointError::NoEntry(_) => "NoEntry",
            EndpointError::NonceAhead { .. } => "NonceAhead",
            EndpointError::NotOwner => "NotOwner",
            EndpointError::InvalidStack(_) => "InvalidStack",
            EndpointError::UnknownLibrary(_) => "UnknownLibrary",
            EndpointError::DuplicateCompose => "DuplicateCompose",
            EndpointError::NoSuchCompose => "NoSuchCompose",
            EndpointError::AlreadyExecuted => "AlreadyExecuted",
            EndpointError::OutOfBudget { .. } => "OutOfBudget",
        }
    }
}

impl From<BudgetExceeded> for EndpointError {
    fn from(e: BudgetExceeded) -> Self {
        EndpointError::OutOfBudget { limit: e.limit }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Delivered,
    Reverted(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeliveryReceipt {
    pub guid: Guid,
    pub nonce: u64,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComposeReceipt {
    pub key: ComposeKey,
    pub outcome: Outcome,
}

/// Result of a successful `send`, handed to the send library.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutboundPacket {
    pub packet: Packet,
    pub send_library: LibVersion,
    pub stack: SecurityStack,
}

/// Which libraries exist; implemented by the MessageLib registry.
pub trait LibraryDirectory {
    fn is_registered(&self, lib: LibVersion) -> bool;
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum ConfigChange {
    Stack { oapp: Address, remote: EndpointId, setting: StackSetting },
    ReceiveLibrary { oapp: Address, remote: EndpointId, lib: LibVersion, grace_end: u64 },
    Default { remote: EndpointId, stack: SecurityStack },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Endpoint {
    eid: EndpointId,
    admin: Address,
    max_payload: usize,
    outbound: BTreeMap<Path, u64>,
    inbound: BTreeMap<Path, ChannelState>,
    stacks: BTreeMap<(Address, EndpointId), StackSetting>,
    defaults: BTreeMap<EndpointId, SecurityStack>,
    pending: Vec<ConfigChange>,
    composes: BTreeMap<ComposeKey, ComposeEntry>,
}

impl Endpoint {
    pub fn new(eid: EndpointId, admin: Address, max_payload: usize) -> Self {
        Endpoint {
            eid,
            admin,
            max_payload,
            outbound: BTreeMap::new(),
            inbound: BTreeMap::new(),
            stacks: BTreeMap::new(),
            defaults: BTreeMap::new(),
            pending: Vec::new(),
            composes: BTreeMap::new(),
        }
    }

    pub fn eid(&self) -> EndpointId {
        self.eid
    }

    // ---- views -------------------------------------------------------

    pub fn outbound_nonce(&self, path: &Path) -> u64 {
        self.outbound.get(path).copied().unwrap_or(0)
    }

    pub fn channel(&self, path: &Path) -> Option<&ChannelState> {
        self.inbound.get(path)
    }

    pub fn lazy_inbound_nonce(&self, path: &Path) -> u64 {
        self.inbound.get(path).map_or(0, |c| c.lazy_inbound_nonce)
    }

    pub fn verified_hash(&self, path: &Path, nonce: u64) -> Option<Hash32> {
        self.inbound.get(path).and_then(|c| c.verified(nonce))
    }

    /// `getInboundNonce`: the deliverability frontier, walking at most `budget` steps.
    pub fn inbound_nonce(&self, path: &Path, budget: u64) -> u64 {
        self.inbound.get(path).map_or(0, |c| c.inbound_nonce(budget))
    }

    /// True once the nonce has been delivered, cleared, skipped or burnt.
    pub fn is_resolved(&self, path: &Path, nonce: u64) -> bool {
        nonce <= self.lazy_inbound_nonce(path) && self.verified_hash(path, nonce).is_none()
    }

    pub fn compose_entry(&self, key: &ComposeKey) -> Option<ComposeEntry> {
        self.composes.get(key).copied()
    }

    pub fn compose_entries(&self) -> impl Iterator<Item = (&ComposeKey, &ComposeEntry)> {
        self.composes.iter()
    }

    pub fn setting(&self, oapp: Address, remote: EndpointId) -> Option<&StackSetting> {
        self.stacks.get(&(oapp, remote))
    }

    pub fn default_stack(&self, remote: EndpointId) -> Option<&SecurityStack> {
        self.defaults.get(&remote)
    }

    /// The stack in force for `(oapp, remote)`, following default opt-in.
    pub fn resolve_stack(&self, oapp: Address, remote: EndpointId) -> Option<&SecurityStack> {
        match self.stacks.get(&(oapp, remote))? {
            StackSetting::Explicit(stack) => Some(stack),
            StackSetting::DefaultOptIn => self.defaults.get(&remote),
        }
    }

    pub fn has_pending_config(&self) -> bool {
        !self.pending.is_empty()
    }

    // ---- send side ---------------------------------------------------

    pub fn send(&mut self, caller: Address, path: Path, payload: &[u8]) -> Result<OutboundPacket, EndpointError> {
        if caller != path.sender {
            return Err(EndpointError::NotSender);
        }
        if path.src_eid != self.eid {
            return Err(EndpointError::WrongSource);
        }
        let stack = self.resolve_stack(path.sender, path.dst_eid).cloned().ok_or(EndpointError::NoSendLibrary)?;
        if payload.len() > self.max_payload {
            return Err(EndpointError::PayloadTooLarge { len: payload.len(), max: self.max_payload });
        }
        let counter = self.outbound.entry(path).or_insert(0);
        *counter += 1;
        let header = PacketHeader::new(stack.send_library.packet_version(), *counter, path);
        Ok(OutboundPacket {
            packet: Packet { header, payload: payload.to_vec() },
            send_library: stack.send_library,
            stack,
        })
    }

    // ---- receive side ------------------------------------------------

    /// Called by a MessageLib once its verification requirement is met.
    pub fn commit_verification(
        &mut self,
        lib: LibVersion,
        header: &PacketHeader,
        hash: Hash32,
        height: u64,
        events: &mut Vec<LedgerEvent>,
    ) -> Result<(), EndpointError> {
        let path = header.path;
        if path.dst_eid != self.eid {
            return Err(EndpointError::WrongDestination);
        }
        let stack = self.resolve_stack(path.receiver, path.src_eid).ok_or(EndpointError::NoReceiveStack)?;
        if !stack.authorizes_receive(lib, height) {
            return Err(EndpointError::NotReceiveLibrary(lib));
        }
        let lazy = self.lazy_inbound_nonce(&path);
        if header.nonce <= lazy {
            return Err(EndpointError::StalePacket { nonce: header.nonce, lazy });
        }
        self.inbound.entry(path).or_default().verified.insert(header.nonce, hash);
        events.push(LedgerEvent::PayloadVerified { lib, path, nonce: header.nonce, hash });
        Ok(())
    }

    /// Checks the lossless gate for `nonce` and returns its live stored hash.
    fn deliverable_hash(&self, path: &Path, nonce: u64, meter: &mut Meter) -> Result<Hash32, EndpointError> {
        let empty = ChannelState::default();
        let channel = self.inbound.get(path).unwrap_or(&empty);
        let lazy = channel.lazy_inbound_nonce;
        if nonce > lazy {
            for m in lazy + 1..nonce {
                meter.charge(1)?;
                if !channel.has_live_entry(m) {
                    return Err(EndpointError::Censorship { nonce, missing: m });
                }
            }
        }
        match channel.verified(nonce) {
            None if nonce <= lazy => Err(EndpointError::AlreadyDelivered(nonce)),
            None => Err(EndpointError::Censorship { nonce, missing: nonce }),
            Some(h) if h == NIL_PAYLOAD_HASH => Err(EndpointError::Nilified(nonce)),
            Some(h) => Ok(h),
        }
    }

    /// Removes the delivered entry and advances the lazy inbound nonce.
    fn consume(&mut self, path: &Path, nonce: u64) {
        let channel = self.inbound.entry(*path).or_default();
        channel.verified.remove(&nonce);
        channel.lazy_inbound_nonce = channel.lazy_inbound_nonce.max(nonce);
    }

    fn check_compose_requests(&self, from: Address, guid: Guid, requests: &[ComposeRequest]) -> Result<(), ()> {
        let mut seen = std::collections::BTreeSet::new();
        for req in requests {
            let key = ComposeKey { from, to: req.to, guid, index: req.index };
            if self.composes.contains_key(&key) || !seen.insert(key) {
                return Err(());
            }
        }
        Ok(())
    }

    fn store_composes(&mut self, from: Address, guid: Guid, requests: Vec<ComposeRequest>, events: &mut Vec<LedgerEvent>) {
        for req in requests {
            let key = ComposeKey { from, to: req.to, guid, index: req.index };
            let hash = payload_hash(&guid, &req.message);
            self.composes.insert(key, ComposeEntry { hash, status: ComposeStatus::Stored });
            events.push(LedgerEvent::ComposeSent {
                from,
                to: req.to,
                guid,
                index: req.index,
                hash,
                message: req.message,
            });
        }
    }

    /// Permissionless delivery. On a callback abort nothing in the endpoint changes.
    #[allow(clippy::too_many_arguments)]
    pub fn lz_receive(
        &mut self,
        path: &Path,
        nonce: u64,
        guid: Guid,
        message: &[u8],
        extra_data: &[u8],
        receiver: &mut dyn MessageReceiver,
        meter: &mut Meter,
        events: &mut Vec<LedgerEvent>,
    ) -> Result<DeliveryReceipt, EndpointError> {
        let stored = self.deliverable_hash(path, nonce, meter)?;
        if stored != payload_hash(&guid, message) {
            return Err(EndpointError::HashMismatch);
        }
        meter.charge(1)?;
        let delivery = Delivery {
            origin: Origin { src_eid: path.src_eid, sender: path.sender, nonce },
            receiver: path.receiver,
            guid,
            message,
            extra_data,
        };
        let mut outbox = ComposeOutbox::default();
        if let Err(AppAbort(reason)) = receiver.lz_receive(&delivery, &mut outbox) {
            return Ok(DeliveryReceipt { guid, nonce, outcome: Outcome::Reverted(reason) });
        }
        if self.check_compose_requests(path.receiver, guid, &outbox.requests).is_err() {
            return Ok(DeliveryReceipt {
                guid,
                nonce,
                outcome: Outcome::Reverted(EndpointError::DuplicateCompose.code().into()),
            });
        }
        self.consume(path, nonce);
        events.push(LedgerEvent::PacketDelivered { path: *path, nonce, guid });
        self.store_composes(path.receiver, guid, outbox.requests, events);
        Ok(DeliveryReceipt { guid, nonce, outcome: Outcome::Delivered })
    }

    /// Delivery without execution, for undeliverable messages.
    #[allow(clippy::too_many_arguments)]
    pub fn clear(
        &mut self,
        caller: Address,
        path: &Path,
        nonce: u64,
        guid: Guid,
        message: &[u8],
        meter: &mut Meter,
        events: &mut Vec<LedgerEvent>,
    ) -> Result<(), EndpointError> {
        if caller != path.receiver {
            return Err(EndpointError::NotReceiver);
        }
        let stored = self.deliverable_hash(path, nonce, meter)?;
        if stored != payload_hash(&guid, message) {
            return Err(EndpointError::HashMismatch);
        }
        self.consume(path, nonce);
        events.push(LedgerEvent::PacketCleared { path: *path, nonce, guid });
        Ok(())
    }

    /// Skips verification and delivery of `inbound nonce + 1`.
    pub fn skip(
        &mut self,
        caller: Address,
        path: &Path,
        nonce: u64,
        meter: &mut Meter,
        events: &mut Vec<LedgerEvent>,
    ) -> Result<(), EndpointError> {
        if caller != path.receiver {
            return Err(EndpointError::NotReceiver);
        }
        let empty = ChannelState::default();
        let channel = self.inbound.get(path).unwrap_or(&empty);
        if nonce <= channel.lazy_inbound_nonce || channel.has_live_entry(nonce) {
            return Err(EndpointError::WrongNonce(nonce));
        }
        for m in channel.lazy_inbound_nonce + 1..nonce {
            meter.charge(1)?;
            if !channel.has_live_entry(m) {
                return Err(EndpointError::WrongNonce(nonce));
            }
        }
        self.consume(path, nonce);
        events.push(LedgerEvent::PacketSkipped { path: *path, nonce });
        Ok(())
    }

    /// Replaces a live verified hash with NIL. Below the lazy nonce only
    /// still-undelivered (out-of-order) entries qualify.
    pub fn nilify(
        &mut self,
        caller: Address,
        path: &Path,
        nonce: u64,
        expected: Hash32,
        events: &mut Vec<LedgerEvent>,
    ) -> Result<(), EndpointError> {
        if caller != path.receiver {
            return Err(EndpointError::NotReceiver);
        }
        let lazy = self.lazy_inbound_nonce(path);
        let stale_or_missing =
            || if nonce <= lazy { EndpointError::StalePacket { nonce, lazy } } else { EndpointError::NoEntry(nonce) };
        let Some(channel) = self.inbound.get_mut(path) else {
            return Err(stale_or_missing());
        };
        match channel.verified.get(&nonce) {
            None => Err(stale_or_missing()),
            Some(h) if *h == NIL_PAYLOAD_HASH => Err(EndpointError::Nilified(nonce)),
            Some(h) if *h != expected => Err(EndpointError::HashMismatch),
            Some(_) => {
                channel.verified.insert(nonce, NIL_PAYLOAD_HASH);
                events.push(LedgerEvent::PacketNilified { path: *path, nonce, hash: expected });
                Ok(())
            }
        }
    }

    /// Removes an entry at or below the lazy nonce without knowing the message.
    pub fn burn(
        &mut self,
        caller: Address,
        path: &Path,
        nonce: u64,
        expected: Hash32,
        events: &mut Vec<LedgerEvent>,
    ) -> Result<(), EndpointError> {
        if caller != path.receiver {
            return Err(EndpointError::NotReceiver);
        }
        let lazy = self.lazy_inbound_nonce(path);
        if nonce > lazy {
            return Err(EndpointError::NonceAhead { nonce, lazy });
        }
        let Some(channel) = self.inbound.get_mut(path) else {
            return Err(EndpointError::NoEntry(nonce));
        };
        match channel.verified.get(&nonce) {
            None => Err(EndpointError::NoEntry(nonce)),
            Some(h) if *h != expected => Err(EndpointError::HashMismatch),
            Some(_) => {
                channel.verified.remove(&nonce);
                events.push(LedgerEvent::PacketBurnt { path: *path, nonce, hash: expected });
                Ok(())
            }
        }
    }

    // ---- compose -----------------------------------------------------

    /// Stores a compose payload outside a delivery (e.g. from a composed contract).
    pub fn send_compose(
        &mut self,
        from: Address,
        to: Address,
        guid: Guid,
        index: u16,
        message: Vec<u8>,
        events: &mut Vec<LedgerEvent>,
    ) -> Result<(), EndpointError> {
        let requests = vec![ComposeRequest { to, index, message }];
        self.check_compose_requests(from, guid, &requests).map_err(|_| EndpointError::DuplicateCompose)?;
        self.store_composes(from, guid, requests, events);
        Ok(())
    }

    /// Permissionless, exactly-once execution of a stored compose.
    pub fn lz_compose(
        &mut self,
        key: ComposeKey,
        message: &[u8],
        composer: &mut dyn ComposeReceiver,
        meter: &mut Meter,
        events: &mut Vec<LedgerEvent>,
    ) -> Result<ComposeReceipt, EndpointError> {
        let entry = self.composes.get(&key).ok_or(EndpointError::NoSuchCompose)?;
        if entry.status == ComposeStatus::Executed {
            return Err(EndpointError::AlreadyExecuted);
        }
        if entry.hash != payload_hash(&key.guid, message) {
            return Err(EndpointError::HashMismatch);
        }
        meter.charge(1)?;
        let call = ComposeCall { from: key.from, to: key.to, guid: key.guid, index: key.index, message };
        let mut outbox = ComposeOutbox::default();
        if let Err(AppAbort(reason)) = composer.lz_compose(&call, &mut outbox) {
            return Ok(ComposeReceipt { key, outcome: Outcome::Reverted(reason) });
        }
        if self.check_compose_requests(key.to, key.guid, &outbox.requests).is_err() {
            return Ok(ComposeReceipt {
                key,
                outcome: Outcome::Reverted(EndpointError::DuplicateCompose.code().into()),
            });
        }
        if let Some(entry) = self.composes.get_mut(&key) {
            entry.status = ComposeStatus::Executed;
        }
        events.push(LedgerEvent::ComposeDelivered { from: key.from, to: key.to, guid: key.guid, index: key.index });
        self.store_composes(key.to, key.guid, outbox.requests, events);
        Ok(ComposeReceipt { key, outcome: Outcome::Delivered })
    }

    // ---- configuration -----------------------------------------------

    fn check_libraries(stack: &SecurityStack, libs: &dyn LibraryDirectory) -> Result<(), EndpointError> {
        for lib in [Some(stack.send_library), Some(stack.receive_library), stack.prev_receive_library]
            .into_iter()
            .flatten()
        {
            if !libs.is_registered(lib) {
                return Err(EndpointError::UnknownLibrary(lib));
            }
        }
        Ok(())
    }

    /// Queues a Security Stack change; it takes effect at the next block boundary.
    pub fn set_security_stack(
        &mut self,
        caller: Address,
        oapp: Address,
        remote: EndpointId,
        setting: StackSetting,
        libs: &dyn LibraryDirectory,
    ) -> Result<(), EndpointError> {
        if caller != oapp {
            return Err(EndpointError::NotOwner);
        }
        if let StackSetting::Explicit(stack) = &setting {
            stack.validate().map_err(EndpointError::InvalidStack)?;
            Self::check_libraries(stack, libs)?;
        }
        self.pending.push(ConfigChange::Stack { oapp, remote, setting });
        Ok(())
    }

    /// Queues a receive-library migration keeping the old library valid through
    /// `height + grace_blocks`.
    #[allow(clippy::too_many_arguments)]
    pub fn set_receive_library_with_grace(
        &mut self,
        caller: Address,
        oapp: Address,
        remote: EndpointId,
        lib: LibVersion,
        grace_blocks: u64,
        height: u64,
        libs: &dyn LibraryDirectory,
    ) -> Result<(), EndpointError> {
        if caller != oapp {
            return Err(EndpointError::NotOwner);
        }
        if !libs.is_registered(lib) {
            return Err(EndpointError::UnknownLibrary(lib));
        }
        let has_stack = self.resolve_stack(oapp, remote).is_some()
            || self.pending.iter().any(|c| matches!(c, ConfigChange::Stack { oapp: o, remote: r, .. } if *o == oapp && *r == remote));
        if !has_stack {
            return Err(EndpointError::NoReceiveStack);
        }
        self.pending.push(ConfigChange::ReceiveLibrary { oapp, remote, lib, grace_end: height + grace_blocks });
        Ok(())
    }

    /// Admin-maintained default for OApps that opted in.
    pub fn set_default_stack(
        &mut self,
        caller: Address,
        remote: EndpointId,
        stack: SecurityStack,
        libs: &dyn LibraryDirectory,
    ) -> Result<(), EndpointError> {
        if caller != self.admin {
            return Err(EndpointError::NotOwner);
        }
        stack.validate().map_err(EndpointError::InvalidStack)?;
        Self::check_libraries(&stack, libs)?;
        self.pending.push(ConfigChange::Default { remote, stack });
        Ok(())
    }

    /// Applies queued configuration. Called at each block boundary.
    pub fn apply_pending_config(&mut self, events: &mut Vec<LedgerEvent>) {
        for change in std::mem::take(&mut self.pending) {
            match change {
                ConfigChange::Stack { oapp, remote, setting } => {
                    let detail = match &setting {
                        StackSetting::Explicit(s) => s.to_string(),
                        StackSetting::DefaultOptIn => "default".to_string(),
                    };
                    self.stacks.insert((oapp, remote), setting);
                    events.push(LedgerEvent::StackConfigured { oapp, remote, detail });
                }
                ConfigChange::ReceiveLibrary { oapp, remote, lib, grace_end } => {
                    let Some(mut stack) = self.resolve_stack(oapp, remote).cloned() else {
                        continue;
                    };
                    if stack.receive_library != lib {
                        stack.prev_receive_library = Some(stack.receive_library);
                        stack.grace_period_end = Some(grace_end);
                        stack.receive_library = lib;
                    }
                    let detail = stack.to_string();
                    self.stacks.insert((oapp, remote), StackSetting::Explicit(stack));
                    events.push(LedgerEvent::StackConfigured { oapp, remote, detail });
                }
                ConfigChange::Default { remote, stack } => {
                    let detail = format!("default:{stack}");
                    self.defaults.insert(remote, stack);
                    events.push(LedgerEvent::StackConfigured { oapp: self.admin, remote, detail });
                }
            }
        }
    }

    /// Test seam for mutation testing: skips without any nonce checks.
    #[doc(hidden)]
    pub fn force_skip_unchecked(&mut self, path: &Path, nonce: u64) {
        self.consume(path, nonce);
    }
}

#[cfg(test)]
mod tests;
