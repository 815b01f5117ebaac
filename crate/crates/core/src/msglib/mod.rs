//! Append-only MessageLib registry, the Ultra Light Node and the whitelist
//! placeholder library.

mod uln;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::codec::{Address, Hash32, MessageOptions, PacketHeader};
use crate::endpoint::{Endpoint, EndpointError, LibraryDirectory, OutboundPacket};
use crate::events::LedgerEvent;
use crate::ids::{LibVersion, WorkerId};

pub use uln::{committable, quorum_status, AttestationStore, QuorumStatus, UlnConfigView};

/// Native-token balances of one chain.
pub type Balances = BTreeMap<Address, u128>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LibraryKind {
    Uln,
    /// Commits whatever an allowlisted worker submits.
    Whitelist(BTreeSet<WorkerId>),
    Custom(u32),
}

impl fmt::Display for LibraryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LibraryKind::Uln => f.write_str("uln"),
            LibraryKind::Whitelist(allow) => {
                let ids: Vec<String> = allow.iter().map(ToString::to_string).collect();
                write!(f, "whitelist:{}", ids.join(","))
            }
            LibraryKind::Custom(id) => write!(f, "custom:{id}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageLibRecord {
    pub version: LibVersion,
    pub kind: LibraryKind,
    frozen: bool,
}

impl MessageLibRecord {
    pub fn new(version: LibVersion, kind: LibraryKind) -> Self {
        MessageLibRecord { version, kind, frozen: false }
    }

    pub fn frozen(&self) -> bool {
        self.frozen
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MsgLibError {
    #[error("caller is not the registry admin")]
    NotAdmin,
    #[error("library {0} is already registered")]
    DuplicateVersion(LibVersion),
    #[error("library {0} is not registered")]
    UnknownLibrary(LibVersion),
    #[error("dvn {0} already attested this payload")]
    DuplicateAttestation(WorkerId),
    #[error("library {lib} cannot handle packet version {version}")]
    VersionMismatch { lib: LibVersion, version: u8 },
    #[error("library {0} is not of the required kind")]
    WrongLibraryKind(LibVersion),
    #[error("worker {0} is not on the allowlist")]
    NotWhitelisted(WorkerId),
    #[error("balance {have} is below the fee {need}")]
    InsufficientBalance { need: u128, have: u128 },
    #[error("malformed options: {0}")]
    BadOptions(String),
    #[error(transparent)]
    Endpoint(#[from] EndpointError),
}

impl MsgLibError {
    pub fn code(&self) -> &'static str {
        match self {
            MsgLibError::NotAdmin => "NotAdmin",
            MsgLibError::DuplicateVersion(_) => "DuplicateVersion",
            MsgLibError::UnknownLibrary(_) => "UnknownLibrary",
            MsgLibError::DuplicateAttestation(_) => "DuplicateAttestation",
            MsgLibError::VersionMismatch { .. } => "VersionMismatch",
            MsgLibError::WrongLibraryKind(_) => "WrongLibraryKind",
            MsgLibError::NotWhitelisted(_) => "NotWhitelisted",
            MsgLibError::InsufficientBalance { .. } => "InsufficientBalance",
            MsgLibError::BadOptions(_) => "BadOptions",
            MsgLibError::Endpoint(e) => e.code(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommitOutcome {
    Committed,
    NotReady(QuorumStatus),
}

/// Flat fees charged at send time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FeeSchedule {
    pub per_dvn: u128,
    pub executor: u128,
}

/// Work emitted by the send side for offchain workers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Job {
    pub dvns: Vec<WorkerId>,
    pub executor: WorkerId,
    pub fee: u128,
}

/// One chain's registry. Records are frozen on registration and never
/// removed; each library owns its attestation store.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageLibRegistry {
    admin: Address,
    records: Vec<MessageLibRecord>,
    stores: BTreeMap<LibVersion, AttestationStore>,
}

impl MessageLibRegistry {
    pub fn new(admin: Address) -> Self {
        MessageLibRegistry { admin, records: Vec::new(), stores: BTreeMap::new() }
    }

    pub fn records(&self) -> &[MessageLibRecord] {
        &self.records
    }

    pub fn get(&self, version: LibVersion) -> Option<&MessageLibRecord> {
        self.records.iter().find(|r| r.version == version)
    }

    pub fn register(
        &mut self,
        caller: Address,
        mut record: MessageLibRecord,
        events: &mut Vec<LedgerEvent>,
    ) -> Result<(), MsgLibError> {
        if caller != self.admin {
            return Err(MsgLibError::NotAdmin);
        }
        if self.get(record.version).is_some() {
            return Err(MsgLibError::DuplicateVersion(record.version));
        }
        record.frozen = true;
        events.push(LedgerEvent::LibraryRegistered { lib: record.version, kind: record.kind.to_string() });
        self.stores.insert(record.version, AttestationStore::default());
        self.records.push(record);
        Ok(())
    }

    pub fn store(&self, lib: LibVersion) -> Option<&AttestationStore> {
        self.stores.get(&lib)
    }

    fn uln(&self, lib: LibVersion) -> Result<&MessageLibRecord, MsgLibError> {
        let record = self.get(lib).ok_or(MsgLibError::UnknownLibrary(lib))?;
        match record.kind {
            LibraryKind::Uln => Ok(record),
            _ => Err(MsgLibError::WrongLibraryKind(lib)),
        }
    }

    /// Permissionless; only DVNs in the receiver's stack count towards quorum.
    pub fn dvn_verify(
        &mut self,
        lib: LibVersion,
        dvn: WorkerId,
        header: &PacketHeader,
        payload_hash: Hash32,
        events: &mut Vec<LedgerEvent>,
    ) -> Result<(), MsgLibError> {
        self.uln(lib)?;
        let header_hash = header.header_hash();
        let store = self.stores.entry(lib).or_default();
        if !store.attest(header_hash, payload_hash, dvn) {
            return Err(MsgLibError::DuplicateAttestation(dvn));
        }
        events.push(LedgerEvent::PayloadAttested { lib, dvn, nonce: header.nonce, header_hash, payload_hash });
        Ok(())
    }

    pub fn attesters(&self, lib: LibVersion, header: &PacketHeader, payload_hash: Hash32) -> BTreeSet<WorkerId> {
        self.stores.get(&lib).map(|s| s.attesters(header.header_hash(), payload_hash)).unwrap_or_default()
    }

    /// Quorum under the receiver's stack as it is configured right now.
    pub fn quorum(
        &self,
        lib: LibVersion,
        header: &PacketHeader,
        payload_hash: Hash32,
        endpoint: &Endpoint,
    ) -> Result<QuorumStatus, MsgLibError> {
        self.uln(lib)?;
        let path = header.path;
        let stack = endpoint.resolve_stack(path.receiver, path.src_eid).ok_or(EndpointError::NoReceiveStack)?;
        Ok(quorum_status(&self.attesters(lib, header, payload_hash), &UlnConfigView::from(stack)))
    }

    pub fn commit_if_ready(
        &self,
        lib: LibVersion,
        header: &PacketHeader,
        payload_hash: Hash32,
        endpoint: &mut Endpoint,
        height: u64,
        events: &mut Vec<LedgerEvent>,
    ) -> Result<CommitOutcome, MsgLibError> {
        if u16::from(header.version) != lib.major {
            return Err(MsgLibError::VersionMismatch { lib, version: header.version });
        }
        match self.quorum(lib, header, payload_hash, endpoint)? {
            QuorumStatus::Met => {
                endpoint.commit_verification(lib, header, payload_hash, height, events)?;
                Ok(CommitOutcome::Committed)
            }
            other => Ok(CommitOutcome::NotReady(other)),
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn whitelist_verify(
        &self,
        lib: LibVersion,
        caller: WorkerId,
        header: &PacketHeader,
        payload_hash: Hash32,
        endpoint: &mut Endpoint,
        height: u64,
        events: &mut Vec<LedgerEvent>,
    ) -> Result<(), MsgLibError> {
        let record = self.get(lib).ok_or(MsgLibError::UnknownLibrary(lib))?;
        let LibraryKind::Whitelist(allow) = &record.kind else {
            return Err(MsgLibError::WrongLibraryKind(lib));
        };
        if u16::from(header.version) != lib.major {
            return Err(MsgLibError::VersionMismatch { lib, version: header.version });
        }
        if !allow.contains(&caller) {
            return Err(MsgLibError::NotWhitelisted(caller));
        }
        endpoint.commit_verification(lib, header, payload_hash, height, events)?;
        Ok(())
    }

    /// Charges the sender, credits worker accounts and emits `PacketSent`.
    pub fn send_side(
        &self,
        out: &OutboundPacket,
        options: &[u8],
        fees: FeeSchedule,
        balances: &mut Balances,
        events: &mut Vec<LedgerEvent>,
    ) -> Result<Job, MsgLibError> {
        let record = self.get(out.send_library).ok_or(MsgLibError::UnknownLibrary(out.send_library))?;
        if u16::from(out.packet.header.version) != record.version.major {
            return Err(MsgLibError::VersionMismatch { lib: record.version, version: out.packet.header.version });
        }
        if !options.is_empty() {
            MessageOptions::decode(options).map_err(|e| MsgLibError::BadOptions(e.to_string()))?;
        }
        let dvns: Vec<WorkerId> = out.stack.all_dvns().collect();
        let fee = fees.per_dvn * dvns.len() as u128 + fees.executor;
        let sender = out.packet.header.path.sender;
        let have = balances.get(&sender).copied().unwrap_or(0);
        if have < fee {
            return Err(MsgLibError::InsufficientBalance { need: fee, have });
        }
        if fee > 0 {
            balances.insert(sender, have - fee);
            for dvn in &dvns {
                *balances.entry(dvn.account()).or_default() += fees.per_dvn;
            }
            *balances.entry(out.stack.executor.account()).or_default() += fees.executor;
        }
        let job = Job { dvns, executor: out.stack.executor, fee };
        events.push(LedgerEvent::PacketSent {
            packet: out.packet.clone(),
            options: options.to_vec(),
            send_library: out.send_library,
            dvns: job.dvns.clone(),
            executor: job.executor,
            fee,
        });
        Ok(job)
    }
}

impl LibraryDirectory for MessageLibRegistry {
    fn is_registered(&self, lib: LibVersion) -> bool {
        self.get(lib).is_some()
    }
}
