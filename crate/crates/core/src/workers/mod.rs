//! Offchain workers. Each is a polling actor stepped once per tick; all of
//! their effects go through chain transactions.

mod dvn;
mod executor;
mod precrime;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use crate::codec::{payload_hash, Address, EndpointId, Hash32, MessageOptions, Packet, Path};
use crate::endpoint::Endpoint;
use crate::events::LedgerEvent;
use crate::ids::{LibVersion, WorkerId};
use crate::simchain::{Network, Receipt, Record, Trace, Transaction};

pub use dvn::Dvn;
pub use executor::{Executor, Scope};
pub use precrime::PreCrime;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Behavior {
    Honest,
    /// Inactive for ticks `from..=to`; DVN jobs falling due meanwhile are deferred.
    Silent { from: u64, to: u64 },
    /// Attests `payloadHash` with its last byte flipped.
    Equivocate,
    /// Inactive for good; DVN jobs falling due are dropped.
    Crashed,
}

impl Behavior {
    pub fn is_silent_at(self, tick: u64) -> bool {
        matches!(self, Behavior::Silent { from, to } if (from..=to).contains(&tick))
    }
}

impl fmt::Display for Behavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Behavior::Honest => f.write_str("honest"),
            Behavior::Silent { from, to } => write!(f, "silent:{from}-{to}"),
            Behavior::Equivocate => f.write_str("equivocate"),
            Behavior::Crashed => f.write_str("crashed"),
        }
    }
}

impl FromStr for Behavior {
    type Err = String;

    /// `honest`, `crashed`, `equivocate` or `silent:<from>-<to>`.
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "honest" => Ok(Behavior::Honest),
            "crashed" => Ok(Behavior::Crashed),
            "equivocate" => Ok(Behavior::Equivocate),
            _ => {
                let range = s.strip_prefix("silent:").ok_or_else(|| format!("unknown behavior `{s}`"))?;
                let (from, to) = range.split_once('-').ok_or_else(|| format!("bad silent range `{range}`"))?;
                let from = from.parse().map_err(|_| format!("bad tick `{from}`"))?;
                let to = to.parse().map_err(|_| format!("bad tick `{to}`"))?;
                if from > to {
                    return Err(format!("empty silent range `{range}`"));
                }
                Ok(Behavior::Silent { from, to })
            }
        }
    }
}

/// Deterministic equivocation: the honest hash with its final byte XOR 0xFF.
pub fn wrong_hash(hash: Hash32) -> Hash32 {
    let mut bytes = hash.0;
    bytes[31] ^= 0xff;
    Hash32(bytes)
}

/// A `PacketSent` event as seen by a worker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentPacket {
    pub packet: Packet,
    pub options: Vec<u8>,
    pub dvns: Vec<WorkerId>,
    pub executor: WorkerId,
    pub observed_at: u64,
}

impl SentPacket {
    pub fn path(&self) -> Path {
        self.packet.header.path
    }

    pub fn nonce(&self) -> u64 {
        self.packet.header.nonce
    }

    pub fn payload_hash(&self) -> Hash32 {
        payload_hash(&self.packet.header.guid, &self.packet.payload)
    }

    pub fn decoded_options(&self) -> Option<MessageOptions> {
        MessageOptions::decode(&self.options).ok()
    }

    /// Whether the options carry a Type 3 entry addressed to `worker`.
    pub fn names_worker(&self, worker: WorkerId) -> bool {
        matches!(self.decoded_options(), Some(o) if o.entries_for(worker.0).next().is_some())
    }
}

/// Per-chain read cursors over ledger events.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Observer {
    cursors: BTreeMap<EndpointId, usize>,
}

impl Observer {
    /// New records since the last poll, restricted to `chains` when given.
    pub fn poll<'n>(&mut self, net: &'n Network, chains: Option<&BTreeSet<EndpointId>>) -> Vec<(EndpointId, &'n Record)> {
        let mut out = Vec::new();
        for chain in net.chains() {
            if chains.is_some_and(|c| !c.contains(&chain.eid())) {
                continue;
            }
            let cursor = self.cursors.entry(chain.eid()).or_insert(0);
            out.extend(chain.records()[*cursor..].iter().map(|r| (chain.eid(), r)));
            *cursor = chain.records().len();
        }
        out
    }
}

pub(crate) fn as_sent(record: &Record, tick: u64) -> Option<SentPacket> {
    match &record.event {
        LedgerEvent::PacketSent { packet, options, dvns, executor, .. } => Some(SentPacket {
            packet: packet.clone(),
            options: options.clone(),
            dvns: dvns.clone(),
            executor: *executor,
            observed_at: tick,
        }),
        _ => None,
    }
}

/// The receiving library able to handle a packet of `version`: the current
/// one, or the previous one while it may still be in its grace window.
pub fn receive_library_for(endpoint: &Endpoint, path: &Path, version: u8) -> Option<LibVersion> {
    let stack = endpoint.resolve_stack(path.receiver, path.src_eid)?;
    [Some(stack.receive_library), stack.prev_receive_library]
        .into_iter()
        .flatten()
        .find(|lib| lib.major == u16::from(version))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Allow,
    Halt { minted: u128, locked: u128 },
}

/// Pre-Crime verdicts, keyed by packet.
pub type VerdictBoard = BTreeMap<(Path, u64), Verdict>;

/// What a worker may touch during its step.
pub struct WorkerCtx<'a> {
    pub net: &'a mut Network,
    pub tick: u64,
    pub trace: &'a mut Trace,
    pub verdicts: &'a mut VerdictBoard,
    /// Workers whose Type 3 option entries gate assigned executors.
    pub precrime_ids: &'a BTreeSet<WorkerId>,
}

impl WorkerCtx<'_> {
    /// Submits, then records resulting chain events in the trace.
    pub fn submit(&mut self, eid: EndpointId, caller: Address, call: crate::simchain::TxCall) -> Receipt {
        let receipt = match self.net.submit_tx(eid, Transaction { caller, call }) {
            Ok(r) => r,
            Err(e) => Receipt::Reverted(format!("{e}").replace(' ', "_")),
        };
        self.trace.flush(self.net);
        receipt
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Worker {
    Dvn(Dvn),
    Executor(Executor),
    PreCrime(PreCrime),
}

impl Worker {
    pub fn id(&self) -> WorkerId {
        match self {
            Worker::Dvn(w) => w.id,
            Worker::Executor(w) => w.id,
            Worker::PreCrime(w) => w.id,
        }
    }

    pub fn behavior(&self) -> Behavior {
        match self {
            Worker::Dvn(w) => w.behavior,
            Worker::Executor(w) => w.behavior,
            Worker::PreCrime(w) => w.behavior,
        }
    }

    /// Validates and applies a fault transition.
    pub fn set_behavior(&mut self, behavior: Behavior) -> Result<(), String> {
        if behavior == Behavior::Equivocate && !matches!(self, Worker::Dvn(_)) {
            return Err("only DVNs can equivocate".into());
        }
        match self {
            Worker::Dvn(w) => w.behavior = behavior,
            Worker::Executor(w) => w.behavior = behavior,
            Worker::PreCrime(w) => w.behavior = behavior,
        }
        Ok(())
    }

    pub fn step(&mut self, ctx: &mut WorkerCtx<'_>) {
        match self {
            Worker::Dvn(w) => w.step(ctx),
            Worker::Executor(w) => w.step(ctx),
            Worker::PreCrime(w) => w.step(ctx),
        }
    }
}

#[cfg(test)]
mod tests;
