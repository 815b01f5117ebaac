use std::collections::{BTreeMap, BTreeSet};

use super::dvn::job_fields;
use super::{as_sent, receive_library_for, Behavior, Observer, SentPacket, Verdict, WorkerCtx};
use crate::codec::{EndpointId, Guid, MessageOptions, Path};
use crate::endpoint::{ComposeKey, ComposeStatus, NIL_PAYLOAD_HASH};
use crate::events::LedgerEvent;
use crate::ids::WorkerId;
use crate::msglib::{LibraryKind, QuorumStatus};
use crate::simchain::{Receipt, TxCall};

/// Which packets an executor handles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    /// Packets whose job names this executor; honours Pre-Crime verdicts.
    Assigned,
    /// Every packet; a permissionless third party such as an end user.
    Any,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Executor {
    pub id: WorkerId,
    pub behavior: Behavior,
    pub scope: Scope,
    observer: Observer,
    packets: BTreeMap<(Path, u64), SentPacket>,
    guids: BTreeSet<Guid>,
    composes: BTreeMap<(EndpointId, ComposeKey), Vec<u8>>,
}

impl Executor {
    pub fn new(id: WorkerId, behavior: Behavior, scope: Scope) -> Self {
        Executor {
            id,
            behavior,
            scope,
            observer: Observer::default(),
            packets: BTreeMap::new(),
            guids: BTreeSet::new(),
            composes: BTreeMap::new(),
        }
    }

    fn observe(&mut self, ctx: &mut WorkerCtx<'_>) {
        for (eid, record) in self.observer.poll(ctx.net, None) {
            if let Some(job) = as_sent(record, ctx.tick) {
                if self.scope == Scope::Any || job.executor == self.id {
                    self.guids.insert(job.packet.header.guid);
                    self.packets.insert((job.path(), job.nonce()), job);
                }
            } else if let LedgerEvent::ComposeSent { from, to, guid, index, message, .. } = &record.event {
                if self.scope == Scope::Any || self.guids.contains(guid) {
                    let key = ComposeKey { from: *from, to: *to, guid: *guid, index: *index };
                    self.composes.insert((eid, key), message.clone());
                }
            }
        }
    }

    /// `None` while the verdict is pending.
    fn cleared_by_precrime(&self, ctx: &WorkerCtx<'_>, job: &SentPacket) -> Option<bool> {
        if self.scope == Scope::Any || !ctx.precrime_ids.iter().any(|w| job.names_worker(*w)) {
            return Some(true);
        }
        match ctx.verdicts.get(&(job.path(), job.nonce()))? {
            Verdict::Allow => Some(true),
            Verdict::Halt { .. } => Some(false),
        }
    }

    pub(super) fn step(&mut self, ctx: &mut WorkerCtx<'_>) {
        self.observe(ctx);
        if self.behavior == Behavior::Crashed || self.behavior.is_silent_at(ctx.tick) {
            return;
        }
        let mut blocked: BTreeSet<Path> = BTreeSet::new();
        let keys: Vec<(Path, u64)> = self.packets.keys().copied().collect();
        for key in keys {
            let job = self.packets[&key].clone();
            let (path, nonce) = key;
            let Ok(dst) = ctx.net.chain(path.dst_eid) else {
                self.packets.remove(&key);
                continue;
            };
            let endpoint = &dst.state.endpoint;
            if endpoint.is_resolved(&path, nonce) {
                self.packets.remove(&key);
                continue;
            }
            match self.cleared_by_precrime(ctx, &job) {
                None => continue,
                Some(false) => {
                    ctx.trace.worker(ctx.tick, self.id, "HALTED", &job_fields(&job));
                    self.packets.remove(&key);
                    continue;
                }
                Some(true) => {}
            }
            let hash = job.payload_hash();
            let mut stored = endpoint.verified_hash(&path, nonce);
            if stored != Some(hash) {
                let header = job.packet.header;
                let Some(lib) = receive_library_for(endpoint, &path, header.version) else { continue };
                let is_uln = matches!(dst.state.libs.get(lib).map(|r| &r.kind), Some(LibraryKind::Uln));
                let authorized = endpoint
                    .resolve_stack(path.receiver, path.src_eid)
                    .is_some_and(|s| s.authorizes_receive(lib, dst.height()));
                let ready = is_uln
                    && authorized
                    && dst.state.libs.quorum(lib, &header, hash, endpoint) == Ok(QuorumStatus::Met);
                if !ready {
                    continue;
                }
                let mut fields = job_fields(&job);
                fields.push(("lib", lib.to_string()));
                ctx.trace.worker(ctx.tick, self.id, "COMMIT", &fields);
                if ctx.submit(path.dst_eid, self.id.account(), TxCall::Commit { lib, header, payload_hash: hash }).is_applied() {
                    stored = Some(hash);
                }
            }
            if stored != Some(hash) || blocked.contains(&path) {
                continue;
            }
            let Ok(dst) = ctx.net.chain(path.dst_eid) else { continue };
            let endpoint = &dst.state.endpoint;
            let lazy = endpoint.lazy_inbound_nonce(&path);
            let gap = (lazy + 1..nonce).any(|m| {
                let h = endpoint.verified_hash(&path, m);
                h.is_none() || h == Some(NIL_PAYLOAD_HASH)
            });
            if gap {
                blocked.insert(path);
                continue;
            }
            let (gas, native_drop) = match job.decoded_options() {
                Some(MessageOptions::Gas { execution_gas }) => (execution_gas, None),
                Some(MessageOptions::GasAndDrop { execution_gas, native_drop, receiver }) => {
                    (execution_gas, Some((receiver, native_drop)))
                }
                _ => (0, None),
            };
            let mut fields = job_fields(&job);
            fields.push(("gas", gas.to_string()));
            if let Some((_, amount)) = native_drop {
                fields.push(("drop", amount.to_string()));
            }
            ctx.trace.worker(ctx.tick, self.id, "DELIVER", &fields);
            let call = TxCall::LzReceive {
                path,
                nonce,
                guid: job.packet.header.guid,
                message: job.packet.payload.clone(),
                extra: Vec::new(),
                native_drop,
            };
            match ctx.submit(path.dst_eid, self.id.account(), call) {
                Receipt::Applied { .. } => {
                    self.packets.remove(&key);
                }
                Receipt::OutOfBudget => {
                    blocked.insert(path);
                }
                Receipt::Reverted(code) if code == "Censorship" => {
                    blocked.insert(path);
                }
                Receipt::Reverted(_) => {}
            }
        }
        self.run_composes(ctx);
    }

    fn run_composes(&mut self, ctx: &mut WorkerCtx<'_>) {
        let pending: Vec<((EndpointId, ComposeKey), Vec<u8>)> =
            self.composes.iter().map(|(k, v)| (*k, v.clone())).collect();
        for ((eid, key), message) in pending {
            let status = ctx.net.chain(eid).ok().and_then(|c| c.state.endpoint.compose_entry(&key)).map(|e| e.status);
            if status != Some(ComposeStatus::Stored) {
                self.composes.remove(&(eid, key));
                continue;
            }
            ctx.trace.worker(ctx.tick, self.id, "COMPOSE", &[("chain", eid.to_string()), ("index", key.index.to_string())]);
            if ctx.submit(eid, self.id.account(), TxCall::LzCompose { key, message }).is_applied() {
                self.composes.remove(&(eid, key));
            }
        }
    }
}
