use std::collections::{BTreeMap, BTreeSet};

use super::{as_sent, receive_library_for, wrong_hash, Behavior, Observer, SentPacket, WorkerCtx};
use crate::codec::{EndpointId, Path};
use crate::ids::WorkerId;
use crate::msglib::LibraryKind;
use crate::simchain::TxCall;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dvn {
    pub id: WorkerId,
    pub watch: BTreeSet<EndpointId>,
    pub latency: u64,
    pub behavior: Behavior,
    observer: Observer,
    queue: BTreeMap<(Path, u64), SentPacket>,
}

impl Dvn {
    pub fn new(id: WorkerId, watch: BTreeSet<EndpointId>, latency: u64, behavior: Behavior) -> Self {
        Dvn { id, watch, latency: latency.max(1), behavior, observer: Observer::default(), queue: BTreeMap::new() }
    }

    /// Named in the job, or listed in the receiver's current stack.
    fn eligible(&self, ctx: &WorkerCtx<'_>, job: &SentPacket) -> bool {
        if job.dvns.contains(&self.id) {
            return true;
        }
        let path = job.path();
        let Ok(dst) = ctx.net.chain(path.dst_eid) else { return false };
        dst.state
            .endpoint
            .resolve_stack(path.receiver, path.src_eid)
            .is_some_and(|s| s.all_dvns().any(|d| d == self.id))
    }

    pub(super) fn step(&mut self, ctx: &mut WorkerCtx<'_>) {
        let watch = self.watch.clone();
        for (_, record) in self.observer.poll(ctx.net, Some(&watch)) {
            if let Some(job) = as_sent(record, ctx.tick) {
                self.queue.insert((job.path(), job.nonce()), job);
            }
        }
        if self.behavior.is_silent_at(ctx.tick) {
            return;
        }
        let keys: Vec<(Path, u64)> = self.queue.keys().copied().collect();
        for key in keys {
            let job = self.queue[&key].clone();
            let path = job.path();
            let Ok(dst) = ctx.net.chain(path.dst_eid) else {
                self.queue.remove(&key);
                continue;
            };
            if dst.state.endpoint.is_resolved(&path, job.nonce()) {
                self.queue.remove(&key);
                continue;
            }
            if job.observed_at + self.latency > ctx.tick || !self.eligible(ctx, &job) {
                continue;
            }
            if self.behavior == Behavior::Crashed {
                self.queue.remove(&key);
                continue;
            }
            let header = job.packet.header;
            let Some(lib) = receive_library_for(&dst.state.endpoint, &path, header.version) else {
                continue;
            };
            let kind = dst.state.libs.get(lib).map(|r| r.kind.clone());
            let honest = job.payload_hash();
            let account = self.id.account();
            match kind {
                Some(LibraryKind::Whitelist(_)) => {
                    if dst.state.endpoint.verified_hash(&path, header.nonce).is_some() {
                        self.queue.remove(&key);
                        continue;
                    }
                    ctx.trace.worker(ctx.tick, self.id, "WHITELIST_COMMIT", &job_fields(&job));
                    let call = TxCall::WhitelistCommit { worker: self.id, lib, header, payload_hash: honest };
                    if ctx.submit(path.dst_eid, account, call).is_applied() {
                        self.queue.remove(&key);
                    }
                }
                Some(LibraryKind::Uln) => {
                    let hash = if self.behavior == Behavior::Equivocate { wrong_hash(honest) } else { honest };
                    let action = if self.behavior == Behavior::Equivocate { "EQUIVOCATE" } else { "ATTEST" };
                    let mut fields = job_fields(&job);
                    fields.push(("lib", lib.to_string()));
                    fields.push(("hash", hash.to_string()));
                    ctx.trace.worker(ctx.tick, self.id, action, &fields);
                    ctx.submit(path.dst_eid, account, TxCall::DvnVerify { dvn: self.id, lib, header, payload_hash: hash });
                    if self.behavior == Behavior::Equivocate {
                        ctx.submit(path.dst_eid, account, TxCall::Commit { lib, header, payload_hash: hash });
                    }
                    self.queue.remove(&key);
                }
                _ => {}
            }
        }
    }
}

pub(super) fn job_fields(job: &SentPacket) -> Vec<(&'static str, String)> {
    let path = job.path();
    vec![
        ("src", path.src_eid.to_string()),
        ("dst", path.dst_eid.to_string()),
        ("nonce", job.nonce().to_string()),
    ]
}
