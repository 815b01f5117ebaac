use std::collections::BTreeSet;

use super::dvn::job_fields;
use super::{as_sent, Behavior, Observer, Verdict, WorkerCtx};
use crate::endpoint::{ComposeOutbox, Delivery, MessageReceiver, Origin};
use crate::ids::WorkerId;
use crate::oapps::BridgeState;

/// Simulates each packet addressed to it against forks of the receiver's peer
/// chains and posts a verdict for assigned executors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreCrime {
    pub id: WorkerId,
    pub behavior: Behavior,
    observer: Observer,
}

impl PreCrime {
    pub fn new(id: WorkerId) -> Self {
        PreCrime { id, behavior: Behavior::Honest, observer: Observer::default() }
    }

    pub(super) fn step(&mut self, ctx: &mut WorkerCtx<'_>) {
        let jobs: Vec<_> = self
            .observer
            .poll(ctx.net, None)
            .into_iter()
            .filter_map(|(_, r)| as_sent(r, ctx.tick))
            .filter(|job| job.names_worker(self.id))
            .collect();
        if self.behavior == Behavior::Crashed || self.behavior.is_silent_at(ctx.tick) {
            return;
        }
        for job in jobs {
            let path = job.path();
            let Ok(dst) = ctx.net.fork_state(path.dst_eid) else { continue };
            let Some(mut app) = dst.state.apps.get(&path.receiver).cloned() else { continue };
            let Some(bridge) = app.bridge() else { continue };
            let peers: BTreeSet<_> = bridge.peers.iter().map(|(e, a)| (*e, *a)).collect();
            let delivery = Delivery {
                origin: Origin { src_eid: path.src_eid, sender: path.sender, nonce: job.nonce() },
                receiver: path.receiver,
                guid: job.packet.header.guid,
                message: &job.packet.payload,
                extra_data: &[],
            };
            // an aborting callback changes nothing, so the fork keeps its state
            let _ = app.lz_receive(&delivery, &mut ComposeOutbox::default());
            let mut states: Vec<BridgeState> = app.bridge().cloned().into_iter().collect();
            for (eid, addr) in peers {
                if eid == path.dst_eid && addr == path.receiver {
                    continue;
                }
                let Ok(fork) = ctx.net.fork_state(eid) else { continue };
                if let Some(b) = fork.state.apps.get(&addr).and_then(|a| a.bridge()) {
                    states.push(b.clone());
                }
            }
            let minted: u128 = states.iter().map(|b| b.minted).sum();
            let locked: u128 = states.iter().map(|b| b.locked).sum();
            let verdict = if minted <= locked { Verdict::Allow } else { Verdict::Halt { minted, locked } };
            let mut fields = job_fields(&job);
            fields.push(("verdict", if verdict == Verdict::Allow { "allow" } else { "halt" }.to_string()));
            fields.push(("minted", minted.to_string()));
            fields.push(("locked", locked.to_string()));
            ctx.trace.worker(ctx.tick, self.id, "PRECRIME", &fields);
            ctx.verdicts.insert((path, job.nonce()), verdict);
        }
    }
}
