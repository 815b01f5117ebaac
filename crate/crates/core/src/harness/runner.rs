use std::collections::{BTreeMap, BTreeSet};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    path_between, AppRef, BalanceField, Command, HashSpec, Mutant, PacketState, PayloadSpec, Predicate, Role, Scenario,
    ScenarioError, TimedCommand,
};
use crate::codec::{Address, EndpointId, Hash32, MessageOptions, Packet, Path};
use crate::endpoint::{ComposeStatus, NIL_PAYLOAD_HASH};
use crate::events::LedgerEvent;
use crate::ids::{LibVersion, WorkerId};
use crate::msglib::MessageLibRecord;
use crate::oapps::bridge_conservation;
use crate::simchain::{Network, Receipt, Trace, Transaction, TxCall};
use crate::workers::{
    receive_library_for, wrong_hash, Dvn, Executor, PreCrime, Scope, VerdictBoard, Worker, WorkerCtx,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssertionResult {
    pub tick: u64,
    pub line: usize,
    pub text: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub trace: Trace,
    pub assertions: Vec<AssertionResult>,
    /// Ticks at which Σminted > Σlocked over all bridges.
    pub invariant_violations: Vec<u64>,
    pub network: Network,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn trace_text(&self) -> String {
        self.trace.text()
    }

    /// Hex SHA-256 of the trace text.
    pub fn digest(&self) -> String {
        crate::codec::sha256(&[self.trace_text().as_bytes()]).to_string()
    }

    /// Every `(path, nonce)` delivered on any chain.
    pub fn delivered(&self) -> BTreeSet<(Path, u64)> {
        delivered_set(&self.network)
    }
}

pub fn delivered_set(net: &Network) -> BTreeSet<(Path, u64)> {
    net.chains()
        .flat_map(|c| c.records())
        .filter_map(|r| match r.event {
            LedgerEvent::PacketDelivered { path, nonce, .. } => Some((path, nonce)),
            _ => None,
        })
        .collect()
}

/// The sent payload with one extra byte; never hashes to the honest value.
pub(crate) fn wrong_message(payload: &[u8]) -> Vec<u8> {
    let mut message = payload.to_vec();
    message.push(0xff);
    message
}

fn genesis_error(reason: String) -> ScenarioError {
    ScenarioError::Syntax { line: 0, reason: format!("genesis: {reason}") }
}

/// Runs a parsed scenario to completion.
pub fn run(scenario: &Scenario) -> Result<RunReport, ScenarioError> {
    let mut runner = Runner::new(scenario)?;
    let last = scenario.last_tick();
    let mut next = 0;
    for tick in 0..=last {
        runner.tick = tick;
        while next < scenario.timeline.len() && scenario.timeline[next].tick == tick {
            runner.timed(&scenario.timeline[next]);
            next += 1;
        }
        if tick > 0 {
            for chain in runner.net.chains_mut() {
                if tick % chain.config.block_time_ticks == 0 {
                    chain.advance(1).expect("one block");
                }
            }
            runner.trace.flush(&runner.net);
        }
        runner.step_workers();
        runner.check_invariant();
    }
    Ok(RunReport {
        trace: runner.trace,
        assertions: runner.assertions,
        invariant_violations: runner.violations,
        network: runner.net,
    })
}

struct Runner {
    net: Network,
    trace: Trace,
    workers: Vec<Worker>,
    verdicts: VerdictBoard,
    precrime_ids: BTreeSet<WorkerId>,
    rng: ChaCha8Rng,
    assertions: Vec<AssertionResult>,
    violations: Vec<u64>,
    tick: u64,
    mutant: Mutant,
}

impl Runner {
    fn new(sc: &Scenario) -> Result<Self, ScenarioError> {
        let mut net = Network::new();
        for config in &sc.chains {
            net.add_chain(config.clone()).map_err(|e| genesis_error(e.to_string()))?;
        }
        let eids: Vec<EndpointId> = sc.chains.iter().map(|c| c.eid).collect();
        for lib in &sc.libraries {
            for eid in lib.chains.as_ref().unwrap_or(&eids) {
                let chain = net.chain_mut(*eid).map_err(|e| genesis_error(e.to_string()))?;
                let record = MessageLibRecord::new(lib.version, lib.kind.clone());
                let caller = chain.config.admin;
                let receipt = chain.submit(Transaction { caller, call: TxCall::Register { record } });
                if !receipt.is_applied() {
                    return Err(genesis_error(format!("registering {} failed: {}", lib.version, receipt.code())));
                }
            }
        }
        for o in &sc.oapps {
            net.chain_mut(o.app.chain).expect("parsed").deploy(o.app.addr, o.state.clone(), o.balance);
        }
        for (a, b) in &sc.peers {
            let (a, b) = (&sc.oapp(a).expect("parsed").app, &sc.oapp(b).expect("parsed").app);
            for (this, other) in [(a, b), (b, a)] {
                let chain = net.chain_mut(this.chain).expect("parsed");
                let bridge = chain.state.apps.get_mut(&this.addr).and_then(|app| app.bridge_mut().ok());
                bridge.expect("parser checked kind").peers.insert(other.chain, other.addr);
            }
        }
        for d in &sc.defaults {
            let chain = net.chain_mut(d.chain).expect("parsed");
            let caller = chain.config.admin;
            let call = TxCall::SetDefaultStack { remote: d.remote, stack: d.stack.clone() };
            let receipt = chain.submit(Transaction { caller, call });
            if !receipt.is_applied() {
                return Err(genesis_error(format!("default stack on {} failed: {}", d.chain, receipt.code())));
            }
        }
        for s in &sc.stacks {
            let call = TxCall::SetStack { remote: s.remote, setting: s.setting.clone() };
            let receipt = net.submit_tx(s.oapp.chain, Transaction { caller: s.oapp.addr, call }).expect("parsed");
            if !receipt.is_applied() {
                return Err(genesis_error(format!("stack for {} failed: {}", s.oapp.name, receipt.code())));
            }
        }
        for chain in net.chains_mut() {
            chain.seal_genesis();
        }
        let mut trace = Trace::default();
        trace.flush(&net);

        let mut precrime_ids = BTreeSet::new();
        let workers = sc
            .workers
            .iter()
            .map(|w| match &w.role {
                Role::Dvn { watch, latency } => {
                    Worker::Dvn(Dvn::new(w.id, watch.iter().copied().collect(), *latency, w.behavior))
                }
                Role::Executor => Worker::Executor(Executor::new(w.id, w.behavior, Scope::Assigned)),
                Role::User => Worker::Executor(Executor::new(w.id, w.behavior, Scope::Any)),
                Role::PreCrime => {
                    precrime_ids.insert(w.id);
                    let mut p = PreCrime::new(w.id);
                    p.behavior = w.behavior;
                    Worker::PreCrime(p)
                }
            })
            .collect();
        Ok(Runner {
            net,
            trace,
            workers,
            verdicts: VerdictBoard::new(),
            precrime_ids,
            rng: ChaCha8Rng::seed_from_u64(sc.seed),
            assertions: Vec::new(),
            violations: Vec::new(),
            tick: 0,
            mutant: sc.mutant,
        })
    }

    fn step_workers(&mut self) {
        let mut ctx = WorkerCtx {
            net: &mut self.net,
            tick: self.tick,
            trace: &mut self.trace,
            verdicts: &mut self.verdicts,
            precrime_ids: &self.precrime_ids,
        };
        for worker in &mut self.workers {
            worker.step(&mut ctx);
        }
    }

    fn check_invariant(&mut self) {
        let bridges: Vec<_> = self.net.chains().flat_map(|c| c.state.apps.values()).filter_map(|a| a.bridge()).collect();
        if bridges.is_empty() || bridge_conservation(bridges.iter().copied()) {
            return;
        }
        let minted: u128 = bridges.iter().map(|b| b.minted).sum();
        let locked: u128 = bridges.iter().map(|b| b.locked).sum();
        self.trace.note(format!("{} INVARIANT bridge-conservation minted={minted} locked={locked}", self.tick));
        self.violations.push(self.tick);
    }

    fn submit(&mut self, eid: EndpointId, caller: Address, call: TxCall) -> Receipt {
        let receipt = match self.net.submit_tx(eid, Transaction { caller, call }) {
            Ok(r) => r,
            Err(e) => Receipt::Reverted(e.to_string().replace(' ', "_")),
        };
        self.trace.flush(&self.net);
        receipt
    }

    fn record(&mut self, cmd: &TimedCommand, passed: bool, detail: String) {
        self.assertions.push(AssertionResult { tick: self.tick, line: cmd.line, text: cmd.text.clone(), passed, detail });
    }

    fn timed(&mut self, cmd: &TimedCommand) {
        if let Command::Assert(pred) = &cmd.command {
            let (passed, detail) = self.evaluate(pred);
            self.record(cmd, passed, detail);
            return;
        }
        let receipt = self.action(&cmd.command);
        if let Some(expect) = &cmd.expect {
            let got = receipt.code().to_string();
            let passed = &got == expect;
            self.record(cmd, passed, format!("expected {expect}, got {got}"));
        }
    }

    fn packet(&self, path: &Path, nonce: u64) -> Option<(Packet, Vec<u8>)> {
        let chain = self.net.chain(path.src_eid).ok()?;
        chain.records().iter().find_map(|r| match &r.event {
            LedgerEvent::PacketSent { packet, options, .. }
                if packet.header.path == *path && packet.header.nonce == nonce =>
            {
                Some((packet.clone(), options.clone()))
            }
            _ => None,
        })
    }

    fn library(&self, path: &Path, version: u8, lib: Option<LibVersion>) -> Option<LibVersion> {
        lib.or_else(|| receive_library_for(&self.net.chain(path.dst_eid).ok()?.state.endpoint, path, version))
    }

    fn resolve_hash(&self, spec: &HashSpec, path: &Path, nonce: u64) -> Hash32 {
        match spec {
            HashSpec::Nil => NIL_PAYLOAD_HASH,
            HashSpec::Explicit(h) => *h,
            HashSpec::Honest => self.packet(path, nonce).map(|(p, _)| p.payload_hash()).unwrap_or_default(),
            HashSpec::Stored => self
                .net
                .chain(path.dst_eid)
                .ok()
                .and_then(|c| c.state.endpoint.verified_hash(path, nonce))
                .unwrap_or_default(),
        }
    }

    fn action(&mut self, command: &Command) -> Receipt {
        let unknown_packet = || Receipt::Reverted("UnknownPacket".into());
        let no_library = || Receipt::Reverted("NoReceiveLibrary".into());
        match command {
            Command::Send { app, to, payload, options } => {
                let payload = match payload {
                    PayloadSpec::Bytes(b) => b.clone(),
                    PayloadSpec::Random(n) => {
                        let mut bytes = vec![0u8; *n];
                        self.rng.fill_bytes(&mut bytes);
                        bytes
                    }
                };
                let call = TxCall::Send { dst: to.chain, receiver: to.addr, payload, options: options.clone() };
                self.submit(app.chain, app.addr, call)
            }
            Command::Bridge { app, dst, amount, compose, unbacked, options } => {
                let call = TxCall::BridgeSend {
                    app: app.addr,
                    dst: *dst,
                    amount: *amount,
                    compose: *compose,
                    unbacked: *unbacked,
                    options: options.clone(),
                };
                self.submit(app.chain, app.addr, call)
            }
            Command::Advance { chain, blocks } => {
                let r = self.net.advance(*chain, *blocks);
                self.trace.flush(&self.net);
                match r {
                    Ok(_) => Receipt::Applied { budget_used: 0 },
                    Err(e) => Receipt::Reverted(e.to_string().replace(' ', "_")),
                }
            }
            Command::Fault { worker, behavior } => {
                let Some(w) = self.workers.iter_mut().find(|w| w.id() == *worker) else {
                    return Receipt::Reverted("UnknownWorker".into());
                };
                if let Err(e) = w.set_behavior(*behavior) {
                    return Receipt::Reverted(e.replace(' ', "_"));
                }
                self.trace.worker(self.tick, *worker, "FAULT", &[("behavior", behavior.to_string())]);
                Receipt::Applied { budget_used: 0 }
            }
            Command::Stack(decl) => {
                let call = TxCall::SetStack { remote: decl.remote, setting: decl.setting.clone() };
                self.submit(decl.oapp.chain, decl.oapp.addr, call)
            }
            Command::Default(decl) => {
                let Ok(chain) = self.net.chain(decl.chain) else { return unknown_packet() };
                let admin = chain.config.admin;
                self.submit(decl.chain, admin, TxCall::SetDefaultStack { remote: decl.remote, stack: decl.stack.clone() })
            }
            Command::RecvLib { oapp, remote, lib, grace } => {
                let call = TxCall::SetReceiveLibrary { remote: *remote, lib: *lib, grace_blocks: *grace };
                self.submit(oapp.chain, oapp.addr, call)
            }
            Command::Skip { oapp, from, nonce } => {
                let path = path_between(from, oapp);
                if self.mutant == Mutant::SkipWithoutNonceCheck {
                    let Ok(chain) = self.net.chain_mut(oapp.chain) else { return unknown_packet() };
                    chain.state.endpoint.force_skip_unchecked(&path, *nonce);
                    return Receipt::Applied { budget_used: 0 };
                }
                self.submit(oapp.chain, oapp.addr, TxCall::Skip { path, nonce: *nonce })
            }
            Command::Clear { oapp, from, nonce, wrong } => {
                let path = path_between(from, oapp);
                let Some((packet, _)) = self.packet(&path, *nonce) else { return unknown_packet() };
                let message = if *wrong { wrong_message(&packet.payload) } else { packet.payload };
                let call = TxCall::Clear { path, nonce: *nonce, guid: packet.header.guid, message };
                self.submit(oapp.chain, oapp.addr, call)
            }
            Command::Nilify { oapp, from, nonce, hash } | Command::Burn { oapp, from, nonce, hash } => {
                let path = path_between(from, oapp);
                let payload_hash = self.resolve_hash(hash, &path, *nonce);
                let call = if matches!(command, Command::Nilify { .. }) {
                    TxCall::Nilify { path, nonce: *nonce, payload_hash }
                } else {
                    TxCall::Burn { path, nonce: *nonce, payload_hash }
                };
                self.submit(oapp.chain, oapp.addr, call)
            }
            Command::Commit { actor, from, to, nonce, wrong, lib } => {
                let path = path_between(from, to);
                let Some((packet, _)) = self.packet(&path, *nonce) else { return unknown_packet() };
                let Some(lib) = self.library(&path, packet.header.version, *lib) else { return no_library() };
                let honest = packet.payload_hash();
                let payload_hash = if *wrong { wrong_hash(honest) } else { honest };
                let call = TxCall::Commit { lib, header: packet.header, payload_hash };
                self.submit(to.chain, *actor, call)
            }
            Command::Attest { dvn, from, to, nonce, wrong, lib } => {
                let path = path_between(from, to);
                let Some((packet, _)) = self.packet(&path, *nonce) else { return unknown_packet() };
                let Some(lib) = self.library(&path, packet.header.version, *lib) else { return no_library() };
                let honest = packet.payload_hash();
                let payload_hash = if *wrong { wrong_hash(honest) } else { honest };
                let call = TxCall::DvnVerify { dvn: *dvn, lib, header: packet.header, payload_hash };
                self.submit(to.chain, dvn.account(), call)
            }
            Command::Deliver { actor, from, to, nonce, wrong } => {
                let path = path_between(from, to);
                let Some((packet, options)) = self.packet(&path, *nonce) else { return unknown_packet() };
                let native_drop = match MessageOptions::decode(&options) {
                    Ok(MessageOptions::GasAndDrop { native_drop, receiver, .. }) => Some((receiver, native_drop)),
                    _ => None,
                };
                let call = TxCall::LzReceive {
                    path,
                    nonce: *nonce,
                    guid: packet.header.guid,
                    message: if *wrong { wrong_message(&packet.payload) } else { packet.payload },
                    extra: Vec::new(),
                    native_drop,
                };
                self.submit(to.chain, *actor, call)
            }
            Command::Compose { actor, to } => self.compose(*actor, to),
            Command::TopUp { app, amount } => self.submit(app.chain, app.addr, TxCall::TopUp { app: app.addr, amount: *amount }),
            Command::Assert(_) => unreachable!("handled by timed"),
        }
    }

    /// Executes every stored compose addressed to `to`; reports the last receipt.
    fn compose(&mut self, actor: Address, to: &AppRef) -> Receipt {
        let Ok(chain) = self.net.chain(to.chain) else { return Receipt::Reverted("UnknownChain".into()) };
        let messages: BTreeMap<_, _> = chain
            .records()
            .iter()
            .filter_map(|r| match &r.event {
                LedgerEvent::ComposeSent { from, to, guid, index, message, .. } => Some((
                    crate::endpoint::ComposeKey { from: *from, to: *to, guid: *guid, index: *index },
                    message.clone(),
                )),
                _ => None,
            })
            .collect();
        let pending: Vec<_> = chain
            .state
            .endpoint
            .compose_entries()
            .filter(|(k, e)| k.to == to.addr && e.status == ComposeStatus::Stored)
            .map(|(k, _)| *k)
            .collect();
        let mut receipt = Receipt::Reverted("NoSuchCompose".into());
        for key in pending {
            let message = messages.get(&key).cloned().unwrap_or_default();
            receipt = self.submit(to.chain, actor, TxCall::LzCompose { key, message });
        }
        receipt
    }

    fn packet_state(&self, path: &Path, nonce: u64) -> PacketState {
        let Ok(src) = self.net.chain(path.src_eid) else { return PacketState::NotSent };
        if src.state.endpoint.outbound_nonce(path) < nonce {
            return PacketState::NotSent;
        }
        let Ok(dst) = self.net.chain(path.dst_eid) else { return PacketState::Sent };
        for r in dst.records() {
            let terminal = match &r.event {
                LedgerEvent::PacketDelivered { path: p, nonce: n, .. } if p == path && *n == nonce => PacketState::Received,
                LedgerEvent::PacketCleared { path: p, nonce: n, .. } if p == path && *n == nonce => PacketState::Cleared,
                LedgerEvent::PacketSkipped { path: p, nonce: n } if p == path && *n == nonce => PacketState::Skipped,
                LedgerEvent::PacketBurnt { path: p, nonce: n, .. } if p == path && *n == nonce => PacketState::Burned,
                _ => continue,
            };
            return terminal;
        }
        match dst.state.endpoint.verified_hash(path, nonce) {
            Some(h) if h == NIL_PAYLOAD_HASH => return PacketState::Nilified,
            Some(_) => return PacketState::Verified,
            None => {}
        }
        let committable = self.packet(path, nonce).and_then(|(packet, _)| {
            let lib = self.library(path, packet.header.version, None)?;
            dst.state.libs.quorum(lib, &packet.header, packet.payload_hash(), &dst.state.endpoint).ok()
        });
        if committable == Some(crate::msglib::QuorumStatus::Met) {
            PacketState::Committable
        } else {
            PacketState::Sent
        }
    }

    fn evaluate(&self, pred: &Predicate) -> (bool, String) {
        let cmp = |got: String, want: String| (got == want, format!("expected {want}, got {got}"));
        match pred {
            Predicate::State { path, nonce, is } => cmp(format!("{:?}", self.packet_state(path, *nonce)), format!("{is:?}")),
            Predicate::Committable { path, nonce, is } => {
                let got = self.packet(path, *nonce).and_then(|(packet, _)| {
                    let dst = self.net.chain(path.dst_eid).ok()?;
                    let lib = self.library(path, packet.header.version, None)?;
                    dst.state.libs.quorum(lib, &packet.header, packet.payload_hash(), &dst.state.endpoint).ok()
                });
                cmp(got.map_or("unknown".into(), |q| q.as_str().into()), is.as_str().into())
            }
            Predicate::DeliveredCount { path, is } => {
                let n = delivered_set(&self.net).iter().filter(|(p, _)| path.is_none_or(|want| *p == want)).count();
                cmp(n.to_string(), is.to_string())
            }
            Predicate::Balance { chain, account, field, is } => {
                let got = self.net.chain(*chain).ok().map(|c| {
                    let app = c.state.apps.get(account);
                    let bridge = app.and_then(|a| a.bridge());
                    let swap = app.and_then(|a| a.swap());
                    match field {
                        BalanceField::Native => c.state.balances.get(account).copied().unwrap_or(0),
                        BalanceField::Minted => bridge.map_or(0, |b| b.minted),
                        BalanceField::Locked => bridge.map_or(0, |b| b.locked),
                        BalanceField::Available => bridge.map_or(0, |b| b.available),
                        BalanceField::ReserveIn => swap.map_or(0, |s| s.reserve_in),
                        BalanceField::ReserveOut => swap.map_or(0, |s| s.reserve_out),
                        BalanceField::PaidOut => swap.map_or(0, |s| s.paid_out),
                    }
                });
                cmp(got.map_or("unknown".into(), |v| v.to_string()), is.to_string())
            }
            Predicate::TraceContains { tokens } => {
                let found = self.trace_count(tokens) > 0;
                (found, format!("no trace line contains {}", tokens.join(" ")))
            }
            Predicate::TraceCount { tokens, is } => cmp(self.trace_count(tokens).to_string(), is.to_string()),
            Predicate::BridgeConservation => {
                let ok = self.violations.is_empty();
                (ok, format!("violated at ticks {:?}", self.violations))
            }
            Predicate::ComposeCount { to, executed, is } => {
                let want = if *executed { ComposeStatus::Executed } else { ComposeStatus::Stored };
                let n = self.net.chain(to.chain).map_or(0, |c| {
                    c.state.endpoint.compose_entries().filter(|(k, e)| k.to == to.addr && e.status == want).count()
                });
                cmp(n.to_string(), is.to_string())
            }
        }
    }

    /// Lines holding every token as a whole whitespace-separated word.
    fn trace_count(&self, tokens: &[String]) -> usize {
        self.trace
            .lines()
            .iter()
            .filter(|line| {
                let words: BTreeSet<&str> = line.split_whitespace().collect();
                tokens.iter().all(|t| words.contains(t.as_str()))
            })
            .count()
    }
}
