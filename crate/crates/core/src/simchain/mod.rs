//! Deterministic simulated chains. Every transaction runs against a copy of
//! the chain state that replaces the original only on success.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::codec::{Address, EndpointId, Guid, Hash32, PacketHeader, Path, DEFAULT_MAX_PAYLOAD};
use crate::endpoint::{
    AcceptAll, ComposeKey, Endpoint, EndpointError, Meter, Outcome, SecurityStack, StackSetting,
};
use crate::events::LedgerEvent;
use crate::ids::{LibVersion, WorkerId};
use crate::msglib::{Balances, CommitOutcome, FeeSchedule, MessageLibRecord, MessageLibRegistry, MsgLibError};
use crate::oapps::{AppError, OApp};

pub const DEFAULT_ITERATION_BUDGET: u64 = 1000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainConfig {
    pub eid: EndpointId,
    pub iteration_budget: u64,
    pub max_payload: usize,
    pub block_time_ticks: u64,
    pub fees: FeeSchedule,
    pub admin: Address,
}

impl ChainConfig {
    pub fn new(eid: EndpointId) -> Self {
        ChainConfig {
            eid,
            iteration_budget: DEFAULT_ITERATION_BUDGET,
            max_payload: DEFAULT_MAX_PAYLOAD,
            block_time_ticks: 1,
            fees: FeeSchedule::default(),
            admin: Address([0xad; 32]),
        }
    }
}

/// Everything a transaction may touch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainState {
    pub endpoint: Endpoint,
    pub libs: MessageLibRegistry,
    pub apps: BTreeMap<Address, OApp>,
    pub balances: Balances,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub height: u64,
    pub seq: u64,
    pub event: LedgerEvent,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TxCall {
    Send { dst: EndpointId, receiver: Address, payload: Vec<u8>, options: Vec<u8> },
    /// Caller locks `amount` on the bridge at `app`; `unbacked` skips the lock.
    BridgeSend { app: Address, dst: EndpointId, amount: u128, compose: bool, unbacked: bool, options: Vec<u8> },
    DvnVerify { dvn: WorkerId, lib: LibVersion, header: PacketHeader, payload_hash: Hash32 },
    Commit { lib: LibVersion, header: PacketHeader, payload_hash: Hash32 },
    WhitelistCommit { worker: WorkerId, lib: LibVersion, header: PacketHeader, payload_hash: Hash32 },
    LzReceive { path: Path, nonce: u64, guid: Guid, message: Vec<u8>, extra: Vec<u8>, native_drop: Option<(Address, u128)> },
    Skip { path: Path, nonce: u64 },
    Clear { path: Path, nonce: u64, guid: Guid, message: Vec<u8> },
    Nilify { path: Path, nonce: u64, payload_hash: Hash32 },
    Burn { path: Path, nonce: u64, payload_hash: Hash32 },
    LzCompose { key: ComposeKey, message: Vec<u8> },
    SetStack { remote: EndpointId, setting: StackSetting },
    SetReceiveLibrary { remote: EndpointId, lib: LibVersion, grace_blocks: u64 },
    SetDefaultStack { remote: EndpointId, stack: SecurityStack },
    Register { record: MessageLibRecord },
    /// Harness-only: adds swap reserves at `app`.
    TopUp { app: Address, amount: u128 },
}

impl TxCall {
    pub fn name(&self) -> &'static str {
        match self {
            TxCall::Send { .. } => "send",
            TxCall::BridgeSend { .. } => "bridgeSend",
            TxCall::DvnVerify { .. } => "dvnVerify",
            TxCall::Commit { .. } => "commitVerification",
            TxCall::WhitelistCommit { .. } => "whitelistVerify",
            TxCall::LzReceive { .. } => "lzReceive",
            TxCall::Skip { .. } => "skip",
            TxCall::Clear { .. } => "clear",
            TxCall::Nilify { .. } => "nilify",
            TxCall::Burn { .. } => "burn",
            TxCall::LzCompose { .. } => "lzCompose",
            TxCall::SetStack { .. } => "setSecurityStack",
            TxCall::SetReceiveLibrary { .. } => "setReceiveLibrary",
            TxCall::SetDefaultStack { .. } => "setDefaultStack",
            TxCall::Register { .. } => "registerLibrary",
            TxCall::TopUp { .. } => "topUp",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transaction {
    pub caller: Address,
    pub call: TxCall,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Receipt {
    Applied { budget_used: u64 },
    Reverted(String),
    OutOfBudget,
}

impl Receipt {
    pub fn is_applied(&self) -> bool {
        matches!(self, Receipt::Applied { .. })
    }

    /// `Applied`, `OutOfBudget` or the revert code.
    pub fn code(&self) -> &str {
        match self {
            Receipt::Applied { .. } => "Applied",
            Receipt::Reverted(code) => code,
            Receipt::OutOfBudget => "OutOfBudget",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("unknown chain {0}")]
    UnknownChain(EndpointId),
    #[error("advance requires at least one block")]
    ZeroAdvance,
    #[error("range {from}..={to} is ahead of head {head}")]
    RangeAhead { from: u64, to: u64, head: u64 },
    #[error("chain {0} already exists")]
    DuplicateChain(EndpointId),
}

#[derive(Debug, Error)]
enum TxError {
    #[error(transparent)]
    Endpoint(#[from] EndpointError),
    #[error(transparent)]
    MsgLib(#[from] MsgLibError),
    #[error(transparent)]
    App(#[from] AppError),
    #[error("{0}")]
    Abort(String),
    #[error("no application at {0}")]
    NoApp(Address),
}

impl TxError {
    fn code(&self) -> String {
        match self {
            TxError::Endpoint(e) => e.code().into(),
            TxError::MsgLib(e) => e.code().into(),
            TxError::App(e) => e.code().into(),
            TxError::Abort(reason) => reason.clone(),
            TxError::NoApp(_) => "NoApp".into(),
        }
    }

    fn is_out_of_budget(&self) -> bool {
        matches!(
            self,
            TxError::Endpoint(EndpointError::OutOfBudget { .. })
                | TxError::MsgLib(MsgLibError::Endpoint(EndpointError::OutOfBudget { .. }))
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chain {
    pub config: ChainConfig,
    height: u64,
    next_seq: u64,
    records: Vec<Record>,
    pub state: ChainState,
}

impl Chain {
    pub fn new(config: ChainConfig) -> Self {
        let state = ChainState {
            endpoint: Endpoint::new(config.eid, config.admin, config.max_payload),
            libs: MessageLibRegistry::new(config.admin),
            apps: BTreeMap::new(),
            balances: Balances::new(),
        };
        Chain { config, height: 0, next_seq: 0, records: Vec::new(), state }
    }

    pub fn eid(&self) -> EndpointId {
        self.config.eid
    }

    pub fn height(&self) -> u64 {
        self.height
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    fn log(&mut self, events: Vec<LedgerEvent>) {
        for event in events {
            self.records.push(Record { height: self.height, seq: self.next_seq, event });
            self.next_seq += 1;
        }
    }

    /// Deploys an application outside any transaction (genesis).
    pub fn deploy(&mut self, addr: Address, app: OApp, balance: u128) {
        self.state.apps.insert(addr, app);
        if balance > 0 {
            self.state.balances.insert(addr, balance);
        }
    }

    /// Applies configuration queued at genesis without moving the height.
    pub fn seal_genesis(&mut self) {
        let mut events = Vec::new();
        self.state.endpoint.apply_pending_config(&mut events);
        self.log(events);
    }

    pub fn advance(&mut self, blocks: u64) -> Result<u64, SimError> {
        if blocks == 0 {
            return Err(SimError::ZeroAdvance);
        }
        for _ in 0..blocks {
            self.height += 1;
            self.next_seq = 0;
            let mut events = Vec::new();
            self.state.endpoint.apply_pending_config(&mut events);
            self.log(events);
        }
        Ok(self.height)
    }

    pub fn read_events(&self, from: u64, to: u64) -> Result<Vec<&Record>, SimError> {
        if from > to || to > self.height {
            return Err(SimError::RangeAhead { from, to, head: self.height });
        }
        Ok(self.records.iter().filter(|r| (from..=to).contains(&r.height)).collect())
    }

    /// Detached deep copy.
    pub fn fork(&self) -> Chain {
        self.clone()
    }

    pub fn submit(&mut self, tx: Transaction) -> Receipt {
        let name = tx.call.name();
        let mut next = self.state.clone();
        let mut events = Vec::new();
        let mut meter = Meter::new(self.config.iteration_budget);
        let result = execute(&mut next, &self.config, self.height, tx, &mut meter, &mut events);
        match result {
            Ok(()) => {
                for (addr, app) in &mut next.apps {
                    for (action, amount) in app.take_journal() {
                        events.push(LedgerEvent::App { app: *addr, action, amount });
                    }
                }
                self.state = next;
                self.log(events);
                Receipt::Applied { budget_used: meter.used() }
            }
            Err(err) => {
                let receipt = if err.is_out_of_budget() { Receipt::OutOfBudget } else { Receipt::Reverted(err.code()) };
                self.log(vec![LedgerEvent::TxReverted { call: name, reason: receipt.code().to_string() }]);
                receipt
            }
        }
    }
}

fn execute(
    state: &mut ChainState,
    config: &ChainConfig,
    height: u64,
    tx: Transaction,
    meter: &mut Meter,
    events: &mut Vec<LedgerEvent>,
) -> Result<(), TxError> {
    let caller = tx.caller;
    let ChainState { endpoint, libs, apps, balances } = state;
    match tx.call {
        TxCall::Send { dst, receiver, payload, options } => {
            let path = Path::new(config.eid, caller, dst, receiver);
            let out = endpoint.send(caller, path, &payload)?;
            libs.send_side(&out, &options, config.fees, balances, events)?;
        }
        TxCall::BridgeSend { app, dst, amount, compose, unbacked, options } => {
            let bridge = apps.get_mut(&app).ok_or(TxError::NoApp(app))?.bridge_mut()?;
            let (peer, payload) = if unbacked { bridge.unbacked(dst, amount)? } else { bridge.lock(dst, amount, compose)? };
            let action = if unbacked { "UnbackedSend" } else { "Lock" };
            apps.get_mut(&app).expect("checked above").note(action, amount);
            let out = endpoint.send(app, Path::new(config.eid, app, dst, peer), &payload)?;
            libs.send_side(&out, &options, config.fees, balances, events)?;
        }
        TxCall::DvnVerify { dvn, lib, header, payload_hash } => {
            libs.dvn_verify(lib, dvn, &header, payload_hash, events)?;
        }
        TxCall::Commit { lib, header, payload_hash } => {
            match libs.commit_if_ready(lib, &header, payload_hash, endpoint, height, events)? {
                CommitOutcome::Committed => {}
                CommitOutcome::NotReady(status) => return Err(TxError::Abort(format!("NotReady:{}", status.as_str()))),
            }
        }
        TxCall::WhitelistCommit { worker, lib, header, payload_hash } => {
            libs.whitelist_verify(lib, worker, &header, payload_hash, endpoint, height, events)?;
        }
        TxCall::LzReceive { path, nonce, guid, message, extra, native_drop } => {
            let mut fallback = AcceptAll::default();
            let receipt = match apps.get_mut(&path.receiver) {
                Some(app) => endpoint.lz_receive(&path, nonce, guid, &message, &extra, app, meter, events)?,
                None => endpoint.lz_receive(&path, nonce, guid, &message, &extra, &mut fallback, meter, events)?,
            };
            if let Outcome::Reverted(reason) = receipt.outcome {
                return Err(TxError::Abort(reason));
            }
            if let Some((to, amount)) = native_drop.filter(|(_, a)| *a > 0) {
                *balances.entry(to).or_default() += amount;
                events.push(LedgerEvent::NativeDropped { to, amount });
            }
        }
        TxCall::Skip { path, nonce } => endpoint.skip(caller, &path, nonce, meter, events)?,
        TxCall::Clear { path, nonce, guid, message } => endpoint.clear(caller, &path, nonce, guid, &message, meter, events)?,
        TxCall::Nilify { path, nonce, payload_hash } => endpoint.nilify(caller, &path, nonce, payload_hash, events)?,
        TxCall::Burn { path, nonce, payload_hash } => endpoint.burn(caller, &path, nonce, payload_hash, events)?,
        TxCall::LzCompose { key, message } => {
            let app = apps.get_mut(&key.to).ok_or(TxError::NoApp(key.to))?;
            let receipt = endpoint.lz_compose(key, &message, app, meter, events)?;
            if let Outcome::Reverted(reason) = receipt.outcome {
                return Err(TxError::Abort(reason));
            }
        }
        TxCall::SetStack { remote, setting } => endpoint.set_security_stack(caller, caller, remote, setting, libs)?,
        TxCall::SetReceiveLibrary { remote, lib, grace_blocks } => {
            endpoint.set_receive_library_with_grace(caller, caller, remote, lib, grace_blocks, height, libs)?
        }
        TxCall::SetDefaultStack { remote, stack } => endpoint.set_default_stack(caller, remote, stack, libs)?,
        TxCall::Register { record } => libs.register(caller, record, events)?,
        TxCall::TopUp { app, amount } => {
            let oapp = apps.get_mut(&app).ok_or(TxError::NoApp(app))?;
            oapp.swap_mut()?.reserve_out += amount;
            oapp.note("TopUp", amount);
        }
    }
    Ok(())
}

/// A set of independent chains, each with its own clock.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Network {
    chains: BTreeMap<EndpointId, Chain>,
}

impl Network {
    pub fn new() -> Self {
        Network::default()
    }

    pub fn add_chain(&mut self, config: ChainConfig) -> Result<&mut Chain, SimError> {
        let eid = config.eid;
        if self.chains.contains_key(&eid) {
            return Err(SimError::DuplicateChain(eid));
        }
        Ok(self.chains.entry(eid).or_insert_with(|| Chain::new(config)))
    }

    pub fn chain(&self, eid: EndpointId) -> Result<&Chain, SimError> {
        self.chains.get(&eid).ok_or(SimError::UnknownChain(eid))
    }

    pub fn chain_mut(&mut self, eid: EndpointId) -> Result<&mut Chain, SimError> {
        self.chains.get_mut(&eid).ok_or(SimError::UnknownChain(eid))
    }

    pub fn chains(&self) -> impl Iterator<Item = &Chain> {
        self.chains.values()
    }

    pub fn chains_mut(&mut self) -> impl Iterator<Item = &mut Chain> {
        self.chains.values_mut()
    }

    pub fn submit_tx(&mut self, eid: EndpointId, tx: Transaction) -> Result<Receipt, SimError> {
        Ok(self.chain_mut(eid)?.submit(tx))
    }

    pub fn advance(&mut self, eid: EndpointId, blocks: u64) -> Result<u64, SimError> {
        self.chain_mut(eid)?.advance(blocks)
    }

    pub fn read_events(&self, eid: EndpointId, from: u64, to: u64) -> Result<Vec<&Record>, SimError> {
        self.chain(eid)?.read_events(from, to)
    }

    pub fn fork_state(&self, eid: EndpointId) -> Result<Chain, SimError> {
        Ok(self.chain(eid)?.fork())
    }
}


/// The line-oriented run log: chain events interleaved with worker actions in
/// the order they happened.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    lines: Vec<String>,
    cursors: BTreeMap<EndpointId, usize>,
}

impl Trace {
    /// Appends chain events recorded since the previous flush, chain by chain.
    pub fn flush(&mut self, net: &Network) {
        for chain in net.chains() {
            let cursor = self.cursors.entry(chain.eid()).or_insert(0);
            for r in &chain.records()[*cursor..] {
                self.lines.push(r.event.trace_line(r.height, r.seq, chain.eid()));
            }
            *cursor = chain.records().len();
        }
    }

    /// `tick WORKER=<id> ACTION k=v ...`
    pub fn worker(&mut self, tick: u64, id: WorkerId, action: &str, fields: &[(&str, String)]) {
        let mut line = format!("{tick} WORKER={id} {action}");
        for (k, v) in fields {
            line.push(' ');
            line.push_str(k);
            line.push('=');
            line.push_str(v);
        }
        self.lines.push(line);
    }

    pub fn note(&mut self, line: String) {
        self.lines.push(line);
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }

    pub fn text(&self) -> String {
        let mut out = self.lines.join("\n");
        out.push('\n');
        out
    }
}
