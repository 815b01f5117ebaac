//! Scenario language, deterministic runner, trace and assertion engine, and
//! the channel fuzzer.

mod fuzz;
mod model;
mod parser;
mod runner;

use thiserror::Error;

use crate::codec::{Address, EndpointId, Path};
use crate::endpoint::{SecurityStack, StackSetting};
use crate::ids::{LibVersion, WorkerId};
use crate::msglib::{LibraryKind, QuorumStatus};
use crate::oapps::OApp;
use crate::simchain::ChainConfig;
use crate::workers::Behavior;

pub use fuzz::{fuzz_channel, schedule_scenario, Counterexample, FuzzConfig, FuzzReport, Mutant, Violation};
pub use model::{ModelChannel, NonceStatus};
pub use parser::parse_scenario;
pub use runner::{run, AssertionResult, RunReport};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("line {line}: unknown reference `{id}`")]
    UnknownReference { line: usize, id: String },
}

/// A deployed application as referenced from scenario text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AppRef {
    pub name: String,
    pub chain: EndpointId,
    pub addr: Address,
}

/// `from` is the sending application, `to` the receiving one.
pub fn path_between(from: &AppRef, to: &AppRef) -> Path {
    Path::new(from.chain, from.addr, to.chain, to.addr)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LibraryDecl {
    pub version: LibVersion,
    pub kind: LibraryKind,
    /// `None` registers on every chain.
    pub chains: Option<Vec<EndpointId>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Role {
    Dvn { watch: Vec<EndpointId>, latency: u64 },
    Executor,
    /// Permissionless actor that commits and delivers anything.
    User,
    PreCrime,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkerDecl {
    pub name: String,
    pub id: WorkerId,
    pub role: Role,
    pub behavior: Behavior,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OAppDecl {
    pub app: AppRef,
    pub state: OApp,
    pub balance: u128,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StackDecl {
    pub oapp: AppRef,
    pub remote: EndpointId,
    pub setting: StackSetting,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DefaultDecl {
    pub chain: EndpointId,
    pub remote: EndpointId,
    pub stack: SecurityStack,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PayloadSpec {
    Bytes(Vec<u8>),
    /// `n` bytes drawn from the scenario RNG at run time.
    Random(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HashSpec {
    /// Whatever the channel currently stores for the nonce.
    Stored,
    Nil,
    /// The honest payload hash of the sent packet.
    Honest,
    Explicit(crate::codec::Hash32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PacketState {
    NotSent,
    Sent,
    Committable,
    Verified,
    Nilified,
    Received,
    Cleared,
    Skipped,
    Burned,
}

impl PacketState {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "NotSent" => PacketState::NotSent,
            "Sent" => PacketState::Sent,
            "Committable" => PacketState::Committable,
            "Verified" => PacketState::Verified,
            "Nilified" => PacketState::Nilified,
            "Received" | "Delivered" => PacketState::Received,
            "Cleared" => PacketState::Cleared,
            "Skipped" => PacketState::Skipped,
            "Burned" => PacketState::Burned,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BalanceField {
    Native,
    Minted,
    Locked,
    Available,
    ReserveIn,
    ReserveOut,
    PaidOut,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Predicate {
    State { path: Path, nonce: u64, is: PacketState },
    Committable { path: Path, nonce: u64, is: QuorumStatus },
    DeliveredCount { path: Option<Path>, is: u64 },
    Balance { chain: EndpointId, account: Address, field: BalanceField, is: u128 },
    TraceContains { tokens: Vec<String> },
    TraceCount { tokens: Vec<String>, is: usize },
    BridgeConservation,
    ComposeCount { to: AppRef, executed: bool, is: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    Send { app: AppRef, to: AppRef, payload: PayloadSpec, options: Vec<u8> },
    Bridge { app: AppRef, dst: EndpointId, amount: u128, compose: bool, unbacked: bool, options: Vec<u8> },
    Advance { chain: EndpointId, blocks: u64 },
    Fault { worker: WorkerId, behavior: Behavior },
    Stack(StackDecl),
    RecvLib { oapp: AppRef, remote: EndpointId, lib: LibVersion, grace: u64 },
    Default(DefaultDecl),
    Skip { oapp: AppRef, from: AppRef, nonce: u64 },
    /// `wrong` presents a message that does not match the sent payload.
    Clear { oapp: AppRef, from: AppRef, nonce: u64, wrong: bool },
    Nilify { oapp: AppRef, from: AppRef, nonce: u64, hash: HashSpec },
    Burn { oapp: AppRef, from: AppRef, nonce: u64, hash: HashSpec },
    Commit { actor: Address, from: AppRef, to: AppRef, nonce: u64, wrong: bool, lib: Option<LibVersion> },
    Attest { dvn: WorkerId, from: AppRef, to: AppRef, nonce: u64, wrong: bool, lib: Option<LibVersion> },
    Deliver { actor: Address, from: AppRef, to: AppRef, nonce: u64, wrong: bool },
    Compose { actor: Address, to: AppRef },
    TopUp { app: AppRef, amount: u128 },
    Assert(Predicate),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimedCommand {
    pub tick: u64,
    pub line: usize,
    pub text: String,
    pub command: Command,
    /// Receipt code the action must produce (`Applied`, a revert code, ...).
    pub expect: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Scenario {
    pub seed: u64,
    pub until: Option<u64>,
    pub chains: Vec<ChainConfig>,
    pub libraries: Vec<LibraryDecl>,
    pub workers: Vec<WorkerDecl>,
    pub oapps: Vec<OAppDecl>,
    pub peers: Vec<(String, String)>,
    pub defaults: Vec<DefaultDecl>,
    pub stacks: Vec<StackDecl>,
    pub timeline: Vec<TimedCommand>,
    /// Deliberate endpoint defect, used to replay fuzzer counterexamples.
    pub mutant: Mutant,
}

impl Scenario {
    pub fn last_tick(&self) -> u64 {
        self.until.unwrap_or_else(|| self.timeline.iter().map(|c| c.tick).max().unwrap_or(0) + 30)
    }

    pub fn worker(&self, name: &str) -> Option<&WorkerDecl> {
        self.workers.iter().find(|w| w.name == name)
    }

    pub fn oapp(&self, name: &str) -> Option<&OAppDecl> {
        self.oapps.iter().find(|o| o.app.name == name)
    }
}

#[cfg(test)]
mod tests;
