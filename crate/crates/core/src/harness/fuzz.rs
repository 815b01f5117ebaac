use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::model::{ModelChannel, NonceStatus};
use super::runner::wrong_message;
use crate::codec::{payload_hash, Address, EndpointId, Hash32, Packet, Path};
use crate::endpoint::{AcceptAll, Endpoint, Meter, SecurityStack, StackSetting, NIL_PAYLOAD_HASH};
use crate::events::LedgerEvent;
use crate::ids::{LibVersion, WorkerId};
use crate::msglib::{CommitOutcome, LibraryKind, MessageLibRecord, MessageLibRegistry};
use crate::workers::wrong_hash;

/// Deliberate defects the fuzzer must be able to find.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mutant {
    #[default]
    None,
    /// `skip` consumes any nonce without checking it is the next one.
    SkipWithoutNonceCheck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FuzzConfig {
    pub iterations: u64,
    pub seed: u64,
    pub max_nonces: u64,
    pub max_dvns: u8,
    pub mutant: Mutant,
}

impl Default for FuzzConfig {
    fn default() -> Self {
        FuzzConfig { iterations: 10_000, seed: 0, max_nonces: 8, max_dvns: 3, mutant: Mutant::None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// The endpoint and the reference model disagree on an operation's result.
    OutcomeMismatch { step: usize, op: String, model: String, implementation: String },
    /// Nonce delivered while an earlier nonce was neither resolved nor verified.
    Lossless { nonce: u64, missing: u64 },
    /// A nonce reached a terminal state twice.
    DuplicateDelivery { nonce: u64 },
    NonceGap { expected: u64, got: u64 },
    /// Random-order drain of the endpoint and in-order drain of the model
    /// delivered different sets.
    DrainMismatch { implementation: Vec<u64>, model: Vec<u64> },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::OutcomeMismatch { step, op, model, implementation } => {
                write!(f, "step {step} `{op}`: model {model}, endpoint {implementation}")
            }
            Violation::Lossless { nonce, missing } => write!(f, "nonce {nonce} delivered while {missing} was lost"),
            Violation::DuplicateDelivery { nonce } => write!(f, "nonce {nonce} resolved twice"),
            Violation::NonceGap { expected, got } => write!(f, "send assigned nonce {got}, expected {expected}"),
            Violation::DrainMismatch { implementation, model } => {
                write!(f, "drained sets differ: endpoint {implementation:?}, model {model:?}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterexample {
    /// Index of the failing schedule; it is reproducible from the master seed.
    pub schedule: u64,
    pub violation: Violation,
    /// Replayable scenario whose assertions fail the same way.
    pub scenario: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FuzzReport {
    pub iterations: u64,
    pub operations: u64,
    pub counterexample: Option<Counterexample>,
}

impl FuzzReport {
    pub fn passed(&self) -> bool {
        self.counterexample.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum HashPick {
    Stored,
    Honest,
    Nil,
}

impl HashPick {
    fn as_str(self) -> &'static str {
        match self {
            HashPick::Stored => "stored",
            HashPick::Honest => "honest",
            HashPick::Nil => "nil",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    Send,
    Attest { dvn: u8, nonce: u64, wrong: bool },
    Commit { nonce: u64, wrong: bool },
    Deliver { nonce: u64, wrong: bool },
    Clear { nonce: u64, wrong: bool },
    Skip { nonce: u64 },
    Nilify { nonce: u64, hash: HashPick },
    Burn { nonce: u64, hash: HashPick },
}

impl Op {
    /// Timeline command in scenario syntax.
    fn command(&self) -> String {
        let flag = |w: bool| if w { " wrong" } else { "" };
        match *self {
            Op::Send => "send src to=dst payload=text:p".to_string(),
            Op::Attest { dvn, nonce, wrong } => format!("attest d{dvn} from=src to=dst nonce={nonce}{}", flag(wrong)),
            Op::Commit { nonce, wrong } => format!("commit anyone from=src to=dst nonce={nonce}{}", flag(wrong)),
            Op::Deliver { nonce, wrong } => format!("deliver anyone from=src to=dst nonce={nonce}{}", flag(wrong)),
            Op::Clear { nonce, wrong } => format!("clear dst from=src nonce={nonce}{}", flag(wrong)),
            Op::Skip { nonce } => format!("skip dst from=src nonce={nonce}"),
            Op::Nilify { nonce, hash } => format!("nilify dst from=src nonce={nonce} hash={}", hash.as_str()),
            Op::Burn { nonce, hash } => format!("burn dst from=src nonce={nonce} hash={}", hash.as_str()),
        }
    }
}

const LIB: LibVersion = LibVersion::new(1, 1, 0);
const PAYLOAD: &[u8] = b"p";

fn eid(v: u32) -> EndpointId {
    EndpointId::new(v).expect("non-zero")
}

fn src_app() -> Address {
    Address::from_low_u64(0xa1)
}

fn dst_app() -> Address {
    Address::from_low_u64(0xb2)
}

/// Random per-schedule configuration.
#[derive(Debug, Clone)]
struct Setup {
    nonces: u64,
    required: Vec<u8>,
    optional: Vec<u8>,
    threshold: u8,
}

impl Setup {
    fn draw(rng: &mut ChaCha8Rng, config: &FuzzConfig) -> Self {
        let nonces = rng.random_range(1..=config.max_nonces.max(1));
        let dvns = rng.random_range(1..=config.max_dvns.max(1));
        let (mut required, mut optional) = (Vec::new(), Vec::new());
        for id in 1..=dvns {
            if rng.random_bool(0.5) { required.push(id) } else { optional.push(id) }
        }
        let mut threshold = rng.random_range(0..=optional.len() as u8);
        if required.is_empty() && threshold == 0 {
            threshold = 1;
        }
        Setup { nonces, required, optional, threshold }
    }

    fn executor(&self) -> WorkerId {
        WorkerId(self.required.len() as u8 + self.optional.len() as u8 + 1)
    }

    fn dvns(&self) -> u8 {
        self.required.len() as u8 + self.optional.len() as u8
    }

    fn stack(&self) -> SecurityStack {
        SecurityStack::new(LIB, LIB, self.executor())
            .with_required(self.required.iter().map(|d| WorkerId(*d)))
            .with_optional(self.optional.iter().map(|d| WorkerId(*d)), self.threshold)
    }

    fn scenario_header(&self, seed: u64, mutant: Mutant) -> String {
        let names = |ids: &[u8]| ids.iter().map(|d| format!("d{d}")).collect::<Vec<_>>().join(",");
        let mut s = format!("seed {seed}\nchain 1\nchain 2\nlibrary 1 1.0 kind=uln\n");
        for d in 1..=self.dvns() {
            writeln!(s, "dvn d{d} watch=1 behavior=crashed").unwrap();
        }
        s.push_str("executor ex behavior=crashed\n");
        s.push_str("oapp src kind=plain chain=1 addr=a1\noapp dst kind=plain chain=2 addr=b2\n");
        let body = format!(
            "send=1@1.0 recv=1@1.0 required={} optional={} threshold={} executor=ex",
            names(&self.required),
            names(&self.optional),
            self.threshold
        );
        writeln!(s, "stack src remote=2 {body}").unwrap();
        writeln!(s, "stack dst remote=1 {body}").unwrap();
        if mutant == Mutant::SkipWithoutNonceCheck {
            s.push_str("mutant skip-without-nonce-check\n");
        }
        s
    }
}

/// Endpoint under test plus the bookkeeping the properties need.
struct Harness {
    src: Endpoint,
    dst: Endpoint,
    libs: MessageLibRegistry,
    mutant: Mutant,
    sent: Vec<Packet>,
    /// Nonces with a delivered, cleared, skipped or burnt event.
    resolved: BTreeSet<u64>,
    delivered: BTreeSet<u64>,
    /// Nonces that were committed with a real hash at least once.
    verified: BTreeSet<u64>,
    path: Path,
}

impl Harness {
    fn new(setup: &Setup, mutant: Mutant) -> Self {
        let admin = Address([0xad; 32]);
        let mut libs = MessageLibRegistry::new(admin);
        let mut events = Vec::new();
        libs.register(admin, MessageLibRecord::new(LIB, LibraryKind::Uln), &mut events).expect("fresh registry");
        let mut src = Endpoint::new(eid(1), admin, 1024);
        let mut dst = Endpoint::new(eid(2), admin, 1024);
        let setting = StackSetting::Explicit(setup.stack());
        src.set_security_stack(src_app(), src_app(), eid(2), setting.clone(), &libs).expect("valid stack");
        dst.set_security_stack(dst_app(), dst_app(), eid(1), setting, &libs).expect("valid stack");
        src.apply_pending_config(&mut events);
        dst.apply_pending_config(&mut events);
        Harness {
            src,
            dst,
            libs,
            mutant,
            sent: Vec::new(),
            resolved: BTreeSet::new(),
            delivered: BTreeSet::new(),
            verified: BTreeSet::new(),
            path: Path::new(eid(1), src_app(), eid(2), dst_app()),
        }
    }

    fn packet(&self, nonce: u64) -> Option<&Packet> {
        self.sent.get(nonce as usize - 1)
    }

    fn honest(&self, nonce: u64) -> Hash32 {
        self.packet(nonce).map(Packet::payload_hash).unwrap_or_default()
    }

    fn pick(&self, nonce: u64, pick: HashPick) -> Hash32 {
        match pick {
            HashPick::Stored => self.dst.verified_hash(&self.path, nonce).unwrap_or_default(),
            HashPick::Honest => self.honest(nonce),
            HashPick::Nil => NIL_PAYLOAD_HASH,
        }
    }

    fn message(&self, nonce: u64, wrong: bool) -> Vec<u8> {
        let payload = self.packet(nonce).map(|p| p.payload.clone()).unwrap_or_default();
        if wrong { wrong_message(&payload) } else { payload }
    }

    /// Applies `op` to the endpoint; returns the receipt code and any violation.
    fn apply(&mut self, op: Op) -> (String, Option<Violation>) {
        let mut events = Vec::new();
        let mut meter = Meter::unlimited();
        let path = self.path;
        let code = |r: Result<(), String>| r.map_or_else(|e| e, |_| "Applied".to_string());
        let needs_packet = |nonce: u64| nonce as usize <= self.sent.len();
        let result: Result<(), String> = match op {
            Op::Send => match self.src.send(src_app(), path, PAYLOAD) {
                Ok(out) => {
                    let expected = self.sent.len() as u64 + 1;
                    let got = out.packet.header.nonce;
                    self.sent.push(out.packet);
                    if got != expected {
                        return ("Applied".into(), Some(Violation::NonceGap { expected, got }));
                    }
                    Ok(())
                }
                Err(e) => Err(e.code().into()),
            },
            Op::Attest { nonce, .. } | Op::Commit { nonce, .. } | Op::Deliver { nonce, .. } | Op::Clear { nonce, .. }
                if !needs_packet(nonce) =>
            {
                Err("UnknownPacket".into())
            }
            Op::Attest { dvn, nonce, wrong } => {
                let header = self.sent[nonce as usize - 1].header;
                let hash = if wrong { wrong_hash(self.honest(nonce)) } else { self.honest(nonce) };
                self.libs.dvn_verify(LIB, WorkerId(dvn), &header, hash, &mut events).map_err(|e| e.code().into())
            }
            Op::Commit { nonce, wrong } => {
                let header = self.sent[nonce as usize - 1].header;
                let hash = if wrong { wrong_hash(self.honest(nonce)) } else { self.honest(nonce) };
                match self.libs.commit_if_ready(LIB, &header, hash, &mut self.dst, 0, &mut events) {
                    Ok(CommitOutcome::Committed) => Ok(()),
                    Ok(CommitOutcome::NotReady(q)) => Err(format!("NotReady:{}", q.as_str())),
                    Err(e) => Err(e.code().into()),
                }
            }
            Op::Deliver { nonce, wrong } => {
                let guid = self.sent[nonce as usize - 1].header.guid;
                let message = self.message(nonce, wrong);
                let mut app = AcceptAll::default();
                self.dst
                    .lz_receive(&path, nonce, guid, &message, &[], &mut app, &mut meter, &mut events)
                    .map(|_| ())
                    .map_err(|e| e.code().into())
            }
            Op::Clear { nonce, wrong } => {
                let guid = self.sent[nonce as usize - 1].header.guid;
                let message = self.message(nonce, wrong);
                self.dst.clear(dst_app(), &path, nonce, guid, &message, &mut meter, &mut events).map_err(|e| e.code().into())
            }
            Op::Skip { nonce } if self.mutant == Mutant::SkipWithoutNonceCheck => {
                self.dst.force_skip_unchecked(&path, nonce);
                Ok(())
            }
            Op::Skip { nonce } => self.dst.skip(dst_app(), &path, nonce, &mut meter, &mut events).map_err(|e| e.code().into()),
            Op::Nilify { nonce, hash } => {
                let expected = self.pick(nonce, hash);
                self.dst.nilify(dst_app(), &path, nonce, expected, &mut events).map_err(|e| e.code().into())
            }
            Op::Burn { nonce, hash } => {
                let expected = self.pick(nonce, hash);
                self.dst.burn(dst_app(), &path, nonce, expected, &mut events).map_err(|e| e.code().into())
            }
        };
        (code(result), self.observe(&events))
    }

    /// Checks exactly-once and losslessness against the emitted events.
    /// Lossless: nothing below a delivered nonce was passed over without
    /// ever being verified, unless the receiver resolved it.
    fn observe(&mut self, events: &[LedgerEvent]) -> Option<Violation> {
        for event in events {
            let (nonce, delivery) = match event {
                LedgerEvent::PayloadVerified { nonce, hash, .. } if *hash != NIL_PAYLOAD_HASH => {
                    self.verified.insert(*nonce);
                    continue;
                }
                LedgerEvent::PacketDelivered { nonce, .. } | LedgerEvent::PacketCleared { nonce, .. } => (*nonce, true),
                LedgerEvent::PacketSkipped { nonce, .. } | LedgerEvent::PacketBurnt { nonce, .. } => (*nonce, false),
                _ => continue,
            };
            if delivery {
                if let Some(missing) = (1..nonce).find(|m| !self.resolved.contains(m) && !self.verified.contains(m)) {
                    return Some(Violation::Lossless { nonce, missing });
                }
            }
            if !self.resolved.insert(nonce) {
                return Some(Violation::DuplicateDelivery { nonce });
            }
            if matches!(event, LedgerEvent::PacketDelivered { .. }) {
                self.delivered.insert(nonce);
            }
        }
        None
    }
}

/// Reference outcome of `op`, computed on the model alone.
fn model_apply(model: &mut ModelChannel, quorum: &mut Quorum, h: &Harness, op: Op) -> String {
    let sent = h.sent.len() as u64;
    let outcome = match op {
        Op::Send => Ok(()),
        Op::Attest { nonce, .. } | Op::Commit { nonce, .. } | Op::Deliver { nonce, .. } | Op::Clear { nonce, .. }
            if nonce > sent =>
        {
            return "UnknownPacket".into();
        }
        Op::Attest { dvn, nonce, wrong } => {
            let hash = if wrong { wrong_hash(h.honest(nonce)) } else { h.honest(nonce) };
            if quorum.attested.entry((nonce, hash)).or_default().insert(dvn) {
                Ok(())
            } else {
                return "DuplicateAttestation".into();
            }
        }
        Op::Commit { nonce, wrong } => {
            let hash = if wrong { wrong_hash(h.honest(nonce)) } else { h.honest(nonce) };
            let set = quorum.attested.get(&(nonce, hash)).cloned().unwrap_or_default();
            if let Some(reason) = quorum.shortfall(&set) {
                return format!("NotReady:{reason}");
            }
            model.commit(nonce, hash).map_err(str::to_string)
        }
        Op::Deliver { nonce, wrong } | Op::Clear { nonce, wrong } => {
            let packet = &h.sent[nonce as usize - 1];
            let hash = payload_hash(&packet.header.guid, &h.message(nonce, wrong));
            let r = if matches!(op, Op::Deliver { .. }) { model.deliver(nonce, hash) } else { model.clear(nonce, hash) };
            r.map_err(str::to_string)
        }
        Op::Skip { nonce } => model.skip(nonce).map_err(str::to_string),
        Op::Nilify { nonce, hash } => model.nilify(nonce, h.pick(nonce, hash)).map_err(str::to_string),
        Op::Burn { nonce, hash } => model.burn(nonce, h.pick(nonce, hash), NIL_PAYLOAD_HASH).map_err(str::to_string),
    };
    outcome.map_or_else(|e| e, |_| "Applied".into())
}

/// Attestations as the model sees them, and its own quorum rule.
#[derive(Debug, Clone, Default)]
struct Quorum {
    required: BTreeSet<u8>,
    optional: BTreeSet<u8>,
    threshold: usize,
    attested: BTreeMap<(u64, Hash32), BTreeSet<u8>>,
}

impl Quorum {
    fn shortfall(&self, set: &BTreeSet<u8>) -> Option<&'static str> {
        if !self.required.is_subset(set) {
            Some("required-unmet")
        } else if self.optional.intersection(set).count() < self.threshold {
            Some("threshold-unmet")
        } else {
            None
        }
    }
}

fn draw_op(rng: &mut ChaCha8Rng, setup: &Setup, sent: u64) -> Op {
    if sent == 0 || (sent < setup.nonces && rng.random_bool(0.2)) {
        return Op::Send;
    }
    let nonce = rng.random_range(1..=sent);
    let wrong = rng.random_bool(0.1);
    let hash = *[HashPick::Stored, HashPick::Stored, HashPick::Honest, HashPick::Nil].choose(rng).expect("non-empty");
    match rng.random_range(0..100) {
        0..=29 => Op::Attest { dvn: rng.random_range(1..=setup.dvns()), nonce, wrong },
        30..=49 => Op::Commit { nonce, wrong },
        50..=69 => Op::Deliver { nonce, wrong },
        70..=76 => Op::Clear { nonce, wrong },
        77..=86 => Op::Skip { nonce },
        87..=94 => Op::Nilify { nonce, hash },
        _ => Op::Burn { nonce, hash },
    }
}

fn in_order_drain(mut model: ModelChannel, h: &Harness) -> Vec<u64> {
    loop {
        let progress = (1..=h.sent.len() as u64).any(|n| model.deliver(n, h.honest(n)).is_ok());
        if !progress {
            return model.delivered();
        }
    }
}

fn state_name(status: NonceStatus) -> Option<&'static str> {
    Some(match status {
        NonceStatus::Unverified => return None,
        NonceStatus::Verified(_) => "Verified",
        NonceStatus::Nil => "Nilified",
        NonceStatus::Delivered => "Received",
        NonceStatus::Cleared => "Cleared",
        NonceStatus::Skipped => "Skipped",
        NonceStatus::Burned => "Burned",
    })
}

struct Schedule {
    ops: u64,
    violation: Option<Violation>,
    scenario: String,
}

/// Runs one schedule and renders it as a replayable scenario.
fn run_schedule(config: &FuzzConfig, index: u64) -> Schedule {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index);
    let setup = Setup::draw(&mut rng, config);
    let mut h = Harness::new(&setup, config.mutant);
    let mut model = ModelChannel::default();
    let mut quorum = Quorum {
        required: setup.required.iter().copied().collect(),
        optional: setup.optional.iter().copied().collect(),
        threshold: setup.threshold as usize,
        attested: BTreeMap::new(),
    };
    let mut log: Vec<(Op, String)> = Vec::new();
    let mut violation = None;
    let mut step = |h: &mut Harness, model: &mut ModelChannel, quorum: &mut Quorum, op: Op| {
        let expected = model_apply(model, quorum, h, op);
        let (got, broken) = h.apply(op);
        let mismatch = (expected != got).then(|| Violation::OutcomeMismatch {
            step: log.len(),
            op: op.command(),
            model: expected.clone(),
            implementation: got,
        });
        log.push((op, expected));
        mismatch.or(broken)
    };

    let length = rng.random_range(setup.nonces * 3..=setup.nonces * 8);
    for _ in 0..length {
        let op = draw_op(&mut rng, &setup, h.sent.len() as u64);
        if let Some(v) = step(&mut h, &mut model, &mut quorum, op) {
            violation = Some(v);
            break;
        }
    }
    if violation.is_none() {
        let reference = in_order_drain(model.clone(), &h);
        'drain: loop {
            let mut live: Vec<u64> = h
                .dst
                .channel(&h.path)
                .map(|c| c.verified_entries().filter(|(_, x)| *x != NIL_PAYLOAD_HASH).map(|(n, _)| n).collect())
                .unwrap_or_default();
            live.shuffle(&mut rng);
            let before = h.delivered.len();
            for nonce in live {
                if let Some(v) = step(&mut h, &mut model, &mut quorum, Op::Deliver { nonce, wrong: false }) {
                    violation = Some(v);
                    break 'drain;
                }
            }
            if h.delivered.len() == before {
                break;
            }
        }
        let got: Vec<u64> = h.delivered.iter().copied().collect();
        if violation.is_none() && got != reference {
            violation = Some(Violation::DrainMismatch { implementation: got, model: reference });
        }
    }
    let mut scenario = setup.scenario_header(config.seed, config.mutant);
    for (tick, (op, expected)) in log.iter().enumerate() {
        writeln!(scenario, "at {tick} {} expect={expected}", op.command()).unwrap();
    }
    let end = log.len();
    let final_model = in_order_drain(model.clone(), &h);
    writeln!(scenario, "at {end} assert delivered-count path=src->dst is={}", final_model.len()).unwrap();
    for nonce in 1..=h.sent.len() as u64 {
        if let Some(state) = state_name(model.status(nonce)) {
            writeln!(scenario, "at {end} assert state path=src->dst nonce={nonce} is={state}").unwrap();
        }
    }
    writeln!(scenario, "until {end}").unwrap();
    Schedule { ops: log.len() as u64, violation, scenario }
}

/// Scenario text for schedule `index`, whether or not it fails.
pub fn schedule_scenario(config: &FuzzConfig, index: u64) -> String {
    run_schedule(config, index).scenario
}

/// Differential fuzzing of the channel against the reference model. Stops at
/// the first counterexample.
pub fn fuzz_channel(config: &FuzzConfig) -> FuzzReport {
    let mut operations = 0;
    for index in 0..config.iterations {
        let schedule = run_schedule(config, index);
        operations += schedule.ops;
        if let Some(violation) = schedule.violation {
            let counterexample = Some(Counterexample { schedule: index, violation, scenario: schedule.scenario });
            return FuzzReport { iterations: index + 1, operations, counterexample };
        }
    }
    FuzzReport { iterations: config.iterations, operations, counterexample: None }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{parse_scenario, run};

    #[test]
    fn correct_endpoint_survives_a_short_campaign() {
        let report = fuzz_channel(&FuzzConfig { iterations: 300, ..FuzzConfig::default() });
        assert!(report.passed(), "{:?}", report.counterexample);
        assert_eq!(report.iterations, 300);
    }

    #[test]
    fn skip_mutant_is_caught() {
        let report =
            fuzz_channel(&FuzzConfig { iterations: 2_000, mutant: Mutant::SkipWithoutNonceCheck, ..FuzzConfig::default() });
        let ce = report.counterexample.expect("mutant must be caught");
        assert!(ce.scenario.contains("mutant skip-without-nonce-check"));
    }

    #[test]
    fn rendered_schedules_replay_green() {
        let config = FuzzConfig::default();
        for index in 0..40 {
            let text = schedule_scenario(&config, index);
            let report = run(&parse_scenario(&text).unwrap()).unwrap();
            let failed: Vec<_> = report.assertions.iter().filter(|a| !a.passed).collect();
            assert!(failed.is_empty(), "schedule {index}: {failed:?}\n{text}");
        }
    }

    #[test]
    fn mutant_counterexample_replays_red() {
        let config = FuzzConfig { iterations: 2_000, mutant: Mutant::SkipWithoutNonceCheck, ..FuzzConfig::default() };
        let ce = fuzz_channel(&config).counterexample.unwrap();
        let report = run(&parse_scenario(&ce.scenario).unwrap()).unwrap();
        assert!(!report.passed());
        let honest = ce.scenario.replace("mutant skip-without-nonce-check\n", "");
        assert!(run(&parse_scenario(&honest).unwrap()).unwrap().passed());
    }

    #[test]
    fn schedules_are_reproducible() {
        let config = FuzzConfig { iterations: 50, seed: 9, ..FuzzConfig::default() };
        assert_eq!(fuzz_channel(&config), fuzz_channel(&config));
    }
}
