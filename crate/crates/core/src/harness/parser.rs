use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use super::{
    AppRef, BalanceField, Command, DefaultDecl, HashSpec, LibraryDecl, Mutant, OAppDecl, PacketState, PayloadSpec,
    Predicate, Role, Scenario, ScenarioError, StackDecl, TimedCommand, WorkerDecl,
};
use crate::codec::{Address, EndpointId, Hash32, MessageOptions, WorkerOption};
use crate::endpoint::{SecurityStack, StackSetting};
use crate::ids::{LibVersion, WorkerId};
use crate::msglib::{LibraryKind, QuorumStatus};
use crate::oapps::{encode_mint, AppLogic, BridgeState, OApp, SwapState};
use crate::simchain::ChainConfig;
use crate::workers::Behavior;

fn syntax(line: usize, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Syntax { line, reason: reason.into() }
}

fn unknown(line: usize, id: &str) -> ScenarioError {
    ScenarioError::UnknownReference { line, id: id.to_string() }
}

fn number<T: FromStr>(line: usize, what: &str, s: &str) -> Result<T, ScenarioError> {
    s.parse().map_err(|_| syntax(line, format!("invalid {what} `{s}`")))
}

/// Upper bound on the commands one line may expand into.
const MAX_EXPANSION: u64 = 100_000;

/// Expands `nonce=a..b` into one command per nonce and `count=n` into `n`
/// copies of the command.
fn expand(line: usize, tokens: &[&str]) -> Result<Vec<Vec<String>>, ScenarioError> {
    let mut base: Vec<String> = Vec::new();
    let (mut nonces, mut count) = (None, 1u64);
    for tok in tokens {
        if let Some((a, b)) = tok.strip_prefix("nonce=").and_then(|r| r.split_once("..")) {
            let (a, b): (u64, u64) = (number(line, "nonce", a)?, number(line, "nonce", b)?);
            if a == 0 || a > b {
                return Err(syntax(line, format!("empty nonce range `{tok}`")));
            }
            nonces = Some((a, b));
        } else if let Some(n) = tok.strip_prefix("count=") {
            count = number(line, "count", n)?;
        } else {
            base.push(tok.to_string());
        }
    }
    let (a, b) = nonces.unwrap_or((0, 0));
    let per_copy = b - a + 1;
    if count == 0 || count.saturating_mul(per_copy) > MAX_EXPANSION {
        return Err(syntax(line, format!("expansion must yield 1..={MAX_EXPANSION} commands")));
    }
    let mut out = Vec::new();
    for _ in 0..count {
        match nonces {
            Some(_) => out.extend((a..=b).map(|n| {
                let mut t = base.clone();
                t.push(format!("nonce={n}"));
                t
            })),
            None => out.push(base.clone()),
        }
    }
    Ok(out)
}

/// Positional tokens plus `key=value` pairs; every key must be consumed.
struct Args<'a> {
    line: usize,
    positional: Vec<&'a str>,
    keyed: BTreeMap<&'a str, &'a str>,
    used: BTreeSet<&'a str>,
}

impl<'a> Args<'a> {
    fn new(line: usize, tokens: &[&'a str]) -> Result<Self, ScenarioError> {
        let mut positional = Vec::new();
        let mut keyed = BTreeMap::new();
        for tok in tokens {
            match tok.split_once('=') {
                Some((k, v)) => {
                    if keyed.insert(k, v).is_some() {
                        return Err(syntax(line, format!("duplicate argument `{k}`")));
                    }
                }
                None => positional.push(*tok),
            }
        }
        Ok(Args { line, positional, keyed, used: BTreeSet::new() })
    }

    fn get(&mut self, key: &'a str) -> Option<&'a str> {
        let v = self.keyed.get(key).copied();
        if v.is_some() {
            self.used.insert(key);
        }
        v
    }

    fn req(&mut self, key: &'a str) -> Result<&'a str, ScenarioError> {
        self.get(key).ok_or_else(|| syntax(self.line, format!("missing `{key}=`")))
    }

    fn num<T: FromStr>(&mut self, key: &'a str) -> Result<Option<T>, ScenarioError> {
        let line = self.line;
        self.get(key).map(|v| number(line, key, v)).transpose()
    }

    fn pos(&self, i: usize, what: &str) -> Result<&'a str, ScenarioError> {
        self.positional.get(i).copied().ok_or_else(|| syntax(self.line, format!("missing {what}")))
    }

    fn flag(&self, name: &str) -> bool {
        self.positional.contains(&name)
    }

    /// Rejects unconsumed keys and positionals beyond `max_positional`
    /// (flags listed in `flags` are always allowed).
    fn finish(&self, max_positional: usize, flags: &[&str]) -> Result<(), ScenarioError> {
        if let Some(k) = self.keyed.keys().find(|k| !self.used.contains(*k)) {
            return Err(syntax(self.line, format!("unknown argument `{k}=`")));
        }
        let extra: Vec<_> =
            self.positional.iter().skip(max_positional).filter(|p| !flags.contains(p)).collect();
        if let Some(p) = extra.first() {
            return Err(syntax(self.line, format!("unexpected token `{p}`")));
        }
        Ok(())
    }
}

fn parse_hex(line: usize, s: &str) -> Result<Vec<u8>, ScenarioError> {
    let s = s.strip_prefix("0x").unwrap_or(s);
    hex::decode(s).map_err(|_| syntax(line, format!("invalid hex `{s}`")))
}

fn parse_lib(line: usize, s: &str) -> Result<LibVersion, ScenarioError> {
    s.parse().map_err(|e: crate::ids::ParseLibVersionError| syntax(line, e.to_string()))
}

fn parse_ratio(line: usize, s: &str) -> Result<(u128, u128), ScenarioError> {
    let (a, b) = s.split_once(':').ok_or_else(|| syntax(line, format!("ratio `{s}` must be a:b")))?;
    let (a, b) = (number(line, "ratio", a)?, number::<u128>(line, "ratio", b)?);
    if b == 0 {
        return Err(syntax(line, "ratio denominator is zero"));
    }
    Ok((a, b))
}

#[derive(Default)]
struct Parser {
    scenario: Scenario,
    /// Whitelist allowlists name workers that may be declared later.
    pending_allow: Vec<(usize, usize, Vec<String>)>,
    last_tick: u64,
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let mut p = Parser::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();
        p.directive(line, content, &tokens)?;
    }
    p.finish()
}

impl Parser {
    fn eid(&self, line: usize, s: &str) -> Result<EndpointId, ScenarioError> {
        let v: u32 = number(line, "endpoint id", s)?;
        let eid = EndpointId::new(v).map_err(|e| syntax(line, e.to_string()))?;
        if !self.scenario.chains.iter().any(|c| c.eid == eid) {
            return Err(unknown(line, s));
        }
        Ok(eid)
    }

    fn app(&self, line: usize, name: &str) -> Result<AppRef, ScenarioError> {
        self.scenario.oapp(name).map(|o| o.app.clone()).ok_or_else(|| unknown(line, name))
    }

    fn worker(&self, line: usize, name: &str) -> Result<&WorkerDecl, ScenarioError> {
        self.scenario.worker(name).ok_or_else(|| unknown(line, name))
    }

    fn workers(&self, line: usize, list: &str) -> Result<Vec<WorkerId>, ScenarioError> {
        if list.is_empty() || list == "-" {
            return Ok(Vec::new());
        }
        list.split(',').map(|n| self.worker(line, n).map(|w| w.id)).collect()
    }

    /// Worker account, application address or explicit hex.
    fn actor(&self, line: usize, name: &str) -> Result<Address, ScenarioError> {
        if name == "anyone" {
            return Ok(Address::from_low_u64(0xfeed));
        }
        if let Some(w) = self.scenario.worker(name) {
            return Ok(w.id.account());
        }
        if let Some(o) = self.scenario.oapp(name) {
            return Ok(o.app.addr);
        }
        Address::from_hex(name).map_err(|_| unknown(line, name))
    }

    fn directive(&mut self, line: usize, content: &str, tokens: &[&str]) -> Result<(), ScenarioError> {
        let mut args = Args::new(line, &tokens[1..])?;
        match tokens[0] {
            "seed" => {
                self.scenario.seed = number(line, "seed", args.pos(0, "seed value")?)?;
                args.finish(1, &[])
            }
            "until" => {
                self.scenario.until = Some(number(line, "tick", args.pos(0, "tick")?)?);
                args.finish(1, &[])
            }
            "mutant" => {
                self.scenario.mutant = match args.pos(0, "mutant name")? {
                    "none" => Mutant::None,
                    "skip-without-nonce-check" => Mutant::SkipWithoutNonceCheck,
                    other => return Err(syntax(line, format!("unknown mutant `{other}`"))),
                };
                args.finish(1, &[])
            }
            "chain" => self.chain(line, args),
            "library" => self.library(line, args),
            "dvn" | "executor" | "user" | "precrime" => self.worker_decl(line, tokens[0], args),
            "oapp" => self.oapp_decl(line, args),
            "peer" => {
                let (a, b) = (args.pos(0, "application")?, args.pos(1, "application")?);
                for name in [a, b] {
                    let decl = self.scenario.oapp(name).ok_or_else(|| unknown(line, name))?;
                    if decl.state.bridge().is_none() {
                        return Err(syntax(line, format!("`{name}` is not a bridge")));
                    }
                }
                self.scenario.peers.push((a.to_string(), b.to_string()));
                args.finish(2, &[])
            }
            "stack" => {
                let decl = self.stack_decl(line, &mut args)?;
                self.scenario.stacks.push(decl);
                args.finish(1, &[])
            }
            "default" => {
                let decl = self.default_decl(line, &mut args)?;
                self.scenario.defaults.push(decl);
                args.finish(0, &[])
            }
            "optin" => {
                let oapp = self.app(line, args.pos(0, "application")?)?;
                let remote = self.eid(line, args.req("remote")?)?;
                self.scenario.stacks.push(StackDecl { oapp, remote, setting: StackSetting::DefaultOptIn });
                args.finish(1, &[])
            }
            "at" => self.timed(line, content, tokens),
            other => Err(syntax(line, format!("unknown directive `{other}`"))),
        }
    }

    fn chain(&mut self, line: usize, mut args: Args<'_>) -> Result<(), ScenarioError> {
        let v: u32 = number(line, "endpoint id", args.pos(0, "endpoint id")?)?;
        let eid = EndpointId::new(v).map_err(|e| syntax(line, e.to_string()))?;
        if self.scenario.chains.iter().any(|c| c.eid == eid) {
            return Err(syntax(line, format!("duplicate chain {eid}")));
        }
        let mut config = ChainConfig::new(eid);
        if let Some(b) = args.num("budget")? {
            if b == 0 {
                return Err(syntax(line, "budget must be at least 1"));
            }
            config.iteration_budget = b;
        }
        if let Some(m) = args.num("maxpayload")? {
            config.max_payload = m;
        }
        if let Some(t) = args.num("blocktime")? {
            if t == 0 {
                return Err(syntax(line, "blocktime must be at least 1"));
            }
            config.block_time_ticks = t;
        }
        if let Some(f) = args.num("fee-dvn")? {
            config.fees.per_dvn = f;
        }
        if let Some(f) = args.num("fee-exec")? {
            config.fees.executor = f;
        }
        args.finish(1, &[])?;
        self.scenario.chains.push(config);
        Ok(())
    }

    fn library(&mut self, line: usize, mut args: Args<'_>) -> Result<(), ScenarioError> {
        let lib_id: u32 = number(line, "library id", args.pos(0, "library id")?)?;
        let ver = args.pos(1, "major.minor")?;
        let (major, minor) = ver.split_once('.').ok_or_else(|| syntax(line, format!("version `{ver}` must be major.minor")))?;
        let version = LibVersion::new(lib_id, number(line, "major", major)?, number(line, "minor", minor)?);
        let kind = match args.req("kind")? {
            "uln" => LibraryKind::Uln,
            "whitelist" => {
                let names = args.req("allow")?.split(',').map(str::to_string).collect();
                self.pending_allow.push((self.scenario.libraries.len(), line, names));
                LibraryKind::Whitelist(BTreeSet::new())
            }
            other => match other.strip_prefix("custom:") {
                Some(id) => LibraryKind::Custom(number(line, "custom kind", id)?),
                None => return Err(syntax(line, format!("unknown library kind `{other}`"))),
            },
        };
        let chains = match args.get("chains") {
            Some(list) => Some(list.split(',').map(|e| self.eid(line, e)).collect::<Result<Vec<_>, _>>()?),
            None => None,
        };
        args.finish(2, &[])?;
        if self.scenario.libraries.iter().any(|l| l.version == version) {
            return Err(syntax(line, format!("duplicate library {version}")));
        }
        self.scenario.libraries.push(LibraryDecl { version, kind, chains });
        Ok(())
    }

    fn worker_decl(&mut self, line: usize, role: &str, mut args: Args<'_>) -> Result<(), ScenarioError> {
        let name = args.pos(0, "worker name")?.to_string();
        if self.scenario.worker(&name).is_some() {
            return Err(syntax(line, format!("duplicate worker `{name}`")));
        }
        let index = self.scenario.workers.len() + 1;
        let id = u8::try_from(index).map_err(|_| syntax(line, "too many workers"))?;
        let role = match role {
            "dvn" => {
                let watch =
                    args.req("watch")?.split(',').map(|e| self.eid(line, e)).collect::<Result<Vec<_>, _>>()?;
                let latency: u64 = args.num("latency")?.unwrap_or(1);
                if latency == 0 {
                    return Err(syntax(line, "latency must be at least 1"));
                }
                Role::Dvn { watch, latency }
            }
            "executor" => Role::Executor,
            "user" => Role::User,
            _ => Role::PreCrime,
        };
        let behavior = match args.get("behavior") {
            Some(b) => Behavior::from_str(b).map_err(|e| syntax(line, e))?,
            None => Behavior::Honest,
        };
        if behavior == Behavior::Equivocate && !matches!(role, Role::Dvn { .. }) {
            return Err(syntax(line, "only DVNs can equivocate"));
        }
        args.finish(1, &[])?;
        self.scenario.workers.push(WorkerDecl { name, id: WorkerId(id), role, behavior });
        Ok(())
    }

    fn oapp_decl(&mut self, line: usize, mut args: Args<'_>) -> Result<(), ScenarioError> {
        let name = args.pos(0, "application name")?.to_string();
        if self.scenario.oapp(&name).is_some() {
            return Err(syntax(line, format!("duplicate application `{name}`")));
        }
        let chain = self.eid(line, args.req("chain")?)?;
        let addr = Address::from_hex(args.req("addr")?).map_err(|e| syntax(line, e.to_string()))?;
        if self.scenario.oapps.iter().any(|o| o.app.chain == chain && o.app.addr == addr) {
            return Err(syntax(line, format!("address {addr} already deployed on chain {chain}")));
        }
        let logic = match args.req("kind")? {
            "bridge" => {
                let compose_target = match args.get("compose") {
                    Some(n) => {
                        let target = self.app(line, n)?;
                        if target.chain != chain {
                            return Err(syntax(line, "compose target must live on the same chain"));
                        }
                        Some(target.addr)
                    }
                    None => None,
                };
                AppLogic::Bridge(BridgeState {
                    minted: args.num("minted")?.unwrap_or(0),
                    locked: args.num("locked")?.unwrap_or(0),
                    available: args.num("available")?.unwrap_or(0),
                    peers: BTreeMap::new(),
                    compose_target,
                })
            }
            "swap" => {
                let (ratio_num, ratio_den) = match args.get("ratio") {
                    Some(r) => parse_ratio(line, r)?,
                    None => (1, 1),
                };
                AppLogic::Swap(SwapState {
                    reserve_out: args.num("reserves")?.unwrap_or(0),
                    ratio_num,
                    ratio_den,
                    ..SwapState::default()
                })
            }
            "plain" => AppLogic::Plain(Vec::new()),
            other => return Err(syntax(line, format!("unknown application kind `{other}`"))),
        };
        let balance = args.num("balance")?.unwrap_or(0);
        args.finish(1, &[])?;
        let app = AppRef { name: name.clone(), chain, addr };
        self.scenario.oapps.push(OAppDecl { app, state: OApp::new(name, logic), balance });
        Ok(())
    }

    fn stack_body(&self, line: usize, args: &mut Args<'_>) -> Result<SecurityStack, ScenarioError> {
        let both = args.get("lib");
        let send = args.get("send").or(both).ok_or_else(|| syntax(line, "missing `send=`"))?;
        let recv = args.get("recv").or(both).ok_or_else(|| syntax(line, "missing `recv=`"))?;
        let executor = self.worker(line, args.req("executor")?)?.id;
        let mut stack = SecurityStack::new(parse_lib(line, send)?, parse_lib(line, recv)?, executor);
        let required = self.workers(line, args.get("required").unwrap_or(""))?;
        let optional = self.workers(line, args.get("optional").unwrap_or(""))?;
        let threshold = args.num("threshold")?.unwrap_or(0);
        stack = stack.with_required(required).with_optional(optional, threshold);
        for lib in [stack.send_library, stack.receive_library] {
            if !self.scenario.libraries.iter().any(|l| l.version == lib) {
                return Err(unknown(line, &lib.to_string()));
            }
        }
        stack.validate().map_err(|e| syntax(line, e))?;
        Ok(stack)
    }

    fn stack_decl(&self, line: usize, args: &mut Args<'_>) -> Result<StackDecl, ScenarioError> {
        let oapp = self.app(line, args.pos(0, "application")?)?;
        let remote = self.eid(line, args.req("remote")?)?;
        let stack = self.stack_body(line, args)?;
        Ok(StackDecl { oapp, remote, setting: StackSetting::Explicit(stack) })
    }

    fn default_decl(&self, line: usize, args: &mut Args<'_>) -> Result<DefaultDecl, ScenarioError> {
        let chain = self.eid(line, args.req("chain")?)?;
        let remote = self.eid(line, args.req("remote")?)?;
        let stack = self.stack_body(line, args)?;
        Ok(DefaultDecl { chain, remote, stack })
    }

    fn receiver(&self, line: usize, app: &AppRef, args: &mut Args<'_>) -> Result<AppRef, ScenarioError> {
        if let Some(to) = args.get("to") {
            return self.app(line, to);
        }
        let dst = args.req("dst")?;
        if let Some(o) = self.scenario.oapp(dst) {
            return Ok(o.app.clone());
        }
        let eid = self.eid(line, dst)?;
        let mut candidates: Vec<&OAppDecl> = self.scenario.oapps.iter().filter(|o| o.app.chain == eid).collect();
        if self.scenario.oapp(&app.name).is_some_and(|o| o.state.bridge().is_some()) {
            let peered: Vec<&OAppDecl> =
                candidates.iter().copied().filter(|o| self.peered(&app.name, &o.app.name)).collect();
            if !peered.is_empty() {
                candidates = peered;
            }
        }
        match candidates.as_slice() {
            [one] => Ok(one.app.clone()),
            [] => Err(syntax(line, format!("no application on chain {eid}; use to=<app>"))),
            _ => Err(syntax(line, format!("several applications on chain {eid}; use to=<app>"))),
        }
    }

    fn peered(&self, a: &str, b: &str) -> bool {
        self.scenario.peers.iter().any(|(x, y)| (x == a && y == b) || (x == b && y == a))
    }

    fn payload(&self, line: usize, s: &str) -> Result<PayloadSpec, ScenarioError> {
        if let Some(text) = s.strip_prefix("text:") {
            return Ok(PayloadSpec::Bytes(text.as_bytes().to_vec()));
        }
        if let Some(n) = s.strip_prefix("random:") {
            return Ok(PayloadSpec::Random(number(line, "length", n)?));
        }
        if let Some(m) = s.strip_prefix("mint:") {
            let (amount, compose) = match m.strip_suffix(":compose") {
                Some(a) => (a, true),
                None => (m, false),
            };
            return Ok(PayloadSpec::Bytes(encode_mint(number(line, "amount", amount)?, compose)));
        }
        Ok(PayloadSpec::Bytes(parse_hex(line, s)?))
    }

    fn options(&self, line: usize, s: &str) -> Result<Vec<u8>, ScenarioError> {
        let opts = if let Some(g) = s.strip_prefix("gas:") {
            MessageOptions::Gas { execution_gas: number(line, "gas", g)? }
        } else if let Some(rest) = s.strip_prefix("drop:") {
            let parts: Vec<&str> = rest.split(':').collect();
            let [gas, amount, to] = parts[..] else {
                return Err(syntax(line, "drop options are drop:<gas>:<amount>:<receiver>"));
            };
            let receiver = match self.scenario.oapp(to) {
                Some(o) => o.app.addr,
                None => self.actor(line, to)?,
            };
            MessageOptions::GasAndDrop {
                execution_gas: number(line, "gas", gas)?,
                native_drop: number(line, "amount", amount)?,
                receiver,
            }
        } else if let Some(name) = s.strip_prefix("precrime:") {
            let id = self.worker(line, name)?.id;
            MessageOptions::Composite(vec![WorkerOption { worker_id: id.0, op_type: 1, command: Vec::new() }])
        } else {
            let bytes = parse_hex(line, s)?;
            MessageOptions::decode(&bytes).map_err(|e| syntax(line, format!("bad options: {e}")))?;
            return Ok(bytes);
        };
        opts.encode().map_err(|e| syntax(line, e.to_string()))
    }

    fn hash_spec(&self, line: usize, s: Option<&str>) -> Result<HashSpec, ScenarioError> {
        Ok(match s {
            None | Some("stored") => HashSpec::Stored,
            Some("nil") => HashSpec::Nil,
            Some("honest") => HashSpec::Honest,
            Some(h) => HashSpec::Explicit(Hash32::from_hex(h).map_err(|e| syntax(line, e.to_string()))?),
        })
    }

    fn path(&self, line: usize, s: &str) -> Result<crate::codec::Path, ScenarioError> {
        let (a, b) = s.split_once("->").ok_or_else(|| syntax(line, format!("path `{s}` must be <app>-><app>")))?;
        Ok(super::path_between(&self.app(line, a)?, &self.app(line, b)?))
    }

    fn timed(&mut self, line: usize, content: &str, tokens: &[&str]) -> Result<(), ScenarioError> {
        let tick: u64 = number(line, "tick", tokens.get(1).ok_or_else(|| syntax(line, "missing tick"))?)?;
        if tick < self.last_tick {
            return Err(syntax(line, format!("tick {tick} is earlier than {}", self.last_tick)));
        }
        self.last_tick = tick;
        let name = *tokens.get(2).ok_or_else(|| syntax(line, "missing command"))?;
        let rest = &tokens[3..];
        if name == "assert" {
            let command = Command::Assert(self.predicate(line, rest)?);
            self.scenario.timeline.push(TimedCommand { tick, line, text: content.to_string(), command, expect: None });
            return Ok(());
        }
        for expanded in expand(line, rest)? {
            let tokens: Vec<&str> = expanded.iter().map(String::as_str).collect();
            let mut args = Args::new(line, &tokens)?;
            let expect = args.get("expect").map(str::to_string);
            let command = self.command(line, name, &mut args)?;
            self.scenario.timeline.push(TimedCommand { tick, line, text: content.to_string(), command, expect });
        }
        Ok(())
    }

    fn command(&self, line: usize, name: &str, args: &mut Args<'_>) -> Result<Command, ScenarioError> {
        let command = match name {
            "send" => {
                let app = self.app(line, args.pos(0, "application")?)?;
                let to = self.receiver(line, &app, args)?;
                let payload = self.payload(line, args.get("payload").unwrap_or(""))?;
                let options = match args.get("options") {
                    Some(o) => self.options(line, o)?,
                    None => Vec::new(),
                };
                args.finish(1, &[])?;
                Command::Send { app, to, payload, options }
            }
            "bridge" => {
                let app = self.app(line, args.pos(0, "application")?)?;
                let dst = args.req("dst")?;
                let dst = match self.scenario.oapp(dst) {
                    Some(o) => o.app.chain,
                    None => self.eid(line, dst)?,
                };
                let amount = args.num("amount")?.ok_or_else(|| syntax(line, "missing `amount=`"))?;
                let options = match args.get("options") {
                    Some(o) => self.options(line, o)?,
                    None => Vec::new(),
                };
                let cmd = Command::Bridge {
                    app,
                    dst,
                    amount,
                    compose: args.flag("compose"),
                    unbacked: args.flag("unbacked"),
                    options,
                };
                args.finish(1, &["compose", "unbacked"])?;
                cmd
            }
            "advance" => {
                let chain = self.eid(line, args.pos(0, "chain")?)?;
                let blocks: u64 = number(line, "blocks", args.pos(1, "block count")?)?;
                if blocks == 0 {
                    return Err(syntax(line, "advance needs at least one block"));
                }
                args.finish(2, &[])?;
                Command::Advance { chain, blocks }
            }
            "fault" => {
                let who = match args.get("dvn").or_else(|| args.get("executor")).or_else(|| args.get("worker")) {
                    Some(w) => w,
                    None => args.pos(0, "worker")?,
                };
                let worker = self.worker(line, who)?.id;
                let behavior = match args.get("behavior") {
                    Some(b) => b,
                    None => args.positional.iter().copied().find(|p| *p != who).ok_or_else(|| syntax(line, "missing behavior"))?,
                };
                let behavior = Behavior::from_str(behavior).map_err(|e| syntax(line, e))?;
                args.finish(2, &[])?;
                Command::Fault { worker, behavior }
            }
            "stack" => {
                let decl = self.stack_decl(line, args)?;
                args.finish(1, &[])?;
                Command::Stack(decl)
            }
            "default" => {
                let decl = self.default_decl(line, args)?;
                args.finish(0, &[])?;
                Command::Default(decl)
            }
            "optin" => {
                let oapp = self.app(line, args.pos(0, "application")?)?;
                let remote = self.eid(line, args.req("remote")?)?;
                args.finish(1, &[])?;
                Command::Stack(StackDecl { oapp, remote, setting: StackSetting::DefaultOptIn })
            }
            "recvlib" => {
                let oapp = self.app(line, args.pos(0, "application")?)?;
                let remote = self.eid(line, args.req("remote")?)?;
                let lib = parse_lib(line, args.req("lib")?)?;
                let grace = args.num("grace")?.unwrap_or(0);
                args.finish(1, &[])?;
                Command::RecvLib { oapp, remote, lib, grace }
            }
            "skip" | "clear" | "nilify" | "burn" => {
                let oapp = self.app(line, args.pos(0, "application")?)?;
                let from = self.app(line, args.req("from")?)?;
                let nonce = args.num("nonce")?.ok_or_else(|| syntax(line, "missing `nonce=`"))?;
                let cmd = match name {
                    "skip" => Command::Skip { oapp, from, nonce },
                    "clear" => Command::Clear { oapp, from, nonce, wrong: args.flag("wrong") },
                    "nilify" => Command::Nilify { oapp, from, nonce, hash: self.hash_spec(line, args.get("hash"))? },
                    _ => Command::Burn { oapp, from, nonce, hash: self.hash_spec(line, args.get("hash"))? },
                };
                args.finish(1, &["wrong"])?;
                cmd
            }
            "commit" | "deliver" | "attest" => {
                let who = args.pos(0, "actor")?;
                let from = self.app(line, args.req("from")?)?;
                let to = self.app(line, args.req("to")?)?;
                let nonce = args.num("nonce")?.ok_or_else(|| syntax(line, "missing `nonce=`"))?;
                let lib = args.get("lib").map(|l| parse_lib(line, l)).transpose()?;
                let cmd = match name {
                    "commit" => Command::Commit { actor: self.actor(line, who)?, from, to, nonce, wrong: args.flag("wrong"), lib },
                    "deliver" => Command::Deliver { actor: self.actor(line, who)?, from, to, nonce, wrong: args.flag("wrong") },
                    _ => {
                        let dvn = self.worker(line, who)?.id;
                        Command::Attest { dvn, from, to, nonce, wrong: args.flag("wrong"), lib }
                    }
                };
                args.finish(1, &["wrong"])?;
                cmd
            }
            "compose" => {
                let actor = self.actor(line, args.pos(0, "actor")?)?;
                let to = self.app(line, args.req("to")?)?;
                args.finish(1, &[])?;
                Command::Compose { actor, to }
            }
            "topup" => {
                let app = self.app(line, args.pos(0, "application")?)?;
                let amount = args.num("amount")?.ok_or_else(|| syntax(line, "missing `amount=`"))?;
                args.finish(1, &[])?;
                Command::TopUp { app, amount }
            }
            other => return Err(syntax(line, format!("unknown command `{other}`"))),
        };
        Ok(command)
    }

    fn predicate(&self, line: usize, tokens: &[&str]) -> Result<Predicate, ScenarioError> {
        let name = *tokens.first().ok_or_else(|| syntax(line, "missing predicate"))?;
        let rest = &tokens[1..];
        if name == "trace-contains" || name == "trace-count" {
            let mut toks: Vec<String> = rest.iter().map(|t| t.to_string()).collect();
            if name == "trace-contains" {
                if toks.is_empty() {
                    return Err(syntax(line, "trace-contains needs at least one token"));
                }
                return Ok(Predicate::TraceContains { tokens: toks });
            }
            let is = toks.pop().and_then(|t| t.strip_prefix("is=").map(str::to_string));
            let is = is.ok_or_else(|| syntax(line, "trace-count ends with is=<n>"))?;
            return Ok(Predicate::TraceCount { tokens: toks, is: number(line, "count", &is)? });
        }
        let mut args = Args::new(line, rest)?;
        let pred = match name {
            "state" | "committable" => {
                let path = self.path(line, args.req("path")?)?;
                let nonce = args.num("nonce")?.ok_or_else(|| syntax(line, "missing `nonce=`"))?;
                let is = args.req("is")?;
                if name == "state" {
                    let is = PacketState::parse(is).ok_or_else(|| syntax(line, format!("unknown state `{is}`")))?;
                    Predicate::State { path, nonce, is }
                } else {
                    let is = match is {
                        "met" | "true" => QuorumStatus::Met,
                        "required-unmet" => QuorumStatus::RequiredUnmet,
                        "threshold-unmet" => QuorumStatus::ThresholdUnmet,
                        other => return Err(syntax(line, format!("unknown quorum status `{other}`"))),
                    };
                    Predicate::Committable { path, nonce, is }
                }
            }
            "delivered-count" => {
                let path = args.get("path").map(|p| self.path(line, p)).transpose()?;
                let is = args.num("is")?.ok_or_else(|| syntax(line, "missing `is=`"))?;
                Predicate::DeliveredCount { path, is }
            }
            "balance" => {
                let who = args.pos(0, "account")?;
                let field = match args.get("field").unwrap_or("native") {
                    "native" => BalanceField::Native,
                    "minted" => BalanceField::Minted,
                    "locked" => BalanceField::Locked,
                    "available" => BalanceField::Available,
                    "reserve-in" => BalanceField::ReserveIn,
                    "reserve-out" => BalanceField::ReserveOut,
                    "paid" | "paid-out" => BalanceField::PaidOut,
                    other => return Err(syntax(line, format!("unknown balance field `{other}`"))),
                };
                let chain = match (args.get("chain"), self.scenario.oapp(who)) {
                    (Some(c), _) => self.eid(line, c)?,
                    (None, Some(o)) => o.app.chain,
                    (None, None) => return Err(syntax(line, "balance of a non-application needs `chain=`")),
                };
                let account = self.actor(line, who)?;
                let is = args.num("is")?.ok_or_else(|| syntax(line, "missing `is=`"))?;
                Predicate::Balance { chain, account, field, is }
            }
            "invariant-holds" => match args.pos(0, "invariant")? {
                "bridge-conservation" => Predicate::BridgeConservation,
                other => return Err(syntax(line, format!("unknown invariant `{other}`"))),
            },
            "compose-count" => {
                let to = self.app(line, args.req("to")?)?;
                let executed = match args.req("status")? {
                    "stored" => false,
                    "executed" => true,
                    other => return Err(syntax(line, format!("unknown compose status `{other}`"))),
                };
                let is = args.num("is")?.ok_or_else(|| syntax(line, "missing `is=`"))?;
                Predicate::ComposeCount { to, executed, is }
            }
            other => return Err(syntax(line, format!("unknown predicate `{other}`"))),
        };
        args.finish(usize::from(matches!(name, "balance" | "invariant-holds")), &[])?;
        Ok(pred)
    }

    fn finish(mut self) -> Result<Scenario, ScenarioError> {
        for (index, line, names) in std::mem::take(&mut self.pending_allow) {
            let ids = names.iter().map(|n| self.worker(line, n).map(|w| w.id)).collect::<Result<BTreeSet<_>, _>>()?;
            self.scenario.libraries[index].kind = LibraryKind::Whitelist(ids);
        }
        if self.scenario.chains.is_empty() {
            return Err(syntax(0, "scenario declares no chains"));
        }
        Ok(self.scenario)
    }
}
