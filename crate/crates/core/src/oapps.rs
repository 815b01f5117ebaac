//! Example applications: a lock/mint token bridge, a fixed-ratio swap that is
//! reached through compose, and a plain message recorder.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::codec::{Address, EndpointId};
use crate::endpoint::{AppAbort, ComposeCall, ComposeOutbox, ComposeReceiver, Delivery, MessageReceiver};

pub const OP_MINT: u8 = 0x01;
pub const BRIDGE_PAYLOAD_LEN: usize = 18;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AppError {
    #[error("insufficient funds: have {have}, need {need}")]
    InsufficientFunds { have: u128, need: u128 },
    #[error("no peer registered for endpoint {0}")]
    NoPeer(EndpointId),
    #[error("application is not a bridge")]
    NotABridge,
    #[error("application is not a swap")]
    NotASwap,
}

impl AppError {
    pub fn code(&self) -> &'static str {
        match self {
            AppError::InsufficientFunds { .. } => "InsufficientFunds",
            AppError::NoPeer(_) => "NoPeer",
            AppError::NotABridge => "NotABridge",
            AppError::NotASwap => "NotASwap",
        }
    }
}

/// `op(1) ‖ amount(16) ‖ composeFlag(1)`.
pub fn encode_mint(amount: u128, compose: bool) -> Vec<u8> {
    let mut out = Vec::with_capacity(BRIDGE_PAYLOAD_LEN);
    out.push(OP_MINT);
    out.extend_from_slice(&amount.to_be_bytes());
    out.push(u8::from(compose));
    out
}

pub fn decode_mint(payload: &[u8]) -> Option<(u128, bool)> {
    if payload.len() != BRIDGE_PAYLOAD_LEN || payload[0] != OP_MINT || payload[17] > 1 {
        return None;
    }
    let amount = u128::from_be_bytes(payload[1..17].try_into().ok()?);
    Some((amount, payload[17] == 1))
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BridgeState {
    pub locked: u128,
    pub minted: u128,
    /// Tokens users on this chain still hold and may lock.
    pub available: u128,
    pub peers: BTreeMap<EndpointId, Address>,
    pub compose_target: Option<Address>,
}

impl BridgeState {
    /// Locks `amount` and returns the mint instruction for the peer.
    pub fn lock(&mut self, dst: EndpointId, amount: u128, compose: bool) -> Result<(Address, Vec<u8>), AppError> {
        let peer = *self.peers.get(&dst).ok_or(AppError::NoPeer(dst))?;
        if self.available < amount {
            return Err(AppError::InsufficientFunds { have: self.available, need: amount });
        }
        self.available -= amount;
        self.locked += amount;
        Ok((peer, encode_mint(amount, compose)))
    }

    /// A compromised sender: emits a mint instruction with nothing locked.
    pub fn unbacked(&self, dst: EndpointId, amount: u128) -> Result<(Address, Vec<u8>), AppError> {
        let peer = *self.peers.get(&dst).ok_or(AppError::NoPeer(dst))?;
        Ok((peer, encode_mint(amount, false)))
    }

    fn receive(&mut self, delivery: &Delivery<'_>, outbox: &mut ComposeOutbox) -> Result<u128, AppAbort> {
        if self.peers.get(&delivery.origin.src_eid) != Some(&delivery.origin.sender) {
            return Err(AppAbort::new("UnknownPeer"));
        }
        let (amount, compose) = decode_mint(delivery.message).ok_or_else(|| AppAbort::new("MalformedPayload"))?;
        self.minted += amount;
        if compose {
            let target = self.compose_target.ok_or_else(|| AppAbort::new("NoComposeTarget"))?;
            outbox.send_compose(target, 0, amount.to_be_bytes().to_vec());
        }
        Ok(amount)
    }
}

/// Σminted ≤ Σlocked over every bridge deployment.
pub fn bridge_conservation<'a>(bridges: impl IntoIterator<Item = &'a BridgeState>) -> bool {
    let (minted, locked) = bridges.into_iter().fold((0u128, 0u128), |(m, l), b| (m + b.minted, l + b.locked));
    minted <= locked
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwapState {
    pub reserve_in: u128,
    pub reserve_out: u128,
    pub ratio_num: u128,
    pub ratio_den: u128,
    pub paid_out: u128,
}

impl Default for SwapState {
    fn default() -> Self {
        SwapState { reserve_in: 0, reserve_out: 0, ratio_num: 1, ratio_den: 1, paid_out: 0 }
    }
}

impl SwapState {
    pub fn quote(&self, amount: u128) -> u128 {
        amount * self.ratio_num / self.ratio_den
    }

    fn swap(&mut self, message: &[u8]) -> Result<u128, AppAbort> {
        let bytes: [u8; 16] = message.try_into().map_err(|_| AppAbort::new("MalformedPayload"))?;
        let amount = u128::from_be_bytes(bytes);
        let out = self.quote(amount);
        if out > self.reserve_out {
            return Err(AppAbort::new("InsufficientReserves"));
        }
        self.reserve_in += amount;
        self.reserve_out -= out;
        self.paid_out += out;
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AppLogic {
    Bridge(BridgeState),
    Swap(SwapState),
    /// Records every delivered message.
    Plain(Vec<Vec<u8>>),
}

/// A deployed application. Callbacks note what they did in a journal that the
/// chain turns into ledger events once the transaction commits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OApp {
    pub name: String,
    pub logic: AppLogic,
    journal: Vec<(&'static str, u128)>,
}

impl OApp {
    pub fn new(name: impl Into<String>, logic: AppLogic) -> Self {
        OApp { name: name.into(), logic, journal: Vec::new() }
    }

    pub fn bridge(&self) -> Option<&BridgeState> {
        match &self.logic {
            AppLogic::Bridge(b) => Some(b),
            _ => None,
        }
    }

    pub fn bridge_mut(&mut self) -> Result<&mut BridgeState, AppError> {
        match &mut self.logic {
            AppLogic::Bridge(b) => Ok(b),
            _ => Err(AppError::NotABridge),
        }
    }

    pub fn swap(&self) -> Option<&SwapState> {
        match &self.logic {
            AppLogic::Swap(s) => Some(s),
            _ => None,
        }
    }

    pub fn swap_mut(&mut self) -> Result<&mut SwapState, AppError> {
        match &mut self.logic {
            AppLogic::Swap(s) => Ok(s),
            _ => Err(AppError::NotASwap),
        }
    }

    pub fn note(&mut self, action: &'static str, amount: u128) {
        self.journal.push((action, amount));
    }

    pub fn take_journal(&mut self) -> Vec<(&'static str, u128)> {
        std::mem::take(&mut self.journal)
    }
}

impl MessageReceiver for OApp {
    fn lz_receive(&mut self, delivery: &Delivery<'_>, outbox: &mut ComposeOutbox) -> Result<(), AppAbort> {
        match &mut self.logic {
            AppLogic::Bridge(b) => {
                let amount = b.receive(delivery, outbox)?;
                self.journal.push(("Mint", amount));
            }
            AppLogic::Swap(_) => return Err(AppAbort::new("NotAReceiver")),
            AppLogic::Plain(log) => {
                log.push(delivery.message.to_vec());
                self.journal.push(("Receive", delivery.message.len() as u128));
            }
        }
        Ok(())
    }
}

impl ComposeReceiver for OApp {
    fn lz_compose(&mut self, call: &ComposeCall<'_>, _outbox: &mut ComposeOutbox) -> Result<(), AppAbort> {
        match &mut self.logic {
            AppLogic::Swap(s) => {
                let out = s.swap(call.message)?;
                self.journal.push(("Swap", out));
                Ok(())
            }
            _ => Err(AppAbort::new("NotAComposer")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::endpoint::Origin;

    fn eid(v: u32) -> EndpointId {
        EndpointId::new(v).unwrap()
    }

    fn bridge(minted: u128, locked: u128) -> BridgeState {
        let mut b = BridgeState { locked, minted, available: 100, ..Default::default() };
        for e in 1..=3 {
            b.peers.insert(eid(e), Address::from_low_u64(0xb0 + u64::from(e)));
        }
        b
    }

    fn deliver(app: &mut OApp, src: u32, message: &[u8]) -> (Result<(), AppAbort>, ComposeOutbox) {
        let delivery = Delivery {
            origin: Origin { src_eid: eid(src), sender: Address::from_low_u64(0xb0 + u64::from(src)), nonce: 1 },
            receiver: Address::from_low_u64(0xb2),
            guid: Default::default(),
            message,
            extra_data: &[],
        };
        let mut outbox = ComposeOutbox::default();
        (app.lz_receive(&delivery, &mut outbox), outbox)
    }

    #[test]
    fn payload_round_trip() {
        let p = encode_mint(5, true);
        assert_eq!(p.len(), BRIDGE_PAYLOAD_LEN);
        assert_eq!(decode_mint(&p), Some((5, true)));
        assert_eq!(decode_mint(&p[..17]), None);
        assert_eq!(decode_mint(b"garbage"), None);
    }

    #[test]
    fn lock_then_mint() {
        let mut a = bridge(10, 10);
        let (_, payload) = a.lock(eid(2), 5, false).unwrap();
        assert_eq!(a.locked, 15);
        let mut b = OApp::new("b", AppLogic::Bridge(bridge(10, 10)));
        assert!(deliver(&mut b, 1, &payload).0.is_ok());
        assert_eq!(b.bridge().unwrap().minted, 15);
        assert_eq!(b.take_journal(), vec![("Mint", 5)]);
    }

    #[test]
    fn lock_requires_funds_and_peer() {
        let mut a = bridge(0, 0);
        assert_eq!(a.lock(eid(2), 101, false), Err(AppError::InsufficientFunds { have: 100, need: 101 }));
        assert_eq!(a.lock(eid(9), 1, false), Err(AppError::NoPeer(eid(9))));
        assert_eq!(a.locked, 0);
        assert!(a.lock(eid(2), 0, false).is_ok());
        assert_eq!(a.locked, 0);
    }

    #[test]
    fn malformed_or_foreign_payload_aborts() {
        let mut b = OApp::new("b", AppLogic::Bridge(bridge(0, 0)));
        assert_eq!(deliver(&mut b, 1, b"junk").0, Err(AppAbort::new("MalformedPayload")));
        b.bridge_mut().unwrap().peers.clear();
        assert_eq!(deliver(&mut b, 1, &encode_mint(1, false)).0, Err(AppAbort::new("UnknownPeer")));
    }

    #[test]
    fn compose_flag_requests_one_compose() {
        let mut state = bridge(0, 0);
        state.compose_target = Some(Address::from_low_u64(0x5));
        let mut b = OApp::new("b", AppLogic::Bridge(state));
        let (res, outbox) = deliver(&mut b, 1, &encode_mint(5, true));
        assert!(res.is_ok());
        assert_eq!(outbox.requests().len(), 1);
        assert_eq!(outbox.requests()[0].message, 5u128.to_be_bytes().to_vec());
    }

    #[test]
    fn conservation_sums() {
        let honest = [bridge(10, 15), bridge(15, 10), bridge(10, 10)];
        assert!(bridge_conservation(&honest));
        let attacked = [bridge(10, 10), bridge(20, 10), bridge(10, 10)];
        assert!(!bridge_conservation(&attacked));
        assert!(bridge_conservation(&[BridgeState::default()]));
    }

    fn compose(app: &mut OApp, amount: u128) -> Result<(), AppAbort> {
        let msg = amount.to_be_bytes();
        let call = ComposeCall {
            from: Address::ZERO,
            to: Address::ZERO,
            guid: Default::default(),
            index: 0,
            message: &msg,
        };
        app.lz_compose(&call, &mut ComposeOutbox::default())
    }

    #[test]
    fn swap_at_fixed_ratio() {
        let state = SwapState { reserve_out: 100, ratio_num: 2, ratio_den: 1, ..Default::default() };
        let mut s = OApp::new("s", AppLogic::Swap(state));
        compose(&mut s, 5).unwrap();
        assert_eq!(s.swap().unwrap().paid_out, 10);
        assert_eq!(s.swap().unwrap().reserve_out, 90);
    }

    #[test]
    fn starved_swap_aborts_without_change() {
        let mut s = OApp::new("s", AppLogic::Swap(SwapState::default()));
        let before = s.clone();
        assert_eq!(compose(&mut s, 5), Err(AppAbort::new("InsufficientReserves")));
        assert_eq!(s, before);
        s.swap_mut().unwrap().reserve_out = 5;
        compose(&mut s, 5).unwrap();
    }
}
