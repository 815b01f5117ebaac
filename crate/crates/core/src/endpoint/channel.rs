use std::collections::BTreeMap;

use crate::codec::Hash32;

/// Sentinel stored by `nilify`: occupies the slot but is never deliverable.
pub const NIL_PAYLOAD_HASH: Hash32 = Hash32([0xff; 32]);

/// Receive-side state of one lossless channel.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChannelState {
    pub(crate) lazy_inbound_nonce: u64,
    pub(crate) verified: BTreeMap<u64, Hash32>,
}

impl ChannelState {
    /// Highest delivered or skipped nonce.
    pub fn lazy_inbound_nonce(&self) -> u64 {
        self.lazy_inbound_nonce
    }

    /// Stored hash at `nonce`, which may be [`NIL_PAYLOAD_HASH`].
    pub fn verified(&self, nonce: u64) -> Option<Hash32> {
        self.verified.get(&nonce).copied()
    }

    pub fn verified_entries(&self) -> impl Iterator<Item = (u64, Hash32)> + '_ {
        self.verified.iter().map(|(n, h)| (*n, *h))
    }

    pub(crate) fn has_live_entry(&self, nonce: u64) -> bool {
        matches!(self.verified.get(&nonce), Some(h) if *h != NIL_PAYLOAD_HASH)
    }

    /// Largest `n ≥ lazy` with every nonce in `(lazy, n]` holding a non-NIL
    /// entry, walking at most `budget` steps.
    pub fn inbound_nonce(&self, budget: u64) -> u64 {
        let mut nonce = self.lazy_inbound_nonce;
        for _ in 0..budget {
            if !self.has_live_entry(nonce + 1) {
                break;
            }
            nonce += 1;
        }
        nonce
    }
}

/// Iteration budget of one transaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Meter {
    limit: u64,
    used: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BudgetExceeded {
    pub limit: u64,
}

impl Meter {
    pub fn new(limit: u64) -> Self {
        Meter { limit, used: 0 }
    }

    pub fn unlimited() -> Self {
        Meter::new(u64::MAX)
    }

    pub fn charge(&mut self, units: u64) -> Result<(), BudgetExceeded> {
        let next = self.used.saturating_add(units);
        if next > self.limit {
            return Err(BudgetExceeded { limit: self.limit });
        }
        self.used = next;
        Ok(())
    }

    pub fn used(&self) -> u64 {
        self.used
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn live(n: u64) -> Hash32 {
        let mut h = [0u8; 32];
        h[..8].copy_from_slice(&n.to_be_bytes());
        Hash32(h)
    }

    fn with_entries(lazy: u64, nonces: impl IntoIterator<Item = u64>) -> ChannelState {
        ChannelState {
            lazy_inbound_nonce: lazy,
            verified: nonces.into_iter().map(|n| (n, live(n))).collect(),
        }
    }

    #[test]
    fn walk_stops_at_gap() {
        assert_eq!(with_entries(0, [1, 2, 3, 6]).inbound_nonce(u64::MAX), 3);
    }

    #[test]
    fn walk_blocked_until_first_nonce_arrives() {
        let mut ch = with_entries(0, 2..=1000);
        assert_eq!(ch.inbound_nonce(u64::MAX), 0);
        ch.verified.insert(1, live(1));
        assert_eq!(ch.inbound_nonce(1000), 1000);
    }

    #[test]
    fn walk_truncated_by_budget() {
        assert_eq!(with_entries(0, 1..=1000).inbound_nonce(500), 500);
    }

    #[test]
    fn nil_counts_as_gap() {
        let mut ch = with_entries(0, [1, 2, 3]);
        ch.verified.insert(2, NIL_PAYLOAD_HASH);
        assert_eq!(ch.inbound_nonce(u64::MAX), 1);
    }

    #[test]
    fn meter_charges_up_to_limit() {
        let mut m = Meter::new(2);
        assert!(m.charge(1).is_ok());
        assert!(m.charge(1).is_ok());
        assert_eq!(m.charge(1), Err(BudgetExceeded { limit: 2 }));
        assert_eq!(m.used(), 2);
    }
}
