use std::collections::{BTreeMap, BTreeSet};

use crate::codec::Hash32;
use crate::endpoint::SecurityStack;
use crate::ids::WorkerId;

/// The DVN part of a receiver's stack, resolved when a commit is attempted.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct UlnConfigView {
    pub required: BTreeSet<WorkerId>,
    pub optional: BTreeSet<WorkerId>,
    pub threshold: u8,
}

impl From<&SecurityStack> for UlnConfigView {
    fn from(stack: &SecurityStack) -> Self {
        UlnConfigView {
            required: stack.required_dvns.clone(),
            optional: stack.optional_dvns.clone(),
            threshold: stack.optional_threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuorumStatus {
    Met,
    RequiredUnmet,
    ThresholdUnmet,
}

impl QuorumStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            QuorumStatus::Met => "met",
            QuorumStatus::RequiredUnmet => "required-unmet",
            QuorumStatus::ThresholdUnmet => "threshold-unmet",
        }
    }
}

/// Required check first, so a packet missing both reports `RequiredUnmet`.
pub fn quorum_status(attesters: &BTreeSet<WorkerId>, cfg: &UlnConfigView) -> QuorumStatus {
    if !cfg.required.is_subset(attesters) {
        return QuorumStatus::RequiredUnmet;
    }
    if attesters.intersection(&cfg.optional).count() < usize::from(cfg.threshold) {
        return QuorumStatus::ThresholdUnmet;
    }
    QuorumStatus::Met
}

pub fn committable(attesters: &BTreeSet<WorkerId>, cfg: &UlnConfigView) -> bool {
    quorum_status(attesters, cfg) == QuorumStatus::Met
}

/// Attestations keyed by (headerHash, payloadHash); never deleted.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AttestationStore {
    entries: BTreeMap<(Hash32, Hash32), BTreeSet<WorkerId>>,
}

impl AttestationStore {
    /// Returns false if `dvn` had already attested this key.
    pub fn attest(&mut self, header_hash: Hash32, payload_hash: Hash32, dvn: WorkerId) -> bool {
        self.entries.entry((header_hash, payload_hash)).or_default().insert(dvn)
    }

    pub fn attesters(&self, header_hash: Hash32, payload_hash: Hash32) -> BTreeSet<WorkerId> {
        self.entries.get(&(header_hash, payload_hash)).cloned().unwrap_or_default()
    }

    /// Every payload hash attested for one header; more than one means equivocation.
    pub fn hashes_for(&self, header_hash: Hash32) -> Vec<Hash32> {
        self.entries.keys().filter(|(h, _)| *h == header_hash).map(|(_, p)| *p).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(ids: &[u8]) -> BTreeSet<WorkerId> {
        ids.iter().copied().map(WorkerId).collect()
    }

    fn cfg(required: &[u8], optional: &[u8], threshold: u8) -> UlnConfigView {
        UlnConfigView { required: set(required), optional: set(optional), threshold }
    }

    #[test]
    fn required_and_threshold() {
        let c = cfg(&[1], &[2, 3, 4], 1);
        assert_eq!(quorum_status(&set(&[1, 2]), &c), QuorumStatus::Met);
        assert_eq!(quorum_status(&set(&[2]), &c), QuorumStatus::RequiredUnmet);
        assert_eq!(quorum_status(&set(&[1]), &c), QuorumStatus::ThresholdUnmet);
    }

    #[test]
    fn optional_only() {
        let c = cfg(&[], &[2, 3, 4], 2);
        assert!(committable(&set(&[3, 4]), &c));
        assert!(!committable(&set(&[3]), &c));
    }

    #[test]
    fn unconfigured_attesters_do_not_count() {
        let c = cfg(&[1], &[2, 3], 1);
        assert!(!committable(&set(&[1, 9]), &c));
    }

    #[test]
    fn equivocation_creates_distinct_keys() {
        let mut store = AttestationStore::default();
        let h = Hash32([1; 32]);
        assert!(store.attest(h, Hash32([2; 32]), WorkerId(1)));
        assert!(store.attest(h, Hash32([3; 32]), WorkerId(1)));
        assert_eq!(store.hashes_for(h).len(), 2);
        assert!(!store.attest(h, Hash32([2; 32]), WorkerId(1)));
        assert_eq!(store.attesters(h, Hash32([2; 32])).len(), 1);
    }
}
