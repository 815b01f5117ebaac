use std::collections::{BTreeMap, BTreeSet};

use omnichain::codec::{
    compute_guid, decode_packet, encode_packet, Address, EndpointId, MessageOptions, Packet, PacketHeader, Path,
    WorkerOption,
};
use omnichain::endpoint::{ComposeOutbox, Delivery, MessageReceiver, Origin};
use omnichain::msglib::{quorum_status, QuorumStatus, UlnConfigView};
use omnichain::oapps::{bridge_conservation, AppLogic, BridgeState, OApp};
use omnichain::WorkerId;
use proptest::prelude::*;

fn eid(v: u32) -> EndpointId {
    EndpointId::new(v).unwrap()
}

fn arb_path() -> impl Strategy<Value = Path> {
    (1u32.., any::<[u8; 32]>(), 1u32.., any::<[u8; 32]>())
        .prop_map(|(s, a, d, b)| Path::new(eid(s), Address(a), eid(d), Address(b)))
}

fn arb_options() -> impl Strategy<Value = MessageOptions> {
    prop_oneof![
        any::<u128>().prop_map(|execution_gas| MessageOptions::Gas { execution_gas }),
        (any::<u128>(), any::<u128>(), any::<[u8; 32]>()).prop_map(|(g, d, r)| MessageOptions::GasAndDrop {
            execution_gas: g,
            native_drop: d,
            receiver: Address(r),
        }),
        prop::collection::vec(
            (any::<u8>(), any::<u8>(), prop::collection::vec(any::<u8>(), 0..40))
                .prop_map(|(worker_id, op_type, command)| WorkerOption { worker_id, op_type, command }),
            0..4
        )
        .prop_map(MessageOptions::Composite),
    ]
}

/// Required ids 1..=4, optional ids 11..=16, outsiders 30..=32.
fn arb_config() -> impl Strategy<Value = UlnConfigView> {
    (prop::collection::btree_set(1u8..=4, 0..=3), prop::collection::btree_set(11u8..=16, 0..=6), 0u8..=6).prop_map(
        |(r, o, t)| UlnConfigView {
            required: r.into_iter().map(WorkerId).collect(),
            optional: o.into_iter().map(WorkerId).collect(),
            threshold: t,
        },
    )
}

fn arb_attesters() -> impl Strategy<Value = BTreeSet<WorkerId>> {
    prop::collection::btree_set(prop_oneof![1u8..=4, 11u8..=16, 30u8..=32], 0..12)
        .prop_map(|s| s.into_iter().map(WorkerId).collect())
}

proptest! {
    #[test]
    fn packet_round_trip(nonce in 1u64.., path in arb_path(), version: u8, payload in prop::collection::vec(any::<u8>(), 0..300)) {
        let packet = Packet { header: PacketHeader::new(version, nonce, path), payload };
        let bytes = encode_packet(&packet);
        prop_assert_eq!(bytes.len(), 113 + packet.payload.len());
        prop_assert_eq!(decode_packet(&bytes), Ok(packet));
    }

    #[test]
    fn decode_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..200)) {
        let _ = decode_packet(&bytes);
        let _ = MessageOptions::decode(&bytes);
    }

    #[test]
    fn options_round_trip(opts in arb_options()) {
        let bytes = opts.encode().unwrap();
        prop_assert_eq!(MessageOptions::decode(&bytes), Ok(opts));
    }

    #[test]
    fn corrupting_the_guid_is_detected(nonce in 1u64.., path in arb_path(), byte in 81usize..113, flip in 1u8..) {
        let mut bytes = encode_packet(&Packet { header: PacketHeader::new(1, nonce, path), payload: vec![] });
        bytes[byte] ^= flip;
        prop_assert!(decode_packet(&bytes).is_err());
    }

    #[test]
    fn quorum_is_monotone_in_attesters(cfg in arb_config(), a in arb_attesters(), extra in arb_attesters()) {
        let bigger: BTreeSet<_> = a.union(&extra).copied().collect();
        if quorum_status(&a, &cfg) == QuorumStatus::Met {
            prop_assert_eq!(quorum_status(&bigger, &cfg), QuorumStatus::Met);
        }
    }

    #[test]
    fn quorum_is_antitone_in_threshold(cfg in arb_config(), a in arb_attesters()) {
        let stricter = UlnConfigView { threshold: cfg.threshold.saturating_add(1), ..cfg.clone() };
        if quorum_status(&a, &stricter) == QuorumStatus::Met {
            prop_assert_eq!(quorum_status(&a, &cfg), QuorumStatus::Met);
        }
    }

    #[test]
    fn met_implies_required_and_threshold(cfg in arb_config(), a in arb_attesters()) {
        if quorum_status(&a, &cfg) == QuorumStatus::Met {
            prop_assert!(cfg.required.is_subset(&a));
            prop_assert!(cfg.optional.intersection(&a).count() >= usize::from(cfg.threshold));
            // the total is bounded below by |required| + threshold
            prop_assert!(a.len() >= cfg.required.len() + usize::from(cfg.threshold));
        }
    }

    #[test]
    fn outsiders_never_count(cfg in arb_config(), a in arb_attesters()) {
        let insiders: BTreeSet<_> = a.iter().copied().filter(|w| w.0 < 30).collect();
        prop_assert_eq!(quorum_status(&a, &cfg), quorum_status(&insiders, &cfg));
    }

    /// Honest locks and deliveries in any order keep Σminted ≤ Σlocked,
    /// with equality once nothing is in flight.
    #[test]
    fn honest_bridging_conserves(ops in prop::collection::vec((any::<bool>(), 1u128..50, any::<prop::sample::Index>()), 1..40)) {
        let addr = |c: u32| Address::from_low_u64(0xb0 + u64::from(c));
        let mut apps: BTreeMap<u32, OApp> = BTreeMap::new();
        for (me, other) in [(1u32, 2u32), (2, 1)] {
            let state = BridgeState { available: 1_000, peers: [(eid(other), addr(other))].into(), ..BridgeState::default() };
            apps.insert(me, OApp::new(format!("b{me}"), AppLogic::Bridge(state)));
        }
        let mut in_flight: Vec<(u32, u32, Vec<u8>, u64)> = Vec::new();
        let mut nonce = 0;
        for (lock, amount, pick) in ops {
            if lock || in_flight.is_empty() {
                let (src, dst) = if amount % 2 == 0 { (1, 2) } else { (2, 1) };
                let bridge = apps.get_mut(&src).unwrap().bridge_mut().unwrap();
                if let Ok((_, payload)) = bridge.lock(eid(dst), amount, false) {
                    nonce += 1;
                    in_flight.push((src, dst, payload, nonce));
                }
            } else {
                let (src, dst, payload, n) = in_flight.remove(pick.index(in_flight.len()));
                let delivery = Delivery {
                    origin: Origin { src_eid: eid(src), sender: addr(src), nonce: n },
                    receiver: addr(dst),
                    guid: compute_guid(n, &Path::new(eid(src), addr(src), eid(dst), addr(dst))),
                    message: &payload,
                    extra_data: &[],
                };
                prop_assert!(apps.get_mut(&dst).unwrap().lz_receive(&delivery, &mut ComposeOutbox::default()).is_ok());
            }
            prop_assert!(bridge_conservation(apps.values().filter_map(OApp::bridge)));
        }
        let minted: u128 = apps.values().filter_map(OApp::bridge).map(|b| b.minted).sum();
        let locked: u128 = apps.values().filter_map(OApp::bridge).map(|b| b.locked).sum();
        let pending: u128 = in_flight.iter().map(|(_, _, p, _)| omnichain::oapps::decode_mint(p).unwrap().0).sum();
        prop_assert_eq!(minted + pending, locked);
    }
}

#[test]
fn guids_do_not_collide_over_1e5_inputs() {
    let paths = [
        Path::new(eid(1), Address::from_low_u64(1), eid(2), Address::from_low_u64(2)),
        Path::new(eid(2), Address::from_low_u64(2), eid(1), Address::from_low_u64(1)),
        Path::new(eid(1), Address::from_low_u64(1), eid(2), Address::from_low_u64(3)),
        Path::new(eid(7), Address([0xff; 32]), eid(7), Address([0xff; 32])),
    ];
    let mut seen = BTreeSet::new();
    for path in &paths {
        for nonce in 1..=25_000u64 {
            assert!(seen.insert(compute_guid(nonce, path)), "collision at nonce {nonce} on {path}");
        }
    }
    assert_eq!(seen.len(), 100_000);
}
