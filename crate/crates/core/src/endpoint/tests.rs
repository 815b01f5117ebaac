use std::collections::BTreeSet;

use super::*;
use crate::codec::{compute_guid, payload_hash, Address, EndpointId, PacketHeader, Path};
use crate::ids::WorkerId;

const V1: LibVersion = LibVersion::new(1, 1, 0);
const V12: LibVersion = LibVersion::new(1, 1, 2);
const V2: LibVersion = LibVersion::new(1, 2, 0);

struct Libs(BTreeSet<LibVersion>);

impl LibraryDirectory for Libs {
    fn is_registered(&self, lib: LibVersion) -> bool {
        self.0.contains(&lib)
    }
}

fn libs() -> Libs {
    Libs([V1, V12, V2].into_iter().collect())
}

fn eid(v: u32) -> EndpointId {
    EndpointId::new(v).unwrap()
}

fn sender() -> Address {
    Address::from_low_u64(0xa)
}

fn receiver() -> Address {
    Address::from_low_u64(0xb)
}

fn path() -> Path {
    Path::new(eid(1), sender(), eid(2), receiver())
}

fn stack(lib: LibVersion) -> SecurityStack {
    SecurityStack::new(lib, lib, WorkerId(9)).with_required([WorkerId(1)])
}

/// Destination endpoint (eid 2) with the receiver configured for `V1`.
fn dst() -> Endpoint {
    let mut ep = Endpoint::new(eid(2), Address::from_low_u64(0xad), 1024);
    ep.set_security_stack(receiver(), receiver(), eid(1), StackSetting::Explicit(stack(V1)), &libs()).unwrap();
    ep.apply_pending_config(&mut Vec::new());
    ep
}

fn msg(nonce: u64) -> Vec<u8> {
    format!("m{nonce}").into_bytes()
}

fn header(nonce: u64) -> PacketHeader {
    PacketHeader::new(1, nonce, path())
}

fn commit(ep: &mut Endpoint, nonce: u64) -> Result<(), EndpointError> {
    let h = header(nonce);
    ep.commit_verification(V1, &h, payload_hash(&h.guid, &msg(nonce)), 0, &mut Vec::new())
}

fn deliver(ep: &mut Endpoint, nonce: u64) -> Result<DeliveryReceipt, EndpointError> {
    let guid = compute_guid(nonce, &path());
    ep.lz_receive(&path(), nonce, guid, &msg(nonce), &[], &mut AcceptAll::default(), &mut Meter::unlimited(), &mut Vec::new())
}

fn hash_of(nonce: u64) -> Hash32 {
    payload_hash(&compute_guid(nonce, &path()), &msg(nonce))
}

#[test]
fn send_assigns_gapless_nonces() {
    let mut src = Endpoint::new(eid(1), Address::from_low_u64(0xad), 1024);
    src.set_security_stack(sender(), sender(), eid(2), StackSetting::Explicit(stack(V1)), &libs()).unwrap();
    src.apply_pending_config(&mut Vec::new());
    let nonces: Vec<u64> = (0..3).map(|_| src.send(sender(), path(), b"x").unwrap().packet.header.nonce).collect();
    assert_eq!(nonces, vec![1, 2, 3]);
    let out = src.send(sender(), path(), b"x").unwrap();
    assert_eq!(out.packet.header.guid, compute_guid(4, &path()));
    assert_eq!(out.packet.header.version, 1);
}

#[test]
fn send_without_stack_fails() {
    let mut src = Endpoint::new(eid(1), Address::from_low_u64(0xad), 1024);
    assert_eq!(src.send(sender(), path(), b"x"), Err(EndpointError::NoSendLibrary));
    assert_eq!(src.outbound_nonce(&path()), 0);
}

#[test]
fn send_rejects_oversized_payload_and_foreign_caller() {
    let mut src = Endpoint::new(eid(1), Address::from_low_u64(0xad), 4);
    src.set_security_stack(sender(), sender(), eid(2), StackSetting::Explicit(stack(V1)), &libs()).unwrap();
    src.apply_pending_config(&mut Vec::new());
    assert!(matches!(src.send(sender(), path(), b"12345"), Err(EndpointError::PayloadTooLarge { .. })));
    assert_eq!(src.send(receiver(), path(), b"1"), Err(EndpointError::NotSender));
}

#[test]
fn commit_allows_gaps() {
    let mut ep = dst();
    commit(&mut ep, 5).unwrap();
    assert_eq!(ep.verified_hash(&path(), 5), Some(hash_of(5)));
    assert_eq!(ep.inbound_nonce(&path(), u64::MAX), 0);
}

#[test]
fn commit_after_delivery_is_stale() {
    let mut ep = dst();
    for n in 1..=3 {
        commit(&mut ep, n).unwrap();
    }
    deliver(&mut ep, 3).unwrap();
    assert_eq!(commit(&mut ep, 3), Err(EndpointError::StalePacket { nonce: 3, lazy: 3 }));
}

#[test]
fn commit_from_wrong_library_is_rejected() {
    let mut ep = dst();
    let h = header(1);
    assert_eq!(
        ep.commit_verification(V2, &h, hash_of(1), 0, &mut Vec::new()),
        Err(EndpointError::NotReceiveLibrary(V2))
    );
}

#[test]
fn commit_without_receive_stack() {
    let mut ep = Endpoint::new(eid(2), Address::ZERO, 1024);
    assert_eq!(commit(&mut ep, 1), Err(EndpointError::NoReceiveStack));
}

#[test]
fn out_of_order_delivery_within_verified_prefix() {
    let mut ep = dst();
    commit(&mut ep, 1).unwrap();
    commit(&mut ep, 2).unwrap();
    assert_eq!(deliver(&mut ep, 2).unwrap().outcome, Outcome::Delivered);
    assert_eq!(ep.lazy_inbound_nonce(&path()), 2);
    assert_eq!(deliver(&mut ep, 1).unwrap().outcome, Outcome::Delivered);
    assert_eq!(ep.lazy_inbound_nonce(&path()), 2);
}

#[test]
fn delivery_with_gap_is_censorship() {
    let mut ep = dst();
    commit(&mut ep, 2).unwrap();
    assert_eq!(deliver(&mut ep, 2), Err(EndpointError::Censorship { nonce: 2, missing: 1 }));
}

#[test]
fn delivery_is_exactly_once() {
    let mut ep = dst();
    commit(&mut ep, 1).unwrap();
    deliver(&mut ep, 1).unwrap();
    assert_eq!(deliver(&mut ep, 1), Err(EndpointError::AlreadyDelivered(1)));
}

#[test]
fn delivery_with_wrong_message_is_hash_mismatch() {
    let mut ep = dst();
    commit(&mut ep, 1).unwrap();
    let guid = compute_guid(1, &path());
    let res = ep.lz_receive(&path(), 1, guid, b"other", &[], &mut AcceptAll::default(), &mut Meter::unlimited(), &mut Vec::new());
    assert_eq!(res, Err(EndpointError::HashMismatch));
}

struct Rejecting;

impl MessageReceiver for Rejecting {
    fn lz_receive(&mut self, _d: &Delivery<'_>, outbox: &mut ComposeOutbox) -> Result<(), AppAbort> {
        outbox.send_compose(Address::from_low_u64(1), 0, vec![1]);
        Err(AppAbort::new("nope"))
    }
}

#[test]
fn aborted_callback_leaves_endpoint_untouched() {
    let mut ep = dst();
    commit(&mut ep, 1).unwrap();
    let before = ep.clone();
    let guid = compute_guid(1, &path());
    let mut events = Vec::new();
    let receipt = ep
        .lz_receive(&path(), 1, guid, &msg(1), &[], &mut Rejecting, &mut Meter::unlimited(), &mut events)
        .unwrap();
    assert_eq!(receipt.outcome, Outcome::Reverted("nope".into()));
    assert_eq!(ep, before);
    assert!(events.is_empty());
}

#[test]
fn delivery_walk_charges_budget() {
    let mut ep = dst();
    for n in 2..=1000 {
        commit(&mut ep, n).unwrap();
    }
    assert_eq!(ep.inbound_nonce(&path(), u64::MAX), 0);
    commit(&mut ep, 1).unwrap();
    assert_eq!(ep.inbound_nonce(&path(), 1000), 1000);
    assert_eq!(ep.inbound_nonce(&path(), 500), 500);

    let guid = compute_guid(1000, &path());
    let mut meter = Meter::new(500);
    let res = ep.lz_receive(&path(), 1000, guid, &msg(1000), &[], &mut AcceptAll::default(), &mut meter, &mut Vec::new());
    assert_eq!(res, Err(EndpointError::OutOfBudget { limit: 500 }));

    // a stride of exactly 500 fits: 499 walk steps plus one callback step
    let guid = compute_guid(500, &path());
    let mut meter = Meter::new(500);
    ep.lz_receive(&path(), 500, guid, &msg(500), &[], &mut AcceptAll::default(), &mut meter, &mut Vec::new())
        .unwrap();
    assert_eq!(meter.used(), 500);
}

#[test]
fn skip_requires_inbound_plus_one() {
    let mut ep = dst();
    for n in 1..=3 {
        commit(&mut ep, n).unwrap();
    }
    let mut ev = Vec::new();
    assert_eq!(ep.skip(receiver(), &path(), 6, &mut Meter::unlimited(), &mut ev), Err(EndpointError::WrongNonce(6)));
    assert_eq!(ep.skip(receiver(), &path(), 3, &mut Meter::unlimited(), &mut ev), Err(EndpointError::WrongNonce(3)));
    assert_eq!(ep.skip(sender(), &path(), 4, &mut Meter::unlimited(), &mut ev), Err(EndpointError::NotReceiver));
    ep.skip(receiver(), &path(), 4, &mut Meter::unlimited(), &mut ev).unwrap();
    assert_eq!(ep.lazy_inbound_nonce(&path()), 4);
    // skipped nonces are never deliverable
    assert_eq!(deliver(&mut ep, 4), Err(EndpointError::AlreadyDelivered(4)));
    // lower verified nonces stay deliverable
    assert_eq!(deliver(&mut ep, 2).unwrap().outcome, Outcome::Delivered);
}

#[test]
fn clear_is_delivery_without_execution() {
    let mut ep = dst();
    commit(&mut ep, 1).unwrap();
    let guid = compute_guid(1, &path());
    let mut ev = Vec::new();
    let mut m = Meter::unlimited();
    assert_eq!(ep.clear(receiver(), &path(), 1, guid, b"wrong", &mut m, &mut ev), Err(EndpointError::HashMismatch));
    ep.clear(receiver(), &path(), 1, guid, &msg(1), &mut m, &mut ev).unwrap();
    assert_eq!(ep.lazy_inbound_nonce(&path()), 1);
    assert_eq!(ep.verified_hash(&path(), 1), None);

    commit(&mut ep, 3).unwrap();
    let guid3 = compute_guid(3, &path());
    assert_eq!(
        ep.clear(receiver(), &path(), 3, guid3, &msg(3), &mut m, &mut ev),
        Err(EndpointError::Censorship { nonce: 3, missing: 2 })
    );
}

#[test]
fn nilify_then_recommit_then_deliver() {
    let mut ep = dst();
    let bad = Hash32([7; 32]);
    ep.commit_verification(V1, &header(1), bad, 0, &mut Vec::new()).unwrap();
    let mut ev = Vec::new();
    ep.nilify(receiver(), &path(), 1, bad, &mut ev).unwrap();
    assert_eq!(deliver(&mut ep, 1), Err(EndpointError::Nilified(1)));
    assert_eq!(ep.inbound_nonce(&path(), u64::MAX), 0);
    commit(&mut ep, 1).unwrap();
    // stale expected hash after re-commit
    assert_eq!(ep.nilify(receiver(), &path(), 1, bad, &mut ev), Err(EndpointError::HashMismatch));
    assert_eq!(deliver(&mut ep, 1).unwrap().outcome, Outcome::Delivered);
}

#[test]
fn nilify_error_paths() {
    let mut ep = dst();
    let mut ev = Vec::new();
    assert_eq!(ep.nilify(receiver(), &path(), 1, hash_of(1), &mut ev), Err(EndpointError::NoEntry(1)));
    commit(&mut ep, 1).unwrap();
    assert_eq!(ep.nilify(sender(), &path(), 1, hash_of(1), &mut ev), Err(EndpointError::NotReceiver));
    deliver(&mut ep, 1).unwrap();
    assert!(matches!(ep.nilify(receiver(), &path(), 1, hash_of(1), &mut ev), Err(EndpointError::StalePacket { .. })));
}

#[test]
fn burn_garbage_below_lazy() {
    let mut ep = dst();
    let garbage = Hash32([9; 32]);
    commit(&mut ep, 1).unwrap();
    ep.commit_verification(V1, &header(2), garbage, 0, &mut Vec::new()).unwrap();
    commit(&mut ep, 3).unwrap();
    deliver(&mut ep, 3).unwrap();
    deliver(&mut ep, 1).unwrap();
    assert_eq!(ep.lazy_inbound_nonce(&path()), 3);
    let mut ev = Vec::new();
    assert_eq!(ep.burn(receiver(), &path(), 4, garbage, &mut ev), Err(EndpointError::NonceAhead { nonce: 4, lazy: 3 }));
    assert_eq!(ep.burn(receiver(), &path(), 2, hash_of(2), &mut ev), Err(EndpointError::HashMismatch));
    ep.burn(receiver(), &path(), 2, garbage, &mut ev).unwrap();
    assert_eq!(ep.verified_hash(&path(), 2), None);
    assert_eq!(ep.burn(receiver(), &path(), 2, garbage, &mut ev), Err(EndpointError::NoEntry(2)));
}

#[test]
fn burn_a_nilified_nonce() {
    let mut ep = dst();
    commit(&mut ep, 1).unwrap();
    commit(&mut ep, 2).unwrap();
    deliver(&mut ep, 2).unwrap();
    let mut ev = Vec::new();
    // nonce 1 is below lazy but still undelivered
    ep.nilify(receiver(), &path(), 1, hash_of(1), &mut ev).unwrap();
    assert_eq!(deliver(&mut ep, 1), Err(EndpointError::Nilified(1)));
    assert_eq!(ep.burn(receiver(), &path(), 1, hash_of(1), &mut ev), Err(EndpointError::HashMismatch));
    ep.burn(receiver(), &path(), 1, NIL_PAYLOAD_HASH, &mut ev).unwrap();
    assert_eq!(ep.verified_hash(&path(), 1), None);
    assert_eq!(deliver(&mut ep, 1), Err(EndpointError::AlreadyDelivered(1)));
}

#[test]
fn skip_removes_a_nil_slot_above_lazy() {
    let mut ep = dst();
    commit(&mut ep, 1).unwrap();
    let mut ev = Vec::new();
    ep.nilify(receiver(), &path(), 1, hash_of(1), &mut ev).unwrap();
    ep.skip(receiver(), &path(), 1, &mut Meter::unlimited(), &mut ev).unwrap();
    assert_eq!(ep.verified_hash(&path(), 1), None);
    assert_eq!(ep.lazy_inbound_nonce(&path()), 1);
}

#[test]
fn reconfiguration_never_touches_channels() {
    let mut ep = dst();
    commit(&mut ep, 1).unwrap();
    commit(&mut ep, 3).unwrap();
    let channel_before = ep.channel(&path()).cloned();
    let fresh = SecurityStack::new(V1, V1, WorkerId(9)).with_required([WorkerId(4)]);
    ep.set_security_stack(receiver(), receiver(), eid(1), StackSetting::Explicit(fresh.clone()), &libs()).unwrap();
    // not yet in force
    assert_eq!(ep.resolve_stack(receiver(), eid(1)), Some(&stack(V1)));
    ep.apply_pending_config(&mut Vec::new());
    assert_eq!(ep.resolve_stack(receiver(), eid(1)), Some(&fresh));
    assert_eq!(ep.channel(&path()).cloned(), channel_before);
}

#[test]
fn stack_errors() {
    let mut ep = dst();
    let bad = SecurityStack::new(V1, V1, WorkerId(9)).with_optional([WorkerId(1)], 2);
    assert!(matches!(
        ep.set_security_stack(receiver(), receiver(), eid(1), StackSetting::Explicit(bad), &libs()),
        Err(EndpointError::InvalidStack(_))
    ));
    assert_eq!(
        ep.set_security_stack(sender(), receiver(), eid(1), StackSetting::Explicit(stack(V1)), &libs()),
        Err(EndpointError::NotOwner)
    );
    let unknown = LibVersion::new(9, 9, 9);
    assert_eq!(
        ep.set_security_stack(receiver(), receiver(), eid(1), StackSetting::Explicit(stack(unknown)), &libs()),
        Err(EndpointError::UnknownLibrary(unknown))
    );
}

#[test]
fn default_opt_in_follows_admin_updates() {
    let admin = Address::from_low_u64(0xad);
    let mut ep = Endpoint::new(eid(2), admin, 1024);
    ep.set_default_stack(admin, eid(1), stack(V1), &libs()).unwrap();
    ep.set_security_stack(receiver(), receiver(), eid(1), StackSetting::DefaultOptIn, &libs()).unwrap();
    ep.apply_pending_config(&mut Vec::new());
    assert_eq!(ep.resolve_stack(receiver(), eid(1)).unwrap().receive_library, V1);
    ep.set_default_stack(admin, eid(1), stack(V2), &libs()).unwrap();
    ep.apply_pending_config(&mut Vec::new());
    assert_eq!(ep.resolve_stack(receiver(), eid(1)).unwrap().receive_library, V2);
    assert_eq!(ep.set_default_stack(receiver(), eid(1), stack(V2), &libs()), Err(EndpointError::NotOwner));
}

fn migrated(grace: u64, at: u64) -> Endpoint {
    let mut ep = Endpoint::new(eid(2), Address::ZERO, 1024);
    ep.set_security_stack(receiver(), receiver(), eid(1), StackSetting::Explicit(stack(V12)), &libs()).unwrap();
    ep.apply_pending_config(&mut Vec::new());
    ep.set_receive_library_with_grace(receiver(), receiver(), eid(1), V2, grace, at, &libs()).unwrap();
    ep.apply_pending_config(&mut Vec::new());
    ep
}

#[test]
fn grace_period_keeps_old_library_valid() {
    let mut ep = migrated(10, 100);
    let h = header(1);
    assert!(ep.commit_verification(V12, &h, hash_of(1), 105, &mut Vec::new()).is_ok());
    let h2 = header(2);
    assert_eq!(
        ep.commit_verification(V12, &h2, hash_of(2), 111, &mut Vec::new()),
        Err(EndpointError::NotReceiveLibrary(V12))
    );
    // owner points back at 1.2, the in-flight packet commits
    ep.set_receive_library_with_grace(receiver(), receiver(), eid(1), V12, 10, 111, &libs()).unwrap();
    ep.apply_pending_config(&mut Vec::new());
    assert!(ep.commit_verification(V12, &h2, hash_of(2), 112, &mut Vec::new()).is_ok());
}

#[test]
fn zero_grace_rejects_old_library_immediately() {
    let mut ep = migrated(0, 100);
    // configuration lands at the next block, already past the grace end
    assert_eq!(
        ep.commit_verification(V12, &header(1), hash_of(1), 101, &mut Vec::new()),
        Err(EndpointError::NotReceiveLibrary(V12))
    );
}

struct Composer {
    fail: bool,
    calls: u32,
}

impl ComposeReceiver for Composer {
    fn lz_compose(&mut self, _call: &ComposeCall<'_>, _outbox: &mut ComposeOutbox) -> Result<(), AppAbort> {
        self.calls += 1;
        if self.fail {
            Err(AppAbort::new("reserves"))
        } else {
            Ok(())
        }
    }
}

#[test]
fn compose_is_exactly_once_and_retryable() {
    let mut ep = dst();
    let guid = compute_guid(1, &path());
    let to = Address::from_low_u64(0xc);
    let mut ev = Vec::new();
    ep.send_compose(receiver(), to, guid, 0, b"swap".to_vec(), &mut ev).unwrap();
    assert_eq!(ep.send_compose(receiver(), to, guid, 0, b"swap".to_vec(), &mut ev), Err(EndpointError::DuplicateCompose));
    ep.send_compose(receiver(), to, guid, 1, b"swap".to_vec(), &mut ev).unwrap();

    let key = ComposeKey { from: receiver(), to, guid, index: 0 };
    let mut m = Meter::unlimited();
    assert_eq!(ep.lz_compose(key, b"wrong", &mut Composer { fail: false, calls: 0 }, &mut m, &mut ev), Err(EndpointError::HashMismatch));
    let r = ep.lz_compose(key, b"swap", &mut Composer { fail: true, calls: 0 }, &mut m, &mut ev).unwrap();
    assert_eq!(r.outcome, Outcome::Reverted("reserves".into()));
    assert_eq!(ep.compose_entry(&key).unwrap().status, ComposeStatus::Stored);
    let r = ep.lz_compose(key, b"swap", &mut Composer { fail: false, calls: 0 }, &mut m, &mut ev).unwrap();
    assert_eq!(r.outcome, Outcome::Delivered);
    assert_eq!(ep.lz_compose(key, b"swap", &mut Composer { fail: false, calls: 0 }, &mut m, &mut ev), Err(EndpointError::AlreadyExecuted));
    let missing = ComposeKey { index: 7, ..key };
    assert_eq!(ep.lz_compose(missing, b"swap", &mut Composer { fail: false, calls: 0 }, &mut m, &mut ev), Err(EndpointError::NoSuchCompose));
}

struct ComposingReceiver;

impl MessageReceiver for ComposingReceiver {
    fn lz_receive(&mut self, _d: &Delivery<'_>, outbox: &mut ComposeOutbox) -> Result<(), AppAbort> {
        outbox.send_compose(Address::from_low_u64(0xc), 0, b"swap".to_vec());
        Ok(())
    }
}

#[test]
fn delivery_stores_compose_entries() {
    let mut ep = dst();
    commit(&mut ep, 1).unwrap();
    let guid = compute_guid(1, &path());
    let mut ev = Vec::new();
    ep.lz_receive(&path(), 1, guid, &msg(1), &[], &mut ComposingReceiver, &mut Meter::unlimited(), &mut ev).unwrap();
    let key = ComposeKey { from: receiver(), to: Address::from_low_u64(0xc), guid, index: 0 };
    assert_eq!(ep.compose_entry(&key).unwrap().status, ComposeStatus::Stored);
    assert!(ev.iter().any(|e| matches!(e, LedgerEvent::ComposeSent { .. })));
}
