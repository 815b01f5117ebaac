use std::str::FromStr;

use super::*;
use crate::codec::Hash32;

#[test]
fn behavior_text_round_trips() {
    for b in [Behavior::Honest, Behavior::Crashed, Behavior::Equivocate, Behavior::Silent { from: 3, to: 9 }] {
        assert_eq!(Behavior::from_str(&b.to_string()), Ok(b));
    }
    for bad in ["sleepy", "silent:9-3", "silent:3", "silent:a-b"] {
        assert!(Behavior::from_str(bad).is_err(), "{bad}");
    }
}

#[test]
fn silence_window_is_inclusive() {
    let b = Behavior::Silent { from: 3, to: 5 };
    assert!(!b.is_silent_at(2));
    assert!(b.is_silent_at(3) && b.is_silent_at(5));
    assert!(!b.is_silent_at(6));
    assert!(!Behavior::Crashed.is_silent_at(4));
}

#[test]
fn wrong_hash_always_differs() {
    for h in [Hash32::default(), Hash32([0xff; 32]), Hash32([7; 32])] {
        assert_ne!(wrong_hash(h), h);
        assert_eq!(wrong_hash(wrong_hash(h)), h);
    }
}

#[test]
fn only_dvns_equivocate() {
    let mut exec = Worker::Executor(Executor::new(WorkerId(2), Behavior::Honest, Scope::Assigned));
    assert!(exec.set_behavior(Behavior::Equivocate).is_err());
    assert_eq!(exec.behavior(), Behavior::Honest);
    exec.set_behavior(Behavior::Crashed).unwrap();
    assert_eq!(exec.behavior(), Behavior::Crashed);

    let mut dvn = Worker::Dvn(Dvn::new(WorkerId(1), BTreeSet::new(), 1, Behavior::Honest));
    dvn.set_behavior(Behavior::Equivocate).unwrap();
    assert_eq!((dvn.id(), dvn.behavior()), (WorkerId(1), Behavior::Equivocate));

    let mut pc = Worker::PreCrime(PreCrime::new(WorkerId(3)));
    assert!(pc.set_behavior(Behavior::Equivocate).is_err());
}
