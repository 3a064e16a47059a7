use std::collections::BTreeMap;

use gaslab_core::trie::{MemoryBackend, NodeStore, RootHash, StateTrie, TrieConfig};
use proptest::prelude::*;

// Roots computed by tests/oracles/mpt_oracle.py, an independent batch
// builder, over tests/fixtures/trie16.json.
const PLAIN_ROOT: &str = "c18c1521902d6701a9c17924ca7f3616c3b930afeb02d6ca031ceaa4dcf007b7";
const SECURE_ROOT: &str = "dc89f1af5ef893f4dc492b97161f38e58bc99a96f6f13146f2bfd8058a1553f1";

fn fixture_pairs() -> Vec<(String, String)> {
    let text = include_str!("fixtures/trie16.json");
    let v: serde_json::Value = serde_json::from_str(text).unwrap();
    v["pairs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| (p[0].as_str().unwrap().to_string(), p[1].as_str().unwrap().to_string()))
        .collect()
}

#[test]
fn sixteen_pair_fixture_matches_reference_roots() {
    let pairs = fixture_pairs();
    assert_eq!(pairs.len(), 16);
    for (secure, expected) in [(false, PLAIN_ROOT), (true, SECURE_ROOT)] {
        let mut t = StateTrie::new(TrieConfig { secure, cache_capacity: 0 });
        for (k, v) in &pairs {
            t.insert(k.as_bytes(), v.as_bytes()).unwrap();
        }
        assert_eq!(t.root_hash().to_hex(), expected, "secure={secure}");
        assert_eq!(t.len(), 16);
    }
}

#[test]
fn reopened_store_serves_old_and_new_roots() {
    let mut t = StateTrie::plain();
    for (k, v) in fixture_pairs() {
        t.insert(k.as_bytes(), v.as_bytes()).unwrap();
    }
    let old = t.root_hash();
    t.insert(b"late", b"arrival").unwrap();
    let mut bytes = Vec::new();
    t.store().dump(&mut bytes).unwrap();
    let store = NodeStore::load(bytes.as_slice(), MemoryBackend::default(), 0).unwrap();
    let back = StateTrie::open(store, old, false).unwrap();
    assert_eq!(back.len(), 16);
    assert_eq!(back.get(b"late").unwrap(), None);
    assert_eq!(back.get(b"doge").unwrap().as_deref(), Some(&b"coin"[..]));
}

#[test]
fn cache_does_not_change_results() {
    let mut a = StateTrie::new(TrieConfig { secure: true, cache_capacity: 0 });
    let mut b = StateTrie::new(TrieConfig { secure: true, cache_capacity: 8 });
    for i in 0u32..300 {
        a.insert(&i.to_be_bytes(), &[1, 2, 3]).unwrap();
        b.insert(&i.to_be_bytes(), &[1, 2, 3]).unwrap();
    }
    assert_eq!(a.root_hash(), b.root_hash());
    for i in 0u32..300 {
        assert_eq!(b.get(&i.to_be_bytes()).unwrap(), Some(vec![1, 2, 3]));
    }
    assert!(b.store().read_stats().0 > 0);
}

#[derive(Clone, Debug)]
enum Op {
    Insert(Vec<u8>, Vec<u8>),
    Delete(Vec<u8>),
}

fn op() -> impl Strategy<Value = Op> {
    let key = prop::collection::vec(0u8..4, 0..5);
    prop_oneof![
        3 => (key.clone(), prop::collection::vec(any::<u8>(), 1..40)).prop_map(|(k, v)| Op::Insert(k, v)),
        1 => key.prop_map(Op::Delete),
    ]
}

fn apply(ops: &[Op], secure: bool) -> (StateTrie, BTreeMap<Vec<u8>, Vec<u8>>) {
    let mut t = StateTrie::new(TrieConfig { secure, cache_capacity: 0 });
    let mut m = BTreeMap::new();
    for op in ops {
        match op {
            Op::Insert(k, v) => {
                assert_eq!(t.insert(k, v).unwrap(), m.insert(k.clone(), v.clone()));
            }
            Op::Delete(k) => {
                assert_eq!(t.delete(k).unwrap(), m.remove(k));
            }
        }
        assert_eq!(t.len(), m.len());
    }
    (t, m)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn read_your_writes_and_order_independence(ops in prop::collection::vec(op(), 0..60), secure in any::<bool>()) {
        let (t, m) = apply(&ops, secure);
        for (k, v) in &m {
            let got = t.get(k).unwrap();
            prop_assert_eq!(got.as_ref(), Some(v));
        }
        // Same final map inserted in a different order gives the same root.
        let mut fresh = StateTrie::new(TrieConfig { secure, cache_capacity: 0 });
        for (k, v) in m.iter().rev() {
            fresh.insert(k, v).unwrap();
        }
        prop_assert_eq!(fresh.root_hash(), t.root_hash());
        if m.is_empty() {
            prop_assert_eq!(t.root_hash(), RootHash::empty());
        }
    }

    #[test]
    fn lookup_depth_is_bounded(keys in prop::collection::btree_set(any::<u64>(), 1..200)) {
        let mut t = StateTrie::default();
        for k in &keys {
            t.insert(&k.to_be_bytes(), b"v").unwrap();
        }
        for k in &keys {
            let l = t.lookup(&k.to_be_bytes()).unwrap();
            prop_assert!(l.value.is_some());
            prop_assert!(l.reads <= 65);
        }
    }
}
