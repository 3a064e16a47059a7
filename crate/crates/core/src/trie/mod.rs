//! Merkle-Patricia trie over a content-addressed node store.
//!
//! Nodes whose encoding is 32 bytes or longer are stored under their
//! keccak-256 digest; shorter nodes are embedded in their parent. The root is
//! always stored by digest. Old versions are never removed from the store,
//! so any earlier root stays readable.

pub mod nibbles;
mod node;
mod store;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::{keccak256, rlp};
pub use node::{Node, NodeRef};
pub use store::{MemoryBackend, NodeBackend, NodeKey, NodeStore};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TrieError {
    #[error("store is missing node {}", hex32(.0))]
    MissingNode(NodeKey),
    #[error("malformed node: {0}")]
    MalformedNode(String),
    #[error("rlp: {0}")]
    Rlp(#[from] rlp::RlpError),
}

fn hex32(bytes: &[u8; 32]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RootHash(pub [u8; 32]);

impl RootHash {
    /// Digest of the empty-string encoding, the root of an empty trie.
    pub fn empty() -> Self {
        RootHash(keccak256(&[0x80]))
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex32(&self.0)
    }
}

impl fmt::Debug for RootHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RootHash({})", self.to_hex())
    }
}

impl fmt::Display for RootHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", self.to_hex())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct TrieConfig {
    /// Hash logical keys with keccak-256 before path conversion.
    pub secure: bool,
    /// LRU capacity in decoded nodes; 0 disables the cache.
    pub cache_capacity: usize,
}

impl Default for TrieConfig {
    fn default() -> Self {
        Self { secure: true, cache_capacity: 0 }
    }
}

/// Result of a lookup together with the number of store reads it took.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lookup {
    pub value: Option<Vec<u8>>,
    pub reads: usize,
}

/// Single-writer, multi-reader: `get` takes `&self`, mutation `&mut self`.
pub struct StateTrie<B: NodeBackend = MemoryBackend> {
    store: NodeStore<B>,
    root: Option<NodeKey>,
    secure: bool,
    len: usize,
}

impl<B: NodeBackend + Clone> Clone for StateTrie<B> {
    fn clone(&self) -> Self {
        Self {
            store: self.store.clone(),
            root: self.root,
            secure: self.secure,
            len: self.len,
        }
    }
}

impl Default for StateTrie<MemoryBackend> {
    fn default() -> Self {
        Self::new(TrieConfig::default())
    }
}

impl StateTrie<MemoryBackend> {
    pub fn new(config: TrieConfig) -> Self {
        Self::with_backend(MemoryBackend::default(), config)
    }

    /// Plain (unhashed) keys, no cache.
    pub fn plain() -> Self {
        Self::new(TrieConfig { secure: false, cache_capacity: 0 })
    }
}

impl<B: NodeBackend> StateTrie<B> {
    pub fn with_backend(backend: B, config: TrieConfig) -> Self {
        Self {
            store: NodeStore::new(backend, config.cache_capacity),
            root: None,
            secure: config.secure,
            len: 0,
        }
    }

    /// Opens an existing state inside `store`. Walks the trie once to count keys.
    pub fn open(store: NodeStore<B>, root: RootHash, secure: bool) -> Result<Self, TrieError> {
        let root = (root != RootHash::empty()).then_some(root.0);
        let mut trie = Self { store, root, secure, len: 0 };
        trie.len = trie.count_keys()?;
        Ok(trie)
    }

    pub fn store(&self) -> &NodeStore<B> {
        &self.store
    }

    pub fn into_store(self) -> NodeStore<B> {
        self.store
    }

    pub fn is_secure(&self) -> bool {
        self.secure
    }

    /// Number of keys currently mapped.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn root_hash(&self) -> RootHash {
        self.root.map_or_else(RootHash::empty, RootHash)
    }

    /// Points the trie at an earlier root still held by the archive store.
    /// `len` is the key count at that root and is trusted.
    pub fn rewind(&mut self, root: RootHash, len: usize) -> Result<(), TrieError> {
        if root == RootHash::empty() {
            self.root = None;
        } else {
            if !self.store.contains(&root.0) {
                return Err(TrieError::MissingNode(root.0));
            }
            self.root = Some(root.0);
        }
        self.len = len;
        Ok(())
    }

    fn path_for(&self, key: &[u8]) -> Vec<u8> {
        if self.secure {
            nibbles::from_bytes(&keccak256(key))
        } else {
            nibbles::from_bytes(key)
        }
    }

    pub fn get(&self, key: &[u8]) -> Result<Option<Vec<u8>>, TrieError> {
        Ok(self.lookup(key)?.value)
    }

    pub fn lookup(&self, key: &[u8]) -> Result<Lookup, TrieError> {
        let path = self.path_for(key);
        let mut reads = 0;
        let Some(root) = self.root else {
            return Ok(Lookup { value: None, reads });
        };
        let mut node = self.load(&root, &mut reads)?;
        let mut rest = path.as_slice();
        loop {
            let next = match node.as_ref() {
                Node::Empty => None,
                Node::Leaf { path, value } => {
                    let hit = path.as_slice() == rest;
                    return Ok(Lookup { value: hit.then(|| value.clone()), reads });
                }
                Node::Extension { path, child } => {
                    if rest.starts_with(path) {
                        rest = &rest[path.len()..];
                        Some(child.clone())
                    } else {
                        None
                    }
                }
                Node::Branch { children, value } => {
                    if rest.is_empty() {
                        return Ok(Lookup { value: value.clone(), reads });
                    }
                    let c = children[rest[0] as usize].clone();
                    rest = &rest[1..];
                    Some(c)
                }
            };
            match next {
                None | Some(NodeRef::Empty) => return Ok(Lookup { value: None, reads }),
                Some(r) => node = self.resolve(&r, &mut reads)?,
            }
        }
    }

    /// Maps `key` to `value`; an empty `value` deletes the key. Returns the
    /// previous value.
    pub fn insert(&mut self, key: &[u8], value: &[u8]) -> Result<Option<Vec<u8>>, TrieError> {
        if value.is_empty() {
            return self.delete(key);
        }
        let path = self.path_for(key);
        let root = self.root_node()?;
        let (node, old) = self.insert_at(root, &path, value.to_vec())?;
        self.set_root(&node);
        if old.is_none() {
            self.len += 1;
        }
        Ok(old)
    }

    pub fn delete(&mut self, key: &[u8]) -> Result<Option<Vec<u8>>, TrieError> {
        let path = self.path_for(key);
        let root = self.root_node()?;
        let (node, old) = self.delete_at(root, &path)?;
        if old.is_some() {
            self.set_root(&node);
            self.len -= 1;
        }
        Ok(old)
    }

    /// Every `(path, value)` pair, in path order. Paths are nibbles of the
    /// stored (possibly hashed) key.
    pub fn entries(&self) -> Result<Vec<(Vec<u8>, Vec<u8>)>, TrieError> {
        let mut out = Vec::new();
        if let Some(root) = self.root {
            let mut reads = 0;
            let node = self.load(&root, &mut reads)?;
            self.collect(&node, Vec::new(), &mut out)?;
        }
        Ok(out)
    }

    fn count_keys(&self) -> Result<usize, TrieError> {
        Ok(self.entries()?.len())
    }

    fn collect(
        &self,
        node: &Node,
        prefix: Vec<u8>,
        out: &mut Vec<(Vec<u8>, Vec<u8>)>,
    ) -> Result<(), TrieError> {
        let mut reads = 0;
        match node {
            Node::Empty => {}
            Node::Leaf { path, value } => {
                let mut p = prefix;
                p.extend_from_slice(path);
                out.push((p, value.clone()));
            }
            Node::Extension { path, child } => {
                let mut p = prefix;
                p.extend_from_slice(path);
                let c = self.resolve(child, &mut reads)?;
                self.collect(&c, p, out)?;
            }
            Node::Branch { children, value } => {
                if let Some(v) = value {
                    out.push((prefix.clone(), v.clone()));
                }
                for (i, c) in children.iter().enumerate() {
                    if c.is_empty() {
                        continue;
                    }
                    let mut p = prefix.clone();
                    p.push(i as u8);
                    let n = self.resolve(c, &mut reads)?;
                    self.collect(&n, p, out)?;
                }
            }
        }
        Ok(())
    }

    fn load(&self, key: &NodeKey, reads: &mut usize) -> Result<Arc<Node>, TrieError> {
        *reads += 1;
        self.store.get_node(key)
    }

    fn resolve(&self, r: &NodeRef, reads: &mut usize) -> Result<Arc<Node>, TrieError> {
        match r {
            NodeRef::Empty => Ok(Arc::new(Node::Empty)),
            NodeRef::Hash(h) => self.load(h, reads),
            NodeRef::Inline(enc) => Ok(Arc::new(Node::decode(enc)?)),
        }
    }

    fn resolve_owned(&self, r: &NodeRef) -> Result<Node, TrieError> {
        let mut reads = 0;
        Ok(Arc::unwrap_or_clone(self.resolve(r, &mut reads)?))
    }

    fn root_node(&self) -> Result<Node, TrieError> {
        match self.root {
            None => Ok(Node::Empty),
            Some(h) => self.resolve_owned(&NodeRef::Hash(h)),
        }
    }

    fn set_root(&mut self, node: &Node) {
        if matches!(node, Node::Empty) {
            self.root = None;
            return;
        }
        let enc = node.encode();
        let h = keccak256(&enc);
        self.store.put(h, enc);
        self.root = Some(h);
    }

    /// Encodes `node` and returns the reference a parent should hold.
    fn commit(&mut self, node: &Node) -> NodeRef {
        if matches!(node, Node::Empty) {
            return NodeRef::Empty;
        }
        let enc = node.encode();
        if enc.len() < 32 {
            NodeRef::Inline(enc)
        } else {
            let h = keccak256(&enc);
            self.store.put(h, enc);
            NodeRef::Hash(h)
        }
    }

    fn insert_at(
        &mut self,
        node: Node,
        path: &[u8],
        value: Vec<u8>,
    ) -> Result<(Node, Option<Vec<u8>>), TrieError> {
        match node {
            Node::Empty => Ok((Node::Leaf { path: path.to_vec(), value }, None)),
            Node::Leaf { path: lp, value: lv } => {
                if lp == path {
                    return Ok((Node::Leaf { path: lp, value }, Some(lv)));
                }
                let cp = nibbles::common_prefix(&lp, path);
                let mut branch = Node::empty_branch();
                self.branch_put(&mut branch, &lp[cp..], lv);
                self.branch_put(&mut branch, &path[cp..], value);
                Ok((self.wrap_prefix(&path[..cp], branch), None))
            }
            Node::Extension { path: ep, child } => {
                let cp = nibbles::common_prefix(&ep, path);
                if cp == ep.len() {
                    let c = self.resolve_owned(&child)?;
                    let (nc, old) = self.insert_at(c, &path[cp..], value)?;
                    let child = self.commit(&nc);
                    return Ok((Node::Extension { path: ep, child }, old));
                }
                let mut branch = Node::empty_branch();
                let below = if ep.len() - cp > 1 {
                    let ext = Node::Extension { path: ep[cp + 1..].to_vec(), child };
                    self.commit(&ext)
                } else {
                    child
                };
                if let Node::Branch { children, .. } = &mut branch {
                    children[ep[cp] as usize] = below;
                }
                self.branch_put(&mut branch, &path[cp..], value);
                Ok((self.wrap_prefix(&path[..cp], branch), None))
            }
            Node::Branch { mut children, value: bv } => {
                if path.is_empty() {
                    return Ok((Node::Branch { children, value: Some(value) }, bv));
                }
                let idx = path[0] as usize;
                let c = self.resolve_owned(&children[idx])?;
                let (nc, old) = self.insert_at(c, &path[1..], value)?;
                children[idx] = self.commit(&nc);
                Ok((Node::Branch { children, value: bv }, old))
            }
        }
    }

    /// Places `value` at the relative `path` below a fresh branch.
    fn branch_put(&mut self, branch: &mut Node, path: &[u8], value: Vec<u8>) {
        let leaf_ref = (!path.is_empty()).then(|| {
            self.commit(&Node::Leaf { path: path[1..].to_vec(), value: value.clone() })
        });
        if let Node::Branch { children, value: bv } = branch {
            match leaf_ref {
                None => *bv = Some(value),
                Some(r) => children[path[0] as usize] = r,
            }
        }
    }

    fn wrap_prefix(&mut self, prefix: &[u8], branch: Node) -> Node {
        if prefix.is_empty() {
            branch
        } else {
            let child = self.commit(&branch);
            Node::Extension { path: prefix.to_vec(), child }
        }
    }

    fn delete_at(&mut self, node: Node, path: &[u8]) -> Result<(Node, Option<Vec<u8>>), TrieError> {
        match node {
            Node::Empty => Ok((Node::Empty, None)),
            Node::Leaf { path: lp, value } => {
                if lp == path {
                    Ok((Node::Empty, Some(value)))
                } else {
                    Ok((Node::Leaf { path: lp, value }, None))
                }
            }
            Node::Extension { path: ep, child } => {
                if !path.starts_with(&ep) {
                    return Ok((Node::Extension { path: ep, child }, None));
                }
                let c = self.resolve_owned(&child)?;
                let (nc, old) = self.delete_at(c, &path[ep.len()..])?;
                if old.is_none() {
                    return Ok((Node::Extension { path: ep, child }, None));
                }
                Ok((self.join_prefix(ep, nc), old))
            }
            Node::Branch { mut children, value } => {
                let old;
                let value = if path.is_empty() {
                    if value.is_none() {
                        return Ok((Node::Branch { children, value }, None));
                    }
                    old = value;
                    None
                } else {
                    let idx = path[0] as usize;
                    if children[idx].is_empty() {
                        return Ok((Node::Branch { children, value }, None));
                    }
                    let c = self.resolve_owned(&children[idx])?;
                    let (nc, removed) = self.delete_at(c, &path[1..])?;
                    if removed.is_none() {
                        return Ok((Node::Branch { children, value }, None));
                    }
                    old = removed;
                    children[idx] = self.commit(&nc);
                    value
                };
                Ok((self.collapse_branch(children, value)?, old))
            }
        }
    }

    /// Prepends `prefix` to `node`, merging adjacent path segments.
    fn join_prefix(&mut self, mut prefix: Vec<u8>, node: Node) -> Node {
        match node {
            Node::Empty => Node::Empty,
            Node::Leaf { path, value } => {
                prefix.extend_from_slice(&path);
                Node::Leaf { path: prefix, value }
            }
            Node::Extension { path, child } => {
                prefix.extend_from_slice(&path);
                Node::Extension { path: prefix, child }
            }
            branch @ Node::Branch { .. } => {
                let child = self.commit(&branch);
                Node::Extension { path: prefix, child }
            }
        }
    }

    fn collapse_branch(
        &mut self,
        children: Box<[NodeRef; 16]>,
        value: Option<Vec<u8>>,
    ) -> Result<Node, TrieError> {
        let mut live = children.iter().enumerate().filter(|(_, c)| !c.is_empty());
        let first = live.next();
        let more = live.next().is_some();
        match (first, more, value) {
            (None, _, None) => Ok(Node::Empty),
            (None, _, Some(v)) => Ok(Node::Leaf { path: Vec::new(), value: v }),
            (Some((i, c)), false, None) => {
                let c = self.resolve_owned(&c.clone())?;
                Ok(self.join_prefix(vec![i as u8], c))
            }
            (_, _, value) => Ok(Node::Branch { children, value }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_trie_root() {
        assert_eq!(
            StateTrie::plain().root_hash().to_hex(),
            "56e81f171bcc55a6ff8345e692c0f86e5b48e01b996cadc001622fb5e363b421"
        );
    }

    #[test]
    fn canonical_three_key_root() {
        let mut t = StateTrie::plain();
        t.insert(b"doe", b"reindeer").unwrap();
        t.insert(b"dog", b"puppy").unwrap();
        t.insert(b"dogglesworth", b"cat").unwrap();
        assert_eq!(
            t.root_hash().to_hex(),
            "8aad789dff2f538bca5d8ea56e8abe10f4c7ba3a5dea95fea4cd6e7c3a1168d3"
        );
    }

    #[test]
    fn read_your_write_and_absent() {
        let mut t = StateTrie::default();
        assert_eq!(t.get(b"k").unwrap(), None);
        t.insert(b"k", b"v").unwrap();
        assert_eq!(t.get(b"k").unwrap(), Some(b"v".to_vec()));
        assert_eq!(t.get(b"other").unwrap(), None);
    }

    #[test]
    fn order_independent_pair() {
        let mut a = StateTrie::plain();
        a.insert(b"a", b"1").unwrap();
        a.insert(b"b", b"2").unwrap();
        let mut b = StateTrie::plain();
        b.insert(b"b", b"2").unwrap();
        b.insert(b"a", b"1").unwrap();
        assert_eq!(a.root_hash(), b.root_hash());
    }

    #[test]
    fn empty_value_deletes() {
        let mut t = StateTrie::plain();
        t.insert(b"x", b"1").unwrap();
        let before = t.root_hash();
        t.insert(b"y", b"2").unwrap();
        assert_eq!(t.insert(b"y", b"").unwrap(), Some(b"2".to_vec()));
        assert_eq!(t.root_hash(), before);
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn changing_a_value_changes_root() {
        let mut t = StateTrie::default();
        t.insert(b"k", b"v1").unwrap();
        let r1 = t.root_hash();
        t.insert(b"k", b"v2").unwrap();
        assert_ne!(t.root_hash(), r1);
    }

    #[test]
    fn missing_node_surfaces_as_error() {
        let mut t = StateTrie::plain();
        for i in 0u8..40 {
            t.insert(&[i, i], &[i; 40]).unwrap();
        }
        let root = t.root_hash();
        // Keep only the root record.
        let mut store = NodeStore::<MemoryBackend>::default();
        store.put(root.0, t.store().raw(&root.0).unwrap().to_vec());
        let broken = StateTrie { store, root: Some(root.0), secure: false, len: 40 };
        assert!(matches!(broken.get(&[5, 5]), Err(TrieError::MissingNode(_))));
    }

    #[test]
    fn lookup_depth_bounded_by_path_length() {
        let mut t = StateTrie::default();
        for i in 0u32..2000 {
            t.insert(&i.to_be_bytes(), b"v").unwrap();
        }
        for i in 0u32..2000 {
            let l = t.lookup(&i.to_be_bytes()).unwrap();
            assert!(l.value.is_some());
            assert!(l.reads <= 64, "reads {}", l.reads);
        }
    }
}
