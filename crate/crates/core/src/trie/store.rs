use std::collections::BTreeMap;
use std::io::{self, Read, Write};
use std::num::NonZeroUsize;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use lru::LruCache;

use super::node::Node;
use super::TrieError;

pub type NodeKey = [u8; 32];

/// Key-value backend holding node encodings by digest.
pub trait NodeBackend {
    fn get(&self, key: &NodeKey) -> Option<&[u8]>;
    /// Inserting a key that is already present must leave the store unchanged.
    fn put(&mut self, key: NodeKey, encoding: Vec<u8>);
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn for_each(&self, f: &mut dyn FnMut(&NodeKey, &[u8]));
}

/// Ordered in-memory backend.
#[derive(Clone, Debug, Default)]
pub struct MemoryBackend {
    nodes: BTreeMap<NodeKey, Vec<u8>>,
}

impl NodeBackend for MemoryBackend {
    fn get(&self, key: &NodeKey) -> Option<&[u8]> {
        self.nodes.get(key).map(Vec::as_slice)
    }

    fn put(&mut self, key: NodeKey, encoding: Vec<u8>) {
        self.nodes.entry(key).or_insert(encoding);
    }

    fn len(&self) -> usize {
        self.nodes.len()
    }

    fn for_each(&self, f: &mut dyn FnMut(&NodeKey, &[u8])) {
        for (k, v) in &self.nodes {
            f(k, v);
        }
    }
}

/// Backend plus an optional bounded LRU cache of decoded nodes.
///
/// Reads take `&self`; the cache sits behind a mutex so concurrent readers
/// are allowed. Writes take `&mut self`.
pub struct NodeStore<B = MemoryBackend> {
    backend: B,
    cache: Option<Mutex<LruCache<NodeKey, Arc<Node>>>>,
    cache_hits: AtomicU64,
    backend_reads: AtomicU64,
}

impl<B: NodeBackend + Default> Default for NodeStore<B> {
    fn default() -> Self {
        Self::new(B::default(), 0)
    }
}

impl<B: NodeBackend + Clone> Clone for NodeStore<B> {
    fn clone(&self) -> Self {
        Self::new(self.backend.clone(), self.cache_capacity())
    }
}

impl<B: NodeBackend> NodeStore<B> {
    /// `cache_capacity` of 0 disables the cache.
    pub fn new(backend: B, cache_capacity: usize) -> Self {
        Self {
            backend,
            cache: NonZeroUsize::new(cache_capacity).map(|c| Mutex::new(LruCache::new(c))),
            cache_hits: AtomicU64::new(0),
            backend_reads: AtomicU64::new(0),
        }
    }

    pub fn cache_capacity(&self) -> usize {
        self.cache
            .as_ref()
            .map_or(0, |c| c.lock().expect("cache lock").cap().get())
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }

    pub fn len(&self) -> usize {
        self.backend.len()
    }

    pub fn is_empty(&self) -> bool {
        self.backend.is_empty()
    }

    pub fn contains(&self, key: &NodeKey) -> bool {
        self.backend.get(key).is_some()
    }

    pub fn put(&mut self, key: NodeKey, encoding: Vec<u8>) {
        self.backend.put(key, encoding);
    }

    pub fn raw(&self, key: &NodeKey) -> Option<&[u8]> {
        self.backend.get(key)
    }

    pub fn get_node(&self, key: &NodeKey) -> Result<Arc<Node>, TrieError> {
        if let Some(cache) = &self.cache {
            if let Some(n) = cache.lock().expect("cache lock").get(key) {
                self.cache_hits.fetch_add(1, Ordering::Relaxed);
                return Ok(Arc::clone(n));
            }
        }
        self.backend_reads.fetch_add(1, Ordering::Relaxed);
        let raw = self.backend.get(key).ok_or(TrieError::MissingNode(*key))?;
        let node = Arc::new(Node::decode(raw)?);
        if let Some(cache) = &self.cache {
            cache.lock().expect("cache lock").put(*key, Arc::clone(&node));
        }
        Ok(node)
    }

    /// `(cache hits, backend reads)` since construction.
    pub fn read_stats(&self) -> (u64, u64) {
        (
            self.cache_hits.load(Ordering::Relaxed),
            self.backend_reads.load(Ordering::Relaxed),
        )
    }

    /// Writes every record as `u32 BE key length, key, u32 BE encoding
    /// length, encoding`, in backend iteration order.
    pub fn dump<W: Write>(&self, mut out: W) -> io::Result<()> {
        let mut result = Ok(());
        self.backend.for_each(&mut |k, v| {
            if result.is_ok() {
                result = write_record(&mut out, k, v);
            }
        });
        result?;
        out.flush()
    }

    pub fn load<R: Read>(mut input: R, mut backend: B, cache_capacity: usize) -> io::Result<Self> {
        let mut buf = Vec::new();
        input.read_to_end(&mut buf)?;
        let mut rest = buf.as_slice();
        while !rest.is_empty() {
            let key = take_field(&mut rest)?;
            let key: NodeKey = key.try_into().map_err(|_| {
                io::Error::new(io::ErrorKind::InvalidData, "node key is not 32 bytes")
            })?;
            let enc = take_field(&mut rest)?;
            backend.put(key, enc.to_vec());
        }
        Ok(Self::new(backend, cache_capacity))
    }
}

fn write_record<W: Write>(out: &mut W, key: &[u8], enc: &[u8]) -> io::Result<()> {
    out.write_all(&(key.len() as u32).to_be_bytes())?;
    out.write_all(key)?;
    out.write_all(&(enc.len() as u32).to_be_bytes())?;
    out.write_all(enc)
}

fn take_field<'a>(rest: &mut &'a [u8]) -> io::Result<&'a [u8]> {
    let truncated = || io::Error::new(io::ErrorKind::UnexpectedEof, "truncated record");
    if rest.len() < 4 {
        return Err(truncated());
    }
    let len = u32::from_be_bytes(rest[..4].try_into().expect("4 bytes")) as usize;
    let field = rest.get(4..4 + len).ok_or_else(truncated)?;
    *rest = &rest[4 + len..];
    Ok(field)
}
