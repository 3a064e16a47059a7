use super::nibbles::{decode_hex_prefix, hex_prefix};
use super::TrieError;
use crate::rlp;

/// Reference from a parent to a child node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NodeRef {
    Empty,
    /// keccak-256 of an encoding that is at least 32 bytes long.
    Hash([u8; 32]),
    /// The full encoding of a node shorter than 32 bytes.
    Inline(Vec<u8>),
}

impl NodeRef {
    pub fn is_empty(&self) -> bool {
        matches!(self, NodeRef::Empty)
    }

    fn encoded(&self) -> Vec<u8> {
        match self {
            NodeRef::Empty => vec![0x80],
            NodeRef::Hash(h) => rlp::encode_bytes(h),
            NodeRef::Inline(enc) => enc.clone(),
        }
    }

    fn decode(raw: &[u8]) -> Result<Self, TrieError> {
        if rlp::is_list(raw) {
            return Ok(NodeRef::Inline(raw.to_vec()));
        }
        let payload = rlp::bytes_payload(raw)?;
        match payload.len() {
            0 => Ok(NodeRef::Empty),
            32 => Ok(NodeRef::Hash(payload.try_into().expect("length checked"))),
            n => Err(TrieError::MalformedNode(format!("child reference of {n} bytes"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Node {
    Empty,
    Leaf {
        path: Vec<u8>,
        value: Vec<u8>,
    },
    Extension {
        path: Vec<u8>,
        child: NodeRef,
    },
    Branch {
        children: Box<[NodeRef; 16]>,
        value: Option<Vec<u8>>,
    },
}

impl Node {
    pub fn empty_branch() -> Self {
        Node::Branch {
            children: Box::new(std::array::from_fn(|_| NodeRef::Empty)),
            value: None,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        match self {
            Node::Empty => vec![0x80],
            Node::Leaf { path, value } => {
                let hp = rlp::encode_bytes(&hex_prefix(path, true));
                let v = rlp::encode_bytes(value);
                rlp::encode_list_raw([hp.as_slice(), v.as_slice()])
            }
            Node::Extension { path, child } => {
                let hp = rlp::encode_bytes(&hex_prefix(path, false));
                let c = child.encoded();
                rlp::encode_list_raw([hp.as_slice(), c.as_slice()])
            }
            Node::Branch { children, value } => {
                let mut parts: Vec<Vec<u8>> = children.iter().map(NodeRef::encoded).collect();
                parts.push(rlp::encode_bytes(value.as_deref().unwrap_or(&[])));
                rlp::encode_list_raw(parts.iter().map(Vec::as_slice))
            }
        }
    }

    pub fn decode(encoded: &[u8]) -> Result<Self, TrieError> {
        if encoded == [0x80] {
            return Ok(Node::Empty);
        }
        let parts = rlp::split_list(encoded)?;
        match parts.len() {
            2 => {
                let hp = rlp::bytes_payload(parts[0])?;
                let (path, leaf) = decode_hex_prefix(hp)
                    .ok_or_else(|| TrieError::MalformedNode("bad hex-prefix".into()))?;
                if leaf {
                    Ok(Node::Leaf {
                        path,
                        value: rlp::bytes_payload(parts[1])?.to_vec(),
                    })
                } else {
                    Ok(Node::Extension {
                        path,
                        child: NodeRef::decode(parts[1])?,
                    })
                }
            }
            17 => {
                let mut children: [NodeRef; 16] = std::array::from_fn(|_| NodeRef::Empty);
                for (slot, raw) in children.iter_mut().zip(&parts[..16]) {
                    *slot = NodeRef::decode(raw)?;
                }
                let v = rlp::bytes_payload(parts[16])?;
                Ok(Node::Branch {
                    children: Box::new(children),
                    value: (!v.is_empty()).then(|| v.to_vec()),
                })
            }
            n => Err(TrieError::MalformedNode(format!("list of {n} items"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_each_variant() {
        let leaf = Node::Leaf { path: vec![1, 2, 3], value: b"v".to_vec() };
        let ext = Node::Extension { path: vec![4, 5], child: NodeRef::Hash([7; 32]) };
        let mut branch = Node::empty_branch();
        if let Node::Branch { children, value } = &mut branch {
            children[3] = NodeRef::Inline(leaf.encode());
            children[9] = NodeRef::Hash([1; 32]);
            *value = Some(b"bv".to_vec());
        }
        for n in [leaf, ext, branch, Node::Empty] {
            assert_eq!(Node::decode(&n.encode()).unwrap(), n);
        }
    }

    #[test]
    fn rejects_bad_child_reference() {
        let bad = rlp::encode_list_raw([
            rlp::encode_bytes(&hex_prefix(&[1], false)).as_slice(),
            rlp::encode_bytes(&[1, 2, 3]).as_slice(),
        ]);
        assert!(matches!(Node::decode(&bad), Err(TrieError::MalformedNode(_))));
    }
}
