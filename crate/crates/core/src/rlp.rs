//! Recursive length prefix encoding.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RlpError {
    #[error("input ended before item was complete")]
    Truncated,
    #[error("{0} trailing bytes after item")]
    Trailing(usize),
    #[error("non-canonical encoding")]
    NonCanonical,
    #[error("expected a list")]
    ExpectedList,
    #[error("expected a byte string")]
    ExpectedBytes,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Item {
    Bytes(Vec<u8>),
    List(Vec<Item>),
}

impl Item {
    pub fn bytes(data: impl Into<Vec<u8>>) -> Self {
        Item::Bytes(data.into())
    }
}

pub fn encode(item: &Item) -> Vec<u8> {
    let mut out = Vec::new();
    encode_into(item, &mut out);
    out
}

fn encode_into(item: &Item, out: &mut Vec<u8>) {
    match item {
        Item::Bytes(b) => encode_bytes_into(b, out),
        Item::List(items) => {
            let mut payload = Vec::new();
            for it in items {
                encode_into(it, &mut payload);
            }
            encode_length(payload.len(), 0xc0, out);
            out.extend_from_slice(&payload);
        }
    }
}

pub fn encode_bytes(data: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(data.len() + 9);
    encode_bytes_into(data, &mut out);
    out
}

fn encode_bytes_into(data: &[u8], out: &mut Vec<u8>) {
    if data.len() == 1 && data[0] < 0x80 {
        out.push(data[0]);
    } else {
        encode_length(data.len(), 0x80, out);
        out.extend_from_slice(data);
    }
}

/// Wraps already-encoded items into a list encoding.
pub fn encode_list_raw<'a>(encoded: impl IntoIterator<Item = &'a [u8]>) -> Vec<u8> {
    let payload: Vec<u8> = encoded.into_iter().flatten().copied().collect();
    let mut out = Vec::with_capacity(payload.len() + 9);
    encode_length(payload.len(), 0xc0, &mut out);
    out.extend_from_slice(&payload);
    out
}

fn encode_length(len: usize, offset: u8, out: &mut Vec<u8>) {
    if len < 56 {
        out.push(offset + len as u8);
    } else {
        let be = len.to_be_bytes();
        let skip = be.iter().take_while(|b| **b == 0).count();
        out.push(offset + 55 + (be.len() - skip) as u8);
        out.extend_from_slice(&be[skip..]);
    }
}

/// Header of one item: whether it is a list, where its payload starts and
/// how long the payload is.
struct Header {
    list: bool,
    offset: usize,
    len: usize,
}

fn header(input: &[u8]) -> Result<Header, RlpError> {
    let first = *input.first().ok_or(RlpError::Truncated)?;
    let (list, offset, len) = match first {
        0x00..=0x7f => return Ok(Header { list: false, offset: 0, len: 1 }),
        0x80..=0xb7 => {
            let len = (first - 0x80) as usize;
            if len == 1 && input.get(1).is_some_and(|b| *b < 0x80) {
                return Err(RlpError::NonCanonical);
            }
            (false, 1, len)
        }
        0xb8..=0xbf => {
            let n = (first - 0xb7) as usize;
            (false, 1 + n, long_length(input, n)?)
        }
        0xc0..=0xf7 => (true, 1, (first - 0xc0) as usize),
        0xf8..=0xff => {
            let n = (first - 0xf7) as usize;
            (true, 1 + n, long_length(input, n)?)
        }
    };
    if input.len() < offset + len {
        return Err(RlpError::Truncated);
    }
    Ok(Header { list, offset, len })
}

fn long_length(input: &[u8], n: usize) -> Result<usize, RlpError> {
    let bytes = input.get(1..1 + n).ok_or(RlpError::Truncated)?;
    if bytes[0] == 0 || n > std::mem::size_of::<usize>() {
        return Err(RlpError::NonCanonical);
    }
    let len = bytes.iter().fold(0usize, |acc, b| (acc << 8) | *b as usize);
    if len < 56 {
        return Err(RlpError::NonCanonical);
    }
    Ok(len)
}

pub fn decode(input: &[u8]) -> Result<Item, RlpError> {
    let (item, used) = decode_prefix(input)?;
    if used != input.len() {
        return Err(RlpError::Trailing(input.len() - used));
    }
    Ok(item)
}

fn decode_prefix(input: &[u8]) -> Result<(Item, usize), RlpError> {
    let h = header(input)?;
    let payload = &input[h.offset..h.offset + h.len];
    let item = if h.list {
        let mut items = Vec::new();
        let mut rest = payload;
        while !rest.is_empty() {
            let (it, used) = decode_prefix(rest)?;
            items.push(it);
            rest = &rest[used..];
        }
        Item::List(items)
    } else {
        Item::Bytes(payload.to_vec())
    };
    Ok((item, h.offset + h.len))
}

/// Splits a list encoding into the raw encodings of its elements.
pub fn split_list(input: &[u8]) -> Result<Vec<&[u8]>, RlpError> {
    let h = header(input)?;
    if !h.list {
        return Err(RlpError::ExpectedList);
    }
    if h.offset + h.len != input.len() {
        return Err(RlpError::Trailing(input.len() - h.offset - h.len));
    }
    let mut rest = &input[h.offset..];
    let mut out = Vec::new();
    while !rest.is_empty() {
        let eh = header(rest)?;
        let used = eh.offset + eh.len;
        out.push(&rest[..used]);
        rest = &rest[used..];
    }
    Ok(out)
}

/// Payload of a byte-string encoding.
pub fn bytes_payload(input: &[u8]) -> Result<&[u8], RlpError> {
    let h = header(input)?;
    if h.list {
        return Err(RlpError::ExpectedBytes);
    }
    if h.offset + h.len != input.len() {
        return Err(RlpError::Trailing(input.len() - h.offset - h.len));
    }
    Ok(&input[h.offset..h.offset + h.len])
}

pub fn is_list(input: &[u8]) -> bool {
    input.first().is_some_and(|b| *b >= 0xc0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_string() {
        assert_eq!(encode_bytes(&[]), vec![0x80]);
    }

    #[test]
    fn single_low_byte_is_itself() {
        assert_eq!(encode_bytes(&[0x05]), vec![0x05]);
        assert_eq!(encode_bytes(&[0x80]), vec![0x81, 0x80]);
    }

    // Vectors from the canonical RLP test suite.
    #[test]
    fn reference_vectors() {
        assert_eq!(encode_bytes(b"dog"), vec![0x83, b'd', b'o', b'g']);
        let cat_dog = Item::List(vec![Item::bytes(&b"cat"[..]), Item::bytes(&b"dog"[..])]);
        assert_eq!(
            encode(&cat_dog),
            vec![0xc8, 0x83, b'c', b'a', b't', 0x83, b'd', b'o', b'g']
        );
        assert_eq!(encode(&Item::List(vec![])), vec![0xc0]);
        let lorem = b"Lorem ipsum dolor sit amet, consectetur adipisicing elit";
        let enc = encode_bytes(lorem);
        assert_eq!(&enc[..2], &[0xb8, 0x38]);
        // set-theoretic representation of three
        let three = Item::List(vec![
            Item::List(vec![]),
            Item::List(vec![Item::List(vec![])]),
            Item::List(vec![Item::List(vec![]), Item::List(vec![Item::List(vec![])])]),
        ]);
        assert_eq!(
            encode(&three),
            vec![0xc7, 0xc0, 0xc1, 0xc0, 0xc3, 0xc0, 0xc1, 0xc0]
        );
    }

    #[test]
    fn rejects_malformed() {
        assert_eq!(decode(&[0x83, b'd']), Err(RlpError::Truncated));
        assert_eq!(decode(&[0x81, 0x05]), Err(RlpError::NonCanonical));
        assert_eq!(decode(&[0x05, 0x06]), Err(RlpError::Trailing(1)));
        assert_eq!(decode(&[0xb8, 0x02, 1, 2]), Err(RlpError::NonCanonical));
    }

    #[test]
    fn split_list_gives_raw_elements() {
        let enc = encode(&Item::List(vec![
            Item::bytes(vec![1u8]),
            Item::List(vec![Item::bytes(vec![2u8, 3])]),
        ]));
        let parts = split_list(&enc).unwrap();
        assert_eq!(parts, vec![&[0x01][..], &[0xc3, 0x82, 2, 3][..]]);
    }

    fn arb_item() -> impl Strategy<Value = Item> {
        let leaf = prop::collection::vec(any::<u8>(), 0..80).prop_map(Item::Bytes);
        leaf.prop_recursive(4, 64, 8, |inner| {
            prop::collection::vec(inner, 0..8).prop_map(Item::List)
        })
    }

    proptest! {
        #[test]
        fn round_trip(item in arb_item()) {
            prop_assert_eq!(decode(&encode(&item)).unwrap(), item);
        }
    }
}
