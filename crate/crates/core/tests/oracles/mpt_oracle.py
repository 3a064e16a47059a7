"""Independent Merkle-Patricia root oracle.

Builds the root in one pass from the full sorted key set (no incremental
insertion), so it shares no algorithmic path with the crate's trie.
Usage: python3 mpt_oracle.py ../fixtures/trie16.json
"""
import json
import sys

from Crypto.Hash import keccak


def keccak256(data: bytes) -> bytes:
    h = keccak.new(digest_bits=256)
    h.update(data)
    return h.digest()


def rlp_bytes(b: bytes) -> bytes:
    if len(b) == 1 and b[0] < 0x80:
        return b
    return rlp_len(len(b), 0x80) + b


def rlp_list(items) -> bytes:
    payload = b"".join(items)
    return rlp_len(len(payload), 0xC0) + payload


def rlp_len(n: int, offset: int) -> bytes:
    if n < 56:
        return bytes([offset + n])
    enc = n.to_bytes((n.bit_length() + 7) // 8, "big")
    return bytes([offset + 55 + len(enc)]) + enc


def nibbles(key: bytes):
    out = []
    for b in key:
        out += [b >> 4, b & 0x0F]
    return out


def hex_prefix(nibs, leaf: bool) -> bytes:
    flag = 2 if leaf else 0
    if len(nibs) % 2 == 1:
        nibs = [flag + 1] + nibs
    else:
        nibs = [flag, 0] + nibs
    return bytes(nibs[i] * 16 + nibs[i + 1] for i in range(0, len(nibs), 2))


def ref(node_rlp: bytes) -> bytes:
    # Embedded as-is when short, otherwise by hash.
    if len(node_rlp) < 32:
        return node_rlp
    return rlp_bytes(keccak256(node_rlp))


def build(pairs, depth):
    if not pairs:
        return rlp_bytes(b"")
    if len(pairs) == 1:
        k, v = pairs[0]
        return rlp_list([rlp_bytes(hex_prefix(k[depth:], True)), rlp_bytes(v)])
    cp = 0
    while True:
        pos = depth + cp
        if any(len(k) <= pos for k, _ in pairs):
            break
        if len({k[pos] for k, _ in pairs}) != 1:
            break
        cp += 1
    if cp > 0:
        child = build(pairs, depth + cp)
        prefix = pairs[0][0][depth:depth + cp]
        return rlp_list([rlp_bytes(hex_prefix(prefix, False)), ref(child)])
    items = []
    for n in range(16):
        group = [(k, v) for k, v in pairs if len(k) > depth and k[depth] == n]
        items.append(ref(build(group, depth + 1)) if group else rlp_bytes(b""))
    value = [v for k, v in pairs if len(k) == depth]
    items.append(rlp_bytes(value[0] if value else b""))
    return rlp_list(items)


def root(mapping, secure=False) -> str:
    pairs = []
    for k, v in mapping.items():
        key = keccak256(k) if secure else k
        pairs.append((nibbles(key), v))
    pairs.sort()
    return keccak256(build(pairs, 0)).hex()


if __name__ == "__main__":
    known = {b"doe": b"reindeer", b"dog": b"puppy", b"dogglesworth": b"cat"}
    assert root(known) == "8aad789dff2f538bca5d8ea56e8abe10f4c7ba3a5dea95fea4cd6e7c3a1168d3"
    assert root({}) == "56e81f171bcc55a6ff8345e692c0f86e5b48e01b996cadc001622fb5e363b421"
    with open(sys.argv[1]) as f:
        fixture = json.load(f)
    mapping = {k.encode(): v.encode() for k, v in fixture["pairs"]}
    print("plain ", root(mapping))
    print("secure", root(mapping, secure=True))
