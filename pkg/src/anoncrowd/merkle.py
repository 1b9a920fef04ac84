"""Append-only Merkle accumulator with a fixed depth.

The tree is born full of empty subtrees: per-level digests of all-empty
subtrees are precomputed, so the root is always defined and appending a
leaf touches exactly one node per level. Leaves and internal nodes hash
under distinct prefixes (0x00 / 0x01) to keep the two layers from ever
colliding. Membership paths list sibling digests from the leaf level up.

Single-writer: the registration authority owns appends. Readers may hold
paths across later appends, but a path only verifies against the root of
the epoch it was issued in, which is exactly the protocol's requirement
(statements pin the root they were proven against).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import CapacityError, EncodingError
from .primitives import hash_bytes

DEFAULT_DEPTH = 20


def _leaf_hash(payload: bytes) -> bytes:
    return hash_bytes(b"\x00" + payload)


def _node_hash(left: bytes, right: bytes) -> bytes:
    return hash_bytes(b"\x01" + left + right)


def empty_digests(depth: int) -> list[bytes]:
    """digest of the all-empty subtree at each level, 0 (leaf) .. depth."""
    out = [_leaf_hash(b"")]
    for _ in range(depth):
        out.append(_node_hash(out[-1], out[-1]))
    return out


@dataclass(frozen=True)
class MerklePath:
    """Sibling digests from leaf level upward plus the leaf position."""

    position: int
    siblings: tuple[bytes, ...]

    def encode(self) -> bytes:
        from .encoding import enc_u32

        body = enc_u32(self.position) + enc_u32(len(self.siblings))
        for s in self.siblings:
            body += s
        return body

    @classmethod
    def decode(cls, data: bytes) -> "MerklePath":
        if len(data) < 8:
            raise EncodingError("path record truncated")
        position = int.from_bytes(data[:4], "little")
        count = int.from_bytes(data[4:8], "little")
        rest = data[8:]
        if len(rest) != count * 32:
            raise EncodingError("path sibling list length mismatch")
        sibs = tuple(rest[i * 32 : (i + 1) * 32] for i in range(count))
        return cls(position, sibs)


def verify_path(root: bytes, leaf_payload: bytes, path: MerklePath) -> bool:
    """Stateless check that leaf_payload sits at path.position under root."""
    if path.position < 0 or path.position >= 1 << len(path.siblings):
        return False
    node = _leaf_hash(leaf_payload)
    idx = path.position
    for sib in path.siblings:
        if len(sib) != 32:
            return False
        if idx & 1:
            node = _node_hash(sib, node)
        else:
            node = _node_hash(node, sib)
        idx >>= 1
    return node == root


class MerkleTree:
    """Fixed-depth append-only tree; capacity 2**depth leaves."""

    def __init__(self, depth: int = DEFAULT_DEPTH):
        if depth < 1:
            raise ValueError("depth must be at least 1")
        self.depth = depth
        self._empty = empty_digests(depth)
        self._payloads: list[bytes] = []
        # _levels[0] holds leaf digests, _levels[depth] holds the root
        self._levels: list[list[bytes]] = [[] for _ in range(depth + 1)]

    @property
    def leaf_count(self) -> int:
        return len(self._payloads)

    @property
    def capacity(self) -> int:
        return 1 << self.depth

    def payload(self, position: int) -> bytes:
        return self._payloads[position]

    def root(self) -> bytes:
        if not self._levels[self.depth]:
            return self._empty[self.depth]
        return self._levels[self.depth][0]

    def append(self, payload: bytes) -> int:
        if len(self._payloads) >= self.capacity:
            raise CapacityError(f"tree is full ({self.capacity} leaves)")
        position = len(self._payloads)
        self._payloads.append(payload)
        self._set(0, position, _leaf_hash(payload))
        idx = position
        for lvl in range(self.depth):
            nodes = self._levels[lvl]
            if idx & 1:
                parent = _node_hash(nodes[idx - 1], nodes[idx])
            else:
                right = nodes[idx + 1] if idx + 1 < len(nodes) else self._empty[lvl]
                parent = _node_hash(nodes[idx], right)
            idx >>= 1
            self._set(lvl + 1, idx, parent)
        return position

    def _set(self, level: int, idx: int, digest: bytes) -> None:
        nodes = self._levels[level]
        if idx < len(nodes):
            nodes[idx] = digest
        else:
            nodes.append(digest)

    def prove_membership(self, position: int) -> MerklePath:
        if not 0 <= position < len(self._payloads):
            raise ValueError(f"no leaf at position {position}")
        sibs = []
        idx = position
        for lvl in range(self.depth):
            nodes = self._levels[lvl]
            sib_idx = idx ^ 1
            sibs.append(nodes[sib_idx] if sib_idx < len(nodes) else self._empty[lvl])
            idx >>= 1
        return MerklePath(position, tuple(sibs))

    # ── snapshots ──

    def export_snapshot(self) -> str:
        return json.dumps(
            {"depth": self.depth, "leaves": [p.hex() for p in self._payloads]},
            sort_keys=True,
        )

    @classmethod
    def from_snapshot(cls, text: str) -> "MerkleTree":
        try:
            doc = json.loads(text)
            depth = doc["depth"]
            leaves = [bytes.fromhex(h) for h in doc["leaves"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise EncodingError(f"bad tree snapshot: {exc}") from exc
        tree = cls(depth)
        for payload in leaves:
            tree.append(payload)
        return tree
