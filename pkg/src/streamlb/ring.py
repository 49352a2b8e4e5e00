"""Consistent-hashing ring with token halving and token doubling.

Every node ``i`` owns tokens labelled ``token-{i}-{j}`` for ``j`` in
``range(count_i)``. A token sits on the 32-bit ring at the MurmurHash3
digest of its label, and a key belongs to the node owning the first
token at or after the key's own digest (wrapping around at 2**32).

Because both redistribution strategies only ever add or drop the
highest-numbered tokens, a ring is fully described by its per-node
token counts.
"""

from __future__ import annotations

import bisect
import enum
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

MASK32 = 0xFFFFFFFF
RING_SIZE = 2**32
DEFAULT_HALVING_TOKENS = 16
DEFAULT_MAX_TOKENS = 1024

_C1 = 0xCC9E2D51
_C2 = 0x1B873593


def _rotl32(x: int, r: int) -> int:
    return ((x << r) | (x >> (32 - r))) & MASK32


def _fmix32(h: int) -> int:
    h ^= h >> 16
    h = (h * 0x85EBCA6B) & MASK32
    h ^= h >> 13
    h = (h * 0xC2B2AE35) & MASK32
    h ^= h >> 16
    return h


def hash32(data: bytes, seed: int = 0) -> int:
    """MurmurHash3 x86 32-bit digest of ``data`` as an unsigned int."""
    length = len(data)
    h1 = seed & MASK32
    nblocks = length // 4

    for i in range(0, nblocks * 4, 4):
        k1 = int.from_bytes(data[i : i + 4], "little")
        k1 = (k1 * _C1) & MASK32
        k1 = _rotl32(k1, 15)
        k1 = (k1 * _C2) & MASK32
        h1 ^= k1
        h1 = _rotl32(h1, 13)
        h1 = (h1 * 5 + 0xE6546B64) & MASK32

    tail = data[nblocks * 4 :]
    if tail:
        k1 = int.from_bytes(tail, "little")
        k1 = (k1 * _C1) & MASK32
        k1 = _rotl32(k1, 15)
        k1 = (k1 * _C2) & MASK32
        h1 ^= k1

    return _fmix32(h1 ^ length)


@lru_cache(maxsize=1 << 16)
def key_hash(key: str) -> int:
    """Ring position of a string key (UTF-8 encoded)."""
    return hash32(key.encode("utf-8"))


class Strategy(str, enum.Enum):
    HALVING = "halving"
    DOUBLING = "doubling"


@dataclass(frozen=True, slots=True)
class Token:
    node_id: int
    token_index: int
    position: int

    @property
    def label(self) -> str:
        return token_label(self.node_id, self.token_index)

    @classmethod
    def make(cls, node_id: int, token_index: int) -> Token:
        return cls(node_id, token_index, key_hash(token_label(node_id, token_index)))


def token_label(node_id: int, token_index: int) -> str:
    return f"token-{node_id}-{token_index}"


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


class Ring:
    """Immutable token ring.

    ``redistribute`` never mutates; it returns a new ring, or ``None``
    when the strategy cannot make a change (a halving node already down
    to one token, or doubling that would exceed ``max_tokens_per_node``).
    """

    __slots__ = ("strategy", "initial_tokens", "max_tokens_per_node", "_counts", "_tokens", "_positions")

    def __init__(
        self,
        strategy: Strategy,
        tokens_per_node: Iterable[int],
        initial_tokens: int,
        max_tokens_per_node: int = DEFAULT_MAX_TOKENS,
    ) -> None:
        counts = tuple(tokens_per_node)
        if not counts:
            raise ValueError("ring needs at least one node")
        if any(c < 1 for c in counts):
            raise ValueError(f"every node needs at least one token: {counts}")
        if any(c > max_tokens_per_node for c in counts):
            raise ValueError(f"token count exceeds cap {max_tokens_per_node}: {counts}")
        if strategy is Strategy.HALVING and not all(_is_power_of_two(c) for c in counts):
            raise ValueError(f"halving ring counts must be powers of two: {counts}")

        self.strategy = Strategy(strategy)
        self.initial_tokens = initial_tokens
        self.max_tokens_per_node = max_tokens_per_node
        self._counts = counts
        tokens = [Token.make(i, j) for i, c in enumerate(counts) for j in range(c)]
        tokens.sort(key=lambda t: (t.position, t.label))
        self._tokens = tuple(tokens)
        self._positions = [t.position for t in tokens]

    @property
    def num_nodes(self) -> int:
        return len(self._counts)

    @property
    def tokens(self) -> tuple[Token, ...]:
        return self._tokens

    @property
    def tokens_per_node(self) -> tuple[int, ...]:
        return self._counts

    def key_lookup(self, key: str) -> int:
        """Node owning ``key``: first token clockwise from its hash."""
        idx = bisect.bisect_left(self._positions, key_hash(key))
        if idx == len(self._tokens):
            idx = 0
        return self._tokens[idx].node_id

    def owner_map(self, keys: Iterable[str]) -> dict[str, int]:
        return {k: self.key_lookup(k) for k in keys}

    def redistribute(self, node_id: int) -> Ring | None:
        if not 0 <= node_id < self.num_nodes:
            raise IndexError(f"node_id {node_id} out of range for {self.num_nodes} nodes")

        counts = list(self._counts)
        if self.strategy is Strategy.HALVING:
            if counts[node_id] == 1:
                return None
            counts[node_id] //= 2
        else:
            doubled = [c if i == node_id else 2 * c for i, c in enumerate(counts)]
            if any(c > self.max_tokens_per_node for c in doubled):
                return None
            counts = doubled
        return Ring(self.strategy, counts, self.initial_tokens, self.max_tokens_per_node)

    def arc_shares(self) -> list[float]:
        """Fraction of the ring each node owns (a token owns the arc ending at it)."""
        owned = [0] * self.num_nodes
        prev = self._tokens[-1].position - RING_SIZE
        for t in self._tokens:
            owned[t.node_id] += t.position - prev
            prev = t.position
        return [o / RING_SIZE for o in owned]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Ring):
            return NotImplemented
        return self.strategy is other.strategy and self._counts == other._counts

    def __hash__(self) -> int:
        return hash((self.strategy, self._counts))

    def __repr__(self) -> str:
        return f"Ring({self.strategy.value}, tokens_per_node={list(self._counts)})"


def default_initial_tokens(strategy: Strategy) -> int:
    return DEFAULT_HALVING_TOKENS if Strategy(strategy) is Strategy.HALVING else 1


def new_ring(
    num_nodes: int,
    strategy: Strategy | str,
    initial_tokens: int | None = None,
    max_tokens_per_node: int = DEFAULT_MAX_TOKENS,
) -> Ring:
    """Build a fresh ring where every node holds ``initial_tokens`` tokens.

    Halving needs a power of two of at least 2 (default 16); doubling
    always starts from a single token per node.
    """
    strategy = Strategy(strategy)
    if num_nodes < 1:
        raise ValueError("num_nodes must be >= 1")
    if initial_tokens is None:
        initial_tokens = default_initial_tokens(strategy)
    if strategy is Strategy.HALVING:
        if initial_tokens < 2 or not _is_power_of_two(initial_tokens):
            raise ValueError(f"halving needs a power of two >= 2 initial tokens, got {initial_tokens}")
    elif initial_tokens != 1:
        raise ValueError(f"doubling starts from exactly one token per node, got {initial_tokens}")
    return Ring(strategy, [initial_tokens] * num_nodes, initial_tokens, max_tokens_per_node)
