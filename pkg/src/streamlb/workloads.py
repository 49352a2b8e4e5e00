"""Key sequences with a chosen per-reducer load under a given ring.

The built-in workloads WL1..WL5 are constructed against our own ring so
that a run without load balancing lands on a prescribed skew:

    ====  =======  ========
    name  halving  doubling
    ====  =======  ========
    WL1   0.00     1.00
    WL2   0.00     0.00
    WL3   1.00     1.00
    WL4   0.80     0.49
    WL5   0.20     0.55
    ====  =======  ========

WL3 is a single key repeated; WL1 draws from keys that the doubling
ring sends to one reducer but the halving ring spreads evenly.

The overloaded ("hot") reducer is the one whose keyspace a single
redistribution of that strategy shrinks the most, so the workloads probe
the balancer rather than a reducer it cannot help in one round.
"""

from __future__ import annotations

import enum
import itertools
import math
import random
import string
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .ring import Ring, Strategy, new_ring

LETTERS = tuple(string.ascii_lowercase)
MAX_KEY_LEN = 3


class SynthesisError(ValueError):
    pass


class Builtin(str, enum.Enum):
    WL1 = "wl1"
    WL2 = "wl2"
    WL3 = "wl3"
    WL4 = "wl4"
    WL5 = "wl5"


# no-LB skew per (workload, strategy)
TARGET_SKEW: dict[Builtin, dict[Strategy, float]] = {
    Builtin.WL1: {Strategy.HALVING: 0.0, Strategy.DOUBLING: 1.0},
    Builtin.WL2: {Strategy.HALVING: 0.0, Strategy.DOUBLING: 0.0},
    Builtin.WL3: {Strategy.HALVING: 1.0, Strategy.DOUBLING: 1.0},
    Builtin.WL4: {Strategy.HALVING: 0.80, Strategy.DOUBLING: 0.49},
    Builtin.WL5: {Strategy.HALVING: 0.20, Strategy.DOUBLING: 0.55},
}


@dataclass
class WorkloadSpec:
    """Desired item count per reducer under the initial ring.

    ``key_pool`` is the ordered candidate list (default a-z); it is
    extended with longer lowercase strings when some reducer that needs
    items owns none of it. ``keys_per_node`` caps how many distinct keys
    carry each reducer's share (``None`` uses every owned pool key).
    """

    target_counts: list[int]
    total_items: int = 100
    key_pool: list[str] = field(default_factory=lambda: list(LETTERS))
    keys_per_node: int | None = None
    name: str = "custom"

    def __post_init__(self) -> None:
        if any(c < 0 for c in self.target_counts):
            raise ValueError(f"negative target count: {self.target_counts}")
        if sum(self.target_counts) != self.total_items:
            raise ValueError(
                f"target counts {self.target_counts} sum to {sum(self.target_counts)}, "
                f"expected {self.total_items}"
            )
        if self.keys_per_node is not None and self.keys_per_node < 1:
            raise ValueError("keys_per_node must be >= 1")


def candidate_keys(max_len: int = MAX_KEY_LEN) -> Iterator[str]:
    """a..z, then aa..zz, and so on up to ``max_len`` characters."""
    for n in range(1, max_len + 1):
        for chars in itertools.product(string.ascii_lowercase, repeat=n):
            yield "".join(chars)


def _covering_pool(base: Sequence[str], ring: Ring, needed: set[int], max_len: int) -> dict[int, list[str]]:
    by_node: dict[int, list[str]] = {i: [] for i in range(ring.num_nodes)}
    seen = set()
    for k in base:
        if k not in seen:
            seen.add(k)
            by_node[ring.key_lookup(k)].append(k)

    missing = {i for i in needed if not by_node[i]}
    if missing:
        for k in candidate_keys(max_len):
            if len(k) < 2 or k in seen:
                continue
            seen.add(k)
            owner = ring.key_lookup(k)
            by_node[owner].append(k)
            missing.discard(owner)
            if not missing:
                break
    if missing:
        raise SynthesisError(
            f"no key of length <= {max_len} maps to node(s) {sorted(missing)} on {ring!r}"
        )
    return by_node


def synthesize(spec: WorkloadSpec, ring: Ring, seed: int = 42, max_len: int = MAX_KEY_LEN) -> list[str]:
    """Shuffled key sequence whose ownership under ``ring`` is exactly ``spec.target_counts``."""
    if len(spec.target_counts) != ring.num_nodes:
        raise ValueError(
            f"{len(spec.target_counts)} target counts for a ring of {ring.num_nodes} nodes"
        )
    needed = {i for i, c in enumerate(spec.target_counts) if c > 0}
    by_node = _covering_pool(spec.key_pool, ring, needed, max_len)

    keys: list[str] = []
    for node, count in enumerate(spec.target_counts):
        if count == 0:
            continue
        owned = by_node[node][: spec.keys_per_node]
        base, extra = divmod(count, len(owned))
        for j, k in enumerate(owned):
            keys.extend([k] * (base + (j < extra)))

    random.Random(seed).shuffle(keys)
    return keys


def hot_node(ring: Ring) -> int:
    """Reducer that loses the largest fraction of its keyspace in one round."""
    before = ring.arc_shares()
    best, best_relief = 0, -1.0
    for node in range(ring.num_nodes):
        after = ring.redistribute(node)
        relief = 0.0 if after is None else 1 - after.arc_shares()[node] / before[node]
        if relief > best_relief:
            best, best_relief = node, relief
    return best


def counts_for_skew(skew: float, total: int, num_nodes: int, hot: int = 0) -> list[int]:
    """Per-node counts whose skew is as close to ``skew`` as integers allow.

    The hot node takes ``W = U + round(skew * (M - U))`` items and the rest
    are split as evenly as possible among the other nodes.
    """
    if num_nodes < 2 or not 0 <= hot < num_nodes:
        raise ValueError(f"need >= 2 nodes and a hot node among them, got {num_nodes} / {hot}")
    ideal = math.ceil(total / num_nodes)
    busiest = ideal + round(skew * (total - ideal))
    rest, others = total - busiest, num_nodes - 1
    base, extra = divmod(rest, others)
    counts = []
    j = 0
    for i in range(num_nodes):
        if i == hot:
            counts.append(busiest)
        else:
            counts.append(base + (j < extra))
            j += 1
    if max(c for i, c in enumerate(counts) if i != hot) > busiest:
        raise ValueError(f"skew {skew} is not reachable with {total} items on {num_nodes} nodes")
    return counts


def _single_owner_pool(ring: Ring, node: int, cover: Ring, max_len: int) -> list[str]:
    """Keys owned by ``node`` on ``ring``, extended until they reach every node of ``cover``."""
    pool: list[str] = []
    covered: set[int] = set()
    for k in candidate_keys(max_len):
        if ring.key_lookup(k) != node:
            continue
        owner = cover.key_lookup(k)
        if len(k) == 1 or owner not in covered:
            pool.append(k)
            covered.add(owner)
        if len(k) > 1 and len(covered) == cover.num_nodes:
            break
    if len(covered) < cover.num_nodes:
        raise SynthesisError(f"could not build a pool owned by node {node} covering {cover!r}")
    return pool


def builtin(
    name: Builtin | str,
    strategy: Strategy | str,
    num_nodes: int = 4,
    total_items: int = 100,
    hot: int | None = None,
) -> WorkloadSpec:
    """Spec for one of WL1..WL5 against ``strategy``'s default initial ring."""
    name = Builtin(name.lower() if isinstance(name, str) else name)
    strategy = Strategy(strategy)
    ring = new_ring(num_nodes, strategy)
    if hot is None:
        hot = hot_node(ring)
    target = counts_for_skew(TARGET_SKEW[name][strategy], total_items, num_nodes, hot)
    spec = WorkloadSpec(target_counts=target, total_items=total_items, name=name.value)

    if name is Builtin.WL3:
        spec.keys_per_node = 1
    elif name is Builtin.WL1:
        doubling = new_ring(num_nodes, Strategy.DOUBLING)
        if strategy is not Strategy.DOUBLING:
            hot = hot_node(doubling)
        spec.key_pool = _single_owner_pool(
            doubling, hot, new_ring(num_nodes, Strategy.HALVING), MAX_KEY_LEN
        )
    return spec


def builtin_workload(
    name: Builtin | str,
    strategy: Strategy | str,
    num_nodes: int = 4,
    seed: int = 42,
    hot: int | None = None,
) -> list[str]:
    strategy = Strategy(strategy)
    spec = builtin(name, strategy, num_nodes, hot=hot)
    return synthesize(spec, new_ring(num_nodes, strategy), seed)


def write_workload(path: str | Path, keys: Iterable[str]) -> None:
    lines = []
    for k in keys:
        if not k or "\n" in k or "\r" in k:
            raise ValueError(f"keys must be non-empty single-line strings: {k!r}")
        lines.append(k + "\n")
    Path(path).write_text("".join(lines), encoding="utf-8")


def read_workload(path: str | Path) -> list[str]:
    return [line for line in Path(path).read_text(encoding="utf-8").splitlines() if line]
