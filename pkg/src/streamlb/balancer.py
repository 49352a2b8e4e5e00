"""Load balancer: queue-length reports in, ring redistributions out."""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass
from typing import Sequence

from .ring import Ring

log = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class LoadReport:
    reducer_id: int
    queue_len: int
    seq: int

    def __post_init__(self) -> None:
        if self.queue_len < 0:
            raise ValueError(f"negative queue length in {self}")


def should_rebalance(queue_lens: Sequence[int], tau: float) -> int | None:
    """Return the overloaded reducer, or None if the load looks fine.

    Fires when the longest queue exceeds the runner-up by more than a
    factor of ``1 + tau``. Ties for the longest queue go to the lowest
    index, and since the runner-up then has the same length, they never
    fire.
    """
    if len(queue_lens) < 2:
        raise ValueError("need at least two reducers to compare loads")
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")

    x = max(range(len(queue_lens)), key=lambda i: (queue_lens[i], -i))
    q_max = queue_lens[x]
    q_second = max(q for i, q in enumerate(queue_lens) if i != x)
    if q_max > q_second * (1 + tau):
        return x
    return None


@dataclass(frozen=True, slots=True)
class Rebalance:
    reducer_id: int
    queue_lens: tuple[int, ...]
    applied: bool


class LoadBalancer:
    """Owns the ring and decides when to redistribute it.

    Reports are serialized through an internal lock (the balancer's
    mailbox); ``lookup`` only reads the currently installed ring, which
    is replaced wholesale, so it needs no lock.

    After every round the balancer waits for a fresh report from every
    reducer before it will consider another one.
    """

    def __init__(self, ring: Ring, tau: float = 0.2, max_rounds: int = 1) -> None:
        if tau < 0:
            raise ValueError(f"tau must be >= 0, got {tau}")
        if max_rounds < 0:
            raise ValueError(f"max_rounds must be >= 0, got {max_rounds}")
        self.ring = ring
        self.tau = tau
        self.max_rounds = max_rounds
        self.num_reducers = ring.num_nodes
        self.latest: dict[int, LoadReport] = {}
        self.rounds_used = [0] * self.num_reducers
        self.cooldown_pending: set[int] = set()
        self.history: list[Rebalance] = []
        self._lock = threading.Lock()

    @property
    def redistributions(self) -> int:
        return sum(1 for r in self.history if r.applied)

    @property
    def noop_rounds(self) -> int:
        return sum(1 for r in self.history if not r.applied)

    def lookup(self, key: str) -> int:
        return self.ring.key_lookup(key)

    def report_load(self, report: LoadReport) -> int | None:
        if not 0 <= report.reducer_id < self.num_reducers:
            raise KeyError(f"unknown reducer {report.reducer_id}")
        with self._lock:
            prev = self.latest.get(report.reducer_id)
            if prev is not None and report.seq <= prev.seq:
                return None
            self.latest[report.reducer_id] = report
            self.cooldown_pending.discard(report.reducer_id)
            return self._maybe_rebalance()

    def maybe_rebalance(self) -> int | None:
        with self._lock:
            return self._maybe_rebalance()

    def _maybe_rebalance(self) -> int | None:
        if self.cooldown_pending or len(self.latest) < self.num_reducers:
            return None
        queue_lens = tuple(self.latest[i].queue_len for i in range(self.num_reducers))
        x = should_rebalance(queue_lens, self.tau)
        if x is None or self.rounds_used[x] >= self.max_rounds:
            return None

        new_ring = self.ring.redistribute(x)
        applied = new_ring is not None
        if applied:
            self.ring = new_ring
        # a no-op round still spends budget, otherwise it would re-fire on every report
        self.rounds_used[x] += 1
        self.cooldown_pending = set(range(self.num_reducers))
        self.history.append(Rebalance(x, queue_lens, applied))
        log.debug("round for reducer %d at %s (applied=%s): %r", x, queue_lens, applied, self.ring)
        return x
