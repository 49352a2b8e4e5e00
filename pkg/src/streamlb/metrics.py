"""Skew metric and per-run accounting."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Any, Sequence


def compute_skew(processed: Sequence[int]) -> float:
    """Normalized excess of the busiest reducer over the uniform share.

    With ``M`` total messages over ``R`` reducers, the ideal share is
    ``U = ceil(M / R)`` and the busiest reducer handled ``W``; the skew is
    ``(W - U) / (M - U)``: 0 for a perfectly even split, 1 when a single
    reducer did everything. Defined as 0 when ``M <= U``.
    """
    if not processed:
        raise ValueError("need at least one reducer count")
    if any(m < 0 for m in processed):
        raise ValueError(f"counts must be non-negative: {list(processed)}")
    total = sum(processed)
    if total == 0:
        raise ValueError("skew is undefined when no messages were processed")

    ideal = math.ceil(total / len(processed))
    if total <= ideal:
        return 0.0
    return (max(processed) - ideal) / (total - ideal)


@dataclass
class RunResult:
    processed: list[int]
    skew: float
    redistributions: int
    forwards: int
    counts: dict[str, Any]
    rounds_used: list[int] = field(default_factory=list)
    noop_rounds: int = 0
    steps: int | None = None
    wall_time: float | None = None
    config: dict[str, Any] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return sum(self.processed)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["skew"] = round(self.skew, 2)
        d["counts"] = dict(sorted(self.counts.items()))
        return d
