"""Skew-reduction experiments over the built-in workloads."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Any, Iterable

from .ring import Strategy
from .runtime import Mode, RunConfig, run_pipeline
from .workloads import Builtin, builtin_workload


@dataclass(frozen=True)
class ExperimentRow:
    workload: str
    method: str
    no_lb_skew: float
    with_lb_skew: float
    delta: float
    rounds_allowed: int

    @classmethod
    def build(cls, workload: str, method: str, no_lb: float, with_lb: float, rounds: int) -> ExperimentRow:
        # rounded like a printed table, so delta is exactly the difference of the shown values
        no_lb, with_lb = round(no_lb, 2), round(with_lb, 2)
        return cls(workload, method, no_lb, with_lb, round(no_lb - with_lb, 2), rounds)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


FIELDS = ["workload", "method", "no_lb_skew", "with_lb_skew", "delta", "rounds_allowed"]


def _skew(keys: list[str], strategy: Strategy, max_rounds: int, **overrides: Any) -> float:
    config = RunConfig(strategy=strategy, max_rounds=max_rounds, **overrides)
    return run_pipeline(keys, config).skew


def sweep(
    rounds: Iterable[int],
    seed: int = 42,
    tau: float = 0.2,
    num_mappers: int = 4,
    num_reducers: int = 4,
    mode: Mode | str = Mode.SIM,
    workloads: Iterable[Builtin] = tuple(Builtin),
    methods: Iterable[Strategy] = tuple(Strategy),
) -> list[ExperimentRow]:
    """Compare each workload/method with LB off against each round budget."""
    rounds = list(rounds)
    common = dict(seed=seed, tau=tau, num_mappers=num_mappers, num_reducers=num_reducers, mode=Mode(mode))
    rows = []
    for wl in workloads:
        for method in methods:
            keys = builtin_workload(wl, method, num_reducers, seed)
            no_lb = _skew(keys, method, 0, **common)
            for r in rounds:
                with_lb = _skew(keys, method, r, **common)
                rows.append(ExperimentRow.build(wl.value.upper(), method.value, no_lb, with_lb, r))
    return rows


def experiment1(**kwargs: Any) -> list[ExperimentRow]:
    """At most one LB round per reducer."""
    return sweep([1], **kwargs)


def experiment2(max_rounds: int = 4, **kwargs: Any) -> list[ExperimentRow]:
    """Sweep the per-reducer round budget from 1 to ``max_rounds``."""
    return sweep(range(1, max_rounds + 1), **kwargs)
