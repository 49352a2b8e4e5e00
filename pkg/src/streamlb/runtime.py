"""Streaming map-reduce pipeline with load-balanced, forwarding reducers.

Mappers pull batches from the coordinator and push each output onto the
queue of whichever reducer the balancer currently assigns the key to.
Reducers poll their own queue, re-check ownership of every message, and
forward anything they no longer own. Because a key may be reduced in
several places over a run, the per-reducer states are merged at the end.

Two execution modes share the same actor code:

* ``sim``: one thread steps actors in an order drawn from a seeded RNG,
  so every run is replayable.
* ``concurrent``: each mapper and reducer runs on its own thread.
"""

from __future__ import annotations

import enum
import logging
import random
import threading
import time
from collections import deque
from dataclasses import asdict, dataclass
from typing import Any, Callable, Generic, Iterable, Protocol, Sequence, TypeVar

from .balancer import LoadBalancer, LoadReport
from .metrics import RunResult, compute_skew
from .ring import Strategy, new_ring

log = logging.getLogger(__name__)

S = TypeVar("S")


class Mode(str, enum.Enum):
    SIM = "sim"
    CONCURRENT = "concurrent"


class Origin(str, enum.Enum):
    MAPPER = "mapper"
    FORWARDED = "forwarded"


class DeadlockError(RuntimeError):
    """The pipeline stopped making progress with messages still in flight."""


@dataclass(frozen=True, slots=True)
class Message:
    key: str
    value: Any = 1
    origin: Origin = Origin.MAPPER

    def __post_init__(self) -> None:
        if not self.key:
            raise ValueError("message key must be non-empty")


class Reducer(Protocol[S]):
    def init(self) -> S: ...

    def reduce(self, state: S, message: Message) -> S: ...

    def merge(self, a: S, b: S) -> S: ...


class WordCount:
    """Counts per key. Merging is a pointwise sum."""

    def init(self) -> dict[str, int]:
        return {}

    def reduce(self, state: dict[str, int], message: Message) -> dict[str, int]:
        state[message.key] = state.get(message.key, 0) + message.value
        return state

    def merge(self, a: dict[str, int], b: dict[str, int]) -> dict[str, int]:
        out = dict(a)
        for k, v in b.items():
            out[k] = out.get(k, 0) + v
        return out


WORD_COUNT = WordCount()


def merge_states(states: Iterable[S], reducer: Reducer[S] = WORD_COUNT) -> S:
    merged = reducer.init()
    for s in states:
        merged = reducer.merge(merged, s)
    return merged


def word_pairs(item: str) -> Iterable[tuple[str, int]]:
    yield item, 1


@dataclass
class RunConfig:
    num_mappers: int = 4
    num_reducers: int = 4
    tau: float = 0.2
    strategy: Strategy = Strategy.HALVING
    max_rounds: int = 1
    mode: Mode = Mode.SIM
    seed: int = 42
    report_every: int = 5
    initial_tokens: int | None = None
    batch_size: int = 5
    max_tokens_per_node: int = 1024
    max_steps: int | None = None
    timeout: float = 60.0

    def __post_init__(self) -> None:
        self.strategy = Strategy(self.strategy)
        self.mode = Mode(self.mode)
        if self.num_mappers < 1:
            raise ValueError("need at least one mapper")
        if self.num_reducers < 2:
            raise ValueError("need at least two reducers for load balancing")
        if self.tau < 0:
            raise ValueError("tau must be >= 0")
        if self.max_rounds < 0:
            raise ValueError("max_rounds must be >= 0")
        if self.report_every < 1 or self.batch_size < 1:
            raise ValueError("report_every and batch_size must be >= 1")

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["strategy"] = self.strategy.value
        d["mode"] = self.mode.value
        return d


class InFlightLedger:
    """Count of items produced by mappers but not yet reduced.

    Forwarding moves an item between queues without touching the count,
    so the count hits zero only once every item has been reduced.
    """

    def __init__(self) -> None:
        self.in_flight = 0
        self.produced = 0
        self.mappers_done = False
        self._cond = threading.Condition()

    def produce(self) -> None:
        with self._cond:
            self.in_flight += 1
            self.produced += 1

    def complete(self) -> None:
        with self._cond:
            if self.in_flight == 0:
                raise RuntimeError("completed more items than were produced")
            self.in_flight -= 1
            self._cond.notify_all()

    def finish_mapping(self) -> None:
        with self._cond:
            self.mappers_done = True
            self._cond.notify_all()

    @property
    def quiescent(self) -> bool:
        return self.mappers_done and self.in_flight == 0

    def wait_quiescent(self, timeout: float) -> bool:
        with self._cond:
            return self._cond.wait_for(lambda: self.quiescent, timeout)


class ReducerQueue:
    """Unbounded FIFO; deque append/popleft are atomic under the GIL."""

    def __init__(self) -> None:
        self._items: deque[Message] = deque()

    def put(self, message: Message) -> None:
        self._items.append(message)

    def get(self) -> Message | None:
        try:
            return self._items.popleft()
        except IndexError:
            return None

    def __len__(self) -> int:
        return len(self._items)


class Coordinator:
    """Hands out fixed-size batches and decides when reducers may stop."""

    def __init__(self, items: Sequence[Any], batch_size: int, num_mappers: int, ledger: InFlightLedger):
        self._batches = deque(
            list(items[i : i + batch_size]) for i in range(0, len(items), batch_size)
        )
        self._lock = threading.Lock()
        self._mappers_left = num_mappers
        self.ledger = ledger
        self.stop = threading.Event()

    def next_task(self) -> list[Any] | None:
        with self._lock:
            return self._batches.popleft() if self._batches else None

    def mapper_finished(self) -> None:
        with self._lock:
            self._mappers_left -= 1
            if self._mappers_left == 0:
                self.ledger.finish_mapping()

    def check_shutdown(self) -> bool:
        if self.ledger.quiescent:
            self.stop.set()
        return self.stop.is_set()


class Mapper:
    def __init__(
        self,
        mapper_id: int,
        coordinator: Coordinator,
        balancer: LoadBalancer,
        queues: Sequence[ReducerQueue],
        map_fn: Callable[[Any], Iterable[tuple[str, Any]]],
    ):
        self.mapper_id = mapper_id
        self.coordinator = coordinator
        self.balancer = balancer
        self.queues = queues
        self.map_fn = map_fn
        self.done = False
        self.sent = 0

    def step(self) -> bool:
        """Fetch and push one batch. Returns False once no tasks remain."""
        if self.done:
            return False
        task = self.coordinator.next_task()
        if task is None:
            self.done = True
            self.coordinator.mapper_finished()
            return False
        self.process(task)
        return True

    def process(self, task: Iterable[Any]) -> None:
        for item in task:
            for key, value in self.map_fn(item):
                # increment before enqueue so the ledger never reads zero early
                self.coordinator.ledger.produce()
                self.queues[self.balancer.lookup(key)].put(Message(key, value))
                self.sent += 1


class ReducerActor(Generic[S]):
    """Dequeues one message per step, reducing it or forwarding it.

    Load is reported on the first step, every ``report_every`` steps
    (idle polls included, so reducers with nothing to do still answer
    the balancer) and whenever the queue drains.
    """

    def __init__(
        self,
        reducer_id: int,
        balancer: LoadBalancer,
        queues: Sequence[ReducerQueue],
        ledger: InFlightLedger,
        reducer: Reducer[S],
        report_every: int,
    ):
        self.reducer_id = reducer_id
        self.balancer = balancer
        self.queues = queues
        self.queue = queues[reducer_id]
        self.ledger = ledger
        self.reducer = reducer
        self.report_every = report_every
        self.state: S = reducer.init()
        self.processed = 0
        self.forwards = 0
        self.ticks = 0
        self._seq = 0

    def step(self) -> bool:
        self.ticks += 1
        reported = False
        message = self.queue.get()
        if message is not None:
            owner = self.balancer.lookup(message.key)
            if owner == self.reducer_id:
                self.state = self.reducer.reduce(self.state, message)
                self.processed += 1
                self.ledger.complete()
            else:
                self.queues[owner].put(Message(message.key, message.value, Origin.FORWARDED))
                self.forwards += 1
            if len(self.queue) == 0:
                self.report()
                reported = True
        if not reported and (self.ticks == 1 or self.ticks % self.report_every == 0):
            self.report()
        return message is not None

    def report(self) -> None:
        self._seq += 1
        self.balancer.report_load(LoadReport(self.reducer_id, len(self.queue), self._seq))


class Pipeline:
    """Wires coordinator, balancer, queues, mappers and reducers for one run."""

    def __init__(
        self,
        items: Sequence[Any],
        config: RunConfig,
        reducer: Reducer[Any] = WORD_COUNT,
        map_fn: Callable[[Any], Iterable[tuple[str, Any]]] = word_pairs,
    ):
        if not items:
            raise ValueError("workload must be non-empty")
        self.items = list(items)
        self.config = config
        self.reducer = reducer
        ring = new_ring(
            config.num_reducers, config.strategy, config.initial_tokens, config.max_tokens_per_node
        )
        self.balancer = LoadBalancer(ring, config.tau, config.max_rounds)
        self.ledger = InFlightLedger()
        self.coordinator = Coordinator(self.items, config.batch_size, config.num_mappers, self.ledger)
        self.queues = [ReducerQueue() for _ in range(config.num_reducers)]
        self.mappers = [
            Mapper(i, self.coordinator, self.balancer, self.queues, map_fn)
            for i in range(config.num_mappers)
        ]
        self.reducers = [
            ReducerActor(i, self.balancer, self.queues, self.ledger, reducer, config.report_every)
            for i in range(config.num_reducers)
        ]
        self.steps: int | None = None

    def run(self) -> RunResult:
        start = time.perf_counter()
        if self.config.mode is Mode.SIM:
            self._run_sim()
            wall_time = None
        else:
            self._run_concurrent()
            wall_time = time.perf_counter() - start
        return self._result(wall_time)

    def _diagnostic(self) -> str:
        return (
            f"in_flight={self.ledger.in_flight} mappers_done={self.ledger.mappers_done} "
            f"queues={[len(q) for q in self.queues]} processed={[r.processed for r in self.reducers]} "
            f"ring={self.balancer.ring!r}"
        )

    def _run_sim(self) -> None:
        rng = random.Random(self.config.seed)
        budget = self.config.max_steps or 1000 * len(self.items) + 10_000
        steps = 0
        while not self.coordinator.check_shutdown():
            if steps >= budget:
                raise DeadlockError(f"no quiescence after {steps} steps: {self._diagnostic()}")
            live_mappers = [m for m in self.mappers if not m.done]
            actor = rng.choice(live_mappers + self.reducers)
            actor.step()
            steps += 1
        self.steps = steps
        log.debug("quiescent after %d steps, ring %r", steps, self.balancer.ring)

    def _run_concurrent(self) -> None:
        errors: list[BaseException] = []
        stop = self.coordinator.stop

        def guard(fn: Callable[[], None]) -> Callable[[], None]:
            def target() -> None:
                try:
                    fn()
                except BaseException as exc:  # surfaced to the caller below
                    errors.append(exc)
                    stop.set()

            return target

        def mapper_loop(m: Mapper) -> None:
            while not stop.is_set() and m.step():
                pass

        def reducer_loop(r: ReducerActor[Any]) -> None:
            while not stop.is_set():
                if not r.step():
                    time.sleep(0.0005)

        threads = [threading.Thread(target=guard(lambda m=m: mapper_loop(m))) for m in self.mappers]
        threads += [threading.Thread(target=guard(lambda r=r: reducer_loop(r))) for r in self.reducers]
        for t in threads:
            t.start()
        try:
            deadline = time.monotonic() + self.config.timeout
            quiet = False
            while not stop.is_set() and time.monotonic() < deadline:
                quiet = self.ledger.wait_quiescent(0.05)
                if quiet:
                    break
            if not errors and not quiet:
                raise DeadlockError(f"no quiescence within {self.config.timeout}s: {self._diagnostic()}")
        finally:
            stop.set()
            for t in threads:
                t.join()
        if errors:
            raise RuntimeError("actor failed during run") from errors[0]

    def _result(self, wall_time: float | None) -> RunResult:
        processed = [r.processed for r in self.reducers]
        merged = merge_states((r.state for r in self.reducers), self.reducer)
        return RunResult(
            processed=processed,
            skew=compute_skew(processed),
            redistributions=self.balancer.redistributions,
            forwards=sum(r.forwards for r in self.reducers),
            counts=merged,
            rounds_used=list(self.balancer.rounds_used),
            noop_rounds=self.balancer.noop_rounds,
            steps=self.steps,
            wall_time=wall_time,
            config=self.config.to_dict(),
        )


def run_pipeline(
    workload: Sequence[Any],
    config: RunConfig | None = None,
    reducer: Reducer[Any] = WORD_COUNT,
    map_fn: Callable[[Any], Iterable[tuple[str, Any]]] = word_pairs,
) -> RunResult:
    return Pipeline(workload, config or RunConfig(), reducer, map_fn).run()
