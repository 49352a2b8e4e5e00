import random
import string

import pytest

from streamlb.balancer import LoadReport
from streamlb.ring import Strategy
from streamlb.runtime import (
    DeadlockError,
    InFlightLedger,
    Message,
    Mode,
    Origin,
    Pipeline,
    RunConfig,
    WordCount,
    merge_states,
    run_pipeline,
)

from .oracles import sequential_counts


def _pipeline(keys, **kw):
    return Pipeline(keys, RunConfig(**kw))


def test_single_hot_key():
    r = run_pipeline(["a"] * 100, RunConfig(strategy="doubling", max_rounds=3))
    assert r.counts == {"a": 100}
    assert sum(r.processed) == 100


@pytest.mark.parametrize("strategy", list(Strategy))
def test_uniform_workload_without_lb_matches_oracle(strategy):
    keys = [c for c in string.ascii_lowercase for _ in range(4)]
    random.Random(3).shuffle(keys)
    r = run_pipeline(keys, RunConfig(strategy=strategy, max_rounds=0))
    assert r.counts == sequential_counts(keys)
    assert r.forwards == 0
    assert r.redistributions == 0


def test_max_rounds_zero_is_static_partitioning():
    keys = [random.Random(i).choice(string.ascii_lowercase) for i in range(300)]
    p = _pipeline(keys, strategy="halving", max_rounds=0, seed=9)
    r = p.run()
    ring = p.balancer.ring
    expected = [0] * 4
    for k in keys:
        expected[ring.key_lookup(k)] += 1
    assert r.processed == expected
    for rid, actor in enumerate(p.reducers):
        assert all(ring.key_lookup(k) == rid for k in actor.state)


@pytest.mark.parametrize("kw", [dict(num_reducers=1), dict(num_mappers=0), dict(tau=-1), dict(max_rounds=-2)])
def test_rejects_bad_config(kw):
    with pytest.raises(ValueError):
        RunConfig(**kw)


def test_rejects_empty_workload():
    with pytest.raises(ValueError):
        run_pipeline([], RunConfig())


def test_message_key_must_be_non_empty():
    with pytest.raises(ValueError):
        Message("")


class TestMerge:
    def test_pointwise_sum(self):
        assert merge_states([{"a": 3}, {"a": 2, "b": 1}]) == {"a": 5, "b": 1}

    def test_identity(self):
        s = {"x": 4, "y": 1}
        assert merge_states([s, {}]) == s
        assert merge_states([]) == {}

    def test_commutative_and_associative(self):
        wc = WordCount()
        a, b, c = {"a": 1, "b": 2}, {"b": 5}, {"c": 1, "a": 7}
        assert wc.merge(a, b) == wc.merge(b, a)
        assert wc.merge(wc.merge(a, b), c) == wc.merge(a, wc.merge(b, c))


class TestMapper:
    def test_each_key_lands_on_its_owner_queue(self):
        p = _pipeline(["a", "b", "c"], batch_size=3)
        p.mappers[0].step()
        assert sum(len(q) for q in p.queues) == 3
        for k in "abc":
            owner = p.balancer.lookup(k)
            assert any(m.key == k for m in p.queues[owner]._items)
        assert p.ledger.in_flight == 3

    def test_ledger_counts_every_mapped_item(self):
        keys = ["k"] * 100
        p = _pipeline(keys)
        while any(m.step() for m in p.mappers):
            pass
        assert p.ledger.produced == 100
        assert p.ledger.mappers_done

    def test_sends_follow_new_ring_after_redistribution(self):
        keys = [f"w{i}" for i in range(40)]
        p = _pipeline(keys, strategy="doubling", batch_size=40, max_rounds=1)
        lb = p.balancer
        for rid, q in enumerate([0, 30, 0, 0]):
            lb.report_load(LoadReport(rid, q, 1))
        assert lb.redistributions == 1
        p.mappers[0].step()
        for rid, q in enumerate(p.queues):
            assert all(lb.ring.key_lookup(m.key) == rid for m in q._items)


class TestReducer:
    def test_owned_key_is_reduced(self):
        p = _pipeline(["a"])
        owner = p.balancer.lookup("a")
        p.ledger.produce()
        p.queues[owner].put(Message("a"))
        p.reducers[owner].step()
        assert p.reducers[owner].processed == 1
        assert p.reducers[owner].state == {"a": 1}
        assert p.ledger.in_flight == 0

    def test_foreign_key_is_forwarded_once(self):
        p = _pipeline(["a"])
        owner = p.balancer.lookup("a")
        other = (owner + 1) % 4
        p.ledger.produce()
        p.queues[other].put(Message("a"))
        p.reducers[other].step()
        assert p.reducers[other].processed == 0
        assert p.reducers[other].forwards == 1
        assert p.ledger.in_flight == 1
        [fwd] = list(p.queues[owner]._items)
        assert fwd.origin is Origin.FORWARDED and fwd.key == "a"
        p.reducers[owner].step()
        assert p.reducers[owner].processed == 1
        assert p.reducers[owner].forwards == 0

    def test_idle_reducer_keeps_polling_and_reports(self):
        p = _pipeline(["a"], report_every=3)
        r = p.reducers[0]
        for _ in range(6):
            assert r.step() is False
        # first tick, then ticks 3 and 6
        assert p.balancer.latest[0].seq == 3
        owner = p.balancer.lookup("a")
        p.ledger.produce()
        p.queues[owner].put(Message("a", origin=Origin.FORWARDED))
        assert p.reducers[owner].step() is True

    def test_reports_when_queue_drains(self):
        p = _pipeline(["a"], report_every=100)
        owner = p.balancer.lookup("a")
        r = p.reducers[owner]
        r.step()
        assert p.balancer.latest[owner].seq == 1
        for _ in range(3):
            p.ledger.produce()
            p.queues[owner].put(Message("a"))
        r.step()
        r.step()
        assert p.balancer.latest[owner].seq == 1
        r.step()
        assert p.balancer.latest[owner] == LoadReport(owner, 0, 2)


class TestLedger:
    def test_cannot_complete_more_than_produced(self):
        ledger = InFlightLedger()
        with pytest.raises(RuntimeError):
            ledger.complete()

    def test_quiescence(self):
        ledger = InFlightLedger()
        ledger.produce()
        ledger.finish_mapping()
        assert not ledger.quiescent
        ledger.complete()
        assert ledger.quiescent
        assert ledger.wait_quiescent(0.01)


def test_step_budget_exhaustion_is_reported():
    with pytest.raises(DeadlockError, match="in_flight"):
        run_pipeline(["a"] * 50, RunConfig(max_steps=10))


def _random_workload(rng):
    alphabet = string.ascii_lowercase[: rng.randint(1, 26)]
    weights = [rng.random() ** 3 for _ in alphabet]
    return rng.choices(alphabet, weights, k=rng.randint(1, 150))


@pytest.mark.parametrize("seed", range(30))
def test_exactly_once_with_redistribution(seed):
    rng = random.Random(seed)
    keys = _random_workload(rng)
    config = RunConfig(
        strategy=rng.choice(list(Strategy)),
        max_rounds=rng.randint(0, 4),
        seed=seed,
        tau=rng.choice([0.0, 0.2, 1.0]),
        num_mappers=rng.randint(1, 5),
        num_reducers=rng.randint(2, 6),
        batch_size=rng.randint(1, 8),
    )
    r = run_pipeline(keys, config)
    assert r.counts == sequential_counts(keys)
    assert sum(r.processed) == len(keys)
    assert r.redistributions + r.noop_rounds <= config.num_reducers * config.max_rounds
    assert r.forwards <= len(keys) * (1 + r.redistributions)
    if config.max_rounds == 0:
        assert r.forwards == 0


def test_sim_is_replayable():
    keys = _random_workload(random.Random(1))
    a = run_pipeline(keys, RunConfig(strategy="doubling", max_rounds=3, seed=5))
    b = run_pipeline(keys, RunConfig(strategy="doubling", max_rounds=3, seed=5))
    assert a == b


def test_forwarded_messages_are_reduced_by_the_new_owner():
    # everything starts on one reducer; doubling moves some keys away mid-run
    p = _pipeline(list("beiopu") * 20, strategy="doubling", max_rounds=1, seed=42)
    r = p.run()
    assert r.redistributions == 1
    assert r.forwards > 0
    final = p.balancer.ring
    moved = [k for k in "beiopu" if final.key_lookup(k) != 1]
    assert moved
    for k in moved:
        assert k in p.reducers[final.key_lookup(k)].state


@pytest.mark.parametrize("strategy", list(Strategy))
def test_concurrent_mode_is_correct(strategy):
    keys = _random_workload(random.Random(11)) * 3
    for seed in range(3):
        r = run_pipeline(keys, RunConfig(strategy=strategy, max_rounds=2, mode=Mode.CONCURRENT, seed=seed, timeout=30))
        assert r.counts == sequential_counts(keys)
        assert sum(r.processed) == len(keys)
        assert r.wall_time is not None and r.steps is None


def test_concurrent_mode_surfaces_actor_failures():
    def boom(item):
        raise KeyError(item)

    with pytest.raises(RuntimeError, match="actor failed"):
        run_pipeline(["a", "b"], RunConfig(mode="concurrent"), map_fn=boom)


def test_custom_reducer_and_map_fn():
    class Longest:
        def init(self):
            return {}

        def reduce(self, state, message):
            state[message.key] = max(state.get(message.key, 0), message.value)
            return state

        def merge(self, a, b):
            return {k: max(a.get(k, 0), b.get(k, 0)) for k in a.keys() | b.keys()}

    lines = ["the quick fox", "a quicker dog", "the end"]

    def first_letters(line):
        for w in line.split():
            yield w[0], len(w)

    r = run_pipeline(lines, RunConfig(strategy="doubling", max_rounds=2), reducer=Longest(), map_fn=first_letters)
    assert r.counts == {"t": 3, "q": 7, "f": 3, "a": 1, "d": 3, "e": 3}
    assert sum(r.processed) == 8


def test_concurrent_timeout_is_reported_as_deadlock():
    import time

    def slow(item):
        time.sleep(0.5)
        yield item, 1

    with pytest.raises(DeadlockError, match="no quiescence"):
        run_pipeline(["a", "b"], RunConfig(mode="concurrent", timeout=0.1), map_fn=slow)
