"""Streaming map-reduce with runtime load balancing of stateful reducers."""

from .balancer import LoadBalancer, LoadReport, should_rebalance
from .metrics import RunResult, compute_skew
from .ring import Ring, Strategy, Token, hash32, new_ring
from .runtime import Message, Mode, RunConfig, WordCount, merge_states, run_pipeline
from .workloads import Builtin, WorkloadSpec, builtin, builtin_workload, synthesize

__version__ = "0.1.0"

__all__ = [
    "Builtin",
    "LoadBalancer",
    "LoadReport",
    "Message",
    "Mode",
    "Ring",
    "RunConfig",
    "RunResult",
    "Strategy",
    "Token",
    "WordCount",
    "WorkloadSpec",
    "builtin",
    "builtin_workload",
    "compute_skew",
    "hash32",
    "merge_states",
    "new_ring",
    "run_pipeline",
    "should_rebalance",
    "synthesize",
]
