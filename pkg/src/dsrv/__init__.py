"""Decentralized stream runtime verification over timed asynchronous networks."""

from .analysis import UNBOUNDED, memory_bound, mtr, mtr_aeternal, mtr_exact, mtr_temporary, prune_horizon, ttr_sync
from .graphs import build_dependency_graph, classify, classify_spec
from .monitor import SimulationStalled, run
from .netsim import DelayModel, constant, constant_peak, normal, normal_peak
from .oracle import Valuation, evaluate
from .specdsl import EvaluationError, SpecError, format_spec, load, parse

__all__ = [
    "UNBOUNDED",
    "DelayModel",
    "EvaluationError",
    "SimulationStalled",
    "SpecError",
    "Valuation",
    "build_dependency_graph",
    "classify",
    "classify_spec",
    "constant",
    "constant_peak",
    "evaluate",
    "format_spec",
    "load",
    "memory_bound",
    "mtr",
    "mtr_aeternal",
    "mtr_exact",
    "mtr_temporary",
    "normal",
    "normal_peak",
    "parse",
    "prune_horizon",
    "run",
    "ttr_sync",
]
