"""Adaptive evaluation of creative x target-audience combinations.

A contextual Thompson Sampler learns over disjoint audience cells, aggregates
its posterior to (possibly overlapping) target audiences, and stops on the
potential value remaining in every audience.
"""

from .aggregate import StopReport, aggregate_lambda, compute_ppvr, stop_report
from .audience import Partition, PopulationModel, assign_context, build_partition, overlap_geometry
from .engine import RunTrace, TestConfig, run_test
from .environment import Environment
from .policy import EconomicParams, Policy
from .posterior import BatchOutcome, PosteriorState, init_posterior, update_posterior

__all__ = [
    "BatchOutcome",
    "EconomicParams",
    "Environment",
    "Partition",
    "Policy",
    "PopulationModel",
    "PosteriorState",
    "RunTrace",
    "StopReport",
    "TestConfig",
    "aggregate_lambda",
    "assign_context",
    "build_partition",
    "compute_ppvr",
    "init_posterior",
    "overlap_geometry",
    "run_test",
    "stop_report",
    "update_posterior",
]
