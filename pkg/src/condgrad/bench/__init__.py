"""Benchmark harness: experiment registry, runner, CLI, and SVG plots."""

from .experiments import (
    REGISTRY,
    ExperimentResult,
    ExperimentSpec,
    ingest_movielens,
    list_experiments,
    make_spec,
    run_experiment,
    synthetic_lowrank,
)

__all__ = [
    "REGISTRY",
    "ExperimentResult",
    "ExperimentSpec",
    "ingest_movielens",
    "list_experiments",
    "make_spec",
    "run_experiment",
    "synthetic_lowrank",
]
