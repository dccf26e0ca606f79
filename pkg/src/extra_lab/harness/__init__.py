"""Experiment harness: config files, runners, persistence, CLI."""

from .config import ExperimentConfig, load_config
from .runner import (
    build_instance,
    emit_outputs,
    reproduce_fig1,
    run_monte_carlo,
    run_single,
)

__all__ = [
    "ExperimentConfig",
    "load_config",
    "build_instance",
    "run_single",
    "run_monte_carlo",
    "reproduce_fig1",
    "emit_outputs",
]
