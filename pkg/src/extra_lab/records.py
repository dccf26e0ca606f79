"""Run records: per-iteration metric series plus run metadata.

CSV output uses 17 significant digits so that repeated runs with the same
seed produce byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from typing import TYPE_CHECKING, Any

import numpy as np

if TYPE_CHECKING:  # pragma: no cover
    from .analysis import StationarityVerdict

CSV_HEADER = "k,consensus_error,avg_grad_norm,objective,dist_to_targets"


def _fmt(x: float) -> str:
    return "%.17g" % x


@dataclass(frozen=True)
class MetricSample:
    """Metrics observed at one iteration of a run."""

    k: int
    consensus_error: float
    avg_grad_norm: float
    objective: float
    dist_to_targets: float | None = None

    def csv_row(self) -> str:
        dist = "" if self.dist_to_targets is None else _fmt(self.dist_to_targets)
        return ",".join(
            (
                str(self.k),
                _fmt(self.consensus_error),
                _fmt(self.avg_grad_norm),
                _fmt(self.objective),
                dist,
            )
        )


@dataclass
class RunRecord:
    """Everything produced by one solver run."""

    series: list[MetricSample] = field(default_factory=list)
    config: dict[str, Any] = field(default_factory=dict)
    seed: int | None = None
    verdict: "StationarityVerdict | None" = None
    wall_time: float = 0.0
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def final_sample(self) -> MetricSample | None:
        return self.series[-1] if self.series else None

    def csv_text(self) -> str:
        lines = [CSV_HEADER]
        lines.extend(s.csv_row() for s in self.series)
        return "\n".join(lines) + "\n"

    def meta_dict(self) -> dict[str, Any]:
        meta: dict[str, Any] = {
            "config": self.config,
            "seed": self.seed,
            "iterations_recorded": len(self.series),
            "wall_time_seconds": self.wall_time,
        }
        meta.update(_jsonable(self.metadata))
        if self.verdict is not None:
            meta["verdict"] = _jsonable(asdict(self.verdict))
        return meta

    def meta_json(self) -> str:
        return json.dumps(self.meta_dict(), indent=2, sort_keys=True) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj
