"""Critical points of the aggregate objective f(p) = sum_i f_i(p).

Minimizers and strict saddles are located by deterministic multi-start
root finding on the aggregate gradient and classified by the sign of the
smallest eigenvalue of the aggregate Hessian. They serve as the target
sets for distance metrics and for the Monte-Carlo trial classification.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np
from scipy.optimize import root

from ..objectives import ObjectiveSet

GRAD_TOL = 1e-9
EIG_TOL = 1e-8
DEDUP_TOL = 1e-6


@dataclass(frozen=True)
class CriticalPoint:
    point: np.ndarray
    kind: str  # "minimizer" | "strict_saddle" | "degenerate"
    value: float
    grad_norm: float
    lambda_min: float


@dataclass(frozen=True)
class TargetSet:
    minimizers: tuple[CriticalPoint, ...]
    saddles: tuple[CriticalPoint, ...]

    def stacked_distance(self, x: np.ndarray, kind: str = "minimizer") -> float:
        """Distance from a stacked (m, n) iterate to the nearest consensual
        copy of a target of the given kind; inf when no such target."""
        targets = self.minimizers if kind == "minimizer" else self.saddles
        if not targets:
            return float("inf")
        m = x.shape[0]
        return min(
            float(np.linalg.norm(x - np.tile(t.point, (m, 1)))) for t in targets
        )

    def agent_distance(self, x: np.ndarray, agent: int, kind: str = "minimizer") -> float:
        """Distance from one agent's iterate (0-based row) to the nearest target."""
        targets = self.minimizers if kind == "minimizer" else self.saddles
        if not targets:
            return float("inf")
        return min(float(np.linalg.norm(x[agent] - t.point)) for t in targets)


def aggregate_value(obj: ObjectiveSet, p: np.ndarray) -> float:
    return float(sum(f.value(p) for f in obj.locals))


def aggregate_gradient(obj: ObjectiveSet, p: np.ndarray) -> np.ndarray:
    return sum(f.gradient(p) for f in obj.locals)


def _start_points(n: int, span: float, per_axis: int) -> list[np.ndarray]:
    if n <= 2:
        axis = np.linspace(-span, span, per_axis)
        return [np.array(p, dtype=float) for p in product(axis, repeat=n)]
    # higher dimensions: origin, signed axis points, and the diagonal
    starts = [np.zeros(n)]
    for j in range(n):
        for s in (-span, span):
            e = np.zeros(n)
            e[j] = s
            starts.append(e)
    starts.append(np.full(n, span))
    starts.append(np.full(n, -span))
    return starts


def find_targets(obj: ObjectiveSet, span: float = 3.0, per_axis: int = 5) -> TargetSet:
    """Locate critical points of the aggregate objective by multi-start
    root finding on its gradient (deterministic start grid)."""
    n = obj.n
    found: list[CriticalPoint] = []
    for p0 in _start_points(n, span, per_axis):
        sol = root(
            lambda p: aggregate_gradient(obj, p),
            p0,
            jac=lambda p: obj.sum_hessian(p),
            method="hybr",
            tol=1e-13,
        )
        p = sol.x
        if float(np.linalg.norm(aggregate_gradient(obj, p))) > GRAD_TOL:
            continue
        if any(np.linalg.norm(p - c.point) < DEDUP_TOL for c in found):
            continue
        lam_min = float(np.linalg.eigvalsh(obj.sum_hessian(p))[0])
        if lam_min > EIG_TOL:
            kind = "minimizer"
        elif lam_min < -EIG_TOL:
            kind = "strict_saddle"
        else:
            kind = "degenerate"
        found.append(
            CriticalPoint(
                point=p,
                kind=kind,
                value=aggregate_value(obj, p),
                grad_norm=float(np.linalg.norm(aggregate_gradient(obj, p))),
                lambda_min=lam_min,
            )
        )
    found.sort(key=lambda c: (c.value, tuple(c.point)))
    return TargetSet(
        minimizers=tuple(c for c in found if c.kind == "minimizer"),
        saddles=tuple(c for c in found if c.kind == "strict_saddle"),
    )


def saddle_directions(obj: ObjectiveSet, saddle: CriticalPoint) -> tuple[np.ndarray, np.ndarray]:
    """(stable, unstable) unit eigendirections of the aggregate Hessian at a
    strict saddle: the most-positive and most-negative curvature directions."""
    H = obj.sum_hessian(saddle.point)
    eigvals, eigvecs = np.linalg.eigh(H)
    return eigvecs[:, -1].copy(), eigvecs[:, 0].copy()
