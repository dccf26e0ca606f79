"""Convergence metrics, step-size bounds, stationarity classification,
and the one-round update map's Jacobian diagnostics.

The two convergence metrics tracked during runs are

* consensus error: norm of the stacked iterate minus its per-agent
  average, ``||x - mean(x)||``;
* average gradient norm: norm of the stacked average gradient,
  ``sqrt(m) * ||mean_i grad f_i(x_i)||``.

Classification of a stacked point proceeds through consensus, summed
first-order stationarity, and the sign of the smallest eigenvalue of the
summed Hessian, with explicit tolerances for each stage.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ParameterError
from .mixing import MixingPair
from .objectives import ObjectiveSet
from .records import MetricSample

LABEL_NONCONSENSUAL = "nonconsensual"
LABEL_CONSENSUAL_NONSTATIONARY = "consensual_nonstationary"
LABEL_FIRST_ORDER = "consensual_first_order"
LABEL_SECOND_ORDER = "consensual_second_order"
LABEL_STRICT_SADDLE = "consensual_strict_saddle"
LABELS = (
    LABEL_NONCONSENSUAL,
    LABEL_CONSENSUAL_NONSTATIONARY,
    LABEL_FIRST_ORDER,
    LABEL_SECOND_ORDER,
    LABEL_STRICT_SADDLE,
)

DEFAULT_TOL_CONSENSUS = 1e-6
DEFAULT_TOL_GRAD = 1e-6
DEFAULT_TOL_EIG = 1e-8


def consensus_error(x: np.ndarray) -> float:
    """Norm of the consensus residual: each block minus the block average."""
    x = np.asarray(x, dtype=float)
    return float(np.linalg.norm(x - x.mean(axis=0, keepdims=True)))


def avg_gradient_norm(obj: ObjectiveSet, x: np.ndarray) -> float:
    """Norm of the stacked average gradient (all m blocks equal the mean)."""
    g_bar = obj.stacked_gradient(x).mean(axis=0)
    return float(np.sqrt(obj.m) * np.linalg.norm(g_bar))


def step_bound_thm1(lambda1_P: float, L_F: float) -> float:
    """First-order step-size bound: (1 - lambda1(P)^2) / (6L^4 + 6L^3 + 48L + 1)."""
    if not (0.0 <= lambda1_P < 1.0):
        raise ParameterError(f"lambda1(P) must lie in [0, 1), got {lambda1_P}")
    if L_F <= 0.0:
        raise ParameterError(f"L_F must be positive, got {L_F}")
    return (1.0 - lambda1_P**2) / (6.0 * L_F**4 + 6.0 * L_F**3 + 48.0 * L_F + 1.0)


def step_bound_thm2(lambda1_P: float, L_F: float, lambda_min_V: float) -> float:
    """Saddle-avoidance bound: the first-order bound capped by lambda_min(V)/L_F."""
    if lambda_min_V <= 0.0:
        raise ParameterError(f"lambda_min(V) must be positive, got {lambda_min_V}")
    return min(step_bound_thm1(lambda1_P, L_F), lambda_min_V / L_F)


@dataclass(frozen=True)
class StationarityVerdict:
    """Classification of a stacked point with its numeric witnesses."""

    label: str
    consensus_residual: float
    sum_grad_norm: float
    avg_grad_norm: float
    lambda_min_sum_hessian: float


def classify_point(
    obj: ObjectiveSet,
    x: np.ndarray,
    tol_consensus: float = DEFAULT_TOL_CONSENSUS,
    tol_grad: float = DEFAULT_TOL_GRAD,
    tol_eig: float = DEFAULT_TOL_EIG,
) -> StationarityVerdict:
    """Classify a stacked point as the strongest stationarity label it earns.

    Checks run in order: consensus residual against ``tol_consensus``, then
    the norm of the summed per-agent gradients against ``tol_grad``, then
    the smallest eigenvalue of the summed Hessians against ``-tol_eig``
    (at or above: second order, inclusive semidefiniteness; below: strict
    saddle). A verdict with all witnesses is always produced.
    """
    if tol_consensus <= 0.0 or tol_grad <= 0.0 or tol_eig <= 0.0:
        raise ParameterError("classification tolerances must be positive")
    x = np.asarray(x, dtype=float)
    grads = obj.stacked_gradient(x)
    residual = consensus_error(x)
    sum_grad = float(np.linalg.norm(grads.sum(axis=0)))
    avg_grad = float(np.sqrt(obj.m) * np.linalg.norm(grads.mean(axis=0)))
    hess_sum = sum(f.hessian(xi) for f, xi in zip(obj.locals, x))
    lam_min = float(np.linalg.eigvalsh(hess_sum)[0])

    if residual > tol_consensus:
        label = LABEL_NONCONSENSUAL
    elif sum_grad > tol_grad:
        label = LABEL_CONSENSUAL_NONSTATIONARY
    elif lam_min >= -tol_eig:
        label = LABEL_SECOND_ORDER
    else:
        label = LABEL_STRICT_SADDLE
    return StationarityVerdict(
        label=label,
        consensus_residual=residual,
        sum_grad_norm=sum_grad,
        avg_grad_norm=avg_grad,
        lambda_min_sum_hessian=lam_min,
    )


def t_map_jacobian(
    obj: ObjectiveSet, x: np.ndarray, alpha: float, pair: MixingPair
) -> np.ndarray:
    """Jacobian of the one-round update map at (x, .):

        [[W kron I - alpha * hess F(x),  I],
         [W kron I - V kron I,           I]]

    (2mn x 2mn). The map's second component is linear, so the Jacobian does
    not depend on the companion variable.
    """
    n = obj.n
    Wh = np.kron(pair.W, np.eye(n))
    Vh = np.kron(pair.V, np.eye(n))
    HF = obj.stacked_hessian(x)
    I = np.eye(obj.m * n)
    return np.block([[Wh - alpha * HF, I], [Wh - Vh, I]])


@dataclass(frozen=True)
class Lemma4Certificate:
    det: float
    invertible: bool


def lemma4_certificate(
    obj: ObjectiveSet, x: np.ndarray, alpha: float, pair: MixingPair
) -> Lemma4Certificate:
    """Invertibility certificate of the update map's Jacobian.

    By Schur reduction the Jacobian's determinant equals
    ``det(V kron I - alpha * hess F(x))``; that determinant is computed
    here and tested against a scale-aware threshold (1e-12 times the
    product of row norms, a Hadamard-style bound on the determinant's
    magnitude).
    """
    if alpha <= 0.0:
        raise ParameterError(f"step size must be positive, got {alpha}")
    n = obj.n
    M = np.kron(pair.V, np.eye(n)) - alpha * obj.stacked_hessian(x)
    det = float(np.linalg.det(M))
    row_norms = np.linalg.norm(M, axis=1)
    scale = float(np.prod(row_norms))
    return Lemma4Certificate(det=det, invertible=abs(det) > 1e-12 * scale)


@dataclass(frozen=True)
class RateSummary:
    partial_sums_bounded: bool
    loglog_slope: float


@dataclass(frozen=True)
class CesaroRates:
    consensus_error: RateSummary
    avg_grad_norm: RateSummary


def _rate_summary(ks: np.ndarray, values: np.ndarray) -> RateSummary:
    squared = values**2
    sums = np.cumsum(squared)
    k_final = int(ks[-1])
    half_pos = int(np.searchsorted(ks, k_final // 2))
    half_pos = min(half_pos, len(ks) - 1)
    bounded = bool(sums[-1] - sums[half_pos] <= 0.05 * sums[-1])

    tail = slice(len(ks) // 2, None)
    running_avg = sums[tail] / ks[tail]
    if np.any(running_avg <= 0.0):
        slope = float("-inf")
    else:
        slope = float(np.polyfit(np.log(ks[tail]), np.log(running_avg), 1)[0])
    return RateSummary(partial_sums_bounded=bounded, loglog_slope=slope)


def cesaro_rates(series: Sequence[MetricSample]) -> CesaroRates:
    """Running-average (Cesaro) diagnostics of a metric series.

    For the squared consensus error and squared average gradient norm this
    reports whether the partial sums have plateaued (the second half
    contributes under 5% of the total) and the log-log slope of the
    running average over the second half of the iterations; a series that
    is exactly zero on the fit window reports a slope of -inf.
    """
    if len(series) < 50:
        raise ParameterError(f"need at least 50 samples, got {len(series)}")
    ks = np.array([s.k for s in series], dtype=float)
    cons = np.array([s.consensus_error for s in series])
    grad = np.array([s.avg_grad_norm for s in series])
    return CesaroRates(
        consensus_error=_rate_summary(ks, cons),
        avg_grad_norm=_rate_summary(ks, grad),
    )
