"""Mixing matrices W and V = theta*I + (1-theta)*W, and their spectra.

Validation enforces, in order: the support of W matches the graph, W is
symmetric, the spectrum of W lies in (-1, 1] with 1 a simple eigenvalue
whose eigenvector is the consensus direction, and V is positive definite.
A valid pair always yields a consensus block matrix P with spectral
radius strictly below one; this is asserted at construction.

MixingPair is immutable after construction and safe to share across
threads; the eigensolvers used here keep no shared mutable state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MixingError, ParameterError, ShapeError, GraphError
from .netgraph import NetworkGraph, is_connected

# construction-exactness tolerances
SYMMETRY_TOL = 1e-12
ROWSUM_TOL = 1e-12
# eigenvalue checks (numerically robust restatement of the null-space condition)
EIG_ONE_TOL = 1e-9
EIGVEC_ALIGN_TOL = 1e-6


@dataclass(frozen=True)
class SpectralInfo:
    """Cached spectral facts of a validated pair."""

    w_eigenvalues: np.ndarray  # real, sorted descending
    lambda1_P: float
    lambda_min_V: float


@dataclass(frozen=True)
class MixingPair:
    W: np.ndarray
    V: np.ndarray
    theta: float
    spectral: SpectralInfo

    @property
    def m(self) -> int:
        return self.W.shape[0]


def averaging_matrix(m: int) -> np.ndarray:
    """(1/m) * ones(m, m), the projector onto the consensus direction."""
    return np.full((m, m), 1.0 / m)


def metropolis_weights(g: NetworkGraph) -> np.ndarray:
    """Metropolis-Hastings weights: W_ij = 1/(1 + max(deg_i, deg_j)) on edges.

    Diagonal entries absorb the slack so every row sums to one. The result
    is symmetric, has strictly positive diagonal, and satisfies all
    validation checks for any connected graph.
    """
    if not is_connected(g):
        raise GraphError("metropolis weights require a connected graph")
    m = g.m
    deg = g.degrees
    W = np.zeros((m, m))
    for i, j in g.edges:
        w = 1.0 / (1.0 + max(deg[i], deg[j]))
        W[i, j] = W[j, i] = w
    np.fill_diagonal(W, 1.0 - W.sum(axis=1))
    return W


def lazify(W: np.ndarray, beta: float) -> np.ndarray:
    """Shift the spectrum toward 1: returns beta*I + (1-beta)*W.

    Maps an eigenvalue w to beta + (1-beta)*w, pulling the bottom of the
    spectrum away from -1 while preserving symmetry, row sums, and the
    off-diagonal sparsity pattern.
    """
    if not (0.0 <= beta < 1.0):
        raise ParameterError(f"lazify needs beta in [0, 1), got {beta}")
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ShapeError(f"expected square matrix, got shape {W.shape}")
    if np.abs(W - W.T).max() > SYMMETRY_TOL:
        raise MixingError("symmetry", "lazify input must be symmetric")
    if np.abs(W.sum(axis=1) - 1.0).max() > ROWSUM_TOL:
        raise MixingError("spectral", "lazify input rows must sum to 1")
    return beta * np.eye(W.shape[0]) + (1.0 - beta) * W


def make_mixing_pair(W: np.ndarray, theta: float, g: NetworkGraph) -> MixingPair:
    """Validate W against the graph, build V, and cache spectral facts."""
    if not (0.0 < theta <= 0.5):
        raise ParameterError(f"theta must lie in (0, 0.5], got {theta}")
    W = np.array(W, dtype=float)
    m = g.m
    if W.shape != (m, m):
        raise ShapeError(f"W has shape {W.shape}, graph has m={m}")

    if np.abs(W - W.T).max() > SYMMETRY_TOL:
        raise MixingError("symmetry", "W is not symmetric")
    for i in range(m):
        for j in range(i + 1, m):
            if W[i, j] != 0.0 and not g.has_edge(i, j):
                raise MixingError(
                    "sparsity",
                    f"W[{i + 1},{j + 1}] = {W[i, j]} but agents {i + 1} and {j + 1} "
                    "are not neighbors",
                )

    w_eigs, w_vecs = np.linalg.eigh(W)
    order = np.argsort(w_eigs)[::-1]
    w_eigs = w_eigs[order]
    w_vecs = w_vecs[:, order]

    if w_eigs[-1] <= -1.0 + EIG_ONE_TOL:
        raise MixingError(
            "spectral", f"smallest eigenvalue of W is {w_eigs[-1]:.6g}, must exceed -1"
        )
    if abs(w_eigs[0] - 1.0) > EIG_ONE_TOL:
        raise MixingError(
            "spectral", f"largest eigenvalue of W is {w_eigs[0]:.6g}, must equal 1"
        )
    if m > 1 and w_eigs[1] > 1.0 - EIG_ONE_TOL:
        raise MixingError(
            "spectral",
            f"eigenvalue 1 of W is repeated (second eigenvalue {w_eigs[1]:.12g}); "
            "the null space of I - W must be exactly the consensus line",
        )
    consensus = np.full(m, 1.0 / np.sqrt(m))
    if abs(float(w_vecs[:, 0] @ consensus)) < 1.0 - EIGVEC_ALIGN_TOL:
        raise MixingError(
            "spectral", "eigenvector of eigenvalue 1 is not the consensus direction"
        )

    V = theta * np.eye(m) + (1.0 - theta) * W
    v_eigs = np.linalg.eigvalsh(V)
    lambda_min_V = float(v_eigs[0])
    if lambda_min_V <= 0.0:
        raise MixingError(
            "positivity", f"V has nonpositive eigenvalue {lambda_min_V:.6g}"
        )

    P = _assemble_P(W, V)
    lambda1_P = spectral_radius(P)
    if not lambda1_P < 1.0:
        raise MixingError(
            "contraction", f"spectral radius of P is {lambda1_P:.12g}, expected < 1"
        )

    return MixingPair(
        W=W,
        V=V,
        theta=theta,
        spectral=SpectralInfo(
            w_eigenvalues=w_eigs, lambda1_P=lambda1_P, lambda_min_V=lambda_min_V
        ),
    )


def _assemble_P(W: np.ndarray, V: np.ndarray) -> np.ndarray:
    m = W.shape[0]
    A = averaging_matrix(m)
    I = np.eye(m)
    return np.block([[W - A, I], [W - V, I - A]])


def build_P(pair: MixingPair) -> np.ndarray:
    """Consensus-error block matrix [[W - avg, I], [W - V, I - avg]] (2m x 2m)."""
    return _assemble_P(pair.W, pair.V)


def spectral_radius(A: np.ndarray) -> float:
    """Largest eigenvalue magnitude of a general real square matrix."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ShapeError(f"expected square matrix, got shape {A.shape}")
    if not np.isfinite(A).all():
        raise ParameterError("matrix has non-finite entries")
    return float(np.abs(np.linalg.eigvals(A)).max())


def matrix_csv_text(A: np.ndarray) -> str:
    """Full dense row-major CSV rendering (17 significant digits)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    return "\n".join(",".join("%.17g" % v for v in row) for row in A) + "\n"
