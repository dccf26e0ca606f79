"""Local objectives, their stacked aggregate, and concrete instances.

A stacked point is an (m, n) array: row i is agent i's local copy of the
n-dimensional decision variable. The aggregate objective evaluates each
agent's function on its own row; its Hessian is therefore block diagonal.

Shipped instances:

* per-agent quadratics 0.5*x'Ax + b'x with explicit matrices;
* the scalar bilinear logistic regression used in the experiments
  (decision variable (x, X), one labeled sample per agent, ridge
  regularizer) -- a non-convex problem with two symmetric minimizers
  and a strict saddle at the origin;
* identical double-well quartics, whose consensual origin is a strict
  saddle at which every per-agent gradient vanishes exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np
from scipy.special import expit

from . import rng
from .errors import ParameterError, ShapeError


class LocalObjective(Protocol):
    """Value/gradient/Hessian oracle for one agent's smooth function."""

    n: int

    def value(self, x: np.ndarray) -> float: ...

    def gradient(self, x: np.ndarray) -> np.ndarray: ...

    def hessian(self, x: np.ndarray) -> np.ndarray: ...

    def smoothness_bound(self, radius: float) -> float: ...


@dataclass(frozen=True)
class Quadratic:
    """f(x) = 0.5 x'Ax + b'x + c with symmetric A."""

    A: np.ndarray
    b: np.ndarray
    c: float = 0.0

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if A.shape[0] != A.shape[1] or A.shape[0] != b.shape[0]:
            raise ShapeError(f"quadratic shapes disagree: A {A.shape}, b {b.shape}")
        if np.abs(A - A.T).max() > 1e-10:
            raise ShapeError("quadratic matrix must be symmetric")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return self.b.shape[0]

    def value(self, x):
        return float(0.5 * x @ self.A @ x + self.b @ x + self.c)

    def gradient(self, x):
        return self.A @ x + self.b

    def hessian(self, x):
        return self.A.copy()

    def smoothness_bound(self, radius: float) -> float:
        # constant Hessian: the radius is irrelevant
        return float(np.abs(np.linalg.eigvalsh(self.A)).max())


@dataclass(frozen=True)
class BilinearLogisticLocal:
    """One agent's term of the scalar bilinear logistic regression.

    With decision variable p = (x, X), label zeta in {-1, +1}, feature xi,
    and s = zeta * xi:

        f(p) = (1/m) ln(1 + exp(-s x X)) + (eta / 2m) (x^2 + X^2).

    Gradient and Hessian are analytic; n = 2.
    """

    zeta: float
    xi: float
    eta: float
    m: int

    n = 2

    @property
    def s(self) -> float:
        return self.zeta * self.xi

    def value(self, p):
        x, X = p
        u = x * X
        reg = 0.5 * self.eta / self.m * (x * x + X * X)
        return float(np.logaddexp(0.0, -self.s * u) / self.m + reg)

    def _du(self, u: float) -> tuple[float, float]:
        # first and second derivative of (1/m) ln(1 + exp(-s u)) in u
        a = expit(-self.s * u)
        d1 = -(self.s / self.m) * a
        d2 = (self.s * self.s / self.m) * a * (1.0 - a)
        return float(d1), float(d2)

    def gradient(self, p):
        x, X = p
        d1, _ = self._du(x * X)
        r = self.eta / self.m
        return np.array([d1 * X + r * x, d1 * x + r * X])

    def hessian(self, p):
        x, X = p
        d1, d2 = self._du(x * X)
        r = self.eta / self.m
        off = d2 * x * X + d1
        return np.array([[d2 * X * X + r, off], [off, d2 * x * x + r]])

    def smoothness_bound(self, radius: float) -> float:
        """Estimated gradient-Lipschitz constant on the ball of given radius.

        The Hessian norm is sampled on a deterministic polar grid and
        inflated by 1.5; no closed-form global bound exists because the
        curvature grows with the ball radius.
        """
        radii = np.linspace(0.0, radius, 33)
        angles = np.linspace(0.0, 2.0 * np.pi, 65)
        r, phi = np.meshgrid(radii, angles)
        x = (r * np.cos(phi)).ravel()
        X = (r * np.sin(phi)).ravel()
        u = x * X
        a = expit(-self.s * u)
        d1 = -(self.s / self.m) * a
        d2 = (self.s * self.s / self.m) * a * (1.0 - a)
        reg = self.eta / self.m
        h11 = d2 * X * X + reg
        h22 = d2 * x * x + reg
        h12 = d2 * x * X + d1
        # spectral norm of a symmetric 2x2: |mean| + half-spread
        mean = 0.5 * (h11 + h22)
        spread = np.sqrt(0.25 * (h11 - h22) ** 2 + h12 * h12)
        norms = np.abs(mean) + spread
        return 1.5 * float(norms.max())


@dataclass(frozen=True)
class DoubleWell:
    """f(x) = sum_j (x_j^4 / 4 - x_j^2 / 2): minima at +-1, strict saddle at 0."""

    n: int = 1

    def value(self, x):
        return float(np.sum(0.25 * x**4 - 0.5 * x**2))

    def gradient(self, x):
        return x**3 - x

    def hessian(self, x):
        return np.diag(3.0 * x**2 - 1.0)

    def smoothness_bound(self, radius: float) -> float:
        # exact bound of max_j |3 x_j^2 - 1| over the ball
        return max(1.0, 3.0 * radius * radius - 1.0)


@dataclass(frozen=True)
class BilinearLogisticData:
    """Dataset behind a bilinear logistic instance: one (label, feature) per agent."""

    labels: np.ndarray
    features: np.ndarray
    eta: float
    seed: int

    def __post_init__(self):
        if self.labels.shape != self.features.shape or self.labels.ndim != 1:
            raise ShapeError("labels and features must be 1-d arrays of equal length")
        if not np.all(np.isin(self.labels, (-1.0, 1.0))):
            raise ParameterError("labels must lie in {-1, +1}")

    @property
    def m(self) -> int:
        return self.labels.shape[0]

    def csv_text(self) -> str:
        """Dataset rows as ``i,zeta,xi`` with 1-based agent indices."""
        lines = ["i,zeta,xi"]
        for i, (z, x) in enumerate(zip(self.labels, self.features), start=1):
            lines.append("%d,%.17g,%.17g" % (i, z, x))
        return "\n".join(lines) + "\n"


class ObjectiveSet:
    """m local objectives sharing dimension n, with stacked operations."""

    def __init__(self, locals: Sequence[LocalObjective]):
        if not locals:
            raise ParameterError("objective set needs at least one local function")
        n = locals[0].n
        if any(f.n != n for f in locals):
            raise ShapeError("all local objectives must share dimension n")
        self.locals = tuple(locals)
        self.m = len(self.locals)
        self.n = n

    def _check(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.m, self.n):
            raise ShapeError(f"stacked point must have shape ({self.m}, {self.n}), got {x.shape}")
        return x

    def stacked_value(self, x: np.ndarray) -> float:
        """F(x) = sum_i f_i(x_i) over the rows of x."""
        x = self._check(x)
        return float(sum(f.value(xi) for f, xi in zip(self.locals, x)))

    def stacked_gradient(self, x: np.ndarray) -> np.ndarray:
        """Row i of the result is grad f_i evaluated at row i of x."""
        x = self._check(x)
        out = np.empty_like(x)
        for i, (f, xi) in enumerate(zip(self.locals, x)):
            out[i] = f.gradient(xi)
        return out

    def stacked_hessian(self, x: np.ndarray) -> np.ndarray:
        """Block-diagonal (mn x mn) Hessian; off-diagonal blocks are exactly zero."""
        x = self._check(x)
        n = self.n
        H = np.zeros((self.m * n, self.m * n))
        for i, (f, xi) in enumerate(zip(self.locals, x)):
            H[i * n : (i + 1) * n, i * n : (i + 1) * n] = f.hessian(xi)
        return H

    def sum_hessian(self, point: np.ndarray) -> np.ndarray:
        """sum_i hess f_i at a single shared n-dimensional point."""
        point = np.asarray(point, dtype=float)
        if point.shape != (self.n,):
            raise ShapeError(f"expected point of shape ({self.n},), got {point.shape}")
        return sum(f.hessian(point) for f in self.locals)

    def lipschitz_bound(self, radius: float) -> float:
        """L_F = max_i L_{f_i}; ball-restricted estimate where needed."""
        if radius <= 0.0:
            raise ParameterError(f"radius must be positive, got {radius}")
        return max(f.smoothness_bound(radius) for f in self.locals)


def quadratic_objectives(
    matrices: Sequence[np.ndarray], offsets: Sequence[np.ndarray] | None = None
) -> ObjectiveSet:
    if offsets is None:
        offsets = [np.zeros(np.atleast_2d(A).shape[0]) for A in matrices]
    if len(offsets) != len(matrices):
        raise ShapeError("need one offset per matrix")
    return ObjectiveSet([Quadratic(A, b) for A, b in zip(matrices, offsets)])


def generate_bilinear_logistic(m: int, eta: float, seed: int) -> ObjectiveSet:
    """Random bilinear-logistic instance across m agents.

    Labels are uniform on {-1, +1} and the scalar feature of agent i is
    N(label, 1); agent i's draws come from stream i (1-based) of the seed,
    so the dataset is independent of evaluation order.
    """
    if m < 1:
        raise ParameterError(f"need m >= 1 agents, got {m}")
    if eta <= 0.0:
        raise ParameterError(
            f"regularizer eta must be positive for coercivity, got {eta}"
        )
    labels = np.empty(m)
    features = np.empty(m)
    for i in range(m):
        gen = rng.substream(seed, i + 1)
        labels[i] = rng.rademacher(gen, ())
        features[i] = rng.normal(gen, (), mean=labels[i], std=1.0)
    data = BilinearLogisticData(labels=labels, features=features, eta=eta, seed=seed)
    objset = ObjectiveSet(
        [BilinearLogisticLocal(zeta=z, xi=f, eta=eta, m=m) for z, f in zip(labels, features)]
    )
    objset.data = data
    return objset


def identical_quartic(m: int, n: int = 1) -> ObjectiveSet:
    """m identical double-well copies; the consensual origin is an exact
    fixed point of every solver (all per-agent gradients vanish there)."""
    if m < 1 or n < 1:
        raise ParameterError(f"need m >= 1 and n >= 1, got m={m}, n={n}")
    return ObjectiveSet([DoubleWell(n=n) for _ in range(m)])
