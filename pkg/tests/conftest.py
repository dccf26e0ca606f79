"""Shared test helpers: finite-difference oracles and instance builders."""

from __future__ import annotations

import numpy as np
import pytest

from extra_lab import (
    complete_graph,
    generate_bilinear_logistic,
    make_mixing_pair,
    metropolis_weights,
    quadratic_objectives,
    ring_graph,
    circulant_regular_graph,
)


def fd_gradient(value_fn, x: np.ndarray) -> np.ndarray:
    """Central-difference gradient with step h_j = 1e-6 * (1 + |x_j|)."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for j in range(x.size):
        h = 1e-6 * (1.0 + abs(x[j]))
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (value_fn(x + e) - value_fn(x - e)) / (2.0 * h)
    return g


def fd_hessian(grad_fn, x: np.ndarray) -> np.ndarray:
    """Central-difference Jacobian of an analytic gradient."""
    x = np.asarray(x, dtype=float)
    n = x.size
    H = np.zeros((n, n))
    for j in range(n):
        h = 1e-6 * (1.0 + abs(x[j]))
        e = np.zeros_like(x)
        e[j] = h
        H[:, j] = (grad_fn(x + e) - grad_fn(x - e)) / (2.0 * h)
    return 0.5 * (H + H.T)


def random_quadratic_set(gen: np.random.Generator, m: int, n: int):
    """Random symmetric positive-definite per-agent quadratics."""
    mats, offs = [], []
    for _ in range(m):
        B = gen.normal(size=(n, n))
        mats.append(B @ B.T + 0.5 * np.eye(n))
        offs.append(gen.normal(size=n))
    return quadratic_objectives(mats, offs)


def sec5_instance(theta: float = 0.5, seed: int = 7, m: int = 20, eta: float = 0.1):
    """The experiment instance: complete graph, Metropolis weights, scalar
    bilinear logistic objectives."""
    g = complete_graph(m)
    pair = make_mixing_pair(metropolis_weights(g), theta, g)
    obj = generate_bilinear_logistic(m, eta, seed)
    return g, pair, obj


def random_graph_for(gen: np.random.Generator, m: int):
    """Random pick among the supported topologies, valid for the given m."""
    choices = ["complete"]
    if m >= 3:
        choices.append("ring")
        d = int(gen.integers(2, m))
        if (m * d) % 2 == 1:
            d -= 1
        if 2 <= d <= m - 1:
            choices.append(("circulant", d))
    pick = choices[int(gen.integers(len(choices)))]
    if pick == "complete":
        return complete_graph(m)
    if pick == "ring":
        return ring_graph(m)
    return circulant_regular_graph(m, pick[1])


def random_instance(gen: np.random.Generator, m=None, kind=None, theta=0.5):
    """Random (graph, pair, objectives) triple over the supported topologies."""
    from extra_lab import make_mixing_pair, metropolis_weights

    m = m if m is not None else int(gen.integers(2, 11))
    g = random_graph_for(gen, m)
    pair = make_mixing_pair(metropolis_weights(g), theta, g)
    kind = kind or ("quadratic" if gen.random() < 0.5 else "bilinear")
    if kind == "quadratic":
        obj = random_quadratic_set(gen, m, int(gen.integers(1, 4)))
    else:
        obj = generate_bilinear_logistic(m, 0.1, seed=int(gen.integers(10_000)))
    return g, pair, obj


def mixing_contraction_sweep(count: int = 50, seed: int = 99):
    """Randomized valid mixing pairs over the sampled grid
    (m in 2..20, topologies ring/circulant/complete, theta in
    {0.05, 0.25, 0.5}, optional lazify beta in {0, 0.3}).

    Combinations where V loses positive definiteness (possible at small
    theta on graphs whose weight spectrum dips low) are not valid pairs
    and are redrawn.
    """
    from extra_lab import lazify, make_mixing_pair, metropolis_weights
    from extra_lab.errors import MixingError

    gen = np.random.default_rng(seed)
    thetas = (0.05, 0.25, 0.5)
    betas = (0.0, 0.3)
    out = []
    while len(out) < count:
        m = int(gen.integers(2, 21))
        g = random_graph_for(gen, m)
        theta = thetas[int(gen.integers(3))]
        beta = betas[int(gen.integers(2))]
        W = metropolis_weights(g)
        if beta > 0.0:
            W = lazify(W, beta)
        try:
            pair = make_mixing_pair(W, theta, g)
        except MixingError:
            continue
        out.append(
            (f"case {len(out)}: m={m} theta={theta} beta={beta}", pair.spectral.lambda1_P)
        )
    return out


@pytest.fixture(scope="session")
def sec5():
    return sec5_instance()
