"""Counter-based random streams with an explicit splitting rule.

All randomness in the package flows through Philox4x64 keyed generators so
that datasets and experiment trials are bit-reproducible regardless of
evaluation order or parallel scheduling.

Splitting rule
--------------
``substream(master_seed, stream)`` keys Philox with the 128-bit key
``(master_seed mod 2^64, stream mod 2^64)``. Conventions used by the
package:

* dataset generation: agent ``i`` (1-based) draws from
  ``substream(dataset_seed, i)``;
* experiment trials: trial ``t`` (0-based) draws from
  ``substream(master_seed, t)``; single (non-Monte-Carlo) runs use
  trial stream 0.

Gaussian variates use the Box-Muller transform on the generator's uniform
stream (a fixed transform, stable across platforms), not the library's
default normal sampler.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def substream(master_seed: int, stream: int) -> np.random.Generator:
    """Independent generator for (master_seed, stream)."""
    key = np.array([master_seed & _MASK64, stream & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def standard_normal(gen: np.random.Generator, shape) -> np.ndarray:
    """N(0,1) draws via Box-Muller pairs on gen's uniform stream."""
    n = int(np.prod(shape)) if np.ndim(shape) else int(shape)
    pairs = (n + 1) // 2
    u1 = 1.0 - gen.random(pairs)  # (0, 1]: keeps log() finite
    u2 = gen.random(pairs)
    radius = np.sqrt(-2.0 * np.log(u1))
    out = np.empty(2 * pairs)
    out[0::2] = radius * np.cos(2.0 * np.pi * u2)
    out[1::2] = radius * np.sin(2.0 * np.pi * u2)
    return out[:n].reshape(shape)


def normal(gen: np.random.Generator, shape, mean: float = 0.0, std: float = 1.0) -> np.ndarray:
    return mean + std * standard_normal(gen, shape)


def uniform(gen: np.random.Generator, shape, lo: float, hi: float) -> np.ndarray:
    return lo + (hi - lo) * gen.random(shape)


def rademacher(gen: np.random.Generator, shape) -> np.ndarray:
    """Uniform +-1 draws."""
    return np.where(gen.random(shape) < 0.5, -1.0, 1.0)
