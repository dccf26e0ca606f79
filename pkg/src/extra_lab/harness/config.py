"""Experiment configuration: TOML files with a strict schema.

Unknown keys anywhere in the file are errors (no silent typo acceptance),
and every validation failure names the offending dotted key.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..errors import ConfigError

GRAPH_KINDS = ("complete", "ring", "circulant")
OBJECTIVE_KINDS = ("bilinear_logistic", "quadratic", "identical_quartic")
SOLVER_KINDS = ("extra_recurrence", "extra_dynamical", "extra_jacobi", "dgd")
ALPHA_MODES = ("fixed", "theoretical_thm1", "theoretical_thm2", "diminishing")
INIT_KINDS = ("gaussian", "uniform")


class _Section:
    """Tracks key consumption so leftovers can be reported as unknown."""

    def __init__(self, table: dict[str, Any], prefix: str):
        if not isinstance(table, dict):
            raise ConfigError(f"section '{prefix}' must be a table")
        self.table = dict(table)
        self.prefix = prefix

    def take(self, key, types, required=False, default=None):
        if key not in self.table:
            if required:
                raise ConfigError(f"missing required key '{self._dot(key)}'")
            return default
        value = self.table.pop(key)
        if types is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if not isinstance(value, types) or isinstance(value, bool) and types is not bool:
            raise ConfigError(
                f"key '{self._dot(key)}' has wrong type {type(value).__name__}"
            )
        return value

    def subsection(self, key) -> "_Section | None":
        if key not in self.table:
            return None
        return _Section(self.table.pop(key), self._dot(key))

    def finish(self):
        if self.table:
            key = sorted(self.table)[0]
            raise ConfigError(f"unknown key '{self._dot(key)}'")

    def _dot(self, key: str) -> str:
        return f"{self.prefix}.{key}" if self.prefix else key


def _fail(key: str, message: str):
    raise ConfigError(f"{key}: {message}")


@dataclass(frozen=True)
class GraphSpec:
    kind: str
    m: int
    degree: int | None = None


@dataclass(frozen=True)
class MixingSpec:
    scheme: str = "metropolis"
    theta: float = 0.5
    lazify_beta: float | None = None


@dataclass(frozen=True)
class ObjectiveSpec:
    kind: str
    eta: float = 0.1
    seed: int = 7
    lipschitz_radius: float = 5.0
    n: int = 1
    matrices: tuple | None = None
    offsets: tuple | None = None


@dataclass(frozen=True)
class SolverSpec:
    kind: str
    alpha_mode: str
    iters: int
    alpha: float | None = None
    a: float | None = None
    b: float | None = None


@dataclass(frozen=True)
class InitSpec:
    kind: str = "gaussian"
    mean: float = 0.0
    std: float = 1.0
    lo: float = -1.0
    hi: float = 1.0


@dataclass(frozen=True)
class MetricsSpec:
    consensus_error: bool = True
    avg_grad_norm: bool = True
    objective: bool = True
    dist_to_targets: bool = True
    dist_agent: int | None = None  # 1-based; None means stacked distance


@dataclass(frozen=True)
class AnalysisSpec:
    tol_consensus: float = 1e-6
    tol_grad: float = 1e-6
    tol_eig: float = 1e-8


@dataclass(frozen=True)
class MonteCarloSpec:
    trials: int
    master_seed: int
    init: InitSpec
    saddle_tol: float = 1e-3
    conv_tol: float = 1e-3


@dataclass(frozen=True)
class ExperimentConfig:
    graph: GraphSpec
    mixing: MixingSpec
    objective: ObjectiveSpec
    solver: SolverSpec
    init: InitSpec
    metrics: MetricsSpec
    analysis: AnalysisSpec
    seed: int = 0
    output: str | None = None
    monte_carlo: MonteCarloSpec | None = None
    raw: dict = field(default_factory=dict, compare=False)


def _parse_graph(sec: _Section) -> GraphSpec:
    kind = sec.take("kind", str, required=True)
    if kind not in GRAPH_KINDS:
        _fail("graph.kind", f"must be one of {GRAPH_KINDS}, got {kind!r}")
    m = sec.take("m", int, required=True)
    if m < 1:
        _fail("graph.m", f"must be a positive integer, got {m}")
    degree = sec.take("degree", int)
    if kind == "circulant" and degree is None:
        _fail("graph.degree", "required for circulant graphs")
    if kind != "circulant" and degree is not None:
        _fail("graph.degree", f"only valid for circulant graphs, not {kind!r}")
    sec.finish()
    return GraphSpec(kind=kind, m=m, degree=degree)


def _parse_mixing(sec: _Section | None) -> MixingSpec:
    if sec is None:
        return MixingSpec()
    scheme = sec.take("scheme", str, default="metropolis")
    if scheme != "metropolis":
        _fail("mixing.scheme", f"only 'metropolis' is supported, got {scheme!r}")
    theta = sec.take("theta", float, default=0.5)
    if not (0.0 < theta <= 0.5):
        _fail("mixing.theta", f"must lie in (0, 0.5], got {theta}")
    beta = sec.take("lazify_beta", float)
    if beta is not None and not (0.0 <= beta < 1.0):
        _fail("mixing.lazify_beta", f"must lie in [0, 1), got {beta}")
    sec.finish()
    return MixingSpec(scheme=scheme, theta=theta, lazify_beta=beta)


def _parse_objective(sec: _Section) -> ObjectiveSpec:
    kind = sec.take("kind", str, required=True)
    if kind not in OBJECTIVE_KINDS:
        _fail("objective.kind", f"must be one of {OBJECTIVE_KINDS}, got {kind!r}")
    has_n = "n" in sec.table
    eta = sec.take("eta", float, default=0.1)
    seed = sec.take("seed", int, default=7)
    radius = sec.take("lipschitz_radius", float, default=5.0)
    n = sec.take("n", int, default=1)
    matrices = sec.take("matrices", list)
    offsets = sec.take("offsets", list)
    if has_n and kind != "identical_quartic":
        _fail("objective.n", f"only valid for identical_quartic objectives, not {kind!r}")
    if kind == "bilinear_logistic" and eta <= 0.0:
        _fail("objective.eta", f"must be positive (coercivity), got {eta}")
    if radius <= 0.0:
        _fail("objective.lipschitz_radius", f"must be positive, got {radius}")
    if kind == "quadratic" and matrices is None:
        _fail("objective.matrices", "required for quadratic objectives")
    if kind != "quadratic" and (matrices is not None or offsets is not None):
        _fail("objective.matrices", f"only valid for quadratic objectives, not {kind!r}")
    if n < 1:
        _fail("objective.n", f"must be a positive integer, got {n}")
    sec.finish()
    return ObjectiveSpec(
        kind=kind,
        eta=eta,
        seed=seed,
        lipschitz_radius=radius,
        n=n,
        matrices=None if matrices is None else tuple(map(tuple, (map(tuple, mt) for mt in matrices))),
        offsets=None if offsets is None else tuple(map(tuple, offsets)),
    )


def _parse_solver(sec: _Section) -> SolverSpec:
    kind = sec.take("kind", str, required=True)
    if kind not in SOLVER_KINDS:
        _fail("solver.kind", f"must be one of {SOLVER_KINDS}, got {kind!r}")
    mode = sec.take("alpha_mode", str, required=True)
    if mode not in ALPHA_MODES:
        _fail("solver.alpha_mode", f"must be one of {ALPHA_MODES}, got {mode!r}")
    iters = sec.take("iters", int, required=True)
    if iters < 1:
        _fail("solver.iters", f"must be >= 1, got {iters}")
    alpha = sec.take("alpha", float)
    a = sec.take("a", float)
    b = sec.take("b", float)
    if mode == "fixed":
        if alpha is None:
            _fail("solver.alpha", "required when alpha_mode = 'fixed'")
        if alpha <= 0.0:
            _fail("solver.alpha", f"must be positive, got {alpha}")
    elif alpha is not None:
        _fail("solver.alpha", f"only valid when alpha_mode = 'fixed', not {mode!r}")
    if mode == "diminishing":
        if kind != "dgd":
            _fail("solver.alpha_mode", "'diminishing' is only supported by dgd")
        a = 2.0 if a is None else a
        b = 1.0 if b is None else b
        if a <= 0.0 or b <= 0.0:
            _fail("solver.a", f"diminishing schedule needs a > 0 and b > 0, got a={a}, b={b}")
    elif a is not None or b is not None:
        _fail("solver.a", "only valid when alpha_mode = 'diminishing'")
    if kind == "dgd" and mode in ("theoretical_thm1", "theoretical_thm2"):
        _fail("solver.alpha_mode", "theoretical bounds apply to the extra solvers, not dgd")
    sec.finish()
    return SolverSpec(kind=kind, alpha_mode=mode, iters=iters, alpha=alpha, a=a, b=b)


def _parse_init(sec: _Section | None, prefix: str) -> InitSpec:
    if sec is None:
        return InitSpec()
    kind = sec.take("kind", str, default="gaussian")
    if kind not in INIT_KINDS:
        _fail(f"{prefix}.kind", f"must be one of {INIT_KINDS}, got {kind!r}")
    mean = sec.take("mean", float, default=0.0)
    std = sec.take("std", float, default=1.0)
    lo = sec.take("lo", float, default=-1.0)
    hi = sec.take("hi", float, default=1.0)
    if kind == "gaussian" and std <= 0.0:
        _fail(f"{prefix}.std", f"must be positive (nonatomic draw), got {std}")
    if kind == "uniform" and not lo < hi:
        _fail(f"{prefix}.lo", f"uniform draw needs lo < hi, got lo={lo}, hi={hi}")
    sec.finish()
    return InitSpec(kind=kind, mean=mean, std=std, lo=lo, hi=hi)


def _parse_metrics(sec: _Section | None) -> MetricsSpec:
    if sec is None:
        return MetricsSpec()
    spec = MetricsSpec(
        consensus_error=sec.take("consensus_error", bool, default=True),
        avg_grad_norm=sec.take("avg_grad_norm", bool, default=True),
        objective=sec.take("objective", bool, default=True),
        dist_to_targets=sec.take("dist_to_targets", bool, default=True),
        dist_agent=sec.take("dist_agent", int),
    )
    sec.finish()
    return spec


def _parse_analysis(sec: _Section | None) -> AnalysisSpec:
    if sec is None:
        return AnalysisSpec()
    spec = AnalysisSpec(
        tol_consensus=sec.take("tol_consensus", float, default=1e-6),
        tol_grad=sec.take("tol_grad", float, default=1e-6),
        tol_eig=sec.take("tol_eig", float, default=1e-8),
    )
    for name in ("tol_consensus", "tol_grad", "tol_eig"):
        if getattr(spec, name) <= 0.0:
            _fail(f"analysis.{name}", "must be positive")
    sec.finish()
    return spec


def _parse_monte_carlo(sec: _Section | None, default_seed: int) -> MonteCarloSpec | None:
    if sec is None:
        return None
    trials = sec.take("trials", int, required=True)
    if trials < 1:
        _fail("monte_carlo.trials", f"must be >= 1, got {trials}")
    master_seed = sec.take("master_seed", int, default=default_seed)
    saddle_tol = sec.take("saddle_tol", float, default=1e-3)
    conv_tol = sec.take("conv_tol", float, default=1e-3)
    if saddle_tol <= 0.0 or conv_tol <= 0.0:
        _fail("monte_carlo.saddle_tol", "tolerances must be positive")
    init = _parse_init(sec.subsection("init"), "monte_carlo.init")
    sec.finish()
    return MonteCarloSpec(
        trials=trials,
        master_seed=master_seed,
        init=init,
        saddle_tol=saddle_tol,
        conv_tol=conv_tol,
    )


def parse_config(data: dict[str, Any]) -> ExperimentConfig:
    """Validate a parsed TOML document into an ExperimentConfig."""
    root = _Section(data, "")
    graph_sec = root.subsection("graph")
    if graph_sec is None:
        raise ConfigError("missing required section 'graph'")
    objective_sec = root.subsection("objective")
    if objective_sec is None:
        raise ConfigError("missing required section 'objective'")
    solver_sec = root.subsection("solver")
    if solver_sec is None:
        raise ConfigError("missing required section 'solver'")

    graph = _parse_graph(graph_sec)
    mixing = _parse_mixing(root.subsection("mixing"))
    objective = _parse_objective(objective_sec)
    solver = _parse_solver(solver_sec)
    init = _parse_init(root.subsection("init"), "init")
    metrics = _parse_metrics(root.subsection("metrics"))
    analysis = _parse_analysis(root.subsection("analysis"))
    seed = root.take("seed", int, default=0)
    output = root.take("output", str)
    monte_carlo = _parse_monte_carlo(root.subsection("monte_carlo"), seed)
    root.finish()

    if objective.kind == "quadratic" and objective.matrices is not None:
        if len(objective.matrices) != graph.m:
            _fail("objective.matrices", f"need one matrix per agent ({graph.m})")
        if objective.offsets is not None and len(objective.offsets) != graph.m:
            _fail("objective.offsets", f"need one offset per agent ({graph.m})")
    if metrics.dist_agent is not None and not (1 <= metrics.dist_agent <= graph.m):
        _fail("metrics.dist_agent", f"must name an agent in 1..{graph.m}")

    return ExperimentConfig(
        graph=graph,
        mixing=mixing,
        objective=objective,
        solver=solver,
        init=init,
        metrics=metrics,
        analysis=analysis,
        seed=seed,
        output=output,
        monte_carlo=monte_carlo,
        raw=data,
    )


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse and validate a TOML experiment config file."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as err:
        # tomllib reports line/column in its message
        raise ConfigError(f"{path}: {err}")
    return parse_config(data)
