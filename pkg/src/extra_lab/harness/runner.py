"""Experiment runners: single runs, Monte-Carlo studies, and the
EXTRA-vs-DGD comparison figure, with CSV/JSON/SVG persistence.

Determinism contract: everything random is derived from named Philox
substreams (dataset from the objective seed, trial t from
``substream(master_seed, t)``, single runs from trial stream 0), so
repeated runs with the same config produce byte-identical outputs at any
parallelism level.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .. import rng
from ..analysis import (
    avg_gradient_norm,
    classify_point,
    consensus_error,
    step_bound_thm1,
    step_bound_thm2,
)
from ..errors import ConfigError, DivergenceError, OutputExistsError
from ..mixing import MixingPair, lazify, make_mixing_pair, metropolis_weights
from ..netgraph import (
    NetworkGraph,
    circulant_regular_graph,
    complete_graph,
    ring_graph,
)
from ..objectives import (
    ObjectiveSet,
    generate_bilinear_logistic,
    identical_quartic,
    quadratic_objectives,
)
from ..records import MetricSample, RunRecord, _jsonable
from ..solvers import (
    ConstantStep,
    DgdState,
    DiminishingStep,
    extra_init,
    run,
)
from .charts import write_chart
from .config import ExperimentConfig, InitSpec, MetricsSpec
from .targets import TargetSet, find_targets, saddle_directions

SAFETY_FACTOR = 0.99  # applied to theoretical step-size bounds


@dataclass(frozen=True)
class BuiltInstance:
    graph: NetworkGraph
    pair: MixingPair
    obj: ObjectiveSet
    targets: TargetSet | None
    L_F: float
    bounds: dict[str, float]


def build_graph(cfg: ExperimentConfig) -> NetworkGraph:
    spec = cfg.graph
    if spec.kind == "complete":
        return complete_graph(spec.m)
    if spec.kind == "ring":
        return ring_graph(spec.m)
    return circulant_regular_graph(spec.m, spec.degree)


def build_objective(cfg: ExperimentConfig) -> ObjectiveSet:
    spec = cfg.objective
    m = cfg.graph.m
    if spec.kind == "bilinear_logistic":
        return generate_bilinear_logistic(m, spec.eta, spec.seed)
    if spec.kind == "identical_quartic":
        return identical_quartic(m, spec.n)
    matrices = [np.array(mt, dtype=float) for mt in spec.matrices]
    offsets = None
    if spec.offsets is not None:
        offsets = [np.array(b, dtype=float) for b in spec.offsets]
    return quadratic_objectives(matrices, offsets)


def build_instance(cfg: ExperimentConfig, with_targets: bool = True) -> BuiltInstance:
    graph = build_graph(cfg)
    W = metropolis_weights(graph)
    if cfg.mixing.lazify_beta is not None:
        W = lazify(W, cfg.mixing.lazify_beta)
    pair = make_mixing_pair(W, cfg.mixing.theta, graph)
    obj = build_objective(cfg)
    L_F = obj.lipschitz_bound(cfg.objective.lipschitz_radius)
    thm1 = step_bound_thm1(pair.spectral.lambda1_P, L_F)
    thm2 = step_bound_thm2(pair.spectral.lambda1_P, L_F, pair.spectral.lambda_min_V)
    bounds = {
        "lambda1_P": pair.spectral.lambda1_P,
        "lambda_min_V": pair.spectral.lambda_min_V,
        "L_F": L_F,
        "lipschitz_radius": cfg.objective.lipschitz_radius,
        "step_bound_thm1": thm1,
        "step_bound_thm2": thm2,
    }
    targets = find_targets(obj) if with_targets else None
    return BuiltInstance(
        graph=graph, pair=pair, obj=obj, targets=targets, L_F=L_F, bounds=bounds
    )


def resolve_alpha(cfg: ExperimentConfig, inst: BuiltInstance) -> float:
    mode = cfg.solver.alpha_mode
    if mode == "fixed":
        return cfg.solver.alpha
    if mode == "theoretical_thm1":
        return SAFETY_FACTOR * inst.bounds["step_bound_thm1"]
    if mode == "theoretical_thm2":
        return SAFETY_FACTOR * inst.bounds["step_bound_thm2"]
    raise ConfigError(f"alpha_mode {mode!r} does not resolve to a fixed step size")


def draw_init(spec: InitSpec, m: int, n: int, gen: np.random.Generator) -> np.ndarray:
    if spec.kind == "gaussian":
        return rng.normal(gen, (m, n), mean=spec.mean, std=spec.std)
    return rng.uniform(gen, (m, n), lo=spec.lo, hi=spec.hi)


def make_observer(
    obj: ObjectiveSet,
    targets: TargetSet | None,
    metrics: MetricsSpec,
):
    """Observer computing one MetricSample per round; toggled-off metrics
    are recorded as NaN so the CSV layout stays fixed."""
    dist_agent = None if metrics.dist_agent is None else metrics.dist_agent - 1

    def observer(k: int, x: np.ndarray) -> MetricSample:
        dist = None
        if metrics.dist_to_targets and targets is not None:
            if dist_agent is None:
                dist = targets.stacked_distance(x, "minimizer")
            else:
                dist = targets.agent_distance(x, dist_agent, "minimizer")
        return MetricSample(
            k=k,
            consensus_error=consensus_error(x) if metrics.consensus_error else float("nan"),
            avg_grad_norm=avg_gradient_norm(obj, x) if metrics.avg_grad_norm else float("nan"),
            objective=obj.stacked_value(x) if metrics.objective else float("nan"),
            dist_to_targets=dist,
        )

    return observer


def _make_solver_state(cfg, inst, x0):
    kind = cfg.solver.kind
    if kind == "dgd":
        if cfg.solver.alpha_mode == "diminishing":
            schedule = DiminishingStep(a=cfg.solver.a, b=cfg.solver.b)
            meta = {"schedule": f"{cfg.solver.a:g}/(k+{cfg.solver.b:g})"}
        else:
            alpha = resolve_alpha(cfg, inst)
            schedule = ConstantStep(alpha=alpha)
            meta = {"alpha": alpha}
        return DgdState(k=0, x=x0, schedule=schedule), meta
    form = kind.removeprefix("extra_")
    alpha = resolve_alpha(cfg, inst)
    return extra_init(x0, alpha, inst.pair, inst.obj, form=form), {"alpha": alpha}


def _targets_meta(targets: TargetSet | None) -> dict[str, Any]:
    if targets is None:
        return {}
    def entry(c):
        return {
            "point": c.point.tolist(),
            "value": c.value,
            "lambda_min": c.lambda_min,
        }
    return {
        "targets": {
            "minimizers": [entry(c) for c in targets.minimizers],
            "saddles": [entry(c) for c in targets.saddles],
        }
    }


def _finish_record(
    record: RunRecord,
    cfg: ExperimentConfig,
    inst: BuiltInstance,
    seed: int,
    extra_meta: dict[str, Any],
) -> RunRecord:
    record.config = cfg.raw
    record.seed = seed
    record.metadata.update(inst.bounds)
    record.metadata.update(_targets_meta(inst.targets))
    record.metadata.update(extra_meta)
    max_norm = record.metadata.get("max_block_norm")
    if max_norm is not None:
        record.metadata["lipschitz_ball_exceeded"] = bool(
            max_norm > cfg.objective.lipschitz_radius
        )
    final_x = record.metadata.get("final_x")
    if final_x is not None:
        record.verdict = classify_point(
            inst.obj,
            np.array(final_x),
            tol_consensus=cfg.analysis.tol_consensus,
            tol_grad=cfg.analysis.tol_grad,
            tol_eig=cfg.analysis.tol_eig,
        )
    return record


def run_single(
    cfg: ExperimentConfig,
    out_dir: str | Path | None = None,
    overwrite: bool = False,
) -> RunRecord:
    """Build the instance, resolve the step size, run the solver, classify
    the final iterate, and (when an output directory is given) persist
    metrics.csv, meta.json, and chart.svg."""
    if cfg.monte_carlo is not None:
        raise ConfigError("config has a [monte_carlo] section; use run_monte_carlo")
    inst = build_instance(cfg)
    x0 = draw_init(cfg.init, inst.obj.m, inst.obj.n, rng.substream(cfg.seed, 0))
    state, solver_meta = _make_solver_state(cfg, inst, x0)
    meta = {"solver": cfg.solver.kind, "alpha_mode": cfg.solver.alpha_mode}
    meta.update(solver_meta)
    observer = make_observer(inst.obj, inst.targets, cfg.metrics)
    extra_files = _dataset_files(inst.obj)
    try:
        record = run(state, inst.pair, inst.obj, cfg.solver.iters, observer)
    except DivergenceError as err:
        _finish_record(err.record, cfg, inst, cfg.seed, meta)
        if out_dir is not None:
            emit_outputs(err.record, out_dir, overwrite, extra_files)
        raise
    _finish_record(record, cfg, inst, cfg.seed, meta)
    if out_dir is not None:
        emit_outputs(record, out_dir, overwrite, extra_files)
    return record


def _dataset_files(obj: ObjectiveSet) -> dict[str, str]:
    data = getattr(obj, "data", None)
    return {"dataset.csv": data.csv_text()} if data is not None else {}


# ---------------------------------------------------------------------------
# Monte-Carlo saddle-avoidance study
# ---------------------------------------------------------------------------


@dataclass
class McSummary:
    trials: int
    verdict_counts: dict[str, int] = field(default_factory=dict)
    saddle_trapped: int = 0
    second_order_converged: int = 0
    per_trial: list[dict[str, Any]] = field(default_factory=list)

    @property
    def saddle_trapped_fraction(self) -> float:
        return self.saddle_trapped / self.trials

    @property
    def second_order_converged_fraction(self) -> float:
        return self.second_order_converged / self.trials

    def to_dict(self) -> dict[str, Any]:
        return {
            "trials": self.trials,
            "verdict_counts": dict(sorted(self.verdict_counts.items())),
            "saddle_trapped": self.saddle_trapped,
            "saddle_trapped_fraction": self.saddle_trapped_fraction,
            "second_order_converged": self.second_order_converged,
            "second_order_converged_fraction": self.second_order_converged_fraction,
            "per_trial": self.per_trial,
        }

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.to_dict()), indent=2, sort_keys=True) + "\n"


def _mc_trial(payload) -> dict[str, Any]:
    """One Monte-Carlo trial; module-level so process pools can pickle it."""
    cfg, inst, t = payload
    mc = cfg.monte_carlo
    x0 = draw_init(mc.init, inst.obj.m, inst.obj.n, rng.substream(mc.master_seed, t))
    state, _ = _make_solver_state(cfg, inst, x0)
    record = run(state, inst.pair, inst.obj, cfg.solver.iters, observer=None)
    x_final = np.array(record.metadata["final_x"])
    verdict = classify_point(
        inst.obj,
        x_final,
        tol_consensus=cfg.analysis.tol_consensus,
        tol_grad=cfg.analysis.tol_grad,
        tol_eig=cfg.analysis.tol_eig,
    )
    dist_min = inst.targets.stacked_distance(x_final, "minimizer")
    dist_saddle = inst.targets.stacked_distance(x_final, "saddle")
    return {
        "trial": t,
        "verdict": verdict.label,
        "dist_to_minimizers": dist_min,
        "dist_to_saddles": dist_saddle,
        "consensus_error": verdict.consensus_residual,
        "avg_grad_norm": verdict.avg_grad_norm,
    }


def run_monte_carlo(
    cfg: ExperimentConfig,
    workers: int = 1,
    out_dir: str | Path | None = None,
    overwrite: bool = False,
) -> McSummary:
    """Run the configured Monte-Carlo study.

    Trial t draws its initialization from ``substream(master_seed, t)``,
    so the summary does not depend on the worker count or scheduling.
    """
    mc = cfg.monte_carlo
    if mc is None:
        raise ConfigError("config lacks the [monte_carlo] section")
    inst = build_instance(cfg)
    payloads = [(cfg, inst, t) for t in range(mc.trials)]
    if workers <= 1:
        results = [_mc_trial(p) for p in payloads]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_mc_trial, payloads, chunksize=8))

    summary = McSummary(trials=mc.trials)
    for res in results:
        summary.verdict_counts[res["verdict"]] = (
            summary.verdict_counts.get(res["verdict"], 0) + 1
        )
        if res["dist_to_saddles"] <= mc.saddle_tol:
            summary.saddle_trapped += 1
        if res["dist_to_minimizers"] <= mc.conv_tol:
            summary.second_order_converged += 1
        summary.per_trial.append(res)

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        files = [out / "mc_summary.json", out / "mc_trials.csv"]
        _refuse_existing(files, overwrite)
        files[0].write_text(summary.to_json(), encoding="utf-8")
        rows = ["trial,verdict,dist_to_minimizers,dist_to_saddles,consensus_error,avg_grad_norm"]
        for res in summary.per_trial:
            rows.append(
                "%d,%s,%.17g,%.17g,%.17g,%.17g"
                % (
                    res["trial"],
                    res["verdict"],
                    res["dist_to_minimizers"],
                    res["dist_to_saddles"],
                    res["consensus_error"],
                    res["avg_grad_norm"],
                )
            )
        files[1].write_text("\n".join(rows) + "\n", encoding="utf-8")
    return summary


# ---------------------------------------------------------------------------
# EXTRA vs DGD comparison (constant vs diminishing step size)
# ---------------------------------------------------------------------------


@dataclass
class Fig1Result:
    extra_record: RunRecord
    dgd_record: RunRecord
    init_point: np.ndarray
    meta: dict[str, Any]


def reproduce_fig1(
    cfg: ExperimentConfig,
    out_dir: str | Path | None = None,
    overwrite: bool = False,
    bad_init: bool = False,
) -> Fig1Result:
    """Run EXTRA (constant step) and DGD (diminishing step 2/(k+1)) from a
    shared initialization and emit the per-agent distance comparison.

    With ``bad_init`` the shared initialization is a consensual point
    placed near the saddle's stable direction (slightly offset along the
    unstable one), which produces the characteristic plateau before the
    escape; the point used is documented in the metadata.
    """
    if cfg.solver.kind == "dgd":
        raise ConfigError("fig1 compares an extra solver against dgd; set solver.kind to an extra form")
    inst = build_instance(cfg)
    if not inst.targets or not inst.targets.minimizers:
        raise ConfigError("fig1 needs an objective with locatable minimizers")
    m, n = inst.obj.m, inst.obj.n

    init_meta: dict[str, Any] = {"bad_init": bad_init}
    if bad_init:
        if not inst.targets.saddles:
            raise ConfigError("bad_init requested but the instance has no strict saddle")
        saddle = inst.targets.saddles[0]
        stable, unstable = saddle_directions(inst.obj, saddle)
        point = saddle.point + 1.2 * stable + 1e-3 * unstable
        x0 = np.tile(point, (m, 1))
        init_meta["init_point"] = point.tolist()
        init_meta["saddle_point"] = saddle.point.tolist()
        init_meta["stable_direction"] = stable.tolist()
        init_meta["unstable_direction"] = unstable.tolist()
    else:
        x0 = draw_init(cfg.init, m, n, rng.substream(cfg.seed, 0))

    # distance series tracks one designated agent (default: agent 5)
    dist_agent = cfg.metrics.dist_agent or (5 if m >= 5 else 1)
    metrics = MetricsSpec(
        consensus_error=cfg.metrics.consensus_error,
        avg_grad_norm=cfg.metrics.avg_grad_norm,
        objective=cfg.metrics.objective,
        dist_to_targets=True,
        dist_agent=dist_agent,
    )
    observer = make_observer(inst.obj, inst.targets, metrics)

    alpha = resolve_alpha(cfg, inst)
    form = cfg.solver.kind.removeprefix("extra_")
    extra_state = extra_init(x0.copy(), alpha, inst.pair, inst.obj, form=form)
    extra_record = run(extra_state, inst.pair, inst.obj, cfg.solver.iters, observer)
    _finish_record(
        extra_record, cfg, inst, cfg.seed,
        {"solver": cfg.solver.kind, "alpha": alpha, "init": init_meta},
    )

    dgd_state = DgdState(k=0, x=x0.copy(), schedule=DiminishingStep(a=2.0, b=1.0))
    dgd_record = run(dgd_state, inst.pair, inst.obj, cfg.solver.iters, observer)
    _finish_record(
        dgd_record, cfg, inst, cfg.seed,
        {"solver": "dgd", "schedule": "2/(k+1)", "init": init_meta},
    )

    meta = {
        "dist_agent": dist_agent,
        "init": init_meta,
        "extra": extra_record.meta_dict(),
        "dgd": dgd_record.meta_dict(),
    }
    result = Fig1Result(
        extra_record=extra_record, dgd_record=dgd_record, init_point=x0, meta=meta
    )

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        dataset = _dataset_files(inst.obj)
        files = [
            out / "extra_metrics.csv",
            out / "dgd_metrics.csv",
            out / "meta.json",
            out / "chart.svg",
        ] + [out / name for name in dataset]
        _refuse_existing(files, overwrite)
        files[0].write_text(extra_record.csv_text(), encoding="utf-8")
        files[1].write_text(dgd_record.csv_text(), encoding="utf-8")
        files[2].write_text(
            json.dumps(_jsonable(meta), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        for name, text in dataset.items():
            (out / name).write_text(text, encoding="utf-8")
        series = []
        for label, rec in (("EXTRA (cs)", extra_record), ("DGD (ds)", dgd_record)):
            ks = [s.k for s in rec.series]
            ds = [s.dist_to_targets for s in rec.series]
            series.append((label, ks, ds))
        write_chart(
            files[3],
            series,
            title=f"distance to minimizer set at agent {dist_agent}",
            ylabel="distance",
        )
    return result


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def _refuse_existing(files: list[Path], overwrite: bool) -> None:
    if overwrite:
        return
    for f in files:
        if f.exists():
            raise OutputExistsError(
                f"output file {f} exists; pass --overwrite to replace it"
            )


def emit_outputs(
    record: RunRecord,
    out_dir: str | Path,
    overwrite: bool = False,
    extra_files: dict[str, str] | None = None,
) -> list[Path]:
    """Write metrics.csv, meta.json, and chart.svg for one run.

    A failed (diverged) run still gets its partial CSV and a meta.json
    carrying the error field, but no chart. ``extra_files`` maps extra
    file names to text content written alongside (e.g. the dataset CSV).
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        raise OutputExistsError(f"cannot create output directory {out}: {err}")
    csv_path = out / "metrics.csv"
    meta_path = out / "meta.json"
    chart_path = out / "chart.svg"
    extra_files = extra_files or {}
    failed = "error" in record.metadata
    files = [csv_path, meta_path] + ([] if failed else [chart_path])
    files += [out / name for name in extra_files]
    _refuse_existing(files, overwrite)

    written = []
    try:
        csv_path.write_text(record.csv_text(), encoding="utf-8")
        written.append(csv_path)
        meta_path.write_text(record.meta_json(), encoding="utf-8")
        written.append(meta_path)
        for name, text in extra_files.items():
            (out / name).write_text(text, encoding="utf-8")
            written.append(out / name)
    except OSError as err:
        raise OutputExistsError(f"failed writing outputs under {out}: {err}")
    if not failed and record.series:
        ks = [s.k for s in record.series]
        series = [
            ("consensus error", ks, [s.consensus_error for s in record.series]),
            ("avg gradient norm", ks, [s.avg_grad_norm for s in record.series]),
        ]
        if record.series[0].dist_to_targets is not None:
            series.append(
                ("dist to targets", ks, [s.dist_to_targets for s in record.series])
            )
        try:
            write_chart(chart_path, series, title="run metrics", ylabel="metric")
            written.append(chart_path)
        except ValueError:
            pass  # nothing plottable (all zeros on a log axis)
    return written


def bounds_report(
    cfg: ExperimentConfig,
    out_dir: str | Path | None = None,
    overwrite: bool = False,
) -> dict[str, float]:
    """Spectral and step-size bound summary for a config, without running.

    With an output directory the report is written as bounds.json and the
    mixing matrices W, V and the consensus block matrix P are exported as
    full dense CSV for external verification.
    """
    inst = build_instance(cfg, with_targets=False)
    report = dict(inst.bounds)
    report["alpha_thm1_applied"] = SAFETY_FACTOR * report["step_bound_thm1"]
    report["alpha_thm2_applied"] = SAFETY_FACTOR * report["step_bound_thm2"]
    if out_dir is not None:
        from ..mixing import build_P, matrix_csv_text

        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        files = {
            "bounds.json": json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n",
            "W.csv": matrix_csv_text(inst.pair.W),
            "V.csv": matrix_csv_text(inst.pair.V),
            "P.csv": matrix_csv_text(build_P(inst.pair)),
        }
        _refuse_existing([out / name for name in files], overwrite)
        for name, text in files.items():
            (out / name).write_text(text, encoding="utf-8")
    return report
