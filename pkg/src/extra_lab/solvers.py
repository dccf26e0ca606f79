"""EXTRA and DGD under a synchronous-round engine.

EXTRA is implemented in three provably equivalent formulations that share
the same iterate sequence:

* ``recurrence``: the two-term update
  x^{k+2} = x^{k+1} + W x^{k+1} - V x^k - alpha*(grad F(x^{k+1}) - grad F(x^k)),
  started with x^1 = W x^0 - alpha*grad F(x^0);
* ``dynamical``: the (x, z) system with z^0 = -alpha*grad F(x^0),
  x^{k+1} = W x^k + z^k,
  z^{k+1} = (W - V) x^k + z^k - alpha*(grad F(x^{k+1}) - grad F(x^k));
* ``jacobi``: the (x, y) system with y^0 = 0,
  x^{k+1} = W x^k + y^k - alpha*grad F(x^k),
  y^{k+1} = (W - V) x^k + y^k,
  where both components update from the pre-round snapshot.

Throughout, W x denotes the per-block mix (W kron I_n applied to the
stacked iterate, i.e. ``W @ x`` on the (m, n) layout). Every form caches
the previous gradient so each round costs one stacked gradient evaluation.

The aggregate steppers operate on full (m, n) arrays. The per-agent
engine at the bottom of the module restricts each agent to its own state
plus messages from graph neighbors, and reproduces the aggregate iterates
to machine precision.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from typing import Callable, Mapping

import numpy as np

from .errors import DivergenceError, ParameterError, ProtocolError, ShapeError
from .mixing import MixingPair
from .netgraph import NetworkGraph
from .objectives import LocalObjective, ObjectiveSet
from .records import MetricSample, RunRecord

FORM_RECURRENCE = "recurrence"
FORM_DYNAMICAL = "dynamical"
FORM_JACOBI = "jacobi"
FORMS = (FORM_RECURRENCE, FORM_DYNAMICAL, FORM_JACOBI)

DIVERGENCE_CAP = 1e12


@dataclass(frozen=True)
class ExtraState:
    """State of one EXTRA run at iteration k.

    ``companion`` is z^k (dynamical), y^k (jacobi), or x^{k-1} (recurrence).
    ``grad`` caches grad F(x^k) for the dynamical and jacobi forms and
    grad F(x^{k-1}) for the recurrence form (None before the first step).
    """

    k: int
    x: np.ndarray
    companion: np.ndarray
    grad: np.ndarray | None
    alpha: float
    form: str


@dataclass(frozen=True)
class ConstantStep:
    alpha: float

    def alpha_at(self, k: int) -> float:
        return self.alpha


@dataclass(frozen=True)
class DiminishingStep:
    """alpha_k = a / (k + b)."""

    a: float
    b: float

    def alpha_at(self, k: int) -> float:
        return self.a / (k + self.b)


@dataclass(frozen=True)
class DgdState:
    k: int
    x: np.ndarray
    schedule: ConstantStep | DiminishingStep


def _check_dims(x0: np.ndarray, pair: MixingPair, obj: ObjectiveSet) -> np.ndarray:
    x0 = np.array(x0, dtype=float)
    if x0.shape != (obj.m, obj.n):
        raise ShapeError(f"initial point must have shape ({obj.m}, {obj.n}), got {x0.shape}")
    if pair.m != obj.m:
        raise ShapeError(f"mixing pair has m={pair.m} but objective has m={obj.m}")
    return x0


def extra_init(
    x0: np.ndarray,
    alpha: float,
    pair: MixingPair,
    obj: ObjectiveSet,
    form: str = FORM_DYNAMICAL,
) -> ExtraState:
    """Initial state whose first step yields x^1 = W x^0 - alpha*grad F(x^0)."""
    if alpha <= 0.0:
        raise ParameterError(f"step size must be positive, got {alpha}")
    if form not in FORMS:
        raise ParameterError(f"unknown form {form!r}, expected one of {FORMS}")
    x0 = _check_dims(x0, pair, obj)
    if form == FORM_DYNAMICAL:
        g0 = obj.stacked_gradient(x0)
        return ExtraState(k=0, x=x0, companion=-alpha * g0, grad=g0, alpha=alpha, form=form)
    if form == FORM_JACOBI:
        g0 = obj.stacked_gradient(x0)
        return ExtraState(
            k=0, x=x0, companion=np.zeros_like(x0), grad=g0, alpha=alpha, form=form
        )
    return ExtraState(k=0, x=x0, companion=x0.copy(), grad=None, alpha=alpha, form=form)


def _check_finite(x: np.ndarray, k: int) -> None:
    if not np.isfinite(x).all() or np.abs(x).max() > DIVERGENCE_CAP:
        raise DivergenceError(k)


def extra_step(state: ExtraState, pair: MixingPair, obj: ObjectiveSet) -> ExtraState:
    """Advance one synchronous round; all agents read the pre-round snapshot."""
    W, theta, alpha = pair.W, pair.theta, state.alpha
    x = state.x
    wx = W @ x

    if state.form == FORM_DYNAMICAL:
        z = state.companion
        x_new = wx + z
        _check_finite(x_new, state.k + 1)
        g_new = obj.stacked_gradient(x_new)
        # (W - V) x = theta * (W x - x)
        z_new = theta * (wx - x) + z - alpha * (g_new - state.grad)
        return replace(state, k=state.k + 1, x=x_new, companion=z_new, grad=g_new)

    if state.form == FORM_JACOBI:
        y = state.companion
        x_new = wx + y - alpha * state.grad
        _check_finite(x_new, state.k + 1)
        y_new = theta * (wx - x) + y
        g_new = obj.stacked_gradient(x_new)
        return replace(state, k=state.k + 1, x=x_new, companion=y_new, grad=g_new)

    # recurrence form
    if state.k == 0:
        g0 = obj.stacked_gradient(x)
        x_new = wx - alpha * g0
        _check_finite(x_new, 1)
        return replace(state, k=1, x=x_new, companion=x, grad=g0)
    x_prev, g_prev = state.companion, state.grad
    g_curr = obj.stacked_gradient(x)
    vx_prev = theta * x_prev + (1.0 - theta) * (W @ x_prev)
    x_new = x + wx - vx_prev - alpha * (g_curr - g_prev)
    _check_finite(x_new, state.k + 1)
    return replace(state, k=state.k + 1, x=x_new, companion=x, grad=g_curr)


def dgd_step(state: DgdState, pair: MixingPair, obj: ObjectiveSet) -> DgdState:
    """x^{k+1} = W x^k - alpha_k * grad F(x^k)."""
    alpha_k = state.schedule.alpha_at(state.k)
    if alpha_k <= 0.0:
        raise ParameterError(f"schedule produced nonpositive step {alpha_k} at k={state.k}")
    x_new = pair.W @ state.x - alpha_k * obj.stacked_gradient(state.x)
    _check_finite(x_new, state.k + 1)
    return replace(state, k=state.k + 1, x=x_new)


Observer = Callable[[int, np.ndarray], "MetricSample | None"]


def run(
    state: ExtraState | DgdState,
    pair: MixingPair,
    obj: ObjectiveSet,
    iters: int,
    observer: Observer | None = None,
) -> RunRecord:
    """Execute ``iters`` synchronous rounds, collecting observer samples.

    The observer is invoked after every round with the new iteration index
    and iterate; samples it returns are appended to the record's series.
    On divergence the partial record is attached to the raised error.
    """
    if iters < 1:
        raise ParameterError(f"iteration count must be >= 1, got {iters}")
    record = RunRecord()
    step = extra_step if isinstance(state, ExtraState) else dgd_step
    max_block_norm = float(np.linalg.norm(state.x, axis=1).max())
    t0 = time.perf_counter()
    try:
        for _ in range(iters):
            state = step(state, pair, obj)
            max_block_norm = max(
                max_block_norm, float(np.linalg.norm(state.x, axis=1).max())
            )
            if observer is not None:
                sample = observer(state.k, state.x)
                if sample is not None:
                    record.series.append(sample)
    except DivergenceError as err:
        record.wall_time = time.perf_counter() - t0
        record.metadata["error"] = str(err)
        record.metadata["diverged_at"] = err.iteration
        err.record = record
        raise
    record.wall_time = time.perf_counter() - t0
    record.metadata["iterations"] = iters
    record.metadata["max_block_norm"] = max_block_norm
    record.metadata["final_x"] = state.x.tolist()
    return record


# ---------------------------------------------------------------------------
# Per-agent engine: neighbor-only information access
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AgentMessage:
    """One directed message: the sender's current iterate (and, for the
    recurrence form, its previous iterate)."""

    sender: int
    x: np.ndarray
    x_prev: np.ndarray | None = None


@dataclass(frozen=True)
class LocalAgent:
    """Agent-local view: own objective, own weight row, own state.

    Static fields describe what the agent is allowed to know: its 0-based
    index, its neighbor list, the mixing weights toward itself and its
    neighbors, theta, the step size, and the solver form. Dynamic fields
    mirror one block of the aggregate solver state.
    """

    index: int
    neighbors: tuple[int, ...]
    weights: Mapping[int, float]  # includes the self weight at key == index
    theta: float
    alpha: float
    form: str
    objective: LocalObjective
    k: int
    x: np.ndarray
    companion: np.ndarray
    grad: np.ndarray | None

    def outbox(self) -> dict[int, AgentMessage]:
        msg = AgentMessage(
            sender=self.index,
            x=self.x,
            x_prev=self.companion if self.form == FORM_RECURRENCE and self.k > 0 else None,
        )
        return {j: msg for j in self.neighbors}


def make_local_agents(
    x0: np.ndarray,
    alpha: float,
    pair: MixingPair,
    obj: ObjectiveSet,
    graph: NetworkGraph,
    form: str = FORM_DYNAMICAL,
) -> list[LocalAgent]:
    if alpha <= 0.0:
        raise ParameterError(f"step size must be positive, got {alpha}")
    if form not in FORMS:
        raise ParameterError(f"unknown form {form!r}, expected one of {FORMS}")
    x0 = _check_dims(x0, pair, obj)
    if graph.m != obj.m:
        raise ShapeError(f"graph has m={graph.m} but objective has m={obj.m}")
    agents = []
    for i in range(obj.m):
        nbrs = graph.neighbors(i)
        weights = {j: float(pair.W[i, j]) for j in nbrs}
        weights[i] = float(pair.W[i, i])
        f = obj.locals[i]
        xi = x0[i].copy()
        if form == FORM_DYNAMICAL:
            g = f.gradient(xi)
            companion, grad = -alpha * g, g
        elif form == FORM_JACOBI:
            companion, grad = np.zeros_like(xi), f.gradient(xi)
        else:
            companion, grad = xi.copy(), None
        agents.append(
            LocalAgent(
                index=i,
                neighbors=nbrs,
                weights=weights,
                theta=pair.theta,
                alpha=alpha,
                form=form,
                objective=f,
                k=0,
                x=xi,
                companion=companion,
                grad=grad,
            )
        )
    return agents


def neighbor_view_step(
    agent: LocalAgent, inbox: Mapping[int, AgentMessage]
) -> tuple[LocalAgent, dict[int, AgentMessage]]:
    """One synchronous round for a single agent.

    The inbox must hold exactly one message per graph neighbor; anything
    missing or extra is a protocol violation. Returns the advanced agent
    and the messages it emits for the next round.
    """
    i = agent.index
    expected = set(agent.neighbors)
    got = set(inbox)
    if got != expected:
        missing = sorted(expected - got)
        if missing:
            j = missing[0]
            raise ProtocolError(
                f"agent {i + 1} received no message from neighbor {j + 1} "
                f"(edge ({min(i, j) + 1}, {max(i, j) + 1}))"
            )
        j = sorted(got - expected)[0]
        raise ProtocolError(
            f"agent {i + 1} received a message from non-neighbor {j + 1}"
        )

    # accumulate the W-mix in ascending agent order, self weight included
    order = sorted((*agent.neighbors, i))
    wmix = np.zeros_like(agent.x)
    for j in order:
        wmix = wmix + agent.weights[j] * (agent.x if j == i else inbox[j].x)

    f, alpha, theta = agent.objective, agent.alpha, agent.theta

    if agent.form == FORM_DYNAMICAL:
        x_new = wmix + agent.companion
        g_new = f.gradient(x_new)
        z_new = theta * (wmix - agent.x) + agent.companion - alpha * (g_new - agent.grad)
        new = replace(agent, k=agent.k + 1, x=x_new, companion=z_new, grad=g_new)
    elif agent.form == FORM_JACOBI:
        x_new = wmix + agent.companion - alpha * agent.grad
        y_new = theta * (wmix - agent.x) + agent.companion
        new = replace(agent, k=agent.k + 1, x=x_new, companion=y_new, grad=f.gradient(x_new))
    elif agent.k == 0:
        g0 = f.gradient(agent.x)
        new = replace(agent, k=1, x=wmix - alpha * g0, companion=agent.x, grad=g0)
    else:
        wmix_prev = np.zeros_like(agent.x)
        for j in order:
            prev = agent.companion if j == i else inbox[j].x_prev
            if prev is None:
                raise ProtocolError(
                    f"agent {i + 1}: message from neighbor {j + 1} lacks the "
                    "previous iterate required by the recurrence form"
                )
            wmix_prev = wmix_prev + agent.weights[j] * prev
        vmix_prev = theta * agent.companion + (1.0 - theta) * wmix_prev
        g_curr = f.gradient(agent.x)
        x_new = agent.x + wmix - vmix_prev - alpha * (g_curr - agent.grad)
        new = replace(agent, k=agent.k + 1, x=x_new, companion=agent.x, grad=g_curr)

    return new, new.outbox()


def run_local_rounds(
    agents: list[LocalAgent], rounds: int
) -> tuple[list[LocalAgent], int]:
    """Drive the message-passing protocol for a number of synchronous rounds.

    Returns the advanced agents and the total count of directed messages
    exchanged (one per directed edge per round).
    """
    if rounds < 1:
        raise ParameterError(f"round count must be >= 1, got {rounds}")
    outboxes = {a.index: a.outbox() for a in agents}
    messages = 0
    for _ in range(rounds):
        inboxes: dict[int, dict[int, AgentMessage]] = {a.index: {} for a in agents}
        for sender, box in outboxes.items():
            for receiver, msg in box.items():
                inboxes[receiver][sender] = msg
                messages += 1
        stepped = [neighbor_view_step(a, inboxes[a.index]) for a in agents]
        agents = [a for a, _ in stepped]
        outboxes = {a.index: box for a, (_, box) in zip(agents, stepped)}
    return agents, messages


def local_iterate(agents: list[LocalAgent]) -> np.ndarray:
    """Stack the agents' current iterates into an (m, n) array."""
    return np.stack([a.x for a in sorted(agents, key=lambda a: a.index)])
