"""Inexact extra-gradient and gradient solvers for stochastic QVIs.

Both solvers damp a projected step with a retraction: the gradient variant
projects once per iteration, the extra-gradient variant inserts a lookahead
projection at an intermediate point before retracting. Projections may be
inexact with certified error, operator values are mini-batch averages, and
batch sizes / inner budgets follow one of several schedules whose knobs are
tied to the contraction factor q of the distance recursion.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np

from .errors import (
    InvalidConstants,
    InvalidParameters,
    InvalidSchedule,
    NoAdmissibleStep,
    NonfiniteIterate,
    NotReached,
)
from .operators import evaluate_mean, sample_batch
from .projection import inexact_project

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# parameter algebra


def derive_beta(lipschitz: float, mu: float, gamma: float, eta: float) -> float:
    """Per-step expansion factor gamma + sqrt(1 + L^2 eta^2 - 2 eta mu).

    The radicand equals (1 - eta*mu)^2 + eta^2 (L^2 - mu^2), hence is
    nonnegative whenever mu <= L.
    """
    if mu > lipschitz * (1 + 1e-12):
        raise InvalidConstants(f"mu={mu} exceeds lipschitz={lipschitz}")
    radicand = 1.0 + (lipschitz * eta) ** 2 - 2.0 * eta * mu
    return gamma + math.sqrt(max(radicand, 0.0))


def admissible_eta_interval(lipschitz: float, mu: float, gamma: float):
    """Open interval of step sizes for which the expansion factor stays below 1.

    Requires mu^2 > L^2 (2 gamma - gamma^2), equivalently
    gamma + sqrt(1 - mu^2/L^2) < 1. At either endpoint the expansion factor
    equals exactly 1.
    """
    if mu > lipschitz * (1 + 1e-12):
        raise InvalidConstants(f"mu={mu} exceeds lipschitz={lipschitz}")
    l2 = lipschitz * lipschitz
    disc = mu * mu - l2 * (2.0 * gamma - gamma * gamma)
    side = gamma + math.sqrt(max(1.0 - (mu * mu) / l2, 0.0))
    if disc <= 0.0 or side >= 1.0:
        raise NoAdmissibleStep(
            "no admissible step size: need mu^2 > L^2(2*gamma - gamma^2) "
            f"(got {mu * mu:.6g} vs {l2 * (2 * gamma - gamma * gamma):.6g}) and "
            f"gamma + sqrt(1 - mu^2/L^2) < 1 (got {side:.6g})"
        )
    delta = math.sqrt(disc)
    return ((mu - delta) / l2, (mu + delta) / l2)


def contraction_factor(alpha: float, beta: float, b: float = 0.0) -> float:
    """Distance-recursion contraction q = alpha (1 - beta)(1 + beta b).

    b = 0 gives the gradient-method factor alpha (1 - beta).
    """
    if not (0.0 < alpha < 1.0):
        raise InvalidParameters(f"alpha must lie in (0,1), got {alpha}")
    if not (0.0 <= beta < 1.0):
        raise InvalidParameters(f"beta must lie in [0,1), got {beta}")
    if b < 0.0:
        raise InvalidParameters(f"b must be nonnegative, got {b}")
    # b is irrelevant when beta = 0, so the upper bound is only enforced
    # for a genuinely expansive map
    if beta > 0.0 and not (b < 1.0 / (1.0 - beta)):
        raise InvalidParameters(f"b must lie in [0, 1/(1-beta)), got {b}")
    return alpha * (1.0 - beta) * (1.0 + beta * b)


# ---------------------------------------------------------------------------
# schedules


@dataclass(frozen=True)
class IncreasingSample:
    """Geometrically growing batches N_k = ceil(rho^(-2k)) with matching inner budgets."""

    rho: float


@dataclass(frozen=True)
class ConstantMinibatch:
    """Fixed batch size; inner budgets grow like the inverse contraction power."""

    batch: int


@dataclass(frozen=True)
class Deterministic:
    """Exact mean evaluations; inner budgets as in the increasing-sample schedule.

    ``rho`` defaults to max(1 - q + 0.05, 0.9) at run time when omitted.
    """

    rho: Optional[float] = None


@dataclass(frozen=True)
class DampedInner:
    """Inner budgets t_k = ceil(k ln^2(k+1) decay^k), floored at 1; exact means.

    The experiment preset for the regression game uses this with
    decay = 1 - 1e-3.
    """

    decay: float = 1.0 - 1e-3


Schedule = Union[IncreasingSample, ConstantMinibatch, Deterministic, DampedInner]

_SCHEDULE_NAMES = {
    "increasing": IncreasingSample,
    "constant": ConstantMinibatch,
    "deterministic": Deterministic,
    "damped": DampedInner,
}


def _poly_log(k: int) -> float:
    return (k + 1.0) * math.log(k + 2.0) ** 2


def schedule_values(schedule: Schedule, q: Optional[float], k: int):
    """Batch size and inner budget (N_k, t_k) prescribed for outer iteration k.

    Increasing-sample: N_k = ceil(rho^(-2k)), t_k = ceil((k+1) ln^2(k+2) / rho^k),
    requiring rho > 1 - q. Constant mini-batch: N_k fixed,
    t_k = ceil((k+1) ln^2(k+2) / (1-q)^k). Deterministic: N_k = 1 with exact
    mean evaluation and increasing-sample inner budgets.
    """
    if k < 0:
        raise InvalidSchedule("iteration index must be >= 0")
    if isinstance(schedule, IncreasingSample):
        rho = schedule.rho
        if q is not None and not (rho > 1.0 - q):
            raise InvalidSchedule(f"rho must exceed 1-q (rho={rho}, 1-q={1.0 - q})")
        if not (0.0 < rho < 1.0):
            raise InvalidSchedule(f"rho must lie in (0,1), got {rho}")
        n_k = int(math.ceil(rho ** (-2 * k)))
        t_k = int(math.ceil(_poly_log(k) / rho**k))
        return max(n_k, 1), max(t_k, 1)
    if isinstance(schedule, ConstantMinibatch):
        if schedule.batch < 1:
            raise InvalidSchedule("constant mini-batch size must be >= 1")
        if q is None or not (0.0 < q < 1.0):
            raise InvalidSchedule("constant mini-batch schedule needs q in (0,1)")
        t_k = int(math.ceil(_poly_log(k) / (1.0 - q) ** k))
        return int(schedule.batch), max(t_k, 1)
    if isinstance(schedule, Deterministic):
        rho = schedule.rho
        if rho is None:
            if q is None:
                raise InvalidSchedule("deterministic schedule needs rho or q")
            rho = max(1.0 - q + 0.05, 0.9)
            if rho >= 1.0:
                rho = 1.0 - 0.5 * q  # midpoint of (1-q, 1) when q is small
        if q is not None and not (rho > 1.0 - q):
            raise InvalidSchedule(f"rho must exceed 1-q (rho={rho}, 1-q={1.0 - q})")
        t_k = int(math.ceil(_poly_log(k) / rho**k))
        return 1, max(t_k, 1)
    if isinstance(schedule, DampedInner):
        t_k = int(math.ceil(k * math.log(k + 1.0) ** 2 * schedule.decay**k))
        return 1, max(t_k, 1)
    raise InvalidSchedule(f"unknown schedule {schedule!r}")


def schedule_from_name(name: str, rho=None, batch=None, decay=None) -> Schedule:
    try:
        cls = _SCHEDULE_NAMES[name]
    except KeyError:
        raise InvalidSchedule(f"unknown schedule name {name!r}") from None
    if cls is IncreasingSample:
        if rho is None:
            raise InvalidSchedule("increasing-sample schedule needs rho")
        return IncreasingSample(rho=float(rho))
    if cls is ConstantMinibatch:
        if batch is None:
            raise InvalidSchedule("constant mini-batch schedule needs a batch size")
        return ConstantMinibatch(batch=int(batch))
    if cls is Deterministic:
        return Deterministic(rho=None if rho is None else float(rho))
    return DampedInner() if decay is None else DampedInner(decay=float(decay))


# ---------------------------------------------------------------------------
# configuration and traces


@dataclass(frozen=True)
class SolverConfig:
    """Run parameters for the two solvers.

    ``b`` is the extra-gradient retraction weight (ignored by the gradient
    solver). ``allow_out_of_range`` downgrades parameter-validation failures
    to warnings, which the tuned experiment presets rely on.
    """

    eta: float
    alpha: float
    b: float = 0.0
    schedule: Schedule = Deterministic()
    max_outer: int = 100
    seed: Union[int, tuple] = 0
    inner_method: str = "auto"
    metric_floor: Optional[tuple] = None  # (metric id, value)
    record_timing: bool = False
    residual_budget_scale: int = 10
    allow_out_of_range: bool = False

    def seed_key(self) -> tuple:
        if isinstance(self.seed, (int, np.integer)):
            return (int(self.seed),)
        return tuple(int(s) for s in self.seed)


class DerivedParams(NamedTuple):
    beta: float
    q: Optional[float]
    eta_interval: Optional[tuple]


def derive_params(problem, config: SolverConfig, extra_gradient: bool) -> DerivedParams:
    """Expansion factor, contraction factor, and admissible step interval.

    Raises on invalid parameters unless the config opts out, in which case
    the issues are logged and a best-effort q (possibly None) is returned.
    """
    c = problem.constants
    beta = derive_beta(c.lipschitz, c.qg_mu, c.gamma, config.eta)
    interval = None
    problems = []
    try:
        interval = admissible_eta_interval(c.lipschitz, c.qg_mu, c.gamma)
        if not (interval[0] < config.eta < interval[1]):
            problems.append(
                f"eta={config.eta} outside the admissible interval "
                f"({interval[0]:.6g}, {interval[1]:.6g})"
            )
    except NoAdmissibleStep as exc:
        problems.append(str(exc))
    q = None
    try:
        q = contraction_factor(config.alpha, beta, config.b if extra_gradient else 0.0)
    except InvalidParameters as exc:
        problems.append(str(exc))
    if problems:
        msg = "; ".join(problems)
        if config.allow_out_of_range:
            log.warning("parameter validation bypassed: %s", msg)
        else:
            raise InvalidParameters(msg)
    return DerivedParams(beta=beta, q=q, eta_interval=interval)


@dataclass(frozen=True)
class TraceRow:
    k: int
    n_k: int
    t_k: int
    cum_samples: int
    cum_inner: int
    metrics: dict
    wall_ms: Optional[float] = None


@dataclass
class IterationTrace:
    """Per-iteration solver record plus a terminal summary.

    Row k holds the schedule values used in iteration k and the metrics of
    the iterate produced by it; metrics of the initial point live in
    ``initial_metrics``.
    """

    problem_name: str
    solver: str
    metrics: tuple
    initial_metrics: dict
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def metric_series(self, metric: str) -> np.ndarray:
        return np.asarray([row.metrics.get(metric, np.nan) for row in self.rows], dtype=float)

    def iterations(self) -> np.ndarray:
        return np.asarray([row.k for row in self.rows], dtype=int)


class ComplexityReport(NamedTuple):
    outer_iterations: int
    total_samples: int
    total_inner: int
    first_k: int


def oracle_complexity_report(trace: IterationTrace, epsilon: float, metric: str = "dist") -> ComplexityReport:
    """Iterations, scheduled samples, and scheduled inner steps to cross epsilon.

    Totals are the schedule sums over iterations 0..k at the first k whose
    recorded metric is at or below epsilon. A threshold already met by the
    initial point reports zeros.
    """
    init = trace.initial_metrics.get(metric)
    if init is not None and init <= epsilon:
        return ComplexityReport(0, 0, 0, 0)
    for row in trace.rows:
        val = row.metrics.get(metric)
        if val is not None and val <= epsilon:
            upto = [r for r in trace.rows if r.k <= row.k]
            return ComplexityReport(
                outer_iterations=row.k + 1,
                total_samples=int(sum(r.n_k for r in upto)),
                total_inner=int(sum(r.t_k for r in upto)),
                first_k=row.k,
            )
    raise NotReached(f"metric {metric!r} never crossed {epsilon}")


# ---------------------------------------------------------------------------
# run loops


def _batch_value(problem, config, x, n_k, k, phase, deterministic):
    if deterministic:
        return evaluate_mean(problem.operator, x), 1
    key = config.seed_key() + (k, phase)
    batch = sample_batch(problem.operator, x, n_k, key)
    return batch.mean_estimate, n_k


def _eval_metrics(problem, x, metrics, config, t_k=None):
    from . import diagnostics  # deferred: diagnostics imports the projection stack

    out = {}
    for name in metrics:
        if name == "dist":
            out[name] = diagnostics.dist_to_solution(problem, x)
        elif name == "residual":
            budget = None if t_k is None else config.residual_budget_scale * t_k
            out[name] = diagnostics.natural_residual(problem, x, eta=config.eta, budget=budget).value
        elif name == "lower_subopt":
            out[name] = diagnostics.lower_level_subopt(problem, x)
        else:
            raise InvalidParameters(f"unknown metric id {name!r}")
    return out


def _run(problem, config: SolverConfig, metrics, extra_gradient: bool) -> IterationTrace:
    params = derive_params(problem, config, extra_gradient)
    deterministic = isinstance(config.schedule, (Deterministic, DampedInner))
    if deterministic and problem.operator.mean_eval is None:
        raise InvalidParameters("deterministic schedules need a closed-form mean field")
    metrics = tuple(metrics)
    if config.metric_floor is not None and config.metric_floor[0] not in metrics:
        raise InvalidParameters(
            f"metric floor references {config.metric_floor[0]!r}, which is not recorded"
        )
    solver = "ieg" if extra_gradient else "ig"
    x = np.asarray(problem.x0, dtype=float).copy()
    trace = IterationTrace(
        problem_name=problem.name,
        solver=solver,
        metrics=metrics,
        initial_metrics=_eval_metrics(problem, x, metrics, config),
    )
    cum_samples = 0
    cum_inner = 0
    stopped_early = False
    for k in range(config.max_outer):
        tic = time.perf_counter()
        n_k, t_k = schedule_values(config.schedule, params.q, k)
        fhat, drawn = _batch_value(problem, config, x, n_k, k, 0, deterministic)
        first = inexact_project(
            problem.map, x, x - config.eta * fhat, t_k,
            method=config.inner_method, ambient=problem.ambient,
        )
        cum_inner += first.inner_iterations
        cum_samples += drawn
        if extra_gradient:
            u = (1.0 - config.b) * x + config.b * first.point
            fhat2, drawn2 = _batch_value(problem, config, u, n_k, k, 1, deterministic)
            second = inexact_project(
                problem.map, u, u - config.eta * fhat2, t_k,
                method=config.inner_method, ambient=problem.ambient,
            )
            cum_inner += second.inner_iterations
            cum_samples += drawn2
            x_new = (1.0 - config.alpha) * x + config.alpha * second.point
        else:
            x_new = (1.0 - config.alpha) * x + config.alpha * first.point
        if not np.all(np.isfinite(x_new)):
            raise NonfiniteIterate(f"iterate became nonfinite at iteration {k}", trace)
        x = x_new
        row_metrics = _eval_metrics(problem, x, metrics, config, t_k=t_k)
        wall = (time.perf_counter() - tic) * 1e3
        trace.rows.append(
            TraceRow(
                k=k, n_k=n_k, t_k=t_k,
                cum_samples=cum_samples, cum_inner=cum_inner,
                metrics=row_metrics, wall_ms=wall if config.record_timing else None,
            )
        )
        if config.metric_floor is not None:
            floor_metric, floor_value = config.metric_floor
            val = row_metrics.get(floor_metric)
            if val is not None and val <= floor_value:
                stopped_early = True
                break
    trace.summary = {
        "iterations": len(trace.rows),
        "stopped_early": stopped_early,
        "beta": params.beta,
        "q": params.q,
        "eta_interval": params.eta_interval,
        "final_metrics": dict(trace.rows[-1].metrics) if trace.rows else dict(trace.initial_metrics),
        "final_point": x.tolist(),
        "fitted": _fit_summary(trace, metrics),
    }
    return trace


def _fit_summary(trace, metrics):
    from . import diagnostics
    from .errors import InsufficientData

    fits = {}
    for name in metrics:
        try:
            fit = diagnostics.fit_linear_rate(trace, name)
            fits[name] = {"slope_log10": fit.slope, "r_squared": fit.r_squared}
        except InsufficientData:
            fits[name] = None
    return fits


def run_ieg_sqvi(problem, config: SolverConfig, metrics: Sequence[str] = ("dist",)) -> IterationTrace:
    """Inexact extra-gradient run.

    Per outer iteration k: project the batch-operator step at x_k onto
    K(x_k) with budget t_k, retract with weight b to the lookahead point
    u_k, project a fresh batch step at u_k onto K(u_k), then retract with
    weight alpha to form x_{k+1}.
    """
    return _run(problem, config, metrics, extra_gradient=True)


def run_ig_sqvi(problem, config: SolverConfig, metrics: Sequence[str] = ("dist",)) -> IterationTrace:
    """Inexact gradient run: one projected batch step per iteration, retracted by alpha."""
    return _run(problem, config, metrics, extra_gradient=False)
