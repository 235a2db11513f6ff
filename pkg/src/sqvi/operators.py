"""Stochastic operator model: mean field, mini-batch sampling, audits.

An operator is a mapping F on R^n available either through a closed-form
mean field, through a stochastic sampler whose draws average to F, or both.
All randomness flows through seeded generator streams so that every batch
is a pure function of (point, batch size, stream).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptySample,
    InvalidConstants,
    MissingMeanField,
)

Array = np.ndarray
MeanEval = Callable[[Array], Array]
# sampler(x, rng, count) -> (count, dim) array of draws G(x, xi_j)
Sampler = Callable[[Array, np.random.Generator, int], Array]
# batch_mean(x, rng, count) -> dim vector equal in law to the mean of `count` draws
BatchMean = Callable[[Array, np.random.Generator, int], Array]

_CHUNK = 1 << 16  # draws per chunk when materializing large batches


def _check_point(x, dim) -> Array:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (dim,):
        raise DimensionMismatch(f"point has shape {x.shape}, expected ({dim},)")
    return x


@dataclass(frozen=True)
class OperatorSpec:
    """A mapping F with declared Lipschitz and quadratic-growth constants.

    Parameters
    ----------
    dim : ambient dimension n.
    lipschitz : L, a Lipschitz bound for F on the feasible region.
    qg_mu : quadratic-growth modulus of F relative to the solution set.
    mean_eval : closed-form F(x), when the expectation is available.
    sampler : draws of the stochastic map; averaged to estimate F(x).
    batch_mean : optional direct draw of a batch mean (same law as averaging
        ``count`` sampler draws); used to keep very large batches cheap.
    noise_level : per-sample standard-deviation bound (nu); 0 = deterministic.
    """

    dim: int
    lipschitz: float
    qg_mu: float
    mean_eval: Optional[MeanEval] = None
    sampler: Optional[Sampler] = None
    batch_mean: Optional[BatchMean] = None
    noise_level: float = 0.0

    def __post_init__(self):
        if self.dim < 1:
            raise DimensionMismatch("operator dimension must be >= 1")
        if not (self.lipschitz > 0):
            raise InvalidConstants("lipschitz constant must be positive")
        if self.qg_mu < 0:
            # zero is allowed so that merely monotone toys can be declared honestly
            raise InvalidConstants("quadratic-growth constant must be nonnegative")
        if self.qg_mu > self.lipschitz * (1 + 1e-12):
            raise InvalidConstants(
                f"qg_mu={self.qg_mu} exceeds lipschitz={self.lipschitz}"
            )
        if self.noise_level < 0:
            raise InvalidConstants("noise_level must be nonnegative")
        if self.mean_eval is None and self.sampler is None and self.batch_mean is None:
            raise InvalidConstants("operator needs a mean field or a sampler")


class BatchEval(NamedTuple):
    """Mini-batch average of operator draws at a fixed point."""

    mean_estimate: Array
    batch_size: int
    seed_record: tuple


def _as_stream_key(stream) -> tuple:
    if isinstance(stream, (int, np.integer)):
        return (int(stream),)
    return tuple(int(s) for s in stream)


def evaluate_mean(op: OperatorSpec, x) -> Array:
    """Closed-form F(x). Raises MissingMeanField for sample-only operators."""
    x = _check_point(x, op.dim)
    if op.mean_eval is None:
        raise MissingMeanField("operator has no closed-form mean field")
    out = np.asarray(op.mean_eval(x), dtype=float)
    if out.shape != (op.dim,):
        raise DimensionMismatch(f"mean field returned shape {out.shape}")
    return out


def sample_batch(op: OperatorSpec, x, n: int, stream) -> BatchEval:
    """Average of ``n`` fresh operator draws at ``x`` from ``stream``.

    Deterministic in (x, n, stream): replaying the same triple reproduces the
    batch bit for bit. Zero-noise operators short-circuit to the mean field.
    """
    x = _check_point(x, op.dim)
    if n < 1:
        raise DimensionMismatch("batch size must be >= 1")
    key = _as_stream_key(stream)
    if op.batch_mean is not None:
        rng = np.random.default_rng(key)
        est = np.asarray(op.batch_mean(x, rng, n), dtype=float)
    elif op.sampler is not None:
        rng = np.random.default_rng(key)
        total = np.zeros(op.dim)
        done = 0
        while done < n:
            take = min(_CHUNK, n - done)
            draws = np.asarray(op.sampler(x, rng, take), dtype=float)
            if draws.shape != (take, op.dim):
                raise DimensionMismatch(f"sampler returned shape {draws.shape}")
            total += draws.sum(axis=0)
            done += take
        est = total / n
    else:
        est = evaluate_mean(op, x)
    if est.shape != (op.dim,):
        raise DimensionMismatch(f"batch mean has shape {est.shape}")
    return BatchEval(mean_estimate=est, batch_size=n, seed_record=key)


def gaussian_operator(
    mean_eval: MeanEval,
    dim: int,
    lipschitz: float,
    qg_mu: float,
    noise_level: float = 0.0,
    materialize: bool = False,
) -> OperatorSpec:
    """Operator with additive zero-mean Gaussian noise around ``mean_eval``.

    The per-coordinate standard deviation is noise_level/sqrt(dim), so a
    single draw w satisfies E||w||^2 = noise_level^2 and a batch of N draws
    satisfies E||w_bar||^2 = noise_level^2 / N.

    With ``materialize=False`` the batch mean is drawn directly as one
    Gaussian with standard deviation scaled by 1/sqrt(N); this is equal in
    law to averaging N draws and keeps fast-growing batch schedules cheap.
    """
    if noise_level == 0.0:
        return OperatorSpec(dim=dim, lipschitz=lipschitz, qg_mu=qg_mu, mean_eval=mean_eval)
    coord_sd = noise_level / np.sqrt(dim)

    def _sampler(x, rng, count):
        return np.asarray(mean_eval(x))[None, :] + coord_sd * rng.standard_normal((count, dim))

    def _batch_mean(x, rng, count):
        return np.asarray(mean_eval(x)) + (coord_sd / np.sqrt(count)) * rng.standard_normal(dim)

    return OperatorSpec(
        dim=dim,
        lipschitz=lipschitz,
        qg_mu=qg_mu,
        mean_eval=mean_eval,
        sampler=_sampler,
        batch_mean=None if materialize else _batch_mean,
        noise_level=noise_level,
    )


class MonotoneReport(NamedTuple):
    minimum: float
    passed: bool


def check_monotone(op: OperatorSpec, pairs: Sequence) -> MonotoneReport:
    """Minimum of <F(x)-F(y), x-y> over the supplied pairs."""
    worst = np.inf
    for x, y in pairs:
        fx = evaluate_mean(op, x)
        fy = evaluate_mean(op, y)
        worst = min(worst, float((fx - fy) @ (np.asarray(x, float) - np.asarray(y, float))))
    return MonotoneReport(minimum=worst, passed=worst >= -1e-10)


def estimate_qg(op: OperatorSpec, reference_projector, points: Sequence) -> float:
    """Empirical quadratic-growth modulus against a solution-set projector.

    Returns min over points of <F(x)-F(y), x-y> / ||x-y||^2 with y the
    projection of x onto the solution set; points already on the solution
    set (within 1e-12) are skipped.
    """
    best = np.inf
    for x in points:
        x = _check_point(x, op.dim)
        y = np.asarray(reference_projector(x), dtype=float)
        d = x - y
        nrm2 = float(d @ d)
        if nrm2 < 1e-24:
            continue
        num = float((evaluate_mean(op, x) - evaluate_mean(op, y)) @ d)
        best = min(best, num / nrm2)
    if not np.isfinite(best):
        raise EmptySample("all probe points lie on the solution set")
    return best


def estimate_lipschitz(op: OperatorSpec, pairs: Sequence) -> float:
    """Max of ||F(x)-F(y)|| / ||x-y|| over the supplied pairs."""
    worst = 0.0
    for x, y in pairs:
        x = _check_point(x, op.dim)
        y = _check_point(y, op.dim)
        nrm = float(np.linalg.norm(x - y))
        if nrm < 1e-12:
            continue
        worst = max(worst, float(np.linalg.norm(evaluate_mean(op, x) - evaluate_mean(op, y))) / nrm)
    return worst


def estimate_strong_monotonicity(op: OperatorSpec, points: Sequence, step: float = 1e-6) -> float:
    """Smallest eigenvalue of the symmetrized numerical Jacobian of F.

    Random pair sampling cannot certify a zero modulus, so the audit
    minimizes the Rayleigh quotient exactly through an eigendecomposition of
    the finite-difference Jacobian at each base point.
    """
    worst = np.inf
    eye = np.eye(op.dim)
    for x in points:
        x = _check_point(x, op.dim)
        cols = []
        for j in range(op.dim):
            fp = evaluate_mean(op, x + step * eye[j])
            fm = evaluate_mean(op, x - step * eye[j])
            cols.append((fp - fm) / (2 * step))
        jac = np.column_stack(cols)
        sym = 0.5 * (jac + jac.T)
        worst = min(worst, float(np.linalg.eigvalsh(sym)[0]))
    if not np.isfinite(worst):
        raise EmptySample("no probe points supplied")
    return worst
