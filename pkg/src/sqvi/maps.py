"""Set-valued constraint maps K(x) and their audits.

Four map shapes are supported: a fixed set, a translated set m(x) + K, a
set cut out by convex inequalities g(x, y) <= 0 inside an ambient set, and
the solution set of a parametric convex lower-level problem. Every map
carries a declared contractivity constant ``gamma`` bounding how fast the
projection onto K(x) moves with x.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence, Union

import numpy as np

from .errors import DimensionMismatch, UnsupportedBaseSet, UnsupportedSet
from .sets import Array, SimpleSet, has_closed_form


@dataclass(frozen=True, eq=False)
class FixedSet:
    """K(x) = base_set for every x; gamma is 0 by definition."""

    base_set: SimpleSet

    @property
    def gamma(self) -> float:
        return 0.0

    @property
    def dim(self) -> int:
        return self.base_set.dim


@dataclass(frozen=True, eq=False)
class TranslatedSet:
    """K(x) = shift(x) + base_set with shift Lipschitz constant shift_lipschitz.

    The declared gamma defaults to twice the shift constant, which is what
    the translation identity for projections yields.
    """

    base_set: SimpleSet
    shift: Callable[[Array], Array]
    shift_lipschitz: float
    gamma: Optional[float] = None

    def __post_init__(self):
        if self.shift_lipschitz < 0:
            raise DimensionMismatch("shift Lipschitz constant must be nonnegative")
        if self.gamma is None:
            object.__setattr__(self, "gamma", 2.0 * self.shift_lipschitz)

    @property
    def dim(self) -> int:
        return self.base_set.dim


@dataclass(frozen=True, eq=False)
class NonlinearConvex:
    """K(x) = {y in ambient : constraint(x, y) <= 0 componentwise}.

    ``constraint(x, y)`` returns an (m,) vector convex in y for each fixed x;
    ``jacobian(x, y)`` its (m, dim) derivative in y. ``jacobian_bound`` caps
    the Jacobian spectral norm over the ambient set (estimated on demand if
    omitted); ``dist_constant`` scales the inexact-projection certificate.
    """

    ambient: SimpleSet
    constraint: Callable[[Array, Array], Array]
    jacobian: Callable[[Array, Array], Array]
    gamma: float = 0.0
    jacobian_bound: Optional[float] = None
    dist_constant: Optional[float] = None

    @property
    def dim(self) -> int:
        return self.ambient.dim


@dataclass(frozen=True, eq=False)
class ArgminSet:
    """K(x) = argmin of a parametric convex objective over a feasible set.

    objective(x, y) is convex in y with gradient grad(x, y) whose Lipschitz
    constant in y is bounded by ``curvature``. Projections onto this set are
    computed through a Tikhonov-regularized surrogate with weight
    1/``regularization`` on the lower objective; ``exact_reg_project``, when
    supplied by a problem constructor, solves that surrogate in closed form
    and serves as the reference projector.
    """

    feasible: SimpleSet
    objective: Callable[[Array, Array], float]
    grad: Callable[[Array, Array], Array]
    curvature: float
    regularization: float
    gamma: float = 0.0
    exact_reg_project: Optional[Callable[[Array, Array], Array]] = None
    # optional factory hoisting the x-dependent part of the gradient out of
    # the inner loop: grad_at(x) returns y -> grad(x, y)
    grad_at: Optional[Callable[[Array], Callable[[Array], Array]]] = None
    min_value_budget: int = 20000

    def __post_init__(self):
        if not (self.regularization > 0):
            raise DimensionMismatch("regularization weight must be positive")
        if not (self.curvature >= 0):
            raise DimensionMismatch("curvature bound must be nonnegative")

    @property
    def dim(self) -> int:
        return self.feasible.dim

    def min_value(self, x: Array, budget: Optional[int] = None) -> float:
        """High-accuracy minimum of the lower objective at parameter x."""
        from .projection import fista_solve  # local import to avoid a cycle

        budget = budget or self.min_value_budget
        y0 = self.feasible.anchor() if _has_anchor(self.feasible) else np.zeros(self.dim)
        res = fista_solve(
            value=lambda y: self.objective(x, y),
            grad=lambda y: self.grad(x, y),
            curvature=max(self.curvature, 1e-12),
            strong_convexity=0.0,
            feasible=self.feasible,
            y0=y0,
            t=budget,
        )
        return float(self.objective(x, res.point))


def _has_anchor(s: SimpleSet) -> bool:
    try:
        s.anchor()
        return True
    except UnsupportedSet:
        return False


SetValuedMap = Union[FixedSet, TranslatedSet, NonlinearConvex, ArgminSet]


def member(mapping: SetValuedMap, x, y, tol: float = 0.0) -> bool:
    """Whether y lies in K(x) up to tol.

    For inequality-constrained maps the test is componentwise g(x, y) <= tol
    inside the ambient set; for argmin maps it is lower-objective
    suboptimality <= tol inside the feasible set.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if y.shape != (mapping.dim,):
        raise DimensionMismatch(f"candidate has shape {y.shape}, expected ({mapping.dim},)")
    if isinstance(mapping, FixedSet):
        return mapping.base_set.contains(y, tol)
    if isinstance(mapping, TranslatedSet):
        return mapping.base_set.contains(y - np.asarray(mapping.shift(x), float), tol)
    if isinstance(mapping, NonlinearConvex):
        if not mapping.ambient.contains(y, tol):
            return False
        g = np.atleast_1d(np.asarray(mapping.constraint(x, y), float))
        return bool(np.all(g <= tol))
    if isinstance(mapping, ArgminSet):
        if not mapping.feasible.contains(y, tol):
            return False
        gap = float(mapping.objective(x, y)) - mapping.min_value(x)
        return gap <= tol
    raise TypeError(f"unknown map type {type(mapping)!r}")


def translated_projection(mapping: TranslatedSet, x, u) -> Array:
    """Exact projection onto a translated set: shift(x) + P_base(u - shift(x))."""
    if not isinstance(mapping, TranslatedSet):
        raise TypeError("translated_projection requires a TranslatedSet")
    if not has_closed_form(mapping.base_set):
        raise UnsupportedBaseSet("base set lacks a closed-form projection")
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    m = np.asarray(mapping.shift(x), dtype=float)
    return m + mapping.base_set.project(u - m)


class ContractivityReport(NamedTuple):
    max_ratio: float
    passed: bool
    declared: float
    skipped: int


def contractivity_audit(
    mapping: SetValuedMap,
    projector: Callable[[Array, Array], Array],
    triples: Sequence,
    declared: Optional[float] = None,
) -> ContractivityReport:
    """Max over triples (x, y, u) of ||P_K(x)[u] - P_K(y)[u]|| / ||x - y||.

    ``projector(x, u)`` must be a high-accuracy projection onto K(x).
    Triples with ||x - y|| < 1e-12 are degenerate and skipped. Passes when
    the ratio does not exceed the declared gamma plus 1e-6.
    """
    declared = mapping.gamma if declared is None else declared
    worst = 0.0
    skipped = 0
    for x, y, u in triples:
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        nrm = float(np.linalg.norm(x - y))
        if nrm < 1e-12:
            skipped += 1
            continue
        px = np.asarray(projector(x, u), float)
        py = np.asarray(projector(y, u), float)
        worst = max(worst, float(np.linalg.norm(px - py)) / nrm)
    return ContractivityReport(
        max_ratio=worst, passed=worst <= declared + 1e-6, declared=declared, skipped=skipped
    )
