"""Closed convex sets with closed-form Euclidean projections.

Concrete carriers for constraint sets: balls, boxes, the probability
simplex, halfspace systems, affine sets, and block products of those.
Projections are exact up to floating point, except for intersections of
two or more halfspaces, which have no closed form and are routed to the
iterative engine in :mod:`sqvi.projection`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import DimensionMismatch, UnsupportedSet

Array = np.ndarray


def _vec(x, dim=None, name="vector") -> Array:
    v = np.atleast_1d(np.asarray(x, dtype=float))
    if v.ndim != 1:
        raise DimensionMismatch(f"{name} must be one-dimensional, got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise DimensionMismatch(f"{name} has dimension {v.shape[0]}, expected {dim}")
    return v


class SimpleSet:
    """Interface: exact projection, membership, anchor point, diameter."""

    dim: int

    def project(self, u: Array) -> Array:
        raise NotImplementedError

    def contains(self, y: Array, tol: float = 0.0) -> bool:
        raise NotImplementedError

    def anchor(self) -> Array:
        """A canonical point of the set, used as a default start/initial point."""
        raise UnsupportedSet(f"{type(self).__name__} has no canonical anchor point")

    def diameter(self) -> float:
        return float("inf")


@dataclass(frozen=True, eq=False)
class Ball(SimpleSet):
    """Euclidean ball {y : ||y - center|| <= radius}."""

    center: Array
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _vec(self.center, name="center"))
        if not self.radius > 0:
            raise UnsupportedSet("ball radius must be positive")

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def project(self, u: Array) -> Array:
        u = _vec(u, self.dim, "point")
        d = u - self.center
        nrm = float(np.linalg.norm(d))
        if nrm <= self.radius:
            return u.copy()
        return self.center + d * (self.radius / nrm)

    def contains(self, y: Array, tol: float = 0.0) -> bool:
        y = _vec(y, self.dim, "point")
        return float(np.linalg.norm(y - self.center)) <= self.radius + tol

    def anchor(self) -> Array:
        return self.center.copy()

    def diameter(self) -> float:
        return 2.0 * self.radius


@dataclass(frozen=True, eq=False)
class Box(SimpleSet):
    """Axis-aligned box {y : lo <= y <= hi} componentwise. lo == hi is allowed."""

    lo: Array
    hi: Array

    def __post_init__(self):
        object.__setattr__(self, "lo", _vec(self.lo, name="lo"))
        object.__setattr__(self, "hi", _vec(self.hi, self.lo.shape[0], "hi"))
        if np.any(self.lo > self.hi):
            raise UnsupportedSet("box requires lo <= hi componentwise")

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    def project(self, u: Array) -> Array:
        u = _vec(u, self.dim, "point")
        return np.clip(u, self.lo, self.hi)

    def contains(self, y: Array, tol: float = 0.0) -> bool:
        y = _vec(y, self.dim, "point")
        return bool(np.all(y >= self.lo - tol) and np.all(y <= self.hi + tol))

    def anchor(self) -> Array:
        return 0.5 * (self.lo + self.hi)

    def diameter(self) -> float:
        return float(np.linalg.norm(self.hi - self.lo))


@dataclass(frozen=True, eq=False)
class Simplex(SimpleSet):
    """Scaled probability simplex {y : y >= 0, sum(y) = scale}."""

    dim: int
    scale: float = 1.0

    def __post_init__(self):
        if self.dim < 1:
            raise DimensionMismatch("simplex dimension must be >= 1")
        if not self.scale > 0:
            raise UnsupportedSet("simplex scale must be positive")

    def project(self, u: Array) -> Array:
        # Sort-based algorithm; O(n log n) and exact.
        u = _vec(u, self.dim, "point")
        srt = np.sort(u)[::-1]
        css = np.cumsum(srt)
        idx = np.arange(1, self.dim + 1)
        cond = srt - (css - self.scale) / idx > 0
        rho = int(np.nonzero(cond)[0][-1])
        theta = (css[rho] - self.scale) / (rho + 1.0)
        return np.maximum(u - theta, 0.0)

    def contains(self, y: Array, tol: float = 0.0) -> bool:
        y = _vec(y, self.dim, "point")
        return bool(np.all(y >= -tol) and abs(float(np.sum(y)) - self.scale) <= tol + 1e-15)

    def anchor(self) -> Array:
        return np.full(self.dim, self.scale / self.dim)

    def diameter(self) -> float:
        return float(np.sqrt(2.0) * self.scale)


@dataclass(frozen=True, eq=False)
class Halfspaces(SimpleSet):
    """Intersection {y : A y <= b}. Closed-form projection only for one row."""

    normals: Array
    offsets: Array

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.normals, dtype=float))
        b = _vec(self.offsets, a.shape[0], "offsets")
        if np.any(np.linalg.norm(a, axis=1) == 0.0):
            raise UnsupportedSet("halfspace normal must be nonzero")
        object.__setattr__(self, "normals", a)
        object.__setattr__(self, "offsets", b)

    @property
    def dim(self) -> int:
        return self.normals.shape[1]

    def project(self, u: Array) -> Array:
        u = _vec(u, self.dim, "point")
        if self.normals.shape[0] != 1:
            raise UnsupportedSet(
                "no closed-form projection onto an intersection of halfspaces; "
                "use the iterative projection engine"
            )
        a = self.normals[0]
        viol = float(a @ u - self.offsets[0])
        if viol <= 0.0:
            return u.copy()
        return u - (viol / float(a @ a)) * a

    def contains(self, y: Array, tol: float = 0.0) -> bool:
        y = _vec(y, self.dim, "point")
        return bool(np.all(self.normals @ y - self.offsets <= tol))

    def violation(self, y: Array) -> float:
        y = _vec(y, self.dim, "point")
        return float(np.max(np.maximum(self.normals @ y - self.offsets, 0.0), initial=0.0))


@dataclass(frozen=True, eq=False)
class AffineSet(SimpleSet):
    """Affine set {y : A y = b}."""

    A: Array
    b: Array

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.A, dtype=float))
        rhs = _vec(self.b, a.shape[0], "b")
        object.__setattr__(self, "A", a)
        object.__setattr__(self, "b", rhs)
        object.__setattr__(self, "_pinv", np.linalg.pinv(a))

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    def project(self, u: Array) -> Array:
        u = _vec(u, self.dim, "point")
        return u - self._pinv @ (self.A @ u - self.b)

    def contains(self, y: Array, tol: float = 0.0) -> bool:
        y = _vec(y, self.dim, "point")
        return float(np.max(np.abs(self.A @ y - self.b), initial=0.0)) <= tol

    def anchor(self) -> Array:
        return self._pinv @ self.b


@dataclass(frozen=True, eq=False)
class ProductSet(SimpleSet):
    """Cartesian product of simple sets; projection/membership are blockwise."""

    parts: Tuple[SimpleSet, ...]

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))
        if not self.parts:
            raise DimensionMismatch("product of zero sets")
        splits = np.cumsum([p.dim for p in self.parts])[:-1]
        object.__setattr__(self, "_splits", splits)

    @property
    def dim(self) -> int:
        return int(sum(p.dim for p in self.parts))

    def blocks(self, y: Array):
        y = _vec(y, self.dim, "point")
        return np.split(y, self._splits)

    def project(self, u: Array) -> Array:
        return np.concatenate([p.project(blk) for p, blk in zip(self.parts, self.blocks(u))])

    def contains(self, y: Array, tol: float = 0.0) -> bool:
        return all(p.contains(blk, tol) for p, blk in zip(self.parts, self.blocks(y)))

    def anchor(self) -> Array:
        return np.concatenate([p.anchor() for p in self.parts])

    def diameter(self) -> float:
        return float(np.sqrt(sum(p.diameter() ** 2 for p in self.parts)))


def project_simple(s: SimpleSet, u: Array) -> Array:
    """Exact Euclidean projection of ``u`` onto ``s``.

    Raises UnsupportedSet when the set has no closed form (intersections of
    two or more halfspaces); such sets are handled by the iterative engine.
    """
    return s.project(u)


def has_closed_form(s: SimpleSet) -> bool:
    if isinstance(s, Halfspaces):
        return s.normals.shape[0] == 1
    if isinstance(s, ProductSet):
        return all(has_closed_form(p) for p in s.parts)
    return isinstance(s, (Ball, Box, Simplex, AffineSet))
