import numpy as np
import pytest

from sqvi.errors import UnsupportedBaseSet
from sqvi.maps import (
    ArgminSet,
    FixedSet,
    NonlinearConvex,
    TranslatedSet,
    contractivity_audit,
    member,
    translated_projection,
)
from sqvi.projection import reference_project
from sqvi.sets import Ball, Box, Halfspaces

unit_ball = Ball(np.zeros(2), 1.0)


def half_shift_ball():
    return TranslatedSet(base_set=unit_ball, shift=lambda x: 0.5 * x, shift_lipschitz=0.5)


def test_member_fixed_ball():
    assert member(FixedSet(unit_ball), np.zeros(2), np.array([0.5, 0.0]), tol=0.0)
    assert not member(FixedSet(unit_ball), np.zeros(2), np.array([1.5, 0.0]), tol=0.0)


def test_member_translated_boundary():
    m = half_shift_ball()
    assert member(m, np.array([2.0, 0.0]), np.array([2.0, 0.0]), tol=0.0)


def test_member_nonlinear_convex():
    m = NonlinearConvex(
        ambient=Box(np.full(2, -5.0), np.full(2, 5.0)),
        constraint=lambda x, y: np.array([float(y @ y) - x[0]]),
        jacobian=lambda x, y: 2.0 * y[None, :],
    )
    assert not member(m, np.array([1.0, 0.0]), np.array([1.1, 0.0]), tol=1e-6)
    assert member(m, np.array([1.0, 0.0]), np.array([0.9, 0.0]), tol=1e-6)


def test_member_argmin_set():
    # lower objective 0.5*(y-2)^2 over [0,1]: argmin is {1}
    m = ArgminSet(
        feasible=Box([0.0], [1.0]),
        objective=lambda x, y: 0.5 * float((y[0] - 2.0) ** 2),
        grad=lambda x, y: y - 2.0,
        curvature=1.0,
        regularization=1e-2,
    )
    assert member(m, np.zeros(1), np.array([1.0]), tol=1e-8)
    assert not member(m, np.zeros(1), np.array([0.4]), tol=1e-3)


def test_translated_projection_worked_values():
    m = half_shift_ball()
    np.testing.assert_allclose(
        translated_projection(m, np.array([2.0, 0.0]), np.array([2.0, 0.0])), [2.0, 0.0]
    )
    np.testing.assert_allclose(
        translated_projection(m, np.zeros(2), np.array([3.0, 4.0])), [0.6, 0.8]
    )
    box_map = TranslatedSet(
        base_set=Box(-np.ones(2), np.ones(2)), shift=lambda x: np.zeros(2), shift_lipschitz=0.0
    )
    np.testing.assert_allclose(
        translated_projection(box_map, np.zeros(2), np.array([2.0, -3.0])), [1.0, -1.0]
    )


def test_translated_projection_unsupported_base():
    m = TranslatedSet(
        base_set=Halfspaces([[1.0, 0.0], [0.0, 1.0]], [1.0, 1.0]),
        shift=lambda x: x,
        shift_lipschitz=1.0,
    )
    with pytest.raises(UnsupportedBaseSet):
        translated_projection(m, np.zeros(2), np.ones(2))


def test_gamma_defaults_to_twice_shift_constant():
    assert half_shift_ball().gamma == 1.0
    assert FixedSet(unit_ball).gamma == 0.0


def test_contractivity_fixed_set_is_zero(rng):
    m = FixedSet(unit_ball)
    triples = list(rng.standard_normal((50, 3, 2)))
    rep = contractivity_audit(m, lambda x, u: unit_ball.project(u), triples)
    assert rep.max_ratio == 0.0 and rep.passed


def test_contractivity_translated_bound(rng):
    m = TranslatedSet(base_set=unit_ball, shift=lambda x: 0.1 * x, shift_lipschitz=0.1)
    triples = [tuple(3.0 * rng.standard_normal((3, 2))) for _ in range(10000)]
    rep = contractivity_audit(m, lambda x, u: translated_projection(m, x, u), triples)
    assert rep.max_ratio <= 0.2 + 1e-9
    assert rep.passed


def test_contractivity_collinear_far_query():
    # u far out along the shift direction: the exact ratio approaches the
    # shift constant, half the declared bound
    m = TranslatedSet(base_set=unit_ball, shift=lambda x: 0.1 * x, shift_lipschitz=0.1)
    e = np.array([1.0, 0.0])
    triples = [(0.5 * e, 1.5 * e, 1e6 * e)]
    rep = contractivity_audit(m, lambda x, u: translated_projection(m, x, u), triples)
    assert abs(rep.max_ratio - 0.1) <= 1e-5


def test_contractivity_skips_degenerate_triples(rng):
    m = FixedSet(unit_ball)
    x = rng.standard_normal(2)
    triples = [(x, x.copy(), rng.standard_normal(2))]
    rep = contractivity_audit(m, lambda x, u: unit_ball.project(u), triples)
    assert rep.skipped == 1


def test_reference_project_closed_forms():
    np.testing.assert_allclose(
        reference_project(FixedSet(unit_ball), np.zeros(2), np.array([3.0, 4.0])), [0.6, 0.8]
    )
    m = half_shift_ball()
    np.testing.assert_allclose(
        reference_project(m, np.zeros(2), np.array([3.0, 4.0])), [0.6, 0.8]
    )
