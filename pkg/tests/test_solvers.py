import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sqvi.errors import (
    InvalidConstants,
    InvalidParameters,
    InvalidSchedule,
    NoAdmissibleStep,
    NonfiniteIterate,
    NotReached,
)
from sqvi.maps import FixedSet
from sqvi.operators import OperatorSpec
from sqvi.problems import Constants, ProblemInstance, make_translated_box_qvi
from sqvi.sets import Box
from sqvi.solvers import (
    ConstantMinibatch,
    DampedInner,
    Deterministic,
    IncreasingSample,
    SolverConfig,
    admissible_eta_interval,
    contraction_factor,
    derive_beta,
    derive_params,
    oracle_complexity_report,
    run_ieg_sqvi,
    run_ig_sqvi,
    schedule_values,
)

# ---------------------------------------------------------------------------
# parameter algebra


def test_derive_beta_worked_values():
    assert abs(derive_beta(1, 1, 0, 1) - 0.0) <= 1e-12
    assert abs(derive_beta(1, 1, 0, 0.5) - 0.5) <= 1e-12
    assert abs(derive_beta(2, 1, 0.05, 0.25) - (0.05 + math.sqrt(0.75))) <= 1e-12


def test_derive_beta_rejects_mu_above_l():
    with pytest.raises(InvalidConstants):
        derive_beta(1.0, 2.0, 0.0, 0.5)


def test_admissible_interval_worked_values():
    lo, hi = admissible_eta_interval(1, 1, 0)
    assert abs(lo) <= 1e-12 and abs(hi - 2) <= 1e-12
    lo, hi = admissible_eta_interval(1, 1, 0.1)
    assert abs(lo - 0.1) <= 1e-12 and abs(hi - 1.9) <= 1e-12
    with pytest.raises(NoAdmissibleStep):
        admissible_eta_interval(1, 0.5, 0.5)


def test_contraction_factor_worked_values():
    assert abs(contraction_factor(0.5, 0.5, 1) - 0.375) <= 1e-15
    assert abs(contraction_factor(0.5, 0.5, 0) - 0.25) <= 1e-15
    assert abs(contraction_factor(0.9, 0.0, 123.0) - 0.9) <= 1e-15
    with pytest.raises(InvalidParameters):
        contraction_factor(1.5, 0.5, 0)
    with pytest.raises(InvalidParameters):
        contraction_factor(0.5, 0.5, 3.0)


@settings(max_examples=200, deadline=None)
@given(
    lip=st.floats(0.5, 3.0),
    ratio=st.floats(0.55, 0.999),
    frac=st.floats(0.0, 0.95),
)
def test_beta_equals_one_at_interval_endpoints(lip, ratio, frac):
    mu = ratio * lip
    gamma = frac * (1.0 - math.sqrt(1.0 - ratio * ratio))
    lo, hi = admissible_eta_interval(lip, mu, gamma)
    assert abs(derive_beta(lip, mu, gamma, lo) - 1.0) <= 1e-10
    assert abs(derive_beta(lip, mu, gamma, hi) - 1.0) <= 1e-10
    mid = 0.5 * (lo + hi)
    assert derive_beta(lip, mu, gamma, mid) < 1.0


# ---------------------------------------------------------------------------
# schedules


def test_schedule_worked_values():
    assert schedule_values(IncreasingSample(0.5), 0.9, 3) == (64, 83)
    assert schedule_values(IncreasingSample(0.5), 0.9, 0) == (1, 1)
    assert schedule_values(ConstantMinibatch(32), 0.5, 2) == (32, 24)


def test_schedule_rejects_small_rho():
    with pytest.raises(InvalidSchedule):
        schedule_values(IncreasingSample(0.3), 0.5, 1)


def test_damped_schedule_floors_at_one():
    assert schedule_values(DampedInner(), None, 0) == (1, 1)
    assert schedule_values(DampedInner(), None, 1) == (1, 1)
    n5, t5 = schedule_values(DampedInner(), None, 5)
    assert n5 == 1 and t5 == math.ceil(5 * math.log(6.0) ** 2 * (1 - 1e-3) ** 5)


def test_deterministic_default_rho_stays_valid():
    # tiny q pushes 1 - q + 0.05 above 1; the default must stay in (1-q, 1)
    n, t = schedule_values(Deterministic(), 0.01, 3)
    assert n == 1 and t >= 1


@settings(max_examples=80, deadline=None)
@given(rho=st.floats(0.55, 0.99), k=st.integers(0, 40))
def test_increasing_schedule_grows_monotonically(rho, k):
    n0, t0 = schedule_values(IncreasingSample(rho), None, k)
    n1, t1 = schedule_values(IncreasingSample(rho), None, k + 1)
    assert n1 >= n0 >= 1
    assert t0 >= 1 and t1 >= 1
    # the prescribed batch is the ceiled geometric value exactly
    assert n0 == math.ceil(rho ** (-2 * k))


# ---------------------------------------------------------------------------
# run loops


def singleton_problem(target, alpha_dim=2):
    tgt = np.asarray(target, dtype=float)
    op = OperatorSpec(dim=alpha_dim, lipschitz=1.0, qg_mu=1.0, mean_eval=lambda x: x - tgt)
    box = Box(tgt, tgt)
    ambient = Box(tgt - 4.0, tgt + 4.0)
    return ProblemInstance(
        name="singleton",
        operator=op,
        map=FixedSet(box),
        ambient=ambient,
        x0=tgt + np.array([3.0, -2.0]),
        constants=Constants(lipschitz=1.0, qg_mu=1.0, gamma=0.0, noise=0.0),
        suggested_eta=1.0,
        reference_projector=lambda z: tgt,
    )


def test_singleton_constraint_contracts_at_exactly_one_minus_alpha():
    prob = singleton_problem([0.5, -1.0])
    for runner in (run_ieg_sqvi, run_ig_sqvi):
        cfg = SolverConfig(eta=1.0, alpha=0.7, b=0.5, schedule=Deterministic(), max_outer=25, seed=0)
        trace = runner(prob, cfg, metrics=("dist",))
        d = np.concatenate([[trace.initial_metrics["dist"]], trace.metric_series("dist")])
        ratios = d[1:] / d[:-1]
        usable = d[:-1] > 1e-6  # below this, absolute rounding dominates the ratio
        assert np.all(np.abs(ratios[usable] - 0.3) <= 1e-9)


def test_traces_are_deterministic(noisy_box_problem):
    cfg = SolverConfig(
        eta=noisy_box_problem.suggested_eta, alpha=0.8, b=1.0,
        schedule=IncreasingSample(0.9), max_outer=15, seed=42,
    )
    t1 = run_ieg_sqvi(noisy_box_problem, cfg, metrics=("dist", "residual"))
    t2 = run_ieg_sqvi(noisy_box_problem, cfg, metrics=("dist", "residual"))
    for r1, r2 in zip(t1.rows, t2.rows):
        assert r1.metrics == r2.metrics and r1.n_k == r2.n_k and r1.t_k == r2.t_k


def test_trace_matches_schedule_exactly(noisy_box_problem):
    cfg = SolverConfig(
        eta=noisy_box_problem.suggested_eta, alpha=0.8, b=1.0,
        schedule=IncreasingSample(0.9), max_outer=12, seed=1,
    )
    trace = run_ieg_sqvi(noisy_box_problem, cfg, metrics=("dist",))
    params = derive_params(noisy_box_problem, cfg, extra_gradient=True)
    for row in trace.rows:
        n_k, t_k = schedule_values(cfg.schedule, params.q, row.k)
        assert (row.n_k, row.t_k) == (n_k, t_k)
    # two batches per extra-gradient iteration
    assert trace.rows[-1].cum_samples == 2 * sum(r.n_k for r in trace.rows)
    cums = [(r.cum_samples, r.cum_inner) for r in trace.rows]
    assert cums == sorted(cums)


def test_iterates_stay_in_ambient(noisy_box_problem):
    cfg = SolverConfig(
        eta=noisy_box_problem.suggested_eta, alpha=0.8, b=1.0,
        schedule=IncreasingSample(0.9), max_outer=20, seed=5,
    )
    trace = run_ieg_sqvi(noisy_box_problem, cfg, metrics=("dist",))
    final = np.asarray(trace.summary["final_point"])
    assert noisy_box_problem.ambient.contains(final, 1e-10)


def test_metric_floor_stops_early(box_problem):
    cfg = SolverConfig(
        eta=box_problem.suggested_eta, alpha=0.9, b=1.0,
        schedule=Deterministic(), max_outer=200, seed=0,
        metric_floor=("dist", 1e-6),
    )
    trace = run_ieg_sqvi(box_problem, cfg, metrics=("dist",))
    assert trace.summary["stopped_early"]
    assert trace.rows[-1].metrics["dist"] <= 1e-6
    assert len(trace.rows) < 200


def test_invalid_eta_rejected(box_problem):
    cfg = SolverConfig(eta=50.0, alpha=0.5, schedule=Deterministic(), max_outer=5, seed=0)
    with pytest.raises(InvalidParameters):
        run_ig_sqvi(box_problem, cfg, metrics=("dist",))


def test_nonfinite_iterate_raises():
    op = OperatorSpec(dim=2, lipschitz=1.0, qg_mu=1.0, mean_eval=lambda x: np.full(2, np.nan))
    prob = ProblemInstance(
        name="nan",
        operator=op,
        map=FixedSet(Box(-np.ones(2), np.ones(2))),
        ambient=Box(-np.ones(2), np.ones(2)),
        x0=np.zeros(2),
        constants=Constants(1.0, 1.0, 0.0, 0.0),
        suggested_eta=1.0,
    )
    cfg = SolverConfig(eta=1.0, alpha=0.5, schedule=Deterministic(), max_outer=3, seed=0)
    with pytest.raises(NonfiniteIterate):
        run_ig_sqvi(prob, cfg, metrics=())


def test_fixed_box_vi_contraction_within_theory():
    # plain affine VI over a fixed box (zero shift): per-iteration distance
    # contraction stays within the theoretical factor 1-q plus slack
    prob = make_translated_box_qvi(n=12, shift_slope=0.0, seed=11)
    cfg = SolverConfig(
        eta=prob.suggested_eta, alpha=0.9, b=2.0, schedule=Deterministic(), max_outer=30, seed=0
    )
    q = derive_params(prob, cfg, extra_gradient=True).q
    trace = run_ieg_sqvi(prob, cfg, metrics=("dist",))
    d = np.concatenate([[trace.initial_metrics["dist"]], trace.metric_series("dist")])
    usable = d[:-1] > 1e-9
    ratios = (d[1:] / d[:-1])[usable]
    assert np.all(ratios[2:] <= 1 - q + 0.02)


# ---------------------------------------------------------------------------
# complexity report


def test_complexity_report_crossing(box_problem):
    cfg = SolverConfig(
        eta=box_problem.suggested_eta, alpha=0.9, b=1.0,
        schedule=Deterministic(), max_outer=40, seed=0,
    )
    trace = run_ieg_sqvi(box_problem, cfg, metrics=("dist",))
    rep = oracle_complexity_report(trace, 1e-4, metric="dist")
    assert rep.outer_iterations == rep.first_k + 1
    assert rep.total_samples == sum(r.n_k for r in trace.rows[: rep.first_k + 1])
    assert trace.rows[rep.first_k].metrics["dist"] <= 1e-4
    if rep.first_k > 0:
        assert trace.rows[rep.first_k - 1].metrics["dist"] > 1e-4

    big = oracle_complexity_report(trace, 1e9, metric="dist")
    assert big == (0, 0, 0, 0)
    with pytest.raises(NotReached):
        oracle_complexity_report(trace, 1e-300, metric="dist")


def test_inner_iteration_totals_scale_like_inverse_epsilon(box_problem):
    # measured sum of inner budgets to reach epsilon, against (1/eps)*log(1/eps);
    # the ratio should stay within a modest band across the grid
    cfg = SolverConfig(
        eta=box_problem.suggested_eta, alpha=0.9, b=2.0,
        schedule=Deterministic(rho=0.9), max_outer=80, seed=0,
    )
    trace = run_ieg_sqvi(box_problem, cfg, metrics=("dist",))
    ratios = []
    for eps in (1e-2, 1e-4, 1e-6):
        rep = oracle_complexity_report(trace, eps, metric="dist")
        ratios.append(rep.total_inner / ((1.0 / eps) * math.log(1.0 / eps)))
    assert max(ratios) / min(ratios) <= 10.0
