import numpy as np
import pytest

import fracfield as ff
from fracfield.fracop import OutOfRangeError
from fracfield.stationary import NoConvergenceError, sweep_to_csv


def test_nontriviality_predicate_thresholds():
    assert ff.nontriviality_predicate(0.9) == "exists-nontrivial"
    assert ff.nontriviality_predicate(1.0) == "only-trivial"
    assert ff.nontriviality_predicate(1.3) == "only-trivial"


def test_smallness_bound_closed_form():
    params = ff.PotentialParams(p=4)
    assert ff.smallness_bound(params, 0.5, 10.0) == pytest.approx(np.sqrt(10.0), rel=1e-14)


def test_smallness_bound_shrinks_to_zero_near_threshold():
    params = ff.PotentialParams(p=4)
    assert ff.smallness_bound(params, 1 - 1e-8, 10.0) <= 1e-3
    b1 = ff.smallness_bound(params, 0.9, 10.0)
    b2 = ff.smallness_bound(params, 0.99, 10.0)
    assert b2 < b1


def test_smallness_bound_preconditions():
    with pytest.raises(OutOfRangeError):
        ff.smallness_bound(ff.PotentialParams(p=4), 1.0, 10.0)
    with pytest.raises(OutOfRangeError):
        ff.smallness_bound(ff.PotentialParams(p=1.5), 0.5, 10.0)


def test_minimize_rejects_subquadratic_p(get_op):
    with pytest.raises(OutOfRangeError):
        ff.minimize_energy(get_op(0.0, 1.0, 32, 0.5), ff.PotentialParams(p=1.5))


def test_unit_interval_only_trivial_state(get_op):
    # lambda1(1/2) ~ 2.33 >= 1 on the unit interval, so the zero state is
    # the global minimizer
    op = get_op(0.0, 1.0, 64, 0.5)
    result = ff.minimize_energy(op, ff.PotentialParams(p=4))
    assert result.lambda1_sigma >= 1.0
    assert result.classification == "trivial"
    assert ff.lp_norm(result.u_star, 2) <= 1e-6
    assert ff.nontriviality_predicate(result.lambda1_sigma) == "only-trivial"


@pytest.fixture(scope="module")
def wide_result(get_op):
    op = get_op(0.0, 10.0, 255, 0.5)
    return op, ff.minimize_energy(op, ff.PotentialParams(p=4))


def test_wide_interval_nontrivial_state(wide_result):
    op, result = wide_result
    assert result.lambda1_sigma < 1.0
    assert result.classification in ("nontrivial-positive", "nontrivial-negative")
    vals = result.u_star.values
    assert vals.min() > 0 or vals.max() < 0
    assert result.energy < 0.0
    assert result.residual <= 1e-9


def test_stationary_virial_identity(wide_result):
    op, result = wide_result
    h = op.domain.h
    lp4 = h * float(np.sum(np.abs(result.u_star.values) ** 4))
    gap = abs(result.energy + (0.5 - 0.25) * lp4)
    assert gap <= 1e-6 * max(1.0, abs(result.energy))


def test_stationary_weak_form_residual_everywhere(wide_result):
    op, result = wide_result
    params = ff.PotentialParams(p=4)
    u = result.u_star.values
    g = op.A @ u + op.domain.h * ff.beta(params, u) - params.lam * (op.M_c @ u)
    assert np.abs(g).max() <= 1e-9


def test_norm_below_smallness_bound(wide_result):
    op, result = wide_result
    bound = ff.smallness_bound(ff.PotentialParams(p=4), result.lambda1_sigma, 10.0)
    assert ff.lp_norm(result.u_star, 2) < bound


def test_sign_reflected_starts_reach_equal_energy(get_op):
    op = get_op(0.0, 10.0, 255, 0.5)
    params = ff.PotentialParams(p=4)
    pair = ff.first_eigenpair(op)
    plus = ff.minimize_energy(op, params, starts=[0.1 * pair.e1])
    minus = ff.minimize_energy(op, params, starts=[-0.1 * pair.e1])
    assert abs(plus.energy - minus.energy) <= 1e-10
    assert {plus.classification, minus.classification} == {
        "nontrivial-positive", "nontrivial-negative",
    }


def test_sigma_sweep_norms_decrease(get_op):
    dom = ff.make_domain(0, 10, 255)
    params = ff.PotentialParams(p=4)
    rows = ff.stationary_sigma_sweep(dom, params, [0.5, 0.3, 0.15])
    norms = [row["norm_u"] for row in rows]
    lams = [row["lambda1"] for row in rows]
    assert all(b < a for a, b in zip(norms, norms[1:]))
    assert all(b > a for a, b in zip(lams, lams[1:]))  # lambda1 climbs toward 1
    for row in rows:
        assert row["classification"] != "trivial"
        assert row["norm_u"] < row["bound"]
    text = sweep_to_csv(rows)
    assert text.splitlines()[0] == "sigma,lambda1,norm_u,bound,energy,classification"


def test_unreachable_tolerance_raises(get_op):
    # the zero start is excluded: its residual is exactly zero, so it meets
    # any tolerance; nonzero starts bottom out at the roundoff floor
    op = get_op(0.0, 10.0, 63, 0.5)
    start = 0.1 * ff.first_eigenpair(op).e1
    with pytest.raises(NoConvergenceError):
        ff.minimize_energy(op, ff.PotentialParams(p=4), starts=[start], stat_tol=1e-30)
