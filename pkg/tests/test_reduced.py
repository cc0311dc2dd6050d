import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from slowfast import (NewtonDivergence, RootMap, SingularJacobian, check_degenerate_impulse,
                      check_root_continuity, integrate_reduced, parse_spec, solve_root,
                      validate_system)
from slowfast.reduced import MAX_NEWTON_ITER

from conftest import ex11_reduced, logistic, rootmap_of


def ex11_F(z, y, t):
    return z * (1 - z - 2 * y)


# -- solve_root -----------------------------------------------------------

def test_cubic_root_from_half():
    z = solve_root(lambda z, y, t: -z - z ** 3, np.zeros(0), 0.0, [0.5])
    assert abs(z[0]) <= 1e-12


def test_ex11_zero_branch():
    z = solve_root(ex11_F, [2.0], 0.0, [0.1])
    assert abs(z[0]) <= 1e-12


def test_ex11_other_branch_reached_from_nearby_seed():
    z = solve_root(ex11_F, [2.0], 0.0, [-2.5])
    assert z[0] == pytest.approx(-3.0, abs=1e-12)


def test_ex11_seed_between_branches_lands_on_a_root():
    # From 0.9 plain Newton is drawn to z = 0, not to 1 - 2y.
    z = solve_root(ex11_F, [2.0], 0.0, [0.9])
    assert abs(ex11_F(z, np.array([2.0]), 0.0)[0]) <= 1e-12
    assert min(abs(z[0]), abs(z[0] + 3)) < 1e-9


@settings(max_examples=50, deadline=None)
@given(a=st.floats(-1e3, 1e3), g=st.floats(-1e3, 1e3))
def test_linear_root_in_one_step(a, g):
    # the tolerance covers rounding in the finite-difference slope only
    tol = 1e-6 * (1 + abs(a - g))
    z = solve_root(lambda z, y, t: z - a, np.zeros(0), 0.0, [g], root_tol=tol, max_iter=1)
    assert abs(z[0] - a) <= tol


@settings(max_examples=50, deadline=None)
@given(a=st.floats(-1e6, 1e6), g=st.floats(-1e6, 1e6))
def test_linear_root_needs_at_most_a_cleanup_step(a, g):
    calls = []

    def F(z, y, t):
        calls.append(1)
        return z - a

    z = solve_root(F, np.zeros(0), 0.0, [g])
    assert abs(z[0] - a) <= 1e-12 * max(1.0, abs(a))
    # per step: residual plus two slope evaluations; then the final residual
    assert len(calls) <= 2 * 3 + 1


def test_vector_root():
    def F(z, y, t):
        return np.array([z[0] + z[1] - 3, z[0] - z[1] - 1])

    np.testing.assert_allclose(solve_root(F, np.zeros(0), 0.0, [0, 0]), [2, 1], atol=1e-12)


def test_singular_jacobian():
    with pytest.raises(SingularJacobian) as err:
        solve_root(lambda z, y, t: np.array([1.0 + 0 * z[0]]), np.zeros(0), 0.0, [0.3])
    np.testing.assert_allclose(err.value.last_iterate, [0.3])


def test_newton_divergence_on_rootless_function():
    # z^2 + 1 has no real root; Newton wanders without converging
    with pytest.raises((NewtonDivergence, SingularJacobian)):
        solve_root(lambda z, y, t: z * z + 1, np.zeros(0), 0.0, [0.7])


def test_newton_budget_exhausted():
    # Newton cycles 0 -> 1 -> 0 on this cubic
    with pytest.raises(NewtonDivergence) as err:
        solve_root(lambda z, y, t: z ** 3 - 2 * z + 2, np.zeros(0), 0.0, [0.0])
    assert err.value.last_iterate[0] in (pytest.approx(0.0, abs=1e-6), pytest.approx(1.0, abs=1e-6))
    assert MAX_NEWTON_ITER == 50


def test_nonfinite_residual_is_divergence():
    with pytest.raises(NewtonDivergence):
        solve_root(lambda z, y, t: z * np.inf, np.zeros(0), 0.0, [1.0])


# -- RootMap --------------------------------------------------------------

def test_rootmap_residual_contract_along_path(ex11):
    rm = rootmap_of(ex11)
    for t in np.linspace(0, 2, 41):
        y = np.array([logistic(t, 2.0)])
        z = rm(y, t)
        assert rm.residual(z, y, t) <= 1e-12 * max(1.0, np.linalg.norm(z))


def test_continuation_tracks_other_branch():
    rm = RootMap(ex11_F, [-2.5])
    ys = np.linspace(2.0, 1.0, 21)
    zs = np.array([rm([y], 0.0)[0] for y in ys])
    np.testing.assert_allclose(zs, 1 - 2 * ys, atol=1e-10)
    assert rm.max_jump < 0.2


def test_continuation_coherence_as_step_halves():
    F = lambda z, y, t: z - np.sin(3 * t) - y[0] ** 2
    ratios = []
    for h in (0.02, 0.01, 0.005):
        rm = RootMap(F, [0.0])
        ts = np.arange(0, 1 + h / 2, h)
        for t in ts:
            rm([0.5 + t], t)
        ratios.append(rm.max_jump / h)
    assert max(ratios) < 10
    assert ratios[-1] == pytest.approx(ratios[0], rel=0.1)


def test_clone_is_independent():
    rm = RootMap(ex11_F, [-2.5])
    rm([2.0], 0.0)
    cl = rm.clone()
    cl([1.0], 0.0)
    assert rm.last[0] == pytest.approx(-3.0)
    assert cl.last[0] == pytest.approx(-1.0)


def test_isolation_probe(ex11):
    rm = rootmap_of(ex11)
    res, isolated = rm.isolation_probe([2.0], 0.0)
    assert isolated and res > 1e-6
    flat = RootMap(lambda z, y, t: z ** 9, [0.0], isolation_radius=1e-3)
    assert flat.isolation_probe(np.zeros(0), 0.0)[1] is False


# -- integrate_reduced ----------------------------------------------------

def test_ex11_reduced_first_jump(ex11):
    red = integrate_reduced(ex11.model, rootmap_of(ex11), [2.0])
    e = math.exp(1 / 3)
    left = 2 * e / (2 * e - 1)
    assert left == pytest.approx(1.55828, abs=1e-5)
    assert red.ybar(1 / 3)[0] == pytest.approx(left, rel=1e-9)
    assert red.ybar(1 / 3, right=True)[0] == pytest.approx(left ** 2, rel=1e-9)


def test_ex11_reduced_matches_closed_form(ex11):
    red = integrate_reduced(ex11.model, rootmap_of(ex11), [2.0])
    for t in np.linspace(0, 5 / 3, 61):
        assert red.ybar(t)[0] == pytest.approx(ex11_reduced(t), rel=1e-8)
    for k in range(1, 5):
        e = k / 3
        assert red.ybar(e, right=True)[0] == pytest.approx(ex11_reduced(e, right=True), rel=1e-8)


def test_ex11_zbar_is_zero_branch(ex11):
    red = integrate_reduced(ex11.model, rootmap_of(ex11), [2.0])
    assert np.max(np.abs(red.zbar(np.linspace(0, 2, 31)))) <= 1e-12
    st = red.state(0.5)
    assert st.shape == (2,) and st[1] == pytest.approx(ex11_reduced(0.5), rel=1e-8)


def test_fast_only_reduced_is_constant_root(ex2):
    red = integrate_reduced(ex2.model, rootmap_of(ex2), np.zeros(0), grid=np.linspace(0, 3, 7))
    g, yb, zb = red.dense
    assert yb.shape == (7, 0)
    assert np.all(np.abs(zb) <= 1e-12)
    assert red.jumps == []


def test_no_slow_impulse_gives_continuous_ybar():
    m = validate_system({"fast_dim": 1, "slow_dim": 1, "horizon": 1.0,
                         "F": lambda z, y, t: y - z, "f": lambda z, y, t: -z})
    red = integrate_reduced(m, RootMap(m.F, [1.0]), [1.0])
    assert red.jumps == []
    assert red.ybar(1.0)[0] == pytest.approx(math.exp(-1), rel=1e-9)


def test_reduced_rejects_wrong_y0_size(ex11):
    with pytest.raises(ValueError):
        integrate_reduced(ex11.model, rootmap_of(ex11), [1.0, 2.0])


# -- diagnostics ----------------------------------------------------------

def test_degenerate_impulse_zero_on_examples(ex1, ex2):
    for doc in (ex1, ex2):
        rm = rootmap_of(doc)
        red = integrate_reduced(doc.model, rm, np.zeros(0))
        res = check_degenerate_impulse(doc.model, rm, red)
        assert len(res) == len(doc.model.theta)
        assert np.all(res <= 1e-12)


def test_degenerate_impulse_constant_violation():
    m = validate_system({"fast_dim": 1, "horizon": 1.0, "F": lambda z, y, t: -z,
                         "I": lambda z, y, mu: np.array([1 + mu]), "theta": [0.5]})
    rm = RootMap(m.F, [0.0])
    res = check_degenerate_impulse(m, rm, integrate_reduced(m, rm, np.zeros(0)))
    np.testing.assert_allclose(res, [1.0])


def test_root_continuity_zero_branch(ex11):
    red = integrate_reduced(ex11.model, rootmap_of(ex11), [2.0])
    gaps = check_root_continuity(red)
    assert gaps.shape == (5,) and np.all(gaps == 0)


MOVING_BRANCH = """
[system]
horizon = 1
fast = z
slow = y

[fast_field]
z = -(z - 1 + 2*y)

[slow_field]
y = -y

[slow_impulse]
y = y^2 - y

[moments]
eta = 1/2

[root]
z = 0
"""


def test_root_continuity_flags_moving_branch():
    doc = parse_spec(MOVING_BRANCH)
    red = integrate_reduced(doc.model, rootmap_of(doc), [3.0])
    yb = red.ybar(0.5)[0]
    assert yb == pytest.approx(3 * math.exp(-0.5), rel=1e-9)
    gaps = check_root_continuity(red)
    assert gaps[0] == pytest.approx(abs(2 * yb * yb - 2 * yb), rel=1e-9)
    assert gaps[0] > 0.1


def test_root_continuity_vacuous_without_jumps(ex2):
    red = integrate_reduced(ex2.model, rootmap_of(ex2), np.zeros(0))
    assert check_root_continuity(red).size == 0
