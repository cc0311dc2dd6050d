import math

import numpy as np
import pytest

from slowfast.errors import (DimensionMismatch, MomentCollision, MomentOutOfRange,
                             NonFiniteEvaluation, SlowFastError)
from slowfast.model import (EventKind, InitialState, RegionSpec, SystemModel, moments_in_order,
                            validate_system)


def lin(z, y, t):
    return -z


def raw_fast(**kw):
    base = {"fast_dim": 1, "F": lin, "horizon": 1.0}
    base.update(kw)
    return base


def test_ex1_spec_is_valid(ex1):
    m = ex1.model
    assert (m.fast_dim, m.slow_dim) == (2, 0)
    assert m.horizon == pytest.approx(11 / 3)
    assert m.theta == pytest.approx([i / 3 for i in range(1, 11)])


def test_ex11_spec_is_valid(ex11):
    m = ex11.model
    assert (m.fast_dim, m.slow_dim) == (1, 1)
    assert m.eta == pytest.approx([j / 3 for j in range(1, 6)])
    assert m.theta == ()


def test_duplicate_moment_is_collision():
    with pytest.raises(MomentCollision):
        validate_system(raw_fast(I=lambda z, y, mu: z, theta=[0.5, 0.5]))


def test_cross_schedule_collision():
    raw = {"fast_dim": 1, "slow_dim": 1, "F": lambda z, y, t: -z, "f": lambda z, y, t: 0 * y,
           "I": lambda z, y, mu: z, "J_slow": lambda z, y: y, "theta": [0.5], "eta": [0.5], "horizon": 1.0}
    with pytest.raises(MomentCollision):
        validate_system(raw)


@pytest.mark.parametrize("theta", [[0.0], [1.0], [-0.1], [1.5]])
def test_moment_out_of_range(theta):
    with pytest.raises(MomentOutOfRange):
        validate_system(raw_fast(I=lambda z, y, mu: z, theta=theta))


def test_aux_moments_must_follow_their_theta():
    aux = lambda z, y, mu: mu * z
    ok = validate_system(raw_fast(I=aux, J_fast_aux=aux, theta=[0.2, 0.6], tau_aux=[[0.3, 0.4], [0.7]]))
    assert ok.tau_aux == ((0.3, 0.4), (0.7,))
    with pytest.raises(MomentOutOfRange):
        validate_system(raw_fast(I=aux, J_fast_aux=aux, theta=[0.2, 0.6], tau_aux=[[0.65], []]))
    with pytest.raises(DimensionMismatch):
        validate_system(raw_fast(I=aux, J_fast_aux=aux, theta=[0.2, 0.6], tau_aux=[[0.3]]))


def test_moments_are_sorted():
    m = validate_system(raw_fast(I=lambda z, y, mu: z, theta=[0.7, 0.2]))
    assert m.theta == (0.2, 0.7)


def test_wrong_output_dimension():
    with pytest.raises(DimensionMismatch):
        validate_system(raw_fast(fast_dim=2, F=lambda z, y, t: np.zeros(1)))


def test_nonfinite_handle():
    with pytest.raises(NonFiniteEvaluation):
        validate_system(raw_fast(F=lambda z, y, t: np.array([math.nan])))


def test_fast_only_rejects_slow_handles():
    with pytest.raises(DimensionMismatch):
        validate_system(raw_fast(f=lambda z, y, t: y))
    with pytest.raises(DimensionMismatch):
        validate_system(raw_fast(J_slow=lambda z, y: y))


def test_missing_fields():
    with pytest.raises(SlowFastError):
        validate_system({"fast_dim": 1, "horizon": 1.0})
    with pytest.raises(SlowFastError):
        validate_system({"fast_dim": 1, "slow_dim": 1, "F": lin, "horizon": 1.0})


def test_state_dependent_moments_rejected():
    with pytest.raises(SlowFastError):
        validate_system(raw_fast(I=lambda z, y, mu: z, theta=lambda z: 0.5))


def test_validation_is_idempotent(ex1, ex11):
    for doc in (ex1, ex11):
        again = validate_system(doc.model)
        assert again == doc.model
        assert validate_system(again) == again


def test_moments_in_order_merges_and_tags():
    raw = {"fast_dim": 1, "slow_dim": 1, "F": lambda z, y, t: -z, "f": lambda z, y, t: 0 * y,
           "I": lambda z, y, mu: z, "J_slow": lambda z, y: y, "theta": [1 / 3, 2 / 3], "eta": [0.5],
           "horizon": 1.0}
    ev = moments_in_order(validate_system(raw))
    assert [e.kind for e in ev] == [EventKind.FAST_PRIMARY, EventKind.SLOW, EventKind.FAST_PRIMARY]
    assert [e.time for e in ev] == [1 / 3, 0.5, 2 / 3]


def test_moments_in_order_empty():
    assert moments_in_order(validate_system(raw_fast())) == []


def test_aux_interleaving_is_preserved(ex2_aux):
    ev = moments_in_order(ex2_aux.model)
    kinds = [e.kind for e in ev]
    assert kinds[:4] == [EventKind.FAST_PRIMARY, EventKind.FAST_AUX] * 2
    times = [e.time for e in ev]
    assert all(a < b for a, b in zip(times, times[1:]))
    m = ex2_aux.model
    assert len(ev) == len(m.theta) + len(m.eta) + sum(len(x) for x in m.tau_aux)


def test_region_and_initial_state():
    reg = RegionSpec(fast_bound=2.0, slow_bound=1.0)
    assert reg.contains([1.0], [1.0])
    assert not reg.contains([2.0], [0.0])
    with pytest.raises(ValueError):
        RegionSpec(fast_bound=0.0)
    m = validate_system(raw_fast(region=reg))
    InitialState([1.0]).check(m)
    with pytest.raises(ValueError):
        InitialState([3.0]).check(m)
    with pytest.raises(DimensionMismatch):
        InitialState([1.0, 0.0]).check(m)
    with pytest.raises(ValueError):
        InitialState([math.inf])


def test_model_is_immutable(ex1):
    with pytest.raises(AttributeError):
        ex1.model.horizon = 2.0
    assert isinstance(ex1.model, SystemModel)
