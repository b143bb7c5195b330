import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from extremal_sv.cone import (
    ConeError,
    Multiplier,
    breiman_limit_diagonal,
    maps_cone_into_cone,
    tau,
    tau_numeric_oracle,
)
from extremal_sv.rng import stream


def test_tau_diagonal():
    assert tau(np.diag([2.0, 3.0])) == 3.0
    for d in range(1, 5):
        assert tau(np.eye(d)) == 1.0


def test_tau_upper_triangular_is_infinite():
    A = np.array([[1.0, 1.0], [0.0, 1.0]])
    assert tau(A) == math.inf
    assert tau_numeric_oracle(A) > 1e5


def test_tau_not_cone_preserving():
    assert tau(-np.eye(2)) == 0.0
    assert not maps_cone_into_cone(-np.eye(2))
    assert tau(np.array([[1.0, -2.0], [-2.0, 1.0]])) == 0.0


def test_tau_positive_inverse():
    B = np.array([[1.0, 0.5], [0.25, 2.0]])
    A = np.linalg.inv(B)
    assert tau(A) == pytest.approx(max(1 / B.sum(axis=1)))


def test_tau_validation():
    with pytest.raises(ConeError):
        tau(np.ones((2, 3)))
    with pytest.raises(ConeError):
        tau(np.array([[np.nan]]))


def test_oracle_examples():
    assert tau_numeric_oracle(np.diag([2.0, 3.0]), 1000) == pytest.approx(3.0, abs=1e-3)
    assert tau_numeric_oracle(np.eye(2)) == 1.0
    with pytest.raises(ConeError):
        tau_numeric_oracle(np.eye(4))


@given(st.lists(st.floats(0.1, 2.0), min_size=4, max_size=4))
def test_formula_matches_oracle_2x2(entries):
    B = np.array(entries).reshape(2, 2)
    assume(abs(np.linalg.det(B)) > 1e-3)
    A = np.linalg.inv(B)
    assert abs(tau_numeric_oracle(A) - tau(A)) <= 1e-3 * tau(A)


def test_formula_matches_oracle_3x3():
    rng = stream(11)
    for _ in range(5):
        A = np.linalg.inv(rng.uniform(0.1, 2.0, (3, 3)))
        assert abs(tau_numeric_oracle(A, 200) - tau(A)) <= 1e-3 * tau(A)


def test_breiman_constant_multipliers():
    m = [Multiplier("constant"), Multiplier("constant")]
    r = breiman_limit_diagonal(1.0, m, (2.0, 2.0))
    assert r.value == 0.25 and r.stderr == 0.0


def test_breiman_lognormal_matches_closed_form():
    m = [Multiplier("lognormal"), Multiplier("lognormal")]
    r = breiman_limit_diagonal(1.0, m, (1.0, 1.0), mc_samples=10 ** 6, seed=3)
    assert abs(r.value - math.e) <= 3 * r.stderr


@pytest.mark.slow
def test_breiman_lognormal_large_sample():
    m = [Multiplier("lognormal"), Multiplier("lognormal")]
    r = breiman_limit_diagonal(1.0, m, (1.0, 1.0), mc_samples=10 ** 7, seed=4)
    assert abs(r.value - math.e) <= 3 * r.stderr


def test_breiman_homogeneity():
    m = [Multiplier("normal_positive_part")] * 2
    r1 = breiman_limit_diagonal(1.0, m, (1.0, 1.0), mc_samples=10 ** 5, seed=5)
    r2 = breiman_limit_diagonal(1.0, m, (2.0, 2.0), mc_samples=10 ** 5, seed=5)
    assert r1.value / r2.value == pytest.approx(4.0, rel=1e-12)
    # E max(N,0) squared
    assert abs(r1.value - m[0].moment(1.0) ** 2) <= 4 * r1.stderr


@pytest.mark.parametrize("m,r", [
    (Multiplier("lognormal", mu=0.3, sigma=0.5), 1.5),
    (Multiplier("folded_student_t", nu=6.0), 2.0),
    (Multiplier("normal_positive_part"), 2.0),
])
def test_multiplier_moments(m, r):
    x = m.sample(stream(6), 10 ** 6) ** r
    assert abs(x.mean() - m.moment(r)) <= 4 * x.std() / math.sqrt(x.size)


def test_breiman_moment_condition():
    with pytest.raises(ConeError):
        breiman_limit_diagonal(1.0, [Multiplier("folded_student_t", nu=1.5)] * 2, (1.0, 1.0))
    with pytest.raises(ConeError):
        breiman_limit_diagonal(1.0, [Multiplier("constant")] * 2, (0.0, 1.0))
    with pytest.raises(ConeError):
        Multiplier("cauchy")


def test_breiman_worker_invariance():
    m = [Multiplier("lognormal")] * 2
    a = breiman_limit_diagonal(1.0, m, (1.0, 1.0), mc_samples=3 * 10 ** 5, seed=8, workers=1, chunk=1 << 16)
    b = breiman_limit_diagonal(1.0, m, (1.0, 1.0), mc_samples=3 * 10 ** 5, seed=8, workers=3, chunk=1 << 16)
    assert a == b
