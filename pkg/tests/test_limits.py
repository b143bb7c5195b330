import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from extremal_sv.limits import constant_D, one_factor_ratio, rectangle_exponents, rectangle_measure
from extremal_sv.lp import LpError, TailLp, lag_solution, solve_lp, sv_lag_lp
from extremal_sv.model import CoefficientSequence, GammaEta, LaplaceEta, NormalEps


def test_rectangle_decreasing_pair():
    lp, sol = lag_solution(CoefficientSequence((1.0, 0.5)), 1)
    assert rectangle_measure(sol, lp, 4.0, 2.0) == pytest.approx(0.25)
    assert rectangle_measure(sol, lp, 1.0, 1.0) == 1.0


@given(st.lists(st.floats(0.01, 0.99), min_size=1, max_size=6, unique=True), st.integers(1, 4),
       st.floats(0.2, 5.0), st.floats(0.2, 5.0))
def test_rectangle_decreasing_formula(tail, h, s0, sh):
    c = CoefficientSequence((1.0, *sorted(tail, reverse=True)))
    lp = sv_lag_lp(c, h)
    sol = solve_lp(lp)
    ah = c.at(h)
    assert rectangle_measure(sol, lp, s0, sh) == pytest.approx(s0 ** (ah - 1) * sh ** -1, rel=1e-12)


def test_rectangle_exponents_sum_to_minus_objective():
    lp = TailLp((1.0, 0.5, 0.2), (0.3, 1.0, 0.1))
    sol = solve_lp(lp)
    p, q = rectangle_exponents(sol, lp)
    assert p < 0 and q < 0
    assert p + q == pytest.approx(-sol.objective)


def test_rectangle_rejects_other_cases():
    lp = TailLp((1.0, 1.0), (1.0, 1.0))
    with pytest.raises(LpError):
        rectangle_measure(solve_lp(lp), lp, 1.0, 1.0)
    lp = TailLp((1.0, 0.5), (0.5, 1.0))
    with pytest.raises(ValueError):
        rectangle_measure(solve_lp(lp), lp, 0.0, 1.0)


def test_constant_no_residual():
    lp = TailLp((1.0, 0.5), (0.5, 1.0))
    sol = solve_lp(lp)
    d = constant_D(sol, lp)
    assert d.value == pytest.approx(3.0) and d.stderr == 0.0


def test_constant_pareto_residual_mc_agrees():
    lp = TailLp((1.0, 0.5, 0.3), (0.5, 1.0, 0.3))
    sol = solve_lp(lp)
    exact = constant_D(sol, lp)
    e = 0.3 * sum(sol.dual)
    assert exact.value == pytest.approx(3.0 / (1 - e))
    mc = constant_D(sol, lp, mc_samples=10 ** 6, seed=2, method="mc")
    assert abs(mc.value - exact.value) <= 3 * mc.stderr


def test_constant_ar1_laplace():
    # every residual factor enters the constant, so use the untruncated program
    lp = sv_lag_lp(CoefficientSequence.ar1(0.5), 1)
    sol = solve_lp(lp)
    exact = constant_D(sol, lp, LaplaceEta())
    assert exact.value == pytest.approx(2.9047, abs=1e-4)
    mc = constant_D(sol, lp, LaplaceEta(), mc_samples=10 ** 6, seed=3, method="mc")
    assert abs(mc.value - exact.value) <= 3 * mc.stderr


def test_constant_divergent_moment():
    lp, sol = lag_solution(CoefficientSequence((1.0, 0.9, 0.8)), 1)
    with pytest.raises((LpError, ValueError)):
        constant_D(sol, lp, "student")


def test_one_factor_normalisation_and_monotonicity():
    c = CoefficientSequence((1.0, 0.0, 1.0))
    eta = LaplaceEta()
    r1 = one_factor_ratio(c, 2, 2, 1.0, 1.0, eta, mc_samples=10 ** 5, seed=1)
    assert r1.value == 1.0
    vals = [one_factor_ratio(c, 2, 2, s, 1.0, eta, mc_samples=10 ** 5, seed=1).value for s in (1, 2, 4, 16, 256)]
    assert all(x >= y for x, y in zip(vals, vals[1:]))
    assert vals[-1] < 0.05


def test_one_factor_homogeneity():
    c = CoefficientSequence((1.0, 0.0, 1.0))
    a = one_factor_ratio(c, 2, 2, 2.0, 1.0, LaplaceEta(), mc_samples=10 ** 5, seed=4)
    b = one_factor_ratio(c, 2, 2, 4.0, 2.0, LaplaceEta(), mc_samples=10 ** 5, seed=4)
    assert b.value / a.value == pytest.approx(0.5, rel=1e-12)


def laplace_min_mean(s0):
    """E min(exp(X)/s0, exp(Y)) for independent standard Laplace X, Y by quadrature."""

    def inner(c):
        # E min(e^c, e^Y) = e^c P(Y > c) + E[e^Y; Y <= c]
        if c <= 0:
            return math.exp(c) * (1 - 0.5 * math.exp(c)) + 0.25 * math.exp(2 * c)
        return 0.5 + 0.25 + c / 2

    f = lambda x: inner(x - math.log(s0)) * 0.5 * math.exp(-abs(x))
    pts = sorted({0.0, math.log(s0)})
    val, _ = integrate.quad(f, -60, 60, points=pts, epsabs=1e-12, epsrel=1e-11, limit=200)
    return val


def test_one_factor_against_quadrature():
    c = CoefficientSequence((1.0, 0.0, 1.0))
    r = one_factor_ratio(c, 2, 2, 2.0, 1.0, LaplaceEta(), mc_samples=10 ** 6, seed=7)
    want = laplace_min_mean(2.0) / laplace_min_mean(1.0)
    assert abs(r.value - want) <= 3 * r.stderr


def test_one_factor_with_returns_and_truncation():
    c = CoefficientSequence((1.0, 0.3, 1.0, 0.05))
    r = one_factor_ratio(c, 2, 2, 2.0, 1.0, GammaEta(2.0), NormalEps(), mc_samples=10 ** 4, seed=1)
    assert 0 < r.value < 1 and r.bias_bound == 0.0
    t = one_factor_ratio(c, 2, 2, 2.0, 1.0, GammaEta(2.0), mc_samples=10 ** 4, seed=1, truncation=4)
    assert t.bias_bound > 0.0


def test_one_factor_validation():
    c = CoefficientSequence((1.0, 0.5))
    with pytest.raises(LpError):
        one_factor_ratio(c, 1, 1, 1.0, 1.0, LaplaceEta())
    with pytest.raises(ValueError):
        one_factor_ratio(CoefficientSequence((1.0, 0.0, 1.0)), 2, 2, -1.0, 1.0, LaplaceEta())
