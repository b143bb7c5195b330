import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from extremal_sv.model import (
    CoefficientSequence,
    ConstantEps,
    CustomTailEta,
    GammaEta,
    LaplaceEta,
    MarginalTailConstants,
    ModelError,
    NormalEps,
    ParetoEps,
    StudentTEps,
    SvModel,
    load_model,
    marginal_survival_asymptote,
    model_from_dict,
    normalizing_constant,
    save_model,
    tail_constants,
)
from extremal_sv.rng import stream


# coefficients

def test_coefficients_validation():
    with pytest.raises(ModelError):
        CoefficientSequence(())
    with pytest.raises(ModelError):
        CoefficientSequence((0.5, 0.2))
    with pytest.raises(ModelError):
        CoefficientSequence((1.0, -0.1))
    with pytest.raises(ModelError):
        CoefficientSequence((1.0, 1.2))
    with pytest.raises(ModelError):
        CoefficientSequence((1.0,), decay_exponent=0.5)


def test_coefficients_snap_and_multiplicity():
    c = CoefficientSequence((1.0 - 1e-14, 0.3, 1.0, 0.0))
    assert c.values[0] == 1.0
    assert c.k == 2 and c.ones == (0, 2)
    assert c.support_length == 3
    assert c.at(-1) == 0.0 and c.at(10) == 0.0


def test_strictly_decreasing_flag():
    assert CoefficientSequence((1.0, 0.8, 0.3, 0.0)).is_strictly_decreasing()
    assert not CoefficientSequence((1.0, 0.0, 1.0)).is_strictly_decreasing()


@given(st.floats(0.05, 0.95), st.sampled_from([1e-4, 1e-6, 1e-8]))
def test_ar1_default_length_is_minimal(alpha, tol):
    n = len(CoefficientSequence.ar1(alpha, tail_tol=tol))
    tail = lambda m: alpha ** m / (1 - alpha)
    assert tail(n) < tol * (1 + 1e-9)
    assert n == 1 or tail(n - 1) >= tol * (1 - 1e-9)


# innovation families

def test_gamma_and_laplace_constants():
    g = GammaEta(2.0)
    assert g.K == 1.0 and g.beta == 1.0
    assert g.mgf(0.5) == pytest.approx(4.0)
    lap = LaplaceEta()
    assert lap.K == 0.5 and lap.beta == 0.0
    assert lap.mgf(0.5) == pytest.approx(1 / 0.75)
    assert not lap.mgf_finite(1.0) and lap.mgf(1.0) == math.inf


@pytest.mark.parametrize("eta,dist", [
    (GammaEta(0.25), stats.gamma(0.25)),
    (GammaEta(3.0), stats.gamma(3.0)),
    (LaplaceEta(), stats.laplace()),
])
def test_sampler_matches_survival(eta, dist):
    z = eta.sample(stream(1, 2), 50_000)
    assert stats.kstest(z, dist.cdf).pvalue > 1e-3
    grid = np.array([0.5, 1.0, 2.0])
    assert np.allclose(eta.survival(grid), dist.sf(grid))


def test_custom_tail_survival_and_sampler():
    eta = CustomTailEta(1.0, -2.0)
    z0 = eta.z0
    assert eta.s0 == pytest.approx(0.9)
    assert eta.survival(z0 + 1.0) == pytest.approx(1.0 * (z0 + 1) ** -2 * math.exp(-(z0 + 1)))
    assert eta.survival(z0 - 2.0) == 1.0
    z = eta.sample(stream(3), 400_000)
    for q in (z0 - 0.5, z0 + 0.5, z0 + 2.0):
        p = float(eta.survival(q))
        assert abs(np.mean(z > q) - p) < 5 * math.sqrt(p * (1 - p) / z.size)


def test_custom_tail_mgf_closed_form():
    K, b = 1.0, -2.0
    eta = CustomTailEta(K, b)
    z0, s0 = eta.z0, eta.s0
    # body: uniform on [z0 - 1, z0]; tail: e^z0 S(z0) + int_{z0}^inf K z^-2 dz
    body = (1 - s0) * (math.exp(z0) - math.exp(z0 - 1))
    tail = K / z0 ** 2 + K / z0
    assert eta.mgf(1.0) == pytest.approx(body + tail, rel=1e-8)
    assert eta.mgf(0.0) == pytest.approx(1.0, rel=1e-9)


def test_custom_tail_validation():
    with pytest.raises(ModelError):
        CustomTailEta(1.0, -1.0)
    with pytest.raises(ModelError):
        CustomTailEta(-1.0, 0.5)
    with pytest.raises(ModelError):
        CustomTailEta(1.0, 2.0, z0=1.0)


@pytest.mark.parametrize("eps,mean_abs", [
    (NormalEps(), math.sqrt(2 / math.pi)),
    (StudentTEps(5.0), None),
    (ParetoEps(3.0, 0.5), None),
    (ConstantEps(), 1.0),
])
def test_eps_moments(eps, mean_abs):
    x = eps.sample(stream(5), 400_000)
    assert np.mean(np.abs(x)) == pytest.approx(eps.mean_abs, rel=0.02)
    assert np.mean(np.maximum(x, 0)) == pytest.approx(eps.mean_pos, rel=0.03)
    if mean_abs is not None:
        assert eps.mean_abs == pytest.approx(mean_abs)


def test_eps_validation():
    with pytest.raises(ModelError):
        StudentTEps(1.0)
    with pytest.raises(ModelError):
        ParetoEps(0.5)


# JSON

def test_model_json_round_trip(tmp_path):
    m = SvModel(CoefficientSequence((1.0, 0.5)), CustomTailEta(0.5, -2.0), StudentTEps(4.0))
    save_model(m, tmp_path / "m.json")
    back = load_model(tmp_path / "m.json")
    assert back.to_dict() == m.to_dict()
    assert model_from_dict(json.loads(m.to_json())).to_dict() == m.to_dict()


@pytest.mark.parametrize("bad", [
    {"coeffs": [1.0], "eta": {"kind": "laplace"}},
    {"coeffs": [1.0], "eta": {"kind": "laplace"}, "eps": {"kind": "normal"}, "extra": 1},
    {"coeffs": [1.0], "eta": {"kind": "cauchy"}, "eps": {"kind": "normal"}},
    {"coeffs": [1.0], "eta": {"kind": "gamma"}, "eps": {"kind": "normal"}},
    {"coeffs": "1", "eta": {"kind": "laplace"}, "eps": {"kind": "normal"}},
])
def test_model_json_strict(bad):
    with pytest.raises(ModelError):
        model_from_dict(bad)


def test_model_json_rejects_garbage(tmp_path):
    p = tmp_path / "m.json"
    p.write_text("{not json")
    with pytest.raises(ModelError):
        load_model(p)


# marginal tail

def test_tail_constants_single_laplace():
    c = tail_constants(SvModel(CoefficientSequence((1.0,)), LaplaceEta()))
    assert (c.beta_hat, c.k_hat, c.k) == (0.0, 0.5, 1)


def test_tail_constants_double_one_laplace():
    c = tail_constants(SvModel(CoefficientSequence((1.0, 1.0)), LaplaceEta()))
    assert c.beta_hat == 1.0 and c.k_hat == pytest.approx(0.25) and c.k == 2


def test_tail_constants_gamma_with_residual():
    c = tail_constants(SvModel(CoefficientSequence((1.0, 0.5)), GammaEta(2.0)))
    assert c.beta_hat == 1.0 and c.k_hat == pytest.approx(4.0)
    # Monte Carlo cross-check of E exp(0.5 eta)
    z = GammaEta(2.0).sample(stream(7), 10 ** 6)
    v = np.exp(0.5 * z)
    assert abs(v.mean() - 4.0) < 4 * v.std() / math.sqrt(v.size)


def test_tail_constants_heavy_custom_tail():
    eta = CustomTailEta(1.0, -2.0)
    c = tail_constants(SvModel(CoefficientSequence((1.0, 1.0, 0.5)), eta))
    assert c.beta_hat == -2.0
    assert c.k_hat == pytest.approx(2 * 1.0 * eta.mgf(1.0) * eta.mgf(0.5))


def test_tail_constants_reject_scale():
    with pytest.raises(ModelError):
        tail_constants(SvModel(CoefficientSequence((1.0,), scale=0.5), LaplaceEta()))


def test_survival_asymptote_values():
    assert marginal_survival_asymptote(MarginalTailConstants(0.0, 0.5, 1), math.exp(10)) == pytest.approx(
        0.5 * math.exp(-10))
    assert marginal_survival_asymptote(MarginalTailConstants(1.0, 4.0, 1), math.exp(20)) == pytest.approx(
        4 * 20 * math.exp(-20))
    with pytest.raises(ModelError):
        marginal_survival_asymptote(MarginalTailConstants(0.0, 0.5, 1), 2.0)


def test_normalizing_constant_values():
    assert normalizing_constant(MarginalTailConstants(0.0, 1.0, 1), 100) == pytest.approx(100.0)
    n = round(math.exp(4))
    assert normalizing_constant(MarginalTailConstants(1.0, 0.5, 1), n) == pytest.approx(0.5 * n * math.log(n))
    with pytest.raises(ModelError):
        normalizing_constant(MarginalTailConstants(0.0, 1.0, 1), 1)
