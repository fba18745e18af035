import math

import mpmath
import numpy as np
import pytest

from gibbs_partitions.analytics import (
    Indeterminate,
    LimitShape,
    NoLimitShape,
    NoThermodynamicLimit,
    SeriesDivergence,
    canonical_weights,
    classical_shape,
    expected_F,
    expected_monomers,
    first_index,
    generating_function_check,
    grand_potential_log,
    limit_shape,
    mean_shape,
    mu_for_target_mass,
    scaled_mass,
    to_classical_scaling,
    variance_F,
)
from gibbs_partitions.energy import EnergyModel

# frozen lambda values: pi^2/6, e Li2(1/e), 1, Gamma(3/2)
LAMBDA_I = 1.6449340668482264
LAMBDA_II = 1.1111093516052317
LAMBDA_IV_HALF = 0.8862269254527580


def brute(model, mu, K=200_000):
    k = np.arange(1, K + 1, dtype=float)
    th = np.exp(-model.beta * model.energies(k) - mu * k)
    return th, k


def test_frozen_lambdas():
    assert LAMBDA_II == pytest.approx(math.e * float(mpmath.polylog(2, math.exp(-1))), rel=1e-15)
    assert LAMBDA_I == pytest.approx(math.pi ** 2 / 6, rel=1e-16)
    assert limit_shape(EnergyModel("const")).lam == pytest.approx(LAMBDA_II, rel=1e-14)
    assert limit_shape(EnergyModel("log", beta=0.5)).lam == pytest.approx(LAMBDA_IV_HALF, rel=1e-14)


@pytest.mark.parametrize("model", [EnergyModel("const"), EnergyModel("log", beta=0.5), EnergyModel("decay", beta=0.3)])
def test_series_against_direct_sums(model):
    mu = 0.01
    th, k = brute(model, mu)
    em = expected_monomers(model, mu, 1e-12)
    assert em.value == pytest.approx(math.fsum(k * th / (1 - th)), rel=1e-10)
    assert em.tail_bound <= 1e-12 * max(1.0, em.value)
    assert grand_potential_log(model, mu).value == pytest.approx(-math.fsum(np.log1p(-th)), rel=1e-10)
    x = 0.3
    kmin = first_index(x, mu)
    ef = math.fsum((th / (1 - th))[kmin - 1:]) / (mu * em.value)
    vf = math.fsum((th / (1 - th) ** 2)[kmin - 1:]) / (mu * em.value) ** 2
    assert expected_F(model, mu, x).value == pytest.approx(ef, rel=1e-10)
    assert variance_F(model, mu, x).value == pytest.approx(vf, rel=1e-10)


def test_first_index_is_robust_to_rounding():
    assert first_index(0.3, 0.1) == 3
    assert first_index(0.0, 0.1) == 1
    assert first_index(0.25, 0.1) == 3


def test_divergence_and_domain_errors():
    with pytest.raises(SeriesDivergence):
        expected_monomers(EnergyModel("const"), 0.0)
    with pytest.raises(SeriesDivergence):
        expected_monomers(EnergyModel("power", c=1.0, alpha=2.0), -1.5)
    with pytest.raises(ValueError):
        expected_F(EnergyModel("decay", beta=0.0), 0.01, 0.0)
    assert expected_F(EnergyModel("const"), 0.01, 0.0).value > 0


def test_scaled_mass_approaches_lambda():
    errs = [abs(scaled_mass(EnergyModel("const"), mu) / LAMBDA_II - 1) for mu in (1e-2, 1e-3, 1e-4)]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 1e-6


def test_limit_shape_formulas():
    x = np.array([0.25, 0.5, 1.0, 2.0])
    F2 = limit_shape(EnergyModel("const")).F(x)
    ref2 = [-float(mpmath.log(1 - mpmath.e ** (-1 - t))) / float(mpmath.polylog(2, mpmath.e ** -1)) for t in x]
    assert F2 == pytest.approx(ref2, rel=1e-13)
    assert limit_shape(EnergyModel("loglog")).F(x) == pytest.approx(np.exp(-x), rel=1e-15)
    F4 = limit_shape(EnergyModel("log", beta=0.5)).F(0.5)
    # Gamma(1/2, 1/2) / Gamma(3/2) = 2 Q(1/2, 1/2)
    assert float(F4) == pytest.approx(2 * float(mpmath.gammainc(0.5, 0.5, mpmath.inf, regularized=True)), rel=1e-13)
    F1 = limit_shape(EnergyModel("decay", beta=0.0))
    assert F1.regime == "i" and not F1.integrable_at_zero


@pytest.mark.parametrize("model", [EnergyModel("const"), EnergyModel("log", beta=0.5), EnergyModel("loglog")])
def test_shape_density_integrates_to_F(model):
    from scipy import integrate

    sh = limit_shape(model)
    for x in (0.2, 1.0):
        val = integrate.quad(lambda t: float(sh.density(t)), x, np.inf)[0]
        assert val == pytest.approx(float(sh.F(x)), rel=1e-8)
    # mass normalization: int_0^inf F = 1
    assert integrate.quad(lambda t: float(sh.F(t)), 0, np.inf)[0] == pytest.approx(1.0, rel=1e-7)


def test_limit_shape_outcomes():
    assert isinstance(limit_shape(EnergyModel("log", beta=1.5)), NoLimitShape)
    assert isinstance(limit_shape(EnergyModel("log", beta=1.0)), NoLimitShape)
    assert isinstance(limit_shape(EnergyModel("log", beta=2.0)), Indeterminate)
    assert isinstance(limit_shape(EnergyModel("log", beta=2.5)), NoThermodynamicLimit)
    assert isinstance(limit_shape(EnergyModel("power", c=1.0, alpha=0.5)), NoThermodynamicLimit)
    assert isinstance(limit_shape(EnergyModel("const")), LimitShape)
    F, lam = mean_shape(EnergyModel("log", beta=1.5))
    assert lam == pytest.approx(math.gamma(0.5))
    assert float(F(1.0)) == pytest.approx(float(mpmath.gammainc(-0.5, 1.0, mpmath.inf)) / math.gamma(0.5), rel=1e-11)


def test_classical_scaling_identity():
    m0 = EnergyModel("const", beta=0.0)
    F = limit_shape(m0).F
    x = np.array([0.3, 1.0, 2.5])
    assert to_classical_scaling(F, x) == pytest.approx(classical_shape(x), rel=1e-13)


def test_variance_vanishes_or_not():
    v = [variance_F(EnergyModel("const"), mu, 0.5).value for mu in (1e-2, 1e-3)]
    assert v[1] < v[0] / 5
    w = [variance_F(EnergyModel("log", beta=1.5), mu, 0.5).value for mu in (1e-3, 1e-4)]
    assert w[1] > 2 * w[0]


def test_generating_function_identity():
    for beta in (0.0, 1.0):
        chk = generating_function_check(EnergyModel("const", beta=beta), 0.8)
        assert chk.ok, chk


def test_canonical_weights_beta_zero():
    parts, w = canonical_weights(EnergyModel("const", beta=0.0), 8)
    assert len(parts) == 22 and np.all(w == 1.0)


def test_mu_for_target_mass():
    m = EnergyModel("const")
    mu = mu_for_target_mass(m, 1000.0, tol=1e-9)
    assert expected_monomers(m, mu).value == pytest.approx(1000.0, rel=1e-8)
    with pytest.raises(ValueError):
        mu_for_target_mass(m, 0.0)
    with pytest.raises(ValueError):
        mu_for_target_mass(EnergyModel("log", beta=3.0), 1e6)
