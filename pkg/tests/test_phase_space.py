import math

import numpy as np
import pytest
from scipy.integrate import trapezoid

from hybrid_bell.errors import (
    ConfigurationError,
    PhaseSpaceDomainError,
    SingularQuasiprobabilityError,
)
from hybrid_bell.numerics import gauss_legendre_grid
from hybrid_bell.phase_space import (
    OrderingParam,
    ThermalProductQuasiprobability,
    bhd_symbol,
    coherent_amplitude,
    quadrature_mean,
    thermal_product,
    uhd_noclick,
    uhd_noclick_thermal,
    uhd_symbol,
)

X = np.linspace(-12.0, 12.0, 24001)


@pytest.mark.parametrize("s", [0.2, 0.5, 1.0])
@pytest.mark.parametrize("alpha", [0j, 1.3 - 0.4j, -2.0 + 1.0j])
def test_bhd_symbol_is_normalized(s, alpha):
    """The balanced homodyne symbol is a probability density in x."""
    values = bhd_symbol(X, 0.7, alpha, s)
    assert trapezoid(values, X) == pytest.approx(1.0, abs=1e-9)
    assert np.all(values >= 0)


def test_bhd_symbol_peak_position():
    """The symbol peaks at the coherent quadrature mean."""
    alpha = 0.8 + 0.6j
    phi = 0.3
    peak = X[np.argmax(bhd_symbol(X, phi, alpha))]
    assert peak == pytest.approx(float(quadrature_mean(phi, alpha)), abs=1e-3)


def test_quadrature_mean_conventions():
    """sqrt(2) Re(alpha e^{-i phi}) along the two axes."""
    assert float(quadrature_mean(0.0, 1.0)) == pytest.approx(math.sqrt(2.0))
    assert float(quadrature_mean(math.pi / 2, 1j)) == pytest.approx(math.sqrt(2.0))
    assert float(quadrature_mean(math.pi / 2, 1.0)) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("s", [0.0, -0.5, 1.5])
def test_bhd_symbol_domain(s):
    """s <= 0 (delta limit) and s > 1 have no function representation."""
    with pytest.raises(PhaseSpaceDomainError):
        bhd_symbol(0.0, 0.0, 0j, s)


def test_uhd_symbol_values():
    """No-click at zero displaced amplitude is certain; outcomes sum to one."""
    assert float(uhd_symbol(0, 0.4j, 0.4j)) == 1.0
    alpha = np.array([0.0, 0.5 + 0.5j, -1.0, 3.0j])
    total = uhd_symbol(0, 0.25, alpha) + uhd_symbol(1, 0.25, alpha)
    np.testing.assert_allclose(total, 1.0, atol=1e-15)
    assert float(uhd_symbol(0, 0.0, 1.0)) == pytest.approx(math.exp(-1.0))
    assert uhd_noclick(1.0, 0.0) == pytest.approx(math.exp(-1.0))


def test_uhd_symbol_rejects_outcome():
    """Only n in {0, 1} is a click outcome."""
    with pytest.raises(PhaseSpaceDomainError):
        uhd_symbol(2, 0.0, 0.0)


def test_ordering_param_range():
    """Ordering parameters live in [-1, 1]."""
    assert OrderingParam(-1.0).s == -1.0
    with pytest.raises(ConfigurationError):
        OrderingParam(1.5)


def test_coherent_amplitude_rejects_non_finite():
    """Amplitudes must be finite complex numbers."""
    assert coherent_amplitude(2) == 2 + 0j
    with pytest.raises(ConfigurationError):
        coherent_amplitude(complex(math.inf, 0.0))


def test_thermal_product_is_normalized():
    """Each mode of the displaced thermal product integrates to one."""
    q = thermal_product(0.5 + 0.2j, -0.3j, nbar_a=0.4, nbar_b=0.1)
    re, wre = gauss_legendre_grid(0.5, q.spread("A", 1.0), 64)
    im, wim = gauss_legendre_grid(0.2, q.spread("A", 1.0), 64)
    alpha_a = re[:, None] + 1j * im[None, :]
    weights = wre[:, None] * wim[None, :]
    values = q.density(alpha_a, q.centroid("B"), 1.0, 1.0)
    vb = q.variance("B", 1.0)
    assert np.sum(weights * values) == pytest.approx(1.0 / (math.pi * vb), rel=1e-9)


def test_thermal_variance_grows_with_lower_ordering():
    """Lower ordering parameters broaden the quasiprobability."""
    q = ThermalProductQuasiprobability(nbar_a=0.2)
    assert q.variance("A", -1.0) == pytest.approx(1.2)
    assert q.variance("A", 0.0) == pytest.approx(0.7)
    assert q.variance("A", 1.0) == pytest.approx(0.2)


def test_coherent_state_p_function_is_singular():
    """A coherent state (nbar = 0) has no regular P function."""
    q = ThermalProductQuasiprobability()
    with pytest.raises(SingularQuasiprobabilityError):
        q.variance("B", 1.0)
    with pytest.raises(ConfigurationError):
        ThermalProductQuasiprobability(nbar_a=-0.1)


def test_thermal_noclick_average():
    """The closed form equals the Q-symbol average over the thermal P function."""
    assert uhd_noclick_thermal(0.3j, 0.3j, 0.0) == pytest.approx(1.0)
    assert uhd_noclick_thermal(0j, 0j, 1.0) == pytest.approx(0.5)

    centroid, nbar, gamma = 0.4 - 0.2j, 0.6, 1.0 + 0.1j
    q = thermal_product(centroid_b=centroid, nbar_b=nbar, nbar_a=1.0)
    re, wre = gauss_legendre_grid(centroid.real, q.spread("B", 1.0), 64)
    im, wim = gauss_legendre_grid(centroid.imag, q.spread("B", 1.0), 64)
    beta = re[:, None] + 1j * im[None, :]
    weights = wre[:, None] * wim[None, :]
    density = np.exp(-np.abs(beta - centroid) ** 2 / nbar) / (math.pi * nbar)
    average = np.sum(weights * density * uhd_symbol(0, gamma, beta))
    assert average == pytest.approx(uhd_noclick_thermal(gamma, centroid, nbar), rel=1e-9)


@pytest.mark.parametrize("theta", [0.4, 2.1, -1.3])
def test_bhd_symbol_rotation_covariance(theta):
    """Rotating alpha by theta and shifting phi by theta leaves the symbol unchanged."""
    x = np.linspace(-3.0, 3.0, 61)
    alpha = 0.9 - 0.5j
    rotated = alpha * np.exp(1j * theta)
    for s in (0.3, 1.0):
        np.testing.assert_allclose(
            bhd_symbol(x, 0.6 + theta, rotated, s), bhd_symbol(x, 0.6, alpha, s), atol=1e-14
        )


@pytest.mark.parametrize("theta", [0.4, 2.1, -1.3])
def test_uhd_symbol_rotation_invariance(theta):
    """Rotating alpha and gamma together about the origin leaves both outcomes unchanged."""
    rng = np.random.default_rng(7)
    alpha = rng.normal(size=20) + 1j * rng.normal(size=20)
    gamma = 0.4 + 1.1j
    phase = np.exp(1j * theta)
    for n in (0, 1):
        np.testing.assert_allclose(
            uhd_symbol(n, gamma * phase, alpha * phase), uhd_symbol(n, gamma, alpha), atol=1e-14
        )
