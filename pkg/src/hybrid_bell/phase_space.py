"""
Phase-space POVM symbols for balanced and unbalanced homodyne detection,
and regular s-parameterized quasiprobabilities for test states.
"""

import cmath
import logging
import math
from dataclasses import dataclass
from typing import TypeAlias

import numpy as np
from numpy.typing import ArrayLike

from hybrid_bell.errors import (
    ConfigurationError,
    PhaseSpaceDomainError,
    SingularQuasiprobabilityError,
)

logger = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)

CoherentAmplitude: TypeAlias = complex


def coherent_amplitude(value) -> CoherentAmplitude:
    """Coerces to a complex amplitude with finite parts."""
    alpha = complex(value)
    if not cmath.isfinite(alpha):
        raise ConfigurationError(f"amplitude must be finite, got {value!r}")
    return alpha


@dataclass(frozen=True)
class OrderingParam:
    """Operator-ordering parameter: -1 antinormal, 0 symmetric, 1 normal."""

    s: float

    def __post_init__(self):
        if not -1.0 <= self.s <= 1.0:
            raise ConfigurationError(f"ordering parameter must lie in [-1, 1], got {self.s}")


def quadrature_mean(phi: ArrayLike, alpha: ArrayLike) -> np.ndarray:
    """sqrt(2) Re(alpha e^{-i phi}), the quadrature centre of a coherent state."""
    return SQRT2 * np.real(np.asarray(alpha) * np.exp(-1j * np.asarray(phi)))


def bhd_symbol(x: ArrayLike, phi: ArrayLike, alpha: ArrayLike, s: float = 1.0) -> np.ndarray:
    """
    Balanced-homodyne POVM symbol, a Gaussian in x of variance s/2.

    The s -> 0 limit is a Dirac delta and has no function representation here.
    """
    if s <= 0:
        raise PhaseSpaceDomainError(
            f"balanced homodyne symbol needs s > 0; s = {s} is the delta-function limit"
        )
    if s > 1:
        raise PhaseSpaceDomainError(f"balanced homodyne symbol needs s <= 1, got {s}")
    d = np.asarray(x, dtype=float) - quadrature_mean(phi, alpha)
    return np.exp(-d * d / s) / math.sqrt(math.pi * s)


def uhd_symbol(n: int, gamma: ArrayLike, alpha: ArrayLike) -> np.ndarray:
    """Unbalanced-homodyne Q symbol: no-click (n=0) or click (n=1) probability."""
    if n not in (0, 1):
        raise PhaseSpaceDomainError(f"click outcome must be 0 or 1, got {n!r}")
    noclick = np.exp(-np.abs(np.asarray(alpha) - np.asarray(gamma)) ** 2)
    return noclick if n == 0 else 1.0 - noclick


@dataclass(frozen=True)
class ThermalProductQuasiprobability:
    """
    Displaced thermal state on both modes, a product of complex Gaussians.

    At ordering s each mode is a Gaussian of complex variance nbar + (1 - s)/2
    around its centroid, so it stays non-negative for every s where it is
    regular. nbar = 0 gives a coherent state, regular only for s < 1.
    """

    centroid_a: complex = 0j
    centroid_b: complex = 0j
    nbar_a: float = 0.0
    nbar_b: float = 0.0

    def __post_init__(self):
        if self.nbar_a < 0 or self.nbar_b < 0:
            raise ConfigurationError("thermal occupation must be non-negative")

    def variance(self, mode: str, s: float) -> float:
        nbar = self.nbar_a if mode == "A" else self.nbar_b
        v = nbar + 0.5 * (1.0 - s)
        if v <= 0:
            raise SingularQuasiprobabilityError(
                f"mode {mode} quasiprobability at s={s} is a delta distribution"
            )
        return v

    def centroid(self, mode: str) -> complex:
        return self.centroid_a if mode == "A" else self.centroid_b

    def spread(self, mode: str, s: float) -> float:
        """Standard deviation along each real axis."""
        return math.sqrt(self.variance(mode, s) / 2.0)

    def density(
        self, alpha_a: ArrayLike, alpha_b: ArrayLike, s_a: float, s_b: float
    ) -> np.ndarray:
        va = self.variance("A", s_a)
        vb = self.variance("B", s_b)
        da = np.abs(np.asarray(alpha_a) - self.centroid_a) ** 2
        db = np.abs(np.asarray(alpha_b) - self.centroid_b) ** 2
        return np.exp(-da / va - db / vb) / (math.pi**2 * va * vb)


def uhd_noclick_thermal(gamma: complex, centroid: complex, nbar: float) -> float:
    """No-click probability of a displaced thermal state: the Q-symbol average."""
    return math.exp(-abs(centroid - gamma) ** 2 / (1.0 + nbar)) / (1.0 + nbar)


def uhd_noclick(gamma: complex, alpha: complex) -> float:
    """Scalar no-click Q symbol e^{-|alpha - gamma|^2} for optimizer inner loops."""
    return math.exp(-abs(alpha - gamma) ** 2)


def thermal_product(
    centroid_a: complex = 0j,
    centroid_b: complex = 0j,
    nbar_a: float = 0.0,
    nbar_b: float = 0.0,
) -> ThermalProductQuasiprobability:
    return ThermalProductQuasiprobability(
        coherent_amplitude(centroid_a), coherent_amplitude(centroid_b), nbar_a, nbar_b
    )
