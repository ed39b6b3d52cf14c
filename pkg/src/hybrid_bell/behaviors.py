"""
Behaviors P(x, n | phi_i, gamma_j) of the hybrid scheme.

Alice measures a quadrature x at phase phi_i with balanced homodyne
detection; Bob records a click n in {0, 1} behind a displacement gamma_j with
unbalanced homodyne detection. Every realization supplies the no-click density
P(x, 0 | phi, gamma) and the quadrature marginal P(x | phi); the click density
is always their difference, which keeps Alice's marginal independent of Bob's
setting.
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, NamedTuple, Optional

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike
from scipy.integrate import cumulative_trapezoid, trapezoid

from hybrid_bell.errors import (
    ConfigurationError,
    DegenerateMarginalError,
    SingularQuasiprobabilityError,
)
from hybrid_bell.numerics import (
    DEFAULT_INTEGRATION,
    IntegrationConfig,
    integrate_real_line,
)
from hybrid_bell.phase_space import (
    ThermalProductQuasiprobability,
    bhd_symbol,
    coherent_amplitude,
    quadrature_mean,
    uhd_noclick_thermal,
)

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
SAMPLING_NODES = 2**14


def check_index(value: int, name: str) -> int:
    if value not in (1, 2):
        raise ConfigurationError(f"{name} must be 1 or 2, got {value!r}")
    return value


def check_outcome(n: int) -> int:
    if n not in (0, 1):
        raise ConfigurationError(f"click outcome must be 0 or 1, got {n!r}")
    return n


@dataclass(frozen=True)
class HybridSettings:
    """Alice's two quadrature phases and Bob's two displacements."""

    phi: tuple[float, float] = (0.0, math.pi / 2)
    gamma: tuple[complex, complex] = (0j, 1 + 0j)

    def __post_init__(self):
        if len(self.phi) != 2 or len(self.gamma) != 2:
            raise ConfigurationError("hybrid settings need exactly two phases and two displacements")
        phases = []
        for p in self.phi:
            if not math.isfinite(p):
                raise ConfigurationError(f"phase must be finite, got {p!r}")
            phases.append(float(p) % TWO_PI)
        object.__setattr__(self, "phi", tuple(phases))
        object.__setattr__(self, "gamma", tuple(coherent_amplitude(g) for g in self.gamma))

    def phase(self, i: int) -> float:
        return self.phi[check_index(i, "phase index") - 1]

    def displacement(self, j: int) -> complex:
        return self.gamma[check_index(j, "displacement index") - 1]


@dataclass(frozen=True)
class Efficiencies:
    eta_a: float = 1.0
    eta_b: float = 1.0

    def __post_init__(self):
        for name, eta in (("eta_A", self.eta_a), ("eta_B", self.eta_b)):
            if not 0.0 < eta <= 1.0:
                raise ConfigurationError(f"{name} must lie in (0, 1], got {eta}")


@dataclass(frozen=True)
class TmsvsParams:
    r: float
    eff: Efficiencies = field(default_factory=Efficiencies)

    def __post_init__(self):
        if not 0.0 <= self.r <= 10.0:
            raise ConfigurationError(f"squeezing r must lie in [0, 10], got {self.r}")


@dataclass(frozen=True)
class CatParams:
    alpha0: complex
    eff: Efficiencies = field(default_factory=Efficiencies)

    def __post_init__(self):
        alpha0 = coherent_amplitude(self.alpha0)
        if abs(alpha0) > 20:
            raise ConfigurationError(f"|alpha0| must not exceed 20, got {abs(alpha0)}")
        object.__setattr__(self, "alpha0", alpha0)


# --- Two-mode squeezed vacuum ------------------------------------------------


def tmsvs_sigmas(params: TmsvsParams) -> tuple[float, float, float]:
    """The three lossy variance parameters sigma_1, sigma_2, sigma_3."""
    eta_a, eta_b = params.eff.eta_a, params.eff.eta_b
    ch2 = math.cosh(params.r) ** 2
    sh2 = math.sinh(params.r) ** 2
    sigma2 = 1.0 + 2.0 * eta_a * sh2
    sigma1 = eta_b * ch2 + (1.0 - eta_b) * sigma2
    sigma3 = 1.0 + eta_b * sh2
    return sigma1, sigma2, sigma3


def _tmsvs_exponent(x, phi, gamma, params: TmsvsParams) -> np.ndarray:
    sigma1, sigma2, sigma3 = tmsvs_sigmas(params)
    rotated = complex(gamma) * np.exp(-1j * np.asarray(phi))
    coupling = math.sqrt(params.eff.eta_a * params.eff.eta_b / 2.0) * math.sinh(2 * params.r)
    shifted = np.real(rotated) + np.asarray(x, dtype=float) * coupling / sigma2
    return -(sigma2 / sigma1) * shifted**2 - np.imag(rotated) ** 2 / sigma3


def tmsvs_marginal(x: ArrayLike, phi: float, params: TmsvsParams) -> np.ndarray:
    """Quadrature distribution: Gaussian of variance sigma_2/2, phase independent."""
    _, sigma2, _ = tmsvs_sigmas(params)
    x = np.asarray(x, dtype=float)
    return np.exp(-x * x / sigma2) / math.sqrt(math.pi * sigma2)


def tmsvs_conditional_noclick(
    x: ArrayLike, phi: float, gamma: complex, params: TmsvsParams
) -> np.ndarray:
    """P(0 | gamma; x; phi), the no-click probability given Alice's outcome."""
    if np.any(tmsvs_marginal(x, phi, params) <= 0):
        raise DegenerateMarginalError("quadrature marginal underflows at the requested x")
    return tmsvs_max_noclick(params) * np.exp(_tmsvs_exponent(x, phi, gamma, params))


def tmsvs_pdf(
    x: ArrayLike, n: int, phi: float, gamma: complex, params: TmsvsParams
) -> np.ndarray:
    sigma1, sigma2, sigma3 = tmsvs_sigmas(params)
    x = np.asarray(x, dtype=float)
    noclick = (
        np.exp(_tmsvs_exponent(x, phi, gamma, params) - x * x / sigma2)
        / math.sqrt(math.pi * sigma1 * sigma3)
    )
    if check_outcome(n) == 0:
        return noclick
    return tmsvs_marginal(x, phi, params) - noclick


def tmsvs_pdf_lossless(
    x: ArrayLike, n: int, phi: float, gamma: complex, r: float
) -> np.ndarray:
    """Closed form for unit efficiencies, written with Re(gamma e^{-i phi})."""
    x = np.asarray(x, dtype=float)
    ch2 = math.cosh(r) ** 2
    shift = math.sqrt(2.0) * np.real(complex(gamma) * np.exp(-1j * phi)) * math.tanh(r)
    noclick = np.exp(-abs(gamma) ** 2 / ch2 - (x + shift) ** 2) / (math.sqrt(math.pi) * ch2)
    if check_outcome(n) == 0:
        return noclick
    c2r = math.cosh(2 * r)
    return np.exp(-x * x / c2r) / math.sqrt(math.pi * c2r) - noclick


def tmsvs_max_noclick(params: TmsvsParams) -> float:
    """Supremum of the conditional no-click probability over x, phi and gamma."""
    sigma1, sigma2, sigma3 = tmsvs_sigmas(params)
    return math.sqrt(sigma2 / (sigma1 * sigma3))


def locality_threshold_r() -> float:
    """Squeezing above which the lossless conditional no-click never exceeds 1/2."""
    return math.acosh(math.sqrt(2.0 * math.sqrt(3.0) + 4.0))


# --- Schroedinger cat --------------------------------------------------------


def cat_marginal(x: ArrayLike, phi: float, params: CatParams) -> np.ndarray:
    a = math.sqrt(params.eff.eta_a) * params.alpha0
    return 0.5 * (bhd_symbol(x, phi, a) + bhd_symbol(x, phi, -a))


def cat_pdf(
    x: ArrayLike, n: int, phi: float, gamma: complex, params: CatParams
) -> np.ndarray:
    eta_a, eta_b = params.eff.eta_a, params.eff.eta_b
    alpha0 = params.alpha0
    gamma = complex(gamma)
    x = np.asarray(x, dtype=float)
    a = math.sqrt(eta_a) * alpha0
    shift = math.sqrt(2.0 * eta_a) * (alpha0 * np.exp(-1j * phi)).imag
    interference = (
        2.0
        / math.sqrt(math.pi)
        * math.sqrt(eta_b)
        * math.exp(-2.0 * abs(alpha0) ** 2)
        * np.real(gamma * np.exp(-((x - 1j * shift) ** 2)))
    )
    noclick = (
        0.5
        * math.exp(-abs(gamma) ** 2)
        * (
            bhd_symbol(x, phi, a)
            + bhd_symbol(x, phi, -a) * (1.0 - eta_b + eta_b * abs(gamma) ** 2)
            + interference
        )
    )
    if check_outcome(n) == 0:
        return noclick
    return cat_marginal(x, phi, params) - noclick


# --- Behavior realizations ---------------------------------------------------


class Samples(NamedTuple):
    x: np.ndarray
    n: np.ndarray


class Behavior(ABC):
    """Evaluable behavior over the four setting pairs (phi_i, gamma_j)."""

    settings: HybridSettings

    @abstractmethod
    def noclick_pdf(self, x: ArrayLike, i: int, j: int) -> np.ndarray:
        """P(x, 0 | phi_i, gamma_j)."""

    @abstractmethod
    def marginal_x(self, x: ArrayLike, i: int) -> np.ndarray:
        """P(x | phi_i)."""

    @abstractmethod
    def window(self, i: int) -> tuple[float, float]:
        """Centre and dominant standard deviation of the x-distribution at phi_i."""

    @abstractmethod
    def with_settings(self, settings: HybridSettings) -> "Behavior":
        """The same state measured with other settings."""

    def pdf(self, x: ArrayLike, n: int, i: int, j: int) -> np.ndarray:
        noclick = self.noclick_pdf(x, i, j)
        if check_outcome(n) == 0:
            return noclick
        return self.marginal_x(x, i) - noclick

    def integrate_x(
        self,
        f: Callable[[np.ndarray], np.ndarray],
        i: int,
        cfg: IntegrationConfig = DEFAULT_INTEGRATION,
        points: Optional[Iterable[float]] = None,
    ) -> float:
        """Integral over x of a function living on the phi_i quadrature axis."""
        center, width = self.window(i)
        return integrate_real_line(f, cfg, center, width, points)

    def noclick_probability(
        self, j: int, i: int = 1, cfg: IntegrationConfig = DEFAULT_INTEGRATION
    ) -> float:
        """Bob's marginal P(0 | gamma_j)."""
        return self.integrate_x(lambda x: self.noclick_pdf(x, i, j), i, cfg)

    def normalization(
        self, i: int, j: int, cfg: IntegrationConfig = DEFAULT_INTEGRATION
    ) -> float:
        return self.integrate_x(
            lambda x: self.pdf(x, 0, i, j) + self.pdf(x, 1, i, j), i, cfg
        )

    def tabulate(self, x: ArrayLike) -> pd.DataFrame:
        """Long table with columns x, n, i, j, p over all setting pairs."""
        x = np.asarray(x, dtype=float)
        frames = []
        for i in (1, 2):
            for j in (1, 2):
                for n in (0, 1):
                    frames.append(
                        pd.DataFrame(
                            {"x": x, "n": n, "i": i, "j": j, "p": self.pdf(x, n, i, j)}
                        )
                    )
        return pd.concat(frames, ignore_index=True)


@dataclass(frozen=True)
class TmsvsBehavior(Behavior):
    settings: HybridSettings
    params: TmsvsParams

    def noclick_pdf(self, x, i, j):
        return tmsvs_pdf(x, 0, self.settings.phase(i), self.settings.displacement(j), self.params)

    def marginal_x(self, x, i):
        return tmsvs_marginal(x, self.settings.phase(i), self.params)

    def window(self, i):
        _, sigma2, _ = tmsvs_sigmas(self.params)
        return 0.0, math.sqrt(sigma2 / 2.0)

    def with_settings(self, settings):
        return replace(self, settings=settings)

    def conditional_noclick(self, x, i, j):
        return tmsvs_conditional_noclick(
            x, self.settings.phase(i), self.settings.displacement(j), self.params
        )

    @property
    def max_noclick(self) -> float:
        return tmsvs_max_noclick(self.params)

    def quasiprobability(self, s_a: float = 1.0, s_b: float = 1.0):
        # The squeezed pair has no regular P function on Bob's side.
        raise SingularQuasiprobabilityError(
            f"two-mode squeezed vacuum at r={self.params.r} has no regular "
            f"quasiprobability at s_B={s_b}"
        )


@dataclass(frozen=True)
class CatBehavior(Behavior):
    settings: HybridSettings
    params: CatParams

    def noclick_pdf(self, x, i, j):
        return cat_pdf(x, 0, self.settings.phase(i), self.settings.displacement(j), self.params)

    def marginal_x(self, x, i):
        return cat_marginal(x, self.settings.phase(i), self.params)

    def window(self, i):
        a = math.sqrt(self.params.eff.eta_a) * self.params.alpha0
        offset = abs(float(quadrature_mean(self.settings.phase(i), a)))
        return 0.0, math.sqrt(0.5) + offset / 6.0

    def with_settings(self, settings):
        return replace(self, settings=settings)


@dataclass(frozen=True)
class ThermalProductBehavior(Behavior):
    """
    Product of displaced thermal states, one per mode.

    Classical at every ordering; with zero occupations it is a pair of
    coherent states.
    """

    settings: HybridSettings
    centroid_a: complex = 0j
    centroid_b: complex = 0j
    nbar_a: float = 0.0
    nbar_b: float = 0.0

    def _noclick(self, j: int) -> float:
        return uhd_noclick_thermal(self.settings.displacement(j), self.centroid_b, self.nbar_b)

    def noclick_pdf(self, x, i, j):
        return self.marginal_x(x, i) * self._noclick(j)

    def marginal_x(self, x, i):
        mean, _ = self.window(i)
        v = 1.0 + 2.0 * self.nbar_a
        d = np.asarray(x, dtype=float) - mean
        return np.exp(-d * d / v) / math.sqrt(math.pi * v)

    def window(self, i):
        mean = float(quadrature_mean(self.settings.phase(i), self.centroid_a))
        return mean, math.sqrt((1.0 + 2.0 * self.nbar_a) / 2.0)

    def with_settings(self, settings):
        return replace(self, settings=settings)

    def quasiprobability(self) -> ThermalProductQuasiprobability:
        return ThermalProductQuasiprobability(
            self.centroid_a, self.centroid_b, self.nbar_a, self.nbar_b
        )


@dataclass(frozen=True)
class FactorizedBehavior(Behavior):
    """P_u(x, n | phi, gamma) = P(x | phi) P(n | gamma) built from a source behavior."""

    source: Behavior
    noclick: tuple[float, float]

    @property
    def settings(self) -> HybridSettings:
        return self.source.settings

    def noclick_pdf(self, x, i, j):
        return self.source.marginal_x(x, i) * self.noclick[check_index(j, "j") - 1]

    def marginal_x(self, x, i):
        return self.source.marginal_x(x, i)

    def window(self, i):
        return self.source.window(i)

    def integrate_x(self, f, i, cfg=DEFAULT_INTEGRATION, points=None):
        return self.source.integrate_x(f, i, cfg, points)

    def with_settings(self, settings):
        return factorized(self.source.with_settings(settings))


def factorized(
    behavior: Behavior, cfg: IntegrationConfig = DEFAULT_INTEGRATION
) -> FactorizedBehavior:
    """Replaces a behavior by the product of its two marginals."""
    noclick = tuple(behavior.noclick_probability(j, 1, cfg) for j in (1, 2))
    logger.debug(f"factorized no-click probabilities: {noclick}")
    return FactorizedBehavior(behavior, noclick)


class TabulatedBehavior(Behavior):
    """
    Behavior given as values on a rectangular x-grid per setting pair.

    Between nodes the densities are interpolated linearly; integrals use the
    trapezoidal rule on the stored nodes.
    """

    def __init__(self, settings: HybridSettings, table: pd.DataFrame):
        self.settings = settings
        self._grids: dict[tuple[int, int], tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
        for (i, j), part in table.groupby(["i", "j"]):
            by_n = {n: g.sort_values("x") for n, g in part.groupby("n")}
            if set(by_n) != {0, 1}:
                raise ConfigurationError(f"setting pair ({i}, {j}) lacks one click outcome")
            x0 = by_n[0]["x"].to_numpy(dtype=float)
            x1 = by_n[1]["x"].to_numpy(dtype=float)
            if x0.shape != x1.shape or not np.allclose(x0, x1, rtol=0, atol=1e-12):
                raise ConfigurationError(f"x-grid for ({i}, {j}) is not rectangular in n")
            if len(x0) < 2 or np.any(np.diff(x0) <= 0):
                raise ConfigurationError(f"x-grid for ({i}, {j}) needs distinct points")
            self._grids[(int(i), int(j))] = (
                x0,
                by_n[0]["p"].to_numpy(dtype=float),
                by_n[1]["p"].to_numpy(dtype=float),
            )
        missing = {(i, j) for i in (1, 2) for j in (1, 2)} - set(self._grids)
        if missing:
            raise ConfigurationError(f"tabulated behavior misses setting pairs {sorted(missing)}")

    def _grid(self, i: int, j: int):
        return self._grids[(check_index(i, "i"), check_index(j, "j"))]

    def noclick_pdf(self, x, i, j):
        xs, p0, _ = self._grid(i, j)
        return np.interp(np.asarray(x, dtype=float), xs, p0, left=0.0, right=0.0)

    def marginal_x(self, x, i):
        values = []
        for j in (1, 2):
            xs, p0, p1 = self._grid(i, j)
            values.append(np.interp(np.asarray(x, dtype=float), xs, p0 + p1, left=0.0, right=0.0))
        return 0.5 * (values[0] + values[1])

    def nodes(self, i: int) -> np.ndarray:
        return np.union1d(self._grid(i, 1)[0], self._grid(i, 2)[0])

    def window(self, i):
        xs = self.nodes(i)
        return 0.5 * (xs[0] + xs[-1]), (xs[-1] - xs[0]) / 16.0

    def integrate_x(self, f, i, cfg=DEFAULT_INTEGRATION, points=None):
        xs = self.nodes(i)
        return float(trapezoid(np.asarray(f(xs), dtype=float), xs))

    def with_settings(self, settings):
        raise ConfigurationError("a tabulated behavior is fixed to the settings it was measured with")


def read_tabulated_csv(path: Path, settings: HybridSettings) -> TabulatedBehavior:
    """Reads a behavior file with header x,n,i,j,p."""
    table = pd.read_csv(path)
    expected = {"x", "n", "i", "j", "p"}
    if set(table.columns) != expected:
        raise ConfigurationError(f"{path}: expected columns {sorted(expected)}, got {list(table.columns)}")
    if not table["n"].isin([0, 1]).all() or not table[["i", "j"]].isin([1, 2]).all().all():
        raise ConfigurationError(f"{path}: n must be 0/1 and i, j must be 1/2")
    logger.info(f"Loaded {len(table)} behavior values from {path}")
    return TabulatedBehavior(settings, table)


def sample_outcomes(
    behavior: Behavior, i: int, j: int, count: int, seed: int
) -> Samples:
    """
    Draws (x, n) records for the setting pair (phi_i, gamma_j).

    x comes from the quadrature marginal by inverse transform on a cumulative
    table; n is a coin with success probability P(x, 0)/P(x). The Philox
    stream is keyed by (seed, setting pair).
    """
    if count < 1:
        raise ConfigurationError(f"sample count must be >= 1, got {count}")
    check_index(i, "i")
    check_index(j, "j")
    center, width = behavior.window(i)
    nodes = np.linspace(center - 8.0 * width, center + 8.0 * width, SAMPLING_NODES)
    density = np.clip(behavior.marginal_x(nodes, i), 0.0, None)
    cdf = cumulative_trapezoid(density, nodes, initial=0.0)
    if not cdf[-1] > 0:
        raise DegenerateMarginalError("quadrature marginal has no mass to sample from")
    cdf /= cdf[-1]
    keep = np.concatenate(([True], np.diff(cdf) > 0))

    key = np.array([seed, 2 * (i - 1) + (j - 1)], dtype=np.uint64)
    rng = np.random.Generator(np.random.Philox(key=key))
    uniforms = rng.random((count, 2))
    x = np.interp(uniforms[:, 0], cdf[keep], nodes[keep])

    marginal = behavior.marginal_x(x, i)
    with np.errstate(divide="ignore", invalid="ignore"):
        p_noclick = np.where(marginal > 0, behavior.noclick_pdf(x, i, j) / marginal, 1.0)
    n = (uniforms[:, 1] >= np.clip(p_noclick, 0.0, 1.0)).astype(int)
    return Samples(x, n)
