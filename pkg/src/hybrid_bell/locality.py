"""
Locality test for the hybrid scheme and the explicit local model behind it.

A behavior is local iff <m>_{phi_1} <= <M>_{phi_2} and <m>_{phi_2} <= <M>_{phi_1};
when it is, FactorizedJpdao builds a non-negative joint distribution of all
four observables (x_1, x_2, n_1, n_2) reproducing it. The module also carries
the homogeneous/particular split of joint distributions and the discrete
CHSH machinery used after dichotomizing the quadrature.
"""

import itertools
import logging
import math
from abc import ABC, abstractmethod
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Protocol, Sequence

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike
from scipy.optimize import brentq

from hybrid_bell.behaviors import (
    Behavior,
    CatBehavior,
    CatParams,
    Efficiencies,
    HybridSettings,
    TmsvsBehavior,
    TmsvsParams,
    check_index,
    check_outcome,
    sample_outcomes,
)
from hybrid_bell.errors import (
    ConfigurationError,
    DegenerateKappaError,
    MarginalCheckError,
    NonlocalBehaviorError,
)
from hybrid_bell.numerics import (
    DEFAULT_INTEGRATION,
    IntegrationConfig,
    OptResult,
    SearchBox,
    gauss_legendre_grid,
    integrate_real_line,
    maximize_multistart,
    maximize_shgo,
)
from hybrid_bell.phase_space import bhd_symbol, uhd_symbol

logger = logging.getLogger(__name__)

KAPPA_DEGENERACY = 1e-12
EMPTY_CELL = 1e-14
LOCALITY_TOLERANCE = 1e-9
MARGINAL_TOLERANCE = 1e-6
SCAN_POINTS = 4001

LOCALITY_BOX = SearchBox(
    lower=(0.0, 0.0, -3.0, -3.0, -3.0, -3.0),
    upper=(2 * math.pi, 2 * math.pi, 3.0, 3.0, 3.0, 3.0),
)


def other(index: int) -> int:
    """The complementary setting index: 2 for 1 and 1 for 2."""
    return 3 - check_index(index, "setting index")


def sign_boundaries(
    g: Callable[[np.ndarray], np.ndarray], lo: float, hi: float, count: int = SCAN_POINTS
) -> list[float]:
    """Points in (lo, hi) where the predicate g(x) >= 0 switches value."""
    grid = np.linspace(lo, hi, count)
    inside = np.asarray(g(grid)) >= 0
    roots = []
    for a in np.flatnonzero(inside[:-1] != inside[1:]):
        xa, xb = grid[a], grid[a + 1]
        ga, gb = float(g(np.array([xa]))[0]), float(g(np.array([xb]))[0])
        if ga == 0.0:
            roots.append(xa)
        elif ga * gb < 0:
            roots.append(brentq(lambda t: float(g(np.array([t]))[0]), xa, xb, xtol=1e-13))
        else:
            roots.append(0.5 * (xa + xb))
    return roots


def _span(behavior: Behavior) -> tuple[float, float]:
    bounds = []
    for i in (1, 2):
        center, width = behavior.window(i)
        bounds += [center - 8.0 * width, center + 8.0 * width]
    return min(bounds), max(bounds)


# --- m and M -----------------------------------------------------------------


def m_function(behavior: Behavior, x: ArrayLike, i: int) -> np.ndarray:
    g = behavior.noclick_pdf(x, i, 1) + behavior.noclick_pdf(x, i, 2) - behavior.marginal_x(x, i)
    return np.maximum(g, 0.0)


def M_function(behavior: Behavior, x: ArrayLike, i: int) -> np.ndarray:
    return np.minimum(behavior.noclick_pdf(x, i, 1), behavior.noclick_pdf(x, i, 2))


def _m_kinks(behavior: Behavior, i: int) -> list[float]:
    return sign_boundaries(
        lambda x: behavior.noclick_pdf(x, i, 1)
        + behavior.noclick_pdf(x, i, 2)
        - behavior.marginal_x(x, i),
        *_span(behavior),
    )


def _M_kinks(behavior: Behavior, i: int) -> list[float]:
    return sign_boundaries(
        lambda x: behavior.noclick_pdf(x, i, 2) - behavior.noclick_pdf(x, i, 1),
        *_span(behavior),
    )


def _kinks(behavior: Behavior, i: int) -> list[float]:
    return _m_kinks(behavior, i) + _M_kinks(behavior, i)


def mean_m(
    behavior: Behavior, i: int, cfg: IntegrationConfig = DEFAULT_INTEGRATION
) -> float:
    """<m>_{phi_i}, split at the kinks of m only."""
    check_index(i, "i")
    return behavior.integrate_x(
        lambda x: m_function(behavior, x, i), i, cfg, _m_kinks(behavior, i)
    )


def mean_M(
    behavior: Behavior, i: int, cfg: IntegrationConfig = DEFAULT_INTEGRATION
) -> float:
    check_index(i, "i")
    return behavior.integrate_x(
        lambda x: M_function(behavior, x, i), i, cfg, _M_kinks(behavior, i)
    )


@dataclass(frozen=True)
class MMFunctions:
    """m(x, phi_i), M(x, phi_i) and their integrals for one Alice setting."""

    behavior: Behavior
    i: int
    mean_m: float
    mean_M: float

    def m(self, x: ArrayLike) -> np.ndarray:
        return m_function(self.behavior, x, self.i)

    def M(self, x: ArrayLike) -> np.ndarray:
        return M_function(self.behavior, x, self.i)


def mm_functions(
    behavior: Behavior, i: int, cfg: IntegrationConfig = DEFAULT_INTEGRATION
) -> MMFunctions:
    return MMFunctions(behavior, i, mean_m(behavior, i, cfg), mean_M(behavior, i, cfg))


@dataclass(frozen=True)
class LocalityReport:
    m1: float
    M1: float
    m2: float
    M2: float

    @property
    def violation(self) -> float:
        """Absolute violation V; V <= 0 means the behavior is local."""
        return max(self.m1 - self.M2, self.m2 - self.M1)


def locality_report(
    behavior: Behavior, cfg: IntegrationConfig = DEFAULT_INTEGRATION
) -> LocalityReport:
    first = mm_functions(behavior, 1, cfg)
    second = mm_functions(behavior, 2, cfg)
    return LocalityReport(first.mean_m, first.mean_M, second.mean_m, second.mean_M)


def locality_violation(
    behavior: Behavior, cfg: IntegrationConfig = DEFAULT_INTEGRATION
) -> float:
    return locality_report(behavior, cfg).violation


def locality_objective_F(
    settings: HybridSettings,
    params: TmsvsParams,
    cfg: IntegrationConfig = DEFAULT_INTEGRATION,
) -> float:
    """F = <m>_{phi_1} - <M>_{phi_2} for the squeezed vacuum."""
    behavior = TmsvsBehavior(settings, params)
    return mean_m(behavior, 1, cfg) - mean_M(behavior, 2, cfg)


def settings_from_vector(v: ArrayLike) -> HybridSettings:
    """(phi_1, phi_2, Re g_1, Im g_1, Re g_2, Im g_2) -> HybridSettings."""
    v = np.asarray(v, dtype=float)
    return HybridSettings(
        phi=(v[0], v[1]), gamma=(complex(v[2], v[3]), complex(v[4], v[5]))
    )


def optimize_locality(
    params: TmsvsParams,
    starts: int = 64,
    seed: int = 0,
    optimizer: str = "multistart",
    maxfev: Optional[int] = None,
    box: SearchBox = LOCALITY_BOX,
    cfg: IntegrationConfig = DEFAULT_INTEGRATION,
) -> OptResult:
    """Global maximum of F over both phases and both complex displacements."""

    def objective(v: np.ndarray) -> float:
        return locality_objective_F(settings_from_vector(v), params, cfg)

    if optimizer == "multistart":
        result = maximize_multistart(objective, box, starts, seed, maxfev=maxfev)
    elif optimizer == "shgo":
        result = maximize_shgo(objective, box, sampling_points=max(starts, 32))
    else:
        raise ConfigurationError(f"unknown optimizer {optimizer!r}")
    logger.info(
        f"max F at r={params.r:g}: {result.value:.3e} ({result.evaluations} evaluations)"
    )
    return result


@dataclass(frozen=True)
class CatScanRow:
    alpha0: float
    eta_A: float
    eta_B: float
    m1: float
    M1: float
    m2: float
    M2: float
    V: float


def _cat_point(args: tuple) -> CatScanRow:
    alpha0, eff, settings, cfg = args
    report = locality_report(CatBehavior(settings, CatParams(alpha0, eff)), cfg)
    logger.info(f"alpha0={alpha0:.4g}: V={report.violation:.6g}")
    return CatScanRow(
        alpha0, eff.eta_a, eff.eta_b, report.m1, report.M1, report.m2, report.M2,
        report.violation,
    )


def scan_cat_violation(
    alpha_values: Sequence[float],
    eff: Efficiencies,
    settings: HybridSettings,
    cfg: IntegrationConfig = DEFAULT_INTEGRATION,
    workers: int = 1,
) -> list[CatScanRow]:
    """Absolute violation V of the cat-state behavior along a real alpha0 grid."""
    jobs = [(float(a), eff, settings, cfg) for a in alpha_values]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_cat_point, jobs))
    return [_cat_point(job) for job in jobs]

# --- Explicit JPDAO ----------------------------------------------------------


def kappa_from_report(report: LocalityReport) -> float:
    numerator = report.M2 - report.m1
    denominator = report.M1 - report.m2
    if abs(numerator) < KAPPA_DEGENERACY and abs(denominator) < KAPPA_DEGENERACY:
        return 0.5
    if abs(denominator) < KAPPA_DEGENERACY:
        raise DegenerateKappaError(
            f"<M>_1 - <m>_2 vanishes while <M>_2 - <m>_1 = {numerator:.3g}"
        )
    total = denominator + numerator
    if abs(total) < KAPPA_DEGENERACY:
        raise DegenerateKappaError("kappa has a vanishing denominator")
    return denominator / total


def kappa(behavior: Behavior, cfg: IntegrationConfig = DEFAULT_INTEGRATION) -> float:
    return kappa_from_report(locality_report(behavior, cfg))


class JointDistribution(ABC):
    """A signed function W(x_1, x_2, n_1, n_2) with its line marginals."""

    @abstractmethod
    def __call__(self, x1: ArrayLike, x2: ArrayLike, n1: int, n2: int) -> np.ndarray:
        ...

    @abstractmethod
    def line_marginal(self, x: ArrayLike, keep: int, n1: int, n2: int) -> np.ndarray:
        """Integral of W over the quadrature not kept, as a function of x_keep."""

    def slice_density(self, x: ArrayLike, i: int, j: int, n: int) -> np.ndarray:
        """Reconstructed P(x, n | phi_i, gamma_j): sum out the other click."""
        check_outcome(n)
        total = 0.0
        for other_n in (0, 1):
            n1, n2 = (n, other_n) if check_index(j, "j") == 1 else (other_n, n)
            total = total + self.line_marginal(x, i, n1, n2)
        return np.asarray(total)

    def tabulate(self, x1: ArrayLike, x2: ArrayLike) -> pd.DataFrame:
        """Long table with columns x1, x2, n1, n2, w on the tensor grid x1 x x2."""
        g1, g2 = np.meshgrid(np.asarray(x1, float), np.asarray(x2, float), indexing="ij")
        frames = []
        for n1, n2 in itertools.product((0, 1), repeat=2):
            frames.append(
                pd.DataFrame(
                    {
                        "x1": g1.ravel(),
                        "x2": g2.ravel(),
                        "n1": n1,
                        "n2": n2,
                        "w": np.asarray(self(g1, g2, n1, n2)).ravel(),
                    }
                )
            )
        return pd.concat(frames, ignore_index=True)


def jpdao_weight(
    behavior: Behavior, kappa: float, x: ArrayLike, i: int, n1: int, n2: int
) -> np.ndarray:
    """w_i(x, n1, n2) of the factorized JPDAO for mixing parameter kappa."""
    check_index(i, "i")
    check_outcome(n1)
    check_outcome(n2)
    m = m_function(behavior, x, i)
    M = M_function(behavior, x, i)
    if i == 1:
        w00 = kappa * m + (1.0 - kappa) * M
    else:
        w00 = kappa * M + (1.0 - kappa) * m
    if (n1, n2) == (0, 0):
        return w00
    if (n1, n2) == (1, 0):
        return behavior.noclick_pdf(x, i, 2) - w00
    if (n1, n2) == (0, 1):
        return behavior.noclick_pdf(x, i, 1) - w00
    return (
        behavior.marginal_x(x, i)
        - behavior.noclick_pdf(x, i, 1)
        - behavior.noclick_pdf(x, i, 2)
        + w00
    )


def weight_integrals(
    behavior: Behavior, kappa: float, cfg: IntegrationConfig = DEFAULT_INTEGRATION
) -> np.ndarray:
    """Quadrature of w_i over x, indexed [i - 1, n1, n2]."""
    table = np.empty((2, 2, 2))
    for i in (1, 2):
        points = _kinks(behavior, i)
        for n1, n2 in itertools.product((0, 1), repeat=2):
            table[i - 1, n1, n2] = behavior.integrate_x(
                lambda x: jpdao_weight(behavior, kappa, x, i, n1, n2), i, cfg, points
            )
    return table


@dataclass(frozen=True, eq=False)
class FactorizedJpdao(JointDistribution):
    """
    W(x1, x2, n1, n2) = w1(x1, n1, n2) w2(x2, n1, n2) / w(n1, n2).

    w is indexed by (n1, n2); integrals holds the quadratures of w1 and w2,
    which equal w for a consistent construction.
    """

    behavior: Behavior
    kappa: float
    w: np.ndarray = field(repr=False)
    integrals: np.ndarray = field(repr=False)

    def weight_function(self, x: ArrayLike, i: int, n1: int, n2: int) -> np.ndarray:
        return jpdao_weight(self.behavior, self.kappa, x, i, n1, n2)

    def w1(self, x: ArrayLike, n1: int, n2: int) -> np.ndarray:
        return self.weight_function(x, 1, n1, n2)

    def w2(self, x: ArrayLike, n1: int, n2: int) -> np.ndarray:
        return self.weight_function(x, 2, n1, n2)

    def __call__(self, x1, x2, n1, n2):
        weight = self.w[n1, n2]
        if weight < EMPTY_CELL:
            return np.zeros(np.broadcast(np.asarray(x1), np.asarray(x2)).shape)
        return self.w1(x1, n1, n2) * self.w2(x2, n1, n2) / weight

    def line_marginal(self, x, keep, n1, n2):
        weight = self.w[n1, n2]
        if weight < EMPTY_CELL:
            return np.zeros(np.shape(x))
        ratio = self.integrals[other(keep) - 1, n1, n2] / weight
        return self.weight_function(x, keep, n1, n2) * ratio


def build_jpdao(
    behavior: Behavior, cfg: IntegrationConfig = DEFAULT_INTEGRATION
) -> FactorizedJpdao:
    """Constructs the explicit non-negative JPDAO of a local behavior."""
    report = locality_report(behavior, cfg)
    if report.violation > LOCALITY_TOLERANCE:
        raise NonlocalBehaviorError(report.violation)
    k = kappa_from_report(report)
    integrals = weight_integrals(behavior, k, cfg)
    w = integrals[0].copy()
    logger.debug(f"kappa = {k:.6g}, w = {w.tolist()}")
    return FactorizedJpdao(behavior, k, w, integrals)


@dataclass(frozen=True)
class MarginalReport:
    max_density_deviation: float
    max_weight_deviation: float
    min_weight_density: float

    @property
    def max_deviation(self) -> float:
        return max(self.max_density_deviation, self.max_weight_deviation)


def _check_grid(behavior: Behavior, i: int, count: int = 241) -> np.ndarray:
    center, width = behavior.window(i)
    return np.linspace(center - 6.0 * width, center + 6.0 * width, count)


def jpdao_marginal_check(
    jpdao: JointDistribution,
    behavior: Optional[Behavior],
    x: Optional[ArrayLike] = None,
) -> MarginalReport:
    """
    Compares the eight slices P(x, n | phi_i, gamma_j) rebuilt from a joint
    distribution with the behavior (or with zero when behavior is None).
    """
    if x is None and behavior is None:
        raise ConfigurationError("a grid is required when no behavior is given")
    density_dev = 0.0
    for i, j, n in itertools.product((1, 2), (1, 2), (0, 1)):
        grid = np.asarray(x, float) if x is not None else _check_grid(behavior, i)
        rebuilt = jpdao.slice_density(grid, i, j, n)
        target = behavior.pdf(grid, n, i, j) if behavior is not None else 0.0
        density_dev = max(density_dev, float(np.max(np.abs(rebuilt - target))))

    weight_dev = 0.0
    min_density = math.inf
    if isinstance(jpdao, FactorizedJpdao):
        weight_dev = float(np.max(np.abs(jpdao.integrals - jpdao.w[None, :, :])))
        for i, n1, n2 in itertools.product((1, 2), (0, 1), (0, 1)):
            grid = _check_grid(jpdao.behavior, i)
            min_density = min(min_density, float(np.min(jpdao.weight_function(grid, i, n1, n2))))
    report = MarginalReport(density_dev, weight_dev, min_density)
    logger.debug(f"marginal check: {report}")
    return report


# --- Homogeneous and particular solutions -------------------------------------


Kernel = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class HomogeneousSolution(JointDistribution):
    """(-1)^{n1+n2} C + d_{n1,0} d_{n2,0} C00 + d_{n1,0} d_{n2,1} C01 + d_{n1,1} d_{n2,0} C10."""

    c: Kernel
    c00: Kernel
    c01: Kernel
    c10: Kernel
    center: float = 0.0
    width: float = 1.0
    cfg: IntegrationConfig = DEFAULT_INTEGRATION

    def __call__(self, x1, x2, n1, n2):
        x1, x2 = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float))
        value = (-1.0) ** (n1 + n2) * self.c(x1, x2)
        extra = {(0, 0): self.c00, (0, 1): self.c01, (1, 0): self.c10}.get((n1, n2))
        if extra is not None:
            value = value + extra(x1, x2)
        return value

    def line_marginal(self, x, keep, n1, n2):
        out = []
        for value in np.atleast_1d(np.asarray(x, float)):
            if keep == 1:
                f = lambda y, v=value: self(np.full_like(y, v), y, n1, n2)  # noqa: E731
            else:
                f = lambda y, v=value: self(y, np.full_like(y, v), n1, n2)  # noqa: E731
            out.append(integrate_real_line(f, self.cfg, self.center, self.width))
        return np.asarray(out).reshape(np.shape(x))


def homogeneous_solution(
    c: Kernel, c00: Kernel, c01: Kernel, c10: Kernel, **window
) -> HomogeneousSolution:
    return HomogeneousSolution(c, c00, c01, c10, **window)


@dataclass(frozen=True)
class JointDifference(JointDistribution):
    """H = first - second."""

    first: JointDistribution
    second: JointDistribution

    def __call__(self, x1, x2, n1, n2):
        return self.first(x1, x2, n1, n2) - self.second(x1, x2, n1, n2)

    def line_marginal(self, x, keep, n1, n2):
        return self.first.line_marginal(x, keep, n1, n2) - self.second.line_marginal(
            x, keep, n1, n2
        )


@dataclass(frozen=True)
class SwappedClicks(JointDistribution):
    """The same joint distribution with the click labels n1 and n2 exchanged."""

    inner: JointDistribution

    def __call__(self, x1, x2, n1, n2):
        return self.inner(x1, x2, n2, n1)

    def line_marginal(self, x, keep, n1, n2):
        return self.inner.line_marginal(x, keep, n2, n1)


@dataclass(frozen=True)
class HomogeneousComponents:
    h: JointDistribution

    def c(self, x1, x2):
        return self.h(x1, x2, 1, 1)

    def c00(self, x1, x2):
        return self.h(x1, x2, 0, 0) - self.c(x1, x2)

    def c01(self, x1, x2):
        return self.h(x1, x2, 0, 1) + self.c(x1, x2)

    def c10(self, x1, x2):
        return self.h(x1, x2, 1, 0) + self.c(x1, x2)

    def line_marginals(self, x: ArrayLike, keep: int) -> dict[str, np.ndarray]:
        """Line integrals of C00, C01 and C10 along the axis that is not kept."""
        lm = {pair: self.h.line_marginal(x, keep, *pair) for pair in itertools.product((0, 1), repeat=2)}
        return {
            "C00": lm[(0, 0)] - lm[(1, 1)],
            "C01": lm[(0, 1)] + lm[(1, 1)],
            "C10": lm[(1, 0)] + lm[(1, 1)],
        }


def decompose_homogeneous(
    h: JointDistribution, x: ArrayLike, tolerance: float = MARGINAL_TOLERANCE
) -> HomogeneousComponents:
    """Splits a homogeneous H into C, C00, C01, C10 and checks zero line marginals."""
    components = HomogeneousComponents(h)
    for keep in (1, 2):
        for name, values in components.line_marginals(x, keep).items():
            deviation = float(np.max(np.abs(values)))
            if deviation > tolerance:
                raise MarginalCheckError(name, deviation)
    return components


def homogeneous_components(
    full: JointDistribution,
    wp: JointDistribution,
    x: ArrayLike,
    tolerance: float = MARGINAL_TOLERANCE,
) -> HomogeneousComponents:
    """C functions of H = W - W_p, checked on the sample points x."""
    return decompose_homogeneous(JointDifference(full, wp), x, tolerance)


class QuasiprobabilityModel(Protocol):
    def density(self, alpha_a, alpha_b, s_a: float, s_b: float) -> np.ndarray: ...

    def centroid(self, mode: str) -> complex: ...

    def spread(self, mode: str, s: float) -> float: ...


def _plane_rule(center: complex, spread: float, count: int, halfwidth: float):
    re, wre = gauss_legendre_grid(center.real, spread, count, halfwidth)
    im, wim = gauss_legendre_grid(center.imag, spread, count, halfwidth)
    nodes = (re[:, None] + 1j * im[None, :]).ravel()
    weights = (wre[:, None] * wim[None, :]).ravel()
    return nodes, weights


class PhaseSpaceSolution(JointDistribution):
    """
    Particular solution W_p evaluated by tensorized Gauss-Legendre quadrature.

    The quasiprobability is integrated against both Alice symbols at ordering
    s_a and both Bob Q symbols (s_B = 1) on a node_count^2 grid per mode.
    """

    def __init__(
        self,
        quasiprob: QuasiprobabilityModel,
        settings: HybridSettings,
        s_a: float = 1.0,
        node_count: int = 64,
        halfwidth: float = 8.0,
        chunk: int = 512,
    ):
        self.settings = settings
        self.s_a = s_a
        s_b = 1.0
        self.alpha_a, weights_a = _plane_rule(
            quasiprob.centroid("A"), quasiprob.spread("A", s_a), node_count, halfwidth
        )
        alpha_b, weights_b = _plane_rule(
            quasiprob.centroid("B"), quasiprob.spread("B", s_b), node_count, halfwidth
        )
        bob = {
            (n1, n2): weights_b
            * uhd_symbol(n1, settings.displacement(1), alpha_b)
            * uhd_symbol(n2, settings.displacement(2), alpha_b)
            for n1, n2 in itertools.product((0, 1), repeat=2)
        }
        self.alice_weights = {pair: np.empty(len(self.alpha_a)) for pair in bob}
        for start in range(0, len(self.alpha_a), chunk):
            rows = slice(start, start + chunk)
            q = quasiprob.density(self.alpha_a[rows, None], alpha_b[None, :], s_a, s_b)
            for pair, vector in bob.items():
                self.alice_weights[pair][rows] = weights_a[rows] * (q @ vector)
        logger.debug(f"phase-space solution on {len(self.alpha_a)}x{len(alpha_b)} nodes")

    def _alice(self, x: ArrayLike, i: int) -> np.ndarray:
        x = np.asarray(x, float)
        return bhd_symbol(x[..., None], self.settings.phase(i), self.alpha_a, self.s_a)

    def __call__(self, x1, x2, n1, n2):
        x1, x2 = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float))
        return np.sum(
            self._alice(x1, 1) * self._alice(x2, 2) * self.alice_weights[(n1, n2)], axis=-1
        )

    def line_marginal(self, x, keep, n1, n2):
        # Alice's symbol on the dropped quadrature integrates to one.
        return self._alice(x, keep) @ self.alice_weights[(n1, n2)]

    def total(self) -> float:
        return float(sum(v.sum() for v in self.alice_weights.values()))


def particular_solution_wp(
    quasiprob: QuasiprobabilityModel,
    settings: HybridSettings,
    point: tuple[float, float, int, int],
    s_a: float = 1.0,
    node_count: int = 64,
) -> float:
    x1, x2, n1, n2 = point
    solution = PhaseSpaceSolution(quasiprob, settings, s_a, node_count)
    return float(solution(x1, x2, check_outcome(n1), check_outcome(n2)))


# --- Test functions of the generalized CHSH inequalities -----------------------


@dataclass(frozen=True, eq=False)
class PartitionSets:
    """
    X1 = {x : g1(x) >= 0} and X2 = {x : g2(x) >= 0} with their boundaries.

    span bounds the region scanned for boundary points.
    """

    k: int
    g1: Callable[[np.ndarray], np.ndarray]
    g2: Callable[[np.ndarray], np.ndarray]
    span: tuple[float, float] = (-10.0, 10.0)

    def in_x1(self, x: ArrayLike) -> np.ndarray:
        return (np.asarray(self.g1(np.asarray(x, float))) >= 0).astype(float)

    def in_x2(self, x: ArrayLike) -> np.ndarray:
        return (np.asarray(self.g2(np.asarray(x, float))) >= 0).astype(float)

    def indicator(self, x: ArrayLike, i: int) -> np.ndarray:
        """I(x; X_i^{(k)}) with X_k^{(k)} = X1 and X_l^{(k)} = X2."""
        return self.in_x1(x) if check_index(i, "i") == self.k else self.in_x2(x)

    @cached_property
    def boundaries(self) -> list[float]:
        lo, hi = self.span
        return sorted(sign_boundaries(self.g1, lo, hi) + sign_boundaries(self.g2, lo, hi))


def partition_sets(behavior: Behavior, k: int) -> PartitionSets:
    """Partition sets of the locality test function, built from the behavior at phi_k, phi_l."""
    l = other(k)  # noqa: E741

    def g1(x):
        return (
            behavior.noclick_pdf(x, k, 1)
            + behavior.noclick_pdf(x, k, 2)
            - behavior.marginal_x(x, k)
        )

    def g2(x):
        return behavior.noclick_pdf(x, l, 2) - behavior.noclick_pdf(x, l, 1)

    return PartitionSets(k, g1, g2, _span(behavior))


READINGS = ("complementary", "printed")


def statement1_value(
    k: int, ind1, ind2, n: int, i: int, j: int, reading: str = "complementary"
):
    """
    Test-function value from the set memberships ind1 = I(x; X1), ind2 = I(x; X2).

    Rows, as (i, j): (k, 1), (k, 2), (l, 1), (l, 2).

    "complementary": rows for the first Alice setting act on i = k and rows for
    the second on i = l. Rows 1 and 2 are -I(X1) d_{n,1} and I(X1) d_{n,0}.
    Rows 3 and 4 are rewritten on top of the index swap: row 3 uses I(X2)
    where the typeset row has I(X1), giving -I(X2) d_{n,0}, and row 4 becomes
    -(1 - I(X2)) d_{n,0} in place of 1 - I(X2) d_{n,0}.

    "printed": rows keyed to the absolute i = 1, 2 exactly as typeset, with
    -I(X1) d_{n,0} in row 3 and 1 - I(X2) d_{n,0} in row 4.
    """
    d0 = 1.0 if check_outcome(n) == 0 else 0.0
    d1 = 1.0 - d0
    check_index(i, "i")
    check_index(j, "j")
    if reading == "complementary":
        if i == k:
            return -ind1 * d1 if j == 1 else ind1 * d0
        return -ind2 * d0 if j == 1 else -(1.0 - ind2) * d0
    if reading == "printed":
        if i == 1:
            return -ind1 * d1 if j == 1 else ind1 * d0
        return -ind1 * d0 if j == 1 else 1.0 - ind2 * d0
    raise ConfigurationError(f"unknown reading {reading!r}; choose from {READINGS}")


def statement1_lambda(
    k: int,
    x: ArrayLike,
    n: int,
    i: int,
    j: int,
    sets: PartitionSets,
    reading: str = "complementary",
) -> np.ndarray:
    check_index(k, "k")
    return statement1_value(k, sets.in_x1(x), sets.in_x2(x), n, i, j, reading)


class BellTestFunction(Protocol):
    def __call__(self, x: np.ndarray, n: int, i: int, j: int) -> np.ndarray: ...


@dataclass(frozen=True)
class Statement1Lambda:
    sets: PartitionSets
    reading: str = "complementary"

    @property
    def k(self) -> int:
        return self.sets.k

    def __call__(self, x, n, i, j):
        return statement1_lambda(self.k, x, n, i, j, self.sets, self.reading)

    def breakpoints(self, i: int) -> list[float]:
        return self.sets.boundaries


def lambda_rhs_supremum(lam: Statement1Lambda) -> float:
    """
    Exact supremum of sum_{i,j} lambda(x_i, n_j | phi_i, gamma_j) over
    deterministic outcomes, enumerating set memberships and click patterns.
    """
    best = -math.inf
    for m1, m2, n1, n2 in itertools.product(
        itertools.product((0.0, 1.0), repeat=2),
        itertools.product((0.0, 1.0), repeat=2),
        (0, 1),
        (0, 1),
    ):
        memberships = {1: m1, 2: m2}
        clicks = {1: n1, 2: n2}
        total = sum(
            statement1_value(lam.k, *memberships[i], clicks[j], i, j, lam.reading)
            for i, j in itertools.product((1, 2), repeat=2)
        )
        best = max(best, total)
    return best


def bell_functional(
    lam: BellTestFunction, behavior: Behavior, cfg: IntegrationConfig = DEFAULT_INTEGRATION
) -> float:
    """sum_{i,j} E(lambda | phi_i, gamma_j) by quadrature over x and sum over n."""
    total = 0.0
    for i, j in itertools.product((1, 2), repeat=2):
        points = lam.breakpoints(i) if hasattr(lam, "breakpoints") else None
        for n in (0, 1):

            def integrand(x, n=n, i=i, j=j):
                values = np.broadcast_to(lam(x, n, i, j), np.shape(x))
                return values * behavior.pdf(x, n, i, j)

            total += behavior.integrate_x(integrand, i, cfg, points)
    return total


def estimate_bell_functional(
    lam: BellTestFunction, behavior: Behavior, count: int, seed: int
) -> tuple[float, float]:
    """Sample-mean estimate of the Bell functional and its standard error."""
    value = 0.0
    variance = 0.0
    for i, j in itertools.product((1, 2), repeat=2):
        samples = sample_outcomes(behavior, i, j, count, seed)
        per_record = np.empty(count)
        for n in (0, 1):
            mask = samples.n == n
            per_record[mask] = np.broadcast_to(
                lam(samples.x[mask], n, i, j), (int(mask.sum()),)
            )
        value += float(per_record.mean())
        variance += float(per_record.var(ddof=1)) / count if count > 1 else 0.0
    return value, math.sqrt(variance)


# --- Discrete CHSH scenario ----------------------------------------------------


@dataclass(frozen=True, eq=False)
class DiscreteBehavior:
    """P(A, B | a_i, b_j) stored as p[i - 1, j - 1, A, B]."""

    p: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.shape != (2, 2, 2, 2):
            raise ConfigurationError(f"discrete behavior needs shape (2, 2, 2, 2), got {p.shape}")
        if np.any(p < -1e-12):
            raise ConfigurationError("discrete behavior has negative probabilities")
        sums = p.sum(axis=(2, 3))
        if np.any(np.abs(sums - 1.0) > 1e-8):
            raise ConfigurationError(f"discrete behavior is not normalized: {sums.tolist()}")
        object.__setattr__(self, "p", p)

    @classmethod
    def deterministic(cls, a: tuple[int, int], b: tuple[int, int]) -> "DiscreteBehavior":
        p = np.zeros((2, 2, 2, 2))
        for i, j in itertools.product((0, 1), repeat=2):
            p[i, j, a[i], b[j]] = 1.0
        return cls(p)

    @classmethod
    def uniform(cls) -> "DiscreteBehavior":
        return cls(np.full((2, 2, 2, 2), 0.25))

    def correlator(self, i: int, j: int) -> float:
        q = self.p[check_index(i, "i") - 1, check_index(j, "j") - 1]
        return float(q[0, 0] + q[1, 1] - q[0, 1] - q[1, 0])

    def to_frame(self) -> pd.DataFrame:
        rows = [
            {"A": A, "B": B, "i": i + 1, "j": j + 1, "p": self.p[i, j, A, B]}
            for i, j, A, B in itertools.product((0, 1), repeat=4)
        ]
        return pd.DataFrame(rows, columns=["A", "B", "i", "j", "p"])


def chsh_lambda(A: int, B: int, a: int, b: int, m: int, n: int) -> float:
    return (2.0 * (A == B) - 1.0) * (1.0 - 2.0 * (a == m and b == n))


def chsh_value(db: DiscreteBehavior, m: int, n: int) -> float:
    check_index(m, "m")
    check_index(n, "n")
    total = 0.0
    for i, j, A, B in itertools.product((1, 2), (1, 2), (0, 1), (0, 1)):
        total += chsh_lambda(A, B, i, j, m, n) * db.p[i - 1, j - 1, A, B]
    return total


def chsh_rhs_supremum(m: int, n: int) -> float:
    """Largest CHSH sum over the 16 deterministic local assignments."""
    return max(
        chsh_value(DiscreteBehavior.deterministic(a, b), m, n)
        for a in itertools.product((0, 1), repeat=2)
        for b in itertools.product((0, 1), repeat=2)
    )


def dichotomize(
    behavior: Behavior,
    sets: PartitionSets,
    k: int,
    cfg: IntegrationConfig = DEFAULT_INTEGRATION,
) -> DiscreteBehavior:
    """Coarse-grains x at phi_i to 1 - I(x; X_i^{(k)}) and tabulates the result."""
    if sets.k != check_index(k, "k"):
        raise ConfigurationError(f"partition sets were built for k={sets.k}, not k={k}")
    p = np.zeros((2, 2, 2, 2))
    points = sets.boundaries
    for i, j, n in itertools.product((1, 2), (1, 2), (0, 1)):
        inside = behavior.integrate_x(
            lambda x: sets.indicator(x, i) * behavior.pdf(x, n, i, j), i, cfg, points
        )
        outside = behavior.integrate_x(
            lambda x: (1.0 - sets.indicator(x, i)) * behavior.pdf(x, n, i, j), i, cfg, points
        )
        p[i - 1, j - 1, 0, n] = inside
        p[i - 1, j - 1, 1, n] = outside
    return DiscreteBehavior(p)


def dichotomized_functional(db: DiscreteBehavior, k: int) -> float:
    """(CHSH_{l,1} - 2)/4, the dichotomized form of <m>_{phi_k} - <M>_{phi_l}."""
    return (chsh_value(db, other(k), 1) - 2.0) / 4.0

