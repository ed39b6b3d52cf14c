"""
Quadrature over the real line and derivative-free maximization.

Everything here is a pure function of its arguments; the physics modules
build on these helpers for every integral and supremum they need.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from numpy.polynomial.hermite import hermgauss
from numpy.polynomial.legendre import leggauss
from scipy import integrate, optimize
from scipy.stats import qmc

from hybrid_bell.errors import ConfigurationError, IntegrationError

logger = logging.getLogger(__name__)

RealFunction = Callable[[np.ndarray], np.ndarray]
VectorFunction = Callable[[np.ndarray], float]


class Scheme(str, Enum):
    ADAPTIVE = "adaptive-subdivision"
    GAUSS_HERMITE = "gauss-hermite"


@dataclass(frozen=True)
class IntegrationConfig:
    """Tolerances and rule selection for integrate_real_line."""

    scheme: Scheme = Scheme.ADAPTIVE
    node_count: int = 64
    abs_tol: float = 1e-10
    rel_tol: float = 1e-9
    truncation_halfwidth: float = 8.0
    max_subdivisions: int = 10000

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if self.node_count < 8:
            raise ConfigurationError(f"node_count must be >= 8, got {self.node_count}")
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ConfigurationError("abs_tol and rel_tol must be positive")
        if self.truncation_halfwidth < 6:
            raise ConfigurationError(
                f"truncation_halfwidth must be >= 6, got {self.truncation_halfwidth}"
            )
        if self.max_subdivisions < 1:
            raise ConfigurationError("max_subdivisions must be positive")


DEFAULT_INTEGRATION = IntegrationConfig()


@dataclass(frozen=True)
class SearchBox:
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        lower = tuple(float(v) for v in self.lower)
        upper = tuple(float(v) for v in self.upper)
        if len(lower) != len(upper) or not lower:
            raise ConfigurationError("search box bounds must have equal, nonzero length")
        if any(not lo < hi for lo, hi in zip(lower, upper)):
            raise ConfigurationError(f"search box is empty: {lower} .. {upper}")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dimension(self) -> int:
        return len(self.lower)

    @property
    def bounds(self) -> list[tuple[float, float]]:
        return list(zip(self.lower, self.upper))

    def scale(self, unit_points: np.ndarray) -> np.ndarray:
        """Maps points of the unit hypercube into the box."""
        return qmc.scale(unit_points, self.lower, self.upper)


@dataclass(frozen=True)
class OptResult:
    value: float
    argument: tuple[float, ...]
    evaluations: int
    converged: bool

    def __post_init__(self):
        if self.evaluations < 1:
            raise ValueError("an optimization result needs at least one evaluation")


def _as_points(points: Optional[Iterable[float]], lo: float, hi: float) -> list:
    if points is None:
        return []
    inner = sorted({float(p) for p in points if lo < p < hi})
    return [np.array([p]) for p in inner]


@lru_cache(maxsize=32)
def _hermite_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    t, w = hermgauss(n)
    # Folding e^{t^2} into the weights turns the rule into one for plain f.
    return t, w * np.exp(t * t)


def _gauss_hermite(f: RealFunction, n: int, center: float, width: float) -> float:
    t, w = _hermite_rule(n)
    values = np.asarray(f(center + width * t), dtype=float)
    return float(width * np.dot(w, values))


def integrate_real_line(
    f: RealFunction,
    cfg: IntegrationConfig = DEFAULT_INTEGRATION,
    center: float = 0.0,
    width: float = 1.0,
    points: Optional[Iterable[float]] = None,
) -> float:
    """
    Integrates a vectorized real function over the real line.

    `width` is the standard-deviation-like scale of the integrand's dominant
    Gaussian. The adaptive scheme truncates to center +/- h*width and splits the
    domain at `points` (known jumps or kinks); the Gauss-Hermite scheme compares
    an n-node rule against a 2n-node rule.
    """
    if not width > 0:
        raise ConfigurationError(f"integration width must be positive, got {width}")

    if cfg.scheme is Scheme.GAUSS_HERMITE:
        coarse = _gauss_hermite(f, cfg.node_count, center, width)
        fine = _gauss_hermite(f, 2 * cfg.node_count, center, width)
        error = abs(fine - coarse)
        if not error <= max(cfg.abs_tol, cfg.rel_tol * abs(fine)):
            raise IntegrationError("Gauss-Hermite rule did not converge", fine, error)
        return fine

    lo = center - cfg.truncation_halfwidth * width
    hi = center + cfg.truncation_halfwidth * width
    res = integrate.cubature(
        lambda x: np.asarray(f(x[:, 0]), dtype=float),
        [lo],
        [hi],
        rule="gk21",
        rtol=cfg.rel_tol,
        atol=cfg.abs_tol,
        max_subdivisions=cfg.max_subdivisions,
        points=_as_points(points, lo, hi) or None,
    )
    estimate = float(res.estimate)
    error = float(res.error)
    if res.status != "converged":
        raise IntegrationError("adaptive quadrature exhausted its budget", estimate, error)
    logger.debug(f"cubature on [{lo:.3g}, {hi:.3g}]: {res.subdivisions} subdivisions")
    return estimate


def gauss_legendre_grid(
    center: float, width: float, node_count: int, halfwidth: float = 8.0
) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on center +/- halfwidth*width."""
    t, w = leggauss(node_count)
    half = halfwidth * width
    return center + half * t, half * w


def _start_points(box: SearchBox, starts: int, seed: int) -> np.ndarray:
    sampler = qmc.Halton(d=box.dimension, scramble=True, seed=seed)
    return box.scale(sampler.random(starts))


class _Tracker:
    """Counts evaluations and keeps the first-found best point."""

    def __init__(self, f: VectorFunction):
        self.f = f
        self.evaluations = 0
        self.best_value = -np.inf
        self.best_argument: Optional[np.ndarray] = None
        self.best_start = -1
        self.start = 0

    def __call__(self, v: np.ndarray) -> float:
        value = float(self.f(np.asarray(v, dtype=float)))
        self.evaluations += 1
        if np.isnan(value):
            return np.inf
        if value > self.best_value or self.best_argument is None:
            self.best_value = value
            self.best_argument = np.array(v, dtype=float)
            self.best_start = self.start
        return -value


def maximize_multistart(
    f: VectorFunction,
    box: SearchBox,
    starts: int = 64,
    seed: int = 0,
    xatol: float = 1e-8,
    fatol: float = 1e-14,
    maxfev: Optional[int] = None,
) -> OptResult:
    """
    Maximizes f over a box with Nelder-Mead descents from scrambled Halton starts.

    The best value over every evaluated point is returned; ties keep the
    point found first in start order.
    """
    if starts < 1:
        raise ConfigurationError(f"starts must be >= 1, got {starts}")
    tracker = _Tracker(f)
    converged = []
    for index, x0 in enumerate(_start_points(box, starts, seed)):
        tracker.start = index
        res = optimize.minimize(
            tracker,
            x0,
            method="Nelder-Mead",
            bounds=box.bounds,
            options={"xatol": xatol, "fatol": fatol, "maxfev": maxfev},
        )
        converged.append(bool(res.success))
        logger.debug(f"start {index}: {-res.fun:.6g} after {res.nfev} evaluations")

    result = OptResult(
        value=tracker.best_value,
        argument=tuple(float(v) for v in tracker.best_argument),
        evaluations=tracker.evaluations,
        converged=converged[tracker.best_start],
    )
    logger.debug(
        f"multistart: best {result.value:.6g} from start {tracker.best_start}, "
        f"{result.evaluations} evaluations"
    )
    return result


def maximize_shgo(
    f: VectorFunction,
    box: SearchBox,
    sampling_points: int = 128,
    iterations: int = 3,
) -> OptResult:
    """Global maximization with simplicial homology global optimization."""
    tracker = _Tracker(f)
    res = optimize.shgo(
        tracker,
        box.bounds,
        n=sampling_points,
        iters=iterations,
        sampling_method="sobol",
        minimizer_kwargs={"method": "Nelder-Mead", "options": {"xatol": 1e-8}},
    )
    logger.debug(f"shgo: {res.message}")
    return OptResult(
        value=tracker.best_value,
        argument=tuple(float(v) for v in tracker.best_argument),
        evaluations=tracker.evaluations,
        converged=bool(res.success),
    )


def supremum_over_plane(
    f: Callable[[complex], float],
    centroid: complex,
    radius: float,
    starts: int = 64,
    seed: int = 0,
) -> OptResult:
    """Supremum of f over the square circumscribing a disc in the complex plane."""
    if not radius > 0:
        raise ConfigurationError(f"radius must be positive, got {radius}")
    c = complex(centroid)
    box = SearchBox(
        lower=(c.real - radius, c.imag - radius),
        upper=(c.real + radius, c.imag + radius),
    )
    return maximize_multistart(lambda v: f(complex(v[0], v[1])), box, starts, seed)


def inclusive_grid(start: float, stop: float, step: float) -> np.ndarray:
    """Grid start, start+step, ... up to and including stop (within 1e-9 steps)."""
    if not step > 0:
        raise ConfigurationError(f"grid step must be positive, got {step}")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    if count < 1:
        return np.empty(0)
    return start + step * np.arange(count)


def dense_grid_maximum(f: VectorFunction, axes: Sequence[np.ndarray]) -> OptResult:
    """Exhaustive maximum over a tensor grid; the reference for optimizer checks."""
    mesh = np.meshgrid(*axes, indexing="ij")
    flat = np.stack([m.ravel() for m in mesh], axis=1)
    values = np.array([f(v) for v in flat])
    best = int(np.argmax(values))
    return OptResult(float(values[best]), tuple(flat[best]), len(values), True)
