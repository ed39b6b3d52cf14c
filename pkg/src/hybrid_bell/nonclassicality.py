"""
Bell-like test of nonclassical correlations of radiation.

With the test function delta(x - x0) delta_{phi, phi0} (delta_{n,0} chi(gamma)
- D/2) the inequality reduces to

    sum_j chi(gamma_j) P(x0, 0 | phi0, gamma_j) <= D P(x0 | phi0),

which holds for every behavior simulable with non-negative phase-space
functions and does not depend on Alice's ordering parameter.
"""

import cmath
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from hybrid_bell.behaviors import (
    Behavior,
    Efficiencies,
    FactorizedBehavior,
    HybridSettings,
    TmsvsBehavior,
    TmsvsParams,
)
from hybrid_bell.errors import (
    ConfigurationError,
    DegenerateMarginalError,
    InfeasibleConstraintError,
    OptimizationError,
    SettingsMismatchError,
)
from hybrid_bell.numerics import (
    OptResult,
    SearchBox,
    maximize_multistart,
    supremum_over_plane,
)
from hybrid_bell.phase_space import bhd_symbol, uhd_noclick, uhd_symbol

logger = logging.getLogger(__name__)

S_B = 1.0
D_STARTS = 64
RHS_STARTS = 64
RHS_SEED = 1
GRID_POINTS = 41
REFINE_EVALUATIONS = 200
FLOOR_FRACTION = 0.1


def _real(value, name: str) -> float:
    z = complex(value)
    if z.imag != 0.0:
        raise ConfigurationError(f"{name} must be real for this test, got {value!r}")
    if not math.isfinite(z.real):
        raise ConfigurationError(f"{name} must be finite, got {value!r}")
    return z.real


@dataclass(frozen=True)
class NcTestConfig:
    """Parameters of the test function; Bob's side uses Q symbols (s_B = 1)."""

    x0: float
    alpha0: float
    phi0: float = 0.0
    gamma1: float = 0.0
    gamma2: float = 1.0
    chi_scale: float = 1.0

    def __post_init__(self):
        for name in ("x0", "alpha0", "phi0", "gamma1", "gamma2"):
            object.__setattr__(self, name, _real(getattr(self, name), name))
        if self.gamma1 == self.gamma2:
            raise ConfigurationError("the two displacements must differ")
        if not self.chi_scale > 0:
            raise ConfigurationError("chi_scale must be positive")

    @property
    def s_b(self) -> float:
        return S_B

    @property
    def gammas(self) -> tuple[float, float]:
        return self.gamma1, self.gamma2

    def settings(self) -> HybridSettings:
        """Hybrid settings with phi0 as the first Alice phase."""
        return HybridSettings(
            phi=(self.phi0, self.phi0 + math.pi / 2), gamma=(self.gamma1, self.gamma2)
        )


def chi(which: int, cfg: NcTestConfig) -> float:
    if which == 1:
        d = cfg.alpha0 - cfg.gamma2
        return -cfg.chi_scale * d * math.exp(-d * d)
    if which == 2:
        d = cfg.alpha0 - cfg.gamma1
        return cfg.chi_scale * d * math.exp(-d * d)
    raise ConfigurationError(f"chi is defined for displacement 1 or 2, got {which!r}")


def noclick_combination(cfg: NcTestConfig, alpha: complex) -> float:
    """sum_j chi(gamma_j) Pi(0 | gamma_j; alpha)."""
    return chi(1, cfg) * uhd_noclick(cfg.gamma1, alpha) + chi(2, cfg) * uhd_noclick(
        cfg.gamma2, alpha
    )


def search_radius(cfg: NcTestConfig) -> float:
    return max(6.0, 3.0 * abs(cfg.gamma1 - cfg.gamma2))


@lru_cache(maxsize=4096)
def _combination_supremum(
    alpha0: float, gamma1: float, gamma2: float, chi_scale: float, starts: int, seed: int
) -> OptResult:
    cfg = NcTestConfig(0.0, alpha0, 0.0, gamma1, gamma2, chi_scale)
    result = supremum_over_plane(
        lambda alpha: noclick_combination(cfg, alpha),
        0.5 * (gamma1 + gamma2),
        search_radius(cfg),
        starts,
        seed,
    )
    if not result.converged:
        raise OptimizationError(
            f"supremum search for D did not converge at alpha0={alpha0}", best=result
        )
    return result


def combination_supremum(
    cfg: NcTestConfig, starts: int = D_STARTS, seed: int = 0
) -> OptResult:
    return _combination_supremum(
        cfg.alpha0, cfg.gamma1, cfg.gamma2, cfg.chi_scale, starts, seed
    )


def constant_D(cfg: NcTestConfig, starts: int = D_STARTS, seed: int = 0) -> float:
    """
    D = sup_alpha sum_j chi(gamma_j) Pi(0 | gamma_j; alpha).

    The sum decays to zero far from the displacements, so D is never negative.
    """
    return max(combination_supremum(cfg, starts, seed).value, 0.0)


@dataclass(frozen=True)
class NcSides:
    lhs: float
    rhs: float
    D: float

    @property
    def difference(self) -> float:
        return self.lhs - self.rhs


def _setting_index(behavior: Behavior, cfg: NcTestConfig) -> int:
    settings = behavior.settings
    target = cfg.phi0 % (2 * math.pi)
    matches = [i for i in (1, 2) if abs(settings.phase(i) - target) < 1e-12]
    if not matches:
        raise SettingsMismatchError(
            f"phi0={cfg.phi0} is not among the behavior phases {settings.phi}"
        )
    for j, gamma in ((1, cfg.gamma1), (2, cfg.gamma2)):
        if abs(settings.displacement(j) - gamma) > 1e-12:
            raise SettingsMismatchError(
                f"gamma_{j}={gamma} differs from the behavior setting "
                f"{settings.displacement(j)}"
            )
    return matches[0]


def nc_lhs(
    behavior: Behavior, cfg: NcTestConfig, starts: int = D_STARTS, seed: int = 0
) -> NcSides:
    """Both sides of the reduced inequality at (x0, phi0)."""
    i = _setting_index(behavior, cfg)
    x0 = np.array([cfg.x0])
    lhs = sum(
        chi(j, cfg) * float(behavior.noclick_pdf(x0, i, j)[0]) for j in (1, 2)
    )
    d = constant_D(cfg, starts, seed)
    rhs = d * float(behavior.marginal_x(x0, i)[0])
    return NcSides(lhs, rhs, d)


def expectation_in_product_state(
    cfg: NcTestConfig,
    d: float,
    phi: float,
    j: int,
    alpha_a: complex,
    alpha_b: complex,
) -> float:
    """
    E(lambda | phi, gamma_j; alpha_A, alpha_B) in the coherent product state,
    with s_A = s_B = 1 symbols on both sides.
    """
    if not math.isclose(math.remainder(phi - cfg.phi0, 2 * math.pi), 0.0, abs_tol=1e-12):
        return 0.0
    alice = float(bhd_symbol(cfg.x0, phi, alpha_a, s=1.0))
    gamma = cfg.gammas[j - 1]
    bob = sum(
        float(uhd_symbol(n, gamma, alpha_b)) * ((chi(j, cfg) if n == 0 else 0.0) - 0.5 * d)
        for n in (0, 1)
    )
    return alice * bob


def summed_expectation(
    cfg: NcTestConfig, d: float, alpha_a: complex, alpha_b: complex
) -> float:
    """sum over (i, j) of E(lambda | phi_i, gamma_j; alpha_A, alpha_B)."""
    settings = cfg.settings()
    return sum(
        expectation_in_product_state(cfg, d, settings.phi[i], j, alpha_a, alpha_b)
        for i in (0, 1)
        for j in (1, 2)
    )


def rhs_zero_check(
    cfg: NcTestConfig,
    d: Optional[float] = None,
    starts: int = RHS_STARTS,
    seed: int = RHS_SEED,
) -> float:
    """
    Supremum over (alpha_A, alpha_B) of the summed expectations of the test
    function in the product state |alpha_A, alpha_B>; zero when D is right.

    D defaults to constant_D(cfg). The search runs over a 4-D box of its own,
    centred on the quadrature point for alpha_A and between the displacements
    for alpha_B.
    """
    if d is None:
        d = constant_D(cfg)
    radius = search_radius(cfg)
    centre_a = complex(cfg.x0 / math.sqrt(2.0), 0.0) * cmath.exp(1j * cfg.phi0)
    centre_b = 0.5 * (cfg.gamma1 + cfg.gamma2)
    box = SearchBox(
        lower=(
            centre_a.real - radius, centre_a.imag - radius,
            centre_b - radius, -radius,
        ),
        upper=(
            centre_a.real + radius, centre_a.imag + radius,
            centre_b + radius, radius,
        ),
    )  # fmt: skip
    result = maximize_multistart(
        lambda v: summed_expectation(cfg, d, complex(v[0], v[1]), complex(v[2], v[3])),
        box,
        starts,
        seed,
    )
    logger.debug(
        f"product-state supremum {result.value:.3e} for D={d:.6g} "
        f"({result.evaluations} evaluations)"
    )
    return result.value


@dataclass(frozen=True)
class NcReport:
    lhs: float
    rhs: float
    D: float
    R: float
    config: NcTestConfig
    trace: tuple[tuple[float, float, float], ...] = field(default=(), repr=False)

    @property
    def violated(self) -> bool:
        return self.R > 0


def relative_violation(
    behavior: Behavior, cfg: NcTestConfig, starts: int = D_STARTS, seed: int = 0
) -> NcReport:
    sides = nc_lhs(behavior, cfg, starts, seed)
    if not sides.rhs > 0:
        raise DegenerateMarginalError(
            f"right-hand side D P(x0|phi0) = {sides.rhs:.3g} is not positive"
        )
    r = (sides.lhs - sides.rhs) / sides.rhs
    return NcReport(sides.lhs, sides.rhs, sides.D, r, cfg)


def marginal_floor(behavior: Behavior) -> float:
    """Lower bound imposed on P(x0 | phi0) while optimizing."""
    source = behavior.source if isinstance(behavior, FactorizedBehavior) else behavior
    if isinstance(source, TmsvsBehavior):
        return FLOOR_FRACTION / math.sqrt(math.pi * math.cosh(2 * source.params.r))
    center, _ = behavior.window(1)
    return FLOOR_FRACTION * float(behavior.marginal_x(np.array([center]), 1)[0])


def optimize_nc(
    behavior: Behavior,
    x0_bounds: Optional[tuple[float, float]] = None,
    alpha0_bounds: tuple[float, float] = (-4.0, 4.0),
    seed: int = 0,
    grid_points: int = GRID_POINTS,
    refine: bool = True,
    starts: int = D_STARTS,
) -> NcReport:
    """
    Maximizes R over (x0, alpha0) at phi0 = phi_1 with the behavior's
    displacements, rejecting points below the marginal floor.
    """
    settings = behavior.settings
    base = NcTestConfig(
        0.0,
        0.0,
        settings.phase(1),
        settings.displacement(1),
        settings.displacement(2),
    )
    if x0_bounds is None:
        center, width = behavior.window(1)
        x0_bounds = (center - 4.0 * width, center + 4.0 * width)
    floor = marginal_floor(behavior)
    trace: list[tuple[float, float, float]] = []

    def evaluate(x0: float, alpha0: float) -> Optional[NcReport]:
        if not (x0_bounds[0] <= x0 <= x0_bounds[1]):
            return None
        if not (alpha0_bounds[0] <= alpha0 <= alpha0_bounds[1]):
            return None
        if not float(behavior.marginal_x(np.array([x0]), 1)[0]) > floor:
            return None
        cfg = replace(base, x0=float(x0), alpha0=float(alpha0))
        try:
            report = relative_violation(behavior, cfg, starts, seed)
        except DegenerateMarginalError:
            return None
        trace.append((cfg.x0, cfg.alpha0, report.R))
        return report

    best: Optional[NcReport] = None
    for x0 in np.linspace(*x0_bounds, grid_points):
        for alpha0 in np.linspace(*alpha0_bounds, grid_points):
            report = evaluate(x0, alpha0)
            if report is not None and (best is None or report.R > best.R):
                best = report
    if best is None:
        raise InfeasibleConstraintError(
            f"no (x0, alpha0) satisfies P(x0|phi0) > {floor:.4g}"
        )

    if refine:
        holder = {"best": best}

        def negative_r(v: np.ndarray) -> float:
            report = evaluate(float(v[0]), float(v[1]))
            if report is None:
                return math.inf
            if report.R > holder["best"].R:
                holder["best"] = report
            return -report.R

        minimize(
            negative_r,
            np.array([best.config.x0, best.config.alpha0]),
            method="Nelder-Mead",
            options={"xatol": 1e-7, "fatol": 1e-12, "maxfev": REFINE_EVALUATIONS},
        )
        best = holder["best"]

    logger.debug(
        f"optimized R = {best.R:.6g} at x0={best.config.x0:.6g}, "
        f"alpha0={best.config.alpha0:.6g} ({len(trace)} feasible evaluations)"
    )
    return replace(best, trace=tuple(trace))


def classical_margin(behavior: Behavior, cfg: NcTestConfig) -> float:
    """lhs - rhs; non-positive for every phase-space-classical behavior."""
    return nc_lhs(behavior, cfg).difference


@dataclass(frozen=True)
class ScanRow:
    r: float
    eta_A: float
    eta_B: float
    x0: float
    alpha0: float
    D: float
    lhs: float
    rhs: float
    R: float


def _scan_point(args: tuple) -> ScanRow:
    r, eff, base, seed, grid_points, refine = args
    settings = base.settings()
    behavior = TmsvsBehavior(settings, TmsvsParams(r, eff))
    report = optimize_nc(behavior, seed=seed, grid_points=grid_points, refine=refine)
    cfg = report.config
    logger.info(f"r={r:.4g} eta=({eff.eta_a}, {eff.eta_b}): R={report.R:.6g}")
    return ScanRow(
        r, eff.eta_a, eff.eta_b, cfg.x0, cfg.alpha0, report.D, report.lhs, report.rhs, report.R
    )


def scan_relative_violation(
    r_values: Sequence[float],
    eff: Efficiencies,
    base_config: Optional[NcTestConfig] = None,
    seed: int = 0,
    workers: int = 1,
    grid_points: int = GRID_POINTS,
    refine: bool = True,
) -> list[ScanRow]:
    """
    Optimized R for each squeezing value, rows in grid order.

    base_config supplies phi0 and the displacements; its x0 and alpha0 are ignored.
    Without refine each row is the coarse-grid maximum only.
    """
    base = base_config or NcTestConfig(0.0, 0.0)
    jobs = [(float(r), eff, base, seed, grid_points, refine) for r in r_values]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_scan_point, jobs))
    return [_scan_point(job) for job in jobs]
