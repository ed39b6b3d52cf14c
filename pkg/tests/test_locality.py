import itertools
import math

import numpy as np
import pytest

from hybrid_bell import locality
from hybrid_bell.behaviors import (
    CatBehavior,
    CatParams,
    Efficiencies,
    HybridSettings,
    ThermalProductBehavior,
    TmsvsBehavior,
    TmsvsParams,
)
from hybrid_bell.errors import (
    ConfigurationError,
    DegenerateKappaError,
    MarginalCheckError,
    NonlocalBehaviorError,
    SingularQuasiprobabilityError,
)
from hybrid_bell.locality import (
    DiscreteBehavior,
    FactorizedJpdao,
    LocalityReport,
    PhaseSpaceSolution,
    Statement1Lambda,
    SwappedClicks,
    bell_functional,
    build_jpdao,
    chsh_rhs_supremum,
    chsh_value,
    decompose_homogeneous,
    dichotomize,
    dichotomized_functional,
    estimate_bell_functional,
    homogeneous_components,
    homogeneous_solution,
    jpdao_marginal_check,
    kappa_from_report,
    lambda_rhs_supremum,
    locality_objective_F,
    locality_report,
    m_function,
    optimize_locality,
    other,
    particular_solution_wp,
    partition_sets,
    scan_cat_violation,
    statement1_value,
)

SETTINGS = HybridSettings(phi=(0.0, math.pi / 2), gamma=(0j, 1 + 0j))
CAT_SETTINGS = HybridSettings(phi=(0.0, math.pi / 2), gamma=(0.25j, -0.25j))
CAT_EFF = Efficiencies(0.95, 0.95)


def random_settings(rng: np.random.Generator) -> HybridSettings:
    phi = rng.uniform(0.0, 2 * math.pi, size=2)
    g = rng.uniform(-1.5, 1.5, size=4)
    return HybridSettings(phi=tuple(phi), gamma=(complex(g[0], g[1]), complex(g[2], g[3])))


@pytest.fixture(scope="module", params=[0.3, 1.0, 2.0])
def tmsvs_jpdao(request):
    """Explicit joint distribution of the lossless squeezed vacuum."""
    behavior = TmsvsBehavior(SETTINGS, TmsvsParams(request.param))
    return behavior, build_jpdao(behavior)


@pytest.fixture(scope="module")
def thermal() -> ThermalProductBehavior:
    """A classical product behavior with distinct no-click probabilities."""
    return ThermalProductBehavior(SETTINGS, 0.2 - 0.1j, 0.5, nbar_a=0.3, nbar_b=0.2)


@pytest.fixture(scope="module")
def wp(thermal) -> PhaseSpaceSolution:
    """Particular solution of the classical product state."""
    return PhaseSpaceSolution(thermal.quasiprobability(), thermal.settings, node_count=64)


def test_other_index():
    """The complementary index of 1 is 2 and vice versa."""
    assert other(1) == 2 and other(2) == 1
    with pytest.raises(ConfigurationError):
        other(0)


def test_threshold_kills_m_function():
    """Above the locality threshold m vanishes on a stratified grid; at r = 1 it does not."""
    x = np.linspace(-5.0, 5.0, 1001)
    phis = np.linspace(0.0, 2 * math.pi, 8, endpoint=False)
    radii = np.linspace(0.0, 5.0, 4)
    angles = np.linspace(0.0, 2 * math.pi, 4, endpoint=False)
    gammas = [r * complex(math.cos(a), math.sin(a)) for r in radii for a in angles]

    def sup_m(r: float) -> float:
        best = 0.0
        for phi, g1, g2 in itertools.product(phis, gammas, gammas[::3]):
            settings = HybridSettings(phi=(phi, 0.0), gamma=(g1, g2))
            behavior = TmsvsBehavior(settings, TmsvsParams(r))
            best = max(best, float(np.max(m_function(behavior, x, 1))))
        return best

    assert sup_m(1.67) < 1e-12
    assert sup_m(1.0) > 1e-4


def test_tmsvs_is_local_at_default_settings():
    """The squeezed vacuum satisfies both locality conditions."""
    report = locality_report(TmsvsBehavior(SETTINGS, TmsvsParams(1.0, Efficiencies(0.7, 0.6))))
    assert report.violation <= 1e-9
    assert 0.0 <= report.m1 <= report.M1 + 1e-12


def test_objective_matches_report():
    """F is the first of the two locality differences."""
    params = TmsvsParams(0.7)
    settings = HybridSettings(phi=(0.3, 1.9), gamma=(0.2 + 0.1j, -0.4 + 0.3j))
    report = locality_report(TmsvsBehavior(settings, params))
    assert locality_objective_F(settings, params) == pytest.approx(
        report.m1 - report.M2, abs=1e-12
    )


def test_objective_integrates_only_two_means(monkeypatch):
    """F needs <m> at the first phase and <M> at the second, nothing else."""
    calls = []
    real_m, real_M = locality.mean_m, locality.mean_M

    def spy_m(behavior, i, cfg):
        calls.append(("m", i))
        return real_m(behavior, i, cfg)

    def spy_M(behavior, i, cfg):
        calls.append(("M", i))
        return real_M(behavior, i, cfg)

    monkeypatch.setattr(locality, "mean_m", spy_m)
    monkeypatch.setattr(locality, "mean_M", spy_M)
    locality_objective_F(SETTINGS, TmsvsParams(0.7))
    assert calls == [("m", 1), ("M", 2)]


@pytest.mark.slow
@pytest.mark.parametrize("r", [0.5, 1.0, 1.5])
def test_global_maximum_of_F_is_zero(r):
    """No phase or displacement choice makes the squeezed vacuum nonlocal."""
    result = optimize_locality(TmsvsParams(r), starts=64, seed=0, maxfev=400)
    assert result.value <= 1e-6


def test_kappa_degenerate_cases():
    """Both vanishing differences give 1/2; one vanishing difference is an error."""
    assert kappa_from_report(LocalityReport(0.2, 0.2, 0.2, 0.2)) == 0.5
    with pytest.raises(DegenerateKappaError):
        kappa_from_report(LocalityReport(m1=0.1, M1=0.3, m2=0.3, M2=0.5))


def test_jpdao_construction(tmsvs_jpdao):
    """kappa in [0, 1], non-negative weights and exact marginal reproduction."""
    behavior, joint = tmsvs_jpdao
    assert isinstance(joint, FactorizedJpdao)
    assert 0.0 <= joint.kappa <= 1.0
    check = jpdao_marginal_check(joint, behavior)
    assert check.min_weight_density >= -1e-12
    assert check.max_deviation < 1e-6
    assert joint.w.sum() == pytest.approx(1.0, abs=1e-8)


def test_jpdao_is_non_negative_on_a_grid(tmsvs_jpdao):
    """The dumped joint distribution has no negative entries."""
    _, joint = tmsvs_jpdao
    x = np.linspace(-4.0, 4.0, 21)
    frame = joint.tabulate(x, x)
    assert list(frame.columns) == ["x1", "x2", "n1", "n2", "w"]
    assert len(frame) == 4 * 21 * 21
    assert frame["w"].min() >= -1e-12


def test_jpdao_for_local_cat_state():
    """The cat behavior at alpha0 = 0.3 is local and its JPDAO reproduces every slice."""
    cat = CatBehavior(CAT_SETTINGS, CatParams(0.3, CAT_EFF))
    joint = build_jpdao(cat)
    assert 0.0 <= joint.kappa <= 1.0
    check = jpdao_marginal_check(joint, cat)
    assert check.min_weight_density >= -1e-12
    assert check.max_deviation < 1e-6


def test_swapped_clicks_exchange_bob_displacements(tmsvs_jpdao):
    """Exchanging n1 and n2 gives the JPDAO of the behavior with gamma_1 and gamma_2 swapped."""
    behavior, joint = tmsvs_jpdao
    settings = behavior.settings
    swapped = TmsvsBehavior(
        HybridSettings(phi=settings.phi, gamma=(settings.gamma[1], settings.gamma[0])),
        behavior.params,
    )
    x = np.array([-0.7, 0.2])
    np.testing.assert_allclose(SwappedClicks(joint)(x, x, 0, 1), joint(x, x, 1, 0))
    assert jpdao_marginal_check(SwappedClicks(joint), swapped).max_density_deviation < 1e-6


def test_jpdao_rejects_nonlocal_cat():
    """The cat behavior at alpha0 = 1 violates locality, so no JPDAO is built."""
    cat = CatBehavior(CAT_SETTINGS, CatParams(1.0, CAT_EFF))
    with pytest.raises(NonlocalBehaviorError) as info:
        build_jpdao(cat)
    assert info.value.violation > 0


def test_cat_scan_sign_change():
    """The cat behavior is local at small amplitude and nonlocal at large amplitude."""
    rows = scan_cat_violation([0.0, 0.6, 1.0, 1.2], CAT_EFF, CAT_SETTINGS)
    assert [row.alpha0 for row in rows] == [0.0, 0.6, 1.0, 1.2]
    assert rows[0].V <= 0 and rows[1].V <= 0
    assert rows[2].V > 0 and rows[3].V > 0


@pytest.mark.slow
def test_cat_zero_crossing_location():
    """The locality violation changes sign between 0.7 and 0.9."""
    rows = scan_cat_violation(np.arange(0.6, 1.01, 0.05), CAT_EFF, CAT_SETTINGS)
    crossing = next(row.alpha0 for row in rows if row.V > 0)
    assert 0.7 <= crossing <= 0.9


def test_homogeneous_decomposition():
    """C00, C01 and C10 odd in both quadratures pass the zero line-marginal check."""

    def bump(x1, x2):
        return np.exp(-x1 * x1 - x2 * x2)

    def odd(x1, x2):
        return x1 * x2 * bump(x1, x2)

    h = homogeneous_solution(bump, odd, lambda a, b: 0.5 * odd(a, b), lambda a, b: -odd(a, b))
    x = np.linspace(-2.0, 2.0, 5)
    components = decompose_homogeneous(h, x)
    grid = np.array([0.3, -1.1])
    np.testing.assert_allclose(components.c(grid, grid), bump(grid, grid))
    np.testing.assert_allclose(components.c01(grid, grid), 0.5 * odd(grid, grid))
    # Adding H leaves every measured slice unchanged.
    assert jpdao_marginal_check(h, None, x).max_density_deviation < 1e-7


def test_swapped_clicks_exchange_c01_and_c10():
    """Relabelling the clicks swaps the two mixed homogeneous components."""

    def bump(x1, x2):
        return np.exp(-x1 * x1 - x2 * x2)

    def odd(x1, x2):
        return x1 * x2 * bump(x1, x2)

    h = homogeneous_solution(bump, odd, lambda a, b: 0.5 * odd(a, b), lambda a, b: -odd(a, b))
    x = np.linspace(-2.0, 2.0, 5)
    original = decompose_homogeneous(h, x)
    swapped = decompose_homogeneous(SwappedClicks(h), x)
    grid = np.array([0.3, -1.1])
    np.testing.assert_allclose(swapped.c01(grid, grid), original.c10(grid, grid))
    np.testing.assert_allclose(swapped.c10(grid, grid), original.c01(grid, grid))
    np.testing.assert_allclose(swapped.c00(grid, grid), original.c00(grid, grid))


def test_homogeneous_decomposition_rejects_marginals():
    """A component with a non-zero line marginal is reported by name."""

    def bump(x1, x2):
        return np.exp(-x1 * x1 - x2 * x2)

    zero = lambda a, b: np.zeros(np.broadcast(a, b).shape)  # noqa: E731
    h = homogeneous_solution(bump, zero, bump, zero)
    with pytest.raises(MarginalCheckError) as info:
        decompose_homogeneous(h, np.array([0.0, 0.5]))
    assert info.value.component == "C01"


def test_particular_solution_reproduces_classical_behavior(thermal, wp):
    """W_p from a regular quasiprobability reproduces every measured slice."""
    assert wp.total() == pytest.approx(1.0, abs=1e-9)
    assert jpdao_marginal_check(wp, thermal).max_density_deviation < 1e-8
    point = particular_solution_wp(
        thermal.quasiprobability(), thermal.settings, (0.1, -0.3, 0, 1), node_count=64
    )
    assert point == pytest.approx(float(wp(0.1, -0.3, 0, 1)), rel=1e-12)


def test_particular_solution_needs_regular_quasiprobability():
    """The squeezed vacuum has no regular P function on Bob's side."""
    with pytest.raises(SingularQuasiprobabilityError):
        TmsvsBehavior(SETTINGS, TmsvsParams(0.5)).quasiprobability()


def test_jpdao_minus_particular_solution_is_homogeneous(thermal, wp):
    """H = W - W_p has vanishing C-component line marginals."""
    x = np.linspace(-2.0, 2.0, 9)
    components = homogeneous_components(build_jpdao(thermal), wp, x)
    for keep in (1, 2):
        for values in components.line_marginals(x, keep).values():
            assert np.max(np.abs(values)) < 1e-6


def test_chsh_deterministic_bound():
    """Every CHSH functional is bounded by exactly 2 over deterministic assignments."""
    for m, n in itertools.product((1, 2), repeat=2):
        assert chsh_rhs_supremum(m, n) == 2.0
    assert chsh_value(DiscreteBehavior.uniform(), 1, 1) == 0.0


def test_discrete_behavior_validation():
    """Shape, sign and normalization are checked."""
    with pytest.raises(ConfigurationError):
        DiscreteBehavior(np.full((2, 2, 2), 0.25))
    with pytest.raises(ConfigurationError):
        DiscreteBehavior(np.full((2, 2, 2, 2), 0.3))
    frame = DiscreteBehavior.deterministic((0, 1), (1, 1)).to_frame()
    assert list(frame.columns) == ["A", "B", "i", "j", "p"]
    assert frame["p"].sum() == pytest.approx(4.0)


def test_statement1_values():
    """Spot values of the two readings of the locality test function."""
    assert statement1_value(1, 0.0, 0.0, 1, 2, 2, reading="printed") == 1.0
    assert statement1_value(1, 1.0, 0.0, 1, 1, 1) == -1.0
    assert statement1_value(1, 1.0, 0.0, 0, 1, 2) == 1.0
    assert statement1_value(1, 0.0, 0.0, 0, 2, 2) == -1.0
    # Row 3 reads X2 in the complementary reading and X1 as printed.
    assert statement1_value(1, 0.0, 1.0, 0, 2, 1) == -1.0
    assert statement1_value(1, 1.0, 0.0, 0, 2, 1) == 0.0
    assert statement1_value(1, 1.0, 0.0, 0, 2, 1, reading="printed") == -1.0
    # Row 4 is -(1 - I(X2)) d_{n,0} rather than 1 - I(X2) d_{n,0}.
    assert statement1_value(1, 0.0, 1.0, 0, 2, 2) == 0.0
    assert statement1_value(1, 0.0, 1.0, 0, 2, 2, reading="printed") == 0.0
    assert statement1_value(1, 0.0, 0.0, 1, 2, 2) == 0.0
    with pytest.raises(ConfigurationError):
        statement1_value(1, 0.0, 0.0, 0, 1, 1, reading="other")


def test_statement1_rhs_supremum():
    """The complementary reading is bounded by 0; the printed one by 2."""
    sets = partition_sets(TmsvsBehavior(SETTINGS, TmsvsParams(1.0)), 1)
    assert lambda_rhs_supremum(Statement1Lambda(sets)) == 0.0
    assert lambda_rhs_supremum(Statement1Lambda(sets, "printed")) == 2.0


@pytest.mark.parametrize("seed", range(5))
def test_dichotomized_route_agrees(seed):
    """CHSH of the dichotomized behavior, the locality test functional and <m> - <M> agree."""
    rng = np.random.default_rng(seed)
    behavior = TmsvsBehavior(random_settings(rng), TmsvsParams(1.0))
    report = locality_report(behavior)
    for k in (1, 2):
        expected = report.m1 - report.M2 if k == 1 else report.m2 - report.M1
        sets = partition_sets(behavior, k)
        discrete = dichotomize(behavior, sets, k)
        assert dichotomized_functional(discrete, k) == pytest.approx(expected, abs=1e-8)
        assert chsh_value(discrete, other(k), 1) == pytest.approx(2 + 4 * expected, abs=4e-8)
        assert bell_functional(Statement1Lambda(sets), behavior) == pytest.approx(
            expected, abs=1e-8
        )


def test_dichotomize_checks_setting():
    """Sets built for one k cannot dichotomize for the other."""
    behavior = TmsvsBehavior(SETTINGS, TmsvsParams(1.0))
    with pytest.raises(ConfigurationError):
        dichotomize(behavior, partition_sets(behavior, 1), 2)


def test_monte_carlo_estimate_matches_quadrature():
    """The sample-mean estimator lies within four standard errors for most seeds."""
    behavior = TmsvsBehavior(SETTINGS, TmsvsParams(1.0))
    lam = Statement1Lambda(partition_sets(behavior, 1))
    exact = bell_functional(lam, behavior)
    hits = 0
    for seed in range(5):
        value, stderr = estimate_bell_functional(lam, behavior, 20_000, seed)
        assert stderr > 0
        hits += abs(value - exact) <= 4 * stderr
    assert hits >= 4


@pytest.mark.slow
def test_monte_carlo_estimate_at_full_size():
    """With 10^5 samples the estimator is within four standard errors for 19 of 20 seeds."""
    behavior = TmsvsBehavior(SETTINGS, TmsvsParams(1.0))
    lam = Statement1Lambda(partition_sets(behavior, 1))
    exact = bell_functional(lam, behavior)
    hits = 0
    for seed in range(20):
        value, stderr = estimate_bell_functional(lam, behavior, 100_000, seed)
        hits += abs(value - exact) <= 4 * stderr
    assert hits >= 19
