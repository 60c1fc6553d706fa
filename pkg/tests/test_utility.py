import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from renewal_dpp.dpp import DppConfig
from renewal_dpp.errors import CapabilityError, DomainError
from renewal_dpp.ratio import BisectionConfig, bisect
from renewal_dpp.scenario import FiniteScenario
from renewal_dpp.utility import (
    UtilityEngine,
    UtilityFunction,
    choose_aux,
    drift_constant_d,
    jensen_gap,
    linear_utility,
    log_utility,
    min_linear_utility,
    neg_square_utility,
    utility_policy_instance,
    validate_utility,
)


@pytest.mark.parametrize("g, expected", [(5.0, 1.0), (20.0, 0.0)])
def test_linear_endpoints(g, expected):
    assert choose_aux([g], 10.0, linear_utility(), [(0.0, 1.0)])[0] == expected


def test_log_stationary_point():
    assert choose_aux([5.0], 10.0, log_utility(), [(0.0, 2.0)])[0] == pytest.approx(1.0, abs=1e-6)


def test_flat_objective_takes_largest_gamma():
    assert choose_aux([10.0], 10.0, linear_utility(), [(0.0, 1.0)])[0] == 1.0
    assert choose_aux([0.0], 0.0, log_utility(), [(0.0, 1.0)])[0] == 1.0


def test_non_monotone_utility_rejected():
    with pytest.raises(DomainError):
        choose_aux([1.0], 1.0, neg_square_utility(), [(0.0, 1.0)])
    with pytest.raises(DomainError):
        validate_utility(UtilityFunction(lambda g: float(g[0]) ** 2, None), [(0.0, 2.0)])


def test_non_separable_matches_grid():
    util = UtilityFunction(lambda g: math.log1p(min(g[0], 2 * g[1])), name="leontief")
    rect = [(0.0, 2.0), (0.0, 2.0)]
    gamma = choose_aux([1.0, 0.5], 4.0, util, rect)

    def obj(x):
        return 4.0 * util(x) - 1.0 * x[0] - 0.5 * x[1]

    grid = np.linspace(0, 2, 81)
    best = max(obj((a, b)) for a in grid for b in grid)
    assert obj(gamma) >= best - 1e-3


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 50), st.floats(0, 50), st.floats(0.5, 3))
def test_choose_aux_beats_random_points(g, v, hi):
    rect = [(0.0, hi)]
    rng = np.random.default_rng(0)
    for util in (linear_utility(), log_utility(), min_linear_utility()):
        gamma = choose_aux([g], v, util, rect)
        best = v * util(gamma) - g * gamma[0]
        for s in rng.uniform(0, hi, 1000):
            assert best >= v * util([s]) - g * s - 1e-9


def test_policy_instance_examples():
    sc = FiniteScenario([[0.0, 0.0], [0.0, 0.0]], [1.0, 1.0], [0.5], x=[[2.0], [1.0]])
    res = bisect(utility_policy_instance(sc, [None], [0.0], [1.0]), BisectionConfig(-5, 5, 1e-9))
    assert res.argmin_action == [0]
    assert res.theta_star == pytest.approx(-2.0)
    sc2 = FiniteScenario([[0.0, 1.0], [0.0, 3.0]], [1.0, 1.0], [0.5], x=[[2.0], [1.0]])
    res = bisect(utility_policy_instance(sc2, [None], [1.0], [0.0]), BisectionConfig(-5, 5, 1e-9))
    assert res.theta_star == pytest.approx(1.0)


def test_policy_instance_matches_enumeration():
    rng = np.random.default_rng(3)
    for _ in range(50):
        n = 4
        y = rng.uniform(0, 2, (n, 3))
        x = rng.uniform(0, 2, (n, 2))
        t = rng.uniform(0.5, 3, n)
        sc = FiniteScenario(y, t, [0.5, 0.5], x=x)
        z, g = rng.uniform(0, 5, 2), rng.uniform(0, 5, 2)
        res = bisect(utility_policy_instance(sc, [None], z, g), BisectionConfig(-10, 10, 1e-9))
        exact = min((y[i, 1:] @ z - x[i] @ g) / t[i] for i in range(n))
        assert res.theta_star == pytest.approx(exact, abs=1e-8)


def test_requires_attributes():
    sc = FiniteScenario([[0.0, 1.0]], [1.0], [0.5])
    with pytest.raises(CapabilityError):
        utility_policy_instance(sc, [None], [0.0], [])
    with pytest.raises(CapabilityError):
        UtilityEngine(sc, DppConfig(1.0), linear_utility())


def test_forced_single_action_path():
    sc = FiniteScenario([[0.0, 0.0]], [2.0], [0.5], x=[[1.0]])
    eng = UtilityEngine(sc, DppConfig(1.0), linear_utility())
    outcome, gamma, _ = eng.run_frame()
    hi = sc.bounds.rectangle[0][1]
    assert gamma[0] == hi
    assert eng.bank.g[0] == pytest.approx(max(2.0 * hi - 1.0, 0.0))


def test_jensen_examples():
    lhs, rhs = jensen_gap([1, 3], [0, 2], neg_square_utility())
    assert lhs == pytest.approx(-3.0) and rhs == pytest.approx(-2.25)
    lhs, rhs = jensen_gap([1, 2, 5], [0.7, 0.7, 0.7], log_utility())
    assert lhs == pytest.approx(rhs, abs=1e-15)
    with pytest.raises(DomainError):
        jensen_gap([0.0], [1.0], log_utility())


@settings(max_examples=300, deadline=None)
@given(st.lists(st.tuples(st.floats(0.01, 10), st.floats(0, 5)), min_size=1, max_size=20),
       st.sampled_from(["neg", "log", "minlin"]))
def test_jensen_variation(draws, which):
    util = {"neg": neg_square_utility, "log": log_utility, "minlin": min_linear_utility}[which]()
    t, g = zip(*draws)
    lhs, rhs = jensen_gap(t, g, util)
    assert lhs <= rhs + 1e-12


def test_d_envelope_on_two_point_scenario():
    sc = FiniteScenario([[0.0, 1.0], [0.0, 0.0]], [1.0, 2.0], [0.5], x=[[2.0], [1.5]])
    assert drift_constant_d(sc.bounds, sc.targets) == pytest.approx(3.625)


def test_short_utility_run_consistent():
    sc = FiniteScenario([[0.0, 1.0], [0.0, 0.0]], [1.0, 2.0], [0.5], x=[[2.0], [1.5]])
    eng = UtilityEngine(sc, DppConfig(20.0), log_utility())
    eng.run(3000, checkpoints=[100, 1000, 3000])
    r = eng.frame
    # Auxiliary averages are dominated by the attribute average plus G/R.
    assert np.all(eng.sum_t_gamma / r <= eng.ledger.sum_x / r + eng.bank.g / r + 1e-9)
    assert all(not cp.violations for cp in eng.checkpoints)
    assert eng.achieved_utility() > math.log(2.375) - 0.1
