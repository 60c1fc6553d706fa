import math

import numpy as np
import pytest

from renewal_dpp.errors import ConfigurationError, InfeasibleError
from renewal_dpp.oracle import (
    FinitePolicySystem,
    oracle_ratio_opt,
    oracle_util_opt,
    oracle_y0_opt,
    simplex_grid,
)
from renewal_dpp.ratio import pure_policy_ratio_opt
from renewal_dpp.utility import UtilityFunction, linear_utility, log_utility

AB = FinitePolicySystem([[1.0, 1.0], [4.0, 0.0]], [1.0, 2.0], [0.5])


def test_ab_values():
    assert oracle_ratio_opt(AB) == pytest.approx(1.5, abs=1e-9)
    assert oracle_y0_opt(AB) == pytest.approx(2.0, abs=1e-12)


def test_single_point():
    sys = FinitePolicySystem([[2.0, 0.0]], [1.0], [1.0])
    assert oracle_ratio_opt(sys) == pytest.approx(2.0, abs=1e-9)
    assert oracle_y0_opt(sys) == 2.0


def test_unconstrained_reduces_to_pure_policies():
    rng = np.random.default_rng(0)
    for _ in range(30):
        y0 = rng.uniform(-3, 3, 4)
        t = rng.uniform(0.5, 2, 4)
        sys = FinitePolicySystem(y0[:, None], t, [])
        assert oracle_ratio_opt(sys) == pytest.approx(pure_policy_ratio_opt(zip(y0, t)), abs=1e-9)
        assert oracle_y0_opt(sys) == y0.min()


def test_vertex_method_agrees_with_grid():
    rng = np.random.default_rng(1)
    for _ in range(20):
        y = rng.uniform(0, 2, (3, 3))
        t = rng.uniform(0.5, 2, 3)
        sys = FinitePolicySystem(y, t, [0.9, 0.9])
        try:
            exact = oracle_ratio_opt(sys)
        except InfeasibleError:
            continue
        p = simplex_grid(3, 300)
        p = p[sys.feasible(p)]
        grid_best = ((p @ y[:, 0]) / (p @ t)).min()
        assert exact <= grid_best + 1e-9
        assert exact >= grid_best - 0.05


def test_utility_values():
    single = FinitePolicySystem([[0.0]], [2.0], [], x=[[3.0]])
    assert oracle_util_opt(single, linear_utility()) == pytest.approx(1.5)
    pair = FinitePolicySystem([[0.0, 1.0], [0.0, 0.0]], [1.0, 2.0], [0.5], x=[[2.0], [1.5]])
    assert oracle_util_opt(pair, log_utility(), grid=30000) == pytest.approx(math.log(2.375),
                                                                           abs=1e-9)
    const = UtilityFunction(lambda g: 4.0, None)
    assert oracle_util_opt(pair, const, grid=100) == 4.0


def test_linear_utility_two_points_against_fine_grid():
    pair = FinitePolicySystem([[0.0, 1.0], [0.0, 0.0]], [1.0, 2.0], [0.5], x=[[2.0], [1.5]])
    p = np.linspace(0, 1, 100001)
    feas = p * 1.0 - 0.5 * (p + 2 * (1 - p)) <= 1e-12
    ratio = (2 * p + 1.5 * (1 - p)) / (p + 2 * (1 - p))
    assert oracle_util_opt(pair, linear_utility(), grid=1000) <= ratio[feas].max() + 1e-12
    assert oracle_util_opt(pair, linear_utility(), grid=1000) >= ratio[feas].max() - 1e-3


def test_grid_refinement_never_worse():
    pair = FinitePolicySystem([[0.0, 1.0], [0.0, 0.0]], [1.0, 2.0], [0.5], x=[[2.0], [1.5]])
    coarse = oracle_util_opt(pair, log_utility(), grid=50)
    fine = oracle_util_opt(pair, log_utility(), grid=100)
    assert fine >= coarse - 1e-12


def test_infeasible_report_and_certificate():
    sys = FinitePolicySystem([[1.0, 1.0], [4.0, 1.0]], [1.0, 2.0], [0.1])
    with pytest.raises(InfeasibleError) as info:
        oracle_ratio_opt(sys)
    assert info.value.report["smallest_max_violation_on_probe_grid"] > 0
    p = simplex_grid(2, 1000)
    assert not sys.feasible(p).any()


def test_limits_and_grid_shape():
    with pytest.raises(ConfigurationError):
        FinitePolicySystem(np.zeros((7, 1)), np.ones(7), [])
    g = simplex_grid(3, 4)
    assert g.shape == (15, 3)
    assert np.allclose(g.sum(axis=1), 1.0)
