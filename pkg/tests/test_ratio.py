import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from renewal_dpp.errors import BracketError, ConfigurationError, ConvergenceError, SamplingError
from renewal_dpp.ratio import (
    BisectionConfig,
    FractionalInstance,
    bisect,
    pure_policy_ratio_opt,
    ratio_bracket,
    sampled_val,
)

AB = [(2.0, 1.0), (3.0, 4.0)]


def test_two_actions_converge_to_smaller_ratio():
    res = bisect(FractionalInstance.from_points(AB), BisectionConfig(0.0, 2.0, tolerance=1e-6))
    assert res.theta_star == pytest.approx(0.75, abs=1e-6)
    assert res.argmin_action == 1
    assert res.theta_star >= 0.75  # upper end of the final bracket


def test_single_action():
    res = bisect(FractionalInstance.from_points([(1.0, 2.0)]), BisectionConfig(0, 2, 1e-6))
    assert res.theta_star == pytest.approx(0.5, abs=1e-6)


def test_sign_at_theta_above_root():
    inst = FractionalInstance.from_points(AB)
    assert inst.evaluate_inf(1.0)[0] == pytest.approx(-1.0)


def test_sampled_val_examples():
    vals = {0: 1.0, 1: -3.0}
    assert sampled_val(0.3, [0, 1], lambda eta, th: (vals[eta], eta))[0] == -1.0
    assert sampled_val(0.0, [None], lambda eta, th: (0.0, 0))[0] == 0.0
    with pytest.raises(SamplingError):
        sampled_val(0.0, [], lambda eta, th: (0.0, 0))


def test_pure_policy_ratio_opt_examples():
    assert pure_policy_ratio_opt(AB) == 0.75
    assert pure_policy_ratio_opt([(1, 2)]) == 0.5


def test_bracket_repair_expands_outward():
    inst = FractionalInstance.from_points([(50.0, 1.0)])
    res = bisect(inst, BisectionConfig(0.0, 1.0, tolerance=1e-6))
    assert res.expansions > 0
    assert res.theta_star == pytest.approx(50.0, abs=1e-6)
    res = bisect(FractionalInstance.from_points([(-50.0, 1.0)]), BisectionConfig(0.0, 1.0, 1e-6))
    assert res.theta_star == pytest.approx(-50.0, abs=1e-6)


def test_bracket_failure_and_iteration_cap():
    inst = FractionalInstance.from_points([(1e30, 1.0)])
    with pytest.raises(BracketError):
        bisect(inst, BisectionConfig(0.0, 1.0, max_expansions=3))
    with pytest.raises(ConvergenceError):
        bisect(FractionalInstance.from_points(AB),
               BisectionConfig(0.0, 2.0, tolerance=1e-12, max_iterations=5))


def test_config_validation():
    with pytest.raises(ConfigurationError):
        BisectionConfig(1.0, 1.0)
    with pytest.raises(ConfigurationError):
        BisectionConfig(0.0, 1.0, tolerance=0.0)
    with pytest.raises(ConfigurationError):
        FractionalInstance(lambda t: (0.0, 0), 0.0, 1.0)


def test_ratio_bracket_contains_all_ratios():
    lo, hi = ratio_bracket(-5.0, 2.0, 1.0, 4.0)
    assert (lo, hi) == (-5.0, 2.0)


point = st.tuples(st.floats(-10, 10), st.floats(0.1, 10))


@settings(max_examples=300, deadline=None)
@given(st.lists(point, min_size=1, max_size=8))
def test_bisection_matches_pure_minimum(points):
    inst = FractionalInstance.from_points(points)
    exact = pure_policy_ratio_opt(points)
    tol = 1e-8
    res = bisect(inst, BisectionConfig(-1.0, 1.0, tolerance=tol))
    assert abs(res.theta_star - exact) <= 1e-6
    assert res.final_value <= 0
    # Sign properties on either side of the root.
    assert inst.evaluate_inf(exact + 1e-3)[0] < 0
    assert inst.evaluate_inf(exact - 1e-3)[0] > 0
    span = res.theta_hi - res.theta_lo + (2.0 * 2 ** res.expansions)
    assert res.iterations <= math.log2(span / tol) + 32


@settings(max_examples=200, deadline=None)
@given(st.lists(point, min_size=1, max_size=8), st.floats(-20, 20), st.floats(0, 20))
def test_value_is_non_increasing(points, theta, step):
    inst = FractionalInstance.from_points(points)
    assert inst.evaluate_inf(theta + step)[0] <= inst.evaluate_inf(theta)[0] + 1e-12


def test_mixtures_never_beat_pure_policies():
    rng = np.random.default_rng(5)
    for _ in range(50):
        pts = [(rng.uniform(-5, 5), rng.uniform(0.5, 3)) for _ in range(4)]
        best = pure_policy_ratio_opt(pts)
        p = rng.dirichlet(np.ones(4), size=500)
        a = p @ np.array([q[0] for q in pts])
        b = p @ np.array([q[1] for q in pts])
        assert np.all(a / b >= best - 1e-12)
