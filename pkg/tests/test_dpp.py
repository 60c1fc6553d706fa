import numpy as np
import pytest

from renewal_dpp.core import PolicyOutcome, QueueBank, ConstraintTargets, MetricsLedger
from renewal_dpp.dpp import (
    DiagnosticBounds,
    DppConfig,
    DppEngine,
    default_bracket,
    dpp_ratio_objective,
    drift_constant_b,
    queue_checkpoint,
    ratio_performance_bounds,
)
from renewal_dpp.errors import CapabilityError, ConfigurationError
from renewal_dpp.ratio import BisectionConfig, bisect
from renewal_dpp.scenario import FiniteScenario, Scenario


def test_objective_without_queues_is_plain_ratio():
    sc = FiniteScenario([[3.0]], [2.0], [])
    inst = dpp_ratio_objective(sc, [None], np.zeros(0), 1.0)
    assert bisect(inst, BisectionConfig(0, 5, 1e-9)).theta_star == pytest.approx(1.5)


def test_zero_v_isolates_queue_term():
    sc = FiniteScenario([[9.0, 1.0], [9.0, 3.0]], [1.0, 1.0], [0.5])
    inst = dpp_ratio_objective(sc, [None], np.array([1.0]), 0.0)
    res = bisect(inst, BisectionConfig(0, 5, 1e-9))
    assert res.theta_star == pytest.approx(1.0)
    assert res.argmin_action == [0]


def test_scenario_without_evaluator_is_rejected():
    class Bare(Scenario):
        num_constraints = 0
        targets = ConstraintTargets([])

    with pytest.raises(CapabilityError):
        dpp_ratio_objective(Bare(), [None], np.zeros(0), 1.0)


def test_config_validation():
    for kw in ({"v": -1}, {"v": 1, "sample_window": 0}, {"v": 1, "frames": 0}):
        with pytest.raises(ConfigurationError):
            DppConfig(**kw)


def test_single_action_outcome_is_exact():
    sc = FiniteScenario([[2.0, 0.1]], [1.5], [0.25])
    eng = DppEngine(sc, DppConfig(10.0))
    outcome, diag = eng.run_frame()
    assert outcome.frame_length == 1.5
    assert list(outcome.penalties) == [2.0, 0.1]
    assert eng.bank.z[0] == 0.0


def test_first_frame_uses_current_sample_only():
    sc = FiniteScenario([[1.0, 1.0], [4.0, 0.0]], [1.0, 2.0], [0.5])
    eng = DppEngine(sc, DppConfig(1.0, sample_window=5))
    assert eng.current_samples("eta0") == ["eta0"]
    eng.run_frame()
    assert len(eng.buffer) == 1
    assert eng.ledger.frames == 1


def test_drift_constant_from_corners():
    sc = FiniteScenario([[1.0, 1.0], [4.0, 0.0]], [1.0, 2.0], [0.5])
    # (y - 0.5 T)^2 over y in [0, 1], T in [1, 2]: largest at y=0, T=2.
    assert drift_constant_b(sc.bounds, sc.targets) == pytest.approx(0.5)


def test_objective_bound_arithmetic():
    diag = DiagnosticBounds(b_const=2.0, f1=1.0, f2=1.0, ratio_opt_hint=1.5)
    led = MetricsLedger(1)
    led.record(PolicyOutcome(1.0, [1.5, 0.0]))
    bank = QueueBank.zeros(ConstraintTargets([0.5]))
    rep = ratio_performance_bounds(diag, DppConfig(100.0), led, bank, t_min=1.0)
    assert rep["objective_bound"] == pytest.approx(1.52)
    assert rep["objective_bound_limit"] == pytest.approx(1.52)
    assert rep["constraint_bounds"][0] == pytest.approx(0.5 + np.sqrt(101.0))
    assert not rep["objective_violation"]


def test_checkpoint_flags_broken_laws():
    good = queue_checkpoint(10, np.array([1.0]), np.array([0.0, 3.0]), 10.0, [0.25], 1.0)
    assert good.violations == []
    bad = queue_checkpoint(10, np.array([0.0]), np.array([0.0, 5.0]), 10.0, [0.25], 1.0)
    assert any(v.startswith("constraint_bound") for v in bad.violations)
    assert any(v.startswith("telescoping") for v in bad.violations)


def test_default_bracket_contains_ratio():
    sc = FiniteScenario([[1.0, 1.0], [4.0, 0.0]], [1.0, 2.0], [0.5])
    lo, hi = default_bracket(sc, np.array([2.0, 3.0]), np.zeros(0))
    for y, t in zip(sc.y, sc.t):
        assert lo <= (2 * y[0] + 3 * y[1]) / t <= hi


def test_engine_near_oracle_on_short_run():
    sc = FiniteScenario([[1.0, 1.0], [4.0, 0.0]], [1.0, 2.0], [0.5])
    eng = DppEngine(sc, DppConfig(50.0), rng=np.random.default_rng(0))
    eng.run(4000, checkpoints=[10, 100, 1000, 4000], strict=True)
    obj = eng.ledger.sum_y[0] / eng.ledger.sum_t
    assert obj <= 1.5 + drift_constant_b(sc.bounds, sc.targets) / 50.0 + 0.05
    assert eng.telescoping_violations == 0
    assert all(not cp.violations for cp in eng.checkpoints)


def test_noise_keeps_means():
    sc = FiniteScenario([[1.0, 1.0]], [2.0], [0.5], noise=0.3)
    rng = np.random.default_rng(1)
    outs = [sc.realize(None, 0, rng, k) for k in range(20000)]
    assert np.mean([o.frame_length for o in outs]) == pytest.approx(2.0, abs=0.01)
    assert np.mean([o.penalties[1] for o in outs]) == pytest.approx(1.0, abs=0.01)
    assert sc.bounds.t_min == pytest.approx(1.4)
