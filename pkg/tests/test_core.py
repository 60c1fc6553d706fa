import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from renewal_dpp.core import (
    BoundsConfig,
    ConstraintTargets,
    MetricsLedger,
    PolicyOutcome,
    QueueBank,
    lyapunov_value,
    ratio_estimates,
    update_g,
    update_z,
)
from renewal_dpp.errors import ConfigurationError, DomainError, EmptyLedgerError


def bank(z, c, g=()):
    return QueueBank(np.array(z, float), np.array(g, float), ConstraintTargets(c))


@pytest.mark.parametrize("z, y1, t, expected", [
    (0.0, 0.5, 1.0, 0.25),
    (5.0, 0.0, 30.0, 0.0),
    (2.0, 1.0, 2.0, 2.5),
])
def test_update_z_examples(z, y1, t, expected):
    out = update_z(bank([z], [0.25]), PolicyOutcome(t, [0.0, y1]))
    assert out.z == pytest.approx([expected])


@pytest.mark.parametrize("g, t, gamma, x, expected", [
    (0.0, 2.0, 1.0, 3.0, 0.0),
    (1.0, 2.0, 1.0, 1.0, 2.0),
    (0.5, 1.0, 0.0, 0.0, 0.5),
])
def test_update_g_examples(g, t, gamma, x, expected):
    out = update_g(bank([], [], [g]), PolicyOutcome(t, [0.0], [x]), [gamma])
    assert out.g == pytest.approx([expected])


def test_update_g_rejects_gamma_outside_rectangle():
    with pytest.raises(DomainError):
        update_g(bank([], [], [0.0]), PolicyOutcome(1.0, [0.0], [1.0]), [3.0],
                 rectangle=[(0.0, 2.0)])


@pytest.mark.parametrize("z, g, expected", [
    ([0, 0], [], 0.0),
    ([3, 4], [], 12.5),
    ([1], [2], 2.5),
])
def test_lyapunov_value(z, g, expected):
    assert lyapunov_value(bank(z, [0.1] * len(z), g)) == pytest.approx(expected)


def test_ratio_estimates_examples():
    led = MetricsLedger(0)
    led.record(PolicyOutcome(2.0, [-2.0]))
    led.record(PolicyOutcome(2.0, [-4.0]))
    assert ratio_estimates(led)[0] == pytest.approx(-1.5)

    led = MetricsLedger(1)
    led.record(PolicyOutcome(2.0, [0.0, 0.5]))
    assert ratio_estimates(led)[1] == pytest.approx([0.25])

    with pytest.raises(EmptyLedgerError):
        ratio_estimates(MetricsLedger(1))


def test_outcome_and_bank_validation():
    with pytest.raises(DomainError):
        PolicyOutcome(0.0, [1.0])
    with pytest.raises(DomainError):
        bank([-1.0], [0.25])
    with pytest.raises(ConfigurationError):
        bank([0.0, 0.0], [0.25])


def test_rectangle_uses_all_ratio_corners():
    b = BoundsConfig(t_min=1.0, t_max=2.0, y0_min=0.0, y0_max=1.0,
                     x_min=[-1.0], x_max=[3.0])
    assert b.rectangle == [(-1.0, 3.0)]
    b = BoundsConfig(t_min=1.0, t_max=2.0, y0_min=0.0, y0_max=1.0, x_min=[1.5], x_max=[2.0])
    assert b.rectangle == [(0.75, 2.0)]
    assert b.in_rectangle([1.0]) and not b.in_rectangle([2.5])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.floats(0.1, 5), st.floats(0, 3)), min_size=1, max_size=60),
       st.floats(0.05, 1.0))
def test_queue_laws_hold_on_random_sequences(frames, c):
    b = bank([0.0], [c])
    total = 0.0
    for t, y in frames:
        new = update_z(b, PolicyOutcome(t, [0.0, y]))
        assert new.z[0] >= 0
        assert new.z[0] >= b.z[0] + y - c * t - 1e-12
        total += y - c * t
        b = new
    # Telescoped one-sided law.
    assert b.z[0] >= total - 1e-9


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(1, 3), st.floats(0, 2)), min_size=1, max_size=30))
def test_ledger_ratio_in_rectangle(frames):
    bounds = BoundsConfig(t_min=1, t_max=3, y0_min=0, y0_max=0, x_min=[0.0], x_max=[2.0])
    led = MetricsLedger(0, 1)
    for t, x in frames:
        led.record(PolicyOutcome(t, [0.0], [x]))
    assert led.sum_t >= led.frames * bounds.t_min
    assert bounds.in_rectangle(ratio_estimates(led)[2])
