"""Bisection-free alternatives to the ratio algorithm.

``alt-form`` minimizes the plain expectation
``V y0 + sum_l Z_l (y_l - c_l T)`` each frame, which targets the per-frame
average of y0.  ``alt-timeavg`` replaces the unknown optimal ratio with the
running ratio theta[r] = sum y0 / sum T and minimizes
``V (y0 - theta T) + sum_l Z_l (y_l - c_l T)``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dpp import FrameEngine
from .errors import ConfigurationError

OSCILLATION_TOL = 1e-3
TRAILING_FRACTION = 0.1


@dataclass(frozen=True)
class ThetaTracker:
    """Running (optionally exponentially discounted) ratio of sum y0 to sum T."""

    sum_y0: float = 0.0
    sum_t: float = 0.0
    theta: float = 0.0
    frame: int = 0
    decay: float = 1.0

    def __post_init__(self):
        if not 0 < self.decay <= 1:
            raise ConfigurationError("decay must lie in (0, 1]")


def update_theta(tracker: ThetaTracker, outcome) -> ThetaTracker:
    sy = tracker.decay * tracker.sum_y0 + float(outcome.penalties[0])
    st = tracker.decay * tracker.sum_t + float(outcome.frame_length)
    return replace(tracker, sum_y0=sy, sum_t=st, theta=sy / st, frame=tracker.frame + 1)


def _coupling(z, targets) -> float:
    # Explicit left-to-right sum so the result matches the compiled kernel.
    s = 0.0
    for zl, cl in zip(z, targets):
        s += float(zl) * float(cl)
    return s


def alt_form_weights(z, v, targets, num_attributes=0):
    wy = np.concatenate([[float(v)], np.asarray(z, dtype=float)])
    return wy, np.zeros(num_attributes), -_coupling(z, targets)


def alt_timeavg_weights(z, tracker: ThetaTracker, v, targets, num_attributes=0):
    wy = np.concatenate([[float(v)], np.asarray(z, dtype=float)])
    return wy, np.zeros(num_attributes), -(float(v) * tracker.theta) - _coupling(z, targets)


def alt_form_select(scenario, z, v, eta):
    wy, wx, wt = alt_form_weights(z, v, scenario.targets.targets, scenario.num_attributes)
    return scenario.minimize_linear(eta, wy, wx, wt)[1]


def alt_timeavg_select(scenario, z, tracker: ThetaTracker, v, eta):
    wy, wx, wt = alt_timeavg_weights(z, tracker, v, scenario.targets.targets,
                                     scenario.num_attributes)
    return scenario.minimize_linear(eta, wy, wx, wt)[1]


def oscillation(thetas, fraction: float = TRAILING_FRACTION) -> float:
    """max - min of theta over the trailing ``fraction`` of frames."""
    thetas = np.asarray(thetas, dtype=float)
    if thetas.size == 0:
        return 0.0
    start = thetas.size - int(thetas.size * fraction)
    tail = thetas[min(start, thetas.size - 1):]
    return float(tail.max() - tail.min())


class AltEngine(FrameEngine):
    """Engine for the ``alt-form`` and ``alt-timeavg`` algorithms."""

    MODES = ("alt-form", "alt-timeavg")

    def __init__(self, scenario, v: float, mode: str = "alt-timeavg", seed: int = 0,
                 rng=None, log: bool = False, decay: float = 1.0):
        if mode not in self.MODES:
            raise ConfigurationError(f"unknown alternative mode {mode!r}")
        super().__init__(scenario, v, seed, rng, log)
        self.algorithm = mode
        self.tracker = ThetaTracker(decay=decay)
        self.thetas: list[float] = []

    def run_frame(self):
        sc = self.scenario
        eta = sc.sample_eta(self.rng)
        z = self.bank.z
        if self.algorithm == "alt-form":
            action = alt_form_select(sc, z, self.v, eta)
        else:
            action = alt_timeavg_select(sc, z, self.tracker, self.v, eta)
        outcome = sc.realize(eta, action, self.rng, self.frame)
        diag = {"theta": self.tracker.theta, "action": action}
        self._advance(outcome, diag)
        self.tracker = update_theta(self.tracker, outcome)
        self.thetas.append(self.tracker.theta)
        return outcome, diag

    def oscillation(self) -> float:
        return oscillation(self.thetas)

    def converged(self) -> bool:
        return self.oscillation() < OSCILLATION_TOL

    def per_frame_y0(self) -> float:
        return float(self.ledger.sum_y[0]) / self.frame
