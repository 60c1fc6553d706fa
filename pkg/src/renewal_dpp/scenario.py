"""Pluggable renewal systems.

Every engine reduces its per-frame decision to minimizing a conditional
expectation that is *linear* in the frame outcome::

    E[ sum_l wy[l] * y_l + sum_m wx[m] * x_m + wt * T  |  eta, action ]

so a scenario only has to provide :meth:`Scenario.minimize_linear` for its
action space.  Enumerable scenarios get this for free from
:class:`FiniteScenario`.
"""

from __future__ import annotations

import math

import numpy as np

from .core import BoundsConfig, ConstraintTargets, PolicyOutcome
from .errors import CapabilityError, ConfigurationError


class Scenario:
    """Base class; subclasses set the attributes below and override the hooks."""

    name = "scenario"
    num_constraints: int = 0
    num_attributes: int = 0
    targets: ConstraintTargets
    bounds: BoundsConfig

    def sample_eta(self, rng):
        """Draw the initial information for one frame."""
        return None

    def minimize_linear(self, eta, wy, wx, wt):
        """Return ``(value, action)`` minimizing the linear objective given eta."""
        raise CapabilityError(f"{self.name} has no conditional evaluator")

    def prepare_linear(self, wy, wx):
        """Return ``f(eta, wt) -> (value, action)`` for fixed ``wy`` and ``wx``.

        Scenarios can override this to precompute theta-independent parts.
        """

        def solve(eta, wt):
            return self.minimize_linear(eta, wy, wx, wt)

        return solve

    def realize(self, eta, action, rng, frame_index: int) -> PolicyOutcome:
        raise CapabilityError(f"{self.name} cannot realize outcomes")

    def theta_bracket(self, wy, wx):
        """Optional scenario-specific bisection bracket; None means use bounds."""
        return None

    def describe_action(self, action) -> dict:
        return {"action": action}


class FiniteScenario(Scenario):
    """No initial information, a finite list of actions with known expectations.

    Args:
        y: expected penalties, shape ``(n_actions, L + 1)``.
        t: expected frame lengths, shape ``(n_actions,)``.
        targets: constraint targets ``c_1..c_L``.
        x: expected attributes, shape ``(n_actions, M)``; omit when M = 0.
        noise: half-width of zero-mean uniform noise added to every realized
            penalty and attribute; frame lengths get relative noise of the
            same half-width.  Expectations are unchanged.
    """

    name = "finite"

    def __init__(self, y, t, targets, x=None, noise: float = 0.0):
        y = np.atleast_2d(np.asarray(y, dtype=float))
        t = np.asarray(t, dtype=float).reshape(-1)
        n = t.size
        if y.shape[0] != n:
            raise ConfigurationError("y and t disagree on the number of actions")
        x = np.zeros((n, 0)) if x is None else np.asarray(x, dtype=float).reshape(n, -1)
        if not isinstance(targets, ConstraintTargets):
            targets = ConstraintTargets(targets)
        if y.shape[1] != len(targets) + 1:
            raise ConfigurationError("y must have L + 1 columns for L targets")
        if np.any(t <= 0):
            raise ConfigurationError("expected frame lengths must be positive")
        if not 0 <= noise < 1:
            raise ConfigurationError("noise must lie in [0, 1)")
        self.y, self.t, self.x = y, t, x
        self.noise = float(noise)
        self.targets = targets
        self.num_constraints = len(targets)
        self.num_attributes = x.shape[1]
        # Plain-float rows keep the inner loop cheap.
        self._rows = [
            (tuple(y[i]), tuple(x[i]), float(t[i])) for i in range(n)
        ]
        nz = self.noise
        self.bounds = BoundsConfig(
            t_min=float(t.min() * (1 - nz)),
            t_max=float(t.max() * (1 + nz)),
            y0_min=float(y[:, 0].min() - nz),
            y0_max=float(y[:, 0].max() + nz),
            x_min=x.min(axis=0) - nz if n else np.zeros(0),
            x_max=x.max(axis=0) + nz if n else np.zeros(0),
            y_min=y[:, 1:].min(axis=0) - nz,
            y_max=y[:, 1:].max(axis=0) + nz,
        )

    @property
    def num_actions(self) -> int:
        return self.t.size

    def _numerators(self, wy, wx):
        wy = [float(w) for w in wy]
        wx = [float(w) for w in wx]
        out = []
        for yi, xi, ti in self._rows:
            s = 0.0
            for w, v in zip(wy, yi):
                s += w * v
            for w, v in zip(wx, xi):
                s += w * v
            out.append((s, ti))
        return out

    @staticmethod
    def _argmin(rows, wt):
        best, best_i = math.inf, -1
        for i, (a, t) in enumerate(rows):
            s = a + wt * t
            if s < best:
                best, best_i = s, i
        return best, best_i

    def minimize_linear(self, eta, wy, wx, wt):
        return self._argmin(self._numerators(wy, wx), float(wt))

    def prepare_linear(self, wy, wx):
        rows = self._numerators(wy, wx)
        return lambda eta, wt: self._argmin(rows, float(wt))

    def realize(self, eta, action, rng, frame_index: int) -> PolicyOutcome:
        y, x, t = self.y[action], self.x[action], self.t[action]
        if self.noise:
            u = rng.random(y.size + x.size + 1) * 2.0 - 1.0
            y = y + self.noise * u[: y.size]
            x = x + self.noise * u[y.size : y.size + x.size]
            t = t * (1.0 + self.noise * u[-1])
        return PolicyOutcome(t, y, x, frame_index)

    def describe_action(self, action) -> dict:
        return {"action": int(action)}
