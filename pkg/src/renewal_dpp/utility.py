"""Concave utility maximization of time-average attribute ratios.

The problem max phi(xbar / Tbar) is transformed with auxiliary variables
gamma in the bounding rectangle and virtual queues G_m enforcing
``xbar_m >= average of T gamma_m``.  Each frame:

1. choose gamma maximizing ``V phi(gamma) - sum_m G_m gamma_m``;
2. choose the policy minimizing
   ``E[sum Z_l y_l - sum G_m x_m] / E[T]`` by bisection;
3. update Z and G.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .core import BoundsConfig, ConstraintTargets, update_g
from .dpp import (
    Checkpoint,
    DppConfig,
    FrameEngine,
    default_bracket,
    drift_constant_b,
    linear_ratio_instance,
    make_bisection_config,
)
from .errors import CapabilityError, DomainError
from .ratio import FractionalInstance, bisect

AUX_TOL = 1e-9
_MAX_SWEEPS = 10_000


@dataclass(frozen=True)
class UtilityFunction:
    """A concave utility phi over the attribute-ratio rectangle."""

    evaluate: Callable[[np.ndarray], float]
    separable_parts: tuple | None = None
    monotone_nondecreasing: bool = True
    name: str = "custom"

    def __call__(self, gamma) -> float:
        return float(self.evaluate(np.asarray(gamma, dtype=float)))

    @classmethod
    def separable(cls, parts: Sequence[Callable[[float], float]], name="separable",
                  monotone=True) -> "UtilityFunction":
        parts = tuple(parts)

        def evaluate(gamma):
            return sum(p(float(g)) for p, g in zip(parts, gamma))

        return cls(evaluate, parts, monotone, name)


def linear_utility(m: int = 1) -> UtilityFunction:
    return UtilityFunction.separable([lambda g: g] * m, name="linear")


def log_utility(m: int = 1) -> UtilityFunction:
    """sum_m ln(1 + gamma_m); defined for gamma > -1."""
    return UtilityFunction.separable([math.log1p] * m, name="log1p")


def min_linear_utility(slopes=(1.0, 0.25), intercepts=(0.0, 0.75), m: int = 1) -> UtilityFunction:
    """sum_m min_k (slope_k gamma_m + intercept_k); concave, non-decreasing if slopes >= 0."""
    pieces = list(zip(slopes, intercepts))

    def part(g):
        return min(a * g + b for a, b in pieces)

    return UtilityFunction.separable([part] * m, name="min-linear",
                                     monotone=all(a >= 0 for a in slopes))


def neg_square_utility(m: int = 1) -> UtilityFunction:
    """-sum gamma_m^2: concave but not monotone (Jensen checks only)."""
    return UtilityFunction.separable([lambda g: -g * g] * m, name="neg-square", monotone=False)


UTILITIES = {
    "linear": linear_utility,
    "log1p": log_utility,
    "min-linear": min_linear_utility,
    "neg-square": neg_square_utility,
}


def validate_utility(util: UtilityFunction, rect, rng=None, trials: int = 256,
                     tol: float = 1e-9):
    """Randomized concavity and monotonicity check on the rectangle.

    Raises:
        DomainError: a violating pair of points was found.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    lo = np.array([a for a, _ in rect])
    hi = np.array([b for _, b in rect])
    if not util.monotone_nondecreasing:
        raise DomainError(f"utility {util.name} is not entrywise non-decreasing")
    for _ in range(trials):
        g1 = lo + (hi - lo) * rng.random(lo.size)
        g2 = lo + (hi - lo) * rng.random(lo.size)
        lam = rng.random()
        mixed = util(lam * g1 + (1 - lam) * g2)
        if mixed < lam * util(g1) + (1 - lam) * util(g2) - tol:
            raise DomainError(f"utility {util.name} is not concave near {g1}, {g2}")
        up = np.maximum(g1, g2)
        if util(up) < util(g1) - tol:
            raise DomainError(f"utility {util.name} decreases from {g1} to {up}")


def _argmax_concave_1d(f, lo: float, hi: float) -> float:
    """Maximize a concave scalar function on [lo, hi]; ties go to the larger point."""
    if hi - lo <= 0:
        return hi
    res = minimize_scalar(lambda s: -f(s), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12})
    cands = [(f(hi), hi), (f(lo), lo), (-res.fun, float(res.x))]
    best = max(v for v, _ in cands)
    slack = 1e-12 * (1.0 + abs(best))
    return max(s for v, s in cands if v >= best - slack)


def choose_aux(g, v: float, util: UtilityFunction, rect) -> np.ndarray:
    """Maximizer of V phi(gamma) - sum g_m gamma_m over the rectangle."""
    if not util.monotone_nondecreasing:
        raise DomainError(f"utility {util.name} is not entrywise non-decreasing")
    g = np.asarray(g, dtype=float)
    if g.size != len(rect):
        raise DomainError("queue vector and rectangle dimensions differ")
    if util.separable_parts is not None:
        out = np.empty(g.size)
        for m, (part, (lo, hi)) in enumerate(zip(util.separable_parts, rect)):
            out[m] = _argmax_concave_1d(lambda s, p=part, gm=g[m]: v * p(s) - gm * s, lo, hi)
        return out
    return _coordinate_ascent(g, v, util, rect)


def _coordinate_ascent(g, v, util, rect):
    lo = np.array([a for a, _ in rect])
    hi = np.array([b for _, b in rect])

    def objective(x):
        return v * util(x) - float(np.dot(g, x))

    corners = list(itertools.product(*rect))
    if len(corners) > 7:
        pick = np.random.default_rng(0).choice(len(corners), 7, replace=False)
        corners = [corners[i] for i in sorted(pick)]
    starts = [0.5 * (lo + hi)] + [np.array(c, dtype=float) for c in corners]

    best_x, best_val = None, -math.inf
    for x in starts:
        x = x.copy()
        val = objective(x)
        for _ in range(_MAX_SWEEPS):
            prev = val
            for m in range(x.size):
                def along(s, m=m):
                    y = x.copy()
                    y[m] = s
                    return objective(y)
                x[m] = _argmax_concave_1d(along, lo[m], hi[m])
            val = objective(x)
            if val - prev < AUX_TOL:
                break
        if val > best_val + AUX_TOL or (abs(val - best_val) <= AUX_TOL and best_x is not None
                                        and tuple(x) > tuple(best_x)):
            best_x, best_val = x, val
    return best_x


def utility_policy_instance(scenario, samples, z, g) -> FractionalInstance:
    """a = sum z_l y_l - sum g_m x_m, b = T (V enters only through the auxiliary step)."""
    if scenario.num_attributes == 0:
        raise CapabilityError(f"{scenario.name} has no attributes to optimize")
    wy = np.concatenate([[0.0], np.asarray(z, dtype=float)])
    wx = -np.asarray(g, dtype=float)
    return linear_ratio_instance(scenario, samples, wy, wx)


def drift_constant_d(bounds: BoundsConfig, targets: ConstraintTargets) -> float:
    """Envelope for D covering both the Z and the G queue increments."""
    d = drift_constant_b(bounds, targets)
    for m, (glo, ghi) in enumerate(bounds.rectangle):
        # (T gamma - x)^2 is extremal at a corner of the (T, gamma, x) box.
        best = 0.0
        for t, gm, x in itertools.product((bounds.t_min, bounds.t_max), (glo, ghi),
                                          (bounds.x_min[m], bounds.x_max[m])):
            best = max(best, (t * gm - x) ** 2)
        d += 0.5 * best
    return d


def jensen_gap(t_samples, gamma_samples, util: UtilityFunction):
    """Return (sum T phi(gamma) / sum T, phi(sum T gamma / sum T))."""
    t = np.asarray(t_samples, dtype=float).reshape(-1)
    gam = np.asarray(gamma_samples, dtype=float).reshape(t.size, -1)
    if np.any(t <= 0):
        raise DomainError("frame lengths must be positive")
    total = t.sum()
    lhs = sum(ti * util(gi) for ti, gi in zip(t, gam)) / total
    rhs = util((t[:, None] * gam).sum(axis=0) / total)
    return lhs, rhs


class UtilityEngine(FrameEngine):
    """Auxiliary-variable engine for concave utility maximization."""

    algorithm = "utility"

    def __init__(self, scenario, config: DppConfig, util: UtilityFunction,
                 bisection: dict | None = None, rng=None, log: bool = False,
                 validate: bool = True):
        if scenario.num_attributes == 0:
            raise CapabilityError(f"{scenario.name} has no attributes to optimize")
        super().__init__(scenario, config.v, config.seed, rng, log,
                         num_g=scenario.num_attributes)
        self.config = config
        self.util = util
        self.rect = scenario.bounds.rectangle
        if validate:
            validate_utility(util, self.rect)
        self.bisection = dict(bisection or {})
        self.buffer = deque(maxlen=config.sample_window)
        m = scenario.num_attributes
        self.sum_t_gamma = np.zeros(m)
        self.sum_t_phi = 0.0
        self.peak_g = np.zeros(m)

    def current_samples(self, eta):
        samples = list(self.buffer)
        if len(samples) < self.config.sample_window:
            samples.append(eta)
        return samples

    def run_frame(self):
        sc = self.scenario
        gamma = choose_aux(self.bank.g, self.v, self.util, self.rect)
        eta = sc.sample_eta(self.rng)
        samples = self.current_samples(eta)
        z, g = self.bank.z, self.bank.g
        wy = np.concatenate([[0.0], z])
        wx = -g
        instance = utility_policy_instance(sc, samples, z, g)
        lo, hi = default_bracket(sc, wy, wx)
        result = bisect(instance, make_bisection_config(lo, hi, self.bisection))
        theta = result.theta_star
        value, action = sc.minimize_linear(eta, wy, wx, -theta)
        outcome = sc.realize(eta, action, self.rng, self.frame)
        diag = {"theta_hat": theta, "gamma": gamma.copy(), "iterations": result.iterations,
                "action": action, "objective": value}
        self._advance(outcome, diag,
                      extra_update=lambda bank: update_g(bank, outcome, gamma, self.rect))
        self.sum_t_gamma += outcome.frame_length * gamma
        self.sum_t_phi += outcome.frame_length * self.util(gamma)
        self.peak_g = np.maximum(self.peak_g, self.bank.g)
        self.buffer.append(eta)
        return outcome, gamma, diag

    def checkpoint(self) -> Checkpoint:
        cp = super().checkpoint()
        cp.g_over_r = self.bank.g / self.frame
        return cp

    def achieved_utility(self) -> float:
        return self.util(self.ledger.sum_x / self.ledger.sum_t)


def utility_performance_bounds(engine: UtilityEngine, util_opt: float, c_approx: float = 0.0) -> dict:
    """Compare the achieved utility with util_opt - D/(V t_min) - C/V."""
    sc = engine.scenario
    d = drift_constant_d(sc.bounds, sc.targets)
    v = engine.v
    gap = math.inf if v == 0 else d / (v * sc.bounds.t_min) + c_approx / v
    achieved = engine.achieved_utility()
    return {
        "D": d,
        "achieved_utility": achieved,
        "util_opt": util_opt,
        "utility_floor": util_opt - gap,
        "violation": achieved < util_opt - gap,
    }
