"""Minimizing a ratio of expectations E[a] / E[b] by bisection on theta.

For b > 0 the function ``theta -> inf E[a - theta * b]`` is non-increasing
and crosses zero exactly at the optimal ratio, so the ratio problem reduces
to a sequence of plain expectation minimizations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable, Sequence

from .errors import (
    BracketError,
    ConfigurationError,
    ConvergenceError,
    DomainError,
    SamplingError,
)


@dataclass(frozen=True)
class FractionalInstance:
    """``evaluate_inf(theta)`` returns ``(inf E[a - theta b], argmin action)``."""

    evaluate_inf: Callable[[float], tuple[float, Any]]
    b_min: float
    b_max: float

    def __post_init__(self):
        if not 0 < self.b_min <= self.b_max:
            raise ConfigurationError(f"need 0 < b_min <= b_max, got {self.b_min}, {self.b_max}")

    @classmethod
    def from_points(cls, points: Sequence[tuple[float, float]]) -> "FractionalInstance":
        """Instance over a finite set of pure policies given as (E a, E b) pairs."""
        pts = [(float(a), float(b)) for a, b in points]
        if not pts:
            raise DomainError("need at least one policy")
        if any(b <= 0 for _, b in pts):
            raise DomainError("denominators must be positive")

        def evaluate_inf(theta):
            best, best_i = math.inf, -1
            for i, (a, b) in enumerate(pts):
                v = a - theta * b
                if v < best:
                    best, best_i = v, i
            return best, best_i

        bs = [b for _, b in pts]
        return cls(evaluate_inf, min(bs), max(bs))

    @classmethod
    def sampled(cls, samples, per_eta_inf, b_min, b_max) -> "FractionalInstance":
        """Instance whose value is the sample average of per-eta infima."""
        samples = list(samples)

        def evaluate_inf(theta):
            return sampled_val(theta, samples, per_eta_inf)

        return cls(evaluate_inf, b_min, b_max)


@dataclass(frozen=True)
class BisectionConfig:
    theta_lo: float
    theta_hi: float
    tolerance: float = 1e-3
    max_expansions: int = 32
    max_iterations: int = 200

    def __post_init__(self):
        if not self.theta_lo < self.theta_hi:
            raise ConfigurationError(
                f"need theta_lo < theta_hi, got {self.theta_lo}, {self.theta_hi}"
            )
        if not self.tolerance > 0:
            raise ConfigurationError("tolerance must be positive")
        if self.max_expansions < 0 or self.max_iterations < 1:
            raise ConfigurationError("max_expansions >= 0 and max_iterations >= 1 required")


@dataclass(frozen=True)
class BisectionResult:
    theta_star: float
    final_value: float
    iterations: int
    argmin_action: Any
    bracket_valid: bool
    theta_lo: float
    theta_hi: float
    expansions: int = 0


def ratio_bracket(a_lo: float, a_hi: float, b_min: float, b_max: float) -> tuple[float, float]:
    """Interval containing E[a]/E[b] whenever a_lo <= E[a] <= a_hi and b_min <= E[b] <= b_max."""
    lo = min(a_lo / b_min, a_lo / b_max)
    hi = max(a_hi / b_min, a_hi / b_max)
    return lo, hi


def bisect(instance: FractionalInstance, cfg: BisectionConfig) -> BisectionResult:
    """Locate the root of ``instance.evaluate_inf`` to within ``cfg.tolerance``.

    The returned ``theta_star`` is the upper end of the final bracket, where
    the value is known to be <= 0, so it never undershoots the optimal ratio.
    A value of exactly zero is treated as "theta is at or above the root".

    Raises:
        BracketError: the bracket is still invalid after ``max_expansions``
            outward doublings.
        ConvergenceError: more than ``max_iterations`` halvings were needed.
    """
    lo, hi = cfg.theta_lo, cfg.theta_hi
    v_lo, _ = instance.evaluate_inf(lo)
    v_hi, a_hi = instance.evaluate_inf(hi)
    expansions = 0
    while v_lo < 0 or v_hi > 0:
        if expansions >= cfg.max_expansions:
            raise BracketError(
                f"bracket [{lo}, {hi}] invalid after {expansions} expansions "
                f"(val(lo)={v_lo}, val(hi)={v_hi})"
            )
        width = hi - lo
        if v_lo < 0:
            lo -= width
            v_lo, _ = instance.evaluate_inf(lo)
        else:
            hi += width
            v_hi, a_hi = instance.evaluate_inf(hi)
        expansions += 1

    iterations = 0
    while hi - lo >= cfg.tolerance:
        if iterations >= cfg.max_iterations:
            raise ConvergenceError(
                f"bracket width {hi - lo} still >= {cfg.tolerance} after {iterations} iterations"
            )
        mid = 0.5 * (lo + hi)
        v, a = instance.evaluate_inf(mid)
        iterations += 1
        if v > 0:
            lo = mid
        else:
            hi, v_hi, a_hi = mid, v, a
    return BisectionResult(
        theta_star=hi,
        final_value=v_hi,
        iterations=iterations,
        argmin_action=a_hi,
        bracket_valid=True,
        theta_lo=lo,
        theta_hi=hi,
        expansions=expansions,
    )


def sampled_val(theta: float, samples, per_eta_inf):
    """Average of per-sample infima of E[a - theta b | eta_w].

    Summation runs in sample order so results are bit-reproducible.
    """
    if len(samples) == 0:
        raise SamplingError("val(theta) needs at least one sample")
    total = 0.0
    actions = []
    for eta in samples:
        v, a = per_eta_inf(eta, theta)
        total += v
        actions.append(a)
    return total / len(samples), actions


def pure_policy_ratio_opt(pure_points) -> float:
    """Smallest E[a]/E[b] over a finite set of pure policies."""
    pts = list(pure_points)
    if not pts:
        raise DomainError("need at least one policy")
    best = math.inf
    for a, b in pts:
        if b <= 0:
            raise DomainError(f"denominator must be positive, got {b}")
        best = min(best, a / b)
    return best
