"""Drift-plus-penalty ratio engine.

Every frame the engine observes the constraint queues Z, minimizes

    E[V y0 + sum_l Z_l y_l | Z] / E[T | Z]

with the bisection solver over a window of past initial-information
samples, acts on the realized information, and updates Z.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .core import (
    BoundsConfig,
    ConstraintTargets,
    MetricsLedger,
    QueueBank,
    lyapunov_value,
    ratio_estimates,
    update_z,
)
from .errors import CapabilityError, ConfigurationError, InvariantViolation
from .ratio import BisectionConfig, FractionalInstance, bisect, ratio_bracket
from .scenario import Scenario

# Relative slack for invariants that hold exactly in real arithmetic but are
# evaluated from separately accumulated floating-point sums.
ROUNDING_SLACK = 1e-9


@dataclass(frozen=True)
class DppConfig:
    v: float
    frames: int = 1
    seed: int = 0
    sample_window: int = 1
    c_approx: float = 0.0

    def __post_init__(self):
        if self.v < 0:
            raise ConfigurationError("V must be non-negative")
        if self.sample_window < 1:
            raise ConfigurationError("sample window W must be >= 1")
        if self.frames < 1:
            raise ConfigurationError("frames must be >= 1")
        if self.c_approx < 0:
            raise ConfigurationError("C must be non-negative")


def _corner_max_sq(coeffs_and_ranges):
    """Max of (sum_i k_i * v_i)^2 over the box v_i in [lo_i, hi_i]."""
    best = 0.0
    for corner in itertools.product(*[(lo, hi) for _, (lo, hi) in coeffs_and_ranges]):
        s = sum(k * v for (k, _), v in zip(coeffs_and_ranges, corner))
        best = max(best, s * s)
    return best


def drift_constant_b(bounds: BoundsConfig, targets: ConstraintTargets) -> float:
    """Envelope for B >= 1/2 sum_l E[(y_l - c_l T)^2] from declared bounds."""
    if len(targets) == 0:
        return 0.0
    if bounds.y_min is None:
        raise CapabilityError("computing B needs y_min/y_max bounds for the constraints")
    total = 0.0
    for l, c in enumerate(targets.targets):
        total += _corner_max_sq(
            [(1.0, (bounds.y_min[l], bounds.y_max[l])), (-c, (bounds.t_min, bounds.t_max))]
        )
    return 0.5 * total


@dataclass(frozen=True)
class DiagnosticBounds:
    b_const: float
    f1: float
    f2: float
    ratio_opt_hint: float | None = None

    def __post_init__(self):
        if self.b_const < 0:
            raise ConfigurationError("B must be non-negative")

    @classmethod
    def from_bounds(cls, bounds, targets, c_approx=0.0, ratio_opt_hint=None):
        b = drift_constant_b(bounds, targets)
        f1 = 2.0 * (b + bounds.t_max * c_approx)
        # Without a hint, ratio_opt is replaced by its largest possible value.
        ratio = ratio_opt_hint
        if ratio is None:
            ratio = max(bounds.y0_max / bounds.t_min, bounds.y0_max / bounds.t_max)
        f2 = 2.0 * (bounds.t_max * ratio - bounds.y0_min)
        return cls(b, f1, f2, ratio_opt_hint)


def linear_range(weights, lo, hi) -> tuple[float, float]:
    """Range of sum_i w_i v_i over the box lo <= v <= hi."""
    w = np.asarray(weights, dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    return (
        float(np.sum(np.minimum(w * lo, w * hi))),
        float(np.sum(np.maximum(w * lo, w * hi))),
    )


def default_bracket(scenario, wy, wx) -> tuple[float, float]:
    """Bisection bracket for the ratio with numerator weights (wy, wx) on (y, x)."""
    custom = scenario.theta_bracket(wy, wx)
    if custom is not None:
        return custom
    b = scenario.bounds
    if b.y_min is None and np.any(np.asarray(wy[1:]) != 0):
        # No penalty bounds declared: start small and rely on bracket repair.
        return -1.0, 1.0
    y_lo = np.concatenate([[b.y0_min], b.y_min if b.y_min is not None else np.zeros(len(wy) - 1)])
    y_hi = np.concatenate([[b.y0_max], b.y_max if b.y_max is not None else np.zeros(len(wy) - 1)])
    a_lo, a_hi = linear_range(np.concatenate([wy, wx]),
                              np.concatenate([y_lo, b.x_min]),
                              np.concatenate([y_hi, b.x_max]))
    return ratio_bracket(a_lo, a_hi, b.t_min, b.t_max)


def make_bisection_config(lo, hi, overrides: dict | None = None) -> BisectionConfig:
    overrides = dict(overrides or {})
    tol = overrides.get("tolerance", 1e-3)
    if hi - lo < tol:
        hi = lo + tol
    return BisectionConfig(
        theta_lo=lo,
        theta_hi=hi,
        tolerance=tol,
        max_expansions=overrides.get("max_expansions", 32),
        max_iterations=overrides.get("max_iterations", 200),
    )


def linear_ratio_instance(scenario, samples, wy, wx) -> FractionalInstance:
    """Ratio with numerator sum wy*y + wx*x and denominator T over the samples."""

    solve = scenario.prepare_linear(wy, wx)

    def per_eta_inf(eta, theta):
        return solve(eta, -theta)

    return FractionalInstance.sampled(
        samples, per_eta_inf, scenario.bounds.t_min, scenario.bounds.t_max
    )


def dpp_ratio_objective(scenario, samples, z, v) -> FractionalInstance:
    """a = V y0 + sum_l z_l y_l, b = T, with per-eta infima from the scenario."""
    if type(scenario).minimize_linear is Scenario.minimize_linear:
        raise CapabilityError(f"{scenario.name} has no conditional evaluator")
    wy = np.concatenate([[float(v)], np.asarray(z, dtype=float)])
    wx = np.zeros(scenario.num_attributes)
    return linear_ratio_instance(scenario, samples, wy, wx)


@dataclass
class Checkpoint:
    frame: int
    z: np.ndarray
    z_over_r: np.ndarray
    constraint_ratios: np.ndarray
    objective_ratio: float
    violations: list
    g_over_r: np.ndarray | None = None


def queue_checkpoint(r, z, sum_y, sum_t, c, t_min) -> Checkpoint:
    """Evaluate the constraint-violation bound and telescoping law after r frames.

    ``sum_y`` includes the objective entry at index 0.  Both laws assume the
    queues started at zero.
    """
    cons = sum_y[1:] / sum_t
    violations = []
    for l in range(z.size):
        rhs = c[l] + z[l] / (r * t_min)
        if cons[l] > rhs + ROUNDING_SLACK * (1.0 + abs(rhs)):
            violations.append(f"constraint_bound[{l + 1}]: {cons[l]} > {rhs}")
        net = sum_y[l + 1] - c[l] * sum_t
        if z[l] < net - ROUNDING_SLACK * (1.0 + abs(net)):
            violations.append(f"telescoping[{l + 1}]: {z[l]} < {net}")
    return Checkpoint(r, z, z / r, cons, float(sum_y[0] / sum_t), violations)


class FrameEngine:
    """Shared state and run loop for the frame-based engines."""

    algorithm = "base"

    def __init__(self, scenario, v: float, seed: int = 0, rng=None, log: bool = False,
                 num_g: int = 0):
        self.scenario = scenario
        self.v = float(v)
        self.rng = rng if rng is not None else np.random.default_rng(seed)
        self.bank = QueueBank.zeros(scenario.targets, num_g)
        self.ledger = MetricsLedger(
            scenario.num_constraints,
            scenario.num_attributes,
            per_frame_log=[] if log else None,
        )
        self.frame = 0
        self.peak_z = np.zeros(scenario.num_constraints)
        self.checkpoints: list[Checkpoint] = []
        self.telescoping_violations = 0

    def run_frame(self):
        raise NotImplementedError

    def _advance(self, outcome, diagnostics, extra_update=None):
        """Record the outcome, update Z (and anything else), return the outcome."""
        z_before = self.bank.z
        self.ledger.record(outcome, snapshot=self.bank, diagnostics=diagnostics)
        new_bank = update_z(self.bank, outcome)
        step = outcome.penalties[1:] - self.bank.targets.targets * outcome.frame_length
        if np.any(new_bank.z - z_before < step - ROUNDING_SLACK * (1.0 + z_before)):
            self.telescoping_violations += 1
        if extra_update is not None:
            new_bank = extra_update(new_bank)
        self.bank = new_bank
        self.peak_z = np.maximum(self.peak_z, new_bank.z)
        self.frame += 1
        return outcome

    def checkpoint(self) -> Checkpoint:
        """Check the queue-based constraint bound at the current frame count."""
        cp = queue_checkpoint(self.frame, self.bank.z.copy(), self.ledger.sum_y.copy(),
                              self.ledger.sum_t, self.bank.targets.targets,
                              self.scenario.bounds.t_min)
        self.checkpoints.append(cp)
        return cp

    def run(self, frames: int, checkpoints=(), strict: bool = False):
        """Run ``frames`` more frames, checking invariants at the given frame counts."""
        marks = set(int(c) for c in checkpoints)
        for _ in range(frames):
            self.run_frame()
            if self.frame in marks:
                cp = self.checkpoint()
                if strict and cp.violations:
                    raise InvariantViolation(cp.violations[0].split(":")[0], cp.violations[0])
        return self


class DppEngine(FrameEngine):
    """Drift-plus-penalty ratio algorithm with sampled bisection."""

    algorithm = "dpp-ratio"

    def __init__(self, scenario, config: DppConfig, bisection: dict | None = None,
                 rng=None, log: bool = False):
        super().__init__(scenario, config.v, config.seed, rng, log)
        self.config = config
        self.bisection = dict(bisection or {})
        self.buffer = deque(maxlen=config.sample_window)

    def current_samples(self, eta):
        samples = list(self.buffer)
        if len(samples) < self.config.sample_window:
            samples.append(eta)
        return samples

    def run_frame(self):
        sc = self.scenario
        eta = sc.sample_eta(self.rng)
        samples = self.current_samples(eta)
        z = self.bank.z
        wy = np.concatenate([[self.v], z])
        wx = np.zeros(sc.num_attributes)
        instance = dpp_ratio_objective(sc, samples, z, self.v)
        lo, hi = default_bracket(sc, wy, wx)
        result = bisect(instance, make_bisection_config(lo, hi, self.bisection))
        theta = result.theta_star
        value, action = sc.minimize_linear(eta, wy, wx, -theta)
        outcome = sc.realize(eta, action, self.rng, self.frame)
        diag = {
            "theta_hat": theta,
            "iterations": result.iterations,
            "expansions": result.expansions,
            "val": result.final_value,
            "action": action,
            "objective": value,
        }
        self._advance(outcome, diag)
        self.buffer.append(eta)
        return outcome, diag


def ratio_performance_bounds(diag: DiagnosticBounds, cfg: DppConfig, ledger: MetricsLedger,
                    bank: QueueBank, t_min: float, initial_lyapunov: float = 0.0) -> dict:
    """Right-hand sides of the objective and constraint performance bounds.

    ``T_bar`` is the measured frame-average length.  With V = 0 the objective
    bounds are infinite.
    """
    r = ledger.frames
    obj, cons, _ = ratio_estimates(ledger)
    t_bar = ledger.sum_t / r
    v = cfg.v
    report = {
        "frames": r,
        "T_bar": t_bar,
        "objective_ratio": obj,
        "constraint_ratios": cons.tolist(),
        "lyapunov": lyapunov_value(bank),
    }
    if v > 0 and diag.ratio_opt_hint is not None:
        finite_r = (diag.ratio_opt_hint + (diag.b_const / t_bar + cfg.c_approx) / v
                    + initial_lyapunov / (v * r * t_bar))
        limit = diag.ratio_opt_hint + (diag.b_const / t_min + cfg.c_approx) / v
        report["objective_bound"] = finite_r
        report["objective_bound_limit"] = limit
        report["objective_violation"] = obj > finite_r
    else:
        report["objective_bound"] = math.inf
        report["objective_bound_limit"] = math.inf
        report["objective_violation"] = False
    spread = math.sqrt(max(diag.f1 + v * diag.f2, 0.0) / r
                       + 2.0 * initial_lyapunov / r ** 2) / t_min
    c = bank.targets.targets
    report["constraint_bounds"] = (c + spread).tolist()
    report["constraint_violations"] = [bool(x > b) for x, b in zip(cons, c + spread)]
    return report
