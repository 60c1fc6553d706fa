"""Exact optima over mixtures of a few pure policies.

Used as ground truth for the engines.  A mixture ``p`` on the simplex is
feasible when ``sum_i p_i (y_l,i - c_l t_i) <= 0`` for every constraint.
Linear problems are solved by enumerating the vertices of the feasible
polytope; ratio problems add an outer bisection on theta.  When there are
too many constraints for vertex enumeration, and for the concave utility
problem, a dense simplex grid is searched instead.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from math import comb

import numpy as np

from .core import ConstraintTargets
from .errors import ConfigurationError, DomainError, InfeasibleError
from .ratio import BisectionConfig, FractionalInstance, bisect, ratio_bracket

MAX_POLICIES = 6
MAX_GRID_POINTS = 1_000_000
MAX_VERTEX_CONSTRAINTS = 3
FEAS_TOL = 1e-12
ORACLE_TOL = 1e-12


@dataclass(frozen=True)
class FinitePolicySystem:
    """Expected outcomes of each pure policy.

    Args:
        y: shape ``(n, L + 1)``, objective in column 0.
        t: shape ``(n,)``, all positive.
        targets: constraint targets, length L.
        x: shape ``(n, M)`` attributes, optional.
    """

    y: np.ndarray
    t: np.ndarray
    targets: ConstraintTargets
    x: np.ndarray | None = None

    def __post_init__(self):
        y = np.atleast_2d(np.asarray(self.y, dtype=float))
        t = np.asarray(self.t, dtype=float).reshape(-1)
        targets = self.targets
        if not isinstance(targets, ConstraintTargets):
            targets = ConstraintTargets(targets)
        n = t.size
        if n == 0:
            raise DomainError("need at least one pure policy")
        if n > MAX_POLICIES:
            raise ConfigurationError(f"oracle supports at most {MAX_POLICIES} policies")
        if y.shape != (n, len(targets) + 1):
            raise ConfigurationError("y must have shape (n, L + 1)")
        if np.any(t <= 0):
            raise DomainError("expected frame lengths must be positive")
        x = np.zeros((n, 0)) if self.x is None else np.asarray(self.x, dtype=float).reshape(n, -1)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "targets", targets)

    @classmethod
    def from_scenario(cls, scenario):
        return cls(scenario.y, scenario.t, scenario.targets, scenario.x)

    @property
    def num_policies(self) -> int:
        return self.t.size

    @property
    def slack_matrix(self) -> np.ndarray:
        """Row l, column i: y_l,i - c_l t_i."""
        return (self.y[:, 1:] - self.t[:, None] * self.targets.targets[None, :]).T

    def feasible(self, p, tol: float = FEAS_TOL) -> np.ndarray:
        """Feasibility of mixture rows ``p`` (shape (k, n) or (n,))."""
        p = np.atleast_2d(p)
        if self.slack_matrix.shape[0] == 0:
            return np.ones(p.shape[0], dtype=bool)
        return np.all(p @ self.slack_matrix.T <= tol, axis=1)


def simplex_grid(n: int, grid: int) -> np.ndarray:
    """All mixtures with coordinates in multiples of 1/grid, shape (k, n)."""
    if grid < 1:
        raise ConfigurationError("grid must be a positive integer")
    count = comb(grid + n - 1, n - 1)
    if count > MAX_GRID_POINTS:
        raise ConfigurationError(f"simplex grid of {count} points exceeds {MAX_GRID_POINTS}")
    if n == 1:
        return np.ones((1, 1))
    # Stars and bars: bar positions -> composition of grid into n parts.
    bars = np.array(list(itertools.combinations(range(grid + n - 1), n - 1)), dtype=np.int64)
    edges = np.concatenate(
        [np.full((bars.shape[0], 1), -1), bars, np.full((bars.shape[0], 1), grid + n - 1)],
        axis=1,
    )
    return np.diff(edges, axis=1).astype(float) / grid - 1.0 / grid


def _vertices(sys: FinitePolicySystem) -> np.ndarray:
    """Vertices of {p in simplex : slack p <= 0}, shape (k, n)."""
    a = sys.slack_matrix
    n, num_l = sys.num_policies, a.shape[0]
    found = []
    for k in range(1, min(n, num_l + 1) + 1):
        for support in itertools.combinations(range(n), k):
            for active in itertools.combinations(range(num_l), k - 1):
                m = np.vstack([np.ones((1, k)), a[np.ix_(active, support)]])
                if abs(np.linalg.det(m)) < 1e-14:
                    continue
                rhs = np.zeros(k)
                rhs[0] = 1.0
                ps = np.linalg.solve(m, rhs)
                if np.any(ps < -FEAS_TOL):
                    continue
                p = np.zeros(n)
                p[list(support)] = np.maximum(ps, 0.0)
                p /= p.sum()
                if sys.feasible(p, 1e-10)[0]:
                    found.append(p)
    return np.array(found).reshape(-1, n)


def _infeasible(sys: FinitePolicySystem, grid: int, method: str):
    probe = simplex_grid(sys.num_policies, min(grid, 200))
    worst = (probe @ sys.slack_matrix.T).max(axis=1) if sys.slack_matrix.size else np.zeros(1)
    report = {
        "method": method,
        "policies": sys.num_policies,
        "targets": sys.targets.targets.tolist(),
        "smallest_max_violation_on_probe_grid": float(worst.min()),
    }
    raise InfeasibleError("no mixture satisfies the constraints", report)


def feasible_candidates(sys: FinitePolicySystem, grid: int = 1000):
    """Mixtures to search over and the method used."""
    if sys.targets.targets.size <= MAX_VERTEX_CONSTRAINTS:
        pts, method = _vertices(sys), "vertex"
    else:
        pts = simplex_grid(sys.num_policies, grid)
        pts, method = pts[sys.feasible(pts)], "grid"
    if pts.shape[0] == 0:
        _infeasible(sys, grid, method)
    return pts, method


def oracle_ratio_opt(sys: FinitePolicySystem, grid: int = 1000) -> float:
    """min (sum p y0)/(sum p t) over feasible mixtures."""
    pts, _ = feasible_candidates(sys, grid)
    a = pts @ sys.y[:, 0]
    b = pts @ sys.t
    instance = FractionalInstance.from_points(list(zip(a, b)))
    lo, hi = ratio_bracket(float(a.min()), float(a.max()), float(b.min()), float(b.max()))
    if hi - lo < ORACLE_TOL:
        hi = lo + ORACLE_TOL
    width = max(1.0, abs(lo), abs(hi))
    result = bisect(instance, BisectionConfig(lo, hi, tolerance=ORACLE_TOL * width,
                                              max_iterations=400))
    return result.theta_star


def oracle_y0_opt(sys: FinitePolicySystem, grid: int = 1000) -> float:
    """min sum p y0 over feasible mixtures."""
    pts, _ = feasible_candidates(sys, grid)
    return float((pts @ sys.y[:, 0]).min())


def oracle_util_opt(sys: FinitePolicySystem, util, grid: int = 10_000) -> float:
    """max util((sum p x)/(sum p t)) over a simplex grid of feasible mixtures."""
    if sys.x.shape[1] == 0:
        raise DomainError("utility oracle needs at least one attribute")
    pts = simplex_grid(sys.num_policies, grid)
    pts = pts[sys.feasible(pts)]
    if pts.shape[0] == 0:
        _infeasible(sys, grid, "grid")
    ratios = (pts @ sys.x) / (pts @ sys.t)[:, None]
    best = -math.inf
    for row in ratios:
        best = max(best, util(row))
    return best
