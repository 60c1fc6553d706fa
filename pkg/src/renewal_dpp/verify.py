"""Invariant suite run by ``renewal-dpp verify``.

Each check returns ``(ok, detail)``.  ``quick`` keeps every simulation at or
below 10^5 frames; ``full`` uses the long task-network runs.
"""

from __future__ import annotations

import math
import time

import numpy as np

from .alt import AltEngine
from .config import BUILTIN_FINITE, build_scenario
from .dpp import DppConfig, DppEngine, drift_constant_b
from .errors import InfeasibleError
from .oracle import FinitePolicySystem, oracle_ratio_opt, oracle_util_opt, oracle_y0_opt
from .ratio import BisectionConfig, FractionalInstance, bisect, pure_policy_ratio_opt
from .tasknet import TaskNetConfig, deterministic_bound_check, run_task_network
from .utility import (
    UtilityEngine,
    drift_constant_d,
    jensen_gap,
    log_utility,
    min_linear_utility,
    neg_square_utility,
)

SCALES = {
    "quick": {"instances": 200, "jensen": 1000, "tasknet": 10**5, "finite": 10**5,
              "utility": 20_000},
    "full": {"instances": 1000, "jensen": 10_000, "tasknet": 10**6, "finite": 10**5,
             "utility": 10**5},
}


def random_points(rng, n=None):
    n = n or int(rng.integers(1, 7))
    a = rng.uniform(-5, 5, n)
    b = rng.uniform(0.5, 3, n)
    return list(zip(a, b))


def check_bisection(scale, rng):
    bad = []
    for k in range(scale["instances"]):
        pts = random_points(rng)
        inst = FractionalInstance.from_points(pts)
        exact = pure_policy_ratio_opt(pts)
        res = bisect(inst, BisectionConfig(-1.0, 1.0, tolerance=1e-9))
        v_at = inst.evaluate_inf(res.theta_star)[0]
        if abs(res.theta_star - exact) > 1e-6 or v_at > 0:
            bad.append(k)
        grid = np.linspace(exact - 3, exact + 3, 13)
        vals = [inst.evaluate_inf(t)[0] for t in grid]
        if any(v2 > v1 + 1e-12 for v1, v2 in zip(vals, vals[1:])):
            bad.append(k)
    return not bad, f"{scale['instances']} instances, failures {bad[:5]}"


def check_jensen(scale, rng):
    utils = [neg_square_utility(), log_utility(), min_linear_utility()]
    worst = -math.inf
    for k in range(scale["jensen"]):
        util = utils[k % 3]
        n = int(rng.integers(1, 20))
        t = rng.uniform(0.1, 5, n)
        g = rng.uniform(0, 3, n)
        lhs, rhs = jensen_gap(t, g, util)
        worst = max(worst, lhs - rhs)
    return worst <= 1e-12, f"max lhs - rhs = {worst:.3g}"


def check_oracles(scale, rng):
    ab = FinitePolicySystem(**BUILTIN_FINITE["ab"])
    r, y = oracle_ratio_opt(ab), oracle_y0_opt(ab)
    try:
        oracle_ratio_opt(FinitePolicySystem([[1, 1], [4, 1]], [1, 2], [0.1]))
        infeasible = False
    except InfeasibleError:
        infeasible = True
    ok = abs(r - 1.5) < 1e-6 and abs(y - 2.0) < 1e-9 and infeasible
    return ok, f"ratio_opt {r:.9f}, y0_opt {y:.9f}, infeasible reported {infeasible}"


def check_dpp_oracle(scale, rng):
    sc = build_scenario({"name": "ab"})
    v = 200.0
    eng = DppEngine(sc, DppConfig(v), rng=np.random.default_rng(1)).run(scale["finite"])
    obj = eng.ledger.sum_y[0] / eng.ledger.sum_t
    cons = eng.ledger.sum_y[1] / eng.ledger.sum_t
    b = drift_constant_b(sc.bounds, sc.targets)
    limit = 1.5 + b / (sc.bounds.t_min * v) + 0.02
    return obj <= limit and cons <= 0.51, f"ratio {obj:.5f} <= {limit:.5f}, constraint {cons:.5f}"


def check_alt_form_oracle(scale, rng):
    sc = build_scenario({"name": "ab"})
    v = 200.0
    eng = AltEngine(sc, v, "alt-form", rng=np.random.default_rng(2)).run(scale["finite"])
    y0 = eng.per_frame_y0()
    b = drift_constant_b(sc.bounds, sc.targets)
    limit = 2.0 + b / v + 0.02
    cons = eng.ledger.sum_y[1] / eng.ledger.sum_t
    return y0 <= limit and cons <= 0.51, f"per-frame y0 {y0:.5f} <= {limit:.5f}, constraint {cons:.5f}"


def check_utility_oracle(scale, rng):
    points = BUILTIN_FINITE["utility-pair"]
    sc = build_scenario({"name": "utility-pair"})
    util = log_utility()
    opt = oracle_util_opt(FinitePolicySystem(**points), util, grid=30_000)
    v = 100.0
    eng = UtilityEngine(sc, DppConfig(v), util, rng=np.random.default_rng(3))
    eng.run(scale["utility"])
    got = eng.achieved_utility()
    floor = opt - drift_constant_d(sc.bounds, sc.targets) / (v * sc.bounds.t_min) - 0.02
    return got >= floor, f"utility {got:.5f} >= {floor:.5f} (optimum {opt:.5f})"


def check_tasknet_queues(scale, rng):
    frames = scale["tasknet"]
    marks = [10**k for k in range(3, 7) if 10**k <= frames]
    run = run_task_network(TaskNetConfig(), "dpp-ratio", frames, 100.0, 10, seed=1,
                           checkpoints=marks)
    bad = [v for cp in run.checkpoints for v in cp.violations]
    return not bad, f"utility {run.utility:.5f}, checkpoint violations {bad[:3]}"


def check_deterministic_bound(scale, rng):
    cfg = TaskNetConfig(i_max=11.0)
    _, bound, enabled = deterministic_bound_check(cfg, 100.0)
    frames = scale["tasknet"]
    marks = [10**k for k in range(1, 7) if 10**k <= frames]
    run = run_task_network(cfg, "dpp-ratio", frames, 100.0, 10, seed=2, checkpoints=marks)
    cons_ok = all(np.all(cp.constraint_ratios <= 0.25 + bound / cp.frame)
                  for cp in run.checkpoints)
    ok = enabled and bool(np.all(run.peak_z <= bound)) and cons_ok
    return ok, f"peak Z {run.peak_z.max():.3f} <= {bound}, idle-bar {run.idle_bar:.4f}"


CHECKS = {
    "bisection-properties": check_bisection,
    "jensen-variation": check_jensen,
    "oracle-values": check_oracles,
    "dpp-vs-oracle": check_dpp_oracle,
    "alt-form-vs-oracle": check_alt_form_oracle,
    "utility-vs-oracle": check_utility_oracle,
    "task-network-queue-laws": check_tasknet_queues,
    "deterministic-queue-bound": check_deterministic_bound,
}


def verify(scale: str = "quick", seed: int = 0, only=None, echo=print) -> bool:
    """Run the checks; returns True when all pass."""
    params = SCALES[scale]
    all_ok = True
    for name, fn in CHECKS.items():
        if only and name not in only:
            continue
        start = time.perf_counter()
        try:
            ok, detail = fn(params, np.random.default_rng([seed, len(name)]))
        except Exception as exc:  # report and keep going
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        all_ok &= bool(ok)
        echo(f"{'PASS' if ok else 'FAIL'} {name}: {detail} ({time.perf_counter() - start:.1f}s)")
    return all_ok
