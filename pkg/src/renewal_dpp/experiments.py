"""Single runs and parameter sweeps, with their file outputs."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .alt import AltEngine
from .config import RunConfig, build_scenario
from .dpp import DppConfig, DppEngine
from .errors import CapabilityError, ConfigurationError
from .tasknet import (
    LOG_COLUMNS,
    TaskNetwork,
    deterministic_bound_check,
    run_task_network,
)
from .utility import UTILITIES, UtilityEngine

SWEEP_AXES = ("v", "w", "algorithm")


@dataclass
class RunResult:
    summary: dict
    header: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    wall_clock: float = 0.0

    @property
    def violations(self) -> list[str]:
        return self.summary["violations"]

    @property
    def ok(self) -> bool:
        return not self.violations


def _floats(a):
    return [float(v) for v in np.asarray(a).reshape(-1)]


def _checkpoint_record(cp) -> dict:
    rec = {"frame": cp.frame, "Z_over_R": _floats(cp.z_over_r),
           "constraint_ratios": _floats(cp.constraint_ratios), "violations": list(cp.violations)}
    if cp.g_over_r is not None:
        rec["G_over_R"] = _floats(cp.g_over_r)
    return rec


def _run_task_network(cfg: RunConfig, scenario: TaskNetwork, marks):
    if cfg.algorithm == "utility":
        raise CapabilityError("the task network has no attributes for the utility engine")
    want_log = cfg.verbosity >= 1
    run = run_task_network(scenario.cfg, cfg.algorithm, cfg.frames, cfg.v, cfg.w, cfg.seed,
                           bisection=cfg.bisection, checkpoints=marks, log=want_log,
                           decay=cfg.decay)
    violations = [v for cp in run.checkpoints for v in cp.violations]
    _, bound, enabled = deterministic_bound_check(scenario.cfg, cfg.v)
    if enabled:
        if np.any(run.peak_z > bound):
            violations.append(f"deterministic-queue-bound: peak Z {run.peak_z.max()} > {bound}")
        for cp in run.checkpoints:
            limit = scenario.cfg.constraint + bound / cp.frame
            if np.any(cp.constraint_ratios > limit):
                violations.append(f"deterministic-constraint-bound: frame {cp.frame}")
    summary = {
        "utility": float(run.utility),
        "T_bar": float(run.t_bar),
        "idle_bar": float(run.idle_bar),
        "y0_bar": float(run.y0_bar),
        "objective_ratio": float(run.sum_y[0] / run.sum_t),
        "constraint_ratios": _floats(run.constraint_ratios),
        "peak_Z": _floats(run.peak_z),
        "final_Z": _floats(run.z),
        "theta_oscillation": run.theta_oscillation,
        "bisection_iterations_max": run.max_iterations,
        "bisection_iterations_mean": run.total_iterations / run.frames,
        "deterministic_bound": bound if enabled else None,
        "checkpoints": [_checkpoint_record(cp) for cp in run.checkpoints],
        "violations": violations,
    }
    rows = run.log.tolist() if want_log else []
    for row in rows:
        for k in (0, 2):  # frame and device are integers
            row[k] = int(row[k])
    return summary, list(LOG_COLUMNS), rows


def _make_engine(cfg: RunConfig, scenario, want_log: bool):
    rng = np.random.default_rng(cfg.seed)
    if cfg.algorithm == "dpp-ratio":
        return DppEngine(scenario, DppConfig(cfg.v, cfg.frames, cfg.seed, cfg.w),
                         cfg.bisection, rng=rng, log=want_log)
    if cfg.algorithm == "utility":
        if cfg.utility not in UTILITIES:
            raise ConfigurationError(f"unknown utility {cfg.utility!r}")
        util = UTILITIES[cfg.utility](scenario.num_attributes)
        return UtilityEngine(scenario, DppConfig(cfg.v, cfg.frames, cfg.seed, cfg.w), util,
                             cfg.bisection, rng=rng, log=want_log)
    return AltEngine(scenario, cfg.v, cfg.algorithm, rng=rng, log=want_log, decay=cfg.decay)


def _run_generic(cfg: RunConfig, scenario, marks):
    want_log = cfg.verbosity >= 1
    engine = _make_engine(cfg, scenario, want_log)
    engine.run(cfg.frames, checkpoints=marks)
    led = engine.ledger
    obj = float(led.sum_y[0] / led.sum_t)
    summary = {
        "utility": engine.achieved_utility() if cfg.algorithm == "utility" else -obj,
        "T_bar": led.sum_t / led.frames,
        "idle_bar": None,
        "y0_bar": float(led.sum_y[0]) / led.frames,
        "objective_ratio": obj,
        "constraint_ratios": _floats(led.sum_y[1:] / led.sum_t),
        "peak_Z": _floats(engine.peak_z),
        "final_Z": _floats(engine.bank.z),
        "theta_oscillation": engine.oscillation() if cfg.algorithm == "alt-timeavg" else None,
        "checkpoints": [_checkpoint_record(cp) for cp in engine.checkpoints],
        "violations": [v for cp in engine.checkpoints for v in cp.violations],
    }
    if led.sum_x.size:
        summary["attribute_ratios"] = _floats(led.sum_x / led.sum_t)
    if engine.telescoping_violations:
        summary["violations"].append(
            f"telescoping: {engine.telescoping_violations} frames broke the one-sided law")
    if cfg.algorithm == "utility":
        summary["peak_G"] = _floats(engine.peak_g)
    header, rows = _generic_rows(engine, scenario) if want_log else ([], [])
    return summary, header, rows


def _generic_rows(engine, scenario):
    nl, nm = scenario.num_constraints, scenario.num_attributes
    util = engine.algorithm == "utility"
    header = (["frame", "theta_hat", "action", "T"] + [f"y{k}" for k in range(nl + 1)]
              + [f"x{m}" for m in range(1, nm + 1)] + [f"Z{l}" for l in range(1, nl + 1)])
    if util:
        header += [f"gamma{m}" for m in range(1, nm + 1)] + [f"G{m}" for m in range(1, nm + 1)]
    rows = []
    for frame, outcome, bank, diag in engine.ledger.per_frame_log:
        theta = diag.get("theta_hat", diag.get("theta"))
        row = [frame, theta, diag["action"], outcome.frame_length]
        row += _floats(outcome.penalties) + _floats(outcome.attributes) + _floats(bank.z)
        if util:
            row += _floats(diag["gamma"]) + _floats(bank.g)
        rows.append(row)
    return header, rows


def execute(cfg: RunConfig) -> RunResult:
    """Run one configuration; nothing is written to disk."""
    scenario = build_scenario(cfg.scenario)
    marks = cfg.checkpoint_frames()
    start = time.perf_counter()
    if isinstance(scenario, TaskNetwork):
        summary, header, rows = _run_task_network(cfg, scenario, marks)
    else:
        summary, header, rows = _run_generic(cfg, scenario, marks)
    elapsed = time.perf_counter() - start
    summary.update({"frames": cfg.frames, "seed": cfg.seed, "algorithm": cfg.algorithm,
                    "v": cfg.v, "w": cfg.w, "scenario": cfg.scenario["name"]})
    return RunResult(summary, header, rows, elapsed)


def _atomic_write(path, text: str):
    folder = os.path.dirname(os.path.abspath(path))
    os.makedirs(folder, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def summary_json(summary: dict) -> str:
    return json.dumps(summary, indent=2, sort_keys=True) + "\n"


def write_outputs(result: RunResult, folder: str):
    """summary.json, optional frames.csv, and timing.json (kept apart so the
    summary stays byte-identical across reruns)."""
    _atomic_write(os.path.join(folder, "summary.json"), summary_json(result.summary))
    if result.header:
        _atomic_write(os.path.join(folder, "frames.csv"), _csv_text(result.header, result.rows))
    _atomic_write(os.path.join(folder, "timing.json"),
                  json.dumps({"wall_clock_seconds": result.wall_clock}) + "\n")


def derived_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1, dtype=np.uint64)[0])


def _coerce(axis: str, value):
    if axis == "v":
        return float(value)
    if axis == "w":
        return int(value)
    return str(value)


SWEEP_COLUMNS = ["index", "axis", "value", "seed", "utility", "T_bar", "idle_bar", "y0_bar",
                 "objective_ratio", "max_constraint_ratio", "max_peak_Z", "ok"]


def sweep(base: RunConfig, axis: str, values, workers: int | None = None,
          folder: str | None = None):
    """One run per value, seeds derived from (base seed, index); returns table rows."""
    if axis not in SWEEP_AXES:
        raise ConfigurationError(f"sweep axis must be one of {SWEEP_AXES}")
    values = list(values)
    if not values:
        raise ConfigurationError("sweep needs at least one value")
    configs = []
    for i, raw in enumerate(values):
        cfg = base.with_overrides(**{axis: _coerce(axis, raw)}, seed=derived_seed(base.seed, i))
        cfg.output = None
        configs.append(cfg)

    workers = workers or min(len(configs), os.cpu_count() or 1)
    results: list = [None] * len(configs)
    error = None
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(execute, c) for c in configs]
        for i, fut in enumerate(futures):
            try:
                results[i] = fut.result()
            except Exception as exc:  # keep finished rows, re-raise after flushing
                error = error or exc
    rows = []
    for i, (cfg, res) in enumerate(zip(configs, results)):
        if res is None:
            continue
        s = res.summary
        rows.append([i, axis, getattr(cfg, axis), cfg.seed, s["utility"], s["T_bar"],
                     s["idle_bar"], s["y0_bar"], s["objective_ratio"],
                     max(s["constraint_ratios"], default=0.0), max(s["peak_Z"], default=0.0),
                     res.ok])
        if folder:
            write_outputs(res, os.path.join(folder, f"run-{i:03d}"))
    if folder:
        _atomic_write(os.path.join(folder, "sweep.csv"), _csv_text(SWEEP_COLUMNS, rows))
    if error is not None:
        raise error
    return rows
