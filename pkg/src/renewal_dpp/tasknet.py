"""Task-processing network: five wireless devices compete to report each task.

Each frame starts with a 0.5 time-unit control phase in which every device
spends 0.5 energy units.  The controller then sees, per device, the
information quality and the transmit time, picks one device to transmit
(spending ``p_tran * t_tran`` energy) and an idle period.  The objective is
quality per unit time subject to an average power target on every device.

The per-frame decisions have closed forms: the objective is linear in the
idle time, so idle is either 0 or ``i_max``, and the device is the argmin
of a per-device score.  :func:`run_task_network` is a compiled frame loop
that reproduces the generic engines exactly for this scenario.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from .core import BoundsConfig, ConstraintTargets, PolicyOutcome
from .dpp import Checkpoint, queue_checkpoint
from .errors import BracketError, ConfigurationError, ConvergenceError
from .scenario import Scenario

NUM_DEVICES = 5
CONTROL_TIME = 0.5
CONTROL_ENERGY = 0.5
T_TRAN_LO, T_TRAN_HI = 0.5, 2.5
QUAL_LEVELS = np.arange(1, NUM_DEVICES + 1, dtype=float)

MODES = {"dpp-ratio": 0, "alt-timeavg": 1, "alt-form": 2}

# Kernel error codes.
_OK, _BRACKET, _ITERATIONS = 0, 1, 2


@dataclass(frozen=True)
class TaskInfo:
    qual: np.ndarray
    t_tran: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.qual, dtype=float)
        t = np.asarray(self.t_tran, dtype=float)
        if q.shape != (NUM_DEVICES,) or t.shape != (NUM_DEVICES,):
            raise ConfigurationError("task info needs one entry per device")
        object.__setattr__(self, "qual", q)
        object.__setattr__(self, "t_tran", t)


@dataclass(frozen=True)
class TaskAction:
    device: int  # 1-based
    idle: float = 0.0


@dataclass(frozen=True)
class TaskNetConfig:
    p_tran: float = 1.0
    i_max: float = 5.0
    constraint: float = 0.25

    def __post_init__(self):
        if not self.p_tran > 0:
            raise ConfigurationError("p_tran must be positive")
        if self.i_max < 0:
            raise ConfigurationError("i_max must be non-negative")


def infos_from_draws(u: np.ndarray):
    """Map uniform draws of shape (n, 10) to (qual, t_tran) arrays of shape (n, 5)."""
    qual = u[:, :NUM_DEVICES] * QUAL_LEVELS
    t_tran = T_TRAN_LO + (T_TRAN_HI - T_TRAN_LO) * u[:, NUM_DEVICES:]
    return qual, t_tran


def sample_task(rng) -> TaskInfo:
    """Draw qual_1..qual_5 then t_tran_1..t_tran_5 from one generator."""
    qual, t_tran = infos_from_draws(rng.random((1, 2 * NUM_DEVICES)))
    return TaskInfo(qual[0], t_tran[0])


def evaluate(info: TaskInfo, action: TaskAction, cfg: TaskNetConfig,
             frame_index: int = 0) -> PolicyOutcome:
    d = action.device - 1
    if not 0 <= d < NUM_DEVICES or not 0 <= action.idle <= cfg.i_max:
        raise ConfigurationError(f"invalid action {action}")
    y = np.full(NUM_DEVICES + 1, CONTROL_ENERGY)
    y[0] = -info.qual[d]
    y[1 + d] = CONTROL_ENERGY + cfg.p_tran * info.t_tran[d]
    t = CONTROL_TIME + info.t_tran[d] + action.idle
    return PolicyOutcome(t, y, np.zeros(0), frame_index)


@numba.njit(cache=True, nogil=True)
def min_linear(qual, t_tran, wy, wt, p_tran, i_max):
    """Minimize wy . y + wt * T over (device, idle) for one task.

    Returns ``(value, device_index, idle)`` with a 0-based device index and
    lowest-index tie-breaking.
    """
    idle = 0.0 if wt >= 0.0 else i_max
    best = np.inf
    dev = -1
    for l in range(qual.shape[0]):
        s = -wy[0] * qual[l] + (wy[l + 1] * p_tran + wt) * t_tran[l]
        if s < best:
            best = s
            dev = l
    base = 0.0
    for k in range(qual.shape[0]):
        base += wy[k + 1] * CONTROL_ENERGY
    return best + base + wt * (CONTROL_TIME + idle), dev, idle


def _weights(z, v):
    wy = np.empty(NUM_DEVICES + 1)
    wy[0] = v
    wy[1:] = z
    return wy


def _dot(z, c):
    s = 0.0
    for zl, cl in zip(z, c):
        s += float(zl) * float(cl)
    return s


def best_action_dpp(info: TaskInfo, z, v, theta, cfg: TaskNetConfig) -> TaskAction:
    """Minimizer of V y0 + sum Z_l y_l - theta T for one task."""
    _, dev, idle = min_linear(info.qual, info.t_tran, _weights(z, v), -float(theta),
                              cfg.p_tran, cfg.i_max)
    return TaskAction(dev + 1, idle)


def best_action_alt_timeavg(info: TaskInfo, z, v, theta, cfg: TaskNetConfig) -> TaskAction:
    """Minimizer of V(y0 - theta T) + sum Z_l (y_l - c T) for one task."""
    c = np.full(NUM_DEVICES, cfg.constraint)
    wt = -(float(v) * float(theta)) - _dot(z, c)
    _, dev, idle = min_linear(info.qual, info.t_tran, _weights(z, v), wt,
                              cfg.p_tran, cfg.i_max)
    return TaskAction(dev + 1, idle)


def deterministic_bound_check(cfg: TaskNetConfig, v: float):
    """Return (i_max threshold, queue bound d1 V + d2, whether i_max reaches the threshold)."""
    threshold = 1.0 + 10.0 * cfg.p_tran
    bound = 10.0 * v + 0.25 + 2.5 * cfg.p_tran
    return threshold, bound, cfg.i_max >= threshold


class TaskNetwork(Scenario):
    name = "task-network"

    def __init__(self, cfg: TaskNetConfig | None = None):
        self.cfg = cfg or TaskNetConfig()
        self.num_constraints = NUM_DEVICES
        self.num_attributes = 0
        self.targets = ConstraintTargets(np.full(NUM_DEVICES, self.cfg.constraint))
        y_hi = CONTROL_ENERGY + self.cfg.p_tran * T_TRAN_HI
        self.bounds = BoundsConfig(
            t_min=CONTROL_TIME + T_TRAN_LO,
            t_max=CONTROL_TIME + T_TRAN_HI + self.cfg.i_max,
            y0_min=-float(QUAL_LEVELS[-1]),
            y0_max=0.0,
            y_min=np.full(NUM_DEVICES, CONTROL_ENERGY),
            y_max=np.full(NUM_DEVICES, y_hi),
        )

    def sample_eta(self, rng):
        return sample_task(rng)

    def minimize_linear(self, eta, wy, wx, wt):
        value, dev, idle = min_linear(eta.qual, eta.t_tran, np.asarray(wy, dtype=float),
                                      float(wt), self.cfg.p_tran, self.cfg.i_max)
        return value, TaskAction(dev + 1, idle)

    def realize(self, eta, action, rng, frame_index):
        return evaluate(eta, action, self.cfg, frame_index)

    def theta_bracket(self, wy, wx):
        # Valid for drift-plus-penalty weights (V >= 0, Z >= 0): y0 >= -5,
        # y_l <= 0.5 + 2.5 p_tran and T >= 1.
        wy = np.asarray(wy, dtype=float)
        if np.any(wy < 0):
            return None
        return _bracket(wy, self.cfg.p_tran)

    def describe_action(self, action):
        return {"device": action.device, "idle": action.idle}


@numba.njit(cache=True)
def _bracket(wy, p_tran):
    s = 0.0
    for k in range(1, wy.shape[0]):
        s += wy[k]
    return -QUAL_LEVELS[-1] * wy[0], (CONTROL_ENERGY + T_TRAN_HI * p_tran) * s


@numba.njit(cache=True, nogil=True)
def _sampled_val(theta, buf_q, buf_t, count, head, cap, cur_q, cur_t, use_cur,
                 wy, p_tran, i_max):
    total = 0.0
    n = 0
    for i in range(count):
        j = (head - count + i) % cap
        v, _, _ = min_linear(buf_q[j], buf_t[j], wy, -theta, p_tran, i_max)
        total += v
        n += 1
    if use_cur:
        v, _, _ = min_linear(cur_q, cur_t, wy, -theta, p_tran, i_max)
        total += v
        n += 1
    return total / n


@numba.njit(cache=True, nogil=True)
def _kernel(qual, t_tran, frame0, mode, v, w, p_tran, i_max, c, tol, max_exp, max_iter,
            decay, z, buf_q, buf_t, buf_meta, sums, tracker, peak, osc, track_from,
            do_log, log, stats):
    n = qual.shape[0]
    nd = qual.shape[1]
    wy = np.empty(nd + 1)
    y = np.empty(nd + 1)
    for r in range(n):
        frame = frame0 + r
        cq = qual[r]
        ct = t_tran[r]
        wy[0] = v
        for l in range(nd):
            wy[l + 1] = z[l]
        theta_hat = 0.0
        if mode == 0:
            count = buf_meta[0]
            head = buf_meta[1]
            use_cur = count < w
            lo, hi = _bracket(wy, p_tran)
            if hi - lo < tol:
                hi = lo + tol
            v_lo = _sampled_val(lo, buf_q, buf_t, count, head, w, cq, ct, use_cur,
                                wy, p_tran, i_max)
            v_hi = _sampled_val(hi, buf_q, buf_t, count, head, w, cq, ct, use_cur,
                                wy, p_tran, i_max)
            expansions = 0
            while v_lo < 0.0 or v_hi > 0.0:
                if expansions >= max_exp:
                    return _BRACKET, frame
                width = hi - lo
                if v_lo < 0.0:
                    lo -= width
                    v_lo = _sampled_val(lo, buf_q, buf_t, count, head, w, cq, ct,
                                        use_cur, wy, p_tran, i_max)
                else:
                    hi += width
                    v_hi = _sampled_val(hi, buf_q, buf_t, count, head, w, cq, ct,
                                        use_cur, wy, p_tran, i_max)
                expansions += 1
            it = 0
            while hi - lo >= tol:
                if it >= max_iter:
                    return _ITERATIONS, frame
                mid = 0.5 * (lo + hi)
                vm = _sampled_val(mid, buf_q, buf_t, count, head, w, cq, ct, use_cur,
                                  wy, p_tran, i_max)
                it += 1
                if vm > 0.0:
                    lo = mid
                else:
                    hi = mid
            theta_hat = hi
            wt = -theta_hat
            stats[0] += it
            if it > stats[1]:
                stats[1] = it
            stats[2] += expansions
        else:
            s = 0.0
            for l in range(nd):
                s += z[l] * c
            if mode == 1:
                theta_hat = tracker[2]
                wt = -(v * theta_hat) - s
            else:
                wt = -s
        _, d, idle = min_linear(cq, ct, wy, wt, p_tran, i_max)

        # Realize the outcome.
        y[0] = -cq[d]
        for l in range(nd):
            y[l + 1] = CONTROL_ENERGY
        y[1 + d] = CONTROL_ENERGY + p_tran * ct[d]
        t = CONTROL_TIME + ct[d] + idle

        if do_log:
            log[r, 0] = frame
            log[r, 1] = theta_hat
            log[r, 2] = d + 1
            log[r, 3] = idle
            log[r, 4] = t
            for k in range(nd + 1):
                log[r, 5 + k] = y[k]
            for l in range(nd):
                log[r, 6 + nd + l] = z[l]

        sums[0] += t
        for k in range(nd + 1):
            sums[1 + k] += y[k]
        sums[2 + nd] += idle
        for l in range(nd):
            zn = z[l] + y[l + 1] - c * t
            z[l] = zn if zn > 0.0 else 0.0
            if z[l] > peak[l]:
                peak[l] = z[l]

        tracker[0] = decay * tracker[0] + y[0]
        tracker[1] = decay * tracker[1] + t
        tracker[2] = tracker[0] / tracker[1]
        if mode == 1 and frame + 1 >= track_from:
            if tracker[2] < osc[0]:
                osc[0] = tracker[2]
            if tracker[2] > osc[1]:
                osc[1] = tracker[2]

        if mode == 0:
            head = buf_meta[1]
            for k in range(nd):
                buf_q[head, k] = cq[k]
                buf_t[head, k] = ct[k]
            buf_meta[1] = (head + 1) % w
            if buf_meta[0] < w:
                buf_meta[0] += 1
    return _OK, frame0 + n


@dataclass
class TaskNetRun:
    """Outcome of a compiled task-network run."""

    algorithm: str
    frames: int
    v: float
    w: int
    sum_t: float
    sum_y: np.ndarray
    sum_idle: float
    z: np.ndarray
    peak_z: np.ndarray
    theta: float
    theta_oscillation: float | None
    checkpoints: list[Checkpoint] = field(default_factory=list)
    log: np.ndarray | None = None
    total_iterations: int = 0
    max_iterations: int = 0
    total_expansions: int = 0

    @property
    def utility(self) -> float:
        return -self.sum_y[0] / self.sum_t

    @property
    def t_bar(self) -> float:
        return self.sum_t / self.frames

    @property
    def idle_bar(self) -> float:
        return self.sum_idle / self.frames

    @property
    def y0_bar(self) -> float:
        return self.sum_y[0] / self.frames

    @property
    def constraint_ratios(self) -> np.ndarray:
        return self.sum_y[1:] / self.sum_t


LOG_COLUMNS = (
    ["frame", "theta_hat", "device", "idle", "T"]
    + [f"y{k}" for k in range(NUM_DEVICES + 1)]
    + [f"Z{l}" for l in range(1, NUM_DEVICES + 1)]
)


def run_task_network(cfg: TaskNetConfig, algorithm: str = "dpp-ratio", frames: int = 1,
                     v: float = 100.0, w: int = 10, seed: int | None = 0, rng=None,
                     bisection: dict | None = None, checkpoints=(), log: bool = False,
                     decay: float = 1.0, chunk: int = 1 << 16) -> TaskNetRun:
    """Run one replication of the task network with the compiled frame loop.

    Args:
        algorithm: ``dpp-ratio``, ``alt-timeavg`` or ``alt-form``.
        checkpoints: frame counts at which queue-based invariants are checked.
        log: keep the per-frame log (16 columns, see ``LOG_COLUMNS``).
        decay: forgetting factor for the running theta average (1.0 = plain
            running average).
    """
    if algorithm not in MODES:
        raise ConfigurationError(f"task network does not support algorithm {algorithm!r}")
    if frames < 1 or w < 1 or v < 0:
        raise ConfigurationError("need frames >= 1, w >= 1 and v >= 0")
    if not 0 < decay <= 1:
        raise ConfigurationError("decay must lie in (0, 1]")
    bis = dict(bisection or {})
    tol = float(bis.get("tolerance", 1e-3))
    max_exp = int(bis.get("max_expansions", 32))
    max_iter = int(bis.get("max_iterations", 200))
    rng = rng if rng is not None else np.random.default_rng(seed)
    mode = MODES[algorithm]

    z = np.zeros(NUM_DEVICES)
    peak = np.zeros(NUM_DEVICES)
    buf_q = np.zeros((w, NUM_DEVICES))
    buf_t = np.zeros((w, NUM_DEVICES))
    buf_meta = np.zeros(2, dtype=np.int64)
    sums = np.zeros(NUM_DEVICES + 3)
    tracker = np.zeros(3)
    osc = np.array([np.inf, -np.inf])
    stats = np.zeros(3, dtype=np.int64)
    track_from = frames - frames // 10
    full_log = np.zeros((frames if log else 0, len(LOG_COLUMNS)))
    c = float(cfg.constraint)
    t_min = CONTROL_TIME + T_TRAN_LO

    marks = sorted(set(int(k) for k in checkpoints if 0 < k <= frames))
    stops = sorted(set(marks + list(range(0, frames, chunk)) + [frames]))
    cps = []
    done = 0
    for stop in stops[1:]:
        n = stop - done
        qual, t_tran = infos_from_draws(rng.random((n, 2 * NUM_DEVICES)))
        sub_log = full_log[done:stop] if log else np.zeros((0, len(LOG_COLUMNS)))
        code, where = _kernel(qual, t_tran, done, mode, float(v), int(w), cfg.p_tran,
                              cfg.i_max, c, tol, max_exp, max_iter, float(decay), z, buf_q,
                              buf_t, buf_meta, sums, tracker, peak, osc, track_from, log,
                              sub_log, stats)
        if code == _BRACKET:
            raise BracketError(f"bisection bracket invalid at frame {where}")
        if code == _ITERATIONS:
            raise ConvergenceError(f"bisection iteration cap hit at frame {where}")
        done = stop
        if stop in marks:
            cps.append(queue_checkpoint(stop, z.copy(), sums[1:NUM_DEVICES + 2].copy(),
                                        sums[0], np.full(NUM_DEVICES, c), t_min))

    return TaskNetRun(
        algorithm=algorithm,
        frames=frames,
        v=float(v),
        w=int(w),
        sum_t=float(sums[0]),
        sum_y=sums[1:NUM_DEVICES + 2].copy(),
        sum_idle=float(sums[NUM_DEVICES + 2]),
        z=z,
        peak_z=peak,
        theta=float(tracker[2]),
        theta_oscillation=float(osc[1] - osc[0]) if mode == 1 else None,
        checkpoints=cps,
        log=full_log if log else None,
        total_iterations=int(stats[0]),
        max_iterations=int(stats[1]),
        total_expansions=int(stats[2]),
    )
