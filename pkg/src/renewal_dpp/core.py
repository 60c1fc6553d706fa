"""Domain types and virtual-queue arithmetic shared by every engine.

Penalty vectors always have length ``L + 1``: index 0 is the objective
penalty and indices ``1..L`` are the constrained penalties.  Constraint
target vectors and ``Z`` queues have length ``L`` and are aligned with
penalty indices ``1..L``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError, DomainError, EmptyLedgerError

# Slack for rectangle membership checks; gamma values come out of
# floating-point optimizers and may overshoot a bound by a few ulps.
RECT_TOL = 1e-9


def _vec(values, name) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise ConfigurationError(f"{name} must be finite, got {values!r}")
    return arr


@dataclass(frozen=True)
class PolicyOutcome:
    """Realized (T, y, x) of one frame."""

    frame_length: float
    penalties: np.ndarray
    attributes: np.ndarray = field(default_factory=lambda: np.zeros(0))
    frame_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "frame_length", float(self.frame_length))
        object.__setattr__(self, "penalties", _vec(self.penalties, "penalties"))
        object.__setattr__(self, "attributes", _vec(self.attributes, "attributes"))
        if not self.frame_length > 0:
            raise DomainError(f"frame_length must be positive, got {self.frame_length}")
        if self.penalties.size < 1:
            raise ConfigurationError("penalties must include the objective entry y0")
        if self.frame_index < 0:
            raise ConfigurationError("frame_index must be non-negative")

    @property
    def num_constraints(self) -> int:
        return self.penalties.size - 1

    @property
    def num_attributes(self) -> int:
        return self.attributes.size


@dataclass(frozen=True)
class ConstraintTargets:
    """Per-unit-time targets c_l for the constraints ybar_l / Tbar <= c_l."""

    targets: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        object.__setattr__(self, "targets", _vec(self.targets, "targets"))

    def __len__(self):
        return self.targets.size


@dataclass(frozen=True)
class QueueBank:
    """Constraint queues ``z`` (length L) and auxiliary queues ``g`` (length M)."""

    z: np.ndarray
    g: np.ndarray
    targets: ConstraintTargets

    def __post_init__(self):
        object.__setattr__(self, "z", _vec(self.z, "z"))
        object.__setattr__(self, "g", _vec(self.g, "g"))
        if self.z.size != len(self.targets):
            raise ConfigurationError(
                f"z has length {self.z.size} but there are {len(self.targets)} targets"
            )
        if np.any(self.z < 0) or np.any(self.g < 0):
            raise DomainError("virtual queues must be non-negative")

    @classmethod
    def zeros(cls, targets: ConstraintTargets, num_attributes: int = 0) -> "QueueBank":
        return cls(np.zeros(len(targets)), np.zeros(num_attributes), targets)


@dataclass(frozen=True)
class BoundsConfig:
    """Bounds on conditional expectations of T, y0, x (and optionally y_1..y_L).

    ``y_min``/``y_max`` bound the constrained penalties; they are only needed
    for the drift constants and for default bisection brackets.
    """

    t_min: float
    t_max: float
    y0_min: float
    y0_max: float
    x_min: np.ndarray = field(default_factory=lambda: np.zeros(0))
    x_max: np.ndarray = field(default_factory=lambda: np.zeros(0))
    y_min: np.ndarray | None = None
    y_max: np.ndarray | None = None

    def __post_init__(self):
        for name in ("x_min", "x_max"):
            object.__setattr__(self, name, _vec(getattr(self, name), name))
        for name in ("y_min", "y_max"):
            if getattr(self, name) is not None:
                object.__setattr__(self, name, _vec(getattr(self, name), name))
        if not 0 < self.t_min <= self.t_max:
            raise ConfigurationError(f"need 0 < t_min <= t_max, got {self.t_min}, {self.t_max}")
        if self.y0_min > self.y0_max:
            raise ConfigurationError("y0_min exceeds y0_max")
        if self.x_min.shape != self.x_max.shape or np.any(self.x_min > self.x_max):
            raise ConfigurationError("x_min/x_max malformed")
        if (self.y_min is None) != (self.y_max is None):
            raise ConfigurationError("y_min and y_max must be given together")
        if self.y_min is not None and (
            self.y_min.shape != self.y_max.shape or np.any(self.y_min > self.y_max)
        ):
            raise ConfigurationError("y_min/y_max malformed")

    @property
    def rectangle(self) -> list[tuple[float, float]]:
        """Per-coordinate interval containing every achievable xbar/Tbar."""
        lo = np.minimum(self.x_min / self.t_min, self.x_min / self.t_max)
        hi = np.maximum(self.x_max / self.t_min, self.x_max / self.t_max)
        return [(float(a), float(b)) for a, b in zip(lo, hi)]

    def in_rectangle(self, gamma, tol: float = RECT_TOL) -> bool:
        gamma = np.asarray(gamma, dtype=float).reshape(-1)
        rect = self.rectangle
        if gamma.size != len(rect):
            return False
        return all(lo - tol <= g <= hi + tol for g, (lo, hi) in zip(gamma, rect))


@dataclass
class MetricsLedger:
    """Running sums of T, y and x over recorded frames.

    Sums are accumulated directly, never as incremental means.
    """

    num_constraints: int
    num_attributes: int = 0
    sum_t: float = 0.0
    sum_y: np.ndarray = None
    sum_x: np.ndarray = None
    frames: int = 0
    per_frame_log: list | None = None

    def __post_init__(self):
        if self.sum_y is None:
            self.sum_y = np.zeros(self.num_constraints + 1)
        if self.sum_x is None:
            self.sum_x = np.zeros(self.num_attributes)

    def record(self, outcome: PolicyOutcome, snapshot=None, diagnostics=None):
        if outcome.penalties.size != self.sum_y.size:
            raise ConfigurationError("penalty vector length does not match ledger")
        if outcome.attributes.size != self.sum_x.size:
            raise ConfigurationError("attribute vector length does not match ledger")
        self.sum_t += outcome.frame_length
        self.sum_y += outcome.penalties
        self.sum_x += outcome.attributes
        self.frames += 1
        if self.per_frame_log is not None:
            self.per_frame_log.append((outcome.frame_index, outcome, snapshot, diagnostics))


def update_z(bank: QueueBank, outcome: PolicyOutcome) -> QueueBank:
    """Z_l <- max(Z_l + y_l - c_l T, 0) for l = 1..L."""
    if outcome.num_constraints != bank.z.size:
        raise ConfigurationError(
            f"outcome has {outcome.num_constraints} constrained penalties, "
            f"bank has {bank.z.size} queues"
        )
    c = bank.targets.targets
    z = np.maximum(bank.z + outcome.penalties[1:] - c * outcome.frame_length, 0.0)
    return replace(bank, z=z)


def update_g(bank: QueueBank, outcome: PolicyOutcome, gamma, rectangle=None) -> QueueBank:
    """G_m <- max(G_m + T gamma_m - x_m, 0) for m = 1..M."""
    gamma = np.asarray(gamma, dtype=float).reshape(-1)
    if gamma.size != bank.g.size or outcome.num_attributes != bank.g.size:
        raise ConfigurationError("gamma / attribute length does not match the G queues")
    if rectangle is not None:
        for m, (lo, hi) in enumerate(rectangle):
            if not lo - RECT_TOL <= gamma[m] <= hi + RECT_TOL:
                raise DomainError(f"gamma[{m}]={gamma[m]} outside [{lo}, {hi}]")
    g = np.maximum(bank.g + outcome.frame_length * gamma - outcome.attributes, 0.0)
    return replace(bank, g=g)


def lyapunov_value(bank: QueueBank) -> float:
    """Half the sum of squares over all Z and G queues."""
    return 0.5 * (float(np.dot(bank.z, bank.z)) + float(np.dot(bank.g, bank.g)))


def ratio_estimates(ledger: MetricsLedger):
    """Return (objective ratio, constraint ratios, attribute ratios) per unit time."""
    if ledger.frames == 0:
        raise EmptyLedgerError("no frames recorded")
    return (
        float(ledger.sum_y[0] / ledger.sum_t),
        ledger.sum_y[1:] / ledger.sum_t,
        ledger.sum_x / ledger.sum_t,
    )
