"""Motion support point sequences, forward differences, and the combined
pinned/shared/branch parameter vector used to optimize two homotopic maneuver
alternatives at once.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "ManeuverId",
    "Trajectory",
    "CombinedVector",
    "forward_diffs",
    "build_combined",
    "extract_maneuver",
]


class ManeuverId(Enum):
    A = "A"  # ignore / pass alternative
    B = "B"  # treat-as-real / yield alternative
    C = "C"  # shared undecided prefix
    Z = "Z"  # full-braking fallback


@dataclass(frozen=True)
class Trajectory:
    """2-D motion support points at fixed step width.

    points[i] is the position at absolute time t0 + i*step. Points with index
    <= pin_index are pinned (kept from the previous plan, not optimized).
    """

    points: np.ndarray  # (n, 2) float
    step: float
    t0: float = 0.0
    pin_index: int = 0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError(f"points must be (n, 2), got shape {pts.shape}")
        if pts.shape[0] < 4:
            raise ValueError(f"need at least 4 points for third differences, got {pts.shape[0]}")
        if self.step <= 0.0:
            raise ValueError(f"step width must be positive, got {self.step}")
        if self.pin_index < 0 or 2 * self.pin_index >= pts.shape[0]:
            raise ValueError(
                f"pin index {self.pin_index} does not leave room for the shared "
                f"window in {pts.shape[0]} points")
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def t_pin(self) -> float:
        return self.t0 + self.pin_index * self.step

    @property
    def t_2pin(self) -> float:
        return self.t0 + 2 * self.pin_index * self.step

    @property
    def horizon(self) -> float:
        return (self.n - 1) * self.step

    def times(self) -> np.ndarray:
        return self.t0 + self.step * np.arange(self.n)


def forward_diffs(t: Trajectory, order: int) -> np.ndarray:
    """k-step forward differences scaled by step**-order.

    Output row i is the order-k difference anchored at index i; there are
    n - order rows.
    """
    if order not in (1, 2, 3):
        raise ValueError(f"order must be 1, 2 or 3, got {order}")
    if t.n <= order:
        raise ValueError(f"trajectory with {t.n} points is too short for order {order}")
    d = t.points
    for _ in range(order):
        d = d[1:] - d[:-1]
    return d / t.step ** order


def _diff_matrix(n: int, order: int) -> np.ndarray:
    """Dense (n-order, n) forward-difference operator (unscaled)."""
    m = np.eye(n)
    for _ in range(order):
        m = m[1:] - m[:-1]
    return m


@dataclass
class CombinedVector:
    """Decision variable covering both maneuver alternatives.

    Storage mirrors the pinned / shared / branch split: with horizon index N
    and pin index n_pin the stored blocks are

        pinned   indices 0 .. n_pin           (n_pin + 1 points, fixed)
        shared   indices n_pin+1 .. 2*n_pin   (n_pin points)
        branch_a indices 2*n_pin+1 .. N       (N - 2*n_pin points)
        branch_b                              (N - n_pin points)

    for 2N - n_pin + 1 stored and 2N - 2*n_pin free (optimized) points.
    Alternative A is pinned+shared+branch_a; B reuses pinned+shared as its
    prefix and continues with branch_b.
    """

    pinned: np.ndarray
    shared: np.ndarray
    branch_a: np.ndarray
    branch_b: np.ndarray
    step: float
    t0: float = 0.0

    def __post_init__(self):
        self.pinned = np.asarray(self.pinned, dtype=float)
        self.shared = np.asarray(self.shared, dtype=float)
        self.branch_a = np.asarray(self.branch_a, dtype=float)
        self.branch_b = np.asarray(self.branch_b, dtype=float)
        n_pin = self.pinned.shape[0] - 1
        if n_pin < 0 or self.shared.shape[0] != n_pin:
            raise ValueError("shared block must hold exactly pin-index points")
        if self.branch_b.shape[0] != self.branch_a.shape[0] + n_pin:
            raise ValueError("branch blocks inconsistent with the pin structure")
        if self.horizon_index < 2 * n_pin + 1:
            raise ValueError("horizon too short for the pin structure")

    @property
    def n_pin(self) -> int:
        return self.pinned.shape[0] - 1

    @property
    def horizon_index(self) -> int:
        """Index N of maneuver A's last support point."""
        return 2 * self.n_pin + self.branch_a.shape[0]

    @property
    def free_point_count(self) -> int:
        return self.shared.shape[0] + self.branch_a.shape[0] + self.branch_b.shape[0]

    @property
    def total_point_count(self) -> int:
        return self.pinned.shape[0] + self.free_point_count

    def prefix(self) -> np.ndarray:
        return np.vstack([self.pinned, self.shared])

    def extract(self, which: ManeuverId) -> Trajectory:
        if which == ManeuverId.A:
            pts = np.vstack([self.pinned, self.shared, self.branch_a])
        elif which == ManeuverId.B:
            pts = np.vstack([self.pinned, self.shared, self.branch_b])
        else:
            raise ValueError(f"can only extract maneuver A or B, got {which}")
        return Trajectory(pts, self.step, self.t0, self.n_pin)

    def free_vector(self) -> np.ndarray:
        """Free coordinates flattened as [shared, branch_a, branch_b] x (x, y)."""
        return np.concatenate([self.shared.ravel(), self.branch_a.ravel(),
                               self.branch_b.ravel()])

    def with_free_vector(self, z: np.ndarray) -> "CombinedVector":
        """Copy with the free blocks replaced; pinned points are reused as-is."""
        z = np.asarray(z, dtype=float)
        if z.size != 2 * self.free_point_count:
            raise ValueError(f"free vector must have {2 * self.free_point_count} "
                             f"entries, got {z.size}")
        ns, na = self.shared.shape[0], self.branch_a.shape[0]
        return CombinedVector(
            pinned=self.pinned,
            shared=z[:2 * ns].reshape(-1, 2).copy(),
            branch_a=z[2 * ns:2 * (ns + na)].reshape(-1, 2).copy(),
            branch_b=z[2 * (ns + na):].reshape(-1, 2).copy(),
            step=self.step,
            t0=self.t0,
        )

    def copy(self) -> "CombinedVector":
        return CombinedVector(self.pinned.copy(), self.shared.copy(),
                              self.branch_a.copy(), self.branch_b.copy(),
                              self.step, self.t0)


def extract_maneuver(v: CombinedVector, which: ManeuverId) -> Trajectory:
    return v.extract(which)


def _extrapolate(points: np.ndarray, count: int, vel: np.ndarray) -> np.ndarray:
    """Continue a point sequence with `count` constant-velocity steps."""
    if count <= 0:
        return np.empty((0, 2))
    return points[-1] + vel * np.arange(1, count + 1)[:, None]


def build_combined(prev: Trajectory, n_pin: int, horizon_index: int) -> CombinedVector:
    """Seed a combined vector from the previously planned motion.

    The pinned and shared blocks are the previous plan shifted by one
    replanning interval (n_pin steps); both branches start from a
    constant-velocity extrapolation of the kept points.
    """
    n = horizon_index
    if n < 2 * n_pin + 2:
        raise ValueError(f"horizon index {n} too short for pin index {n_pin}")
    if prev.n < 2 * n_pin + 1:
        raise ValueError(f"previous plan has {prev.n} points, need at least {2 * n_pin + 1}")

    kept = prev.points[n_pin:3 * n_pin + 1]
    # Step velocity used wherever the previous plan runs out of points.
    vel = kept[-1] - kept[-2] if kept.shape[0] >= 2 else prev.points[n_pin + 1] - prev.points[n_pin]
    if kept.shape[0] < 2 * n_pin + 1:
        kept = np.vstack([kept, _extrapolate(kept, 2 * n_pin + 1 - kept.shape[0], vel)])
    pinned = kept[:n_pin + 1].copy()
    shared = kept[n_pin + 1:2 * n_pin + 1].copy()

    prefix = np.vstack([pinned, shared])
    if prefix.shape[0] >= 2:
        vel = prefix[-1] - prefix[-2]
    branch_a = _extrapolate(prefix, n - 2 * n_pin, vel)
    branch_b = _extrapolate(prefix, n - n_pin, vel)
    return CombinedVector(pinned, shared, branch_a, branch_b, prev.step,
                          prev.t0 + n_pin * prev.step)


def combine_pair(ta: Trajectory, tb: Trajectory, n_pin: int) -> CombinedVector:
    """Assemble a combined vector from two alternatives with a common prefix.

    The trajectories must agree (bit-exactly) through index 2*n_pin and tb must
    run n_pin steps longer than ta, matching the stored block sizes.
    """
    if ta.step != tb.step or ta.t0 != tb.t0:
        raise ValueError("alternatives must share step width and start time")
    if tb.n != ta.n + n_pin:
        raise ValueError(f"alternative B must have {ta.n + n_pin} points, got {tb.n}")
    cut = 2 * n_pin + 1
    if not np.array_equal(ta.points[:cut], tb.points[:cut]):
        raise ValueError("alternatives disagree on the pinned+shared prefix")
    return CombinedVector(
        pinned=ta.points[:n_pin + 1].copy(),
        shared=ta.points[n_pin + 1:cut].copy(),
        branch_a=ta.points[cut:].copy(),
        branch_b=tb.points[cut:].copy(),
        step=ta.step,
        t0=ta.t0,
    )
