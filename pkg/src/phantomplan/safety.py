"""Hard feasibility: stop-reserve constraints over the next execution window,
branch-specific yield bounds, corridor limits, and the yield-intention rule
that deactivates the field-of-view guard.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .refpath import RefPath
from .scene import FovBoundary, PlanningScene, PredictedObject
from .trajectory import CombinedVector, Trajectory

__all__ = [
    "StopConstraint",
    "YieldConstraint",
    "CorridorConstraint",
    "FovBoundary",
    "stop_distance",
    "check_stop_feasibility",
    "constraint_set",
    "yield_intention_clear",
]


def stop_distance(v: float, a_max: float) -> float:
    """Distance covered by a constant full-braking deceleration to standstill."""
    if v < 0.0:
        raise ValueError(f"speed must be nonnegative, got {v}")
    if a_max <= 0.0:
        raise ValueError(f"braking deceleration must be positive, got {a_max}")
    return v * v / (2.0 * a_max)


def yield_intention_clear(observed_speed: float, distance_to_conflict: float,
                          a_comfort: float) -> bool:
    """True when the observed vehicle can comfortably stop before the conflict."""
    if observed_speed < 0.0 or distance_to_conflict < 0.0:
        raise ValueError("observed speed and distance must be nonnegative")
    return stop_distance(observed_speed, a_comfort) <= distance_to_conflict


@dataclass(frozen=True)
class StopConstraint:
    """Stop-reserve rows for one object on the shared execution window.

    For every index i in the window, the full-braking stop point from the
    state at i must stay behind the object's lower truncation bound:
    s_i + v_i^2 / (2 a_max) <= bound_i.
    """

    object_id: str
    a_max_brake: float
    indices: tuple[int, ...]       # {n_pin, ..., 2*n_pin - 1} on the shared prefix
    bounds: tuple[float, ...]
    active: bool = True

    def __post_init__(self):
        if len(self.indices) != len(self.bounds):
            raise ValueError("one bound per window index required")
        if self.a_max_brake <= 0.0:
            raise ValueError("braking deceleration must be positive")


@dataclass(frozen=True)
class YieldConstraint:
    """Positional stay-behind rows for one object on one branch:
    s_j + margin <= bound_j for branch indices beyond the shared prefix."""

    object_id: str
    branch: str                    # "A" or "B"
    indices: tuple[int, ...]       # maneuver-local trajectory indices
    bounds: tuple[float, ...]
    margin: float

    def __post_init__(self):
        if len(self.indices) != len(self.bounds):
            raise ValueError("one bound per index required")
        if self.branch not in ("A", "B"):
            raise ValueError(f"branch must be A or B, got {self.branch!r}")


@dataclass(frozen=True)
class CorridorConstraint:
    """Lateral band lo <= d <= hi on a contiguous index range of one scope."""

    scope: str                     # "prefix", "A" or "B"
    indices: tuple[int, ...]       # maneuver-local trajectory indices
    lo: float
    hi: float

    def __post_init__(self):
        if self.lo >= self.hi:
            raise ValueError(f"empty corridor band [{self.lo}, {self.hi}]")
        if self.scope not in ("prefix", "A", "B"):
            raise ValueError(f"unknown scope {self.scope!r}")


ConstraintRecord = StopConstraint | YieldConstraint | CorridorConstraint


def longitudinal_profile(t: Trajectory, refpath: RefPath) -> tuple[np.ndarray, np.ndarray]:
    """(s, v) per support point: arc positions and forward-difference speeds.

    The last point reuses the preceding speed so both arrays align with the
    support points.
    """
    s, _ = refpath.project(t.points)
    v = np.empty_like(s)
    v[:-1] = (s[1:] - s[:-1]) / t.step
    v[-1] = v[-2]
    return s, v


def check_stop_feasibility(t: Trajectory, obj: PredictedObject, a_max: float,
                           refpath: RefPath) -> np.ndarray:
    """Per-index margins bound_i - (s_i + stop_distance(v_i)) on the window
    {n_pin, ..., 2*n_pin - 1}; all nonnegative means the plan keeps the
    full-braking fallback available while the window is executed.
    """
    n_pin = t.pin_index
    window = range(n_pin, 2 * n_pin)
    s, v = longitudinal_profile(t, refpath)
    margins = np.empty(len(window))
    for k, i in enumerate(window):
        bound = obj.lower_bound(i)
        margins[k] = bound - (s[i] + stop_distance(max(v[i], 0.0), a_max))
    return margins


def constraint_set(scene: PlanningScene, v: CombinedVector,
                   a_max: float) -> list[ConstraintRecord]:
    """All inequality records of the combined problem.

    Emits, per active object: stop rows on exactly the shared window
    {n_pin..2*n_pin-1} (both branches share that prefix), and stay-behind rows
    on every branch whose maneuver class sees the object. Corridor rows cover
    all optimizable points; branch band overrides replace the corridor beyond
    the shared prefix.
    """
    n_pin = v.n_pin
    records: list[ConstraintRecord] = []
    window = tuple(range(n_pin, 2 * n_pin))
    n_a = v.horizon_index + 1
    n_b = n_a + n_pin
    branch_idx = {"A": tuple(range(2 * n_pin + 1, n_a)),
                  "B": tuple(range(2 * n_pin + 1, n_b))}

    for obj in scene.objects:
        if not obj.constraints_active:
            continue
        records.append(StopConstraint(
            object_id=obj.object_id,
            a_max_brake=a_max,
            indices=window,
            bounds=tuple(obj.lower_bound(i) for i in window),
        ))
        for branch in ("A", "B"):
            if branch not in obj.steps:
                continue
            idx = branch_idx[branch]
            seq = obj.steps_for(branch)
            if len(seq) < (n_b if branch == "B" else n_a):
                raise ValueError(f"object {obj.object_id!r} predictions too short "
                                 f"for branch {branch}")
            records.append(YieldConstraint(
                object_id=obj.object_id,
                branch=branch,
                indices=idx,
                bounds=tuple(seq[i].lower for i in idx),
                margin=scene.margin_front,
            ))

    half = scene.corridor_half_width
    records.append(CorridorConstraint(
        scope="prefix", indices=tuple(range(n_pin + 1, 2 * n_pin + 1)),
        lo=-half, hi=half))
    band_a = scene.branch_band_a or (-half, half)
    band_b = scene.branch_band_b or (-half, half)
    records.append(CorridorConstraint(
        scope="A", indices=branch_idx["A"], lo=band_a[0], hi=band_a[1]))
    records.append(CorridorConstraint(
        scope="B", indices=branch_idx["B"], lo=band_b[0], hi=band_b[1]))
    return records
