"""Scene data model: predicted objects with existence probability, their
time-indexed traces, the field-of-view boundary, and the scenario container
consumed by the planner and the closed-loop simulator.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional

import numpy as np

from .probkit import DetectorModel, TruncatedNormal
from .refpath import RefPath

if TYPE_CHECKING:
    from .costs import CostWeights

__all__ = [
    "PredictedObject",
    "ObjectTrace",
    "FovBoundary",
    "PlanningScene",
    "Scenario",
    "HYPOTHETICAL_ID",
]

HYPOTHETICAL_ID = "fov_hypothetical"


@dataclass(frozen=True)
class PredictedObject:
    """One object as the planner sees it for a single solve.

    `steps` maps an ego maneuver class tag ("A" = pass/ignore, "B" = yield)
    to the object's predicted longitudinal position distribution per horizon
    step. A class that is absent simply does not see the object in costs or
    yield constraints; the hard stop constraints apply regardless.
    """

    object_id: str
    p_exist: float
    steps: dict[str, tuple[TruncatedNormal, ...]]
    constraints_active: bool = True

    def __post_init__(self):
        if not (0.0 <= self.p_exist <= 1.0):
            raise ValueError(f"p_exist must lie in [0, 1], got {self.p_exist}")
        if not self.steps:
            raise ValueError(f"object {self.object_id!r} carries no predictions")

    def classes(self) -> tuple[str, ...]:
        return tuple(sorted(self.steps))

    def steps_for(self, mclass: str) -> tuple[TruncatedNormal, ...]:
        if mclass not in self.steps:
            raise KeyError(f"object {self.object_id!r} has no predictions for "
                           f"maneuver class {mclass!r}")
        return self.steps[mclass]

    def lower_bound(self, index: int) -> float:
        """Most conservative lower truncation bound over all classes at a step."""
        bounds = []
        for seq in self.steps.values():
            if index >= len(seq):
                raise IndexError(f"object {self.object_id!r} prediction too short: "
                                 f"step {index} of {len(seq)}")
            bounds.append(seq[index].lower)
        return min(bounds)

    def n_steps(self) -> int:
        return min(len(seq) for seq in self.steps.values())


def _step_lookup(times: list[float], values: list, t: float):
    """Value of a right-continuous step function at t; None before the first knot."""
    i = bisect_right(times, t)
    return values[i - 1] if i > 0 else None


@dataclass
class ObjectTrace:
    """Time schedule and synthetic predictor for one scenario object.

    The existence schedule is a step function: each entry (t, p) holds from t
    until the next entry; p None means the object left the fused object list.
    Predictions are truncated normals centered on a constant-velocity motion
    with bounds at mu +- bound_sigmas * sigma.
    """

    object_id: str
    schedule: list[tuple[float, Optional[float]]]
    s0: float
    speed: float = 0.0
    sigma: float = 1.0
    bound_sigmas: float = 3.0
    classes: tuple[str, ...] = ("B",)
    intention: Optional[list[tuple[float, float, float]]] = None  # (t, p_pass, p_yield)
    drives_weights: bool = False

    def __post_init__(self):
        if not self.schedule:
            raise ValueError(f"object {self.object_id!r} needs a schedule")
        times = [t for t, _ in self.schedule]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError(f"object {self.object_id!r} schedule times must be "
                             "strictly increasing")
        for _, p in self.schedule:
            if p is not None and not (0.0 <= p <= 1.0):
                raise ValueError(f"object {self.object_id!r} has p_exist {p} outside [0, 1]")
        if self.sigma <= 0.0 or self.bound_sigmas <= 0.0:
            raise ValueError(f"object {self.object_id!r} needs positive sigma and bounds")

    def p_exist_at(self, t: float) -> Optional[float]:
        return _step_lookup([q for q, _ in self.schedule],
                            [p for _, p in self.schedule], t)

    def intention_at(self, t: float) -> Optional[tuple[float, float]]:
        if not self.intention:
            return None
        return _step_lookup([q for q, *_ in self.intention],
                            [(a, b) for _, a, b in self.intention], t)

    def position_at(self, t: float) -> float:
        return self.s0 + self.speed * (t - self.schedule[0][0])

    def predict(self, t: float, count: int, step: float) -> Optional[PredictedObject]:
        """Snapshot at query time t, or None while absent from the object list."""
        p = self.p_exist_at(t)
        if p is None:
            return None
        half = self.bound_sigmas * self.sigma
        dists = tuple(
            TruncatedNormal(mu, self.sigma, mu - half, mu + half)
            for mu in (self.position_at(t + k * step) for k in range(count))
        )
        return PredictedObject(self.object_id, p, {c: dists for c in self.classes})


@dataclass
class FovBoundary:
    """End of the visible field plus the synthesized object guarding it.

    While no percepted vehicle has shown a clear yield intention, the planner
    must reserve a full stop before s_visible; the hypothetical object's lower
    truncation bound sits exactly there.
    """

    s_visible: float
    sigma: float = 1.0
    bound_sigmas: float = 3.0
    # (t, observed speed, distance to conflict) of a percepted vehicle, if any.
    percepted: Optional[list[tuple[float, float, float]]] = None

    def __post_init__(self):
        if self.sigma <= 0.0 or self.bound_sigmas <= 0.0:
            raise ValueError("fov boundary needs positive sigma and bounds")

    def observation_at(self, t: float) -> Optional[tuple[float, float]]:
        if not self.percepted:
            return None
        return _step_lookup([q for q, *_ in self.percepted],
                            [(v, d) for _, v, d in self.percepted], t)

    def hypothetical(self, count: int) -> PredictedObject:
        """Uncompliant stationary object just beyond the visible field."""
        mu = self.s_visible + self.bound_sigmas * self.sigma
        dist = TruncatedNormal(mu, self.sigma, self.s_visible,
                               mu + self.bound_sigmas * self.sigma)
        dists = tuple(dist for _ in range(count))
        return PredictedObject(HYPOTHETICAL_ID, 1.0, {"A": dists, "B": dists})


@dataclass
class PlanningScene:
    """Frozen per-solve view: geometry, margins, and the active objects."""

    refpath: RefPath
    corridor_half_width: float
    objects: tuple[PredictedObject, ...]
    margin_front: float = 5.0
    a_max_brake: float = 8.0
    # Optional per-branch lateral band override (lo, hi) beyond the shared
    # prefix; used for two-lane pass maneuvers. None keeps the corridor.
    branch_band_a: Optional[tuple[float, float]] = None
    branch_band_b: Optional[tuple[float, float]] = None

    def objects_for_class(self, mclass: str) -> tuple[PredictedObject, ...]:
        return tuple(o for o in self.objects if mclass in o.steps)


@dataclass
class Scenario:
    """Full scenario: geometry, horizon, ego start, object traces, detector."""

    ref_path: RefPath
    corridor_half_width: float
    ego_s0: float
    ego_speed: float
    horizon_index: int           # index N of the last support point of alternative A
    step: float
    n_pin: int
    weights: "CostWeights"
    detector: DetectorModel
    objects: list[ObjectTrace] = field(default_factory=list)
    fov: Optional[FovBoundary] = None
    a_max_brake: float = 8.0
    a_comfort: float = 2.0
    intention_entropy_threshold: float = 0.55
    margin_front: float = 5.0
    branch_band_a: Optional[tuple[float, float]] = None
    branch_band_b: Optional[tuple[float, float]] = None

    def __post_init__(self):
        if self.horizon_index < 2 * self.n_pin + 2:
            raise ValueError(f"horizon index {self.horizon_index} too short for "
                             f"pin index {self.n_pin}")
        if self.step <= 0.0 or self.n_pin < 1:
            raise ValueError("need positive step width and at least one pinned step")
        if self.corridor_half_width <= 0.0:
            raise ValueError("corridor half width must be positive")
        if self.ego_speed < 0.0:
            raise ValueError("ego speed must be nonnegative")
        if self.a_max_brake <= 0.0 or self.a_comfort <= 0.0:
            raise ValueError("braking limits must be positive")

    @property
    def replan_interval(self) -> float:
        return self.n_pin * self.step

    @property
    def prediction_steps(self) -> int:
        # Alternative B runs n_pin steps past the horizon index.
        return self.horizon_index + self.n_pin + 1

    def active_traces(self, t: float) -> list[tuple[ObjectTrace, float]]:
        out = []
        for trace in self.objects:
            p = trace.p_exist_at(t)
            if p is not None:
                out.append((trace, p))
        return out

    def focal_trace(self, t: float) -> Optional[tuple[ObjectTrace, float]]:
        """The object whose existence probability drives the maneuver weights."""
        active = self.active_traces(t)
        if not active:
            return None
        flagged = [a for a in active if a[0].drives_weights]
        if flagged:
            return flagged[0]
        return min(active, key=lambda a: (a[1], a[0].object_id))

    def planning_scene(self, t: float, fov_active: bool = True) -> PlanningScene:
        count = self.prediction_steps
        objs = []
        for trace, _ in self.active_traces(t):
            snap = trace.predict(t, count, self.step)
            if snap is not None:
                objs.append(snap)
        if self.fov is not None and fov_active:
            objs.append(self.fov.hypothetical(count))
        return PlanningScene(
            refpath=self.ref_path,
            corridor_half_width=self.corridor_half_width,
            objects=tuple(objs),
            margin_front=self.margin_front,
            a_max_brake=self.a_max_brake,
            branch_band_a=self.branch_band_a,
            branch_band_b=self.branch_band_b,
        )

    def bootstrap_plan(self, t0: float = 0.0):
        """Constant-velocity previous plan covering one interval before t0.

        Stands in for the plan that committed the motion executed while the
        first real plan is being computed.
        """
        from .trajectory import Trajectory

        start = t0 - self.n_pin * self.step
        count = self.horizon_index + 1
        s_vals = (self.ego_s0 - self.n_pin * self.step * self.ego_speed
                  + self.ego_speed * self.step * np.arange(count))
        pts = self.ref_path.point_at(s_vals)
        return Trajectory(pts, self.step, start, self.n_pin)
