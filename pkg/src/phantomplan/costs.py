"""Cost terms over support-point trajectories: forward-difference smoothness,
soft chance-collision mass via the truncated-normal cdf, and the weighted
two-alternative objective with analytic gradients.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .probkit import ManeuverWeights, normal_cdf, _normal_pdf
from .refpath import RefPath
from .scene import PlanningScene, PredictedObject
from .trajectory import CombinedVector, ManeuverId, Trajectory, _diff_matrix

__all__ = [
    "CostWeights",
    "CostReport",
    "smoothness_cost",
    "collision_soft_cost",
    "combined_cost",
    "combined_gradient",
    "TrajectoryCost",
]

TERM_NAMES = ("jerk", "accel", "velocity", "offset", "collision")


@dataclass(frozen=True)
class CostWeights:
    """Weights of the per-step residual terms.

    jerk must stay positive: third-difference damping is the core smoothness
    term and the optimizer relies on its curvature.
    """

    jerk: float = 1.0
    accel: float = 0.0
    velocity_track: float = 0.0
    v_ref: float = 0.0
    collision_soft: float = 0.0
    path_offset: float = 0.0

    def __post_init__(self):
        for name in ("jerk", "accel", "velocity_track", "collision_soft", "path_offset"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"cost weight {name} must be nonnegative")
        if self.jerk <= 0.0:
            raise ValueError("jerk weight must be positive")

    def replace(self, **kw) -> "CostWeights":
        return replace(self, **kw)


@dataclass(frozen=True)
class CostReport:
    total: float
    per_term: dict[str, float]
    per_maneuver: tuple[float, float]  # unweighted (J_A, J_B)


class _ObjectColumns:
    """Per-step distribution parameters of one object, unpacked to arrays."""

    def __init__(self, obj: PredictedObject, mclass: str, n: int) -> None:
        seq = obj.steps_for(mclass)
        if len(seq) < n:
            raise ValueError(f"object {obj.object_id!r} provides {len(seq)} "
                             f"prediction steps, trajectory needs {n}")
        self.mu = np.array([d.mu for d in seq[:n]])
        self.sigma = np.array([d.sigma for d in seq[:n]])
        self.lower = np.array([d.lower for d in seq[:n]])
        self.upper = np.array([d.upper for d in seq[:n]])
        self.phi_lo = normal_cdf((self.lower - self.mu) / self.sigma)
        phi_hi = normal_cdf((self.upper - self.mu) / self.sigma)
        self.mass = phi_hi - self.phi_lo

    def cdf(self, x: np.ndarray) -> np.ndarray:
        raw = (normal_cdf((x - self.mu) / self.sigma) - self.phi_lo) / self.mass
        out = np.clip(raw, 0.0, 1.0)
        out = np.where(x <= self.lower, 0.0, out)
        return np.where(x >= self.upper, 1.0, out)

    def pdf(self, x: np.ndarray) -> np.ndarray:
        inside = (x >= self.lower) & (x <= self.upper)
        dens = _normal_pdf((x - self.mu) / self.sigma) / (self.sigma * self.mass)
        return np.where(inside, dens, 0.0)

    def pdf_slope(self, x: np.ndarray) -> np.ndarray:
        return -(x - self.mu) / self.sigma ** 2 * self.pdf(x)


class TrajectoryCost:
    """Evaluator for one maneuver alternative's cost on its own trajectory.

    Residual terms run over anchor indices i = 0 .. n-4 (the range on which
    all forward differences through third order exist); the collision mass is
    accumulated over every support point.
    """

    def __init__(self, n: int, step: float, weights: CostWeights, refpath: RefPath,
                 objects: tuple[PredictedObject, ...], mclass: str,
                 margin_front: float) -> None:
        if n < 4:
            raise ValueError(f"need at least 4 points, got {n}")
        self.n = n
        self.step = step
        self.w = weights
        self.refpath = refpath
        self.margin = margin_front
        self.mclass = mclass
        self.columns = [_ObjectColumns(o, mclass, n)
                        for o in objects if mclass in o.steps]

        m = n - 3  # anchor count
        self._d3 = _diff_matrix(n, 3) / step ** 3                    # (m, n)
        self._d2 = _diff_matrix(n, 2)[:m] / step ** 2                # (m, n)
        self._d1 = _diff_matrix(n, 1)[:m] / step                     # (m, n)
        self._h_quad = (2.0 * weights.jerk * (self._d3.T @ self._d3)
                        + 2.0 * weights.accel * (self._d2.T @ self._d2))

    @property
    def _wants_collision(self) -> bool:
        return self.w.collision_soft > 0.0 and bool(self.columns)

    def term_values(self, pts: np.ndarray) -> dict[str, float]:
        w = self.w
        m = self.n - 3
        out = dict.fromkeys(TERM_NAMES, 0.0)
        jerk = self._d3 @ pts
        out["jerk"] = w.jerk * float(np.sum(jerk * jerk))
        if w.accel > 0.0:
            acc = self._d2 @ pts
            out["accel"] = w.accel * float(np.sum(acc * acc))
        if w.velocity_track > 0.0:
            vel = self._d1 @ pts
            speed = np.hypot(vel[:, 0], vel[:, 1])
            out["velocity"] = w.velocity_track * float(np.sum((speed - w.v_ref) ** 2))
        if w.path_offset > 0.0 or self._wants_collision:
            s, d = self.refpath.project(pts)
            if w.path_offset > 0.0:
                out["offset"] = w.path_offset * float(np.sum(d[:m] ** 2))
            if self._wants_collision:
                probe = s + self.margin
                mass = sum(float(np.sum(col.cdf(probe))) for col in self.columns)
                out["collision"] = w.collision_soft * mass
        return out

    def value(self, pts: np.ndarray) -> float:
        return float(sum(self.term_values(pts).values()))

    def value_grad(self, pts: np.ndarray) -> tuple[float, np.ndarray]:
        w = self.w
        m = self.n - 3
        total = 0.0
        grad = np.zeros_like(pts)

        jerk = self._d3 @ pts
        total += w.jerk * float(np.sum(jerk * jerk))
        grad += 2.0 * w.jerk * (self._d3.T @ jerk)

        if w.accel > 0.0:
            acc = self._d2 @ pts
            total += w.accel * float(np.sum(acc * acc))
            grad += 2.0 * w.accel * (self._d2.T @ acc)

        if w.velocity_track > 0.0:
            vel = self._d1 @ pts
            speed = np.hypot(vel[:, 0], vel[:, 1])
            resid = speed - w.v_ref
            total += w.velocity_track * float(np.sum(resid * resid))
            unit = vel / np.where(speed > 0.0, speed, 1.0)[:, None]
            grad += 2.0 * w.velocity_track * (self._d1.T @ (resid[:, None] * unit))

        if w.path_offset > 0.0 or self._wants_collision:
            s, d, tang, normal = self.refpath.frames(pts)
            if w.path_offset > 0.0:
                total += w.path_offset * float(np.sum(d[:m] ** 2))
                grad[:m] += 2.0 * w.path_offset * d[:m, None] * normal[:m]
            if self._wants_collision:
                probe = s + self.margin
                for col in self.columns:
                    total += w.collision_soft * float(np.sum(col.cdf(probe)))
                    grad += w.collision_soft * col.pdf(probe)[:, None] * tang
        return total, grad

    def hessian_model(self, pts: np.ndarray) -> np.ndarray:
        """PSD curvature model on the flattened (2n,) coordinates.

        Quadratic terms contribute exactly; the speed and collision terms
        contribute their Gauss-Newton / positive-part curvature.
        """
        w = self.w
        n = self.n
        m = n - 3
        H = np.zeros((2 * n, 2 * n))
        H[0::2, 0::2] = self._h_quad
        H[1::2, 1::2] = self._h_quad

        if w.velocity_track > 0.0:
            vel = self._d1 @ pts
            speed = np.hypot(vel[:, 0], vel[:, 1])
            unit = vel / np.where(speed > 0.0, speed, 1.0)[:, None]
            J = np.zeros((m, 2 * n))
            J[:, 0::2] = self._d1 * unit[:, [0]]
            J[:, 1::2] = self._d1 * unit[:, [1]]
            H += 2.0 * w.velocity_track * (J.T @ J)

        if w.path_offset > 0.0 or self._wants_collision:
            s, d, tang, normal = self.refpath.frames(pts)
            if w.path_offset > 0.0:
                for i in range(m):
                    H[2 * i:2 * i + 2, 2 * i:2 * i + 2] += (
                        2.0 * w.path_offset * np.outer(normal[i], normal[i]))
            if self._wants_collision:
                probe = s + self.margin
                for col in self.columns:
                    slope = w.collision_soft * col.pdf_slope(probe)
                    for i in np.nonzero(slope > 0.0)[0]:
                        H[2 * i:2 * i + 2, 2 * i:2 * i + 2] += (
                            slope[i] * np.outer(tang[i], tang[i]))
        return H


def smoothness_cost(t: Trajectory, w: CostWeights, refpath: RefPath) -> float:
    """Forward-difference smoothness cost of one trajectory (no collision mass)."""
    model = TrajectoryCost(t.n, t.step, w.replace(collision_soft=0.0), refpath,
                           (), "A", 0.0)
    terms = model.term_values(t.points)
    return float(terms["jerk"] + terms["accel"] + terms["velocity"] + terms["offset"])


def collision_soft_cost(t: Trajectory, obj: PredictedObject, mclass: ManeuverId | str,
                        refpath: RefPath, margin_front: float = 5.0) -> float:
    """Accumulated probability mass of the object lying behind the ego front.

    Sums the object's positional cdf at each support point's longitudinal
    position plus the front margin; one unit per fully-passed step. Moving a
    support point forward along the path never decreases the result.
    """
    tag = mclass.value if isinstance(mclass, ManeuverId) else mclass
    col = _ObjectColumns(obj, tag, t.n)
    s, _ = refpath.project(t.points)
    return float(np.sum(col.cdf(s + margin_front)))


def maneuver_cost_terms(traj: Trajectory, w: CostWeights, scene: PlanningScene,
                        mclass: str) -> dict[str, float]:
    model = TrajectoryCost(traj.n, traj.step, w, scene.refpath,
                           scene.objects, mclass, scene.margin_front)
    return model.term_values(traj.points)


def combined_cost(v: CombinedVector, w: CostWeights, mw: ManeuverWeights,
                  scene: PlanningScene) -> CostReport:
    """Weighted two-alternative objective and its per-term breakdown."""
    terms_a = maneuver_cost_terms(v.extract(ManeuverId.A), w, scene, "A")
    terms_b = maneuver_cost_terms(v.extract(ManeuverId.B), w, scene, "B")
    j_a = float(sum(terms_a.values()))
    j_b = float(sum(terms_b.values()))
    per_term = {name: mw.w_a * terms_a[name] + mw.w_b * terms_b[name]
                for name in TERM_NAMES}
    total = mw.w_a * j_a + mw.w_b * j_b
    return CostReport(total=total, per_term=per_term, per_maneuver=(j_a, j_b))


def combined_gradient(v: CombinedVector, w: CostWeights, mw: ManeuverWeights,
                      scene: PlanningScene) -> np.ndarray:
    """Gradient of combined_cost over the free coordinates.

    Free layout is [shared, branch_a, branch_b] x (x, y); pinned coordinates
    are excluded and the shared block accumulates both alternatives' pulls.
    """
    n_pin = v.n_pin
    ta = v.extract(ManeuverId.A)
    tb = v.extract(ManeuverId.B)
    model_a = TrajectoryCost(ta.n, v.step, w, scene.refpath, scene.objects, "A",
                             scene.margin_front)
    model_b = TrajectoryCost(tb.n, v.step, w, scene.refpath, scene.objects, "B",
                             scene.margin_front)
    _, ga = model_a.value_grad(ta.points)
    _, gb = model_b.value_grad(tb.points)

    ns = v.shared.shape[0]
    na = v.branch_a.shape[0]
    nb = v.branch_b.shape[0]
    grad = np.zeros((ns + na + nb, 2))
    cut = 2 * n_pin + 1
    grad[:ns] = mw.w_a * ga[n_pin + 1:cut] + mw.w_b * gb[n_pin + 1:cut]
    grad[ns:ns + na] = mw.w_a * ga[cut:]
    grad[ns + na:] = mw.w_b * gb[cut:]
    return grad.ravel()
