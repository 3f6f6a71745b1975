"""Local optimizer for the single-alternative and combined planning problems.

All cost terms are smooth; inequalities are handled with an augmented
Lagrangian outer loop around damped Newton steps on a positive-semidefinite
curvature model. Everything is deterministic: identical inputs produce
bit-identical outputs.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .costs import (CostReport, CostWeights, TrajectoryCost, combined_cost,
                    maneuver_cost_terms)
from .probkit import ManeuverWeights
from .refpath import RefPath
from .safety import (ConstraintRecord, CorridorConstraint, StopConstraint,
                     YieldConstraint, constraint_set, stop_distance)
from .scene import PlanningScene
from .trajectory import CombinedVector, ManeuverId, Trajectory

__all__ = ["SolverConfig", "Solution", "solve_single", "solve_combined",
           "solve_fallback_z"]

VIOLATION_TOL = 1e-6


@dataclass(frozen=True)
class SolverConfig:
    max_outer_iters: int = 30
    max_inner_iters: int = 100
    convergence_tol: float = 1e-6       # infinity norm of the Lagrangian gradient
    penalty_init: float = 10.0
    penalty_growth: float = 8.0
    trust_or_damping: float = 1e-3      # initial Levenberg-style damping

    def __post_init__(self):
        if min(self.max_outer_iters, self.max_inner_iters) <= 0:
            raise ValueError("iteration limits must be positive")
        if self.convergence_tol <= 0.0 or self.penalty_init <= 0.0:
            raise ValueError("tolerances and penalties must be positive")
        if self.penalty_growth <= 1.0:
            raise ValueError("penalty growth must exceed 1")
        if self.trust_or_damping < 0.0:
            raise ValueError("damping seed must be nonnegative")


@dataclass
class Solution:
    vector: object                      # CombinedVector or Trajectory
    cost: CostReport
    kkt_residual: float
    constraint_violation: float
    converged: bool
    iterations: int
    wall_time: float
    violated_ids: tuple[str, ...] = ()


class _Maneuver:
    """One alternative inside a problem: cost model, weight, and the map from
    its trajectory indices to free-vector slots (-1 marks pinned points)."""

    def __init__(self, tag: str, model: TrajectoryCost, weight: float,
                 slot_of_index: np.ndarray) -> None:
        self.tag = tag
        self.model = model
        self.weight = weight
        self.slots = slot_of_index
        self.free_mask = slot_of_index >= 0
        # interleaved coordinate indices for Hessian block mapping
        pt = np.nonzero(self.free_mask)[0]
        sl = slot_of_index[pt]
        self.coord_traj = np.stack([2 * pt, 2 * pt + 1], axis=1).ravel()
        self.coord_free = np.stack([2 * sl, 2 * sl + 1], axis=1).ravel()


class _Workspace:
    """Evaluates cost, gradient, curvature, and constraint rows over the free
    coordinates of either a single-alternative or a combined problem."""

    def __init__(self, refpath: RefPath, step: float, n_free: int,
                 maneuvers: list[_Maneuver],
                 materialize, records: list[ConstraintRecord]) -> None:
        self.refpath = refpath
        self.step = step
        self.n_free = n_free
        self.dim = 2 * n_free
        self.maneuvers = maneuvers
        self.materialize = materialize  # z -> dict tag -> (n, 2) points
        self._build_rows(records)

    # -- constraint rows ----------------------------------------------------

    def _build_rows(self, records: list[ConstraintRecord]) -> None:
        by_tag = {m.tag: m for m in self.maneuvers}
        anchor = self.maneuvers[0].tag  # prefix rows evaluate on this alternative
        stop, yield_, corr = [], [], []
        row_ids: list[str] = []
        row = 0
        for rec in records:
            if isinstance(rec, StopConstraint):
                if not rec.active:
                    continue
                for i, b in zip(rec.indices, rec.bounds):
                    stop.append((row, i, b, rec.a_max_brake))
                    row_ids.append(f"stop:{rec.object_id}:{i}")
                    row += 1
            elif isinstance(rec, YieldConstraint):
                if rec.branch not in by_tag:
                    continue
                for j, b in zip(rec.indices, rec.bounds):
                    yield_.append((row, rec.branch, j, b - rec.margin))
                    row_ids.append(f"yield:{rec.object_id}:{rec.branch}:{j}")
                    row += 1
            elif isinstance(rec, CorridorConstraint):
                tag = anchor if rec.scope == "prefix" else rec.scope
                if tag not in by_tag:
                    continue
                for j in rec.indices:
                    corr.append((row, tag, j, 1.0, rec.hi))
                    row_ids.append(f"corridor:{rec.scope}:{j}:hi")
                    corr.append((row + 1, tag, j, -1.0, -rec.lo))
                    row_ids.append(f"corridor:{rec.scope}:{j}:lo")
                    row += 2
            else:
                raise TypeError(f"unknown constraint record {type(rec).__name__}")
        self.n_rows = row
        self.row_ids = row_ids
        self._anchor = anchor

        self._stop = _as_columns(stop, ("row", "idx", "bound", "a_max"))
        self._yield = {}
        for tag in by_tag:
            rows = [(r, j, b) for r, t, j, b in yield_ if t == tag]
            self._yield[tag] = _as_columns(rows, ("row", "idx", "bound"))
        self._corr = {}
        for tag in by_tag:
            rows = [(r, j, sgn, val) for r, t, j, sgn, val in corr if t == tag]
            self._corr[tag] = _as_columns(rows, ("row", "idx", "sign", "value"))

    def _frames(self, pts_by_tag):
        return {tag: self.refpath.frames(p) for tag, p in pts_by_tag.items()}

    def con_values(self, pts_by_tag, frames=None) -> np.ndarray:
        if self.n_rows == 0:
            return np.zeros(0)
        frames = frames or self._frames(pts_by_tag)
        g = np.zeros(self.n_rows)
        st = self._stop
        if st is not None:
            s = frames[self._anchor][0]
            i = st["idx"].astype(int)
            v = np.maximum((s[i + 1] - s[i]) / self.step, 0.0)
            g[st["row"].astype(int)] = s[i] + v * v / (2.0 * st["a_max"]) - st["bound"]
        for tag, cols in self._yield.items():
            if cols is None:
                continue
            s = frames[tag][0]
            j = cols["idx"].astype(int)
            g[cols["row"].astype(int)] = s[j] - cols["bound"]
        for tag, cols in self._corr.items():
            if cols is None:
                continue
            d = frames[tag][1]
            j = cols["idx"].astype(int)
            g[cols["row"].astype(int)] = cols["sign"] * d[j] - cols["value"]
        return g

    def con_values_jac(self, pts_by_tag, frames=None):
        if self.n_rows == 0:
            return np.zeros(0), np.zeros((0, self.dim))
        frames = frames or self._frames(pts_by_tag)
        g = self.con_values(pts_by_tag, frames)
        J = np.zeros((self.n_rows, self.dim))
        by_tag = {m.tag: m for m in self.maneuvers}

        st = self._stop
        if st is not None:
            man = by_tag[self._anchor]
            s, _, tang, _ = frames[self._anchor]
            i = st["idx"].astype(int)
            rows = st["row"].astype(int)
            v = np.maximum((s[i + 1] - s[i]) / self.step, 0.0)
            coef_i = 1.0 - v / (st["a_max"] * self.step)
            coef_ip = v / (st["a_max"] * self.step)
            self._scatter(J, rows, man.slots[i], tang[i] * coef_i[:, None])
            self._scatter(J, rows, man.slots[i + 1], tang[i + 1] * coef_ip[:, None])
        for tag, cols in self._yield.items():
            if cols is None:
                continue
            man = by_tag[tag]
            _, _, tang, _ = frames[tag]
            j = cols["idx"].astype(int)
            self._scatter(J, cols["row"].astype(int), man.slots[j], tang[j])
        for tag, cols in self._corr.items():
            if cols is None:
                continue
            man = by_tag[tag]
            _, _, _, normal = frames[tag]
            j = cols["idx"].astype(int)
            self._scatter(J, cols["row"].astype(int), man.slots[j],
                          normal[j] * cols["sign"][:, None])
        return g, J

    @staticmethod
    def _scatter(J: np.ndarray, rows: np.ndarray, slots: np.ndarray,
                 vec: np.ndarray) -> None:
        ok = slots >= 0
        if not np.any(ok):
            return
        r, sl = rows[ok], slots[ok]
        J[r, 2 * sl] += vec[ok, 0]
        J[r, 2 * sl + 1] += vec[ok, 1]

    # -- objective ----------------------------------------------------------

    def f_value(self, pts_by_tag) -> float:
        return float(sum(m.weight * m.model.value(pts_by_tag[m.tag])
                         for m in self.maneuvers))

    def f_grad(self, pts_by_tag) -> tuple[float, np.ndarray]:
        total = 0.0
        g = np.zeros(self.dim)
        for m in self.maneuvers:
            f_m, g_m = m.model.value_grad(pts_by_tag[m.tag])
            total += m.weight * f_m
            flat = g_m[m.free_mask].ravel()
            g[self._free_coords(m)] += m.weight * flat
        return total, g

    def hessian(self, pts_by_tag) -> np.ndarray:
        H = np.zeros((self.dim, self.dim))
        for m in self.maneuvers:
            if m.weight == 0.0:
                continue
            Hm = m.model.hessian_model(pts_by_tag[m.tag])
            H[np.ix_(m.coord_free, m.coord_free)] += (
                m.weight * Hm[np.ix_(m.coord_traj, m.coord_traj)])
        return H

    @staticmethod
    def _free_coords(m: _Maneuver) -> np.ndarray:
        return m.coord_free


def _as_columns(rows, names):
    if not rows:
        return None
    arr = np.array(rows, dtype=float)
    return {name: arr[:, k] for k, name in enumerate(names)}


# -- problem construction ----------------------------------------------------


def _combined_workspace(base: CombinedVector, w: CostWeights, mw: ManeuverWeights,
                        scene: PlanningScene, a_max: float) -> tuple[_Workspace, np.ndarray]:
    n_pin = base.n_pin
    ns, na, nb = base.shared.shape[0], base.branch_a.shape[0], base.branch_b.shape[0]
    n_a, n_b = 2 * n_pin + 1 + na, 2 * n_pin + 1 + nb

    def slots(n_points: int, branch_offset: int) -> np.ndarray:
        m = np.full(n_points, -1, dtype=int)
        for i in range(n_pin + 1, 2 * n_pin + 1):
            m[i] = i - (n_pin + 1)
        for i in range(2 * n_pin + 1, n_points):
            m[i] = ns + branch_offset + (i - (2 * n_pin + 1))
        return m

    model_a = TrajectoryCost(n_a, base.step, w, scene.refpath, scene.objects,
                             "A", scene.margin_front)
    model_b = TrajectoryCost(n_b, base.step, w, scene.refpath, scene.objects,
                             "B", scene.margin_front)
    maneuvers = [
        _Maneuver("A", model_a, mw.w_a, slots(n_a, 0)),
        _Maneuver("B", model_b, mw.w_b, slots(n_b, na)),
    ]
    pinned = base.pinned

    def materialize(z: np.ndarray):
        blocks = z.reshape(-1, 2)
        shared = blocks[:ns]
        prefix = np.vstack([pinned, shared])
        return {"A": np.vstack([prefix, blocks[ns:ns + na]]),
                "B": np.vstack([prefix, blocks[ns + na:]])}

    records = constraint_set(scene, base, a_max)
    ws = _Workspace(scene.refpath, base.step, ns + na + nb, maneuvers,
                    materialize, records)
    return ws, base.free_vector()


def _single_workspace(seed: Trajectory, tag: str, w: CostWeights,
                      scene: PlanningScene, a_max: float,
                      base: CombinedVector) -> tuple[_Workspace, np.ndarray]:
    n_pin = seed.pin_index
    n = seed.n
    slots = np.full(n, -1, dtype=int)
    slots[n_pin + 1:] = np.arange(n - n_pin - 1)

    model = TrajectoryCost(n, seed.step, w, scene.refpath, scene.objects,
                           tag, scene.margin_front)
    maneuvers = [_Maneuver(tag, model, 1.0, slots)]
    fixed = seed.points[:n_pin + 1].copy()

    def materialize(z: np.ndarray):
        return {tag: np.vstack([fixed, z.reshape(-1, 2)])}

    records = constraint_set(scene, base, a_max)
    ws = _Workspace(scene.refpath, seed.step, n - n_pin - 1, maneuvers,
                    materialize, records)
    return ws, seed.points[n_pin + 1:].ravel().copy()


# -- augmented-Lagrangian driver ---------------------------------------------


def _augmented_solve(ws: _Workspace, z0: np.ndarray, cfg: SolverConfig,
                     scale: float):
    z = z0.copy()
    lam = np.zeros(ws.n_rows)
    rho = cfg.penalty_init
    inner_tol = max(1e-13, 1e-3 * cfg.convergence_tol) * max(scale, 1e-12)
    total_iters = 0
    prev_viol = np.inf

    for outer in range(cfg.max_outer_iters):
        z, iters = _inner_newton(ws, z, lam, rho, cfg, inner_tol)
        total_iters += iters
        pts = ws.materialize(z)
        g = ws.con_values(pts)
        viol = float(np.max(g, initial=0.0))
        lam = np.maximum(0.0, lam + rho * g) if ws.n_rows else lam
        if ws.n_rows == 0 or viol <= 0.5 * VIOLATION_TOL:
            break
        if viol > 0.3 * prev_viol:
            rho = min(rho * cfg.penalty_growth, 1e12)
        prev_viol = viol

    pts = ws.materialize(z)
    g, J = ws.con_values_jac(pts)
    _, gf = ws.f_grad(pts)
    kkt = float(np.max(np.abs(gf + (J.T @ lam if ws.n_rows else 0.0))))
    viol = float(np.max(g, initial=0.0))
    violated = tuple(ws.row_ids[i] for i in np.nonzero(g > VIOLATION_TOL)[0])
    return z, kkt, max(viol, 0.0), total_iters, violated


def _inner_newton(ws: _Workspace, z: np.ndarray, lam: np.ndarray, rho: float,
                  cfg: SolverConfig, inner_tol: float):
    mu = max(cfg.trust_or_damping, 1e-12)
    iters = 0
    eye = np.eye(ws.dim)

    def lagrangian_grad(zz: np.ndarray):
        pts = ws.materialize(zz)
        f, gf = ws.f_grad(pts)
        if ws.n_rows == 0:
            return f, gf, None
        g, J = ws.con_values_jac(pts)
        act_pos = np.maximum(lam + rho * g, 0.0)
        L = f + float(np.sum(act_pos ** 2) - np.sum(lam ** 2)) / (2.0 * rho)
        return L, gf + J.T @ act_pos, (g, J, act_pos)

    def lagrangian_value(zz: np.ndarray) -> float:
        pts = ws.materialize(zz)
        f = ws.f_value(pts)
        if ws.n_rows == 0:
            return f
        g = ws.con_values(pts)
        act = np.maximum(lam + rho * g, 0.0)
        return f + float(np.sum(act * act) - np.sum(lam * lam)) / (2.0 * rho)

    L, gL, con = lagrangian_grad(z)
    for _ in range(cfg.max_inner_iters):
        g_norm = float(np.max(np.abs(gL), initial=0.0))
        if g_norm <= inner_tol:
            break

        H = ws.hessian(ws.materialize(z))
        if con is not None:
            _, J, act_pos = con
            active = act_pos > 0.0
            if np.any(active):
                Ja = J[active]
                H = H + rho * (Ja.T @ Ja)

        accepted = False
        z_new = z
        for _attempt in range(40):
            try:
                p = np.linalg.solve(H + mu * eye, -gL)
            except np.linalg.LinAlgError:
                mu *= 10.0
                continue
            slope = float(gL @ p)
            if slope > 0.0:
                mu *= 10.0
                continue
            if -slope <= 1e-15 * (1.0 + abs(L)):
                # The objective decrease is below the floating-point floor;
                # verify the Newton step by gradient reduction instead.
                L_try, gL_try, con_try = lagrangian_grad(z + p)
                if float(np.max(np.abs(gL_try), initial=0.0)) <= 0.9 * g_norm:
                    z = z + p
                    L, gL, con = L_try, gL_try, con_try
                    iters += 1
                    accepted = True
                    break
                return z, iters
            alpha = 1.0
            for _ls in range(30):
                z_try = z + alpha * p
                L_try = lagrangian_value(z_try)
                if L_try <= L + 1e-4 * alpha * slope:
                    accepted = True
                    z_new = z_try
                    break
                alpha *= 0.5
            if accepted:
                z = z_new
                L, gL, con = lagrangian_grad(z)
                iters += 1
                break
            mu *= 10.0
            if mu > 1e14:
                break
        if not accepted:
            break
        mu = max(mu / 3.0, 1e-12)
    return z, iters


# -- public entry points -------------------------------------------------------


def solve_combined(seed: CombinedVector, mw: ManeuverWeights, scene: PlanningScene,
                   weights: CostWeights, cfg: SolverConfig | None = None) -> Solution:
    """Minimize the weighted two-alternative cost subject to the union of both
    alternatives' constraints. Pinned points pass through bit-unchanged."""
    cfg = cfg or SolverConfig()
    start = time.perf_counter()
    ws, z0 = _combined_workspace(seed, weights, mw, scene, scene.a_max_brake)
    scale = mw.w_a + mw.w_b
    z, kkt, viol, iters, violated = _augmented_solve(ws, z0, cfg, scale)
    out = seed.with_free_vector(z)
    report = combined_cost(out, weights, mw, scene)
    wall = time.perf_counter() - start
    converged = viol <= VIOLATION_TOL and kkt <= cfg.convergence_tol * max(scale, 1e-12)
    return Solution(out, report, kkt, viol, converged, iters, wall, violated)


def solve_single(seed: Trajectory, maneuver: ManeuverId, scene: PlanningScene,
                 weights: CostWeights, cfg: SolverConfig | None = None,
                 base: CombinedVector | None = None) -> Solution:
    """Minimize one alternative's cost subject to its own constraints.

    `base` supplies the combined pin structure used to generate the constraint
    records; when omitted it is reconstructed from the seed.
    """
    cfg = cfg or SolverConfig()
    if maneuver not in (ManeuverId.A, ManeuverId.B):
        raise ValueError(f"can only solve maneuver A or B, got {maneuver}")
    tag = maneuver.value
    start = time.perf_counter()
    if base is None:
        base = _base_from_single(seed, tag)
    ws, z0 = _single_workspace(seed, tag, weights, scene,
                               scene.a_max_brake, base)
    z, kkt, viol, iters, violated = _augmented_solve(ws, z0, cfg, 1.0)
    pts = np.vstack([seed.points[:seed.pin_index + 1], z.reshape(-1, 2)])
    out = Trajectory(pts, seed.step, seed.t0, seed.pin_index)
    terms = maneuver_cost_terms(out, weights, scene, tag)
    j = float(sum(terms.values()))
    per_m = (j, math.nan) if tag == "A" else (math.nan, j)
    report = CostReport(total=j, per_term=dict(terms), per_maneuver=per_m)
    wall = time.perf_counter() - start
    converged = viol <= VIOLATION_TOL and kkt <= cfg.convergence_tol
    return Solution(out, report, kkt, viol, converged, iters, wall, violated)


def _base_from_single(seed: Trajectory, tag: str) -> CombinedVector:
    """Minimal combined structure sharing the seed's pin layout (for the
    constraint builder, which indexes both branches)."""
    n_pin = seed.pin_index
    if tag == "A":
        n_a = seed.n
    else:
        n_a = seed.n - n_pin
    cut = 2 * n_pin + 1
    prefix = seed.points[:cut]
    branch_a = np.zeros((n_a - cut, 2)) if tag == "B" else seed.points[cut:]
    branch_b = np.zeros((n_a - cut + n_pin, 2)) if tag == "A" else seed.points[cut:]
    return CombinedVector(prefix[:n_pin + 1], prefix[n_pin + 1:],
                          branch_a, branch_b, seed.step, seed.t0)


def solve_fallback_z(refpath: RefPath, s0: float, v0: float, a_max: float,
                     step: float, n_points: int, t0: float = 0.0,
                     pin_index: int = 0) -> Trajectory:
    """Full-braking profile along the reference path, sampled at the step width.

    Constant deceleration to standstill; the terminal point sits exactly
    stop_distance(v0, a_max) beyond the start.
    """
    if v0 < 0.0:
        raise ValueError(f"speed must be nonnegative, got {v0}")
    t = step * np.arange(n_points)
    t_stop = v0 / a_max
    tt = np.minimum(t, t_stop)
    s = s0 + v0 * tt - 0.5 * a_max * tt * tt
    return Trajectory(refpath.point_at(s), step, t0, pin_index)
