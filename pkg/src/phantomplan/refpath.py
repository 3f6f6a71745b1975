"""Polyline reference path: arc-length parametrization, projection of plan
points to longitudinal position / lateral offset, and the gradients of both
maps (piecewise constant per segment).
"""

from __future__ import annotations

import numpy as np

__all__ = ["RefPath"]


class RefPath:
    """Piecewise-linear reference path.

    Longitudinal position s is measured along the polyline from its first
    vertex; lateral offset d is positive to the left of the travel direction.
    Queries beyond either end extrapolate along the end segment, so plans may
    overrun the stored geometry without special-casing.
    """

    def __init__(self, vertices) -> None:
        pts = np.asarray(vertices, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
            raise ValueError(f"reference path needs at least two 2-D vertices, got {pts.shape}")
        seg = pts[1:] - pts[:-1]
        seg_len = np.hypot(seg[:, 0], seg[:, 1])
        if np.any(seg_len <= 0.0):
            raise ValueError("reference path vertices must have strictly increasing arc length")
        self.vertices = pts
        self._seg = seg
        self._seg_len = seg_len
        self._tangents = seg / seg_len[:, None]
        self._cum_s = np.concatenate([[0.0], np.cumsum(seg_len)])

    @property
    def length(self) -> float:
        return float(self._cum_s[-1])

    def _segment_of_s(self, s: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self._cum_s, s, side="right") - 1
        return np.clip(idx, 0, len(self._seg_len) - 1)

    def point_at(self, s):
        """Cartesian point at arc length s (scalar or array)."""
        s_arr = np.atleast_1d(np.asarray(s, dtype=float))
        idx = self._segment_of_s(s_arr)
        local = s_arr - self._cum_s[idx]
        out = self.vertices[idx] + self._tangents[idx] * local[:, None]
        return out[0] if np.ndim(s) == 0 else out

    def tangent_at(self, s):
        s_arr = np.atleast_1d(np.asarray(s, dtype=float))
        out = self._tangents[self._segment_of_s(s_arr)]
        return out[0] if np.ndim(s) == 0 else out

    def _project_full(self, p: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(s, d, winning segment index) for an (n, 2) point array."""
        rel = p[:, None, :] - self.vertices[None, :-1, :]        # (n, m, 2)
        t = np.einsum("nms,ms->nm", rel, self._seg) / np.square(self._seg_len)[None, :]
        m = t.shape[1]
        if m == 1:
            pass  # single segment: extrapolate both ways
        else:
            t[:, 1:-1] = np.clip(t[:, 1:-1], 0.0, 1.0)
            t[:, 0] = np.minimum(t[:, 0], 1.0)
            t[:, -1] = np.maximum(t[:, -1], 0.0)
        foot = self.vertices[None, :-1, :] + t[..., None] * self._seg[None, :, :]
        dist2 = np.sum(np.square(p[:, None, :] - foot), axis=-1)
        best = np.argmin(dist2, axis=1)

        rows = np.arange(p.shape[0])
        t_best = t[rows, best]
        tang = self._tangents[best]
        s = self._cum_s[best] + t_best * self._seg_len[best]
        d_vec = p - foot[rows, best]
        # Signed offset: positive to the left of the tangent.
        d = tang[:, 0] * d_vec[:, 1] - tang[:, 1] * d_vec[:, 0]
        return s, d, best

    def project(self, points: np.ndarray):
        """Longitudinal/lateral coordinates (s, d) of Cartesian points.

        Vectorized over an (n, 2) array; a single point of shape (2,) yields
        scalars. End segments extend to infinity, so s may be negative or
        exceed the path length.
        """
        p = np.asarray(points, dtype=float)
        single = p.ndim == 1
        s, d, _ = self._project_full(np.atleast_2d(p))
        if single:
            return float(s[0]), float(d[0])
        return s, d

    def frames(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(s, d, tangent, normal) per point.

        Within a segment, ds/dp is the segment tangent and dd/dp the left
        normal, so these arrays double as the projection Jacobian.
        """
        p = np.atleast_2d(np.asarray(points, dtype=float))
        s, d, best = self._project_full(p)
        tang = self._tangents[best]
        normal = np.stack([-tang[:, 1], tang[:, 0]], axis=1)
        return s, d, tang, normal
