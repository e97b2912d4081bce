"""Planar polyline geometry: projections, arc-length parameterization, angles."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np


def wrap_angle(theta):
    """Wrap an angle (scalar or array) to the interval (-pi, pi]."""
    wrapped = np.mod(theta, 2.0 * np.pi)
    wrapped = np.where(wrapped > np.pi, wrapped - 2.0 * np.pi, wrapped)
    if np.ndim(theta) == 0:
        return float(wrapped)
    return wrapped


class PolylineProjection(NamedTuple):
    arc_length: float
    lateral_offset: float
    tangent_heading: float


class PolylinePath:
    """A polyline with precomputed segment data for fast repeated queries.

    Lateral offsets are signed: positive on the left of the direction of
    travel. The magnitude always equals the point-to-projection distance,
    so clamped (past-the-end) projections stay consistent with the
    corridor-width semantics of lane rules.
    """

    def __init__(self, points) -> None:
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] != 2:
            raise ValueError("polyline must be an (M, 2) array with M >= 2")
        if not np.all(np.isfinite(pts)):
            raise ValueError("polyline contains non-finite coordinates")
        seg = np.diff(pts, axis=0)
        seg_len = np.hypot(seg[:, 0], seg[:, 1])
        if np.any(seg_len <= 0.0):
            raise ValueError("polyline has a zero-length segment")
        self.points = pts
        self._seg = seg
        self._seg_len = seg_len
        self._seg_dir = seg / seg_len[:, None]
        self._cum = np.concatenate(([0.0], np.cumsum(seg_len)))
        self.total_length = float(self._cum[-1])

    def project(self, points: np.ndarray):
        """Project points (P, 2) onto the polyline.

        Returns (arc_length, lateral_offset, tangent_heading), each (P,).
        Ties between segments resolve to the earlier segment index.
        """
        p = np.atleast_2d(np.asarray(points, dtype=float))
        rel = p[:, None, :] - self.points[None, :-1, :]  # (P, S, 2)
        t = np.einsum("psk,sk->ps", rel, self._seg_dir) / self._seg_len[None, :]
        t = np.clip(t, 0.0, 1.0)
        proj = self.points[None, :-1, :] + t[:, :, None] * self._seg[None, :, :]
        diff = p[:, None, :] - proj
        dist2 = np.einsum("psk,psk->ps", diff, diff)
        best = np.argmin(dist2, axis=1)  # first minimum -> earlier segment
        idx = np.arange(p.shape[0])
        t_best = t[idx, best]
        arc = self._cum[best] + t_best * self._seg_len[best]
        d = self._seg_dir[best]
        off = p - proj[idx, best]
        cross = d[:, 0] * off[:, 1] - d[:, 1] * off[:, 0]
        dist = np.sqrt(dist2[idx, best])
        lateral = np.where(cross < 0.0, -dist, dist)
        heading = np.arctan2(d[:, 1], d[:, 0])
        return arc, lateral, heading

    def project_point(self, point) -> PolylineProjection:
        arc, lat, head = self.project(np.asarray(point, dtype=float)[None, :])
        return PolylineProjection(float(arc[0]), float(lat[0]), float(head[0]))

    def pose_at(self, arc_length):
        """Centerline point and tangent heading at the given arc length(s).

        Values outside [0, total_length] extrapolate along the end tangents.
        """
        s = np.atleast_1d(np.asarray(arc_length, dtype=float))
        seg_idx = np.clip(np.searchsorted(self._cum, s, side="right") - 1, 0, len(self._seg_len) - 1)
        ds = s - self._cum[seg_idx]
        pos = self.points[seg_idx] + ds[:, None] * self._seg_dir[seg_idx]
        d = self._seg_dir[seg_idx]
        heading = np.arctan2(d[:, 1], d[:, 0])
        if np.ndim(arc_length) == 0:
            return pos[0], float(heading[0])
        return pos, heading


def left_normal(heading):
    """Unit normal pointing to the left of the heading direction."""
    h = np.asarray(heading, dtype=float)
    n = np.stack([-np.sin(h), np.cos(h)], axis=-1)
    return n


def project_to_polyline(point, polyline) -> PolylineProjection:
    """Project a single (x, y) point onto a polyline given as a point sequence."""
    return PolylinePath(polyline).project_point(point)
