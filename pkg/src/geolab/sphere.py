"""Analytic round-sphere backend, used for exact verification baselines."""

from __future__ import annotations

import math

import numpy as np

from .verify import TWO_PI, ClosedCurve, DistanceOracle


def _unit(v):
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n == 0:
        raise ValueError("zero vector")
    return v / n


def sphere_surface_id(radius: float = 1.0) -> str:
    return f"sphere:{radius:.12g}"


def sphere_oracle(radius: float = 1.0) -> DistanceOracle:
    """Exact great-circle distance oracle."""
    r = float(radius)

    # atan2(|p x q|, p.q) stays accurate near antipodes, unlike arccos
    def d(p, q):
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        return r * math.atan2(np.linalg.norm(np.cross(p, q)), float(np.dot(p, q)))

    def batch(pairs):
        P = np.array([p for p, _ in pairs], dtype=float)
        Q = np.array([q for _, q in pairs], dtype=float)
        cr = np.cross(P, Q)
        return r * np.arctan2(np.linalg.norm(cr, axis=1),
                              np.einsum("ij,ij->i", P, Q))

    return DistanceOracle(surface_id=sphere_surface_id(r), err=0.0,
                          fn=d, batch_fn=batch)


def great_circle(radius: float = 1.0, axis=(0.0, 0.0, 1.0),
                 n_breakpoints: int = 8) -> ClosedCurve:
    """Great circle in the plane orthogonal to `axis`, constant speed."""
    r = float(radius)
    w = _unit(axis)
    # orthonormal frame (u, v, w)
    aux = np.array([1.0, 0.0, 0.0])
    if abs(np.dot(aux, w)) > 0.9:
        aux = np.array([0.0, 1.0, 0.0])
    u = _unit(np.cross(w, aux))
    v = np.cross(w, u)

    def ev(t):
        return r * (math.cos(t) * u + math.sin(t) * v)

    ts = np.arange(n_breakpoints) * (TWO_PI / n_breakpoints)
    pts = [ev(t) for t in ts]
    dtheta = TWO_PI / n_breakpoints

    def interp(i, frac):
        return ev(ts[i] + frac * dtheta)

    def seglen(i):
        return r * dtheta

    return ClosedCurve(surface_id=sphere_surface_id(r),
                       total_length=TWO_PI * r, ts=ts, points=pts,
                       segment_interp=interp, segment_length_fn=seglen,
                       evaluator=ev)
