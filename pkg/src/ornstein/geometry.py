"""Convex polygon helpers: shoelace areas, orientation, clipping, containment."""
from __future__ import annotations

import math

import numpy as np


def signed_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    xs, ys = np.roll(x, -1), np.roll(y, -1)
    return 0.5 * math.fsum((x * ys - xs * y).tolist())


def area(poly: np.ndarray) -> float:
    return abs(signed_area(poly))


def ccw(poly: np.ndarray) -> np.ndarray:
    poly = np.asarray(poly, dtype=float)
    return poly[::-1].copy() if signed_area(poly) < 0 else poly


def rect(x0: float, y0: float, x1: float, y1: float) -> np.ndarray:
    return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=float)


def clip(subject: np.ndarray, clipper: np.ndarray) -> np.ndarray:
    """Intersection of two convex ccw polygons (Sutherland-Hodgman)."""
    out = [tuple(p) for p in subject]
    n = len(clipper)
    for i in range(n):
        if not out:
            break
        ax, ay = clipper[i]
        bx, by = clipper[(i + 1) % n]
        inp, out = out, []

        def side(p):
            return (bx - ax) * (p[1] - ay) - (by - ay) * (p[0] - ax)

        for j in range(len(inp)):
            p, q = inp[j], inp[(j + 1) % len(inp)]
            sp, sq = side(p), side(q)
            if sp >= 0:
                out.append(p)
            if (sp >= 0) != (sq >= 0):
                t = sp / (sp - sq)
                out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
    if len(out) < 3:
        return np.zeros((0, 2))
    return np.array(out)


def contains(poly: np.ndarray, pts: np.ndarray, tol: float) -> np.ndarray:
    """Closed containment test of points in a convex ccw polygon."""
    pts = np.atleast_2d(pts)
    a = poly
    b = np.roll(poly, -1, axis=0)
    e = b - a
    lengths = np.hypot(e[:, 0], e[:, 1])
    cross = e[None, :, 0] * (pts[:, None, 1] - a[None, :, 1]) - e[None, :, 1] * (pts[:, None, 0] - a[None, :, 0])
    return np.all(cross >= -tol * lengths[None, :], axis=1)


def bbox(poly: np.ndarray) -> tuple[float, float, float, float]:
    return float(poly[:, 0].min()), float(poly[:, 1].min()), float(poly[:, 0].max()), float(poly[:, 1].max())
