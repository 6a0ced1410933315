"""Second-order witness: a windowed scalar potential with nested sawtooth Hessians.

In the eigenframe ``(s, t) = (q1 . x, q2 . x)`` of the symmetric laminate every
split difference is a multiple of ``q1 (x) q1`` or ``q2 (x) q2``, so each split
is realized by a one-dimensional profile ``c eps^2 S(z / eps)`` whose second
derivative takes the two split values. Deeper splits are localized to the
phase they refine with smooth periodic cutoffs, and the whole potential is
multiplied by a smooth window so it vanishes near the boundary. Integrals of
the Hessian are taken from central differences at two resolutions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import mat2
from .laminate import NotSymmetric, ZeroMatrix, integrate, iterated_laminate
from .mat2 import as_mat2

SPLITS = ((Fraction(1, 3), 1), (Fraction(1, 4), 0))  # (lambda, frame axis of the normal)


@dataclass
class HessianReport:
    depth: int
    grid_n: int
    l1_offdiag: float
    l1_diag: float
    ratio: float
    predicted_ratio: float
    richardson_error: float  # relative, worst of the two norms
    coarse_ratio: float
    window: float
    finest_period_cells: float  # finest sawtooth period measured in fine-grid cells

    def to_json(self) -> dict:
        return dict(self.__dict__)


def _smoothstep(x: np.ndarray) -> np.ndarray:
    """C^2 ramp from 0 (x <= 0) to 1 (x >= 1)."""
    x = np.clip(x, 0.0, 1.0)
    return x * x * x * (10 - 15 * x + 6 * x * x)


def sawtooth(u: np.ndarray, lam: float) -> np.ndarray:
    """1-periodic C^{1,1} profile with ``S'' = 1 - lam`` on ``[0, lam)`` and ``-lam`` after."""
    u = u - np.floor(u)
    mean_slope = lam * (1 - lam) / 2
    left = (1 - lam) * u * u / 2
    v = u - lam
    right = (1 - lam) * lam * lam / 2 + lam * (1 - lam) * v - lam * v * v / 2
    return np.where(u < lam, left, right) - mean_slope * u


def phase_cutoff(u: np.ndarray, lam: float, ramp: float) -> np.ndarray:
    """Periodic smooth indicator of the phase ``[lam, 1)`` with ramps of width ``ramp``."""
    u = u - np.floor(u)
    width = 1 - lam
    return _smoothstep((u - lam) / (ramp * width)) * _smoothstep((1 - u) / (ramp * width))


def _layout(depth: int, window: float, periods: int, ramp: float):
    """Periods of the ``2 depth`` nested sawtooth profiles, coarsest first."""
    eps = []
    size = window if window < 1 else 1.0
    e = size / periods
    for _ in range(depth):
        for lam, _ax in SPLITS:
            eps.append(e)
            e = (1 - float(lam)) * (1 - 2 * ramp) * e / periods
    return eps


def potential(xy: tuple[np.ndarray, np.ndarray], a, depth: int, window: float = 0.9, periods: int = 2, ramp: float = 0.1):
    """The perturbation potential on points ``xy`` (physical coordinates)."""
    a = as_mat2(a)
    q, l1, l2 = mat2.sym_eig(a)
    y = l2 / l1
    sign = 1.0 if l1 > 0 else -1.0
    x1, x2 = xy
    c1, c2 = (0.5, 0.5) if window < 1 else (0.0, 0.0)
    s = q[0, 0] * (x1 - c1) + q[1, 0] * (x2 - c2)
    t = q[0, 1] * (x1 - c1) + q[1, 1] * (x2 - c2)
    coords = (s, t)
    coef = (3.0 * y, -4.0)  # split differences along q2 (x) q2 and q1 (x) q1
    eps = _layout(depth, window, periods, ramp)
    psi = np.zeros_like(x1)
    mask = np.ones_like(x1)
    i = 0
    for j in range(depth):
        for (lam, ax), c in zip(SPLITS, coef):
            z = coords[ax] / eps[i]
            psi += sign * (2.0**j) * c * eps[i] ** 2 * sawtooth(z, float(lam)) * mask
            mask = mask * phase_cutoff(z, float(lam), ramp)
            i += 1
    if window < 1:
        psi *= _window(x1, window) * _window(x2, window)
    return psi


def _window(x: np.ndarray, window: float) -> np.ndarray:
    margin = (1 - window) / 2
    return _smoothstep(x / margin) * _smoothstep((1 - x) / margin)


def _hessian_norms(a, depth: int, n: int, window: float, periods: int, ramp: float) -> tuple[float, float]:
    h = 1.0 / n
    periodic = window >= 1
    g = np.arange(n + (0 if periodic else 1)) * h
    x1, x2 = np.meshgrid(g, g, indexing="ij")
    phi = potential((x1, x2), a, depth, window, periods, ramp)
    if periodic:
        d11 = (np.roll(phi, -1, 0) - 2 * phi + np.roll(phi, 1, 0)) / h**2
        d22 = (np.roll(phi, -1, 1) - 2 * phi + np.roll(phi, 1, 1)) / h**2
        pp = np.roll(np.roll(phi, -1, 0), -1, 1)
        mm = np.roll(np.roll(phi, 1, 0), 1, 1)
        pm = np.roll(np.roll(phi, -1, 0), 1, 1)
        mp = np.roll(np.roll(phi, 1, 0), -1, 1)
        d12 = (pp - pm - mp + mm) / (4 * h * h)
    else:
        c = phi[1:-1, 1:-1]
        d11 = (phi[2:, 1:-1] - 2 * c + phi[:-2, 1:-1]) / h**2
        d22 = (phi[1:-1, 2:] - 2 * c + phi[1:-1, :-2]) / h**2
        d12 = (phi[2:, 2:] - phi[2:, :-2] - phi[:-2, 2:] + phi[:-2, :-2]) / (4 * h * h)
    off = math.fsum(np.abs(d12).sum(axis=1).tolist()) * h * h
    dia = math.fsum((np.abs(d11) + np.abs(d22)).sum(axis=1).tolist()) * h * h
    return off, dia


def mean_hessian_periodic(a, depth: int, n: int, periods: int = 2, ramp: float = 0.1) -> np.ndarray:
    """Mean finite-difference Hessian of ``x.Bx/2 + psi`` with no window."""
    a = as_mat2(a)
    nu = iterated_laminate(a, 1, symmetric=True)
    h = 1.0 / n
    g = np.arange(n) * h
    x1, x2 = np.meshgrid(g, g, indexing="ij")
    phi = potential((x1, x2), a, depth, 1.0, periods, ramp)
    d11 = (np.roll(phi, -1, 0) - 2 * phi + np.roll(phi, 1, 0)) / h**2
    d22 = (np.roll(phi, -1, 1) - 2 * phi + np.roll(phi, 1, 1)) / h**2
    d12 = (
        np.roll(np.roll(phi, -1, 0), -1, 1)
        - np.roll(np.roll(phi, -1, 0), 1, 1)
        - np.roll(np.roll(phi, 1, 0), -1, 1)
        + np.roll(np.roll(phi, 1, 0), 1, 1)
    ) / (4 * h * h)
    return nu.barycenter + np.array([[d11.mean(), d12.mean()], [d12.mean(), d22.mean()]])


def predicted_ratio(a, depth: int) -> float:
    """``int |d12| / int (|d11| + |d22|)`` for the exact iterated symmetric laminate."""
    nu = iterated_laminate(a, depth, symmetric=True)
    b = nu.barycenter
    off = integrate(nu, lambda m: abs(m[0, 1] - b[0, 1]))
    dia = integrate(nu, lambda m: abs(m[0, 0] - b[0, 0]) + abs(m[1, 1] - b[1, 1]))
    return off / dia if dia > 0 else math.inf


def build_witness_hessian(
    a, depth: int, grid_n: int, window: float = 0.9, periods: int = 2, ramp: float = 0.1
) -> HessianReport:
    """Evaluate the windowed potential at ``grid_n`` and ``2 grid_n`` and report the finer norms.

    The Richardson estimate for a second-order scheme is ``|I_2n - I_n| / 3``;
    ``richardson_error`` is that estimate relative to the reported norm.
    """
    a = as_mat2(a)
    if not np.any(a):
        raise ZeroMatrix("witness requires a nonzero matrix")
    if not mat2.is_symmetric(a):
        raise NotSymmetric("Hessian witness requires a symmetric matrix")
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if grid_n < 256:
        raise ValueError("grid_n must be >= 256")
    if not 0 < window <= 1:
        raise ValueError("window must lie in (0, 1]")
    o1, d1 = _hessian_norms(a, depth, grid_n, window, periods, ramp)
    o2, d2 = _hessian_norms(a, depth, 2 * grid_n, window, periods, ramp)
    err = max(abs(o2 - o1) / 3 / o2 if o2 else 0.0, abs(d2 - d1) / 3 / d2 if d2 else 0.0)
    return HessianReport(
        depth=depth,
        grid_n=grid_n,
        l1_offdiag=o2,
        l1_diag=d2,
        ratio=o2 / d2 if d2 else math.inf,
        predicted_ratio=predicted_ratio(a, depth),
        richardson_error=err,
        coarse_ratio=o1 / d1 if d1 else math.inf,
        window=window,
        finest_period_cells=_layout(depth, window, periods, ramp)[-1] * 2 * grid_n,
    )
