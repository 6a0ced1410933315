"""Explicit piecewise-affine deformations realizing rank-one laminates.

Geometry is built in a *frame* ``xi = F x`` (``F`` orthogonal) in which every
rank-one split has a coordinate axis as its normal. A field is a tree of
:class:`Patch` templates: each patch is a convex polygon in local frame
coordinates with affine boundary data ``u = G xi``, tiled by explicit affine
pieces and by translated copies of child patches. Identical stripe cells are
stored once and instanced, which keeps deep self-similar constructions small
while every area, integral and continuity check stays exact up to rounding.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from fractions import Fraction
from typing import Callable

import numpy as np

from . import geometry as geo
from . import mat2
from .laminate import Laminate, SplitStep, Atom, integrate, iterated_laminate, merge_atoms, ornstein_laminate
from .mat2 import as_mat2
from .operators import LinearOperator

KAPPA = 1.0
MAX_DEPTH = 10
MIN_WIDTH = 1e-140  # areas stay far above the float underflow range


class WitnessError(ValueError):
    code = "witness_error"


class NotRankOne(WitnessError):
    code = "not_rank_one"


class BarycenterMismatch(WitnessError):
    code = "barycenter_mismatch"


class DepthTooLarge(WitnessError):
    code = "depth_too_large"


class FieldTooLarge(WitnessError):
    code = "field_too_large"


class LayerFractionInvalid(WitnessError):
    code = "layer_fraction_invalid"


@dataclass(eq=False)
class Piece:
    poly: np.ndarray  # ccw vertices, local frame coordinates
    grad: np.ndarray  # frame gradient
    const: np.ndarray  # u = grad @ xi + const
    tag: str  # "phase", "layer" or "unrefined"

    def u(self, pts: np.ndarray) -> np.ndarray:
        return pts @ self.grad.T + self.const


@dataclass(eq=False)
class Instances:
    patch: "Patch"
    shifts: np.ndarray  # (m, 2)
    consts: np.ndarray  # (m, 2)

    @property
    def count(self) -> int:
        return len(self.shifts)


@dataclass(eq=False)
class Patch:
    polygon: np.ndarray
    grad: np.ndarray
    pieces: list[Piece] = field(default_factory=list)
    children: list[Instances] = field(default_factory=list)
    label: str = ""

    @property
    def area(self) -> float:
        return geo.area(self.polygon)

    def walk(self):
        """Yield every distinct patch of the tree once."""
        seen = set()
        stack = [self]
        while stack:
            p = stack.pop()
            if id(p) in seen:
                continue
            seen.add(id(p))
            yield p
            stack.extend(c.patch for c in p.children)

    def region_count(self) -> int:
        memo: dict[int, int] = {}

        def count(p: Patch) -> int:
            if id(p) not in memo:
                memo[id(p)] = len(p.pieces) + sum(c.count * count(c.patch) for c in p.children)
            return memo[id(p)]

        return count(self)


@dataclass
class PiecewiseAffineField:
    root: Patch
    frame: np.ndarray  # xi = frame @ x
    boundary: np.ndarray  # physical B with u = B x on the boundary
    layer_fraction: float
    laminate: Laminate | None = None
    depth: int = 0

    def physical(self, frame_grad: np.ndarray) -> np.ndarray:
        return frame_grad @ self.frame

    def region_count(self) -> int:
        return self.root.region_count()


@dataclass
class WitnessReport:
    depth: int
    l1_p1: float
    l1_p2: float
    ratio: float
    predicted_mean_f: float
    measured_mean_f: float
    layer_area: float = 0.0

    def row(self) -> list:
        return [self.depth, self.l1_p1, self.l1_p2, self.ratio, self.predicted_mean_f, self.measured_mean_f]


# ---------------------------------------------------------------------------
# construction


@dataclass(frozen=True)
class SplitSpec:
    """Split the boundary gradient ``grad`` into ``grad + (1-lam) a (x) e`` and
    ``grad - lam a (x) e`` where ``e`` is the unit vector of ``axis``."""

    grad: np.ndarray
    a: np.ndarray
    lam: Fraction
    axis: int


def _st(ax: int):
    """Maps between (normal, tangent) coordinates and frame coordinates."""
    if ax == 0:
        return (lambda p: np.asarray(p, dtype=float)), (lambda v: np.asarray(v, dtype=float))
    return (lambda p: np.asarray(p, dtype=float)[..., ::-1].copy()), (lambda v: np.asarray(v, dtype=float)[::-1].copy())


def _period(S: float, T: float, lam: float, lf: float) -> tuple[int, float, float]:
    c = lam * (1 - lam)
    eps_max = lf * KAPPA * S * T / (c * (2 * T + (2 - lam) * S))
    n = max(1, math.ceil(S / eps_max - 2 * c / KAPPA))
    eps = S / (n + 2 * c / KAPPA)
    return n, eps, c * eps / KAPPA


ChildBuilder = Callable[[float, float], "Patch"]


def _cell(eps: float, T: float, w: float, spec: SplitSpec, child: ChildBuilder | None) -> Patch:
    to_xi, vec = _st(spec.axis)
    lam = float(spec.lam)
    le = lam * eps
    Gb, a = spec.grad, spec.a

    def piece(st_poly, alpha, beta, tag):
        g = Gb + np.outer(a, vec(alpha))
        return Piece(geo.ccw(to_xi(np.array(st_poly, dtype=float))), g, a * beta, tag)

    k = KAPPA
    rise, fall = (1 - lam, 0.0), (-lam, 0.0)
    pieces = [
        piece([(0, 0), (le, 0), (le, w)], (0, k), 0.0, "layer"),
        piece([(0, 0), (le, w), (le, T - w), (0, T)], rise, 0.0, "phase"),
        piece([(0, T), (le, T - w), (le, T)], (0, -k), k * T, "layer"),
        piece([(le, 0), (eps, 0), (le, w)], (0, k), 0.0, "layer"),
        piece([(le, T - w), (eps, T), (le, T)], (0, -k), k * T, "layer"),
    ]
    children = []
    if child is None:
        pieces.append(piece([(le, w), (eps, 0), (eps, T), (le, T - w)], fall, lam * eps, "phase"))
    else:
        pieces.append(piece([(le, w), (eps, 0), (eps, w)], fall, lam * eps, "unrefined"))
        pieces.append(piece([(le, T - w), (eps, T - w), (eps, T)], fall, lam * eps, "unrefined"))
        gr = Gb + np.outer(a, vec(fall))
        origin = to_xi(np.array([le, w]))
        dims = np.abs(to_xi(np.array([eps - le, T - 2 * w])))
        sub = child(float(dims[0]), float(dims[1]))
        if not np.allclose(sub.grad, gr, rtol=0, atol=1e-12 * max(1.0, np.abs(gr).max())):
            raise WitnessError("child patch boundary gradient does not match the refined phase")
        children.append(Instances(sub, origin[None, :], (gr @ origin + a * lam * eps)[None, :]))
    S_xi = np.abs(to_xi(np.array([eps, T])))
    return Patch(geo.rect(0, 0, S_xi[0], S_xi[1]), Gb.copy(), pieces, children, "cell")


def split_patch(lx: float, ly: float, spec: SplitSpec, lf: float, child: ChildBuilder | None = None) -> Patch:
    """Stripes normal to ``spec.axis`` on the rectangle ``[0,lx] x [0,ly]``.

    Stripes are cut off near the boundary by a cone of slope ``KAPPA`` so the
    field equals ``spec.grad @ xi`` on the rectangle's boundary. The period is
    the largest for which boundary layers and unrefined corners occupy at most
    the fraction ``lf`` of the area.
    """
    if min(lx, ly) < MIN_WIDTH:
        raise DepthTooLarge(f"region width {min(lx, ly):.3e} below the geometry floor")
    to_xi, _ = _st(spec.axis)
    S, T = (lx, ly) if spec.axis == 0 else (ly, lx)
    n, eps, w = _period(S, T, float(spec.lam), lf)
    if T - 2 * w <= 0:
        raise DepthTooLarge("boundary layer wider than the region")
    cell = _cell(eps, T, w, spec, child)
    Gb = spec.grad
    pieces = [
        Piece(geo.ccw(to_xi(geo.rect(0, 0, w, T))), Gb.copy(), np.zeros(2), "layer"),
        Piece(geo.ccw(to_xi(geo.rect(S - w, 0, S, T))), Gb.copy(), np.zeros(2), "layer"),
    ]
    shifts = to_xi(np.column_stack([w + eps * np.arange(n), np.zeros(n)]))
    inst = Instances(cell, shifts, shifts @ Gb.T)
    return Patch(geo.rect(0, 0, lx, ly), Gb.copy(), pieces, [inst], "split")


def _aligned(frame: np.ndarray) -> bool:
    r = np.abs(frame)
    return bool(np.all((r < 1e-14) | (np.abs(r - 1) < 1e-14)))


def _snap(frame: np.ndarray) -> np.ndarray:
    """Round a frame that is a signed permutation up to rounding to the exact one."""
    return np.round(frame) + 0.0 if _aligned(frame) else frame


def tiled_root(frame: np.ndarray, grad: np.ndarray, lf: float, tile: ChildBuilder | None) -> Patch:
    """The unit square (in frame coordinates) covered by frame-aligned tiles.

    Tiles fully inside the square are instances of ``tile``; the clipped ones
    along the boundary keep the affine map ``grad @ xi``.
    """
    square, tau, full, partial = _root_layout(tuple(frame.ravel().tolist()), lf)
    pieces = [Piece(poly, grad.copy(), np.zeros(2), "layer") for poly in partial]
    children = []
    if tile is None:
        for o in full:
            pieces.append(Piece(geo.rect(o[0], o[1], o[0] + tau, o[1] + tau), grad.copy(), np.zeros(2), "phase"))
    elif len(full):
        children.append(Instances(tile(tau, tau), full, full @ grad.T))
    return Patch(square, grad.copy(), pieces, children, "root")


@lru_cache(maxsize=32)
def _root_layout(frame_key: tuple, lf: float):
    frame = np.array(frame_key).reshape(2, 2)
    corners = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float) @ frame.T
    square = geo.ccw(corners)
    lo = square.min(axis=0)
    hi = square.max(axis=0)
    if _aligned(frame):
        tau, mx, my = 1.0, 1, 1
    else:
        tau = lf / (8 * math.sqrt(2.0))
        mx = math.ceil((hi[0] - lo[0]) / tau)
        my = math.ceil((hi[1] - lo[1]) / tau)
    x0 = lo[0] + tau * np.arange(mx)
    tol = 1e-13
    full_rows, partial = [], []
    for j in range(my):
        y0 = lo[1] + tau * j
        y1 = y0 + tau
        (l0, r0), (l1, r1) = _section(square, y0), _section(square, y1)
        inside = (x0 >= max(l0, l1) - tol) & (x0 + tau <= min(r0, r1) + tol)
        full_rows.append(np.column_stack([x0[inside], np.full(int(inside.sum()), y0)]))
        strip = geo.clip(square, geo.rect(lo[0] - 1, y0, hi[0] + 1, y1))
        if len(strip) < 3:
            continue
        smin, smax = strip[:, 0].min(), strip[:, 0].max()
        for x in x0[~inside & (x0 < smax) & (x0 + tau > smin)]:
            poly = geo.clip(geo.rect(x, y0, x + tau, y1), square)
            if len(poly) >= 3 and geo.area(poly) > 0:
                partial.append(poly)
    full = np.vstack(full_rows) if full_rows else np.zeros((0, 2))
    for arr in (square, full, *partial):
        arr.setflags(write=False)
    return square, tau, full, tuple(partial)


def _section(poly: np.ndarray, y: float) -> tuple[float, float]:
    """x-extent of a convex polygon's horizontal cross-section at height ``y``."""
    a = poly
    b = np.roll(poly, -1, axis=0)
    xs = list(a[a[:, 1] == y, 0])
    m = (a[:, 1] - y) * (b[:, 1] - y) < 0
    t = (y - a[m, 1]) / (b[m, 1] - a[m, 1])
    xs.extend(a[m, 0] + t * (b[m, 0] - a[m, 0]))
    if not xs:
        return math.inf, -math.inf
    return min(xs), max(xs)


def _check_lf(layer_fraction: float) -> float:
    if not 0 < layer_fraction <= 0.25:
        raise LayerFractionInvalid("layer_fraction must lie in (0, 1/4]")
    return float(layer_fraction)


def _normal_frame(n: np.ndarray) -> np.ndarray:
    """Orthogonal frame whose second row is the unit normal ``n``."""
    return np.array([[n[1], -n[0]], [n[0], n[1]]])


def _rank_one_factor(d: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    s = mat2.svd(d)
    return s.sigma1 * s.Q[:, 0], s.R[0]


def realize_simple_laminate(b, lam, a1, a2, layer_fraction: float) -> PiecewiseAffineField:
    """Fine stripes realizing ``B = lam A1 + (1 - lam) A2`` with ``u = Bx`` on the boundary."""
    lf = _check_lf(layer_fraction)
    b, a1, a2 = as_mat2(b), as_mat2(a1), as_mat2(a2)
    lam = Fraction(lam).limit_denominator(10**12) if not isinstance(lam, Fraction) else lam
    if not 0 < lam < 1:
        raise BarycenterMismatch("lambda must lie in (0, 1)")
    lf_ = float(lam)
    if np.max(np.abs(b - (lf_ * a1 + (1 - lf_) * a2))) > 1e-12 * max(1.0, np.abs(b).max()):
        raise BarycenterMismatch("B differs from lam*A1 + (1-lam)*A2")
    diff = a1 - a2
    nu = Laminate(b.copy(), [SplitStep(b.copy(), lam, a1, a2)], merge_atoms([Atom(lam, a1), Atom(1 - lam, a2)]))
    if not np.any(diff):
        frame = np.eye(2)
        vec, normal = np.zeros(2), np.array([0.0, 1.0])
    else:
        if not mat2.rank_le_one(diff, 1e-12):
            raise NotRankOne("A1 - A2 must have rank one")
        vec, normal = _rank_one_factor(diff)
        frame = _snap(_normal_frame(normal / np.linalg.norm(normal)))
        vec = vec * np.linalg.norm(normal)
    gh = b @ frame.T
    spec = SplitSpec(gh, vec, lam, 1)
    tile_lf = lf if _aligned(frame) else lf / 2
    root = tiled_root(frame, gh, lf, lambda lx, ly: split_patch(lx, ly, spec, tile_lf))
    return PiecewiseAffineField(root, frame, b, lf, nu, depth=1)


def build_witness(a, depth: int, layer_fraction: float) -> PiecewiseAffineField:
    """Self-similar realization of the ``depth``-fold iterated three-point laminate.

    Level ``j`` splits ``2^j B`` into ``2^j A'`` and ``2^j D`` with stripes normal
    to ``r2``, then ``2^j D`` into ``-2^(j+1) A'`` and ``2^(j+1) B`` with stripes
    normal to ``r1``; every ``2^(j+1) B`` cell recurses.
    """
    lf = _check_lf(layer_fraction)
    a = as_mat2(a)
    if not np.any(a):
        from .laminate import ZeroMatrix

        raise ZeroMatrix("witness requires a nonzero matrix")
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if depth > MAX_DEPTH:
        raise DepthTooLarge(f"depth {depth} exceeds {MAX_DEPTH}")
    base = ornstein_laminate(a)
    s = mat2.svd(a)
    y = s.sigma2 / s.sigma1
    Q, frame = s.Q, _snap(s.R)
    q1, q2 = Q[:, 0], Q[:, 1]
    bh = Q @ mat2.diag(1.0, -y)  # frame barycenter
    dh = Q @ mat2.diag(1.0, -2.0 * y)
    # the transition budget is shared by the two splits of every level and,
    # for a rotated frame, by the clipped tiles along the boundary
    tile_lf = (lf if _aligned(frame) else lf / 2) / (2 * depth)

    def level(j: int) -> ChildBuilder:
        sc = float(2**j)
        s1 = SplitSpec(sc * bh, sc * 3.0 * y * q2, Fraction(1, 3), 1)
        s2 = SplitSpec(sc * dh, sc * -4.0 * q1, Fraction(1, 4), 0)

        def build1(lx, ly):
            def build2(lx2, ly2):
                nxt = level(j + 1) if j + 1 < depth else None
                return split_patch(lx2, ly2, s2, tile_lf, nxt)

            return split_patch(lx, ly, s1, tile_lf, build2)

        return build1

    root = tiled_root(frame, bh, lf, level(0))
    return PiecewiseAffineField(root, frame, base.barycenter.copy(), lf, iterated_laminate(a, depth), depth)


# ---------------------------------------------------------------------------
# evaluation


def _patch_sums(p: Patch, fns, memo) -> np.ndarray:
    key = id(p)
    if key in memo:
        return memo[key]
    parts = []
    if p.pieces:
        areas = np.array([geo.area(pc.poly) for pc in p.pieces])
        grads = np.array([pc.grad for pc in p.pieces])
        vals = np.column_stack([fn(grads) for fn in fns])
        parts.append(areas[:, None] * vals)
    for inst in p.children:
        parts.append((inst.count * _patch_sums(inst.patch, fns, memo))[None, :])
    out = np.array([math.fsum(col) for col in np.vstack(parts).T]) if parts else np.zeros(len(fns))
    memo[key] = out
    return out


def integrate_field(fld: PiecewiseAffineField, fns) -> np.ndarray:
    """Exact integrals of functions of the physical gradient over the unit square.

    Each function maps an array of frame gradients ``(m, 2, 2)`` to ``(m,)``.
    """
    return _patch_sums(fld.root, fns, {})


def _vec(fld: PiecewiseAffineField, grads: np.ndarray) -> np.ndarray:
    return (grads @ fld.frame).reshape(len(grads), 4)


def evaluate(fld: PiecewiseAffineField, p1: LinearOperator, p2: LinearOperator, C: float) -> WitnessReport:
    """L1 norms of ``P_i(Du - B)`` and the mean of ``C|P2 Du| - |P1 Du|``."""
    bvec = fld.boundary.reshape(4)
    r1, r2 = p1.rows, p2.rows

    def l1(rows):
        return lambda g: np.linalg.norm((_vec(fld, g) - bvec) @ rows.T, axis=1)

    def fval(g):
        v = _vec(fld, g)
        return C * np.linalg.norm(v @ r2.T, axis=1) - np.linalg.norm(v @ r1.T, axis=1)

    def ones(g):
        return np.ones(len(g))

    i1, i2, fm, total = integrate_field(fld, [l1(r1), l1(r2), fval, ones])
    if i2 > 0:
        ratio = i1 / i2
    else:
        ratio = math.inf if i1 > 0 else 1.0
    predicted = integrate(fld.laminate, lambda m: C * p2.norm_of(m) - p1.norm_of(m)) if fld.laminate else math.nan
    return WitnessReport(fld.depth, float(i1), float(i2), float(ratio), predicted, float(fm / total), layer_area(fld))


def layer_area(fld: PiecewiseAffineField) -> float:
    memo: dict[int, float] = {}

    def rec(p: Patch) -> float:
        if id(p) not in memo:
            own = math.fsum(geo.area(pc.poly) for pc in p.pieces if pc.tag != "phase")
            memo[id(p)] = own + math.fsum(inst.count * rec(inst.patch) for inst in p.children)
        return memo[id(p)]

    return rec(fld.root)


def mean_gradient(fld: PiecewiseAffineField) -> np.ndarray:
    fns = [(lambda g, k=k: _vec(fld, g)[:, k]) for k in range(4)]
    return (integrate_field(fld, fns) / fld.root.area).reshape(2, 2)


# ---------------------------------------------------------------------------
# validity checks


@dataclass
class FieldCheck:
    area_residual: float = 0.0
    jump_residual: float = 0.0
    continuity_residual: float = 0.0
    trace_residual: float = 0.0
    containment_ok: bool = True
    overlap_area: float = 0.0
    patches: int = 0

    def passed(self, jump_tol: float = 1e-10, area_tol: float = 1e-12) -> bool:
        return (
            self.area_residual <= area_tol
            and self.overlap_area <= area_tol
            and self.jump_residual <= jump_tol
            and self.continuity_residual <= jump_tol
            and self.trace_residual <= jump_tol
            and self.containment_ok
        )


def _items(p: Patch):
    """(polygon, grad, const) for every piece and every child instance of ``p``."""
    out = [(pc.poly, pc.grad, pc.const) for pc in p.pieces]
    for inst in p.children:
        base = inst.patch.polygon
        for sh, c in zip(inst.shifts, inst.consts):
            out.append((base + sh, inst.patch.grad, c - inst.patch.grad @ sh))
    return out


def _candidate_pairs(boxes: np.ndarray, tol: float):
    order = np.argsort(boxes[:, 0], kind="stable")
    b = boxes[order]
    xmax = b[:, 2]
    for k in range(len(b)):
        hi = np.searchsorted(b[:, 0], xmax[k] + tol, side="right")
        if hi <= k + 1:
            continue
        cand = np.arange(k + 1, hi)
        ok = (b[cand, 1] <= b[k, 3] + tol) & (b[cand, 3] >= b[k, 1] - tol)
        for c in cand[ok]:
            yield int(order[k]), int(order[c])


def check_patch(p: Patch) -> FieldCheck:
    chk = FieldCheck(patches=1)
    items = _items(p)
    poly = p.polygon
    size = float(np.max(poly.max(axis=0) - poly.min(axis=0)))
    gscale = max([1.0] + [float(np.abs(g).max()) for _, g, _ in items])
    uscale = size * gscale
    gtol = 1e-9 * size

    total = math.fsum(geo.area(q) for q, _, _ in items)
    chk.area_residual = abs(total - geo.area(poly)) / geo.area(poly)

    for q, g, c in items:
        if not np.all(geo.contains(poly, q, gtol)):
            chk.containment_ok = False
        on_bd = _on_boundary(poly, q, gtol)
        if np.any(on_bd):
            pts = q[on_bd]
            r = np.abs(pts @ g.T + c - pts @ p.grad.T).max() / uscale
            chk.trace_residual = max(chk.trace_residual, float(r))

    boxes = np.array([geo.bbox(q) for q, _, _ in items])
    for i, j in _candidate_pairs(boxes, gtol):
        qi, gi, ci = items[i]
        qj, gj, cj = items[j]
        bi, bj = boxes[i], boxes[j]
        box_overlap = max(0.0, min(bi[2], bj[2]) - max(bi[0], bj[0])) * max(0.0, min(bi[3], bj[3]) - max(bi[1], bj[1]))
        if box_overlap > gtol * gtol:
            inter = geo.clip(qi, qj)
            if len(inter):
                chk.overlap_area += geo.area(inter) / geo.area(poly)
        same = np.array_equal(gi, gj) and np.allclose(ci, cj, rtol=0, atol=1e-15 * uscale)
        if same:
            continue
        shared = np.vstack([qi[geo.contains(qj, qi, gtol)], qj[geo.contains(qi, qj, gtol)]])
        if len(shared) == 0:
            continue
        du = np.abs(shared @ (gi - gj).T + (ci - cj)).max() / uscale
        chk.continuity_residual = max(chk.continuity_residual, float(du))
        if len(shared) >= 2:
            d = shared - shared[0]
            k = int(np.argmax(np.hypot(d[:, 0], d[:, 1])))
            length = float(np.hypot(*d[k]))
            if length > gtol:
                t = d[k] / length
                jr = np.linalg.norm((gi - gj) @ t) / gscale
                chk.jump_residual = max(chk.jump_residual, float(jr))
    return chk


def _on_boundary(poly: np.ndarray, pts: np.ndarray, tol: float) -> np.ndarray:
    a = poly
    b = np.roll(poly, -1, axis=0)
    e = b - a
    lengths = np.hypot(e[:, 0], e[:, 1])
    cross = e[None, :, 0] * (pts[:, None, 1] - a[None, :, 1]) - e[None, :, 1] * (pts[:, None, 0] - a[None, :, 0])
    return np.any(np.abs(cross) <= tol * lengths[None, :], axis=1)


def check_field(fld: PiecewiseAffineField) -> FieldCheck:
    """Tiling, rank-one jumps, continuity and trace checks on every distinct patch."""
    out = FieldCheck(patches=0)
    for p in fld.root.walk():
        c = check_patch(p)
        out.patches += 1
        out.area_residual = max(out.area_residual, c.area_residual)
        out.overlap_area = max(out.overlap_area, c.overlap_area)
        out.jump_residual = max(out.jump_residual, c.jump_residual)
        out.continuity_residual = max(out.continuity_residual, c.continuity_residual)
        out.trace_residual = max(out.trace_residual, c.trace_residual)
        out.containment_ok &= c.containment_ok
    return out


# ---------------------------------------------------------------------------
# flattening and JSON


def flatten(fld: PiecewiseAffineField, max_regions: int = 200_000) -> list[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Physical ``(polygon, gradient, offset)`` triples with ``u = G x + c``."""
    n = fld.region_count()
    if n > max_regions:
        raise FieldTooLarge(f"field has {n} regions (limit {max_regions})")
    out: list = []
    _flatten(fld.root, np.zeros(2), np.zeros(2), out)
    # xi = F x, so row vectors map back as x = xi @ F
    return [(geo.ccw(poly @ fld.frame), g @ fld.frame, c) for poly, g, c in out]


def _flatten(p: Patch, shift: np.ndarray, const: np.ndarray, out: list) -> None:
    # local u_p(eta) = G eta + c_piece; global u = u_p(xi - shift) + const
    for pc in p.pieces:
        out.append((pc.poly + shift, pc.grad, pc.const + const - pc.grad @ shift))
    for inst in p.children:
        for sh, c in zip(inst.shifts, inst.consts):
            # u_p(eta) = u_child(eta - sh) + c  =>  global shift shift+sh, constant const + c
            _flatten(inst.patch, shift + sh, const + c, out)


def to_json(fld: PiecewiseAffineField, max_regions: int = 200_000) -> dict:
    regions = flatten(fld, max_regions)
    return {
        "boundary": mat2.to_list(fld.boundary),
        "layer_fraction": fld.layer_fraction,
        "depth": fld.depth,
        "regions": [
            {
                "polygon": [[float(x), float(y)] for x, y in poly],
                "gradient": mat2.to_list(g),
                "offset": [float(v) for v in c],
            }
            for poly, g, c in regions
        ],
    }


def from_json(obj: dict) -> PiecewiseAffineField:
    try:
        b = mat2.from_list(obj["boundary"])
        pieces = [
            Piece(
                geo.ccw(np.array(r["polygon"], dtype=float)),
                mat2.from_list(r["gradient"]),
                np.array(r.get("offset", [0.0, 0.0]), dtype=float),
                "phase",
            )
            for r in obj["regions"]
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise WitnessError(f"bad field JSON: {exc}") from exc
    root = Patch(geo.rect(0, 0, 1, 1), b.copy(), pieces, [], "root")
    return PiecewiseAffineField(root, np.eye(2), b, float(obj.get("layer_fraction", 0.0)), None, int(obj.get("depth", 0)))
