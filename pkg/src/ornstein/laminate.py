"""Finitely supported laminates with splitting certificates.

Weights are exact :class:`fractions.Fraction` values, matrices are floats.
A :class:`Laminate` carries its terminal atoms together with the ordered
list of elementary rank-one splittings that produce them from a Dirac mass
at the barycenter, so the laminate property can be replayed and checked.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from . import mat2
from .mat2 import as_mat2, diag


class LaminateError(ValueError):
    code = "laminate_error"


class MalformedLaminate(LaminateError):
    code = "malformed_laminate"


class ZeroMatrix(LaminateError):
    code = "zero_matrix"


class NotSymmetric(LaminateError):
    code = "not_symmetric"


MATCH_TOL = 1e-12


@dataclass(frozen=True)
class Atom:
    weight: Fraction
    matrix: np.ndarray

    def __post_init__(self):
        if self.weight <= 0:
            raise ValueError("atom weight must be positive")


@dataclass(frozen=True)
class SplitStep:
    """``target = lam * left + (1 - lam) * right`` with ``left - right`` rank one."""

    target: np.ndarray
    lam: Fraction
    left: np.ndarray
    right: np.ndarray

    @property
    def degenerate(self) -> bool:
        return _close(self.left, self.right) and _close(self.left, self.target)


@dataclass
class Laminate:
    barycenter: np.ndarray
    steps: list[SplitStep]
    atoms: list[Atom]
    degenerate_rank_one: bool = False

    def total_weight(self) -> Fraction:
        return sum((a.weight for a in self.atoms), Fraction(0))

    def first_moment(self) -> np.ndarray:
        out = np.zeros((2, 2))
        for a in self.atoms:
            out += float(a.weight) * a.matrix
        return out


@dataclass
class StepReport:
    index: int
    barycenter_residual: float
    rank_one_residual: float
    mass_split: Fraction
    degenerate: bool
    ok: bool


@dataclass
class ValidationReport:
    steps: list[StepReport] = field(default_factory=list)
    total_weight: Fraction = Fraction(0)
    barycenter_residual: float = 0.0
    atoms_match: bool = True
    atom_residual: float = 0.0
    tol: float = 1e-12
    passed: bool = False

    def summary(self) -> dict:
        return {
            "passed": self.passed,
            "total_weight": str(self.total_weight),
            "barycenter_residual": self.barycenter_residual,
            "atoms_match": self.atoms_match,
            "atom_residual": self.atom_residual,
            "steps": [
                {
                    "barycenter_residual": s.barycenter_residual,
                    "rank_one_residual": s.rank_one_residual,
                    "mass": str(s.mass_split),
                    "degenerate": s.degenerate,
                    "ok": s.ok,
                }
                for s in self.steps
            ],
        }


def _close(a: np.ndarray, b: np.ndarray, tol: float = MATCH_TOL) -> bool:
    return float(np.max(np.abs(a - b))) <= tol * max(1.0, float(np.max(np.abs(a))))


def merge_atoms(atoms: list[Atom], tol: float = MATCH_TOL) -> list[Atom]:
    """Merge atoms sitting at the same matrix, keeping first-seen order."""
    merged: list[list] = []
    for a in atoms:
        for m in merged:
            if _close(m[1], a.matrix, tol):
                m[0] += a.weight
                break
        else:
            merged.append([a.weight, a.matrix])
    return [Atom(w, m) for w, m in merged]


def replay(nu: Laminate, tol: float = MATCH_TOL) -> tuple[list[Atom], list[Fraction]]:
    """Replay the splitting certificate starting from a Dirac at the barycenter.

    Entries are kept unmerged during replay. A step consumes the most recently
    deposited entry at its target, so a degenerate step (left == right ==
    target) leaves the two deposited masses distinguishable and the next step
    splits only the ``right`` share.
    """
    entries: list[list] = [[Fraction(1), nu.barycenter]]
    masses = []
    for i, st in enumerate(nu.steps):
        hit = None
        for j in range(len(entries) - 1, -1, -1):
            if _close(entries[j][1], st.target, tol):
                hit = j
                break
        if hit is None:
            raise MalformedLaminate(f"step {i}: target carries no mass at replay time")
        w = entries.pop(hit)[0]
        masses.append(w)
        entries.append([w * st.lam, st.left])
        entries.append([w * (1 - st.lam), st.right])
    return merge_atoms([Atom(w, m) for w, m in entries if w > 0], tol), masses


def validate(nu: Laminate, tol: float = 1e-12) -> ValidationReport:
    """Check the certificate of ``nu`` and its terminal measure at tolerance ``tol``."""
    rep = ValidationReport(tol=tol)
    replayed, masses = replay(nu, max(tol, MATCH_TOL))
    ok = True
    for i, (st, w) in enumerate(zip(nu.steps, masses)):
        lam = float(st.lam)
        res = float(np.max(np.abs(st.target - (lam * st.left + (1 - lam) * st.right))))
        diff = st.left - st.right
        r1 = abs(mat2.det(diff))
        degenerate = st.degenerate
        step_ok = (
            0 < st.lam < 1
            and res <= tol
            and mat2.rank_le_one(diff, tol)
            and (degenerate or not _close(st.left, st.right))
        )
        rep.steps.append(StepReport(i, res, r1, w, degenerate, step_ok))
        ok &= step_ok

    rep.total_weight = nu.total_weight()
    ok &= rep.total_weight == 1

    rep.barycenter_residual = float(np.max(np.abs(nu.first_moment() - nu.barycenter)))
    ok &= rep.barycenter_residual <= tol

    declared = merge_atoms(nu.atoms)
    match = len(declared) == len(replayed)
    worst = 0.0
    if match:
        for a in declared:
            cand = [b for b in replayed if _close(a.matrix, b.matrix, max(tol, MATCH_TOL))]
            if not cand or cand[0].weight != a.weight:
                match = False
                break
            worst = max(worst, float(np.max(np.abs(cand[0].matrix - a.matrix))))
    rep.atoms_match = match
    rep.atom_residual = worst
    rep.passed = bool(ok and match)
    return rep


def dirac(b) -> Laminate:
    b = as_mat2(b)
    return Laminate(b, [], [Atom(Fraction(1), b)])


_THIRD = Fraction(1, 3)
_QUARTER = Fraction(1, 4)


def _three_point(Q: np.ndarray, R: np.ndarray, y: float, sign: float = 1.0) -> Laminate:
    """The three-atom laminate on ``diag(1, -y)`` pushed forward by ``X -> sign*Q X R``."""

    def push(x, yy):
        return sign * (Q @ diag(x, yy) @ R)

    bary = push(1.0, -y)
    plus = push(1.0, y)
    mid = push(1.0, -2.0 * y)
    neg = push(-2.0, -2.0 * y)
    dbl = push(2.0, -2.0 * y)
    steps = [
        SplitStep(bary, _THIRD, plus, mid),
        SplitStep(mid, _QUARTER, neg, dbl),
    ]
    atoms = [
        Atom(Fraction(1, 2), dbl),
        Atom(Fraction(1, 3), plus),
        Atom(Fraction(1, 6), neg),
    ]
    nu = Laminate(bary, steps, merge_atoms(atoms))
    nu.degenerate_rank_one = steps[0].degenerate
    return nu


def ornstein_laminate(a) -> Laminate:
    """Three-point laminate whose middle atom is ``A / sigma1``.

    With ``A = Q diag(s1, s2) R`` and ``y = s2 / s1`` the atoms are
    ``Q(2,-2y)R``, ``Q(1,y)R`` and ``Q(-2,-2y)R`` with weights 1/2, 1/3, 1/6
    and barycenter ``Q(1,-y)R``.

    >>> nu = ornstein_laminate(np.eye(2))
    >>> [str(at.weight) for at in nu.atoms]
    ['1/2', '1/3', '1/6']
    """
    a = as_mat2(a)
    d = mat2.svd(a)
    if d.sigma1 == 0.0:
        raise ZeroMatrix("laminate requires a nonzero matrix")
    return _three_point(d.Q, d.R, d.sigma2 / d.sigma1)


def ornstein_laminate_sym(a) -> Laminate:
    """Symmetric variant built on ``A = Q diag(l1, l2) Q^T``.

    The dominant eigenvalue ``l1`` is normalized to 1 (``y = l2 / l1`` may be
    negative); when ``l1 < 0`` the whole construction is negated, which is
    still a rank-preserving linear map of the symmetric matrices.
    """
    a = as_mat2(a)
    if not np.any(a):
        raise ZeroMatrix("laminate requires a nonzero matrix")
    if not mat2.is_symmetric(a):
        raise NotSymmetric("matrix is not symmetric")
    Q, l1, l2 = mat2.sym_eig(a)
    sign = 1.0 if l1 > 0 else -1.0
    return _three_point(Q, Q.T, l2 / l1, sign)


def integrate(nu: Laminate, f: Callable[[np.ndarray], float]) -> float:
    return math.fsum(float(a.weight) * float(f(a.matrix)) for a in nu.atoms)


def iterated_laminate(a, depth: int, symmetric: bool = False) -> Laminate:
    """``depth``-fold self-similar laminate: re-split the atom at twice the barycenter.

    Level ``j`` (0-based) is the three-point laminate scaled by ``2**j``; its
    ``2**(j+1) * barycenter`` atom is the target of level ``j + 1``.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    base = ornstein_laminate_sym(a) if symmetric else ornstein_laminate(a)
    steps: list[SplitStep] = []
    atoms: list[Atom] = []
    mass = Fraction(1)
    for j in range(depth):
        s = float(2**j)
        for st in base.steps:
            steps.append(SplitStep(s * st.target, st.lam, s * st.left, s * st.right))
        dbl, plus, neg = base.atoms
        atoms.append(Atom(mass * plus.weight, s * plus.matrix))
        atoms.append(Atom(mass * neg.weight, s * neg.matrix))
        mass *= dbl.weight
    atoms.append(Atom(mass, float(2**depth) * base.barycenter))
    return Laminate(base.barycenter.copy(), steps, merge_atoms(atoms), base.degenerate_rank_one)


# JSON encoding


def _frac(q: Fraction) -> dict:
    return {"num": q.numerator, "den": q.denominator}


def _unfrac(d) -> Fraction:
    return Fraction(int(d["num"]), int(d["den"]))


def to_json(nu: Laminate) -> dict:
    return {
        "barycenter": mat2.to_list(nu.barycenter),
        "steps": [
            {
                "target": mat2.to_list(s.target),
                "lambda": _frac(s.lam),
                "left": mat2.to_list(s.left),
                "right": mat2.to_list(s.right),
            }
            for s in nu.steps
        ],
        "atoms": [{"weight": _frac(a.weight), "matrix": mat2.to_list(a.matrix)} for a in nu.atoms],
    }


def from_json(obj: dict) -> Laminate:
    try:
        steps = [
            SplitStep(
                mat2.from_list(s["target"]),
                _unfrac(s["lambda"]),
                mat2.from_list(s["left"]),
                mat2.from_list(s["right"]),
            )
            for s in obj.get("steps", [])
        ]
        atoms = [Atom(_unfrac(a["weight"]), mat2.from_list(a["matrix"])) for a in obj["atoms"]]
        bary = mat2.from_list(obj["barycenter"])
    except (KeyError, TypeError, ZeroDivisionError) as exc:
        raise MalformedLaminate(f"bad laminate JSON: {exc}") from exc
    nu = Laminate(bary, steps, atoms)
    nu.degenerate_rank_one = any(s.degenerate for s in steps)
    return nu
