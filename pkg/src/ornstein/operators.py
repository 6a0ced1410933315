"""First-order operators as linear maps on 2x2 gradient space.

An operator ``P`` acts on ``Du`` through its ``d x 4`` matrix of rows applied
to the row-major flattening ``(a11, a12, a21, a22)``. Operators on the
symmetric subspace work in orthonormal coordinates ``(a11, a22, sqrt2*a12)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .mat2 import as_mat2

RANK_RTOL = 1e-10
KERNEL_TOL = 1e-10

FULL = "full"
SYMMETRIC = "symmetric"

_S = math.sqrt(0.5)
# columns: vec of the orthonormal basis of the symmetric 2x2 matrices
SYM_BASIS = np.array(
    [
        [1.0, 0.0, 0.0],
        [0.0, 0.0, _S],
        [0.0, 0.0, _S],
        [0.0, 1.0, 0.0],
    ]
)
ANTISYM = np.array([0.0, _S, -_S, 0.0])


class OperatorError(ValueError):
    code = "operator_error"


class UnknownOperator(OperatorError):
    code = "unknown_operator"


class DomainMismatch(OperatorError):
    code = "domain_mismatch"


@dataclass(frozen=True)
class LinearOperator:
    rows: np.ndarray
    domain: str = FULL
    name: str | None = None

    def __post_init__(self):
        rows = np.atleast_2d(np.asarray(self.rows, dtype=float))
        if rows.ndim != 2 or rows.shape[1] != 4 or rows.shape[0] < 1:
            raise OperatorError(f"operator rows must have shape (d, 4), got {rows.shape}")
        if not np.all(np.isfinite(rows)):
            raise OperatorError("operator rows must be finite")
        if self.domain not in (FULL, SYMMETRIC):
            raise OperatorError(f"unknown domain {self.domain!r}")
        if self.domain == SYMMETRIC and np.max(np.abs(rows @ ANTISYM)) > 1e-12 * max(
            1.0, np.max(np.abs(rows))
        ):
            raise OperatorError("symmetric-domain operator must vanish on antisymmetric matrices")
        object.__setattr__(self, "rows", rows)

    @property
    def d(self) -> int:
        return self.rows.shape[0]

    @property
    def basis(self) -> np.ndarray:
        """4 x n matrix whose columns span the domain (orthonormally)."""
        return np.eye(4) if self.domain == FULL else SYM_BASIS

    @property
    def coords(self) -> np.ndarray:
        """``d x n`` matrix of the operator in domain coordinates."""
        return self.rows @ self.basis

    def __call__(self, a) -> np.ndarray:
        return self.rows @ as_mat2(a).reshape(4)

    def norm_of(self, a) -> float:
        return float(np.linalg.norm(self(a)))

    def recombined(self, g) -> "LinearOperator":
        """The operator ``G P`` for a ``d' x d`` matrix ``G``."""
        return LinearOperator(np.asarray(g, dtype=float) @ self.rows, self.domain, None)


def _op(rows, domain=FULL, name=None):
    return LinearOperator(np.array(rows, dtype=float), domain, name)


def _catalog() -> dict[str, LinearOperator]:
    r2 = math.sqrt(0.5)
    return {
        "grad": _op(np.eye(4), FULL, "grad"),
        "div": _op([[1, 0, 0, 1]], FULL, "div"),
        "curl": _op([[0, -1, 1, 0]], FULL, "curl"),
        "div-curl": _op([[1, 0, 0, 1], [0, -1, 1, 0]], FULL, "div-curl"),
        # (E11, E22, sqrt2 * E12)
        "sym-grad": _op([[1, 0, 0, 0], [0, 0, 0, 1], [0, r2, r2, 0]], FULL, "sym-grad"),
        "dbar": _op([[0.5, 0, 0, -0.5], [0, 0.5, 0.5, 0]], FULL, "dbar"),
        "hess-offdiag": _op([[0, 0.5, 0.5, 0]], SYMMETRIC, "hess-offdiag"),
        "hess-diag": _op([[1, 0, 0, 0], [0, 0, 0, 1]], SYMMETRIC, "hess-diag"),
    }


CATALOG = _catalog()
CATALOG_NAMES = tuple(CATALOG)


def builtin(name: str) -> LinearOperator:
    try:
        return CATALOG[name]
    except KeyError:
        raise UnknownOperator(f"unknown operator {name!r}; known: {', '.join(CATALOG_NAMES)}") from None


def _svd(m: np.ndarray):
    u, s, vt = np.linalg.svd(m, full_matrices=True)
    top = s[0] if s.size else 0.0
    r = int(np.sum(s > RANK_RTOL * top)) if top > 0 else 0
    return u, s, vt, r


def kernel_coords(p: LinearOperator) -> np.ndarray:
    """Orthonormal kernel basis in domain coordinates, as columns (n x k)."""
    _, _, vt, r = _svd(p.coords)
    return vt[r:].T.copy()


def kernel(p: LinearOperator) -> list[np.ndarray]:
    """Frobenius-orthonormal basis of ``ker P`` within the operator's domain."""
    k = p.basis @ kernel_coords(p)
    return [k[:, j].reshape(2, 2) for j in range(k.shape[1])]


def moore_penrose(p: LinearOperator) -> np.ndarray:
    """Pseudoinverse in domain coordinates: ``n x d`` with ``n`` in {4, 3}."""
    u, s, vt, r = _svd(p.coords)
    return (vt[:r].T / s[:r]) @ u[:, :r].T


@dataclass
class FactorizationResult:
    T: np.ndarray | None = None
    residual: float | None = None
    counterexample: np.ndarray | None = None
    p1_norm: float | None = None
    p2_norm: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def factors(self) -> bool:
        return self.T is not None


def _check_domains(p1: LinearOperator, p2: LinearOperator) -> None:
    if p1.domain != p2.domain:
        raise DomainMismatch(f"operators act on different domains: {p1.domain} vs {p2.domain}")


def _lex_max_unit(w: np.ndarray) -> np.ndarray:
    """Lexicographically largest unit vector in the column span of orthonormal ``w``."""
    for i in range(w.shape[0]):
        v = w @ w[i]
        nv = np.linalg.norm(v)
        if nv > 1e-12:
            v = v / nv
            v[np.abs(v) < 1e-15] = 0.0
            return v + 0.0
    raise ValueError("empty subspace")


def decide(p1: LinearOperator, p2: LinearOperator) -> FactorizationResult:
    """Either ``T`` with ``P1 = T P2`` or a unit ``A`` in ``ker P2`` with ``P1 A != 0``."""
    _check_domains(p1, p2)
    k = kernel_coords(p2)
    m1 = p1.coords
    if k.shape[1] == 0 or np.max(np.linalg.norm(m1 @ k, axis=0)) <= KERNEL_TOL:
        t = m1 @ moore_penrose(p2)
        res = float(np.max(np.abs(m1 - t @ p2.coords))) if m1.size else 0.0
        return FactorizationResult(T=t, residual=res)

    restricted = m1 @ k
    _, s, vt = np.linalg.svd(restricted, full_matrices=False)
    top = s[0]
    ties = vt[s >= top * (1 - 1e-10)]
    # top singular subspace of P1 on ker P2, embedded into matrix space
    w = p2.basis @ (k @ ties.T)
    q, _ = np.linalg.qr(w)
    a = _lex_max_unit(q).reshape(2, 2)
    return FactorizationResult(
        counterexample=a,
        p1_norm=p1.norm_of(a),
        p2_norm=p2.norm_of(a),
    )


def pointwise_constant(p1: LinearOperator, p2: LinearOperator) -> float:
    """Least ``C`` with ``|P1 A| <= C |P2 A|`` for all ``A``; ``inf`` if none exists."""
    res = decide(p1, p2)
    if not res.factors:
        return math.inf
    if res.T.size == 0:
        return 0.0
    return float(np.linalg.svd(res.T, compute_uv=False)[0])


def to_json(p: LinearOperator) -> dict:
    out = {"domain": p.domain, "rows": [[float(v) for v in r] for r in p.rows]}
    if p.name is not None:
        out["name"] = p.name
    return out


def from_json(obj: dict) -> LinearOperator:
    try:
        return LinearOperator(np.array(obj["rows"], dtype=float), obj.get("domain", FULL), obj.get("name"))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, OperatorError):
            raise
        raise OperatorError(f"bad operator JSON: {exc}") from exc
