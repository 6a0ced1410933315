import json
import math

import numpy as np
import pytest

from ornstein import operators as ops
from ornstein.operators import CATALOG, LinearOperator

R2 = math.sqrt(2.0)


def _unit_matrices(rng, n, symmetric=False):
    a = rng.normal(size=(n, 2, 2))
    if symmetric:
        a = 0.5 * (a + a.transpose(0, 2, 1))
    return a / np.linalg.norm(a.reshape(n, 4), axis=1)[:, None, None]


@pytest.mark.parametrize(
    "p1, p2, constant",
    [
        ("sym-grad", "grad", 1.0),
        ("div", "grad", R2),
        ("div-curl", "grad", R2),
        ("dbar", "sym-grad", 1 / R2),
        ("grad", "grad", 1.0),
    ],
)
def test_factorizable_pairs(p1, p2, constant):
    a, b = CATALOG[p1], CATALOG[p2]
    res = ops.decide(a, b)
    assert res.factors
    assert res.residual <= 1e-12
    assert np.allclose(res.T @ b.coords, a.coords, atol=1e-12)
    assert ops.pointwise_constant(a, b) == pytest.approx(constant, rel=1e-12)


@pytest.mark.parametrize("p1, p2", [("grad", "sym-grad"), ("grad", "div-curl"), ("sym-grad", "dbar"), ("hess-offdiag", "hess-diag")])
def test_counterexample_pairs(p1, p2):
    a, b = CATALOG[p1], CATALOG[p2]
    res = ops.decide(a, b)
    assert not res.factors
    x = res.counterexample
    assert np.linalg.norm(x) == pytest.approx(1.0)
    assert b.norm_of(x) <= 1e-12
    assert a.norm_of(x) >= 1e-6
    assert ops.pointwise_constant(a, b) == math.inf


def test_hessian_counterexample_bytes():
    res = ops.decide(CATALOG["hess-offdiag"], CATALOG["hess-diag"])
    assert res.counterexample.reshape(4).tolist() == [0.0, 0.7071067811865476, 0.7071067811865476, 0.0]


def test_grad_symgrad_counterexample_is_antisymmetric():
    res = ops.decide(CATALOG["grad"], CATALOG["sym-grad"])
    assert np.allclose(res.counterexample, np.array([[0, 1], [-1, 0]]) / R2)


def test_constant_is_attained_bound():
    rng = np.random.default_rng(1)
    for p1, p2 in [("div", "grad"), ("dbar", "sym-grad"), ("div-curl", "grad")]:
        a, b = CATALOG[p1], CATALOG[p2]
        c = ops.pointwise_constant(a, b)
        mats = _unit_matrices(rng, 20000)
        ratios = [a.norm_of(m) / b.norm_of(m) for m in mats if b.norm_of(m) > 1e-9]
        assert max(ratios) <= c * (1 + 1e-12)
        assert max(ratios) >= 0.9 * c


def test_moore_penrose_of_div():
    assert np.allclose(ops.moore_penrose(CATALOG["div"]), [[0.5], [0], [0], [0.5]])


def test_moore_penrose_identities_random():
    rng = np.random.default_rng(2)
    for _ in range(200):
        r = int(rng.integers(1, 4))
        d = int(rng.integers(r, 6))
        p = LinearOperator(rng.normal(size=(d, r)) @ rng.normal(size=(r, 4)))
        a, x = p.coords, ops.moore_penrose(p)
        assert np.allclose(a @ x @ a, a, atol=1e-10)
        assert np.allclose(x @ a @ x, x, atol=1e-10)
        assert np.allclose(a @ x, (a @ x).T, atol=1e-10)
        assert np.allclose(x @ a, (x @ a).T, atol=1e-10)


def test_symmetric_domain_pseudoinverse_shape():
    assert ops.moore_penrose(CATALOG["hess-diag"]).shape == (3, 2)


def test_kernels():
    assert ops.kernel(CATALOG["grad"]) == []
    (k,) = ops.kernel(CATALOG["sym-grad"])
    assert np.allclose(abs(k[0, 1]), 1 / R2) and np.allclose(k, -k.T)
    assert len(ops.kernel(CATALOG["div"])) == 3
    (h,) = ops.kernel(CATALOG["hess-diag"])
    assert np.allclose(h, h.T)
    for op in CATALOG.values():
        for m in ops.kernel(op):
            assert op.norm_of(m) <= 1e-12
            assert np.linalg.norm(m) == pytest.approx(1.0)


def test_catalog_lookup():
    assert ops.builtin("curl").d == 1
    with pytest.raises(ops.UnknownOperator):
        ops.builtin("laplace")


def test_domain_mismatch():
    with pytest.raises(ops.DomainMismatch):
        ops.decide(CATALOG["grad"], CATALOG["hess-diag"])


def test_symmetric_operator_must_ignore_antisymmetric_part():
    with pytest.raises(ops.OperatorError):
        LinearOperator(np.array([[0.0, 1.0, 0.0, 0.0]]), ops.SYMMETRIC)
    with pytest.raises(ops.OperatorError):
        LinearOperator(np.zeros((2, 3)))


def test_recombined_operator_factors():
    rng = np.random.default_rng(3)
    p2 = CATALOG["sym-grad"]
    p1 = p2.recombined(rng.normal(size=(2, 3)))
    res = ops.decide(p1, p2)
    assert res.factors and res.residual <= 1e-12


def test_json_round_trip():
    for op in CATALOG.values():
        back = ops.from_json(json.loads(json.dumps(ops.to_json(op))))
        assert np.array_equal(back.rows, op.rows)
        assert back.domain == op.domain and back.name == op.name
    with pytest.raises(ops.OperatorError):
        ops.from_json({"domain": "full"})
