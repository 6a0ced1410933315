import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ornstein import laminate as lam
from ornstein import mat2
from ornstein.laminate import Atom, Laminate, SplitStep

entries = st.floats(min_value=-100, max_value=100, allow_nan=False)
nonzero = st.lists(entries, min_size=4, max_size=4).map(lambda v: np.array(v).reshape(2, 2)).filter(
    lambda a: np.abs(a).max() > 1e-6
)


def _atom_at(nu, m):
    for a in nu.atoms:
        if np.allclose(a.matrix, m, atol=1e-12):
            return a.weight
    return None


def test_identity_laminate_atoms():
    nu = lam.ornstein_laminate(np.eye(2))
    assert np.allclose(nu.barycenter, mat2.diag(1, -1))
    assert _atom_at(nu, mat2.diag(2, -2)) == Fraction(1, 2)
    assert _atom_at(nu, np.eye(2)) == Fraction(1, 3)
    assert _atom_at(nu, mat2.diag(-2, -2)) == Fraction(1, 6)
    assert lam.validate(nu).passed


def test_splits_of_identity_laminate():
    nu = lam.ornstein_laminate(np.eye(2))
    first, second = nu.steps
    assert first.lam == Fraction(1, 3)
    assert np.allclose(first.left - first.right, mat2.diag(0, 3))
    assert second.lam == Fraction(1, 4)
    assert np.allclose(second.left - second.right, mat2.diag(-4, 0))


@given(nonzero)
@settings(max_examples=200, deadline=None)
def test_random_laminates_validate(a):
    nu = lam.ornstein_laminate(a)
    rep = lam.validate(nu, 1e-12 * max(1.0, float(np.abs(a).max()) / mat2.svd(a).sigma1))
    assert rep.passed
    assert nu.total_weight() == 1
    assert sorted(x.weight for x in nu.atoms) == [Fraction(1, 6), Fraction(1, 3), Fraction(1, 2)]


@given(nonzero)
@settings(max_examples=100, deadline=None)
def test_middle_atom_is_normalized_input(a):
    nu = lam.ornstein_laminate(a)
    ap = a / mat2.svd(a).sigma1
    assert _atom_at(nu, ap) == Fraction(1, 3)


def test_double_barycenter_is_an_atom():
    rng = np.random.default_rng(4)
    for a in rng.normal(size=(50, 2, 2)):
        nu = lam.ornstein_laminate(a)
        assert _atom_at(nu, 2 * nu.barycenter) == Fraction(1, 2)


def test_rank_one_degenerate_split():
    # sigma2 = 0 makes the first split trivial: plus = mid = barycenter
    nu = lam.ornstein_laminate(np.outer([1.0, 2.0], [0.5, -1.0]))
    rep = lam.validate(nu)
    assert nu.degenerate_rank_one
    assert rep.passed
    assert rep.steps[0].degenerate


def test_zero_matrix_rejected():
    with pytest.raises(lam.ZeroMatrix):
        lam.ornstein_laminate(np.zeros((2, 2)))
    with pytest.raises(lam.ZeroMatrix):
        lam.ornstein_laminate_sym(np.zeros((2, 2)))


def test_lemma_identity_on_homogeneous_function():
    rng = np.random.default_rng(8)
    for a in rng.normal(size=(30, 2, 2)):
        nu = lam.ornstein_laminate(a)
        ap = a / mat2.svd(a).sigma1
        w = rng.normal(size=4)

        def f(m):
            return abs(float(w @ m.reshape(4))) - 0.3 * mat2.frobenius(m)

        lhs = lam.integrate(nu, f)
        rhs = f(nu.barycenter) + (f(ap) + f(-ap)) / 3
        assert lhs == pytest.approx(rhs, abs=1e-12)


def test_symmetric_variant_offdiagonal():
    a = np.array([[0.0, 1.0], [1.0, 0.0]])
    nu = lam.ornstein_laminate_sym(a)
    assert np.allclose(nu.barycenter, np.eye(2))
    assert _atom_at(nu, a) == Fraction(1, 3)
    assert _atom_at(nu, -2 * a) == Fraction(1, 6)
    assert _atom_at(nu, 2 * np.eye(2)) == Fraction(1, 2)
    assert lam.validate(nu).passed
    for at in nu.atoms:
        assert mat2.is_symmetric(at.matrix)


def test_symmetric_variant_negative_dominant_eigenvalue():
    a = mat2.diag(-3.0, 1.0)
    nu = lam.ornstein_laminate_sym(a)
    assert lam.validate(nu).passed
    # normalized by |l1|, the middle atom is A / 3 itself
    assert _atom_at(nu, a / 3.0) == Fraction(1, 3)
    assert np.allclose(nu.barycenter, mat2.diag(-1.0, -1.0 / 3.0))


def test_symmetric_variant_rejects_nonsymmetric():
    with pytest.raises(lam.NotSymmetric):
        lam.ornstein_laminate_sym([[1.0, 2.0], [0.0, 1.0]])


@pytest.mark.parametrize("depth", [1, 2, 4, 6])
@pytest.mark.parametrize("symmetric", [False, True])
def test_iterated_laminate_validates(depth, symmetric):
    a = np.array([[0.0, 1.0], [1.0, 0.0]]) if symmetric else np.array([[1.0, 2.0], [-0.5, 0.3]])
    nu = lam.iterated_laminate(a, depth, symmetric=symmetric)
    assert lam.validate(nu, 1e-10).passed
    assert len(nu.steps) == 2 * depth
    assert _atom_at(nu, 2.0**depth * nu.barycenter) == Fraction(1, 2**depth)


def test_iterated_laminate_telescopes():
    a = np.array([[0.0, 1.0], [-1.0, 0.0]])
    ap = a / mat2.svd(a).sigma1

    def f(m):
        return 2.0 * np.linalg.norm(0.5 * (m + m.T)) - mat2.frobenius(m)

    base = lam.ornstein_laminate(a)
    for k in range(1, 7):
        nu = lam.iterated_laminate(a, k)
        want = f(base.barycenter) + k * (f(ap) + f(-ap)) / 3
        assert lam.integrate(nu, f) == pytest.approx(want, abs=1e-12)


def test_replay_detects_broken_certificate():
    nu = lam.ornstein_laminate(np.eye(2))
    bad = Laminate(nu.barycenter, [nu.steps[1], nu.steps[0]], nu.atoms)
    with pytest.raises(lam.MalformedLaminate):
        lam.validate(bad)


def test_validate_flags_wrong_weights_and_non_rank_one():
    nu = lam.ornstein_laminate(np.eye(2))
    atoms = [Atom(Fraction(1, 2), nu.atoms[0].matrix), Atom(Fraction(1, 2), nu.atoms[1].matrix)]
    assert not lam.validate(Laminate(nu.barycenter, nu.steps, atoms)).passed

    b = np.zeros((2, 2))
    step = SplitStep(b, Fraction(1, 2), np.eye(2), -np.eye(2))
    bad = Laminate(b, [step], [Atom(Fraction(1, 2), np.eye(2)), Atom(Fraction(1, 2), -np.eye(2))])
    rep = lam.validate(bad)
    assert not rep.passed
    assert not rep.steps[0].ok


def test_dirac_is_valid():
    nu = lam.dirac(np.eye(2))
    assert lam.validate(nu).passed
    assert lam.integrate(nu, mat2.frobenius) == pytest.approx(math.sqrt(2))


def test_json_round_trip():
    nu = lam.iterated_laminate(np.array([[1.0, 0.5], [0.0, 2.0]]), 3)
    text = json.dumps(lam.to_json(nu))
    back = lam.from_json(json.loads(text))
    assert lam.validate(back).passed
    assert [a.weight for a in back.atoms] == [a.weight for a in nu.atoms]
    for x, y in zip(back.atoms, nu.atoms):
        assert np.array_equal(x.matrix, y.matrix)
    assert lam.to_json(back) == lam.to_json(nu)


def test_from_json_rejects_garbage():
    with pytest.raises(lam.MalformedLaminate):
        lam.from_json({"atoms": [{"weight": 1}]})
