import math

import numpy as np
import pytest

from ornstein import hessian, laminate

OFFDIAG = np.array([[0.0, 1.0], [1.0, 0.0]]) / math.sqrt(2)


@pytest.mark.parametrize("lam", [1 / 3, 1 / 4, 0.5])
def test_sawtooth_profile(lam):
    u = np.linspace(0, 3, 3001)
    s = hessian.sawtooth(u, lam)
    h = u[1] - u[0]
    assert np.allclose(hessian.sawtooth(u + 1, lam), s, atol=1e-12)
    second = (s[2:] - 2 * s[1:-1] + s[:-2]) / h**2
    frac = u[1:-1] - np.floor(u[1:-1])
    inner = (np.abs(frac - lam) > 2 * h) & (frac > 2 * h) & (frac < 1 - 2 * h)
    want = np.where(frac < lam, 1 - lam, -lam)
    assert np.allclose(second[inner], want[inner], atol=1e-6)


def test_phase_cutoff_support():
    u = np.linspace(0, 1, 1001, endpoint=False)
    c = hessian.phase_cutoff(u, 1 / 3, 0.1)
    assert np.all(c[u < 1 / 3] == 0)
    assert np.all((c >= 0) & (c <= 1))
    mid = (u > 1 / 3 + 0.1 * 2 / 3) & (u < 1 - 0.1 * 2 / 3)
    assert np.all(c[mid] == 1)


def test_periodic_mode_mean_hessian_is_barycenter():
    a = np.diag([1.0, -0.5])
    nu = laminate.ornstein_laminate_sym(a)
    m = hessian.mean_hessian_periodic(a, 2, 512)
    assert np.abs(m - nu.barycenter).max() <= 1e-8


def test_predicted_ratio_closed_form():
    for k in range(1, 7):
        assert hessian.predicted_ratio(OFFDIAG, k) == pytest.approx(k / (6 * (1 - 2.0**-k)), rel=1e-12)


def test_report_fields_and_resolution():
    rep = hessian.build_witness_hessian(OFFDIAG, 1, 256)
    assert rep.l1_offdiag > 0 and rep.l1_diag > 0
    assert rep.ratio == pytest.approx(rep.l1_offdiag / rep.l1_diag)
    assert rep.richardson_error < 0.05
    assert rep.finest_period_cells > 8
    # the single-level potential stays below the exact two-split value because
    # the window and the phase cutoff leave part of the square unsplit
    assert 0 < rep.ratio < rep.predicted_ratio


def test_ratio_grows_while_resolved():
    reps = [hessian.build_witness_hessian(OFFDIAG, k, 256) for k in (1, 2)]
    assert reps[1].ratio > reps[0].ratio


def test_errors():
    with pytest.raises(laminate.NotSymmetric):
        hessian.build_witness_hessian([[0, 1], [0, 0]], 1, 256)
    with pytest.raises(laminate.ZeroMatrix):
        hessian.build_witness_hessian(np.zeros((2, 2)), 1, 256)
    with pytest.raises(ValueError):
        hessian.build_witness_hessian(OFFDIAG, 1, 128)
