import math

import numpy as np
import pytest
from numpy.polynomial import Polynomial
from hypothesis import given, settings, strategies as st

from mourrelab import (ArgumentError, CapacityError, CouplingDistribution, LatticeBox,
                       build_conjugate_operator, build_cutoff, build_laplacian,
                       build_support, eigendecompose, lambda_threshold_scan,
                       lemma1_check, make_bump_profile, mourre_check, torus_scan)
from mourrelab.lattice import Boundary, commutator
from mourrelab.mourre import apply_function, collar_mask, periodic_symbol_check


def closed_form_moment(a, b, s, T=1e4, dt=0.02):
    """integral |t| |psi_hat| from exact piecewise-polynomial transforms.

    Each polynomial piece P on [p, q] has
    int P e^{-itx} = [-e^{-itx} sum_k P^(k) / (it)^(k+1)]_p^q.
    Small t, where that sum cancels badly, uses Gauss-Legendre quadrature.
    """
    S = Polynomial([0, 0, 0, 10, -15, 6])
    pieces = [(1 - S(Polynomial([a / s, -1 / s])), a - s, a),
              (Polynomial([1.0]), a, b),
              (1 - S(Polynomial([-b / s, 1 / s])), b, b + s)]
    t = np.arange(dt, T, dt)
    it = 1j * t
    total = np.zeros_like(it)
    for poly, p, q in pieces:
        derivs = [poly.deriv(k) for k in range(poly.degree() + 1)]

        def antideriv(x):
            return -np.exp(-it * x) * sum(d(x) / it ** (k + 1) for k, d in enumerate(derivs))
        total += antideriv(q) - antideriv(p)
    small = t < 2
    xg, wg = np.polynomial.legendre.leggauss(400)
    lo, hi = a - s, b + s
    x = 0.5 * (hi - lo) * xg + 0.5 * (hi + lo)
    fx = np.piecewise(x, [x < a, (x >= a) & (x <= b), x > b],
                      [pieces[0][0], 1.0, pieces[2][0]])
    total[small] = ((fx * wg * 0.5 * (hi - lo))[None, :]
                    * np.exp(-1j * t[small, None] * x[None, :])).sum(axis=1)
    return 2 * np.trapezoid(t * np.abs(total) / (2 * np.pi), t)


def test_cutoff_shape():
    psi = build_cutoff(-0.5, 0.5)
    assert psi.delta == pytest.approx(0.75)
    assert psi.flank == pytest.approx(0.375)
    lo, hi = psi.support
    x = np.linspace(-3, 3, 6001)
    y = psi(x)
    assert np.all(y[(x >= -0.5) & (x <= 0.5)] == 1.0)
    assert np.all(y[(x <= lo) | (x >= hi)] == 0.0)
    assert np.all((y >= 0) & (y <= 1))
    assert lo >= -2 + psi.delta and hi <= 2 - psi.delta


@pytest.mark.parametrize('a,b', [(-0.5, 0.5), (-1.0, 0.3), (0.2, 1.5)])
def test_fourier_integral_against_closed_form(a, b):
    psi = build_cutoff(a, b)
    assert psi.fourier_integral == pytest.approx(closed_form_moment(a, b, psi.flank), rel=1e-4)


def test_cutoff_rejects_bad_interval():
    with pytest.raises(ArgumentError, match=r'outside \(-2, 2\)'):
        build_cutoff(-2.5, 0.5)
    with pytest.raises(ArgumentError):
        build_cutoff(0.5, 0.5)


def test_apply_function_matches_eigenvalue_map():
    box = LatticeBox(1, 20)
    eig = eigendecompose(build_laplacian(box))
    psi = build_cutoff(-0.5, 0.5)
    F = apply_function(eig, psi)
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(F.toarray())),
                               np.sort(psi(eig.eigenvalues)), atol=1e-12)


@pytest.mark.parametrize('delta', [0.25, 0.5, 0.75])
def test_torus_odd_dimension(delta):
    for nu in (1, 3):
        res = torus_scan(nu, delta, 128)
        assert res.passed and res.min_value >= res.threshold


def test_torus_one_dimension_closed_form():
    # |cos t| < 1 - delta/2 forces 4 sin^2 t > 4 - 4 (1 - delta/2)^2
    delta = 0.5
    res = torus_scan(1, delta, 4096)
    assert res.min_value == pytest.approx(4 - 4 * (1 - delta / 2) ** 2, rel=1e-2)


def test_torus_even_dimension_fails():
    res = torus_scan(2, 0.5, 128)
    assert res.min_value < 0.05 and not res.passed
    d = np.abs(np.array(res.argmin) - np.array([0.0, np.pi]))
    d = np.minimum(d, 2 * np.pi - d)
    assert np.all(d <= 2 * 2 * np.pi / 128)


def test_torus_limits():
    with pytest.raises(CapacityError):
        torus_scan(4, 0.5, 64)
    with pytest.raises(ArgumentError):
        torus_scan(3, 0.5, 32)


def test_periodic_symbol_route_agrees_with_scan():
    matrix_min, scan_min = periodic_symbol_check(1, 40, -0.5, 0.5)
    assert matrix_min == pytest.approx(scan_min, abs=1e-10)


def test_collar_mask_counts():
    box = LatticeBox(1, 20)
    assert collar_mask(box, 5).sum() == 10


def test_mourre_at_zero_disorder_exceeds_three_delta_minus_slack():
    box = LatticeBox(1, 100)
    lap = build_laplacian(box)
    psi = build_cutoff(-0.5, 0.5)
    row = mourre_check(lap, build_conjugate_operator(box), psi)
    assert row.rank == row.rank_filtered > 0
    assert row.m >= 3 * psi.delta - 0.25
    assert row.margin_2delta > 0


def test_mourre_on_literal_truncated_commutator_is_negative():
    # the boundary defect of the truncated commutator dominates at lambda = 0
    box = LatticeBox(1, 50)
    lap, A = build_laplacian(box), build_conjugate_operator(box)
    row = mourre_check(lap, A, build_cutoff(-0.5, 0.5), commutator_op=commutator(A, lap))
    assert row.m < 0


def test_mourre_compression_agrees_with_psi_sandwich():
    box = LatticeBox(1, 40)
    lap, A = build_laplacian(box), build_conjugate_operator(box)
    psi = build_cutoff(-0.5, 0.5)
    eig = eigendecompose(lap)
    row = mourre_check(lap, A, psi, eigen=eig, collar_excess=1e9)
    # P C P has the compressed eigenvalues plus zeros on the complement
    sel = eig.select(psi.a, psi.b)
    V = eig.eigenvectors[:, sel]
    from mourrelab import bulk_commutator
    PCP = V @ (V.T @ (bulk_commutator(A, lap).matrix @ V)) @ V.T
    w = np.linalg.eigvalsh(PCP)
    nonzero = w[np.abs(w) > 1e-9]
    assert nonzero.min() == pytest.approx(row.m, rel=1e-10)


def test_mourre_rejects_periodic():
    box = LatticeBox(1, 10, Boundary.PERIODIC)
    with pytest.raises(Exception):
        mourre_check(build_laplacian(box), None, build_cutoff(-0.5, 0.5))


def test_mourre_degenerate_empty_window():
    box = LatticeBox(1, 3)
    row = mourre_check(build_laplacian(box), build_conjugate_operator(box),
                       build_cutoff(0.05, 0.1))
    assert row.degenerate and math.isinf(row.m)


def test_lemma1_small_box():
    spec = build_support(4, 2, 1, make_bump_profile(0.5))
    box = LatticeBox(1, 30)
    mu = CouplingDistribution.uniform(-1, 1)
    rows = lemma1_check(spec, mu, [0.0, 1e-3, 1e-2], build_cutoff(-0.5, 0.5), box, [0, 1])
    assert len(rows) == 6
    assert all(r.ok for r in rows)
    zero = [r for r in rows if r.lam == 0]
    assert all(r.diff_norm == 0 for r in zero)


def test_lemma1_thread_count_does_not_change_results(monkeypatch):
    spec = build_support(4, 2, 1, make_bump_profile(0.5))
    box = LatticeBox(1, 30)
    mu = CouplingDistribution.uniform(-1, 1)
    psi = build_cutoff(-0.5, 0.5)
    one = lemma1_check(spec, mu, [1e-2, 1e-1], psi, box, [0, 1, 2])
    monkeypatch.setenv('MOURRELAB_THREADS', '3')
    many = lemma1_check(spec, mu, [1e-2, 1e-1], psi, box, [0, 1, 2])
    assert one == many


def test_lambda_scan_threshold_and_validation():
    spec = build_support(8, 2, 1, make_bump_profile(0.5))
    box = LatticeBox(1, 50)
    mu = CouplingDistribution.uniform(-1, 1)
    psi = build_cutoff(-0.5, 0.5)
    rep = lambda_threshold_scan(spec, mu, psi, [0.0, 0.05, 0.2], [0, 1], box)
    assert len(rep.rows) == 6
    assert rep.lambda_threshold is not None and rep.lambda_threshold > 0
    env = rep.envelope()
    assert np.all(np.diff(env) <= 0)
    assert set(rep.commutator_norms) == {0, 1}
    with pytest.raises(ArgumentError):
        lambda_threshold_scan(spec, mu, psi, [0.2, 0.1], [0], box)
    with pytest.raises(ArgumentError):
        lambda_threshold_scan(spec, mu, psi, [0.0, 1.0], [0], box)


@settings(max_examples=20, deadline=None)
@given(st.floats(-1.9, 1.8), st.floats(0.05, 1.0))
def test_cutoff_flanks_stay_in_safe_band(a, width):
    b = min(a + width, 1.95)
    psi = build_cutoff(a, b)
    lo, hi = psi.support
    assert psi.delta > 0 and psi.flank > 0
    assert lo >= -2 + psi.delta - 1e-12 and hi <= 2 - psi.delta + 1e-12
