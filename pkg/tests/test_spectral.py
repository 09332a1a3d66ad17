import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mourrelab import (ArgumentError, CouplingDistribution, LatticeBox, PlacementError,
                       build_laplacian, build_support, density_of_states, eigendecompose,
                       make_bump_profile, make_weyl_vector, predict_essential_spectrum,
                       sample_realization, weyl_residual_check)
from mourrelab.spectral import (conditioned_realization, free_residual,
                                max_feasible_halfwidth, weyl_window)


def test_prediction_intervals():
    mu = CouplingDistribution.atomic([0.0, 1.0])
    pred = predict_essential_spectrum(1, 0.5, mu)
    assert pred.intervals == ((-2.0, 2.5),)
    pred = predict_essential_spectrum(1, 5.0, mu)
    assert pred.intervals == ((-2.0, 2.0), (3.0, 7.0))
    assert pred.total_length == pytest.approx(8.0)
    assert pred.contains([2.5, 2.0, 3.0]).tolist() == [False, True, True]
    assert pred.fattened(0.5).intervals == ((-2.5, 7.5),)


def test_prediction_rejects_negative_lambda():
    with pytest.raises(ArgumentError):
        predict_essential_spectrum(1, -0.1, CouplingDistribution.uniform(0, 1))


def test_weyl_window_shape():
    assert weyl_window(0.0) == 1.0
    assert weyl_window(1.0) == 0.0 and weyl_window(-1.5) == 0.0


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 2), st.floats(-0.95, 0.95))
def test_weyl_vector_on_energy_shell(dim, frac):
    box = LatticeBox(dim, 12)
    E = frac * 2 * dim
    g = make_weyl_vector(E, 8, np.zeros(dim, int), box)
    assert np.linalg.norm(g.values) == pytest.approx(1.0)
    assert 2 * np.cos(g.theta).sum() == pytest.approx(E)
    assert np.abs(box.sites[g.support]).max() < 8


def test_free_residual_decays_with_window():
    box = LatticeBox(1, 200)
    res = [free_residual(make_weyl_vector(0.3, j, [0], box)) for j in (10, 40, 160)]
    assert res[0] > res[1] > res[2]
    # a half-cosine window of half-width j has residual of order 1/j
    assert res[1] * 40 == pytest.approx(res[2] * 160, rel=0.1)


def test_weyl_placement_errors():
    box = LatticeBox(1, 100)
    spec = build_support(50, 1, 1, make_bump_profile(0.9))
    center = spec.centers[1]
    jmax = max_feasible_halfwidth(spec, 1)
    assert jmax == 22
    with pytest.raises(PlacementError) as err:
        make_weyl_vector(0.0, jmax + 1, center, box, spec=spec)
    assert err.value.max_feasible == jmax
    with pytest.raises(PlacementError):
        make_weyl_vector(0.0, 5, [0], box, spec=spec)
    with pytest.raises(PlacementError):
        make_weyl_vector(0.0, 30, [90], box)
    with pytest.raises(ArgumentError):
        make_weyl_vector(2.5, 5, [0], box)


def test_weyl_residual_triangle_bound():
    box = LatticeBox(1, 100)
    spec = build_support(50, 1, 1, make_bump_profile(0.9))
    mu = CouplingDistribution.uniform(0.0, 1.0)
    real = conditioned_realization(spec, mu, 0.5, 3, box, 1, 0.7, 100)
    assert abs(real.couplings[1] - 0.7) < 1 / 100
    g = make_weyl_vector(1.0, 20, spec.centers[1], box, spec=spec)
    res = weyl_residual_check(real, 1.0, 0.7, g, ell=100)
    omega = real.couplings[1]
    assert res <= free_residual(g) + 0.5 * abs(omega - 0.7) + 1e-12
    # on the plateau V g = omega g exactly, so with r = omega the residual is free
    exact = weyl_residual_check(real, 1.0, omega, g)
    assert exact == pytest.approx(free_residual(g), rel=1e-12)


def test_density_of_states_normalized():
    box = LatticeBox(1, 100)
    eig = eigendecompose(build_laplacian(box))
    pred = predict_essential_spectrum(1, 0.0, CouplingDistribution.atomic([0.0]))
    dos = density_of_states(eig, 40, pred)
    assert np.sum(dos.density * np.diff(dos.edges)) == pytest.approx(1.0)
    assert dos.outside_fraction == 0.0
    # arcsine law: the band edges carry more weight than the centre
    assert dos.density[0] > dos.density[20] and dos.density[-1] > dos.density[20]
    with pytest.raises(ArgumentError):
        density_of_states(eig, 5)


def test_finite_volume_spectrum_contained_in_fattened_prediction():
    mu = CouplingDistribution.uniform(-1, 1)
    spec = build_support(2, 2, 2, make_bump_profile(0.5))
    box = LatticeBox(2, 8)
    for seed, lam in [(0, 0.3), (1, 1.0)]:
        H = sample_realization(spec, mu, lam, seed, box).hamiltonian()
        w = eigendecompose(H).eigenvalues
        allowed = predict_essential_spectrum(2, 0.0, mu).fattened(lam * mu.E_infty)
        assert np.all(allowed.contains(w, 1e-10))
