"""Essential-spectrum prediction, Weyl vectors and density of states."""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, NumericError, PlacementError
from .lattice import build_laplacian
from .potential import (bump_values, draw_conditioned, merge_intervals,
                        sample_realization)

__all__ = [
    'SpectrumPrediction', 'predict_essential_spectrum', 'WeylVector',
    'weyl_window', 'max_feasible_halfwidth', 'make_weyl_vector',
    'free_residual', 'weyl_residual_check', 'conditioned_realization',
    'DensityOfStates', 'density_of_states',
]


@dataclass(frozen=True)
class SpectrumPrediction:
    intervals: tuple

    def contains(self, x, tol=0.0):
        x = np.asarray(x, dtype=float)
        hit = np.zeros(x.shape, dtype=bool)
        for lo, hi in self.intervals:
            hit |= (x >= lo - tol) & (x <= hi + tol)
        return hit

    def fattened(self, eps):
        return SpectrumPrediction(tuple(merge_intervals(
            (lo - eps, hi + eps) for lo, hi in self.intervals)))

    @property
    def total_length(self):
        return sum(hi - lo for lo, hi in self.intervals)

    def to_json(self):
        return [[lo, hi] for lo, hi in self.intervals]


def predict_essential_spectrum(nu, lam, mu):
    """``[-2 nu, 2 nu] + lam * supp(mu)`` as merged closed intervals."""
    if lam < 0:
        raise ArgumentError("lambda must be non-negative")
    band = 2.0 * nu
    pieces = [(-band + lam * lo, band + lam * hi) for lo, hi in mu.support()]
    return SpectrumPrediction(tuple(merge_intervals(pieces)))


def weyl_window(x):
    """Half-cosine window ``cos(pi x / 2)`` on ``|x| < 1``, zero outside."""
    x = np.asarray(x, dtype=float)
    return np.where(np.abs(x) < 1.0, np.cos(0.5 * np.pi * x), 0.0)


@dataclass(frozen=True, eq=False)
class WeylVector:
    energy: float
    theta: np.ndarray
    halfwidth: int
    center: np.ndarray
    values: np.ndarray = field(repr=False)
    box: object = field(repr=False)

    @property
    def support(self):
        return np.flatnonzero(self.values)


def _plateau_cube_ok(spec, index, center, j):
    """``Lambda_j(center)`` lies where bump ``index`` equals 1."""
    offset = np.asarray(center) - spec.centers[index]
    r = spec.radii[index]
    # farthest corner of the cube from the bump centre, Euclidean
    corner = np.linalg.norm(np.abs(offset) + j)
    return corner <= spec.profile.plateau_radius * r


def max_feasible_halfwidth(spec, index, center=None):
    """Largest ``j`` with ``Lambda_j(center)`` inside the plateau of bump ``index``."""
    if center is None:
        center = spec.centers[index]
    j = -1
    while _plateau_cube_ok(spec, index, center, j + 1):
        j += 1
    return j


def _plateau_owner(spec, center):
    d = np.abs(spec.centers - np.asarray(center)).max(axis=1)
    inside = np.flatnonzero(d < spec.radii)
    return int(inside[0]) if len(inside) else None


def make_weyl_vector(E, j, center, box, theta=None, spec=None):
    """Unit vector ``cos(theta.(n - c)) w((n - c)/j)`` with ``2 sum cos theta_i = E``.

    Without ``theta`` the momentum is split evenly, ``theta_i = arccos(E / 2 nu)``.
    With ``spec`` the cube ``Lambda_j(center)`` must lie inside a bump plateau.
    """
    nu = box.dim
    if not -2.0 * nu < E < 2.0 * nu:
        raise ArgumentError(f"energy {E} outside (-{2 * nu}, {2 * nu})")
    if int(j) != j or j < 1:
        raise ArgumentError("halfwidth must be a positive integer")
    center = np.asarray(center, dtype=int)
    if theta is None:
        theta = np.full(nu, math.acos(E / (2.0 * nu)))
    theta = np.asarray(theta, dtype=float)
    if not np.isclose(2.0 * np.cos(theta).sum(), E, atol=1e-12):
        raise ArgumentError("theta does not lie on the energy shell")
    if np.abs(center).max() + j > box.half_side:
        raise PlacementError(f"Lambda_{j}({center.tolist()}) leaves the box",
                             max_feasible=box.half_side - int(np.abs(center).max()))
    if spec is not None:
        owner = _plateau_owner(spec, center)
        if owner is None:
            raise PlacementError(f"{center.tolist()} is not inside any bump",
                                 max_feasible=-1)
        if not _plateau_cube_ok(spec, owner, center, j):
            best = max_feasible_halfwidth(spec, owner, center)
            raise PlacementError(
                f"Lambda_{j}({center.tolist()}) leaves the plateau of bump {owner}; "
                f"largest feasible halfwidth is {best}", max_feasible=best)
    x = box.sites - center
    values = np.cos(x @ theta) * np.prod(weyl_window(x / j), axis=1)
    values /= np.linalg.norm(values)
    return WeylVector(float(E), theta, int(j), center, values, box)


def free_residual(vector, laplacian=None):
    """``||(Delta - E) f||``."""
    if laplacian is None:
        laplacian = build_laplacian(vector.box)
    return float(np.linalg.norm(laplacian.matrix @ vector.values
                                - vector.energy * vector.values))


def weyl_residual_check(realization, E, r_coupling, vector, ell=None):
    """``||(H - (E + lam r)) g||`` for ``g`` inside a bump plateau.

    The bump hosting ``g`` must have coupling within ``1/ell`` of ``r`` when
    ``ell`` is given. The triangle bound ``||(Delta - E) f|| + lam |omega - r|``
    is verified before returning.
    """
    if not np.isclose(vector.energy, E):
        raise ArgumentError("vector was built for a different energy")
    spec = realization.spec
    owner = _plateau_owner(spec, vector.center)
    if owner is None:
        raise ArgumentError("vector is not inside any bump")
    plateau = bump_values(spec, owner, vector.box)[vector.support]
    if not np.all(plateau == 1.0):
        raise ArgumentError("vector support escapes the plateau")
    omega = float(realization.couplings[owner])
    if ell is not None and not abs(omega - r_coupling) < 1.0 / ell:
        raise ArgumentError(f"coupling {omega} not within 1/{ell} of {r_coupling}")
    lam = realization.coupling_strength
    lap = build_laplacian(vector.box)
    H = realization.hamiltonian(lap)
    g = vector.values
    residual = float(np.linalg.norm(H.matrix @ g - (E + lam * r_coupling) * g))
    bound = free_residual(vector, lap) + lam * abs(omega - r_coupling)
    if residual > bound + 1e-12 * max(1.0, bound):
        raise NumericError(f"residual {residual} exceeds triangle bound {bound}")
    return residual


def conditioned_realization(spec, mu, lam, seed, box, index, r_coupling, ell,
                            cap=10 ** 6):
    """Realization whose bump ``index`` has coupling in ``(r - 1/ell, r + 1/ell)``."""
    base = sample_realization(spec, mu, lam, seed, box)
    couplings = base.couplings.copy()
    lo, hi = r_coupling - 1.0 / ell, r_coupling + 1.0 / ell
    if not lo < couplings[index] < hi:
        couplings[index] = draw_conditioned(mu, seed, index, lo, hi, cap)
    return sample_realization(spec, mu, lam, seed, box, couplings=couplings)


@dataclass(frozen=True)
class DensityOfStates:
    edges: np.ndarray
    density: np.ndarray
    outside_fraction: float


def density_of_states(eigen, bins=50, prediction=None, tol=1e-10):
    """Normalized eigenvalue histogram and the fraction outside ``prediction``."""
    if bins < 10:
        raise ArgumentError("bins must be at least 10")
    w = eigen.eigenvalues
    lo, hi = w.min(), w.max()
    if hi - lo < 1e-12:
        lo, hi = lo - 0.5, hi + 0.5
    density, edges = np.histogram(w, bins=bins, range=(lo, hi), density=True)
    outside = 0.0
    if prediction is not None:
        outside = float(np.mean(~prediction.contains(w, tol)))
    return DensityOfStates(edges, density, outside)
