"""Energy cutoffs, the torus lemma, Lemma-1 norm bounds and the Mourre check.

The positive-commutator estimate is checked on finite Dirichlet boxes: for an
interval ``I = [a, b]`` inside ``(-2, 2)`` the compression of ``[A, H]`` to the
spectral subspace of ``H`` in ``I`` should stay above ``3 delta`` at zero
disorder and above ``2 delta`` for small disorder, with
``delta = min(1 + a/2, 1 - b/2)``.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from .errors import ArgumentError, CapacityError
from .lattice import (Boundary, LatticeBox, LatticeOperator, Symmetry,
                      build_conjugate_operator, build_laplacian, build_shift,
                      bulk_commutator, commutator, eigendecompose,
                      laplacian_boundary_correction, operator_norm)
from .potential import sample_realization, smoothstep

__all__ = [
    'CutoffFunction', 'build_cutoff', 'fourier_moment', 'apply_function',
    'Lemma1Row', 'lemma1_check', 'TorusScanResult', 'torus_scan',
    'symbol_operator', 'periodic_symbol_check', 'MourreRow', 'MourreReport',
    'mourre_check', 'lambda_threshold_scan', 'collar_mask',
]


@dataclass(frozen=True)
class CutoffFunction:
    """C^2 cutoff equal to 1 on ``[a, b]`` and 0 outside ``[a - s, b + s]``."""

    a: float
    b: float
    delta: float
    flank: float
    fourier_integral: float = field(default=math.nan, compare=False)

    @property
    def support(self):
        return self.a - self.flank, self.b + self.flank

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        left = smoothstep((self.a - x) / self.flank)
        right = smoothstep((x - self.b) / self.flank)
        return 1.0 - left - right

    def lemma1_constant(self, e_infty):
        """``E_inf * integral |t| |psi_hat(t)| dt``."""
        return e_infty * self.fourier_integral


def fourier_moment(psi, n=2 ** 14, pad=8, half_width=4.0):
    """``integral |t| |psi_hat(t)| dt`` with ``psi_hat = (1/2pi) int psi e^{-itx}``.

    ``psi`` is sampled on ``n`` points of ``[-half_width, half_width)``, the
    samples are zero padded by ``pad`` to refine the frequency grid, and the
    modulus of the DFT is integrated by the trapezoidal rule.
    """
    dx = 2.0 * half_width / n
    x = -half_width + dx * np.arange(n)
    spectrum = np.fft.rfft(psi(x), n=n * pad)
    t = 2.0 * np.pi * np.arange(len(spectrum)) / (n * pad * dx)
    magnitude = np.abs(spectrum) * dx / (2.0 * np.pi)
    # |psi_hat| is even for real psi
    return 2.0 * trapezoid(t * magnitude, t)


def _converged_moment(psi, rtol=5e-4, n=2 ** 14, pad=8, max_n=2 ** 19):
    prev = fourier_moment(psi, n, pad)
    while n < max_n:
        n, pad = 2 * n, 2 * pad
        cur = fourier_moment(psi, n, pad)
        if abs(cur - prev) <= rtol * abs(cur):
            return cur
        prev = cur
    return prev


def build_cutoff(a, b):
    """Cutoff for ``I = [a, b]``; its flanks stay inside ``(-2 + delta, 2 - delta)``."""
    if not -2.0 < a < b < 2.0:
        raise ArgumentError(f"interval [{a}, {b}] must satisfy -2 < a < b < 2 "
                            "(outside (-2, 2))")
    delta = min(1.0 + a / 2.0, 1.0 - b / 2.0)
    flank = 0.5 * min(a - (-2.0 + delta), (2.0 - delta) - b)
    psi = CutoffFunction(float(a), float(b), delta, flank)
    moment = _converged_moment(psi)
    return CutoffFunction(float(a), float(b), delta, flank, moment)


def _function_matrix(eigen, f):
    V = eigen.eigenvectors
    M = (V * f(eigen.eigenvalues)) @ V.T
    return 0.5 * (M + M.T)


def apply_function(eigen, psi):
    """``psi(H) = V diag(psi(w)) V^T`` from an eigensystem."""
    return LatticeOperator(eigen.source_box, _function_matrix(eigen, psi),
                           Symmetry.SYMMETRIC)


def _sym_norm(M):
    return float(np.abs(np.linalg.eigvalsh(M)).max())


@dataclass(frozen=True)
class Lemma1Row:
    nu: int
    N: int
    lam: float
    seed: int
    diff_norm: float
    ratio: float
    constant: float

    @property
    def ok(self):
        return self.ratio <= self.constant


def _workers():
    return max(1, int(os.environ.get('MOURRELAB_THREADS', '1')))


def lemma1_check(spec, mu, lambdas, psi, box, seeds):
    """``||psi(H_lambda) - psi(Delta)|| / lambda`` against the Fourier constant.

    The constant uses the realization's largest coupling modulus, which bounds
    ``||V||`` because the bumps take values in [0, 1] on disjoint supports.
    """
    lap = build_laplacian(box)
    base = _function_matrix(eigendecompose(lap), psi)

    def one(item):
        lam, seed = item
        real = sample_realization(spec, mu, lam, seed, box)
        e_inf = float(np.abs(real.couplings).max(initial=0.0))
        if lam == 0:
            diff = 0.0
            ratio = 0.0
        else:
            H = real.hamiltonian(lap)
            diff = _sym_norm(_function_matrix(eigendecompose(H), psi) - base)
            ratio = diff / lam
        return Lemma1Row(box.dim, box.side, float(lam), int(seed), diff, ratio,
                         psi.lemma1_constant(e_inf))

    grid = sorted((float(lam), int(s)) for lam in lambdas for s in seeds)
    with ThreadPoolExecutor(_workers()) as pool:
        return list(pool.map(one, grid))


@dataclass(frozen=True)
class TorusScanResult:
    dim: int
    delta: float
    grid_points_per_axis: int
    min_value: float
    argmin: tuple
    bound_3delta: float
    threshold: float
    points_in_window: int

    @property
    def passed(self):
        return self.min_value >= self.threshold


def _scan(nu, grid, inside):
    """Minimum of ``4 sum sin^2`` over grid points where ``inside(sum cos)``."""
    theta = 2.0 * np.pi * np.arange(grid) / grid
    cos, sin2 = np.cos(theta), 4.0 * np.sin(theta) ** 2
    rest_shape = (grid,) * (nu - 1)
    if nu > 1:
        rest_cos = sum(np.meshgrid(*([cos] * (nu - 1)), indexing='ij'))
        rest_sym = sum(np.meshgrid(*([sin2] * (nu - 1)), indexing='ij'))
    else:
        rest_cos = np.zeros(())
        rest_sym = np.zeros(())
    best, where, count = math.inf, None, 0
    for i in range(grid):
        mask = inside(cos[i] + rest_cos)
        n_in = int(np.count_nonzero(mask))
        if not n_in:
            continue
        count += n_in
        vals = np.where(mask, sin2[i] + rest_sym, np.inf)
        j = int(np.argmin(vals))
        if vals.flat[j] < best:
            best = float(vals.flat[j])
            where = (i,) + (np.unravel_index(j, rest_shape) if nu > 1 else ())
    argmin = tuple(float(theta[k]) for k in where) if where else ()
    return best, argmin, count


def torus_scan(nu, delta, grid, energy_window=None):
    """Minimum of ``4 sum sin^2(theta_i)`` over the grid points of ``W``.

    ``W`` is ``|sum cos(theta_i)| < 1 - delta/2``. With ``energy_window=(a, b)``
    the scan runs over ``a <= 2 sum cos(theta_i) <= b`` instead.
    """
    if nu > 3:
        raise CapacityError(f"exhaustive torus scans are limited to nu <= 3, got {nu}")
    if nu < 1:
        raise ArgumentError("nu must be positive")
    if grid < 64:
        raise ArgumentError(f"grid must have at least 64 points per axis, got {grid}")
    if energy_window is None:
        limit = 1.0 - delta / 2.0
        inside = lambda s: np.abs(s) < limit
    else:
        lo, hi = energy_window
        inside = lambda s: (2.0 * s >= lo) & (2.0 * s <= hi)
    best, argmin, count = _scan(nu, grid, inside)
    return TorusScanResult(nu, float(delta), int(grid), best, argmin, 3.0 * delta,
                           3.0 * delta * (1.0 - 2.0 * np.pi * nu / grid), count)


def symbol_operator(box):
    """``-sum_j (T_j - T_j^{-1})^2``; on a torus ``T^{-1} = T^T``."""
    mat = None
    for axis in range(1, box.dim + 1):
        T = build_shift(box, axis).matrix
        K = T - T.T
        term = -(K @ K)
        mat = term if mat is None else mat + term
    return LatticeOperator(box, mat, Symmetry.SYMMETRIC)


def periodic_symbol_check(nu, half_side, a, b):
    """Compressed symbol on a periodic box versus the momentum-grid minimum.

    Returns ``(matrix_min, scan_min)``; they agree because the symbol commutes
    with the periodic Laplacian.
    """
    box = LatticeBox(nu, half_side, Boundary.PERIODIC)
    eigen = eigendecompose(build_laplacian(box))
    V = eigen.eigenvectors[:, eigen.select(a, b)]
    S = symbol_operator(box).matrix
    matrix_min = float(np.linalg.eigvalsh(V.T @ (S @ V)).min()) if V.size else math.inf
    scan_min, _, _ = _scan(nu, box.side,
                           lambda s: (2.0 * s >= a) & (2.0 * s <= b))
    return matrix_min, scan_min


def collar_mask(box, width):
    """Sites within ``width`` steps of leaving the box."""
    return box.distance_to_boundary() <= width


@dataclass(frozen=True)
class MourreRow:
    nu: int
    N: int
    a: float
    b: float
    delta: float
    lam: float
    seed: int
    rank: int
    rank_filtered: int
    m_unfiltered: float
    m: float
    collar_width: int
    collar_excess: float
    eigenvalues: tuple = field(default=(), repr=False, compare=False)

    @property
    def degenerate(self):
        return self.rank_filtered == 0

    @property
    def filtered_flag(self):
        return self.rank_filtered < self.rank

    @property
    def margin_2delta(self):
        return self.m - 2.0 * self.delta

    @property
    def margin_3delta(self):
        return self.m - 3.0 * self.delta


def _min_compressed(C, V):
    if not V.shape[1]:
        return math.inf, ()
    w = np.linalg.eigvalsh(V.T @ (C @ V))
    return float(w[0]), tuple(float(x) for x in w)


def mourre_check(H, A, psi, collar_width=5, collar_excess=0.5, eigen=None,
                 commutator_op=None, lam=0.0, seed=0):
    """Smallest eigenvalue of ``P [A, H] P`` on the range of ``P``.

    ``P`` projects onto eigenvectors of ``H`` with eigenvalue in ``[a, b]``.
    The filtered variant also drops eigenvectors whose weight on the boundary
    collar exceeds ``(1 + collar_excess)`` times the collar's share of sites,
    i.e. states concentrated at the boundary rather than spread through the bulk.
    Unless ``commutator_op`` is given, ``[A, H]`` is the boundary-corrected
    commutator of :func:`~mourrelab.lattice.bulk_commutator`.
    """
    box = H.box
    if box.boundary is not Boundary.DIRICHLET:
        raise ArgumentError("mourre_check runs on Dirichlet boxes")
    if H.symmetry is not Symmetry.SYMMETRIC or A.symmetry is not Symmetry.ANTISYMMETRIC:
        raise ArgumentError("need symmetric H and antisymmetric A")
    if eigen is None:
        eigen = eigendecompose(H)
    if commutator_op is None:
        commutator_op = bulk_commutator(A, H)
    C = commutator_op.matrix
    V = eigen.eigenvectors[:, eigen.select(psi.a, psi.b)]
    collar = collar_mask(box, collar_width)
    share = collar.sum() / box.n_sites
    mass = (V[collar] ** 2).sum(axis=0)
    keep = mass <= (1.0 + collar_excess) * share
    m_all, _ = _min_compressed(C, V)
    m_bulk, values = _min_compressed(C, V[:, keep])
    return MourreRow(box.dim, box.side, psi.a, psi.b, psi.delta, float(lam), int(seed),
                     int(V.shape[1]), int(keep.sum()), m_all, m_bulk,
                     int(collar_width), float(collar_excess), values)


@dataclass(frozen=True, eq=False)
class MourreReport:
    a: float
    b: float
    delta: float
    lambda_values: tuple
    rows: list
    collar_width: int
    collar_excess: float
    commutator_norms: dict

    def worst_margins(self):
        """Worst-seed ``m - 2 delta`` per grid value of lambda."""
        out = []
        for lam in self.lambda_values:
            margins = [r.margin_2delta for r in self.rows if r.lam == lam]
            out.append(min(margins))
        return np.array(out)

    def envelope(self):
        """Running minimum of the worst margins (monotone in lambda)."""
        return np.minimum.accumulate(self.worst_margins())

    @property
    def lambda_threshold(self):
        """Largest grid lambda up to which every worst-seed margin is >= 0."""
        ok = self.envelope() >= 0.0
        if not ok[0]:
            return None
        last = int(np.flatnonzero(ok)[-1])
        return float(self.lambda_values[last])


def lambda_threshold_scan(spec, mu, psi, lambda_grid, seeds, box,
                          collar_width=5, collar_excess=0.5):
    """Run :func:`mourre_check` over a (lambda, seed) grid."""
    lambda_grid = [float(x) for x in lambda_grid]
    if any(y <= x for x, y in zip(lambda_grid, lambda_grid[1:])):
        raise ArgumentError("lambda grid must be strictly ascending")
    e_inf = mu.E_infty
    if any(lam < 0 or lam * e_inf >= 1.0 for lam in lambda_grid):
        raise ArgumentError("every lambda must satisfy 0 <= lambda * E_inf < 1")
    A = build_conjugate_operator(box)
    lap = build_laplacian(box)
    correction = laplacian_boundary_correction(box)
    C0 = commutator(A, lap) + correction

    def one(item):
        lam, seed = item
        real = sample_realization(spec, mu, lam, seed, box)
        H = real.hamiltonian(lap)
        C = C0 + lam * commutator(A, real.potential)
        return mourre_check(H, A, psi, collar_width, collar_excess,
                            commutator_op=C, lam=lam, seed=seed)

    grid = sorted((lam, int(s)) for lam in lambda_grid for s in seeds)
    with ThreadPoolExecutor(_workers()) as pool:
        rows = list(pool.map(one, grid))

    norms = {}
    for s in sorted(set(int(x) for x in seeds)):
        V = sample_realization(spec, mu, 1.0, s, box).potential
        norms[s] = operator_norm(commutator(A, V))
    return MourreReport(psi.a, psi.b, psi.delta, tuple(lambda_grid), rows,
                        int(collar_width), float(collar_excess), norms)
