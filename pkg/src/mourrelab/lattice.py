"""Finite lattice boxes and the deterministic operators that act on them.

Sites of a box are the integer points ``n`` with ``|n_i| <= L`` in each of the
``dim`` coordinates, flattened in C order. Shifts follow the convention
``(T_i u)(n) = u(n - e_i)``, so as a matrix ``T_i[idx(n), idx(n - e_i)] = 1``.
"""

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import (ArgumentError, CapacityError, NumericError,
                     UnsupportedCombinationError)

__all__ = [
    'Boundary', 'Symmetry', 'LatticeBox', 'LatticeOperator', 'EigenSystem',
    'build_identity', 'build_shift', 'build_laplacian', 'build_position',
    'build_conjugate_operator', 'build_diagonal', 'commutator',
    'bulk_commutator', 'laplacian_boundary_correction', 'operator_norm',
    'eigendecompose', 'dump_coo', 'DENSE_CAP', 'DENSE_NORM_CAP',
]

DENSE_CAP = 4096
DENSE_NORM_CAP = 2000
SYMMETRY_RTOL = 1e-12


class Boundary(Enum):
    DIRICHLET = 'dirichlet'
    PERIODIC = 'periodic'


class Symmetry(Enum):
    SYMMETRIC = 'symmetric'
    ANTISYMMETRIC = 'antisymmetric'
    GENERAL = 'general'


@dataclass(frozen=True)
class LatticeBox:
    """Centered box ``{n in Z^dim : |n|_inf <= half_side}``."""

    dim: int
    half_side: int
    boundary: Boundary = Boundary.DIRICHLET

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ArgumentError(f"dim must be a positive integer, got {self.dim}")
        if int(self.half_side) != self.half_side or self.half_side < 1:
            raise ArgumentError(
                f"half_side must be a positive integer, got {self.half_side}")
        object.__setattr__(self, 'boundary', Boundary(self.boundary))

    @property
    def side(self):
        return 2 * self.half_side + 1

    @property
    def n_sites(self):
        return self.side ** self.dim

    @property
    def shape(self):
        return (self.side,) * self.dim

    @cached_property
    def sites(self):
        """Integer coordinates of every site, shape ``(n_sites, dim)``."""
        grids = np.indices(self.shape).reshape(self.dim, -1).T
        coords = grids - self.half_side
        coords.setflags(write=False)
        return coords

    def index(self, site):
        """Flat index of one site or of an ``(m, dim)`` array of sites."""
        site = np.asarray(site)
        if site.shape[-1] != self.dim:
            raise ArgumentError(f"site must have {self.dim} coordinates")
        if np.any(np.abs(site) > self.half_side):
            raise ArgumentError(f"site {site.tolist()} lies outside the box")
        shifted = site + self.half_side
        return np.ravel_multi_index(tuple(np.moveaxis(shifted, -1, 0)),
                                    self.shape)

    def site(self, index):
        return self.sites[index]

    def contains(self, site):
        return bool(np.all(np.abs(np.asarray(site)) <= self.half_side))

    def distance_to_boundary(self):
        """Per-site ell-infinity distance to the outside of the box.

        A site on the outer face has distance 1: one step leaves the box.
        """
        return self.half_side + 1 - np.abs(self.sites).max(axis=1)

    def grown(self, pad=1):
        return LatticeBox(self.dim, self.half_side + pad, self.boundary)


@dataclass(frozen=True, eq=False)
class LatticeOperator:
    """Real sparse matrix acting on the sites of ``box``.

    ``symmetry`` other than ``GENERAL`` is checked on construction.
    """

    box: LatticeBox
    matrix: sp.csr_matrix = field(repr=False)
    symmetry: Symmetry = Symmetry.GENERAL

    def __post_init__(self):
        mat = sp.csr_matrix(self.matrix, dtype=float)
        mat.sum_duplicates()
        mat.eliminate_zeros()
        n = self.box.n_sites
        if mat.shape != (n, n):
            raise ArgumentError(
                f"matrix shape {mat.shape} does not match {n} box sites")
        object.__setattr__(self, 'matrix', mat)
        sym = Symmetry(self.symmetry)
        object.__setattr__(self, 'symmetry', sym)
        if sym is not Symmetry.GENERAL:
            sign = 1 if sym is Symmetry.SYMMETRIC else -1
            scale = abs(mat).max() if mat.nnz else 0.0
            defect = abs(mat - sign * mat.T).max() if mat.nnz else 0.0
            if defect > SYMMETRY_RTOL * scale:
                raise ArgumentError(
                    f"matrix is not {sym.value}: defect {defect:.3e}")

    @property
    def shape(self):
        return self.matrix.shape

    def toarray(self):
        return self.matrix.toarray()

    def diagonal(self):
        return self.matrix.diagonal()

    def tagged(self, symmetry):
        return LatticeOperator(self.box, self.matrix, symmetry)

    def _other(self, other):
        if not isinstance(other, LatticeOperator):
            return None
        if other.box != self.box:
            raise ArgumentError("operators live on different boxes")
        return other.matrix

    def __add__(self, other):
        mat = self._other(other)
        if mat is None:
            return NotImplemented
        tag = self.symmetry if self.symmetry is other.symmetry else Symmetry.GENERAL
        return LatticeOperator(self.box, self.matrix + mat, tag)

    def __sub__(self, other):
        mat = self._other(other)
        if mat is None:
            return NotImplemented
        tag = self.symmetry if self.symmetry is other.symmetry else Symmetry.GENERAL
        return LatticeOperator(self.box, self.matrix - mat, tag)

    def __neg__(self):
        return LatticeOperator(self.box, -self.matrix, self.symmetry)

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return LatticeOperator(self.box, float(scalar) * self.matrix, self.symmetry)

    __rmul__ = __mul__

    def __matmul__(self, other):
        mat = self._other(other)
        if mat is None:
            return self.matrix @ other
        return LatticeOperator(self.box, self.matrix @ mat)

    @property
    def T(self):
        return LatticeOperator(self.box, self.matrix.T.tocsr(), self.symmetry)


@dataclass(frozen=True, eq=False)
class EigenSystem:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray = field(repr=False)
    source_box: LatticeBox

    def residuals(self, H):
        """Per-pair residual norms ``||H v - lambda v||``."""
        mat = H.matrix if isinstance(H, LatticeOperator) else H
        R = mat @ self.eigenvectors - self.eigenvectors * self.eigenvalues
        return np.linalg.norm(R, axis=0)

    def orthonormality_defect(self):
        V = self.eigenvectors
        return np.abs(V.T @ V - np.eye(V.shape[1])).max()

    def reconstruct(self):
        V = self.eigenvectors
        return (V * self.eigenvalues) @ V.T

    def select(self, lo, hi):
        """Column mask of eigenpairs with eigenvalue in ``[lo, hi]``."""
        return (self.eigenvalues >= lo) & (self.eigenvalues <= hi)


def build_identity(box):
    return LatticeOperator(box, sp.identity(box.n_sites, format='csr'),
                           Symmetry.SYMMETRIC)


def build_diagonal(box, values):
    values = np.asarray(values, dtype=float)
    if values.shape != (box.n_sites,):
        raise ArgumentError("diagonal needs one value per site")
    return LatticeOperator(box, sp.diags(values, format='csr'),
                           Symmetry.SYMMETRIC)


def _check_axis(box, axis):
    if int(axis) != axis or not 1 <= axis <= box.dim:
        raise ArgumentError(f"axis must be in 1..{box.dim}, got {axis}")
    return int(axis) - 1


def build_shift(box, axis):
    """Shift ``T_axis`` with ``(T u)(n) = u(n - e_axis)``; ``axis`` is 1-based."""
    ax = _check_axis(box, axis)
    sites = box.sites
    source = sites.copy()
    source[:, ax] -= 1
    rows = np.arange(box.n_sites)
    if box.boundary is Boundary.PERIODIC:
        L = box.half_side
        source[:, ax] = (source[:, ax] + L) % box.side - L
    else:
        inside = np.abs(source[:, ax]) <= box.half_side
        rows, source = rows[inside], source[inside]
    cols = box.index(source)
    mat = sp.csr_matrix((np.ones(len(rows)), (rows, cols)),
                        shape=(box.n_sites, box.n_sites))
    return LatticeOperator(box, mat)


def build_laplacian(box):
    """Nearest-neighbour Laplacian ``sum_i (T_i + T_i^T)`` (no diagonal term)."""
    mat = sp.csr_matrix((box.n_sites, box.n_sites))
    for axis in range(1, box.dim + 1):
        T = build_shift(box, axis).matrix
        mat = mat + T + T.T
    return LatticeOperator(box, mat, Symmetry.SYMMETRIC)


def _require_dirichlet(box, what):
    if box.boundary is not Boundary.DIRICHLET:
        raise UnsupportedCombinationError(
            f"{what} is only defined on Dirichlet boxes (coordinates are "
            "not single-valued on a torus)")


def build_position(box, axis):
    ax = _check_axis(box, axis)
    _require_dirichlet(box, "the position operator")
    return build_diagonal(box, box.sites[:, ax].astype(float))


def build_conjugate_operator(box):
    """``A = 1/2 sum_i {Q_i (T_i^T - T_i) + (T_i^T - T_i) Q_i}``.

    As a real matrix this is antisymmetric.
    """
    _require_dirichlet(box, "the conjugate operator")
    mat = sp.csr_matrix((box.n_sites, box.n_sites))
    for axis in range(1, box.dim + 1):
        T = build_shift(box, axis).matrix
        Q = build_position(box, axis).matrix
        K = T.T - T
        mat = mat + 0.5 * (Q @ K + K @ Q)
    return LatticeOperator(box, mat, Symmetry.ANTISYMMETRIC)


def commutator(X, Y):
    """``XY - YX``; antisymmetric with symmetric gives a symmetric result."""
    if X.box != Y.box:
        raise ArgumentError("commutator of operators on different boxes")
    mat = X.matrix @ Y.matrix - Y.matrix @ X.matrix
    tags = {X.symmetry, Y.symmetry}
    if tags == {Symmetry.SYMMETRIC, Symmetry.ANTISYMMETRIC}:
        tag = Symmetry.SYMMETRIC
    elif len(tags) == 1 and Symmetry.GENERAL not in tags:
        tag = Symmetry.ANTISYMMETRIC
    else:
        tag = Symmetry.GENERAL
    return LatticeOperator(X.box, mat, tag)


def _restriction(small, big):
    """Sparse 0/1 matrix selecting the sites of ``small`` inside ``big``."""
    cols = big.index(small.sites)
    return sp.csr_matrix((np.ones(small.n_sites), (np.arange(small.n_sites), cols)),
                         shape=(small.n_sites, big.n_sites))


def laplacian_boundary_correction(box):
    """Difference ``P [A, Delta] P - [A_box, Delta_box]`` for a Dirichlet box.

    ``P`` is the restriction of the infinite lattice to ``box``. The truncated
    commutator carries a large spurious diagonal term on the outer faces
    (``-(2L+1)`` per face crossing); this diagonal operator cancels it exactly.
    """
    _require_dirichlet(box, "the boundary correction")
    big = box.grown(1)
    R = _restriction(box, big)
    full = commutator(build_conjugate_operator(big), build_laplacian(big)).matrix
    compressed = R @ full @ R.T
    truncated = commutator(build_conjugate_operator(box), build_laplacian(box)).matrix
    return LatticeOperator(box, compressed - truncated, Symmetry.SYMMETRIC)


def bulk_commutator(A, H, correction=None):
    """``[A, H]`` with the Laplacian boundary defect removed.

    Valid for ``H = Delta + W`` with ``W`` a multiplication operator, for which
    the result equals the infinite-volume commutator compressed to the box.
    """
    if correction is None:
        correction = laplacian_boundary_correction(A.box)
    return commutator(A, H) + correction


def _compress_support(mat):
    rows = np.unique(mat.nonzero()[0])
    cols = np.unique(mat.nonzero()[1])
    return mat[rows][:, cols]


def operator_norm(X, tol=1e-10, max_iter=100_000):
    """Largest singular value of ``X``.

    Rows and columns that are identically zero are dropped first; blocks below
    ``DENSE_NORM_CAP`` are handled exactly, larger ones by power iteration on
    ``X^T X``.
    """
    if tol <= 0:
        raise ArgumentError("tol must be positive")
    mat = X.matrix if isinstance(X, LatticeOperator) else sp.csr_matrix(X)
    if mat.nnz == 0:
        return 0.0
    symmetric = isinstance(X, LatticeOperator) and X.symmetry is Symmetry.SYMMETRIC
    if symmetric:
        # a symmetric block must keep matching row/col sets to stay symmetric
        keep = np.unique(np.concatenate(mat.nonzero()))
        block = mat[keep][:, keep]
    else:
        block = _compress_support(mat)
    if max(block.shape) < DENSE_NORM_CAP:
        dense = block.toarray()
        if symmetric:
            return float(np.abs(np.linalg.eigvalsh(dense)).max())
        return float(np.linalg.norm(dense, 2))

    n = block.shape[1]
    # all-ones plus a deterministic ramp: plain all-ones is orthogonal to the
    # top singular vector of parity-odd operators such as A
    v = np.ones(n) + np.linspace(0.0, 1.0, n)
    v /= np.linalg.norm(v)
    estimate = 0.0
    for _ in range(max_iter):
        w = block.T @ (block @ v)
        new = float(np.sqrt(v @ w))
        norm_w = np.linalg.norm(w)
        if norm_w == 0:
            return 0.0
        v = w / norm_w
        if abs(new - estimate) <= tol * new:
            return new
        estimate = new
    raise NumericError(f"power iteration did not converge in {max_iter} steps",
                       last_iterate=v)


def eigendecompose(H, cap=DENSE_CAP):
    """Full dense eigendecomposition of a symmetric operator."""
    n = H.box.n_sites
    if n > cap:
        raise CapacityError(
            f"box has {n} sites, above the dense cap of {cap}; use a smaller "
            "box (half_side or dim)")
    if H.symmetry is not Symmetry.SYMMETRIC:
        raise ArgumentError("eigendecompose needs a symmetric operator")
    w, V = np.linalg.eigh(H.toarray())
    return EigenSystem(w, V, H.box)


def dump_coo(X, stream):
    """Write ``row col value`` lines with 17 significant digits."""
    coo = X.matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    for i in order:
        stream.write(f"{coo.row[i]} {coo.col[i]} {coo.data[i]:.17g}\n")
