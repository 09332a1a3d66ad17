"""Sparse random potentials built from plateau bumps on dyadic annuli.

The support geometry: for ``k = 1..K`` the annulus
``A_k = {m : 2^(k-1) M < |m|_inf <= 2^k M}`` hosts ``2 * dim`` bumps of radius
``r_k = 2^(k-2) M`` centred at ``+-3 r_k e_i``. Each bump is
``phi((m - n) / r)`` evaluated with the Euclidean norm, where ``phi`` is a
radial C^2 plateau profile.
"""

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, CapacityError, NumericError
from .lattice import (Boundary, LatticeBox, build_conjugate_operator,
                      build_diagonal, build_laplacian, commutator,
                      operator_norm)

__all__ = [
    'smoothstep', 'BumpProfile', 'make_bump_profile', 'PotentialSpec',
    'build_support', 'evaluate_bump_on_box', 'CouplingDistribution',
    'Realization', 'sample_realization', 'center_generator',
    'draw_conditioned', 'stationary_realization', 'HypothesisReport',
    'check_hypothesis', 'spec_to_config', 'spec_from_config',
    'realization_to_csv',
]


def smoothstep(u):
    """Quintic ``6u^5 - 15u^4 + 10u^3`` clipped to [0, 1]; C^2 at both ends."""
    u = np.clip(u, 0.0, 1.0)
    return u ** 3 * (10.0 - 15.0 * u + 6.0 * u ** 2)


def _smoothstep_d1(u):
    u = np.clip(u, 0.0, 1.0)
    return 30.0 * u ** 2 * (1.0 - u) ** 2


def _smoothstep_d2(u):
    u = np.clip(u, 0.0, 1.0)
    return 60.0 * u * (1.0 - u) * (1.0 - 2.0 * u)


# sup norms of the quintic's derivatives on [0, 1]
SMOOTHSTEP_D1_MAX = 15.0 / 8.0
SMOOTHSTEP_D2_MAX = 10.0 / math.sqrt(3.0)


@dataclass(frozen=True)
class BumpProfile:
    """Radial profile equal to 1 for ``|x| <= plateau_radius`` and 0 for ``|x| >= 1``."""

    plateau_radius: float

    @property
    def flank(self):
        return 1.0 - self.plateau_radius

    def radial(self, t):
        t = np.asarray(t, dtype=float)
        return 1.0 - smoothstep((t - self.plateau_radius) / self.flank)

    def radial_d1(self, t):
        t = np.asarray(t, dtype=float)
        return -_smoothstep_d1((t - self.plateau_radius) / self.flank) / self.flank

    def radial_d2(self, t):
        t = np.asarray(t, dtype=float)
        return -_smoothstep_d2((t - self.plateau_radius) / self.flank) / self.flank ** 2

    def __call__(self, x):
        """Evaluate on points of R^dim, shape ``(..., dim)``."""
        return self.radial(np.linalg.norm(np.asarray(x, dtype=float), axis=-1))

    @property
    def deriv_bounds(self):
        """Sup norms of the first and second radial derivatives."""
        return (SMOOTHSTEP_D1_MAX / self.flank,
                SMOOTHSTEP_D2_MAX / self.flank ** 2)

    def hessian_bounds(self, dim, samples=20001):
        """Sup norms of mixed and pure second partials of the radial bump.

        For ``f(|x|)`` the pure partial is ``f'' c^2 + (f'/t)(1 - c^2)`` with
        ``c^2 in [0, 1]`` (only ``c^2 = 1`` in one dimension) and the mixed one is
        ``(f'' - f'/t) x_j x_k / t^2`` with ``|x_j x_k| / t^2 <= 1/2``.
        """
        t = np.linspace(self.plateau_radius, 1.0, samples)
        d1, d2 = self.radial_d1(t), self.radial_d2(t)
        if dim == 1:
            return 0.0, float(np.abs(d2).max())
        pure = max(np.abs(d2).max(), np.abs(d1 / t).max())
        mixed = 0.5 * np.abs(d2 - d1 / t).max()
        return float(mixed), float(pure)


def make_bump_profile(plateau_radius=0.5):
    if not 0.0 < plateau_radius < 1.0:
        raise ArgumentError(
            f"plateau_radius must lie in (0, 1), got {plateau_radius}")
    return BumpProfile(float(plateau_radius))


@dataclass(frozen=True, eq=False)
class PotentialSpec:
    """Centres, radii and annulus labels of the bump family."""

    dim: int
    base_scale: int
    annulus_count: int
    profile: BumpProfile
    centers: np.ndarray = field(repr=False)
    radii: np.ndarray = field(repr=False)
    annulus: np.ndarray = field(repr=False)

    @property
    def n_centers(self):
        return len(self.centers)

    @property
    def outer_radius(self):
        """``|m|_inf`` bound of the outermost annulus."""
        return 2 ** self.annulus_count * self.base_scale if self.annulus_count else 0

    def annulus_bounds(self, k):
        return 2 ** (k - 1) * self.base_scale, 2 ** k * self.base_scale

    def radius_ratios(self):
        """``|n|_inf / r(n)`` for each centre (3 for midpoint placement)."""
        if not self.n_centers:
            return np.zeros(0)
        return np.abs(self.centers).max(axis=1) / self.radii

    def annulus_ratio_range(self, k):
        """Range of ``|m| / r`` over the whole annulus ``A_k``: ``(2, 4]``."""
        lo, hi = self.annulus_bounds(k)
        r = self.radii[self.annulus == k][0]
        return lo / r, hi / r

    def fits(self, box):
        return self.outer_radius <= box.half_side


def build_support(M, K, dim, profile, box=None):
    """Place ``2 * dim`` bumps per annulus at the signed-axis midpoints."""
    if int(M) != M or M < 2 or M % 2:
        raise ArgumentError(
            f"M must be an even integer >= 2 so that every radius "
            f"2^(k-2) M is an integer >= 1, got {M}")
    if int(K) != K or K < 0:
        raise ArgumentError(f"K must be a non-negative integer, got {K}")
    M, K, dim = int(M), int(K), int(dim)
    centers, radii, labels = [], [], []
    for k in range(1, K + 1):
        r = 2 ** (k - 1) * M // 2
        for axis in range(dim):
            for sign in (-1, 1):
                c = np.zeros(dim, dtype=int)
                c[axis] = sign * 3 * r
                centers.append(c)
                radii.append(r)
                labels.append(k)
    spec = PotentialSpec(
        dim, M, K, profile,
        np.array(centers, dtype=int).reshape(-1, dim),
        np.array(radii, dtype=int), np.array(labels, dtype=int))
    if box is not None:
        _check_fits(spec, box)
    return spec


def _check_fits(spec, box):
    if box.dim != spec.dim:
        raise ArgumentError(f"box dimension {box.dim} != potential dimension {spec.dim}")
    if not spec.fits(box):
        raise CapacityError(
            f"annulus {spec.annulus_count} reaches |m| = {spec.outer_radius} "
            f"but the box half side is {box.half_side}")


def bump_values(spec, index, box):
    """Per-site values of bump ``index`` on ``box`` (a flat array)."""
    offsets = (box.sites - spec.centers[index]) / spec.radii[index]
    return spec.profile(offsets)


def evaluate_bump_on_box(spec, center, box):
    """Diagonal operator of the bump centred at ``center`` (a site in the centre set)."""
    if box.boundary is not Boundary.DIRICHLET:
        raise ArgumentError("bumps are evaluated on Dirichlet boxes")
    center = np.asarray(center)
    hits = np.flatnonzero((spec.centers == center).all(axis=1))
    if not len(hits):
        raise ArgumentError(f"{center.tolist()} is not a bump centre")
    return build_diagonal(box, bump_values(spec, hits[0], box))


@dataclass(frozen=True, eq=False)
class CouplingDistribution:
    """Compactly supported law of the couplings.

    ``kind`` is ``'atomic'`` (``points``, ``weights``), ``'uniform'``
    (``lo``, ``hi``) or ``'mixture'`` (``children``, ``weights``).
    """

    kind: str
    params: dict

    @classmethod
    def atomic(cls, points, weights=None):
        points = [float(p) for p in points]
        if not points:
            raise ArgumentError("atomic distribution needs at least one point")
        if weights is None:
            weights = [1.0 / len(points)] * len(points)
        return cls('atomic', {'points': points, 'weights': _weights(weights, len(points))})

    @classmethod
    def uniform(cls, lo, hi):
        if not hi > lo:
            raise ArgumentError(f"uniform needs lo < hi, got [{lo}, {hi}]")
        return cls('uniform', {'lo': float(lo), 'hi': float(hi)})

    @classmethod
    def mixture(cls, children, weights):
        children = list(children)
        return cls('mixture', {'children': children,
                               'weights': _weights(weights, len(children))})

    @classmethod
    def from_config(cls, cfg):
        cfg = dict(cfg)
        kind = cfg.pop('kind', None)
        if kind == 'atomic':
            return cls.atomic(cfg.pop('points'), cfg.pop('weights', None))
        if kind == 'uniform':
            return cls.uniform(cfg.pop('lo'), cfg.pop('hi'))
        if kind == 'mixture':
            return cls.mixture([cls.from_config(c) for c in cfg.pop('children')],
                               cfg.pop('weights'))
        raise ArgumentError(f"unknown distribution kind {kind!r}")

    def to_config(self):
        if self.kind == 'mixture':
            return {'kind': 'mixture',
                    'children': [c.to_config() for c in self.params['children']],
                    'weights': list(self.params['weights'])}
        return {'kind': self.kind, **{k: v for k, v in self.params.items()}}

    def support(self):
        """Support as sorted, merged closed intervals (atoms are ``[p, p]``)."""
        if self.kind == 'atomic':
            pieces = [(p, p) for p, w in zip(self.params['points'], self.params['weights'])
                      if w > 0]
        elif self.kind == 'uniform':
            pieces = [(self.params['lo'], self.params['hi'])]
        else:
            pieces = [iv for c, w in zip(self.params['children'], self.params['weights'])
                      if w > 0 for iv in c.support()]
        return merge_intervals(pieces)

    @property
    def E_minus(self):
        return self.support()[0][0]

    @property
    def E_plus(self):
        return self.support()[-1][1]

    @property
    def E_infty(self):
        return max(abs(self.E_minus), abs(self.E_plus))

    @property
    def zero_in_support(self):
        return any(lo <= 0.0 <= hi for lo, hi in self.support())

    @property
    def mean(self):
        if self.kind == 'atomic':
            return float(np.dot(self.params['points'], self.params['weights']))
        if self.kind == 'uniform':
            return 0.5 * (self.params['lo'] + self.params['hi'])
        return float(sum(w * c.mean for c, w in
                         zip(self.params['children'], self.params['weights'])))

    @property
    def second_moment(self):
        if self.kind == 'atomic':
            return float(np.dot(np.square(self.params['points']), self.params['weights']))
        if self.kind == 'uniform':
            lo, hi = self.params['lo'], self.params['hi']
            return (lo * lo + lo * hi + hi * hi) / 3.0
        return float(sum(w * c.second_moment for c, w in
                         zip(self.params['children'], self.params['weights'])))

    @property
    def variance(self):
        return self.second_moment - self.mean ** 2

    def sample(self, rng, size=None):
        if self.kind == 'atomic':
            return rng.choice(self.params['points'], size=size, p=self.params['weights'])
        if self.kind == 'uniform':
            return rng.uniform(self.params['lo'], self.params['hi'], size=size)
        children = self.params['children']
        n = 1 if size is None else int(np.prod(size))
        picks = rng.choice(len(children), size=n, p=self.params['weights'])
        out = np.empty(n)
        for i, child in enumerate(children):
            sel = picks == i
            if sel.any():
                out[sel] = child.sample(rng, size=int(sel.sum()))
        return out[0] if size is None else out.reshape(size)


def _weights(weights, n):
    w = np.asarray(weights, dtype=float)
    if w.shape != (n,) or np.any(w < 0) or not np.isclose(w.sum(), 1.0, atol=1e-12):
        raise ArgumentError("weights must be non-negative and sum to 1")
    return [float(x) for x in w]


def merge_intervals(pieces):
    out = []
    for lo, hi in sorted((float(a), float(b)) for a, b in pieces):
        if out and lo <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], hi))
        else:
            out.append((lo, hi))
    return out


def center_generator(seed, index):
    """Philox stream keyed by ``seed`` with the centre index in the top counter word."""
    counter = [0, 0, 0, int(index)]
    return np.random.Generator(np.random.Philox(key=int(seed) % 2 ** 64,
                                                counter=counter))


def draw_conditioned(mu, seed, index, lo, hi, cap=10 ** 6):
    """Coupling for centre ``index`` drawn from ``mu`` conditioned on ``(lo, hi)``."""
    rng = center_generator(seed, index)
    for _ in range(cap):
        x = float(mu.sample(rng))
        if lo < x < hi:
            return x
    raise NumericError(f"no draw in ({lo}, {hi}) after {cap} attempts")


@dataclass(frozen=True, eq=False)
class Realization:
    seed: int
    couplings: np.ndarray
    potential: object = field(repr=False)
    coupling_strength: float = 0.0
    spec: PotentialSpec = field(default=None, repr=False)

    @property
    def box(self):
        return self.potential.box

    def hamiltonian(self, laplacian=None):
        """``Delta + lambda V``."""
        if laplacian is None:
            laplacian = build_laplacian(self.box)
        return laplacian + self.coupling_strength * self.potential


def sample_realization(spec, mu, lam, seed, box, couplings=None):
    """Draw i.i.d. couplings (or take ``couplings``) and assemble ``V``."""
    if lam < 0:
        raise ArgumentError("lambda must be non-negative")
    _check_fits(spec, box)
    if couplings is None:
        couplings = np.array([float(mu.sample(center_generator(seed, i)))
                              for i in range(spec.n_centers)])
    couplings = np.asarray(couplings, dtype=float)
    if couplings.shape != (spec.n_centers,):
        raise ArgumentError("one coupling per centre is required")
    values = np.zeros(box.n_sites)
    for i, w in enumerate(couplings):
        if w != 0.0:
            values += w * bump_values(spec, i, box)
    return Realization(int(seed), couplings, build_diagonal(box, values),
                       float(lam), spec)


def stationary_realization(mu, lam, seed, box):
    """Full-lattice i.i.d. potential (one coupling per site) for comparison runs."""
    rng = np.random.Generator(np.random.Philox(key=int(seed) % 2 ** 64))
    values = np.asarray(mu.sample(rng, size=box.n_sites), dtype=float)
    return Realization(int(seed), values, build_diagonal(box, values), float(lam))


@dataclass(frozen=True, eq=False)
class HypothesisReport:
    """Per-bump compliance rows plus global flags; failures are data, not errors."""

    rows: list
    disjoint: bool
    sup_commutator: float
    commutator_uniformity: float
    plateau_threshold_M: float
    plateau_threshold_M_annulus: float

    @property
    def values_ok(self):
        return all(r['value_ok'] for r in self.rows)

    @property
    def plateau_ok(self):
        return all(r['plateau_ok'] for r in self.rows)

    @property
    def double_commutator_ok(self):
        return all(r['comm2'] <= r['comm2_bound'] for r in self.rows)

    def passed(self, uniformity_limit=4.0):
        return (self.disjoint and self.values_ok and self.plateau_ok
                and self.double_commutator_ok
                and self.commutator_uniformity <= uniformity_limit)


def check_hypothesis(spec, box, commut_tol=1e-10):
    """Check boundedness, disjointness, the plateau cube and commutator bounds.

    The plateau condition asks that every site within ell-infinity distance
    ``sqrt(|n|)`` of the centre ``n`` sits where the bump equals 1; for a
    Euclidean plateau of radius ``rho r`` this holds iff
    ``sqrt(dim) * floor(sqrt(|n|)) <= rho r``.
    """
    _check_fits(spec, box)
    if box.boundary is not Boundary.DIRICHLET:
        raise ArgumentError("hypothesis check needs a Dirichlet box")
    A = build_conjugate_operator(box)
    rho = spec.profile.plateau_radius
    mixed, pure = spec.profile.hessian_bounds(spec.dim)
    coverage = np.zeros(box.n_sites, dtype=int)
    rows = []
    for i in range(spec.n_centers):
        n, r = spec.centers[i], int(spec.radii[i])
        values = bump_values(spec, i, box)
        coverage += values > 0
        norm_n = int(np.abs(n).max())
        s = math.isqrt(norm_n)
        cube = np.abs(box.sites - n).max(axis=1) <= s
        phi = build_diagonal(box, values)
        c1 = commutator(A, phi)
        c2 = commutator(A, c1)
        support = values > 0
        c = np.abs(box.sites[support]).max() / r
        rows.append({
            'k': int(spec.annulus[i]),
            'center': n.tolist(),
            'r': r,
            'ratio': norm_n / r,
            'value_ok': bool(values.min() >= 0.0 and values.max() <= 1.0),
            'plateau_ok': bool(np.all(values[cube] == 1.0)),
            'plateau_analytic': bool(math.sqrt(spec.dim) * s <= rho * r),
            'comm1': operator_norm(c1, tol=commut_tol),
            'comm2': operator_norm(c2, tol=commut_tol),
            'c': float(c),
            # sum over j, k of 2 c^2 (|d_j d_k phi| + |d_k^2 phi|)
            'comm2_bound': float(2.0 * c * c * (spec.dim * (spec.dim - 1) * (mixed + pure)
                                                + 2 * spec.dim * pure)),
        })
    comm1 = [row['comm1'] for row in rows]
    if comm1 and min(comm1) > 0:
        uniformity = max(comm1) / min(comm1)
    else:
        uniformity = 1.0 if not comm1 else math.inf
    return HypothesisReport(
        rows=rows,
        disjoint=bool(coverage.max(initial=0) <= 1),
        sup_commutator=max(comm1, default=0.0),
        commutator_uniformity=uniformity,
        # centres sit at |n| = 3r with r = M/2 in the first annulus
        plateau_threshold_M=6.0 * spec.dim / rho ** 2,
        # any point of an annulus (|n| <= 4r) as the plateau anchor
        plateau_threshold_M_annulus=8.0 * spec.dim / rho ** 2,
    )


def spec_to_config(spec, mu, lam, seed):
    return {
        'dim': spec.dim, 'M': spec.base_scale, 'K': spec.annulus_count,
        'plateau_radius': spec.profile.plateau_radius,
        'distribution': mu.to_config(), 'lambda': lam, 'seed': seed,
    }


def spec_from_config(cfg):
    """Inverse of :func:`spec_to_config`; accepts a dict or JSON text."""
    if isinstance(cfg, str):
        cfg = json.loads(cfg)
    profile = make_bump_profile(cfg.get('plateau_radius', 0.5))
    spec = build_support(cfg['M'], cfg['K'], cfg['dim'], profile)
    mu = CouplingDistribution.from_config(cfg['distribution'])
    return spec, mu, float(cfg['lambda']), int(cfg['seed'])


def realization_to_csv(realization):
    spec = realization.spec
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator='\n')
    writer.writerow([f'c{i + 1}' for i in range(spec.dim)] + ['r', 'omega'])
    for c, r, w in zip(spec.centers, spec.radii, realization.couplings):
        writer.writerow([*map(int, c), int(r), repr(float(w))])
    return buf.getvalue()
