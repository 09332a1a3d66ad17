# %% [markdown]
# # The torus lemma and the Mourre estimate
#
# On the part of the torus where `|sum cos theta_i| < 1 - delta/2` the symbol
# `4 sum sin^2 theta_i` stays above `3 delta` in odd dimension. In dimension 2
# it touches zero at `(0, pi)`.

# %%
import numpy as np

from mourrelab import (CouplingDistribution, LatticeBox, build_conjugate_operator,
                       build_cutoff, build_laplacian, build_support, lambda_threshold_scan,
                       make_bump_profile, mourre_check, torus_scan)

for nu in (1, 2, 3):
    res = torus_scan(nu, 0.5, 128)
    print(nu, round(res.min_value, 4), 'threshold', round(res.threshold, 4), res.passed)

# %% [markdown]
# On a Dirichlet box the compression of `[A, H]` onto the spectral subspace
# of `I = [-0.5, 0.5]` stays above `3 delta` minus a small finite-size loss.

# %%
box = LatticeBox(1, 100)
psi = build_cutoff(-0.5, 0.5)
row = mourre_check(build_laplacian(box), build_conjugate_operator(box), psi)
print('delta', psi.delta, 'rank', row.rank, 'm', round(row.m, 4), '3 delta', 3 * psi.delta)

# %% [markdown]
# Adding disorder shifts the eigenvalues and the commutator. The scan keeps
# the running minimum of the worst seed's margin `m - 2 delta`.

# %%
spec = build_support(8, 3, 1, make_bump_profile(0.5))
mu = CouplingDistribution.uniform(-1, 1)
rep = lambda_threshold_scan(spec, mu, psi, [0.0, 0.1, 0.3, 0.6], [0, 1], box)
print('worst margins', np.round(rep.worst_margins(), 4).tolist())
print('lambda_I', rep.lambda_threshold)
