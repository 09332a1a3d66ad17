# %% [markdown]
# # Weyl witnesses and the predicted essential spectrum
#
# Inside a bump plateau the potential is the constant `omega`, so a plane wave
# at energy `E` under a smooth window is an approximate eigenvector of `H`
# at `E + lam * omega`.

# %%
import numpy as np

from mourrelab import (CouplingDistribution, LatticeBox, build_support, density_of_states,
                       eigendecompose, make_bump_profile, make_weyl_vector,
                       predict_essential_spectrum, sample_realization, weyl_residual_check)
from mourrelab.spectral import conditioned_realization, free_residual, max_feasible_halfwidth

box = LatticeBox(1, 100)
spec = build_support(50, 1, 1, make_bump_profile(0.9))
mu = CouplingDistribution.atomic([0.0, 1.0])
jmax = max_feasible_halfwidth(spec, 1)
real = conditioned_realization(spec, mu, 0.5, seed=3, box=box, index=1, r_coupling=1.0, ell=100)
for j in (jmax // 4, jmax // 2, jmax):
    g = make_weyl_vector(0.0, j, spec.centers[1], box, spec=spec)
    print(j, round(free_residual(g), 4), round(weyl_residual_check(real, 0.0, 1.0, g, 100), 4))

# %% [markdown]
# The union `[-2 nu, 2 nu] + lam supp(mu)` is the predicted essential
# spectrum. With `lam = 5` it has a gap `(2, 3)`. The bump flanks take every
# value between 0 and 1, so a finite box can put a few eigenvalues in the gap;
# these are the isolated eigenvalues the essential spectrum ignores.

# %%
pred = predict_essential_spectrum(1, 5.0, mu)
print('prediction at lam=5:', pred.to_json())
H = sample_realization(build_support(8, 3, 1, make_bump_profile(0.5)), mu, 5.0, 1, box).hamiltonian()
dos = density_of_states(eigendecompose(H), bins=30, prediction=pred)
print('fraction of eigenvalues outside:', dos.outside_fraction)
print(np.round(dos.density, 3).tolist())
