# %% [markdown]
# # How far does `psi(H)` move under a weak potential?
#
# For a `C^2` cutoff `psi`, `||psi(Delta + lam V) - psi(Delta)|| <= C lam` with
# `C = E_inf * integral |t| |psi_hat(t)| dt`.

# %%
from mourrelab import (CouplingDistribution, LatticeBox, build_cutoff, build_support,
                       lemma1_check, make_bump_profile)

psi = build_cutoff(-0.5, 0.5)
print('integral |t||psi_hat|:', round(psi.fourier_integral, 5))

spec = build_support(16, 3, 1, make_bump_profile(0.5))
rows = lemma1_check(spec, CouplingDistribution.uniform(-1, 1), [1e-3, 1e-2, 1e-1], psi,
                    LatticeBox(1, 150), seeds=[0, 1])
for r in rows:
    print(f"lam={r.lam:<6} seed={r.seed} ratio={r.ratio:.4f} C={r.constant:.4f} ok={r.ok}")

# %% [markdown]
# The ratio is flat in `lam` for small `lam`: the difference is linear in the
# perturbation, and the bound sits a factor of 2 to 5 above it.
