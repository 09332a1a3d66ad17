# %% [markdown]
# # Lattice operators and the dilation commutator
#
# Sites of the box `[-L, L]^nu` are stored in C order. The shift `T_i` moves
# a function one step along axis `i`, the Laplacian is `sum_i (T_i + T_i^T)`,
# and `A` is the lattice analogue of the dilation generator.

# %%
import numpy as np

from mourrelab import (LatticeBox, build_conjugate_operator, build_laplacian, build_shift,
                       bulk_commutator, commutator)

box = LatticeBox(2, 6)
A, lap = build_conjugate_operator(box), build_laplacian(box)
print(box, box.n_sites, 'sites')

# %% [markdown]
# Away from the boundary `[A, Delta] = -sum_j (T_j - T_j^{-1})^2`. Check it on
# a random vector supported two or more steps inside the box.

# %%
C = commutator(A, lap)
rhs = sum((lambda K: K @ K)(build_shift(box, j).matrix - build_shift(box, j).matrix.T)
          for j in (1, 2))
u = np.where(box.distance_to_boundary() >= 2, np.random.default_rng(0).standard_normal(box.n_sites), 0)
print('interior defect:', np.abs(C.matrix @ u + rhs @ u).max())

# %% [markdown]
# On the edge the truncated commutator picks up a diagonal term of size
# `2L + 1` per face. `bulk_commutator` removes it, which is what the Mourre
# check compresses.

# %%
defect = (bulk_commutator(A, lap) - C).diagonal().reshape(box.shape)
print(defect[:, :3])
