# Straightening holomorphic abelian systems: commuting flows of the frame
# build coordinates in which the fields are translations and the gradient
# map splits into a profile of the transverse variables minus u.

import numpy as np

from cgsys import GridSpec, NormalFormRefusal, load_builtin, normal_form

# The flat model: field d/dt on C^2, gradient x^2 - y^2 - u.  Already in
# normal form, so the construction must hand the profile straight back.
model = load_builtin("model-k1").system
nf = normal_form(model, np.zeros(4), GridSpec(nx=11, ny=11, extent=0.5))
xs, ys = np.meshgrid(nf.xs, nf.ys, indexing="ij")
print("model: slice through complex line", nf.slice_pair + 1)
print("max |F - (x^2 - y^2)| on the grid:", np.max(np.abs(nf.F[0] - (xs**2 - ys**2))))
print("w-independence residual:", nf.independence_residual)
print("straightening residual: ", nf.pushforward_residual)

# The same model seen through an invertible complex-linear chart change.
# The recovered profile matches the transformed closed form.
rot = load_builtin("model-k1-rotated").system
nf2 = normal_form(rot, np.zeros(4), GridSpec(nx=11, ny=11, extent=0.4),
                  class_tol=1e-8)
T = np.array([[1.0 + 0.5j, 0.25 - 0.75j], [-0.3 + 0.2j, 1.1 + 0.4j]])
worst = 0.0
for i, x in enumerate(nf2.xs):
    for j, y in enumerate(nf2.ys):
        zeta = np.zeros(2, dtype=complex)
        zeta[nf2.slice_pair] = complex(x, y)
        Z = T @ zeta
        worst = max(worst, abs(nf2.F[0, i, j]
                               - (Z[0].real**2 - Z[0].imag**2 - Z[1].imag)))
print("rotated model: max deviation from transformed profile:", worst)

# Non-abelian systems have no such coordinates and are refused outright.
heis = load_builtin("heisenberg").system
try:
    normal_form(heis, np.zeros(6))
except NormalFormRefusal as err:
    print("refused:", err)
