# Flows: fixed-step RK4 in real time, exact matrix products on embedded
# groups, and complex-time flows of holomorphically extendable fields.

import numpy as np

from cgsys import (
    FlowConfig, HolomorphyError, MatrixGroupSpec, complexified_flow_matrix,
    flow_complex, flow_real, left_invariant_fields, load_builtin, matrix_exp,
)
from cgsys.geometry import ComplexChart, VectorField

cfg = FlowConfig()  # 256 RK4 steps per unit time, divergence bound 1e6

# A linear field integrates to the exponential: x' = x from x(0) = 1.
chart1 = ComplexChart.standard(1)
grow = VectorField.from_exprs(chart1, ["x1", "0"])
print("flow of x d/dx for t=1 from x=1:", flow_real(grow, [1.0, 0.0], 1.0, cfg))

# The nilpotent group: scaling-and-squaring matrix exponential terminates
# exactly on nilpotent algebra elements.
chart3 = ComplexChart.standard(3)
E1 = np.array([[0, 1, 0], [0, 0, 0], [0, 0, 0]], float)
E2 = np.array([[0, 0, 0], [0, 0, 1], [0, 0, 0]], float)
E3 = np.array([[0, 0, 1], [0, 0, 0], [0, 0, 0]], float)
spec = MatrixGroupSpec(chart3, np.eye(3), ((0, 1), (1, 2), (0, 2)), (E1, E2, E3))
A = 0.5 * E1 + 0.25 * E2 + 0.125 * E3
print("exp(A)[0, 2] =", matrix_exp(A)[0, 2], " (exactly u3 + u1*u2/2 = 0.1875)")

# Left-invariant fields fall out of the embedding symbolically; flowing one
# with RK4 agrees with the closed-form product g exp(t E).
L = left_invariant_fields(spec)
p = np.array([1.0, 0.0, 0.0, 0.0, 0.0, 0.0])
by_ode = flow_real(L[1], p, 1.0, cfg)
by_mat = complexified_flow_matrix(spec, p, [0.0, 1.0, 0.0])
print("ODE flow:      ", by_ode)
print("matrix product:", by_mat)

# Complex time: purely imaginary time along the left-invariant frame leaves
# the real group and fills out the complexification.
out = complexified_flow_matrix(spec, np.zeros(6), [0.3j, -0.5j, 0.2j])
print("imaginary-time point:", out)

# The same trip through the ODE route, allowed because the left-invariant
# coefficients are holomorphic:
ode = flow_complex(L[0], np.zeros(6), 0.3j, cfg)
print("single-direction ODE check:", ode)

# Fields whose complexification mixes conjugate coordinates are refused.
bad = VectorField.from_exprs(chart3, ["1", "0", "0", "0", "0", "y2"])
try:
    flow_complex(bad, np.zeros(6), 1j, cfg)
except HolomorphyError as err:
    print("refused:", err)
