"""The rational 2x2 system on the integers, analysed end to end.

x(k+1) - x(k) = A x(k) + B u(k),  y = C x,  on {0, 1, ..., 10}.

Run with ``python3 demos/discrete_pair.py``.
"""

from fractions import Fraction as Fr

import numpy as np

from tscontrol import (LinearSystem, bibo_ti, controllability_gramian, exact_eigenvalues,
                       integer_grid, is_minimal, kalman_controllability, kalman_observability,
                       min_energy_input, pbh_controllability, reconstruct_initial_state,
                       simulate, transfer_function)

A = [[Fr(-8, 45), Fr(1, 30)], [Fr(-1, 45), Fr(-1, 10)]]
B = [[2], [1]]
C = [[3, 4]]

sys = LinearSystem(A, B, C)
grid = integer_grid(0, 10)

kc = kalman_controllability(A, B)
ko = kalman_observability(A, C)
show = lambda M: [[str(x) for x in row] for row in M.tolist()]
print("controllability matrix", show(kc.matrix), "rank", kc.rank)
print("observability matrix  ", show(ko.matrix), "rank", ko.rank)
print("PBH passes:", pbh_controllability(np.array(A, float), np.array(B, float)).passed)

G = controllability_gramian(sys, grid, 0, 4)
print(f"Gramian on [0, 4): eigenvalues in [{G.eigen_min:.4g}, {G.eigen_max:.4g}]")

# steer (5, 2) to the origin in four steps with least energy
x0 = np.array([5.0, 2.0])
u = min_energy_input(sys, grid, 0, 4, x0, [0, 0])
X, Y = simulate(sys, grid, x0, u, tf=4)
print("input", np.round(u.values.ravel(), 6), "terminal state", X.values[-1])

# recover x0 from four output samples of the free response
_, Y = simulate(sys, grid, x0, tf=4)
print("reconstructed x0", reconstruct_initial_state(sys, grid, Y, 0, 4))

print("transfer function", transfer_function(sys)[0, 0])
print("eigenvalues", [str(e) for _, _, e in exact_eigenvalues(A)])
print("minimal:", is_minimal(sys).minimal)

v = bibo_ti(sys, integer_grid(0, 300))
print(f"BIBO: {v.verdict} (integral {v.integral.estimate:.6g}), poles say {v.pole_verdict}")
