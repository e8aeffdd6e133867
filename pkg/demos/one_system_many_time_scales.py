"""One constant system on the integers, on an interval and on a mixed grid.

The same code computes transition matrices, Gramians and stability
verdicts on each time scale. On the integers the results reduce to
matrix powers of I + A, and on an interval to the matrix exponential.

Run with ``python3 demos/one_system_many_time_scales.py``.
"""

import numpy as np
import scipy.linalg

from tscontrol import (ContinuousInterval, DiscretePoints, LinearSystem, continuous_grid,
                       controllability_gramian, exp_stable_spectrum, in_stability_region,
                       integer_grid, periodic_grid, spectral_exponential, transition_matrix)

A = np.array([[-8 / 45, 1 / 30], [-1 / 45, -1 / 10]])
sys = LinearSystem(A, [[2.0], [1.0]])

grids = {
    "integers 0..40": integer_grid(0, 40),
    "interval [0, 40]": continuous_grid(0, 40, 0.01),
    "unit intervals with gaps of 1 and 4": periodic_grid(
        [ContinuousInterval(0, 1, 0.01), DiscretePoints([2, 6])], 10, 4),
}

for name, g in grids.items():
    Phi = transition_matrix(sys, g, 10.0, 0.0)
    E = spectral_exponential(A, g, 10.0)
    print(f"{name}: mu_max = {g.mu_max:g}")
    print("  Phi(10, 0) =", np.round(Phi, 6).tolist())
    print(f"  spectral formula differs by {np.abs(Phi - E).max():.1e}")
    print("  Gramian [0, 10) min eigenvalue "
          f"{controllability_gramian(sys, g, 0, 10).eigen_min:.4g}")
    print("  stability by the spectrum:", exp_stable_spectrum(A, g).verdict)

print("classical references:")
print("  (I + A)^10 =", np.round(np.linalg.matrix_power(np.eye(2) + A, 10), 6).tolist())
print("  expm(10 A) =", np.round(scipy.linalg.expm(10 * A), 6).tolist())

# the region shrinks as the graininess grows: lam = -1 kills the state at mu = 1,
# sits on the boundary at mu = 2 and is unstable at mu = 4
for mu in (1.0, 2.0, 4.0):
    q = in_stability_region(integer_grid(0, 400, mu), -1.0)
    print(f"lam = -1 with mu = {mu:g}: {q.verdict} (rate {q.tail_max:.4f})")
