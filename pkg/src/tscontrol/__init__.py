"""Linear systems analysis on time scales.

The package treats continuous time, discrete time and mixed grids with one
set of routines: transition matrices, Gramians, rank and eigenvector
tests, exact rational realizations of transfer functions, and stability
verdicts.
"""

__version__ = "0.1.0"

from .timescale import (ContinuousInterval, DiscretePoints, TimeScaleError, TimeScaleGrid,
                        build_grid, continuous_grid, delta_derivative, delta_integral,
                        integer_grid, mu, parse_timescale_spec, periodic_grid, sigma)
from .dynamics import (LinearSystem, NonRegressiveError, Trajectory, check_regressive,
                       scalar_exp, simulate, transition_matrix, weighting_pattern)
from .gramian import (NotControllableError, NotObservableError, controllability_gramian,
                      min_energy_input, observability_gramian, reconstruct_initial_state)
from .ranktests import (controllable_decomposition, k_sequence, kalman_controllability,
                        kalman_observability, l_sequence, observable_decomposition,
                        pbh_controllability, pbh_observability, tv_controllability_rank,
                        tv_observability_rank)
from .rational import Poly, RationalFn, RationalMatrix
from .realization import (NotStrictlyProperError, Realization, companion_realization,
                          exact_eigenvalues, is_minimal, is_minimal_tv, is_strictly_proper,
                          partial_fractions, realize_from_factors, transfer_function)
from .stability import (bibo_ti, bibo_tv_integral, exp_stable_integral, exp_stable_spectrum,
                        f_sequence, in_stability_region, spectral_exponential)
