"""Linear systems on time scales: transition matrices, exponentials, simulation.

The state equation is ``x^Delta = A(t) x + B(t) u``, ``y = C(t) x + D(t) u``.
Propagation over a grid multiplies step matrices: ``I + mu(t) A(t)`` at
right-scattered nodes and a classical RK4 step of ``X' = A(t) X`` across
each dense quadrature step.
"""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .timescale import TimeScaleError

__all__ = [
    "NonRegressiveError",
    "LinearSystem",
    "Trajectory",
    "RegressivityReport",
    "check_regressive",
    "step_matrix",
    "transition_matrix",
    "scalar_exp",
    "simulate",
    "weighting_pattern",
    "REGRESSIVITY_RTOL",
]

REGRESSIVITY_RTOL = 1e-10


class NonRegressiveError(ArithmeticError):
    """I + mu(t) A(t) is numerically singular at some grid point."""

    def __init__(self, msg, t=None):
        super().__init__(msg)
        self.t = t


def _is_exact(M):
    arr = np.asarray(M, dtype=object)
    return arr.size > 0 and all(isinstance(x, (int, Fraction)) and not isinstance(x, bool)
                                for x in arr.flat)


def _as_fraction_array(M):
    arr = np.array(M, dtype=object)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    return np.vectorize(Fraction, otypes=[object])(arr)


def _coefficient(M, name, rows=None, cols=None):
    """Return (callable, constant-or-None) for a coefficient matrix."""
    if callable(M):
        def fn(t, M=M):
            return np.atleast_2d(np.asarray(M(t), dtype=float))
        return fn, None
    arr = np.atleast_2d(np.asarray(M, dtype=float)).copy()
    if rows is not None and cols is not None and arr.shape != (rows, cols):
        if arr.shape == (cols, rows) and 1 in arr.shape:
            arr = arr.T.copy()
        else:
            raise ValueError(f"{name} has shape {arr.shape}, expected {(rows, cols)}")
    arr.flags.writeable = False
    return (lambda t, arr=arr: arr), arr


class LinearSystem:
    """The quadruple (A, B, C, D) of a linear state equation on a time scale.

    Each coefficient is either a constant matrix (floats, ints or
    ``Fraction`` entries) or a callable ``t -> matrix``. A system whose four
    coefficients are all constant is time invariant. When every constant
    entry is rational, the exact matrices are kept in ``exact`` so that the
    algebraic tests can run in rational arithmetic.

    ``derivative_hooks`` optionally maps ``'A'``, ``'B'``, ``'C'`` and
    ``'mu'`` to analytic delta derivatives ``t -> matrix`` (or ``t -> float``
    for ``'mu'``); they are used by the K_j / L_j sequences.
    """

    def __init__(self, A, B, C=None, D=None, derivative_hooks=None):
        probe_A = A(0.0) if callable(A) else A
        n = np.atleast_2d(np.asarray(probe_A, dtype=float)).shape[0]
        probe_B = B(0.0) if callable(B) else B
        Bm = np.asarray(probe_B, dtype=float)
        m = 1 if Bm.ndim < 2 else Bm.shape[1]
        exact_ab = _is_exact(A) and _is_exact(B)
        if C is None:
            C = [[int(i == j) for j in range(n)] for i in range(n)] if exact_ab else np.eye(n)
        probe_C = C(0.0) if callable(C) else C
        Cm = np.atleast_2d(np.asarray(probe_C, dtype=float))
        p = Cm.shape[0]
        if D is None:
            D = [[0] * m for _ in range(p)] if exact_ab and _is_exact(C) else np.zeros((p, m))

        if not callable(B) and Bm.ndim < 2:
            B = np.asarray(B, dtype=object).reshape(n, 1) if _is_exact(B) else Bm.reshape(n, 1)
        self.n, self.m, self.p = n, m, p
        self.A, self._A = _coefficient(A, "A", n, n)
        self.B, self._B = _coefficient(B, "B", n, m)
        self.C, self._C = _coefficient(C, "C", p, n)
        self.D, self._D = _coefficient(D, "D", p, m)
        self.time_invariant = all(c is not None for c in (self._A, self._B, self._C, self._D))
        self.derivative_hooks = dict(derivative_hooks or {})

        self.exact = None
        if self.time_invariant and all(_is_exact(M) for M in (A, B, C, D)):
            self.exact = {k: _as_fraction_array(M) for k, M in zip("ABCD", (A, B, C, D))}
            self.exact["B"] = self.exact["B"].reshape(n, m)
            self.exact["C"] = self.exact["C"].reshape(p, n)

        for name, fn, shape in (("A", self.A, (n, n)), ("B", self.B, (n, m)),
                                ("C", self.C, (p, n)), ("D", self.D, (p, m))):
            if fn(0.0).shape != shape:
                raise ValueError(f"{name} has shape {fn(0.0).shape}, expected {shape}")

    @property
    def dims(self):
        return self.n, self.m, self.p

    def constant(self, name):
        """Constant float matrix for a time-invariant coefficient."""
        M = getattr(self, "_" + name)
        if M is None:
            raise ValueError(f"coefficient {name} is time varying")
        return M

    def __repr__(self):
        kind = "time-invariant" if self.time_invariant else "time-varying"
        return f"LinearSystem(n={self.n}, m={self.m}, p={self.p}, {kind})"


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Vector samples at grid nodes: states, inputs or outputs."""

    grid: object
    times: np.ndarray
    values: np.ndarray
    role: str = "state"
    left_limits: dict = None

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if len(times) != len(values):
            raise ValueError("times and values differ in length")
        if np.any(np.diff(times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")
        self.grid.indices(times)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        limits = {float(t): np.atleast_1d(np.asarray(v, dtype=float))
                  for t, v in (self.left_limits or {}).items()}
        object.__setattr__(self, "left_limits", limits)

    @classmethod
    def from_function(cls, grid, f, t0, tf, role="input", include_end=False):
        i0, i1 = grid.index(t0), grid.index(tf)
        stop = i1 + 1 if include_end else i1
        times = grid.times[i0:stop]
        return cls(grid, times, np.array([np.atleast_1d(f(t)) for t in times]), role)

    def index_of(self, t):
        tol = 1e-12 * max(1.0, abs(t))
        k = int(np.searchsorted(self.times, t - tol))
        if k < len(self.times) and abs(self.times[k] - t) <= tol:
            return k
        return None

    def at(self, t):
        k = self.index_of(t)
        if k is None:
            raise KeyError(f"no {self.role} sample at t={t!r}")
        return self.values[k]

    def left_limit(self, t):
        """Value approached from the left; differs from ``at`` only at jumps."""
        k = self.index_of(t)
        if k is not None and float(self.times[k]) in self.left_limits:
            return self.left_limits[float(self.times[k])]
        return self.at(t)

    def __len__(self):
        return len(self.times)


@dataclass(frozen=True)
class RegressivityReport:
    ok: bool
    worst_condition_number: float
    failing_times: tuple
    tolerance: float = REGRESSIVITY_RTOL


def _regressive_ok(M, A):
    smin = np.linalg.svd(M, compute_uv=False)[-1]
    return smin > REGRESSIVITY_RTOL * (1.0 + np.linalg.norm(A, 2)), smin


def check_regressive(sys, grid):
    """Check that I + mu(t) A(t) is invertible at every grid point."""
    I = np.eye(sys.n)
    worst = 1.0
    failing = []
    for t, m in zip(grid.times, grid.mu):
        At = sys.A(t)
        M = I + m * At
        ok, smin = _regressive_ok(M, At)
        cond = np.inf if smin == 0 else np.linalg.cond(M)
        worst = max(worst, cond)
        if not ok:
            failing.append(float(t))
    return RegressivityReport(not failing, float(worst), tuple(failing))


def _rk4_affine(A, B, t, h):
    """RK4 across [t, t+h] for x' = A x + B u with u linear in time.

    Returns ``(M, E0, E1)`` with ``x(t+h) = M x(t) + E0 u(t) + E1 u(t+h)``.
    """
    A0, Am, A1 = A(t), A(t + 0.5 * h), A(t + h)
    I = np.eye(A0.shape[0])
    hh = 0.5 * h
    k1x = A0
    k2x = Am @ (I + hh * k1x)
    k3x = Am @ (I + hh * k2x)
    k4x = A1 @ (I + h * k3x)
    c = h / 6.0
    M = I + c * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
    if B is None:
        return M, None, None
    B0, Bm, B1 = B(t), B(t + 0.5 * h), B(t + h)
    k10 = B0
    k20 = hh * (Am @ k10) + 0.5 * Bm
    k21 = 0.5 * Bm
    k30 = hh * (Am @ k20) + 0.5 * Bm
    k31 = hh * (Am @ k21) + 0.5 * Bm
    k40 = h * (A1 @ k30)
    k41 = h * (A1 @ k31) + B1
    E0 = c * (k10 + 2.0 * k20 + 2.0 * k30 + k40)
    E1 = c * (2.0 * k21 + 2.0 * k31 + k41)
    return M, E0, E1


def _step_affine(sys, grid, k, with_input=True):
    """Step data (M, E0, E1) from node k to node k+1 (E0, E1 None without input)."""
    t = float(grid.times[k])
    if grid.dense[k]:
        return _rk4_affine(sys.A, sys.B if with_input else None, t, float(grid.step[k]))
    At = sys.A(t)
    M = np.eye(sys.n) + grid.mu[k] * At
    ok, _ = _regressive_ok(M, At)
    if not ok:
        raise NonRegressiveError(f"I + mu(t)A(t) is singular at t={t!r}", t)
    if not with_input:
        return M, None, None
    return M, grid.mu[k] * sys.B(t), np.zeros((sys.n, sys.m))


def step_matrix(sys, grid, k):
    """Transition matrix across the computational step from node k to k+1."""
    return _step_affine(sys, grid, k, with_input=False)[0]


def _affine_steps(sys, grid, i0, i1, with_input=True):
    """Step data for nodes i0..i1-1 as three stacked arrays.

    Without input only the step matrices are filled in.
    """
    N = max(i1 - i0, 0)
    M = np.empty((N, sys.n, sys.n))
    E0 = np.empty((N, sys.n, sys.m))
    E1 = np.empty((N, sys.n, sys.m))
    if not sys.time_invariant:
        for j, k in enumerate(range(i0, i1)):
            Mj, E0j, E1j = _step_affine(sys, grid, k, with_input)
            M[j] = Mj
            if with_input:
                E0[j], E1[j] = E0j, E1j
        return M, E0, E1
    # constant coefficients: one computation per distinct (dense, step) pair
    keys = np.stack([grid.dense[i0:i1].astype(float), grid.step[i0:i1]], axis=1)
    uniq, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.reshape(-1)
    for u_idx, j in enumerate(first):
        sel = inverse == u_idx
        Mj, E0j, E1j = _step_affine(sys, grid, i0 + int(j), with_input)
        M[sel] = Mj
        if with_input:
            E0[sel], E1[sel] = E0j, E1j
    return M, E0, E1


def _steps(sys, grid, i0, i1):
    """Step matrices for nodes i0..i1-1, shape (i1-i0, n, n)."""
    return _affine_steps(sys, grid, i0, i1, with_input=False)[0]


def transition_matrix(sys, grid, t, s):
    """Transition matrix Phi_A(t, s) of X^Delta = A(t) X, X(s) = I."""
    it, is_ = grid.index(t), grid.index(s)
    if it < is_:
        return np.linalg.inv(transition_matrix(sys, grid, s, t))
    X = np.eye(sys.n)
    for M in _steps(sys, grid, is_, it):
        X = M @ X
    return X


def _forward_transitions(sys, grid, i0, i1):
    """Phi(t_k, t_i0) for k = i0..i1 as an array of shape (i1-i0+1, n, n)."""
    steps = _steps(sys, grid, i0, i1)
    out = np.empty((i1 - i0 + 1, sys.n, sys.n))
    X = np.eye(sys.n)
    out[0] = X
    for j, M in enumerate(steps):
        X = M @ X
        out[j + 1] = X
    return out


def scalar_exp(grid, lam, t, s):
    """Time-scale exponential e_lam(t, s).

    Product of (1 + mu lam) over right-scattered nodes times
    exp(lam * total dense length) between s and t.
    """
    it, is_ = grid.index(t), grid.index(s)
    if it < is_:
        return 1.0 / scalar_exp(grid, lam, s, t)
    real = not np.iscomplexobj(lam) and not isinstance(lam, complex)
    lam = complex(lam)
    prod = 1.0 + 0.0j
    dense_len = 0.0
    for k in range(is_, it):
        if grid.dense[k]:
            dense_len += grid.step[k]
        else:
            f = 1.0 + grid.mu[k] * lam
            if f == 0:
                raise NonRegressiveError(
                    f"1 + mu*lam = 0 at t={grid.times[k]!r} for lam={lam!r}", float(grid.times[k]))
            prod = prod * f
    val = prod * np.exp(lam * dense_len)
    return val.real if real else val


def _input_samples(u, grid, i0, i1, m):
    """Node samples and left limits of the input on [t_i0, t_i1].

    ``left[j]`` is the value used at the right end of a dense step into
    node i0+j+1; it falls back to the left sample when absent.
    """
    N = i1 - i0 + 1
    U = np.zeros((N, m))
    Ul = np.zeros((N, m))
    if u is None:
        return U, Ul
    times = grid.times[i0:i1 + 1]
    if not isinstance(u, Trajectory):
        for j, t in enumerate(times):
            U[j] = np.atleast_1d(np.asarray(u(float(t)), dtype=float))
        return U, U.copy()
    gi = u.grid.indices(u.times) if u.grid is grid else grid.indices(u.times)
    pos = np.full(len(grid), -1)
    pos[gi] = np.arange(len(gi))
    k = pos[i0:i1 + 1]
    missing = np.flatnonzero(k < 0)
    if missing.size and missing[0] < N - 1:
        raise KeyError(f"input has no sample at t={float(times[missing[0]])!r}")
    have = k >= 0
    U[have] = u.values[k[have]]
    if missing.size:
        # hold the last sample at a final node the input does not cover
        U[-1] = U[-2] if N > 1 else 0.0
    Ul[:] = U
    for t, v in u.left_limits.items():
        j = int(grid.index(t)) - i0
        if 0 <= j < N:
            Ul[j] = v
    return U, Ul


def _propagate(steps, X0, U, Ul):
    """Run x_{k+1} = M x_k + E0 u_k + E1 u^-_{k+1}; X0 may carry trailing columns."""
    M, E0, E1 = steps
    X = np.asarray(X0, dtype=float)
    out = np.empty((len(M) + 1,) + X.shape)
    out[0] = X
    if len(M) == 0:
        return out
    U, Ul = np.asarray(U, dtype=float), np.asarray(Ul, dtype=float)
    if X.ndim == 1:
        W = np.einsum("jab,jb->ja", E0, U[:-1]) + np.einsum("jab,jb->ja", E1, Ul[1:])
    else:
        W = np.matmul(E0, U[:-1]) + np.matmul(E1, Ul[1:])
    for j in range(len(M)):
        X = M[j] @ X + W[j]
        out[j + 1] = X
    return out


def simulate(sys, grid, x0, u=None, t0=None, tf=None):
    """Propagate the state equation from t0 to tf.

    Right-scattered nodes use the exact recursion
    ``x(sigma(t)) = (I + mu A) x + mu B u``. Dense steps run RK4 on
    ``x' = A x + B u`` with ``u`` interpolated linearly between the node
    samples; a trajectory's ``left_limits`` supply the right-end value where
    the input jumps.

    ``u`` may be None (zero input), a :class:`Trajectory` or a callable.
    Returns ``(states, outputs)`` as :class:`Trajectory` objects on the
    nodes of [t0, tf].
    """
    t0 = grid.t_min if t0 is None else t0
    tf = grid.t_max if tf is None else tf
    i0, i1 = grid.index(t0), grid.index(tf)
    if i1 < i0:
        raise ValueError(f"need t0 <= tf, got t0={t0}, tf={tf}")
    x = np.asarray(x0, dtype=float).reshape(-1)
    if x.shape != (sys.n,):
        raise ValueError(f"x0 has length {x.size}, expected {sys.n}")
    U, Ul = _input_samples(u, grid, i0, i1, sys.m)
    if U.shape[1] != sys.m:
        raise ValueError(f"input has dimension {U.shape[1]}, expected {sys.m}")
    X = _propagate(_affine_steps(sys, grid, i0, i1), x, U, Ul)

    times = grid.times[i0:i1 + 1]
    if sys.time_invariant:
        Y = X @ sys.constant("C").T + U @ sys.constant("D").T
    else:
        Y = np.array([sys.C(t) @ xk + sys.D(t) @ uk for t, xk, uk in zip(times, X, U)])
    return Trajectory(grid, times, X, "state"), Trajectory(grid, times, Y, "output")


def weighting_pattern(sys, grid, t, s):
    """Input-output kernel G(t, sigma(s)) = C(t) Phi_A(t, sigma(s)) B(s)."""
    ks = grid.index(s)
    s_next = float(grid.times[ks + 1]) if grid.is_scattered(ks) else float(grid.times[ks])
    if grid.index(t) < grid.index(s_next):
        raise TimeScaleError(f"weighting pattern needs t >= sigma(s); t={t}, sigma(s)={s_next}")
    return sys.C(t) @ transition_matrix(sys, grid, t, s_next) @ sys.B(float(grid.times[ks]))
