"""Controllability and observability Gramians on a time scale.

Both Gramians are accumulated in a single forward pass that carries the
transition matrix along, so no transition matrix is ever recomputed from
scratch. Results are symmetrized before the eigenvalue check.
"""

from dataclasses import dataclass

import numpy as np

from .dynamics import Trajectory, _affine_steps, _propagate, _steps

__all__ = [
    "GramianResult",
    "NotControllableError",
    "NotObservableError",
    "controllability_gramian",
    "observability_gramian",
    "min_energy_input",
    "reconstruct_initial_state",
    "PD_RTOL",
]

PD_RTOL = 1e-9


class NotControllableError(ArithmeticError):
    pass


class NotObservableError(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class GramianResult:
    matrix: np.ndarray
    interval: tuple
    kind: str
    eigen_min: float
    eigen_max: float
    invertible: bool
    tolerance: float = PD_RTOL

    @property
    def condition(self):
        if self.eigen_min <= 0:
            return np.inf
        return self.eigen_max / self.eigen_min


def _result(G, t0, tf, kind, tol):
    G = 0.5 * (G + G.T)
    ev = np.linalg.eigvalsh(G)
    lo, hi = float(ev[0]), float(ev[-1])
    return GramianResult(G, (float(t0), float(tf)), kind, lo, hi,
                         bool(hi > 0 and lo > tol * hi), tol)


def _interval(grid, t0, tf):
    i0, i1 = grid.index(t0), grid.index(tf)
    if i1 <= i0:
        raise ValueError(f"need t0 < tf on the grid, got t0={t0}, tf={tf}")
    return i0, i1


def _ctrb_pass(sys, grid, i0, i1):
    """Per-node integrand factors for the controllability Gramian.

    Returns ``(ws, wd, Fs, Fd, Phi_end)`` where ``Fs[j] = Phi(t0, sigma(t)) B(t)``
    with sigma the next node, ``Fd[j] = Phi(t0, t) B(t)``, and ``Phi_end`` is
    ``Phi(t0, tf)``.
    """
    ws, wd = grid.weights(i0, i1)
    Minv = np.linalg.inv(_steps(sys, grid, i0, i1))
    n, m = sys.n, sys.m
    N = i1 - i0 + 1
    Fs = np.zeros((N, n, m))
    Fd = np.zeros((N, n, m))
    P = np.eye(n)  # Phi(t0, t_k)
    for j in range(N):
        Bt = sys.B(float(grid.times[i0 + j]))
        Fd[j] = P @ Bt
        if j < N - 1:
            P = P @ Minv[j]
            Fs[j] = P @ Bt
    return ws, wd, Fs, Fd, P


def controllability_gramian(sys, grid, t0, tf, tol=PD_RTOL):
    """Controllability Gramian over [t0, tf).

    Integrand ``Phi(t0, sigma(t)) B(t) B(t)^T Phi(t0, sigma(t))^T``.
    """
    i0, i1 = _interval(grid, t0, tf)
    ws, wd, Fs, Fd, _ = _ctrb_pass(sys, grid, i0, i1)
    G = np.einsum("j,jab,jcb->ac", ws, Fs, Fs) + np.einsum("j,jab,jcb->ac", wd, Fd, Fd)
    return _result(G, t0, tf, "controllability", tol)


def _obsv_pass(sys, grid, i0, i1):
    ws, wd = grid.weights(i0, i1)
    steps = _steps(sys, grid, i0, i1)
    N = i1 - i0 + 1
    H = np.zeros((N, sys.p, sys.n))  # C(t) Phi(t, t0)
    P = np.eye(sys.n)
    for j in range(N):
        H[j] = sys.C(float(grid.times[i0 + j])) @ P
        if j < N - 1:
            P = steps[j] @ P
    return ws + wd, H


def observability_gramian(sys, grid, t0, tf, tol=PD_RTOL):
    """Observability Gramian over [t0, tf), integrand ``Phi^T C^T C Phi``."""
    i0, i1 = _interval(grid, t0, tf)
    w, H = _obsv_pass(sys, grid, i0, i1)
    G = np.einsum("j,jba,jbc->ac", w, H, H)
    return _result(G, t0, tf, "observability", tol)


def min_energy_input(sys, grid, t0, tf, x0, xf, tol=PD_RTOL):
    """Input steering x(t0) = x0 to x(tf) = xf with least energy.

    ``u(t) = -B(t)^T Phi(t0, sigma(t))^T eta`` sampled at the nodes of
    [t0, tf), where ``eta = G_C^{-1} (x0 - Phi(t0, tf) xf)``.

    The steering vector ``eta`` is solved against the same discretization
    that :func:`simulate` applies, so the simulated terminal state matches
    xf to roundoff. On purely discrete grids that system matrix is the
    controllability Gramian itself; across dense steps it differs from the
    trapezoid Gramian by O(h^2). When the last step into tf is dense the
    sample at tf is included, and at right ends of continuous intervals the
    left limit of u is recorded in ``left_limits``.

    Raises
    ------
    NotControllableError
        If the controllability Gramian is not invertible on [t0, tf].
    """
    i0, i1 = _interval(grid, t0, tf)
    ws, wd, Fs, Fd, Phi_end = _ctrb_pass(sys, grid, i0, i1)
    G = np.einsum("j,jab,jcb->ac", ws, Fs, Fs) + np.einsum("j,jab,jcb->ac", wd, Fd, Fd)
    res = _result(G, t0, tf, "controllability", tol)
    if not res.invertible:
        raise NotControllableError(
            f"not controllable on [{t0}, {tf}]: Gramian eigenvalues "
            f"[{res.eigen_min:.3e}, {res.eigen_max:.3e}]")
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    xf = np.asarray(xf, dtype=float).reshape(-1)

    N = i1 - i0 + 1
    scattered = np.array([grid.is_scattered(k) and k < i1 for k in range(i0, i1 + 1)])
    F = np.where(scattered[:, None, None], Fs, Fd)
    # u_k = -F_k^T eta; propagate the n x n response to eta through the simulator's steps
    U = -np.transpose(F, (0, 2, 1))
    Ul = -np.transpose(Fd, (0, 2, 1))
    steps = _affine_steps(sys, grid, i0, i1)
    R = _propagate(steps, np.zeros((sys.n, sys.n)), U, Ul)[-1]
    Phi_f0 = _propagate(steps, np.eye(sys.n), np.zeros((N, sys.m, sys.n)),
                        np.zeros((N, sys.m, sys.n)))[-1]
    eta = np.linalg.solve(R, xf - Phi_f0 @ x0)

    include_end = bool(grid.dense[i1 - 1])
    stop = N if include_end else N - 1
    values = np.einsum("jab,a->jb", F[:stop], -eta)
    limits = {}
    for j in range(1, stop):
        k = i0 + j
        if scattered[j] and grid.dense[k - 1]:
            limits[float(grid.times[k])] = -Fd[j].T @ eta
    return Trajectory(grid, grid.times[i0:i0 + stop], values, "input", limits)


def reconstruct_initial_state(sys, grid, y, t0, tf, tol=PD_RTOL):
    """Recover x(t0) from the zero-input response y on [t0, tf).

    Solves ``G_O x0 = integral of Phi(t, t0)^T C(t)^T y(t)``.

    Raises
    ------
    NotObservableError
        If the observability Gramian is not invertible on [t0, tf].
    """
    i0, i1 = _interval(grid, t0, tf)
    w, H = _obsv_pass(sys, grid, i0, i1)
    res = _result(np.einsum("j,jba,jbc->ac", w, H, H), t0, tf, "observability", tol)
    if not res.invertible:
        raise NotObservableError(
            f"not observable on [{t0}, {tf}]: Gramian eigenvalues "
            f"[{res.eigen_min:.3e}, {res.eigen_max:.3e}]")
    rhs = np.zeros(sys.n)
    for j in range(i1 - i0 + 1):
        if w[j] == 0:
            continue
        t = float(grid.times[i0 + j])
        yk = y.at(t) if isinstance(y, Trajectory) else np.atleast_1d(y(t))
        rhs += w[j] * (H[j].T @ yk)
    return np.linalg.solve(res.matrix, rhs)
