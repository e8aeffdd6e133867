"""Independent reference computations used by the tests.

Nothing here calls into tscontrol's numerical routines: transition
matrices come from matrix powers and scipy's expm, Gramians from explicit
sums or the Van Loan block exponential, and exact algebra from sympy.
"""

from fractions import Fraction

import numpy as np
import scipy.linalg
import sympy


def discrete_transition(A, k, mu=1.0):
    """(I + mu A)^k: the transition matrix over k steps of a uniform lattice."""
    A = np.asarray(A, dtype=float)
    return np.linalg.matrix_power(np.eye(A.shape[0]) + mu * A, k)


def piecewise_transition(A, pieces):
    """Transition over consecutive pieces ('dense', length) or ('gap', mu)."""
    A = np.asarray(A, dtype=float)
    Phi = np.eye(A.shape[0])
    for kind, size in pieces:
        if kind == "dense":
            Phi = scipy.linalg.expm(A * size) @ Phi
        else:
            Phi = (np.eye(A.shape[0]) + size * A) @ Phi
    return Phi


def discrete_ctrb_gramian(A, B, N, mu=1.0):
    """sum_{k<N} mu Phi(0, (k+1)mu) B B^T Phi(0, (k+1)mu)^T on a uniform lattice."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    Minv = np.linalg.inv(np.eye(A.shape[0]) + mu * A)
    G = np.zeros((A.shape[0], A.shape[0]))
    P = Minv.copy()
    for _ in range(N):
        F = P @ B
        G += mu * F @ F.T
        P = Minv @ P
    return G


def discrete_obsv_gramian(A, C, N, mu=1.0):
    """sum_{k<N} mu Phi(k mu, 0)^T C^T C Phi(k mu, 0)."""
    A = np.asarray(A, dtype=float)
    C = np.atleast_2d(np.asarray(C, dtype=float))
    M = np.eye(A.shape[0]) + mu * A
    G = np.zeros((A.shape[0], A.shape[0]))
    P = np.eye(A.shape[0])
    for _ in range(N):
        H = C @ P
        G += mu * H.T @ H
        P = M @ P
    return G


def van_loan_gramian(F, Q, T):
    """integral_0^T e^{F t} Q e^{F^T t} dt from one block exponential."""
    F = np.asarray(F, dtype=float)
    n = F.shape[0]
    M = np.zeros((2 * n, 2 * n))
    M[:n, :n] = -F
    M[:n, n:] = Q
    M[n:, n:] = F.T
    E = scipy.linalg.expm(M * T)
    return E[n:, n:].T @ E[:n, n:]


def continuous_ctrb_gramian(A, B, T):
    """integral_0^T e^{-A t} B B^T e^{-A^T t} dt."""
    B = np.asarray(B, dtype=float)
    return van_loan_gramian(-np.asarray(A, dtype=float), B @ B.T, T)


def continuous_obsv_gramian(A, C, T):
    C = np.atleast_2d(np.asarray(C, dtype=float))
    return van_loan_gramian(np.asarray(A, dtype=float).T, C.T @ C, T)


def to_sympy(M):
    return sympy.Matrix([[sympy.Rational(Fraction(x).numerator, Fraction(x).denominator)
                          for x in row] for row in np.asarray(M, dtype=object).tolist()])


def sympy_rank(M):
    return to_sympy(M).rank()


def sympy_kalman(A, B):
    A, B = to_sympy(A), to_sympy(B)
    blocks = [B]
    for _ in range(A.shape[0] - 1):
        blocks.append(A * blocks[-1])
    return sympy.Matrix.hstack(*blocks)


def sympy_transfer(A, B, C):
    """C (zI - A)^{-1} B as a matrix of cancelled sympy expressions."""
    z = sympy.symbols("z")
    A, B, C = to_sympy(A), to_sympy(B), to_sympy(C)
    G = C * (z * sympy.eye(A.shape[0]) - A).inv() * B
    return G.applyfunc(sympy.cancel), z


def sympy_eigenvalues(A):
    return to_sympy(A).eigenvals()


def hurwitz(A):
    return bool(np.all(np.linalg.eigvals(np.asarray(A, dtype=float)).real < 0))


def schur_stable(A, mu=1.0):
    """Spectral radius of I + mu A below one."""
    A = np.asarray(A, dtype=float)
    return bool(np.max(np.abs(np.linalg.eigvals(np.eye(A.shape[0]) + mu * A))) < 1)
