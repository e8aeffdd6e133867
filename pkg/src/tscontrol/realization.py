"""Transfer functions, realizations and partial-fraction data.

All realization algebra is exact over the rationals. Floating point only
enters through eigenvalue extraction in :func:`partial_fractions`.
"""

import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .dynamics import LinearSystem
from .rational import (Poly, RationalFn, RationalMatrix, charpoly_adjugate, fraction_matrix,
                       squarefree_factors)
from .ranktests import kalman_controllability, kalman_observability
from .timescale import TimeScaleError

__all__ = [
    "Realization",
    "MinimalityVerdict",
    "PartialFractions",
    "NotStrictlyProperError",
    "is_strictly_proper",
    "transfer_function",
    "companion_realization",
    "is_minimal",
    "is_minimal_tv",
    "realize_from_factors",
    "partial_fractions",
    "exact_eigenvalues",
]


class NotStrictlyProperError(ValueError):
    """An entry has numerator degree >= denominator degree."""


@dataclass(frozen=True, eq=False)
class Realization:
    """Exact state-space triple (A, B, C) with a provenance tag."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    provenance: str = "user"

    def __post_init__(self):
        A = fraction_matrix(self.A)
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError(f"A must be square, got shape {A.shape}")
        B = fraction_matrix(self.B)
        C = np.asarray(self.C, dtype=object)
        C = fraction_matrix(C.reshape(1, -1) if C.ndim == 1 else C)
        if B.shape[0] != n:
            raise ValueError(f"B has {B.shape[0]} rows, A is {n}x{n}")
        if C.shape[1] != n:
            raise ValueError(f"C has {C.shape[1]} columns, A is {n}x{n}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)

    @property
    def n(self):
        return self.A.shape[0]

    def to_system(self):
        return LinearSystem(self.A, self.B, self.C)

    def as_float(self):
        return tuple(np.array(M.tolist(), dtype=float) for M in (self.A, self.B, self.C))


def _as_realization(R):
    if isinstance(R, Realization):
        return R
    if isinstance(R, LinearSystem):
        if R.exact is None:
            raise TypeError("system has no exact rational coefficients")
        return Realization(R.exact["A"], R.exact["B"], R.exact["C"], "user")
    A, B, C = R
    return Realization(A, B, C, "user")


def is_strictly_proper(G):
    """True iff every entry has numerator degree below denominator degree."""
    if isinstance(G, RationalFn):
        return G.is_strictly_proper()
    return RationalMatrix.parse(G).is_strictly_proper() if not isinstance(G, RationalMatrix) \
        else G.is_strictly_proper()


def transfer_function(R):
    """``G(z) = C adj(zI - A) B / det(zI - A)`` with reduced entries.

    ``R`` is a :class:`Realization`, an exact :class:`LinearSystem` or a
    tuple ``(A, B, C)`` of rational matrices.
    """
    R = _as_realization(R)
    chi, adj = charpoly_adjugate(R.A)
    n = R.n
    p, m = R.C.shape[0], R.B.shape[1]
    rows = []
    for i in range(p):
        row = []
        for j in range(m):
            num = Poly()
            for a in range(n):
                if R.C[i, a] == 0:
                    continue
                for b in range(n):
                    if R.B[b, j] != 0:
                        num = num + adj[a][b] * (R.C[i, a] * R.B[b, j])
            row.append(RationalFn(num, chi))
        rows.append(row)
    return RationalMatrix(rows)


def companion_realization(G):
    """Block-companion realization of a strictly proper rational matrix.

    With ``d(z) = z^r + d_{r-1} z^{r-1} + ... + d_0`` the monic lcm of the
    entry denominators and ``d(z) G(z) = P_{r-1} z^{r-1} + ... + P_0``, the
    realization has dimension ``q r`` (q = number of inputs)::

        A = [[0, I, 0, ...], ..., [-d_0 I, -d_1 I, ..., -d_{r-1} I]]
        B = [0; ...; 0; I]      C = [P_0, P_1, ..., P_{r-1}]

    The result is certified by an exact round trip through
    :func:`transfer_function`.

    Raises
    ------
    NotStrictlyProperError
        If some entry is not strictly proper.
    """
    if not isinstance(G, RationalMatrix):
        G = RationalMatrix.parse(G) if not isinstance(G, RationalFn) else RationalMatrix([[G]])
    if not G.is_strictly_proper():
        raise NotStrictlyProperError(
            "every entry must be a strictly-proper rational function of z "
            "(numerator degree below denominator degree)")
    p, q = G.shape
    d = G.denominator_lcm()
    r = d.degree
    if r == 0:
        # G == 0: a single zero mode keeps the dimensions meaningful
        r, d = 1, Poly([0, 1])
    P = [np.empty((p, q), dtype=object) for _ in range(r)]
    for i in range(p):
        for j in range(q):
            e = G[i, j]
            num = e.num * d.exact_div(e.den)
            for k in range(r):
                P[k][i, j] = num.coeffs[k] if k < len(num.coeffs) else Fraction(0)
    nq = q * r
    A = np.empty((nq, nq), dtype=object)
    A[...] = Fraction(0)
    for blk in range(r - 1):
        for c in range(q):
            A[blk * q + c, (blk + 1) * q + c] = Fraction(1)
    for blk in range(r):
        for c in range(q):
            A[(r - 1) * q + c, blk * q + c] = -d.coeffs[blk]
    B = np.empty((nq, q), dtype=object)
    B[...] = Fraction(0)
    for c in range(q):
        B[(r - 1) * q + c, c] = Fraction(1)
    C = np.hstack(P)
    R = Realization(A, B, C, "companion")
    if transfer_function(R) != G:
        raise ArithmeticError("companion realization failed its round-trip certificate")
    return R


@dataclass(frozen=True, eq=False)
class MinimalityVerdict:
    minimal: bool
    controllable: object
    observable: object
    method: str = "kalman"

    def __bool__(self):
        return self.minimal


def is_minimal(R, tol=None):
    """Minimal iff the realization is controllable and observable (Kalman ranks).

    Exact realizations are decided in rational arithmetic.
    """
    if isinstance(R, Realization):
        A, B, C = R.A, R.B, R.C
    elif isinstance(R, LinearSystem):
        if R.exact is not None:
            A, B, C = R.exact["A"], R.exact["B"], R.exact["C"]
        else:
            A, B, C = R.constant("A"), R.constant("B"), R.constant("C")
    else:
        A, B, C = R
    kc = kalman_controllability(A, B, tol=tol)
    ko = kalman_observability(A, C, tol=tol)
    return MinimalityVerdict(kc.passed and ko.passed, kc, ko, "kalman")


def is_minimal_tv(sys, grid, t0, tf):
    """Minimality on [t0, tf] via invertibility of both Gramians."""
    from .gramian import controllability_gramian, observability_gramian
    gc = controllability_gramian(sys, grid, t0, tf)
    go = observability_gramian(sys, grid, t0, tf)
    return MinimalityVerdict(gc.invertible and go.invertible, gc, go, "gramian")


def realize_from_factors(H, F, grid=None):
    """Zero-state-matrix realization of ``G(t, sigma(s)) = H(t) F(sigma(s))``.

    Returns ``x^Delta = F(sigma(t)) u``, ``y = H(t) x``. The transition
    matrix of the zero system is the identity, so the weighting pattern is
    ``H(t) F(sigma(s))`` on every time scale. Without a grid sigma is taken
    as the identity, which is exact on continuous time scales only.
    """
    Hm = np.atleast_2d(np.asarray(H(0.0) if callable(H) else H, dtype=float))
    Fm = np.asarray(F(grid.t_min if grid is not None else 0.0) if callable(F) else F, dtype=float)
    Fm = Fm.reshape(-1, 1) if Fm.ndim < 2 else Fm
    if Hm.shape[1] != Fm.shape[0]:
        raise ValueError(f"H is {Hm.shape[0]}x{Hm.shape[1]} but F is {Fm.shape[0]}x{Fm.shape[1]}")
    k = Hm.shape[1]
    if grid is not None and callable(F):
        return LinearSystem(np.zeros((k, k)), lambda t: F(_forward_jump(grid, t)), H)
    return LinearSystem(np.zeros((k, k)), F, H)


def _forward_jump(grid, t):
    """sigma(t) on the grid; off-grid times lie in dense parts where sigma(t) = t."""
    try:
        k = grid.index(t)
    except TimeScaleError:
        return t
    if k < len(grid) - 1 and grid.is_scattered(k):
        return float(grid.times[k + 1])
    return t


# ---------------------------------------------------------------- partial fractions

@dataclass(frozen=True, eq=False)
class PartialFractions:
    """``(zI - A)^{-1} = sum_k sum_{j=1}^{psi_k} W[k][j-1] / (z - lam_k)^j``."""

    eigenvalues: np.ndarray
    multiplicities: tuple
    W: tuple
    exact_eigenvalues: tuple
    residue_error: float
    warnings: tuple = ()

    def residue_sum(self):
        return sum(Wk[0] for Wk in self.W)


def exact_eigenvalues(A):
    """Eigenvalues of a rational matrix with exact multiplicities.

    Returns ``[(lam, psi, exact_or_None), ...]``. The characteristic
    polynomial is computed exactly and split into square-free factors; the
    roots of each factor are found numerically and any root that is exactly
    rational is recognized as such.
    """
    chi, _ = charpoly_adjugate(A)
    out = []
    for factor, psi in squarefree_factors(chi):
        f = factor
        exact = []
        for c in f.roots():
            if abs(c.imag) > 1e-9 * max(1.0, abs(c)):
                continue
            for den in (1, 10**3, 10**6, 10**9):
                r = Fraction(c.real).limit_denominator(den)
                if f(r) == 0:
                    exact.append(r)
                    f = f.exact_div(Poly([-r, 1]))
                    break
        for r in exact:
            out.append((complex(r), psi, r))
        for c in f.roots():
            out.append((complex(c), psi, None))
    return out


def partial_fractions(A, jmax=None):
    """Residue matrices of the resolvent ``(zI - A)^{-1}``.

    ``W[k][j-1]`` multiplies ``1 / (z - lam_k)^j`` and equals the
    ``(psi_k - j)``-th Taylor coefficient of ``(z - lam_k)^{psi_k} (zI - A)^{-1}``
    at ``lam_k``. Multiplicities come from an exact square-free
    factorization of ``det(zI - A)`` (float matrices are converted to their
    exact binary values); rational eigenvalues are used exactly.
    """
    Afr = fraction_matrix(A)
    n = Afr.shape[0]
    chi, adj = charpoly_adjugate(Afr)
    eig = exact_eigenvalues(Afr)
    notes = []
    lams = np.array([e[0] for e in eig], dtype=complex)
    scale = max(1.0, float(np.linalg.norm(np.array(Afr.tolist(), dtype=float), 2)))
    for a in range(len(lams)):
        for b in range(a + 1, len(lams)):
            if abs(lams[a] - lams[b]) <= 1e-8 * scale:
                notes.append(f"eigenvalues {lams[a]:.6g} and {lams[b]:.6g} are numerically "
                             "close but exactly distinct; residues may be ill-conditioned")
    W_all = []
    for k, (lam, psi, lam_exact) in enumerate(eig):
        point = lam_exact if lam_exact is not None else lam
        # Taylor coefficients of adj(zI - A) at lam, orders 0..psi-1
        if lam_exact is not None:
            adj_t = np.full((psi, n, n), Fraction(0), dtype=object)
        else:
            adj_t = np.zeros((psi, n, n), dtype=complex)
        for i in range(n):
            for j in range(n):
                c = adj[i][j].shift(point)
                for o in range(min(psi, len(c))):
                    adj_t[o, i, j] = c[o]
        # series of 1 / q_k(z) where q_k = chi / (z - lam)^psi
        if lam_exact is not None:
            qk = chi.exact_div(Poly([-lam_exact, 1]) ** psi)
            qc = qk.shift(lam_exact)
            inv = [Fraction(1) / qc[0]]
        else:
            others = [(e[0], e[1]) for idx, e in enumerate(eig) if idx != k]
            qc = _series_product(others, lam, psi)
            inv = [1.0 / qc[0]]
        for o in range(1, psi):
            acc = sum(qc[i] * inv[o - i] for i in range(1, min(o, len(qc) - 1) + 1))
            inv.append(-acc / qc[0])
        coeffs = []
        for o in range(psi):
            M = sum(adj_t[i] * inv[o - i] for i in range(o + 1))
            coeffs.append(np.array(np.asarray(M).tolist(), dtype=complex))
        # W_{kj} = coefficient of order psi - j
        W_all.append(tuple(coeffs[psi - j] for j in range(1, psi + 1)))
    W_all = tuple(W_all)
    total = sum(Wk[0] for Wk in W_all) if W_all else np.zeros((n, n))
    err = float(np.abs(total - np.eye(n)).max())
    if err > 1e-9 * max(1.0, scale):
        notes.append(f"residue sum deviates from I by {err:.3e}")
    for msg in notes:
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return PartialFractions(lams, tuple(e[1] for e in eig), W_all,
                            tuple(e[2] for e in eig), err, tuple(notes))


def _series_product(others, lam, order):
    """Taylor coefficients at lam of prod (z - mu)^psi over the other eigenvalues."""
    c = np.zeros(order + 1, dtype=complex)
    c[0] = 1.0
    for mu, psi in others:
        for _ in range(psi):
            # multiply by ((lam - mu) + w)
            new = (lam - mu) * c
            new[1:] += c[:-1]
            c = new
    return list(c)
