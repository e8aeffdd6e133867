"""Rank tests for controllability and observability.

Constant-coefficient tests (Kalman matrices, eigenvector/PBH tests and the
block decompositions they induce) and the sufficient rank test for time
varying systems built from the K_j / L_j matrix sequences.

Exact inputs (ints and Fractions) are handled in rational arithmetic by
default so small rational examples are decided without rounding; float
inputs use singular values with the tolerance
``max(rows, cols) * eps * sigma_max``.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .rational import exact_rank, fraction_matrix, is_rational_matrix
from .timescale import TimeScaleError

__all__ = [
    "RankVerdict",
    "PBHVerdict",
    "TVRankVerdict",
    "Decomposition",
    "DerivativeFallbackWarning",
    "kalman_controllability",
    "kalman_observability",
    "k_sequence",
    "l_sequence",
    "tv_controllability_rank",
    "tv_observability_rank",
    "pbh_controllability",
    "pbh_observability",
    "controllable_decomposition",
    "observable_decomposition",
    "DECOMPOSITION_RTOL",
    "PBH_RTOL",
]

DECOMPOSITION_RTOL = 1e-9
PBH_RTOL = 1e-8
EIG_CLUSTER_RTOL = 1e-6


class DerivativeFallbackWarning(UserWarning):
    """Delta derivatives were taken by grid differences instead of hooks."""


@dataclass(frozen=True, eq=False)
class RankVerdict:
    """Rank of a test matrix and whether it equals the state dimension."""

    matrix: np.ndarray
    rank: int
    singular_values: np.ndarray
    tolerance: float
    n: int
    exact: bool = False

    @property
    def passed(self):
        return self.rank == self.n

    def __bool__(self):
        return self.passed


def _float(M):
    return np.array(np.asarray(M, dtype=object).tolist(), dtype=float) \
        if np.asarray(M).dtype == object else np.asarray(M, dtype=float)


def _numerical_rank(M, tol=None):
    Mf = _float(M)
    if Mf.size == 0:
        return 0, np.zeros(0), 0.0 if tol is None else tol
    s = np.linalg.svd(Mf, compute_uv=False)
    if tol is None:
        tol = max(Mf.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    return int(np.sum(s > tol)), s, float(tol)


def _use_exact(exact, *mats):
    if exact is None:
        return all(is_rational_matrix(M) for M in mats)
    if exact and not all(is_rational_matrix(M) for M in mats):
        raise TypeError("exact mode needs integer or Fraction entries")
    return bool(exact)


def _pair(A, B, what):
    A = np.asarray(A, dtype=object)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"A must be square, got shape {A.shape}")
    n = A.shape[0]
    B = np.asarray(B, dtype=object)
    if what == "B":
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        if B.shape[0] != n:
            raise ValueError(f"B has {B.shape[0]} rows, A is {n}x{n}")
    else:
        if B.ndim == 1:
            B = B.reshape(1, -1)
        if B.shape[1] != n:
            raise ValueError(f"C has {B.shape[1]} columns, A is {n}x{n}")
    return A, B, n


def _kalman_blocks(A, B, n, exact):
    if exact:
        A, B = fraction_matrix(A), fraction_matrix(B)
    else:
        A, B = _float(A), _float(B)
    blocks = [B]
    for _ in range(n - 1):
        blocks.append(A.dot(blocks[-1]))
    return blocks


def kalman_controllability(A, B, tol=None, exact=None):
    """Rank of ``[B, AB, ..., A^{n-1} B]``.

    ``exact=None`` picks rational arithmetic when every entry is an int or
    Fraction; the rank is then exact and ``tol`` is ignored.
    """
    A, B, n = _pair(A, B, "B")
    exact = _use_exact(exact, A, B)
    K = np.hstack(_kalman_blocks(A, B, n, exact))
    if exact:
        _, s, tol_used = _numerical_rank(K, tol)
        return RankVerdict(K, exact_rank(K), s, 0.0, n, True)
    r, s, tol_used = _numerical_rank(K, tol)
    return RankVerdict(K, r, s, tol_used, n, False)


def kalman_observability(A, C, tol=None, exact=None):
    """Rank of the stacked matrix ``[C; CA; ...; CA^{n-1}]``."""
    A, C, n = _pair(A, C, "C")
    exact = _use_exact(exact, A, C)
    if exact:
        A, C = fraction_matrix(A), fraction_matrix(C)
    else:
        A, C = _float(A), _float(C)
    rows = [C]
    for _ in range(n - 1):
        rows.append(rows[-1].dot(A))
    O = np.vstack(rows)
    if exact:
        _, s, _ = _numerical_rank(O, tol)
        return RankVerdict(O, exact_rank(O), s, 0.0, n, True)
    r, s, tol_used = _numerical_rank(O, tol)
    return RankVerdict(O, r, s, tol_used, n, False)


# ---------------------------------------------------------------- PBH

@dataclass(frozen=True, eq=False)
class PBHVerdict:
    """Eigenvector test evaluated at each distinct eigenvalue of A.

    The rank of ``[zI - A, B]`` can only drop when z is an eigenvalue, so
    the finite check over ``eigenvalues`` decides the condition for every
    complex z.
    """

    eigenvalues: np.ndarray
    ranks: tuple
    passed_at: tuple
    witnesses: tuple
    tolerance: float
    n: int
    note: str = ("rank [zI-A, B] equals n automatically when z is not an "
                 "eigenvalue; only eigenvalues are checked")

    @property
    def passed(self):
        return all(self.passed_at)

    def __bool__(self):
        return self.passed

    @property
    def failing_eigenvalues(self):
        return tuple(l for l, ok in zip(self.eigenvalues, self.passed_at) if not ok)


def _distinct_eigenvalues(A):
    """Eigenvalues of A with numerically repeated ones replaced by their mean."""
    ev = np.linalg.eigvals(A)
    scale = max(1.0, np.linalg.norm(A, 2))
    groups = []
    for lam in ev:
        for g in groups:
            if abs(np.mean(g) - lam) <= EIG_CLUSTER_RTOL * scale:
                g.append(lam)
                break
        else:
            groups.append([lam])
    out = np.array([np.mean(g) for g in groups], dtype=complex)
    return out[np.lexsort((out.imag, out.real))]


def _pbh(A, B, tol):
    A, B = _float(A), _float(B)
    n = A.shape[0]
    scale = max(1.0, np.linalg.norm(np.hstack([A, B]), 2))
    tol = PBH_RTOL if tol is None else tol
    eigs = _distinct_eigenvalues(A)
    ranks, oks, witnesses = [], [], []
    for lam in eigs:
        M = np.hstack([lam * np.eye(n) - A, B.astype(complex)])
        U, s, _ = np.linalg.svd(M)
        r = int(np.sum(s > tol * scale))
        ranks.append(r)
        oks.append(r == n)
        if r < n:
            p = U[:, -1]
            k = int(np.argmax(np.abs(p)))
            p = p * (abs(p[k]) / p[k])
            witnesses.append((complex(lam), p))
    return eigs, tuple(ranks), tuple(oks), tuple(witnesses), tol


def pbh_controllability(A, B, tol=None):
    """Eigenvector test: rank [lam I - A, B] = n at every eigenvalue lam.

    A failure carries a witness ``(lam, p)`` with ``p^H A = lam p^H`` and
    ``p^H B = 0`` up to ``tol * max(1, ||[A, B]||)``.
    """
    A, B, n = _pair(A, B, "B")
    eigs, ranks, oks, wit, tol = _pbh(A, B, tol)
    return PBHVerdict(eigs, ranks, oks, wit, tol, n)


def pbh_observability(A, C, tol=None):
    """Dual eigenvector test: rank [C; lam I - A] = n at every eigenvalue.

    Witnesses are right eigenvectors ``p`` with ``A p = lam p`` and
    ``C p = 0``.
    """
    A, C, n = _pair(A, C, "C")
    eigs, ranks, oks, wit, tol = _pbh(_float(A).T, _float(C).T, tol)
    wit = tuple((lam, np.conj(p)) for lam, p in wit)
    return PBHVerdict(eigs, ranks, oks, wit, tol, n,
                      "rank [C; zI-A] equals n automatically when z is not an "
                      "eigenvalue; only eigenvalues are checked")


# ---------------------------------------------------------------- decompositions

@dataclass(frozen=True, eq=False)
class Decomposition:
    """Change of basis exhibiting the (un)controllable or (un)observable part.

    For ``kind == "controllable"``: ``P^{-1} A P = [[A11, A12], [0, A22]]`` and
    ``P^{-1} B = [B11; 0]`` with (A11, B11) controllable of dimension ``dim``.
    For ``kind == "observable"``: ``Q^{-1} A Q = [[A11, 0], [A21, A22]]`` and
    ``C Q = [C11, 0]`` with (A11, C11) observable of dimension ``dim``.
    ``residual`` is the norm of the blocks that should vanish.
    """

    kind: str
    P: np.ndarray
    A_hat: np.ndarray
    BC_hat: np.ndarray
    dim: int
    residual: float
    tolerance: float
    note: str = ""

    @property
    def A11(self):
        return self.A_hat[:self.dim, :self.dim]

    @property
    def A12(self):
        return self.A_hat[:self.dim, self.dim:]

    @property
    def A21(self):
        return self.A_hat[self.dim:, :self.dim]

    @property
    def A22(self):
        return self.A_hat[self.dim:, self.dim:]

    @property
    def B11(self):
        if self.kind != "controllable":
            raise AttributeError("B11 exists for the controllable decomposition")
        return self.BC_hat[:self.dim]

    @property
    def C11(self):
        if self.kind != "observable":
            raise AttributeError("C11 exists for the observable decomposition")
        return self.BC_hat[:, :self.dim]

    @property
    def certified(self):
        return self.residual <= self.tolerance


def _dec_tol(A, tol):
    return (DECOMPOSITION_RTOL if tol is None else tol) * max(1.0, np.linalg.norm(A, 2))


def controllable_decomposition(A, B, tol=None, rank_tol=None):
    """Basis change splitting off the controllable subspace.

    The first ``q`` columns of P span the range of the Kalman matrix (an
    orthonormal basis from a column-pivoted QR), the rest complete it to a
    basis of R^n. P is orthogonal, so ``P^{-1} = P^T``.

    Raises
    ------
    ValueError
        If the Kalman rank is 0 (no controllable subspace to exhibit).
    """
    A_, B_, n = _pair(A, B, "B")
    v = kalman_controllability(A_, B_, tol=rank_tol)
    Af, Bf = _float(A_), _float(B_)
    q = v.rank
    if q == 0:
        raise ValueError("controllability rank is 0; there is no controllable subspace")
    if q == n:
        return Decomposition("controllable", np.eye(n), Af.copy(), Bf.copy(), n, 0.0,
                             _dec_tol(Af, tol), "pair is controllable; P = I")
    Q, _, _ = scipy.linalg.qr(_float(v.matrix), pivoting=True)
    Ah, Bh = Q.T @ Af @ Q, Q.T @ Bf
    res = max(np.linalg.norm(Ah[q:, :q], 2), np.linalg.norm(Bh[q:], 2))
    return Decomposition("controllable", Q, Ah, Bh, q, float(res), _dec_tol(Af, tol))


def observable_decomposition(A, C, tol=None, rank_tol=None):
    """Basis change splitting off the unobservable subspace.

    The last ``n - l`` columns of Q span the null space of the observability
    matrix; the first ``l`` span its row space.
    """
    A_, C_, n = _pair(A, C, "C")
    v = kalman_observability(A_, C_, tol=rank_tol)
    Af, Cf = _float(A_), _float(C_)
    l = v.rank
    if l == 0:
        raise ValueError("observability rank is 0; there is no observable subspace")
    if l == n:
        return Decomposition("observable", np.eye(n), Af.copy(), Cf.copy(), n, 0.0,
                             _dec_tol(Af, tol), "pair is observable; Q = I")
    Q, _, _ = scipy.linalg.qr(_float(v.matrix).T, pivoting=True)
    Ah, Ch = Q.T @ Af @ Q, Cf @ Q
    res = max(np.linalg.norm(Ah[:l, l:], 2), np.linalg.norm(Ch[:, l:], 2))
    return Decomposition("observable", Q, Ah, Ch, l, float(res), _dec_tol(Af, tol))


# ---------------------------------------------------------------- K_j / L_j sequences

def _hook(sys, name):
    hook = sys.derivative_hooks.get(name)
    if hook is None and name in "ABC" and getattr(sys, "_" + name) is not None:
        zero = np.zeros_like(getattr(sys, "_" + name))
        return lambda t: zero
    return hook


class _Window:
    """Nodes around t on which the sequences are evaluated.

    The final grid node is excluded: its graininess is a convention of the
    finite window, not a property of the time scale.
    """

    def __init__(self, grid, t, q):
        self.grid = grid
        self.k = grid.index(t)
        last = len(grid) - 2
        if self.k > last:
            raise TimeScaleError(f"t={t!r} is the final grid point; sequences need a successor")
        self.lo = max(0, self.k - q - 1)
        self.hi = min(last, self.k + q + 2)
        self.idx = np.arange(self.lo, self.hi + 1)
        self.times = grid.times[self.idx]

    def sigma_pos(self, i):
        """Window position of sigma(t_i) and mu(sigma(t_i))."""
        g = self.grid
        k = self.lo + i
        if g.mu[k] > 0:
            return i + 1, (g.mu[k + 1] if k + 1 < len(g) - 1 else np.nan)
        return i, 0.0

    def derivative(self, vals, valid):
        """Grid delta derivative of stacked samples; returns (deriv, valid)."""
        g = self.grid
        out = np.full_like(vals, np.nan)
        ok = np.zeros_like(valid)
        for i in range(len(self.idx)):
            k = self.lo + i
            if not valid[i] or i + 1 >= len(self.idx) or not valid[i + 1]:
                continue
            if g.dense[k] and k > 0 and g.dense[k - 1] and i > 0 and valid[i - 1]:
                out[i] = (vals[i + 1] - vals[i - 1]) / (g.times[k + 1] - g.times[k - 1])
            else:
                out[i] = (vals[i + 1] - vals[i]) / g.step[k]
            ok[i] = True
        return out, ok


def _warn_fallback(sys, names, what, w):
    """Warn when a derivative is approximated by differences across dense nodes.

    On scattered nodes the grid difference is the delta derivative itself,
    and constant coefficients have zero derivative.
    """
    if not np.any(w.grid.dense[w.idx]):
        return
    missing = [n for n in names if _hook(sys, n) is None]
    if missing:
        warnings.warn(
            f"{what}: no derivative hooks for {', '.join(missing)}; using grid "
            "differences, which can perturb marginal ranks", DerivativeFallbackWarning,
            stacklevel=3)


def k_sequence(sys, grid, t, q):
    """Matrices K_0(t), ..., K_q(t) of the controllability rank test.

    ``K_0 = B`` and

    ``K_{j+1} = (I + mu^s A^s)^{-1} K_j^Delta
    - [(I + mu^s A^s)^{-1} (mu^Delta A^s + mu A^Delta) (I + mu A)^{-1}
    + A (I + mu A)^{-1}] K_j``

    where the superscript s means evaluation at sigma(t). Delta derivatives
    of A, B and mu come from ``sys.derivative_hooks`` when present; all
    others are grid differences, so K_j(t) equals the j-th delta
    derivative of ``Phi(sigma(t), sigma(s)) B(s)`` at ``s = t``.

    Raises
    ------
    TimeScaleError
        If t is too close to the grid end for the required derivatives.
    """
    q = int(q)
    w = _Window(grid, t, q)
    n, m = sys.n, sys.m
    I = np.eye(n)
    if q > 0:
        _warn_fallback(sys, ("A", "B", "mu"), "k_sequence", w)
    L = len(w.idx)
    At = np.array([sys.A(float(s)) for s in w.times])
    mu_t = grid.mu[w.idx].astype(float)

    # per-node bracket factors
    S_inv = np.full((L, n, n), np.nan)
    brk = np.full((L, n, n), np.nan)
    coef_ok = np.zeros(L, dtype=bool)
    dA, dA_ok = _derivative_of(sys, w, "A", At)
    dmu, dmu_ok = _mu_derivative(sys, w, mu_t)
    for i in range(L):
        js, mu_s = w.sigma_pos(i)
        if js >= L or np.isnan(mu_s) or not (dA_ok[i] and dmu_ok[i]):
            continue
        A_s = At[js] if js != i else At[i]
        S_inv[i] = np.linalg.inv(I + mu_s * A_s)
        R = np.linalg.inv(I + mu_t[i] * At[i])
        brk[i] = S_inv[i] @ (dmu[i] * A_s + mu_t[i] * dA[i]) @ R + At[i] @ R
        coef_ok[i] = True

    Kj = np.array([sys.B(float(s)) for s in w.times])
    valid = np.ones(L, dtype=bool)
    out = [Kj[w.k - w.lo].copy()]
    for j in range(q):
        if j == 0 and _hook(sys, "B") is not None:
            dK = np.array([np.atleast_2d(_hook(sys, "B")(float(s))).reshape(n, m)
                           for s in w.times])
            dK_ok = valid.copy()
        else:
            dK, dK_ok = w.derivative(Kj, valid)
        nxt = np.full_like(Kj, np.nan)
        nvalid = dK_ok & coef_ok
        for i in np.flatnonzero(nvalid):
            nxt[i] = S_inv[i] @ dK[i] - brk[i] @ Kj[i]
        Kj, valid = nxt, nvalid
        if not valid[w.k - w.lo]:
            raise TimeScaleError(
                f"t={t!r} is too close to the end of the grid for K_{j + 1}")
        out.append(Kj[w.k - w.lo].copy())
    return out


def _derivative_of(sys, w, name, vals):
    hook = _hook(sys, name)
    if hook is not None:
        d = np.array([np.atleast_2d(np.asarray(hook(float(s)), dtype=float)).reshape(vals.shape[1:])
                      for s in w.times])
        return d, np.ones(len(w.idx), dtype=bool)
    return w.derivative(vals, np.ones(len(w.idx), dtype=bool))


def _mu_derivative(sys, w, mu_t):
    hook = _hook(sys, "mu")
    if hook is not None:
        return np.array([float(hook(float(s))) for s in w.times]), np.ones(len(w.idx), bool)
    return w.derivative(mu_t, np.ones(len(w.idx), dtype=bool))


def l_sequence(sys, grid, t, q):
    """Matrices L_0(t), ..., L_q(t) of the observability rank test.

    ``L_0 = C`` and ``L_{j+1} = L_j A + L_j^Delta (I + mu A)``, so L_j(t) is
    the j-th delta derivative of ``C(t) Phi(t, s)`` at ``s = t``.
    """
    q = int(q)
    w = _Window(grid, t, q)
    n = sys.n
    I = np.eye(n)
    if q > 0:
        _warn_fallback(sys, ("C",), "l_sequence", w)
    L = len(w.idx)
    At = np.array([sys.A(float(s)) for s in w.times])
    mu_t = grid.mu[w.idx].astype(float)
    Lj = np.array([sys.C(float(s)) for s in w.times])
    valid = np.ones(L, dtype=bool)
    out = [Lj[w.k - w.lo].copy()]
    for j in range(q):
        if j == 0 and _hook(sys, "C") is not None:
            dL = np.array([np.atleast_2d(_hook(sys, "C")(float(s))).reshape(sys.p, n)
                           for s in w.times])
            dL_ok = valid.copy()
        else:
            dL, dL_ok = w.derivative(Lj, valid)
        nxt = np.full_like(Lj, np.nan)
        for i in np.flatnonzero(dL_ok):
            nxt[i] = Lj[i] @ At[i] + dL[i] @ (I + mu_t[i] * At[i])
        Lj, valid = nxt, dL_ok
        if not valid[w.k - w.lo]:
            raise TimeScaleError(
                f"t={t!r} is too close to the end of the grid for L_{j + 1}")
        out.append(Lj[w.k - w.lo].copy())
    return out


@dataclass(frozen=True, eq=False)
class TVRankVerdict:
    """Outcome of the sufficient rank test for time-varying systems.

    ``status`` is ``"pass"`` when the stacked sequence has rank n at the
    witness time. The test is only sufficient: without a pass the status is
    ``"inconclusive"``, unless a Gramian interval was supplied, in which case
    an invertible Gramian gives ``"pass"`` (method ``"gramian"``) and a
    singular one gives ``"fail"``.
    """

    status: str
    witness: float = None
    rank: int = 0
    n: int = 0
    q: int = 0
    method: str = "rank"
    ranks: dict = field(default_factory=dict)
    warnings: tuple = ()

    @property
    def passed(self):
        return self.status == "pass"


def _tv_rank(sys, grid, t_candidates, q, seq, stack, tol, gramian):
    if t_candidates is None:
        t_candidates = grid.times[:-1]
    n = sys.n
    ranks = {}
    best = 0
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", DerivativeFallbackWarning)
        for t in t_candidates:
            try:
                mats = seq(sys, grid, float(t), q)
            except TimeScaleError:
                continue
            r, _, _ = _numerical_rank(stack(mats), tol)
            ranks[float(t)] = r
            best = max(best, r)
            if r == n:
                msgs = tuple(sorted({str(c.message) for c in caught}))
                return TVRankVerdict("pass", float(t), r, n, q, "rank", ranks, msgs)
    msgs = tuple(sorted({str(c.message) for c in caught}))
    if gramian is not None:
        fn, t0, tf = gramian
        g = fn(sys, grid, t0, tf)
        status = "pass" if g.invertible else "fail"
        return TVRankVerdict(status, None, best, n, q, "gramian", ranks, msgs)
    return TVRankVerdict("inconclusive", None, best, n, q, "rank", ranks, msgs)


def tv_controllability_rank(sys, grid, t_candidates=None, q=None, tol=None, gramian_interval=None):
    """Sufficient controllability test: rank [K_0(t_c) ... K_q(t_c)] = n.

    ``t_candidates`` defaults to every grid node that has a successor;
    ``q`` defaults to n - 1. ``gramian_interval=(t0, tf)`` resolves a
    non-pass with the controllability Gramian.
    """
    from .gramian import controllability_gramian
    q = sys.n - 1 if q is None else q
    gram = None if gramian_interval is None else (controllability_gramian, *gramian_interval)
    return _tv_rank(sys, grid, t_candidates, q, k_sequence, np.hstack, tol, gram)


def tv_observability_rank(sys, grid, t_candidates=None, q=None, tol=None, gramian_interval=None):
    """Sufficient observability test: rank [L_0(t_c); ...; L_q(t_c)] = n."""
    from .gramian import observability_gramian
    q = sys.n - 1 if q is None else q
    gram = None if gramian_interval is None else (observability_gramian, *gramian_interval)
    return _tv_rank(sys, grid, t_candidates, q, l_sequence, np.vstack, tol, gram)
