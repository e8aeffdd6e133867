"""Exponential and bounded-input bounded-output stability on time scales.

The stability region of a time scale is an asymptotic object. Here every
verdict is computed on a finite grid over a schedule of horizons, the
limit superior is replaced by the maximum over the later half of that
schedule, and answers within a margin ``delta`` of zero are reported as
``"marginal"`` rather than forced to a boolean.

Matrix norms are spectral norms throughout.
"""

import warnings
from dataclasses import dataclass
from math import factorial

import numpy as np

from .dynamics import LinearSystem, NonRegressiveError, _steps, scalar_exp
from .rational import RationalFn, RationalMatrix, fraction_matrix, is_rational_matrix
from .realization import (Realization, companion_realization, is_minimal, partial_fractions,
                          transfer_function)

__all__ = [
    "StabilityRegionQuery",
    "SpectrumVerdict",
    "BoundEstimate",
    "BIBOVerdict",
    "region_integrand",
    "default_horizons",
    "in_stability_region",
    "exp_stable_spectrum",
    "exp_stable_integral",
    "f_sequence",
    "spectral_exponential",
    "bibo_tv_integral",
    "bibo_ti",
    "DELTA",
    "DEF_TIME_SCALE_RATE",
    "DEF_CLASSICAL_RATE",
]

DELTA = 1e-3
CONVERGED_RTOL = 1e-6
OVERFLOW = 1e12
TV_FULL_LIMIT = 2000

DEF_TIME_SCALE_RATE = ("uniform exponential stability with a time-scale exponential bound "
                       "||Phi(t, t0)|| <= K e_{-lam}(t, t0)")
DEF_CLASSICAL_RATE = ("uniform exponential stability with a classical bound "
                      "||Phi(t, t0)|| <= K exp(-alpha (t - t0)), alpha independent of t0")


def region_integrand(mu_value, lam):
    """``log|1 + mu lam| / mu`` for mu > 0 and its limit ``Re lam`` at mu = 0.

    Raises
    ------
    NonRegressiveError
        If ``1 + mu lam = 0`` (the integrand is minus infinity).
    """
    mu_value = float(mu_value)
    if mu_value < 0:
        raise ValueError(f"graininess must be nonnegative, got {mu_value}")
    if mu_value == 0:
        return float(np.real(lam))
    z = abs(1 + mu_value * lam)
    if z == 0:
        raise NonRegressiveError(f"1 + mu*lam = 0 for mu={mu_value}, lam={lam}")
    return float(np.log(z) / mu_value)


def default_horizons(grid, t0=None, count=8):
    """``count`` grid times evenly spread over (t0, t_max], ending at t_max."""
    t0 = grid.t_min if t0 is None else float(t0)
    i0 = grid.index(t0)
    targets = t0 + (grid.t_max - t0) * np.arange(1, count + 1) / count
    idx = np.searchsorted(grid.times, targets + 1e-12 * np.maximum(1.0, np.abs(targets)),
                          side="right") - 1
    idx = np.unique(np.clip(idx, i0 + 1, len(grid) - 1))
    return grid.times[idx]


def _horizon_indices(grid, horizons, t0):
    i0 = grid.index(t0)
    if horizons is None:
        horizons = default_horizons(grid, t0)
    idx = grid.indices(horizons)
    if np.any(idx <= i0):
        raise ValueError("horizons must lie after t0")
    if np.any(np.diff(idx) <= 0):
        raise ValueError("horizons must be increasing")
    return i0, idx


def _verdict(tail_max, delta):
    if tail_max < -delta:
        return "inside"
    if tail_max > delta:
        return "outside"
    return "marginal"


@dataclass(frozen=True, eq=False)
class StabilityRegionQuery:
    """Averaged growth rate of ``e_lam`` over a horizon schedule.

    ``values[i]`` is ``(1 / (T_i - t0)) * integral_{t0}^{T_i}`` of the
    region integrand. The verdict compares the maximum over the later half
    of the schedule with the margin ``delta``.
    """

    lam: complex
    horizons: np.ndarray
    values: np.ndarray
    verdict: str
    delta: float
    tail_max: float
    t0: float
    regressive: bool = True

    @property
    def inside(self):
        return self.verdict == "inside"


def in_stability_region(grid, lam, horizons=None, delta=DELTA, t0=None):
    """Decide whether ``lam`` lies in the exponential-stability region of the grid."""
    t0 = grid.t_min if t0 is None else float(t0)
    i0, hidx = _horizon_indices(grid, horizons, t0)
    i1 = int(hidx[-1])
    lam = complex(lam)
    k = np.arange(i0, i1)
    scat = ~grid.dense[k] & (grid.mu[k] > 0)
    contrib = np.where(grid.dense[k], grid.step[k] * lam.real, 0.0)
    factors = np.abs(1.0 + grid.mu[k][scat] * lam)
    if np.any(factors == 0):
        return StabilityRegionQuery(lam, grid.times[hidx], np.full(len(hidx), -np.inf),
                                    "nonregressive", delta, -np.inf, t0, False)
    contrib[scat] = np.log(factors)
    cum = np.concatenate([[0.0], np.cumsum(contrib)])
    T = grid.times[hidx]
    values = cum[hidx - i0] / (T - t0)
    tail = values[len(values) // 2:]
    tail_max = float(np.max(tail))
    return StabilityRegionQuery(lam, T, values, _verdict(tail_max, delta), delta, tail_max, t0)


@dataclass(frozen=True, eq=False)
class SpectrumVerdict:
    verdict: str
    eigenvalues: np.ndarray
    queries: tuple
    definition: str = DEF_CLASSICAL_RATE

    @property
    def stable(self):
        return self.verdict == "stable"


def _eigenvalues(A):
    if isinstance(A, LinearSystem):
        A = A.constant("A")
    if np.asarray(A).dtype == object or is_rational_matrix(A):
        A = np.array(fraction_matrix(A).tolist(), dtype=float)
    return np.linalg.eigvals(np.asarray(A, dtype=float))


def exp_stable_spectrum(A, grid, horizons=None, delta=DELTA, t0=None):
    """Stable iff every eigenvalue of A is inside the stability region.

    Any marginal eigenvalue makes the verdict ``"marginal"``; any
    eigenvalue outside (or on the regressivity boundary) makes it
    ``"unstable"``. Certifies the classical-rate definition.
    """
    eig = _eigenvalues(A)
    qs = tuple(in_stability_region(grid, lam, horizons, delta, t0) for lam in eig)
    kinds = {q.verdict for q in qs}
    if kinds & {"outside", "nonregressive"}:
        v = "unstable"
    elif "marginal" in kinds:
        v = "marginal"
    else:
        v = "stable"
    return SpectrumVerdict(v, eig, qs)


@dataclass(frozen=True, eq=False)
class BoundEstimate:
    """Partial values of a stability integral over a horizon schedule.

    ``verdict`` is ``"converged"``, ``"divergent"`` or ``"inconclusive"``;
    ``estimate`` is the last partial value (the bound itself when
    converged).
    """

    kind: str
    horizons: np.ndarray
    partials: np.ndarray
    verdict: str
    estimate: float
    tail_estimate: float
    definition: str = ""
    note: str = ""

    @property
    def converged(self):
        return self.verdict == "converged"

    @property
    def divergent(self):
        return self.verdict == "divergent"


def _classify(partials, horizons):
    """Convergence verdict and geometric tail estimate of nondecreasing partials."""
    P = np.asarray(partials, dtype=float)
    if not np.all(np.isfinite(P)) or P[-1] > OVERFLOW:
        return "divergent", np.inf
    if P[-1] == 0:
        return "converged", 0.0
    if len(P) < 2:
        return "inconclusive", np.nan
    inc = np.diff(P)
    widths = np.diff(np.asarray(horizons, dtype=float))
    rates = inc / widths
    tail = np.nan
    if len(inc) >= 2 and inc[-2] > 0 and inc[-1] < inc[-2]:
        r = inc[-1] / inc[-2]
        tail = inc[-1] * r / (1 - r)
    if inc[-1] <= CONVERGED_RTOL * P[-1]:
        return "converged", 0.0 if np.isnan(tail) else tail
    if len(rates) > 1 and rates[-1] >= 0.5 * np.max(rates[:-1]):
        return "divergent", np.inf
    return "inconclusive", tail


def _norms(X):
    """Spectral norms of a stack of matrices (vector norms for thin shapes)."""
    if X.shape[-1] == 1 or X.shape[-2] == 1:
        return np.sqrt(np.sum(np.abs(X) ** 2, axis=(-2, -1)))
    return np.linalg.norm(X, 2, axis=(-2, -1))


def _propagated_norms(sys, grid, i0, i1, left=None, right=None):
    """``||left Phi(t_k, t_i0) right||`` at nodes i0..i1."""
    steps = _steps(sys, grid, i0, i1)
    n = sys.n
    X = np.eye(n) if right is None else np.asarray(right, dtype=float)
    out = np.empty((i1 - i0 + 1,) + X.shape)
    out[0] = X
    for j, M in enumerate(steps):
        X = M @ X
        out[j + 1] = X
        if not np.all(np.isfinite(X)) or np.abs(X).max() > 1e150:
            out[j + 2:] = np.inf
            break
    if left is not None:
        out = np.matmul(left, out)
    with np.errstate(invalid="ignore", over="ignore"):
        return _norms(out)


def _partials(grid, i0, hidx, vals):
    """Delta integrals of node samples ``vals`` (integrand at t) over [t0, T_i)."""
    k = np.arange(i0, int(hidx[-1]))
    with np.errstate(invalid="ignore", over="ignore"):
        step_c = np.where(grid.dense[k], 0.5 * grid.step[k] * (vals[:-1] + vals[1:]),
                          grid.mu[k] * vals[:-1])
    cum = np.concatenate([[0.0], np.cumsum(step_c)])
    return cum[hidx - i0]


def exp_stable_integral(sys, grid, horizons=None, t0=None):
    """Partial values of ``integral_{t0}^{T} ||Phi(t, t0)|| Delta t`` over the horizons.

    Converged when the last increment is below 1e-6 of the current value;
    divergent when values overflow or the increment rate is not decaying.
    Certifies the time-scale-rate definition.
    """
    if not isinstance(sys, LinearSystem):
        sys = LinearSystem(sys, np.zeros((np.asarray(sys).shape[0], 1)))
    t0 = grid.t_min if t0 is None else float(t0)
    i0, hidx = _horizon_indices(grid, horizons, t0)
    vals = _propagated_norms(sys, grid, i0, int(hidx[-1]))
    P = _partials(grid, i0, hidx, vals)
    verdict, tail = _classify(P, grid.times[hidx])
    return BoundEstimate("exp_integral", grid.times[hidx], P, verdict,
                         float(P[-1]), float(tail), DEF_TIME_SCALE_RATE)


def f_sequence(grid, lam, t, jmax=3, t0=None):
    """Residue functions f_0..f_jmax at t (jmax <= 3).

    With ``I1 = integral 1/(1+mu lam)``, ``I2 = integral mu/(1+mu lam)^2`` and
    ``I3 = integral 2 mu^2/(1+mu lam)^3`` over [t0, t):
    ``f_0 = 1``, ``f_1 = I1``, ``f_2 = I1^2 - I2``, ``f_3 = I1^3 - 3 I2 I1 + I3``.
    """
    if jmax > 3:
        raise ValueError("residue functions are available for j <= 3 only")
    t0 = grid.t_min if t0 is None else float(t0)
    i0, i1 = grid.index(t0), grid.index(t)
    if i1 < i0:
        raise ValueError(f"need t >= t0, got t={t}, t0={t0}")
    k = np.arange(i0, i1)
    mu = grid.mu[k]
    w = np.where(grid.dense[k], grid.step[k], mu)
    d = 1.0 + mu * lam
    if np.any(d == 0):
        raise NonRegressiveError(f"1 + mu*lam = 0 for lam={lam}")
    I1 = np.sum(w / d)
    I2 = np.sum(mu * w / d ** 2)
    I3 = np.sum(2 * mu ** 2 * w / d ** 3)
    f = [1.0 + 0 * I1, I1, I1 ** 2 - I2, I1 ** 3 - 3 * I2 * I1 + I3]
    return f[:jmax + 1]


def spectral_exponential(A, grid, t, t0=None, pf=None):
    """``e_A(t, t0)`` from the resolvent partial fractions.

    ``sum_k sum_j W_kj f_{j-1}(mu, lam_k) / (j-1)! e_{lam_k}(t, t0)``; each
    multiplicity must be at most 4.
    """
    t0 = grid.t_min if t0 is None else float(t0)
    if pf is None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            pf = partial_fractions(A)
    if max(pf.multiplicities) > 4:
        raise ValueError("eigenvalue multiplicity above 4 is not supported")
    n = pf.W[0][0].shape[0]
    out = np.zeros((n, n), dtype=complex)
    for lam, psi, Wk in zip(pf.eigenvalues, pf.multiplicities, pf.W):
        f = f_sequence(grid, lam, t, psi - 1, t0)
        e = scalar_exp(grid, lam, t, t0)
        for j in range(1, psi + 1):
            out += Wk[j - 1] * (f[j - 1] / factorial(j - 1) * e)
    if np.abs(out.imag).max() <= 1e-9 * max(1.0, np.abs(out).max()):
        return out.real
    return out


def bibo_tv_integral(sys, grid, horizons=None, t0=None, max_full=TV_FULL_LIMIT):
    """Running sup over t of ``integral_{t0}^{t} ||G(t, sigma(s))|| Delta s``.

    The integrand is nonnegative, so for each t the supremum over the lower
    limit is attained at t0 and the double family reduces to one integral
    per t. Every node is evaluated when the window has at most ``max_full``
    nodes; otherwise a stratified sample of ``max_full`` nodes is used and
    the neighbourhood of the largest value is then evaluated in full.
    """
    t0 = grid.t_min if t0 is None else float(t0)
    i0, hidx = _horizon_indices(grid, horizons, t0)
    i1 = int(hidx[-1])
    N = i1 - i0 + 1
    if N <= max_full:
        sample = np.arange(i0, i1 + 1)
        note = "all nodes"
    else:
        sample = np.unique(np.concatenate([np.linspace(i0, i1, max_full).round().astype(int),
                                           hidx]))
        note = f"stratified sample of {len(sample)} of {N} nodes, refined at the maximum"
    vals = _tv_integrals(sys, grid, i0, sample)
    if N > max_full:
        best = int(sample[np.nanargmax(np.where(np.isfinite(vals), vals, -1))])
        stride = int(np.ceil(N / max_full))
        extra = np.setdiff1d(np.arange(max(i0, best - stride), min(i1, best + stride) + 1), sample)
        if extra.size:
            sample = np.concatenate([sample, extra])
            vals = np.concatenate([vals, _tv_integrals(sys, grid, i0, extra)])
            order = np.argsort(sample)
            sample, vals = sample[order], vals[order]
    running = np.maximum.accumulate(np.where(np.isnan(vals), np.inf, vals))
    pos = np.searchsorted(sample, hidx, side="right") - 1
    rho = running[pos]
    T = grid.times[hidx]
    if not np.all(np.isfinite(rho)) or rho[-1] > OVERFLOW:
        verdict = "divergent"
    elif rho[-1] == 0 or (len(rho) > 1 and rho[-1] - rho[-2] <= CONVERGED_RTOL * rho[-1]):
        verdict = "converged"
    else:
        verdict, _ = _classify(rho, T)
        verdict = "divergent" if verdict == "divergent" else "inconclusive"
    return BoundEstimate("bibo_tv", T, rho, verdict, float(rho[-1]), np.nan,
                         "", note)


def _tv_integrals(sys, grid, i0, sample):
    """``integral_{t0}^{t_k} ||C(t_k) Phi(t_k, sigma(s)) B(s)|| Delta s`` for k in sample.

    Sweeps s backward from the last sample; at each node the rows
    ``C(t_k) Phi(t_k, s)`` of every sample k >= s advance by one step.
    """
    sample = np.sort(np.asarray(sample, dtype=int))
    K = len(sample)
    kmax = int(sample[-1])
    p, n = sys.p, sys.n
    steps = _steps(sys, grid, i0, kmax)
    times = grid.times
    Bs = np.array([sys.B(float(times[j])) for j in range(i0, kmax + 1)])
    W = np.zeros((K, p, n))
    total = np.zeros(K)
    start = K  # samples[start:] are active (k >= j)
    with np.errstate(over="ignore", invalid="ignore"):
        for j in range(kmax, i0 - 1, -1):
            while start > 0 and sample[start - 1] == j:
                start -= 1
                W[start] = sys.C(float(times[j]))
            if start == K:
                continue
            Wa = W[start:]
            left = 0.5 * grid.step[j - 1] if j - 1 >= i0 and grid.dense[j - 1] else 0.0
            right = 0.5 * grid.step[j] if grid.dense[j] else 0.0
            if left or right:
                nrm = _norms(np.matmul(Wa, Bs[j - i0]))
                total[start:] += (left + right) * nrm
                if sample[start] == j:
                    # the step to the right of node j lies outside the window of t_j
                    total[start] -= right * nrm[0]
            if j - 1 >= i0:
                if not grid.dense[j - 1] and grid.mu[j - 1] > 0:
                    total[start:] += grid.mu[j - 1] * _norms(np.matmul(Wa, Bs[j - 1 - i0]))
                W[start:] = np.matmul(Wa, steps[j - 1 - i0])
    total[~np.isfinite(total)] = np.inf
    return total


@dataclass(frozen=True, eq=False)
class BIBOVerdict:
    """Two-route BIBO verdict for a time-invariant system.

    ``verdict`` follows the integral route, which is authoritative; the
    pole route is reported alongside and ``agree`` records whether they
    match; it is None when either route is undecided.
    """

    verdict: str
    integral: BoundEstimate
    poles: np.ndarray
    pole_queries: tuple
    pole_verdict: str
    agree: bool
    minimal: bool
    warnings: tuple = ()


def _ti_parts(sys_or_G):
    """(LinearSystem, RationalMatrix or None, minimal flag or None)."""
    if isinstance(sys_or_G, (RationalMatrix, RationalFn, str)):
        G = sys_or_G if isinstance(sys_or_G, RationalMatrix) else RationalMatrix.parse(
            sys_or_G if isinstance(sys_or_G, str) else [[sys_or_G]])
        R = companion_realization(G)
        return R.to_system(), G, bool(is_minimal(R))
    if isinstance(sys_or_G, Realization):
        R = sys_or_G
        return R.to_system(), transfer_function(R), bool(is_minimal(R))
    sys = sys_or_G
    if not sys.time_invariant:
        raise ValueError("BIBO test by poles needs a time-invariant system")
    if sys.exact is not None:
        R = Realization(sys.exact["A"], sys.exact["B"], sys.exact["C"])
    else:
        R = Realization(sys.constant("A"), sys.constant("B"), sys.constant("C"))
    return sys, transfer_function(R), bool(is_minimal(sys))


def bibo_ti(sys_or_G, grid, horizons=None, delta=DELTA, t0=None):
    """BIBO stability of a time-invariant system by two routes.

    (i) partial values of ``integral ||C e_A(t, t0) B|| Delta t``;
    (ii) location of the poles of the exactly reduced transfer function in
    the stability region. The routes agree for minimal realizations; for a
    non-minimal one a warning notes that cancelled poles are invisible to
    route (ii).
    """
    sys, G, minimal = _ti_parts(sys_or_G)
    t0 = grid.t_min if t0 is None else float(t0)
    i0, hidx = _horizon_indices(grid, horizons, t0)
    Cm = sys.constant("C")
    vals = _propagated_norms(sys, grid, i0, int(hidx[-1]), Cm, sys.constant("B"))
    P = _partials(grid, i0, hidx, vals)
    v, tail = _classify(P, grid.times[hidx])
    integral = BoundEstimate("bibo_ti", grid.times[hidx], P, v, float(P[-1]), float(tail))

    poles = G.poles()
    qs = tuple(in_stability_region(grid, lam, horizons, delta, t0) for lam in poles)
    kinds = {q.verdict for q in qs}
    if kinds & {"outside", "nonregressive"}:
        pv = "unstable"
    elif "marginal" in kinds:
        pv = "marginal"
    else:
        pv = "stable"
    iv = {"converged": "stable", "divergent": "unstable"}.get(v, "inconclusive")
    notes = []
    if not minimal:
        notes.append("realization is not minimal: pole cancellation may hide unstable "
                     "modes from the pole test; the integral route is authoritative")
    comparable = iv != "inconclusive" and pv != "marginal"
    agree = (iv == pv) if comparable else None
    return BIBOVerdict(iv, integral, poles, qs, pv, agree, minimal, tuple(notes))
