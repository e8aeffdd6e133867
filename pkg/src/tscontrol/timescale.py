"""Finite computational time scales and the forward (delta) calculus.

A time scale is entered as an ordered list of segments. Each segment is
either a continuous interval ``[a, b]`` sampled with a quadrature step
``h``, or a run of isolated points. The resulting :class:`TimeScaleGrid`
is a bounded window of the conceptual time scale; every analysis in the
package takes its times from a grid.

Dense nodes (nodes inside a continuous interval) report a graininess of
zero even though the computational spacing is ``h``. The right end of an
interval that is followed by a gap is right-scattered, with graininess
equal to the gap.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from math import ceil
from typing import Union

import numpy as np

__all__ = [
    "TimeScaleError",
    "ContinuousInterval",
    "DiscretePoints",
    "GridPoint",
    "TimeScaleGrid",
    "build_grid",
    "parse_timescale_spec",
    "format_timescale_spec",
    "integer_grid",
    "continuous_grid",
    "periodic_grid",
    "sigma",
    "mu",
    "delta_integral",
    "delta_derivative",
]


class TimeScaleError(ValueError):
    """Invalid time-scale description or a time that is not on the grid."""


@dataclass(frozen=True)
class ContinuousInterval:
    a: float
    b: float
    h: float

    def __post_init__(self):
        if not self.b > self.a:
            raise TimeScaleError(f"interval needs b > a, got [{self.a}, {self.b}]")
        if not self.h > 0:
            raise TimeScaleError(f"nonpositive step h={self.h}")
        if self.h > self.b - self.a:
            raise TimeScaleError(f"step h={self.h} exceeds interval length {self.b - self.a}")

    @property
    def start(self):
        return self.a

    @property
    def end(self):
        return self.b

    def nodes(self):
        n = max(1, ceil((self.b - self.a) / self.h - 1e-9))
        pts = self.a + (self.b - self.a) * np.arange(n + 1) / n
        pts[-1] = self.b
        return pts


@dataclass(frozen=True)
class DiscretePoints:
    times: tuple

    def __init__(self, times):
        object.__setattr__(self, "times", tuple(float(t) for t in times))
        if not self.times:
            raise TimeScaleError("empty point run")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise TimeScaleError("point run must be strictly increasing")

    @property
    def start(self):
        return self.times[0]

    @property
    def end(self):
        return self.times[-1]

    def nodes(self):
        return np.array(self.times, dtype=float)


Segment = Union[ContinuousInterval, DiscretePoints]


@dataclass(frozen=True)
class GridPoint:
    """A grid node together with its scattered/dense classification."""

    t: float
    right_scattered: bool
    mu: float
    index: int


@dataclass(frozen=True, eq=False)
class TimeScaleGrid:
    """Immutable, validated grid realizing a bounded window of a time scale.

    Attributes
    ----------
    times : ndarray, shape (N,)
        All computational nodes in increasing order.
    mu : ndarray, shape (N,)
        Graininess at each node (0 at right-dense nodes and at the final node).
    step : ndarray, shape (N,)
        Distance to the next node (0 for the final node).
    dense : ndarray of bool, shape (N,)
        True where the step to the next node is a quadrature step inside a
        continuous interval.
    """

    segments: tuple
    times: np.ndarray = field(repr=False)
    mu: np.ndarray = field(repr=False)
    step: np.ndarray = field(repr=False)
    dense: np.ndarray = field(repr=False)

    @property
    def t_min(self):
        return float(self.times[0])

    @property
    def t_max(self):
        return float(self.times[-1])

    @property
    def mu_max(self):
        return float(self.mu.max())

    @property
    def size(self):
        return len(self.times)

    @property
    def is_discrete(self):
        return not self.dense.any()

    @property
    def ends_dense(self):
        return isinstance(self.segments[-1], ContinuousInterval)

    def __len__(self):
        return len(self.times)

    def index(self, t):
        """Index of the grid node equal to ``t`` (tolerance 1e-12*max(1,|t|))."""
        t = float(t)
        tol = 1e-12 * max(1.0, abs(t))
        k = int(np.searchsorted(self.times, t - tol))
        if k < len(self.times) and abs(self.times[k] - t) <= tol:
            return k
        raise TimeScaleError(f"t={t!r} is not a grid point")

    def indices(self, ts):
        """Vectorized :meth:`index`; raises if any time is off the grid."""
        ts = np.asarray(ts, dtype=float).reshape(-1)
        tol = 1e-12 * np.maximum(1.0, np.abs(ts))
        k = np.minimum(np.searchsorted(self.times, ts - tol), len(self.times) - 1)
        bad = np.abs(self.times[k] - ts) > tol
        if bad.any():
            raise TimeScaleError(f"t={float(ts[bad][0])!r} is not a grid point")
        return k

    def point(self, t):
        k = self.index(t)
        return GridPoint(float(self.times[k]), bool(self.is_scattered(k)), float(self.mu[k]), k)

    def is_scattered(self, k):
        return self.mu[k] > 0

    def sigma_index(self, k):
        """Index of the node reached by one computational step from node k."""
        if k >= len(self.times) - 1:
            raise TimeScaleError(f"t={self.times[k]!r} is the final grid point; no successor")
        return k + 1

    def nodes_between(self, a, b):
        """Grid nodes in the closed window [a, b]."""
        i0, i1 = self.index(a), self.index(b)
        return self.times[i0:i1 + 1]

    def weights(self, i0, i1):
        """Quadrature weights for a delta integral over [times[i0], times[i1]).

        Returns ``(ws, wd)``, arrays of length ``i1 - i0 + 1``. ``ws[k]`` is
        the graininess weight of a right-scattered node, applied to the
        integrand evaluated with ``sigma(t)`` equal to the next node. ``wd[k]``
        is the trapezoid weight of node k from the dense steps in range,
        applied to the integrand evaluated with ``sigma(t) = t``.
        """
        n = i1 - i0 + 1
        ws = np.zeros(n)
        wd = np.zeros(n)
        for k in range(i0, i1):
            j = k - i0
            if self.dense[k]:
                half = 0.5 * self.step[k]
                wd[j] += half
                wd[j + 1] += half
            else:
                ws[j] = self.mu[k]
        return ws, wd


def _validate(segments):
    if not segments:
        raise TimeScaleError("empty time-scale spec")
    for prev, nxt in zip(segments, segments[1:]):
        if not nxt.start > prev.end:
            raise TimeScaleError(
                f"segments overlap or touch: {prev.end} is not before {nxt.start}")


def build_grid(spec):
    """Build a validated :class:`TimeScaleGrid` from a list of segments.

    ``spec`` may also be text in the ``interval a b h`` / ``points ...``
    format accepted by :func:`parse_timescale_spec`.
    """
    if isinstance(spec, str):
        spec = parse_timescale_spec(spec)
    segments = tuple(spec)
    _validate(segments)

    times, dense = [], []
    for seg in segments:
        pts = seg.nodes()
        times.append(pts)
        d = np.zeros(len(pts), dtype=bool)
        if isinstance(seg, ContinuousInterval):
            d[:-1] = True
        dense.append(d)
    times = np.concatenate(times)
    dense = np.concatenate(dense)

    step = np.zeros_like(times)
    step[:-1] = np.diff(times)
    mu = np.where(dense, 0.0, step)
    mu[-1] = 0.0
    dense[-1] = False
    for arr in (times, mu, step, dense):
        arr.flags.writeable = False
    return TimeScaleGrid(segments, times, mu, step, dense)


def _num(s):
    return float(Fraction(s))


def parse_timescale_spec(text):
    """Parse ``interval a b h`` / ``points t1 ... tk`` entries.

    Entries are separated by newlines or semicolons; ``#`` starts a comment.
    """
    segments = []
    entries = []
    for line in text.splitlines():
        line = line.split("#", 1)[0]
        entries.extend(e.strip() for e in line.split(";"))
    for lineno, entry in enumerate((e for e in entries if e), start=1):
        kind, *args = entry.split()
        try:
            if kind == "interval":
                if len(args) != 3:
                    raise TimeScaleError(f"entry {lineno}: 'interval' takes a b h")
                segments.append(ContinuousInterval(*map(_num, args)))
            elif kind == "points":
                segments.append(DiscretePoints([_num(a) for a in args]))
            else:
                raise TimeScaleError(f"entry {lineno}: unknown segment kind {kind!r}")
        except (ValueError, ZeroDivisionError) as exc:
            if isinstance(exc, TimeScaleError):
                raise
            raise TimeScaleError(f"entry {lineno}: {exc}") from exc
    return segments


def format_timescale_spec(segments):
    out = []
    for seg in segments:
        if isinstance(seg, ContinuousInterval):
            out.append(f"interval {seg.a!r} {seg.b!r} {seg.h!r}")
        else:
            out.append("points " + " ".join(repr(t) for t in seg.times))
    return "\n".join(out)


def integer_grid(a, b, step=1):
    """Points a, a+step, ..., b (the lattice step*Z restricted to [a, b])."""
    n = int(round((b - a) / step))
    return build_grid([DiscretePoints(a + step * np.arange(n + 1))])


def continuous_grid(a, b, h):
    return build_grid([ContinuousInterval(a, b, h)])


def periodic_grid(pattern, period, count):
    """Repeat a segment pattern living in [0, period) ``count`` times."""
    segments = []
    for k in range(count):
        off = k * period
        for seg in pattern:
            if isinstance(seg, ContinuousInterval):
                segments.append(ContinuousInterval(seg.a + off, seg.b + off, seg.h))
            else:
                segments.append(DiscretePoints([t + off for t in seg.times]))
    return build_grid(segments)


def sigma(grid, t):
    """Forward jump: the next point if t is right-scattered, else t itself."""
    k = grid.index(t)
    if k == len(grid) - 1:
        raise TimeScaleError(f"t={t!r} is the final grid point; sigma is outside the window")
    if grid.is_scattered(k):
        return float(grid.times[k + 1])
    return float(grid.times[k])


def mu(grid, t):
    return float(grid.mu[grid.index(t)])


def _sampler(grid, f):
    if callable(f):
        return lambda k: np.asarray(f(float(grid.times[k])))
    arr = np.asarray(f)
    if arr.shape[0] != len(grid):
        raise TimeScaleError(f"sample array has {arr.shape[0]} rows, grid has {len(grid)} nodes")
    return lambda k: arr[k]


def delta_integral(grid, f, a, b):
    """Delta integral of ``f`` over [a, b).

    ``f`` is a callable of t or an array of samples aligned with the grid
    nodes. Right-scattered nodes contribute ``f(t) * mu(t)`` exactly; dense
    steps use the trapezoid rule.
    """
    i0, i1 = grid.index(a), grid.index(b)
    if i0 > i1:
        raise TimeScaleError(f"delta_integral needs a <= b, got a={a}, b={b}")
    val = _sampler(grid, f)
    if i0 == i1:
        return np.zeros_like(val(i0)) if np.ndim(val(i0)) else 0.0
    total = 0.0
    for k in range(i0, i1):
        if grid.dense[k]:
            total = total + (val(k) + val(k + 1)) * (0.5 * grid.step[k])
        else:
            total = total + val(k) * grid.mu[k]
    return total


def delta_derivative(grid, f, t):
    """Delta derivative of ``f`` at grid point t.

    Forward difference quotient over mu at right-scattered points; central
    difference in the interior of a continuous interval, one-sided at its
    left end.
    """
    k = grid.index(t)
    if k == len(grid) - 1:
        raise TimeScaleError(f"t={t!r} is the final grid point; no delta derivative")
    val = _sampler(grid, f)
    if grid.dense[k] and k > 0 and grid.dense[k - 1]:
        return (val(k + 1) - val(k - 1)) / (grid.times[k + 1] - grid.times[k - 1])
    return (val(k + 1) - val(k)) / grid.step[k]
