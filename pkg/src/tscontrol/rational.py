"""Exact polynomials, rational functions and rational matrices over Q.

Coefficients are ``fractions.Fraction`` and polynomials are stored in
ascending degree. Matrices of exact entries are numpy object arrays of
``Fraction``; the helpers at the end of the module (rank, determinant,
inverse, characteristic polynomial and adjugate) work on those arrays
without ever rounding.
"""

from fractions import Fraction
from numbers import Rational

import numpy as np

__all__ = [
    "Poly",
    "RationalFn",
    "RationalMatrix",
    "poly_gcd",
    "poly_lcm",
    "squarefree_factors",
    "to_fraction",
    "fraction_matrix",
    "is_rational_matrix",
    "exact_rank",
    "exact_det",
    "exact_inverse",
    "charpoly_adjugate",
]


def to_fraction(x):
    """Exact conversion of an int, Fraction, float or ``"p/q"`` string."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, (float, np.floating)):
        if not np.isfinite(x):
            raise ValueError(f"non-finite value {x!r}")
        return Fraction(float(x))
    if isinstance(x, np.integer):
        return Fraction(int(x))
    raise TypeError(f"cannot convert {type(x).__name__} to an exact rational")


class Poly:
    """Polynomial with exact rational coefficients, ascending degree."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs=()):
        if isinstance(coeffs, (int, Fraction, str)):
            coeffs = [coeffs]
        c = [to_fraction(x) for x in coeffs]
        while c and c[-1] == 0:
            c.pop()
        self.coeffs = tuple(c)

    @classmethod
    def monomial(cls, k, coef=1):
        return cls([0] * k + [coef])

    @classmethod
    def from_roots(cls, roots):
        p = cls([1])
        for r in roots:
            p = p * cls([-to_fraction(r), 1])
        return p

    @property
    def degree(self):
        """Degree; -1 for the zero polynomial."""
        return len(self.coeffs) - 1

    def is_zero(self):
        return not self.coeffs

    @property
    def lead(self):
        return self.coeffs[-1] if self.coeffs else Fraction(0)

    def monic(self):
        if self.is_zero():
            raise ZeroDivisionError("zero polynomial has no monic normalization")
        lc = self.lead
        return Poly([c / lc for c in self.coeffs])

    def __eq__(self, other):
        if not isinstance(other, Poly):
            try:
                other = Poly(other)
            except TypeError:
                return NotImplemented
        return self.coeffs == other.coeffs

    def __hash__(self):
        return hash(self.coeffs)

    def __add__(self, other):
        other = _as_poly(other)
        a, b = self.coeffs, other.coeffs
        if len(a) < len(b):
            a, b = b, a
        return Poly([x + (b[i] if i < len(b) else 0) for i, x in enumerate(a)])

    __radd__ = __add__

    def __neg__(self):
        return Poly([-c for c in self.coeffs])

    def __sub__(self, other):
        return self + (-_as_poly(other))

    def __rsub__(self, other):
        return _as_poly(other) - self

    def __mul__(self, other):
        other = _as_poly(other)
        if self.is_zero() or other.is_zero():
            return Poly()
        out = [Fraction(0)] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if a == 0:
                continue
            for j, b in enumerate(other.coeffs):
                out[i + j] += a * b
        return Poly(out)

    __rmul__ = __mul__

    def __pow__(self, k):
        out = Poly([1])
        for _ in range(int(k)):
            out = out * self
        return out

    def __divmod__(self, other):
        other = _as_poly(other)
        if other.is_zero():
            raise ZeroDivisionError("polynomial division by zero")
        rem = list(self.coeffs)
        dq = other.degree
        q = [Fraction(0)] * max(len(rem) - dq, 0)
        lc = other.lead
        for k in range(len(rem) - 1, dq - 1, -1):
            c = rem[k] / lc
            q[k - dq] = c
            if c:
                for j, b in enumerate(other.coeffs):
                    rem[k - dq + j] -= c * b
        return Poly(q), Poly(rem[:dq] if dq > 0 else [])

    def __floordiv__(self, other):
        return divmod(self, other)[0]

    def __mod__(self, other):
        return divmod(self, other)[1]

    def exact_div(self, other):
        q, r = divmod(self, other)
        if not r.is_zero():
            raise ArithmeticError("polynomial division leaves a remainder")
        return q

    def __call__(self, z):
        """Horner evaluation; exact for rational z, floating for float/complex z."""
        if isinstance(z, (int, Fraction)):
            acc = Fraction(0)
            coeffs = self.coeffs
        else:
            acc = 0.0 * z
            coeffs = [float(c) for c in self.coeffs]
        for c in reversed(coeffs):
            acc = acc * z + c
        return acc

    def derivative(self):
        return Poly([k * c for k, c in enumerate(self.coeffs)][1:])

    def shift(self, a):
        """Coefficients of p(a + w) in ascending powers of w (Taylor at a)."""
        c = [complex(x) for x in self.coeffs] if isinstance(a, complex) else list(self.coeffs)
        if not isinstance(a, (int, Fraction, complex)):
            c = [float(x) for x in c]
        n = len(c)
        for i in range(n):
            for k in range(n - 2, i - 1, -1):
                c[k] = c[k] + a * c[k + 1]
        return c

    def roots(self):
        """Complex roots from the companion-matrix eigenvalues (floating point)."""
        if self.degree < 1:
            return np.zeros(0, dtype=complex)
        return np.roots([float(c) for c in reversed(self.coeffs)]).astype(complex)

    def float_coeffs(self):
        return np.array([float(c) for c in self.coeffs])

    def to_text(self):
        return ",".join(_fmt(c) for c in self.coeffs) if self.coeffs else "0"

    def __repr__(self):
        return f"Poly([{self.to_text()}])"

    def __str__(self):
        if self.is_zero():
            return "0"
        terms = []
        for k, c in enumerate(self.coeffs):
            if c == 0:
                continue
            mono = "" if k == 0 else ("z" if k == 1 else f"z^{k}")
            coef = _fmt(c)
            if mono and c == 1:
                coef = ""
            elif mono and c == -1:
                coef = "-"
            elif mono:
                coef = f"({coef})" if "/" in coef or c < 0 else coef
                coef += "*"
            terms.append(coef + mono)
        return " + ".join(terms)


def _fmt(c):
    c = Fraction(c)
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def _as_poly(x):
    return x if isinstance(x, Poly) else Poly([x])


def _poly_arg(x):
    return Poly(x) if isinstance(x, (list, tuple)) else _as_poly(x)


def poly_gcd(a, b):
    """Monic greatest common divisor (zero if both are zero)."""
    a, b = _as_poly(a), _as_poly(b)
    while not b.is_zero():
        a, b = b, a % b
    return a.monic() if not a.is_zero() else a


def poly_lcm(*polys):
    out = Poly([1])
    for p in polys:
        p = _as_poly(p)
        if p.is_zero():
            raise ZeroDivisionError("lcm with the zero polynomial")
        out = (out * p).exact_div(poly_gcd(out, p))
    return out.monic()


def squarefree_factors(f):
    """Yun's square-free factorization of a nonconstant polynomial.

    Returns ``[(a_i, i), ...]`` with monic, pairwise coprime, square-free
    ``a_i`` such that ``f = lead(f) * prod a_i**i``; constant factors are
    omitted.
    """
    f = _as_poly(f)
    if f.degree < 1:
        return []
    f = f.monic()
    df = f.derivative()
    a0 = poly_gcd(f, df)
    b = f.exact_div(a0)
    c = df.exact_div(a0)
    d = c - b.derivative()
    out = []
    i = 1
    while b.degree > 0:
        a = poly_gcd(b, d)
        b = b.exact_div(a)
        c = d.exact_div(a)
        d = c - b.derivative()
        if a.degree > 0:
            out.append((a, i))
        i += 1
    return out


class RationalFn:
    """Reduced rational function num/den with a monic denominator."""

    __slots__ = ("num", "den")

    def __init__(self, num, den=1):
        num, den = _poly_arg(num), _poly_arg(den)
        if den.is_zero():
            raise ZeroDivisionError("rational function with zero denominator")
        if num.is_zero():
            num, den = Poly(), Poly([1])
        else:
            g = poly_gcd(num, den)
            num, den = num.exact_div(g), den.exact_div(g)
            lc = den.lead
            num = Poly([c / lc for c in num.coeffs])
            den = den.monic()
        self.num, self.den = num, den

    @classmethod
    def parse(cls, text):
        """Parse ``"n0,n1,... / d0,d1,..."`` (ascending coefficients)."""
        parts = text.split("/")
        # coefficients may themselves be fractions "a/b": split on the spaced slash
        if " / " in text:
            num_s, den_s = text.split(" / ", 1)
        elif len(parts) == 2:
            num_s, den_s = parts
        elif len(parts) == 1:
            num_s, den_s = parts[0], "1"
        else:
            raise ValueError(f"ambiguous rational function {text!r}; separate num and den with ' / '")
        num = [c for c in num_s.replace(" ", "").split(",") if c != ""]
        den = [c for c in den_s.replace(" ", "").split(",") if c != ""]
        if not num or not den:
            raise ValueError(f"empty coefficient list in {text!r}")
        return cls(Poly([Fraction(c) for c in num]), Poly([Fraction(c) for c in den]))

    def to_text(self):
        return f"{self.num.to_text()} / {self.den.to_text()}"

    def is_zero(self):
        return self.num.is_zero()

    def is_strictly_proper(self):
        return self.is_zero() or self.num.degree < self.den.degree

    def __eq__(self, other):
        if not isinstance(other, RationalFn):
            other = RationalFn(other)
        return self.num == other.num and self.den == other.den

    def __hash__(self):
        return hash((self.num, self.den))

    def __add__(self, other):
        other = other if isinstance(other, RationalFn) else RationalFn(other)
        return RationalFn(self.num * other.den + other.num * self.den, self.den * other.den)

    __radd__ = __add__

    def __neg__(self):
        return RationalFn(-self.num, self.den)

    def __sub__(self, other):
        other = other if isinstance(other, RationalFn) else RationalFn(other)
        return self + (-other)

    def __mul__(self, other):
        other = other if isinstance(other, RationalFn) else RationalFn(other)
        return RationalFn(self.num * other.num, self.den * other.den)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = other if isinstance(other, RationalFn) else RationalFn(other)
        if other.is_zero():
            raise ZeroDivisionError("division by the zero rational function")
        return RationalFn(self.num * other.den, self.den * other.num)

    def __call__(self, z):
        return self.num(z) / self.den(z)

    def poles(self):
        return self.den.roots()

    def __repr__(self):
        return f"RationalFn({self.to_text()!r})"

    def __str__(self):
        return f"({self.num}) / ({self.den})"


class RationalMatrix:
    """A p x q matrix of :class:`RationalFn` entries."""

    __slots__ = ("entries",)

    def __init__(self, entries):
        rows = []
        for row in entries:
            if isinstance(row, (RationalFn, str, int, Fraction, Poly)):
                row = [row]
            rows.append(tuple(_as_rfn(e) for e in row))
        if not rows or not rows[0]:
            raise ValueError("empty rational matrix")
        if any(len(r) != len(rows[0]) for r in rows):
            raise ValueError("ragged rational matrix")
        self.entries = tuple(rows)

    @classmethod
    def parse(cls, rows):
        """Rows of ``"num / den"`` strings (see :meth:`RationalFn.parse`)."""
        if isinstance(rows, str):
            rows = [[rows]]
        return cls([[RationalFn.parse(e) if isinstance(e, str) else e for e in row]
                    for row in rows])

    @property
    def shape(self):
        return len(self.entries), len(self.entries[0])

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]

    def __eq__(self, other):
        if not isinstance(other, RationalMatrix):
            return NotImplemented
        return self.entries == other.entries

    def __hash__(self):
        return hash(self.entries)

    def is_strictly_proper(self):
        return all(e.is_strictly_proper() for row in self.entries for e in row)

    def denominator_lcm(self):
        return poly_lcm(*(e.den for row in self.entries for e in row))

    def poles(self):
        """Roots of the lcm of the reduced entry denominators."""
        return self.denominator_lcm().roots()

    def __call__(self, z):
        return np.array([[e(z) for e in row] for row in self.entries])

    def to_text(self):
        return [[e.to_text() for e in row] for row in self.entries]

    def __repr__(self):
        return f"RationalMatrix({self.to_text()!r})"


def _as_rfn(e):
    if isinstance(e, RationalFn):
        return e
    if isinstance(e, str):
        return RationalFn.parse(e)
    return RationalFn(e)


# ---------------------------------------------------------------- exact matrices

def is_rational_matrix(M):
    arr = np.asarray(M, dtype=object)
    return arr.size > 0 and all(
        isinstance(x, (int, Fraction, np.integer)) and not isinstance(x, bool) for x in arr.flat)


def fraction_matrix(M):
    """2-D object array of Fractions (a 1-D input becomes a column)."""
    arr = np.array(M, dtype=object)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    out = np.empty(arr.shape, dtype=object)
    for idx, x in np.ndenumerate(arr):
        out[idx] = to_fraction(x)
    return out


def _echelon(M):
    """Row echelon form by exact Gaussian elimination; returns (rows, rank, sign)."""
    R = [list(r) for r in np.asarray(M, dtype=object)]
    nrows = len(R)
    ncols = len(R[0]) if nrows else 0
    rank, sign = 0, 1
    for col in range(ncols):
        piv = next((r for r in range(rank, nrows) if R[r][col] != 0), None)
        if piv is None:
            continue
        if piv != rank:
            R[rank], R[piv] = R[piv], R[rank]
            sign = -sign
        p = R[rank][col]
        for r in range(rank + 1, nrows):
            f = R[r][col]
            if f:
                f = f / p
                R[r] = [a - f * b for a, b in zip(R[r], R[rank])]
        rank += 1
        if rank == nrows:
            break
    return R, rank, sign


def exact_rank(M):
    M = fraction_matrix(M)
    if M.size == 0:
        return 0
    return _echelon(M)[1]


def exact_det(M):
    M = fraction_matrix(M)
    n = M.shape[0]
    if M.shape != (n, n):
        raise ValueError("determinant of a non-square matrix")
    R, rank, sign = _echelon(M)
    if rank < n:
        return Fraction(0)
    d = Fraction(sign)
    for i in range(n):
        d *= R[i][i]
    return d


def exact_inverse(M):
    """Gauss-Jordan inverse over Q."""
    M = fraction_matrix(M)
    n = M.shape[0]
    if M.shape != (n, n):
        raise ValueError("inverse of a non-square matrix")
    aug = [list(M[i]) + [Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    for col in range(n):
        piv = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if piv is None:
            raise ZeroDivisionError("matrix is singular")
        aug[col], aug[piv] = aug[piv], aug[col]
        p = aug[col][col]
        aug[col] = [x / p for x in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [a - f * b for a, b in zip(aug[r], aug[col])]
    out = np.empty((n, n), dtype=object)
    for i in range(n):
        out[i] = aug[i][n:]
    return out


def charpoly_adjugate(A):
    """Exact ``det(zI - A)`` and ``adj(zI - A)`` by Faddeev-LeVerrier.

    Returns ``(chi, adj)`` where ``chi`` is a monic :class:`Poly` of degree n
    and ``adj`` is an n x n nested list of :class:`Poly`.
    """
    A = fraction_matrix(A)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("characteristic polynomial of a non-square matrix")
    I = np.empty((n, n), dtype=object)
    for idx in np.ndindex(n, n):
        I[idx] = Fraction(int(idx[0] == idx[1]))
    c = [Fraction(0)] * (n + 1)
    c[n] = Fraction(1)
    Ms = []
    M = np.empty((n, n), dtype=object)
    M[...] = Fraction(0)
    for k in range(1, n + 1):
        M = A.dot(M) + c[n - k + 1] * I
        Ms.append(M)
        c[n - k] = -sum(A.dot(M)[i, i] for i in range(n)) / k
    # adj(zI - A) = sum_{k=1}^{n} M_k z^{n-k}
    adj = [[Poly([Ms[n - 1 - d][i, j] for d in range(n)]) for j in range(n)]
           for i in range(n)]
    return Poly(c), adj
