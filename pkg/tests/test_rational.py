from fractions import Fraction as Fr

import numpy as np
import pytest
import sympy
from hypothesis import given, strategies as st

from oracles import to_sympy
from tscontrol.rational import (Poly, RationalFn, RationalMatrix, charpoly_adjugate, exact_det,
                                exact_inverse, exact_rank, poly_gcd, poly_lcm,
                                squarefree_factors)

fractions = st.fractions(min_value=-5, max_value=5, max_denominator=6)
polys = st.lists(fractions, min_size=1, max_size=5).map(Poly)
nonzero_polys = polys.filter(lambda p: not p.is_zero())
small_mats = st.integers(1, 4).flatmap(
    lambda n: st.lists(st.lists(fractions, min_size=n, max_size=n), min_size=n, max_size=n))

z = sympy.symbols("z")


def to_sym(p):
    return sum(sympy.Rational(c.numerator, c.denominator) * z ** k for k, c in enumerate(p.coeffs))


def test_poly_basics():
    p = Poly([1, 2, 1])          # (1 + z)^2
    assert p.degree == 2
    assert p(Fr(-1)) == 0
    assert p.derivative() == Poly([2, 2])
    assert str(Poly([Fr(1, 2), 0, -1])) == "1/2 + -z^2"
    assert Poly([0, 0]).is_zero()


def test_shift_gives_taylor_coefficients():
    # (z)^2 around a=1: 1 + 2(z-1) + (z-1)^2
    assert Poly([0, 0, 1]).shift(1) == Poly([1, 2, 1])


@given(polys, nonzero_polys)
def test_division_identity(a, b):
    q, r = divmod(a, b)
    assert q * b + r == a
    assert r.is_zero() or r.degree < b.degree


@given(nonzero_polys, nonzero_polys)
def test_gcd_matches_sympy(a, b):
    g = poly_gcd(a, b)
    expected = sympy.Poly(sympy.gcd(to_sym(a), to_sym(b)), z).monic()
    assert sympy.Poly(to_sym(g), z, domain="QQ") == expected
    assert (a % g).is_zero() and (b % g).is_zero()


@given(nonzero_polys, nonzero_polys)
def test_lcm_is_divisible_by_both(a, b):
    L = poly_lcm(a, b)
    assert (L % a).is_zero() and (L % b).is_zero()


def test_squarefree_factorization():
    f = Poly.from_roots([1, 1, 2, 3, 3, 3])
    fac = squarefree_factors(f)
    prod = Poly([1])
    for part, k in fac:
        prod = prod * part ** k
    assert prod == f.monic()
    assert fac == [(Poly.from_roots([2]), 1), (Poly.from_roots([1]), 2), (Poly.from_roots([3]), 3)]


def test_rational_function_parse_and_reduce():
    G = RationalFn.parse("333,2700 / 5,75,270")
    assert G.to_text() == "37/30,10 / 1/54,5/18,1"
    assert G.is_strictly_proper()
    assert sorted(G.poles().real) == pytest.approx([-1 / 6, -1 / 9])
    assert not RationalFn.parse("1,1 / 1,1").is_strictly_proper()
    assert RationalFn.parse("1 / 0,1") == RationalFn(Poly([1]), Poly([0, 1]))
    with pytest.raises(ValueError):
        RationalFn.parse("1,2 / ")


def test_rational_function_arithmetic():
    a = RationalFn.parse("1 / -1,1")
    b = RationalFn.parse("1 / 1,1")
    assert a + b == RationalFn(Poly([0, 2]), Poly([-1, 0, 1]))
    assert a * b == RationalFn(Poly([1]), Poly([-1, 0, 1]))


def test_rational_matrix_lcm_and_poles():
    G = RationalMatrix.parse([["1 / -1,1", "0 / 1"], ["0 / 1", "1 / 2,1"]])
    assert G.denominator_lcm() == Poly([-2, 1, 1])
    assert sorted(G.poles().real) == pytest.approx([-2, 1])


@given(small_mats)
def test_exact_rank_and_det_match_sympy(M):
    S = to_sympy(M)
    assert exact_rank(M) == S.rank()
    assert exact_det(M) == Fr(str(S.det()))


@given(small_mats)
def test_exact_inverse(M):
    if exact_det(M) == 0:
        return
    Minv = exact_inverse(M)
    prod = np.array(M, dtype=object) @ Minv
    assert all(prod[i, j] == (1 if i == j else 0) for i in range(len(M)) for j in range(len(M)))


@given(small_mats)
def test_charpoly_and_adjugate_match_sympy(M):
    chi, adj = charpoly_adjugate(M)
    S = to_sympy(M)
    assert sympy.Poly(to_sym(chi), z, domain="QQ") == sympy.Poly(S.charpoly(z).as_expr(), z, domain="QQ")
    # adj(zI - A) (zI - A) = chi(z) I, checked at a rational point
    n = len(M)
    zz = Fr(7, 3)
    adjv = np.array([[adj[i][j](zz) for j in range(n)] for i in range(n)], dtype=object)
    R = zz * np.eye(n, dtype=int).astype(object) - np.array(M, dtype=object)
    P = adjv @ R
    assert all(P[i, j] == (chi(zz) if i == j else 0) for i in range(n) for j in range(n))
