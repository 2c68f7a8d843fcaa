from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from qweyl.errors import NotDivisible, PrimeTwoUnsupported
from qweyl.ring import (
    RingElt,
    exact_divide,
    frac_p_valuation,
    gauss_binomial,
    p_integral,
    q_factorial,
    q_integer,
    unit_u,
)


def scalar(c, N=4):
    return RingElt.const(c, 0, 0, N)


def T(N=4):
    return RingElt.t(0, 0, N)


# -- strategies -------------------------------------------------------

coeffs = st.builds(
    Fraction,
    st.integers(min_value=-6, max_value=6),
    st.integers(min_value=1, max_value=4),
)


@st.composite
def ring_elts(draw, n=2, m=1, N=3, max_terms=4, max_exp=2):
    terms = {}
    for _ in range(draw(st.integers(min_value=0, max_value=max_terms))):
        te = draw(st.integers(min_value=0, max_value=N - 1))
        xe = tuple(draw(st.integers(min_value=0, max_value=max_exp)) for _ in range(n))
        ee = tuple(draw(st.integers(min_value=0, max_value=1)) for _ in range(m))
        terms[(te, xe, ee)] = draw(coeffs)
    return RingElt(n, m, N, terms)


# -- q-integers and friends -------------------------------------------


def test_q_integer_small_values():
    got = q_integer(3, 4)
    assert got.coeff(0) == 3
    assert got.coeff(1) == 3
    assert got.coeff(2) == 1
    assert got.coeff(3) == 0
    assert q_integer(0, 4).is_zero()
    assert q_integer(1, 4) == 1


def test_q_integer_truncates():
    assert q_integer(3, 2) == scalar(3, 2) + 3 * T(2)


def test_q_integer_is_geometric_sum():
    N = 5
    q = RingElt.one(0, 0, N) + T(N)
    for k in range(7):
        total = RingElt.zero(0, 0, N)
        for j in range(k):
            total = total + q**j
        assert q_integer(k, N) == total


def test_q_factorial_values():
    assert q_factorial(0, 3) == 1
    assert q_factorial(1, 3) == 1
    got = q_factorial(2, 3)
    assert got == scalar(2, 3) + T(3)
    assert q_factorial(3, 4) == q_integer(2, 4) * q_integer(3, 4)


def test_gauss_binomial_values():
    assert gauss_binomial(2, 1, 3) == q_integer(2, 3)
    assert gauss_binomial(4, 0, 3) == 1
    assert gauss_binomial(4, 4, 3) == 1


def test_gauss_binomial_factorial_identity():
    N = 4
    for a in range(6):
        for b in range(a + 1):
            lhs = gauss_binomial(a, b, N) * q_factorial(b, N) * q_factorial(a - b, N)
            assert lhs == q_factorial(a, N)


def test_gauss_binomial_rejects_bad_range():
    with pytest.raises(ValueError):
        gauss_binomial(2, 3, 3)


# -- unit u -----------------------------------------------------------


def test_unit_u_p3_frozen():
    assert unit_u(3, 2) == scalar(1, 2) - T(2)
    # inverse of 1 + t continued
    u4 = unit_u(3, 4)
    assert u4 == scalar(1, 4) - T(4) + T(4) ** 2 - T(4) ** 3


def test_unit_u_defining_property():
    for p in (3, 5, 7):
        for N in (1, 2, 3, 5, 8):
            u = unit_u(p, N)
            assert u.coeff(0) == 1
            assert all(c.denominator == 1 for c in u.coefficients())
            diff = u * q_integer(p, N) - scalar(p, N)
            v = diff.t_valuation()
            assert v is None or v >= p - 1
            # and the tail is exactly t^(p-1) * u
            assert diff == RingElt(0, 0, N, {(p - 1, (), ()): Fraction(1)}) * u


def test_unit_u_rejects_two_and_composites():
    with pytest.raises(PrimeTwoUnsupported):
        unit_u(2, 3)
    with pytest.raises(ValueError):
        unit_u(9, 3)


# -- arithmetic basics ------------------------------------------------


def test_shape_promotion_pads_variables():
    a = RingElt.x(0, 1, 0, 3)
    b = RingElt.eps(0, 2, 1, 3)
    s = a + b
    assert s.n == 2 and s.m == 1
    assert s.coeff(0, (1, 0), (0,)) == 1
    assert s.coeff(0, (0, 0), (1,)) == 1


def test_mixed_truncation_drops_to_min():
    a = T(5)
    b = T(3)
    assert (a * b).N == 3
    assert (a * b) == T(3) ** 2


def test_pow_matches_repeated_product():
    x = RingElt.x(0, 1, 0, 4)
    e = x + T(4) * x
    assert e**3 == e * e * e
    assert e**0 == RingElt.one(1, 0, 4)


def test_substitute_shift():
    x = RingElt.x(0, 1, 0, 3)
    f = x**2
    g = f.substitute(xs=[x + 1])
    assert g == x**2 + 2 * x + 1


def test_substitute_t_image():
    N = 3
    t = RingElt.t(0, 0, N)
    q_cubed_minus_1 = (1 + t) ** 3 - 1
    got = t.substitute(t_img=q_cubed_minus_1)
    assert got == q_cubed_minus_1


def test_divided_partial():
    x = RingElt.x(0, 1, 0, 2)
    f = x**5
    assert f.divided_partial(0, 2) == 10 * x**3
    assert f.divided_partial(0, 6).is_zero()
    assert (x**3).divided_partial_multi((3,)) == 1


def test_eps_coefficient_extraction():
    n, m, N = 1, 2, 3
    x = RingElt.x(0, n, m, N)
    e1 = RingElt.eps(0, n, m, N)
    e2 = RingElt.eps(1, n, m, N)
    g = 3 * x * e1 + e1 * e2 - x**2
    assert g.eps_coefficient((1, 0)) == 3 * RingElt.x(0, n, 0, N)
    assert g.eps_coefficient((1, 1)) == RingElt.one(n, 0, N)
    assert g.eps_coefficient((0, 0)) == -RingElt.x(0, n, 0, N) ** 2


# -- exact division ---------------------------------------------------


def test_exact_divide_t_powers():
    t = T(4)
    assert exact_divide(t**2, t) == t
    with pytest.raises(NotDivisible):
        exact_divide(t, t**2)


def test_exact_divide_polynomials():
    x = RingElt.x(0, 1, 0, 3)
    assert exact_divide(x**2 - 1, x - 1) == x + 1
    with pytest.raises(NotDivisible):
        exact_divide(x**2 + 1, x)


def test_exact_divide_by_q_integer():
    N = 4
    three = q_integer(3, N)
    f = three * (RingElt.x(0, 1, 0, N) + T(N))
    assert exact_divide(f, three) == RingElt.x(0, 1, 0, N) + T(N)


def test_exact_divide_unit_with_t_valuation():
    N = 5
    t = T(N)
    b = t * (1 + t) * 2
    a = b * (3 + t)
    assert exact_divide(a, b) == scalar(3, N) + t


@given(ring_elts(), ring_elts(max_terms=2))
def test_exact_divide_roundtrip(a, b):
    b = b + RingElt.one(2, 1, 3)  # keep the divisor a unit
    assert exact_divide(a * b, b) == a


# -- p-adic bookkeeping -----------------------------------------------


def test_p_integral_reports_witness():
    x = RingElt.x(0, 1, 0, 3)
    ok, w = p_integral(6 * x + 3, 3)
    assert ok and w == 1
    ok, w = p_integral(Fraction(1, 3) * x, 3)
    assert not ok and w == -1
    ok, w = p_integral(RingElt.zero(1, 0, 3), 3)
    assert ok and w is None


def test_frac_p_valuation():
    assert frac_p_valuation(Fraction(18), 3) == 2
    assert frac_p_valuation(Fraction(5, 9), 3) == -2


# -- algebra laws -----------------------------------------------------


@given(ring_elts(), ring_elts(), ring_elts())
def test_ring_laws(a, b, c):
    assert a + b == b + a
    assert a * b == b * a
    assert (a + b) + c == a + (b + c)
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c


@given(ring_elts())
def test_neutral_elements(a):
    assert a + 0 == a
    assert a * 1 == a
    assert (a - a).is_zero()


@given(ring_elts(n=2, m=2, N=4))
def test_string_roundtrip(a):
    s = a.to_str()
    back = RingElt.from_str(s, a.n, a.m, a.N)
    assert back == a


def test_string_form_is_canonical():
    x = RingElt.x(0, 1, 0, 3)
    f = -x + 1 + T(3) * x**2
    assert f.to_str() == "1 - x1 + t*x1^2"
    assert RingElt.from_str("1 - x1 + t*x1^2", 1, 0, 3) == f
