"""Section group laws, the integral projection, and conjugation transport."""

from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from qweyl.delta import shift_system, standard_system
from qweyl.errors import CoordinateMismatch, PrimeTwoUnsupported
from qweyl.qdiff import DiffOp, a_psi_member, compose, nabla, nabla_power, pair
from qweyl.ring import RingElt
from qweyl.sections import (
    Section,
    canonical_section,
    compose_sections,
    conjugate,
    invert,
    qcrys_member,
    trivial_section,
)


def xel(N=3):
    return RingElt.x(0, 1, 0, N)


def tel(N=3):
    return RingElt.t(1, 0, N)


def sample_section(N=3):
    x, t = xel(N), tel(N)
    op = DiffOp(1, N, {(0,): RingElt.one(1, 0, N), (1,): t * (1 + x), (2,): t * x})
    psi = standard_system(3)
    return Section(op, psi, psi)


def hat(sec, f):
    """The induced map on plain polynomials: pair against f(x -> e + tau)."""
    n, N = sec.op.n, sec.op.N
    imgs = [
        RingElt.eps(i, n, n, N) + sec.tau[i].at_trunc(N).reshape(n, n)
        for i in range(n)
    ]
    return pair(sec.op, f.at_trunc(N).reshape(n, 0).substitute(xs=imgs))


# -- construction and invariants -----------------------------------------


def test_section_rejects_bad_operators():
    psi = standard_system(3)
    t, x = tel(), xel()
    with pytest.raises(ValueError):
        Section(DiffOp(1, 3, {(0,): RingElt.const(2, 1, 0, 3)}), psi, psi)
    with pytest.raises(ValueError):
        Section(DiffOp(1, 3, {(1,): t}), psi, psi)  # constant term missing
    bad = DiffOp(1, 3, {(0,): RingElt.one(1, 0, 3), (1,): x})
    with pytest.raises(ValueError):
        Section(bad, psi, psi)  # e-block survives mod t
    with pytest.raises(CoordinateMismatch):
        Section(DiffOp.identity(1, 3), psi, psi, tau=[x**2])


def test_trivial_section_is_identity():
    s = sample_section()
    e = trivial_section(standard_system(3), 3)
    assert compose_sections(e, s).op == s.op
    assert compose_sections(s, e).op == s.op
    assert invert(e).op == e.op


def test_compose_requires_shared_middle_frame():
    s = sample_section()
    other = trivial_section(shift_system(3, 1), 3)
    with pytest.raises(CoordinateMismatch):
        compose_sections(other, s)


# -- inversion ------------------------------------------------------------


def test_invert_geometric_series_example():
    # c_1 = t inverts to c_1 = -t, the higher terms coming from the series
    psi = standard_system(3)
    t = tel()
    s = Section(DiffOp(1, 3, {(0,): RingElt.one(1, 0, 3), (1,): t}), psi, psi)
    r = invert(s)
    assert r.op.coeff((1,)) == -t
    assert r.op.coeff((2,)) == 2 * t**2
    assert compose_sections(r, s).op == DiffOp.identity(1, 3)


def test_invert_is_involutive():
    s = sample_section()
    r = invert(s)
    fresh = Section(r.op, r.src, r.tgt, r.tau)  # drop the cached partner
    assert invert(fresh).op == s.op


# -- group laws across frames ---------------------------------------------


def test_composition_is_associative_across_frames():
    std, sh1 = standard_system(3), shift_system(3, 1)
    x1 = [xel(1) + 1]
    a = canonical_section(std, sh1, None, 3, 3, 3)
    b = canonical_section(sh1, std, x1, 3, 3, 3)
    c = canonical_section(std, sh1, x1, 3, 3, 3)
    lhs = compose_sections(a, compose_sections(b, c))
    rhs = compose_sections(compose_sections(a, b), c)
    assert lhs.op == rhs.op
    assert [f.to_str() for f in lhs.tau] == [f.to_str() for f in rhs.tau]


def test_compose_factors_through_the_frame_maps():
    std, sh1 = standard_system(3), shift_system(3, 1)
    s = canonical_section(std, std, [xel(1) + 1], 3, 3, 3)
    t = canonical_section(std, sh1, None, 3, 3, 3)
    ts = compose_sections(t, s)
    for a in range(5):
        f = xel() ** a
        assert hat(ts, f) == hat(t, hat(s, f))
    # outer frame map nontrivial: the inner coefficients must move with it
    back = canonical_section(sh1, std, None, 3, 3, 3)
    sb = compose_sections(s, back)
    for a in range(5):
        f = xel() ** a
        assert hat(sb, f) == hat(s, hat(back, f))


coeffs = st.integers(min_value=-3, max_value=3)


@st.composite
def small_sections(draw, N=3):
    x, t = xel(N), tel(N)
    terms = {(0,): RingElt.one(1, 0, N)}
    for K in [(1,), (2,)]:
        a, b = draw(coeffs), draw(coeffs)
        c = t * (a + b * x)
        if c:
            terms[K] = c
    return Section(DiffOp(1, N, terms), standard_system(3), standard_system(3))


@given(small_sections(), small_sections(), small_sections())
def test_section_group_laws(a, b, c):
    lhs = compose_sections(a, compose_sections(b, c))
    rhs = compose_sections(compose_sections(a, b), c)
    assert lhs.op == rhs.op
    r = invert(a)
    assert compose_sections(r, a).op == DiffOp.identity(1, 3)
    assert compose_sections(a, r).op == DiffOp.identity(1, 3)


# -- the integral projection ----------------------------------------------


def test_canonical_diagonal_is_trivial():
    psi = standard_system(3)
    s = canonical_section(psi, psi, None, 3, 3, 3)
    assert s.op == DiffOp.identity(1, 3)


def test_canonical_standard_to_shift_pinned():
    # worked by hand: the only correction is at d^[3], with x^2 + x the
    # depth-one part of the target's delta on the coordinate
    std, sh1 = standard_system(3), shift_system(3, 1)
    s = canonical_section(std, sh1, None, 3, 3, 3)
    x, t = xel(), tel()
    assert s.op == DiffOp(
        1, 3, {(0,): RingElt.one(1, 0, 3), (3,): -(t**2) * (x**2 + x)}
    )
    back = canonical_section(sh1, std, None, 3, 3, 3)
    assert back.op == DiffOp(
        1, 3, {(0,): RingElt.one(1, 0, 3), (3,): t**2 * (x**2 + x)}
    )
    assert invert(s).op == back.op


def test_canonical_congruence_and_membership():
    std, sh1 = standard_system(3), shift_system(3, 1)
    for tau in (None, [xel(1) + 1]):
        for N in (3, 4):
            s = canonical_section(std, sh1, tau, 3, N, 4)
            for K, c in s.op.terms.items():
                if any(K):
                    assert c.t_valuation() >= 2
                assert all(cf.denominator % 3 for cf in c.coefficients())
            assert qcrys_member(s, 3)


def test_canonical_is_trivial_below_the_congruence_depth():
    # corrections live in (t^(p-1)), so p = 5 at N = 4 leaves nothing
    std, sh1 = standard_system(5), shift_system(5, 1)
    s = canonical_section(std, sh1, None, 5, 4, 5)
    assert s.op == DiffOp.identity(1, 4)


def test_canonical_rejects_bad_configurations():
    two = standard_system(2)
    with pytest.raises(PrimeTwoUnsupported):
        canonical_section(two, two, None, 2, 3, 2)
    std = standard_system(3)
    with pytest.raises(CoordinateMismatch):
        canonical_section(std, std, None, 5, 3, 3)


def test_generic_variant_differs_before_the_congruence_depth():
    std, sh1 = standard_system(3), shift_system(3, 1)
    s = canonical_section(std, sh1, None, 3, 3, 3)
    g = canonical_section(std, sh1, None, 3, 3, 3, variant="generic")
    assert g.op != s.op
    diff = g.op - s.op
    assert min(c.t_valuation() for c in diff.terms.values()) == 1


# -- envelope membership ---------------------------------------------------


def test_qcrys_member_examples():
    psi = standard_system(3)
    t = tel()
    assert qcrys_member(trivial_section(psi, 3), 3)
    one = RingElt.one(1, 0, 3)
    s = Section(DiffOp(1, 3, {(0,): one, (1,): t}), psi, psi)
    assert qcrys_member(s, 3)
    bad = Section(
        DiffOp(1, 3, {(0,): one, (3,): t * Fraction(1, 3)}), psi, psi
    )
    assert not qcrys_member(bad, 3)


# -- conjugation ------------------------------------------------------------


def test_conjugate_fixed_points():
    psi = standard_system(3)
    zeta = nabla(psi, 0, 3)
    assert conjugate(trivial_section(psi, 3), zeta) == zeta
    assert conjugate(sample_section(), DiffOp.identity(1, 3)) == DiffOp.identity(1, 3)


def test_conjugate_moves_the_q_derivation():
    std, sh1 = standard_system(3), shift_system(3, 1)
    s = canonical_section(std, sh1, None, 3, 3, 3)
    out = conjugate(s, nabla(std, 0, 3))
    lead = {K: c.t_layer(0) for K, c in out.terms.items() if c.t_layer(0)}
    assert lead == {(1,): RingElt.one(1, 0, 3)}
    for I in [(1,), (2,), (3,)]:
        assert a_psi_member(conjugate(s, nabla_power(std, I, 3)), sh1, 3)


def test_conjugate_at_large_prime_short_window():
    # sections are trivial here, so the two operator algebras already agree
    std, sh1 = standard_system(5), shift_system(5, 1)
    s = canonical_section(std, sh1, None, 5, 4, 5)
    for I in [(1,), (2,)]:
        assert a_psi_member(conjugate(s, nabla_power(std, I, 4)), sh1, 5)


def test_conjugate_is_an_algebra_map():
    std = standard_system(3)
    s = canonical_section(std, std, [xel(1) + 1], 3, 3, 3)
    zeta = nabla(std, 0, 3)
    eta = DiffOp.mult(xel()) + DiffOp.partial(0, 2, 1, 3)
    lhs = conjugate(s, compose(zeta, eta))
    rhs = compose(conjugate(s, zeta), conjugate(s, eta))
    assert lhs == rhs


def test_conjugation_well_defined_up_to_inner():
    std, sh1 = standard_system(3), shift_system(3, 1)
    s = canonical_section(std, sh1, None, 3, 3, 3)
    g = canonical_section(std, sh1, None, 3, 3, 3, variant="generic")
    xi = compose_sections(g, invert(s))
    for zeta in [nabla(std, 0, 3), DiffOp.partial(0, 2, 1, 3), DiffOp.mult(xel())]:
        assert conjugate(g, zeta) == conjugate(xi, conjugate(s, zeta))
