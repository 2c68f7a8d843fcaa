from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from qweyl.delta import system_from_label
from qweyl.errors import AssemblyInconsistent, PrimeTwoUnsupported
from qweyl.patchwork import PatchBundle, assemble, relevant_primes, verify_uniqueness
from qweyl.qdiff import DiffOp, a_psi_member, compose, nabla, nabla_power
from qweyl.ring import RingElt
from qweyl.sections import canonical_section, conjugate, invert, trivial_section


def tx(N, k=0):
    """t * x^k as a one-variable coefficient."""
    return RingElt(1, 0, N, {(1, (k,), ()): Fraction(1)})


def test_relevant_primes_track_the_truncation():
    assert relevant_primes(1) == []
    assert relevant_primes(2) == []
    assert relevant_primes(3) == [3]
    assert relevant_primes(4) == [3]
    assert relevant_primes(5) == [3, 5]
    assert relevant_primes(6) == [3, 5]
    assert relevant_primes(8) == [3, 5, 7]


def test_single_prime_bundle_reproduces_the_canonical_section():
    b = assemble("standard", "shift-1", 3, 3)
    assert [p for p, _ in b.locals] == [3]
    s1 = system_from_label("standard", 3, 1)
    s2 = system_from_label("shift-1", 3, 1)
    assert b.locals[0][1] == canonical_section(s1, s2, None, 3, 3, 3)
    x = RingElt.x(0, 1, 0, 3)
    t = RingElt.t(1, 0, 3)
    expected = DiffOp(1, 3, {(0,): RingElt.one(1, 0, 3), (3,): -t * t * (x + x * x)})
    assert b.glob.op == expected


def test_degenerate_bundles_are_trivial():
    same = assemble("standard", "standard", 3, 3)
    assert same.glob.op == DiffOp.identity(1, 3)
    for _, sec in same.locals:
        assert sec.op == DiffOp.identity(1, 3)

    low = assemble("standard", "shift-1", 1, 2)
    assert low.locals == []
    assert low.glob.op == DiffOp.identity(1, 1)


def test_prime_selection_guards():
    with pytest.raises(PrimeTwoUnsupported):
        assemble("standard", "shift-1", 3, 3, primes=[2, 3])
    with pytest.raises(ValueError):
        assemble("standard", "shift-1", 3, 3, primes=[5])
    with pytest.raises(ValueError):
        assemble("standard", "shift-1", 3, 3, primes=[9])


def test_system_arguments_match_label_arguments():
    s1 = system_from_label("standard", 3, 1)
    s2 = system_from_label("shift-1", 3, 1)
    assert assemble(s1, s2, 3, 3) == assemble("standard", "shift-1", 3, 3)


def test_two_prime_merge_is_integral_at_both():
    b = assemble("standard", "shift-1", 5, 6)
    assert [p for p, _ in b.locals] == [3, 5]
    for p, sec in b.locals:
        assert sec == canonical_section(sec.src, sec.tgt, None, p, 5, 6)
        assert a_psi_member(compose(invert(sec).op, b.glob.op), sec.src, p)
    for coeff in b.glob.op.terms.values():
        for c in coeff.terms.values():
            d = c.denominator
            assert d & (d - 1) == 0
    # The merge had real work to do: neither local already served globally.
    s3, s5 = b.locals[0][1], b.locals[1][1]
    assert not a_psi_member(compose(invert(s5).op, s3.op), s5.src, 5)
    assert b.glob.op != s3.op


def test_merge_is_deterministic():
    a = assemble("standard", "shift-1", 5, 6)
    b = assemble("standard", "shift-1", 5, 6)
    assert a == b
    assert isinstance(a, PatchBundle)
    assert repr(a) == repr(b)


def test_short_windows_are_rejected_loudly():
    # At N = 5 the p = 3 section carries an order-6 term; a window of 5
    # chops it off, and the mutilated functional no longer conjugates
    # derivations integrally.  The gate must refuse, not round away.
    with pytest.raises(AssemblyInconsistent):
        assemble("standard", "shift-1", 5, 5)


def test_assembled_section_transports_operators_integrally():
    b = assemble("standard", "shift-1", 3, 4)
    for p, sec in b.locals:
        glob_p = b.glob
        if glob_p.src.p != p:
            from qweyl.sections import Section

            glob_p = Section(b.glob.op, sec.src, sec.tgt)
        for I in [(1,), (2,), (3,)]:
            moved = conjugate(glob_p, nabla_power(sec.src, I, 3))
            assert a_psi_member(moved, sec.tgt, p)


def test_uniqueness_probes_single_prime():
    b = assemble("standard", "shift-1", 3, 3)
    assert verify_uniqueness(b, DiffOp.identity(1, 3))
    assert verify_uniqueness(b, trivial_section(b.locals[0][1].src, 3))

    src = b.locals[0][1].src
    member = DiffOp.identity(1, 3) + DiffOp(
        1, 3, {K: tx(3) * c for K, c in nabla(src, 0, 3).terms.items()}
    )
    assert verify_uniqueness(b, member)

    bad = DiffOp(1, 3, {(0,): 1, (1,): tx(3) * Fraction(1, 3)})
    assert not verify_uniqueness(b, bad)


def test_uniqueness_probes_each_prime_separately():
    # Perturb along nabla itself so only the inserted denominator decides
    # membership (a bare divided power already carries q-factorial
    # denominators at every relevant prime and would muddy the probe).
    b = assemble("standard", "shift-1", 5, 6)
    src = b.locals[0][1].src
    nb = nabla(src, 0, 5)

    def pert(den):
        c = tx(5) * Fraction(1, den)
        return DiffOp.identity(1, 5) + DiffOp(1, 5, {K: c * v for K, v in nb.terms.items()})

    assert verify_uniqueness(b, DiffOp.identity(1, 5))
    assert not verify_uniqueness(b, pert(3))
    assert not verify_uniqueness(b, pert(5))
    # A denominator at an irrelevant prime is invisible to every gate.
    assert verify_uniqueness(b, pert(7))


@given(
    a=st.integers(min_value=-3, max_value=3),
    b=st.integers(min_value=-3, max_value=3),
    k=st.integers(min_value=1, max_value=2),
)
def test_integral_perturbations_never_break_the_bundle(a, b, k):
    bundle = assemble("standard", "shift-1", 3, 3)
    src = bundle.locals[0][1].src
    coeff = tx(3, 0) * a + tx(3, 1) * b
    pert = DiffOp.identity(1, 3) + DiffOp(
        1, 3, {K: coeff * c for K, c in nabla_power(src, (k,), 3).terms.items()}
    )
    assert verify_uniqueness(bundle, pert)
