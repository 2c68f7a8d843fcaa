"""End-to-end acceptance run: one test per contract, exact arithmetic throughout.

Each test states its own time budget and fails if the budget is exceeded,
so a pytest line here is a pass/fail verdict on one advertised guarantee.
"""

import time
from fractions import Fraction
from math import comb

from qweyl.delta import (
    Thickening,
    gamma_modified_recursion,
    multi_indices,
    shift_system,
    standard_system,
    unit_u,
)
from qweyl.patchwork import assemble, relevant_primes, verify_uniqueness
from qweyl.qconn import (
    QConnection,
    Stratification,
    cocycle_check,
    coherence_check,
    quasi_nilpotent,
    recover,
    stratify,
    transport,
)
from qweyl.qdiff import (
    DiffOp,
    a_psi_member,
    apply_op,
    compose,
    dual_basis,
    nabla,
    nabla_power,
    pair,
    q_multifactorial,
    structure_constants,
    verify_nabla_phi,
)
from qweyl.ring import RingElt, exact_divide, p_integral, q_factorial, q_integer
from qweyl.samples import SAMPLERS, rng_from_env
from qweyl.sections import (
    canonical_section,
    compose_sections,
    conjugate,
    invert,
    qcrys_member,
    trivial_section,
)
from qweyl.serialize import dumps, loads


def xv(N, n=1, m=0):
    return RingElt.x(0, n, m, N)


def tv(N, n=1, m=0):
    return RingElt.t(n, m, N)


def test_01_q_weyl_relation():
    start = time.monotonic()
    psi = standard_system(3)
    for N in range(2, 7):
        nab = nabla(psi, 0, N)
        xop = DiffOp.mult(xv(N))
        got = compose(nab, xop) - compose(xop, nab) * (1 + tv(N))
        assert got == DiffOp.identity(1, N)
    assert time.monotonic() - start < 1


def test_02_frobenius_intertwine():
    start = time.monotonic()
    for p in (3, 5):
        psi = standard_system(p)
        for N in (2, 3, 4):
            x = xv(N)
            monomials = [RingElt.one(1, 0, N)] + [x**k for k in range(1, 7)]
            assert verify_nabla_phi(psi, 0, monomials, N) == []
        # f = x pins both sides to [p]_q x^(p-1)
        lhs = apply_op(nabla(psi, 0, 4), psi.frobenius_poly(xv(4), 4))
        assert lhs == q_integer(p, 4) * xv(4) ** (p - 1)
    assert time.monotonic() - start < 1


def test_03_dual_basis():
    start = time.monotonic()
    for n in (1, 2):
        psi = standard_system(3, n)
        duals = dual_basis(psi, 3, 5)
        idx = multi_indices(n, 5)
        for I in idx:
            for J in idx:
                got = pair(nabla_power(psi, J, 3), duals[I])
                assert got == (1 if I == J else 0)
            scaled = duals[I].body * q_multifactorial(I, 3)
            assert all(c.denominator == 1 for c in scaled.coefficients())
    duals = dual_basis(standard_system(3), 3, 2)
    e = RingElt.eps(0, 1, 1, 3)
    assert duals[(2,)] * q_factorial(2, 3) == e * (e - tv(3, 1, 1) * xv(3, 1, 1))
    assert time.monotonic() - start < 10


def test_04_structure_constant_routes():
    # each call recomputes the table along both routes and raises on mismatch
    start = time.monotonic()
    psi = standard_system(3)
    for I in multi_indices(1, 4):
        for J in multi_indices(1, 4):
            if sum(I) + sum(J) > 4:
                continue
            tab = structure_constants(I, J, psi, 3)
            if I == (0,):
                for K, c in tab.items():
                    assert c == (1 if K == J else 0)
            if J == (0,):
                for K, c in tab.items():
                    assert c == (1 if K == I else 0)
    assert time.monotonic() - start < 30


def _delta_oracle(psi1, psi2, tau, conv, N):
    """delta(tau(x)) = tau(delta(x)), expanded by the convention's sum rule."""
    th = Thickening(psi1, psi2, tau, conv)
    n, p = th.n, th.p
    for i in range(n):
        ti = th.tau[i].at_trunc(N).reshape(n, n)
        e = RingElt.eps(i, n, n, N)
        cross = RingElt.zero(n, n, N)
        for j in range(1, p):
            cross = cross + Fraction(comb(p, j), p) * ti**j * e ** (p - j)
        sign = 1 if conv == "retraction" else -1
        mid = psi2.delta_poly(th.tau[i].at_trunc(N), N).reshape(n, n)
        lhs = mid + th.delta_eps(i, N) + sign * cross
        args = [th.tau[j].at_trunc(N).reshape(n, n) + RingElt.eps(j, n, n, N) for j in range(n)]
        rhs = psi1.delta_x(i, N).substitute(xs=args)
        assert lhs == rhs
        if conv == "stratification":
            # the coherent convention also satisfies it through the
            # envelope's own delta, with no expansion step in between
            assert th.delta(args[i]) == rhs


def test_05_delta_on_epsilon_oracle():
    start = time.monotonic()
    psi1, psi2 = standard_system(3), shift_system(3, 1)
    for tau in (None, [xv(1) + 1]):
        for conv in ("retraction", "stratification"):
            _delta_oracle(psi1, psi2, tau, conv, 3)
    assert time.monotonic() - start < 1


def test_06_modified_divided_power_recursion():
    # each recursion level evaluates two independent closed forms and
    # raises RouteMismatch unless they agree
    start = time.monotonic()
    psi = standard_system(3)
    th = Thickening(psi, psi)
    N = 4
    e = RingElt.eps(0, 1, 1, N)
    d = (unit_u(3, N) * q_integer(3, N)).reshape(1, 1)
    for k in (0, 1, 2):
        g = gamma_modified_recursion(th, e, k, N)
        dM = d ** ((3 - 1) ** k)
        quot = exact_divide(th.frobenius(g), dM)
        assert quot * dM == th.frobenius(g)
    assert time.monotonic() - start < 5


def test_07_canonical_section_contract():
    start = time.monotonic()
    for p in (3, 5):
        std, sh1 = standard_system(p), shift_system(p, 1)
        for tau in (None, [xv(1) + 1]):
            for N in (2, 3, 4):
                s = canonical_section(std, sh1, tau, p, N, p)
                one = RingElt.one(1, 0, N)
                assert apply_op(s.op, one) == one
                for K, c in s.op.terms.items():
                    if any(K):
                        v = c.t_valuation()
                        assert v is None or v >= p - 1
                    assert p_integral(c, p)[0]
                assert qcrys_member(s, p)
    assert time.monotonic() - start < 10


def test_08_group_laws_and_inner_ambiguity():
    start = time.monotonic()
    std, sh1 = standard_system(3), shift_system(3, 1)
    s = canonical_section(std, sh1, None, 3, 3, 3)
    g = canonical_section(std, sh1, None, 3, 3, 3, variant="generic")
    assert compose_sections(s, invert(s)) == trivial_section(sh1, 3)
    assert compose_sections(invert(s), s) == trivial_section(std, 3)
    assert invert(invert(s)) == s
    # two independent sections induce the same conjugation up to the
    # inner twist by their quotient
    xi = compose_sections(g, invert(s))
    for zeta in [nabla(std, 0, 3), DiffOp.partial(0, 2, 1, 3), DiffOp.mult(xv(3))]:
        assert conjugate(g, zeta) == conjugate(xi, conjugate(s, zeta))
    assert time.monotonic() - start < 5


def test_09_stratification_equivalence():
    start = time.monotonic()
    psi, N = standard_system(3), 3
    t, x = tv(N), xv(N)
    z = RingElt.zero(1, 0, N)
    corpus = [
        QConnection(1, psi, N, [[[2 * t]]]),
        QConnection(1, psi, N, [[[t * x]]]),
        QConnection(1, psi, N, [[[2 * t + t * x]]]),
        QConnection(1, psi, N, [[[t**2 * x]]]),
        QConnection(2, psi, N, [[[z, t], [z, z]]]),
        QConnection(2, psi, N, [[[t * x, t], [z, 2 * t]]]),
    ]
    for M in corpus:
        assert quasi_nilpotent(M) or quasi_nilpotent(M, mode="p-adic")
        E = stratify(M)
        assert cocycle_check(E)
        assert recover(E) == M
    # bumping a deep table entry must break the cocycle condition
    E = stratify(corpus[1])
    table = {I: [list(row) for row in rows] for I, rows in E.table.items()}
    hi = max(table, key=sum)
    table[hi][0][0] = table[hi][0][0] + t
    assert not cocycle_check(Stratification(1, psi, N, table))
    assert time.monotonic() - start < 30


def test_10_transport_functoriality_and_coherence():
    start = time.monotonic()
    p = 3
    for N in (3, 4):
        psis = [standard_system(p)] + [shift_system(p, c) for c in (1, 2, 3)]
        sec = {}
        for a in range(4):
            for b in range(a + 1, 4):
                sec[(b, a)] = canonical_section(psis[a], psis[b], None, p, N, 4)
        M = QConnection(1, psis[3], N, [[[tv(N) * xv(N)]]])
        assert coherence_check(
            sec[(1, 0)], sec[(2, 1)], sec[(3, 2)],
            sec[(2, 0)], sec[(3, 1)], sec[(3, 0)], M,
        )
        M1 = QConnection(1, psis[2], N, [[[tv(N) * xv(N)]]])
        lhs = transport(sec[(1, 0)], transport(sec[(2, 1)], M1))
        assert lhs == transport(compose_sections(sec[(2, 1)], sec[(1, 0)]), M1)
    assert time.monotonic() - start < 10


def test_11_patch_assembly():
    start = time.monotonic()
    bundle = assemble("standard", "shift-1", 3, 3)
    assert [p for p, _ in bundle.locals] == relevant_primes(3) == [3]
    p3, s3 = bundle.locals[0]
    std, sh1 = standard_system(3), shift_system(3, 1)
    assert s3 == canonical_section(std, sh1, None, 3, 3, 3)
    # a single relevant prime forces the global representative verbatim,
    # and its class at p matches the local section
    assert bundle.glob.op == s3.op
    assert a_psi_member(compose(invert(s3).op, bundle.glob.op), s3.src, 3)
    for c in bundle.glob.op.terms.values():
        for q in c.coefficients():
            assert q.denominator & (q.denominator - 1) == 0
    nab = nabla(s3.src, 0, 3)
    ident = DiffOp.identity(1, 3)
    good = ident + DiffOp(1, 3, {K: tv(3) * c for K, c in nab.terms.items()})
    bad = ident + DiffOp(
        1, 3, {K: Fraction(1, 3) * tv(3) * c for K, c in nab.terms.items()}
    )
    assert verify_uniqueness(bundle, good)
    assert not verify_uniqueness(bundle, bad)
    assert time.monotonic() - start < 30


def test_12_serialization_round_trip(monkeypatch):
    start = time.monotonic()
    monkeypatch.delenv("QWEYL_SEED", raising=False)
    rng = rng_from_env()
    for kind in sorted(SAMPLERS):
        make = SAMPLERS[kind]
        for _ in range(100):
            v = make(rng)
            assert loads(dumps(v)) == v
    assert time.monotonic() - start < 5
