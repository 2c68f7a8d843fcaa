"""Named identity checks shared by the test suite and the command line.

Each check verifies one identity the library is built on, at a window
derived from the requested (p, N, K, n).  Checks raise CheckFailure with
a concrete witness when the identity breaks and return a short detail
string when it holds; run_checks turns that into one report row per
check.  The registry order is fixed so reports are stable.
"""

from collections import namedtuple
from fractions import Fraction

from .delta import Thickening, gamma_basis, multi_indices, shift_system, standard_system
from .patchwork import assemble, relevant_primes, verify_uniqueness
from .qconn import (
    QConnection,
    cocycle_check,
    recover,
    stratify,
    transport,
    validate,
)
from .qdiff import (
    DiffOp,
    a_psi_member,
    apply_op,
    compose,
    dual_basis,
    nabla,
    nabla_power,
    pair,
    structure_constants,
    to_nabla_basis,
    verify_nabla_phi,
)
from .ring import (
    RingElt,
    exact_divide,
    gauss_binomial,
    p_integral,
    q_integer,
    unit_u,
)
from .samples import SAMPLERS, rng_from_env
from .sections import canonical_section, compose_sections, conjugate, invert, qcrys_member
from .serialize import dumps, loads

__all__ = ["CheckContext", "CheckFailure", "CHECKS", "run_checks"]

CheckContext = namedtuple("CheckContext", "p N K n convention")


class CheckFailure(Exception):
    pass


def _demand(cond, msg):
    if not cond:
        raise CheckFailure(msg)


def _window(p, N):
    """Smallest operator order carrying a whole canonical section."""
    return p * ((N - 1) // (p - 1))


def _x(n, N, i=0):
    return RingElt.x(i, n, 0, N)


def _t(n, N):
    return RingElt.t(n, 0, N)


def _sample_polys(n, N):
    x = _x(n, N)
    return [RingElt.one(n, 0, N), x, x**2, x**2 - 2 * x + 1, 3 * x]


# -- ring ---------------------------------------------------------------


def check_q_integer_addition(ctx):
    N = ctx.N
    q = 1 + RingElt.t(0, 0, N)
    for a in range(7):
        for b in range(7):
            want = q_integer(a, N) + q**a * q_integer(b, N)
            _demand(q_integer(a + b, N) == want, f"[{a}+{b}] != [{a}] + q^{a}[{b}]")
    return f"a, b <= 6 at N={N}"


def check_gauss_binomial_recursion(ctx):
    N = ctx.N
    q = 1 + RingElt.t(0, 0, N)
    for top in range(1, 7):
        for k in range(1, top):
            want = gauss_binomial(top - 1, k - 1, N) + q**k * gauss_binomial(top - 1, k, N)
            _demand(gauss_binomial(top, k, N) == want, f"q-Pascal fails at ({top},{k})")
    return f"rows <= 6 at N={N}"


def check_unit_clears_prime(ctx):
    p, N = ctx.p, ctx.N
    u = unit_u(p, N)
    t = RingElt.t(0, 0, N)
    _demand(u * q_integer(p, N) == p + t ** (p - 1) * u, f"u[{p}] != {p} + t^{p - 1}u")
    return f"p={p}, N={N}"


def check_exact_division(ctx):
    n, N = ctx.n, ctx.N
    x, t = _x(n, N), _t(n, N)
    pairs = [(x**2 + 1, 1 + t * x), (t * x, q_integer(2, N).reshape(n, 0)), (x - 3, 1 - t)]
    for a, b in pairs:
        _demand(exact_divide(a * b, b) == a, f"division drifts on {a} / {b}")
    return f"{len(pairs)} quotients at N={N}"


# -- frames and gamma bases ----------------------------------------------


def check_delta_product_law(ctx):
    p, N = ctx.p, ctx.N
    psi = shift_system(p, 1)
    fs = _sample_polys(1, N)
    for f in fs:
        for g in fs:
            lhs = psi.delta_poly(f * g, N)
            rhs = (
                f**p * psi.delta_poly(g, N)
                + g**p * psi.delta_poly(f, N)
                + p * psi.delta_poly(f, N) * psi.delta_poly(g, N)
            )
            _demand(lhs == rhs, f"product law fails on ({f}, {g})")
    return f"{len(fs)}^2 pairs at p={p}"


def check_frobenius_ring_map(ctx):
    p, N = ctx.p, ctx.N
    psi = standard_system(p, ctx.n)
    fs = _sample_polys(ctx.n, N)
    for f in fs:
        for g in fs:
            _demand(
                psi.frobenius_poly(f * g, N)
                == psi.frobenius_poly(f, N) * psi.frobenius_poly(g, N),
                f"lift is not multiplicative on ({f}, {g})",
            )
    return f"{len(fs)}^2 pairs at p={p}"


def check_gamma_congruence(ctx):
    p, N = ctx.p, ctx.N
    psi = standard_system(p)
    th = Thickening(psi, psi)
    K = min(ctx.K, p + 1)
    basis = gamma_basis(th, N, K, variant="modified")
    e = RingElt.eps(0, 1, 1, N)
    depth = min(p - 1, N)
    for I in basis.indices():
        scaled = basis.scalar(I) * basis[I].body
        ok, _ = p_integral(scaled, p)
        _demand(ok, f"n_I Gamma_I not {p}-integral at {I}")
        tail = scaled - e ** I[0]
        v = tail.t_valuation()
        _demand(v is None or v >= depth, f"congruence depth {v} < {depth} at {I}")
    return f"indices <= {K}, depth t^{depth}"


# -- operators ------------------------------------------------------------


def check_q_weyl_relation(ctx):
    N = ctx.N
    psi = standard_system(ctx.p)
    nab = nabla(psi, 0, N)
    mult_x = DiffOp.mult(_x(1, N))
    t = _t(1, N)
    lhs = compose(nab, mult_x) - compose(mult_x, nab) * (1 + t)
    _demand(lhs == DiffOp.identity(1, N), "derivation against x leaves a remainder")
    return f"N={N}"


def check_difference_quotient(ctx):
    N = ctx.N
    psi = standard_system(ctx.p)
    nab = nabla(psi, 0, N)
    x = _x(1, N)
    for k in range(1, 7):
        _demand(
            apply_op(nab, x**k) == q_integer(k, N) * x ** (k - 1),
            f"x^{k} does not descend to [{k}] x^{k - 1}",
        )
    return f"monomials to x^6 at N={N}"


def check_frobenius_intertwine(ctx):
    p, N = ctx.p, ctx.N
    psi = standard_system(p)
    bad = verify_nabla_phi(psi, 0, _sample_polys(1, N), N)
    _demand(not bad, "; ".join(bad))
    return f"p={p}, N={N}"


def check_nabla_commutation(ctx):
    psi = standard_system(ctx.p, 2)
    a = nabla(psi, 0, ctx.N)
    b = nabla(psi, 1, ctx.N)
    _demand(compose(a, b) == compose(b, a), "coordinate derivations do not commute")
    return f"two variables at N={ctx.N}"


def check_nabla_basis_roundtrip(ctx):
    n, N = ctx.n, ctx.N
    psi = standard_system(ctx.p, n)
    x = _x(n, N)
    D = DiffOp(n, N, {(0,) * n: x, (1,) + (0,) * (n - 1): x + 1})
    D = D + DiffOp.partial(0, 2, n, N) * Fraction(1, 2)
    coeffs = to_nabla_basis(D, psi)
    rebuilt = DiffOp(n, N, {})
    for K, a in coeffs.items():
        rebuilt = rebuilt + nabla_power(psi, K, N) * a
    _demand(rebuilt == D, "expansion does not recompose")
    return f"{len(coeffs)} coefficients at N={N}"


def check_dual_basis(ctx):
    p, N = ctx.p, ctx.N
    psi = standard_system(p, ctx.n)
    K = min(ctx.K, 4)
    duals = dual_basis(psi, N, K)
    for I in duals:
        for J in multi_indices(ctx.n, K):
            want = 1 if I == J else 0
            _demand(
                pair(nabla_power(psi, J, N), duals[I]) == want,
                f"pairing ({I}, {J}) != {want}",
            )
    return f"indices <= {K}, n={ctx.n}"


def check_structure_constant_routes(ctx):
    # structure_constants compares the operator-composition route against
    # the coface-expansion route on every call and raises when they split,
    # so sweeping the window is the verification.
    p, N = ctx.p, ctx.N
    psi = standard_system(p)
    top = 4
    zero = (0,)
    for I in multi_indices(1, 2):
        for J in multi_indices(1, 2):
            if sum(I) + sum(J) > top:
                continue
            tab = structure_constants(I, J, psi, N)
            if I == zero or J == zero:
                other = J if I == zero else I
                for Kc, val in tab.items():
                    want = 1 if Kc == other else 0
                    _demand(val == want, f"counit row breaks at ({I}, {J}, {Kc})")
    return f"|I|+|J| <= {top} at p={p}"


# -- sections --------------------------------------------------------------


def check_section_group_laws(ctx):
    p, N = ctx.p, ctx.N
    psi1 = standard_system(p)
    psi2 = shift_system(p, 1)
    K = _window(p, N)
    s = canonical_section(psi1, psi2, None, p, N, K)
    ident = DiffOp.identity(1, N)
    _demand(compose_sections(invert(s), s).op == ident, "left inverse fails")
    _demand(compose_sections(s, invert(s)).op == ident, "right inverse fails")
    _demand(invert(invert(s)) == s, "inversion is not involutive")
    return f"canonical section at p={p}, N={N}"


def check_canonical_membership(ctx):
    p, N = ctx.p, ctx.N
    psi1 = standard_system(p)
    psi2 = shift_system(p, 1)
    s = canonical_section(psi1, psi2, None, p, N, _window(p, N))
    _demand(qcrys_member(s, p), "canonical section leaves the envelope class")
    return f"p={p}, N={N}"


def check_conjugation_integrality(ctx):
    p, N = ctx.p, ctx.N
    psi1 = standard_system(p)
    psi2 = shift_system(p, 1)
    s = canonical_section(psi1, psi2, None, p, N, _window(p, N))
    for I in multi_indices(1, 2):
        moved = conjugate(s, nabla_power(psi1, I, N))
        _demand(a_psi_member(moved, psi2, p), f"conjugate of index {I} not {p}-integral")
    return f"indices <= 2 at p={p}"


# -- connections -----------------------------------------------------------


def _corpus(ctx):
    p, N = ctx.p, ctx.N
    psi = standard_system(p)
    t, x = _t(1, N), _x(1, N)
    out = [
        QConnection(1, psi, N, [[[2 * t]]]),
        QConnection(1, psi, N, [[[t * x]]]),
        QConnection(2, psi, N, [[[RingElt.zero(1, 0, N), t], [RingElt.zero(1, 0, N), RingElt.zero(1, 0, N)]]]),
    ]
    return out


def check_connection_laws(ctx):
    for M in _corpus(ctx):
        bad = validate(M)
        _demand(not bad, "; ".join(bad))
    return f"{len(_corpus(ctx))} connections at N={ctx.N}"


def check_stratify_recover(ctx):
    for M in _corpus(ctx):
        E = stratify(M)
        _demand(recover(E) == M, f"roundtrip drifts for {M!r}")
    return f"depth {ctx.N} tables"


def check_cocycle(ctx):
    for M in _corpus(ctx):
        _demand(cocycle_check(stratify(M)), f"cocycle fails for {M!r}")
    return f"{len(_corpus(ctx))} honest tables"


def check_transport_functoriality(ctx):
    p, N = ctx.p, ctx.N
    K = _window(p, N)
    frames = [standard_system(p), shift_system(p, 1), shift_system(p, 2)]
    s21 = canonical_section(frames[0], frames[1], None, p, N, K)
    s32 = canonical_section(frames[1], frames[2], None, p, N, K)
    s31 = compose_sections(s32, s21)
    t, x = _t(1, N), _x(1, N)
    M = QConnection(1, frames[2], N, [[[t * x]]])
    _demand(
        transport(s21, transport(s32, M)) == transport(s31, M),
        "step-by-step and composite transports disagree",
    )
    return f"three frames at p={p}, N={N}"


# -- patching ----------------------------------------------------------------


def check_patch_assembly(ctx):
    N = ctx.N
    K = max([ctx.K] + [_window(p, N) for p in relevant_primes(N)])
    b = assemble("standard", "shift-1", N, K)
    for coeff in b.glob.op.terms.values():
        for c in coeff.terms.values():
            _demand(c.denominator & (c.denominator - 1) == 0, f"odd denominator {c}")
    return f"primes {relevant_primes(N)} at N={N}, K={K}"


def check_patch_uniqueness(ctx):
    N = ctx.N
    K = max([ctx.K] + [_window(p, N) for p in relevant_primes(N)])
    b = assemble("standard", "shift-1", N, K)
    _demand(verify_uniqueness(b, DiffOp.identity(1, N)), "identity probe rejected")
    if b.locals:
        p0, sec = b.locals[0]
        nb = nabla(sec.src, 0, N)
        tnb = DiffOp(1, N, {K2: _t(1, N) * c for K2, c in nb.terms.items()})
        _demand(
            verify_uniqueness(b, DiffOp.identity(1, N) + tnb),
            "integral perturbation rejected",
        )
        frac = DiffOp(1, N, {K2: _t(1, N) * c * Fraction(1, p0) for K2, c in nb.terms.items()})
        _demand(
            not verify_uniqueness(b, DiffOp.identity(1, N) + frac),
            f"1/{p0} perturbation accepted",
        )
    return f"probes at N={N}"


# -- serialization ------------------------------------------------------------


def check_serialization(ctx):
    rng = rng_from_env()
    for kind, sampler in SAMPLERS.items():
        for _ in range(20):
            v = sampler(rng)
            line = dumps(v)
            _demand(loads(line) == v, f"{kind} does not round-trip")
            _demand(dumps(loads(line)) == line, f"{kind} bytes drift")
    return f"{len(SAMPLERS)} types x 20 objects"


CHECKS = [
    ("q-integer-addition", check_q_integer_addition),
    ("gauss-binomial-recursion", check_gauss_binomial_recursion),
    ("unit-clears-prime", check_unit_clears_prime),
    ("exact-division", check_exact_division),
    ("delta-product-law", check_delta_product_law),
    ("frobenius-ring-map", check_frobenius_ring_map),
    ("gamma-congruence", check_gamma_congruence),
    ("q-weyl-relation", check_q_weyl_relation),
    ("difference-quotient", check_difference_quotient),
    ("frobenius-intertwine", check_frobenius_intertwine),
    ("nabla-commutation", check_nabla_commutation),
    ("nabla-basis-roundtrip", check_nabla_basis_roundtrip),
    ("dual-basis", check_dual_basis),
    ("structure-constant-routes", check_structure_constant_routes),
    ("section-group-laws", check_section_group_laws),
    ("canonical-membership", check_canonical_membership),
    ("conjugation-integrality", check_conjugation_integrality),
    ("connection-laws", check_connection_laws),
    ("stratify-recover", check_stratify_recover),
    ("cocycle", check_cocycle),
    ("transport-functoriality", check_transport_functoriality),
    ("patch-assembly", check_patch_assembly),
    ("patch-uniqueness", check_patch_uniqueness),
    ("serialization", check_serialization),
]


def run_checks(ctx, names=None):
    """Run the registry (or a sublist) and return one row per check."""
    rows = []
    for name, fn in CHECKS:
        if names is not None and name not in names:
            continue
        try:
            detail = fn(ctx)
            rows.append({"check": name, "ok": True, "detail": detail})
        except CheckFailure as e:
            rows.append({"check": name, "ok": False, "detail": str(e)})
        except Exception as e:
            rows.append({"check": name, "ok": False, "detail": f"{type(e).__name__}: {e}"})
    return rows
