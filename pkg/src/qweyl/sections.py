"""Sections of two-frame thickenings.

A section is an operator read as a functional on the e-block: e^K goes to
the coefficient c_K.  Sections between frames form a groupoid under the
composition below, and projecting along a gamma basis produces the one
distinguished section whose coefficients stay p-integral.

Frame maps are restricted to coordinate shifts x_i -> x_i + c_i.  That is
what composition and inversion need to move coefficients across frames
(divided powers commute with shifts), and it covers every frame map the
rest of the package produces.
"""

from .delta import Thickening, gamma_basis, multi_indices
from .errors import CoordinateMismatch, PrimeTwoUnsupported, RouteMismatch
from .qdiff import DiffOp, compose, pair
from .ring import RingElt, p_integral

__all__ = [
    "Section",
    "trivial_section",
    "compose_sections",
    "invert",
    "conjugate",
    "canonical_section",
    "qcrys_member",
]


class Section:
    """A retraction of a thickening onto its target frame.

    op holds the functional; its K = 0 coefficient must be exactly 1 and
    every other coefficient must lie in (t), so that the section fixes 1
    and reduces to the counit mod t.  tau holds the images of the source
    coordinates under the underlying frame map.
    """

    __slots__ = ("op", "src", "tgt", "tau", "_inv")

    def __init__(self, op, src, tgt, tau=None):
        if src.p != tgt.p or src.n != tgt.n:
            raise CoordinateMismatch("frames disagree on p or variable count")
        n = src.n
        if op.n != n:
            raise CoordinateMismatch("operator shape does not match the frames")
        if tau is None:
            tau = tuple(RingElt.x(i, n, 0, 1) for i in range(n))
        clean = []
        for i, f in enumerate(tau):
            if f.m:
                raise CoordinateMismatch("frame maps may not involve e-variables")
            f = f.reshape(n, 0)
            if (f - RingElt.x(i, n, 0, f.N)).x_degree() > 0:
                raise CoordinateMismatch(f"tau_{i + 1} is not a shift of x_{i + 1}")
            clean.append(f)
        if op.coeff((0,) * n) != 1:
            raise ValueError("a section must send 1 to 1")
        for K, c in op.terms.items():
            if any(K) and c.t_layer(0):
                raise ValueError("a section must reduce to the counit mod t")
        self.op = op
        self.src = src
        self.tgt = tgt
        self.tau = tuple(clean)
        self._inv = None

    def key(self):
        return (self.src.key(), self.tgt.key(), tuple(f.to_str() for f in self.tau))

    def __eq__(self, other):
        if not isinstance(other, Section):
            return NotImplemented
        return self.key() == other.key() and self.op == other.op

    def __repr__(self):
        return f"Section({self.src.label} -> {self.tgt.label}, order {self.op.order()})"


def trivial_section(src, N, tgt=None, tau=None):
    """The counit e^K -> delta_{K,0} over whatever frame map is given."""
    tgt = src if tgt is None else tgt
    return Section(DiffOp.identity(src.n, N), src, tgt, tau)


def _shifts(sec):
    """The constants c_i of the frame map, at the operator truncation."""
    n, N = sec.src.n, sec.op.N
    return [f.at_trunc(N) - RingElt.x(i, n, 0, N) for i, f in enumerate(sec.tau)]


def _shift_op(op, shifts):
    """Substitute x_i -> x_i + c_i in every coefficient.

    An algebra automorphism of the operators: derivatives are unchanged, so
    it distributes over composition.
    """
    if all(not c for c in shifts):
        return op
    n, N = op.n, op.N
    imgs = [RingElt.x(i, n, 0, N) + shifts[i] for i in range(n)]
    return DiffOp(n, N, {K: c.substitute(xs=imgs) for K, c in op.terms.items()})


def compose_sections(t, s):
    """t after s, across a shared middle frame.

    s's coefficients live upstairs, so the outer frame map is applied to
    them before plain operator composition; with identity frame maps this
    is compose(t.op, s.op) on the nose.
    """
    if t.src.key() != s.tgt.key():
        raise CoordinateMismatch("sections do not share the middle frame")
    op = compose(t.op, _shift_op(s.op, _shifts(t)))
    timgs = [f.at_trunc(op.N) for f in t.tau]
    tau = tuple(f.at_trunc(op.N).substitute(xs=timgs) for f in s.tau)
    return Section(op, s.src, t.tgt, tau)


def invert(s):
    """The two-sided inverse section.

    Pulling s back along the counit with the inverse frame map leaves an
    operator congruent to the identity mod t; its geometric series is
    finite at truncation and inverts it exactly.  Both composites are
    checked to be trivial before returning.
    """
    if s._inv is not None:
        return s._inv
    n, N = s.op.n, s.op.N
    minus = [-c for c in _shifts(s)]
    ident = DiffOp.identity(n, N)
    E = ident - _shift_op(s.op, minus)
    acc, pw = ident, E
    while not pw.is_zero():
        acc = acc + pw
        pw = compose(pw, E)
    tau = tuple(RingElt.x(i, n, 0, N) + minus[i] for i in range(n))
    out = Section(acc, s.tgt, s.src, tau)
    if compose_sections(out, s).op != ident or compose_sections(s, out).op != ident:
        raise RouteMismatch("inverse section is not two-sided")
    s._inv = out
    out._inv = s
    return out


def conjugate(s, zeta):
    """s o zeta o s^{-1}: the operator zeta moved to the target frame."""
    inner = compose(zeta, invert(s).op)
    return compose(s.op, _shift_op(inner, _shifts(s)))


def qcrys_member(s, p, K=None):
    """Whether the functional factors through the divided-power envelope.

    The envelope is spanned over the target by the gamma products of the
    section's own thickening, so factoring through it means the values on
    that lattice are p-integral.  This is weaker than integrality of the
    q-derivation expansion: dividing a t^(p-1)-deep coefficient by [p]_q!
    picks up a genuine p-denominator, yet the gamma values stay integral
    because the lattice absorbs exactly that factor.  Checked up to |I| <= K,
    a finite certificate.
    """
    if K is None:
        K = s.op.order()
    thick = Thickening(s.src, s.tgt, s.tau)
    basis = gamma_basis(thick, s.op.N, K, "standard")
    for I in basis.indices():
        ok, _ = p_integral(pair(s.op, basis[I].body), p)
        if not ok:
            return False
    return True


def canonical_section(psi1, psi2, tau, p, N, K, variant="modified"):
    """The section that projects onto the constant term of a gamma basis.

    Writing e^I = sum_J A_{J,I} * n_J Gamma_J, the functional e^I -> A_{0,I}
    kills every divided power, so it factors through the envelope.  With
    the modified basis the coefficients are p-integral and the section
    agrees with the frame map mod t^(p-1); both facts are re-checked here.
    variant "generic" projects along the standard basis instead, which
    satisfies the section invariants but carries no integrality guarantee.
    """
    if p == 2:
        raise PrimeTwoUnsupported("the gamma basis construction needs p > 2")
    if p != psi1.p or p != psi2.p:
        raise CoordinateMismatch("p disagrees with the frames")
    if variant not in ("modified", "generic"):
        raise ValueError(f"unknown section variant {variant!r}")
    thick = Thickening(psi1, psi2, tau)
    basis = gamma_basis(thick, N, K, "modified" if variant == "modified" else "standard")
    n = thick.n
    idx = basis.indices()
    one = RingElt.one(n, 0, N)
    zero = RingElt.zero(n, 0, N)

    # column I of the transition matrix: n_I Gamma_I = sum_J B_{J,I} e^J,
    # with B = Id + B_plus and B_plus in (t) by the classical-limit pin
    bplus = {}
    for I in idx:
        w = basis.scalar(I) * basis[I].body
        recon = RingElt.zero(n, n, N)
        for J in idx:
            c = w.eps_coefficient(J)
            if not c:
                continue
            mono = RingElt.one(n, n, N)
            for j, a in enumerate(J):
                if a:
                    mono = mono * RingElt.eps(j, n, n, N) ** a
            recon = recon + c * mono
            e = c - one if J == I else c
            if e:
                if e.t_layer(0):
                    raise RouteMismatch("transition matrix is not unipotent mod t")
                bplus[(J, I)] = e
        if recon != w:
            raise RouteMismatch(f"Gamma_{I} escapes the e-degree window")

    # row 0 of the inverse A = sum_j (-B_plus)^j; entries gain a t-order
    # per factor, so the walk stops within the truncation
    row = {J: one if J == idx[0] else zero for J in idx}
    term = dict(row)
    while any(term.values()):
        new = {J: zero for J in idx}
        for (J, I), e in bplus.items():
            if term[J]:
                new[I] = new[I] - term[J] * e
        term = new
        for J in idx:
            row[J] = row[J] + term[J]

    op = DiffOp(n, N, {I: row[I] for I in idx if row[I]})
    sec = Section(op, psi1, psi2, tau)
    if variant == "modified":
        for I, c in op.terms.items():
            ok, _ = p_integral(c, p)
            if not ok:
                raise RouteMismatch(f"section coefficient at {I} is not {p}-integral")
        if not qcrys_member(sec, p):
            raise RouteMismatch("projection does not factor through the envelope")
        _check_frame_congruence(sec, thick, K, p - 1)
    return sec


def _check_frame_congruence(sec, thick, K, depth):
    """s applied to prod (e_i + tau_i)^A must match prod tau_i^A mod t^depth."""
    n, N = thick.n, sec.op.N
    taus = [f.at_trunc(N).reshape(n, n) for f in thick.tau]
    eps = [RingElt.eps(i, n, n, N) for i in range(n)]
    for A in multi_indices(n, K):
        arg = RingElt.one(n, n, N)
        rhs = RingElt.one(n, 0, N)
        for i, a in enumerate(A):
            if a:
                arg = arg * (eps[i] + taus[i]) ** a
                rhs = rhs * thick.tau[i].at_trunc(N) ** a
        diff = pair(sec.op, arg) - rhs
        vt = diff.t_valuation()
        if not (vt is None or vt >= depth):
            raise RouteMismatch(f"section deviates from its frame map at t^{vt}")
