"""Glue per-prime canonical sections into one rational functional.

Each odd prime p with p - 1 < N contributes its own canonical section
between two lifted frames, and p shows up in its denominators.  Any two
of these differ by right multiplication with an operator that is integral
at both primes, so a single functional can represent every local class at
once.  It is found greedily: expand the defect against each local section
in the derivation basis, strip the p-power fractional part of every
coefficient, and subtract the combined correction.  Corrections at one
t-layer only disturb later layers, and a correction for one prime is
integral at all the others, so one sweep per layer settles everything.
What survives in the denominators is supported at 2 alone.

Frames enter as labels ("standard", "shift-c") rather than bound
coordinate systems because the same frame has to be instantiated at
every participating prime.
"""

from fractions import Fraction

from .delta import multi_indices, system_from_label
from .errors import AssemblyInconsistent, PrimeTwoUnsupported
from .qdiff import (
    DiffOp,
    a_psi_member,
    compose,
    nabla_power,
    q_multifactorial,
    to_nabla_basis,
)
from .ring import RingElt, is_prime
from .sections import Section, canonical_section, conjugate, invert

__all__ = ["PatchBundle", "relevant_primes", "assemble", "verify_uniqueness"]


def relevant_primes(N):
    """Odd primes small enough to act before the truncation cuts them off.

    The canonical section at p starts correcting at t^(p-1), so primes
    with p - 1 >= N contribute the identity and are skipped.
    """
    return [p for p in range(3, N + 1) if is_prime(p)]


def _frame_label(frame):
    if isinstance(frame, str):
        return frame
    return frame.label


def _p_fraction(q, p):
    """The p-power-denominator tail of q; subtracting it leaves q p-integral.

    Residues are taken minimal non-negative so the result is canonical.
    """
    den = q.denominator
    k = 0
    while den % p == 0:
        den //= p
        k += 1
    if k == 0:
        return Fraction(0)
    pk = p**k
    return Fraction(q.numerator * pow(den, -1, pk) % pk, pk)


def _power_of_two(d):
    return d & (d - 1) == 0


def _denominators_ok(op):
    return all(
        _power_of_two(c.denominator)
        for coeff in op.terms.values()
        for c in coeff.terms.values()
    )


class PatchBundle:
    """A family of per-prime sections together with their common refinement.

    locals holds (p, Section) pairs, one per relevant prime, each bound to
    frames instantiated at its own p.  glob is the combined section; its
    frames are carried at the smallest participating prime (at p = 3 when
    no prime participates, since a section needs frames to live on, and
    the choice is immaterial for an identity functional).
    """

    __slots__ = ("label1", "label2", "N", "K", "locals", "glob")

    def __init__(self, label1, label2, N, K, locals, glob):
        self.label1 = label1
        self.label2 = label2
        self.N = N
        self.K = K
        self.locals = list(locals)
        self.glob = glob

    def __eq__(self, other):
        if not isinstance(other, PatchBundle):
            return NotImplemented
        return (
            self.label1 == other.label1
            and self.label2 == other.label2
            and self.N == other.N
            and self.K == other.K
            and self.locals == other.locals
            and self.glob == other.glob
        )

    def __repr__(self):
        ps = [p for p, _ in self.locals]
        return (
            f"PatchBundle({self.label1} -> {self.label2}, N={self.N}, "
            f"primes={ps})"
        )


def _defect(local, glob_op):
    """invert(local) o glob, expanded in the derivation basis of the source."""
    resid = compose(invert(local).op, glob_op)
    return to_nabla_basis(resid, local.src)


def assemble(psi1, psi2, N, K, primes=None, n=None):
    """Build the bundle of local sections between two frames and merge them.

    psi1 and psi2 are frame labels or labeled coordinate systems; the same
    pair is instantiated at every relevant prime (n is taken from a system
    argument when given, else 1).  K bounds the operator window handed to
    each canonical section.  primes may narrow the run to a sublist of
    relevant_primes(N); asking for 2 is refused since no canonical section
    exists there.
    """
    label1, label2 = _frame_label(psi1), _frame_label(psi2)
    if n is None:
        sized = [f for f in (psi1, psi2) if not isinstance(f, str)]
        n = sized[0].n if sized else 1
    if primes is None:
        primes = relevant_primes(N)
    primes = sorted(primes)
    if 2 in primes:
        raise PrimeTwoUnsupported("no canonical section exists at p = 2")
    for p in primes:
        if not is_prime(p) or p - 1 >= N:
            raise ValueError(f"{p} is not a relevant prime at truncation {N}")

    frames = {p: (system_from_label(label1, p, n), system_from_label(label2, p, n)) for p in primes}
    locals = [
        (p, canonical_section(frames[p][0], frames[p][1], None, p, N, K))
        for p in primes
    ]

    if not locals:
        carrier = (system_from_label(label1, 3, n), system_from_label(label2, 3, n))
        glob = Section(DiffOp.identity(n, N), carrier[0], carrier[1])
        return PatchBundle(label1, label2, N, K, [], glob)

    # Seed with the smallest prime's section: its own defect is the
    # identity, so the sweep below only ever clears the other primes.
    glob_op = locals[0][1].op
    for r in range(1, N):
        fixes = {}
        for p, sec in locals:
            for J, coeff in _defect(sec, glob_op).items():
                if sum(J) == 0:
                    continue
                for (te, xe, _), c in coeff.terms.items():
                    if te != r:
                        continue
                    f = _p_fraction(c, p)
                    if f:
                        key = (J, xe)
                        fixes[key] = fixes.get(key, Fraction(0)) + f
        if not fixes:
            continue
        terms = {}
        for (J, xe), f in fixes.items():
            beta = RingElt(n, 0, N, {(r, xe, ()): f})
            terms[J] = terms.get(J, RingElt.zero(n, 0, N)) + q_multifactorial(J, N) * beta
        glob_op = glob_op - DiffOp(n, N, terms)

    for p, sec in locals:
        psi1_p = frames[p][0]
        for J, coeff in _defect(sec, glob_op).items():
            for c in coeff.terms.values():
                if _p_fraction(c, p):
                    raise AssemblyInconsistent(
                        f"defect at p={p} kept a fractional coefficient on {J}"
                    )
        if not a_psi_member(compose(invert(sec).op, glob_op), psi1_p, p):
            raise AssemblyInconsistent(f"merged functional left the local class at p={p}")

    if not _denominators_ok(glob_op):
        raise AssemblyInconsistent("merged functional has an odd denominator")

    carrier = frames[primes[0]]
    glob = Section(glob_op, carrier[0], carrier[1])

    # The merged section must transport integral operators integrally,
    # prime by prime, not merely sit in the right class itself.
    for p, _ in locals:
        psi1_p, psi2_p = frames[p]
        glob_p = Section(glob_op, psi1_p, psi2_p)
        for I in multi_indices(n, 3):
            moved = conjugate(glob_p, nabla_power(psi1_p, I, N))
            if not a_psi_member(moved, psi2_p, p):
                raise AssemblyInconsistent(
                    f"conjugation by the merged section loses integrality at p={p}, index {I}"
                )

    return PatchBundle(label1, label2, N, K, locals, glob)


def verify_uniqueness(bundle, perturbation):
    """Whether the merged section still works after right multiplication.

    perturbation is an operator (or section) over the source frame.  The
    merged functional is a full orbit representative: exactly the integral
    perturbations keep every local membership, so a True here witnesses
    that perturbation changed nothing essential, and a False that it left
    the class at some prime.
    """
    pert = perturbation.op if isinstance(perturbation, Section) else perturbation
    moved = compose(bundle.glob.op, pert)
    for p, sec in bundle.locals:
        if not a_psi_member(compose(invert(sec).op, moved), sec.src, p):
            return False
    return True
