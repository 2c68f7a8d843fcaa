"""q-connections on finite free modules.

A connection stores one matrix per coordinate: the action of the
q-derivation on the standard basis.  Everything else follows by the
twisted Leibniz rule, so a matrix of the full operator action exists for
each divided-power operator, and the record of those actions on the
gamma-dual functionals is the stratification table.  Sections between
frames pull connections back by letting the conjugated q-derivations act
through the original module.

The maps attached to operators are additive but only twisted-linear over
the base ring, so composite maps are evaluated as operator actions on
coordinate vectors, never as products of their basis matrices.
"""

from .delta import Thickening, gamma_basis, multi_indices
from .errors import CoordinateMismatch, NotDivisible, RouteMismatch
from .qdiff import (
    DiffOp,
    apply_op,
    d2_0,
    d2_1,
    d2_2,
    nabla,
    pair,
    sigma_sub,
    structure_constants,
    to_nabla_basis,
    xi_basis,
)
from .ring import RingElt, frac_p_valuation, p_integral
from .sections import Section, compose_sections, conjugate, invert

__all__ = [
    "QConnection",
    "Stratification",
    "validate",
    "act",
    "action_matrix",
    "xi_action",
    "quasi_nilpotent",
    "stratify",
    "recover",
    "cocycle_check",
    "transport",
    "natural_iso",
    "is_morphism",
    "coherence_check",
]


def _entry(c, n, N):
    if not isinstance(c, RingElt):
        c = RingElt.const(c, n, 0, N)
    if c.m:
        raise ValueError("connection entries carry no e-variables")
    return c.reshape(n, 0).at_trunc(N)


def _identity(r, n, N):
    one = RingElt.one(n, 0, N)
    zero = RingElt.zero(n, 0, N)
    return tuple(tuple(one if l == k else zero for k in range(r)) for l in range(r))


def _basis_vectors(r, n, N):
    one = RingElt.one(n, 0, N)
    zero = RingElt.zero(n, 0, N)
    return [tuple(one if l == k else zero for l in range(r)) for k in range(r)]


def _sample_scalars(n, N):
    # monomials of degree <= 2 plus one t-twisted one; enough to separate
    # the matrix defects, which are themselves twisted-linear in the sample
    xs = [RingElt.x(j, n, 0, N) for j in range(n)]
    out = []
    for A in multi_indices(n, 2):
        f = RingElt.one(n, 0, N)
        for j, a in enumerate(A):
            f = f * xs[j] ** a
        out.append(f)
    out.append(RingElt.t(n, 0, N) * xs[0])
    return out


class QConnection:
    """One matrix per coordinate, the q-derivation on the standard basis."""

    __slots__ = ("rank", "psi", "N", "matrices", "_powers")

    def __init__(self, rank, psi, N, matrices):
        if rank < 1:
            raise ValueError("rank must be positive")
        if len(matrices) != psi.n:
            raise ValueError("one matrix per coordinate is required")
        mats = []
        for M in matrices:
            if len(M) != rank or any(len(row) != rank for row in M):
                raise ValueError("matrices must be square of size rank")
            mats.append(tuple(tuple(_entry(c, psi.n, N) for c in row) for row in M))
        self.rank = rank
        self.psi = psi
        self.N = N
        self.matrices = tuple(mats)
        self._powers = {(0,) * psi.n: _identity(rank, psi.n, N)}

    def __eq__(self, other):
        if not isinstance(other, QConnection):
            return NotImplemented
        return (
            self.rank == other.rank
            and self.psi.key() == other.psi.key()
            and self.N == other.N
            and self.matrices == other.matrices
        )

    def __repr__(self):
        return f"QConnection(rank {self.rank} over {self.psi.label}, N={self.N})"


def _act_vector(M, i, v):
    """nabla_i of the module element with coordinate vector v."""
    nab = nabla(M.psi, i, M.N)
    A = M.matrices[i]
    out = []
    for l in range(M.rank):
        s = apply_op(nab, v[l])
        for k in range(M.rank):
            if A[l][k]:
                s = s + A[l][k] * sigma_sub(M.psi, i, v[k])
        out.append(s)
    return tuple(out)


def validate(M, samples=None):
    """Violations of the Leibniz and commutation laws on sample elements.

    An empty list means the matrices define a genuine q-connection: the
    coordinate actions satisfy nabla_i(f m) = nabla_i(f) m + sigma_i(f)
    nabla_i(m) and commute pairwise on the sampled module elements.
    """
    n, N, r = M.psi.n, M.N, M.rank
    if samples is None:
        samples = _sample_scalars(n, N)
    basis = _basis_vectors(r, n, N)
    out = []
    for i in range(n):
        nab = nabla(M.psi, i, N)
        for k, e in enumerate(basis):
            base = _act_vector(M, i, e)
            for f in samples:
                v = tuple(f * c for c in e)
                left = _act_vector(M, i, v)
                df = apply_op(nab, f)
                sf = sigma_sub(M.psi, i, f)
                right = tuple(df * e[l] + sf * base[l] for l in range(r))
                if left != right:
                    out.append(f"coordinate {i + 1}: Leibniz rule fails on slot {k + 1}")
                    break
    for i in range(n):
        for j in range(i + 1, n):
            for k, e in enumerate(basis):
                for f in samples:
                    v = tuple(f * c for c in e)
                    ij = _act_vector(M, i, _act_vector(M, j, v))
                    ji = _act_vector(M, j, _act_vector(M, i, v))
                    if ij != ji:
                        out.append(
                            f"coordinates {i + 1},{j + 1}: "
                            f"extended actions do not commute on slot {k + 1}"
                        )
                        break
    return out


def _power(M, K):
    """Matrix of nabla^K on the standard basis, cached on the connection."""
    K = tuple(K)
    got = M._powers.get(K)
    if got is not None:
        return got
    j = next(a for a, v in enumerate(K) if v)
    prev = _power(M, tuple(v - 1 if a == j else v for a, v in enumerate(K)))
    cols = [_act_vector(M, j, tuple(prev[l][k] for l in range(M.rank))) for k in range(M.rank)]
    out = tuple(tuple(cols[k][l] for k in range(M.rank)) for l in range(M.rank))
    M._powers[K] = out
    return out


def act(M, D, v):
    """Apply D = sum_K a_K nabla^K through the connection to the vector v."""
    coeffs = to_nabla_basis(D, M.psi)
    n, r = M.psi.n, M.rank
    out = [RingElt.zero(n, 0, M.N) for _ in range(r)]
    for K in sorted(coeffs):
        w = tuple(v)
        for j in range(n - 1, -1, -1):
            for _ in range(K[j]):
                w = _act_vector(M, j, w)
        c = coeffs[K]
        out = [out[l] + c * w[l] for l in range(r)]
    return tuple(out)


def action_matrix(M, D):
    """Matrix of D's action on the standard basis."""
    coeffs = to_nabla_basis(D, M.psi)
    n, r = M.psi.n, M.rank
    zero = RingElt.zero(n, 0, M.N)
    out = [[zero for _ in range(r)] for _ in range(r)]
    for K in sorted(coeffs):
        T = _power(M, K)
        c = coeffs[K]
        for l in range(r):
            for k in range(r):
                if T[l][k]:
                    out[l][k] = out[l][k] + c * T[l][k]
    return tuple(tuple(row) for row in out)


def xi_action(M, I):
    """Matrix through which the gamma-dual functional xi_I acts.

    The expansion of xi_I in nabla-powers divides by q-factorials, so the
    entries are only guaranteed to clear their p-denominators when the
    connection extends to the divided-power algebra; a p in a denominator
    raises NotDivisible.
    """
    I = tuple(I)
    if len(I) != M.psi.n:
        raise ValueError("index length must match the coordinate count")
    ops, _ = xi_basis(M.psi, M.N, sum(I) + M.N - 1)
    out = action_matrix(M, ops[I])
    p = M.psi.p
    for row in out:
        for c in row:
            ok, w = p_integral(c, p)
            if not ok:
                raise NotDivisible(f"xi_{I} acts with {p}-valuation {w}")
    return out


def quasi_nilpotent(M, cap=None, threshold=None, mode="strict"):
    """Whether the xi-actions die out beyond the threshold order.

    strict demands outright vanishing between threshold and cap.  The
    "p-adic" mode instead asks every entry of xi_I to sink into the
    (p, t^{p-1})-adic filtration: each term must satisfy
    (p-1) v_p + v_t >= |I| - threshold.  Divisibility failures at any
    index mean no extension exists, hence False.
    """
    if mode not in ("strict", "p-adic"):
        raise ValueError(f"unknown mode {mode!r}")
    cap = M.N + 2 if cap is None else cap
    threshold = M.N if threshold is None else threshold
    p = M.psi.p
    for I in multi_indices(M.psi.n, cap):
        try:
            T = xi_action(M, I)
        except NotDivisible:
            return False
        gap = sum(I) - threshold
        if gap <= 0:
            continue
        for row in T:
            for c in row:
                if mode == "strict":
                    if c:
                        return False
                else:
                    for (te, _, _), q in c.terms.items():
                        if (p - 1) * frac_p_valuation(q, p) + te < gap:
                            return False
    return True


class Stratification:
    """Finite table of matrices indexed by divided-power multi-indices.

    Zero matrices are dropped, so the table is the support of the
    extended action; the empty index must act as the identity.
    """

    __slots__ = ("rank", "psi", "N", "table")

    def __init__(self, rank, psi, N, table):
        if rank < 1:
            raise ValueError("rank must be positive")
        zero = (0,) * psi.n
        norm = {}
        for I, T in table.items():
            I = tuple(int(a) for a in I)
            if len(I) != psi.n or any(a < 0 for a in I):
                raise ValueError(f"bad table index {I}")
            if len(T) != rank or any(len(row) != rank for row in T):
                raise ValueError("table entries must be square of size rank")
            mat = tuple(tuple(_entry(c, psi.n, N) for c in row) for row in T)
            if I == zero or any(c for row in mat for c in row):
                norm[I] = mat
        if norm.get(zero) != _identity(rank, psi.n, N):
            raise ValueError("the empty index must act as the identity")
        self.rank = rank
        self.psi = psi
        self.N = N
        self.table = norm

    def __eq__(self, other):
        if not isinstance(other, Stratification):
            return NotImplemented
        return (
            self.rank == other.rank
            and self.psi.key() == other.psi.key()
            and self.N == other.N
            and self.table == other.table
        )

    def __repr__(self):
        top = max(sum(I) for I in self.table)
        return (
            f"Stratification(rank {self.rank} over {self.psi.label}, "
            f"N={self.N}, support up to order {top})"
        )


def stratify(M, cap=None):
    """The xi-action table of M up to the cap; divisibility failures propagate."""
    cap = M.N + 2 if cap is None else cap
    table = {}
    for I in multi_indices(M.psi.n, cap):
        table[I] = xi_action(M, I)
    return Stratification(M.rank, M.psi, M.N, table)


def recover(E):
    """The connection whose xi-actions reproduce the table.

    nabla_i expands through the dual functionals with coefficients read
    off by pairing against the gamma basis, so its matrix is the matching
    combination of table entries.
    """
    psi, N, r = E.psi, E.N, E.rank
    n = psi.n
    basis = gamma_basis(Thickening(psi, psi), N, max(sum(I) for I in E.table), "standard")
    zero = RingElt.zero(n, 0, N)
    mats = []
    for i in range(n):
        nab = nabla(psi, i, N)
        acc = [[zero for _ in range(r)] for _ in range(r)]
        for I in sorted(E.table):
            c = pair(nab, basis[I])
            if not c:
                continue
            T = E.table[I]
            for l in range(r):
                for k in range(r):
                    if T[l][k]:
                        acc[l][k] = acc[l][k] + c * T[l][k]
        mats.append(acc)
    return QConnection(r, psi, N, mats)


def cocycle_check(E):
    """Triple-overlap consistency of a stratification table.

    Pulled back to the triple ring the table must satisfy

        sum_K T^K d2_1(Gamma_K)
            = sum_{I,J} T^J d2_0(T^I) d2_2(Gamma_J) d2_0(Gamma_I),

    the inner factor twisted because the second comparison map rewrites
    the coefficients of the first.  The identity is exact for tables of
    finite support.  When the entries are free of the coordinates the
    expansion of d2_1(Gamma_K) collapses the same condition to
    T^J T^I = sum_K t_{I,J}(K) T^K, which is checked as well; the two
    readings disagreeing is a bug, not a verdict.
    """
    psi, N, r = E.psi, E.N, E.rank
    n = psi.n
    basis = gamma_basis(Thickening(psi, psi), N, max(sum(I) for I in E.table), "standard")
    zero2 = RingElt.zero(n, 2 * n, N)
    lhs = [[zero2 for _ in range(r)] for _ in range(r)]
    for K, T in E.table.items():
        g = d2_1(basis[K].body, n)
        for l in range(r):
            for k in range(r):
                if T[l][k]:
                    lhs[l][k] = lhs[l][k] + d2_2(T[l][k], n) * g
    rhs = [[zero2 for _ in range(r)] for _ in range(r)]
    twisted = {
        I: [[d2_0(c, n) for c in row] for row in T] for I, T in E.table.items()
    }
    for J, TJ in E.table.items():
        gJ = d2_2(basis[J].body, n)
        for I, TI in twisted.items():
            w = gJ * d2_0(basis[I].body, n)
            for l in range(r):
                for k in range(r):
                    acc = zero2
                    for m in range(r):
                        if TJ[l][m] and E.table[I][m][k]:
                            acc = acc + d2_2(TJ[l][m], n) * TI[m][k]
                    if acc:
                        rhs[l][k] = rhs[l][k] + acc * w
    primary = all(lhs[l][k] == rhs[l][k] for l in range(r) for k in range(r))

    if all(c.x_degree() == 0 for T in E.table.values() for row in T for c in row):
        secondary = _constant_cocycle(E)
        if secondary is not primary:
            raise RouteMismatch("cocycle routes disagree on a constant table")
    return primary


def _constant_cocycle(E):
    psi, N, r = E.psi, E.N, E.rank
    zero = RingElt.zero(psi.n, 0, N)
    zmat = tuple(tuple(zero for _ in range(r)) for _ in range(r))
    for I, TI in E.table.items():
        for J, TJ in E.table.items():
            want = [
                [
                    sum((TJ[l][m] * TI[m][k] for m in range(r)), zero)
                    for k in range(r)
                ]
                for l in range(r)
            ]
            got = [[zero for _ in range(r)] for _ in range(r)]
            for K, c in structure_constants(I, J, psi, N).items():
                T = E.table.get(K, zmat)
                for l in range(r):
                    for k in range(r):
                        if T[l][k]:
                            got[l][k] = got[l][k] + c * T[l][k]
            for l in range(r):
                for k in range(r):
                    if want[l][k] != got[l][k]:
                        return False
    return True


def transport(s, M):
    """Pull the connection back along a section to its source frame.

    The i-th matrix of the result is the action through M of the
    conjugated q-derivation of the source frame.  The result is validated
    and a violation raises, since a section must carry connections to
    connections.
    """
    if M.psi.key() != s.tgt.key():
        raise CoordinateMismatch("the connection does not live on the section's target")
    if M.N != s.op.N:
        raise ValueError("section and connection truncations differ")
    mats = [
        action_matrix(M, conjugate(s, nabla(s.src, i, M.N)))
        for i in range(s.src.n)
    ]
    out = QConnection(M.rank, s.src, M.N, mats)
    bad = validate(out)
    if bad:
        raise RouteMismatch("transport broke the connection laws: " + bad[0])
    return out


def natural_iso(xi, M):
    """Basis matrix of the natural map attached to a section-class operator."""
    op = xi.op if isinstance(xi, Section) else xi
    return action_matrix(M, op)


def is_morphism(phi, M1, M2, samples=None):
    """Whether the matrix phi intertwines the two connection actions.

    Checked on the sampled module elements; phi maps M1 to M2 and both
    connections must share frame and truncation.
    """
    if M1.psi.key() != M2.psi.key() or M1.N != M2.N:
        raise CoordinateMismatch("morphisms need a common frame and truncation")
    n, N = M1.psi.n, M1.N
    mat = tuple(tuple(_entry(c, n, N) for c in row) for row in phi)
    if len(mat) != M2.rank or any(len(row) != M1.rank for row in mat):
        raise ValueError("phi must be a rank(M2) x rank(M1) matrix")
    if samples is None:
        samples = _sample_scalars(n, N)

    def through(v):
        return tuple(
            sum((mat[l][k] * v[k] for k in range(M1.rank)), RingElt.zero(n, 0, N))
            for l in range(M2.rank)
        )

    for i in range(n):
        for e in _basis_vectors(M1.rank, n, N):
            for f in samples:
                v = tuple(f * c for c in e)
                if through(_act_vector(M1, i, v)) != _act_vector(M2, i, through(v)):
                    return False
    return True


def coherence_check(s10, s21, s32, s20, s31, s30, M):
    """Coincidence of the two contraction orders for a chain of sections.

    The chain s10, s21, s32 climbs four frames and M lives on the top
    one; s20, s31, s30 are the diagonal sections the composites are
    compared against.  Both composite comparison maps are evaluated as
    operator actions on the standard basis, the left leg through the
    once-transported connection, and must agree exactly.
    """
    z321 = compose_sections(s31, invert(compose_sections(s32, s21)))
    z310 = compose_sections(s30, invert(compose_sections(s31, s10)))
    z210 = compose_sections(s20, invert(compose_sections(s21, s10)))
    z320 = compose_sections(s30, invert(compose_sections(s32, s20)))
    M2 = transport(s32, M)
    for e in _basis_vectors(M.rank, M.psi.n, M.N):
        left = act(M, z310.op, act(M, z321.op, e))
        right = act(M, z320.op, act(M2, z210.op, e))
        if left != right:
            return False
    return True
