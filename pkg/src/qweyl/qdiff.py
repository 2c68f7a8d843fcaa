"""Truncated differential operators in the divided-power basis.

An operator is a finite sum  sum_K c_K(x,t) * d^[K]  with d^[K] the divided
partial  prod_i d_i^{K_i} / K_i!.  This basis keeps composition
integer-combinatorial; the q-derivation basis (nabla powers) is reached by a
unit-triangular solve, which concentrates every q-factorial denominator in
one place.  Mod t^N every convergent operator series has finite support, so
finitely supported terms lose nothing.
"""

from fractions import Fraction
from itertools import product as _iproduct
from math import comb

from .delta import EnvelopeElt, Thickening, gamma_basis, multi_indices
from .errors import CoordinateMismatch, EpsilonCapExceeded, RouteMismatch
from .ring import RingElt, exact_divide, p_integral, q_factorial, q_integer


def order_key(K):
    """Total order first, lex second; the well-order behind every solve here."""
    return (sum(K), K)


class DiffOp:
    """sum_K c_K * d^[K] with c_K in the x,t-part of the ring."""

    __slots__ = ("n", "N", "terms")

    def __init__(self, n, N, terms):
        clean = {}
        for K, c in terms.items():
            K = tuple(int(k) for k in K)
            if len(K) != n or any(k < 0 for k in K):
                raise ValueError(f"bad operator index {K}")
            if not isinstance(c, RingElt):
                c = RingElt.const(c, n, 0, N)
            if c.m:
                raise ValueError("operator coefficients may not involve e-variables")
            c = c.reshape(n, 0).at_trunc(N)
            if c:
                clean[K] = c
        self.n = n
        self.N = N
        self.terms = clean

    @classmethod
    def zero(cls, n, N):
        return cls(n, N, {})

    @classmethod
    def identity(cls, n, N):
        return cls(n, N, {(0,) * n: RingElt.one(n, 0, N)})

    @classmethod
    def partial(cls, i, k, n, N):
        """d_i^[k], a single divided power."""
        K = tuple(k if j == i else 0 for j in range(n))
        return cls(n, N, {K: RingElt.one(n, 0, N)})

    @classmethod
    def mult(cls, f):
        """Multiplication by f as an operator (the K = 0 term)."""
        if f.m:
            raise ValueError("multiplier may not involve e-variables")
        return cls(f.n, f.N, {(0,) * f.n: f})

    # -- structure ----------------------------------------------------

    def support(self):
        return sorted(self.terms, key=order_key)

    def coeff(self, K):
        return self.terms.get(tuple(K), RingElt.zero(self.n, 0, self.N))

    def order(self):
        return max((sum(K) for K in self.terms), default=0)

    def is_zero(self):
        return not self.terms

    def sorted_terms(self):
        return [(K, self.terms[K]) for K in self.support()]

    # -- linear structure ----------------------------------------------

    def _merge(self, other, sign):
        if not isinstance(other, DiffOp):
            return NotImplemented
        n = max(self.n, other.n)
        N = min(self.N, other.N)
        out = {}
        for K, c in self.terms.items():
            out[K + (0,) * (n - self.n)] = c
        for K, c in other.terms.items():
            K = K + (0,) * (n - other.n)
            c = sign * c
            s = out.get(K)
            out[K] = c if s is None else s + c
        return DiffOp(n, N, out)

    def __add__(self, other):
        return self._merge(other, 1)

    def __sub__(self, other):
        return self._merge(other, -1)

    def __neg__(self):
        return DiffOp(self.n, self.N, {K: -c for K, c in self.terms.items()})

    def __mul__(self, c):
        """Coefficientwise scaling; operator composition is compose()."""
        if isinstance(c, DiffOp):
            return NotImplemented
        return DiffOp(self.n, self.N, {K: v * c for K, v in self.terms.items()})

    def __rmul__(self, c):
        if isinstance(c, DiffOp):
            return NotImplemented
        return self.__mul__(c)

    def __eq__(self, other):
        if not isinstance(other, DiffOp):
            return NotImplemented
        return (self - other).is_zero()

    def __repr__(self):
        if not self.terms:
            return "DiffOp(0)"
        bits = []
        for K in self.support():
            c = self.terms[K]
            head = "id" if not any(K) else "d" + "".join(f"[{k}]" for k in K)
            bits.append(f"({c.to_str()})*{head}")
        return "DiffOp(" + " + ".join(bits) + ")"


# -- action and pairing ------------------------------------------------


def apply_op(D, f):
    """sum_K c_K * d^[K](f) on a ring element f."""
    n = max(D.n, f.n)
    f = f.reshape(n, f.m)
    out = RingElt.zero(n, f.m, min(D.N, f.N))
    for K, c in D.terms.items():
        K = K + (0,) * (n - len(K))
        g = f.divided_partial_multi(K)
        if g:
            out = out + c * g
    return out


def pair(D, g):
    """The functional form of D on an e-series: sum_K c_K * (e^K-slot of g).

    A capped envelope element may have lost e-terms the operator could see;
    that pairing would be silently wrong, so it raises instead.
    """
    if isinstance(g, EnvelopeElt):
        if g.cap is not None and D.order() > g.cap:
            raise EpsilonCapExceeded(
                f"operator reaches e-degree {D.order()}, element capped at {g.cap}"
            )
        g = g.body
    n = max(D.n, g.n, g.m)
    g = g.reshape(n, n)
    out = RingElt.zero(n, 0, min(D.N, g.N))
    for K, c in D.terms.items():
        K = K + (0,) * (n - len(K))
        slot = g.eps_coefficient(K)
        if slot:
            out = out + c * slot
    return out


def compose(g, f):
    """g after f, by the divided-power Leibniz rule.

    d^[A] o (c * d^[B]) = sum_{C <= A} d^[C](c) * binom(A-C+B, B) * d^[A-C+B].
    """
    n = max(g.n, f.n)
    N = min(g.N, f.N)
    acc = {}
    for A, cA in g.terms.items():
        A = A + (0,) * (n - len(A))
        for B, cB in f.terms.items():
            B = B + (0,) * (n - len(B))
            for C in _iproduct(*(range(a + 1) for a in A)):
                dC = cB.reshape(n, 0).divided_partial_multi(C)
                if not dC:
                    continue
                K = tuple(a - c + b for a, c, b in zip(A, C, B))
                w = 1
                for k, b in zip(K, B):
                    w *= comb(k, b)
                piece = cA * dC * w
                s = acc.get(K)
                acc[K] = piece if s is None else s + piece
    return DiffOp(n, N, acc)


# -- the q-derivations --------------------------------------------------

_nabla_cache = {}
_power_cache = {}


def nabla(psi, i, N):
    """The q-derivation along the i-th coordinate of psi.

    For coordinate u = x_i + c the q-dilation sends x_i to x_i + t*u, and
    the difference quotient expands as sum_{k>=1} t^{k-1} u^{k-1} d_i^[k].
    """
    key = (psi.key(), i, N)
    if key in _nabla_cache:
        return _nabla_cache[key]
    n = psi.n
    g = psi.coords[i].at_trunc(N)
    if (g - RingElt.x(i, n, 0, N)).x_degree() > 0:
        raise CoordinateMismatch("q-derivations need coordinates of the form x_i + c")
    t = RingElt.t(n, 0, max(N, 2)).truncate(N)
    terms = {}
    for k in range(1, N + 1):
        c = t ** (k - 1) * g ** (k - 1)
        if c:
            terms[tuple(k if j == i else 0 for j in range(n))] = c
    out = DiffOp(n, N, terms)
    _nabla_cache[key] = out
    return out


def nabla_power(psi, I, N):
    """nabla^I = nabla_1^{I_1} o ... o nabla_n^{I_n} (the factors commute)."""
    I = tuple(I)
    key = (psi.key(), I, N)
    if key in _power_cache:
        return _power_cache[key]
    if not any(I):
        out = DiffOp.identity(psi.n, N)
    else:
        j = next(a for a, v in enumerate(I) if v)
        rest = tuple(v - 1 if a == j else v for a, v in enumerate(I))
        out = compose(nabla(psi, j, N), nabla_power(psi, rest, N))
    _power_cache[key] = out
    return out


def sigma_sub(psi, i, f):
    """The q-dilation on ring elements: x_i -> x_i + t * coords_i."""
    n = max(psi.n, f.n)
    g = psi.coords[i].at_trunc(f.N).reshape(n, f.m)
    t = RingElt.t(n, f.m, max(f.N, 2)).truncate(f.N)
    xs = [RingElt.x(j, n, f.m, f.N) for j in range(n)]
    xs[i] = xs[i] + t * g
    return f.reshape(n, f.m).substitute(xs=xs)


# -- the nabla basis ----------------------------------------------------


def q_multifactorial(K, N):
    """[K]_q! = prod_j [K_j]_q!, a unit constant-term polynomial in t."""
    out = RingElt.one(0, 0, N)
    for k in K:
        out = out * q_factorial(k, N)
    return out


def to_nabla_basis(D, psi):
    """Coefficients a_K with D = sum_K a_K * nabla^K.

    nabla^K = [K]_q! * d^[K] + higher-order terms whose t-valuation grows
    with the order gap, so subtracting along the (|K|, lex) well-order
    terminates: new terms stay within order + N - 1 of the original support.
    """
    N = D.N
    residual = DiffOp(psi.n, N, dict(D.terms))
    out = {}
    while not residual.is_zero():
        K = min(residual.terms, key=order_key)
        a = exact_divide(residual.terms[K], q_multifactorial(K, N))
        out[K] = a
        residual = residual - nabla_power(psi, K, N) * a
        if K in residual.terms:
            raise RouteMismatch(f"nabla-basis solve failed to clear slot {K}")
    return out


def _denominator_outside(c, allowed):
    den = c.denominator
    for q in allowed:
        while den % q == 0:
            den //= q
    return den != 1


def a_psi_member(D, psi, mode, allowed=(2,)):
    """Whether D = sum a_K nabla^K has admissible coefficients.

    mode is a prime (all a_K p-integral) or "global" (denominators drawn
    from the allowed set only, default powers of 2).
    """
    coeffs = to_nabla_basis(D, psi)
    for a in coeffs.values():
        if mode == "global":
            if any(_denominator_outside(c, allowed) for c in a.coefficients()):
                return False
        else:
            ok, _ = p_integral(a, mode)
            if not ok:
                return False
    return True


# -- dual bases ----------------------------------------------------------

_dual_cache = {}


def dual_basis(psi, N, K):
    """Envelope elements G_I with pair(nabla^J, G_I) = delta_{IJ}, |J| <= K.

    The matrix M with nabla^J = sum_A M_{J,A} d^[A] is unit-triangular up to
    the q-factorial diagonal, so each dual is a finite e-polynomial with
    support below I; [I]_q! * G_I always comes out with integer coefficients
    and that is asserted.
    """
    ckey = (psi.key(), N, K)
    if ckey in _dual_cache:
        return _dual_cache[ckey]
    n = psi.n
    indices = multi_indices(n, K)
    rows = {J: nabla_power(psi, J, N).terms for J in indices}
    th = Thickening(psi, psi)
    out = {}
    for I in indices:
        g = {I: exact_divide(RingElt.one(n, 0, N), q_multifactorial(I, N))}
        below = [J for J in indices if all(a <= b for a, b in zip(J, I)) and J != I]
        for J in sorted(below, key=order_key, reverse=True):
            s = RingElt.zero(n, 0, N)
            for L, gL in g.items():
                mJL = rows[J].get(L)
                if mJL is not None:
                    s = s + mJL * gL
            if s:
                g[J] = -exact_divide(s, q_multifactorial(J, N))
        body = RingElt.zero(n, n, N)
        for A, c in g.items():
            mono = RingElt.one(n, n, N)
            for j, a in enumerate(A):
                if a:
                    mono = mono * RingElt.eps(j, n, n, N) ** a
            body = body + c * mono
        scaled = body * q_multifactorial(I, N)
        if any(c.denominator != 1 for c in scaled.coefficients()):
            raise RouteMismatch(f"[{I}]_q! * dual_{I} is not integral")
        out[I] = EnvelopeElt(body, th)
    _dual_cache[ckey] = out
    return out


_xi_cache = {}


def xi_basis(psi, N, K, convention="stratification"):
    """Operators xi_I dual to the standard gamma basis of the diagonal.

    pair(xi_I, Gamma_J) = delta_{IJ} for |I|, |J| <= K.  Mod t the gamma
    coefficient matrix is the diagonal of the scalars, so the inverse is a
    finite Neumann series; xi_I is stable once K >= |I| + N - 1.
    """
    ckey = (psi.key(), N, K, convention)
    if ckey in _xi_cache:
        return _xi_cache[ckey]
    th = Thickening(psi, psi, convention=convention)
    basis = gamma_basis(th, N, K, "standard")
    n = psi.n
    indices = multi_indices(n, K)
    pos = {I: a for a, I in enumerate(indices)}
    size = len(indices)
    zero = RingElt.zero(n, 0, N)
    # G[a][b] = e^indices[a]-slot of Gamma_indices[b]
    G = [[basis[J].body.eps_coefficient(A) for J in indices] for A in indices]
    d0inv = [RingElt.const(basis.scalar(I).constant(), n, 0, N) for I in indices]
    P = [
        [
            G[a][b] - (Fraction(1) / d0inv[a].constant() if a == b else 0)
            for b in range(size)
        ]
        for a in range(size)
    ]
    # X = sum_j (-D0^-1 P)^j D0^-1 with D0 the constant diagonal; P is in (t)
    E = [[-(d0inv[a] * P[a][b]) for b in range(size)] for a in range(size)]
    X = [[d0inv[a] if a == b else zero for b in range(size)] for a in range(size)]
    term = X
    for _ in range(1, N):
        term = [
            [
                sum((E[a][c] * term[c][b] for c in range(size)), zero)
                for b in range(size)
            ]
            for a in range(size)
        ]
        if all(not term[a][b] for a in range(size) for b in range(size)):
            break
        X = [[X[a][b] + term[a][b] for b in range(size)] for a in range(size)]
    ops = {}
    for I in indices:
        a = pos[I]
        ops[I] = DiffOp(n, N, {indices[b]: X[a][b] for b in range(size) if X[a][b]})
    out = (ops, basis)
    _xi_cache[ckey] = out
    return out


# -- structure constants -------------------------------------------------


def d2_0(f, n):
    """First coface into the triple ring: x -> x+e, e -> tau-e."""
    N = f.N
    xs = [RingElt.x(j, n, 2 * n, N) + RingElt.eps(j, n, 2 * n, N) for j in range(n)]
    es = [RingElt.eps(n + j, n, 2 * n, N) - RingElt.eps(j, n, 2 * n, N) for j in range(n)]
    return f.reshape(n, min(f.m, n)).substitute(xs=xs, es=es).reshape(n, 2 * n)


def d2_1(f, n):
    """Middle coface: e -> tau, x fixed."""
    es = [RingElt.eps(n + j, n, 2 * n, f.N) for j in range(n)]
    return f.substitute(es=es).reshape(n, 2 * n)


def d2_2(f, n):
    """Last coface: the identity embedding (e stays the first block)."""
    return f.reshape(n, 2 * n)


_triple_cache = {}


def _triple_table(psi, N, Wk, convention):
    """t_{I,J}(K) for all |K| <= Wk, by the coface expansion.

    For each K the image d2_1(Gamma_K) is eliminated against the products
    d2_0(Gamma_I) * d2_2(Gamma_J), whose mod-t leading monomials
    tau^I e^J / (n_I n_J) are triangular for the (total degree, tau-degree,
    lex) order.  The d2_0 substitution trades x-degree for e-degree, one
    p-1 block per t-power, so the pair window runs that much higher than
    the K window.  A residual still outside it is a bug trap.
    """
    ckey = (psi.key(), N, Wk, convention)
    if ckey in _triple_cache:
        return _triple_cache[ckey]
    th = Thickening(psi, psi, convention=convention)
    Wp = Wk + (N - 1) * (psi.p - 1)
    basis = gamma_basis(th, N, Wp, "standard")
    n = psi.n
    windex = multi_indices(n, Wp)
    indices = multi_indices(n, Wk)
    pairs = {}
    for I in windex:
        for J in windex:
            if sum(I) + sum(J) <= Wp:
                pairs[(I, J)] = d2_0(basis[I].body, n) * d2_2(basis[J].body, n)
    scal = {I: basis.scalar(I).constant() for I in windex}

    def mono_key(xe_ee):
        ee = xe_ee[1]
        eps_part, tau_part = ee[:n], ee[n:]
        return (sum(ee), sum(tau_part), tau_part, eps_part)

    table = {}
    for Kc in indices:
        residual = d2_1(basis[Kc].body, n)
        found = {}
        for r in range(N):
            while True:
                layer = residual.t_layer(r)
                if not layer:
                    break
                lead = max(layer.terms, key=lambda k: mono_key((k[1], k[2])))
                _, xe, ee = lead
                I, J = ee[n:], ee[:n]
                if (I, J) not in pairs:
                    raise RouteMismatch(
                        f"structure constants for {Kc}: pair {(I, J)} outside window {Wp}"
                    )
                coeff = RingElt(
                    n,
                    0,
                    N,
                    {
                        (0, key[1], ()): c
                        for key, c in layer.terms.items()
                        if key[2] == ee
                    },
                )
                u = coeff * (scal[I] * scal[J])
                tshift = u.t_shift(r)
                prev = found.get((I, J))
                found[(I, J)] = tshift if prev is None else prev + tshift
                residual = residual - d2_1(tshift.reshape(n, 0), n) * pairs[(I, J)]
        table[Kc] = found
    _triple_cache[ckey] = table
    return table


def structure_constants(I, J, psi, N, K=None, convention="stratification"):
    """The expansion xi_J o xi_I = sum_K t_{I,J}(K) xi_K, checked two ways.

    Route (a) composes the dual functionals as operators and reads the
    coefficients off by pairing; route (b) solves the coface expansion of
    each Gamma_K.  Disagreement raises.
    """
    I, J = tuple(I), tuple(J)
    W = sum(I) + sum(J) + 2 * (N - 1)
    if K is not None:
        W = max(W, K)
    while True:
        ops, basis = xi_basis(psi, N, W, convention)
        composite = compose(ops[J], ops[I])
        if composite.order() <= W:
            break
        W = composite.order()
    table = _triple_table(psi, N, W, convention)
    out = {}
    for Kc in multi_indices(psi.n, W):
        t_a = pair(composite, basis[Kc])
        t_b = table[Kc].get((I, J), RingElt.zero(psi.n, 0, N))
        if t_a != t_b:
            raise RouteMismatch(
                f"structure constant t_{I},{J}({Kc}) differs between routes"
            )
        if t_a:
            out[Kc] = t_a
    return out


# -- identities -----------------------------------------------------------


def verify_nabla_phi(psi, i, samples, N):
    """Failures of nabla_i o phi = [p]_q * u^{p-1} * phi o nabla_i.

    u is the i-th coordinate; samples are plain ring elements.  The report
    lists the offending samples (expected empty).
    """
    p = psi.p
    nab = nabla(psi, i, N)
    u = psi.coords[i].at_trunc(N)
    scale = q_integer(p, N) * u ** (p - 1)
    failures = []
    for f in samples:
        lhs = apply_op(nab, psi.frobenius_poly(f, N))
        rhs = scale * psi.frobenius_poly(apply_op(nab, f), N)
        if lhs != rhs:
            failures.append(f)
    return failures
