"""Truncated coefficient ring Q[x_1..x_n, e_1..e_m][t] / (t^N).

Elements are finite sums of monomials t^k * x^A * e^B with Fraction
coefficients.  The e-variables are nilpotent bookkeeping coordinates for
thickenings; plain polynomial rings are the m = 0 case.  Everything here
is exact: no floats, no approximation beyond the stated truncation.

Binary operations unify shapes: the truncation order drops to the minimum
of the two operands, missing x- or e-slots are zero-padded on the right.
"""

from fractions import Fraction
from math import comb

from .errors import NotDivisible, PrimeTwoUnsupported

__all__ = [
    "RingElt",
    "q_integer",
    "q_factorial",
    "gauss_binomial",
    "unit_u",
    "exact_divide",
    "p_integral",
    "frac_p_valuation",
    "is_prime",
]


def _as_fraction(c):
    if isinstance(c, Fraction):
        return c
    if isinstance(c, int):
        return Fraction(c)
    raise TypeError(f"not a rational scalar: {c!r}")


class RingElt:
    """One element of Q[x, e][t]/(t^N)."""

    __slots__ = ("n", "m", "N", "terms")

    def __init__(self, n, m, N, terms):
        if N < 1:
            raise ValueError("truncation order must be at least 1")
        self.n = n
        self.m = m
        self.N = N
        clean = {}
        for key, c in terms.items():
            te, xe, ee = key
            if len(xe) != n or len(ee) != m:
                raise ValueError(f"malformed monomial {key} for shape ({n},{m})")
            if te >= N:
                continue
            c = _as_fraction(c)
            if c:
                clean[(te, tuple(xe), tuple(ee))] = c
        self.terms = clean

    # -- constructors ------------------------------------------------

    @classmethod
    def zero(cls, n=0, m=0, N=1):
        return cls(n, m, N, {})

    @classmethod
    def const(cls, c, n=0, m=0, N=1):
        return cls(n, m, N, {(0, (0,) * n, (0,) * m): _as_fraction(c)})

    @classmethod
    def one(cls, n=0, m=0, N=1):
        return cls.const(1, n, m, N)

    @classmethod
    def t(cls, n=0, m=0, N=2):
        return cls(n, m, N, {(1, (0,) * n, (0,) * m): Fraction(1)})

    @classmethod
    def x(cls, i, n, m=0, N=1):
        xe = [0] * n
        xe[i] = 1
        return cls(n, m, N, {(0, tuple(xe), (0,) * m): Fraction(1)})

    @classmethod
    def eps(cls, j, n, m, N=1):
        ee = [0] * m
        ee[j] = 1
        return cls(n, m, N, {(0, (0,) * n, tuple(ee)): Fraction(1)})

    # -- shape handling ----------------------------------------------

    def reshape(self, n=None, m=None):
        """Zero-extend to more x- or e-slots.  Shrinking is not allowed."""
        n = self.n if n is None else n
        m = self.m if m is None else m
        if n < self.n or m < self.m:
            raise ValueError("cannot drop variable slots")
        if n == self.n and m == self.m:
            return self
        padx = (0,) * (n - self.n)
        pade = (0,) * (m - self.m)
        terms = {(te, xe + padx, ee + pade): c for (te, xe, ee), c in self.terms.items()}
        return RingElt(n, m, self.N, terms)

    def truncate(self, N):
        if N >= self.N:
            return self
        return RingElt(self.n, self.m, N, self.terms)

    def at_trunc(self, N):
        """Reinterpret at truncation N.

        Raising N is only sound for elements with no positive t-power, i.e.
        honest polynomials; anything else has already forgotten its tail.
        """
        if N <= self.N:
            return self.truncate(N)
        if any(te for (te, _, _) in self.terms):
            raise ValueError("cannot extend truncation of a t-dependent element")
        return RingElt(self.n, self.m, N, self.terms)

    def _unify(self, other):
        if not isinstance(other, RingElt):
            other = RingElt.const(other, self.n, self.m, self.N)
        n = max(self.n, other.n)
        m = max(self.m, other.m)
        N = min(self.N, other.N)
        return self.reshape(n, m).truncate(N), other.reshape(n, m).truncate(N)

    # -- arithmetic --------------------------------------------------

    def __add__(self, other):
        a, b = self._unify(other)
        terms = dict(a.terms)
        for key, c in b.terms.items():
            s = terms.get(key, Fraction(0)) + c
            if s:
                terms[key] = s
            else:
                terms.pop(key, None)
        return RingElt(a.n, a.m, a.N, terms)

    __radd__ = __add__

    def __neg__(self):
        return RingElt(self.n, self.m, self.N, {k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        a, b = self._unify(other)
        return a + (-b)

    def __rsub__(self, other):
        a, b = self._unify(other)
        return b + (-a)

    def __mul__(self, other):
        a, b = self._unify(other)
        N = a.N
        acc = {}
        for (t1, x1, e1), c1 in a.terms.items():
            for (t2, x2, e2), c2 in b.terms.items():
                te = t1 + t2
                if te >= N:
                    continue
                key = (
                    te,
                    tuple(u + v for u, v in zip(x1, x2)),
                    tuple(u + v for u, v in zip(e1, e2)),
                )
                s = acc.get(key, Fraction(0)) + c1 * c2
                if s:
                    acc[key] = s
                else:
                    acc.pop(key, None)
        return RingElt(a.n, a.m, N, acc)

    __rmul__ = __mul__

    def __pow__(self, k):
        if not isinstance(k, int) or k < 0:
            raise ValueError("exponent must be a non-negative integer")
        result = RingElt.one(self.n, self.m, self.N)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base if k > 1 else base
            k >>= 1
        return result

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = RingElt.const(other, self.n, self.m, self.N)
        if not isinstance(other, RingElt):
            return NotImplemented
        a, b = self._unify(other)
        return a.terms == b.terms

    def __bool__(self):
        return bool(self.terms)

    def __repr__(self):
        return f"RingElt({self.n},{self.m},N={self.N}: {self.to_str()})"

    # -- inspection --------------------------------------------------

    def is_zero(self):
        return not self.terms

    def coeff(self, te, xe=(), ee=()):
        return self.terms.get((te, tuple(xe), tuple(ee)), Fraction(0))

    def constant(self):
        return self.coeff(0, (0,) * self.n, (0,) * self.m)

    def t_valuation(self):
        """Least t-exponent with a nonzero term, or None for zero."""
        if not self.terms:
            return None
        return min(te for (te, _, _) in self.terms)

    def t_layers(self):
        """Split into {r: {(xe, ee): coeff}}."""
        layers = {}
        for (te, xe, ee), c in self.terms.items():
            layers.setdefault(te, {})[(xe, ee)] = c
        return layers

    def t_layer(self, r):
        """The coefficient of t^r as a t-free element."""
        terms = {}
        for (te, xe, ee), c in self.terms.items():
            if te == r:
                terms[(0, xe, ee)] = c
        return RingElt(self.n, self.m, self.N, terms)

    def t_shift(self, k):
        """Multiply by t^k (k may be negative when every term allows it)."""
        terms = {}
        for (te, xe, ee), c in self.terms.items():
            s = te + k
            if s < 0:
                raise NotDivisible(f"t-shift by {k} hits negative exponent")
            terms[(s, xe, ee)] = c
        return RingElt(self.n, self.m, self.N, terms)

    def x_degree(self):
        return max((sum(xe) for (_, xe, _) in self.terms), default=0)

    def eps_degree(self):
        return max((sum(ee) for (_, _, ee) in self.terms), default=0)

    def eps_support(self):
        return {ee for (_, _, ee) in self.terms}

    def eps_coefficient(self, ee):
        """Collect the coefficient of e^ee as an element with no e-slots."""
        ee = tuple(ee)
        terms = {}
        for (te, xe, tee), c in self.terms.items():
            if tee == ee:
                terms[(te, xe, ())] = c
        return RingElt(self.n, 0, self.N, terms)

    def coefficients(self):
        return list(self.terms.values())

    # -- calculus ----------------------------------------------------

    def divided_partial(self, i, k=1):
        """Divided-power partial in x_i: sends x_i^a to C(a, k) x_i^(a-k)."""
        if k == 0:
            return self
        terms = {}
        for (te, xe, ee), c in self.terms.items():
            a = xe[i]
            if a < k:
                continue
            nxe = list(xe)
            nxe[i] = a - k
            key = (te, tuple(nxe), ee)
            s = terms.get(key, Fraction(0)) + c * comb(a, k)
            if s:
                terms[key] = s
            else:
                terms.pop(key, None)
        return RingElt(self.n, self.m, self.N, terms)

    def divided_partial_multi(self, K):
        out = self
        for i, k in enumerate(K):
            if k:
                out = out.divided_partial(i, k)
        return out

    def substitute(self, xs=None, es=None, t_img=None):
        """Evaluate with x_i -> xs[i], e_j -> es[j], t -> t_img.

        None entries keep the variable.  Image shapes are merged; the result
        truncation is the minimum over self and all images.
        """
        n, m, N = self.n, self.m, self.N
        images = [img for img in (xs or []) if img is not None]
        images += [img for img in (es or []) if img is not None]
        if t_img is not None:
            images.append(t_img)
        for img in images:
            if not isinstance(img, RingElt):
                raise TypeError("substitution images must be ring elements")
            n = max(n, img.n)
            m = max(m, img.m)
            N = min(N, img.N)

        def pick(seq, i):
            return seq[i] if seq is not None and i < len(seq) else None

        def prep(img, default):
            return (default if img is None else img).reshape(n, m).truncate(N)

        x_imgs = [prep(pick(xs, i), RingElt.x(i, n, m, N)) for i in range(self.n)]
        e_imgs = [prep(pick(es, j), RingElt.eps(j, n, m, N)) for j in range(self.m)]
        t_image = prep(t_img, RingElt.t(n, m, max(N, 2)).truncate(N))

        maxt = max((te for (te, _, _) in self.terms), default=0)
        maxx = [0] * self.n
        maxe = [0] * self.m
        for (te, xe, ee) in self.terms:
            for i, a in enumerate(xe):
                maxx[i] = max(maxx[i], a)
            for j, b in enumerate(ee):
                maxe[j] = max(maxe[j], b)

        def pows(base, top):
            table = [RingElt.one(n, m, N)]
            for _ in range(top):
                table.append(table[-1] * base)
            return table

        tp = pows(t_image, maxt)
        xp = [pows(x_imgs[i], maxx[i]) for i in range(self.n)]
        ep = [pows(e_imgs[j], maxe[j]) for j in range(self.m)]

        out = RingElt.zero(n, m, N)
        for (te, xe, ee), c in self.terms.items():
            term = RingElt.const(c, n, m, N) * tp[te]
            for i, a in enumerate(xe):
                if a:
                    term = term * xp[i][a]
            for j, b in enumerate(ee):
                if b:
                    term = term * ep[j][b]
            out = out + term
        return out

    # -- canonical string form ---------------------------------------

    def sorted_terms(self):
        return sorted(self.terms.items(), key=lambda kv: kv[0])

    def to_str(self):
        if not self.terms:
            return "0"
        parts = []
        for (te, xe, ee), c in self.sorted_terms():
            factors = []
            if te:
                factors.append("t" if te == 1 else f"t^{te}")
            for i, a in enumerate(xe):
                if a:
                    factors.append(f"x{i + 1}" if a == 1 else f"x{i + 1}^{a}")
            for j, b in enumerate(ee):
                if b:
                    factors.append(f"e{j + 1}" if b == 1 else f"e{j + 1}^{b}")
            mag = abs(c)
            if not factors:
                body = str(mag)
            elif mag == 1:
                body = "*".join(factors)
            else:
                body = "*".join([str(mag)] + factors)
            parts.append(("-" if c < 0 else "+", body))
        sign, body = parts[0]
        out = body if sign == "+" else "-" + body
        for sign, body in parts[1:]:
            out += f" {sign} {body}"
        return out

    @classmethod
    def from_str(cls, s, n, m, N):
        s = s.strip()
        if s in ("0", "-0", ""):
            return cls.zero(n, m, N)
        terms = {}
        for sign, chunk in _signed_chunks(s):
            te = 0
            xe = [0] * n
            ee = [0] * m
            coeff = Fraction(sign)
            for factor in chunk.split("*"):
                factor = factor.strip()
                if not factor:
                    raise ValueError(f"empty factor in {chunk!r}")
                name, _, exp = factor.partition("^")
                k = int(exp) if exp else 1
                if name == "t":
                    te += k
                elif name.startswith("x"):
                    i = int(name[1:]) - 1
                    if not 0 <= i < n:
                        raise ValueError(f"variable {name} out of range for n={n}")
                    xe[i] += k
                elif name.startswith("e"):
                    j = int(name[1:]) - 1
                    if not 0 <= j < m:
                        raise ValueError(f"variable {name} out of range for m={m}")
                    ee[j] += k
                else:
                    if exp:
                        coeff *= Fraction(name) ** int(exp)
                    else:
                        coeff *= Fraction(name)
            key = (te, tuple(xe), tuple(ee))
            c = terms.get(key, Fraction(0)) + coeff
            if c:
                terms[key] = c
            else:
                terms.pop(key, None)
        return cls(n, m, N, terms)


def _signed_chunks(s):
    """Split '3 - t*x1 + x2' into [(1, '3'), (-1, 't*x1'), (1, 'x2')].

    Signs never occur inside a canonical term, so every +/- is a separator.
    """
    out = []
    sign = 1
    buf = []
    for ch in s:
        if ch in "+-":
            chunk = "".join(buf).strip()
            if chunk:
                out.append((sign, chunk))
                sign = 1
            if ch == "-":
                sign = -sign
            buf = []
        else:
            buf.append(ch)
    chunk = "".join(buf).strip()
    if chunk:
        out.append((sign, chunk))
    return out


# -- q-arithmetic ----------------------------------------------------


def q_integer(k, N):
    """[k]_q = 1 + q + ... + q^(k-1) with q = 1 + t, cut at t^N.

    The t^i coefficient is C(k, i+1), a plain binomial identity.
    """
    if k < 0:
        raise ValueError("q-integer index must be non-negative")
    terms = {}
    for i in range(min(N, k)):
        terms[(i, (), ())] = Fraction(comb(k, i + 1))
    return RingElt(0, 0, N, terms)


def q_factorial(k, N):
    out = RingElt.one(0, 0, N)
    for j in range(2, k + 1):
        out = out * q_integer(j, N)
    return out


def gauss_binomial(a, b, N):
    """q-binomial via the q-Pascal recurrence; no division involved."""
    if not 0 <= b <= a:
        raise ValueError("need 0 <= b <= a")
    qpow = [RingElt.one(0, 0, N)]
    for _ in range(b):
        qpow.append(qpow[-1] * (RingElt.one(0, 0, N) + RingElt.t(0, 0, max(N, 2)).truncate(N)))
    prev = [RingElt.one(0, 0, N)]
    for r in range(1, a + 1):
        row = [RingElt.one(0, 0, N)]
        top = min(r, b)
        for c in range(1, top + 1):
            left = prev[c - 1]
            up = prev[c] if c < len(prev) else RingElt.zero(0, 0, N)
            row.append(left + qpow[c] * up)
        prev = row
    return prev[b]


def is_prime(p):
    if p < 2:
        return False
    d = 2
    while d * d <= p:
        if p % d == 0:
            return False
        d += 1
    return True


def unit_u(p, N):
    """The unit u with u * [p]_q = p + t^(p-1) * u, integer coefficients.

    Writing [p]_q = p*g + t^(p-1) with g = sum_i C(p, i+1)/p t^i (integral
    because p divides the inner binomials), u is the series inverse of g.
    Only odd primes make g's non-leading coefficients integral.
    """
    if p == 2:
        raise PrimeTwoUnsupported("no such unit at p = 2")
    if not is_prime(p):
        raise ValueError(f"{p} is not prime")
    g = [Fraction(comb(p, i + 1), p) for i in range(min(N, p - 1))]
    for c in g:
        if c.denominator != 1:
            raise AssertionError("unit construction lost integrality")
    u = [Fraction(1)]
    for r in range(1, N):
        s = Fraction(0)
        for j in range(1, r + 1):
            gj = g[j] if j < len(g) else Fraction(0)
            s += gj * u[r - j]
        u.append(-s)
    terms = {(r, (), ()): c for r, c in enumerate(u) if c}
    return RingElt(0, 0, N, terms)


# -- exact division --------------------------------------------------


def _poly_lead(d):
    return max(d)


def _poly_divide_exact(num, den):
    """Exact division of t-free layers, greedy on the lex-leading monomial."""
    num = dict(num)
    quo = {}
    if len(den) == 1:
        ((dxe, dee), dc) = next(iter(den.items()))
        for (xe, ee), c in num.items():
            qx = tuple(a - b for a, b in zip(xe, dxe))
            qe = tuple(a - b for a, b in zip(ee, dee))
            if any(a < 0 for a in qx) or any(a < 0 for a in qe):
                raise NotDivisible("monomial does not divide")
            quo[(qx, qe)] = c / dc
        return quo
    lead_den = _poly_lead(den)
    dc = den[lead_den]
    guard = 0
    while num:
        guard += 1
        if guard > 100000:
            raise NotDivisible("division did not terminate")
        lead = _poly_lead(num)
        qx = tuple(a - b for a, b in zip(lead[0], lead_den[0]))
        qe = tuple(a - b for a, b in zip(lead[1], lead_den[1]))
        if any(a < 0 for a in qx) or any(a < 0 for a in qe):
            raise NotDivisible("leading term not divisible")
        qc = num[lead] / dc
        quo[(qx, qe)] = quo.get((qx, qe), Fraction(0)) + qc
        for (dxe, dee), c in den.items():
            key = (
                tuple(a + b for a, b in zip(qx, dxe)),
                tuple(a + b for a, b in zip(qe, dee)),
            )
            s = num.get(key, Fraction(0)) - qc * c
            if s:
                num[key] = s
            else:
                num.pop(key, None)
    return {k: v for k, v in quo.items() if v}


def exact_divide(a, b):
    """Quotient a / b in the truncated ring, or NotDivisible.

    b is divided out layer by layer in t after removing its t-valuation;
    the valuation-zero layer must divide exactly as a polynomial at every
    stage.  The result is verified by multiplying back.
    """
    if isinstance(b, (int, Fraction)):
        b = RingElt.const(b, a.n, a.m, a.N)
    a, b = a._unify(b)
    if b.is_zero():
        raise NotDivisible("division by zero")
    if a.is_zero():
        return a
    v = b.t_valuation()
    if a.t_valuation() < v:
        raise NotDivisible("t-valuation of numerator is too small")
    n, m, N = a.n, a.m, a.N
    A = a.t_shift(-v).t_layers()
    B = b.t_shift(-v).t_layers()
    B0 = B[0]
    top = N - v
    C = {}
    for r in range(top):
        rhs = dict(A.get(r, {}))
        for s in range(1, r + 1):
            Bs = B.get(s)
            Cr = C.get(r - s)
            if not Bs or not Cr:
                continue
            for (xe1, ee1), c1 in Bs.items():
                for (xe2, ee2), c2 in Cr.items():
                    key = (
                        tuple(u + w for u, w in zip(xe1, xe2)),
                        tuple(u + w for u, w in zip(ee1, ee2)),
                    )
                    sval = rhs.get(key, Fraction(0)) - c1 * c2
                    if sval:
                        rhs[key] = sval
                    else:
                        rhs.pop(key, None)
        if rhs:
            C[r] = _poly_divide_exact(rhs, B0)
    terms = {}
    for r, layer in C.items():
        for (xe, ee), c in layer.items():
            terms[(r, xe, ee)] = c
    q = RingElt(n, m, N, terms)
    if b * q != a:
        raise NotDivisible("no exact quotient at this truncation")
    return q


# -- p-adic bookkeeping ----------------------------------------------


def frac_p_valuation(c, p):
    """v_p of a nonzero rational."""
    if not c:
        raise ValueError("zero has no finite valuation")
    v = 0
    num, den = c.numerator, c.denominator
    while num % p == 0:
        num //= p
        v += 1
    while den % p == 0:
        den //= p
        v -= 1
    return v


def p_integral(a, p):
    """(all coefficient denominators coprime to p, minimal v_p witness)."""
    if a.is_zero():
        return True, None
    w = min(frac_p_valuation(c, p) for c in a.terms.values())
    return w >= 0, w
