"""Frobenius lifts, delta-structures, and divided-power gamma operations.

A coordinate frame fixes a Frobenius lift x_i -> F_i(x) on the polynomial
ring; t always maps to (1+t)^p - 1.  A thickening couples two frames along
a polynomial lift tau' of the identity and installs a delta-structure on
the nilpotent e-variables, in one of two conventions that differ by the
sign of the mixed binomial correction term.
"""

from fractions import Fraction
from math import comb

from .errors import (
    CoordinateMismatch,
    EpsilonCapExceeded,
    NotDivisible,
    PrimeTwoUnsupported,
    RouteMismatch,
)
from .ring import (
    RingElt,
    exact_divide,
    frac_p_valuation,
    is_prime,
    p_integral,
    q_integer,
    unit_u,
)

__all__ = [
    "CoordinateSystem",
    "standard_system",
    "shift_system",
    "system_from_label",
    "Thickening",
    "EnvelopeElt",
    "delta_on_epsilon",
    "gamma",
    "gamma_composite",
    "gamma_modified_recursion",
    "gamma_basis",
    "GammaBasis",
    "multi_indices",
    "legendre_vp",
]


def multi_indices(n, top):
    """All multi-indices over n slots with total degree <= top, in (|I|, lex) order."""
    out = []
    for total in range(top + 1):
        batch = []

        def rec(prefix, left, slots):
            if slots == 1:
                batch.append(tuple(prefix + [left]))
                return
            for a in range(left + 1):
                rec(prefix + [a], left - a, slots - 1)

        rec([], total, n)
        out.extend(sorted(batch))
    return out


def legendre_vp(k, p):
    """v_p(k!) by Legendre's sum."""
    v = 0
    q = p
    while q <= k:
        v += k // q
        q *= p
    return v


class CoordinateSystem:
    """A Frobenius lift on Q[x_1..x_n]: integer polynomials F_i = x_i^p mod p.

    coords holds the images of the defining coordinates (x_i for the
    standard frame, x_i + c for a shifted one); they drive the q-derivations.
    """

    __slots__ = ("p", "n", "phi", "coords", "label")

    def __init__(self, p, n, phi, coords=None, label="custom"):
        if not is_prime(p):
            raise ValueError(f"{p} is not prime")
        self.p = p
        self.n = n
        if len(phi) != n:
            raise ValueError("need one Frobenius image per variable")
        clean = []
        for i, f in enumerate(phi):
            if any(te for (te, _, _) in f.terms):
                raise ValueError("Frobenius images must be t-free polynomials")
            f = f.reshape(n, f.m).at_trunc(1) if f.N > 1 else f.reshape(n, f.m)
            if f.m:
                raise ValueError("Frobenius images may not involve e-variables")
            if any(c.denominator != 1 for c in f.coefficients()):
                raise NotDivisible("Frobenius images must have integer coefficients")
            diff = f - RingElt.x(i, n, 0, 1) ** p
            if any(c.numerator % p for c in diff.coefficients()):
                raise NotDivisible(f"phi(x_{i + 1}) is not x_{i + 1}^{p} mod {p}")
            clean.append(f)
        self.phi = tuple(clean)
        if coords is None:
            coords = tuple(RingElt.x(i, n, 0, 1) for i in range(n))
        self.coords = tuple(g.reshape(n, 0) for g in coords)
        self.label = label

    def key(self):
        return (
            self.p,
            self.n,
            self.label,
            tuple(f.to_str() for f in self.phi),
            tuple(g.to_str() for g in self.coords),
        )

    def __eq__(self, other):
        return isinstance(other, CoordinateSystem) and self.key() == other.key()

    def __repr__(self):
        return f"CoordinateSystem(p={self.p}, n={self.n}, {self.label})"

    def frobenius_poly(self, f, N):
        """phi on a plain element (no e-slots): x -> F(x), t -> (1+t)^p - 1."""
        xs = [g.at_trunc(N) for g in self.phi]
        t = RingElt.t(0, 0, max(N, 2)).truncate(N)
        t_img = (1 + t) ** self.p - 1
        return f.at_trunc(min(N, f.N)).substitute(xs=xs, t_img=t_img)

    def delta_poly(self, f, N):
        """(phi(f) - f^p)/p; exact over Q, p-integral on p-integral input."""
        f = f.truncate(N) if f.N >= N else f
        return exact_divide(self.frobenius_poly(f, N) - f**self.p, self.p)

    def delta_x(self, i, N):
        """delta of the i-th coordinate, a t-free integer polynomial over Q."""
        return exact_divide(self.phi[i].at_trunc(N) - RingElt.x(i, self.n, 0, N) ** self.p, self.p)


def standard_system(p, n=1):
    phi = [RingElt.x(i, n, 0, 1) ** p for i in range(n)]
    return CoordinateSystem(p, n, phi, label="standard")


def shift_system(p, c, n=1):
    """Coordinates y_i = x_i + c with the lift y_i -> y_i^p, i.e. F_i = (x_i+c)^p - c."""
    if not isinstance(c, int):
        raise ValueError("shift must be an integer")
    phi = [(RingElt.x(i, n, 0, 1) + c) ** p - c for i in range(n)]
    coords = [RingElt.x(i, n, 0, 1) + c for i in range(n)]
    return CoordinateSystem(p, n, phi, coords=coords, label=f"shift-{c}")


def system_from_label(label, p, n=1):
    if label == "standard":
        return standard_system(p, n)
    if label.startswith("shift-"):
        return shift_system(p, int(label[len("shift-") :]), n)
    raise ValueError(f"unknown coordinate frame label {label!r}")


class Thickening:
    """Two frames joined along tau', with a delta-structure on the e-block.

    m = n gives the two-sided thickening R[x][e]/..., m = 2n the three-fold
    one whose second e-block tracks the middle factor.  convention picks the
    sign of the mixed term in delta(e_i); "stratification" is the one for
    which phi(e_i) = tau(phi_src(x_i)) - phi_tgt(tau'(x_i)) holds on the
    nose, "retraction" flips the mixed term.
    """

    def __init__(self, src, tgt, tau=None, convention="stratification", triple=False):
        if src.p != tgt.p or src.n != tgt.n:
            raise CoordinateMismatch("frames disagree on p or variable count")
        if convention not in ("stratification", "retraction"):
            raise ValueError(f"unknown convention {convention!r}")
        self.src = src
        self.tgt = tgt
        self.p = src.p
        self.n = src.n
        if tau is None:
            tau = tuple(RingElt.x(i, self.n, 0, 1) for i in range(self.n))
        self.tau = tuple(f.reshape(self.n, 0) for f in tau)
        self.convention = convention
        self.triple = triple
        self.m = 2 * self.n if triple else self.n
        self._delta_eps = {}

    def key(self):
        return (
            self.src.key(),
            self.tgt.key(),
            tuple(f.to_str() for f in self.tau),
            self.convention,
            self.triple,
        )

    def pair(self):
        """The two-block version of a three-block thickening (or self)."""
        if not self.triple:
            return self
        return Thickening(self.src, self.tgt, self.tau, self.convention, triple=False)

    # -- delta on the nilpotents ---------------------------------------

    def delta_eps(self, i, N):
        """delta(e_i) in the two-block shape (n, n)."""
        if (i, N) in self._delta_eps:
            return self._delta_eps[(i, N)]
        n, p = self.n, self.p
        tau_i = self.tau[i].at_trunc(N)
        eps = [RingElt.eps(j, n, n, N) for j in range(n)]
        g = self.src.delta_x(i, N)
        taylor = g.substitute(xs=[self.tau[j].at_trunc(N).reshape(n, n) + eps[j] for j in range(n)])
        mid = self.tgt.delta_poly(tau_i, N).reshape(n, n)
        cross = RingElt.zero(n, n, N)
        ti = tau_i.reshape(n, n)
        for j in range(1, p):
            cross = cross + Fraction(comb(p, j), p) * ti**j * eps[i] ** (p - j)
        if self.convention == "retraction":
            out = taylor - mid - cross
        else:
            out = taylor - mid + cross
        self._delta_eps[(i, N)] = out
        return out

    def phi_eps(self, i, N):
        e = RingElt.eps(i, self.n, self.n, N)
        return e**self.p + self.p * self.delta_eps(i, N)

    # -- Frobenius and delta on envelope elements ----------------------

    def _eps_images(self, m, N):
        n = self.n
        imgs = []
        for j in range(n):
            imgs.append(self.phi_eps(j, N).reshape(n, m))
        if m == 2 * n:
            # the second block carries the same structure with e -> second block
            second = [RingElt.eps(n + j, n, m, N) for j in range(n)]
            for j in range(n):
                imgs.append(self.phi_eps(j, N).reshape(n, m).substitute(es=second))
        return imgs

    def frobenius(self, f):
        if isinstance(f, EnvelopeElt):
            return f._wrap(self.frobenius(f.body))
        N = f.N
        m = f.m
        if m == 0:
            return self.tgt.frobenius_poly(f, N)
        if m not in (self.n, 2 * self.n):
            raise CoordinateMismatch(f"element has {m} e-slots, thickening supports {self.n} or {2 * self.n}")
        xs = [g.at_trunc(N).reshape(self.n, m) for g in self.tgt.phi]
        t = RingElt.t(self.n, m, max(N, 2)).truncate(N)
        t_img = (1 + t) ** self.p - 1
        return f.substitute(xs=xs, es=self._eps_images(m, N), t_img=t_img)

    def delta(self, f):
        if isinstance(f, EnvelopeElt):
            return f._wrap(self.delta(f.body))
        return exact_divide(self.frobenius(f) - f**self.p, self.p)


def delta_on_epsilon(psi1, psi2, tau=None, convention="stratification", N=1):
    """delta(e_i) for the thickening of psi1 by psi2 along tau, all i."""
    th = Thickening(psi1, psi2, tau, convention)
    return [th.delta_eps(i, N) for i in range(th.n)]


class EnvelopeElt:
    """A ring element tagged with its thickening and an optional e-degree cap.

    Operations exceeding the cap raise rather than silently truncate.
    """

    __slots__ = ("body", "thick", "cap")

    def __init__(self, body, thick, cap=None):
        if body.m not in (0, thick.n, 2 * thick.n):
            raise CoordinateMismatch("body shape does not match the thickening")
        if cap is not None and body.eps_degree() > cap:
            raise EpsilonCapExceeded(f"degree {body.eps_degree()} exceeds cap {cap}")
        self.body = body
        self.thick = thick
        self.cap = cap

    def _wrap(self, body, other=None):
        cap = self.cap
        if other is not None and isinstance(other, EnvelopeElt):
            if other.thick.key() != self.thick.key():
                raise CoordinateMismatch("envelope elements over different thickenings")
            if other.cap is not None:
                cap = other.cap if cap is None else min(cap, other.cap)
        if cap is not None and body.eps_degree() > cap:
            raise EpsilonCapExceeded(f"degree {body.eps_degree()} exceeds cap {cap}")
        return EnvelopeElt(body, self.thick, cap)

    def _body_of(self, other):
        return other.body if isinstance(other, EnvelopeElt) else other

    def __add__(self, other):
        return self._wrap(self.body + self._body_of(other), other)

    __radd__ = __add__

    def __sub__(self, other):
        return self._wrap(self.body - self._body_of(other), other)

    def __rsub__(self, other):
        return self._wrap(self._body_of(other) - self.body, other)

    def __neg__(self):
        return self._wrap(-self.body)

    def __mul__(self, other):
        return self._wrap(self.body * self._body_of(other), other)

    __rmul__ = __mul__

    def __pow__(self, k):
        return self._wrap(self.body**k)

    def __eq__(self, other):
        return self.body == self._body_of(other)

    def __repr__(self):
        return f"EnvelopeElt({self.body.to_str()})"


# -- gamma operations ------------------------------------------------


def gamma(thick, a, N=None, d=None):
    """gamma_p(a) = phi(a)/d - delta(a); d defaults to [p]_q."""
    body = a.body if isinstance(a, EnvelopeElt) else a
    N = body.N if N is None else N
    if d is None:
        d = q_integer(thick.p, N)
    out = exact_divide(thick.frobenius(body), d) - thick.delta(body)
    return a._wrap(out) if isinstance(a, EnvelopeElt) else out


def _digits(i, p):
    out = []
    while i:
        out.append(i % p)
        i //= p
    return out


def gamma_composite(thick, a, i, N=None, d=None):
    """gamma_i for composite i: product of iterated gamma_p over p-adic digits."""
    body = a.body if isinstance(a, EnvelopeElt) else a
    N = body.N if N is None else N
    p = thick.p
    result = RingElt.one(body.n, body.m, N)
    level = body
    for k, dig in enumerate(_digits(i, p)):
        if k > 0:
            level = gamma(thick, level, N, d)
        if dig:
            result = result * level**dig
    # note: level holds gamma_{p^k} applied iteratively; digit 0 of i uses a itself
    return a._wrap(result) if isinstance(a, EnvelopeElt) else result


def gamma_modified_recursion(thick, a, k, N):
    """The k-th modified divided power gamma_{p^k}(a) for d = u*[p]_q.

    Each step is computed by two algebraically equal but independently
    evaluated formulas; disagreement raises RouteMismatch.  The needed
    divisibility of phi(previous) by d^(m^(k-1)) is enforced by the exact
    division itself.
    """
    p = thick.p
    if p == 2:
        raise PrimeTwoUnsupported("modified divided powers need p odd")
    body = a.body if isinstance(a, EnvelopeElt) else a
    body = body.truncate(N) if body.N > N else body
    u = unit_u(p, N)
    d = u * q_integer(p, N)
    m = p - 1
    g = body
    for lvl in range(1, k + 1):
        M = m ** (lvl - 1)
        dM = d**M
        quot = exact_divide(thick.frobenius(g), dM)
        pref = exact_divide(dM - (d - p) ** M, p)
        form1 = -thick.delta(g) + pref * quot
        form2 = exact_divide(g**p - ((d - p) ** M) * quot, p)
        if form1 != form2:
            raise RouteMismatch(
                f"modified gamma level {lvl}: {form1.to_str()} != {form2.to_str()}"
            )
        g = form1
    return a._wrap(g) if isinstance(a, EnvelopeElt) else g


class GammaBasis:
    """Divided-power products Gamma_I = prod_j gamma_{I_j}(e_j), |I| <= K."""

    def __init__(self, thick, N, K, variant, elements, scalars, d):
        self.thick = thick
        self.N = N
        self.K = K
        self.variant = variant
        self.elements = elements
        self.scalars = scalars
        self.d = d

    def indices(self):
        return multi_indices(self.thick.n, self.K)

    def __getitem__(self, I):
        return self.elements[tuple(I)]

    def scalar(self, I):
        return self.scalars[tuple(I)]


_basis_cache = {}


def _mod_prime_power(c, q):
    """Residue of a rational with denominator coprime to q, in [0, q)."""
    num, den = c.numerator % q, c.denominator % q
    return num * pow(den, -1, q) % q


def _clearing_scalar(body, I, p, N):
    """The series n_I in t with n_I * body p-integral, n_I = p^(v_p(I!)) mod t.

    body's layer 0 is e^I / p^v exactly, so only the constant-in-x slot of
    the e^I coefficient can absorb corrections; every other slot must come
    out p-integral on its own for the basis to exist at this truncation.
    """
    n, m = body.n, body.m
    v = sum(legendre_vp(i, p) for i in I)
    pv = p**v
    layers = [body.t_layer(r) for r in range(N)]
    slot = (0, (0,) * n, tuple(I))
    coeffs = [Fraction(pv)]
    for r in range(1, N):
        acc = RingElt.zero(n, m, N)
        for s in range(r):
            if coeffs[s]:
                acc = acc + coeffs[s] * layers[r - s]
        y = pv * acc.terms.get(slot, Fraction(0))
        if y and frac_p_valuation(y, p) < 0:
            raise RouteMismatch(f"Gamma_{I}: denominator depth exceeds p^{v} at t^{r}")
        n_r = Fraction((-_mod_prime_power(y, pv)) % pv) if y else Fraction(0)
        fixed = acc + Fraction(n_r, pv) * RingElt(n, m, N, {slot: Fraction(1)})
        ok, _ = p_integral(fixed, p)
        if not ok:
            raise RouteMismatch(f"Gamma_{I}: layer t^{r} not clearable by a scalar series")
        coeffs.append(n_r)
    terms = {(r, (), ()): c for r, c in enumerate(coeffs) if c}
    return RingElt(0, 0, N, terms)


def gamma_basis(thick, N, K, variant="standard"):
    """The gamma product basis of the thickening, with normalizing scalars.

    variant "standard" uses d = [p]_q and iterated gamma_p; its scalars are
    the constants p^(v_p(I!)) pinning the classical limit Gamma_I = e^I/n_I
    at t = 0.  variant "modified" uses d = u*[p]_q with the two-form
    recursion; its scalars are t-series chosen so that n_I * Gamma_I is
    p-integral and congruent to e^I mod t^(p-1).
    """
    key = (thick.key(), N, K, variant)
    if key in _basis_cache:
        return _basis_cache[key]
    if variant not in ("standard", "modified"):
        raise ValueError(f"unknown basis variant {variant!r}")
    n, p = thick.n, thick.p
    if variant == "standard":
        d = q_integer(p, N)
    else:
        d = unit_u(p, N) * q_integer(p, N)

    maxk = 0
    while p ** (maxk + 1) <= K:
        maxk += 1
    towers = []
    for j in range(n):
        e = RingElt.eps(j, n, n, N)
        tower = [e]
        for k in range(1, maxk + 1):
            if variant == "standard":
                tower.append(gamma(thick, tower[-1], N, d))
            else:
                tower.append(gamma_modified_recursion(thick, e, k, N))
        towers.append(tower)

    def gamma_i(j, i):
        out = RingElt.one(n, n, N)
        for k, dig in enumerate(_digits(i, p)):
            if dig:
                out = out * towers[j][k] ** dig
        return out

    elements = {}
    scalars = {}
    for I in multi_indices(n, K):
        body = RingElt.one(n, n, N)
        for j, i in enumerate(I):
            if i:
                body = body * gamma_i(j, i)
        nI0 = Fraction(p ** sum(legendre_vp(i, p) for i in I))
        mono = RingElt.one(n, n, N)
        for j, i in enumerate(I):
            mono = mono * RingElt.eps(j, n, n, N) ** i
        # layer-0 pin: Gamma_I = e^I / p^(v_p(I!)) classically
        if body.t_layer(0) != mono * Fraction(1, nI0):
            raise RouteMismatch(f"Gamma_{I} has wrong classical limit")
        if variant == "standard":
            nI = RingElt.const(nI0, 0, 0, N)
        else:
            nI = _clearing_scalar(body, I, p, N)
            scaled = nI * body
            ok, _ = p_integral(scaled, p)
            if not ok:
                raise RouteMismatch(f"n_I * Gamma_{I} is not {p}-integral")
            tail = scaled - mono
            vt = tail.t_valuation()
            if not (vt is None or vt >= p - 1):
                raise RouteMismatch(f"modified Gamma_{I} not congruent to e^I mod t^{p - 1}")
        elements[I] = EnvelopeElt(body, thick)
        scalars[I] = nI
    out = GammaBasis(thick, N, K, variant, elements, scalars, d)
    _basis_cache[key] = out
    return out
