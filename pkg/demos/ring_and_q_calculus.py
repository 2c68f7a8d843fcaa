"""Tour of the coefficient ring: truncated series in t = q - 1 over Q[x].

Everything downstream rests on exact rational arithmetic in
Q[x_1..x_n, e_1..e_m][t]/(t^N), so this demo sticks to the ring itself:
q-integers, Gauss binomials, exact division, and p-integrality reports.
"""

from fractions import Fraction

from qweyl import (
    RingElt,
    exact_divide,
    gauss_binomial,
    p_integral,
    q_factorial,
    q_integer,
    unit_u,
)

N = 5

print("== q-integers at truncation N =", N)
for k in range(1, 6):
    print(f"  [{k}]_q =", q_integer(k, N).to_str())

print("\n== the addition law [a+b]_q = [a]_q + q^a [b]_q")
t = RingElt.t(0, 0, N)
q = 1 + t
a, b = 3, 4
lhs = q_integer(a + b, N)
rhs = q_integer(a, N) + q**a * q_integer(b, N)
print("  [7]_q          =", lhs.to_str())
print("  [3]_q + q^3[4]_q =", rhs.to_str())
print("  equal:", lhs == rhs)

print("\n== Gauss binomials satisfy the q-Pascal recursion")
for top in range(2, 5):
    for k in range(1, top):
        got = gauss_binomial(top, k, N)
        want = gauss_binomial(top - 1, k - 1, N) + q**k * gauss_binomial(top - 1, k, N)
        assert got == want
print("  checked top <= 4, all exact")
print("  [4 choose 2]_q =", gauss_binomial(4, 2, N).to_str())

print("\n== the unit u clears [p]_q down to p plus a t-tail")
for p in (3, 5):
    d = unit_u(p, N) * q_integer(p, N)
    print(f"  u*[{p}]_q =", d.to_str())

print("\n== exact division refuses non-divisors")
x = RingElt.x(0, 1, 0, N)
f = (1 + t * x) * (2 + t**2 * x)
g = exact_divide(f, 1 + t * x)
print("  ((1+tx)(2+t^2 x)) / (1+tx) =", g.to_str())
try:
    exact_divide(RingElt.one(1, 0, N), t)
except Exception as ex:
    print("  1 / t ->", type(ex).__name__, "-", ex)

print("\n== p-integrality reports the worst valuation")
h = x + Fraction(1, 9) * t * x**2 + Fraction(5, 2) * t**2
ok, v = p_integral(h, 3)
print("  element:", h.to_str())
print("  3-integral:", ok, " min v_3 =", v)
print("  q-factorial [3]_q! =", q_factorial(3, N).to_str())
