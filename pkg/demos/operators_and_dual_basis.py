"""The q-difference operator algebra: nabla, divided powers, and duality.

A differential operator here is a finite sum  sum_K a_K(x) d^[K]  with
d^[K] the divided powers of d/dx.  The q-derivation nabla lives in this
algebra once a Frobenius lift fixes the coordinate, and the operators a
lift admits form a subalgebra with its own integral basis.
"""

from qweyl import (
    DiffOp,
    RingElt,
    a_psi_member,
    apply_op,
    compose,
    dual_basis,
    multi_indices,
    nabla,
    nabla_power,
    pair,
    standard_system,
    structure_constants,
    to_nabla_basis,
)

p, N = 3, 4
psi = standard_system(p)
x = RingElt.x(0, 1, 0, N)
t = RingElt.t(1, 0, N)
nab = nabla(psi, 0, N)

print("== nabla is the q-difference quotient (f(qx) - f(x)) / ((q-1)x)")
for k in range(1, 5):
    print(f"  nabla(x^{k}) =", apply_op(nab, x**k).to_str())

print("\n== the q-Weyl relation: nabla x - q x nabla = 1")
xop = DiffOp.mult(x)
rel = compose(nab, xop) - compose(xop, nab) * (1 + t)
print("  nabla*x - (1+t)*x*nabla =", rel)
print("  equals identity:", rel == DiffOp.identity(1, N))

print("\n== expanding a divided power in the nabla basis")
for k in (1, 2, 3):
    coeffs = to_nabla_basis(DiffOp.partial(0, k, 1, N), psi)
    terms = {K: a.to_str() for K, a in coeffs.items() if not a.is_zero()}
    print(f"  d^[{k}] = sum over", sorted(terms), "with leading:", terms[max(terms)])
print("  d^[3] is not 3-integral in this basis:",
      not a_psi_member(DiffOp.partial(0, 3, 1, N), psi, 3))
print("  but it is away from 3:",
      a_psi_member(DiffOp.partial(0, 3, 1, N), psi, 5))

print("\n== the dual basis pairs against nabla powers as a delta")
duals = dual_basis(psi, N, 3)
for I in multi_indices(1, 3):
    row = [pair(nabla_power(psi, J, N), duals[I]).to_str() for J in multi_indices(1, 3)]
    print(f"  Gamma_{I[0]} pairs to", row)

print("\n== structure constants compose nabla powers, verified two ways")
tab = structure_constants((1,), (2,), psi, N)
rows = [(K, c) for K, c in sorted(tab.items()) if c]
for K, c in rows[:4]:
    print(f"  t_(1),(2)({K[0]}) =", c.to_str() if hasattr(c, "to_str") else c)
print(f"  ... and {len(rows) - 4} further rows supported at this truncation")
