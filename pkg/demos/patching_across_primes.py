"""Gluing per-prime sections into one global, integer-coefficient section.

Each odd prime p <= N sees its own canonical section between two lifts,
integral at p but generally not elsewhere.  Clearing the p-power
fractional parts layer by layer in t produces a single operator that
every prime accepts, with only powers of 2 left in the denominators.
"""

from fractions import Fraction

from qweyl import (
    DiffOp,
    RingElt,
    assemble,
    dumps,
    nabla,
    relevant_primes,
    verify_uniqueness,
)

N, K = 5, 6
print("== primes that matter at truncation N =", N, "->", relevant_primes(N))

bundle = assemble("standard", "shift-1", N, K)
print("\n== the local canonical sections")
for p, sec in bundle.locals:
    print(f"  at p = {p}:")
    for Kk, c in sorted(sec.op.terms.items()):
        print(f"    d[{Kk[0]}]:", c.to_str())

print("\n== the merged global section")
for Kk, c in sorted(bundle.glob.op.terms.items()):
    print(f"    d[{Kk[0]}]:", c.to_str())
dens = {q.denominator for c in bundle.glob.op.terms.values() for q in c.coefficients()}
print("  coefficient denominators:", sorted(dens))

print("\n== every prime accepts the result, and the class is rigid")
src = bundle.locals[0][1].src
nb = nabla(src, 0, N)


def probe(den):
    c = RingElt.t(1, 0, N) * Fraction(1, den)
    return DiffOp.identity(1, N) + DiffOp(1, N, {Kk: c * v for Kk, v in nb.terms.items()})


print("  integral probe kept:", verify_uniqueness(bundle, probe(1)))
for den in (3, 5, 7):
    kept = verify_uniqueness(bundle, probe(den))
    tag = "breaks p-integrality" if not kept else "invisible (irrelevant prime)"
    print(f"  1/{den} probe: {tag}")

print("\n== the bundle serializes to one deterministic document")
doc = dumps(bundle)
print("  bytes:", len(doc), " stable:", doc == dumps(bundle))
